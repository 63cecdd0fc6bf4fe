#pragma once

#include "sat/image.hpp"
#include "sat/maskops.hpp"
#include "sat/rng.hpp"

#include <array>
#include <string>
#include <vector>

namespace sat::synthdata {

enum class Shape { kDisk, kRectangle, kLShape };
enum class EventKind { kOcclusion, kTruncation, kFastMotion, kDisappearance, kDistractor };

const char* shape_name(Shape s);
const char* event_name(EventKind k);
Shape shape_from_name(const std::string& name);
EventKind event_from_name(const std::string& name);

struct Waypoint {
    int frame = 0;
    double x = 0.0, y = 0.0;
};

struct ScalePoint {
    int frame = 0;
    double scale = 1.0;
};

struct ObjectSpec {
    Shape shape = Shape::kDisk;
    std::array<uint8_t, 3> color{230, 80, 60};
    double size = 20.0;   // half-extent in pixels at scale 1
    double aspect = 1.0;  // width / height for rectangles
    std::vector<Waypoint> waypoints;
    std::vector<ScalePoint> scale_curve;
};

struct Event {
    EventKind kind = EventKind::kOcclusion;
    int object = 0;
    int begin = 0;
    int end = 0; // exclusive
};

struct SceneScript {
    std::string name = "seq";
    int frame_count = 60;
    int width = 256;
    int height = 256;
    uint64_t seed = 0;
    double noise = 0.0;
    std::array<uint8_t, 3> background{46, 50, 60};
    bool textured = true;
    std::vector<ObjectSpec> objects;
    std::vector<Event> events;

    void validate() const;
    std::string to_text() const;
    static SceneScript from_text(const std::string& text);
};

struct Sequence {
    std::string name;
    std::vector<Image> frames;                                // [frame]
    std::vector<std::vector<maskops::BinaryMask>> masks;      // [frame][object]
    int object_count() const { return masks.empty() ? 0 : static_cast<int>(masks.front().size()); }
};

// Deterministic rendering; masks are the exact visible support of each object
// before pixel noise is applied.
Sequence render(const SceneScript& script);

// Center of the target at a frame after trajectory, events, and clamping.
std::array<double, 2> object_center(const SceneScript& script, int object, int frame);
double object_scale(const SceneScript& script, int object, int frame);

// Saliency search-region side for the object's current extent (context rule
// with factor 1); fast-motion jumps are sized against this.
double saliency_side(const SceneScript& script, int object, int frame);

struct OracleSegmenter {
    double flip_rate = 0.0;
    int jitter_radius = 0;
    std::vector<std::pair<int, double>> quality_schedule{{0, 1.0}}; // stepwise (frame, quality)
    uint64_t seed = 0;

    double quality_at(int frame) const;
};

// Stand-in for the segmentation network: quality-scaled, flip-noised,
// boundary-jittered ground truth. Zero noise and quality 1 reproduce the
// ground truth exactly.
maskops::ProbabilityMap oracle_predict(const maskops::BinaryMask& gt_mask, const OracleSegmenter& oracle,
                                       int frame_index);

// Ten-sequence suite with fast-motion, occlusion, truncation, disappearance
// and distractor events; used by the control-loop harness.
std::vector<SceneScript> ablation_suite(uint64_t seed = 11);

// Single well-behaved sequence (moderate motion, no events).
SceneScript easy_script(uint64_t seed, int frames, const std::string& name = "easy");
// Moderate-difficulty scripts for training data.
std::vector<SceneScript> training_scripts(int count, uint64_t seed);

} // namespace sat::synthdata
