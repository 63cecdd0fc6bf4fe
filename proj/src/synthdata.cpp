#include "sat/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace sat::synthdata {

const char* shape_name(Shape s) {
    switch (s) {
        case Shape::kDisk: return "disk";
        case Shape::kRectangle: return "rectangle";
        case Shape::kLShape: return "lshape";
    }
    return "disk";
}

const char* event_name(EventKind k) {
    switch (k) {
        case EventKind::kOcclusion: return "occlusion";
        case EventKind::kTruncation: return "truncation";
        case EventKind::kFastMotion: return "fast_motion";
        case EventKind::kDisappearance: return "disappearance";
        case EventKind::kDistractor: return "distractor";
    }
    return "occlusion";
}

Shape shape_from_name(const std::string& name) {
    if (name == "disk") return Shape::kDisk;
    if (name == "rectangle") return Shape::kRectangle;
    if (name == "lshape") return Shape::kLShape;
    throw std::invalid_argument("unknown shape: " + name);
}

EventKind event_from_name(const std::string& name) {
    if (name == "occlusion") return EventKind::kOcclusion;
    if (name == "truncation") return EventKind::kTruncation;
    if (name == "fast_motion") return EventKind::kFastMotion;
    if (name == "disappearance") return EventKind::kDisappearance;
    if (name == "distractor") return EventKind::kDistractor;
    throw std::invalid_argument("unknown event kind: " + name);
}

void SceneScript::validate() const {
    if (frame_count <= 0 || width <= 0 || height <= 0) throw std::invalid_argument("script: bad dimensions");
    if (objects.empty()) throw std::invalid_argument("script: at least one object required");
    for (const auto& o : objects) {
        if (o.size <= 0) throw std::invalid_argument("script: object size must be positive");
        if (o.waypoints.empty()) throw std::invalid_argument("script: object needs at least one waypoint");
    }
    for (const auto& e : events) {
        if (e.begin < 0 || e.begin >= frame_count || e.end <= e.begin || e.end > frame_count)
            throw std::invalid_argument("script: event range outside [0, frame_count)");
        if (e.object < 0 || e.object >= static_cast<int>(objects.size()))
            throw std::invalid_argument("script: event references unknown object");
    }
}

namespace {

double interp_waypoints(const std::vector<Waypoint>& wps, int frame, bool x_axis) {
    auto value = [&](const Waypoint& w) { return x_axis ? w.x : w.y; };
    if (frame <= wps.front().frame) return value(wps.front());
    if (frame >= wps.back().frame) return value(wps.back());
    for (size_t i = 1; i < wps.size(); ++i) {
        if (frame <= wps[i].frame) {
            const auto& a = wps[i - 1];
            const auto& b = wps[i];
            if (b.frame == a.frame) return value(b);
            const double t = static_cast<double>(frame - a.frame) / (b.frame - a.frame);
            return (1 - t) * value(a) + t * value(b);
        }
    }
    return value(wps.back());
}

struct ShapeGeom {
    Shape shape;
    double cx, cy, half_w, half_h;

    bool contains(double px, double py) const {
        const double dx = px - cx, dy = py - cy;
        switch (shape) {
            case Shape::kDisk: {
                const double nx = dx / half_w, ny = dy / half_h;
                return nx * nx + ny * ny <= 1.0;
            }
            case Shape::kRectangle:
                return std::abs(dx) <= half_w && std::abs(dy) <= half_h;
            case Shape::kLShape:
                // square minus its top-right quadrant
                if (std::abs(dx) > half_w || std::abs(dy) > half_h) return false;
                return !(dx > 0.0 && dy < 0.0);
        }
        return false;
    }
};

ShapeGeom geom_for(const ObjectSpec& o, double cx, double cy, double scale) {
    const double s = o.size * scale;
    const double ar = std::sqrt(std::max(o.aspect, 1e-6));
    return ShapeGeom{o.shape, cx, cy, s * ar, s / ar};
}

} // namespace

double object_scale(const SceneScript& script, int object, int frame) {
    const auto& curve = script.objects[object].scale_curve;
    if (curve.empty()) return 1.0;
    if (frame <= curve.front().frame) return curve.front().scale;
    if (frame >= curve.back().frame) return curve.back().scale;
    for (size_t i = 1; i < curve.size(); ++i) {
        if (frame <= curve[i].frame) {
            const auto& a = curve[i - 1];
            const auto& b = curve[i];
            if (b.frame == a.frame) return b.scale;
            const double t = static_cast<double>(frame - a.frame) / (b.frame - a.frame);
            return (1 - t) * a.scale + t * b.scale;
        }
    }
    return curve.back().scale;
}

double saliency_side(const SceneScript& script, int object, int frame) {
    const auto& o = script.objects[object];
    const auto g = geom_for(o, 0, 0, object_scale(script, object, frame));
    const double w = 2 * g.half_w, h = 2 * g.half_h;
    const double p = (w + h) / 2;
    return std::sqrt((w + p) * (h + p));
}

std::array<double, 2> object_center(const SceneScript& script, int object, int frame) {
    const auto& o = script.objects[object];
    double x = interp_waypoints(o.waypoints, frame, true);
    double y = interp_waypoints(o.waypoints, frame, false);

    // persistent fast-motion jumps, aimed at the frame center
    for (const auto& e : script.events) {
        if (e.kind != EventKind::kFastMotion || e.object != object || frame < e.begin) continue;
        const double side = saliency_side(script, object, std::max(0, e.begin - 1));
        const double px = interp_waypoints(o.waypoints, e.begin - 1, true);
        const double py = interp_waypoints(o.waypoints, e.begin - 1, false);
        double dx = script.width / 2.0 - px;
        double dy = script.height / 2.0 - py;
        const double norm = std::hypot(dx, dy);
        if (norm < 1e-9) {
            dx = 1.0;
            dy = 0.0;
        } else {
            dx /= norm;
            dy /= norm;
        }
        x += 0.9 * side * dx;
        y += 0.9 * side * dy;
    }

    const double scale = object_scale(script, object, frame);
    const auto g = geom_for(o, 0, 0, scale);

    bool truncating = false;
    for (const auto& e : script.events) {
        if (e.kind != EventKind::kTruncation || e.object != object) continue;
        if (frame < e.begin || frame >= e.end) continue;
        truncating = true;
        // blend toward a position whose center sits on the nearest border
        const double mid = (e.begin + e.end - 1) / 2.0;
        const double half = std::max(1.0, (e.end - 1 - e.begin) / 2.0);
        const double t = std::max(0.0, 1.0 - std::abs(frame - mid) / half);
        double bx = x, by = y;
        const double d_left = x, d_right = script.width - 1 - x;
        const double d_top = y, d_bottom = script.height - 1 - y;
        const double dmin = std::min({d_left, d_right, d_top, d_bottom});
        if (dmin == d_left) bx = 0.0;
        else if (dmin == d_right) bx = script.width - 1.0;
        else if (dmin == d_top) by = 0.0;
        else by = script.height - 1.0;
        x = (1 - t) * x + t * bx;
        y = (1 - t) * y + t * by;
    }

    if (!truncating) {
        // keep most of the shape inside the frame
        const double mx = 0.6 * g.half_w, my = 0.6 * g.half_h;
        x = std::clamp(x, mx, script.width - 1.0 - mx);
        y = std::clamp(y, my, script.height - 1.0 - my);
    }
    return {x, y};
}

Sequence render(const SceneScript& script) {
    script.validate();
    const int w = script.width, h = script.height;
    const int num_objects = static_cast<int>(script.objects.size());

    // static background, generated once per sequence
    Image background(3, h, w);
    {
        Rng rng(mix_seed(script.seed, 0xb06));
        const double base[3] = {script.background[0] / 255.0, script.background[1] / 255.0,
                                script.background[2] / 255.0};
        struct Blob {
            double cx, cy, rx, ry, amp;
        };
        std::vector<Blob> blobs;
        if (script.textured)
            for (int i = 0; i < 4; ++i)
                blobs.push_back({rng.uniform(0, w), rng.uniform(0, h), rng.uniform(w * 0.2, w * 0.5),
                                 rng.uniform(h * 0.2, h * 0.5), rng.uniform(-0.06, 0.06)});
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                double shade = script.textured ? 0.05 * (static_cast<double>(y) / h - 0.5) : 0.0;
                for (const auto& b : blobs) {
                    const double dx = (x - b.cx) / b.rx, dy = (y - b.cy) / b.ry;
                    shade += b.amp * std::exp(-(dx * dx + dy * dy));
                }
                for (int c = 0; c < 3; ++c) background.at(c, y, x) = std::clamp(base[c] + shade, 0.0, 1.0);
            }
    }

    Sequence seq;
    seq.name = script.name;
    seq.frames.reserve(script.frame_count);
    seq.masks.reserve(script.frame_count);

    constexpr int kOwnerBackground = -1, kOwnerDistractor = -2, kOwnerOccluder = -3;
    const std::array<double, 3> occluder_color{66 / 255.0, 66 / 255.0, 78 / 255.0};

    for (int f = 0; f < script.frame_count; ++f) {
        std::vector<int> owner(static_cast<size_t>(h) * w, kOwnerBackground);
        std::vector<std::array<double, 3>> owner_color(1);

        auto paint = [&](const ShapeGeom& g, int who) {
            const int x0 = std::max(0, static_cast<int>(std::floor(g.cx - g.half_w - 1)));
            const int x1 = std::min(w - 1, static_cast<int>(std::ceil(g.cx + g.half_w + 1)));
            const int y0 = std::max(0, static_cast<int>(std::floor(g.cy - g.half_h - 1)));
            const int y1 = std::min(h - 1, static_cast<int>(std::ceil(g.cy + g.half_h + 1)));
            for (int y = y0; y <= y1; ++y)
                for (int x = x0; x <= x1; ++x)
                    if (g.contains(x, y)) owner[static_cast<size_t>(y) * w + x] = who;
        };

        auto hidden = [&](EventKind kind, int obj) {
            for (const auto& e : script.events)
                if (e.kind == kind && e.object == obj && f >= e.begin && f < e.end) return true;
            return false;
        };

        // distractors first (below the targets)
        for (const auto& e : script.events) {
            if (e.kind != EventKind::kDistractor || f < e.begin || f >= e.end) continue;
            const auto& o = script.objects[e.object];
            const auto c = object_center(script, e.object, f);
            const double scale = object_scale(script, e.object, f);
            const auto tg = geom_for(o, c[0], c[1], scale);
            const double phase = 0.12 * (f - e.begin);
            double dx = 2.6 * tg.half_w * std::cos(phase);
            double dy = 2.2 * tg.half_h * std::sin(phase) + 1.4 * tg.half_h;
            double px = std::clamp(c[0] + dx, tg.half_w, w - 1.0 - tg.half_w);
            double py = std::clamp(c[1] + dy, tg.half_h, h - 1.0 - tg.half_h);
            paint(geom_for(o, px, py, scale), kOwnerDistractor);
        }

        // targets in id order
        std::vector<ShapeGeom> geoms;
        for (int k = 0; k < num_objects; ++k) {
            const auto c = object_center(script, k, f);
            const auto g = geom_for(script.objects[k], c[0], c[1], object_scale(script, k, f));
            geoms.push_back(g);
            if (!hidden(EventKind::kDisappearance, k)) paint(g, k);
        }

        // occluder bars on top; widen until >= 60% of the target is covered
        for (const auto& e : script.events) {
            if (e.kind != EventKind::kOcclusion || f < e.begin || f >= e.end) continue;
            const auto& g = geoms[e.object];
            size_t total = 0;
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x)
                    if (owner[static_cast<size_t>(y) * w + x] == e.object) ++total;
            if (total == 0) continue;
            double bar_half = 0.36 * g.half_w;
            for (int iter = 0; iter < 12; ++iter) {
                size_t covered = 0;
                for (int y = 0; y < h; ++y)
                    for (int x = 0; x < w; ++x)
                        if (owner[static_cast<size_t>(y) * w + x] == e.object &&
                            std::abs(x - g.cx) <= bar_half)
                            ++covered;
                if (static_cast<double>(covered) / static_cast<double>(total) >= 0.6) break;
                bar_half *= 1.25;
            }
            const int bx0 = std::max(0, static_cast<int>(std::floor(g.cx - bar_half)));
            const int bx1 = std::min(w - 1, static_cast<int>(std::ceil(g.cx + bar_half)));
            for (int y = 0; y < h; ++y)
                for (int x = bx0; x <= bx1; ++x)
                    if (std::abs(x - g.cx) <= bar_half) owner[static_cast<size_t>(y) * w + x] = kOwnerOccluder;
        }

        // compose the frame
        Image frame = background;
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                const int who = owner[static_cast<size_t>(y) * w + x];
                if (who == kOwnerBackground) continue;
                const std::array<uint8_t, 3>* col = nullptr;
                if (who >= 0) col = &script.objects[who].color;
                else if (who == kOwnerDistractor) col = nullptr;
                for (int c = 0; c < 3; ++c) {
                    double v;
                    if (who == kOwnerOccluder) v = occluder_color[c];
                    else if (who == kOwnerDistractor) {
                        // identical look to its object; find which event painted it
                        v = 0.0;
                        for (const auto& e : script.events)
                            if (e.kind == EventKind::kDistractor && f >= e.begin && f < e.end)
                                v = script.objects[e.object].color[c] / 255.0;
                    } else v = (*col)[c] / 255.0;
                    frame.at(c, y, x) = v;
                }
            }

        // masks before noise
        std::vector<maskops::BinaryMask> frame_masks;
        for (int k = 0; k < num_objects; ++k) {
            maskops::BinaryMask m(h, w);
            for (size_t i = 0; i < owner.size(); ++i) m.values[i] = owner[i] == k ? 1 : 0;
            frame_masks.push_back(std::move(m));
        }

        if (script.noise > 0.0) {
            Rng nrng(mix_seed(script.seed, 0x401 + static_cast<uint64_t>(f)));
            for (double& v : frame.data) v = std::clamp(v + nrng.normal(0.0, script.noise), 0.0, 1.0);
        }

        seq.frames.push_back(std::move(frame));
        seq.masks.push_back(std::move(frame_masks));
    }
    return seq;
}

double OracleSegmenter::quality_at(int frame) const {
    double q = 1.0;
    for (const auto& [f, v] : quality_schedule)
        if (frame >= f) q = v;
    return q;
}

maskops::ProbabilityMap oracle_predict(const maskops::BinaryMask& gt_mask, const OracleSegmenter& oracle,
                                       int frame_index) {
    Rng rng(mix_seed(oracle.seed, static_cast<uint64_t>(frame_index)));
    const int h = gt_mask.height, w = gt_mask.width;

    int dy = 0, dx = 0;
    if (oracle.jitter_radius > 0) {
        dy = rng.uniform_int(-oracle.jitter_radius, oracle.jitter_radius);
        dx = rng.uniform_int(-oracle.jitter_radius, oracle.jitter_radius);
    }

    const double quality = oracle.quality_at(frame_index);
    maskops::ProbabilityMap p(h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const int sy = y - dy, sx = x - dx;
            uint8_t v = (sy >= 0 && sy < h && sx >= 0 && sx < w) ? gt_mask.at(sy, sx) : 0;
            if (oracle.flip_rate > 0.0 && rng.uniform() < oracle.flip_rate) v = v ? 0 : 1;
            p.at(y, x) = quality * v;
        }
    return p;
}

// ---- script text format ----

std::string SceneScript::to_text() const {
    std::ostringstream os;
    os << "name = " << name << "\n";
    os << "frames = " << frame_count << "\n";
    os << "width = " << width << "\n";
    os << "height = " << height << "\n";
    os << "seed = " << seed << "\n";
    os << "noise = " << noise << "\n";
    os << "background = " << int(background[0]) << " " << int(background[1]) << " " << int(background[2]) << "\n";
    os << "textured = " << (textured ? 1 : 0) << "\n";
    for (size_t k = 0; k < objects.size(); ++k) {
        const auto& o = objects[k];
        os << "object " << shape_name(o.shape) << " " << int(o.color[0]) << " " << int(o.color[1]) << " "
           << int(o.color[2]) << " " << o.size << " " << o.aspect << "\n";
        for (const auto& wp : o.waypoints) os << "waypoint " << wp.frame << " " << wp.x << " " << wp.y << "\n";
        for (const auto& sp : o.scale_curve) os << "scale " << sp.frame << " " << sp.scale << "\n";
        for (const auto& e : events)
            if (e.object == static_cast<int>(k))
                os << "event " << event_name(e.kind) << " " << e.begin << " " << e.end << "\n";
    }
    return os.str();
}

SceneScript SceneScript::from_text(const std::string& text) {
    SceneScript s;
    s.objects.clear();
    s.events.clear();
    std::istringstream is(text);
    std::string line;
    int current_object = -1;
    while (std::getline(is, line)) {
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        std::istringstream ls(line);
        std::string head;
        if (!(ls >> head)) continue;
        if (head == "object") {
            ObjectSpec o;
            std::string shape;
            int r, g, b;
            ls >> shape >> r >> g >> b >> o.size >> o.aspect;
            if (!ls) throw std::invalid_argument("script: bad object line: " + line);
            o.shape = shape_from_name(shape);
            o.color = {static_cast<uint8_t>(r), static_cast<uint8_t>(g), static_cast<uint8_t>(b)};
            s.objects.push_back(o);
            current_object = static_cast<int>(s.objects.size()) - 1;
        } else if (head == "waypoint") {
            if (current_object < 0) throw std::invalid_argument("script: waypoint before object");
            Waypoint wp;
            ls >> wp.frame >> wp.x >> wp.y;
            if (!ls) throw std::invalid_argument("script: bad waypoint line: " + line);
            s.objects[current_object].waypoints.push_back(wp);
        } else if (head == "scale") {
            if (current_object < 0) throw std::invalid_argument("script: scale before object");
            ScalePoint sp;
            ls >> sp.frame >> sp.scale;
            if (!ls) throw std::invalid_argument("script: bad scale line: " + line);
            s.objects[current_object].scale_curve.push_back(sp);
        } else if (head == "event") {
            if (current_object < 0) throw std::invalid_argument("script: event before object");
            Event e;
            std::string kind;
            ls >> kind >> e.begin >> e.end;
            if (!ls) throw std::invalid_argument("script: bad event line: " + line);
            e.kind = event_from_name(kind);
            e.object = current_object;
            s.events.push_back(e);
        } else {
            std::string eq, value;
            ls >> eq;
            std::getline(ls, value);
            const auto a = value.find_first_not_of(" \t");
            value = a == std::string::npos ? "" : value.substr(a);
            if (eq != "=") throw std::invalid_argument("script: expected 'key = value': " + line);
            if (head == "name") s.name = value;
            else if (head == "frames") s.frame_count = std::stoi(value);
            else if (head == "width") s.width = std::stoi(value);
            else if (head == "height") s.height = std::stoi(value);
            else if (head == "seed") s.seed = std::stoull(value);
            else if (head == "noise") s.noise = std::stod(value);
            else if (head == "textured") s.textured = value != "0";
            else if (head == "background") {
                std::istringstream vs(value);
                int r, g, b;
                vs >> r >> g >> b;
                s.background = {static_cast<uint8_t>(r), static_cast<uint8_t>(g), static_cast<uint8_t>(b)};
            } else throw std::invalid_argument("script: unknown key " + head);
        }
    }
    s.validate();
    return s;
}

// ---- canned scripts ----

namespace {

const std::array<std::array<uint8_t, 3>, 6> kPalette{{{235, 87, 60},
                                                      {70, 160, 235},
                                                      {90, 200, 110},
                                                      {240, 200, 70},
                                                      {200, 90, 220},
                                                      {240, 140, 40}}};

ObjectSpec make_object(Rng& rng, int frames, int width, int height, int color_index) {
    ObjectSpec o;
    const double r = rng.uniform();
    o.shape = r < 0.4 ? Shape::kDisk : (r < 0.75 ? Shape::kRectangle : Shape::kLShape);
    o.color = kPalette[color_index % kPalette.size()];
    o.size = rng.uniform(16.0, 26.0);
    o.aspect = o.shape == Shape::kRectangle ? rng.uniform(0.7, 1.5) : 1.0;
    const int hops = 3;
    for (int i = 0; i <= hops; ++i) {
        Waypoint wp;
        wp.frame = i * (frames - 1) / hops;
        wp.x = rng.uniform(0.22 * width, 0.78 * width);
        wp.y = rng.uniform(0.22 * height, 0.78 * height);
        o.waypoints.push_back(wp);
    }
    o.scale_curve = {{0, 1.0}, {frames - 1, rng.uniform(0.85, 1.3)}};
    return o;
}

} // namespace

SceneScript easy_script(uint64_t seed, int frames, const std::string& name) {
    Rng rng(mix_seed(seed, 0xea5));
    SceneScript s;
    s.name = name;
    s.frame_count = frames;
    s.seed = seed;
    s.noise = 0.01;
    s.objects = {make_object(rng, frames, s.width, s.height, static_cast<int>(seed % kPalette.size()))};
    // slow it down: reuse first and last waypoints only
    auto& o = s.objects.front();
    const Waypoint a = o.waypoints.front(), b = o.waypoints.back();
    o.waypoints = {a, {frames - 1, (a.x + b.x) / 2, (a.y + b.y) / 2}};
    return s;
}

std::vector<SceneScript> training_scripts(int count, uint64_t seed) {
    std::vector<SceneScript> scripts;
    for (int i = 0; i < count; ++i) {
        Rng rng(mix_seed(seed, 0x7a0 + static_cast<uint64_t>(i)));
        SceneScript s;
        s.name = "train" + std::to_string(i);
        s.frame_count = 24;
        s.seed = mix_seed(seed, 0x7b0 + static_cast<uint64_t>(i));
        s.noise = 0.015;
        s.objects = {make_object(rng, s.frame_count, s.width, s.height, i)};
        if (i % 3 == 1) {
            // second object as a standing distractor for harder pairs
            s.objects.push_back(make_object(rng, s.frame_count, s.width, s.height, i + 2));
        }
        scripts.push_back(std::move(s));
    }
    return scripts;
}

std::vector<SceneScript> ablation_suite(uint64_t seed) {
    std::vector<SceneScript> suite;
    for (int i = 0; i < 10; ++i) {
        Rng rng(mix_seed(seed, 0xab1 + static_cast<uint64_t>(i)));
        SceneScript s;
        s.name = "abl" + std::to_string(i);
        s.frame_count = 64;
        s.seed = mix_seed(seed, 0xab2 + static_cast<uint64_t>(i));
        s.noise = 0.01;
        s.objects = {make_object(rng, s.frame_count, s.width, s.height, i)};
        const int mid = 18 + static_cast<int>(rng.index(8));
        switch (i % 5) {
            case 0:
            case 3:
                s.events.push_back({EventKind::kFastMotion, 0, mid, mid + 1});
                break;
            case 1:
            case 4:
                s.events.push_back({EventKind::kOcclusion, 0, mid, mid + 9});
                break;
            case 2:
                s.events.push_back({EventKind::kDisappearance, 0, mid, mid + 6});
                break;
        }
        if (i == 7) s.events.push_back({EventKind::kDistractor, 0, 8, s.frame_count});
        if (i == 9) s.events.push_back({EventKind::kTruncation, 0, 40, 52});
        suite.push_back(std::move(s));
    }
    return suite;
}

} // namespace sat::synthdata
