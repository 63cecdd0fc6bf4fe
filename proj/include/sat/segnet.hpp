#pragma once

#include "sat/feedback.hpp"
#include "sat/geometry.hpp"
#include "sat/image.hpp"
#include "sat/maskops.hpp"
#include "sat/nn.hpp"

#include <map>
#include <memory>
#include <string>
#include <vector>

namespace sat::segnet {

struct NetworkConfig {
    int saliency_input = 257;
    int similarity_input = 303;
    int template_input = 127;
    int global_input = 129;
    // channel widths after the stages at strides 2, 4, 8, 16
    std::vector<int> saliency_widths{12, 16, 24, 32};
    std::vector<int> similarity_widths{8, 12, 16, 24};
    std::vector<int> global_widths{8, 12, 16, 24};
    int stage_depth = 1; // convs per stage (first one strided)
    int fusion_channels = 32;
    std::vector<int> decoder_widths{24, 16, 12}; // at strides 16, 8, 4
    int reg_channels = 16;
    bool use_correlation = true; // fusion ablation hooks
    bool use_global = true;
    std::string preset = "desk";
    uint64_t seed = 1;

    void validate() const;
    // spatial size of a backbone feature at the given stride for an odd input
    static int feature_size(int input, int stride) { return (input - 1) / stride + 1; }

    static NetworkConfig named_preset(const std::string& name);

    std::string to_text() const;
    static NetworkConfig from_text(const std::string& text);
};

struct SegOutput {
    maskops::ProbabilityMap prob_stride4;
    maskops::ProbabilityMap aux_stride8;
    maskops::ProbabilityMap aux_stride16;
    geometry::Box reg_box_crop; // similarity-crop pixel coordinates
    double reg_quality = 0.0;   // best quality score in [0,1]
};

// Forward pass handles kept alive for loss construction and inspection.
struct ForwardGraph {
    nn::Var logits4, logits8, logits16;
    nn::Var quality_logits; // (1, Hr, Wr)
    nn::Var ltrb_raw;       // (4, Hr, Wr)
    nn::Var corr_raw;       // depthwise correlation response
    nn::Var fused;
    SegOutput output;
};

// elementwise three-way feature sum (all inputs already in fusion space)
nn::Var fuse(const nn::Var& saliency_high, const nn::Var& correlated, const nn::Var& global_feature);

class SegNet {
public:
    explicit SegNet(const NetworkConfig& config);

    const NetworkConfig& config() const { return cfg_; }

    // All parameters in declaration order.
    const std::vector<nn::Var>& params() const { return params_; }
    nn::Var param(const std::string& name) const;

    // Freeze/unfreeze by name prefix ("similarity." / "reg.").
    void set_trainable(const std::string& prefix, bool trainable);

    struct SaliencyFeatures {
        nn::Var s4, s8, s16; // backbone features
    };
    SaliencyFeatures saliency_encode(const nn::Var& crop) const;

    nn::Var embed_template(const nn::Var& template_crop) const;
    nn::Var embed_search(const nn::Var& search_crop) const;

    // raw global-branch backbone feature of a global_input-sized crop
    nn::Var global_encode(const nn::Var& global_crop) const;

    // Full forward. template_emb from embed_template; global_raw may be null
    // (treated as zero contribution, also used by the ablation hooks).
    ForwardGraph forward(const Image& saliency_crop, const Image& search_crop, const nn::Var& template_emb,
                         const nn::Var& global_raw) const;

    // Convenience wrappers around image -> graph input conversion.
    static nn::Var image_input(const Image& img);

    // Feature extractor for the Global Modeling Loop (inference path).
    feedback::GlobalFeature extract_global_feature(const Image& global_crop) const;
    feedback::FeatureExtractor global_extractor(double mu) const;

    // decoded regression box in crop coordinates from head outputs
    geometry::Box decode_reg_box(const nn::Tensor& quality_logits, const nn::Tensor& ltrb_raw,
                                 double* quality_out = nullptr) const;

    void save_checkpoint(const std::string& path) const;
    static std::unique_ptr<SegNet> load_checkpoint(const std::string& path);

    // response-map location -> similarity-crop pixel (shared by head decoding
    // and training target assignment)
    double response_to_crop(int response_index) const;
    int response_size() const;

private:
    struct Conv {
        nn::Var w, b;
        int stride = 1, pad = 1;
    };
    struct Backbone {
        std::vector<Conv> convs;
        std::vector<int> stage_end; // conv count at the end of each stage
    };

    Backbone make_backbone(const std::string& prefix, int in_channels, const std::vector<int>& widths,
                           Rng& rng);
    Conv make_conv(const std::string& name, int cin, int cout, int k, int stride, int pad, Rng& rng);
    std::vector<nn::Var> encode_stages(const Backbone& bb, const nn::Var& input) const;

    NetworkConfig cfg_;
    Backbone saliency_, similarity_, global_;
    Conv proj_saliency_, proj_corr_, proj_global_;
    Conv reg_tower0_, reg_tower1_, reg_quality_, reg_ltrb_;
    Conv dec16_, dec8_, dec4_;
    Conv head16_, head8_, head4_;
    std::vector<nn::Var> params_;
    std::map<std::string, nn::Var> by_name_;
};

maskops::ProbabilityMap to_prob_map(const nn::Tensor& sigmoid_map);

} // namespace sat::segnet
