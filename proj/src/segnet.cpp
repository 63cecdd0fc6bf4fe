#include "sat/segnet.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace sat::segnet {

void NetworkConfig::validate() const {
    auto odd = [](int v) { return v > 0 && v % 2 == 1; };
    if (!odd(saliency_input) || !odd(similarity_input) || !odd(template_input) || !odd(global_input))
        throw std::invalid_argument("NetworkConfig: input sizes must be odd and positive");
    if (saliency_widths.size() != 4 || similarity_widths.size() != 4 || global_widths.size() != 4)
        throw std::invalid_argument("NetworkConfig: four stage widths required (strides 2,4,8,16)");
    if (decoder_widths.size() != 3) throw std::invalid_argument("NetworkConfig: three decoder widths required");
    for (int v : saliency_widths)
        if (v <= 0) throw std::invalid_argument("NetworkConfig: widths must be positive");
    if (fusion_channels <= 0 || reg_channels <= 0 || stage_depth < 1)
        throw std::invalid_argument("NetworkConfig: bad channel/depth configuration");
    if (feature_size(template_input, 16) >= feature_size(similarity_input, 16))
        throw std::invalid_argument("NetworkConfig: template embedding must be smaller than search embedding");
    if (feature_size(saliency_input, 16) < 3)
        throw std::invalid_argument("NetworkConfig: saliency input too small");
}

NetworkConfig NetworkConfig::named_preset(const std::string& name) {
    NetworkConfig c;
    c.preset = name;
    if (name == "desk") {
        // defaults
    } else if (name == "r50s") {
        // best-effort reconstruction of the shrinked ResNet-50 backbone
        // (expansion rate 1); not required by any desk-scale check
        c.saliency_widths = {64, 64, 128, 256};
        c.global_widths = {64, 64, 128, 256};
        c.similarity_widths = {24, 48, 96, 128};
        c.stage_depth = 3;
        c.fusion_channels = 128;
        c.decoder_widths = {96, 64, 48};
        c.reg_channels = 64;
    } else if (name == "alexnet") {
        c.saliency_widths = {24, 48, 96, 128};
        c.global_widths = {24, 48, 96, 128};
        c.similarity_widths = {24, 48, 96, 128};
        c.stage_depth = 2;
        c.fusion_channels = 96;
        c.decoder_widths = {64, 48, 32};
        c.reg_channels = 48;
    } else if (name == "toy") {
        c.saliency_input = 33;
        c.similarity_input = 33;
        c.template_input = 17;
        c.global_input = 17;
        c.saliency_widths = {4, 6, 6, 8};
        c.similarity_widths = {4, 4, 6, 8};
        c.global_widths = {4, 4, 6, 8};
        c.fusion_channels = 8;
        c.decoder_widths = {8, 6, 6};
        c.reg_channels = 6;
    } else {
        throw std::invalid_argument("unknown network preset: " + name);
    }
    c.validate();
    return c;
}

namespace {

std::string join_ints(const std::vector<int>& v) {
    std::ostringstream os;
    for (size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i];
    return os.str();
}

std::vector<int> split_ints(const std::string& s) {
    std::vector<int> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(std::stoi(item));
    return out;
}

} // namespace

std::string NetworkConfig::to_text() const {
    std::ostringstream os;
    os << "preset = " << preset << "\n";
    os << "saliency_input = " << saliency_input << "\n";
    os << "similarity_input = " << similarity_input << "\n";
    os << "template_input = " << template_input << "\n";
    os << "global_input = " << global_input << "\n";
    os << "saliency_widths = " << join_ints(saliency_widths) << "\n";
    os << "similarity_widths = " << join_ints(similarity_widths) << "\n";
    os << "global_widths = " << join_ints(global_widths) << "\n";
    os << "stage_depth = " << stage_depth << "\n";
    os << "fusion_channels = " << fusion_channels << "\n";
    os << "decoder_widths = " << join_ints(decoder_widths) << "\n";
    os << "reg_channels = " << reg_channels << "\n";
    os << "use_correlation = " << (use_correlation ? 1 : 0) << "\n";
    os << "use_global = " << (use_global ? 1 : 0) << "\n";
    os << "seed = " << seed << "\n";
    return os.str();
}

NetworkConfig NetworkConfig::from_text(const std::string& text) {
    NetworkConfig c;
    std::istringstream is(text);
    std::string line;
    while (std::getline(is, line)) {
        const auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        auto trim = [](std::string s) {
            const auto a = s.find_first_not_of(" \t");
            const auto b = s.find_last_not_of(" \t\r");
            return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
        };
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));
        if (key == "preset") c.preset = val;
        else if (key == "saliency_input") c.saliency_input = std::stoi(val);
        else if (key == "similarity_input") c.similarity_input = std::stoi(val);
        else if (key == "template_input") c.template_input = std::stoi(val);
        else if (key == "global_input") c.global_input = std::stoi(val);
        else if (key == "saliency_widths") c.saliency_widths = split_ints(val);
        else if (key == "similarity_widths") c.similarity_widths = split_ints(val);
        else if (key == "global_widths") c.global_widths = split_ints(val);
        else if (key == "stage_depth") c.stage_depth = std::stoi(val);
        else if (key == "fusion_channels") c.fusion_channels = std::stoi(val);
        else if (key == "decoder_widths") c.decoder_widths = split_ints(val);
        else if (key == "reg_channels") c.reg_channels = std::stoi(val);
        else if (key == "use_correlation") c.use_correlation = val != "0";
        else if (key == "use_global") c.use_global = val != "0";
        else if (key == "seed") c.seed = std::stoull(val);
        else throw std::invalid_argument("NetworkConfig: unknown key " + key);
    }
    c.validate();
    return c;
}

nn::Var fuse(const nn::Var& saliency_high, const nn::Var& correlated, const nn::Var& global_feature) {
    return nn::add(nn::add(saliency_high, correlated), global_feature);
}

SegNet::Conv SegNet::make_conv(const std::string& name, int cin, int cout, int k, int stride, int pad,
                               Rng& rng) {
    Conv c;
    nn::Tensor w({cout, cin, k, k});
    nn::fill_he_normal(w, cin * k * k, rng);
    c.w = nn::parameter(std::move(w), name + ".w");
    c.b = nn::parameter(nn::Tensor({cout}), name + ".b");
    c.stride = stride;
    c.pad = pad;
    params_.push_back(c.w);
    params_.push_back(c.b);
    by_name_[c.w->name] = c.w;
    by_name_[c.b->name] = c.b;
    return c;
}

SegNet::Backbone SegNet::make_backbone(const std::string& prefix, int in_channels,
                                       const std::vector<int>& widths, Rng& rng) {
    Backbone bb;
    int cin = in_channels;
    for (size_t s = 0; s < widths.size(); ++s) {
        const int cout = widths[s];
        bb.convs.push_back(make_conv(prefix + ".s" + std::to_string(s) + ".conv0", cin, cout, 3, 2, 1, rng));
        for (int d = 1; d < cfg_.stage_depth; ++d)
            bb.convs.push_back(
                make_conv(prefix + ".s" + std::to_string(s) + ".conv" + std::to_string(d), cout, cout, 3, 1, 1, rng));
        bb.stage_end.push_back(static_cast<int>(bb.convs.size()));
        cin = cout;
    }
    return bb;
}

SegNet::SegNet(const NetworkConfig& config) : cfg_(config) {
    cfg_.validate();
    Rng rng(cfg_.seed);
    saliency_ = make_backbone("saliency", 3, cfg_.saliency_widths, rng);
    similarity_ = make_backbone("similarity", 3, cfg_.similarity_widths, rng);
    global_ = make_backbone("global", 3, cfg_.global_widths, rng);

    proj_saliency_ = make_conv("fuse.proj_saliency", cfg_.saliency_widths[3], cfg_.fusion_channels, 1, 1, 0, rng);
    proj_corr_ = make_conv("fuse.proj_corr", cfg_.similarity_widths[3], cfg_.fusion_channels, 1, 1, 0, rng);
    proj_global_ = make_conv("fuse.proj_global", cfg_.global_widths[3], cfg_.fusion_channels, 1, 1, 0, rng);

    reg_tower0_ = make_conv("reg.tower0", cfg_.similarity_widths[3], cfg_.reg_channels, 3, 1, 1, rng);
    reg_tower1_ = make_conv("reg.tower1", cfg_.reg_channels, cfg_.reg_channels, 3, 1, 1, rng);
    reg_quality_ = make_conv("reg.quality", cfg_.reg_channels, 1, 1, 1, 0, rng);
    reg_ltrb_ = make_conv("reg.ltrb", cfg_.reg_channels, 4, 1, 1, 0, rng);

    dec16_ = make_conv("decoder.d16", cfg_.fusion_channels, cfg_.decoder_widths[0], 3, 1, 1, rng);
    dec8_ = make_conv("decoder.d8", cfg_.decoder_widths[0] + cfg_.saliency_widths[2], cfg_.decoder_widths[1], 3, 1,
                      1, rng);
    dec4_ = make_conv("decoder.d4", cfg_.decoder_widths[1] + cfg_.saliency_widths[1], cfg_.decoder_widths[2], 3, 1,
                      1, rng);
    head16_ = make_conv("decoder.head16", cfg_.decoder_widths[0], 1, 1, 1, 0, rng);
    head8_ = make_conv("decoder.head8", cfg_.decoder_widths[1], 1, 1, 1, 0, rng);
    head4_ = make_conv("decoder.head4", cfg_.decoder_widths[2], 1, 1, 1, 0, rng);
}

nn::Var SegNet::param(const std::string& name) const {
    const auto it = by_name_.find(name);
    if (it == by_name_.end()) throw std::out_of_range("no parameter named " + name);
    return it->second;
}

void SegNet::set_trainable(const std::string& prefix, bool trainable) {
    for (auto& p : params_)
        if (p->name.rfind(prefix, 0) == 0) p->trainable = trainable;
}

std::vector<nn::Var> SegNet::encode_stages(const Backbone& bb, const nn::Var& input) const {
    std::vector<nn::Var> features;
    nn::Var x = input;
    size_t next_stage = 0;
    for (size_t i = 0; i < bb.convs.size(); ++i) {
        const auto& c = bb.convs[i];
        x = nn::relu(nn::conv2d(x, c.w, c.b, c.stride, c.pad));
        if (next_stage < bb.stage_end.size() && static_cast<int>(i + 1) == bb.stage_end[next_stage]) {
            features.push_back(x);
            ++next_stage;
        }
    }
    return features; // strides 2, 4, 8, 16
}

nn::Var SegNet::image_input(const Image& img) {
    nn::Tensor t({img.channels, img.height, img.width});
    // center the [0,1] range
    for (size_t i = 0; i < img.data.size(); ++i) t.data[i] = img.data[i] - 0.5;
    return nn::constant(std::move(t));
}

SegNet::SaliencyFeatures SegNet::saliency_encode(const nn::Var& crop) const {
    const auto& s = crop->value.shape;
    if (s.size() != 3 || s[1] != cfg_.saliency_input || s[2] != cfg_.saliency_input)
        throw std::invalid_argument("saliency_encode: crop must be " + std::to_string(cfg_.saliency_input) +
                                    " square");
    auto f = encode_stages(saliency_, crop);
    return {f[1], f[2], f[3]};
}

nn::Var SegNet::embed_template(const nn::Var& template_crop) const {
    const auto& s = template_crop->value.shape;
    if (s.size() != 3 || s[1] != cfg_.template_input || s[2] != cfg_.template_input)
        throw std::invalid_argument("embed_template: wrong resolution");
    return encode_stages(similarity_, template_crop).back();
}

nn::Var SegNet::embed_search(const nn::Var& search_crop) const {
    const auto& s = search_crop->value.shape;
    if (s.size() != 3 || s[1] != cfg_.similarity_input || s[2] != cfg_.similarity_input)
        throw std::invalid_argument("embed_search: wrong resolution");
    return encode_stages(similarity_, search_crop).back();
}

nn::Var SegNet::global_encode(const nn::Var& global_crop) const {
    const auto& s = global_crop->value.shape;
    if (s.size() != 3 || s[1] != cfg_.global_input || s[2] != cfg_.global_input)
        throw std::invalid_argument("global_encode: wrong resolution");
    return encode_stages(global_, global_crop).back();
}

int SegNet::response_size() const {
    return NetworkConfig::feature_size(cfg_.similarity_input, 16) -
           NetworkConfig::feature_size(cfg_.template_input, 16) + 1;
}

double SegNet::response_to_crop(int response_index) const {
    const int te = NetworkConfig::feature_size(cfg_.template_input, 16);
    return 16.0 * response_index + 8.0 * (te - 1);
}

geometry::Box SegNet::decode_reg_box(const nn::Tensor& quality_logits, const nn::Tensor& ltrb_raw,
                                     double* quality_out) const {
    const int hr = quality_logits.shape[1], wr = quality_logits.shape[2];
    int best = 0;
    for (int i = 1; i < hr * wr; ++i)
        if (quality_logits.data[i] > quality_logits.data[best]) best = i;
    const int bi = best / wr, bj = best % wr;
    if (quality_out) *quality_out = 1.0 / (1.0 + std::exp(-quality_logits.data[best]));

    const double cx = response_to_crop(bj);
    const double cy = response_to_crop(bi);
    const int plane = hr * wr;
    // offsets are predicted in log space, scaled by the backbone stride
    auto off = [&](int k) { return std::exp(ltrb_raw.data[k * plane + best]) * 16.0; };
    const double lim = cfg_.similarity_input - 1;
    double x0 = std::clamp(cx - off(0), 0.0, lim);
    double y0 = std::clamp(cy - off(1), 0.0, lim);
    double x1 = std::clamp(cx + off(2), 0.0, lim);
    double y1 = std::clamp(cy + off(3), 0.0, lim);
    if (x1 - x0 < 2.0) {
        const double c = (x0 + x1) / 2;
        x0 = std::clamp(c - 1.0, 0.0, lim - 2.0);
        x1 = x0 + 2.0;
    }
    if (y1 - y0 < 2.0) {
        const double c = (y0 + y1) / 2;
        y0 = std::clamp(c - 1.0, 0.0, lim - 2.0);
        y1 = y0 + 2.0;
    }
    return geometry::Box::from_corners(x0, y0, x1, y1);
}

ForwardGraph SegNet::forward(const Image& saliency_crop, const Image& search_crop, const nn::Var& template_emb,
                             const nn::Var& global_raw) const {
    ForwardGraph g;
    const auto sal = saliency_encode(image_input(saliency_crop));
    const int fh = sal.s16->value.shape[1], fw = sal.s16->value.shape[2];

    // similarity branch: correlation + regression head
    const nn::Var search_emb = embed_search(image_input(search_crop));
    g.corr_raw = nn::xcorr_depthwise(search_emb, template_emb);
    nn::Var reg = nn::relu(nn::conv2d(g.corr_raw, reg_tower0_.w, reg_tower0_.b, 1, 1));
    reg = nn::relu(nn::conv2d(reg, reg_tower1_.w, reg_tower1_.b, 1, 1));
    g.quality_logits = nn::conv2d(reg, reg_quality_.w, reg_quality_.b, 1, 0);
    g.ltrb_raw = nn::conv2d(reg, reg_ltrb_.w, reg_ltrb_.b, 1, 0);

    // three-way fusion at stride 16
    nn::Var sal_p = nn::conv2d(sal.s16, proj_saliency_.w, proj_saliency_.b, 1, 0);
    nn::Var corr_p;
    if (cfg_.use_correlation) {
        corr_p = nn::resize_bilinear(nn::conv2d(g.corr_raw, proj_corr_.w, proj_corr_.b, 1, 0), fh, fw);
    } else {
        corr_p = nn::constant(nn::Tensor({cfg_.fusion_channels, fh, fw}));
    }
    nn::Var glob_p;
    if (cfg_.use_global && global_raw) {
        glob_p = nn::resize_bilinear(nn::conv2d(global_raw, proj_global_.w, proj_global_.b, 1, 0), fh, fw);
    } else {
        glob_p = nn::constant(nn::Tensor({cfg_.fusion_channels, fh, fw}));
    }
    g.fused = fuse(sal_p, corr_p, glob_p);

    // decoder with saliency skips
    nn::Var d16 = nn::relu(nn::conv2d(g.fused, dec16_.w, dec16_.b, 1, 1));
    g.logits16 = nn::conv2d(d16, head16_.w, head16_.b, 1, 0);
    const int h8 = sal.s8->value.shape[1], w8 = sal.s8->value.shape[2];
    nn::Var d8 = nn::concat_channels(nn::resize_bilinear(d16, h8, w8), sal.s8);
    d8 = nn::relu(nn::conv2d(d8, dec8_.w, dec8_.b, 1, 1));
    g.logits8 = nn::conv2d(d8, head8_.w, head8_.b, 1, 0);
    const int h4 = sal.s4->value.shape[1], w4 = sal.s4->value.shape[2];
    nn::Var d4 = nn::concat_channels(nn::resize_bilinear(d8, h4, w4), sal.s4);
    d4 = nn::relu(nn::conv2d(d4, dec4_.w, dec4_.b, 1, 1));
    g.logits4 = nn::conv2d(d4, head4_.w, head4_.b, 1, 0);

    g.output.prob_stride4 = to_prob_map(nn::sigmoid(g.logits4)->value);
    g.output.aux_stride8 = to_prob_map(nn::sigmoid(g.logits8)->value);
    g.output.aux_stride16 = to_prob_map(nn::sigmoid(g.logits16)->value);
    g.output.reg_box_crop = decode_reg_box(g.quality_logits->value, g.ltrb_raw->value, &g.output.reg_quality);
    return g;
}

feedback::GlobalFeature SegNet::extract_global_feature(const Image& global_crop) const {
    const nn::Var f = global_encode(image_input(global_crop));
    feedback::GlobalFeature g;
    g.channels = f->value.shape[0];
    g.height = f->value.shape[1];
    g.width = f->value.shape[2];
    g.values = f->value.data;
    return g;
}

feedback::FeatureExtractor SegNet::global_extractor(double mu) const {
    return [this, mu](const Image& crop) {
        feedback::GlobalFeature g = extract_global_feature(crop);
        g.step = mu;
        return g;
    };
}

maskops::ProbabilityMap to_prob_map(const nn::Tensor& sigmoid_map) {
    if (sigmoid_map.shape.size() != 3 || sigmoid_map.shape[0] != 1)
        throw std::invalid_argument("to_prob_map: expected (1,H,W)");
    maskops::ProbabilityMap p(sigmoid_map.shape[1], sigmoid_map.shape[2]);
    p.values = sigmoid_map.data;
    return p;
}

// ---- checkpoint io ----

void SegNet::save_checkpoint(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open checkpoint for writing: " + path);
    const std::string cfg = cfg_.to_text();
    out << "SAT-CHECKPOINT 1\n";
    out << "config " << cfg.size() << "\n" << cfg;
    out << "tensors " << params_.size() << "\n";
    size_t total = 0;
    for (const auto& p : params_) {
        out << p->name << " " << p->value.shape.size();
        for (int d : p->value.shape) out << " " << d;
        out << "\n";
        total += p->value.size();
    }
    out << "data " << total << "\n";
    for (const auto& p : params_)
        out.write(reinterpret_cast<const char*>(p->value.data.data()),
                  static_cast<std::streamsize>(p->value.data.size() * sizeof(double)));
    if (!out) throw std::runtime_error("checkpoint write failed: " + path);
}

std::unique_ptr<SegNet> SegNet::load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
    std::string magic;
    int version = 0;
    in >> magic >> version;
    if (magic != "SAT-CHECKPOINT" || version != 1) throw std::runtime_error("bad checkpoint header: " + path);
    std::string word;
    size_t cfg_bytes = 0;
    in >> word >> cfg_bytes;
    if (word != "config") throw std::runtime_error("bad checkpoint config section");
    in.ignore(1); // newline
    std::string cfg_text(cfg_bytes, '\0');
    in.read(cfg_text.data(), static_cast<std::streamsize>(cfg_bytes));
    auto net = std::make_unique<SegNet>(NetworkConfig::from_text(cfg_text));

    size_t count = 0;
    in >> word >> count;
    if (word != "tensors") throw std::runtime_error("bad checkpoint tensors section");
    std::vector<std::pair<std::string, std::vector<int>>> entries(count);
    for (auto& [name, shape] : entries) {
        size_t rank = 0;
        in >> name >> rank;
        shape.resize(rank);
        for (auto& d : shape) in >> d;
    }
    size_t total = 0;
    in >> word >> total;
    if (word != "data") throw std::runtime_error("bad checkpoint data section");
    in.ignore(1);
    for (const auto& [name, shape] : entries) {
        nn::Var p = net->param(name);
        if (p->value.shape != shape) throw std::runtime_error("checkpoint shape mismatch for " + name);
        in.read(reinterpret_cast<char*>(p->value.data.data()),
                static_cast<std::streamsize>(p->value.data.size() * sizeof(double)));
    }
    if (!in) throw std::runtime_error("checkpoint truncated: " + path);
    return net;
}

} // namespace sat::segnet
