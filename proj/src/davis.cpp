#include "sat/davis.hpp"

#include <algorithm>
#include <cstdio>
#include <set>
#include <stdexcept>

namespace sat::davis {

namespace fs = std::filesystem;

namespace {

std::vector<fs::path> list_with_extensions(const fs::path& dir, const std::set<std::string>& exts) {
    if (!fs::is_directory(dir)) throw std::runtime_error("not a directory: " + dir.string());
    std::vector<fs::path> out;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        std::string ext = entry.path().extension().string();
        std::transform(ext.begin(), ext.end(), ext.begin(), ::tolower);
        if (exts.count(ext)) out.push_back(entry.path());
    }
    std::sort(out.begin(), out.end());
    return out;
}

} // namespace

std::vector<fs::path> list_frames(const fs::path& dir) {
    return list_with_extensions(dir, {".jpg", ".jpeg", ".png"});
}

std::vector<fs::path> list_annotations(const fs::path& dir) {
    return list_with_extensions(dir, {".png"});
}

std::vector<int> object_ids(const io::LabelMap& labels) {
    std::set<int> ids;
    for (uint8_t v : labels.ids)
        if (v != 0) ids.insert(v);
    return {ids.begin(), ids.end()};
}

maskops::BinaryMask mask_for_id(const io::LabelMap& labels, int id) {
    maskops::BinaryMask m(labels.height, labels.width);
    for (size_t i = 0; i < labels.ids.size(); ++i) m.values[i] = labels.ids[i] == id ? 1 : 0;
    return m;
}

io::LabelMap labels_from_masks(const std::vector<maskops::BinaryMask>& per_object_masks) {
    if (per_object_masks.empty()) throw std::invalid_argument("labels_from_masks: no masks");
    io::LabelMap out;
    out.height = per_object_masks.front().height;
    out.width = per_object_masks.front().width;
    out.ids.assign(static_cast<size_t>(out.height) * out.width, 0);
    for (size_t k = 0; k < per_object_masks.size(); ++k) {
        const auto& m = per_object_masks[k];
        if (m.height != out.height || m.width != out.width)
            throw std::invalid_argument("labels_from_masks: shape mismatch");
        for (size_t i = 0; i < m.values.size(); ++i)
            if (m.values[i]) out.ids[i] = static_cast<uint8_t>(k + 1);
    }
    return out;
}

namespace {

std::string frame_name(int index) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%05d", index);
    return buf;
}

} // namespace

void write_sequence(const synthdata::Sequence& seq, const fs::path& root) {
    const fs::path img_dir = root / "JPEGImages" / seq.name;
    const fs::path ann_dir = root / "Annotations" / seq.name;
    fs::create_directories(img_dir);
    fs::create_directories(ann_dir);
    for (size_t f = 0; f < seq.frames.size(); ++f) {
        io::write_png_rgb((img_dir / (frame_name(static_cast<int>(f)) + ".png")).string(),
                          to_u8(seq.frames[f]));
        io::write_indexed_png((ann_dir / (frame_name(static_cast<int>(f)) + ".png")).string(),
                              labels_from_masks(seq.masks[f]));
    }
}

synthdata::Sequence load_sequence(const fs::path& frames_dir, const fs::path& annotations_dir) {
    synthdata::Sequence seq;
    seq.name = frames_dir.filename().string();
    const auto frames = list_frames(frames_dir);
    const auto anns = list_annotations(annotations_dir);
    if (frames.empty()) throw std::runtime_error("no frames in " + frames_dir.string());
    if (anns.size() != frames.size())
        throw std::runtime_error("annotation count does not match frames for " + frames_dir.string());

    const auto first = io::read_indexed_png(anns.front().string());
    const auto ids = object_ids(first);
    if (ids.empty()) throw std::runtime_error("no objects in " + anns.front().string());

    for (size_t f = 0; f < frames.size(); ++f) {
        seq.frames.push_back(to_float(io::read_image_rgb(frames[f].string())));
        const auto labels = io::read_indexed_png(anns[f].string());
        std::vector<maskops::BinaryMask> per_object;
        for (int id : ids) per_object.push_back(mask_for_id(labels, id));
        seq.masks.push_back(std::move(per_object));
    }
    return seq;
}

std::vector<synthdata::Sequence> load_dataset(const fs::path& root) {
    const fs::path img_root = root / "JPEGImages";
    const fs::path ann_root = root / "Annotations";
    if (!fs::is_directory(img_root)) throw std::runtime_error("missing JPEGImages under " + root.string());
    std::vector<fs::path> seq_dirs;
    for (const auto& entry : fs::directory_iterator(img_root))
        if (entry.is_directory()) seq_dirs.push_back(entry.path());
    std::sort(seq_dirs.begin(), seq_dirs.end());
    std::vector<synthdata::Sequence> out;
    for (const auto& dir : seq_dirs) out.push_back(load_sequence(dir, ann_root / dir.filename()));
    return out;
}

} // namespace sat::davis
