#pragma once

#include "sat/imageio.hpp"
#include "sat/maskops.hpp"
#include "sat/synthdata.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace sat::davis {

// sorted frame image paths (.jpg / .jpeg / .png) in a directory
std::vector<std::filesystem::path> list_frames(const std::filesystem::path& dir);
std::vector<std::filesystem::path> list_annotations(const std::filesystem::path& dir);

std::vector<int> object_ids(const io::LabelMap& labels);
maskops::BinaryMask mask_for_id(const io::LabelMap& labels, int id);
io::LabelMap labels_from_masks(const std::vector<maskops::BinaryMask>& per_object_masks);

// JPEGImages/<name>/%05d.png and Annotations/<name>/%05d.png under root
void write_sequence(const synthdata::Sequence& seq, const std::filesystem::path& root);

synthdata::Sequence load_sequence(const std::filesystem::path& frames_dir,
                                  const std::filesystem::path& annotations_dir);

// all sequences under root (DAVIS layout)
std::vector<synthdata::Sequence> load_dataset(const std::filesystem::path& root);

} // namespace sat::davis
