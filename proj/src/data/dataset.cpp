#include "pdat/data/dataset.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "pdat/core/common.hpp"
#include "pdat/core/io.hpp"

namespace fs = std::filesystem;

namespace pdat::data {

namespace {

std::vector<Box> read_groundtruth(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open annotation file " + path);
  std::vector<Box> boxes;
  std::string line;
  while (std::getline(is, line)) {
    if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
    for (auto& ch : line)
      if (ch == ',' || ch == '\t') ch = ' ';
    std::istringstream ss(line);
    Box b;
    if (!(ss >> b.x >> b.y >> b.w >> b.h))
      throw DataError("malformed annotation line in " + path + ": '" + line + "'");
    // 1-based pixel origin on disk
    b.x -= 1.0;
    b.y -= 1.0;
    boxes.push_back(b);
  }
  return boxes;
}

}  // namespace

std::vector<Sequence> load_dataset(const std::string& root_path, Domain domain) {
  if (!fs::is_directory(root_path)) throw DataError("dataset root is not a directory: " + root_path);

  std::vector<std::string> seq_dirs;
  for (const auto& entry : fs::directory_iterator(root_path))
    if (entry.is_directory()) seq_dirs.push_back(entry.path().filename().string());
  std::sort(seq_dirs.begin(), seq_dirs.end());

  std::vector<Sequence> sequences;
  for (const auto& seq_id : seq_dirs) {
    fs::path seq_path = fs::path(root_path) / seq_id;
    fs::path img_dir = seq_path / "img";
    if (!fs::is_directory(img_dir)) continue;

    std::vector<std::string> frame_files;
    for (const auto& entry : fs::directory_iterator(img_dir)) {
      std::string ext = entry.path().extension().string();
      if (ext == ".jpg" || ext == ".jpeg" || ext == ".png")
        frame_files.push_back(entry.path().string());
    }
    std::sort(frame_files.begin(), frame_files.end());
    if (frame_files.empty()) throw DataError("sequence " + seq_id + " has no frames");

    Sequence seq;
    seq.id = seq_id;
    seq.domain = domain;

    std::vector<size_t> kept;  // indices into frame_files actually loaded
    for (size_t i = 0; i < frame_files.size(); ++i) {
      Image img = read_image(frame_files[i]);
      if (img.empty()) {
        warn("unreadable frame skipped: " + frame_files[i]);
        continue;
      }
      if (!seq.frames.empty() &&
          (img.width != seq.frames[0].width || img.height != seq.frames[0].height ||
           img.channels != seq.frames[0].channels))
        throw DataError("sequence " + seq_id + ": frame dimensions differ at " + frame_files[i]);
      seq.frames.push_back(std::move(img));
      kept.push_back(i);
    }
    if (seq.frames.empty()) throw DataError("sequence " + seq_id + " has no readable frames");

    fs::path gt_path = seq_path / "groundtruth_rect.txt";
    bool have_gt = fs::exists(gt_path);
    if (domain == Domain::source && !have_gt)
      throw DataError("source sequence " + seq_id + " is missing groundtruth_rect.txt");
    if (have_gt) {
      std::vector<Box> all = read_groundtruth(gt_path.string());
      if (all.size() != frame_files.size())
        throw DataError("annotation count mismatch in sequence " + seq_id + ": " +
                        std::to_string(all.size()) + " boxes for " +
                        std::to_string(frame_files.size()) + " frames");
      for (size_t i : kept) seq.boxes.push_back(all[i]);
      int w = seq.frames[0].width, h = seq.frames[0].height;
      for (size_t i = 0; i < seq.boxes.size(); ++i)
        if (!seq.boxes[i].inside(w, h))
          throw DataError("sequence " + seq_id + ": box " + std::to_string(i) +
                          " outside image bounds");
    }
    sequences.push_back(std::move(seq));
  }
  return sequences;
}

std::vector<int> sample_keyframes(const Sequence& seq, int stride) {
  if (stride < 1) throw DataError("sample_keyframes: stride must be >= 1");
  std::vector<int> idx;
  for (int i = 0; i < static_cast<int>(seq.frames.size()); i += stride) idx.push_back(i);
  return idx;
}

}  // namespace pdat::data
