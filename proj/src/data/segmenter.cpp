#include "pdat/data/segmenter.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <queue>
#include <sstream>

#include "pdat/core/common.hpp"
#include "pdat/core/imgproc.hpp"

namespace pdat::data {

namespace {

uint8_t gray_median(const Image& gray) {
  int hist[256] = {0};
  for (uint8_t v : gray.data) ++hist[v];
  long long half = static_cast<long long>(gray.data.size()) / 2;
  long long acc = 0;
  for (int i = 0; i < 256; ++i) {
    acc += hist[i];
    if (acc > half) return static_cast<uint8_t>(i);
  }
  return 255;
}

}  // namespace

std::vector<SegmentCandidate> ThresholdSegmenter::segment(const Image& frame,
                                                          int frame_index) const {
  Image gray = to_gray(frame);
  uint8_t med = gray_median(gray);
  int h = gray.height, w = gray.width;
  std::vector<uint8_t> mask(static_cast<size_t>(h) * w, 0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if (std::abs(static_cast<int>(gray.at(y, x, 0)) - med) > intensity_threshold_)
        mask[static_cast<size_t>(y) * w + x] = 1;

  // 8-connected components via BFS
  std::vector<int> label(static_cast<size_t>(h) * w, -1);
  std::vector<SegmentCandidate> out;
  for (int y0 = 0; y0 < h; ++y0)
    for (int x0 = 0; x0 < w; ++x0) {
      size_t i0 = static_cast<size_t>(y0) * w + x0;
      if (!mask[i0] || label[i0] >= 0) continue;
      int id = static_cast<int>(out.size());
      label[i0] = id;
      int min_x = x0, max_x = x0, min_y = y0, max_y = y0;
      long long area = 0;
      std::queue<std::pair<int, int>> q;
      q.push({y0, x0});
      while (!q.empty()) {
        auto [y, x] = q.front();
        q.pop();
        ++area;
        min_x = std::min(min_x, x);
        max_x = std::max(max_x, x);
        min_y = std::min(min_y, y);
        max_y = std::max(max_y, y);
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            int ny = y + dy, nx = x + dx;
            if (ny < 0 || ny >= h || nx < 0 || nx >= w) continue;
            size_t ni = static_cast<size_t>(ny) * w + nx;
            if (mask[ni] && label[ni] < 0) {
              label[ni] = id;
              q.push({ny, nx});
            }
          }
      }
      SegmentCandidate cand;
      cand.frame_index = frame_index;
      cand.box = {static_cast<double>(min_x), static_cast<double>(min_y),
                  static_cast<double>(max_x - min_x + 1), static_cast<double>(max_y - min_y + 1)};
      cand.confidence = static_cast<double>(area) / cand.box.area();
      out.push_back(cand);
    }
  return out;
}

std::vector<SegmentCandidate> OfflineMaskSegmenter::segment(const Image& frame,
                                                            int frame_index) const {
  std::filesystem::path path =
      std::filesystem::path(mask_dir_) / (std::to_string(frame_index) + ".csv");
  std::vector<SegmentCandidate> out;
  std::ifstream is(path);
  if (!is) return out;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
    for (auto& ch : line)
      if (ch == ',') ch = ' ';
    std::istringstream ss(line);
    SegmentCandidate cand;
    cand.frame_index = frame_index;
    if (!(ss >> cand.box.x >> cand.box.y >> cand.box.w >> cand.box.h >> cand.confidence)) {
      warn(path.string() + ":" + std::to_string(lineno) + ": malformed mask row skipped");
      continue;
    }
    cand.confidence = std::clamp(cand.confidence, 0.0, 1.0);
    out.push_back(cand);
  }
  (void)frame;
  return out;
}

std::vector<SegmentCandidate> segment_frame(const Image& frame, const Segmenter& segmenter,
                                            double conf_threshold, const CandidateFilter& filter,
                                            int frame_index) {
  if (conf_threshold < 0.0 || conf_threshold > 1.0)
    throw DataError("segment_frame: conf_threshold must lie in [0, 1]");
  std::vector<SegmentCandidate> raw;
  try {
    raw = segmenter.segment(frame, frame_index);
  } catch (const std::exception& e) {
    warn(std::string("segmenter failed on frame ") + std::to_string(frame_index) + ": " +
         e.what());
    return {};
  }
  double frame_area = static_cast<double>(frame.width) * frame.height;
  std::vector<SegmentCandidate> out;
  for (const auto& cand : raw) {
    if (cand.confidence < conf_threshold) continue;
    double area = cand.box.area();
    if (area < filter.min_area || area > filter.max_rel_area * frame_area) continue;
    if (!cand.box.inside(frame.width, frame.height)) continue;
    out.push_back(cand);
  }
  return out;
}

}  // namespace pdat::data
