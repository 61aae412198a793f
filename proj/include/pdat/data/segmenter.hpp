#ifndef PDAT_DATA_SEGMENTER_HPP
#define PDAT_DATA_SEGMENTER_HPP

#include <memory>
#include <string>
#include <vector>

#include "pdat/core/image.hpp"

namespace pdat::data {

struct SegmentCandidate {
  int frame_index = 0;
  Box box;
  double confidence = 0.0;  // in [0, 1]
};

// Region-proposal source for unlabeled frames. Real segmentation models run
// offline; their output enters through OfflineMaskSegmenter, while
// ThresholdSegmenter covers synthetic corpora without external tools.
class Segmenter {
 public:
  virtual ~Segmenter() = default;
  virtual std::vector<SegmentCandidate> segment(const Image& frame, int frame_index) const = 0;
};

// Foreground = pixels deviating from the frame median by more than
// `intensity_threshold`, grouped into 8-connected components. The deviation
// test keeps it polarity-agnostic (bright-on-dark and inverted frames both
// work). Confidence is the component's fill ratio of its bounding box.
class ThresholdSegmenter : public Segmenter {
 public:
  explicit ThresholdSegmenter(int intensity_threshold = 40)
      : intensity_threshold_(intensity_threshold) {}
  std::vector<SegmentCandidate> segment(const Image& frame, int frame_index) const override;

 private:
  int intensity_threshold_;
};

// Reads <mask_dir>/<frame_index>.csv with rows "x,y,w,h,confidence".
// A missing file yields no candidates.
class OfflineMaskSegmenter : public Segmenter {
 public:
  explicit OfflineMaskSegmenter(std::string mask_dir) : mask_dir_(std::move(mask_dir)) {}
  std::vector<SegmentCandidate> segment(const Image& frame, int frame_index) const override;

 private:
  std::string mask_dir_;
};

struct CandidateFilter {
  double min_area = 16.0;      // px^2
  double max_rel_area = 0.5;   // fraction of the frame
};

// Runs the segmenter and applies the confidence and area filters. Segmenter
// failure degrades to an empty list with a warning.
std::vector<SegmentCandidate> segment_frame(const Image& frame, const Segmenter& segmenter,
                                            double conf_threshold,
                                            const CandidateFilter& filter = {},
                                            int frame_index = 0);

}  // namespace pdat::data

#endif
