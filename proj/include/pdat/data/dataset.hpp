#ifndef PDAT_DATA_DATASET_HPP
#define PDAT_DATA_DATASET_HPP

#include <optional>
#include <string>
#include <vector>

#include "pdat/core/image.hpp"

namespace pdat::data {

enum class Domain { source, target };

inline const char* domain_name(Domain d) { return d == Domain::source ? "source" : "target"; }

struct Sequence {
  std::string id;
  std::vector<Image> frames;
  std::vector<Box> boxes;  // empty when unlabeled
  Domain domain = Domain::source;

  bool has_boxes() const { return !boxes.empty(); }
};

// Layout: <root>/<seq_id>/img/<%06d>.{jpg,png}; source sequences must have
// <root>/<seq_id>/groundtruth_rect.txt with one "x,y,w,h" line per frame
// (comma or tab separated, 1-based origin). Target annotations are loaded
// when present (needed to evaluate) and ignored otherwise.
std::vector<Sequence> load_dataset(const std::string& root_path, Domain domain);

// Indices 0, stride, 2*stride, ... < frame count.
std::vector<int> sample_keyframes(const Sequence& seq, int stride = 10);

}  // namespace pdat::data

#endif
