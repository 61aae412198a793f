#ifndef PDAT_TRACK_INFER_HPP
#define PDAT_TRACK_INFER_HPP

#include <vector>

#include "pdat/data/dataset.hpp"
#include "pdat/track/loss.hpp"
#include "pdat/track/model.hpp"

namespace pdat::track {

struct TrackResult {
  Box box;
  double score = 0.0;
  bool kept_previous = false;  // degenerate decode, previous box reused
};

// Single-object pass: template fixed from frame 0, search re-cropped around
// the previous box each frame, no model update. Boxes are clipped to the
// frame; a degenerate decode keeps the previous box and flags it.
std::vector<TrackResult> track_sequence(const data::Sequence& seq, const Box& init_box,
                                        const TrackerModel& model);

}  // namespace pdat::track

#endif
