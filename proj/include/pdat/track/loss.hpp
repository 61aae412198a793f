#ifndef PDAT_TRACK_LOSS_HPP
#define PDAT_TRACK_LOSS_HPP

#include <vector>

#include "pdat/core/image.hpp"
#include "pdat/track/model.hpp"

namespace pdat::track {

// Per-cell supervision derived from ground-truth boxes in search-patch
// coordinates. A cell is positive when its center lies strictly inside the
// box. Regression targets of negative cells are filled with 1.0 so masked
// terms stay finite; they carry no gradient.
struct TrackTargets {
  nn::Tensor cls_target;    // (N,1,h,w)
  nn::Tensor pos_mask;      // (N,1,h,w)
  nn::Tensor neg_mask;      // (N,1,h,w)
  nn::Tensor reg_target;    // (N,4,h,w) l,t,r,b
  nn::Tensor gt_area;       // (N,1,h,w)
  nn::Tensor cen_target;    // (N,1,h,w)
  bool any_positive = false;
};

TrackTargets make_track_targets(const std::vector<Box>& boxes, const ResponseGeometry& geom,
                                int response_h, int response_w);

struct TrackingLossResult {
  nn::Var total;  // lambda-weighted sum, graph-connected
  double cls = 0, reg = 0, cen = 0;
  bool no_positive = false;  // box smaller than one grid cell
};

// cls: balanced BCE over positive/negative cells; reg: -ln IoU over
// positive cells; cen: BCE against the centerness profile. Boxes must lie
// inside the search patch.
TrackingLossResult tracking_loss(const HeadOutput& pred, const std::vector<Box>& gt_boxes,
                                 const ResponseGeometry& geom, int search_size,
                                 double lambda_cls, double lambda_reg, double lambda_cen);

// Inference-side decode: elementwise sigmoid(cls)*sigmoid(cen), blended
// multiplicatively with a Hanning window, argmax cell, (l,t,r,b) unpacked
// around the cell center. Single-sample value tensors.
struct Decoded {
  int cell_y = 0, cell_x = 0;
  Box box_in_search;
  double score = 0.0;
};

Decoded decode_response(const nn::Tensor& cls, const nn::Tensor& cen, const nn::Tensor& reg,
                        const ResponseGeometry& geom, double window_weight);

}  // namespace pdat::track

#endif
