#ifndef PDAT_EVAL_METRICS_HPP
#define PDAT_EVAL_METRICS_HPP

#include <utility>
#include <vector>

#include "pdat/core/image.hpp"

namespace pdat::eval {

constexpr int kCurveSamples = 51;

double iou(const Box& a, const Box& b);

struct PrecisionCurve {
  std::vector<double> curve;  // thresholds 0..50 px, step 1
  double precision_at_20 = 0.0;
};

PrecisionCurve precision_curve(const std::vector<std::pair<double, double>>& pred_centers,
                               const std::vector<std::pair<double, double>>& gt_centers);

struct NormPrecisionCurve {
  std::vector<double> curve;  // thresholds 0..0.5, step 0.01
  double auc = 0.0;
  int excluded_frames = 0;    // degenerate ground-truth boxes
  bool valid = true;          // false when every frame was excluded
};

// Center error divided per axis by the ground-truth box size before the
// Euclidean norm.
NormPrecisionCurve normalized_precision_curve(
    const std::vector<std::pair<double, double>>& pred_centers,
    const std::vector<Box>& gt_boxes);

struct SuccessCurve {
  std::vector<double> curve;  // 51 IoU thresholds in [0,1]
  double auc = 0.0;
};

// Frame succeeds at threshold tau iff IoU > tau (strict).
SuccessCurve success_auc(const std::vector<Box>& pred_boxes, const std::vector<Box>& gt_boxes);

}  // namespace pdat::eval

#endif
