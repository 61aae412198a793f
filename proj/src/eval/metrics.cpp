#include "pdat/eval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace pdat::eval {

double iou(const Box& a, const Box& b) {
  if (a.w < 0 || a.h < 0 || b.w < 0 || b.h < 0) throw std::invalid_argument("iou: negative size");
  double ix = std::max(0.0, std::min(a.x2(), b.x2()) - std::max(a.x, b.x));
  double iy = std::max(0.0, std::min(a.y2(), b.y2()) - std::max(a.y, b.y));
  double inter = ix * iy;
  double uni = a.area() + b.area() - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

PrecisionCurve precision_curve(const std::vector<std::pair<double, double>>& pred_centers,
                               const std::vector<std::pair<double, double>>& gt_centers) {
  if (pred_centers.size() != gt_centers.size())
    throw std::invalid_argument("precision_curve: length mismatch");
  PrecisionCurve out;
  out.curve.assign(kCurveSamples, 0.0);
  if (pred_centers.empty()) return out;
  std::vector<double> errors;
  errors.reserve(pred_centers.size());
  for (size_t i = 0; i < pred_centers.size(); ++i) {
    double dx = pred_centers[i].first - gt_centers[i].first;
    double dy = pred_centers[i].second - gt_centers[i].second;
    errors.push_back(std::sqrt(dx * dx + dy * dy));
  }
  for (int t = 0; t < kCurveSamples; ++t) {
    int ok = 0;
    for (double e : errors)
      if (e <= static_cast<double>(t)) ++ok;
    out.curve[static_cast<size_t>(t)] = static_cast<double>(ok) / errors.size();
  }
  out.precision_at_20 = out.curve[20];
  return out;
}

NormPrecisionCurve normalized_precision_curve(
    const std::vector<std::pair<double, double>>& pred_centers,
    const std::vector<Box>& gt_boxes) {
  if (pred_centers.size() != gt_boxes.size())
    throw std::invalid_argument("normalized_precision_curve: length mismatch");
  NormPrecisionCurve out;
  out.curve.assign(kCurveSamples, 0.0);
  std::vector<double> errors;
  for (size_t i = 0; i < gt_boxes.size(); ++i) {
    const Box& b = gt_boxes[i];
    if (b.w <= 0 || b.h <= 0) {
      ++out.excluded_frames;
      continue;
    }
    double dx = (pred_centers[i].first - b.cx()) / b.w;
    double dy = (pred_centers[i].second - b.cy()) / b.h;
    errors.push_back(std::sqrt(dx * dx + dy * dy));
  }
  if (errors.empty()) {
    out.valid = false;
    return out;
  }
  for (int t = 0; t < kCurveSamples; ++t) {
    double thr = 0.01 * t;
    int ok = 0;
    for (double e : errors)
      if (e <= thr) ++ok;
    out.curve[static_cast<size_t>(t)] = static_cast<double>(ok) / errors.size();
  }
  double s = 0.0;
  for (double v : out.curve) s += v;
  out.auc = s / kCurveSamples;
  return out;
}

SuccessCurve success_auc(const std::vector<Box>& pred_boxes, const std::vector<Box>& gt_boxes) {
  if (pred_boxes.size() != gt_boxes.size())
    throw std::invalid_argument("success_auc: length mismatch");
  SuccessCurve out;
  out.curve.assign(kCurveSamples, 0.0);
  if (pred_boxes.empty()) return out;
  std::vector<double> ious;
  ious.reserve(pred_boxes.size());
  for (size_t i = 0; i < pred_boxes.size(); ++i) ious.push_back(iou(pred_boxes[i], gt_boxes[i]));
  for (int t = 0; t < kCurveSamples; ++t) {
    double thr = static_cast<double>(t) / (kCurveSamples - 1);
    int ok = 0;
    for (double v : ious)
      if (v > thr) ++ok;
    out.curve[static_cast<size_t>(t)] = static_cast<double>(ok) / ious.size();
  }
  double s = 0.0;
  for (double v : out.curve) s += v;
  out.auc = s / kCurveSamples;
  return out;
}

}  // namespace pdat::eval
