#include "pdat/track/loss.hpp"

#include <cmath>
#include <stdexcept>

namespace pdat::track {

TrackTargets make_track_targets(const std::vector<Box>& boxes, const ResponseGeometry& geom,
                                int response_h, int response_w) {
  int n = static_cast<int>(boxes.size());
  TrackTargets t;
  t.cls_target = nn::Tensor({n, 1, response_h, response_w});
  t.pos_mask = nn::Tensor({n, 1, response_h, response_w});
  t.neg_mask = nn::Tensor({n, 1, response_h, response_w});
  t.reg_target = nn::Tensor::full({n, 4, response_h, response_w}, 1.0);
  t.gt_area = nn::Tensor::full({n, 1, response_h, response_w}, 4.0);
  t.cen_target = nn::Tensor({n, 1, response_h, response_w});

  for (int s = 0; s < n; ++s) {
    const Box& b = boxes[static_cast<size_t>(s)];
    for (int i = 0; i < response_h; ++i) {
      double py = geom.cell_center(i);
      for (int j = 0; j < response_w; ++j) {
        double px = geom.cell_center(j);
        double l = px - b.x, tp = py - b.y, r = b.x2() - px, bt = b.y2() - py;
        bool pos = l > 0 && tp > 0 && r > 0 && bt > 0;
        if (pos) {
          t.any_positive = true;
          t.cls_target.at(s, 0, i, j) = 1.0;
          t.pos_mask.at(s, 0, i, j) = 1.0;
          t.reg_target.at(s, 0, i, j) = l;
          t.reg_target.at(s, 1, i, j) = tp;
          t.reg_target.at(s, 2, i, j) = r;
          t.reg_target.at(s, 3, i, j) = bt;
          t.gt_area.at(s, 0, i, j) = (l + r) * (tp + bt);
          t.cen_target.at(s, 0, i, j) =
              std::sqrt((std::min(l, r) / std::max(l, r)) * (std::min(tp, bt) / std::max(tp, bt)));
        } else {
          t.neg_mask.at(s, 0, i, j) = 1.0;
        }
      }
    }
  }
  return t;
}

TrackingLossResult tracking_loss(const HeadOutput& pred, const std::vector<Box>& gt_boxes,
                                 const ResponseGeometry& geom, int search_size,
                                 double lambda_cls, double lambda_reg, double lambda_cen) {
  const auto& shape = pred.cls.shape();
  int n = shape[0], h = shape[2], w = shape[3];
  if (static_cast<int>(gt_boxes.size()) != n)
    throw std::invalid_argument("tracking_loss: box count mismatch");
  for (const auto& b : gt_boxes)
    if (!b.inside(search_size, search_size))
      throw std::invalid_argument("tracking_loss: ground-truth box outside search patch");

  TrackTargets t = make_track_targets(gt_boxes, geom, h, w);

  using namespace nn;
  // balanced classification: positives and negatives weighted equally
  Var cls_loss;
  if (t.any_positive) {
    Var pos = masked_bce_with_logits(pred.cls, t.cls_target, t.pos_mask);
    Var neg = masked_bce_with_logits(pred.cls, t.cls_target, t.neg_mask);
    cls_loss = mul_scalar(add(pos, neg), 0.5);
  } else {
    cls_loss = masked_bce_with_logits(pred.cls, t.cls_target, t.neg_mask);
  }

  Var reg_loss, cen_loss;
  if (t.any_positive) {
    Var mins = min_const(pred.reg, t.reg_target);
    Var inter = mul(add(slice_channel(mins, 0), slice_channel(mins, 2)),
                    add(slice_channel(mins, 1), slice_channel(mins, 3)));
    Var pred_area = mul(add(slice_channel(pred.reg, 0), slice_channel(pred.reg, 2)),
                        add(slice_channel(pred.reg, 1), slice_channel(pred.reg, 3)));
    Var uni = sub(add(pred_area, Var::leaf(t.gt_area)), inter);
    Var iou = div(inter, uni);
    reg_loss = neg(masked_mean(log_op(iou), t.pos_mask));
    cen_loss = masked_bce_with_logits(pred.cen, t.cen_target, t.pos_mask);
  } else {
    reg_loss = Var::leaf(Tensor::scalar(0.0));
    cen_loss = Var::leaf(Tensor::scalar(0.0));
  }

  TrackingLossResult out;
  out.cls = cls_loss.item();
  out.reg = reg_loss.item();
  out.cen = cen_loss.item();
  out.no_positive = !t.any_positive;
  out.total = add(add(mul_scalar(cls_loss, lambda_cls), mul_scalar(reg_loss, lambda_reg)),
                  mul_scalar(cen_loss, lambda_cen));
  return out;
}

Decoded decode_response(const nn::Tensor& cls, const nn::Tensor& cen, const nn::Tensor& reg,
                        const ResponseGeometry& geom, double window_weight) {
  int h = cls.dim(2), w = cls.dim(3);
  auto hann = [](int i, int n) {
    if (n <= 1) return 1.0;
    return 0.5 * (1.0 - std::cos(2.0 * M_PI * i / (n - 1)));
  };
  auto sig = [](double x) { return 1.0 / (1.0 + std::exp(-x)); };

  Decoded best;
  double best_score = -1.0;
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j) {
      double win = (1.0 - window_weight) + window_weight * hann(i, h) * hann(j, w);
      double s = sig(cls.at(0, 0, i, j)) * sig(cen.at(0, 0, i, j)) * win;
      if (s > best_score) {
        best_score = s;
        best.cell_y = i;
        best.cell_x = j;
      }
    }
  best.score = best_score;
  double px = geom.cell_center(best.cell_x), py = geom.cell_center(best.cell_y);
  double l = reg.at(0, 0, best.cell_y, best.cell_x);
  double t = reg.at(0, 1, best.cell_y, best.cell_x);
  double r = reg.at(0, 2, best.cell_y, best.cell_x);
  double b = reg.at(0, 3, best.cell_y, best.cell_x);
  best.box_in_search = {px - l, py - t, l + r, t + b};
  return best;
}

}  // namespace pdat::track
