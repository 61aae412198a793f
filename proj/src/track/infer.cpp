#include "pdat/track/infer.hpp"

#include <algorithm>
#include <stdexcept>

#include "pdat/core/imgproc.hpp"

namespace pdat::track {

std::vector<TrackResult> track_sequence(const data::Sequence& seq, const Box& init_box,
                                        const TrackerModel& model) {
  if (seq.frames.empty()) throw std::invalid_argument("track_sequence: empty sequence");
  int fw = seq.frames[0].width, fh = seq.frames[0].height;
  if (!init_box.inside(fw, fh))
    throw std::invalid_argument("track_sequence: init box outside frame 0");

  nn::NoGradGuard no_grad;
  const TrackerConfig& cfg = model.config();
  ResponseGeometry geom = model.geometry();

  // fixed template from frame 0
  double tmpl_side = cfg.context_factor * std::max(init_box.w, init_box.h);
  Image tmpl = crop_resize_square(seq.frames[0], init_box.cx(), init_box.cy(), tmpl_side,
                                  cfg.template_size);
  nn::Var z = stack_patches({patch_tensor(tmpl, cfg.backbone.in_channels)});
  FeaturePyramid zp = model.pyramid(z, PatchKind::template_z);

  std::vector<TrackResult> results;
  results.push_back({init_box, 1.0, false});
  Box prev = init_box;

  for (size_t f = 1; f < seq.frames.size(); ++f) {
    double side = 2.0 * cfg.context_factor * std::max(prev.w, prev.h);
    double ccx = prev.cx(), ccy = prev.cy();
    Image crop = crop_resize_square(seq.frames[f], ccx, ccy, side, cfg.search_size);
    nn::Var x = stack_patches({patch_tensor(crop, cfg.backbone.in_channels)});
    FeaturePyramid xp = model.pyramid(x, PatchKind::search_x);
    HeadOutput out = model.forward(zp, xp);
    Decoded dec = decode_response(out.cls.val(), out.cen.val(), out.reg.val(), geom,
                                  cfg.window_weight);

    // search-patch coords -> frame coords
    double scale = side / cfg.search_size;
    double x0 = ccx - side / 2.0, y0 = ccy - side / 2.0;
    Box raw{x0 + dec.box_in_search.x * scale, y0 + dec.box_in_search.y * scale,
            dec.box_in_search.w * scale, dec.box_in_search.h * scale};

    double x1 = std::max(0.0, raw.x), y1 = std::max(0.0, raw.y);
    double x2 = std::min(static_cast<double>(fw), raw.x2());
    double y2 = std::min(static_cast<double>(fh), raw.y2());
    Box clipped{x1, y1, x2 - x1, y2 - y1};

    TrackResult res;
    if (clipped.w < 1.0 || clipped.h < 1.0) {
      res.box = prev;
      res.score = dec.score;
      res.kept_previous = true;
    } else {
      res.box = clipped;
      res.score = dec.score;
    }
    results.push_back(res);
    prev = res.box;
  }
  return results;
}

}  // namespace pdat::track
