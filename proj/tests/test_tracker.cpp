#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "pdat/core/imgproc.hpp"
#include "pdat/nn/serialize.hpp"
#include "pdat/track/infer.hpp"
#include "support/gradcheck.hpp"
#include "support/oracles.hpp"

using namespace pdat;
using namespace pdat::track;

namespace {

nn::Tensor randn(std::vector<int> shape, std::mt19937_64& rng, double scale = 1.0) {
  nn::Tensor t(std::move(shape));
  std::normal_distribution<double> dist(0.0, scale);
  for (long long i = 0; i < t.size(); ++i) t[i] = dist(rng);
  return t;
}

TrackerConfig small_tracker(int tmpl = 64, int search = 128) {
  TrackerConfig cfg;
  cfg.backbone.in_channels = 1;
  cfg.backbone.widths = {4, 8, 8, 16};
  cfg.head_stage = 3;
  cfg.head_width = 8;
  cfg.template_size = tmpl;
  cfg.search_size = search;
  return cfg;
}

}  // namespace

TEST_CASE("extract_pyramid: halving shapes at the documented widths") {
  nn::ParamStore store;
  std::mt19937_64 rng(3);
  BackboneConfig cfg;
  cfg.in_channels = 1;
  cfg.widths = {16, 32, 64, 128};
  Backbone bb(store, cfg, rng);

  nn::Var x = nn::Var::leaf(randn({1, 1, 192, 192}, rng, 0.1));
  auto pyr = bb.extract_pyramid(x, PatchKind::search_x);
  REQUIRE(pyr.stages.size() == 4);
  CHECK(pyr.stages[0].shape() == std::vector<int>({1, 16, 96, 96}));
  CHECK(pyr.stages[1].shape() == std::vector<int>({1, 32, 48, 48}));
  CHECK(pyr.stages[2].shape() == std::vector<int>({1, 64, 24, 24}));
  CHECK(pyr.stages[3].shape() == std::vector<int>({1, 128, 12, 12}));

  // eval-mode determinism
  nn::NoGradGuard guard;
  auto p1 = bb.extract_pyramid(x, PatchKind::search_x);
  auto p2 = bb.extract_pyramid(x, PatchKind::search_x);
  for (int m = 0; m < 4; ++m)
    for (long long i = 0; i < p1.stages[m].val().size(); ++i)
      CHECK(p1.stages[m].val()[i] == p2.stages[m].val()[i]);

  nn::Var bad = nn::Var::leaf(randn({1, 1, 100, 100}, rng));
  CHECK_THROWS(bb.extract_pyramid(bad, PatchKind::search_x));
}

TEST_CASE("correlate matches the sliding-window oracle on random tensors") {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 5; ++trial) {
    nn::Tensor zt = randn({2, 4, 4, 4}, rng);
    nn::Tensor xt = randn({2, 4, 9, 9}, rng);
    nn::Var out = nn::depthwise_xcorr(nn::Var::leaf(zt), nn::Var::leaf(xt));
    nn::Tensor expected = testsupport::xcorr_oracle(zt, xt);
    REQUIRE(out.val().same_shape(expected));
    for (long long i = 0; i < expected.size(); ++i)
      CHECK(testsupport::rel_err(out.val()[i], expected[i]) < 1e-5);
  }

  // identical maps peak at the center response cell
  nn::Tensor same = randn({1, 3, 6, 6}, rng);
  nn::Var r = nn::depthwise_xcorr(nn::Var::leaf(same), nn::Var::leaf(same));
  CHECK(r.shape() == std::vector<int>({1, 3, 1, 1}));
}

TEST_CASE("forward_heads: positivity, determinism, shape") {
  std::mt19937_64 rng(5);
  nn::ParamStore store;
  HeadConfig cfg;
  cfg.in_channels = 8;
  cfg.width = 8;
  cfg.reg_scale = 8.0;
  SiamHead head(store, cfg, rng);

  nn::Var resp = nn::Var::leaf(randn({2, 8, 9, 9}, rng));
  HeadOutput out = head.forward_heads(resp);
  CHECK(out.cls.shape() == std::vector<int>({2, 1, 9, 9}));
  CHECK(out.reg.shape() == std::vector<int>({2, 4, 9, 9}));
  CHECK(out.cen.shape() == std::vector<int>({2, 1, 9, 9}));
  for (long long i = 0; i < out.reg.val().size(); ++i) CHECK(out.reg.val()[i] > 0.0);

  HeadOutput out2 = head.forward_heads(resp);
  for (long long i = 0; i < out.cls.val().size(); ++i)
    CHECK(out.cls.val()[i] == out2.cls.val()[i]);
}

TEST_CASE("tracking_loss: optimum, zero weights, oracle") {
  // geometry: stride 8, z_feat 8, response 9x9, cell centers 32 + 8j
  ResponseGeometry geom;
  geom.stride = 8;
  geom.z_feat = 8;
  geom.response_side = 9;
  geom.offset = 32.0;

  // single positive cell exactly at the box center -> centerness target 1
  Box gt = Box::from_center(geom.cell_center(4), geom.cell_center(4), 12, 12);
  TrackTargets targets = make_track_targets({gt}, geom, 9, 9);
  REQUIRE(targets.any_positive);

  nn::Tensor cls({1, 1, 9, 9}), cen({1, 1, 9, 9}), reg({1, 4, 9, 9});
  for (int i = 0; i < 9; ++i)
    for (int j = 0; j < 9; ++j) {
      bool pos = targets.pos_mask.at(0, 0, i, j) > 0;
      cls.at(0, 0, i, j) = pos ? 30.0 : -30.0;
      cen.at(0, 0, i, j) = 30.0;  // only positives are scored
      for (int ch = 0; ch < 4; ++ch) reg.at(0, ch, i, j) = targets.reg_target.at(0, ch, i, j);
    }
  HeadOutput perfect{nn::Var::leaf(cls), nn::Var::leaf(reg), nn::Var::leaf(cen)};
  auto res = tracking_loss(perfect, {gt}, geom, 128, 1.0, 3.0, 1.0);
  CHECK(res.total.item() <= 1e-3);

  // zero weights zero the total
  std::mt19937_64 rng(6);
  HeadOutput random_pred{nn::Var::leaf(randn({1, 1, 9, 9}, rng)),
                         nn::Var::leaf(nn::Tensor::full({1, 4, 9, 9}, 5.0)),
                         nn::Var::leaf(randn({1, 1, 9, 9}, rng))};
  auto zero = tracking_loss(random_pred, {gt}, geom, 128, 0.0, 0.0, 0.0);
  CHECK(zero.total.item() == 0.0);

  // independent straight-line reimplementation of the three terms
  Box gt2{40.5, 36.0, 30.0, 22.0};
  nn::Tensor rcls = randn({1, 1, 9, 9}, rng);
  nn::Tensor rcen = randn({1, 1, 9, 9}, rng);
  nn::Tensor rreg({1, 4, 9, 9});
  std::uniform_real_distribution<double> upos(1.0, 40.0);
  for (long long i = 0; i < rreg.size(); ++i) rreg[i] = upos(rng);
  HeadOutput pred{nn::Var::leaf(rcls), nn::Var::leaf(rreg), nn::Var::leaf(rcen)};
  double l1 = 1.0, l2 = 3.0, l3 = 1.0;
  auto impl = tracking_loss(pred, {gt2}, geom, 128, l1, l2, l3);

  auto sig_loss = [](double x, double t) {
    return std::max(x, 0.0) - x * t + std::log1p(std::exp(-std::abs(x)));
  };
  double pos_bce = 0, neg_bce = 0, reg_sum = 0, cen_sum = 0;
  int n_pos = 0, n_neg = 0;
  for (int i = 0; i < 9; ++i)
    for (int j = 0; j < 9; ++j) {
      double px = geom.cell_center(j), py = geom.cell_center(i);
      double l = px - gt2.x, t = py - gt2.y, r = gt2.x2() - px, b = gt2.y2() - py;
      bool pos = l > 0 && t > 0 && r > 0 && b > 0;
      if (pos) {
        ++n_pos;
        pos_bce += sig_loss(rcls.at(0, 0, i, j), 1.0);
        double pl = rreg.at(0, 0, i, j), pt = rreg.at(0, 1, i, j), pr = rreg.at(0, 2, i, j),
               pb = rreg.at(0, 3, i, j);
        double iw = std::min(pl, l) + std::min(pr, r);
        double ih = std::min(pt, t) + std::min(pb, b);
        double inter = iw * ih;
        double uni = (pl + pr) * (pt + pb) + (l + r) * (t + b) - inter;
        reg_sum += -std::log(inter / uni);
        double cen_t = std::sqrt((std::min(l, r) / std::max(l, r)) *
                                 (std::min(t, b) / std::max(t, b)));
        cen_sum += sig_loss(rcen.at(0, 0, i, j), cen_t);
      } else {
        ++n_neg;
        neg_bce += sig_loss(rcls.at(0, 0, i, j), 0.0);
      }
    }
  REQUIRE(n_pos > 0);
  double expected = l1 * 0.5 * (pos_bce / n_pos + neg_bce / n_neg) + l2 * (reg_sum / n_pos) +
                    l3 * (cen_sum / n_pos);
  CHECK(testsupport::rel_err(impl.total.item(), expected) < 1e-6);

  // lambda scaling is exactly linear per term
  auto scaled = tracking_loss(pred, {gt2}, geom, 128, 2 * l1, 5 * l2, 3 * l3);
  double rescaled = 2 * l1 * impl.cls + 5 * l2 * impl.reg + 3 * l3 * impl.cen;
  CHECK(testsupport::rel_err(scaled.total.item(), rescaled) < 1e-12);

  // box smaller than one grid cell: no positive cell, flagged
  Box tiny_box = Box::from_center(geom.cell_center(4) + 4.0, geom.cell_center(4) + 4.0, 3, 3);
  auto flagged = tracking_loss(pred, {tiny_box}, geom, 128, 1, 3, 1);
  CHECK(flagged.no_positive);
  CHECK(flagged.reg == 0.0);
  CHECK(flagged.cen == 0.0);

  Box outside{120, 120, 30, 30};
  CHECK_THROWS(tracking_loss(pred, {outside}, geom, 128, 1, 3, 1));
}

TEST_CASE("backbone finite-difference gradient check") {
  std::mt19937_64 rng(7);
  nn::ParamStore store;
  BackboneConfig cfg;
  cfg.in_channels = 1;
  cfg.widths = {2, 3, 3, 4};
  Backbone bb(store, cfg, rng);

  nn::Var x = nn::Var::leaf(randn({1, 1, 32, 32}, rng, 0.5), true);
  nn::Tensor probe_w[4];
  // fixed random probe makes the pyramid a scalar function
  for (int m = 0; m < 4; ++m) probe_w[m] = randn({1}, rng);

  auto forward = [&]() {
    auto pyr = bb.extract_pyramid(x, PatchKind::search_x);
    nn::Var acc;
    for (int m = 0; m < 4; ++m) {
      nn::Var term = nn::mul_scalar(nn::mean_all(nn::mul(pyr.stages[m], pyr.stages[m])),
                                    probe_w[m][0]);
      acc = acc.defined() ? nn::add(acc, term) : term;
    }
    return acc;
  };

  // input gradients
  std::vector<nn::Var> leaves = {x};
  // parameters too (checking every coordinate is slow; sample a few)
  for (const auto& [name, v] : store.items()) leaves.push_back(v);

  for (auto& leaf : leaves) leaf.node()->zero_grad();
  nn::Var y = forward();
  nn::backward(y);

  std::mt19937_64 pick(8);
  int total = 0, good = 0;
  for (auto& leaf : leaves) {
    long long n = leaf.val().size();
    int samples = std::min<long long>(8, n);
    for (int s = 0; s < samples; ++s) {
      long long i = static_cast<long long>(pick() % static_cast<uint64_t>(n));
      double orig = leaf.val()[i];
      double h = 1e-5;
      leaf.val()[i] = orig + h;
      double fp = forward().item();
      leaf.val()[i] = orig - h;
      double fm = forward().item();
      leaf.val()[i] = orig;
      double fd = (fp - fm) / (2 * h);
      double an = leaf.node()->grad_allocated() ? leaf.grad()[i] : 0.0;
      ++total;
      if (testsupport::rel_err(an, fd) <= 1e-3) ++good;
    }
  }
  CHECK(static_cast<double>(good) / total >= 0.95);
}

TEST_CASE("decode_response: argmax cell and box unpacking") {
  ResponseGeometry geom;
  geom.stride = 8;
  geom.z_feat = 8;
  geom.response_side = 9;
  geom.offset = 32.0;

  nn::Tensor cls = nn::Tensor::full({1, 1, 9, 9}, -20.0);
  nn::Tensor cen = nn::Tensor::full({1, 1, 9, 9}, 0.0);
  nn::Tensor reg = nn::Tensor::full({1, 4, 9, 9}, 6.0);
  cls.at(0, 0, 2, 6) = 20.0;  // single strong cell

  // window_weight 0 keeps the blended window identically 1
  Decoded dec = decode_response(cls, cen, reg, geom, 0.0);
  CHECK(dec.cell_y == 2);
  CHECK(dec.cell_x == 6);
  CHECK(dec.box_in_search.cx() == doctest::Approx(geom.cell_center(6)));
  CHECK(dec.box_in_search.cy() == doctest::Approx(geom.cell_center(2)));
  CHECK(dec.box_in_search.w == doctest::Approx(12.0));
}

TEST_CASE("track_sequence: frame-0 contract and in-bounds boxes") {
  std::mt19937_64 rng(9);
  TrackerModel model(small_tracker(), 2024);

  data::Sequence seq;
  seq.id = "synthetic";
  seq.domain = data::Domain::target;
  for (int f = 0; f < 6; ++f) {
    Image img(96, 96, 1, 30);
    int x = 30 + 2 * f;
    for (int yy = 40; yy < 52; ++yy)
      for (int xx = x; xx < x + 12; ++xx) img.at(yy, xx, 0) = 220;
    seq.frames.push_back(img);
    seq.boxes.push_back({static_cast<double>(x), 40, 12, 12});
  }

  auto results = track_sequence(seq, seq.boxes[0], model);
  REQUIRE(results.size() == 6);
  CHECK(results[0].box.x == seq.boxes[0].x);
  CHECK(results[0].box.y == seq.boxes[0].y);
  for (const auto& r : results) {
    CHECK(r.box.inside(96, 96));
  }

  Box bad{90, 90, 20, 20};
  CHECK_THROWS(track_sequence(seq, bad, model));
}

TEST_CASE("checkpoint layout round trip through the model") {
  TrackerModel model(small_tracker(), 77);
  uint64_t h = nn::hash_params(model.params());
  nn::save_params("/tmp/pdat_tracker_params.bin", model.params());
  TrackerModel other(small_tracker(), 78);
  CHECK(nn::hash_params(other.params()) != h);
  nn::load_params("/tmp/pdat_tracker_params.bin", other.params());
  CHECK(nn::hash_params(other.params()) == h);
}
