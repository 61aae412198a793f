#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "pdat/core/common.hpp"
#include "pdat/nn/serialize.hpp"
#include "pdat/synth/corpus.hpp"
#include "pdat/train/schedule.hpp"
#include "pdat/train/trainer.hpp"

namespace fs = std::filesystem;
using namespace pdat;
using namespace pdat::train;

namespace {

fs::path fresh_dir(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / ("pdat_train_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

TrainerConfig tiny_config(const std::string& out_dir) {
  TrainerConfig cfg;
  cfg.tracker.backbone.in_channels = 1;
  cfg.tracker.backbone.widths = {4, 8, 8, 16};
  cfg.tracker.head_stage = 3;
  cfg.tracker.head_width = 8;
  cfg.tracker.template_size = 32;
  cfg.tracker.search_size = 64;
  cfg.agda.stages = {3, 4};
  cfg.agda.disc.d_model = 8;
  cfg.agda.disc.n_heads = 2;
  cfg.agda.disc.ff_dim = 16;
  cfg.agda.grl_warmup = 0.0;
  cfg.csda.memory_size = 32;
  cfg.csda.refit_interval = 5;
  cfg.csda.bank.c_min = 2;
  cfg.csda.bank.c_max = 4;
  cfg.csda.bank.kmeans.restarts = 2;
  cfg.csda.bank.kmeans.max_iters = 20;
  cfg.epochs = 2;
  cfg.batch_size = 4;
  cfg.lr_backbone = 1e-3;
  cfg.lr_discriminator = 2e-3;
  cfg.threads = 1;
  cfg.deterministic = true;
  cfg.out_dir = out_dir;
  return cfg;
}

data::AugmentConfig tiny_aug() {
  data::AugmentConfig aug;
  aug.template_size = 32;
  aug.search_size = 64;
  aug.jitter_px = 4;
  aug.scale_jitter = 0.1;
  return aug;
}

struct Fixture {
  std::vector<data::DomainSample> source, target;
};

Fixture corpus_fixture(const std::string& tag, uint64_t seed) {
  fs::path root = fresh_dir("fix_" + tag);
  synth::CorpusConfig cc;
  cc.num_sequences = 3;
  cc.frames_per_seq = 8;
  cc.frame_size = 96;
  synth::make_corpus((root / "src").string(), cc, seed);
  cc.invert = true;
  cc.write_boxes = false;
  synth::make_corpus((root / "tgt").string(), cc, seed + 1);

  Fixture f;
  auto src_seqs = data::load_dataset((root / "src").string(), data::Domain::source);
  f.source = data::build_labeled_pairs(src_seqs, tiny_aug(), 1, 11, data::Domain::source);
  auto tgt_seqs = data::load_dataset((root / "tgt").string(), data::Domain::target);
  data::ThresholdSegmenter seg(40);
  f.target = data::build_target_pairs(tgt_seqs, seg, 0.1, {}, tiny_aug(), 1, 12, 2, nullptr);
  return f;
}

std::string read_file(const fs::path& p) {
  std::ifstream is(p);
  return std::string((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("poly_lr: published base value, boundary, midpoint, monotonicity") {
  CHECK(poly_lr(0.005, 0, 100, 0.8) == doctest::Approx(0.005));
  CHECK(poly_lr(0.005, 100, 100, 0.8) == 0.0);
  CHECK(poly_lr(0.005, 50, 100, 0.8) == doctest::Approx(0.002872).epsilon(1e-3));
  CHECK(poly_lr(0.005, 150, 100, 0.8) == 0.0);  // clamp past the end
  double prev = poly_lr(1.0, 0, 50, 0.8);
  for (int it = 1; it <= 50; ++it) {
    double cur = poly_lr(1.0, it, 50, 0.8);
    CHECK(cur < prev);
    prev = cur;
  }
  CHECK_THROWS(poly_lr(1.0, -1, 50, 0.8));
}

TEST_CASE("train_step1: repeated batch descends the tracking loss") {
  Fixture f = corpus_fixture("descent", 100);
  TrainerConfig cfg = tiny_config(fresh_dir("descent_out").string());
  cfg.agda_enabled = false;
  cfg.csda.enabled = false;
  cfg.lr_backbone = 1e-4;
  Trainer trainer(cfg, &f.source, &f.target);
  auto batch = trainer.stream().batch(0, 0);

  Step1Result first = trainer.train_step1(batch);
  Step1Result second = trainer.train_step1(batch);
  double t1 = cfg.tracker.lambda_cls * first.cls + cfg.tracker.lambda_reg * first.reg +
              cfg.tracker.lambda_cen * first.cen;
  double t2 = cfg.tracker.lambda_cls * second.cls + cfg.tracker.lambda_reg * second.reg +
              cfg.tracker.lambda_cen * second.cen;
  CHECK(t2 <= t1);
}

TEST_CASE("train_step1: zero weights and zero reversal leave the generator untouched") {
  Fixture f = corpus_fixture("zerograd", 200);
  TrainerConfig cfg = tiny_config(fresh_dir("zerograd_out").string());
  cfg.tracker.lambda_cls = 0.0;
  cfg.tracker.lambda_reg = 0.0;
  cfg.tracker.lambda_cen = 0.0;
  cfg.agda.grl_coefficient = 0.0;
  cfg.csda.enabled = false;
  Trainer trainer(cfg, &f.source, &f.target);

  uint64_t model_before = nn::hash_params(trainer.model().params());
  uint64_t disc_before = nn::hash_params(trainer.agda_module()->params());
  auto batch = trainer.stream().batch(0, 0);
  trainer.train_step1(batch);
  // backbone and heads see only zero gradients; the discriminator trains
  CHECK(nn::hash_params(trainer.model().params()) == model_before);
  CHECK(nn::hash_params(trainer.agda_module()->params()) != disc_before);
}

TEST_CASE("train_step1: a batch without target samples is rejected") {
  Fixture f = corpus_fixture("notarget", 300);
  TrainerConfig cfg = tiny_config(fresh_dir("notarget_out").string());
  Trainer trainer(cfg, &f.source, &f.target);
  auto batch = trainer.stream().batch(0, 0);
  batch.target.clear();
  CHECK_THROWS_AS(trainer.train_step1(batch), DataError);
}

TEST_CASE("train_step2: identical domains give a vanishing loss and a no-op update") {
  Fixture f = corpus_fixture("same", 400);
  // target = source patches, domain flag flipped
  std::vector<data::DomainSample> mirrored;
  for (const auto& s : f.source) {
    data::DomainSample t = s;
    t.domain = data::Domain::target;
    t.id = "t_" + s.id;
    mirrored.push_back(std::move(t));
  }
  TrainerConfig cfg = tiny_config(fresh_dir("same_out").string());
  cfg.agda_enabled = false;
  Trainer trainer(cfg, &f.source, &mirrored);

  // fill the memory and fit cluster models
  for (int it = 0; it < 4; ++it) {
    auto all = trainer.stream().batch(0, it);
    std::vector<const data::DomainSample*> both = all.source;
    both.insert(both.end(), all.target.begin(), all.target.end());
    trainer.memory();  // silence unused warnings in some configs
    auto descs = trainer.batch_descriptors(both);
    size_t ns = all.source.size();
    for (size_t i = 0; i < both.size(); ++i) {
      csda::MemoryEntry e{both[i]->id, i < ns ? data::Domain::source : data::Domain::target,
                          descs[i]};
      trainer.memory().push(e);
    }
  }
  trainer.cluster_bank().refit(trainer.memory(), 33);
  REQUIRE(trainer.cluster_bank().ready());

  // a batch whose target half mirrors its source half exactly
  data::BatchStream::Batch batch;
  for (int i = 0; i < 2; ++i) {
    batch.source.push_back(&f.source[static_cast<size_t>(i)]);
    batch.target.push_back(&mirrored[static_cast<size_t>(i)]);
  }
  uint64_t disc_irrelevant = 0;
  (void)disc_irrelevant;
  nn::Tensor before_first = trainer.model().params().items()[0].second.val();
  Step2Result res = trainer.train_step2(batch);
  CHECK_FALSE(res.skipped);
  CHECK(res.sub <= 1e-6);
  // the update is numerically a no-op at the minimum
  const nn::Tensor& after_first = trainer.model().params().items()[0].second.val();
  double max_delta = 0.0;
  for (long long i = 0; i < before_first.size(); ++i)
    max_delta = std::max(max_delta, std::abs(after_first[i] - before_first[i]));
  CHECK(max_delta <= 1e-9);
}

TEST_CASE("train_step2: never touches the discriminators") {
  Fixture f = corpus_fixture("iso", 500);
  TrainerConfig cfg = tiny_config(fresh_dir("iso_out").string());
  Trainer trainer(cfg, &f.source, &f.target);

  for (int it = 0; it < 4; ++it) {
    auto all = trainer.stream().batch(0, it);
    std::vector<const data::DomainSample*> both = all.source;
    both.insert(both.end(), all.target.begin(), all.target.end());
    auto descs = trainer.batch_descriptors(both);
    size_t ns = all.source.size();
    for (size_t i = 0; i < both.size(); ++i)
      trainer.memory().push({both[i]->id,
                             i < ns ? data::Domain::source : data::Domain::target, descs[i]});
  }
  trainer.cluster_bank().refit(trainer.memory(), 34);

  uint64_t disc_before = nn::hash_params(trainer.agda_module()->params());
  auto batch = trainer.stream().batch(0, 0);
  trainer.train_step2(batch);
  CHECK(nn::hash_params(trainer.agda_module()->params()) == disc_before);
}

TEST_CASE("full training run: deterministic metric log, checkpoints, resume") {
  Fixture f = corpus_fixture("full", 600);

  fs::path out_a = fresh_dir("full_a");
  TrainerConfig cfg = tiny_config(out_a.string());
  Trainer a(cfg, &f.source, &f.target);
  a.train();
  std::string log_a = read_file(out_a / "metrics.jsonl");
  REQUIRE(!log_a.empty());

  // identical rerun is bitwise identical
  fs::path out_b = fresh_dir("full_b");
  TrainerConfig cfg_b = tiny_config(out_b.string());
  Trainer b(cfg_b, &f.source, &f.target);
  b.train();
  CHECK(log_a == read_file(out_b / "metrics.jsonl"));

  // resume from the epoch-1 checkpoint reproduces the epoch-2 log lines
  fs::path out_c = fresh_dir("full_c");
  TrainerConfig cfg_c = tiny_config(out_c.string());
  Trainer c(cfg_c, &f.source, &f.target);
  c.load_checkpoint((out_a / "checkpoint_epoch_1").string());
  long long resumed_iter = c.iteration();
  CHECK(resumed_iter > 0);
  c.train();
  std::string log_c = read_file(out_c / "metrics.jsonl");

  auto tail_lines = [](const std::string& text, long long from_iter) {
    std::vector<std::string> out;
    std::istringstream ss(text);
    std::string line;
    while (std::getline(ss, line)) {
      auto pos = line.find("\"iter\":");
      if (pos == std::string::npos) continue;
      long long iter = std::stoll(line.substr(pos + 7));
      if (iter >= from_iter) out.push_back(line);
    }
    return out;
  };
  auto a_tail = tail_lines(log_a, resumed_iter);
  auto c_tail = tail_lines(log_c, resumed_iter);
  REQUIRE(!a_tail.empty());
  REQUIRE(a_tail.size() == c_tail.size());
  for (size_t i = 0; i < a_tail.size(); ++i) CHECK(a_tail[i] == c_tail[i]);

  // checkpoint round trip restores the exact parameter state
  TrainerConfig cfg_d = tiny_config(fresh_dir("full_d").string());
  Trainer d(cfg_d, &f.source, &f.target);
  d.load_checkpoint((out_a / "final").string());
  CHECK(nn::hash_params(d.model().params()) == nn::hash_params(a.model().params()));
}

TEST_CASE("reduction: disabling both modules reproduces baseline numbers") {
  Fixture f = corpus_fixture("reduction", 700);

  fs::path out_base = fresh_dir("red_base");
  TrainerConfig base_cfg = tiny_config(out_base.string());
  base_cfg.agda_enabled = false;
  base_cfg.csda.enabled = false;
  Trainer base(base_cfg, &f.source, &f.target);
  base.train();
  std::string base_log = read_file(out_base / "metrics.jsonl");

  // adaptation losses are identically zero in the baseline log
  CHECK(base_log.find("\"adv_G\":0.0,") != std::string::npos);
  std::istringstream ss(base_log);
  std::string line;
  while (std::getline(ss, line)) {
    CHECK(line.find("\"adv_G\":0.0") != std::string::npos);
    CHECK(line.find("\"adv_D\":0.0") != std::string::npos);
    CHECK(line.find("\"sub\":0.0") != std::string::npos);
  }

  // the full trainer's very first tracking losses match the baseline's:
  // enabling adaptation must not disturb shared initialization or data order
  fs::path out_full = fresh_dir("red_full");
  TrainerConfig full_cfg = tiny_config(out_full.string());
  Trainer full(full_cfg, &f.source, &f.target);
  auto batch_base = base.stream().batch(0, 0);
  auto batch_full = full.stream().batch(0, 0);
  REQUIRE(batch_base.source.size() == batch_full.source.size());
  for (size_t i = 0; i < batch_base.source.size(); ++i)
    CHECK(batch_base.source[i]->id == batch_full.source[i]->id);

  TrainerConfig probe_cfg = tiny_config(fresh_dir("red_probe").string());
  probe_cfg.agda_enabled = false;
  probe_cfg.csda.enabled = false;
  Trainer baseline_probe(probe_cfg, &f.source, &f.target);
  Step1Result r_base = baseline_probe.train_step1(batch_base);
  Step1Result r_full = full.train_step1(batch_full);
  CHECK(r_base.cls == r_full.cls);
  CHECK(r_base.reg == r_full.reg);
  CHECK(r_base.cen == r_full.cen);
}

TEST_CASE("non-finite losses abort with a diagnostic") {
  Fixture f = corpus_fixture("nan", 800);
  TrainerConfig cfg = tiny_config(fresh_dir("nan_out").string());
  Trainer trainer(cfg, &f.source, &f.target);
  // poison a head weight (past the ReLUs, which clamp NaN activations away)
  nn::Var* w = trainer.model().params().find("head.cls.w");
  REQUIRE(w != nullptr);
  w->val()[0] = std::numeric_limits<double>::quiet_NaN();
  auto batch = trainer.stream().batch(0, 0);
  CHECK_THROWS_AS(trainer.train_step1(batch), NumericError);
}
