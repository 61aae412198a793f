#include "pdat/train/trainer.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "pdat/core/common.hpp"
#include "pdat/core/rng.hpp"
#include "pdat/csda/descriptor.hpp"
#include "pdat/nn/serialize.hpp"
#include "pdat/train/schedule.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace pdat::train {

TrainerConfig trainer_config_from(const Config& cfg) {
  TrainerConfig t;
  t.tracker.backbone.in_channels = cfg.get_int("data.channels");
  t.tracker.backbone.widths = cfg.get_int_list("tracker.widths");
  t.tracker.head_stage = cfg.get_int("tracker.head_stage");
  t.tracker.head_width = cfg.get_int("tracker.head_width");
  t.tracker.reg_scale = cfg.get_double("tracker.reg_scale");
  t.tracker.lambda_cls = cfg.get_double("tracker.lambda_cls");
  t.tracker.lambda_reg = cfg.get_double("tracker.lambda_reg");
  t.tracker.lambda_cen = cfg.get_double("tracker.lambda_cen");
  t.tracker.window_weight = cfg.get_double("tracker.window_weight");
  t.tracker.template_size = cfg.get_int("data.template_size");
  t.tracker.search_size = cfg.get_int("data.search_size");
  t.tracker.context_factor = cfg.get_double("data.context_factor");

  t.agda_enabled = cfg.get_bool("agda.enabled");
  t.agda.stages = cfg.get_int_list("agda.stages");
  t.agda.disc.d_model = cfg.get_int("agda.d_model");
  t.agda.disc.n_heads = cfg.get_int("agda.heads");
  t.agda.disc.ff_dim = cfg.get_int("agda.ff");
  t.agda.grl_coefficient = cfg.get_double("agda.grl_coefficient");
  t.agda.grl_warmup = cfg.get_double("agda.grl_warmup");
  t.agda.loss_weight = cfg.get_double("agda.loss_weight");

  t.csda.enabled = cfg.get_bool("csda.enabled");
  t.csda.align_stage = cfg.get_int("csda.align_stage");
  t.csda.memory_size = cfg.get_int("csda.memory_size");
  t.csda.refit_interval = cfg.get_int("csda.refit_interval");
  t.csda.bank.c_min = cfg.get_int("csda.c_min");
  t.csda.bank.c_max = cfg.get_int("csda.c_max");
  t.csda.bank.kmeans.restarts = cfg.get_int("csda.kmeans_restarts");
  t.csda.bank.kmeans.max_iters = cfg.get_int("csda.kmeans_iters");
  t.csda.bank.vote_weights = cfg.get_double_list("csda.vote_weights");
  t.csda.kernel.multipliers = cfg.get_double_list("csda.kernel_multipliers");
  t.csda.loss_weight = cfg.get_double("csda.loss_weight");

  t.epochs = cfg.get_int("train.epochs");
  t.batch_size = cfg.get_int("train.batch_size");
  t.lr_backbone = cfg.get_double("train.lr_backbone");
  t.lr_discriminator = cfg.get_double("train.lr_discriminator");
  t.poly_power = cfg.get_double("train.poly_power");
  t.adam_beta1 = cfg.get_double("train.adam_beta1");
  t.adam_beta2 = cfg.get_double("train.adam_beta2");
  t.adam_eps = cfg.get_double("train.adam_eps");
  t.seed = cfg.seed();
  t.threads = cfg.get_int("train.threads");
  t.deterministic = cfg.get_bool("train.deterministic");
  t.init_checkpoint = cfg.get_str("train.init_checkpoint");
  t.out_dir = cfg.get_str("train.out_dir");
  t.checkpoint_every = cfg.get_int("train.checkpoint_every");
  t.config_snapshot = cfg.serialize();
  return t;
}

Trainer::Trainer(TrainerConfig cfg, const std::vector<data::DomainSample>* source,
                 const std::vector<data::DomainSample>* target)
    : cfg_(std::move(cfg)),
      source_(source),
      target_(target),
      memory_(cfg_.csda.memory_size),
      bank_(cfg_.csda.bank) {
  nn::set_op_threads(cfg_.deterministic ? 1 : cfg_.threads);
  stream_ = std::make_unique<data::BatchStream>(source_, target_, cfg_.batch_size, cfg_.seed);
  max_iter_ = static_cast<long long>(cfg_.epochs) * stream_->iters_per_epoch();

  model_ = std::make_unique<track::TrackerModel>(cfg_.tracker, cfg_.seed);
  for (const auto& [name, v] : model_->params().items()) {
    if (name.rfind("backbone.", 0) == 0)
      backbone_params_.push_back(v.node());
    else
      head_params_.push_back(v.node());
  }
  adam_backbone_ = nn::Adam(backbone_params_, cfg_.adam_beta1, cfg_.adam_beta2, cfg_.adam_eps);
  adam_heads_ = nn::Adam(head_params_, cfg_.adam_beta1, cfg_.adam_beta2, cfg_.adam_eps);

  if (cfg_.agda_enabled) {
    agda_ = std::make_unique<agda::AgdaModule>(cfg_.agda, cfg_.tracker.backbone.widths, cfg_.seed);
    adam_disc_ = nn::Adam(agda_->params().nodes(), cfg_.adam_beta1, cfg_.adam_beta2,
                          cfg_.adam_eps);
  }

  if (!cfg_.init_checkpoint.empty())
    nn::load_params((fs::path(cfg_.init_checkpoint) / "params.bin").string(), model_->params());
}

double Trainer::backbone_lr() const {
  return poly_lr(cfg_.lr_backbone, iter_, max_iter_, cfg_.poly_power);
}

double Trainer::discriminator_lr() const {
  return poly_lr(cfg_.lr_discriminator, iter_, max_iter_, cfg_.poly_power);
}

Trainer::Forwarded Trainer::forward_batch(const data::BatchStream::Batch& batch) {
  if (batch.source.empty() || batch.target.empty())
    throw DataError("train step: both domains must be present in the batch");
  int channels = cfg_.tracker.backbone.in_channels;
  auto to_batch = [&](const std::vector<const data::DomainSample*>& samples, bool tmpl) {
    std::vector<nn::Tensor> tensors;
    tensors.reserve(samples.size());
    for (const auto* s : samples)
      tensors.push_back(track::patch_tensor(tmpl ? s->template_patch : s->search_patch, channels));
    return track::stack_patches(tensors);
  };
  Forwarded f;
  f.zp_s = model_->pyramid(to_batch(batch.source, true), track::PatchKind::template_z);
  f.xp_s = model_->pyramid(to_batch(batch.source, false), track::PatchKind::search_x);
  f.zp_t = model_->pyramid(to_batch(batch.target, true), track::PatchKind::template_z);
  f.xp_t = model_->pyramid(to_batch(batch.target, false), track::PatchKind::search_x);
  for (const auto* s : batch.source) {
    if (!s->box) throw DataError("source sample " + s->id + " has no box");
    f.boxes_s.push_back(*s->box);
    f.ids.push_back(s->id);
  }
  for (const auto* s : batch.target) f.ids.push_back(s->id);
  return f;
}

Step1Result Trainer::train_step1(const data::BatchStream::Batch& batch) {
  Forwarded f = forward_batch(batch);

  track::HeadOutput pred = model_->forward(f.zp_s, f.xp_s);
  track::TrackingLossResult track_loss = track::tracking_loss(
      pred, f.boxes_s, model_->geometry(), cfg_.tracker.search_size, cfg_.tracker.lambda_cls,
      cfg_.tracker.lambda_reg, cfg_.tracker.lambda_cen);

  Step1Result out;
  out.cls = track_loss.cls;
  out.reg = track_loss.reg;
  out.cen = track_loss.cen;
  out.no_positive = track_loss.no_positive;

  nn::Var phase_a = track_loss.total;
  if (agda_) {
    double coef = agda_->grl_coef_at(iter_, max_iter_);
    nn::Var adv_g_total;
    for (size_t k = 0; k < agda_->num_stages(); ++k) {
      size_t sidx = static_cast<size_t>(agda_->stage_at(k) - 1);
      nn::Var d_xt = agda_->score_stage(k, f.xp_t.stages[sidx], coef);
      nn::Var d_zt = agda_->score_stage(k, f.zp_t.stages[sidx], coef);
      nn::Var l = agda::adv_loss_G(d_xt, d_zt);
      adv_g_total = adv_g_total.defined() ? nn::add(adv_g_total, l) : l;
    }
    adv_g_total = nn::mul_scalar(adv_g_total, 1.0 / static_cast<double>(agda_->num_stages()));
    out.adv_g = adv_g_total.item();
    // The reversal layer negates gradients on the way into the backbone, so
    // backpropagating the negated least-squares objective yields a descent
    // step on it, scaled by the reversal coefficient.
    phase_a = nn::add(phase_a, nn::mul_scalar(adv_g_total, -cfg_.agda.loss_weight));
  }

  if (!std::isfinite(out.cls) || !std::isfinite(out.reg) || !std::isfinite(out.cen) ||
      !std::isfinite(out.adv_g)) {
    std::string ids;
    for (const auto& id : f.ids) ids += id + " ";
    throw NumericError("non-finite loss in step 1; batch: " + ids);
  }

  adam_backbone_.zero_grad();
  adam_heads_.zero_grad();
  if (agda_) adam_disc_.zero_grad();
  nn::backward(phase_a);
  double lr_bb = backbone_lr();
  adam_backbone_.step(lr_bb);
  adam_heads_.step(lr_bb);

  if (agda_) {
    // discriminator pass on frozen features
    double coef = agda_->grl_coef_at(iter_, max_iter_);
    nn::Var adv_d_total;
    for (size_t k = 0; k < agda_->num_stages(); ++k) {
      size_t sidx = static_cast<size_t>(agda_->stage_at(k) - 1);
      nn::Var d_xs = agda_->score_stage(k, nn::detach(f.xp_s.stages[sidx]), coef);
      nn::Var d_zs = agda_->score_stage(k, nn::detach(f.zp_s.stages[sidx]), coef);
      nn::Var d_xt = agda_->score_stage(k, nn::detach(f.xp_t.stages[sidx]), coef);
      nn::Var d_zt = agda_->score_stage(k, nn::detach(f.zp_t.stages[sidx]), coef);
      nn::Var l = agda::adv_loss_D(d_xs, d_zs, d_xt, d_zt);
      adv_d_total = adv_d_total.defined() ? nn::add(adv_d_total, l) : l;
    }
    adv_d_total = nn::mul_scalar(adv_d_total, 1.0 / static_cast<double>(agda_->num_stages()));
    out.adv_d = adv_d_total.item();
    if (!std::isfinite(out.adv_d)) {
      std::string ids;
      for (const auto& id : f.ids) ids += id + " ";
      throw NumericError("non-finite discriminator loss; batch: " + ids);
    }
    adam_disc_.zero_grad();
    nn::backward(adv_d_total);
    adam_disc_.step(discriminator_lr());
  }
  return out;
}

Step2Result Trainer::train_step2(const data::BatchStream::Batch& batch) {
  if (!bank_.ready()) throw std::logic_error("train_step2: cluster models not fitted yet");
  Forwarded f = forward_batch(batch);
  size_t align_idx = static_cast<size_t>(cfg_.csda.align_stage - 1);

  csda::DescriptorBatch desc_s =
      csda::correlation_descriptor(f.zp_s.stages[align_idx], f.xp_s.stages[align_idx]);
  csda::DescriptorBatch desc_t =
      csda::correlation_descriptor(f.zp_t.stages[align_idx], f.xp_t.stages[align_idx]);

  // per-sample four-stage descriptor values for voting and the memory bank
  auto collect = [&](const track::FeaturePyramid& zp, const track::FeaturePyramid& xp,
                     size_t count) {
    nn::NoGradGuard no_grad;
    std::vector<std::array<csda::Vec, 4>> out(count);
    for (int m = 0; m < 4; ++m) {
      csda::DescriptorBatch db =
          csda::correlation_descriptor(zp.stages[static_cast<size_t>(m)], xp.stages[static_cast<size_t>(m)]);
      int dim = db.rows.shape()[1];
      for (size_t i = 0; i < count; ++i) {
        csda::Vec v(static_cast<size_t>(dim));
        for (int j = 0; j < dim; ++j) v[static_cast<size_t>(j)] = db.rows.val().at(static_cast<int>(i), j);
        out[i][static_cast<size_t>(m)] = std::move(v);
      }
    }
    return out;
  };
  auto descs_s = collect(f.zp_s, f.xp_s, batch.source.size());
  auto descs_t = collect(f.zp_t, f.xp_t, batch.target.size());

  std::vector<int> labels_s = bank_.voted_labels(descs_s);
  std::vector<int> labels_t = bank_.voted_labels(descs_t);

  csda::LmmdResult lmmd = csda::lmmd_loss(desc_s.rows, desc_t.rows, labels_s, labels_t,
                                          bank_.num_clusters(), cfg_.csda.kernel);
  Step2Result out;
  out.sub = lmmd.loss.item();
  out.classes_used = lmmd.classes_used;
  if (!std::isfinite(out.sub)) throw NumericError("non-finite subdomain loss");

  if (lmmd.skipped) {
    out.skipped = true;  // no class present in both domains; no update
  } else {
    out.skipped = false;
    adam_backbone_.zero_grad();
    nn::backward(nn::mul_scalar(lmmd.loss, cfg_.csda.loss_weight));
    adam_backbone_.step(backbone_lr());
  }

  // stash for the caller's memory update
  last_step2_descs_.clear();
  for (size_t i = 0; i < descs_s.size(); ++i)
    last_step2_descs_.push_back({batch.source[i]->id, data::Domain::source, descs_s[i]});
  for (size_t i = 0; i < descs_t.size(); ++i)
    last_step2_descs_.push_back({batch.target[i]->id, data::Domain::target, descs_t[i]});
  return out;
}

std::vector<std::array<csda::Vec, 4>> Trainer::batch_descriptors(
    const std::vector<const data::DomainSample*>& samples) {
  nn::NoGradGuard no_grad;
  int channels = cfg_.tracker.backbone.in_channels;
  std::vector<nn::Tensor> z_batch, x_batch;
  for (const auto* s : samples) {
    z_batch.push_back(track::patch_tensor(s->template_patch, channels));
    x_batch.push_back(track::patch_tensor(s->search_patch, channels));
  }
  auto zp = model_->pyramid(track::stack_patches(z_batch), track::PatchKind::template_z);
  auto xp = model_->pyramid(track::stack_patches(x_batch), track::PatchKind::search_x);
  std::vector<std::array<csda::Vec, 4>> out(samples.size());
  for (int m = 0; m < 4; ++m) {
    csda::DescriptorBatch db = csda::correlation_descriptor(zp.stages[static_cast<size_t>(m)],
                                                            xp.stages[static_cast<size_t>(m)]);
    int dim = db.rows.shape()[1];
    for (size_t i = 0; i < samples.size(); ++i) {
      csda::Vec v(static_cast<size_t>(dim));
      for (int j = 0; j < dim; ++j) v[static_cast<size_t>(j)] = db.rows.val().at(static_cast<int>(i), j);
      out[i][static_cast<size_t>(m)] = std::move(v);
    }
  }
  return out;
}

void Trainer::push_memory(const data::BatchStream::Batch& batch,
                          const std::vector<std::array<csda::Vec, 4>>& descs) {
  size_t ns = batch.source.size();
  for (size_t i = 0; i < ns; ++i)
    memory_.push({batch.source[i]->id, data::Domain::source, descs[i]});
  for (size_t i = 0; i < batch.target.size(); ++i)
    memory_.push({batch.target[i]->id, data::Domain::target, descs[ns + i]});
}

void Trainer::maybe_refit() {
  if (!cfg_.csda.enabled) return;
  int needed = 2 * cfg_.csda.bank.c_max;
  if (memory_.total() < needed) return;
  bool due = !bank_.ready() || (cfg_.csda.refit_interval > 0 &&
                                iter_ % cfg_.csda.refit_interval == 0);
  if (!due) return;
  csda::RefitLog log = bank_.refit(memory_, derive_seed(cfg_.seed, "refit:" + std::to_string(iter_)));
  last_selected_c_ = log.selected_c;
  if (!metrics_path_.empty()) {
    json j;
    j["event"] = "refit";
    j["iter"] = iter_;
    j["selected_c"] = log.selected_c;
    j["silhouettes"] = log.silhouettes;
    j["fallback"] = log.fallback;
    j["zero_variance"] = log.zero_variance;
    j["histogram_source"] = log.histogram_source;
    j["histogram_target"] = log.histogram_target;
    std::ofstream os(metrics_path_, std::ios::app);
    os << j.dump() << "\n";
  }
}

void Trainer::log_iteration(const Step1Result& s1, const Step2Result& s2) {
  if (metrics_path_.empty()) return;
  json j;
  j["iter"] = iter_;
  j["lr_G"] = backbone_lr();
  j["lr_D"] = cfg_.agda_enabled ? discriminator_lr() : 0.0;
  j["cls"] = s1.cls;
  j["reg"] = s1.reg;
  j["cen"] = s1.cen;
  j["adv_G"] = s1.adv_g;
  j["adv_D"] = s1.adv_d;
  j["sub"] = s2.sub;
  j["C_selected"] = last_selected_c_;
  j["skipped_step2"] = s2.skipped;
  std::ofstream os(metrics_path_, std::ios::app);
  os << j.dump() << "\n";
  os.flush();
}

void Trainer::train() {
  fs::create_directories(cfg_.out_dir);
  metrics_path_ = (fs::path(cfg_.out_dir) / "metrics.jsonl").string();
  if (iter_ == 0) {
    std::ofstream truncate(metrics_path_, std::ios::trunc);
  }

  int ipe = stream_->iters_per_epoch();
  while (iter_ < max_iter_) {
    epoch_ = static_cast<int>(iter_ / ipe);
    data::BatchStream::Batch batch = stream_->batch(epoch_, static_cast<int>(iter_ % ipe));

    maybe_refit();
    Step1Result s1 = train_step1(batch);

    Step2Result s2;
    if (cfg_.csda.enabled) {
      if (bank_.ready()) {
        s2 = train_step2(batch);
        std::vector<std::array<csda::Vec, 4>> descs;
        descs.reserve(last_step2_descs_.size());
        for (auto& e : last_step2_descs_) descs.push_back(e.desc);
        push_memory(batch, descs);
      } else {
        std::vector<const data::DomainSample*> all = batch.source;
        all.insert(all.end(), batch.target.begin(), batch.target.end());
        push_memory(batch, batch_descriptors(all));
      }
    }
    log_iteration(s1, s2);

    // iter_ counts completed iterations from here on; checkpoints store it
    // so a resumed run continues exactly where this one stopped
    ++iter_;
    bool epoch_end = iter_ % ipe == 0 || iter_ == max_iter_;
    int completed_epochs = static_cast<int>((iter_ + ipe - 1) / ipe);
    if (epoch_end && completed_epochs % cfg_.checkpoint_every == 0) {
      save_checkpoint(
          (fs::path(cfg_.out_dir) / ("checkpoint_epoch_" + std::to_string(completed_epochs)))
              .string());
    }
  }
  save_checkpoint((fs::path(cfg_.out_dir) / "final").string());
}

void Trainer::save_checkpoint(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create checkpoint dir " + dir);

  nn::save_params((fs::path(dir) / "params.bin").string(), model_->params());
  if (agda_) nn::save_params((fs::path(dir) / "disc_params.bin").string(), agda_->params());

  std::ofstream state((fs::path(dir) / "trainer_state.bin").string(), std::ios::binary);
  if (!state) throw DataError("cannot write trainer state in " + dir);
  uint64_t it = static_cast<uint64_t>(iter_);
  state.write(reinterpret_cast<const char*>(&it), sizeof(it));
  nn::save_adam(state, adam_backbone_);
  nn::save_adam(state, adam_heads_);
  if (agda_) nn::save_adam(state, adam_disc_);
  memory_.save(state);
  bank_.save(state);
  uint32_t lastc = static_cast<uint32_t>(last_selected_c_);
  state.write(reinterpret_cast<const char*>(&lastc), sizeof(lastc));
  if (!state) throw DataError("checkpoint write failure in " + dir);

  std::ofstream snapshot((fs::path(dir) / "config.snapshot").string());
  snapshot << cfg_.config_snapshot;

  json manifest;
  manifest["step"] = iter_;
  manifest["epoch"] = stream_->iters_per_epoch() > 0
                          ? iter_ / stream_->iters_per_epoch()
                          : 0;
  manifest["metric_summary"] = {{"max_iter", max_iter_}, {"epochs", cfg_.epochs}};
  std::ofstream mf((fs::path(dir) / "manifest.json").string());
  mf << manifest.dump(2) << "\n";
}

void Trainer::load_checkpoint(const std::string& dir) {
  nn::load_params((fs::path(dir) / "params.bin").string(), model_->params());
  if (agda_) nn::load_params((fs::path(dir) / "disc_params.bin").string(), agda_->params());

  std::ifstream state((fs::path(dir) / "trainer_state.bin").string(), std::ios::binary);
  if (!state) throw DataError("cannot read trainer state in " + dir);
  uint64_t it = 0;
  state.read(reinterpret_cast<char*>(&it), sizeof(it));
  iter_ = static_cast<long long>(it);
  epoch_ = static_cast<int>(iter_ / stream_->iters_per_epoch());
  nn::load_adam(state, adam_backbone_);
  nn::load_adam(state, adam_heads_);
  if (agda_) nn::load_adam(state, adam_disc_);
  memory_.load(state);
  bank_.load(state);
  uint32_t lastc = 0;
  state.read(reinterpret_cast<char*>(&lastc), sizeof(lastc));
  last_selected_c_ = static_cast<int>(lastc);
}

}  // namespace pdat::train
