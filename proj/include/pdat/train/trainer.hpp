#ifndef PDAT_TRAIN_TRAINER_HPP
#define PDAT_TRAIN_TRAINER_HPP

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "pdat/agda/discriminator.hpp"
#include "pdat/core/config.hpp"
#include "pdat/csda/lmmd.hpp"
#include "pdat/csda/memory.hpp"
#include "pdat/data/batcher.hpp"
#include "pdat/nn/optim.hpp"
#include "pdat/track/loss.hpp"

namespace pdat::train {

struct CsdaSettings {
  bool enabled = true;
  int align_stage = 4;
  int memory_size = 256;
  int refit_interval = 25;
  csda::ClusterBankConfig bank;
  csda::KernelConfig kernel;
  double loss_weight = 1.0;
};

struct TrainerConfig {
  track::TrackerConfig tracker;
  agda::AgdaConfig agda;
  bool agda_enabled = true;
  CsdaSettings csda;

  int epochs = 5;
  int batch_size = 8;
  double lr_backbone = 1e-3;
  double lr_discriminator = 5e-3;
  double poly_power = 0.8;
  double adam_beta1 = 0.9, adam_beta2 = 0.999, adam_eps = 1e-8;
  uint64_t seed = 1;
  int threads = 2;
  bool deterministic = false;
  std::string init_checkpoint;
  std::string out_dir = "runs/out";
  int checkpoint_every = 1;
  std::string config_snapshot;  // resolved config text, stored with checkpoints
};

TrainerConfig trainer_config_from(const Config& cfg);

struct Step1Result {
  double cls = 0, reg = 0, cen = 0;
  double adv_g = 0, adv_d = 0;
  bool no_positive = false;
};

struct Step2Result {
  double sub = 0;
  bool skipped = true;
  int classes_used = 0;
};

// Two-step progressive loop. Step 1 couples the tracking loss with the
// adversarial alignment (alternating generator/discriminator updates);
// step 2 runs the clustering-based subdomain alignment on its own.
class Trainer {
 public:
  Trainer(TrainerConfig cfg, const std::vector<data::DomainSample>* source,
          const std::vector<data::DomainSample>* target);

  // Full run: every iteration executes step 1 then step 2, memory banks
  // update every iteration, cluster refits follow the configured interval,
  // checkpoints land at epoch boundaries.
  void train();

  Step1Result train_step1(const data::BatchStream::Batch& batch);
  Step2Result train_step2(const data::BatchStream::Batch& batch);

  void save_checkpoint(const std::string& dir);
  void load_checkpoint(const std::string& dir);

  track::TrackerModel& model() { return *model_; }
  agda::AgdaModule* agda_module() { return agda_ ? agda_.get() : nullptr; }
  csda::ClusterBank& cluster_bank() { return bank_; }
  csda::DescriptorMemory& memory() { return memory_; }
  const data::BatchStream& stream() const { return *stream_; }
  long long iteration() const { return iter_; }
  long long max_iter() const { return max_iter_; }
  int epoch() const { return epoch_; }
  const TrainerConfig& config() const { return cfg_; }

  double backbone_lr() const;
  double discriminator_lr() const;

  // Per-sample descriptors for all four stages, evaluation mode.
  std::vector<std::array<csda::Vec, 4>> batch_descriptors(
      const std::vector<const data::DomainSample*>& samples);

 private:
  struct Forwarded {
    track::FeaturePyramid zp_s, xp_s, zp_t, xp_t;
    std::vector<Box> boxes_s;
    std::vector<std::string> ids;
  };
  Forwarded forward_batch(const data::BatchStream::Batch& batch);
  void push_memory(const data::BatchStream::Batch& batch,
                   const std::vector<std::array<csda::Vec, 4>>& descs);
  void maybe_refit();
  void log_iteration(const Step1Result& s1, const Step2Result& s2);

  TrainerConfig cfg_;
  const std::vector<data::DomainSample>* source_;
  const std::vector<data::DomainSample>* target_;
  std::unique_ptr<data::BatchStream> stream_;
  std::unique_ptr<track::TrackerModel> model_;
  std::unique_ptr<agda::AgdaModule> agda_;
  nn::Adam adam_backbone_, adam_heads_, adam_disc_;
  std::vector<nn::NodePtr> backbone_params_, head_params_;
  csda::DescriptorMemory memory_;
  csda::ClusterBank bank_;
  std::vector<csda::MemoryEntry> last_step2_descs_;
  long long iter_ = 0;
  long long max_iter_ = 0;
  int epoch_ = 0;
  int last_selected_c_ = 0;
  std::string metrics_path_;
};

}  // namespace pdat::train

#endif
