// Command-line entry points: preprocess, train, eval, export-embeddings,
// report, plus make-corpus for synthetic fixtures.
//
// Exit codes: 0 success, 2 config error, 3 data error, 4 numerical abort.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "pdat/core/common.hpp"
#include "pdat/core/rng.hpp"
#include "pdat/csda/memory.hpp"
#include "pdat/eval/harness.hpp"
#include "pdat/pipeline.hpp"
#include "pdat/synth/corpus.hpp"
#include "pdat/train/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace pdat;

namespace {

struct CommonOpts {
  std::string config_path;
  std::string preset = "desk";
  std::vector<std::string> sets;
  bool deterministic = false;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("-c,--config", opts.config_path, "config file (key = value lines)");
  cmd->add_option("--preset", opts.preset, "desk or paper")->default_val("desk");
  cmd->add_option("--set", opts.sets, "override: --set key=value (repeatable)");
  cmd->add_flag("--deterministic", opts.deterministic, "single-threaded, bitwise-reproducible");
}

Config resolve(const CommonOpts& opts) {
  Config cfg = Config::load(opts.preset, opts.config_path, opts.sets);
  if (opts.deterministic) cfg.set("train.deterministic", "true");
  return cfg;
}

int cmd_preprocess(const Config& cfg, const std::string& in_dir, const std::string& out_dir) {
  auto seqs = data::load_dataset(in_dir, data::Domain::target);
  data::PairStats stats;
  double threshold = cfg.get_double("data.conf_threshold");
  auto samples = data::build_target_pairs(
      seqs, segmenter_provider_from(cfg, in_dir), threshold, filter_from(cfg), augment_from(cfg),
      cfg.get_int("data.target_stride"), derive_seed(cfg.seed(), "target_pairs"),
      cfg.get_int("data.max_candidates"), &stats);
  if (samples.empty())
    throw DataError("no candidates survived threshold " + std::to_string(threshold) + " over " +
                    std::to_string(stats.frames_scanned) + " frames");
  fs::create_directories(out_dir);
  cfg.save((fs::path(out_dir) / "config.snapshot").string());
  data::write_pairs_dir(out_dir, samples, stats, threshold);
  std::cout << "pairs: " << samples.size() << "\nframes_scanned: " << stats.frames_scanned
            << "\ncandidates_kept: " << stats.candidates_kept << "\n";
  return 0;
}

int cmd_train(const Config& cfg, const std::vector<std::string>& disable,
              const std::string& resume) {
  Config resolved = cfg;
  for (const auto& mod : disable) {
    if (mod == "agda")
      resolved.set("agda.enabled", "false");
    else if (mod == "csda")
      resolved.set("csda.enabled", "false");
    else
      throw ConfigError("--disable expects agda or csda, got '" + mod + "'");
  }
  std::string out_dir = resolved.get_str("train.out_dir");
  fs::create_directories(out_dir);
  resolved.save((fs::path(out_dir) / "config.snapshot").string());

  auto source = load_source_pairs(resolved);
  auto target = load_target_pairs(resolved);
  info("source pairs: " + std::to_string(source.size()) +
       ", target pairs: " + std::to_string(target.size()));

  train::Trainer trainer(train::trainer_config_from(resolved), &source, &target);
  if (!resume.empty()) trainer.load_checkpoint(resume);
  trainer.train();
  std::cout << "training complete: " << trainer.iteration() << " iterations -> " << out_dir
            << "\n";
  return 0;
}

int cmd_eval(const Config& cfg, const std::string& checkpoint, const std::string& dataset_dir) {
  // hash check is advisory: a mismatched snapshot evaluates anyway
  fs::path snap = fs::path(checkpoint) / "config.snapshot";
  if (fs::exists(snap)) {
    std::ifstream is(snap);
    std::string text((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    if (!text.empty() && fnv1a(text) != fnv1a(cfg.serialize()))
      warn("checkpoint config snapshot differs from the current config; proceeding");
  }
  track::TrackerModel model = load_model(cfg, checkpoint);
  auto seqs = data::load_dataset(dataset_dir, data::Domain::target);
  eval::MetricReport report = eval::evaluate_sequences(seqs, model);
  report.config_hash = cfg.hash();

  std::string probe_dir = cfg.get_str("eval.probe_source_dir");
  if (!probe_dir.empty()) {
    int max_samples = cfg.get_int("eval.max_probe_samples");
    Config src_cfg = cfg;
    src_cfg.set("data.source_dir", probe_dir);
    auto src_pairs = load_source_pairs(src_cfg);
    auto tgt_pairs = data::build_labeled_pairs(seqs, augment_from(cfg), 1,
                                               derive_seed(cfg.seed(), "probe_pairs"),
                                               data::Domain::target);
    auto desc_s = eval::stage4_descriptors(model, src_pairs, max_samples);
    auto desc_t = eval::stage4_descriptors(model, tgt_pairs, max_samples);
    csda::KernelConfig kernel;
    kernel.multipliers = cfg.get_double_list("csda.kernel_multipliers");
    report.domain_gap = eval::domain_gap_probe(desc_s, desc_t, kernel, cfg.seed());
  }

  std::string out_dir = cfg.get_str("eval.out_dir");
  fs::create_directories(out_dir);
  cfg.save((fs::path(out_dir) / "config.snapshot").string());
  eval::write_report((fs::path(out_dir) / "report.json").string(), report);
  eval::write_curves_csv((fs::path(out_dir) / "curves.csv").string(), report);
  std::cout << "success_auc: " << report.success_auc
            << "\nprecision_at_20: " << report.precision_at_20
            << "\nnorm_precision_auc: " << report.norm_precision_auc << "\n";
  if (report.domain_gap)
    std::cout << "squared_mmd: " << report.domain_gap->squared_mmd
              << "\nprobe_accuracy: " << report.domain_gap->probe_accuracy << "\n";
  return 0;
}

int cmd_export_embeddings(const Config& cfg, const std::string& checkpoint,
                          const std::string& out_csv) {
  track::TrackerModel model = load_model(cfg, checkpoint);
  auto source = load_source_pairs(cfg);
  auto target = load_target_pairs(cfg);
  int max_samples = cfg.get_int("eval.max_probe_samples");

  std::string cache_root = std::getenv("PDAT_CACHE") ? std::getenv("PDAT_CACHE") : "";
  fs::path cache_file;
  bool cached = false;
  if (!cache_root.empty()) {
    uint64_t key = fnv1a(checkpoint + "|" + cfg.get_str("data.source_dir") + "|" +
                         cfg.get_str("data.target_dir") + "|" +
                         cfg.get_str("data.target_pairs_dir") + "|" +
                         std::to_string(max_samples));
    char name[64];
    std::snprintf(name, sizeof(name), "pdat_desc_%016llx.bin",
                  static_cast<unsigned long long>(key));
    fs::create_directories(cache_root);
    cache_file = fs::path(cache_root) / name;
    cached = fs::exists(cache_file);
  }

  csda::DescriptorMemory pool(2 * max_samples);
  if (cached) {
    std::ifstream is(cache_file, std::ios::binary);
    pool.load(is);
    info("descriptor cache hit: " + cache_file.string());
  } else {
    auto desc_s = all_stage_descriptors(model, source, max_samples);
    auto desc_t = all_stage_descriptors(model, target, max_samples);
    for (size_t i = 0; i < desc_s.size(); ++i)
      pool.push({source[i].id, data::Domain::source, desc_s[i]});
    for (size_t i = 0; i < desc_t.size(); ++i)
      pool.push({target[i].id, data::Domain::target, desc_t[i]});
    if (!cache_file.empty()) {
      std::ofstream os(cache_file, std::ios::binary);
      pool.save(os);
    }
  }

  train::TrainerConfig tcfg = train::trainer_config_from(cfg);
  csda::ClusterBank bank(tcfg.csda.bank);
  bank.refit(pool, derive_seed(cfg.seed(), "export_refit"));

  std::ofstream os(out_csv);
  if (!os) throw DataError("cannot write " + out_csv);
  size_t dim = pool.entries(data::Domain::source).empty()
                   ? pool.entries(data::Domain::target).front().desc[3].size()
                   : pool.entries(data::Domain::source).front().desc[3].size();
  os << "sample_id,domain,voted_label";
  for (size_t j = 0; j < dim; ++j) os << ",d" << j;
  os << "\n";
  long long rows = 0;
  for (auto domain : {data::Domain::source, data::Domain::target}) {
    const auto& entries = pool.entries(domain);
    if (entries.empty()) continue;
    std::vector<std::array<csda::Vec, 4>> descs;
    for (const auto& e : entries) descs.push_back(e.desc);
    std::vector<int> voted = bank.voted_labels(descs);
    size_t i = 0;
    for (const auto& e : entries) {
      os << e.sample_id << "," << data::domain_name(e.domain) << "," << voted[i++];
      for (double v : e.desc[3]) os << "," << v;
      os << "\n";
      ++rows;
    }
  }
  std::cout << "rows: " << rows << " -> " << out_csv << "\n";
  return 0;
}

int cmd_report(const std::string& out_path, const std::vector<std::string>& inputs) {
  std::ofstream os(out_path);
  if (!os) throw DataError("cannot write " + out_path);
  os << "report,success_auc,precision_at_20,norm_precision_auc,squared_mmd,probe_accuracy\n";
  std::cout << "report\tsucc\tprec@20\tnorm_prec\tmmd\tprobe\n";
  for (const auto& path : inputs) {
    std::ifstream is(path);
    if (!is) throw DataError("cannot read report " + path);
    json j = json::parse(is);
    auto agg = j.at("aggregate");
    std::string mmd = "-", probe = "-";
    if (!j.at("domain_gap").is_null()) {
      mmd = std::to_string(j["domain_gap"]["squared_mmd"].get<double>());
      probe = std::to_string(j["domain_gap"]["probe_accuracy"].get<double>());
    }
    os << path << "," << agg["success_auc"] << "," << agg["precision_at_20"] << ","
       << agg["norm_precision_auc"] << "," << mmd << "," << probe << "\n";
    std::cout << path << "\t" << agg["success_auc"] << "\t" << agg["precision_at_20"] << "\t"
              << agg["norm_precision_auc"] << "\t" << mmd << "\t" << probe << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Progressive domain adaptation tracking toolkit"};
  app.require_subcommand(1);

  CommonOpts common;
  std::string in_dir, out_dir, checkpoint, dataset_dir, out_csv, resume, report_out;
  std::vector<std::string> disable, report_inputs;

  auto* pre = app.add_subcommand("preprocess", "generate pseudo-labeled training pairs");
  add_common(pre, common);
  pre->add_option("in_dir", in_dir, "target-domain dataset root")->required();
  pre->add_option("out_dir", out_dir, "output directory")->required();

  auto* train_cmd = app.add_subcommand("train", "run the progressive training loop");
  add_common(train_cmd, common);
  train_cmd->add_option("--disable", disable, "disable modules: agda, csda")->delimiter(',');
  train_cmd->add_option("--resume", resume, "checkpoint directory to resume from");

  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on a dataset");
  add_common(eval_cmd, common);
  eval_cmd->add_option("checkpoint", checkpoint, "checkpoint directory")->required();
  eval_cmd->add_option("dataset", dataset_dir, "dataset root with ground truth")->required();

  auto* exp = app.add_subcommand("export-embeddings", "dump stage-4 descriptors to CSV");
  add_common(exp, common);
  exp->add_option("checkpoint", checkpoint, "checkpoint directory")->required();
  exp->add_option("out_csv", out_csv, "output CSV path")->required();

  auto* rep = app.add_subcommand("report", "merge metric reports into one table");
  rep->add_option("out", report_out, "output CSV path")->required();
  rep->add_option("inputs", report_inputs, "report.json files")->required();

  auto* corpus = app.add_subcommand("make-corpus", "render a synthetic moving-shape corpus");
  synth::CorpusConfig ccfg;
  uint64_t corpus_seed = 7;
  bool no_boxes = false;
  corpus->add_option("out_dir", out_dir, "corpus directory")->required();
  corpus->add_option("--sequences", ccfg.num_sequences);
  corpus->add_option("--frames", ccfg.frames_per_seq);
  corpus->add_option("--size", ccfg.frame_size);
  corpus->add_option("--seed", corpus_seed);
  corpus->add_flag("--invert", ccfg.invert, "target-domain rendering (invert + blur)");
  corpus->add_flag("--no-boxes", no_boxes, "omit ground-truth files (unlabeled split)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (pre->parsed()) return cmd_preprocess(resolve(common), in_dir, out_dir);
    if (train_cmd->parsed()) return cmd_train(resolve(common), disable, resume);
    if (eval_cmd->parsed()) return cmd_eval(resolve(common), checkpoint, dataset_dir);
    if (exp->parsed()) return cmd_export_embeddings(resolve(common), checkpoint, out_csv);
    if (rep->parsed()) return cmd_report(report_out, report_inputs);
    if (corpus->parsed()) {
      ccfg.write_boxes = !no_boxes;
      synth::make_corpus(out_dir, ccfg, corpus_seed);
      std::cout << "corpus written to " << out_dir << "\n";
      return 0;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const NumericError& e) {
    std::cerr << "numerical abort: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
