#ifndef PDAT_EVAL_HARNESS_HPP
#define PDAT_EVAL_HARNESS_HPP

#include <optional>
#include <string>
#include <vector>

#include "pdat/data/pairs.hpp"
#include "pdat/eval/metrics.hpp"
#include "pdat/eval/probe.hpp"
#include "pdat/track/infer.hpp"

namespace pdat::eval {

struct SequenceMetrics {
  std::string id;
  int frames = 0;
  double precision_at_20 = 0.0;
  double norm_precision_auc = 0.0;
  double success_auc = 0.0;
  int excluded_frames = 0;
  bool valid = true;
  std::vector<double> precision_curve, norm_precision_curve, success_curve;
};

struct MetricReport {
  std::vector<SequenceMetrics> per_sequence;
  // unweighted means over valid sequences
  double precision_at_20 = 0.0;
  double norm_precision_auc = 0.0;
  double success_auc = 0.0;
  std::optional<DomainGapResult> domain_gap;
  uint64_t config_hash = 0;
};

// One-pass protocol: init from the first ground-truth box, track, score.
// Every sequence needs ground-truth boxes.
MetricReport evaluate_sequences(const std::vector<data::Sequence>& seqs,
                                const track::TrackerModel& model);

// Stage-4 pooled correlation descriptors for a sample set (evaluation mode,
// batched). Used by the domain-gap probe and the embedding export.
std::vector<csda::Vec> stage4_descriptors(const track::TrackerModel& model,
                                          const std::vector<data::DomainSample>& samples,
                                          int max_count);

void write_report(const std::string& path, const MetricReport& report);
void write_curves_csv(const std::string& path, const MetricReport& report);

}  // namespace pdat::eval

#endif
