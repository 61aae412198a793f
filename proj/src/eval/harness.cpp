#include "pdat/eval/harness.hpp"

#include <fstream>

#include <json.hpp>

#include "pdat/core/common.hpp"
#include "pdat/csda/descriptor.hpp"

using nlohmann::json;

namespace pdat::eval {

MetricReport evaluate_sequences(const std::vector<data::Sequence>& seqs,
                                const track::TrackerModel& model) {
  if (seqs.empty()) throw DataError("evaluate_sequences: empty dataset");
  MetricReport report;
  int valid_count = 0;
  for (const auto& seq : seqs) {
    if (!seq.has_boxes())
      throw DataError("evaluate_sequences: sequence " + seq.id + " has no ground truth");
    auto results = track::track_sequence(seq, seq.boxes[0], model);

    std::vector<Box> pred_boxes, gt_boxes;
    std::vector<std::pair<double, double>> pred_centers, gt_centers;
    for (size_t f = 0; f < results.size(); ++f) {
      pred_boxes.push_back(results[f].box);
      gt_boxes.push_back(seq.boxes[f]);
      pred_centers.push_back({results[f].box.cx(), results[f].box.cy()});
      gt_centers.push_back({seq.boxes[f].cx(), seq.boxes[f].cy()});
    }

    SequenceMetrics m;
    m.id = seq.id;
    m.frames = static_cast<int>(results.size());
    PrecisionCurve pc = precision_curve(pred_centers, gt_centers);
    NormPrecisionCurve nc = normalized_precision_curve(pred_centers, gt_boxes);
    SuccessCurve sc = success_auc(pred_boxes, gt_boxes);
    m.precision_at_20 = pc.precision_at_20;
    m.norm_precision_auc = nc.auc;
    m.success_auc = sc.auc;
    m.excluded_frames = nc.excluded_frames;
    m.valid = nc.valid;
    m.precision_curve = pc.curve;
    m.norm_precision_curve = nc.curve;
    m.success_curve = sc.curve;
    report.per_sequence.push_back(std::move(m));

    if (report.per_sequence.back().valid) {
      ++valid_count;
      report.precision_at_20 += pc.precision_at_20;
      report.norm_precision_auc += nc.auc;
      report.success_auc += sc.auc;
    }
  }
  if (valid_count > 0) {
    report.precision_at_20 /= valid_count;
    report.norm_precision_auc /= valid_count;
    report.success_auc /= valid_count;
  }
  return report;
}

std::vector<csda::Vec> stage4_descriptors(const track::TrackerModel& model,
                                          const std::vector<data::DomainSample>& samples,
                                          int max_count) {
  nn::NoGradGuard no_grad;
  int channels = model.config().backbone.in_channels;
  std::vector<csda::Vec> out;
  size_t limit = std::min(samples.size(), static_cast<size_t>(max_count));
  const size_t chunk = 8;
  for (size_t base = 0; base < limit; base += chunk) {
    size_t n = std::min(chunk, limit - base);
    std::vector<nn::Tensor> z_batch, x_batch;
    for (size_t i = 0; i < n; ++i) {
      z_batch.push_back(track::patch_tensor(samples[base + i].template_patch, channels));
      x_batch.push_back(track::patch_tensor(samples[base + i].search_patch, channels));
    }
    auto zp = model.pyramid(track::stack_patches(z_batch), track::PatchKind::template_z);
    auto xp = model.pyramid(track::stack_patches(x_batch), track::PatchKind::search_x);
    csda::DescriptorBatch batch = csda::correlation_descriptor(zp.stages[3], xp.stages[3]);
    int dim = batch.rows.shape()[1];
    for (size_t i = 0; i < n; ++i) {
      csda::Vec v(static_cast<size_t>(dim));
      for (int j = 0; j < dim; ++j) v[static_cast<size_t>(j)] = batch.rows.val().at(static_cast<int>(i), j);
      out.push_back(std::move(v));
    }
  }
  return out;
}

void write_report(const std::string& path, const MetricReport& report) {
  json j;
  j["aggregate"] = {{"precision_at_20", report.precision_at_20},
                    {"norm_precision_auc", report.norm_precision_auc},
                    {"success_auc", report.success_auc}};
  j["per_sequence"] = json::array();
  for (const auto& m : report.per_sequence) {
    j["per_sequence"].push_back({{"id", m.id},
                                 {"frames", m.frames},
                                 {"precision_at_20", m.precision_at_20},
                                 {"norm_precision_auc", m.norm_precision_auc},
                                 {"success_auc", m.success_auc},
                                 {"excluded_frames", m.excluded_frames},
                                 {"valid", m.valid}});
  }
  if (report.domain_gap) {
    j["domain_gap"] = {{"squared_mmd", report.domain_gap->squared_mmd},
                       {"probe_accuracy", report.domain_gap->probe_accuracy}};
  } else {
    j["domain_gap"] = nullptr;
  }
  j["config_hash"] = report.config_hash;
  std::ofstream os(path);
  if (!os) throw DataError("cannot write report " + path);
  os << j.dump(2) << "\n";
}

void write_curves_csv(const std::string& path, const MetricReport& report) {
  std::ofstream os(path);
  if (!os) throw DataError("cannot write curves " + path);
  os << "sequence,metric";
  for (int t = 0; t < kCurveSamples; ++t) os << ",t" << t;
  os << "\n";
  auto row = [&](const std::string& id, const char* name, const std::vector<double>& curve) {
    os << id << "," << name;
    for (double v : curve) os << "," << v;
    os << "\n";
  };
  for (const auto& m : report.per_sequence) {
    row(m.id, "precision", m.precision_curve);
    row(m.id, "normalized_precision", m.norm_precision_curve);
    row(m.id, "success", m.success_curve);
  }
}

}  // namespace pdat::eval
