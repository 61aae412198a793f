#include "pdat/data/pairs.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>

#include <json.hpp>

#include "pdat/core/common.hpp"
#include "pdat/core/imgproc.hpp"
#include "pdat/core/io.hpp"
#include "pdat/core/rng.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace pdat::data {

DomainSample make_pair(const Image& frame, const SegmentCandidate& candidate,
                       const AugmentConfig& aug, uint64_t rng_seed, Domain domain) {
  const Box& b = candidate.box;
  if (!b.inside(frame.width, frame.height))
    throw DataError("make_pair: candidate box outside frame");
  if (aug.search_size != 2 * aug.template_size)
    throw DataError("make_pair: search size must be twice the template size");

  std::mt19937_64 rng(rng_seed);
  std::uniform_real_distribution<double> jitter(-aug.jitter_px, aug.jitter_px);
  double dx = aug.jitter_px > 0 ? jitter(rng) : 0.0;
  double dy = aug.jitter_px > 0 ? jitter(rng) : 0.0;
  double lo = 1.0 / (1.0 + aug.scale_jitter), hi = 1.0 + aug.scale_jitter;
  std::uniform_real_distribution<double> scale_dist(lo, hi);
  double scale = aug.scale_jitter > 0 ? scale_dist(rng) : 1.0;

  double tmpl_side = aug.context_factor * std::max(b.w, b.h);
  double search_side = 2.0 * tmpl_side * scale;
  int S = aug.search_size;

  // Shifting the crop window by (dx, dy) search pixels puts the object
  // center at S/2 - (dx, dy) in patch coordinates, independent of scale.
  double crop_cx = b.cx() + dx * search_side / S;
  double crop_cy = b.cy() + dy * search_side / S;

  DomainSample sample;
  sample.domain = domain;
  sample.template_patch =
      crop_resize_square(frame, b.cx(), b.cy(), tmpl_side, aug.template_size);
  sample.search_patch = crop_resize_square(frame, crop_cx, crop_cy, search_side, S);

  double px_per_src = S / search_side;
  Box pb = Box::from_center(S / 2.0 - dx, S / 2.0 - dy, b.w * px_per_src, b.h * px_per_src);
  if (!pb.inside(S, S))
    throw DataError("make_pair: jitter/context configuration pushes the box out of the patch");
  sample.box = pb;
  return sample;
}

std::vector<DomainSample> build_labeled_pairs(const std::vector<Sequence>& seqs,
                                              const AugmentConfig& aug, int stride, uint64_t seed,
                                              Domain domain) {
  std::vector<DomainSample> out;
  for (const auto& seq : seqs) {
    if (!seq.has_boxes())
      throw DataError("build_labeled_pairs: sequence " + seq.id + " has no boxes");
    for (int f : sample_keyframes(seq, stride)) {
      SegmentCandidate cand;
      cand.frame_index = f;
      cand.box = seq.boxes[static_cast<size_t>(f)];
      cand.confidence = 1.0;
      std::string id = seq.id + ":" + std::to_string(f);
      DomainSample s = make_pair(seq.frames[static_cast<size_t>(f)], cand, aug,
                                 derive_seed(seed, id), domain);
      s.id = id;
      out.push_back(std::move(s));
    }
  }
  return out;
}

std::vector<DomainSample> build_target_pairs(const std::vector<Sequence>& seqs,
                                             const Segmenter& segmenter, double conf_threshold,
                                             const CandidateFilter& filter,
                                             const AugmentConfig& aug, int stride, uint64_t seed,
                                             int max_candidates_per_frame, PairStats* stats) {
  auto shared = std::shared_ptr<const Segmenter>(&segmenter, [](const Segmenter*) {});
  return build_target_pairs(
      seqs, [shared](const Sequence&) { return shared; }, conf_threshold, filter, aug, stride,
      seed, max_candidates_per_frame, stats);
}

std::vector<DomainSample> build_target_pairs(const std::vector<Sequence>& seqs,
                                             const SegmenterProvider& provider,
                                             double conf_threshold, const CandidateFilter& filter,
                                             const AugmentConfig& aug, int stride, uint64_t seed,
                                             int max_candidates_per_frame, PairStats* stats) {
  std::vector<DomainSample> out;
  PairStats local;
  for (const auto& seq : seqs) {
    std::shared_ptr<const Segmenter> segmenter = provider(seq);
    for (int f : sample_keyframes(seq, stride)) {
      ++local.frames_scanned;
      auto cands = segment_frame(seq.frames[static_cast<size_t>(f)], *segmenter, conf_threshold,
                                 filter, f);
      // keep the most confident few per frame
      std::stable_sort(cands.begin(), cands.end(),
                       [](const SegmentCandidate& a, const SegmentCandidate& b) {
                         return a.confidence > b.confidence;
                       });
      if (static_cast<int>(cands.size()) > max_candidates_per_frame)
        cands.resize(static_cast<size_t>(max_candidates_per_frame));
      for (size_t k = 0; k < cands.size(); ++k) {
        ++local.candidates_kept;
        std::string id = seq.id + ":" + std::to_string(f) + ":" + std::to_string(k);
        DomainSample s = make_pair(seq.frames[static_cast<size_t>(f)], cands[k], aug,
                                   derive_seed(seed, id), Domain::target);
        s.id = id;
        out.push_back(std::move(s));
      }
    }
  }
  if (stats) *stats = local;
  return out;
}

void write_pairs_dir(const std::string& dir, const std::vector<DomainSample>& samples,
                     const PairStats& stats, double conf_threshold) {
  fs::create_directories(fs::path(dir) / "t");
  fs::create_directories(fs::path(dir) / "s");
  std::ofstream rows(fs::path(dir) / "pairs.jsonl");
  if (!rows) throw DataError("cannot write pairs.jsonl under " + dir);
  for (size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    char name[32];
    std::snprintf(name, sizeof(name), "%06zu.png", i);
    std::string tpath = (fs::path(dir) / "t" / name).string();
    std::string spath = (fs::path(dir) / "s" / name).string();
    write_image(tpath, s.template_patch);
    write_image(spath, s.search_patch);
    json row;
    row["id"] = s.id;
    row["domain"] = domain_name(s.domain);
    row["template"] = std::string("t/") + name;
    row["search"] = std::string("s/") + name;
    if (s.box)
      row["box"] = {s.box->x, s.box->y, s.box->w, s.box->h};
    else
      row["box"] = nullptr;
    rows << row.dump() << "\n";
  }
  json manifest;
  manifest["pairs"] = samples.size();
  manifest["frames_scanned"] = stats.frames_scanned;
  manifest["candidates_kept"] = stats.candidates_kept;
  manifest["threshold"] = conf_threshold;
  std::ofstream mf(fs::path(dir) / "manifest.json");
  mf << manifest.dump(2) << "\n";
}

std::vector<DomainSample> load_pairs_dir(const std::string& dir) {
  std::ifstream rows(fs::path(dir) / "pairs.jsonl");
  if (!rows) throw DataError("cannot open pairs.jsonl under " + dir);
  std::vector<DomainSample> out;
  std::string line;
  while (std::getline(rows, line)) {
    if (line.empty()) continue;
    json row = json::parse(line);
    DomainSample s;
    s.id = row.at("id").get<std::string>();
    s.domain = row.at("domain").get<std::string>() == "source" ? Domain::source : Domain::target;
    s.template_patch = read_image((fs::path(dir) / row.at("template").get<std::string>()).string());
    s.search_patch = read_image((fs::path(dir) / row.at("search").get<std::string>()).string());
    if (s.template_patch.empty() || s.search_patch.empty())
      throw DataError("missing pair image for sample " + s.id);
    if (!row.at("box").is_null()) {
      auto b = row.at("box");
      s.box = Box{b[0].get<double>(), b[1].get<double>(), b[2].get<double>(), b[3].get<double>()};
    }
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace pdat::data
