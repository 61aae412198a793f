#ifndef PDAT_SYNTH_CORPUS_HPP
#define PDAT_SYNTH_CORPUS_HPP

#include <cstdint>
#include <string>

namespace pdat::synth {

// Moving-bright-shape corpus. The source domain is the plain rendering;
// the target domain is intensity-inverted and blurred (pseudo-TIR), same
// scene statistics otherwise. Shape type rotates through rectangle,
// ellipse and cross, giving the clustering something to find.
struct CorpusConfig {
  int num_sequences = 8;
  int frames_per_seq = 30;
  int frame_size = 128;
  int min_shape = 14;
  int max_shape = 26;
  int distractors = 2;
  int noise_amp = 10;
  double blur_sigma = 1.2;  // target domain only
  bool invert = false;      // target-domain rendering
  bool write_boxes = true;  // off for the unlabeled training split
};

void make_corpus(const std::string& dir, const CorpusConfig& cfg, uint64_t seed);

}  // namespace pdat::synth

#endif
