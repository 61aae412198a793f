#include "pdat/synth/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "pdat/core/image.hpp"
#include "pdat/core/imgproc.hpp"
#include "pdat/core/io.hpp"
#include "pdat/core/rng.hpp"

namespace fs = std::filesystem;

namespace pdat::synth {

namespace {

enum class Shape { rect, ellipse, cross };

void draw_shape(Image& img, Shape shape, double cx, double cy, double w, double h,
                int intensity, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> texture(-8, 8);
  int x0 = static_cast<int>(std::floor(cx - w / 2)), x1 = static_cast<int>(std::ceil(cx + w / 2));
  int y0 = static_cast<int>(std::floor(cy - h / 2)), y1 = static_cast<int>(std::ceil(cy + h / 2));
  for (int y = std::max(0, y0); y <= std::min(img.height - 1, y1); ++y)
    for (int x = std::max(0, x0); x <= std::min(img.width - 1, x1); ++x) {
      double nx = (x - cx) / (w / 2), ny = (y - cy) / (h / 2);
      bool in = false;
      switch (shape) {
        case Shape::rect:
          in = std::abs(nx) <= 1.0 && std::abs(ny) <= 1.0;
          break;
        case Shape::ellipse:
          in = nx * nx + ny * ny <= 1.0;
          break;
        case Shape::cross:
          in = (std::abs(nx) <= 1.0 && std::abs(ny) <= 1.0 / 3.0) ||
               (std::abs(ny) <= 1.0 && std::abs(nx) <= 1.0 / 3.0);
          break;
      }
      if (in) {
        int v = intensity + texture(rng);
        img.at(y, x, 0) = static_cast<uint8_t>(std::clamp(v, 0, 255));
      }
    }
}

Image make_background(int size, int noise_amp, std::mt19937_64& rng) {
  Image img(size, size, 1, 40);
  std::uniform_int_distribution<int> noise(-noise_amp, noise_amp);
  for (auto& v : img.data)
    v = static_cast<uint8_t>(std::clamp(static_cast<int>(v) + noise(rng), 0, 255));
  return gaussian_blur(img, 2.0);
}

}  // namespace

void make_corpus(const std::string& dir, const CorpusConfig& cfg, uint64_t seed) {
  fs::create_directories(dir);
  for (int s = 0; s < cfg.num_sequences; ++s) {
    auto rng = make_rng(seed, "seq" + std::to_string(s));
    char seq_name[16];
    std::snprintf(seq_name, sizeof(seq_name), "seq_%03d", s);
    fs::path seq_dir = fs::path(dir) / seq_name;
    fs::create_directories(seq_dir / "img");

    Shape shape = static_cast<Shape>(s % 3);
    std::uniform_real_distribution<double> size_dist(cfg.min_shape, cfg.max_shape);
    double w = size_dist(rng), h = size_dist(rng);
    double margin = std::max(w, h);
    std::uniform_real_distribution<double> pos_dist(margin, cfg.frame_size - margin);
    double cx = pos_dist(rng), cy = pos_dist(rng);
    std::uniform_real_distribution<double> vel_dist(-2.5, 2.5);
    double vx = vel_dist(rng), vy = vel_dist(rng);

    // static distractors, dimmer than the target
    Image base = make_background(cfg.frame_size, cfg.noise_amp, rng);
    for (int d = 0; d < cfg.distractors; ++d) {
      double dx = pos_dist(rng), dy = pos_dist(rng);
      double dw = size_dist(rng) * 0.8, dh = size_dist(rng) * 0.8;
      draw_shape(base, static_cast<Shape>((s + d + 1) % 3), dx, dy, dw, dh, 95, rng);
    }

    std::ofstream gt;
    if (cfg.write_boxes) gt.open(seq_dir / "groundtruth_rect.txt");

    std::uniform_real_distribution<double> accel(-0.6, 0.6);
    std::uniform_int_distribution<int> flicker(-12, 12);
    for (int f = 0; f < cfg.frames_per_seq; ++f) {
      double scale = 1.0 + 0.08 * std::sin(0.3 * f + s);
      double fw = w * scale, fh = h * scale;

      Image frame = base;
      draw_shape(frame, shape, cx, cy, fw, fh, 215 + flicker(rng), rng);

      if (cfg.invert) frame = invert(frame);
      if (cfg.blur_sigma > 0 && cfg.invert) frame = gaussian_blur(frame, cfg.blur_sigma);

      char name[16];
      std::snprintf(name, sizeof(name), "%06d.png", f);
      write_image((seq_dir / "img" / name).string(), frame);

      if (cfg.write_boxes) {
        // 1-based origin on disk
        double bx = cx - fw / 2 + 1.0, by = cy - fh / 2 + 1.0;
        gt << bx << "," << by << "," << fw << "," << fh << "\n";
      }

      vx += accel(rng);
      vy += accel(rng);
      vx = std::clamp(vx, -3.0, 3.0);
      vy = std::clamp(vy, -3.0, 3.0);
      cx += vx;
      cy += vy;
      if (cx < margin || cx > cfg.frame_size - margin) {
        vx = -vx;
        cx = std::clamp(cx, margin, cfg.frame_size - margin);
      }
      if (cy < margin || cy > cfg.frame_size - margin) {
        vy = -vy;
        cy = std::clamp(cy, margin, cfg.frame_size - margin);
      }
    }
  }
}

}  // namespace pdat::synth
