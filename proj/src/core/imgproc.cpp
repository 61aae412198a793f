#include "pdat/core/imgproc.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace pdat {

double channel_mean(const Image& img, int c) {
  double s = 0.0;
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) s += img.at(y, x, c);
  return s / (static_cast<double>(img.height) * img.width);
}

Image crop_resize_square(const Image& img, double cx, double cy, double side, int out_size) {
  Image out(out_size, out_size, img.channels);
  std::vector<double> means(static_cast<size_t>(img.channels));
  for (int c = 0; c < img.channels; ++c) means[static_cast<size_t>(c)] = channel_mean(img, c);

  double x0 = cx - side / 2.0;
  double y0 = cy - side / 2.0;
  double scale = side / out_size;

  auto tap = [&](int iy, int ix, int c) -> double {
    if (iy < 0 || iy >= img.height || ix < 0 || ix >= img.width)
      return means[static_cast<size_t>(c)];
    return img.at(iy, ix, c);
  };

  for (int v = 0; v < out_size; ++v) {
    double sy = y0 + (v + 0.5) * scale - 0.5;
    int iy = static_cast<int>(std::floor(sy));
    double wy = sy - iy;
    for (int u = 0; u < out_size; ++u) {
      double sx = x0 + (u + 0.5) * scale - 0.5;
      int ix = static_cast<int>(std::floor(sx));
      double wx = sx - ix;
      for (int c = 0; c < img.channels; ++c) {
        double val = (1 - wy) * ((1 - wx) * tap(iy, ix, c) + wx * tap(iy, ix + 1, c)) +
                     wy * ((1 - wx) * tap(iy + 1, ix, c) + wx * tap(iy + 1, ix + 1, c));
        out.at(v, u, c) =
            static_cast<uint8_t>(std::clamp(static_cast<long>(std::lround(val)), 0l, 255l));
      }
    }
  }
  return out;
}

Image to_gray(const Image& img) {
  if (img.channels == 1) return img;
  Image out(img.height, img.width, 1);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      double v = 0.299 * img.at(y, x, 0) + 0.587 * img.at(y, x, 1) + 0.114 * img.at(y, x, 2);
      out.at(y, x, 0) = static_cast<uint8_t>(std::clamp(static_cast<long>(std::lround(v)), 0l, 255l));
    }
  return out;
}

Image invert(const Image& img) {
  Image out = img;
  for (auto& v : out.data) v = static_cast<uint8_t>(255 - v);
  return out;
}

Image gaussian_blur(const Image& img, double sigma) {
  if (sigma <= 0) return img;
  int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> kernel(static_cast<size_t>(2 * radius + 1));
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    double v = std::exp(-(i * i) / (2.0 * sigma * sigma));
    kernel[static_cast<size_t>(i + radius)] = v;
    sum += v;
  }
  for (auto& v : kernel) v /= sum;

  auto clampi = [](int v, int lo, int hi) { return std::min(std::max(v, lo), hi); };

  // separable pass, clamp-to-edge
  std::vector<double> tmp(img.data.size());
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < img.channels; ++c) {
        double s = 0.0;
        for (int i = -radius; i <= radius; ++i)
          s += kernel[static_cast<size_t>(i + radius)] *
               img.at(y, clampi(x + i, 0, img.width - 1), c);
        tmp[(static_cast<size_t>(y) * img.width + x) * img.channels + c] = s;
      }
  Image out(img.height, img.width, img.channels);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < img.channels; ++c) {
        double s = 0.0;
        for (int i = -radius; i <= radius; ++i) {
          int yy = clampi(y + i, 0, img.height - 1);
          s += kernel[static_cast<size_t>(i + radius)] *
               tmp[(static_cast<size_t>(yy) * img.width + x) * img.channels + c];
        }
        out.at(y, x, c) =
            static_cast<uint8_t>(std::clamp(static_cast<long>(std::lround(s)), 0l, 255l));
      }
  return out;
}

nn::Tensor image_to_tensor(const Image& img) {
  nn::Tensor t({img.channels, img.height, img.width});
  for (int c = 0; c < img.channels; ++c)
    for (int y = 0; y < img.height; ++y)
      for (int x = 0; x < img.width; ++x)
        t[(static_cast<long long>(c) * img.height + y) * img.width + x] =
            img.at(y, x, c) / 255.0;
  return t;
}

}  // namespace pdat
