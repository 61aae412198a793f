#ifndef PDAT_CORE_IMAGE_HPP
#define PDAT_CORE_IMAGE_HPP

#include <cstdint>
#include <vector>

namespace pdat {

// 8-bit image, HWC interleaved, 1 or 3 channels.
struct Image {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<uint8_t> data;

  Image() = default;
  Image(int h, int w, int c, uint8_t fill = 0)
      : height(h), width(w), channels(c),
        data(static_cast<size_t>(h) * w * c, fill) {}

  bool empty() const { return data.empty(); }

  uint8_t& at(int y, int x, int c) {
    return data[(static_cast<size_t>(y) * width + x) * channels + c];
  }
  uint8_t at(int y, int x, int c) const {
    return data[(static_cast<size_t>(y) * width + x) * channels + c];
  }
};

// Axis-aligned box, pixel units. (x, y) is the top-left corner.
struct Box {
  double x = 0, y = 0, w = 0, h = 0;

  double cx() const { return x + w / 2.0; }
  double cy() const { return y + h / 2.0; }
  double area() const { return w * h; }
  double x2() const { return x + w; }
  double y2() const { return y + h; }

  static Box from_center(double cx, double cy, double w, double h) {
    return {cx - w / 2.0, cy - h / 2.0, w, h};
  }

  bool inside(int img_w, int img_h) const {
    return w > 0 && h > 0 && x >= 0 && y >= 0 && x + w <= img_w && y + h <= img_h;
  }
};

}  // namespace pdat

#endif
