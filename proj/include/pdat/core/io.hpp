#ifndef PDAT_CORE_IO_HPP
#define PDAT_CORE_IO_HPP

#include <string>

#include "pdat/core/image.hpp"

namespace pdat {

// Thin wrappers over OpenCV imgcodecs; the rest of the project never sees
// cv::Mat. Grayscale files load as 1 channel, color as 3 (RGB order).
Image read_image(const std::string& path);
void write_image(const std::string& path, const Image& img);

}  // namespace pdat

#endif
