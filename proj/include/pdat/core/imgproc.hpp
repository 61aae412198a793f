#ifndef PDAT_CORE_IMGPROC_HPP
#define PDAT_CORE_IMGPROC_HPP

#include "pdat/core/image.hpp"
#include "pdat/nn/tensor.hpp"

namespace pdat {

// Per-channel mean intensity of the whole frame (used as the pad value).
double channel_mean(const Image& img, int c);

// Square crop centered at (cx, cy) with side `side`, bilinearly resampled to
// out_size x out_size. Output pixel centers map linearly into the crop
// window; taps outside the frame read the per-channel frame mean.
// Deterministic: pure arithmetic, round-to-nearest on output.
Image crop_resize_square(const Image& img, double cx, double cy, double side, int out_size);

Image to_gray(const Image& img);
Image invert(const Image& img);
Image gaussian_blur(const Image& img, double sigma);

// (C,H,W) tensor scaled to [0,1].
nn::Tensor image_to_tensor(const Image& img);

}  // namespace pdat

#endif
