#ifndef PDAT_TRAIN_SCHEDULE_HPP
#define PDAT_TRAIN_SCHEDULE_HPP

#include <cmath>
#include <stdexcept>

namespace pdat::train {

// Poly decay: base * (1 - iter/max_iter)^power. Iterations past the end
// clamp to zero.
inline double poly_lr(double base, long long iter, long long max_iter, double power = 0.8) {
  if (iter < 0) throw std::invalid_argument("poly_lr: negative iteration");
  if (max_iter <= 0) throw std::invalid_argument("poly_lr: max_iter must be positive");
  if (iter >= max_iter) return 0.0;
  return base * std::pow(1.0 - static_cast<double>(iter) / static_cast<double>(max_iter), power);
}

}  // namespace pdat::train

#endif
