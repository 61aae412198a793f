#ifndef PDAT_NN_SERIALIZE_HPP
#define PDAT_NN_SERIALIZE_HPP

#include <iosfwd>
#include <string>

#include "pdat/nn/layers.hpp"
#include "pdat/nn/optim.hpp"

namespace pdat::nn {

// Binary tensor stream: [i32 ndim][i32 dims...][f64 data...].
void write_tensor(std::ostream& os, const Tensor& t);
Tensor read_tensor(std::istream& is);

// params.bin: magic, version, entry count, then (name, tensor) pairs in
// registry order. Loading matches by name and checks shapes.
void save_params(const std::string& path, const ParamStore& store);
void load_params(const std::string& path, ParamStore& store);

// Adam buffers for exact training resume.
void save_adam(std::ostream& os, Adam& opt);
void load_adam(std::istream& is, Adam& opt);

// FNV over the raw parameter bytes; detects any parameter mutation.
uint64_t hash_params(const ParamStore& store);

}  // namespace pdat::nn

#endif
