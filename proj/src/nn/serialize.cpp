#include "pdat/nn/serialize.hpp"

#include <cstdint>
#include <fstream>
#include <stdexcept>

namespace pdat::nn {

namespace {
constexpr uint32_t kMagic = 0x50444154;  // "PDAT"
constexpr uint32_t kVersion = 1;

void write_u32(std::ostream& os, uint32_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
uint32_t read_u32(std::istream& is) {
  uint32_t v = 0;
  is.read(reinterpret_cast<char*>(&v), sizeof(v));
  if (!is) throw std::runtime_error("serialize: truncated stream");
  return v;
}
void write_str(std::ostream& os, const std::string& s) {
  write_u32(os, static_cast<uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}
std::string read_str(std::istream& is) {
  uint32_t n = read_u32(is);
  std::string s(n, '\0');
  is.read(s.data(), n);
  if (!is) throw std::runtime_error("serialize: truncated stream");
  return s;
}
}  // namespace

void write_tensor(std::ostream& os, const Tensor& t) {
  write_u32(os, static_cast<uint32_t>(t.ndim()));
  for (int i = 0; i < t.ndim(); ++i) write_u32(os, static_cast<uint32_t>(t.dim(i)));
  os.write(reinterpret_cast<const char*>(t.data()),
           static_cast<std::streamsize>(t.size() * sizeof(double)));
}

Tensor read_tensor(std::istream& is) {
  uint32_t nd = read_u32(is);
  std::vector<int> shape(nd);
  for (auto& d : shape) d = static_cast<int>(read_u32(is));
  Tensor t(shape);
  is.read(reinterpret_cast<char*>(t.data()),
          static_cast<std::streamsize>(t.size() * sizeof(double)));
  if (!is) throw std::runtime_error("serialize: truncated tensor data");
  return t;
}

void save_params(const std::string& path, const ParamStore& store) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("save_params: cannot open " + path);
  write_u32(os, kMagic);
  write_u32(os, kVersion);
  write_u32(os, static_cast<uint32_t>(store.items().size()));
  for (const auto& [name, v] : store.items()) {
    write_str(os, name);
    write_tensor(os, v.val());
  }
  if (!os) throw std::runtime_error("save_params: write failure on " + path);
}

void load_params(const std::string& path, ParamStore& store) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("load_params: cannot open " + path);
  if (read_u32(is) != kMagic) throw std::runtime_error("load_params: bad magic in " + path);
  if (read_u32(is) != kVersion) throw std::runtime_error("load_params: bad version in " + path);
  uint32_t n = read_u32(is);
  for (uint32_t i = 0; i < n; ++i) {
    std::string name = read_str(is);
    Tensor t = read_tensor(is);
    Var* dst = store.find(name);
    if (!dst) throw std::runtime_error("load_params: unknown parameter " + name);
    if (!dst->val().same_shape(t))
      throw std::runtime_error("load_params: shape mismatch for " + name);
    dst->val() = std::move(t);
  }
}

void save_adam(std::ostream& os, Adam& opt) {
  uint32_t n = static_cast<uint32_t>(opt.m().size());
  write_u32(os, n);
  uint64_t t = static_cast<uint64_t>(opt.step_count());
  os.write(reinterpret_cast<const char*>(&t), sizeof(t));
  for (uint32_t i = 0; i < n; ++i) {
    write_tensor(os, opt.m()[i]);
    write_tensor(os, opt.v()[i]);
  }
}

uint64_t hash_params(const ParamStore& store) {
  uint64_t h = 1469598103934665603ull;
  auto mix = [&h](const void* data, size_t len) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < len; ++i) {
      h ^= p[i];
      h *= 1099511628211ull;
    }
  };
  for (const auto& [name, v] : store.items()) {
    mix(name.data(), name.size());
    mix(v.val().data(), static_cast<size_t>(v.val().size()) * sizeof(double));
  }
  return h;
}

void load_adam(std::istream& is, Adam& opt) {
  uint32_t n = read_u32(is);
  if (n != opt.m().size()) throw std::runtime_error("load_adam: parameter count mismatch");
  uint64_t t = 0;
  is.read(reinterpret_cast<char*>(&t), sizeof(t));
  opt.set_step_count(static_cast<int64_t>(t));
  for (uint32_t i = 0; i < n; ++i) {
    opt.m()[i] = read_tensor(is);
    opt.v()[i] = read_tensor(is);
  }
}

}  // namespace pdat::nn
