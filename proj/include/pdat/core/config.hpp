#ifndef PDAT_CORE_CONFIG_HPP
#define PDAT_CORE_CONFIG_HPP

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace pdat {

// Flat dotted-key configuration. The schema (all known keys plus their
// defaults) is fixed at build time; unknown keys are rejected. Presets:
//   desk  — small sizes, finishes on a CPU in minutes.
//   paper — the published training recipe (epochs 20, batch 24, lr 0.005,
//           poly 0.8, clusters 2..10, vote weights 1..4, AGDA on stages
//           1-4, alignment on stage 4).
class Config {
 public:
  // Schema defaults with the named preset applied.
  static Config preset(const std::string& name);

  // Preset, then file keys, then --set overrides (later wins).
  static Config load(const std::string& preset_name, const std::string& path,
                     const std::vector<std::string>& overrides);

  void apply_file(const std::string& path);
  void apply_override(const std::string& key_eq_value);  // "key=value"
  void set(const std::string& key, const std::string& value);

  bool has(const std::string& key) const;
  const std::string& get_str(const std::string& key) const;
  int get_int(const std::string& key) const;
  double get_double(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  std::vector<int> get_int_list(const std::string& key) const;
  std::vector<double> get_double_list(const std::string& key) const;

  uint64_t seed() const { return static_cast<uint64_t>(get_int("seed")); }

  // Deterministic text form (sorted keys), written as config.snapshot.
  std::string serialize() const;
  uint64_t hash() const;

  void save(const std::string& path) const;
  static Config from_snapshot(const std::string& path);

  const std::map<std::string, std::string>& entries() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace pdat

#endif
