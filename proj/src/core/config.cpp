#include "pdat/core/config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "pdat/core/common.hpp"
#include "pdat/core/rng.hpp"

namespace pdat {

namespace {

// Desk-scale defaults. The paper preset overrides the training recipe keys.
const std::map<std::string, std::string>& schema_defaults() {
  static const std::map<std::string, std::string> defaults = {
      {"seed", "1"},
      // data_pipeline
      {"data.source_dir", ""},
      {"data.target_dir", ""},
      {"data.eval_dir", ""},
      {"data.target_pairs_dir", ""},
      {"data.template_size", "64"},
      {"data.search_size", "128"},
      {"data.channels", "1"},
      {"data.context_factor", "2.0"},
      {"data.jitter_px", "16"},
      {"data.scale_jitter", "0.25"},
      {"data.min_area", "16"},
      {"data.max_rel_area", "0.5"},
      {"data.conf_threshold", "0.25"},
      {"data.segmenter", "stub"},
      {"data.seg_threshold", "40"},
      {"data.max_candidates", "16"},
      {"data.source_stride", "1"},
      {"data.target_stride", "5"},
      // tracker_core
      {"tracker.widths", "16,32,64,128"},
      {"tracker.head_stage", "3"},
      {"tracker.head_width", "64"},
      {"tracker.lambda_cls", "1.0"},
      {"tracker.lambda_reg", "3.0"},
      {"tracker.lambda_cen", "1.0"},
      {"tracker.window_weight", "0.3"},
      {"tracker.reg_scale", "8.0"},
      // global adaptation
      {"agda.enabled", "true"},
      {"agda.stages", "3,4"},
      {"agda.d_model", "64"},
      {"agda.heads", "4"},
      {"agda.ff", "128"},
      {"agda.grl_coefficient", "1.0"},
      {"agda.grl_warmup", "0.1"},
      {"agda.loss_weight", "1.0"},
      // subdomain adaptation
      {"csda.enabled", "true"},
      {"csda.align_stage", "4"},
      {"csda.memory_size", "256"},
      {"csda.refit_interval", "25"},
      {"csda.c_min", "2"},
      {"csda.c_max", "10"},
      {"csda.kernel_multipliers", "0.25,0.5,1,2,4"},
      {"csda.vote_weights", "1,2,3,4"},
      {"csda.loss_weight", "1.0"},
      {"csda.kmeans_restarts", "3"},
      {"csda.kmeans_iters", "50"},
      // trainer
      {"train.epochs", "5"},
      {"train.batch_size", "8"},
      {"train.lr_backbone", "0.001"},
      {"train.lr_discriminator", "0.001"},
      {"train.poly_power", "0.8"},
      {"train.adam_beta1", "0.9"},
      {"train.adam_beta2", "0.999"},
      {"train.adam_eps", "1e-8"},
      {"train.threads", "2"},
      {"train.deterministic", "false"},
      {"train.init_checkpoint", ""},
      {"train.out_dir", "runs/out"},
      {"train.checkpoint_every", "1"},
      // eval
      {"eval.out_dir", "runs/eval"},
      {"eval.probe_source_dir", ""},
      {"eval.max_probe_samples", "256"},
  };
  return defaults;
}

const std::map<std::string, std::string>& paper_overrides() {
  static const std::map<std::string, std::string> overrides = {
      {"data.template_size", "96"},   {"data.search_size", "192"},
      {"data.target_stride", "10"},   {"train.epochs", "20"},
      {"train.batch_size", "24"},     {"train.lr_discriminator", "0.005"},
      {"train.poly_power", "0.8"},    {"agda.stages", "1,2,3,4"},
      {"csda.memory_size", "1024"},   {"csda.refit_interval", "50"},
      {"csda.c_min", "2"},            {"csda.c_max", "10"},
      {"csda.vote_weights", "1,2,3,4"},
  };
  return overrides;
}

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

Config Config::preset(const std::string& name) {
  Config c;
  c.values_ = schema_defaults();
  if (name == "desk") return c;
  if (name == "paper") {
    for (const auto& [k, v] : paper_overrides()) c.values_[k] = v;
    return c;
  }
  throw ConfigError("unknown preset '" + name + "' (expected desk or paper)");
}

Config Config::load(const std::string& preset_name, const std::string& path,
                    const std::vector<std::string>& overrides) {
  Config c = preset(preset_name);
  if (!path.empty()) c.apply_file(path);
  for (const auto& ov : overrides) c.apply_override(ov);
  return c;
}

void Config::apply_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file " + path);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    size_t eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError(path + ":" + std::to_string(lineno) + ": expected key = value");
    set(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
  }
}

void Config::apply_override(const std::string& key_eq_value) {
  size_t eq = key_eq_value.find('=');
  if (eq == std::string::npos) throw ConfigError("--set expects key=value, got " + key_eq_value);
  set(trim(key_eq_value.substr(0, eq)), trim(key_eq_value.substr(eq + 1)));
}

void Config::set(const std::string& key, const std::string& value) {
  if (!schema_defaults().count(key)) throw ConfigError("unknown config key '" + key + "'");
  values_[key] = value;
}

bool Config::has(const std::string& key) const { return values_.count(key) > 0; }

const std::string& Config::get_str(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'");
  return it->second;
}

int Config::get_int(const std::string& key) const {
  const std::string& s = get_str(key);
  try {
    size_t pos = 0;
    int v = std::stoi(s, &pos);
    if (pos != s.size()) throw std::invalid_argument("");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': expected integer, got '" + s + "'");
  }
}

double Config::get_double(const std::string& key) const {
  const std::string& s = get_str(key);
  try {
    size_t pos = 0;
    double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument("");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': expected number, got '" + s + "'");
  }
}

bool Config::get_bool(const std::string& key) const {
  const std::string& s = get_str(key);
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  throw ConfigError("config key '" + key + "': expected bool, got '" + s + "'");
}

std::vector<int> Config::get_int_list(const std::string& key) const {
  std::vector<int> out;
  std::stringstream ss(get_str(key));
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    try {
      out.push_back(std::stoi(item));
    } catch (const std::exception&) {
      throw ConfigError("config key '" + key + "': bad integer list entry '" + item + "'");
    }
  }
  return out;
}

std::vector<double> Config::get_double_list(const std::string& key) const {
  std::vector<double> out;
  std::stringstream ss(get_str(key));
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    try {
      out.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw ConfigError("config key '" + key + "': bad number list entry '" + item + "'");
    }
  }
  return out;
}

std::string Config::serialize() const {
  std::ostringstream os;
  for (const auto& [k, v] : values_) os << k << " = " << v << "\n";
  return os.str();
}

uint64_t Config::hash() const { return fnv1a(serialize()); }

void Config::save(const std::string& path) const {
  std::ofstream os(path);
  if (!os) throw DataError("cannot write config snapshot " + path);
  os << serialize();
}

Config Config::from_snapshot(const std::string& path) {
  Config c;
  c.values_ = schema_defaults();
  c.apply_file(path);
  return c;
}

}  // namespace pdat
