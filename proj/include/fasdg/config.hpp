#ifndef FASDG_CONFIG_HPP_
#define FASDG_CONFIG_HPP_

#include "fasdg/core.hpp"
#include "fasdg/model.hpp"
#include "fasdg/synthdata.hpp"
#include "fasdg/trainer.hpp"

#include <charconv>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace fasdg {

/// One run's configuration: training hyperparameters, benchmark layout,
/// protocol and variant. Defaults are the published training settings.
struct RunConfig {
  TrainConfig train;
  std::vector<std::string> presets = preset_names();
  int n_videos = 40;
  int frames_per_video = 16;
  int target_domain = 3;
  double val_fraction = 0.2;
  Variant variant = Variant::kFull;
  int ablate_seeds = 3;
  std::vector<int> ablate_targets;  // empty: every domain
  int cam_sample = 0;
  std::string out = "runs";

  void validate() const {
    train.validate();
    if (presets.size() < 3) throw ConfigError("presets: need at least 3 domains");
    for (const auto& p : presets) (void)preset_by_name(p, 0);
    if (n_videos < 2) throw ConfigError("n_videos must be >= 2");
    if (frames_per_video < train.sequence_length) {
      throw ConfigError("frames_per_video must be >= sequence_length");
    }
    if (target_domain < 0 || target_domain >= static_cast<int>(presets.size())) {
      throw ConfigError("target_domain " + std::to_string(target_domain) + " is not in [0, " +
                        std::to_string(presets.size()) + ")");
    }
    if (!(val_fraction > 0.0 && val_fraction < 1.0)) {
      throw ConfigError("val_fraction must lie in (0, 1)");
    }
    if (ablate_seeds < 1) throw ConfigError("ablate_seeds must be >= 1");
    for (int t : ablate_targets) {
      if (t < 0 || t >= static_cast<int>(presets.size())) {
        throw ConfigError("ablate_targets entry " + std::to_string(t) + " is out of range");
      }
    }
    if (cam_sample < 0) throw ConfigError("cam_sample must be >= 0");
  }

  [[nodiscard]] GenerateOptions generate_options() const {
    GenerateOptions o;
    o.n_videos = n_videos;
    o.frames_per_video = frames_per_video;
    const ModelProfile p = profile_by_name(train.profile);
    o.height = p.input_height;
    o.width = p.input_width;
    o.sequence_length = train.sequence_length;
    return o;
  }
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

template <class T>
T parse_number(const std::string& key, const std::string& v) {
  T out{};
  const char* end = v.data() + v.size();
  auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || ptr != end) {
    throw ConfigError("config key '" + key + "': cannot parse '" + v + "'");
  }
  return out;
}

template <>
inline double parse_number<double>(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double out = 0.0;
  try {
    out = std::stod(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != v.size() || v.empty()) {
    throw ConfigError("config key '" + key + "': cannot parse '" + v + "'");
  }
  return out;
}

/// Shortest text that parses back to exactly `v`.
inline std::string format_double(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

inline std::string join(const std::vector<std::string>& v) {
  std::string out;
  for (const auto& s : v) out += (out.empty() ? "" : ",") + s;
  return out;
}

struct ConfigKey {
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

inline const std::map<std::string, ConfigKey>& config_keys() {
  static const std::map<std::string, ConfigKey> keys = [] {
    std::map<std::string, ConfigKey> k;
    auto real = [&k](const char* name, double TrainConfig::*field) {
      k[name] = {[name, field](RunConfig& c, const std::string& v) {
                   c.train.*field = parse_number<double>(name, v);
                 },
                 [field](const RunConfig& c) { return format_double(c.train.*field); }};
    };
    auto integer = [&k](const char* name, int TrainConfig::*field) {
      k[name] = {[name, field](RunConfig& c, const std::string& v) {
                   c.train.*field = parse_number<int>(name, v);
                 },
                 [field](const RunConfig& c) { return std::to_string(c.train.*field); }};
    };
    real("learning_rate", &TrainConfig::learning_rate);
    real("momentum", &TrainConfig::momentum);
    real("weight_decay", &TrainConfig::weight_decay);
    real("lambda_grl", &TrainConfig::lambda_grl);
    real("lambda_ib", &TrainConfig::lambda_ib);
    real("lambda_vb", &TrainConfig::lambda_vb);
    integer("ib_per_domain", &TrainConfig::ib_per_domain);
    integer("vb_clips_per_domain", &TrainConfig::vb_clips_per_domain);
    integer("sequence_length", &TrainConfig::sequence_length);
    integer("max_steps", &TrainConfig::max_steps);
    integer("eval_every", &TrainConfig::eval_every);
    k["seed"] = {[](RunConfig& c, const std::string& v) {
                   c.train.seed = parse_number<std::uint64_t>("seed", v);
                 },
                 [](const RunConfig& c) { return std::to_string(c.train.seed); }};
    k["profile"] = {[](RunConfig& c, const std::string& v) {
                      (void)profile_by_name(v);
                      c.train.profile = v;
                    },
                    [](const RunConfig& c) { return c.train.profile; }};
    k["presets"] = {[](RunConfig& c, const std::string& v) {
                      c.presets = split_list(v);
                      for (const auto& p : c.presets) (void)preset_by_name(p, 0);
                    },
                    [](const RunConfig& c) { return join(c.presets); }};
    k["n_videos"] = {[](RunConfig& c, const std::string& v) {
                       c.n_videos = parse_number<int>("n_videos", v);
                     },
                     [](const RunConfig& c) { return std::to_string(c.n_videos); }};
    k["frames_per_video"] = {[](RunConfig& c, const std::string& v) {
                               c.frames_per_video = parse_number<int>("frames_per_video", v);
                             },
                             [](const RunConfig& c) { return std::to_string(c.frames_per_video); }};
    k["target_domain"] = {[](RunConfig& c, const std::string& v) {
                            c.target_domain = parse_number<int>("target_domain", v);
                          },
                          [](const RunConfig& c) { return std::to_string(c.target_domain); }};
    k["val_fraction"] = {[](RunConfig& c, const std::string& v) {
                           c.val_fraction = parse_number<double>("val_fraction", v);
                         },
                         [](const RunConfig& c) { return format_double(c.val_fraction); }};
    k["variant"] = {[](RunConfig& c, const std::string& v) { c.variant = variant_from_string(v); },
                    [](const RunConfig& c) { return to_string(c.variant); }};
    k["ablate_seeds"] = {[](RunConfig& c, const std::string& v) {
                           c.ablate_seeds = parse_number<int>("ablate_seeds", v);
                         },
                         [](const RunConfig& c) { return std::to_string(c.ablate_seeds); }};
    k["ablate_targets"] = {[](RunConfig& c, const std::string& v) {
                             c.ablate_targets.clear();
                             for (const auto& t : split_list(v)) {
                               c.ablate_targets.push_back(parse_number<int>("ablate_targets", t));
                             }
                           },
                           [](const RunConfig& c) {
                             std::vector<std::string> s;
                             for (int t : c.ablate_targets) s.push_back(std::to_string(t));
                             return join(s);
                           }};
    k["cam_sample"] = {[](RunConfig& c, const std::string& v) {
                         c.cam_sample = parse_number<int>("cam_sample", v);
                       },
                       [](const RunConfig& c) { return std::to_string(c.cam_sample); }};
    k["out"] = {[](RunConfig& c, const std::string& v) { c.out = v; },
                [](const RunConfig& c) { return c.out; }};
    return k;
  }();
  return keys;
}

}  // namespace detail

/// Sets one key. Unknown keys are rejected with the list of valid ones.
inline void set_config_value(RunConfig& c, const std::string& key, const std::string& value) {
  const auto& keys = detail::config_keys();
  auto it = keys.find(key);
  if (it == keys.end()) {
    std::vector<std::string> valid;
    for (const auto& [k, _] : keys) valid.push_back(k);
    throw ConfigError("unknown config key '" + key + "' (valid: " + detail::join(valid) + ")");
  }
  it->second.set(c, value);
}

/// Parses `key = value` lines. `#` starts a comment; blank lines are skipped;
/// a key may appear only once.
inline RunConfig parse_config(const std::string& text, RunConfig base = {}) {
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  std::map<std::string, int> seen;
  while (std::getline(is, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    }
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    if (auto [it, fresh] = seen.emplace(key, lineno); !fresh) {
      throw ConfigError("config line " + std::to_string(lineno) + ": key '" + key +
                        "' already set on line " + std::to_string(it->second));
    }
    try {
      set_config_value(base, key, value);
    } catch (const ConfigError& e) {
      throw ConfigError("config line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return base;
}

inline RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot read config file " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_config(ss.str());
}

/// Every key with its resolved value, sorted by key; parses back to an
/// equal configuration. With `include_out` false the output location is
/// left out, which is how run directories record their configuration.
inline std::string serialize_config(const RunConfig& c, bool include_out = true) {
  std::string out;
  for (const auto& [k, key] : detail::config_keys()) {
    if (include_out || k != "out") out += k + " = " + key.get(c) + "\n";
  }
  return out;
}

/// Fingerprint of everything that shapes a run's results: all keys except
/// the output location.
inline std::string config_hash(const RunConfig& c) {
  std::string text;
  for (const auto& [k, key] : detail::config_keys()) {
    if (k != "out") text += k + "=" + key.get(c) + "\n";
  }
  return hex64(fnv1a(text));
}

}  // namespace fasdg

#endif  // FASDG_CONFIG_HPP_
