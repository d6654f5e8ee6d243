#ifndef FASDG_CHECKPOINT_HPP_
#define FASDG_CHECKPOINT_HPP_

#include "fasdg/trainer.hpp"

#include <json.hpp>

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace fasdg {

// Archive layout:
//   8 bytes   magic "FASDGCK1"
//   8 bytes   little-endian length of the metadata JSON
//   n bytes   metadata JSON
//   rest      raw doubles: every parameter in census order, then every
//             optimiser velocity in metadata order
inline constexpr char kCheckpointMagic[8] = {'F', 'A', 'S', 'D', 'G', 'C', 'K', '1'};

struct TensorEntry {
  std::string name;
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;
};

/// Everything needed to rebuild a network and resume its training loop.
struct Checkpoint {
  std::string profile;
  int sequence_length = 0;
  int num_domains = 0;
  Variant variant = Variant::kBackbone;
  std::uint64_t seed = 0;
  int step = 0;
  nlohmann::json config;
  std::vector<TensorEntry> params;
  std::vector<Matrix> values;
  std::vector<TensorEntry> velocity_shapes;
  std::vector<Matrix> velocities;
  std::map<std::string, std::string> dropout_states;
  std::string trainer_rng;
  TrainHistory history;
};

namespace detail {

template <class Engine>
std::string engine_state(const Engine& e) {
  std::ostringstream os;
  os << e;
  return os.str();
}

template <class Engine>
void set_engine_state(Engine& e, const std::string& s) {
  std::istringstream is(s);
  is >> e;
  if (!is) throw DataError("corrupt random engine state in checkpoint");
}

inline nlohmann::json history_to_json(const TrainHistory& h) {
  nlohmann::json steps = nlohmann::json::array();
  for (const auto& r : h.steps) {
    steps.push_back({r.step, to_string(r.network), r.losses.class_loss, r.losses.live_domain_loss,
                     r.losses.spoof_domain_loss, r.losses.weight, r.losses.total});
  }
  nlohmann::json vals = nlohmann::json::array();
  for (const auto& v : h.validations) vals.push_back({v.step, v.hter, to_string(v.head)});
  return {{"steps", steps}, {"validations", vals}};
}

inline Head head_from_string(const std::string& s) {
  if (s == "IB") return Head::kIB;
  if (s == "VB") return Head::kVB;
  throw DataError("unknown head '" + s + "' in checkpoint");
}

inline TrainHistory history_from_json(const nlohmann::json& j) {
  TrainHistory h;
  for (const auto& r : j.at("steps")) {
    StepRecord s;
    s.step = r.at(0).get<int>();
    s.network = head_from_string(r.at(1).get<std::string>());
    s.losses.class_loss = r.at(2).get<double>();
    s.losses.live_domain_loss = r.at(3).get<double>();
    s.losses.spoof_domain_loss = r.at(4).get<double>();
    s.losses.weight = r.at(5).get<double>();
    s.losses.total = r.at(6).get<double>();
    h.steps.push_back(s);
  }
  for (const auto& r : j.at("validations")) {
    h.validations.push_back(
        {r.at(0).get<int>(), r.at(1).get<double>(), head_from_string(r.at(2).get<std::string>())});
  }
  return h;
}

inline nlohmann::json tensors_to_json(const std::vector<TensorEntry>& t) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& e : t) out.push_back({e.name, e.rows, e.cols});
  return out;
}

inline std::vector<TensorEntry> tensors_from_json(const nlohmann::json& j) {
  std::vector<TensorEntry> out;
  for (const auto& e : j) {
    out.push_back({e.at(0).get<std::string>(), e.at(1).get<Eigen::Index>(),
                   e.at(2).get<Eigen::Index>()});
  }
  return out;
}

inline void write_u64(std::ostream& os, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 8);
}

inline std::uint64_t read_u64(std::istream& is) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  if (!is) throw DataError("truncated checkpoint header");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

}  // namespace detail

inline nlohmann::json config_to_json(const TrainConfig& c) {
  return {{"learning_rate", c.learning_rate},
          {"momentum", c.momentum},
          {"weight_decay", c.weight_decay},
          {"lambda_grl", c.lambda_grl},
          {"lambda_ib", c.lambda_ib},
          {"lambda_vb", c.lambda_vb},
          {"ib_per_domain", c.ib_per_domain},
          {"vb_clips_per_domain", c.vb_clips_per_domain},
          {"sequence_length", c.sequence_length},
          {"max_steps", c.max_steps},
          {"seed", c.seed},
          {"profile", c.profile},
          {"eval_every", c.eval_every}};
}

/// Snapshot of a network alone (no optimiser or loop state).
inline Checkpoint snapshot(Network& net) {
  Checkpoint ck;
  ck.profile = net.profile().name;
  ck.sequence_length = net.profile().sequence_length;
  ck.num_domains = net.profile().num_domains;
  ck.variant = net.variant();
  ck.seed = net.seed();
  for (auto& p : net.all_parameters()) {
    ck.params.push_back({p.name, p.param->value.rows(), p.param->value.cols()});
    ck.values.push_back(p.param->value);
  }
  for (auto& [name, engine] : net.rng_engines()) {
    ck.dropout_states[name] = detail::engine_state(*engine);
  }
  return ck;
}

/// Snapshot of a trainer, including velocities, random streams and history.
inline Checkpoint snapshot(Trainer& t) {
  Checkpoint ck = snapshot(t.network());
  ck.step = t.step();
  ck.config = config_to_json(t.config());
  for (const auto& [name, v] : t.optimizer().velocity()) {
    ck.velocity_shapes.push_back({name, v.rows(), v.cols()});
    ck.velocities.push_back(v);
  }
  ck.trainer_rng = detail::engine_state(t.rng());
  ck.history = t.history();
  return ck;
}

/// Writes through a temporary file and renames it into place, so a crash
/// never leaves a half-written checkpoint behind.
inline void save_checkpoint(const Checkpoint& ck, const std::filesystem::path& path) {
  nlohmann::json meta = {{"format", 1},
                         {"profile", ck.profile},
                         {"sequence_length", ck.sequence_length},
                         {"num_domains", ck.num_domains},
                         {"variant", to_string(ck.variant)},
                         {"seed", ck.seed},
                         {"step", ck.step},
                         {"config", ck.config},
                         {"params", detail::tensors_to_json(ck.params)},
                         {"velocities", detail::tensors_to_json(ck.velocity_shapes)},
                         {"dropout_states", ck.dropout_states},
                         {"trainer_rng", ck.trainer_rng},
                         {"history", detail::history_to_json(ck.history)}};
  const std::string text = meta.dump();
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw DataError("cannot write " + tmp.string());
    os.write(kCheckpointMagic, sizeof(kCheckpointMagic));
    detail::write_u64(os, text.size());
    os.write(text.data(), static_cast<std::streamsize>(text.size()));
    auto dump = [&os](const Matrix& m) {
      os.write(reinterpret_cast<const char*>(m.data()),
               static_cast<std::streamsize>(m.size() * sizeof(double)));
    };
    for (const auto& m : ck.values) dump(m);
    for (const auto& m : ck.velocities) dump(m);
    if (!os) throw DataError("short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot read checkpoint " + path.string());
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, kCheckpointMagic, 8) != 0) {
    throw DataError(path.string() + " is not a checkpoint");
  }
  const std::uint64_t n = detail::read_u64(is);
  std::string text(n, '\0');
  is.read(text.data(), static_cast<std::streamsize>(n));
  if (!is) throw DataError("truncated checkpoint metadata in " + path.string());
  Checkpoint ck;
  try {
    const auto meta = nlohmann::json::parse(text);
    ck.profile = meta.at("profile").get<std::string>();
    ck.sequence_length = meta.at("sequence_length").get<int>();
    ck.num_domains = meta.at("num_domains").get<int>();
    ck.variant = variant_from_string(meta.at("variant").get<std::string>());
    ck.seed = meta.at("seed").get<std::uint64_t>();
    ck.step = meta.at("step").get<int>();
    ck.config = meta.at("config");
    ck.params = detail::tensors_from_json(meta.at("params"));
    ck.velocity_shapes = detail::tensors_from_json(meta.at("velocities"));
    ck.dropout_states = meta.at("dropout_states").get<std::map<std::string, std::string>>();
    ck.trainer_rng = meta.at("trainer_rng").get<std::string>();
    ck.history = detail::history_from_json(meta.at("history"));
  } catch (const nlohmann::json::exception& e) {
    throw DataError("corrupt checkpoint metadata in " + path.string() + ": " + e.what());
  }
  auto slurp = [&is, &path](const TensorEntry& t) {
    if (t.rows < 0 || t.cols < 0) throw DataError("negative tensor shape in " + path.string());
    Matrix m(t.rows, t.cols);
    is.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(double)));
    if (!is) throw DataError("truncated tensor data for " + t.name + " in " + path.string());
    return m;
  };
  for (const auto& t : ck.params) ck.values.push_back(slurp(t));
  for (const auto& t : ck.velocity_shapes) ck.velocities.push_back(slurp(t));
  return ck;
}

/// Copies checkpointed weights and dropout streams into `net`. Profile,
/// variant and every parameter name and shape must agree.
inline void apply_checkpoint(const Checkpoint& ck, Network& net) {
  const ModelProfile& p = net.profile();
  if (ck.profile != p.name || ck.sequence_length != p.sequence_length ||
      ck.num_domains != p.num_domains) {
    throw ConfigError("checkpoint profile " + ck.profile + " (T=" +
                      std::to_string(ck.sequence_length) + ", D=" + std::to_string(ck.num_domains) +
                      ") does not match " + p.name + " (T=" + std::to_string(p.sequence_length) +
                      ", D=" + std::to_string(p.num_domains) + ")");
  }
  if (ck.variant != net.variant()) {
    throw ConfigError("checkpoint variant " + to_string(ck.variant) + " does not match " +
                      to_string(net.variant()));
  }
  auto params = net.all_parameters();
  if (params.size() != ck.params.size()) {
    throw ShapeError("checkpoint has " + std::to_string(ck.params.size()) +
                     " parameters, network has " + std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& t = ck.params[i];
    const Matrix& v = params[i].param->value;
    if (t.name != params[i].name || t.rows != v.rows() || t.cols != v.cols()) {
      throw ShapeError("checkpoint tensor " + t.name + " [" + std::to_string(t.rows) + "x" +
                       std::to_string(t.cols) + "] does not match " + params[i].name + " [" +
                       std::to_string(v.rows()) + "x" + std::to_string(v.cols()) + "]");
    }
  }
  for (std::size_t i = 0; i < params.size(); ++i) params[i].param->value = ck.values[i];
  for (auto& [name, engine] : net.rng_engines()) {
    auto it = ck.dropout_states.find(name);
    if (it == ck.dropout_states.end()) throw DataError("checkpoint lacks dropout stream " + name);
    detail::set_engine_state(*engine, it->second);
  }
}

/// Rebuilds a standalone network from a checkpoint.
inline Network network_from_checkpoint(const Checkpoint& ck) {
  ModelProfile p = profile_by_name(ck.profile);
  p.sequence_length = ck.sequence_length;
  p.num_domains = ck.num_domains;
  Network net(p, ck.variant, ck.seed);
  apply_checkpoint(ck, net);
  return net;
}

/// Restores weights, velocities and loop state into a freshly constructed
/// trainer so that continuing reproduces an uninterrupted run.
inline void resume(Trainer& t, const Checkpoint& ck) {
  if (ck.seed != t.config().seed) {
    throw ConfigError("checkpoint seed " + std::to_string(ck.seed) + " differs from configured " +
                      std::to_string(t.config().seed));
  }
  apply_checkpoint(ck, t.network());
  auto& vel = t.optimizer().velocity();
  vel.clear();
  for (std::size_t i = 0; i < ck.velocity_shapes.size(); ++i) {
    vel.emplace(ck.velocity_shapes[i].name, ck.velocities[i]);
  }
  std::mt19937_64 rng;
  detail::set_engine_state(rng, ck.trainer_rng);
  t.restore(ck.step, ck.history, rng);
}

}  // namespace fasdg

#endif  // FASDG_CHECKPOINT_HPP_
