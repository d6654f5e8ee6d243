#ifndef FASDG_COMMANDS_HPP_
#define FASDG_COMMANDS_HPP_

#include "fasdg/analysis.hpp"
#include "fasdg/checkpoint.hpp"
#include "fasdg/config.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace fasdg {

/// Flags shared by every subcommand, already merged with the config file.
struct CommandContext {
  RunConfig config;
  std::filesystem::path data_root;
  bool force = false;
  bool project = true;
  std::string layer;
  std::ostream* log = &std::cerr;
};

/// `$FASDG_DATA_ROOT` when set, else `data`.
inline std::filesystem::path default_data_root() {
  if (const char* env = std::getenv("FASDG_DATA_ROOT"); env && *env) return env;
  return "data";
}

inline std::filesystem::path run_dir(const RunConfig& c) {
  return std::filesystem::path(c.out) / ("run-" + config_hash(c));
}

namespace detail {

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw DataError("cannot write " + tmp.string());
    os << text;
    if (!os) throw DataError("short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

inline std::string fmt(double v) { return format_double(v); }

inline DgProtocol load_protocol(const CommandContext& ctx, int target) {
  const auto domains = load_benchmark(ctx.data_root);
  if (static_cast<int>(domains.size()) != static_cast<int>(ctx.config.presets.size())) {
    throw DataError("dataset at " + ctx.data_root.string() + " has " +
                    std::to_string(domains.size()) + " domains, config lists " +
                    std::to_string(ctx.config.presets.size()));
  }
  return make_dg_protocol(domains, target, ctx.config.val_fraction);
}

inline void append_report(std::string& out, const std::string& prefix, const MetricReport& r) {
  out += prefix + ".tau=" + fmt(r.tau) + "\n";
  out += prefix + ".hter=" + fmt(r.hter) + "\n";
  out += prefix + ".far=" + fmt(r.far) + "\n";
  out += prefix + ".frr=" + fmt(r.frr) + "\n";
  out += prefix + ".acer=" + fmt(r.acer) + "\n";
  out += prefix + ".auc=" + fmt(r.auc) + "\n";
  out += prefix + ".n_live=" + std::to_string(r.n_live) + "\n";
  out += prefix + ".n_spoof=" + std::to_string(r.n_spoof) + "\n";
}

}  // namespace detail

// ---------------------------------------------------------------------------
// generate

/// Materialises the configured benchmark under the data root.
inline std::filesystem::path cmd_generate(const CommandContext& ctx) {
  namespace fs = std::filesystem;
  ctx.config.validate();
  const fs::path root = ctx.data_root;
  if (fs::exists(root) && !fs::is_directory(root)) {
    throw UsageError(root.string() + " exists and is not a directory");
  }
  if (fs::exists(root) && !fs::is_empty(root)) {
    if (!ctx.force) {
      throw UsageError(root.string() + " is not empty (pass --force to overwrite)");
    }
    fs::remove_all(root);
  }
  fs::create_directories(root);
  const auto domains = generate_benchmark(ctx.config.presets, ctx.config.generate_options(),
                                          ctx.config.train.seed);
  for (const auto& d : domains) {
    save_dataset(root, d);
    *ctx.log << "domain " << d.domain_id << " (" << d.preset << "): " << d.videos.size()
             << " videos\n";
  }
  return root;
}

// ---------------------------------------------------------------------------
// train

struct TrainOutcome {
  std::filesystem::path dir;
  int steps = 0;
  bool resumed = false;
};

namespace detail {

inline TrainOutcome train_into(const RunConfig& cfg, const DgProtocol& protocol,
                               const std::filesystem::path& dir, bool force, std::ostream& log) {
  namespace fs = std::filesystem;
  const fs::path last = dir / "last.ckpt";
  const fs::path best = dir / "best.ckpt";
  Trainer trainer(protocol, cfg.train, cfg.variant);
  TrainOutcome out{dir, 0, false};
  if (force) {
    fs::remove(last);
    fs::remove(best);
  }
  if (fs::exists(last)) {
    const Checkpoint ck = load_checkpoint(last);
    if (ck.step >= cfg.train.max_steps) {
      throw UsageError("run " + dir.string() + " is already complete (pass --force to retrain)");
    }
    {
      resume(trainer, ck);
      if (fs::exists(best)) {
        const Checkpoint b = load_checkpoint(best);
        const auto& vals = ck.history.validations;
        double hter = 1.0;
        for (const auto& v : vals) {
          if (v.step == b.step) hter = v.hter;
        }
        trainer.restore_best(network_from_checkpoint(b), hter);
      }
      out.resumed = true;
      log << "resuming " << dir.string() << " at step " << ck.step << "\n";
    }
  }
  fs::create_directories(dir);
  write_text(dir / "config.cfg", serialize_config(cfg, false));
  trainer.run([&](const Trainer& t) {
    const auto& v = t.history().validations.back();
    log << "step " << v.step << " validation HTER " << fmt(v.hter) << " (" << to_string(v.head)
        << ")\n";
    // validation ties keep the later snapshot, so equality means "just updated"
    if (v.hter == t.best_hter()) {
      Network b = *t.best();
      Checkpoint bc = snapshot(b);
      bc.step = v.step;
      bc.config = config_to_json(t.config());
      save_checkpoint(bc, best);
    }
    save_checkpoint(snapshot(trainer), last);
  });
  save_checkpoint(snapshot(trainer), last);
  write_text(dir / "history.ndjson", trainer.history().to_ndjson());
  out.steps = trainer.step();
  return out;
}

}  // namespace detail

/// Trains the configured variant on the leave-one-out protocol. A partial
/// run in the same directory is resumed from its last checkpoint.
inline TrainOutcome cmd_train(const CommandContext& ctx) {
  ctx.config.validate();
  const DgProtocol protocol = detail::load_protocol(ctx, ctx.config.target_domain);
  return detail::train_into(ctx.config, protocol, run_dir(ctx.config), ctx.force, *ctx.log);
}

// ---------------------------------------------------------------------------
// evaluate

/// Checkpoint used for inference: the best validation snapshot when one was
/// taken, else the last.
inline std::filesystem::path inference_checkpoint(const std::filesystem::path& dir) {
  if (std::filesystem::exists(dir / "best.ckpt")) return dir / "best.ckpt";
  if (std::filesystem::exists(dir / "last.ckpt")) return dir / "last.ckpt";
  throw DataError("no checkpoint in " + dir.string() + " (run `fasdg train` first)");
}

/// Loads a checkpoint and checks it against the configured profile.
inline Network load_for_config(const RunConfig& cfg, const std::filesystem::path& path,
                               int num_sources) {
  const Checkpoint ck = load_checkpoint(path);
  ModelProfile expected = resolve_profile(cfg.train, num_sources);
  Network net(expected, cfg.variant, cfg.train.seed);
  apply_checkpoint(ck, net);
  return net;
}

/// Key=value record: provenance, one MetricReport per head and the head
/// picked on validation.
inline std::string format_evaluation(const RunConfig& cfg, const Evaluation& e, int step) {
  std::string out;
  out += "config_hash=" + config_hash(cfg) + "\n";
  out += "seed=" + std::to_string(cfg.train.seed) + "\n";
  out += "variant=" + to_string(cfg.variant) + "\n";
  out += "target_domain=" + std::to_string(cfg.target_domain) + "\n";
  out += "checkpoint_step=" + std::to_string(step) + "\n";
  detail::append_report(out, "ib.validation", e.ib.validation);
  detail::append_report(out, "ib.target", e.ib.target);
  if (e.vb) {
    detail::append_report(out, "vb.validation", e.vb->validation);
    detail::append_report(out, "vb.target", e.vb->target);
  }
  out += "selected=" + to_string(e.selected) + "\n";
  const auto& sel = e.selected == Head::kVB && e.vb ? e.vb->target : e.ib.target;
  detail::append_report(out, "selected.target", sel);
  return out;
}

inline std::string cmd_evaluate(const CommandContext& ctx,
                                std::optional<std::filesystem::path> checkpoint = std::nullopt) {
  ctx.config.validate();
  const DgProtocol protocol = detail::load_protocol(ctx, ctx.config.target_domain);
  const auto dir = run_dir(ctx.config);
  const auto path = checkpoint ? *checkpoint : inference_checkpoint(dir);
  const Network net = load_for_config(ctx.config, path, protocol.num_sources());
  const Evaluation e = evaluate(net, protocol);
  const std::string text = format_evaluation(ctx.config, e, load_checkpoint(path).step);
  detail::write_text(dir / "eval.txt", text);
  return text;
}

// ---------------------------------------------------------------------------
// ablate

struct AblationCell {
  int target = 0;
  Variant variant = Variant::kBackbone;
  std::vector<double> hter;
  std::vector<double> auc;
  std::size_t parameters = 0;
  std::vector<std::string> groups;
};

inline std::pair<double, double> mean_sd(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m += x;
  m /= static_cast<double>(v.size());
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return {m, v.size() > 1 ? std::sqrt(s / static_cast<double>(v.size() - 1)) : 0.0};
}

inline std::string format_ablation(const std::vector<AblationCell>& cells) {
  std::string out =
      "target\tvariant\tcomponents\tseeds\thter_mean\thter_sd\tauc_mean\tauc_sd\tparameters\tgroups\n";
  for (const auto& c : cells) {
    const auto [hm, hs] = mean_sd(c.hter);
    const auto [am, as] = mean_sd(c.auc);
    std::string groups;
    for (const auto& g : c.groups) groups += (groups.empty() ? "" : ",") + g;
    out += std::to_string(c.target) + "\t" + to_string(c.variant) + "\t" +
           component_label(c.variant) + "\t" + std::to_string(c.hter.size()) + "\t" +
           detail::fmt(hm) + "\t" + detail::fmt(hs) + "\t" + detail::fmt(am) + "\t" +
           detail::fmt(as) + "\t" + std::to_string(c.parameters) + "\t" + groups + "\n";
  }
  return out;
}

/// Every variant on every selected target over `ablate_seeds` consecutive
/// seeds starting at the configured one.
inline std::vector<AblationCell> cmd_ablate(const CommandContext& ctx) {
  ctx.config.validate();
  std::vector<int> targets = ctx.config.ablate_targets;
  if (targets.empty()) {
    for (int t = 0; t < static_cast<int>(ctx.config.presets.size()); ++t) targets.push_back(t);
  }
  const auto domains = load_benchmark(ctx.data_root);
  const std::filesystem::path dir =
      std::filesystem::path(ctx.config.out) / ("ablate-" + config_hash(ctx.config));
  std::vector<AblationCell> cells;
  std::string raw = "target\tvariant\tseed\tselected\thter\tauc\n";
  for (int target : targets) {
    const DgProtocol protocol = make_dg_protocol(domains, target, ctx.config.val_fraction);
    for (Variant v : kAllVariants) {
      AblationCell cell;
      cell.target = target;
      cell.variant = v;
      for (int k = 0; k < ctx.config.ablate_seeds; ++k) {
        TrainConfig tc = ctx.config.train;
        tc.seed = ctx.config.train.seed + static_cast<std::uint64_t>(k);
        Trainer t(protocol, tc, v);
        t.run();
        const Network& net = t.best() ? *t.best() : t.network();
        const Evaluation e = evaluate(net, protocol);
        const auto& sel = e.selected == Head::kVB && e.vb ? e.vb->target : e.ib.target;
        cell.hter.push_back(sel.hter);
        cell.auc.push_back(sel.auc);
        raw += std::to_string(target) + "\t" + to_string(v) + "\t" + std::to_string(tc.seed) +
               "\t" + to_string(e.selected) + "\t" + detail::fmt(sel.hter) + "\t" +
               detail::fmt(sel.auc) + "\n";
        if (k == 0) {
          cell.parameters = t.network().parameter_count();
          for (const auto& g : t.network().param_groups()) cell.groups.push_back(g.name);
        }
        *ctx.log << "target " << target << " " << to_string(v) << " seed " << tc.seed << ": HTER "
                 << detail::fmt(sel.hter) << " AUC " << detail::fmt(sel.auc) << "\n";
      }
      cells.push_back(std::move(cell));
    }
  }
  detail::write_text(dir / "config.cfg", serialize_config(ctx.config, false));
  detail::write_text(dir / "runs.tsv", raw);
  detail::write_text(dir / "ablation.tsv", format_ablation(cells));
  return cells;
}

// ---------------------------------------------------------------------------
// embed / cam

inline std::vector<EmbeddingSample> embedding_samples(const DgProtocol& p) {
  std::vector<EmbeddingSample> out;
  auto add = [&out](const std::vector<Video>& videos, Split split) {
    for (const auto& v : videos) {
      for (int f = 0; f < v.length(); ++f) out.push_back({v.frame(f), split});
    }
  };
  add(all_validation(p), Split::kSource);
  add(p.target_test, Split::kTarget);
  return out;
}

/// Source validation and target test embeddings of the trained run.
inline std::filesystem::path cmd_embed(const CommandContext& ctx) {
  ctx.config.validate();
  const DgProtocol protocol = detail::load_protocol(ctx, ctx.config.target_domain);
  const auto dir = run_dir(ctx.config);
  const Network net =
      load_for_config(ctx.config, inference_checkpoint(dir), protocol.num_sources());
  const auto samples = embedding_samples(protocol);
  const EmbeddingDump dump = export_embeddings(net, samples, ctx.project, ctx.config.train.seed);
  const auto path = dir / "analysis" / "embeddings.tsv";
  detail::write_text(path, dump.to_tsv());
  return path;
}

/// Grad-CAM of the `cam_sample`-th target test frame for its own class.
inline std::filesystem::path cmd_cam(const CommandContext& ctx) {
  ctx.config.validate();
  const DgProtocol protocol = detail::load_protocol(ctx, ctx.config.target_domain);
  const auto dir = run_dir(ctx.config);
  const Network net =
      load_for_config(ctx.config, inference_checkpoint(dir), protocol.num_sources());
  std::vector<LabeledImage> frames;
  for (const auto& v : protocol.target_test) {
    for (int f = 0; f < v.length(); ++f) frames.push_back(v.frame(f));
  }
  if (ctx.config.cam_sample >= static_cast<int>(frames.size())) {
    throw UsageError("cam_sample " + std::to_string(ctx.config.cam_sample) + " exceeds the " +
                     std::to_string(frames.size()) + " target frames");
  }
  const LabeledImage& s = frames[static_cast<std::size_t>(ctx.config.cam_sample)];
  const ActivationMap map = grad_cam(net, s.image, s.class_label, ctx.layer);
  const std::string stem = "cam_" + sample_id(s);
  write_cam(dir / "analysis", stem, s.image, map);
  const auto [lo, hi] = std::minmax_element(map.values.pixels.begin(), map.values.pixels.end());
  detail::write_text(dir / "analysis" / (stem + ".txt"),
                     "sample=" + sample_id(s) + "\nclass_label=" + std::to_string(s.class_label) +
                         "\nlayer=" + map.layer + "\nmin=" + detail::fmt(*lo) +
                         "\nmax=" + detail::fmt(*hi) + "\n");
  return dir / "analysis" / (stem + "_overlay.ppm");
}

}  // namespace fasdg

#endif  // FASDG_COMMANDS_HPP_
