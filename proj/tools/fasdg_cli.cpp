// fasdg: generate the synthetic benchmark, train, evaluate, ablate and
// inspect domain-generalised anti-spoofing models.

#include "fasdg/commands.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>

namespace {

enum ExitCode { kOk = 0, kConfig = 1, kData = 2, kNumerical = 3 };

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string variant;
  std::optional<int> target_domain;
  std::string data;
  std::string checkpoint;
  bool force = false;
  bool no_project = false;
  std::string layer;
};

fasdg::CommandContext make_context(const Flags& f) {
  fasdg::CommandContext ctx;
  if (!f.config.empty()) ctx.config = fasdg::load_config(f.config);
  if (f.seed) ctx.config.train.seed = *f.seed;
  if (!f.out.empty()) ctx.config.out = f.out;
  if (!f.variant.empty()) ctx.config.variant = fasdg::variant_from_string(f.variant);
  if (f.target_domain) ctx.config.target_domain = *f.target_domain;
  ctx.data_root = f.data.empty() ? fasdg::default_data_root() : std::filesystem::path(f.data);
  ctx.force = f.force;
  ctx.project = !f.no_project;
  ctx.layer = f.layer;
  return ctx;
}

void add_common(CLI::App* cmd, Flags& f) {
  cmd->add_option("--config", f.config, "key = value configuration file");
  cmd->add_option("--seed", f.seed, "random seed (overrides the config)");
  cmd->add_option("--out", f.out, "output root for run directories");
  cmd->add_option("--variant", f.variant,
                  "backbone, dib, lstm, lstm-dvb, dib-lstm, full or dis");
  cmd->add_option("--target-domain", f.target_domain, "held-out domain id");
  cmd->add_option("--data", f.data, "dataset root (default: $FASDG_DATA_ROOT or ./data)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Domain-generalised face anti-spoofing toolkit"};
  app.require_subcommand(1);
  Flags f;

  auto* gen = app.add_subcommand("generate", "write the synthetic benchmark to the data root");
  add_common(gen, f);
  gen->add_flag("--force", f.force, "replace a non-empty data directory");

  auto* train = app.add_subcommand("train", "train one variant on one held-out domain");
  add_common(train, f);
  train->add_flag("--force", f.force, "retrain a completed run from scratch");

  auto* eval = app.add_subcommand("evaluate", "score the held-out domain with both heads");
  add_common(eval, f);
  eval->add_option("--checkpoint", f.checkpoint, "checkpoint file (default: the run's best)");

  auto* ablate = app.add_subcommand("ablate", "train and evaluate every variant over several seeds");
  add_common(ablate, f);

  auto* embed = app.add_subcommand("embed", "dump encoder embeddings with a 2-D projection");
  add_common(embed, f);
  embed->add_flag("--no-project", f.no_project, "skip the t-SNE projection");

  auto* cam = app.add_subcommand("cam", "Grad-CAM map of one target frame");
  add_common(cam, f);
  cam->add_option("--layer", f.layer, "encoder layer (default: last conv stage)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfig;
  }

  try {
    const fasdg::CommandContext ctx = make_context(f);
    if (gen->parsed()) {
      std::cout << fasdg::cmd_generate(ctx).string() << "\n";
    } else if (train->parsed()) {
      const auto r = fasdg::cmd_train(ctx);
      std::cout << r.dir.string() << "\n";
    } else if (eval->parsed()) {
      std::optional<std::filesystem::path> ck;
      if (!f.checkpoint.empty()) ck = f.checkpoint;
      std::cout << fasdg::cmd_evaluate(ctx, ck);
    } else if (ablate->parsed()) {
      std::cout << fasdg::format_ablation(fasdg::cmd_ablate(ctx));
    } else if (embed->parsed()) {
      std::cout << fasdg::cmd_embed(ctx).string() << "\n";
    } else if (cam->parsed()) {
      std::cout << fasdg::cmd_cam(ctx).string() << "\n";
    }
  } catch (const fasdg::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const fasdg::UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kConfig;
  } catch (const fasdg::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kNumerical;
  } catch (const fasdg::Error& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kData;
  }
  return kOk;
}
