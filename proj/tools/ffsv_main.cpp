// Command-line front end: enhance, simulate, train, score, ablate, tune-theta.
#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ffsv/config.hpp"
#include "ffsv/error.hpp"
#include "ffsv/pipeline.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitPartial = 1;
constexpr int kExitConfig = 2;

struct CommonArgs {
  std::string config_path;
  std::string out_dir;
  long long seed = -1;
  int workers = 0;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "pipeline config file");
  cmd->add_option("--seed", args.seed, "override config seed");
  cmd->add_option("--workers", args.workers, "utterance-level worker count");
  cmd->add_option("--out", args.out_dir, "output directory");
}

ffsv::PipelineConfig make_config(const CommonArgs& args) {
  ffsv::PipelineConfig cfg = ffsv::load_config(args.config_path);
  if (args.seed >= 0) cfg.seed = static_cast<std::uint64_t>(args.seed);
  if (args.workers > 0) cfg.workers = args.workers;
  if (!args.out_dir.empty()) cfg.out_dir = args.out_dir;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"far-field speaker verification toolkit"};
  app.require_subcommand(1);

  CommonArgs enhance_args, simulate_args, train_args, score_args, ablate_args,
      tune_args;
  std::vector<std::string> enhance_inputs;

  auto* enhance = app.add_subcommand(
      "enhance", "front-end enhancement with optional data selection");
  add_common(enhance, enhance_args);
  enhance->add_option("wavs", enhance_inputs, "input wav files")->required();

  auto* simulate = app.add_subcommand("simulate", "generate RIRs and room configs");
  add_common(simulate, simulate_args);

  auto* train = app.add_subcommand("train", "train the embedding network");
  add_common(train, train_args);

  auto* score = app.add_subcommand("score", "score trials and report metrics");
  add_common(score, score_args);

  auto* ablate = app.add_subcommand(
      "ablate", "run the 16-cell front-end/DAT/selection grid on a synthetic devset");
  add_common(ablate, ablate_args);

  auto* tune = app.add_subcommand("tune-theta",
                                  "grid-search selection threshold and RIR ranges");
  add_common(tune, tune_args);

  CLI11_PARSE(app, argc, argv);

  try {
    if (enhance->parsed()) {
      auto cfg = make_config(enhance_args);
      auto result = ffsv::cmd_enhance(cfg, enhance_inputs);
      std::fprintf(stderr, "enhance: %d processed, %d failed\n", result.processed,
                   result.failed);
      return result.failed == 0 ? kExitOk : kExitPartial;
    }
    if (simulate->parsed()) {
      ffsv::cmd_simulate(make_config(simulate_args));
      return kExitOk;
    }
    if (train->parsed()) {
      auto result = ffsv::cmd_train(make_config(train_args));
      std::fprintf(stderr, "train: wrote %s\n", result.checkpoint_path.c_str());
      return kExitOk;
    }
    if (score->parsed()) {
      auto cfg = make_config(score_args);
      auto result = ffsv::cmd_score(cfg);
      std::fprintf(stderr, "score: %zu trials scored, %d excluded\n",
                   result.scored.size(), result.excluded);
      if (result.labeled) std::fprintf(stderr, "%s\n", result.report.c_str());
      return result.excluded == 0 ? kExitOk : kExitPartial;
    }
    if (ablate->parsed()) {
      auto result = ffsv::cmd_ablate(make_config(ablate_args));
      std::fprintf(stderr, "%s", result.table.c_str());
      return kExitOk;
    }
    if (tune->parsed()) {
      auto result = ffsv::cmd_tune_theta(make_config(tune_args));
      std::fprintf(stderr, "%s\n", result.report.c_str());
      return kExitOk;
    }
  } catch (const ffsv::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitPartial;
  }
  return kExitConfig;
}
