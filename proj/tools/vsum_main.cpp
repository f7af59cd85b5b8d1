// vsum: synthesize bundles, train the scorer, evaluate checkpoints, run the
// ablation grid, and emit score plots. Exit codes: 0 success, 1 usage or
// configuration error, 2 data error, 3 numeric failure.

#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "vsum/commands.hpp"
#include "vsum/common.hpp"
#include "vsum/config.hpp"

namespace {

struct CommonArgs {
  std::string config_path;
  std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "JSON config file");
  cmd->add_option("--set", args.overrides, "Override as section.key=value (repeatable)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"vsum: unsupervised video summarization pipeline"};
  app.require_subcommand(1);

  CommonArgs common;
  std::string data_path, out_dir, ckpt_dir;
  std::vector<std::string> aux_paths;

  CLI::App* synth = app.add_subcommand("synth", "Generate a synthetic dataset bundle");
  add_common(synth, common);
  synth->add_option("--out", out_dir, "Output bundle directory")->required();

  CLI::App* train = app.add_subcommand("train", "Train on a dataset bundle");
  add_common(train, common);
  train->add_option("--data", data_path, "Dataset bundle directory")->required();
  train->add_option("--out", out_dir, "Checkpoint output directory")->required();

  CLI::App* evalc = app.add_subcommand("eval", "Evaluate a checkpoint");
  add_common(evalc, common);
  evalc->add_option("--data", data_path, "Target dataset bundle")->required();
  evalc->add_option("--aux", aux_paths, "Auxiliary dataset bundles (repeatable)");
  evalc->add_option("--checkpoint", ckpt_dir, "Checkpoint directory")->required();
  evalc->add_option("--out", out_dir, "Report output directory")->required();

  CLI::App* ablate = app.add_subcommand("ablate", "Run the 8-row ablation grid");
  add_common(ablate, common);
  ablate->add_option("--data", data_path, "Dataset bundle directory")->required();
  ablate->add_option("--out", out_dir, "Results output directory")->required();

  CLI::App* plot = app.add_subcommand("plot", "Emit per-video score plots");
  add_common(plot, common);
  plot->add_option("--data", data_path, "Dataset bundle directory")->required();
  plot->add_option("--checkpoint", ckpt_dir, "Checkpoint directory")->required();
  plot->add_option("--out", out_dir, "Plot output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n";
    return 1;
  }

  try {
    const vsum::config::RunConfig rc =
        vsum::config::load_config(common.config_path, common.overrides);
    if (synth->parsed()) {
      vsum::commands::run_synth(rc, out_dir);
    } else if (train->parsed()) {
      vsum::commands::run_train(rc, data_path, out_dir);
    } else if (evalc->parsed()) {
      vsum::commands::run_eval(rc, data_path, aux_paths, ckpt_dir, out_dir);
    } else if (ablate->parsed()) {
      vsum::commands::run_ablate(rc, data_path, out_dir);
    } else if (plot->parsed()) {
      vsum::commands::run_plot(rc, data_path, ckpt_dir, out_dir);
    }
  } catch (const vsum::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const vsum::NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return 3;
  } catch (const vsum::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
