// SPDX-License-Identifier: Apache-2.0
//
// discond: train, evaluate and inspect Discond-VAE / JointVAE models.
// Exit codes: 0 success, 2 validation error, 3 numerical abort, 1 other.
#include <CLI11.hpp>

#include <iostream>

#include "discond/app.hpp"
#include "discond/npz.hpp"

namespace {

using namespace discond;

struct CommonFlags {
  std::string config;
  std::string preset;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string dsprites;
  std::string mnist_dir;
  std::string condsprites;
  std::uint64_t max_iters = 0;
  std::size_t subset = 0;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config, "JSON run configuration");
  cmd->add_option("--preset", f.preset, "Named hyperparameter preset");
  cmd->add_option_function<std::uint64_t>(
      "--seed",
      [&f](const std::uint64_t& s) {
        f.seed = s;
        f.seed_set = true;
      },
      "Override the seed");
  cmd->add_option("--dsprites", f.dsprites, "dSprites .npz archive");
  cmd->add_option("--mnist-dir", f.mnist_dir, "Directory holding the four MNIST IDX files");
  cmd->add_option("--condsprites", f.condsprites, "CondSprites cache written by make-condsprites");
  cmd->add_option("--max-iters", f.max_iters, "Stop after this many iterations");
  cmd->add_option("--subset", f.subset, "Train on a seeded random subset of N examples");
}

RunConfig resolve(const CommonFlags& f) {
  if (!f.config.empty() && !f.preset.empty()) throw ValidationError("give --config or --preset, not both");
  if (f.config.empty() && f.preset.empty()) throw ValidationError("one of --config or --preset is required");
  RunConfig cfg = f.config.empty() ? preset(f.preset) : load_config(f.config);
  if (f.seed_set) cfg.seed = f.seed;
  if (!f.dsprites.empty()) cfg.dsprites_path = f.dsprites;
  if (!f.mnist_dir.empty()) cfg.mnist_dir = f.mnist_dir;
  if (!f.condsprites.empty()) cfg.condsprites_cache = f.condsprites;
  if (f.max_iters != 0) cfg.max_iters = f.max_iters;
  if (f.subset != 0) cfg.subset = f.subset;
  cfg.validate();
  return cfg;
}

int run(int argc, char** argv) {
  CLI::App app{"Discond-VAE and JointVAE experiments"};
  app.require_subcommand(1);

  CommonFlags train_flags;
  std::string train_out, resume;
  bool print_config = false;
  auto* train = app.add_subcommand("train", "Train a model");
  add_common(train, train_flags);
  train->add_option("--out", train_out, "Run directory");
  train->add_option("--resume", resume, "Continue from a checkpoint");
  train->add_flag("--print-config", print_config, "Print the resolved config as JSON and exit");

  CommonFlags eval_flags;
  std::string checkpoint, csv;
  std::size_t repeats = 0;
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint");
  add_common(eval, eval_flags);
  eval->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
  eval->add_option("--csv,--out", csv, "Metric CSV path")->required();
  eval->add_option("--repeats", repeats, "Seeded evaluation repeats");

  CommonFlags trav_flags;
  std::string trav_checkpoint, trav_out;
  std::vector<std::size_t> indices{0};
  std::size_t steps = 10;
  float range = 3.0f;
  auto* trav = app.add_subcommand("traverse", "Write latent traversal grids");
  add_common(trav, trav_flags);
  trav->add_option("--checkpoint", trav_checkpoint, "Checkpoint file")->required();
  trav->add_option("--out", trav_out, "Output directory")->required();
  trav->add_option("--indices", indices, "Example indices (rows)")->delimiter(',');
  trav->add_option("--steps", steps, "Columns per continuous traversal");
  trav->add_option("--range", range, "Offsets span [-range, range]");

  std::string cs_dsprites, cs_out;
  std::size_t cs_extent = 32;
  auto* cs = app.add_subcommand("make-condsprites", "Derive the CondSprites cache from dSprites");
  cs->add_option("--dsprites", cs_dsprites, "dSprites .npz archive")->required();
  cs->add_option("--out", cs_out, "Output directory")->required();
  cs->add_option("--extent", cs_extent, "Image extent (32 or 64)");

  auto* selftest = app.add_subcommand("selftest", "Run numeric self-checks");
  auto* list = app.add_subcommand("presets", "List preset names");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  if (*train) {
    RunConfig cfg = resolve(train_flags);
    if (print_config) {
      std::cout << config_to_json(cfg);
      return 0;
    }
    if (train_out.empty()) throw ValidationError("train: --out is required");
    TrainOptions opts;
    opts.out_dir = train_out;
    opts.resume = resume;
    opts.progress = &std::cerr;
    const TrainSummary s = run_train(cfg, opts);
    std::cout << "trained " << s.iterations << " iterations, recon " << s.first_recon << " -> " << s.last_recon
              << ", checkpoint " << s.checkpoint.string() << '\n';
  } else if (*eval) {
    RunConfig cfg = resolve(eval_flags);
    if (repeats != 0) cfg.eval.repeats = repeats;
    for (const auto& r : run_eval(cfg, checkpoint, csv, &std::cerr)) {
      std::cout << r.metric << ',' << r.value << ',' << r.cls << ',' << r.seed << ',' << r.n << '\n';
    }
  } else if (*trav) {
    const RunConfig cfg = resolve(trav_flags);
    for (const auto& p : run_traverse(cfg, trav_checkpoint, indices, steps, range, trav_out)) {
      std::cout << p.string() << '\n';
    }
  } else if (*cs) {
    const CondspritesSummary s = run_make_condsprites(cs_dsprites, cs_out, cs_extent);
    std::cout << "condsprites: " << s.total << " examples (" << s.squares << " squares, " << s.ellipses
              << " ellipses, " << s.hearts << " hearts) in " << s.seconds << " s\n";
  } else if (*selftest) {
    return run_selftest(std::cout) ? 0 : 1;
  } else if (*list) {
    for (const auto& name : preset_names()) std::cout << name << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const discond::NumericalAbort& e) {
    std::cerr << "numerical abort: " << e.what() << '\n';
    return 3;
  } catch (const discond::ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const discond::ArchiveError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const discond::FormatError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
