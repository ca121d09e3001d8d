#include "drifa/cli.hpp"

#include <cstdint>
#include <ostream>
#include <string>

#include <CLI11.hpp>

#include "drifa/config.hpp"
#include "drifa/runner.hpp"

namespace drifa {
namespace {

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::ConfigParse:
    case ErrorKind::InvalidSpec:
    case ErrorKind::InvalidFlag:
    case ErrorKind::ConfigMismatch:
    case ErrorKind::WeightCountMismatch:
    case ErrorKind::BadFractions:
    case ErrorKind::InvalidRate:
    case ErrorKind::InvalidTaskOrClass:
      return 2;
    case ErrorKind::DataNotFound:
    case ErrorKind::NonSquareRotation:
      return 3;
    case ErrorKind::CheckpointCorrupt:
      return 4;
    default:
      return 1;
  }
}

struct CommonArgs {
  std::string config_path;
  std::string profile;
  std::string out_dir = "out";
  std::uint64_t seed = 0;
  CLI::Option* seed_opt = nullptr;

  void attach(CLI::App* cmd) {
    auto* cfg = cmd->add_option("--config", config_path, "configuration file (JSON)");
    cmd->add_option("--profile", profile, "built-in profile instead of a file (paper, desk)")
        ->excludes(cfg);
    cmd->add_option("--out", out_dir, "output directory")->capture_default_str();
    seed_opt = cmd->add_option("--seed", seed, "override the run seed");
  }

  RunConfig resolve() const {
    RunConfig cfg;
    if (!config_path.empty())
      cfg = load_run_config(config_path);
    else
      cfg = default_config(profile.empty() ? "paper" : profile);
    if (seed_opt && seed_opt->count() > 0) cfg.seed = seed;
    return cfg;
  }
};

}  // namespace

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"dual-attention multimodal fusion network"};
  app.require_subcommand(1);

  CommonArgs train_args;
  auto* train_cmd = app.add_subcommand("train", "train a model and write a checkpoint");
  train_args.attach(train_cmd);

  CommonArgs eval_args;
  std::string eval_checkpoint;
  std::string eval_split = "test";
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
  eval_args.attach(eval_cmd);
  eval_cmd->add_option("--checkpoint", eval_checkpoint, "checkpoint file")->required();
  eval_cmd->add_option("--split", eval_split, "split to evaluate (train, val, test)")
      ->capture_default_str();

  CommonArgs ablate_args;
  std::string grid = kDefaultAblationGrid;
  std::size_t repeats = 5;
  auto* ablate_cmd = app.add_subcommand("ablate", "train and score an ablation grid");
  ablate_args.attach(ablate_cmd);
  ablate_cmd->add_option("--grid", grid, "rows as comma-separated flag combinations")
      ->capture_default_str();
  ablate_cmd->add_option("--repeats", repeats, "independent repeats per row")
      ->capture_default_str();

  CommonArgs uq_args;
  std::string uq_checkpoint;
  auto* uq_cmd = app.add_subcommand("uq", "Monte Carlo dropout uncertainty report");
  uq_args.attach(uq_cmd);
  uq_cmd->add_option("--checkpoint", uq_checkpoint, "checkpoint file")->required();

  CommonArgs sal_args;
  std::string sal_checkpoint;
  std::string sal_split = "test";
  std::size_t sal_task = 0, sal_class = 0, sal_limit = 0;
  auto* sal_cmd = app.add_subcommand("saliency", "export class activation maps as PGM files");
  sal_args.attach(sal_cmd);
  sal_cmd->add_option("--checkpoint", sal_checkpoint, "checkpoint file")->required();
  sal_cmd->add_option("--task", sal_task, "task index")->capture_default_str();
  sal_cmd->add_option("--class", sal_class, "class index within the task")->capture_default_str();
  sal_cmd->add_option("--split", sal_split, "split to render (train, val, test)")
      ->capture_default_str();
  sal_cmd->add_option("--limit", sal_limit, "maximum sample count (0 = all)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e, out, err);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (train_cmd->parsed()) {
      run_train(train_args.resolve(), train_args.out_dir, out);
    } else if (eval_cmd->parsed()) {
      run_eval(eval_args.resolve(), eval_checkpoint, eval_split, eval_args.out_dir, out);
    } else if (ablate_cmd->parsed()) {
      run_ablate(ablate_args.resolve(), grid, repeats, ablate_args.out_dir, out);
    } else if (uq_cmd->parsed()) {
      run_uq(uq_args.resolve(), uq_checkpoint, uq_args.out_dir, out);
    } else if (sal_cmd->parsed()) {
      run_saliency(sal_args.resolve(), sal_checkpoint, sal_task, sal_class, sal_split, sal_limit,
                   sal_args.out_dir, out);
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace drifa
