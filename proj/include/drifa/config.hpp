#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "drifa/dataset.hpp"
#include "drifa/model_config.hpp"
#include "drifa/uncertainty.hpp"

namespace drifa {

// A full run description.  Two named profiles provide the defaults: "paper"
// keeps the reference hyperparameters (200 epochs, batch 32, lr 0.001,
// 128x128x3 inputs, 64 base channels, 8 residual blocks); "desk" shrinks
// everything to laptop scale (30 epochs, 8x8x1 inputs, 8 channels, 2 blocks).
// Any explicit key overrides its profile default; unknown keys are rejected.
struct RunConfig {
  std::string profile = "paper";
  DrifaNetConfig model;

  // data section; a non-empty path switches from generation to import
  std::string data_path;
  std::size_t samples_per_class = 100;
  std::size_t height = 128;
  std::size_t width = 128;
  double shared_signal_strength = 1.0;
  double noise_sigma = 0.1;
  std::uint64_t data_seed = 1;
  bool balance = false;

  // train section
  std::size_t epochs = 200;
  std::size_t batch_size = 32;
  double learning_rate = 0.001;
  double plateau_factor = 0.2;
  std::size_t plateau_patience = 5;
  double min_learning_rate = 1e-5;
  double train_fraction = 0.8;
  double val_fraction = 0.1;
  double test_fraction = 0.1;
  std::uint64_t seed = 1;

  EnsembleConfig uq;

  SyntheticSpec synthetic_spec() const;
  void validate() const;
};

RunConfig default_config(const std::string& profile);
RunConfig parse_run_config(const std::string& json_text);
RunConfig load_run_config(const std::filesystem::path& path);

// Canonical rendering: every field, fixed order.  parse(serialize(c)) == c,
// and the run hash is FNV-1a over this text.
std::string serialize_run_config(const RunConfig& cfg);
std::string config_hash(const RunConfig& cfg);

bool operator==(const RunConfig& a, const RunConfig& b);

// ---------------------------------------------------------------------------
// Ablation grids.  A grid is comma-separated rows; a row joins tokens with
// '+'.  Module tokens (mfa, mifa, hifa, clia, mgifa, mlifa) name what stays
// on: children imply their parent, a bare parent keeps all its children, and
// when none are listed every module stays on.  Weight tokens (wd, wl, wc,
// wdm, wlm, wcm) select which modulation weights stay learnable; without
// them all weights of the active modules do.  "none" switches everything
// off and combines with nothing.
// ---------------------------------------------------------------------------

struct AblationSelection {
  std::string name;  // the row text, normalised
  AblationFlags flags;
  WeightToggles weights;
};

AblationSelection parse_ablation_row(const std::string& row);
std::vector<AblationSelection> parse_ablation_grid(const std::string& grid);

inline constexpr const char* kDefaultAblationGrid = "none,mfa,mifa,mfa+mifa";

}  // namespace drifa
