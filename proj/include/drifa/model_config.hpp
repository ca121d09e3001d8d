#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "drifa/error.hpp"

namespace drifa {

// Toggles for the two attention stages and their inner branches.  A stage
// whose branches are both off behaves as the stage itself being off; either
// way the surrounding pipeline is an identity at that point.
struct AblationFlags {
  bool mfa = true;
  bool mifa = true;
  bool hifa = true;   // global branch inside MFA
  bool clia = true;   // local branch inside MFA
  bool mgifa = true;  // global branch inside MIFA
  bool mlifa = true;  // local branch inside MIFA

  bool mfa_active() const { return mfa && (hifa || clia); }
  bool mifa_active() const { return mifa && (mgifa || mlifa); }
};

// Per-group switches for the learnable modulation scalars.  Disabled weights
// keep their parameter slot (and receive zero gradient) but are skipped in
// the forward pass, which is bit-identical to multiplying by their initial
// value of one.
struct WeightToggles {
  bool omega_d = true;
  bool omega_l = true;
  bool omega_c = true;
  bool omega_dm = true;
  bool omega_lm = true;
  bool omega_cm = true;
};

struct DrifaNetConfig {
  std::size_t modalities = 2;
  std::size_t tasks = 1;
  std::vector<std::size_t> classes_per_task = {4};
  std::size_t input_channels = 1;
  std::size_t base_channels = 8;
  // One entry per residual attention block; true doubles the channel count
  // and halves the spatial size via stride 2.
  std::vector<bool> block_downsample = {false, true};
  double dropout_rate = 0.25;
  std::vector<double> task_weights;  // empty -> uniform 1/tasks
  AblationFlags ablation;
  WeightToggles weights;
  std::uint64_t init_seed = 1;

  std::size_t feature_channels() const {
    std::size_t c = base_channels;
    for (bool ds : block_downsample)
      if (ds) c *= 2;
    return c;
  }

  std::vector<double> resolved_task_weights() const {
    if (task_weights.empty())
      return std::vector<double>(tasks, 1.0 / static_cast<double>(tasks));
    return task_weights;
  }

  void validate() const {
    require(modalities >= 2, ErrorKind::InvalidSpec, "model: at least two modalities required");
    require(tasks >= 1, ErrorKind::InvalidSpec, "model: at least one task required");
    require(classes_per_task.size() == tasks, ErrorKind::InvalidSpec,
            "model: classes_per_task must list one entry per task");
    for (std::size_t k : classes_per_task)
      require(k >= 2, ErrorKind::InvalidSpec, "model: every task needs at least two classes");
    require(input_channels >= 1, ErrorKind::InvalidSpec, "model: input_channels must be positive");
    require(base_channels >= 1, ErrorKind::InvalidSpec, "model: base_channels must be positive");
    require(!block_downsample.empty(), ErrorKind::InvalidSpec, "model: at least one block required");
    require(dropout_rate >= 0.0 && dropout_rate < 1.0, ErrorKind::InvalidRate,
            "model: dropout_rate outside [0,1)");
    if (!task_weights.empty()) {
      require(task_weights.size() == tasks, ErrorKind::WeightCountMismatch,
              "model: task_weights must list one entry per task");
      for (double w : task_weights)
        require(w >= 0.0, ErrorKind::InvalidSpec, "model: task weights must be non-negative");
    }
  }
};

}  // namespace drifa
