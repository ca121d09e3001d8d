#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "drifa/config.hpp"
#include "drifa/metrics.hpp"
#include "drifa/net.hpp"

namespace drifa {

// Loads the configured dataset (imported from data.path, or generated) and
// the stratified train/val/test split seeded from the run seed.
Dataset prepare_dataset(const RunConfig& cfg);
DatasetSplit prepare_splits(const RunConfig& cfg, const Dataset& data);

// Deterministic (dropout-off) predictions and metrics over a sample list.
std::vector<std::vector<int>> predict_labels(const DrifaNet<float>& net, const Dataset& meta,
                                             const std::vector<Sample>& samples,
                                             std::size_t batch_size);
MetricsReport evaluate_metrics(const DrifaNet<float>& net, const Dataset& meta,
                               const std::vector<Sample>& samples, std::size_t batch_size,
                               const std::string& hash);

struct TrainResult {
  double best_val_loss = 0.0;
  std::size_t best_epoch = 0;
  std::string best_checkpoint;  // serialized parameters at the best epoch
  std::vector<std::string> epoch_log;
};

// Core loop: Adam + reduce-on-plateau on the validation loss; the model is
// left holding the best-validation parameters.
TrainResult train_model(DrifaNet<float>& net, const Dataset& meta, const DatasetSplit& split,
                        const RunConfig& cfg, std::ostream* log);

// Command bodies shared by the CLI and the tests.
MetricsReport run_train(const RunConfig& cfg, const std::filesystem::path& out_dir,
                        std::ostream& log);
MetricsReport run_eval(const RunConfig& cfg, const std::filesystem::path& checkpoint,
                       const std::string& split_name, const std::filesystem::path& out_dir,
                       std::ostream& log);

struct AblationRowResult {
  std::string name;
  double accuracy_mean = 0.0;
  double accuracy_std = 0.0;
  double precision_mean = 0.0;
  double recall_mean = 0.0;
  double f1_mean = 0.0;
};

std::vector<AblationRowResult> run_ablate(const RunConfig& cfg, const std::string& grid,
                                          std::size_t repeats,
                                          const std::filesystem::path& out_dir, std::ostream& log);

struct UqSummary {
  std::size_t task = 0;
  double deterministic_accuracy = 0.0;
  double uq_accuracy = 0.0;
  double mean_entropy_correct = 0.0;
  double mean_entropy_wrong = 0.0;
  std::size_t total_passes = 0;
};

std::vector<UqSummary> run_uq(const RunConfig& cfg, const std::filesystem::path& checkpoint,
                              const std::filesystem::path& out_dir, std::ostream& log);

std::size_t run_saliency(const RunConfig& cfg, const std::filesystem::path& checkpoint,
                         std::size_t task, std::size_t cls, const std::string& split_name,
                         std::size_t limit, const std::filesystem::path& out_dir,
                         std::ostream& log);

}  // namespace drifa
