#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace drifa {

// Classification metrics for one task.  Confusion is row-major with rows =
// true class, columns = predicted class.  Macro scores average per-class
// precision/recall/F1, where empty denominators count as zero.
struct TaskMetrics {
  std::size_t classes = 0;
  std::size_t samples = 0;
  std::vector<std::size_t> confusion;
  double accuracy = 0.0;
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  double macro_f1 = 0.0;

  std::size_t at(std::size_t truth, std::size_t pred) const {
    return confusion[truth * classes + pred];
  }
};

TaskMetrics compute_task_metrics(const std::vector<int>& truth, const std::vector<int>& predicted,
                                 std::size_t classes);

struct MetricsReport {
  std::vector<TaskMetrics> tasks;
  std::string config_hash;
  double wall_clock_seconds = 0.0;  // printed to the console only, never to files
};

// Deterministic file renderings (no timestamps, fixed formatting).
std::string metrics_to_csv(const MetricsReport& report);
void write_metrics_files(const MetricsReport& report, const std::string& dir_path);
void print_metrics(std::ostream& os, const MetricsReport& report);

// FNV-1a over a canonical text rendering; used to stamp outputs with the
// configuration they came from.
std::uint64_t fnv1a64(const std::string& text);
std::string hash_hex(std::uint64_t value);

}  // namespace drifa
