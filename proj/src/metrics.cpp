#include "drifa/metrics.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>

#include "drifa/error.hpp"

namespace drifa {

TaskMetrics compute_task_metrics(const std::vector<int>& truth, const std::vector<int>& predicted,
                                 std::size_t classes) {
  if (truth.size() != predicted.size())
    fail(ErrorKind::LengthMismatch, "metrics: " + std::to_string(truth.size()) + " labels vs " +
                                        std::to_string(predicted.size()) + " predictions");
  TaskMetrics m;
  m.classes = classes;
  m.samples = truth.size();
  m.confusion.assign(classes * classes, 0);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const int t = truth[i], p = predicted[i];
    if (t < 0 || static_cast<std::size_t>(t) >= classes || p < 0 ||
        static_cast<std::size_t>(p) >= classes)
      fail(ErrorKind::LabelOutOfRange, "metrics: label outside [0," + std::to_string(classes) + ")");
    ++m.confusion[static_cast<std::size_t>(t) * classes + static_cast<std::size_t>(p)];
    if (t == p) ++correct;
  }
  m.accuracy = truth.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(truth.size());
  for (std::size_t c = 0; c < classes; ++c) {
    std::size_t tp = m.confusion[c * classes + c];
    std::size_t pred_c = 0, true_c = 0;
    for (std::size_t j = 0; j < classes; ++j) {
      pred_c += m.confusion[j * classes + c];
      true_c += m.confusion[c * classes + j];
    }
    const double prec = pred_c ? static_cast<double>(tp) / static_cast<double>(pred_c) : 0.0;
    const double rec = true_c ? static_cast<double>(tp) / static_cast<double>(true_c) : 0.0;
    const double f1 = (prec + rec) > 0.0 ? 2.0 * prec * rec / (prec + rec) : 0.0;
    m.macro_precision += prec;
    m.macro_recall += rec;
    m.macro_f1 += f1;
  }
  if (classes) {
    m.macro_precision /= static_cast<double>(classes);
    m.macro_recall /= static_cast<double>(classes);
    m.macro_f1 /= static_cast<double>(classes);
  }
  return m;
}

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

}  // namespace

std::string metrics_to_csv(const MetricsReport& report) {
  std::string out = "config_hash," + report.config_hash + "\n";
  out += "task,samples,accuracy,macro_precision,macro_recall,macro_f1\n";
  for (std::size_t t = 0; t < report.tasks.size(); ++t) {
    const TaskMetrics& m = report.tasks[t];
    out += std::to_string(t) + "," + std::to_string(m.samples) + "," + fmt(m.accuracy) + "," +
           fmt(m.macro_precision) + "," + fmt(m.macro_recall) + "," + fmt(m.macro_f1) + "\n";
  }
  for (std::size_t t = 0; t < report.tasks.size(); ++t) {
    const TaskMetrics& m = report.tasks[t];
    out += "confusion_task" + std::to_string(t) + "\n";
    for (std::size_t r = 0; r < m.classes; ++r) {
      for (std::size_t c = 0; c < m.classes; ++c)
        out += (c ? "," : "") + std::to_string(m.at(r, c));
      out += "\n";
    }
  }
  return out;
}

void write_metrics_files(const MetricsReport& report, const std::string& dir_path) {
  std::filesystem::create_directories(dir_path);
  std::ofstream f(std::filesystem::path(dir_path) / "metrics.csv", std::ios::trunc);
  if (!f) fail(ErrorKind::DataNotFound, "metrics: cannot write into " + dir_path);
  f << metrics_to_csv(report);
}

void print_metrics(std::ostream& os, const MetricsReport& report) {
  os << "config " << report.config_hash << "  wall_clock " << fmt(report.wall_clock_seconds)
     << "s\n";
  for (std::size_t t = 0; t < report.tasks.size(); ++t) {
    const TaskMetrics& m = report.tasks[t];
    os << "task " << t << ": acc " << fmt(m.accuracy) << "  P " << fmt(m.macro_precision) << "  R "
       << fmt(m.macro_recall) << "  F1 " << fmt(m.macro_f1) << "  (" << m.samples << " samples)\n";
  }
}

std::uint64_t fnv1a64(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string hash_hex(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

}  // namespace drifa
