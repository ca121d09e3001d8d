#include "drifa/runner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <ostream>

#include "drifa/checkpoint.hpp"
#include "drifa/dataset.hpp"
#include "drifa/optim.hpp"
#include "drifa/uncertainty.hpp"

namespace drifa {
namespace {

std::string fmt6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

double elapsed_seconds(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) fail(ErrorKind::DataNotFound, "cannot write " + path.string());
  f.write(text.data(), static_cast<std::streamsize>(text.size()));
}

const std::vector<Sample>& pick_split(const DatasetSplit& split, const std::string& name) {
  if (name == "train") return split.train;
  if (name == "val") return split.val;
  if (name == "test") return split.test;
  fail(ErrorKind::InvalidFlag, "unknown split '" + name + "' (train, val, test)");
}

// The data pipeline and the model are configured independently; catch drift
// between them before it turns into a shape error deep inside a forward pass.
void check_data_matches_model(const Dataset& data, const DrifaNetConfig& model) {
  if (data.modalities != model.modalities || data.channels != model.input_channels ||
      data.tasks != model.tasks || data.classes_per_task != model.classes_per_task)
    fail(ErrorKind::ConfigMismatch, "dataset geometry does not match the model configuration");
}

double mean_loss(const DrifaNet<float>& net, const Dataset& meta,
                 const std::vector<Sample>& samples, std::size_t batch_size,
                 const std::vector<double>& task_weights) {
  double sum = 0.0;
  for (std::size_t start = 0; start < samples.size(); start += batch_size) {
    const std::size_t count = std::min(batch_size, samples.size() - start);
    Batch<float> batch = make_batch(meta, samples, start, count);
    auto fr = net.forward(batch);
    auto loss = mtl_loss(fr.logits, batch.labels, task_weights);
    sum += static_cast<double>(loss.total->values[0]) * static_cast<double>(count);
  }
  return sum / static_cast<double>(samples.size());
}

}  // namespace

Dataset prepare_dataset(const RunConfig& cfg) {
  Dataset data;
  if (!cfg.data_path.empty()) {
    data = import_dataset(cfg.data_path);
  } else {
    data = generate_dataset(cfg.synthetic_spec());
  }
  check_data_matches_model(data, cfg.model);
  if (cfg.balance) {
    RandomStream rng = RandomStream::derive(cfg.data_seed, 0xBA7A);
    balance_classes(data, rng);
  }
  return data;
}

DatasetSplit prepare_splits(const RunConfig& cfg, const Dataset& data) {
  return split_dataset(data, cfg.train_fraction, cfg.val_fraction, cfg.test_fraction, cfg.seed);
}

std::vector<std::vector<int>> predict_labels(const DrifaNet<float>& net, const Dataset& meta,
                                             const std::vector<Sample>& samples,
                                             std::size_t batch_size) {
  std::vector<std::vector<int>> preds(net.config().tasks);
  for (std::size_t start = 0; start < samples.size(); start += batch_size) {
    const std::size_t count = std::min(batch_size, samples.size() - start);
    Batch<float> batch = make_batch(meta, samples, start, count);
    auto fr = net.forward(batch);
    for (std::size_t t = 0; t < fr.logits.size(); ++t) {
      const auto& lg = *fr.logits[t];
      const std::size_t classes = lg.shape[1];
      for (std::size_t i = 0; i < count; ++i) {
        const float* row = lg.values.data() + i * classes;
        const auto* best = std::max_element(row, row + classes);
        preds[t].push_back(static_cast<int>(best - row));
      }
    }
  }
  return preds;
}

MetricsReport evaluate_metrics(const DrifaNet<float>& net, const Dataset& meta,
                               const std::vector<Sample>& samples, std::size_t batch_size,
                               const std::string& hash) {
  auto preds = predict_labels(net, meta, samples, batch_size);
  MetricsReport report;
  report.config_hash = hash;
  for (std::size_t t = 0; t < net.config().tasks; ++t) {
    std::vector<int> truth;
    truth.reserve(samples.size());
    for (const Sample& s : samples) truth.push_back(s.labels[t]);
    report.tasks.push_back(
        compute_task_metrics(truth, preds[t], net.config().classes_per_task[t]));
  }
  return report;
}

TrainResult train_model(DrifaNet<float>& net, const Dataset& meta, const DatasetSplit& split,
                        const RunConfig& cfg, std::ostream* log) {
  if (split.train.empty() || split.val.empty())
    fail(ErrorKind::InvalidSpec, "train: empty train or validation split");
  auto params = net.parameters();
  AdamOptimizer<float> opt(cfg.learning_rate);
  PlateauScheduler sched(cfg.learning_rate, cfg.plateau_factor, cfg.plateau_patience,
                         cfg.min_learning_rate);
  const std::vector<double> task_weights = cfg.model.resolved_task_weights();

  TrainResult result;
  result.best_val_loss = std::numeric_limits<double>::infinity();
  std::vector<Sample> train = split.train;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = opt.lr;
    RandomStream shuffle_rng = RandomStream::derive(cfg.seed, 0xE70C + epoch);
    shuffle_rng.shuffle(train);
    RandomStream dropout_rng = RandomStream::derive(cfg.seed, 0xD407 + epoch);

    double loss_sum = 0.0;
    for (std::size_t start = 0; start < train.size(); start += cfg.batch_size) {
      const std::size_t count = std::min(cfg.batch_size, train.size() - start);
      Batch<float> batch = make_batch(meta, train, start, count);
      ForwardOptions fo;
      fo.mode = RunMode::Train;
      fo.rng = &dropout_rng;
      auto fr = net.forward(batch, fo);
      auto loss = mtl_loss(fr.logits, batch.labels, task_weights);
      net.zero_grad();
      backward(loss.total);
      opt.step(params);
      loss_sum += static_cast<double>(loss.total->values[0]) * static_cast<double>(count);
    }
    const double train_loss = loss_sum / static_cast<double>(train.size());
    const double val_loss = mean_loss(net, meta, split.val, cfg.batch_size, task_weights);
    opt.lr = sched.step(val_loss);

    if (val_loss < result.best_val_loss) {
      result.best_val_loss = val_loss;
      result.best_epoch = epoch;
      result.best_checkpoint = serialize_checkpoint(params);
    }
    result.epoch_log.push_back(std::to_string(epoch) + "," + fmt6(train_loss) + "," +
                               fmt6(val_loss) + "," + fmt6(lr));
    if (log)
      *log << "epoch " << epoch << "  train_loss " << fmt6(train_loss) << "  val_loss "
           << fmt6(val_loss) << "  lr " << fmt6(lr) << "\n";
  }

  deserialize_checkpoint(result.best_checkpoint, params);
  return result;
}

MetricsReport run_train(const RunConfig& cfg, const std::filesystem::path& out_dir,
                        std::ostream& log) {
  cfg.validate();
  const auto start = std::chrono::steady_clock::now();
  Dataset data = prepare_dataset(cfg);
  DatasetSplit split = prepare_splits(cfg, data);
  log << "samples " << data.samples.size() << " (train " << split.train.size() << ", val "
      << split.val.size() << ", test " << split.test.size() << ")\n";

  DrifaNet<float> net(cfg.model);
  TrainResult tr = train_model(net, data, split, cfg, &log);
  log << "best epoch " << tr.best_epoch << "  val_loss " << fmt6(tr.best_val_loss) << "\n";

  std::filesystem::create_directories(out_dir);
  std::string train_log = "epoch,train_loss,val_loss,lr\n";
  for (const std::string& row : tr.epoch_log) train_log += row + "\n";
  write_text_file(out_dir / "train_log.csv", train_log);
  write_text_file(out_dir / "checkpoint.bin", tr.best_checkpoint);

  MetricsReport report =
      evaluate_metrics(net, data, split.test, cfg.batch_size, config_hash(cfg));
  report.wall_clock_seconds = elapsed_seconds(start);
  write_metrics_files(report, out_dir.string());
  print_metrics(log, report);
  return report;
}

MetricsReport run_eval(const RunConfig& cfg, const std::filesystem::path& checkpoint,
                       const std::string& split_name, const std::filesystem::path& out_dir,
                       std::ostream& log) {
  cfg.validate();
  const auto start = std::chrono::steady_clock::now();
  Dataset data = prepare_dataset(cfg);
  DatasetSplit split = prepare_splits(cfg, data);
  const std::vector<Sample>& samples = pick_split(split, split_name);

  DrifaNet<float> net(cfg.model);
  auto params = net.parameters();
  load_checkpoint(checkpoint.string(), params);

  MetricsReport report = evaluate_metrics(net, data, samples, cfg.batch_size, config_hash(cfg));
  report.wall_clock_seconds = elapsed_seconds(start);
  write_metrics_files(report, out_dir.string());
  print_metrics(log, report);
  return report;
}

std::vector<AblationRowResult> run_ablate(const RunConfig& cfg, const std::string& grid,
                                          std::size_t repeats,
                                          const std::filesystem::path& out_dir,
                                          std::ostream& log) {
  cfg.validate();
  if (repeats < 1) fail(ErrorKind::InvalidFlag, "ablate: at least one repeat required");
  const auto rows = parse_ablation_grid(grid.empty() ? kDefaultAblationGrid : grid);

  // accuracy/precision/recall/f1 per row and repeat, averaged over tasks
  std::vector<std::vector<double>> acc(rows.size()), prec(rows.size()), rec(rows.size()),
      f1(rows.size());

  for (std::size_t r = 0; r < repeats; ++r) {
    // every grid row inside one repeat sees the same data, split and
    // initial weights, so the rows differ only in what is ablated
    const std::uint64_t repeat_seed = detail::mix64(cfg.seed ^ detail::mix64(0xAB1A7E00 + r));
    RunConfig rcfg = cfg;
    rcfg.seed = repeat_seed;
    rcfg.data_seed = detail::mix64(repeat_seed ^ 0x0D);
    rcfg.model.init_seed = detail::mix64(repeat_seed ^ 0x1E);

    Dataset data = prepare_dataset(rcfg);
    DatasetSplit split = prepare_splits(rcfg, data);

    for (std::size_t i = 0; i < rows.size(); ++i) {
      RunConfig row_cfg = rcfg;
      row_cfg.model.ablation = rows[i].flags;
      row_cfg.model.weights = rows[i].weights;
      DrifaNet<float> net(row_cfg.model);
      train_model(net, data, split, row_cfg, nullptr);
      MetricsReport rep =
          evaluate_metrics(net, data, split.test, row_cfg.batch_size, config_hash(row_cfg));
      double a = 0.0, p = 0.0, rr = 0.0, f = 0.0;
      for (const TaskMetrics& m : rep.tasks) {
        a += m.accuracy;
        p += m.macro_precision;
        rr += m.macro_recall;
        f += m.macro_f1;
      }
      const double nt = static_cast<double>(rep.tasks.size());
      acc[i].push_back(a / nt);
      prec[i].push_back(p / nt);
      rec[i].push_back(rr / nt);
      f1[i].push_back(f / nt);
      log << "repeat " << r << "  " << rows[i].name << "  accuracy " << fmt6(a / nt) << "\n";
    }
  }

  auto mean_of = [](const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
  };
  auto std_of = [&](const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double m = mean_of(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size() - 1));
  };

  std::vector<AblationRowResult> results;
  std::string csv = "configuration,repeats,accuracy_mean,accuracy_std,precision_mean,recall_mean,f1_mean\n";
  log << "\nconfiguration        accuracy (mean +/- std)   precision  recall     f1\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    AblationRowResult row;
    row.name = rows[i].name;
    row.accuracy_mean = mean_of(acc[i]);
    row.accuracy_std = std_of(acc[i]);
    row.precision_mean = mean_of(prec[i]);
    row.recall_mean = mean_of(rec[i]);
    row.f1_mean = mean_of(f1[i]);
    results.push_back(row);
    csv += row.name + "," + std::to_string(repeats) + "," + fmt6(row.accuracy_mean) + "," +
           fmt6(row.accuracy_std) + "," + fmt6(row.precision_mean) + "," + fmt6(row.recall_mean) +
           "," + fmt6(row.f1_mean) + "\n";
    char line[160];
    std::snprintf(line, sizeof(line), "%-20s %.4f +/- %.4f          %.4f     %.4f     %.4f",
                  row.name.c_str(), row.accuracy_mean, row.accuracy_std, row.precision_mean,
                  row.recall_mean, row.f1_mean);
    log << line << "\n";
  }
  std::filesystem::create_directories(out_dir);
  write_text_file(out_dir / "ablation.csv", csv);
  return results;
}

std::vector<UqSummary> run_uq(const RunConfig& cfg, const std::filesystem::path& checkpoint,
                              const std::filesystem::path& out_dir, std::ostream& log) {
  cfg.validate();
  Dataset data = prepare_dataset(cfg);
  DatasetSplit split = prepare_splits(cfg, data);
  const std::vector<Sample>& samples = split.test;
  if (samples.empty()) fail(ErrorKind::InvalidSpec, "uq: empty test split");

  DrifaNet<float> net(cfg.model);
  auto params = net.parameters();
  load_checkpoint(checkpoint.string(), params);

  EnsembleConfig uq = cfg.uq;
  uq.seeds = resolve_ensemble_seeds(uq, cfg.seed);

  const std::size_t tasks = cfg.model.tasks;
  auto det_preds = predict_labels(net, data, samples, cfg.batch_size);

  // batched MC passes, concatenated back into per-task sample order
  std::vector<std::vector<int>> uq_preds(tasks);
  std::vector<std::vector<double>> entropies(tasks), max_probs(tasks);
  std::size_t total_passes = 0;
  for (std::size_t start = 0; start < samples.size(); start += cfg.batch_size) {
    const std::size_t count = std::min(cfg.batch_size, samples.size() - start);
    Batch<float> batch = make_batch(data, samples, start, count);
    McResult mc = mc_predict_all(net, batch, uq);
    total_passes = mc.total_passes;
    for (std::size_t t = 0; t < tasks; ++t) {
      const PredictiveDistribution& d = mc.tasks[t];
      for (std::size_t i = 0; i < count; ++i) {
        uq_preds[t].push_back(d.predicted[i]);
        entropies[t].push_back(d.entropy[i]);
        double mp = 0.0;
        for (std::size_t k = 0; k < d.classes; ++k) mp = std::max(mp, d.prob(i, k));
        max_probs[t].push_back(mp);
      }
    }
  }

  std::string sample_csv = "sample_id,task,truth,det_pred,uq_pred,entropy,max_prob\n";
  std::vector<UqSummary> summaries;
  for (std::size_t t = 0; t < tasks; ++t) {
    UqSummary s;
    s.task = t;
    s.total_passes = total_passes;
    std::size_t det_hits = 0, uq_hits = 0, wrong = 0;
    double ent_correct = 0.0, ent_wrong = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
      const int truth = samples[i].labels[t];
      if (det_preds[t][i] == truth) ++det_hits;
      if (uq_preds[t][i] == truth) {
        ++uq_hits;
        ent_correct += entropies[t][i];
      } else {
        ++wrong;
        ent_wrong += entropies[t][i];
      }
      sample_csv += std::to_string(samples[i].id) + "," + std::to_string(t) + "," +
                    std::to_string(truth) + "," + std::to_string(det_preds[t][i]) + "," +
                    std::to_string(uq_preds[t][i]) + "," + fmt6(entropies[t][i]) + "," +
                    fmt6(max_probs[t][i]) + "\n";
    }
    const double n = static_cast<double>(samples.size());
    s.deterministic_accuracy = static_cast<double>(det_hits) / n;
    s.uq_accuracy = static_cast<double>(uq_hits) / n;
    s.mean_entropy_correct = uq_hits ? ent_correct / static_cast<double>(uq_hits) : 0.0;
    s.mean_entropy_wrong = wrong ? ent_wrong / static_cast<double>(wrong) : 0.0;
    summaries.push_back(s);
  }

  std::string summary_csv =
      "task,total_passes,det_accuracy,uq_accuracy,mean_entropy_correct,mean_entropy_wrong\n";
  for (const UqSummary& s : summaries) {
    summary_csv += std::to_string(s.task) + "," + std::to_string(s.total_passes) + "," +
                   fmt6(s.deterministic_accuracy) + "," + fmt6(s.uq_accuracy) + "," +
                   fmt6(s.mean_entropy_correct) + "," + fmt6(s.mean_entropy_wrong) + "\n";
    log << "task " << s.task << ": det_acc " << fmt6(s.deterministic_accuracy) << "  uq_acc "
        << fmt6(s.uq_accuracy) << "  entropy correct " << fmt6(s.mean_entropy_correct)
        << " / wrong " << fmt6(s.mean_entropy_wrong) << "  (" << s.total_passes << " passes)\n";
  }
  std::filesystem::create_directories(out_dir);
  write_text_file(out_dir / "uq_samples.csv", sample_csv);
  write_text_file(out_dir / "uq_summary.csv", summary_csv);
  return summaries;
}

std::size_t run_saliency(const RunConfig& cfg, const std::filesystem::path& checkpoint,
                         std::size_t task, std::size_t cls, const std::string& split_name,
                         std::size_t limit, const std::filesystem::path& out_dir,
                         std::ostream& log) {
  cfg.validate();
  Dataset data = prepare_dataset(cfg);
  DatasetSplit split = prepare_splits(cfg, data);
  std::vector<Sample> samples = pick_split(split, split_name);
  if (limit > 0 && samples.size() > limit) samples.resize(limit);
  if (samples.empty()) fail(ErrorKind::InvalidSpec, "saliency: empty sample set");

  DrifaNet<float> net(cfg.model);
  auto params = net.parameters();
  load_checkpoint(checkpoint.string(), params);

  std::filesystem::create_directories(out_dir);
  std::string manifest = "file,sample_id,modality,truth\n";
  std::size_t files = 0;
  for (std::size_t start = 0; start < samples.size(); start += cfg.batch_size) {
    const std::size_t count = std::min(cfg.batch_size, samples.size() - start);
    Batch<float> batch = make_batch(data, samples, start, count);
    auto sal = saliency_maps(net, batch, task, cls);
    const std::size_t hw = sal.height * sal.width;
    for (std::size_t m = 0; m < sal.maps.size(); ++m) {
      for (std::size_t i = 0; i < count; ++i) {
        const Sample& s = samples[start + i];
        const std::string name =
            "sal_s" + std::to_string(s.id) + "_m" + std::to_string(m) + ".pgm";
        std::string pgm = "P5\n" + std::to_string(sal.width) + " " +
                          std::to_string(sal.height) + "\n255\n";
        for (std::size_t p = 0; p < hw; ++p) {
          const double v = std::clamp(static_cast<double>(sal.maps[m][i * hw + p]), 0.0, 1.0);
          pgm.push_back(static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0))));
        }
        write_text_file(out_dir / name, pgm);
        manifest += name + "," + std::to_string(s.id) + "," + std::to_string(m) + "," +
                    std::to_string(s.labels[task]) + "\n";
        ++files;
      }
    }
  }
  write_text_file(out_dir / "manifest.csv", manifest);
  log << "wrote " << files << " saliency maps to " << out_dir.string() << "\n";
  return files;
}

}  // namespace drifa
