#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "drifa/error.hpp"
#include "drifa/net.hpp"
#include "drifa/random.hpp"

namespace drifa {

// Synthetic multimodal classification data.  Each task plants a family of
// spatial patterns (Gaussian blobs of class-dependent size and quadrant, or
// oriented bars).  shared_signal_strength blends two constructions:
//   1.0  every modality shows the label's own pattern directly;
//   0.0  modality j shows pattern r_j where the r_j sum to the label mod K,
//        so no single modality carries any label information.
struct SyntheticSpec {
  std::size_t modalities = 2;
  std::size_t tasks = 1;
  std::vector<std::size_t> classes_per_task = {4};
  std::size_t samples_per_class = 40;  // per class of task 0
  std::size_t height = 8;
  std::size_t width = 8;
  std::size_t channels = 1;
  double shared_signal_strength = 1.0;  // in [0,1]
  double noise_sigma = 0.1;
  std::uint64_t seed = 1;

  void validate() const;
};

struct Sample {
  std::uint64_t id = 0;
  std::vector<std::vector<float>> modalities;  // each height*width*channels
  std::vector<int> labels;                     // one per task
};

struct Dataset {
  std::size_t modalities = 0;
  std::size_t tasks = 0;
  std::vector<std::size_t> classes_per_task;
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 0;
  std::vector<Sample> samples;
};

Dataset generate_dataset(const SyntheticSpec& spec);

// Reference pattern for a class (unit amplitude, no noise); used by tests
// and by the generator itself.
std::vector<float> class_pattern(std::size_t task, int cls, std::size_t classes,
                                 std::size_t height, std::size_t width, std::size_t channels);

// ---------------------------------------------------------------------------
// Augmentation.  Transforms apply to every modality of a sample identically.
// ---------------------------------------------------------------------------

struct AugmentOps {
  bool rotate90 = false;  // random quarter-turn count (square images only)
  bool flip_h = false;    // mirror across the vertical axis, probability 1/2
  bool flip_v = false;    // mirror across the horizontal axis, probability 1/2
};

void flip_h_inplace(Sample& s, std::size_t h, std::size_t w, std::size_t c);
void flip_v_inplace(Sample& s, std::size_t h, std::size_t w, std::size_t c);
void rotate90_inplace(Sample& s, std::size_t h, std::size_t w, std::size_t c);  // clockwise

Sample augment_sample(const Sample& s, const Dataset& meta, const AugmentOps& ops,
                      RandomStream& rng);

// Appends augmented copies of minority-class samples (task-0 labels) until
// every class has the same count.
void balance_classes(Dataset& data, RandomStream& rng);

// ---------------------------------------------------------------------------
// Splits
// ---------------------------------------------------------------------------

struct DatasetSplit {
  std::vector<Sample> train;
  std::vector<Sample> val;
  std::vector<Sample> test;
};

// Stratified by task-0 label with per-class largest-remainder allocation, so
// class proportions hold within one sample per class.
DatasetSplit split_dataset(const Dataset& data, double train_frac, double val_frac,
                           double test_frac, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Disk format: manifest.txt plus one raw little-endian float32 file per
// sample and modality.
// ---------------------------------------------------------------------------

void export_dataset(const Dataset& data, const std::filesystem::path& dir);
Dataset import_dataset(const std::filesystem::path& dir);

// Packs samples into one batch (labels included when present).
Batch<float> make_batch(const Dataset& meta, const std::vector<Sample>& samples,
                        std::size_t begin, std::size_t count);

template <typename T>
Batch<T> make_batch_as(const Dataset& meta, const std::vector<Sample>& samples, std::size_t begin,
                       std::size_t count) {
  if (begin + count > samples.size() || count == 0)
    fail(ErrorKind::ShapeMismatch, "make_batch: bad range");
  const std::size_t pix = meta.height * meta.width * meta.channels;
  Batch<T> batch;
  for (std::size_t m = 0; m < meta.modalities; ++m) {
    std::vector<T> values(count * pix);
    for (std::size_t i = 0; i < count; ++i)
      for (std::size_t p = 0; p < pix; ++p)
        values[i * pix + p] = static_cast<T>(samples[begin + i].modalities[m][p]);
    batch.inputs.push_back(
        make_tensor<T>({count, meta.height, meta.width, meta.channels}, std::move(values)));
  }
  if (!samples[begin].labels.empty()) {
    batch.labels.resize(meta.tasks);
    for (std::size_t t = 0; t < meta.tasks; ++t) {
      batch.labels[t].resize(count);
      for (std::size_t i = 0; i < count; ++i) batch.labels[t][i] = samples[begin + i].labels[t];
    }
  }
  return batch;
}

}  // namespace drifa
