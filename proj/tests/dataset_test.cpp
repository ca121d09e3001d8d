#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "drifa/dataset.hpp"

using namespace drifa;

namespace {

SyntheticSpec base_spec() {
  SyntheticSpec spec;
  spec.modalities = 2;
  spec.tasks = 1;
  spec.classes_per_task = {4};
  spec.samples_per_class = 10;
  spec.height = 8;
  spec.width = 8;
  spec.channels = 1;
  spec.shared_signal_strength = 1.0;
  spec.noise_sigma = 0.0;
  spec.seed = 11;
  return spec;
}

int match_pattern(const std::vector<float>& img, std::size_t task, std::size_t classes,
                  std::size_t h, std::size_t w, std::size_t c) {
  for (std::size_t cls = 0; cls < classes; ++cls) {
    auto ref = class_pattern(task, int(cls), classes, h, w, c);
    if (ref == img) return int(cls);
  }
  return -1;
}

std::filesystem::path fresh_dir(const char* tag) {
  auto dir = std::filesystem::temp_directory_path() / (std::string("drifa_ds_") + tag);
  std::filesystem::remove_all(dir);
  return dir;
}

}  // namespace

TEST_CASE("generation specs are validated") {
  auto bad = base_spec();
  bad.tasks = 0;
  CHECK_THROWS_AS(generate_dataset(bad), Error);
  bad = base_spec();
  bad.classes_per_task = {4, 2};
  CHECK_THROWS_AS(generate_dataset(bad), Error);
  bad = base_spec();
  bad.classes_per_task = {1};
  CHECK_THROWS_AS(generate_dataset(bad), Error);
  bad = base_spec();
  bad.height = 3;
  CHECK_THROWS_AS(generate_dataset(bad), Error);
  bad = base_spec();
  bad.shared_signal_strength = 1.5;
  CHECK_THROWS_AS(generate_dataset(bad), Error);
  bad = base_spec();
  bad.noise_sigma = -0.1;
  CHECK_THROWS_AS(generate_dataset(bad), Error);
  try {
    generate_dataset(bad);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::InvalidSpec);
  }
}

TEST_CASE("the same spec always yields the same data; a new seed changes it") {
  auto spec = base_spec();
  spec.noise_sigma = 0.2;
  auto a = generate_dataset(spec);
  auto b = generate_dataset(spec);
  REQUIRE(a.samples.size() == b.samples.size());
  for (std::size_t i = 0; i < a.samples.size(); ++i) {
    CHECK(a.samples[i].labels == b.samples[i].labels);
    CHECK(a.samples[i].modalities == b.samples[i].modalities);
  }
  spec.seed = 12;
  auto c = generate_dataset(spec);
  bool any_diff = false;
  for (std::size_t i = 0; i < a.samples.size(); ++i)
    any_diff |= a.samples[i].modalities != c.samples[i].modalities;
  CHECK(any_diff);
}

TEST_CASE("labels are balanced by construction and in range for every task") {
  auto spec = base_spec();
  spec.tasks = 3;
  spec.classes_per_task = {4, 3, 2};
  auto data = generate_dataset(spec);
  REQUIRE(data.samples.size() == 40);
  std::map<int, int> counts;
  for (const auto& s : data.samples) {
    REQUIRE(s.labels.size() == 3);
    ++counts[s.labels[0]];
    for (std::size_t t = 0; t < 3; ++t) {
      CHECK(s.labels[t] >= 0);
      CHECK(s.labels[t] < int(spec.classes_per_task[t]));
    }
  }
  for (int cls = 0; cls < 4; ++cls) CHECK(counts[cls] == 10);
}

TEST_CASE("full shared signal plants the label's own pattern in every modality") {
  auto spec = base_spec();
  auto data = generate_dataset(spec);
  for (const auto& s : data.samples) {
    auto ref = class_pattern(0, s.labels[0], 4, 8, 8, 1);
    for (const auto& img : s.modalities) CHECK(img == ref);
  }
}

TEST_CASE("zero shared signal hides the label in the complementary sum") {
  auto spec = base_spec();
  spec.shared_signal_strength = 0.0;
  spec.modalities = 3;
  auto data = generate_dataset(spec);
  for (const auto& s : data.samples) {
    int sum = 0;
    for (const auto& img : s.modalities) {
      const int r = match_pattern(img, 0, 4, 8, 8, 1);
      REQUIRE(r >= 0);
      sum += r;
    }
    CHECK(sum % 4 == s.labels[0]);
  }
}

TEST_CASE("intermediate strength blends the label and complementary patterns exactly") {
  auto spec = base_spec();
  spec.shared_signal_strength = 0.6;
  auto data = generate_dataset(spec);
  const float sf = static_cast<float>(spec.shared_signal_strength);
  const float rf = 1.0f - sf;
  for (const auto& s : data.samples) {
    for (const auto& img : s.modalities) {
      bool matched = false;
      for (int r = 0; r < 4 && !matched; ++r) {
        auto own = class_pattern(0, s.labels[0], 4, 8, 8, 1);
        auto other = class_pattern(0, r, 4, 8, 8, 1);
        bool all = true;
        for (std::size_t i = 0; i < img.size(); ++i)
          all &= img[i] == sf * own[i] + rf * other[i];
        matched = all;
      }
      CHECK(matched);
    }
  }
}

TEST_CASE("noise adds variance close to its nominal level on top of the clean image") {
  auto spec = base_spec();
  spec.samples_per_class = 40;
  auto clean = generate_dataset(spec);
  spec.noise_sigma = 0.5;
  auto noisy = generate_dataset(spec);
  double acc = 0.0, mean = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < clean.samples.size(); ++i) {
    CHECK(clean.samples[i].labels == noisy.samples[i].labels);
    for (std::size_t m = 0; m < 2; ++m)
      for (std::size_t p = 0; p < clean.samples[i].modalities[m].size(); ++p) {
        const double d = double(noisy.samples[i].modalities[m][p]) -
                         double(clean.samples[i].modalities[m][p]);
        acc += d * d;
        mean += d;
        ++count;
      }
  }
  mean /= double(count);
  const double var = acc / double(count) - mean * mean;
  CHECK(var == doctest::Approx(0.25).epsilon(0.1));
  CHECK(std::abs(mean) < 0.02);
}

TEST_CASE("flips and quarter turns are involutions and four-cycles") {
  auto spec = base_spec();
  spec.noise_sigma = 0.3;
  auto data = generate_dataset(spec);
  Sample s = data.samples[7];
  const Sample orig = s;

  flip_h_inplace(s, 8, 8, 1);
  CHECK(s.modalities != orig.modalities);
  flip_h_inplace(s, 8, 8, 1);
  CHECK(s.modalities == orig.modalities);

  flip_v_inplace(s, 8, 8, 1);
  flip_v_inplace(s, 8, 8, 1);
  CHECK(s.modalities == orig.modalities);

  for (int i = 0; i < 4; ++i) rotate90_inplace(s, 8, 8, 1);
  CHECK(s.modalities == orig.modalities);
}

TEST_CASE("a quarter turn moves pixels where it should") {
  Sample s;
  s.modalities = {{1, 2, 3, 4}};  // 2x2, row-major: [1 2; 3 4]
  rotate90_inplace(s, 2, 2, 1);
  CHECK(s.modalities[0] == std::vector<float>{3, 1, 4, 2});

  Sample ns;
  ns.modalities = {{1, 2, 3, 4, 5, 6}};
  CHECK_THROWS_AS(rotate90_inplace(ns, 2, 3, 1), Error);
  try {
    rotate90_inplace(ns, 2, 3, 1);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::NonSquareRotation);
  }
}

TEST_CASE("augmented samples keep their labels and apply the same transform per modality") {
  auto spec = base_spec();
  spec.noise_sigma = 0.2;
  auto data = generate_dataset(spec);
  RandomStream rng(21);
  AugmentOps ops;
  ops.rotate90 = true;
  ops.flip_h = true;
  ops.flip_v = true;
  for (int trial = 0; trial < 10; ++trial) {
    const Sample& src = data.samples[std::size_t(trial)];
    Sample out = augment_sample(src, data, ops, rng);
    CHECK(out.labels == src.labels);
    CHECK(out.id == src.id);
    // same spatial permutation in every modality: matching value multisets
    for (std::size_t m = 0; m < 2; ++m) {
      auto a = src.modalities[m];
      auto b = out.modalities[m];
      std::sort(a.begin(), a.end());
      std::sort(b.begin(), b.end());
      CHECK(a == b);
    }
  }
}

TEST_CASE("balancing tops every class up to the majority count with fresh ids") {
  auto spec = base_spec();
  spec.noise_sigma = 0.1;
  auto data = generate_dataset(spec);
  // drop most of class 0 and some of class 2
  std::vector<Sample> kept;
  int drop0 = 7, drop2 = 3;
  for (auto& s : data.samples) {
    if (s.labels[0] == 0 && drop0 > 0) {
      --drop0;
      continue;
    }
    if (s.labels[0] == 2 && drop2 > 0) {
      --drop2;
      continue;
    }
    kept.push_back(s);
  }
  data.samples = kept;
  const std::size_t before = data.samples.size();

  RandomStream rng(22);
  balance_classes(data, rng);
  std::map<int, int> counts;
  std::set<std::uint64_t> ids;
  for (const auto& s : data.samples) {
    ++counts[s.labels[0]];
    ids.insert(s.id);
  }
  for (int cls = 0; cls < 4; ++cls) CHECK(counts[cls] == 10);
  CHECK(ids.size() == data.samples.size());
  CHECK(data.samples.size() == before + 10);
  for (std::size_t i = 0; i < before; ++i) CHECK(data.samples[i].modalities == kept[i].modalities);
}

TEST_CASE("stratified splits keep proportions, partition the data, and are seed-stable") {
  auto spec = base_spec();
  spec.samples_per_class = 50;
  auto data = generate_dataset(spec);

  auto split = split_dataset(data, 0.8, 0.1, 0.1, 31);
  CHECK(split.train.size() == 160);
  CHECK(split.val.size() == 20);
  CHECK(split.test.size() == 20);

  std::map<int, int> train_counts, val_counts, test_counts;
  std::set<std::uint64_t> seen;
  for (const auto& s : split.train) ++train_counts[s.labels[0]], seen.insert(s.id);
  for (const auto& s : split.val) ++val_counts[s.labels[0]], seen.insert(s.id);
  for (const auto& s : split.test) ++test_counts[s.labels[0]], seen.insert(s.id);
  CHECK(seen.size() == 200);
  for (int cls = 0; cls < 4; ++cls) {
    CHECK(train_counts[cls] == 40);
    CHECK(val_counts[cls] == 5);
    CHECK(test_counts[cls] == 5);
  }

  auto again = split_dataset(data, 0.8, 0.1, 0.1, 31);
  REQUIRE(again.test.size() == split.test.size());
  for (std::size_t i = 0; i < split.test.size(); ++i) CHECK(again.test[i].id == split.test[i].id);

  auto other = split_dataset(data, 0.8, 0.1, 0.1, 32);
  std::set<std::uint64_t> t1, t2;
  for (const auto& s : split.test) t1.insert(s.id);
  for (const auto& s : other.test) t2.insert(s.id);
  CHECK(t1 != t2);
}

TEST_CASE("split counts stay within one of the exact fractions when they do not divide evenly") {
  auto spec = base_spec();
  spec.classes_per_task = {3};
  spec.samples_per_class = 17;
  auto data = generate_dataset(spec);
  auto split = split_dataset(data, 0.7, 0.15, 0.15, 33);
  CHECK(split.train.size() + split.val.size() + split.test.size() == 51);
  std::map<int, int> per_class;
  for (const auto& s : split.train) ++per_class[s.labels[0]];
  for (auto& [cls, n] : per_class) {
    CHECK(n >= int(std::floor(0.7 * 17)));
    CHECK(n <= int(std::ceil(0.7 * 17)));
  }
}

TEST_CASE("bad split fractions are rejected") {
  auto data = generate_dataset(base_spec());
  CHECK_THROWS_AS(split_dataset(data, 0.5, 0.1, 0.1, 1), Error);
  CHECK_THROWS_AS(split_dataset(data, -0.2, 0.6, 0.6, 1), Error);
  try {
    split_dataset(data, 0.5, 0.1, 0.1, 1);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::BadFractions);
  }
}

TEST_CASE("export then import reproduces the dataset bit for bit") {
  auto spec = base_spec();
  spec.tasks = 2;
  spec.classes_per_task = {4, 3};
  spec.noise_sigma = 0.15;
  auto data = generate_dataset(spec);
  auto dir = fresh_dir("roundtrip");
  export_dataset(data, dir);
  auto back = import_dataset(dir);

  CHECK(back.modalities == data.modalities);
  CHECK(back.tasks == data.tasks);
  CHECK(back.classes_per_task == data.classes_per_task);
  CHECK(back.height == data.height);
  CHECK(back.width == data.width);
  CHECK(back.channels == data.channels);
  REQUIRE(back.samples.size() == data.samples.size());
  for (std::size_t i = 0; i < data.samples.size(); ++i) {
    CHECK(back.samples[i].id == data.samples[i].id);
    CHECK(back.samples[i].labels == data.samples[i].labels);
    CHECK(back.samples[i].modalities == data.samples[i].modalities);
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("import failures carry the data-not-found kind") {
  CHECK_THROWS_AS(import_dataset("/nonexistent/drifa"), Error);
  try {
    import_dataset("/nonexistent/drifa");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::DataNotFound);
  }

  auto dir = fresh_dir("corrupt");
  std::filesystem::create_directories(dir);
  std::ofstream(dir / "manifest.txt") << "drifa-dataset 1\nmodalities 2\ntasks 1\nclasses 4\n";
  CHECK_THROWS_AS(import_dataset(dir), Error);

  auto data = generate_dataset(base_spec());
  export_dataset(data, dir);
  std::filesystem::remove(dir / "s0_m1.bin");
  CHECK_THROWS_AS(import_dataset(dir), Error);
  std::filesystem::remove_all(dir);
}

TEST_CASE("batches pack samples and labels in order") {
  auto spec = base_spec();
  spec.tasks = 2;
  spec.classes_per_task = {4, 2};
  auto data = generate_dataset(spec);
  auto batch = make_batch(data, data.samples, 4, 3);
  REQUIRE(batch.inputs.size() == 2);
  CHECK(batch.inputs[0]->shape == Shape{3, 8, 8, 1});
  REQUIRE(batch.labels.size() == 2);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(batch.labels[0][i] == data.samples[4 + i].labels[0]);
    CHECK(batch.labels[1][i] == data.samples[4 + i].labels[1]);
    for (std::size_t p = 0; p < 64; ++p)
      CHECK(batch.inputs[1]->values[i * 64 + p] == data.samples[4 + i].modalities[1][p]);
  }
  CHECK_THROWS_AS(make_batch(data, data.samples, 39, 5), Error);
  CHECK_THROWS_AS(make_batch(data, data.samples, 0, 0), Error);
}
