#include "drifa/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>

namespace drifa {

void SyntheticSpec::validate() const {
  require(modalities >= 1, ErrorKind::InvalidSpec, "data: at least one modality required");
  require(tasks >= 1, ErrorKind::InvalidSpec, "data: at least one task required");
  require(classes_per_task.size() == tasks, ErrorKind::InvalidSpec,
          "data: classes_per_task must list one entry per task");
  for (std::size_t k : classes_per_task)
    require(k >= 2, ErrorKind::InvalidSpec, "data: every task needs at least two classes");
  require(samples_per_class >= 1, ErrorKind::InvalidSpec, "data: samples_per_class must be positive");
  require(height >= 4 && width >= 4, ErrorKind::InvalidSpec, "data: images must be at least 4x4");
  require(channels >= 1, ErrorKind::InvalidSpec, "data: channels must be positive");
  require(shared_signal_strength >= 0.0 && shared_signal_strength <= 1.0, ErrorKind::InvalidSpec,
          "data: shared_signal_strength outside [0,1]");
  require(noise_sigma >= 0.0, ErrorKind::InvalidSpec, "data: noise_sigma must be non-negative");
}

namespace {

// Family 0 (even tasks): Gaussian blob whose quadrant and width both depend
// on the class, so classes differ in position and in total mass.
// Family 1 (odd tasks): a bar through the centre at a class-dependent angle.
void add_pattern(std::vector<float>& img, std::size_t h, std::size_t w, std::size_t c,
                 std::size_t task, int cls, std::size_t classes, float amplitude) {
  if (amplitude == 0.0f) return;
  const double hd = static_cast<double>(h), wd = static_cast<double>(w);
  if (task % 2 == 0) {
    const int q = cls % 4;
    const double cx = (q % 2 == 0 ? 0.25 : 0.75) * (wd - 1.0);
    const double cy = (q / 2 == 0 ? 0.25 : 0.75) * (hd - 1.0);
    const double sigma = (0.7 + 0.35 * cls) * std::min(hd, wd) / 8.0;
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x) {
        const double dx = static_cast<double>(x) - cx;
        const double dy = static_cast<double>(y) - cy;
        const float v =
            amplitude * static_cast<float>(std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma)));
        for (std::size_t ch = 0; ch < c; ++ch) img[(y * w + x) * c + ch] += v;
      }
  } else {
    const double theta = std::numbers::pi * static_cast<double>(cls) / static_cast<double>(classes);
    const double cx = (wd - 1.0) / 2.0, cy = (hd - 1.0) / 2.0;
    const double bw = std::min(hd, wd) / 8.0;
    const double s = std::sin(theta), co = std::cos(theta);
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x) {
        const double d = (static_cast<double>(x) - cx) * s - (static_cast<double>(y) - cy) * co;
        const float v = amplitude * static_cast<float>(std::exp(-(d * d) / (bw * bw)));
        for (std::size_t ch = 0; ch < c; ++ch) img[(y * w + x) * c + ch] += v;
      }
  }
}

}  // namespace

std::vector<float> class_pattern(std::size_t task, int cls, std::size_t classes, std::size_t height,
                                 std::size_t width, std::size_t channels) {
  std::vector<float> img(height * width * channels, 0.0f);
  add_pattern(img, height, width, channels, task, cls, classes, 1.0f);
  return img;
}

Dataset generate_dataset(const SyntheticSpec& spec) {
  spec.validate();
  Dataset data;
  data.modalities = spec.modalities;
  data.tasks = spec.tasks;
  data.classes_per_task = spec.classes_per_task;
  data.height = spec.height;
  data.width = spec.width;
  data.channels = spec.channels;

  const std::size_t k0 = spec.classes_per_task[0];
  const std::size_t total = k0 * spec.samples_per_class;
  const std::size_t pix = spec.height * spec.width * spec.channels;
  const float s = static_cast<float>(spec.shared_signal_strength);

  data.samples.resize(total);
  for (std::size_t idx = 0; idx < total; ++idx) {
    // All randomness for a sample comes from its own derived stream, so the
    // dataset is independent of generation order.
    RandomStream rng = RandomStream::derive(spec.seed, idx);
    Sample& sample = data.samples[idx];
    sample.id = idx;
    sample.labels.resize(spec.tasks);
    sample.labels[0] = static_cast<int>(idx / spec.samples_per_class);
    for (std::size_t t = 1; t < spec.tasks; ++t)
      sample.labels[t] = static_cast<int>(rng.uniform_int(spec.classes_per_task[t]));

    sample.modalities.assign(spec.modalities, std::vector<float>(pix, 0.0f));
    for (std::size_t t = 0; t < spec.tasks; ++t) {
      const std::size_t k = spec.classes_per_task[t];
      // Complementary assignment: the r_j sum to the label mod k, with all
      // but the last drawn uniformly, so each modality alone is uninformative.
      std::vector<int> r(spec.modalities);
      if (spec.modalities == 1) {
        r[0] = sample.labels[t];
      } else {
        int acc = 0;
        for (std::size_t m = 0; m + 1 < spec.modalities; ++m) {
          r[m] = static_cast<int>(rng.uniform_int(k));
          acc += r[m];
        }
        const int kk = static_cast<int>(k);
        r[spec.modalities - 1] = ((sample.labels[t] - acc) % kk + kk) % kk;
      }
      for (std::size_t m = 0; m < spec.modalities; ++m) {
        add_pattern(sample.modalities[m], spec.height, spec.width, spec.channels, t,
                    sample.labels[t], k, s);
        add_pattern(sample.modalities[m], spec.height, spec.width, spec.channels, t, r[m], k,
                    1.0f - s);
      }
    }
    if (spec.noise_sigma > 0.0)
      for (std::size_t m = 0; m < spec.modalities; ++m)
        for (auto& v : sample.modalities[m])
          v += static_cast<float>(rng.normal(0.0, spec.noise_sigma));
  }
  return data;
}

// ---------------------------------------------------------------------------
// Augmentation
// ---------------------------------------------------------------------------

void flip_h_inplace(Sample& s, std::size_t h, std::size_t w, std::size_t c) {
  for (auto& img : s.modalities)
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w / 2; ++x)
        for (std::size_t ch = 0; ch < c; ++ch)
          std::swap(img[(y * w + x) * c + ch], img[(y * w + (w - 1 - x)) * c + ch]);
}

void flip_v_inplace(Sample& s, std::size_t h, std::size_t w, std::size_t c) {
  for (auto& img : s.modalities)
    for (std::size_t y = 0; y < h / 2; ++y)
      for (std::size_t x = 0; x < w; ++x)
        for (std::size_t ch = 0; ch < c; ++ch)
          std::swap(img[(y * w + x) * c + ch], img[((h - 1 - y) * w + x) * c + ch]);
}

void rotate90_inplace(Sample& s, std::size_t h, std::size_t w, std::size_t c) {
  if (h != w)
    fail(ErrorKind::NonSquareRotation, "augment: rotate90 requires square images, got " +
                                           std::to_string(h) + "x" + std::to_string(w));
  for (auto& img : s.modalities) {
    std::vector<float> out(img.size());
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x)
        for (std::size_t ch = 0; ch < c; ++ch)
          out[(x * w + (h - 1 - y)) * c + ch] = img[(y * w + x) * c + ch];
    img = std::move(out);
  }
}

Sample augment_sample(const Sample& s, const Dataset& meta, const AugmentOps& ops,
                      RandomStream& rng) {
  Sample out = s;
  if (ops.rotate90) {
    const std::uint64_t turns = rng.uniform_int(4);
    for (std::uint64_t i = 0; i < turns; ++i)
      rotate90_inplace(out, meta.height, meta.width, meta.channels);
  }
  if (ops.flip_h && rng.bernoulli(0.5)) flip_h_inplace(out, meta.height, meta.width, meta.channels);
  if (ops.flip_v && rng.bernoulli(0.5)) flip_v_inplace(out, meta.height, meta.width, meta.channels);
  return out;
}

void balance_classes(Dataset& data, RandomStream& rng) {
  if (data.samples.empty()) return;
  const std::size_t k0 = data.classes_per_task.at(0);
  std::vector<std::vector<std::size_t>> by_class(k0);
  for (std::size_t i = 0; i < data.samples.size(); ++i)
    by_class.at(data.samples[i].labels.at(0)).push_back(i);
  std::size_t target = 0;
  for (const auto& v : by_class) target = std::max(target, v.size());
  std::uint64_t next_id = 0;
  for (const auto& s : data.samples) next_id = std::max(next_id, s.id + 1);

  AugmentOps ops;
  ops.flip_h = true;
  ops.flip_v = true;
  ops.rotate90 = data.height == data.width;
  for (std::size_t cls = 0; cls < k0; ++cls) {
    if (by_class[cls].empty())
      fail(ErrorKind::InvalidSpec, "balance: class " + std::to_string(cls) + " has no samples");
    for (std::size_t have = by_class[cls].size(); have < target; ++have) {
      const std::size_t pick = by_class[cls][rng.uniform_int(by_class[cls].size())];
      Sample copy = augment_sample(data.samples[pick], data, ops, rng);
      copy.id = next_id++;
      data.samples.push_back(std::move(copy));
    }
  }
}

// ---------------------------------------------------------------------------
// Splits
// ---------------------------------------------------------------------------

DatasetSplit split_dataset(const Dataset& data, double train_frac, double val_frac,
                           double test_frac, std::uint64_t seed) {
  const double sum = train_frac + val_frac + test_frac;
  if (train_frac < 0.0 || val_frac < 0.0 || test_frac < 0.0 || std::abs(sum - 1.0) > 1e-9)
    fail(ErrorKind::BadFractions, "split: fractions must be non-negative and sum to 1");
  const std::size_t k0 = data.classes_per_task.at(0);
  std::vector<std::vector<std::size_t>> by_class(k0);
  for (std::size_t i = 0; i < data.samples.size(); ++i)
    by_class.at(data.samples[i].labels.at(0)).push_back(i);

  DatasetSplit split;
  std::vector<std::size_t> tr, va, te;
  for (std::size_t cls = 0; cls < k0; ++cls) {
    auto& idx = by_class[cls];
    RandomStream rng = RandomStream::derive(seed, 0xC1A55ull + cls);
    rng.shuffle(idx);
    // Largest-remainder allocation keeps per-class proportions within one.
    const double n = static_cast<double>(idx.size());
    const double exact[3] = {train_frac * n, val_frac * n, test_frac * n};
    std::size_t count[3];
    double rem[3];
    std::size_t used = 0;
    for (int p = 0; p < 3; ++p) {
      count[p] = static_cast<std::size_t>(std::floor(exact[p]));
      rem[p] = exact[p] - std::floor(exact[p]);
      used += count[p];
    }
    while (used < idx.size()) {
      int best = 0;
      for (int p = 1; p < 3; ++p)
        if (rem[p] > rem[best]) best = p;
      ++count[best];
      rem[best] = -1.0;
      ++used;
    }
    std::size_t at = 0;
    for (std::size_t i = 0; i < count[0]; ++i) tr.push_back(idx[at++]);
    for (std::size_t i = 0; i < count[1]; ++i) va.push_back(idx[at++]);
    for (std::size_t i = 0; i < count[2]; ++i) te.push_back(idx[at++]);
  }
  auto emit = [&](std::vector<std::size_t>& sel, std::vector<Sample>& out) {
    std::sort(sel.begin(), sel.end());
    out.reserve(sel.size());
    for (std::size_t i : sel) out.push_back(data.samples[i]);
  };
  emit(tr, split.train);
  emit(va, split.val);
  emit(te, split.test);
  return split;
}

// ---------------------------------------------------------------------------
// Disk format
// ---------------------------------------------------------------------------

namespace {

void write_raw_f32(const std::filesystem::path& path, const std::vector<float>& values) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) fail(ErrorKind::DataNotFound, "export: cannot write " + path.string());
  for (float v : values) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
    f.write(b, 4);
  }
}

std::vector<float> read_raw_f32(const std::filesystem::path& path, std::size_t count) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail(ErrorKind::DataNotFound, "import: cannot read " + path.string());
  std::vector<float> values(count);
  for (auto& v : values) {
    unsigned char b[4];
    if (!f.read(reinterpret_cast<char*>(b), 4))
      fail(ErrorKind::DataNotFound, "import: truncated sample file " + path.string());
    std::uint32_t bits = 0;
    for (int i = 0; i < 4; ++i) bits |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    std::memcpy(&v, &bits, 4);
  }
  return values;
}

}  // namespace

void export_dataset(const Dataset& data, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::ofstream manifest(dir / "manifest.txt", std::ios::trunc);
  if (!manifest) fail(ErrorKind::DataNotFound, "export: cannot write manifest in " + dir.string());
  manifest << "drifa-dataset 1\n";
  manifest << "modalities " << data.modalities << "\n";
  manifest << "tasks " << data.tasks << "\n";
  manifest << "classes";
  for (std::size_t k : data.classes_per_task) manifest << ' ' << k;
  manifest << "\n";
  manifest << "height " << data.height << "\n";
  manifest << "width " << data.width << "\n";
  manifest << "channels " << data.channels << "\n";
  manifest << "samples " << data.samples.size() << "\n";
  for (const auto& s : data.samples) {
    manifest << s.id;
    for (std::size_t m = 0; m < data.modalities; ++m) {
      std::string name = "s" + std::to_string(s.id) + "_m" + std::to_string(m) + ".bin";
      write_raw_f32(dir / name, s.modalities[m]);
      manifest << ' ' << name;
    }
    for (int label : s.labels) manifest << ' ' << label;
    manifest << "\n";
  }
}

Dataset import_dataset(const std::filesystem::path& dir) {
  std::ifstream manifest(dir / "manifest.txt");
  if (!manifest) fail(ErrorKind::DataNotFound, "import: no manifest.txt in " + dir.string());
  std::string line;
  auto next_line = [&]() {
    if (!std::getline(manifest, line))
      fail(ErrorKind::DataNotFound, "import: truncated manifest in " + dir.string());
    return std::istringstream(line);
  };

  Dataset data;
  std::string word;
  {
    auto ls = next_line();
    int version = 0;
    ls >> word >> version;
    if (word != "drifa-dataset" || version != 1)
      fail(ErrorKind::DataNotFound, "import: unrecognised manifest header");
  }
  std::size_t sample_count = 0;
  auto read_field = [&](const char* key, auto& out) {
    auto ls = next_line();
    ls >> word;
    if (word != key) fail(ErrorKind::DataNotFound, std::string("import: expected '") + key + "'");
    if (!(ls >> out)) fail(ErrorKind::DataNotFound, std::string("import: bad value for '") + key + "'");
  };
  read_field("modalities", data.modalities);
  {
    auto ls = next_line();
    ls >> word;
    if (word != "tasks") fail(ErrorKind::DataNotFound, "import: expected 'tasks'");
    ls >> data.tasks;
    auto ls2 = next_line();
    ls2 >> word;
    if (word != "classes") fail(ErrorKind::DataNotFound, "import: expected 'classes'");
    std::size_t k;
    while (ls2 >> k) data.classes_per_task.push_back(k);
    if (data.classes_per_task.size() != data.tasks)
      fail(ErrorKind::DataNotFound, "import: class list does not match task count");
  }
  read_field("height", data.height);
  read_field("width", data.width);
  read_field("channels", data.channels);
  read_field("samples", sample_count);

  const std::size_t pix = data.height * data.width * data.channels;
  data.samples.reserve(sample_count);
  for (std::size_t i = 0; i < sample_count; ++i) {
    auto ls = next_line();
    Sample s;
    if (!(ls >> s.id)) fail(ErrorKind::DataNotFound, "import: bad sample row");
    for (std::size_t m = 0; m < data.modalities; ++m) {
      std::string name;
      if (!(ls >> name)) fail(ErrorKind::DataNotFound, "import: missing modality path");
      s.modalities.push_back(read_raw_f32(dir / name, pix));
    }
    s.labels.resize(data.tasks);
    for (std::size_t t = 0; t < data.tasks; ++t) {
      if (!(ls >> s.labels[t])) fail(ErrorKind::DataNotFound, "import: missing label");
      if (s.labels[t] < 0 || static_cast<std::size_t>(s.labels[t]) >= data.classes_per_task[t])
        fail(ErrorKind::DataNotFound, "import: label out of range in sample row");
    }
    data.samples.push_back(std::move(s));
  }
  return data;
}

Batch<float> make_batch(const Dataset& meta, const std::vector<Sample>& samples, std::size_t begin,
                        std::size_t count) {
  return make_batch_as<float>(meta, samples, begin, count);
}

}  // namespace drifa
