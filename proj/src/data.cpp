#include "radar/data.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <numeric>
#include <stdexcept>

#include "radar/rng.hpp"

namespace radar {

void Dataset::validate() const {
  if (images.rank() != 4)
    throw std::invalid_argument("dataset images must be [N,C,H,W], got " +
                                shape_str(images.shape()));
  const int n = images.dim(0);
  if (n <= 0) throw std::invalid_argument("dataset is empty");
  if (int(labels.size()) != n)
    throw std::invalid_argument("dataset has " + std::to_string(labels.size()) +
                                " labels for " + std::to_string(n) + " images");
  if (num_classes <= 0) throw std::invalid_argument("dataset num_classes must be positive");
  for (int lbl : labels)
    if (lbl < 0 || lbl >= num_classes)
      throw std::invalid_argument("dataset label " + std::to_string(lbl) + " outside [0," +
                                  std::to_string(num_classes) + ")");
  for (double v : images.values())
    if (!(v >= 0.0 && v <= 1.0))
      throw std::invalid_argument("dataset pixel outside [0,1]");
}

void SynthConfig::validate() const {
  if (num_classes < 2) throw std::invalid_argument("synth needs at least 2 classes");
  if (per_class < 1) throw std::invalid_argument("synth per_class must be positive");
  if (channels < 1 || size < 1) throw std::invalid_argument("synth image dims must be positive");
  if (!(sigma >= 0.0)) throw std::invalid_argument("synth sigma must be non-negative");
}

std::vector<Tensor> synth_templates(const SynthConfig& cfg) {
  cfg.validate();
  const int C = cfg.channels, S = cfg.size;
  const size_t numel = size_t(C) * size_t(S) * size_t(S);
  Rng rng(derive_seed(cfg.seed, "synth-templates"));

  auto draw_template = [&]() {
    std::vector<double> vals(numel);
    for (int c = 0; c < C; ++c) {
      // Two random low-frequency cosine modes per channel.
      double fi[2], fj[2], ph[2];
      for (int m = 0; m < 2; ++m) {
        fi[m] = double(1 + rng.uniform_int(3));
        fj[m] = double(1 + rng.uniform_int(3));
        ph[m] = rng.uniform(0.0, 2.0 * std::numbers::pi);
      }
      for (int i = 0; i < S; ++i)
        for (int j = 0; j < S; ++j) {
          double s = 0.0;
          for (int m = 0; m < 2; ++m)
            s += std::cos(2.0 * std::numbers::pi * (fi[m] * i + fj[m] * j) / double(S) + ph[m]);
          vals[size_t(c) * size_t(S) * size_t(S) + size_t(i) * size_t(S) + size_t(j)] =
              0.5 + 0.15 * s;
        }
    }
    return vals;
  };

  // Keep classes apart: resample a template that lands too close to an
  // earlier one (L2 threshold scales with the pixel count).
  const double min_dist = 0.1 * std::sqrt(double(numel));
  std::vector<Tensor> out;
  for (int k = 0; k < cfg.num_classes; ++k) {
    std::vector<double> vals;
    bool ok = false;
    for (int attempt = 0; attempt < 100 && !ok; ++attempt) {
      vals = draw_template();
      ok = true;
      for (const Tensor& prev : out) {
        double d2 = 0.0;
        for (size_t i = 0; i < numel; ++i) {
          const double d = vals[i] - prev.values()[i];
          d2 += d * d;
        }
        if (std::sqrt(d2) < min_dist) {
          ok = false;
          break;
        }
      }
    }
    if (!ok)
      throw std::runtime_error("could not draw " + std::to_string(cfg.num_classes) +
                               " well-separated class templates; enlarge the image");
    out.emplace_back(Shape{C, S, S}, std::move(vals));
  }
  return out;
}

Dataset synth_dataset(const SynthConfig& cfg) {
  const std::vector<Tensor> templates = synth_templates(cfg);
  const int C = cfg.channels, S = cfg.size;
  const size_t item = size_t(C) * size_t(S) * size_t(S);
  const int n = cfg.num_classes * cfg.per_class;

  Rng noise(derive_seed(cfg.seed, "synth-noise"));
  std::vector<double> images(size_t(n) * item);
  std::vector<int> labels(static_cast<size_t>(n));
  size_t row = 0;
  for (int k = 0; k < cfg.num_classes; ++k) {
    const std::vector<double>& tpl = templates[size_t(k)].values();
    for (int s = 0; s < cfg.per_class; ++s, ++row) {
      labels[row] = k;
      double* dst = images.data() + row * item;
      for (size_t i = 0; i < item; ++i)
        dst[i] = std::clamp(tpl[i] + cfg.sigma * noise.gaussian(), 0.0, 1.0);
    }
  }

  Dataset d;
  d.images = Tensor(Shape{n, C, S, S}, std::move(images));
  d.labels = std::move(labels);
  d.num_classes = cfg.num_classes;
  d.provenance = "synth(seed=" + std::to_string(cfg.seed) + ",k=" +
                 std::to_string(cfg.num_classes) + ")";
  d.validate();
  return d;
}

Dataset load_cifar10(const std::string& dir) {
  namespace fs = std::filesystem;
  constexpr size_t kRecord = 3073;  // 1 label byte + 3*32*32 pixels
  constexpr size_t kPixels = 3072;

  if (!fs::is_directory(dir)) throw std::runtime_error("not a directory: " + dir);
  std::vector<std::string> files;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".bin")
      files.push_back(entry.path().string());
  if (files.empty()) throw std::runtime_error("no .bin batch files in " + dir);
  std::sort(files.begin(), files.end());

  std::vector<double> images;
  std::vector<int> labels;
  for (const std::string& path : files) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (bytes.empty() || bytes.size() % kRecord != 0)
      throw std::runtime_error(path + ": size " + std::to_string(bytes.size()) +
                               " is not a positive multiple of " + std::to_string(kRecord));
    const size_t records = bytes.size() / kRecord;
    for (size_t r = 0; r < records; ++r) {
      const unsigned char* rec =
          reinterpret_cast<const unsigned char*>(bytes.data()) + r * kRecord;
      if (rec[0] > 9)
        throw std::runtime_error(path + ": record " + std::to_string(r) + " has label byte " +
                                 std::to_string(int(rec[0])));
      labels.push_back(int(rec[0]));
      for (size_t p = 0; p < kPixels; ++p) images.push_back(double(rec[1 + p]) / 255.0);
    }
  }

  Dataset d;
  d.images = Tensor(Shape{int(labels.size()), 3, 32, 32}, std::move(images));
  d.labels = std::move(labels);
  d.num_classes = 10;
  d.provenance = "cifar10(" + dir + ")";
  d.validate();
  return d;
}

std::pair<Dataset, Dataset> split(const Dataset& data, double train_fraction, uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw std::invalid_argument("split fraction must lie in (0,1)");
  const int n = data.size();
  const int n_train = int(std::llround(train_fraction * double(n)));
  if (n_train < 1 || n_train >= n)
    throw std::invalid_argument("split would leave an empty side (N=" + std::to_string(n) + ")");

  std::vector<int> idx(static_cast<size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(derive_seed(seed, "split"));
  rng.shuffle(idx);

  const std::vector<int> train_idx(idx.begin(), idx.begin() + n_train);
  const std::vector<int> val_idx(idx.begin() + n_train, idx.end());
  return {take(data, train_idx), take(data, val_idx)};
}

Dataset take(const Dataset& data, const std::vector<int>& indices) {
  Dataset d;
  d.images = image_batch(data, indices);
  d.labels = label_batch(data, indices);
  d.num_classes = data.num_classes;
  d.provenance = data.provenance;
  return d;
}

Tensor image_batch(const Dataset& data, const std::vector<int>& indices) {
  if (indices.empty()) throw std::invalid_argument("image_batch needs at least one index");
  const size_t item =
      size_t(data.channels()) * size_t(data.height()) * size_t(data.width());
  std::vector<double> out(indices.size() * item);
  for (size_t r = 0; r < indices.size(); ++r) {
    const int i = indices[r];
    if (i < 0 || i >= data.size())
      throw std::invalid_argument("image index " + std::to_string(i) + " out of range");
    const double* src = data.images.values().data() + size_t(i) * item;
    std::copy(src, src + item, out.data() + r * item);
  }
  return Tensor(Shape{int(indices.size()), data.channels(), data.height(), data.width()},
                std::move(out));
}

std::vector<int> label_batch(const Dataset& data, const std::vector<int>& indices) {
  std::vector<int> out(indices.size());
  for (size_t r = 0; r < indices.size(); ++r) {
    const int i = indices[r];
    if (i < 0 || i >= data.size())
      throw std::invalid_argument("label index " + std::to_string(i) + " out of range");
    out[r] = data.labels[size_t(i)];
  }
  return out;
}

}  // namespace radar
