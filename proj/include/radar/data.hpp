#pragma once

// Datasets: CIFAR-10 binary batches, a deterministic synthetic image set for
// desk-scale experiments, and seeded split/gather utilities.

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "radar/tensor.hpp"

namespace radar {

struct Dataset {
  Tensor images;            // [N,C,H,W], pixels in [0,1]
  std::vector<int> labels;  // N class indices in [0,K)
  int num_classes = 0;
  std::string provenance;

  int size() const { return images.rank() == 4 ? images.dim(0) : 0; }
  int channels() const { return images.dim(1); }
  int height() const { return images.dim(2); }
  int width() const { return images.dim(3); }
  void validate() const;
};

// Synthetic images: each class owns a smooth low-frequency template (two
// random cosine modes per channel, values in [0.2, 0.8], distinct classes
// kept apart by a minimum-distance resample loop); samples add per-pixel
// gaussian noise of scale sigma and clamp to [0,1]. With sigma at the 0.05
// default the class margins are several hundred sigmas wide in L2, so
// nearest-template (Bayes) accuracy is 1.0 for all practical purposes.
struct SynthConfig {
  int num_classes = 6;
  int per_class = 150;
  int channels = 3;
  int size = 16;  // height = width
  double sigma = 0.05;
  uint64_t seed = 0;

  void validate() const;
};

// The per-class templates the generator uses, [C,H,W] each (for oracles and
// inspection).
std::vector<Tensor> synth_templates(const SynthConfig& cfg);

Dataset synth_dataset(const SynthConfig& cfg);

// Standard binary batches: each record is 1 label byte + 3072 pixel bytes
// (red plane, green plane, blue plane, row-major 32x32); pixels scaled by
// 1/255. Reads every *.bin file in the directory in name order.
Dataset load_cifar10(const std::string& dir);

// Seeded permutation split into (train, val); sizes round(fraction*N) and
// the rest. Throws on 0 < fraction < 1 violations and when a side would be
// empty.
std::pair<Dataset, Dataset> split(const Dataset& data, double train_fraction, uint64_t seed);

// Row gather helpers.
Dataset take(const Dataset& data, const std::vector<int>& indices);
Tensor image_batch(const Dataset& data, const std::vector<int>& indices);
std::vector<int> label_batch(const Dataset& data, const std::vector<int>& indices);

}  // namespace radar
