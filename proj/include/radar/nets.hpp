#pragma once

// Compact convolutional models for the classifier f and the detector g,
// plus binary checkpoints.
//
// Architectures are ordered LayerSpec lists validated at build time (shapes
// must compose, exactly one head layer, last). Parameters are named
// "layerN.weight" / "layerN.bias" by position in the list. Eval mode turns
// off parameter-gradient accumulation; gradients with respect to the input
// stay available in both modes, which is what the attacks rely on.

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "radar/ops.hpp"
#include "radar/tensor.hpp"

namespace radar {

struct CheckpointError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct BadMagicError : CheckpointError {
  using CheckpointError::CheckpointError;
};
struct VersionMismatchError : CheckpointError {
  using CheckpointError::CheckpointError;
};
struct TruncationError : CheckpointError {
  using CheckpointError::CheckpointError;
};

struct LayerSpec {
  enum class Kind { conv, relu, pool, flatten, dense, head, save_skip, add_skip };
  Kind kind = Kind::relu;
  int out_channels = 0;  // conv
  int kernel = 0;        // conv
  int stride = 1;        // conv
  int pad = 0;           // conv
  int out_features = 0;  // dense / head
  bool sigmoid_head = false;

  static LayerSpec conv(int out_channels, int kernel, int stride = 1, int pad = 0);
  static LayerSpec relu();
  static LayerSpec pool();
  static LayerSpec flatten();
  static LayerSpec dense(int out_features);
  static LayerSpec head(int out_features, bool sigmoid);
  static LayerSpec save_skip();
  static LayerSpec add_skip();
};

enum class Mode { train, eval };

struct ArchConfig {
  std::string arch = "cnn-small";
  int in_channels = 3;
  int height = 32;
  int width = 32;
  int num_classes = 10;  // classifier head width; detectors always emit one probability
};

class Model {
 public:
  Model() = default;
  // Builds and He-uniform-initializes a model from an explicit layer list.
  Model(std::vector<LayerSpec> layers, ArchConfig cfg, bool detector, uint64_t seed);

  // Rebuilds a model around externally supplied parameters (checkpoint load).
  static Model from_parts(std::vector<LayerSpec> layers, ArchConfig cfg, bool detector,
                          const std::vector<std::pair<std::string, Tensor>>& params);

  // relu_taps, when given, collects each relu output in order; finite-
  // difference harnesses use it to reject samples whose activation pattern
  // flips between the two evaluation points.
  Tensor forward(Tape& tape, const Tensor& x, std::vector<Tensor>* relu_taps = nullptr) const;

  Mode mode() const { return mode_; }
  void set_mode(Mode m);
  bool is_detector() const { return detector_; }
  const ArchConfig& arch() const { return arch_; }
  const std::vector<LayerSpec>& layers() const { return layers_; }

  const std::vector<std::pair<std::string, Tensor>>& named_params() const { return params_; }
  std::vector<Tensor> params() const;
  Tensor param(const std::string& name) const;
  int64_t param_count() const;
  void zero_param_grads() const;

 private:
  void validate_and_register(uint64_t seed, bool init);
  std::vector<LayerSpec> layers_;
  ArchConfig arch_;
  bool detector_ = false;
  Mode mode_ = Mode::train;
  std::vector<std::pair<std::string, Tensor>> params_;
};

// Registered desk-scale architectures: "cnn-small" and "cnn-res".
std::vector<LayerSpec> make_arch_layers(const std::string& name, int head_features,
                                        bool sigmoid_head);

Model build_classifier(const ArchConfig& cfg, uint64_t seed);
Model build_detector(const ArchConfig& cfg, uint64_t seed);

// Forward pass helpers. predict returns logits [B,K]; detect returns P(adv)
// per item as a [B,1] tensor.
Tensor predict(Tape& tape, const Model& f, const Tensor& x);
Tensor detect(Tape& tape, const Model& g, const Tensor& x);

// Tape-free conveniences for evaluation paths.
std::vector<int> predict_labels(const Model& f, const Tensor& x);
std::vector<double> detect_scores(const Model& g, const Tensor& x);

void save_checkpoint(const Model& model, const std::string& path);
Model load_checkpoint(const std::string& path);

// The exact bytes save_checkpoint would write; the cheap way to assert a
// model was (or was not) modified.
std::string checkpoint_bytes(const Model& model);

bool models_bitwise_equal(const Model& a, const Model& b);

}  // namespace radar
