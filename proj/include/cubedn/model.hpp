#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "cubedn/common.hpp"
#include "cubedn/fusion.hpp"
#include "cubedn/labels.hpp"
#include "cubedn/layers.hpp"

namespace cubedn::model {

// 3D encoder-decoder over (range, azimuth, elevation) with doppler bins as
// input channels.
//
//   e_0 = input
//   e_i = relu(conv_k stride 2 (e_{i-1}))                 i = 1..S
//   d_S = e_S
//   d_j = relu(conv_k(up(d_{j+1})) + conv_skip(e_j))      j = S-1..0
//   out = sigmoid(conv_1x1(d_0))
struct NetworkSpec {
  std::size_t in_channels = 16;
  GridDims grid{32, 16, 16};
  std::vector<std::size_t> channels{16, 32, 64};  // encoder widths, one per stage
  std::size_t kernel = 3;
  std::size_t skip_kernel = 1;
  std::size_t num_classes = kNumClasses;

  std::size_t stages() const { return channels.size(); }
  // Width of decoder level j (level 0 is full resolution).
  std::size_t decoder_width(std::size_t level) const;
  // Channel count of encoder feature e_j.
  std::size_t encoder_width(std::size_t level) const;

  void validate() const;
  std::string to_json() const;
  static NetworkSpec from_json(const std::string& text);

  friend bool operator==(const NetworkSpec&, const NetworkSpec&) = default;
};

struct Param {
  std::string name;
  Shape shape;
  std::vector<double> value;
};

using Gradients = std::vector<std::vector<double>>;  // parallel to parameters

class Network {
 public:
  // Fan-in scaled uniform initialisation of weights, zero biases.
  Network(NetworkSpec spec, std::uint64_t seed);
  // Takes ownership of loaded parameters; names and shapes must match the spec.
  Network(NetworkSpec spec, std::vector<Param> params, std::uint64_t seed = 0);

  const NetworkSpec& spec() const { return spec_; }
  std::uint64_t seed() const { return seed_; }
  const std::vector<Param>& params() const { return params_; }
  std::vector<Param>& params() { return params_; }
  std::size_t parameter_count() const;

  Gradients zero_gradients() const;

  // input (D, R, A, E) -> confidence (classes, R, A, E) in [0, 1].
  Tensor<double> forward(const Tensor<double>& input) const;
  labels::ConfidenceCube predict(const fusion::FusedCube& cube) const;

  // Returns the loss and adds its gradient into `grads`.
  double backward(const Tensor<double>& input, const Tensor<double>& target,
                  Gradients& grads) const;

 private:
  struct Trace;
  Tensor<double> run(const Tensor<double>& input, Trace* trace) const;
  void check_input(const Tensor<double>& input) const;

  NetworkSpec spec_;
  std::uint64_t seed_ = 0;
  std::vector<Param> params_;
  std::vector<layers::Conv3d> encoders_;  // index i-1 -> e_i
  std::vector<layers::Conv3d> decoders_;  // index j -> d_j main path
  std::vector<layers::Conv3d> skips_;     // index j -> d_j skip path
  layers::Conv3d head_;
};

// Mean over classes of the per-class mean squared error.
double loss(const labels::ConfidenceCube& pred, const labels::ConfidenceCube& gt);

struct Sample {
  Tensor<double> input;   // (D, R, A, E)
  Tensor<double> target;  // (classes, R, A, E)
};

class Dataset {
 public:
  virtual ~Dataset() = default;
  virtual std::size_t size() const = 0;
  virtual Sample get(std::size_t index) const = 0;
};

class InMemoryDataset final : public Dataset {
 public:
  void add(Sample s) { samples_.push_back(std::move(s)); }
  std::size_t size() const override { return samples_.size(); }
  Sample get(std::size_t index) const override { return samples_.at(index); }

 private:
  std::vector<Sample> samples_;
};

enum class Optimizer { Sgd, Adam };

struct TrainConfig {
  Optimizer optimizer = Optimizer::Sgd;
  double learning_rate = 1e-3;
  double momentum = 0.9;  // SGD momentum, Adam beta1
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::size_t batch_size = 4;
  std::size_t epochs = 70;
  std::uint64_t seed = 0;
  double validation_split = 0.0;
  double head_bias_init = 0.0;  // initial classification-head bias (logit)
  // Cosine annealing from learning_rate down to this fraction of it in the
  // last epoch. 1 keeps the rate constant.
  double final_lr_fraction = 1.0;

  void validate() const;
};

struct EpochStats {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double validation_loss = 0.0;  // NaN when there is no validation split
};

struct TrainResult {
  std::unique_ptr<Network> network;
  std::vector<EpochStats> history;
};

// Called after every epoch; may persist a checkpoint.
using EpochCallback = std::function<void(const Network&, const EpochStats&)>;

// Mini-batch training on the per-sample loss averaged over each batch. Throws
// DivergenceDetected when a loss turns NaN or infinite.
// Learning rate used during the given zero-based epoch.
double epoch_learning_rate(const TrainConfig& cfg, std::size_t epoch);

TrainResult train(const Dataset& data, const NetworkSpec& spec, const TrainConfig& cfg,
                  const EpochCallback& on_epoch = {});

}  // namespace cubedn::model
