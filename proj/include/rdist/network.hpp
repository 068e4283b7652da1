#pragma once

// Small residual CNN regressing the width-normalized (k1, k2) pair from an
// RGB crop: a shared convolutional feature extractor and two independent
// fully connected heads.
//
//   stem:   3x3 conv stride 2 -> BN -> LeakyReLU
//   stages: residual blocks (3x3 conv, BN, LeakyReLU, 3x3 conv, BN, shortcut,
//           LeakyReLU); the first block of each stage has stride 2 and a 1x1
//           projection shortcut
//   pool:   global average
//   heads:  dense(head_width) -> BN -> LeakyReLU -> dense(1), one per output

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include "rdist/image.hpp"
#include "rdist/loss.hpp"

namespace rdist {

struct NetworkConfig {
  int input_size = 64;
  std::vector<int> stage_channels{16, 32, 64};
  int blocks_per_stage = 2;
  int head_width = 32;
  float leaky_slope = 0.01f;
  float bn_momentum = 0.9f;
  float bn_eps = 1e-5f;

  /// Throws ShapeError unless the input is divisible by 2^(stages + 1) and
  /// every width is positive.
  void validate() const;
};

struct Tensor {
  std::string name;
  std::vector<int> shape;
  std::vector<float> values;

  std::size_t numel() const { return values.size(); }
  friend bool operator==(const Tensor&, const Tensor&) = default;
};

/// Batch-norm running statistics are stored alongside the trainable tensors
/// but never receive gradients.
bool is_trainable(const std::string& tensor_name);

struct Weights {
  static constexpr std::uint32_t kFormatVersion = 1;
  std::vector<Tensor> tensors;

  const Tensor& at(const std::string& name) const;
  Tensor& at(const std::string& name);
  std::size_t parameter_count() const;

  friend bool operator==(const Weights&, const Weights&) = default;
};

struct TensorSpec {
  std::string name;
  std::vector<int> shape;
};

/// Names and shapes of every tensor, in storage order.
std::vector<TensorSpec> architecture(const NetworkConfig& cfg);

/// He-scaled normal initialization from a per-tensor counter RNG; batch-norm
/// scales 1, shifts 0, running variance 1.
Weights init_weights(const NetworkConfig& cfg, std::uint64_t seed);

/// Throws ShapeError when the tensor list does not match the architecture, or
/// DomainError for non-finite values.
void validate_weights(const Weights& w, const NetworkConfig& cfg);

/// Recovers stage widths, block counts and head width from tensor shapes.
NetworkConfig infer_config(const Weights& w, int input_size = 64);

/// Binary layout: "RDWT", u32 version, u32 tensor count, then per tensor
/// u32 name length, name bytes, u32 rank, u32 dims, float32 values; all
/// little endian.
std::vector<std::uint8_t> encode_weights(const Weights& w);
Weights decode_weights(const std::vector<std::uint8_t>& bytes);
void save_weights(const std::filesystem::path& path, const Weights& w);
Weights load_weights(const std::filesystem::path& path);

/// Images normalized to [-1, 1], NCHW.
struct Batch {
  int size = 0;
  int height = 0;
  int width = 0;
  std::vector<float> data;
};

/// Throws ShapeError if an image is not input_size x input_size.
Batch make_batch(std::span<const Image> images, int input_size);
void append_normalized(const Image& img, std::vector<float>& out);

enum class Mode { Train, Eval };

struct Predictions {
  std::vector<double> k1;
  std::vector<double> k2;
};

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Stateful network used for training and gradient checks. Parameters are
/// held in precision T in the same order as architecture(cfg). Train-mode
/// forward passes use batch statistics, update the running statistics and
/// cache activations for backward().
template <typename T>
class Network {
 public:
  Network(const NetworkConfig& cfg, const Weights& w);
  ~Network();
  Network(Network&&) noexcept;
  Network& operator=(Network&&) noexcept;

  Predictions forward(const Batch& batch, Mode mode);

  /// Gradients of sum_b (dk1[b] * k1[b] + dk2[b] * k2[b]) with respect to
  /// every tensor of the last train-mode forward pass. Non-trainable tensors
  /// get zeros.
  std::vector<std::vector<T>> backward(std::span<const double> dk1, std::span<const double> dk2);

  std::vector<std::vector<T>>& params();
  const std::vector<std::vector<T>>& params() const;
  const NetworkConfig& config() const;

  Weights to_weights() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

extern template class Network<float>;
extern template class Network<double>;

/// Pure forward pass on a copy of the weights.
Predictions forward(const Weights& w, const NetworkConfig& cfg, const Batch& batch, Mode mode);

struct LossAndGrad {
  double loss = 0.0;
  Weights grad;
  Predictions predictions;
};

/// Train-mode loss (batch mean of split-loss totals) and its gradient for
/// every tensor. Throws ShapeError on label/batch mismatch and
/// NumericError on a non-finite loss.
LossAndGrad loss_and_grad(const Weights& w, const NetworkConfig& cfg, const Batch& batch,
                          std::span<const CoefficientPair> labels, const RadiusGrid& grid);

/// Train-mode loss of a network in precision T; fills *grads with the
/// gradient when grads is non-null.
template <typename T>
double batch_loss(Network<T>& net, const Batch& batch, std::span<const CoefficientPair> labels,
                  const RadiusGrid& grid,
                  std::type_identity_t<std::vector<std::vector<T>>>* grads = nullptr);

/// Eval-mode prediction for one image of the configured input size.
CoefficientPair predict(const Weights& w, const NetworkConfig& cfg, const Image& image);

}  // namespace rdist
