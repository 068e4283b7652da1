#pragma once

// Mini-batch training of the estimator with the split distortion loss.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <vector>

#include "rdist/errors.hpp"
#include "rdist/image.hpp"
#include "rdist/loss.hpp"
#include "rdist/network.hpp"

namespace rdist {

enum class OptimizerKind { Adam, Sgd };
enum class LrSchedule { Constant, Cosine };

struct TrainConfig {
  OptimizerKind optimizer = OptimizerKind::Adam;
  double learning_rate = 1e-3;
  LrSchedule schedule = LrSchedule::Constant;
  int batch_size = 32;
  int epochs = 10;
  std::uint64_t seed = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  RadiusGrid grid = default_grid();

  /// Throws DomainError for a negative or non-finite learning rate, batch < 1,
  /// epochs < 0 or betas outside [0, 1).
  void validate() const;
};

/// Images (already at the network input size) with their labels.
struct Dataset {
  std::vector<Image> images;
  std::vector<CoefficientPair> labels;

  std::size_t size() const { return images.size(); }
  /// Records [begin, end).
  Dataset slice(std::size_t begin, std::size_t end) const;
};

/// Loads every record of a manifest; image paths are relative to the
/// manifest's directory. Images of another size are bilinearly resized.
Dataset load_dataset(const std::filesystem::path& manifest, int input_size);

struct EpochLog {
  int epoch = 0;
  double train_loss = 0.0;
  /// NaN when no validation set was given.
  double val_loss = std::numeric_limits<double>::quiet_NaN();
  double learning_rate = 0.0;
};

struct TrainResult {
  Weights weights;
  std::vector<EpochLog> log;
};

/// Raised when a step produces a non-finite loss or parameter. Carries the
/// weights from before the failing step.
class TrainingError : public NumericError {
 public:
  TrainingError(const std::string& what, Weights last_good, int epoch)
      : NumericError(what), last_good_(std::move(last_good)), epoch_(epoch) {}

  const Weights& last_good() const { return last_good_; }
  int epoch() const { return epoch_; }

 private:
  Weights last_good_;
  int epoch_;
};

using EpochCallback = std::function<void(const EpochLog&)>;

/// Trains from `init` for tc.epochs passes over `train_set`, shuffled each
/// epoch from derive_seed(tc.seed, epoch). A trailing batch of one sample is
/// dropped unless it is the only batch. Deterministic for a fixed seed.
TrainResult train(const Weights& init, const NetworkConfig& cfg, const Dataset& train_set,
                  const Dataset* val_set, const TrainConfig& tc, const EpochCallback& on_epoch = {});

/// Eval-mode predictions for every image, in order.
Predictions predict_all(const Weights& w, const NetworkConfig& cfg, const Dataset& data,
                        int batch_size = 64);

/// Eval-mode mean split-loss total.
double evaluate_loss(const Weights& w, const NetworkConfig& cfg, const Dataset& data,
                     const RadiusGrid& grid, int batch_size = 64);

}  // namespace rdist
