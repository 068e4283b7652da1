#include "rdist/train.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "rdist/pano.hpp"
#include "rdist/parallel.hpp"
#include "rdist/random.hpp"

namespace rdist {

void TrainConfig::validate() const {
  if (!std::isfinite(learning_rate) || learning_rate < 0.0) {
    throw DomainError("learning rate must be finite and >= 0");
  }
  if (batch_size < 1) throw DomainError("batch size must be >= 1");
  if (epochs < 0) throw DomainError("epochs must be >= 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw DomainError("Adam betas must lie in [0, 1)");
  }
  if (!(adam_eps > 0.0)) throw DomainError("Adam epsilon must be positive");
}

Dataset Dataset::slice(std::size_t begin, std::size_t end) const {
  end = std::min(end, size());
  begin = std::min(begin, end);
  Dataset d;
  d.images.assign(images.begin() + static_cast<std::ptrdiff_t>(begin),
                  images.begin() + static_cast<std::ptrdiff_t>(end));
  d.labels.assign(labels.begin() + static_cast<std::ptrdiff_t>(begin),
                  labels.begin() + static_cast<std::ptrdiff_t>(end));
  return d;
}

Dataset load_dataset(const std::filesystem::path& manifest, int input_size) {
  const DatasetManifest m = read_manifest(manifest);
  const auto dir = manifest.parent_path();
  Dataset d;
  d.images.resize(m.records.size());
  d.labels.resize(m.records.size());
  parallel_for(0, m.records.size(), [&](std::size_t i) {
    Image img = read_image(dir / m.records[i].file);
    if (img.width() != input_size || img.height() != input_size) {
      img = resize_bilinear(img, input_size, input_size);
    }
    d.images[i] = std::move(img);
    d.labels[i] = {m.records[i].params.k1, m.records[i].params.k2};
  });
  return d;
}

namespace {

Batch gather(const Dataset& data, std::span<const std::size_t> idx, int input_size,
             std::vector<CoefficientPair>& labels) {
  Batch b;
  b.size = static_cast<int>(idx.size());
  b.height = b.width = input_size;
  b.data.reserve(idx.size() * 3 * static_cast<std::size_t>(input_size) * input_size);
  labels.clear();
  for (std::size_t i : idx) {
    const Image& img = data.images[i];
    if (img.width() != input_size || img.height() != input_size) {
      throw ShapeError("dataset image does not match the network input size");
    }
    append_normalized(img, b.data);
    labels.push_back(data.labels[i]);
  }
  return b;
}

bool all_finite(const std::vector<std::vector<float>>& params) {
  for (const auto& p : params) {
    for (float v : p) {
      if (!std::isfinite(v)) return false;
    }
  }
  return true;
}

class Optimizer {
 public:
  Optimizer(const TrainConfig& tc, const std::vector<std::vector<float>>& params,
            std::vector<bool> trainable)
      : tc_(tc), trainable_(std::move(trainable)) {
    m_.resize(params.size());
    v_.resize(params.size());
    for (size_t i = 0; i < params.size(); ++i) {
      m_[i].assign(params[i].size(), 0.0f);
      v_[i].assign(params[i].size(), 0.0f);
    }
  }

  void step(std::vector<std::vector<float>>& params, const std::vector<std::vector<float>>& grads,
            double lr) {
    ++t_;
    if (tc_.optimizer == OptimizerKind::Sgd) {
      for (size_t i = 0; i < params.size(); ++i) {
        if (!trainable_[i]) continue;
        for (size_t j = 0; j < params[i].size(); ++j) {
          params[i][j] -= static_cast<float>(lr) * grads[i][j];
        }
      }
      return;
    }
    const float b1 = static_cast<float>(tc_.beta1);
    const float b2 = static_cast<float>(tc_.beta2);
    const double c1 = 1.0 - std::pow(tc_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(tc_.beta2, static_cast<double>(t_));
    const float step = static_cast<float>(lr * std::sqrt(c2) / c1);
    const float eps = static_cast<float>(tc_.adam_eps * std::sqrt(c2));
    for (size_t i = 0; i < params.size(); ++i) {
      if (!trainable_[i]) continue;
      float* p = params[i].data();
      float* m = m_[i].data();
      float* v = v_[i].data();
      const float* g = grads[i].data();
      for (size_t j = 0; j < params[i].size(); ++j) {
        m[j] = b1 * m[j] + (1.0f - b1) * g[j];
        v[j] = b2 * v[j] + (1.0f - b2) * g[j] * g[j];
        p[j] -= step * m[j] / (std::sqrt(v[j]) + eps);
      }
    }
  }

 private:
  const TrainConfig& tc_;
  std::vector<bool> trainable_;
  std::vector<std::vector<float>> m_, v_;
  long long t_ = 0;
};

double scheduled_lr(const TrainConfig& tc, int epoch) {
  if (tc.schedule == LrSchedule::Constant || tc.epochs <= 1) return tc.learning_rate;
  const double t = static_cast<double>(epoch) / static_cast<double>(tc.epochs - 1);
  return tc.learning_rate * 0.5 * (1.0 + std::cos(std::numbers::pi * t));
}

}  // namespace

TrainResult train(const Weights& init, const NetworkConfig& cfg, const Dataset& train_set,
                  const Dataset* val_set, const TrainConfig& tc, const EpochCallback& on_epoch) {
  tc.validate();
  if (train_set.size() == 0) throw DomainError("training set is empty");
  if (train_set.labels.size() != train_set.images.size()) throw ShapeError("label count mismatch");

  Network<float> net(cfg, init);
  std::vector<bool> trainable;
  for (const auto& t : init.tensors) trainable.push_back(is_trainable(t.name));
  Optimizer opt(tc, net.params(), trainable);

  const std::size_t n = train_set.size();
  const std::size_t bs = static_cast<std::size_t>(tc.batch_size);
  std::vector<std::size_t> order(n);
  std::vector<CoefficientPair> labels;
  std::vector<std::vector<float>> grads;

  TrainResult result;
  for (int epoch = 0; epoch < tc.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    CounterRng rng(derive_seed(tc.seed, static_cast<std::uint64_t>(epoch)));
    for (std::size_t i = n; i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(rng.next_u64() % i);
      std::swap(order[i - 1], order[j]);
    }
    const double lr = scheduled_lr(tc, epoch);

    double loss_sum = 0.0;
    std::size_t seen = 0;
    for (std::size_t start = 0; start < n; start += bs) {
      const std::size_t count = std::min(bs, n - start);
      if (count == 1 && start > 0) break;
      const std::span<const std::size_t> idx(order.data() + start, count);
      const Batch batch = gather(train_set, idx, cfg.input_size, labels);
      const auto before = net.params();
      double loss = 0.0;
      try {
        loss = batch_loss(net, batch, labels, tc.grid, &grads);
      } catch (const NumericError& e) {
        net.params() = before;
        throw TrainingError(std::string("training diverged in epoch ") + std::to_string(epoch) + ": " +
                                e.what(),
                            net.to_weights(), epoch);
      }
      opt.step(net.params(), grads, lr);
      if (!all_finite(net.params())) {
        net.params() = before;
        throw TrainingError("non-finite parameters after an update in epoch " + std::to_string(epoch),
                            net.to_weights(), epoch);
      }
      loss_sum += loss * static_cast<double>(count);
      seen += count;
    }

    EpochLog log;
    log.epoch = epoch;
    log.train_loss = loss_sum / static_cast<double>(seen);
    log.learning_rate = lr;
    if (val_set && val_set->size() > 0) {
      log.val_loss = evaluate_loss(net.to_weights(), cfg, *val_set, tc.grid);
    }
    result.log.push_back(log);
    if (on_epoch) on_epoch(log);
  }
  result.weights = net.to_weights();
  return result;
}

Predictions predict_all(const Weights& w, const NetworkConfig& cfg, const Dataset& data, int batch_size) {
  if (batch_size < 1) throw DomainError("batch size must be >= 1");
  const std::size_t n = data.size();
  const std::size_t bs = static_cast<std::size_t>(batch_size);
  const std::size_t batches = (n + bs - 1) / bs;
  Predictions out;
  out.k1.resize(n);
  out.k2.resize(n);
  validate_weights(w, cfg);
  parallel_for(0, batches, [&](std::size_t b) {
    Network<float> net(cfg, w);
    const std::size_t start = b * bs;
    const std::size_t count = std::min(bs, n - start);
    std::vector<std::size_t> idx(count);
    std::iota(idx.begin(), idx.end(), start);
    std::vector<CoefficientPair> labels;
    const Batch batch = gather(data, idx, cfg.input_size, labels);
    const Predictions p = net.forward(batch, Mode::Eval);
    std::copy(p.k1.begin(), p.k1.end(), out.k1.begin() + static_cast<std::ptrdiff_t>(start));
    std::copy(p.k2.begin(), p.k2.end(), out.k2.begin() + static_cast<std::ptrdiff_t>(start));
  });
  return out;
}

double evaluate_loss(const Weights& w, const NetworkConfig& cfg, const Dataset& data,
                     const RadiusGrid& grid, int batch_size) {
  if (data.size() == 0) throw DomainError("evaluation set is empty");
  const Predictions p = predict_all(w, cfg, data, batch_size);
  double sum = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    sum += split_loss(data.labels[i], {p.k1[i], p.k2[i]}, grid).total;
  }
  return sum / static_cast<double>(data.size());
}

}  // namespace rdist
