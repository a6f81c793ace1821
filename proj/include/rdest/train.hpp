#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "rdest/adam.hpp"
#include "rdest/networks.hpp"
#include "rdest/rng.hpp"

namespace rdest {

enum class TargetKind { DistortionMap, BppVector, DistortionVector };

inline TargetKind target_for(NetworkKind kind) {
  switch (kind) {
    case NetworkKind::G: return TargetKind::DistortionMap;
    case NetworkKind::FBits: return TargetKind::BppVector;
    case NetworkKind::FDist: return TargetKind::DistortionVector;
  }
  return TargetKind::DistortionMap;
}

struct TrainConfig {
  std::size_t batch_size = 32;
  double learning_rate = 1e-4;
  double weight_decay = 1e-4;
  int patience = 10;
  int max_epochs = 0;
  std::uint64_t seed = 0;
  TargetKind target = TargetKind::DistortionMap;

  void validate() const {
    if (batch_size < 1) throw ArgumentError("batch size must be >= 1");
    if (patience < 1) throw ArgumentError("patience must be >= 1");
    if (max_epochs < 1) throw ArgumentError("max epochs must be >= 1");
    if (!(learning_rate > 0)) throw ArgumentError("learning rate must be positive");
    if (weight_decay < 0) throw ArgumentError("weight decay must be non-negative");
  }
};

// G: inputs N x 2 x H x W (channel 0 = QP map, channel 1 = luma), targets N x 1 x H x W.
// F: inputs N x 1 x H x W, targets N x K x 1 x 1.
struct Batch {
  std::vector<std::size_t> indices;
  Tensor<float> inputs;
  Tensor<float> targets;
};

class SampleSource {
 public:
  virtual ~SampleSource() = default;
  virtual std::size_t size() const = 0;
  virtual Batch batch(std::span<const std::size_t> indices) const = 0;
};

// Samples already held in memory, one (input, target) pair per entry.
class InMemorySource : public SampleSource {
 public:
  void add(Tensor<float> input, Tensor<float> target) {
    inputs_.push_back(std::move(input));
    targets_.push_back(std::move(target));
  }
  std::size_t size() const override { return inputs_.size(); }
  Batch batch(std::span<const std::size_t> indices) const override {
    Batch b;
    b.indices.assign(indices.begin(), indices.end());
    const Shape is = inputs_.at(indices[0]).shape, ts = targets_.at(indices[0]).shape;
    b.inputs = Tensor<float>(Shape{indices.size(), is.c, is.h, is.w});
    b.targets = Tensor<float>(Shape{indices.size(), ts.c, ts.h, ts.w});
    for (std::size_t n = 0; n < indices.size(); ++n) {
      const auto& in = inputs_.at(indices[n]);
      const auto& tg = targets_.at(indices[n]);
      if (in.shape != is || tg.shape != ts) throw DimensionError("samples in a batch must share one shape");
      std::copy(in.data.begin(), in.data.end(), b.inputs.data.begin() + n * is.sample());
      std::copy(tg.data.begin(), tg.data.end(), b.targets.data.begin() + n * ts.sample());
    }
    return b;
  }

 private:
  std::vector<Tensor<float>> inputs_;
  std::vector<Tensor<float>> targets_;
};

// Sample visiting order for one epoch; a pure function of (seed, epoch).
inline std::vector<std::size_t> epoch_order(std::size_t count, std::uint64_t seed, int epoch) {
  std::vector<std::size_t> order(count);
  for (std::size_t i = 0; i < count; ++i) order[i] = i;
  Rng rng(mix_seed(seed, static_cast<std::uint64_t>(epoch)));
  shuffle(order.begin(), order.end(), rng);
  return order;
}

inline std::vector<std::vector<std::size_t>> split_batches(const std::vector<std::size_t>& order, std::size_t batch_size) {
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t i = 0; i < order.size(); i += batch_size)
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i),
                     order.begin() + static_cast<std::ptrdiff_t>(std::min(order.size(), i + batch_size)));
  return out;
}

// Data loss of one sample (1 x C x H x W input). MSE for G, MAE for F.
inline Var<float> sample_loss(Tape<float>& tape, const NetworkG& net, const Tensor<float>& input,
                              const Tensor<float>& target) {
  if (input.shape.c != 2) throw DimensionError("G samples need a QP-map channel and a luma channel");
  const Shape plane{1, 1, input.shape.h, input.shape.w};
  Tensor<float> qp(plane), image(plane);
  std::copy_n(input.data.begin(), plane.size(), qp.data.begin());
  std::copy_n(input.data.begin() + static_cast<std::ptrdiff_t>(plane.size()), plane.size(), image.data.begin());
  auto m = net.forward(tape, make_var(std::move(image)), make_var(std::move(qp)));
  return loss_mse(tape, m, target);
}

inline Var<float> sample_loss(Tape<float>& tape, const NetworkF& net, const Tensor<float>& input,
                              const Tensor<float>& target) {
  auto p = net.forward(tape, make_var(input));
  return loss_mae(tape, p, target);
}

// Mean per-sample data loss over a whole source, no regularisation.
template <class Net>
double evaluate_loss(const Net& net, const SampleSource& source, std::size_t chunk = 32) {
  if (source.size() == 0) throw ArgumentError("cannot evaluate on an empty sample set");
  std::vector<std::size_t> order(source.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  double total = 0;
  for (const auto& idx : split_batches(order, chunk)) {
    const Batch b = source.batch(idx);
    for (std::size_t n = 0; n < idx.size(); ++n) {
      Tape<float> tape(false);
      total += static_cast<double>(
          sample_loss(tape, net, slice_sample(b.inputs, n), slice_sample(b.targets, n))->data[0]);
    }
  }
  return total / static_cast<double>(source.size());
}

// Data loss plus lambda * sum(theta^2) over trainable parameters.
template <class Net>
double regularized_loss(const Net& net, const SampleSource& source, double weight_decay) {
  return evaluate_loss(net, source) + weight_decay * net.l2_sum();
}

struct EpochRecord {
  int epoch = 0;              // 1-based
  double train_loss = 0;      // mean data loss over the epoch's steps
  double validation_loss = 0;
  bool improved = false;
};

struct TrainResult {
  ModelWeights best;
  int best_epoch = 0;
  double best_validation_loss = std::numeric_limits<double>::infinity();
  std::vector<EpochRecord> history;
  bool early_stopped = false;
};

struct TrainHooks {
  // Replaces the measured validation loss (scripted early-stop tests).
  std::function<double(int epoch, double measured)> validation_override;
  std::function<void(const EpochRecord&, const Network&)> on_epoch_end;
};

// Adam with coupled l2, full epochs over a seeded shuffle, early stop after
// `patience` epochs without a strictly lower validation loss. Returns the
// weights of the best validation epoch and leaves them loaded in `net`.
template <class Net>
TrainResult train(Net& net, const SampleSource& train_set, const SampleSource& val_set, const TrainConfig& cfg,
                  const TrainHooks& hooks = {}) {
  cfg.validate();
  if (train_set.size() == 0 || val_set.size() == 0) throw ArgumentError("training and validation sets must be non-empty");
  if (cfg.target != target_for(net.kind()))
    throw ArgumentError("target kind does not match network " + to_string(net.kind()));

  auto& params = net.parameters();
  auto state = AdamState<float>::for_params(params);
  const AdamConfig adam{cfg.learning_rate, 0.9, 0.999, 1e-8, cfg.weight_decay};

  TrainResult result;
  int stale = 0;
  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    double epoch_loss = 0;
    for (const auto& idx : split_batches(epoch_order(train_set.size(), cfg.seed, epoch), cfg.batch_size)) {
      const Batch b = train_set.batch(idx);
      zero_grads(params);
      const float seed = 1.0F / static_cast<float>(idx.size());
      for (std::size_t n = 0; n < idx.size(); ++n) {
        Tape<float> tape;
        auto loss = sample_loss(tape, net, slice_sample(b.inputs, n), slice_sample(b.targets, n));
        const double value = loss->data[0];
        if (!std::isfinite(value))
          throw TrainingError("non-finite training loss at epoch " + std::to_string(epoch));
        epoch_loss += value;
        tape.backward(loss, seed);
      }
      adam_step(params, state, adam);
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = epoch_loss / static_cast<double>(train_set.size());
    const double measured = evaluate_loss(net, val_set);
    rec.validation_loss = hooks.validation_override ? hooks.validation_override(epoch, measured) : measured;
    if (!std::isfinite(rec.validation_loss))
      throw TrainingError("non-finite validation loss at epoch " + std::to_string(epoch));

    if (rec.validation_loss < result.best_validation_loss) {
      rec.improved = true;
      result.best_validation_loss = rec.validation_loss;
      result.best_epoch = epoch;
      result.best = net.to_weights(cfg.seed, static_cast<std::uint32_t>(epoch));
      stale = 0;
    } else {
      ++stale;
    }
    result.history.push_back(rec);
    if (hooks.on_epoch_end) hooks.on_epoch_end(rec, net);
    if (stale >= cfg.patience) {
      result.early_stopped = true;
      break;
    }
  }
  net.load(result.best);
  return result;
}

}  // namespace rdest
