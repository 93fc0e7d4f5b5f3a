#pragma once

#include <cmath>
#include <concepts>
#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <sstream>
#include <string_view>
#include <vector>

#include "sabr/errors.hpp"
#include "sabr/model.hpp"
#include "sabr/numerics.hpp"

namespace sabr {

// A parameter block the optimizer can drive: it enumerates its tensors, can
// produce a zero gradient of the same shape, and accumulates the gradient of
// one example's loss.
template <class P>
concept Trainable = requires(P& p, const P& cp, const TrainingExample& ex, Rng& rng) {
  { zeros_like(cp) } -> std::same_as<P>;
  { example_gradient(cp, ex, rng, p) } -> std::convertible_to<Real>;
  P::visit(p, [](std::string_view, Matrix&) {});
};

template <class P>
std::vector<Matrix*> tensors_of(P& p) {
  std::vector<Matrix*> out;
  P::visit(p, [&](std::string_view, Matrix& m) { out.push_back(&m); });
  return out;
}

template <class P>
std::vector<const Matrix*> tensors_of(const P& p) {
  std::vector<const Matrix*> out;
  P::visit(p, [&](std::string_view, const Matrix& m) { out.push_back(&m); });
  return out;
}

template <class P>
void scale_tensors(P& p, Real factor) {
  for (Matrix* m : tensors_of(p)) {
    for (auto& x : m->data()) x *= factor;
  }
}

template <class P>
Real global_norm(const P& p) {
  Real sum = 0.0;
  for (const Matrix* m : tensors_of(p)) {
    for (Real x : m->data()) sum += x * x;
  }
  return std::sqrt(sum);
}

template <class P>
struct AdagradState {
  P accumulators;
  Real learning_rate = 0.05;
  Real epsilon = 1e-8;
};

template <Trainable P>
AdagradState<P> make_adagrad(const P& params, Real learning_rate, Real epsilon = 1e-8) {
  if (!(learning_rate >= 0.0)) throw ArgumentError("learning rate must be nonnegative");
  return {zeros_like(params), learning_rate, epsilon};
}

// acc += g^2; theta -= lr * g / (sqrt(acc) + eps). Elements whose gradient is
// exactly zero are skipped, so untouched embedding columns keep both their
// value and their accumulator.
template <Trainable P>
void adagrad_step(P& params, const P& grads, AdagradState<P>& state) {
  auto ps = tensors_of(params);
  auto gs = tensors_of(grads);
  auto as = tensors_of(state.accumulators);
  if (ps.size() != gs.size() || ps.size() != as.size()) {
    throw DimensionError("adagrad_step: parameter, gradient and accumulator sets differ");
  }
  for (std::size_t t = 0; t < ps.size(); ++t) {
    if (ps[t]->rows() != gs[t]->rows() || ps[t]->cols() != gs[t]->cols() ||
        ps[t]->rows() != as[t]->rows() || ps[t]->cols() != as[t]->cols()) {
      throw DimensionError("adagrad_step: tensor " + std::to_string(t) + " has parameter shape " +
                           ps[t]->shape_string() + " but gradient shape " +
                           gs[t]->shape_string());
    }
    auto theta = ps[t]->data();
    auto g = gs[t]->data();
    auto acc = as[t]->data();
    for (std::size_t i = 0; i < theta.size(); ++i) {
      if (g[i] == 0.0) continue;
      acc[i] += g[i] * g[i];
      theta[i] -= state.learning_rate * g[i] / (std::sqrt(acc[i]) + state.epsilon);
    }
  }
}

struct TrainConfig {
  std::size_t batch_size = 32;
  Real learning_rate = 0.05;
  Real epsilon = 1e-8;
  std::size_t epochs = 10;
  std::uint64_t seed = 1;
  std::optional<Real> clip_norm;  // global-norm clipping, off by default

  void validate() const {
    if (batch_size < 1) throw ArgumentError("batch_size must be at least 1");
    if (!(learning_rate >= 0.0)) throw ArgumentError("learning_rate must be nonnegative");
    if (clip_norm && !(*clip_norm > 0.0)) throw ArgumentError("clip_norm must be positive");
  }
};

struct TrainResult {
  std::vector<Real> epoch_losses;  // mean training loss per epoch
  std::size_t steps = 0;
};

using EpochCallback = std::function<void(std::size_t epoch, Real mean_loss)>;

// Minibatch Adagrad over `dataset`. Each epoch shuffles example order with a
// generator seeded from cfg.seed (the same generator then drives dropout), and
// each batch applies one step with the mean of its example gradients.
template <Trainable P>
TrainResult train(P& params, std::span<const TrainingExample> dataset, const TrainConfig& cfg,
                  const EpochCallback& on_epoch = {}) {
  cfg.validate();
  if (dataset.empty()) throw ArgumentError("train called with an empty dataset");

  Rng rng(cfg.seed);
  auto state = make_adagrad(params, cfg.learning_rate, cfg.epsilon);
  std::vector<std::size_t> order(dataset.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  TrainResult result;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffle(order, rng);
    Real epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const auto end = std::min(order.size(), start + cfg.batch_size);
      P grads = zeros_like(params);
      for (std::size_t i = start; i < end; ++i) {
        epoch_loss += example_gradient(params, dataset[order[i]], rng, grads);
      }
      scale_tensors(grads, 1.0 / static_cast<Real>(end - start));
      if (cfg.clip_norm) {
        const Real norm = global_norm(grads);
        if (norm > *cfg.clip_norm) scale_tensors(grads, *cfg.clip_norm / norm);
      }
      adagrad_step(params, grads, state);
      ++result.steps;
    }
    const Real mean = epoch_loss / static_cast<Real>(dataset.size());
    result.epoch_losses.push_back(mean);
    if (on_epoch) on_epoch(epoch, mean);
  }
  return result;
}

}  // namespace sabr
