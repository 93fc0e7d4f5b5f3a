#pragma once

// Small randomized model instances for gradient and invariant checks.

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "sabr/model.hpp"
#include "support/gradcheck.hpp"

namespace sabr::testing {

inline ModelConfig tiny_config(ModelKind kind, std::size_t songs = 6, std::size_t tags = 5) {
  ModelConfig c;
  c.kind = kind;
  c.num_songs = songs;
  c.num_tags = tags;
  c.song_dim = 3;
  c.tag_dim = 2;
  c.song_hidden = 3;
  c.tag_hidden = 2;
  c.bottleneck = 4;
  c.dropout = 0.1;
  return c;
}

// Parameters drawn at a larger scale than the initializer so that every
// nonlinearity operates away from its linear regime; biases are nonzero.
inline ModelParams random_params(const ModelConfig& c, Rng& rng, double scale = 0.7) {
  auto p = ModelParams::zeros(c);
  ModelParams::visit(p, [&](std::string_view, Matrix& m) { m = random_matrix(rng, m.rows(), m.cols(), scale); });
  return p;
}

inline TrainingExample random_example(const ModelConfig& c, Rng& rng, std::size_t len) {
  TrainingExample ex;
  for (std::size_t j = 0; j < len; ++j) {
    ex.prefix.push_back(rng.uniform_index(c.num_songs));
    std::vector<TagId> tags;
    if (c.uses_tags()) {
      const auto n = rng.uniform_index(3);  // 0, 1 or 2 tags
      for (std::size_t t = 0; t < n; ++t) tags.push_back(rng.uniform_index(c.num_tags));
    }
    ex.prefix_tags.push_back(tags);
  }
  ex.target = rng.uniform_index(c.num_songs);
  return ex;
}

}  // namespace sabr::testing

namespace sabr::testing {

template <class P>
std::vector<std::pair<std::string, Matrix*>> named_tensors(P& p) {
  std::vector<std::pair<std::string, Matrix*>> out;
  P::visit(p, [&](std::string_view name, Matrix& m) { out.emplace_back(std::string(name), &m); });
  return out;
}

// Full-model check in train mode: the dropout masks are frozen by re-seeding
// the generator before every forward pass.
inline FdResult model_fd_check(ModelParams& params, const TrainingExample& ex, std::uint64_t dropout_seed) {
  Rng rng(dropout_seed);
  auto grads = zeros_like(params);
  example_gradient(params, ex, rng, grads);
  auto loss_fn = [&] {
    Rng r(dropout_seed);
    return loss(forward(params, ex, Mode::train, r).log_probs, ex.target);
  };
  FdResult result;
  auto ps = named_tensors(params);
  auto gs = named_tensors(grads);
  for (std::size_t t = 0; t < ps.size(); ++t)
    fd_check_span(ps[t].second->data(), gs[t].second->data(), loss_fn, ps[t].first, result);
  return result;
}

}  // namespace sabr::testing
