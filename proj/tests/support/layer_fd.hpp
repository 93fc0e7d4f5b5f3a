#pragma once

// Finite-difference checks of every layer on tiny shapes (widths at most 4,
// sequences at most 4 steps). Each loss is a fixed random projection of the
// layer output, so the upstream gradient is the projection vector itself.

#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "sabr/layers.hpp"
#include "support/gradcheck.hpp"

namespace sabr::testing {

inline double project(std::span<const double> v, std::span<const double> w) {
  double s = 0;
  for (std::size_t i = 0; i < v.size(); ++i) s += v[i] * w[i];
  return s;
}

template <class P>
void fd_check_block(P& params, P& grads, const std::function<double()>& loss, const std::string& label,
                    FdResult& result) {
  std::vector<Matrix*> ps, gs;
  P::visit(params, [&](std::string_view, Matrix& m) { ps.push_back(&m); });
  P::visit(grads, [&](std::string_view, Matrix& m) { gs.push_back(&m); });
  for (std::size_t t = 0; t < ps.size(); ++t) fd_check_span(ps[t]->data(), gs[t]->data(), loss, label, result);
}

template <class P>
P randomized(P p, Rng& rng, double scale = 0.8) {
  P::visit(p, [&](std::string_view, Matrix& m) { m = random_matrix(rng, m.rows(), m.cols(), scale); });
  return p;
}

inline std::size_t tiny_width(Rng& rng) { return 2 + rng.uniform_index(3); }  // 2..4

inline FdResult fd_song_embedding(std::uint64_t seed) {
  Rng rng(seed);
  const std::size_t d = tiny_width(rng), V = 6, song = rng.uniform_index(V);
  auto e1 = random_matrix(rng, d, V);
  const auto w = random_vec(rng, d);
  auto loss = [&] { return project(embed_song(song, e1), w); };
  Matrix g(d, V);
  embed_song_backward(song, w, g);
  FdResult r;
  fd_check_span(e1.data(), g.data(), loss, "song_embedding", r);
  return r;
}

inline FdResult fd_tag_embedding(std::uint64_t seed) {
  Rng rng(seed);
  const std::size_t d = tiny_width(rng), T = 5;
  const std::vector<std::size_t> tags{rng.uniform_index(T), rng.uniform_index(T), rng.uniform_index(T)};
  auto e2 = random_matrix(rng, d, T);
  const auto w = random_vec(rng, d);
  auto loss = [&] { return project(embed_tags_avg(tags, e2), w); };
  Matrix g(d, T);
  embed_tags_avg_backward(tags, w, g);
  FdResult r;
  fd_check_span(e2.data(), g.data(), loss, "tag_embedding", r);
  return r;
}

inline FdResult fd_gru_cell(std::uint64_t seed) {
  Rng rng(seed);
  const std::size_t in = tiny_width(rng), hidden = tiny_width(rng);
  auto p = randomized(GruParams::zeros(in, hidden), rng);
  auto x = random_vec(rng, in);
  auto h = random_vec(rng, hidden);
  const auto w = random_vec(rng, hidden);
  auto loss = [&] { return project(gru_cell_forward(x, h, p).h, w); };
  auto grads = GruParams::zeros(in, hidden);
  const auto g = gru_cell_backward(p, gru_cell_forward(x, h, p).cache, w, grads);
  FdResult r;
  fd_check_span(x, g.dx, loss, "gru.dx", r);
  fd_check_span(h, g.dh_prev, loss, "gru.dh_prev", r);
  fd_check_block(p, grads, loss, "gru.param", r);
  return r;
}

inline FdResult fd_bigru(std::uint64_t seed) {
  Rng rng(seed);
  const std::size_t in = tiny_width(rng), hidden = tiny_width(rng), m = 1 + rng.uniform_index(4);
  auto pf = randomized(GruParams::zeros(in, hidden), rng);
  auto pb = randomized(GruParams::zeros(in, hidden), rng);
  std::vector<Vec> xs(m), ws(m);
  for (auto& x : xs) x = random_vec(rng, in);
  for (auto& w : ws) w = random_vec(rng, 2 * hidden);
  auto loss = [&] {
    const auto states = bigru_forward(xs, pf, pb).states;
    double s = 0;
    for (std::size_t j = 0; j < m; ++j) s += project(states[j], ws[j]);
    return s;
  };
  auto gf = GruParams::zeros(in, hidden), gb = GruParams::zeros(in, hidden);
  const auto dxs = bigru_backward(pf, pb, bigru_forward(xs, pf, pb).cache, ws, gf, gb);
  FdResult r;
  for (std::size_t j = 0; j < m; ++j) fd_check_span(xs[j], dxs[j], loss, "bigru.dx", r);
  fd_check_block(pf, gf, loss, "bigru.fwd", r);
  fd_check_block(pb, gb, loss, "bigru.bwd", r);
  return r;
}

inline FdResult fd_attention(std::uint64_t seed) {
  Rng rng(seed);
  const std::size_t s = tiny_width(rng), a = tiny_width(rng), m = 1 + rng.uniform_index(4);
  auto p = randomized(AttentionParams::zeros(s, a), rng);
  std::vector<Vec> states(m);
  for (auto& st : states) st = random_vec(rng, s);
  const auto w = random_vec(rng, s);
  auto loss = [&] { return project(attention_forward(states, p).context, w); };
  auto grads = AttentionParams::zeros(s, a);
  const auto d_states = attention_backward(p, attention_forward(states, p).cache, w, grads);
  FdResult r;
  for (std::size_t j = 0; j < m; ++j) fd_check_span(states[j], d_states[j], loss, "attention.d_state", r);
  fd_check_block(p, grads, loss, "attention.param", r);
  return r;
}

inline FdResult fd_dense(std::uint64_t seed, Activation act) {
  Rng rng(seed);
  const std::size_t in = tiny_width(rng), out = tiny_width(rng);
  auto w = random_matrix(rng, out, in);
  auto b = random_matrix(rng, out, 1);
  auto x = random_vec(rng, in);
  const auto proj = random_vec(rng, out);
  auto loss = [&] { return project(dense_forward(x, w, b, act).y, proj); };
  Matrix gw(out, in), gb(out, 1);
  const auto dx = dense_backward(w, dense_forward(x, w, b, act).cache, proj, gw, gb);
  FdResult r;
  fd_check_span(x, dx, loss, "dense.dx", r);
  fd_check_span(w.data(), gw.data(), loss, "dense.w", r);
  fd_check_span(b.data(), gb.data(), loss, "dense.b", r);
  return r;
}

inline FdResult fd_dropout(std::uint64_t seed) {
  Rng rng(seed);
  const std::size_t n = tiny_width(rng);
  auto x = random_vec(rng, n);
  const auto w = random_vec(rng, n);
  auto loss = [&] {
    Rng r(seed + 1);
    return project(dropout_forward(x, 0.3, Mode::train, r).y, w);
  };
  Rng r0(seed + 1);
  const auto dx = dropout_backward(dropout_forward(x, 0.3, Mode::train, r0).mask, w);
  FdResult r;
  fd_check_span(x, dx, loss, "dropout.dx", r);
  return r;
}

// Negative log likelihood of a log-softmax output layer.
inline FdResult fd_output_nll(std::uint64_t seed) {
  Rng rng(seed);
  const std::size_t V = 8, target = rng.uniform_index(V);
  auto z = random_vec(rng, V, 2.0);
  auto loss = [&] { return -log_softmax(z)[target]; };
  auto dz = softmax(z);
  dz[target] -= 1.0;
  FdResult r;
  fd_check_span(z, dz, loss, "output.logits", r);
  return r;
}

}  // namespace sabr::testing
