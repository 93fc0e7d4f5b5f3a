#include "sabr/layers.hpp"

#include <cmath>
#include <sstream>

#include "sabr/errors.hpp"

namespace sabr {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw DimensionError(what);
}

std::string shapes(const char* what, const Matrix& m, std::size_t rows, std::size_t cols) {
  std::ostringstream s;
  s << what << " has shape " << m.shape_string() << ", expected " << rows << "x" << cols;
  return s.str();
}

void check_shape(const char* what, const Matrix& m, std::size_t rows, std::size_t cols) {
  require(m.rows() == rows && m.cols() == cols, shapes(what, m, rows, cols));
}

void check_vocab(std::size_t index, std::size_t size, const char* what) {
  if (index >= size) {
    std::ostringstream msg;
    msg << what << " index " << index << " out of range for vocabulary of size " << size;
    throw VocabularyError(msg.str());
  }
}

Vec affine(const Matrix& w, std::span<const Real> x, const Matrix& b) {
  Vec y = matvec(w, x);
  add_into(y, b.data());
  return y;
}

}  // namespace

void init_glorot(Matrix& w, Rng& rng) {
  const Real limit = std::sqrt(6.0 / static_cast<Real>(w.rows() + w.cols()));
  w = rng_uniform(rng, -limit, limit, w.rows(), w.cols());
}

Vec embed_song(std::size_t song_index, const Matrix& e1) {
  check_vocab(song_index, e1.cols(), "song");
  return e1.col(song_index);
}

void embed_song_backward(std::size_t song_index, std::span<const Real> d_out, Matrix& grad_e1) {
  check_vocab(song_index, grad_e1.cols(), "song");
  require(d_out.size() == grad_e1.rows(), "song embedding gradient length mismatch");
  for (std::size_t r = 0; r < grad_e1.rows(); ++r) grad_e1(r, song_index) += d_out[r];
}

Vec embed_tags_avg(std::span<const std::size_t> tag_indices, const Matrix& e2) {
  Vec out(e2.rows(), 0.0);
  for (auto t : tag_indices) check_vocab(t, e2.cols(), "tag");
  if (tag_indices.empty()) return out;
  for (auto t : tag_indices) {
    for (std::size_t r = 0; r < e2.rows(); ++r) out[r] += e2(r, t);
  }
  const Real inv = 1.0 / static_cast<Real>(tag_indices.size());
  for (auto& x : out) x *= inv;
  return out;
}

void embed_tags_avg_backward(std::span<const std::size_t> tag_indices,
                             std::span<const Real> d_out, Matrix& grad_e2) {
  require(d_out.size() == grad_e2.rows(), "tag embedding gradient length mismatch");
  if (tag_indices.empty()) return;
  const Real inv = 1.0 / static_cast<Real>(tag_indices.size());
  for (auto t : tag_indices) {
    check_vocab(t, grad_e2.cols(), "tag");
    for (std::size_t r = 0; r < grad_e2.rows(); ++r) grad_e2(r, t) += inv * d_out[r];
  }
}

// --- GRU -------------------------------------------------------------------

GruParams GruParams::zeros(std::size_t input_dim, std::size_t hidden_dim) {
  GruParams p;
  p.w_z = p.w_r = p.w_h = Matrix(hidden_dim, input_dim);
  p.u_z = p.u_r = p.u_h = Matrix(hidden_dim, hidden_dim);
  p.b_z = p.b_r = p.b_h = Matrix(hidden_dim, 1);
  return p;
}

GruParams GruParams::glorot(std::size_t input_dim, std::size_t hidden_dim, Rng& rng) {
  GruParams p = zeros(input_dim, hidden_dim);
  for (Matrix* m : {&p.w_z, &p.w_r, &p.w_h, &p.u_z, &p.u_r, &p.u_h}) init_glorot(*m, rng);
  return p;
}

void GruParams::validate() const {
  const auto in = input_dim();
  const auto h = hidden_dim();
  check_shape("GRU w_z", w_z, h, in);
  check_shape("GRU w_r", w_r, h, in);
  check_shape("GRU w_h", w_h, h, in);
  check_shape("GRU u_z", u_z, h, h);
  check_shape("GRU u_r", u_r, h, h);
  check_shape("GRU u_h", u_h, h, h);
  check_shape("GRU b_z", b_z, h, 1);
  check_shape("GRU b_r", b_r, h, 1);
  check_shape("GRU b_h", b_h, h, 1);
}

GruCellOutput gru_cell_forward(std::span<const Real> x, std::span<const Real> h_prev,
                               const GruParams& p) {
  const auto h = p.hidden_dim();
  require(x.size() == p.input_dim(), "GRU input length mismatch");
  require(h_prev.size() == h, "GRU previous state length mismatch");

  GruCellOutput out;
  auto& c = out.cache;
  c.x.assign(x.begin(), x.end());
  c.h_prev.assign(h_prev.begin(), h_prev.end());

  Vec a_z = affine(p.w_z, x, p.b_z);
  add_into(a_z, matvec(p.u_z, h_prev));
  c.z = sigmoid(a_z);

  Vec a_r = affine(p.w_r, x, p.b_r);
  add_into(a_r, matvec(p.u_r, h_prev));
  c.r = sigmoid(a_r);

  c.reset_h.resize(h);
  for (std::size_t i = 0; i < h; ++i) c.reset_h[i] = c.r[i] * h_prev[i];
  Vec a_h = affine(p.w_h, x, p.b_h);
  add_into(a_h, matvec(p.u_h, c.reset_h));
  c.candidate = tanh(a_h);

  out.h.resize(h);
  for (std::size_t i = 0; i < h; ++i) {
    out.h[i] = (1.0 - c.z[i]) * h_prev[i] + c.z[i] * c.candidate[i];
  }
  return out;
}

GruCellGrads gru_cell_backward(const GruParams& p, const GruCellCache& c,
                               std::span<const Real> dh, GruParams& grads) {
  const auto h = p.hidden_dim();
  require(dh.size() == h, "GRU output gradient length mismatch");

  GruCellGrads out;
  out.dh_prev.resize(h);
  Vec da_z(h), da_h(h);
  for (std::size_t i = 0; i < h; ++i) {
    const Real dz = dh[i] * (c.candidate[i] - c.h_prev[i]);
    const Real dcand = dh[i] * c.z[i];
    out.dh_prev[i] = dh[i] * (1.0 - c.z[i]);
    da_z[i] = dz * c.z[i] * (1.0 - c.z[i]);
    da_h[i] = dcand * (1.0 - c.candidate[i] * c.candidate[i]);
  }

  add_outer(grads.w_h, da_h, c.x);
  add_outer(grads.u_h, da_h, c.reset_h);
  add_into(grads.b_h.data(), da_h);

  const Vec d_reset_h = matvec_transposed(p.u_h, da_h);
  Vec da_r(h);
  for (std::size_t i = 0; i < h; ++i) {
    const Real dr = d_reset_h[i] * c.h_prev[i];
    out.dh_prev[i] += d_reset_h[i] * c.r[i];
    da_r[i] = dr * c.r[i] * (1.0 - c.r[i]);
  }

  add_outer(grads.w_r, da_r, c.x);
  add_outer(grads.u_r, da_r, c.h_prev);
  add_into(grads.b_r.data(), da_r);
  add_outer(grads.w_z, da_z, c.x);
  add_outer(grads.u_z, da_z, c.h_prev);
  add_into(grads.b_z.data(), da_z);

  out.dx = matvec_transposed(p.w_z, da_z);
  add_into(out.dx, matvec_transposed(p.w_r, da_r));
  add_into(out.dx, matvec_transposed(p.w_h, da_h));
  add_into(out.dh_prev, matvec_transposed(p.u_z, da_z));
  add_into(out.dh_prev, matvec_transposed(p.u_r, da_r));
  return out;
}

// --- Bi-GRU ----------------------------------------------------------------

BiGruOutput bigru_forward(std::span<const Vec> xs, const GruParams& p_fwd, const GruParams& p_bwd) {
  if (xs.empty()) throw ArgumentError("bigru_forward on an empty sequence");
  if (p_fwd.hidden_dim() != p_bwd.hidden_dim()) {
    throw DimensionError("bigru_forward: forward and backward hidden sizes differ");
  }
  const auto m = xs.size();
  const auto h = p_fwd.hidden_dim();

  BiGruOutput out;
  out.states.assign(m, Vec(2 * h));
  out.cache.fwd.resize(m);
  out.cache.bwd.resize(m);

  Vec state(h, 0.0);
  for (std::size_t j = 0; j < m; ++j) {
    auto step = gru_cell_forward(xs[j], state, p_fwd);
    std::copy(step.h.begin(), step.h.end(), out.states[j].begin());
    state = std::move(step.h);
    out.cache.fwd[j] = std::move(step.cache);
  }
  state.assign(h, 0.0);
  for (std::size_t j = m; j-- > 0;) {
    auto step = gru_cell_forward(xs[j], state, p_bwd);
    std::copy(step.h.begin(), step.h.end(), out.states[j].begin() + static_cast<std::ptrdiff_t>(h));
    state = std::move(step.h);
    out.cache.bwd[j] = std::move(step.cache);
  }
  return out;
}

std::vector<Vec> bigru_backward(const GruParams& p_fwd, const GruParams& p_bwd,
                                const BiGruCache& cache, std::span<const Vec> d_states,
                                GruParams& grads_fwd, GruParams& grads_bwd) {
  const auto m = cache.fwd.size();
  const auto h = p_fwd.hidden_dim();
  require(d_states.size() == m, "bigru_backward: gradient sequence length mismatch");

  std::vector<Vec> dxs(m, Vec(p_fwd.input_dim(), 0.0));
  Vec carry(h, 0.0);
  for (std::size_t j = m; j-- > 0;) {
    require(d_states[j].size() == 2 * h, "bigru_backward: state gradient length mismatch");
    Vec dh(d_states[j].begin(), d_states[j].begin() + static_cast<std::ptrdiff_t>(h));
    add_into(dh, carry);
    auto g = gru_cell_backward(p_fwd, cache.fwd[j], dh, grads_fwd);
    add_into(dxs[j], g.dx);
    carry = std::move(g.dh_prev);
  }
  carry.assign(h, 0.0);
  for (std::size_t j = 0; j < m; ++j) {
    Vec dh(d_states[j].begin() + static_cast<std::ptrdiff_t>(h), d_states[j].end());
    add_into(dh, carry);
    auto g = gru_cell_backward(p_bwd, cache.bwd[j], dh, grads_bwd);
    add_into(dxs[j], g.dx);
    carry = std::move(g.dh_prev);
  }
  return dxs;
}

// --- Attention -------------------------------------------------------------

AttentionParams AttentionParams::zeros(std::size_t state_dim, std::size_t att_dim) {
  return {Matrix(att_dim, state_dim), Matrix(att_dim, 1), Matrix(att_dim, 1)};
}

AttentionParams AttentionParams::glorot(std::size_t state_dim, std::size_t att_dim, Rng& rng) {
  auto p = zeros(state_dim, att_dim);
  init_glorot(p.w, rng);
  init_glorot(p.u, rng);
  return p;
}

void AttentionParams::validate() const {
  check_shape("attention b", b, att_dim(), 1);
  check_shape("attention u", u, att_dim(), 1);
}

AttentionOutput attention_forward(std::span<const Vec> states, const AttentionParams& p) {
  if (states.empty()) throw ArgumentError("attention_forward on an empty sequence");
  const auto m = states.size();
  const auto s = p.state_dim();

  AttentionOutput out;
  auto& c = out.cache;
  c.states.assign(states.begin(), states.end());
  c.hidden.resize(m);
  Vec scores(m);
  for (std::size_t j = 0; j < m; ++j) {
    require(states[j].size() == s, "attention state length mismatch");
    c.hidden[j] = tanh(affine(p.w, states[j], p.b));
    scores[j] = dot(p.u.data(), c.hidden[j]);
  }
  c.weights = softmax(scores);
  out.weights = c.weights;
  out.context.assign(s, 0.0);
  for (std::size_t j = 0; j < m; ++j) add_into(out.context, states[j], c.weights[j]);
  return out;
}

std::vector<Vec> attention_backward(const AttentionParams& p, const AttentionCache& c,
                                    std::span<const Real> d_context, AttentionParams& grads) {
  const auto m = c.states.size();
  require(d_context.size() == p.state_dim(), "attention context gradient length mismatch");

  Vec d_weight(m);
  Real mean = 0.0;
  for (std::size_t j = 0; j < m; ++j) {
    d_weight[j] = dot(d_context, c.states[j]);
    mean += c.weights[j] * d_weight[j];
  }

  std::vector<Vec> d_states(m);
  for (std::size_t j = 0; j < m; ++j) {
    const Real d_score = c.weights[j] * (d_weight[j] - mean);
    d_states[j].assign(d_context.begin(), d_context.end());
    for (auto& x : d_states[j]) x *= c.weights[j];

    add_into(grads.u.data(), c.hidden[j], d_score);
    Vec d_pre(p.att_dim());
    for (std::size_t a = 0; a < d_pre.size(); ++a) {
      d_pre[a] = d_score * p.u.data()[a] * (1.0 - c.hidden[j][a] * c.hidden[j][a]);
    }
    add_outer(grads.w, d_pre, c.states[j]);
    add_into(grads.b.data(), d_pre);
    add_into(d_states[j], matvec_transposed(p.w, d_pre));
  }
  return d_states;
}

// --- Dense -----------------------------------------------------------------

DenseParams DenseParams::zeros(std::size_t in_dim, std::size_t out_dim) {
  return {Matrix(out_dim, in_dim), Matrix(out_dim, 1)};
}

DenseParams DenseParams::glorot(std::size_t in_dim, std::size_t out_dim, Rng& rng) {
  auto p = zeros(in_dim, out_dim);
  init_glorot(p.w, rng);
  return p;
}

DenseOutput dense_forward(std::span<const Real> x, const Matrix& w, const Matrix& b,
                          Activation activation) {
  if (b.rows() != w.rows() || b.cols() != 1) {
    throw DimensionError("dense bias shape " + b.shape_string() + " does not match weight " +
                         w.shape_string());
  }
  DenseOutput out;
  out.y = affine(w, x, b);
  if (activation == Activation::relu) out.y = relu(out.y);
  out.cache = {Vec(x.begin(), x.end()), out.y, activation};
  return out;
}

Vec dense_backward(const Matrix& w, const DenseCache& cache, std::span<const Real> dy,
                   Matrix& grad_w, Matrix& grad_b) {
  require(dy.size() == w.rows(), "dense output gradient length mismatch");
  Vec d_pre(dy.begin(), dy.end());
  if (cache.activation == Activation::relu) {
    for (std::size_t i = 0; i < d_pre.size(); ++i) {
      if (cache.y[i] <= 0.0) d_pre[i] = 0.0;
    }
  }
  add_outer(grad_w, d_pre, cache.x);
  add_into(grad_b.data(), d_pre);
  return matvec_transposed(w, d_pre);
}

// --- Dropout ---------------------------------------------------------------

DropoutOutput dropout_forward(std::span<const Real> x, Real p_discard, Mode mode, Rng& rng) {
  if (!(p_discard >= 0.0 && p_discard < 1.0)) {
    std::ostringstream msg;
    msg << "dropout probability must lie in [0, 1), got " << p_discard;
    throw ArgumentError(msg.str());
  }
  DropoutOutput out{Vec(x.begin(), x.end()), Vec(x.size(), 1.0)};
  if (mode == Mode::eval || p_discard == 0.0) return out;
  const Real keep_scale = 1.0 / (1.0 - p_discard);
  for (std::size_t i = 0; i < x.size(); ++i) {
    out.mask[i] = rng.uniform() < p_discard ? 0.0 : keep_scale;
    out.y[i] = x[i] * out.mask[i];
  }
  return out;
}

Vec dropout_backward(std::span<const Real> mask, std::span<const Real> dy) {
  require(mask.size() == dy.size(), "dropout gradient length mismatch");
  Vec dx(dy.size());
  for (std::size_t i = 0; i < dy.size(); ++i) dx[i] = dy[i] * mask[i];
  return dx;
}

}  // namespace sabr
