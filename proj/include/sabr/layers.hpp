#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include "sabr/numerics.hpp"

namespace sabr {

enum class Mode { train, eval };
enum class Activation { none, relu };

// Uniform in +-sqrt(6 / (rows + cols)).
void init_glorot(Matrix& w, Rng& rng);

// ---------------------------------------------------------------------------
// Embeddings. Tables are stored d x vocab, one column per entry.

Vec embed_song(std::size_t song_index, const Matrix& e1);
// Adds d_out into column song_index of grad_e1.
void embed_song_backward(std::size_t song_index, std::span<const Real> d_out, Matrix& grad_e1);

// Mean of the referenced columns; the zero vector for an empty tag list.
Vec embed_tags_avg(std::span<const std::size_t> tag_indices, const Matrix& e2);
void embed_tags_avg_backward(std::span<const std::size_t> tag_indices,
                             std::span<const Real> d_out, Matrix& grad_e2);

// ---------------------------------------------------------------------------
// GRU
//   z  = sigmoid(W_z x + U_z h_prev + b_z)
//   r  = sigmoid(W_r x + U_r h_prev + b_r)
//   hc = tanh(W_h x + U_h (r * h_prev) + b_h)
//   h  = (1 - z) * h_prev + z * hc

struct GruParams {
  Matrix w_z, w_r, w_h;  // hidden x input
  Matrix u_z, u_r, u_h;  // hidden x hidden
  Matrix b_z, b_r, b_h;  // hidden x 1

  static GruParams zeros(std::size_t input_dim, std::size_t hidden_dim);
  static GruParams glorot(std::size_t input_dim, std::size_t hidden_dim, Rng& rng);

  std::size_t input_dim() const { return w_z.cols(); }
  std::size_t hidden_dim() const { return w_z.rows(); }
  void validate() const;

  template <class Self, class F>
  static void visit(Self& self, F&& f) {
    f("w_z", self.w_z);
    f("w_r", self.w_r);
    f("w_h", self.w_h);
    f("u_z", self.u_z);
    f("u_r", self.u_r);
    f("u_h", self.u_h);
    f("b_z", self.b_z);
    f("b_r", self.b_r);
    f("b_h", self.b_h);
  }
};

struct GruCellCache {
  Vec x, h_prev, z, r, candidate, reset_h;
};

struct GruCellOutput {
  Vec h;
  GruCellCache cache;
};

GruCellOutput gru_cell_forward(std::span<const Real> x, std::span<const Real> h_prev,
                               const GruParams& p);

struct GruCellGrads {
  Vec dx;
  Vec dh_prev;
};

// Accumulates parameter gradients into `grads`.
GruCellGrads gru_cell_backward(const GruParams& p, const GruCellCache& cache,
                               std::span<const Real> dh, GruParams& grads);

// ---------------------------------------------------------------------------
// Bidirectional GRU. states[j] = [forward h_j ; backward h_j], both directions
// starting from a zero state.

struct BiGruCache {
  std::vector<GruCellCache> fwd;  // fwd[j] consumed xs[j]
  std::vector<GruCellCache> bwd;  // bwd[j] consumed xs[j]
};

struct BiGruOutput {
  std::vector<Vec> states;
  BiGruCache cache;
};

BiGruOutput bigru_forward(std::span<const Vec> xs, const GruParams& p_fwd, const GruParams& p_bwd);

// Returns d xs; accumulates into grads_fwd / grads_bwd.
std::vector<Vec> bigru_backward(const GruParams& p_fwd, const GruParams& p_bwd,
                                const BiGruCache& cache, std::span<const Vec> d_states,
                                GruParams& grads_fwd, GruParams& grads_bwd);

// ---------------------------------------------------------------------------
// Additive attention: e_j = u . tanh(W s_j + b), weights = softmax(e),
// context = sum_j weights_j s_j.

struct AttentionParams {
  Matrix w;  // att_dim x state_dim
  Matrix b;  // att_dim x 1
  Matrix u;  // att_dim x 1

  static AttentionParams zeros(std::size_t state_dim, std::size_t att_dim);
  static AttentionParams glorot(std::size_t state_dim, std::size_t att_dim, Rng& rng);

  std::size_t state_dim() const { return w.cols(); }
  std::size_t att_dim() const { return w.rows(); }
  void validate() const;

  template <class Self, class F>
  static void visit(Self& self, F&& f) {
    f("w", self.w);
    f("b", self.b);
    f("u", self.u);
  }
};

struct AttentionCache {
  std::vector<Vec> states;
  std::vector<Vec> hidden;  // tanh(W s_j + b)
  Vec weights;
};

struct AttentionOutput {
  Vec context;
  Vec weights;
  AttentionCache cache;
};

AttentionOutput attention_forward(std::span<const Vec> states, const AttentionParams& p);

std::vector<Vec> attention_backward(const AttentionParams& p, const AttentionCache& cache,
                                    std::span<const Real> d_context, AttentionParams& grads);

// ---------------------------------------------------------------------------
// Dense: y = act(W x + b)

struct DenseParams {
  Matrix w;  // out x in
  Matrix b;  // out x 1

  static DenseParams zeros(std::size_t in_dim, std::size_t out_dim);
  static DenseParams glorot(std::size_t in_dim, std::size_t out_dim, Rng& rng);

  template <class Self, class F>
  static void visit(Self& self, F&& f) {
    f("w", self.w);
    f("b", self.b);
  }
};

struct DenseCache {
  Vec x;
  Vec y;
  Activation activation = Activation::none;
};

struct DenseOutput {
  Vec y;
  DenseCache cache;
};

DenseOutput dense_forward(std::span<const Real> x, const Matrix& w, const Matrix& b,
                          Activation activation);

// Returns dx; accumulates dW, db.
Vec dense_backward(const Matrix& w, const DenseCache& cache, std::span<const Real> dy,
                   Matrix& grad_w, Matrix& grad_b);

// ---------------------------------------------------------------------------
// Inverted dropout: survivors are scaled by 1 / (1 - p_discard) in train mode;
// eval mode is the identity.

struct DropoutOutput {
  Vec y;
  Vec mask;  // per-element multiplier, 0 or 1 / (1 - p)
};

DropoutOutput dropout_forward(std::span<const Real> x, Real p_discard, Mode mode, Rng& rng);
Vec dropout_backward(std::span<const Real> mask, std::span<const Real> dy);

// Visits every (name, Matrix&) of a parameter block with a prefix.
template <class Params, class F>
void visit_prefixed(Params& p, std::string_view prefix, F&& f) {
  std::remove_const_t<Params>::visit(p, [&](std::string_view name, auto& m) {
    std::string full(prefix);
    full += '.';
    full += name;
    f(std::string_view(full), m);
  });
}

}  // namespace sabr
