#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "sabr/layers.hpp"
#include "sabr/numerics.hpp"

namespace sabr {

using SongId = std::size_t;
using TagId = std::size_t;

struct TrainingExample {
  std::vector<SongId> prefix;                   // oldest first
  std::vector<std::vector<TagId>> prefix_tags;  // parallel to prefix; may be empty for song-only models
  SongId target = 0;

  friend bool operator==(const TrainingExample&, const TrainingExample&) = default;
};

// SABR: song branch only. STABR: song branch plus tag branch.
enum class ModelKind { sabr, stabr };

std::string to_string(ModelKind kind);
ModelKind parse_model_kind(const std::string& name);

struct ModelConfig {
  ModelKind kind = ModelKind::stabr;
  std::size_t num_songs = 0;
  std::size_t num_tags = 0;
  std::size_t song_dim = 50;
  std::size_t tag_dim = 25;
  std::size_t song_hidden = 50;
  std::size_t tag_hidden = 25;
  std::size_t song_att_dim = 0;  // 0 selects song_state_dim() / 2
  std::size_t tag_att_dim = 0;   // 0 selects tag_state_dim() / 2
  std::size_t bottleneck = 50;
  Real dropout = 0.1;
  std::size_t history = 10;  // most recent songs fed to the model

  bool uses_tags() const { return kind == ModelKind::stabr; }
  std::size_t song_state_dim() const { return 2 * song_hidden; }
  std::size_t tag_state_dim() const { return uses_tags() ? 2 * tag_hidden : 0; }
  std::size_t song_attention_dim() const;
  std::size_t tag_attention_dim() const;
  std::size_t context_dim() const { return song_state_dim() + tag_state_dim(); }

  void validate() const;
};

struct ModelParams {
  ModelConfig config;
  Matrix song_embedding;  // song_dim x num_songs
  Matrix tag_embedding;   // tag_dim x num_tags (STABR only)
  GruParams song_fwd, song_bwd;
  GruParams tag_fwd, tag_bwd;  // STABR only
  AttentionParams song_attention;
  AttentionParams tag_attention;  // STABR only
  DenseParams bottleneck;         // bottleneck x context_dim, ReLU
  DenseParams output;             // num_songs x bottleneck

  static ModelParams zeros(const ModelConfig& config);
  static ModelParams init(const ModelConfig& config, Rng& rng);

  // Visits (name, Matrix&) for every learnable tensor in a fixed order. Tag
  // side tensors are skipped for song-only models.
  template <class Self, class F>
  static void visit(Self& self, F&& f) {
    f("song_embedding", self.song_embedding);
    if (self.config.uses_tags()) f("tag_embedding", self.tag_embedding);
    visit_prefixed(self.song_fwd, "song_gru_fwd", f);
    visit_prefixed(self.song_bwd, "song_gru_bwd", f);
    if (self.config.uses_tags()) {
      visit_prefixed(self.tag_fwd, "tag_gru_fwd", f);
      visit_prefixed(self.tag_bwd, "tag_gru_bwd", f);
    }
    visit_prefixed(self.song_attention, "song_attention", f);
    if (self.config.uses_tags()) visit_prefixed(self.tag_attention, "tag_attention", f);
    visit_prefixed(self.bottleneck, "bottleneck", f);
    visit_prefixed(self.output, "output", f);
  }
};

using Gradients = ModelParams;

ModelParams zeros_like(const ModelParams& params);

struct ForwardCache {
  std::vector<SongId> prefix;
  std::vector<std::vector<TagId>> prefix_tags;
  BiGruCache song_gru;
  AttentionCache song_attention;
  BiGruCache tag_gru;
  AttentionCache tag_attention;
  DenseCache bottleneck;
  Vec bottleneck_mask;
  DenseCache output;
  Vec output_mask;
  Vec log_probs;
};

struct ForwardResult {
  Vec log_probs;
  Vec song_weights;
  Vec tag_weights;
  ForwardCache cache;
};

// Validates the example against the vocabularies of `config`.
void validate_example(const ModelConfig& config, std::span<const SongId> prefix,
                      std::span<const std::vector<TagId>> prefix_tags);

ForwardResult forward(const ModelParams& params, std::span<const SongId> prefix,
                      std::span<const std::vector<TagId>> prefix_tags, Mode mode, Rng& rng);
ForwardResult forward(const ModelParams& params, const TrainingExample& ex, Mode mode, Rng& rng);

// Negative log likelihood of `target`.
Real loss(std::span<const Real> log_probs, SongId target);

// Gradient of loss(cache.log_probs, target) for this example only.
Gradients backward(const ModelParams& params, const ForwardCache& cache, SongId target);
// Adds the same gradient into `grads`.
void backward_into(const ModelParams& params, const ForwardCache& cache, SongId target,
                   Gradients& grads);

// Forward in train mode + backward_into; returns the example loss.
Real example_gradient(const ModelParams& params, const TrainingExample& ex, Rng& rng,
                      Gradients& grads);

// Indices of the k most probable songs, ties by ascending index. Uses the last
// config.history songs of the prefix; evaluation mode, no randomness.
std::vector<SongId> predict_topk(const ModelParams& params, std::span<const SongId> prefix,
                                 std::span<const std::vector<TagId>> prefix_tags, std::size_t k);

// Shared ranking rule: descending score, ascending index on ties.
std::vector<SongId> top_k_indices(std::span<const Real> scores, std::size_t k);

}  // namespace sabr
