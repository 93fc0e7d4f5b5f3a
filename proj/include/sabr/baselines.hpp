#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "sabr/data.hpp"
#include "sabr/layers.hpp"
#include "sabr/model.hpp"

namespace sabr {

// --- POP ---------------------------------------------------------------------

struct PopModel {
  std::vector<std::size_t> counts;  // train plays per song
  std::vector<SongId> order;        // descending count, ascending index on ties
};

PopModel build_pop(std::vector<std::size_t> counts);
PopModel build_pop(std::span<const IndexedSession> train, std::size_t num_songs);

std::vector<SongId> pop_recommend(const PopModel& model, std::size_t k);

// --- Session-based collaborative filtering -------------------------------------

inline constexpr std::size_t kSscfWindow = 5;
inline constexpr std::size_t kSscfNeighbors = 100;

struct SscfIndex {
  std::size_t num_songs = 0;
  std::vector<std::vector<SongId>> session_songs;       // sorted, unique
  std::vector<std::vector<std::size_t>> song_sessions;  // inverted index, ascending session id
};

SscfIndex build_sscf(std::span<const IndexedSession> train, std::size_t num_songs);

// Cosine similarity between the binary incidence vectors of `recent` and each
// train session; the n_neighbors most similar sessions (ties by ascending
// session id) vote for their songs with their similarity. Songs in `recent`
// are excluded. Fewer than k positive-score candidates are backfilled in POP
// order; songs from `recent` come last, only if k demands them.
std::vector<SongId> sscf_recommend(const SscfIndex& index, std::span<const SongId> recent,
                                   std::size_t k, const PopModel& backfill,
                                   std::size_t n_neighbors = kSscfNeighbors);

// --- Plain GRU next-item baseline ---------------------------------------------

struct RnnConfig {
  std::size_t num_songs = 0;
  std::size_t embedding_dim = 50;
  std::size_t hidden = 100;
  std::size_t history = 0;  // 0 feeds the whole in-session history

  void validate() const;
};

struct RnnParams {
  RnnConfig config;
  Matrix embedding;  // embedding_dim x num_songs
  GruParams gru;
  DenseParams output;  // num_songs x hidden

  static RnnParams zeros(const RnnConfig& config);
  static RnnParams init(const RnnConfig& config, Rng& rng);

  template <class Self, class F>
  static void visit(Self& self, F&& f) {
    f("embedding", self.embedding);
    visit_prefixed(self.gru, "gru", f);
    visit_prefixed(self.output, "output", f);
  }
};

RnnParams zeros_like(const RnnParams& params);

struct RnnForwardCache {
  std::vector<SongId> prefix;
  std::vector<GruCellCache> steps;
  DenseCache output;
  Vec log_probs;
};

struct RnnForwardResult {
  Vec log_probs;
  RnnForwardCache cache;
};

RnnForwardResult rnn_forward(const RnnParams& params, std::span<const SongId> prefix);
void rnn_backward_into(const RnnParams& params, const RnnForwardCache& cache, SongId target,
                       RnnParams& grads);
Real example_gradient(const RnnParams& params, const TrainingExample& ex, Rng& rng,
                      RnnParams& grads);
// Uses the last config.history songs of the prefix (all of them when 0).
std::vector<SongId> rnn_predict_topk(const RnnParams& params, std::span<const SongId> prefix,
                                     std::size_t k);

}  // namespace sabr
