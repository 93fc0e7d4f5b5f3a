#include "sabr/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace sabr {

namespace {

void check_k(std::size_t k, std::size_t n) {
  if (k < 1 || k > n) {
    std::ostringstream msg;
    msg << "k = " << k << " must lie in [1, " << n << "]";
    throw ArgumentError(msg.str());
  }
}

}  // namespace

PopModel build_pop(std::vector<std::size_t> counts) {
  PopModel m;
  m.counts = std::move(counts);
  m.order.resize(m.counts.size());
  std::iota(m.order.begin(), m.order.end(), SongId{0});
  std::stable_sort(m.order.begin(), m.order.end(),
                   [&](SongId a, SongId b) { return m.counts[a] > m.counts[b]; });
  return m;
}

PopModel build_pop(std::span<const IndexedSession> train, std::size_t num_songs) {
  std::vector<std::size_t> counts(num_songs, 0);
  for (const auto& s : train) {
    for (auto id : s.songs) {
      if (id < num_songs) ++counts[id];
    }
  }
  return build_pop(std::move(counts));
}

std::vector<SongId> pop_recommend(const PopModel& model, std::size_t k) {
  check_k(k, model.order.size());
  return {model.order.begin(), model.order.begin() + static_cast<std::ptrdiff_t>(k)};
}

SscfIndex build_sscf(std::span<const IndexedSession> train, std::size_t num_songs) {
  SscfIndex index;
  index.num_songs = num_songs;
  index.song_sessions.resize(num_songs);
  for (const auto& s : train) {
    std::vector<SongId> songs;
    for (auto id : s.songs) {
      if (id < num_songs) songs.push_back(id);
    }
    std::sort(songs.begin(), songs.end());
    songs.erase(std::unique(songs.begin(), songs.end()), songs.end());
    const auto sid = index.session_songs.size();
    for (auto id : songs) index.song_sessions[id].push_back(sid);
    index.session_songs.push_back(std::move(songs));
  }
  return index;
}

std::vector<SongId> sscf_recommend(const SscfIndex& index, std::span<const SongId> recent,
                                   std::size_t k, const PopModel& backfill,
                                   std::size_t n_neighbors) {
  if (recent.empty()) throw ArgumentError("sscf_recommend needs at least one recent song");
  check_k(k, index.num_songs);
  if (backfill.order.size() != index.num_songs) {
    throw DimensionError("SSCF backfill ranking does not cover the song vocabulary");
  }

  std::vector<SongId> active(recent.begin(), recent.end());
  for (auto id : active) {
    if (id >= index.num_songs) {
      throw VocabularyError("song index " + std::to_string(id) + " out of range for SSCF index");
    }
  }
  std::sort(active.begin(), active.end());
  active.erase(std::unique(active.begin(), active.end()), active.end());

  // Overlap counts through the inverted index; only sessions sharing a song
  // can have positive similarity.
  std::vector<std::size_t> overlap(index.session_songs.size(), 0);
  std::vector<std::size_t> touched;
  for (auto id : active) {
    for (auto sid : index.song_sessions[id]) {
      if (overlap[sid]++ == 0) touched.push_back(sid);
    }
  }

  struct Neighbor {
    std::size_t session;
    double similarity;
  };
  std::vector<Neighbor> neighbors;
  neighbors.reserve(touched.size());
  const double active_norm = std::sqrt(static_cast<double>(active.size()));
  for (auto sid : touched) {
    const double norm = active_norm * std::sqrt(static_cast<double>(index.session_songs[sid].size()));
    neighbors.push_back({sid, static_cast<double>(overlap[sid]) / norm});
  }
  std::sort(neighbors.begin(), neighbors.end(), [](const Neighbor& a, const Neighbor& b) {
    if (a.similarity != b.similarity) return a.similarity > b.similarity;
    return a.session < b.session;
  });
  if (neighbors.size() > n_neighbors) neighbors.resize(n_neighbors);

  std::vector<double> score(index.num_songs, 0.0);
  for (const auto& n : neighbors) {
    for (auto id : index.session_songs[n.session]) score[id] += n.similarity;
  }
  std::vector<bool> excluded(index.num_songs, false);
  for (auto id : active) excluded[id] = true;

  std::vector<SongId> candidates;
  for (SongId id = 0; id < index.num_songs; ++id) {
    if (!excluded[id] && score[id] > 0.0) candidates.push_back(id);
  }
  std::sort(candidates.begin(), candidates.end(), [&](SongId a, SongId b) {
    if (score[a] != score[b]) return score[a] > score[b];
    return a < b;
  });
  if (candidates.size() >= k) {
    candidates.resize(k);
    return candidates;
  }

  std::vector<bool> used(index.num_songs, false);
  for (auto id : candidates) used[id] = true;
  for (auto id : backfill.order) {
    if (candidates.size() == k) break;
    if (!used[id] && !excluded[id]) {
      candidates.push_back(id);
      used[id] = true;
    }
  }
  for (auto id : backfill.order) {
    if (candidates.size() == k) break;
    if (!used[id]) {
      candidates.push_back(id);
      used[id] = true;
    }
  }
  return candidates;
}

// --- RNN ---------------------------------------------------------------------

void RnnConfig::validate() const {
  if (num_songs == 0 || embedding_dim == 0 || hidden == 0) {
    throw ArgumentError("RNN baseline sizes must be positive");
  }
}

RnnParams RnnParams::zeros(const RnnConfig& config) {
  config.validate();
  RnnParams p;
  p.config = config;
  p.embedding = Matrix(config.embedding_dim, config.num_songs);
  p.gru = GruParams::zeros(config.embedding_dim, config.hidden);
  p.output = DenseParams::zeros(config.hidden, config.num_songs);
  return p;
}

RnnParams RnnParams::init(const RnnConfig& config, Rng& rng) {
  RnnParams p = zeros(config);
  init_glorot(p.embedding, rng);
  for (Matrix* m : {&p.gru.w_z, &p.gru.w_r, &p.gru.w_h, &p.gru.u_z, &p.gru.u_r, &p.gru.u_h}) {
    init_glorot(*m, rng);
  }
  init_glorot(p.output.w, rng);
  return p;
}

RnnParams zeros_like(const RnnParams& params) { return RnnParams::zeros(params.config); }

RnnForwardResult rnn_forward(const RnnParams& params, std::span<const SongId> prefix) {
  if (prefix.empty()) throw ArgumentError("RNN input prefix is empty");
  const auto window = params.config.history == 0 ? prefix.size()
                                                 : std::min(prefix.size(), params.config.history);
  prefix = prefix.subspan(prefix.size() - window);

  RnnForwardResult out;
  auto& c = out.cache;
  c.prefix.assign(prefix.begin(), prefix.end());
  Vec h(params.config.hidden, 0.0);
  for (auto s : prefix) {
    auto step = gru_cell_forward(embed_song(s, params.embedding), h, params.gru);
    h = std::move(step.h);
    c.steps.push_back(std::move(step.cache));
  }
  auto logits = dense_forward(h, params.output.w, params.output.b, Activation::none);
  c.output = std::move(logits.cache);
  c.log_probs = log_softmax(logits.y);
  out.log_probs = c.log_probs;
  return out;
}

void rnn_backward_into(const RnnParams& params, const RnnForwardCache& c, SongId target,
                       RnnParams& grads) {
  if (target >= params.config.num_songs) {
    throw VocabularyError("target " + std::to_string(target) + " out of range for vocabulary of size " +
                          std::to_string(params.config.num_songs));
  }
  Vec d_logits(c.log_probs.size());
  for (std::size_t i = 0; i < d_logits.size(); ++i) d_logits[i] = std::exp(c.log_probs[i]);
  d_logits[target] -= 1.0;
  Vec dh = dense_backward(params.output.w, c.output, d_logits, grads.output.w, grads.output.b);
  for (std::size_t j = c.steps.size(); j-- > 0;) {
    auto g = gru_cell_backward(params.gru, c.steps[j], dh, grads.gru);
    embed_song_backward(c.prefix[j], g.dx, grads.embedding);
    dh = std::move(g.dh_prev);
  }
}

Real example_gradient(const RnnParams& params, const TrainingExample& ex, Rng&, RnnParams& grads) {
  auto result = rnn_forward(params, ex.prefix);
  rnn_backward_into(params, result.cache, ex.target, grads);
  return loss(result.log_probs, ex.target);
}

std::vector<SongId> rnn_predict_topk(const RnnParams& params, std::span<const SongId> prefix,
                                     std::size_t k) {
  check_k(k, params.config.num_songs);
  const auto h = params.config.history;
  if (h != 0 && prefix.size() > h) prefix = prefix.last(h);
  return top_k_indices(rnn_forward(params, prefix).log_probs, k);
}

}  // namespace sabr
