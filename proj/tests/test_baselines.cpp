#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "sabr/baselines.hpp"
#include "sabr/errors.hpp"
#include "sabr/optim.hpp"
#include "support/gradcheck.hpp"
#include "support/oracles.hpp"
#include "support/tiny.hpp"

using namespace sabr;
using namespace sabr::testing;

namespace {

IndexedSession sess(std::vector<SongId> songs) {
  return {"u", songs, std::vector<std::int64_t>(songs.size(), 0)};
}


}  // namespace

TEST_CASE("POP examples") {
  auto pop = build_pop({3, 1, 2});
  CHECK(pop_recommend(pop, 2) == std::vector<SongId>{0, 2});
  CHECK(pop_recommend(build_pop({2, 2}), 2) == std::vector<SongId>{0, 1});
  CHECK_THROWS_AS(pop_recommend(pop, 0), ArgumentError);
  CHECK_THROWS_AS(pop_recommend(pop, 4), ArgumentError);

  std::vector<IndexedSession> train{sess({0, 2, 2}), sess({2, 1})};
  auto counted = build_pop(train, 4);
  CHECK(counted.counts == std::vector<std::size_t>{1, 1, 3, 0});
  CHECK(counted.order == std::vector<SongId>{2, 0, 1, 3});
}

TEST_CASE("POP equals a full sort and is prefix-closed") {
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<std::size_t> counts(1 + rng.uniform_index(30));
    for (auto& c : counts) c = rng.uniform_index(6);
    std::vector<SongId> oracle(counts.size());
    std::iota(oracle.begin(), oracle.end(), 0);
    std::sort(oracle.begin(), oracle.end(),
              [&](SongId a, SongId b) { return counts[a] != counts[b] ? counts[a] > counts[b] : a < b; });
    auto pop = build_pop(counts);
    CHECK(pop_recommend(pop, counts.size()) == oracle);
    for (std::size_t k = 1; k < counts.size(); ++k) {
      auto shorter = pop_recommend(pop, k);
      CHECK(std::equal(shorter.begin(), shorter.end(), oracle.begin()));
    }
  }
}

TEST_CASE("SSCF dominance and backfill") {
  std::vector<IndexedSession> train{sess({0, 1, 2, 3, 4, 5}), sess({6, 7}), sess({6, 8}), sess({7, 8})};
  auto index = build_sscf(train, 10);
  auto pop = build_pop(train, 10);
  auto rec = sscf_recommend(index, std::vector<SongId>{0, 1, 2, 3, 4}, 3, pop);
  CHECK(rec[0] == 5);
  CHECK(std::find(rec.begin(), rec.end(), 0) == rec.end());

  // 9 overlaps nothing: every slot comes from POP order.
  auto cold = sscf_recommend(index, std::vector<SongId>{9}, 4, pop);
  CHECK(cold == std::vector<SongId>{6, 7, 8, 0});
  // Songs in the window come last.
  auto all = sscf_recommend(index, std::vector<SongId>{9}, 10, pop);
  CHECK(all.back() == 9);
  CHECK_THROWS_AS(sscf_recommend(index, std::vector<SongId>{}, 3, pop), ArgumentError);
}

TEST_CASE("SSCF equals the exhaustive oracle on a six-session fixture") {
  const std::vector<IndexedSession> train{sess({0, 1, 2}),    sess({1, 2, 3, 4}), sess({4, 5}),
                                          sess({0, 5, 6, 7}), sess({2, 7, 8}),    sess({3, 9})};
  auto index = build_sscf(train, 10);
  auto pop = build_pop(train, 10);
  const std::vector<std::vector<SongId>> windows{{1}, {2, 4}, {0, 7, 9}, {1, 2, 3, 4, 5}, {8}, {6, 6}};
  for (const auto& w : windows) {
    for (std::size_t neighbors : {1u, 2u, 3u, 100u}) {
      for (std::size_t k : {1u, 3u, 10u}) {
        CAPTURE(neighbors);
        CAPTURE(k);
        CHECK(sscf_recommend(index, w, k, pop, neighbors) == exhaustive_sscf(train, 10, w, k, pop, neighbors));
      }
    }
  }
  // Hand check for window {1}: sessions 0 and 1 overlap with cos 1/sqrt(3)
  // and 1/2; song 2 collects both, so it ranks first, then 0, then 3 and 4.
  CHECK(sscf_recommend(index, std::vector<SongId>{1}, 4, pop) == std::vector<SongId>{2, 0, 3, 4});
}

TEST_CASE("SSCF is invariant to train session order") {
  Rng rng(77);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<IndexedSession> train;
    for (int s = 0; s < 15; ++s) {
      std::vector<SongId> songs;
      for (std::size_t i = 0, n = 2 + rng.uniform_index(5); i < n; ++i) songs.push_back(rng.uniform_index(12));
      train.push_back(sess(songs));
    }
    auto shuffled = train;
    shuffle(shuffled, rng);
    std::vector<SongId> recent{rng.uniform_index(12), rng.uniform_index(12), rng.uniform_index(12)};
    auto a = sscf_recommend(build_sscf(train, 12), recent, 8, build_pop(train, 12));
    auto b = sscf_recommend(build_sscf(shuffled, 12), recent, 8, build_pop(shuffled, 12));
    CHECK(a == b);
  }
}

TEST_CASE("GRU baseline gradients agree with finite differences") {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    RnnConfig cfg{7, 3, 4, 0};
    Rng rng(seed);
    auto p = RnnParams::zeros(cfg);
    RnnParams::visit(p, [&](std::string_view, Matrix& m) { m = random_matrix(rng, m.rows(), m.cols(), 0.7); });
    TrainingExample ex{{1, 4, 2, 4}, {}, 5};
    auto g = zeros_like(p);
    example_gradient(p, ex, rng, g);
    auto loss_fn = [&] { return loss(rnn_forward(p, ex.prefix).log_probs, ex.target); };
    FdResult res;
    auto ps = named_tensors(p);
    auto gs = named_tensors(g);
    for (std::size_t t = 0; t < ps.size(); ++t) fd_check_span(ps[t].second->data(), gs[t].second->data(), loss_fn, ps[t].first, res);
    INFO(res.worst);
    CHECK(res.max_rel_error < kFdTolerance);
  }
}

TEST_CASE("GRU baseline memorizes a repeated example") {
  RnnConfig cfg{8, 4, 8, 0};
  Rng rng(4);
  auto p = RnnParams::init(cfg, rng);
  const TrainingExample ex{{1, 3, 5}, {}, 6};
  const std::vector<TrainingExample> data{ex};
  TrainConfig tc;
  tc.learning_rate = 0.1;
  tc.batch_size = 20;
  tc.epochs = 200;
  auto trace = train(p, std::span<const TrainingExample>(data), tc);
  CHECK(loss(rnn_forward(p, ex.prefix).log_probs, ex.target) < 0.05);
  CHECK(trace.epoch_losses.back() < trace.epoch_losses.front());
  auto top = rnn_predict_topk(p, ex.prefix, 1);
  CHECK(top == std::vector<SongId>{6});
}

TEST_CASE("uniform attention with a silent backward pass is a mean-pooled GRU") {
  const std::size_t V = 6, d = 3, H = 3;
  Rng rng(12);
  RnnConfig rcfg{V, d, H, 0};
  auto rnn = RnnParams::zeros(rcfg);
  RnnParams::visit(rnn, [&](std::string_view, Matrix& m) { m = random_matrix(rng, m.rows(), m.cols(), 0.8); });

  ModelConfig cfg;
  cfg.kind = ModelKind::sabr;
  cfg.num_songs = V;
  cfg.song_dim = d;
  cfg.song_hidden = H;
  cfg.bottleneck = 2 * H;
  cfg.dropout = 0.0;
  auto m = ModelParams::zeros(cfg);
  m.song_embedding = rnn.embedding;
  m.song_fwd = rnn.gru;  // backward GRU stays all zero, so its states are zero
  m.song_attention = AttentionParams{random_matrix(rng, cfg.song_attention_dim(), 2 * H), random_matrix(rng, cfg.song_attention_dim(), 1),
                                     Matrix(cfg.song_attention_dim(), 1)};
  // Bottleneck [I; -I] on the forward half passes the signed context through the ReLU.
  for (std::size_t i = 0; i < H; ++i) {
    m.bottleneck.w(i, i) = 1.0;
    m.bottleneck.w(H + i, i) = -1.0;
  }
  for (std::size_t v = 0; v < V; ++v)
    for (std::size_t i = 0; i < H; ++i) {
      m.output.w(v, i) = rnn.output.w(v, i);
      m.output.w(v, H + i) = -rnn.output.w(v, i);
    }
  m.output.b = rnn.output.b;

  const std::vector<SongId> prefix{2, 0, 5};
  Vec h(H, 0.0), mean(H, 0.0);
  for (auto s : prefix) {
    h = gru_cell_forward(rnn.embedding.col(s), h, rnn.gru).h;
    for (std::size_t i = 0; i < H; ++i) mean[i] += h[i] / 3.0;
  }
  Vec logits(V);
  for (std::size_t v = 0; v < V; ++v) {
    logits[v] = rnn.output.b(v, 0);
    for (std::size_t i = 0; i < H; ++i) logits[v] += rnn.output.w(v, i) * mean[i];
  }
  const auto pooled = log_softmax(logits);
  auto out = forward(m, prefix, {}, Mode::eval, rng);
  for (double w : out.song_weights) CHECK(w == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
  for (std::size_t v = 0; v < V; ++v) CHECK(out.log_probs[v] == doctest::Approx(pooled[v]).epsilon(1e-12));

  const auto last = rnn_forward(rnn, prefix).log_probs;
  double diff = 0;
  for (std::size_t v = 0; v < V; ++v) diff = std::max(diff, std::abs(last[v] - out.log_probs[v]));
  CHECK(diff > 1e-3);
}
