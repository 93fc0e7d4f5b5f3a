#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "sabr/baselines.hpp"
#include "sabr/data.hpp"
#include "sabr/model.hpp"

namespace sabr {

inline const std::vector<std::size_t> kDefaultKs = {10, 20, 30, 40, 50};

// Anything that ranks songs given an in-session history (oldest first).
class Recommender {
 public:
  virtual ~Recommender() = default;
  virtual std::string name() const = 0;
  virtual std::size_t catalog_size() const = 0;
  // Most recent songs the recommender looks at; 0 means all of them.
  virtual std::size_t history_window() const = 0;
  virtual std::vector<SongId> recommend(std::span<const SongId> history, std::size_t k) const = 0;
};

class PopRecommender : public Recommender {
 public:
  explicit PopRecommender(PopModel model) : model_(std::move(model)) {}
  std::string name() const override { return "pop"; }
  std::size_t catalog_size() const override { return model_.order.size(); }
  std::size_t history_window() const override { return 0; }
  std::vector<SongId> recommend(std::span<const SongId>, std::size_t k) const override {
    return pop_recommend(model_, k);
  }

 private:
  PopModel model_;
};

class SscfRecommender : public Recommender {
 public:
  SscfRecommender(SscfIndex index, PopModel backfill, std::size_t neighbors = kSscfNeighbors)
      : index_(std::move(index)), backfill_(std::move(backfill)), neighbors_(neighbors) {}
  std::string name() const override { return "sscf"; }
  std::size_t catalog_size() const override { return index_.num_songs; }
  std::size_t history_window() const override { return kSscfWindow; }
  std::vector<SongId> recommend(std::span<const SongId> history, std::size_t k) const override {
    return sscf_recommend(index_, history, k, backfill_, neighbors_);
  }

 private:
  SscfIndex index_;
  PopModel backfill_;
  std::size_t neighbors_;
};

// SABR / STABR. Tag lists for the history come from `tag_table`.
class AttentionRecommender : public Recommender {
 public:
  AttentionRecommender(const ModelParams& params, const TagTable& tag_table)
      : params_(params), tag_table_(tag_table) {}
  std::string name() const override { return to_string(params_.config.kind); }
  std::size_t catalog_size() const override { return params_.config.num_songs; }
  std::size_t history_window() const override { return params_.config.history; }
  std::vector<SongId> recommend(std::span<const SongId> history, std::size_t k) const override;

 private:
  const ModelParams& params_;
  const TagTable& tag_table_;
};

class RnnRecommender : public Recommender {
 public:
  explicit RnnRecommender(const RnnParams& params) : params_(params) {}
  std::string name() const override { return "rnn"; }
  std::size_t catalog_size() const override { return params_.config.num_songs; }
  std::size_t history_window() const override { return params_.config.history; }
  std::vector<SongId> recommend(std::span<const SongId> history, std::size_t k) const override {
    return rnn_predict_topk(params_, history, k);
  }

 private:
  const RnnParams& params_;
};

struct EvalReport {
  std::string model;
  std::vector<std::size_t> ks;
  std::vector<std::size_t> hits;  // parallel to ks
  std::size_t events = 0;
  std::size_t cold_start_targets = 0;  // target outside the train vocabulary
  std::size_t empty_histories = 0;     // no in-vocabulary song before the target

  // Percentage in [0, 100].
  double hit_ratio(std::size_t i) const;
};

// Teacher-forced next-song evaluation: every position from the second song of
// each test session is one event. Cold-start targets and events without any
// in-vocabulary history are counted as misses.
EvalReport evaluate(const Recommender& recommender, std::span<const IndexedSession> test,
                    std::span<const std::size_t> ks);

// Rows are models, columns are HitRatio@k.
std::string format_report_table(std::span<const EvalReport> reports);
std::string format_report_kv(const EvalReport& report);

}  // namespace sabr
