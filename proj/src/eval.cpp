#include "sabr/eval.hpp"

#include <algorithm>
#include <charconv>
#include <iomanip>
#include <sstream>

namespace sabr {

std::vector<SongId> AttentionRecommender::recommend(std::span<const SongId> history,
                                                    std::size_t k) const {
  if (!params_.config.uses_tags()) return predict_topk(params_, history, {}, k);
  const auto tags = tags_for(history, tag_table_);
  return predict_topk(params_, history, tags, k);
}

double EvalReport::hit_ratio(std::size_t i) const {
  if (events == 0) return 0.0;
  return 100.0 * static_cast<double>(hits.at(i)) / static_cast<double>(events);
}

EvalReport evaluate(const Recommender& recommender, std::span<const IndexedSession> test,
                    std::span<const std::size_t> ks) {
  if (test.empty()) throw ArgumentError("evaluate called with an empty test set");
  if (ks.empty()) throw ArgumentError("evaluate needs at least one k");
  for (auto k : ks) {
    if (k == 0) throw ArgumentError("HitRatio@0 is undefined");
  }

  EvalReport report;
  report.model = recommender.name();
  report.ks.assign(ks.begin(), ks.end());
  report.hits.assign(ks.size(), 0);
  const auto max_k = std::min(*std::max_element(ks.begin(), ks.end()), recommender.catalog_size());

  for (const auto& session : test) {
    for (std::size_t i = 1; i < session.songs.size(); ++i) {
      ++report.events;
      const auto target = session.songs[i];
      if (target == kUnknownSong) {
        ++report.cold_start_targets;
        continue;
      }
      const auto history = history_before(session, i, recommender.history_window());
      if (history.empty()) {
        ++report.empty_histories;
        continue;
      }
      const auto ranked = recommender.recommend(history, max_k);
      const auto pos = std::find(ranked.begin(), ranked.end(), target) - ranked.begin();
      for (std::size_t j = 0; j < ks.size(); ++j) {
        if (static_cast<std::size_t>(pos) < std::min(ks[j], ranked.size())) ++report.hits[j];
      }
    }
  }
  return report;
}

std::string format_report_table(std::span<const EvalReport> reports) {
  if (reports.empty()) return {};
  std::ostringstream out;
  out << std::left << std::setw(8) << "Model";
  for (auto k : reports.front().ks) {
    out << std::right << std::setw(9) << ("k=" + std::to_string(k));
  }
  out << '\n';
  for (const auto& r : reports) {
    out << std::left << std::setw(8) << r.model;
    for (std::size_t j = 0; j < r.ks.size(); ++j) {
      out << std::right << std::setw(9) << std::fixed << std::setprecision(2) << r.hit_ratio(j);
    }
    out << '\n';
  }
  return out.str();
}

std::string format_report_kv(const EvalReport& r) {
  std::ostringstream out;
  out << "model=" << r.model << '\n'
      << "events=" << r.events << '\n'
      << "cold_start_targets=" << r.cold_start_targets << '\n'
      << "empty_histories=" << r.empty_histories << '\n';
  out << "ks=";
  for (std::size_t j = 0; j < r.ks.size(); ++j) out << (j ? "," : "") << r.ks[j];
  out << '\n';
  for (std::size_t j = 0; j < r.ks.size(); ++j) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, r.hit_ratio(j));
    out << "hits@" << r.ks[j] << '=' << r.hits[j] << '\n'
        << "hit_ratio@" << r.ks[j] << '=' << std::string(buf, ptr) << '\n';
  }
  return out.str();
}

}  // namespace sabr
