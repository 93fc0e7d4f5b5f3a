#pragma once

// Synthetic corpus where the next song is decided by the tag cluster of the
// current song. 20 songs form 4 clusters of 5, each cluster tagged with its
// own tag. The successor of any song in cluster c is one of the two "hub"
// songs of cluster (c + 1) mod 4. The other three songs of a cluster ("tail"
// songs) occur in training only as the final song of a session, so their
// song embeddings never receive an input gradient; test sessions open with a
// tail song, which leaves the cluster of the first history song observable
// only through its tag.

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "sabr/numerics.hpp"

namespace sabr::testing {

inline constexpr std::size_t kClusters = 4;
inline constexpr std::size_t kClusterSize = 5;
inline constexpr std::size_t kHubs = 2;

inline std::size_t cluster_of(std::size_t song) { return song / kClusterSize; }

inline std::string corpus_track(std::size_t song) { return "track" + std::to_string(song); }

struct CorpusShape {
  std::size_t users = 10;
  std::size_t sessions_per_user = 20;
  std::size_t train_sessions_per_user = 14;  // matches the default 70 % split
};

inline std::size_t next_hub(std::size_t song, Rng& rng) {
  const auto c = (cluster_of(song) + 1) % kClusters;
  return c * kClusterSize + rng.uniform_index(kHubs);
}

inline std::size_t random_tail(std::size_t cluster, Rng& rng) {
  return cluster * kClusterSize + kHubs + rng.uniform_index(kClusterSize - kHubs);
}

// Writes `user \t timestamp \t artist \t track` lines. Sessions of one user
// are two hours apart and plays one minute apart.
inline void write_tag_corpus_logs(std::ostream& out, std::uint64_t seed, const CorpusShape& shape = {}) {
  Rng rng(seed);
  for (std::size_t u = 0; u < shape.users; ++u) {
    std::int64_t t = 1'200'000'000 + static_cast<std::int64_t>(u) * 10'000'000;
    for (std::size_t s = 0; s < shape.sessions_per_user; ++s) {
      std::vector<std::size_t> songs;
      if (s < shape.train_sessions_per_user) {
        const auto len = 5 + rng.uniform_index(2);
        songs.push_back(rng.uniform_index(kClusters) * kClusterSize + rng.uniform_index(kHubs));
        while (songs.size() + 1 < len) songs.push_back(next_hub(songs.back(), rng));
        songs.push_back(random_tail((cluster_of(songs.back()) + 1) % kClusters, rng));
      } else {
        songs.push_back(random_tail(rng.uniform_index(kClusters), rng));
        while (songs.size() < 5) songs.push_back(next_hub(songs.back(), rng));
      }
      for (auto song : songs) {
        out << "user" << u << '\t' << t << "\tsynthetic\t" << corpus_track(song) << '\n';
        t += 60;
      }
      t += 7200;
    }
  }
}

inline void write_tag_corpus_tags(std::ostream& out) {
  for (std::size_t song = 0; song < kClusters * kClusterSize; ++song)
    out << "synthetic\t" << corpus_track(song) << "\tcluster" << cluster_of(song) << '\n';
}

}  // namespace sabr::testing
