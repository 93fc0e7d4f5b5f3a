#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sabr/errors.hpp"
#include "sabr/model.hpp"

namespace sabr {

struct Interaction {
  std::string user_id;
  std::int64_t timestamp = 0;  // seconds since the Unix epoch
  std::string artist;
  std::string track;

  friend bool operator==(const Interaction&, const Interaction&) = default;
};

struct ParsedLogs {
  std::vector<Interaction> interactions;
  std::size_t skipped = 0;
  std::vector<std::size_t> skipped_lines;  // 1-based
};

// Accepts all-digit epoch seconds, or ISO-8601 `YYYY-MM-DD[T ]HH:MM:SS` with an
// optional fraction and an optional `Z` / `+HH:MM` / `-HHMM` offset (UTC when
// absent).
std::optional<std::int64_t> parse_timestamp(std::string_view text);

// Tab separated `user_id, timestamp, artist, track`. Blank lines are ignored;
// malformed lines are skipped and counted. More than half malformed is a
// FormatError.
ParsedLogs parse_logs(const std::filesystem::path& path);
ParsedLogs parse_logs(std::istream& in, std::string_view source_name);

struct SongKey {
  std::string artist;
  std::string track;

  friend auto operator<=>(const SongKey&, const SongKey&) = default;
  friend bool operator==(const SongKey&, const SongKey&) = default;
};

std::string to_string(const SongKey& key);

struct Play {
  SongKey song;
  std::int64_t timestamp = 0;

  friend bool operator==(const Play&, const Play&) = default;
};

struct Session {
  std::string user_id;
  std::vector<Play> plays;

  std::int64_t start() const { return plays.empty() ? 0 : plays.front().timestamp; }
  friend bool operator==(const Session&, const Session&) = default;
};

inline constexpr std::int64_t kDefaultSessionGap = 1800;
inline constexpr std::size_t kMinSessionLength = 5;

// Per user (users in ascending id order), plays sorted by timestamp with input
// order kept for equal timestamps. A new session starts when the gap to the
// previous play exceeds gap_seconds; sessions shorter than min_length are
// dropped.
std::vector<Session> sessionize(std::span<const Interaction> interactions,
                                std::int64_t gap_seconds = kDefaultSessionGap,
                                std::size_t min_length = kMinSessionLength);

struct SessionSplit {
  std::vector<Session> train;
  std::vector<Session> test;
};

// Per user, sessions ordered by start time; the first ceil(percent/100 * n)
// go to train.
SessionSplit split_sessions(std::span<const Session> sessions, unsigned train_percent = 70);

// Dense bijection between keys and 0..size-1 in insertion order.
template <class Key>
class Vocab {
 public:
  std::size_t add(const Key& key) {
    auto [it, inserted] = index_.emplace(key, keys_.size());
    if (inserted) keys_.push_back(key);
    return it->second;
  }

  std::optional<std::size_t> find(const Key& key) const {
    auto it = index_.find(key);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  const Key& key(std::size_t index) const {
    if (index >= keys_.size()) {
      throw VocabularyError("index " + std::to_string(index) + " out of range for vocabulary of size " +
                            std::to_string(keys_.size()));
    }
    return keys_[index];
  }

  std::size_t size() const { return keys_.size(); }
  const std::vector<Key>& keys() const { return keys_; }

  friend bool operator==(const Vocab& a, const Vocab& b) { return a.keys_ == b.keys_; }

 private:
  std::vector<Key> keys_;
  std::map<Key, std::size_t> index_;
};

using SongVocab = Vocab<SongKey>;
using TagVocab = Vocab<std::string>;
// tag_table[song] lists the song's tag indices (possibly none).
using TagTable = std::vector<std::vector<TagId>>;

struct TagEntry {
  SongKey song;
  std::vector<std::string> tags;  // trimmed, lowercased, duplicates removed
};

struct TagFile {
  std::vector<TagEntry> entries;
  std::size_t skipped = 0;
};

// `artist <TAB> track <TAB> tag1,tag2,...`; the tag field may be empty or absent.
TagFile parse_tag_file(const std::filesystem::path& path);
TagFile parse_tag_file(std::istream& in, std::string_view source_name);

struct Vocabularies {
  SongVocab songs;
  TagVocab tags;
  TagTable tag_table;
};

// Songs in first-appearance order over the train sessions; tags in order of
// first use by those songs. Repeated tag-file entries for a song are merged.
Vocabularies build_vocabs(std::span<const Session> train, const TagFile& tags);
Vocabularies build_vocabs(std::span<const Session> train, const std::filesystem::path& tag_file);

inline constexpr SongId kUnknownSong = std::numeric_limits<SongId>::max();

struct IndexedSession {
  std::string user_id;
  std::vector<SongId> songs;  // kUnknownSong for songs outside the vocabulary
  std::vector<std::int64_t> timestamps;

  friend bool operator==(const IndexedSession&, const IndexedSession&) = default;
};

IndexedSession index_session(const Session& session, const SongVocab& vocab);
std::vector<IndexedSession> index_sessions(std::span<const Session> sessions, const SongVocab& vocab);

// In-vocabulary songs before position `pos`, at most `window` of them, oldest
// first. window == 0 means unlimited.
std::vector<SongId> history_before(const IndexedSession& session, std::size_t pos,
                                   std::size_t window);

std::vector<std::vector<TagId>> tags_for(std::span<const SongId> songs, const TagTable& table);

// One example per position from the second song on, skipping positions whose
// target is out of vocabulary or whose in-vocabulary history is empty. Tag
// lists are filled when `table` is given.
std::vector<TrainingExample> make_examples(const IndexedSession& session, std::size_t m,
                                           const TagTable* table = nullptr);
std::vector<TrainingExample> make_examples(std::span<const IndexedSession> sessions,
                                           std::size_t m, const TagTable* table = nullptr);

struct DatasetStats {
  std::size_t total_logs = 0;
  std::size_t total_users = 0;
  std::size_t total_sessions = 0;
  std::size_t unique_songs = 0;
  std::size_t unique_tags = 0;
  double avg_songs_per_session = 0.0;
  double avg_logs_per_user = 0.0;

  friend bool operator==(const DatasetStats&, const DatasetStats&) = default;
};

// Logs and users count every parsed interaction; sessions, songs and tags
// count what survives sessionization.
DatasetStats compute_stats(std::span<const Interaction> interactions,
                           std::span<const Session> sessions, const TagFile& tags);

std::string format_stats_table(const DatasetStats& stats);
std::string format_stats_kv(const DatasetStats& stats);

// ---------------------------------------------------------------------------
// Ingested dataset directory.

struct DatasetOptions {
  std::int64_t gap_seconds = kDefaultSessionGap;
  std::size_t min_session_length = kMinSessionLength;
  unsigned train_percent = 70;
};

struct Dataset {
  DatasetOptions options;
  Vocabularies vocab;
  std::vector<IndexedSession> train;
  std::vector<IndexedSession> test;
  DatasetStats stats;
};

struct IngestReport {
  Dataset dataset;
  std::size_t skipped_log_lines = 0;
  std::size_t skipped_tag_lines = 0;
};

IngestReport ingest(const std::filesystem::path& logs, const std::filesystem::path& tags,
                    const DatasetOptions& options);

// Builds the whole directory next to `dir` and renames it into place.
void write_dataset(const std::filesystem::path& dir, const Dataset& dataset);
Dataset read_dataset(const std::filesystem::path& dir);

}  // namespace sabr
