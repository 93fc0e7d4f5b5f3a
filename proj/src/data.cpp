#include "sabr/data.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <chrono>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <set>
#include <sstream>

#include "sabr/io.hpp"

namespace sabr {

namespace {

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

bool all_digits(std::string_view s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isdigit(c); });
}

template <class Int>
std::optional<Int> parse_int(std::string_view s) {
  Int value{};
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return value;
}

// Reads `width` digits at `pos`, advancing it.
std::optional<int> take_digits(std::string_view s, std::size_t& pos, std::size_t width) {
  if (pos + width > s.size()) return std::nullopt;
  auto part = s.substr(pos, width);
  if (!all_digits(part)) return std::nullopt;
  pos += width;
  return parse_int<int>(part);
}

bool take_char(std::string_view s, std::size_t& pos, std::string_view allowed) {
  if (pos >= s.size() || allowed.find(s[pos]) == std::string_view::npos) return false;
  ++pos;
  return true;
}

std::string lowercase(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

void check_malformed_ratio(std::size_t skipped, std::size_t total, std::string_view source) {
  if (total > 0 && 2 * skipped > total) {
    std::ostringstream msg;
    msg << source << ": " << skipped << " of " << total << " lines are malformed";
    throw FormatError(msg.str());
  }
}

std::string_view strip_cr(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  return line;
}

}  // namespace

std::optional<std::int64_t> parse_timestamp(std::string_view text) {
  text = trim(text);
  if (all_digits(text)) return parse_int<std::int64_t>(text);

  std::size_t pos = 0;
  auto year = take_digits(text, pos, 4);
  if (!year || !take_char(text, pos, "-")) return std::nullopt;
  auto month = take_digits(text, pos, 2);
  if (!month || !take_char(text, pos, "-")) return std::nullopt;
  auto day = take_digits(text, pos, 2);
  if (!day || !take_char(text, pos, "T ")) return std::nullopt;
  auto hour = take_digits(text, pos, 2);
  if (!hour || !take_char(text, pos, ":")) return std::nullopt;
  auto minute = take_digits(text, pos, 2);
  if (!minute || !take_char(text, pos, ":")) return std::nullopt;
  auto second = take_digits(text, pos, 2);
  if (!second) return std::nullopt;
  if (take_char(text, pos, ".")) {
    const auto frac_start = pos;
    while (pos < text.size() && std::isdigit(static_cast<unsigned char>(text[pos]))) ++pos;
    if (pos == frac_start) return std::nullopt;
  }

  std::int64_t offset = 0;
  if (pos < text.size()) {
    if (text[pos] == 'Z') {
      ++pos;
    } else if (text[pos] == '+' || text[pos] == '-') {
      const int sign = text[pos] == '-' ? -1 : 1;
      ++pos;
      auto off_h = take_digits(text, pos, 2);
      if (!off_h) return std::nullopt;
      take_char(text, pos, ":");
      auto off_m = take_digits(text, pos, 2);
      if (!off_m || *off_h > 23 || *off_m > 59) return std::nullopt;
      offset = sign * (*off_h * 3600 + *off_m * 60);
    }
  }
  if (pos != text.size()) return std::nullopt;

  using namespace std::chrono;
  const year_month_day date{std::chrono::year{*year},
                            std::chrono::month{static_cast<unsigned>(*month)},
                            std::chrono::day{static_cast<unsigned>(*day)}};
  if (!date.ok() || *hour > 23 || *minute > 59 || *second > 59) return std::nullopt;
  const auto days_since_epoch = sys_days{date}.time_since_epoch().count();
  return static_cast<std::int64_t>(days_since_epoch) * 86400 + *hour * 3600 + *minute * 60 +
         *second - offset;
}

ParsedLogs parse_logs(std::istream& in, std::string_view source_name) {
  ParsedLogs out;
  std::string raw;
  std::size_t line_no = 0;
  std::size_t nonblank = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto line = strip_cr(raw);
    if (trim(line).empty()) continue;
    ++nonblank;
    const auto fields = split(line, '\t');
    std::optional<std::int64_t> ts;
    bool ok = fields.size() == 4;
    if (ok) {
      ts = parse_timestamp(fields[1]);
      ok = ts && *ts > 0 && !trim(fields[0]).empty() && !trim(fields[3]).empty();
    }
    if (!ok) {
      ++out.skipped;
      out.skipped_lines.push_back(line_no);
      continue;
    }
    out.interactions.push_back({std::string(trim(fields[0])), *ts, std::string(trim(fields[2])),
                                std::string(trim(fields[3]))});
  }
  check_malformed_ratio(out.skipped, nonblank, source_name);
  return out;
}

ParsedLogs parse_logs(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read log file '" + path.string() + "'");
  return parse_logs(in, path.string());
}

std::string to_string(const SongKey& key) { return key.artist + " - " + key.track; }

std::vector<Session> sessionize(std::span<const Interaction> interactions,
                                std::int64_t gap_seconds, std::size_t min_length) {
  std::vector<std::size_t> order(interactions.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto& x = interactions[a];
    const auto& y = interactions[b];
    if (x.user_id != y.user_id) return x.user_id < y.user_id;
    return x.timestamp < y.timestamp;
  });

  std::vector<Session> out;
  Session current;
  auto flush = [&] {
    if (current.plays.size() >= min_length) out.push_back(std::move(current));
    current = Session{};
  };
  for (auto idx : order) {
    const auto& it = interactions[idx];
    const bool new_session = current.plays.empty() || current.user_id != it.user_id ||
                             it.timestamp - current.plays.back().timestamp > gap_seconds;
    if (new_session) {
      flush();
      current.user_id = it.user_id;
    }
    current.plays.push_back({{it.artist, it.track}, it.timestamp});
  }
  flush();
  return out;
}

SessionSplit split_sessions(std::span<const Session> sessions, unsigned train_percent) {
  if (train_percent > 100) throw ArgumentError("train_percent must lie in [0, 100]");
  std::vector<std::string> users;
  std::map<std::string, std::vector<std::size_t>> by_user;
  for (std::size_t i = 0; i < sessions.size(); ++i) {
    auto [it, inserted] = by_user.try_emplace(sessions[i].user_id);
    if (inserted) users.push_back(sessions[i].user_id);
    it->second.push_back(i);
  }

  SessionSplit out;
  for (const auto& user : users) {
    auto& idx = by_user[user];
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
      return sessions[a].start() < sessions[b].start();
    });
    const std::size_t n = idx.size();
    const std::size_t n_train = (train_percent * n + 99) / 100;
    for (std::size_t j = 0; j < n; ++j) {
      (j < n_train ? out.train : out.test).push_back(sessions[idx[j]]);
    }
  }
  return out;
}

TagFile parse_tag_file(std::istream& in, std::string_view source_name) {
  TagFile out;
  std::string raw;
  std::size_t nonblank = 0;
  while (std::getline(in, raw)) {
    const auto line = strip_cr(raw);
    if (trim(line).empty()) continue;
    ++nonblank;
    const auto fields = split(line, '\t');
    if (fields.size() < 2 || fields.size() > 3 || trim(fields[1]).empty()) {
      ++out.skipped;
      continue;
    }
    TagEntry entry{{std::string(trim(fields[0])), std::string(trim(fields[1]))}, {}};
    if (fields.size() == 3) {
      for (auto tag : split(fields[2], ',')) {
        auto normalized = lowercase(trim(tag));
        if (normalized.empty()) continue;
        if (std::find(entry.tags.begin(), entry.tags.end(), normalized) == entry.tags.end()) {
          entry.tags.push_back(std::move(normalized));
        }
      }
    }
    out.entries.push_back(std::move(entry));
  }
  check_malformed_ratio(out.skipped, nonblank, source_name);
  return out;
}

TagFile parse_tag_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read tag file '" + path.string() + "'");
  return parse_tag_file(in, path.string());
}

namespace {

std::map<SongKey, std::vector<std::string>> merge_tag_entries(const TagFile& tags) {
  std::map<SongKey, std::vector<std::string>> merged;
  for (const auto& entry : tags.entries) {
    auto& list = merged[entry.song];
    for (const auto& tag : entry.tags) {
      if (std::find(list.begin(), list.end(), tag) == list.end()) list.push_back(tag);
    }
  }
  return merged;
}

}  // namespace

Vocabularies build_vocabs(std::span<const Session> train, const TagFile& tags) {
  Vocabularies v;
  for (const auto& session : train) {
    for (const auto& play : session.plays) v.songs.add(play.song);
  }
  const auto merged = merge_tag_entries(tags);
  v.tag_table.resize(v.songs.size());
  for (std::size_t s = 0; s < v.songs.size(); ++s) {
    auto it = merged.find(v.songs.key(s));
    if (it == merged.end()) continue;
    for (const auto& tag : it->second) v.tag_table[s].push_back(v.tags.add(tag));
  }
  return v;
}

Vocabularies build_vocabs(std::span<const Session> train, const std::filesystem::path& tag_file) {
  return build_vocabs(train, parse_tag_file(tag_file));
}

IndexedSession index_session(const Session& session, const SongVocab& vocab) {
  IndexedSession out;
  out.user_id = session.user_id;
  out.songs.reserve(session.plays.size());
  out.timestamps.reserve(session.plays.size());
  for (const auto& play : session.plays) {
    out.songs.push_back(vocab.find(play.song).value_or(kUnknownSong));
    out.timestamps.push_back(play.timestamp);
  }
  return out;
}

std::vector<IndexedSession> index_sessions(std::span<const Session> sessions, const SongVocab& vocab) {
  std::vector<IndexedSession> out;
  out.reserve(sessions.size());
  for (const auto& s : sessions) out.push_back(index_session(s, vocab));
  return out;
}

std::vector<SongId> history_before(const IndexedSession& session, std::size_t pos,
                                   std::size_t window) {
  std::vector<SongId> out;
  for (std::size_t j = std::min(pos, session.songs.size()); j-- > 0;) {
    if (session.songs[j] == kUnknownSong) continue;
    out.push_back(session.songs[j]);
    if (window != 0 && out.size() == window) break;
  }
  std::reverse(out.begin(), out.end());
  return out;
}

std::vector<std::vector<TagId>> tags_for(std::span<const SongId> songs, const TagTable& table) {
  std::vector<std::vector<TagId>> out;
  out.reserve(songs.size());
  for (auto s : songs) {
    if (s >= table.size()) {
      throw VocabularyError("song index " + std::to_string(s) + " has no tag table entry");
    }
    out.push_back(table[s]);
  }
  return out;
}

std::vector<TrainingExample> make_examples(const IndexedSession& session, std::size_t m,
                                           const TagTable* table) {
  std::vector<TrainingExample> out;
  for (std::size_t i = 1; i < session.songs.size(); ++i) {
    if (session.songs[i] == kUnknownSong) continue;
    TrainingExample ex;
    ex.prefix = history_before(session, i, m);
    if (ex.prefix.empty()) continue;
    if (table) ex.prefix_tags = tags_for(ex.prefix, *table);
    ex.target = session.songs[i];
    out.push_back(std::move(ex));
  }
  return out;
}

std::vector<TrainingExample> make_examples(std::span<const IndexedSession> sessions,
                                           std::size_t m, const TagTable* table) {
  std::vector<TrainingExample> out;
  for (const auto& s : sessions) {
    auto part = make_examples(s, m, table);
    out.insert(out.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
  }
  return out;
}

DatasetStats compute_stats(std::span<const Interaction> interactions,
                           std::span<const Session> sessions, const TagFile& tags) {
  DatasetStats st;
  st.total_logs = interactions.size();
  std::set<std::string_view> users;
  for (const auto& it : interactions) users.insert(it.user_id);
  st.total_users = users.size();
  st.total_sessions = sessions.size();

  std::set<SongKey> songs;
  std::size_t plays = 0;
  for (const auto& s : sessions) {
    plays += s.plays.size();
    for (const auto& p : s.plays) songs.insert(p.song);
  }
  st.unique_songs = songs.size();

  const auto merged = merge_tag_entries(tags);
  std::set<std::string> tag_set;
  for (const auto& song : songs) {
    auto it = merged.find(song);
    if (it != merged.end()) tag_set.insert(it->second.begin(), it->second.end());
  }
  st.unique_tags = tag_set.size();
  st.avg_songs_per_session =
      sessions.empty() ? 0.0 : static_cast<double>(plays) / static_cast<double>(sessions.size());
  st.avg_logs_per_user = users.empty() ? 0.0
                                       : static_cast<double>(interactions.size()) /
                                             static_cast<double>(users.size());
  return st;
}

std::string format_stats_table(const DatasetStats& st) {
  std::ostringstream out;
  auto row = [&](const char* name, const std::string& value) {
    out << std::left << std::setw(28) << name << value << '\n';
  };
  auto fixed2 = [](double v) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(2) << v;
    return s.str();
  };
  row("Description", "Value");
  row("Total Logs", std::to_string(st.total_logs));
  row("Total Users", std::to_string(st.total_users));
  row("Total Sessions", std::to_string(st.total_sessions));
  row("Total Unique Songs", std::to_string(st.unique_songs));
  row("Total Unique Tags", std::to_string(st.unique_tags));
  row("Average Songs Per Session", fixed2(st.avg_songs_per_session));
  row("Average logs per user", fixed2(st.avg_logs_per_user));
  return out.str();
}

namespace {

std::string shortest(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

}  // namespace

std::string format_stats_kv(const DatasetStats& st) {
  std::ostringstream out;
  out << "total_logs=" << st.total_logs << '\n'
      << "total_users=" << st.total_users << '\n'
      << "total_sessions=" << st.total_sessions << '\n'
      << "unique_songs=" << st.unique_songs << '\n'
      << "unique_tags=" << st.unique_tags << '\n'
      << "avg_songs_per_session=" << shortest(st.avg_songs_per_session) << '\n'
      << "avg_logs_per_user=" << shortest(st.avg_logs_per_user) << '\n';
  return out.str();
}

IngestReport ingest(const std::filesystem::path& logs, const std::filesystem::path& tags,
                    const DatasetOptions& options) {
  auto parsed = parse_logs(logs);
  auto tag_file = parse_tag_file(tags);
  auto sessions = sessionize(parsed.interactions, options.gap_seconds, options.min_session_length);
  auto split = split_sessions(sessions, options.train_percent);

  IngestReport report;
  report.skipped_log_lines = parsed.skipped;
  report.skipped_tag_lines = tag_file.skipped;
  auto& ds = report.dataset;
  ds.options = options;
  ds.vocab = build_vocabs(split.train, tag_file);
  ds.train = index_sessions(split.train, ds.vocab.songs);
  ds.test = index_sessions(split.test, ds.vocab.songs);
  ds.stats = compute_stats(parsed.interactions, sessions, tag_file);
  return report;
}

// --- dataset directory -------------------------------------------------------

namespace {

constexpr const char* kSongsFile = "songs.tsv";
constexpr const char* kTagsFile = "tags.tsv";
constexpr const char* kTagTableFile = "tag_table.tsv";
constexpr const char* kTrainFile = "train_sessions.tsv";
constexpr const char* kTestFile = "test_sessions.tsv";
constexpr const char* kStatsFile = "stats.txt";
constexpr const char* kOptionsFile = "options.txt";

template <class Range, class F>
std::string join(const Range& items, F f, char sep = ',') {
  std::string out;
  bool first = true;
  for (const auto& x : items) {
    if (!first) out += sep;
    out += f(x);
    first = false;
  }
  return out;
}

std::string sessions_text(std::span<const IndexedSession> sessions) {
  std::ostringstream out;
  for (const auto& s : sessions) {
    out << s.user_id << '\t'
        << join(s.songs, [](SongId id) { return id == kUnknownSong ? std::string("-1") : std::to_string(id); })
        << '\t' << join(s.timestamps, [](std::int64_t t) { return std::to_string(t); }) << '\n';
  }
  return out.str();
}

[[noreturn]] void bad_line(const std::filesystem::path& file, std::size_t line, std::string_view why) {
  std::ostringstream msg;
  msg << file.string() << ":" << line << ": " << why;
  throw FormatError(msg.str());
}

std::vector<std::string> read_lines(const std::filesystem::path& file) {
  std::vector<std::string> lines;
  std::istringstream in(read_file(file));
  std::string line;
  while (std::getline(in, line)) lines.push_back(std::string(strip_cr(line)));
  return lines;
}

template <class Int>
Int require_int(std::string_view s, const std::filesystem::path& file, std::size_t line) {
  auto v = parse_int<Int>(trim(s));
  if (!v) bad_line(file, line, "expected an integer, got '" + std::string(s) + "'");
  return *v;
}

std::map<std::string, std::string> read_kv(const std::filesystem::path& file) {
  std::map<std::string, std::string> kv;
  const auto lines = read_lines(file);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (trim(lines[i]).empty()) continue;
    const auto eq = lines[i].find('=');
    if (eq == std::string::npos) bad_line(file, i + 1, "expected key=value");
    kv[std::string(trim(std::string_view(lines[i]).substr(0, eq)))] =
        std::string(trim(std::string_view(lines[i]).substr(eq + 1)));
  }
  return kv;
}

std::vector<IndexedSession> read_sessions(const std::filesystem::path& file, std::size_t vocab_size) {
  std::vector<IndexedSession> out;
  const auto lines = read_lines(file);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const auto fields = split(lines[i], '\t');
    if (fields.size() != 3) bad_line(file, i + 1, "expected 3 tab-separated fields");
    IndexedSession s;
    s.user_id = std::string(fields[0]);
    for (auto tok : split(fields[1], ',')) {
      if (tok == "-1") {
        s.songs.push_back(kUnknownSong);
        continue;
      }
      const auto id = require_int<SongId>(tok, file, i + 1);
      if (id >= vocab_size) bad_line(file, i + 1, "song index out of range");
      s.songs.push_back(id);
    }
    for (auto tok : split(fields[2], ',')) s.timestamps.push_back(require_int<std::int64_t>(tok, file, i + 1));
    if (s.songs.size() != s.timestamps.size()) bad_line(file, i + 1, "song and timestamp counts differ");
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace

void write_dataset(const std::filesystem::path& dir, const Dataset& ds) {
  namespace fs = std::filesystem;
  std::map<std::string, std::string> files;

  std::ostringstream songs;
  for (std::size_t i = 0; i < ds.vocab.songs.size(); ++i) {
    const auto& k = ds.vocab.songs.key(i);
    songs << i << '\t' << k.artist << '\t' << k.track << '\n';
  }
  files[kSongsFile] = songs.str();

  std::ostringstream tags;
  for (std::size_t i = 0; i < ds.vocab.tags.size(); ++i) tags << i << '\t' << ds.vocab.tags.key(i) << '\n';
  files[kTagsFile] = tags.str();

  std::ostringstream table;
  for (std::size_t i = 0; i < ds.vocab.tag_table.size(); ++i) {
    table << i << '\t' << join(ds.vocab.tag_table[i], [](TagId t) { return std::to_string(t); }) << '\n';
  }
  files[kTagTableFile] = table.str();
  files[kTrainFile] = sessions_text(ds.train);
  files[kTestFile] = sessions_text(ds.test);
  files[kStatsFile] = format_stats_kv(ds.stats);

  std::ostringstream opts;
  opts << "gap_seconds=" << ds.options.gap_seconds << '\n'
       << "min_session_length=" << ds.options.min_session_length << '\n'
       << "train_percent=" << ds.options.train_percent << '\n';
  files[kOptionsFile] = opts.str();

  auto staging = dir;
  staging += ".staging";
  std::error_code ec;
  fs::remove_all(staging, ec);
  fs::create_directories(staging, ec);
  if (ec) throw IoError("cannot create directory '" + staging.string() + "'");
  try {
    for (const auto& [name, content] : files) write_file_atomic(staging / name, content);
    if (fs::exists(dir)) fs::remove_all(dir);
    fs::rename(staging, dir);
  } catch (const fs::filesystem_error& e) {
    fs::remove_all(staging, ec);
    throw IoError(std::string("cannot write dataset directory: ") + e.what());
  } catch (...) {
    fs::remove_all(staging, ec);
    throw;
  }
}

Dataset read_dataset(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) {
    throw IoError("dataset directory '" + dir.string() + "' does not exist");
  }
  Dataset ds;

  const auto songs_path = dir / kSongsFile;
  const auto song_lines = read_lines(songs_path);
  for (std::size_t i = 0; i < song_lines.size(); ++i) {
    if (song_lines[i].empty()) continue;
    const auto f = split(song_lines[i], '\t');
    if (f.size() != 3) bad_line(songs_path, i + 1, "expected index, artist, track");
    if (require_int<std::size_t>(f[0], songs_path, i + 1) != ds.vocab.songs.size()) {
      bad_line(songs_path, i + 1, "song indices must be dense and ascending");
    }
    ds.vocab.songs.add({std::string(f[1]), std::string(f[2])});
  }

  const auto tags_path = dir / kTagsFile;
  const auto tag_lines = read_lines(tags_path);
  for (std::size_t i = 0; i < tag_lines.size(); ++i) {
    if (tag_lines[i].empty()) continue;
    const auto f = split(tag_lines[i], '\t');
    if (f.size() != 2) bad_line(tags_path, i + 1, "expected index, tag");
    if (require_int<std::size_t>(f[0], tags_path, i + 1) != ds.vocab.tags.size()) {
      bad_line(tags_path, i + 1, "tag indices must be dense and ascending");
    }
    ds.vocab.tags.add(std::string(f[1]));
  }

  const auto table_path = dir / kTagTableFile;
  const auto table_lines = read_lines(table_path);
  ds.vocab.tag_table.resize(ds.vocab.songs.size());
  for (std::size_t i = 0; i < table_lines.size(); ++i) {
    if (table_lines[i].empty()) continue;
    const auto f = split(table_lines[i], '\t');
    if (f.size() != 2) bad_line(table_path, i + 1, "expected song index, tag list");
    const auto song = require_int<std::size_t>(f[0], table_path, i + 1);
    if (song >= ds.vocab.songs.size()) bad_line(table_path, i + 1, "song index out of range");
    if (f[1].empty()) continue;
    for (auto tok : split(f[1], ',')) {
      const auto tag = require_int<TagId>(tok, table_path, i + 1);
      if (tag >= ds.vocab.tags.size()) bad_line(table_path, i + 1, "tag index out of range");
      ds.vocab.tag_table[song].push_back(tag);
    }
  }

  ds.train = read_sessions(dir / kTrainFile, ds.vocab.songs.size());
  ds.test = read_sessions(dir / kTestFile, ds.vocab.songs.size());

  const auto stats_path = dir / kStatsFile;
  auto stats = read_kv(stats_path);
  auto get = [&](const std::map<std::string, std::string>& kv, const char* key,
                 const std::filesystem::path& file) -> const std::string& {
    auto it = kv.find(key);
    if (it == kv.end()) throw FormatError(file.string() + ": missing key '" + key + "'");
    return it->second;
  };
  auto as_double = [&](const std::string& s, const std::filesystem::path& file) {
    double v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
      throw FormatError(file.string() + ": bad number '" + s + "'");
    }
    return v;
  };
  ds.stats.total_logs = require_int<std::size_t>(get(stats, "total_logs", stats_path), stats_path, 0);
  ds.stats.total_users = require_int<std::size_t>(get(stats, "total_users", stats_path), stats_path, 0);
  ds.stats.total_sessions = require_int<std::size_t>(get(stats, "total_sessions", stats_path), stats_path, 0);
  ds.stats.unique_songs = require_int<std::size_t>(get(stats, "unique_songs", stats_path), stats_path, 0);
  ds.stats.unique_tags = require_int<std::size_t>(get(stats, "unique_tags", stats_path), stats_path, 0);
  ds.stats.avg_songs_per_session = as_double(get(stats, "avg_songs_per_session", stats_path), stats_path);
  ds.stats.avg_logs_per_user = as_double(get(stats, "avg_logs_per_user", stats_path), stats_path);

  const auto options_path = dir / kOptionsFile;
  auto opts = read_kv(options_path);
  ds.options.gap_seconds = require_int<std::int64_t>(get(opts, "gap_seconds", options_path), options_path, 0);
  ds.options.min_session_length =
      require_int<std::size_t>(get(opts, "min_session_length", options_path), options_path, 0);
  ds.options.train_percent = require_int<unsigned>(get(opts, "train_percent", options_path), options_path, 0);
  return ds;
}

}  // namespace sabr
