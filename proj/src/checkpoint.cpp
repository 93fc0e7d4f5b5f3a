#include "sabr/checkpoint.hpp"

#include <bit>
#include <charconv>
#include <sstream>
#include <vector>

#include "sabr/io.hpp"

namespace sabr {

namespace {

constexpr std::uint32_t kKindSabr = 0;
constexpr std::uint32_t kKindStabr = 1;
constexpr std::uint32_t kKindRnn = 2;

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

class Writer {
 public:
  void u32(std::uint32_t v) { put(v, 4); }
  void u64(std::uint64_t v) { put(v, 8); }
  void f64(double v) { put(std::bit_cast<std::uint64_t>(v), 8); }
  void str(std::string_view s) {
    u32(static_cast<std::uint32_t>(s.size()));
    out_.append(s);
  }
  void raw(std::string_view s) { out_.append(s); }
  std::string take() { return std::move(out_); }
  const std::string& bytes() const { return out_; }

 private:
  void put(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  std::string out_;
};

class Reader {
 public:
  explicit Reader(std::string_view in) : in_(in) {}

  std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
  std::uint64_t u64() { return get(8); }
  double f64() { return std::bit_cast<double>(get(8)); }
  std::string str() {
    const auto n = u32();
    need(n);
    std::string s(in_.substr(pos_, n));
    pos_ += n;
    return s;
  }
  std::string_view raw(std::size_t n) {
    need(n);
    auto s = in_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  // Guards counts read from the file before allocating for them.
  void need(std::uint64_t n) const {
    if (n > in_.size() - pos_) throw CheckpointError("checkpoint is truncated");
  }
  std::size_t pos() const { return pos_; }

 private:
  std::uint64_t get(int n) {
    need(static_cast<std::uint64_t>(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in_[pos_ + i])) << (8 * i);
    }
    pos_ += static_cast<std::size_t>(n);
    return v;
  }
  std::string_view in_;
  std::size_t pos_ = 0;
};

std::string real_text(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

using Hyper = std::map<std::string, std::string>;

Hyper model_hyper(const ModelConfig& c) {
  return {{"num_songs", std::to_string(c.num_songs)},
          {"num_tags", std::to_string(c.num_tags)},
          {"song_dim", std::to_string(c.song_dim)},
          {"tag_dim", std::to_string(c.tag_dim)},
          {"song_hidden", std::to_string(c.song_hidden)},
          {"tag_hidden", std::to_string(c.tag_hidden)},
          {"song_att_dim", std::to_string(c.song_att_dim)},
          {"tag_att_dim", std::to_string(c.tag_att_dim)},
          {"bottleneck", std::to_string(c.bottleneck)},
          {"dropout", real_text(c.dropout)},
          {"history", std::to_string(c.history)}};
}

Hyper rnn_hyper(const RnnConfig& c) {
  return {{"num_songs", std::to_string(c.num_songs)},
          {"embedding_dim", std::to_string(c.embedding_dim)},
          {"hidden", std::to_string(c.hidden)},
          {"history", std::to_string(c.history)}};
}

const std::string& hyper_value(const Hyper& h, const std::string& key) {
  auto it = h.find(key);
  if (it == h.end()) throw CheckpointError("checkpoint lacks hyperparameter '" + key + "'");
  return it->second;
}

std::size_t hyper_size(const Hyper& h, const std::string& key) {
  const auto& s = hyper_value(h, key);
  std::size_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw CheckpointError("hyperparameter '" + key + "' is not an integer: '" + s + "'");
  }
  return v;
}

double hyper_real(const Hyper& h, const std::string& key) {
  const auto& s = hyper_value(h, key);
  double v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw CheckpointError("hyperparameter '" + key + "' is not a number: '" + s + "'");
  }
  return v;
}

template <class P>
void write_tensors(Writer& w, const P& params) {
  std::vector<std::pair<std::string, const Matrix*>> tensors;
  P::visit(params, [&](std::string_view name, const Matrix& m) { tensors.emplace_back(std::string(name), &m); });
  w.u32(static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, m] : tensors) {
    w.str(name);
    w.u64(m->rows());
    w.u64(m->cols());
    for (double x : m->data()) w.f64(x);
  }
}

template <class P>
void read_tensors(Reader& r, P& params) {
  std::vector<std::pair<std::string, Matrix*>> tensors;
  P::visit(params, [&](std::string_view name, Matrix& m) { tensors.emplace_back(std::string(name), &m); });
  const auto count = r.u32();
  if (count != tensors.size()) {
    throw CheckpointError("checkpoint holds " + std::to_string(count) + " tensors, model expects " +
                          std::to_string(tensors.size()));
  }
  for (auto& [name, m] : tensors) {
    const auto stored = r.str();
    if (stored != name) throw CheckpointError("expected tensor '" + name + "', found '" + stored + "'");
    const auto rows = r.u64();
    const auto cols = r.u64();
    if (rows != m->rows() || cols != m->cols()) {
      std::ostringstream msg;
      msg << "tensor '" << name << "' has shape " << rows << "x" << cols << ", model expects "
          << m->shape_string();
      throw CheckpointError(msg.str());
    }
    r.need(rows * cols * 8);
    for (auto& x : m->data()) x = r.f64();
  }
}

}  // namespace

std::string encode_checkpoint(const Checkpoint& ck) {
  Writer w;
  w.raw(kCheckpointMagic);
  w.u32(kCheckpointVersion);

  Hyper hyper;
  std::uint32_t kind = kKindRnn;
  if (const auto* m = std::get_if<ModelParams>(&ck.model)) {
    kind = m->config.kind == ModelKind::sabr ? kKindSabr : kKindStabr;
    hyper = model_hyper(m->config);
  } else {
    hyper = rnn_hyper(std::get<RnnParams>(ck.model).config);
  }
  for (const auto& [k, v] : ck.training) hyper.emplace("train." + k, v);
  w.u32(kind);
  w.u32(static_cast<std::uint32_t>(hyper.size()));
  for (const auto& [k, v] : hyper) {
    w.str(k);
    w.str(v);
  }

  w.u64(ck.songs.size());
  for (const auto& key : ck.songs.keys()) {
    w.str(key.artist);
    w.str(key.track);
  }
  w.u64(ck.tags.size());
  for (const auto& tag : ck.tags.keys()) w.str(tag);
  w.u64(ck.tag_table.size());
  for (const auto& row : ck.tag_table) {
    w.u32(static_cast<std::uint32_t>(row.size()));
    for (auto t : row) w.u64(t);
  }

  std::visit([&](const auto& params) { write_tensors(w, params); }, ck.model);
  w.u64(fnv1a(w.bytes()));
  return w.take();
}

Checkpoint decode_checkpoint(std::string_view bytes) {
  if (bytes.size() < kCheckpointMagic.size() + 4 + 8 ||
      bytes.substr(0, kCheckpointMagic.size()) != kCheckpointMagic) {
    throw CheckpointError("not a checkpoint (bad magic)");
  }
  Reader r(bytes);
  r.raw(kCheckpointMagic.size());
  const auto version = r.u32();
  if (version > kCheckpointVersion) {
    throw CheckpointError("checkpoint format version " + std::to_string(version) +
                          " is newer than supported version " + std::to_string(kCheckpointVersion));
  }
  if (version == 0) throw CheckpointError("checkpoint format version 0 is invalid");

  const auto body = bytes.substr(0, bytes.size() - 8);
  Reader tail(bytes.substr(bytes.size() - 8));
  if (tail.u64() != fnv1a(body)) throw CheckpointError("checkpoint checksum mismatch");

  const auto kind = r.u32();
  Hyper hyper;
  const auto n_hyper = r.u32();
  for (std::uint32_t i = 0; i < n_hyper; ++i) {
    auto k = r.str();
    hyper[k] = r.str();
  }

  Checkpoint ck;
  for (const auto& [k, v] : hyper) {
    if (k.rfind("train.", 0) == 0) ck.training[k.substr(6)] = v;
  }

  const auto n_songs = r.u64();
  r.need(n_songs * 8);
  for (std::uint64_t i = 0; i < n_songs; ++i) {
    SongKey key;
    key.artist = r.str();
    key.track = r.str();
    ck.songs.add(key);
  }
  const auto n_tags = r.u64();
  r.need(n_tags * 4);
  for (std::uint64_t i = 0; i < n_tags; ++i) ck.tags.add(r.str());
  if (ck.songs.size() != n_songs || ck.tags.size() != n_tags) {
    throw CheckpointError("checkpoint vocabulary contains duplicate keys");
  }
  const auto n_rows = r.u64();
  r.need(n_rows * 4);
  ck.tag_table.resize(n_rows);
  for (auto& row : ck.tag_table) {
    const auto n = r.u32();
    r.need(static_cast<std::uint64_t>(n) * 8);
    for (std::uint32_t j = 0; j < n; ++j) {
      const auto t = r.u64();
      if (t >= n_tags) throw CheckpointError("tag table references unknown tag index");
      row.push_back(t);
    }
  }

  try {
    if (kind == kKindSabr || kind == kKindStabr) {
      ModelConfig c;
      c.kind = kind == kKindSabr ? ModelKind::sabr : ModelKind::stabr;
      c.num_songs = hyper_size(hyper, "num_songs");
      c.num_tags = hyper_size(hyper, "num_tags");
      c.song_dim = hyper_size(hyper, "song_dim");
      c.tag_dim = hyper_size(hyper, "tag_dim");
      c.song_hidden = hyper_size(hyper, "song_hidden");
      c.tag_hidden = hyper_size(hyper, "tag_hidden");
      c.song_att_dim = hyper_size(hyper, "song_att_dim");
      c.tag_att_dim = hyper_size(hyper, "tag_att_dim");
      c.bottleneck = hyper_size(hyper, "bottleneck");
      c.dropout = hyper_real(hyper, "dropout");
      c.history = hyper_size(hyper, "history");
      auto params = ModelParams::zeros(c);
      read_tensors(r, params);
      ck.model = std::move(params);
    } else if (kind == kKindRnn) {
      RnnConfig c;
      c.num_songs = hyper_size(hyper, "num_songs");
      c.embedding_dim = hyper_size(hyper, "embedding_dim");
      c.hidden = hyper_size(hyper, "hidden");
      c.history = hyper_size(hyper, "history");
      auto params = RnnParams::zeros(c);
      read_tensors(r, params);
      ck.model = std::move(params);
    } else {
      throw CheckpointError("unknown model kind " + std::to_string(kind));
    }
  } catch (const ArgumentError& e) {
    throw CheckpointError(std::string("invalid model configuration in checkpoint: ") + e.what());
  }

  if (r.pos() != body.size()) throw CheckpointError("trailing bytes after checkpoint tensors");
  const auto vocab_size = std::visit([](const auto& p) { return p.config.num_songs; }, ck.model);
  if (vocab_size != ck.songs.size()) {
    throw CheckpointError("model output size does not match the stored song vocabulary");
  }
  return ck;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  write_file_atomic(path, encode_checkpoint(checkpoint));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::string bytes;
  try {
    bytes = read_file(path);
  } catch (const IoError& e) {
    throw CheckpointError(e.what());
  }
  return decode_checkpoint(bytes);
}

}  // namespace sabr
