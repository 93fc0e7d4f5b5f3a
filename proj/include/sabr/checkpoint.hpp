#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <variant>

#include "sabr/baselines.hpp"
#include "sabr/data.hpp"
#include "sabr/model.hpp"

namespace sabr {

inline constexpr std::uint32_t kCheckpointVersion = 1;
inline constexpr std::string_view kCheckpointMagic = "SABRCKPT";

// Byte layout (all integers little-endian, str = u32 length + UTF-8 bytes):
//
//   magic            8 bytes "SABRCKPT"
//   version          u32
//   model kind       u32  0 = sabr, 1 = stabr, 2 = rnn
//   hyperparameters  u32 count, then count x (str key, str value)
//   song vocabulary  u64 count, then count x (str artist, str track)
//   tag vocabulary   u64 count, then count x str
//   tag table        u64 rows, then rows x (u32 n, n x u64 tag index)
//   tensors          u32 count, then count x (str name, u64 rows, u64 cols,
//                                             rows*cols IEEE-754 binary64)
//   checksum         u64 FNV-1a over every preceding byte
struct Checkpoint {
  std::variant<ModelParams, RnnParams> model;
  std::map<std::string, std::string> training;  // free-form run settings (lr, seed, ...)
  SongVocab songs;
  TagVocab tags;
  TagTable tag_table;
};

std::string encode_checkpoint(const Checkpoint& checkpoint);
Checkpoint decode_checkpoint(std::string_view bytes);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace sabr
