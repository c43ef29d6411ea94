#pragma once

#include <filesystem>
#include <string>

#include "rfop/model.hpp"

namespace rfop {

/// Context stored alongside the weights.
struct CheckpointMeta {
  std::string train_lang;
  Index epoch = 0;
  double val_eer = 0.0;
  std::uint64_t seed = 0;
};

struct Checkpoint {
  RFOPParams params;
  CheckpointMeta meta;
};

/// Binary layout: the magic "RFOP1", a little-endian uint64 byte length, a
/// UTF-8 JSON manifest naming each tensor with its shape and byte offset, then
/// every tensor's values as contiguous little-endian IEEE-754 doubles.
std::string encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(const std::string& bytes);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace rfop
