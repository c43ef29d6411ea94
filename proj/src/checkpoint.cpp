#include "rfop/checkpoint.hpp"

#include <fstream>
#include <json.hpp>

#include "rfop/bytes.hpp"

namespace rfop {

namespace bytes {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::string contents((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw DataError("failed reading " + path.string());
  return contents;
}

void write_file(const std::filesystem::path& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) throw DataError("failed writing " + path.string());
}

}  // namespace bytes

namespace {

constexpr char kMagic[] = "RFOP1";
constexpr std::size_t kMagicLen = 5;

}  // namespace

std::string encode_checkpoint(const Checkpoint& ckpt) {
  using nlohmann::json;
  const ModelConfig cfg = ckpt.params.shape_config();
  json manifest;
  manifest["format"] = "RFOP1";
  manifest["meta"] = {{"train_lang", ckpt.meta.train_lang},
                      {"epoch", ckpt.meta.epoch},
                      {"val_eer", ckpt.meta.val_eer},
                      {"seed", ckpt.meta.seed}};
  manifest["model"] = {{"face_dim", cfg.face_dim},
                       {"voice_dim", cfg.voice_dim},
                       {"latent_dim", cfg.latent_dim},
                       {"num_identities", cfg.num_identities},
                       {"conv_kernel", cfg.conv_kernel}};
  std::string blob;
  json entries = json::array();
  for (const auto& [name, tensor] : ckpt.params.named()) {
    entries.push_back({{"name", name}, {"shape", tensor->shape}, {"offset", blob.size()}});
    for (Index i = 0; i < tensor->size(); ++i) bytes::put_le<double>(blob, tensor->data[i]);
  }
  manifest["params"] = entries;

  const std::string text = manifest.dump();
  std::string out(kMagic, kMagicLen);
  bytes::put_le<std::uint64_t>(out, text.size());
  out += text;
  out += blob;
  return out;
}

Checkpoint decode_checkpoint(const std::string& data) {
  using nlohmann::json;
  if (data.size() < kMagicLen + 8 || data.compare(0, kMagicLen, kMagic) != 0) {
    throw DataError("checkpoint: missing RFOP1 magic");
  }
  const auto manifest_len = bytes::get_le<std::uint64_t>(data.data() + kMagicLen);
  const std::size_t blob_start = kMagicLen + 8 + manifest_len;
  if (manifest_len > data.size() || blob_start > data.size()) {
    throw DataError("checkpoint: manifest length exceeds file size");
  }
  json manifest;
  try {
    manifest = json::parse(data.substr(kMagicLen + 8, manifest_len));
  } catch (const json::exception& e) {
    throw DataError(std::string("checkpoint: bad manifest: ") + e.what());
  }
  const std::size_t blob_size = data.size() - blob_start;

  Checkpoint ckpt;
  try {
    const json& meta = manifest.at("meta");
    ckpt.meta.train_lang = meta.at("train_lang").get<std::string>();
    ckpt.meta.epoch = meta.at("epoch").get<Index>();
    ckpt.meta.val_eer = meta.at("val_eer").get<double>();
    ckpt.meta.seed = meta.at("seed").get<std::uint64_t>();

    const json& entries = manifest.at("params");
    auto named = ckpt.params.named();
    if (entries.size() != named.size()) {
      throw DataError("checkpoint: expected " + std::to_string(named.size()) + " tensors, found " +
                      std::to_string(entries.size()));
    }
    for (std::size_t i = 0; i < named.size(); ++i) {
      const json& entry = entries[i];
      const auto name = entry.at("name").get<std::string>();
      if (name != named[i].first) {
        throw DataError("checkpoint: expected tensor '" + std::string(named[i].first) + "', found '" + name + "'");
      }
      const auto shape = entry.at("shape").get<Shape>();
      const auto offset = entry.at("offset").get<std::size_t>();
      Tensor t(shape);
      const std::size_t len = static_cast<std::size_t>(t.size()) * 8;
      if (offset > blob_size || len > blob_size - offset) {
        throw DataError("checkpoint: tensor '" + name + "' runs past the end of the blob");
      }
      for (Index k = 0; k < t.size(); ++k) {
        t.data[k] = bytes::get_le<double>(data.data() + blob_start + offset + 8 * static_cast<std::size_t>(k));
      }
      *named[i].second = std::move(t);
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("checkpoint: bad manifest: ") + e.what());
  } catch (const ShapeError& e) {
    throw DataError(std::string("checkpoint: bad tensor shape: ") + e.what());
  }
  const RFOPParams& p = ckpt.params;
  for (const auto& [name, t] : p.named()) {
    const std::size_t rank = (name.find("weight") != std::string_view::npos || name == "fusion_kernel") ? 2 : 1;
    if (t->shape.size() != rank) {
      throw DataError("checkpoint: tensor '" + std::string(name) + "' has rank " + std::to_string(t->shape.size()));
    }
  }
  ModelConfig cfg = p.shape_config();
  if (p.face_bias.size() != cfg.latent_dim || p.voice_weight.shape.at(0) != cfg.latent_dim ||
      p.voice_bias.size() != cfg.latent_dim || p.fusion_kernel.shape.at(0) != 2 || p.fusion_bias.size() != 1 ||
      p.classifier_weight.shape.at(1) != cfg.latent_dim || p.classifier_bias.size() != cfg.num_identities) {
    throw DataError("checkpoint: tensor shapes are mutually inconsistent");
  }
  try {
    cfg.validate();
  } catch (const ConfigError& e) {
    throw DataError(std::string("checkpoint: ") + e.what());
  }
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  bytes::write_file(path, encode_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(bytes::read_file(path));
}

}  // namespace rfop
