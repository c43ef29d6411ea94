#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "rfop/tensor.hpp"

namespace rfop {

enum class Modality { face, voice };

const char* to_string(Modality m);
Modality parse_modality(const std::string& text);

struct SampleRecord {
  std::string sample_id;
  std::string identity;
  std::string language;
  Modality modality = Modality::face;
  Index dim = 0;
  /// Position of the first value in the blob, counted in elements.
  Index offset = 0;

  bool operator==(const SampleRecord&) const = default;
};

/// Pre-extracted feature vectors: a manifest of sample records over a flat
/// blob of 32-bit floats. Values are widened to doubles on access.
class FeatureStore {
 public:
  FeatureStore() = default;
  FeatureStore(std::vector<SampleRecord> records, std::vector<float> blob);

  /// Appends a sample at the end of the blob.
  void add(std::string sample_id, std::string identity, std::string language, Modality modality,
           std::span<const float> values);
  void add(std::string sample_id, std::string identity, std::string language, Modality modality,
           const VectorX& values);

  const std::vector<SampleRecord>& records() const { return records_; }
  const std::vector<float>& blob() const { return blob_; }
  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }

  std::optional<std::size_t> find(const std::string& sample_id) const;
  const SampleRecord& at(const std::string& sample_id) const;
  VectorX features(std::size_t index) const;
  /// Stacks the features of the given records as rows.
  MatrixX gather(std::span<const std::size_t> indices) const;

  /// Identities in first-appearance order.
  std::vector<std::string> identities() const;
  /// Copy restricted to the given identities, with a compacted blob.
  FeatureStore subset(const std::vector<std::string>& identities) const;

  bool operator==(const FeatureStore& other) const {
    return records_ == other.records_ && blob_ == other.blob_;
  }

 private:
  void validate();

  std::vector<SampleRecord> records_;
  std::vector<float> blob_;
  std::unordered_map<std::string, std::size_t> by_id_;
};

/// Manifest: UTF-8 CSV with header `sample_id,identity,language,modality,dim,offset`.
/// Blob: contiguous little-endian IEEE-754 32-bit floats.
FeatureStore load_store(const std::filesystem::path& manifest_path, const std::filesystem::path& blob_path);
void save_store(const FeatureStore& store, const std::filesystem::path& manifest_path,
                const std::filesystem::path& blob_path);

}  // namespace rfop
