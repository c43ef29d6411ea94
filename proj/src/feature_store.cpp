#include "rfop/feature_store.hpp"

#include <algorithm>
#include <charconv>
#include <numeric>
#include <unordered_set>

#include "rfop/bytes.hpp"
#include "rfop/csv.hpp"

namespace rfop {

namespace {

constexpr const char* kManifestHeader = "sample_id,identity,language,modality,dim,offset";

Index parse_index(const std::string& text, const std::string& what, std::size_t line_no) {
  Index value = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw DataError("manifest line " + std::to_string(line_no) + ": bad " + what + " '" + text + "'");
  }
  return value;
}

void check_field(const std::string& value, const char* what) {
  if (value.empty() || value.find_first_of(",\r\n") != std::string::npos) {
    throw DataError(std::string("feature store: ") + what + " '" + value +
                    "' must be non-empty and free of commas and newlines");
  }
}

}  // namespace

const char* to_string(Modality m) { return m == Modality::face ? "face" : "voice"; }

Modality parse_modality(const std::string& text) {
  if (text == "face") return Modality::face;
  if (text == "voice") return Modality::voice;
  throw DataError("unknown modality '" + text + "'");
}

FeatureStore::FeatureStore(std::vector<SampleRecord> records, std::vector<float> blob)
    : records_(std::move(records)), blob_(std::move(blob)) {
  validate();
}

void FeatureStore::validate() {
  by_id_.clear();
  for (std::size_t i = 0; i < records_.size(); ++i) {
    const SampleRecord& r = records_[i];
    if (!by_id_.emplace(r.sample_id, i).second) {
      throw DataError("feature store: duplicate sample_id '" + r.sample_id + "'");
    }
    if (r.dim <= 0 || r.offset < 0 || r.offset + r.dim > static_cast<Index>(blob_.size())) {
      throw DataError("feature store: record '" + r.sample_id + "' spans [" + std::to_string(r.offset) + ", " +
                      std::to_string(r.offset + r.dim) + ") outside a blob of " + std::to_string(blob_.size()) +
                      " values");
    }
  }
  std::vector<std::size_t> order(records_.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [this](std::size_t a, std::size_t b) { return records_[a].offset < records_[b].offset; });
  for (std::size_t k = 1; k < order.size(); ++k) {
    const SampleRecord& prev = records_[order[k - 1]];
    const SampleRecord& cur = records_[order[k]];
    if (prev.offset + prev.dim > cur.offset) {
      throw DataError("feature store: records '" + prev.sample_id + "' and '" + cur.sample_id + "' overlap");
    }
  }
}

void FeatureStore::add(std::string sample_id, std::string identity, std::string language, Modality modality,
                       std::span<const float> values) {
  check_field(sample_id, "sample_id");
  check_field(identity, "identity");
  check_field(language, "language");
  if (values.empty()) throw DataError("feature store: sample '" + sample_id + "' has no values");
  if (by_id_.count(sample_id)) throw DataError("feature store: duplicate sample_id '" + sample_id + "'");
  SampleRecord r{std::move(sample_id), std::move(identity), std::move(language), modality,
                 static_cast<Index>(values.size()), static_cast<Index>(blob_.size())};
  blob_.insert(blob_.end(), values.begin(), values.end());
  by_id_.emplace(r.sample_id, records_.size());
  records_.push_back(std::move(r));
}

void FeatureStore::add(std::string sample_id, std::string identity, std::string language, Modality modality,
                       const VectorX& values) {
  std::vector<float> narrow(values.size());
  for (Index i = 0; i < values.size(); ++i) narrow[i] = static_cast<float>(values[i]);
  add(std::move(sample_id), std::move(identity), std::move(language), modality, narrow);
}

std::optional<std::size_t> FeatureStore::find(const std::string& sample_id) const {
  auto it = by_id_.find(sample_id);
  if (it == by_id_.end()) return std::nullopt;
  return it->second;
}

const SampleRecord& FeatureStore::at(const std::string& sample_id) const {
  auto idx = find(sample_id);
  if (!idx) throw DataError("unknown sample_id '" + sample_id + "'");
  return records_[*idx];
}

VectorX FeatureStore::features(std::size_t index) const {
  const SampleRecord& r = records_.at(index);
  return Eigen::Map<const Eigen::VectorXf>(blob_.data() + r.offset, r.dim).cast<Real>();
}

MatrixX FeatureStore::gather(std::span<const std::size_t> indices) const {
  if (indices.empty()) return MatrixX(0, 0);
  const Index dim = records_.at(indices[0]).dim;
  MatrixX out(static_cast<Index>(indices.size()), dim);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const SampleRecord& r = records_.at(indices[i]);
    if (r.dim != dim) {
      throw DataError("feature store: mixed dimensions in one batch (" + std::to_string(dim) + " vs " +
                      std::to_string(r.dim) + ")");
    }
    out.row(static_cast<Index>(i)) = Eigen::Map<const Eigen::RowVectorXf>(blob_.data() + r.offset, dim).cast<Real>();
  }
  return out;
}

std::vector<std::string> FeatureStore::identities() const {
  std::vector<std::string> out;
  std::unordered_set<std::string> seen;
  for (const SampleRecord& r : records_) {
    if (seen.insert(r.identity).second) out.push_back(r.identity);
  }
  return out;
}

FeatureStore FeatureStore::subset(const std::vector<std::string>& identities) const {
  std::unordered_set<std::string> keep(identities.begin(), identities.end());
  FeatureStore out;
  for (const SampleRecord& r : records_) {
    if (!keep.count(r.identity)) continue;
    out.add(r.sample_id, r.identity, r.language, r.modality,
            std::span<const float>(blob_.data() + r.offset, static_cast<std::size_t>(r.dim)));
  }
  return out;
}

FeatureStore load_store(const std::filesystem::path& manifest_path, const std::filesystem::path& blob_path) {
  const std::string manifest = bytes::read_file(manifest_path);
  const std::string raw = bytes::read_file(blob_path);
  if (raw.size() % 4 != 0) {
    throw DataError("blob " + blob_path.string() + " size is not a multiple of 4 bytes");
  }
  std::vector<float> blob(raw.size() / 4);
  for (std::size_t i = 0; i < blob.size(); ++i) blob[i] = bytes::get_le<float>(raw.data() + 4 * i);

  const auto rows = csv::lines(manifest);
  std::vector<SampleRecord> records;
  if (!rows.empty()) {
    if (rows[0] != kManifestHeader) {
      throw DataError("manifest line 1: expected header '" + std::string(kManifestHeader) + "'");
    }
    for (std::size_t i = 1; i < rows.size(); ++i) {
      const std::size_t line_no = i + 1;
      if (rows[i].empty()) continue;
      const auto f = csv::split(rows[i]);
      if (f.size() != 6) {
        throw DataError("manifest line " + std::to_string(line_no) + ": expected 6 fields, found " +
                        std::to_string(f.size()));
      }
      SampleRecord r;
      r.sample_id = f[0];
      r.identity = f[1];
      r.language = f[2];
      try {
        r.modality = parse_modality(f[3]);
      } catch (const DataError&) {
        throw DataError("manifest line " + std::to_string(line_no) + ": unknown modality '" + f[3] + "'");
      }
      r.dim = parse_index(f[4], "dim", line_no);
      r.offset = parse_index(f[5], "offset", line_no);
      if (r.sample_id.empty() || r.identity.empty() || r.language.empty()) {
        throw DataError("manifest line " + std::to_string(line_no) + ": empty field");
      }
      records.push_back(std::move(r));
    }
  }
  return FeatureStore(std::move(records), std::move(blob));
}

void save_store(const FeatureStore& store, const std::filesystem::path& manifest_path,
                const std::filesystem::path& blob_path) {
  std::string manifest = std::string(kManifestHeader) + "\n";
  for (const SampleRecord& r : store.records()) {
    manifest += r.sample_id + ',' + r.identity + ',' + r.language + ',' + to_string(r.modality) + ',' +
                std::to_string(r.dim) + ',' + std::to_string(r.offset) + '\n';
  }
  std::string blob;
  blob.reserve(store.blob().size() * 4);
  for (float v : store.blob()) bytes::put_le<float>(blob, v);
  bytes::write_file(manifest_path, manifest);
  bytes::write_file(blob_path, blob);
}

}  // namespace rfop
