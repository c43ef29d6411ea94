#pragma once

#include <random>
#include <string>
#include <vector>

#include "rfop/feature_store.hpp"
#include "rfop/losses.hpp"
#include "rfop/metrics.hpp"

namespace rfop {

using Rng = std::mt19937_64;

/// P identities x K paired samples per batch.
struct PairSampler {
  Index identities_per_batch = 16;
  Index samples_per_identity = 4;

  Index batch_size() const { return identities_per_batch * samples_per_identity; }
  void validate() const;
};

/// Face and voice sample indices of every identity in one language. Labels
/// are positions in identities(), which is sorted.
class IdentityIndex {
 public:
  IdentityIndex(const FeatureStore& store, const std::string& language);

  const std::string& language() const { return language_; }
  const std::vector<std::string>& identities() const { return identities_; }
  Index num_identities() const { return static_cast<Index>(identities_.size()); }
  const std::vector<std::size_t>& faces(Index label) const { return faces_.at(label); }
  const std::vector<std::size_t>& voices(Index label) const { return voices_.at(label); }

 private:
  std::string language_;
  std::vector<std::string> identities_;
  std::vector<std::vector<std::size_t>> faces_;
  std::vector<std::vector<std::size_t>> voices_;
};

/// Row i of `face` and `voice` come from the same identity, labels[i].
struct Batch {
  MatrixX face;
  MatrixX voice;
  BatchLabels labels;
};

/// Draws P distinct identities uniformly, then K faces and K voices of each
/// without replacement, paired position by position.
Batch sample_batch(const FeatureStore& store, const IdentityIndex& index, const PairSampler& sampler, Rng& rng);

/// One training epoch. Each pass shuffles the identities into groups of P
/// (dropping an incomplete last group) and gives every identity a fresh chunk
/// of K pairs; there are floor(min samples per identity / K) passes.
std::vector<Batch> epoch_batches(const FeatureStore& store, const IdentityIndex& index, const PairSampler& sampler,
                                 Rng& rng);

/// n_same same-identity and n_diff different-identity face/voice trials in
/// one language, drawn without replacement while the pools last, shuffled.
std::vector<Trial> build_trials(const FeatureStore& store, const std::string& language, Index n_same, Index n_diff,
                                Rng& rng);

}  // namespace rfop
