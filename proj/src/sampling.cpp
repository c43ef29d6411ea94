#include "rfop/sampling.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <set>

namespace rfop {

void PairSampler::validate() const {
  if (identities_per_batch < 2) throw ConfigError("a batch needs at least 2 identities");
  if (samples_per_identity < 1) throw ConfigError("samples_per_identity must be positive");
}

IdentityIndex::IdentityIndex(const FeatureStore& store, const std::string& language) : language_(language) {
  std::map<std::string, std::pair<std::vector<std::size_t>, std::vector<std::size_t>>> grouped;
  const auto& records = store.records();
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (records[i].language != language) continue;
    auto& slot = grouped[records[i].identity];
    (records[i].modality == Modality::face ? slot.first : slot.second).push_back(i);
  }
  for (auto& [id, lists] : grouped) {
    if (lists.first.empty() || lists.second.empty()) continue;
    identities_.push_back(id);
    faces_.push_back(std::move(lists.first));
    voices_.push_back(std::move(lists.second));
  }
}

namespace {

Batch assemble(const FeatureStore& store, const std::vector<std::size_t>& faces,
               const std::vector<std::size_t>& voices, BatchLabels labels) {
  return {store.gather(faces), store.gather(voices), std::move(labels)};
}

std::vector<std::size_t> choose(const std::vector<std::size_t>& pool, Index k, Rng& rng) {
  std::vector<std::size_t> copy = pool;
  for (Index i = 0; i < k; ++i) {
    std::uniform_int_distribution<std::size_t> pick(static_cast<std::size_t>(i), copy.size() - 1);
    std::swap(copy[static_cast<std::size_t>(i)], copy[pick(rng)]);
  }
  copy.resize(static_cast<std::size_t>(k));
  return copy;
}

}  // namespace

Batch sample_batch(const FeatureStore& store, const IdentityIndex& index, const PairSampler& sampler, Rng& rng) {
  sampler.validate();
  const auto K = static_cast<std::size_t>(sampler.samples_per_identity);
  std::vector<std::size_t> eligible;
  for (Index label = 0; label < index.num_identities(); ++label) {
    if (index.faces(label).size() >= K && index.voices(label).size() >= K) {
      eligible.push_back(static_cast<std::size_t>(label));
    }
  }
  if (static_cast<Index>(eligible.size()) < sampler.identities_per_batch) {
    throw DataError("sample_batch: need " + std::to_string(sampler.identities_per_batch) + " identities with " +
                    std::to_string(K) + " face and voice samples in '" + index.language() + "', found " +
                    std::to_string(eligible.size()));
  }
  std::vector<std::size_t> faces, voices;
  BatchLabels labels;
  for (std::size_t label : choose(eligible, sampler.identities_per_batch, rng)) {
    const auto f = choose(index.faces(static_cast<Index>(label)), sampler.samples_per_identity, rng);
    const auto v = choose(index.voices(static_cast<Index>(label)), sampler.samples_per_identity, rng);
    faces.insert(faces.end(), f.begin(), f.end());
    voices.insert(voices.end(), v.begin(), v.end());
    labels.insert(labels.end(), K, static_cast<Index>(label));
  }
  return assemble(store, faces, voices, std::move(labels));
}

std::vector<Batch> epoch_batches(const FeatureStore& store, const IdentityIndex& index, const PairSampler& sampler,
                                 Rng& rng) {
  sampler.validate();
  const Index n = index.num_identities();
  const auto P = static_cast<std::size_t>(sampler.identities_per_batch);
  const auto K = static_cast<std::size_t>(sampler.samples_per_identity);
  if (n < sampler.identities_per_batch) {
    throw DataError("epoch_batches: only " + std::to_string(n) + " identities in '" + index.language() +
                    "', batches need " + std::to_string(P));
  }
  std::size_t min_pairs = std::numeric_limits<std::size_t>::max();
  std::vector<std::vector<std::size_t>> faces(static_cast<std::size_t>(n)), voices(static_cast<std::size_t>(n));
  for (Index label = 0; label < n; ++label) {
    faces[label] = index.faces(label);
    voices[label] = index.voices(label);
    std::shuffle(faces[label].begin(), faces[label].end(), rng);
    std::shuffle(voices[label].begin(), voices[label].end(), rng);
    min_pairs = std::min({min_pairs, faces[label].size(), voices[label].size()});
  }
  if (min_pairs < K) {
    throw DataError("epoch_batches: some identity in '" + index.language() + "' has fewer than " +
                    std::to_string(K) + " face/voice samples");
  }

  std::vector<Batch> batches;
  std::vector<std::size_t> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t pass = 0; pass < min_pairs / K; ++pass) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start + P <= order.size(); start += P) {
      std::vector<std::size_t> f, v;
      BatchLabels labels;
      for (std::size_t i = start; i < start + P; ++i) {
        const std::size_t label = order[i];
        f.insert(f.end(), faces[label].begin() + pass * K, faces[label].begin() + (pass + 1) * K);
        v.insert(v.end(), voices[label].begin() + pass * K, voices[label].begin() + (pass + 1) * K);
        labels.insert(labels.end(), K, static_cast<Index>(label));
      }
      batches.push_back(assemble(store, f, v, std::move(labels)));
    }
  }
  return batches;
}

std::vector<Trial> build_trials(const FeatureStore& store, const std::string& language, Index n_same, Index n_diff,
                                Rng& rng) {
  if (n_same < 0 || n_diff < 0) throw ConfigError("build_trials: trial counts must be non-negative");
  const auto& records = store.records();
  std::vector<std::size_t> faces, voices;
  std::set<std::string> identities;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (records[i].language != language) continue;
    (records[i].modality == Modality::face ? faces : voices).push_back(i);
    identities.insert(records[i].identity);
  }
  if (identities.size() < 2) {
    throw DataError("build_trials: language '" + language + "' has fewer than 2 identities");
  }

  std::vector<std::pair<std::size_t, std::size_t>> same_pool;
  std::size_t diff_total = 0;
  for (std::size_t f : faces) {
    for (std::size_t v : voices) {
      if (records[f].identity == records[v].identity) {
        same_pool.emplace_back(f, v);
      } else {
        ++diff_total;
      }
    }
  }
  if ((n_same > 0 && same_pool.empty()) || (n_diff > 0 && diff_total == 0)) {
    throw DataError("build_trials: not enough samples in '" + language + "' for the requested trials");
  }

  auto make = [&](std::size_t f, std::size_t v) {
    return Trial{records[f].sample_id, records[v].sample_id,
                 records[f].identity == records[v].identity ? TrialLabel::same : TrialLabel::different};
  };
  std::vector<Trial> trials;
  // Same-identity pairs: partial shuffle, then draws with replacement if the
  // pool runs out.
  std::shuffle(same_pool.begin(), same_pool.end(), rng);
  for (Index i = 0; i < n_same; ++i) {
    const auto k = static_cast<std::size_t>(i);
    if (k < same_pool.size()) {
      trials.push_back(make(same_pool[k].first, same_pool[k].second));
    } else {
      std::uniform_int_distribution<std::size_t> pick(0, same_pool.size() - 1);
      const auto& p = same_pool[pick(rng)];
      trials.push_back(make(p.first, p.second));
    }
  }

  std::uniform_int_distribution<std::size_t> pick_face(0, faces.empty() ? 0 : faces.size() - 1);
  std::uniform_int_distribution<std::size_t> pick_voice(0, voices.empty() ? 0 : voices.size() - 1);
  std::set<std::pair<std::size_t, std::size_t>> used;
  for (Index i = 0; i < n_diff; ++i) {
    const bool unique = used.size() < diff_total;
    while (true) {
      const std::size_t f = faces[pick_face(rng)];
      const std::size_t v = voices[pick_voice(rng)];
      if (records[f].identity == records[v].identity) continue;
      if (unique && !used.insert({f, v}).second) continue;
      trials.push_back(make(f, v));
      break;
    }
  }
  std::shuffle(trials.begin(), trials.end(), rng);
  return trials;
}

}  // namespace rfop
