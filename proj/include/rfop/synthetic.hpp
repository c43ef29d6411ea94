#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "rfop/feature_store.hpp"

namespace rfop {

/// Parameters of the seeded face/voice feature generator.
///
/// Each identity gets a prototype z ~ N(0, I_k). Faces are A_f z + sigma * n,
/// voices in language l are A_v z + shift * u_l + sigma * n. A_f and A_v are
/// fixed random orthonormal frames scaled so that E||A z|| ~ signal_scale;
/// u_l is a fixed random unit vector inside the span of A_v.
struct SyntheticSpec {
  Index num_identities = 200;
  Index num_test_identities = 50;
  double validation_fraction = 0.1;
  Index prototype_dim = 32;
  Index face_dim = 128;
  Index voice_dim = 64;
  std::vector<std::string> languages{"L1", "L2"};
  double signal_scale = 0.7;
  double noise_sigma = 0.1;
  double language_shift = 1.0;
  /// Probability that a voice sample carries the next language's offset
  /// instead of its own.
  double language_mix = 0.0;
  Index samples_per_identity_per_language = 8;
  std::uint64_t seed = 42;

  void validate() const;
  Index num_validation_identities() const;
};

void to_json(nlohmann::json& j, const SyntheticSpec& s);
/// Missing keys keep their defaults; unknown keys are rejected.
void from_json(const nlohmann::json& j, SyntheticSpec& s);

struct SyntheticBenchmark {
  /// Training identities minus the held-out validation ones.
  FeatureStore train;
  FeatureStore validation;
  /// Identities never seen in training.
  FeatureStore test;
  /// Ground-truth prototype of every identity.
  std::map<std::string, VectorX> prototypes;
};

SyntheticBenchmark generate_synthetic(const SyntheticSpec& spec);

}  // namespace rfop
