#include "rfop/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>
#include <set>

namespace rfop {

void SyntheticSpec::validate() const {
  if (num_identities < 4) {
    throw ConfigError("num_identities must be at least 4, got " + std::to_string(num_identities));
  }
  if (num_test_identities < 2) throw ConfigError("num_test_identities must be at least 2");
  if (!(validation_fraction > 0.0 && validation_fraction < 1.0)) {
    throw ConfigError("validation_fraction must lie in (0, 1)");
  }
  if (num_identities - num_validation_identities() < 2) {
    throw ConfigError("validation split leaves fewer than 2 training identities");
  }
  if (prototype_dim < 1) throw ConfigError("prototype_dim must be positive");
  if (face_dim < prototype_dim || voice_dim < prototype_dim) {
    throw ConfigError("face_dim and voice_dim must be at least prototype_dim");
  }
  if (languages.empty()) throw ConfigError("at least one language is required");
  std::set<std::string> unique(languages.begin(), languages.end());
  if (unique.size() != languages.size()) throw ConfigError("languages must be distinct");
  for (const auto& l : languages) {
    if (l.empty() || l.find_first_of(",_\r\n") != std::string::npos) {
      throw ConfigError("language names must be non-empty without commas or underscores");
    }
  }
  if (!(signal_scale > 0.0) || !std::isfinite(signal_scale)) throw ConfigError("signal_scale must be positive");
  if (!(noise_sigma > 0.0) || !std::isfinite(noise_sigma)) throw ConfigError("noise_sigma must be positive");
  if (!(language_shift >= 0.0) || !std::isfinite(language_shift)) {
    throw ConfigError("language_shift must be non-negative");
  }
  if (!(language_mix >= 0.0 && language_mix <= 1.0)) throw ConfigError("language_mix must lie in [0, 1]");
  if (samples_per_identity_per_language < 1) {
    throw ConfigError("samples_per_identity_per_language must be positive");
  }
}

Index SyntheticSpec::num_validation_identities() const {
  return std::max<Index>(2, static_cast<Index>(std::lround(validation_fraction * static_cast<double>(num_identities))));
}

void to_json(nlohmann::json& j, const SyntheticSpec& s) {
  j = {{"num_identities", s.num_identities},
       {"num_test_identities", s.num_test_identities},
       {"validation_fraction", s.validation_fraction},
       {"prototype_dim", s.prototype_dim},
       {"face_dim", s.face_dim},
       {"voice_dim", s.voice_dim},
       {"languages", s.languages},
       {"signal_scale", s.signal_scale},
       {"noise_sigma", s.noise_sigma},
       {"language_shift", s.language_shift},
       {"language_mix", s.language_mix},
       {"samples_per_identity_per_language", s.samples_per_identity_per_language},
       {"seed", s.seed}};
}

void from_json(const nlohmann::json& j, SyntheticSpec& s) {
  if (!j.is_object()) throw ConfigError("synthetic spec must be a JSON object");
  static const std::set<std::string> known = {"num_identities", "num_test_identities", "validation_fraction",
                                              "prototype_dim", "face_dim", "voice_dim", "languages",
                                              "signal_scale", "noise_sigma", "language_shift", "language_mix",
                                              "samples_per_identity_per_language", "seed"};
  for (const auto& [key, value] : j.items()) {
    if (!known.count(key)) throw ConfigError("unknown synthetic spec field '" + key + "'");
  }
  try {
    auto take = [&j](const char* key, auto& field) {
      if (j.contains(key)) j.at(key).get_to(field);
    };
    take("num_identities", s.num_identities);
    take("num_test_identities", s.num_test_identities);
    take("validation_fraction", s.validation_fraction);
    take("prototype_dim", s.prototype_dim);
    take("face_dim", s.face_dim);
    take("voice_dim", s.voice_dim);
    take("languages", s.languages);
    take("signal_scale", s.signal_scale);
    take("noise_sigma", s.noise_sigma);
    take("language_shift", s.language_shift);
    take("language_mix", s.language_mix);
    take("samples_per_identity_per_language", s.samples_per_identity_per_language);
    take("seed", s.seed);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("synthetic spec: ") + e.what());
  }
}

namespace {

std::string identity_name(Index i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "id%04ld", static_cast<long>(i));
  return buf;
}

std::string sample_name(const std::string& identity, const std::string& lang, char modality, Index k) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%c%02ld", modality, static_cast<long>(k));
  return identity + "_" + lang + "_" + buf;
}

}  // namespace

SyntheticBenchmark generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<Real> normal(0.0, 1.0);
  auto gaussian = [&](Index rows, Index cols, Real stddev) {
    MatrixX m(rows, cols);
    for (Index i = 0; i < m.size(); ++i) m.data()[i] = stddev * normal(rng);
    return m;
  };

  const Index k = spec.prototype_dim;
  // Random orthonormal k-frame, scaled so that E||A z||^2 = signal_scale^2.
  auto frame = [&](Index rows) -> MatrixX {
    const Eigen::HouseholderQR<MatrixX> qr(gaussian(rows, k, 1.0));
    return qr.householderQ() * MatrixX::Identity(rows, k) * (spec.signal_scale / std::sqrt(static_cast<Real>(k)));
  };
  const MatrixX face_map = frame(spec.face_dim);
  const MatrixX voice_map = frame(spec.voice_dim);
  // Language offsets live in the span of the voice map, so they cannot be
  // filtered out as pure noise directions.
  std::vector<VectorX> offsets;
  for (std::size_t l = 0; l < spec.languages.size(); ++l) {
    VectorX u = voice_map * gaussian(k, 1, 1.0);
    offsets.push_back(u / u.norm());
  }

  const Index total = spec.num_identities + spec.num_test_identities;
  std::vector<std::string> train_ids, test_ids;
  for (Index i = 0; i < total; ++i) (i < spec.num_identities ? train_ids : test_ids).push_back(identity_name(i));
  std::vector<std::string> shuffled = train_ids;
  std::shuffle(shuffled.begin(), shuffled.end(), rng);
  const std::set<std::string> validation_ids(shuffled.begin(), shuffled.begin() + spec.num_validation_identities());

  std::uniform_real_distribution<Real> unit(0.0, 1.0);
  SyntheticBenchmark out;
  for (Index i = 0; i < total; ++i) {
    const std::string id = identity_name(i);
    const VectorX z = gaussian(k, 1, 1.0);
    out.prototypes.emplace(id, z);
    const VectorX face_mean = face_map * z;
    const VectorX voice_mean = voice_map * z;
    FeatureStore& dest = i >= spec.num_identities ? out.test : validation_ids.count(id) ? out.validation : out.train;
    for (std::size_t l = 0; l < spec.languages.size(); ++l) {
      const std::string& lang = spec.languages[l];
      for (Index s = 0; s < spec.samples_per_identity_per_language; ++s) {
        const VectorX face = face_mean + gaussian(spec.face_dim, 1, spec.noise_sigma);
        dest.add(sample_name(id, lang, 'f', s), id, lang, Modality::face, face);
      }
      for (Index s = 0; s < spec.samples_per_identity_per_language; ++s) {
        std::size_t accent = l;
        if (spec.languages.size() > 1 && spec.language_mix > 0.0 && unit(rng) < spec.language_mix) {
          accent = (l + 1) % spec.languages.size();
        }
        const VectorX voice =
            voice_mean + spec.language_shift * offsets[accent] + gaussian(spec.voice_dim, 1, spec.noise_sigma);
        dest.add(sample_name(id, lang, 'v', s), id, lang, Modality::voice, voice);
      }
    }
  }
  return out;
}

}  // namespace rfop
