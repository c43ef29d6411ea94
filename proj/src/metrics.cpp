#include "rfop/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "rfop/bytes.hpp"
#include "rfop/csv.hpp"
#include "rfop/feature_store.hpp"

namespace rfop {

void score_trials(const RFOPParams& params, const FeatureStore& store, std::span<Trial> trials) {
  if (trials.empty()) return;
  std::vector<std::size_t> faces, voices;
  faces.reserve(trials.size());
  voices.reserve(trials.size());
  for (const Trial& t : trials) {
    const auto f = store.find(t.face_sample_id);
    const auto v = store.find(t.voice_sample_id);
    if (!f) throw DataError("trial references unknown face sample '" + t.face_sample_id + "'");
    if (!v) throw DataError("trial references unknown voice sample '" + t.voice_sample_id + "'");
    if (store.records()[*f].modality != Modality::face) {
      throw DataError("sample '" + t.face_sample_id + "' is not a face sample");
    }
    if (store.records()[*v].modality != Modality::voice) {
      throw DataError("sample '" + t.voice_sample_id + "' is not a voice sample");
    }
    faces.push_back(*f);
    voices.push_back(*v);
  }
  MatrixX xf = project_face(params, store.gather(faces));
  MatrixX xv = project_voice(params, store.gather(voices));
  constexpr Real eps = 1e-12;
  for (std::size_t i = 0; i < trials.size(); ++i) {
    const Index r = static_cast<Index>(i);
    const Real denom = std::max(xf.row(r).norm(), eps) * std::max(xv.row(r).norm(), eps);
    trials[i].score = xf.row(r).dot(xv.row(r)) / denom;
  }
}

std::vector<RocPoint> roc_curve(std::span<const double> scores, std::span<const TrialLabel> labels) {
  if (scores.size() != labels.size()) {
    throw std::invalid_argument("roc_curve: " + std::to_string(scores.size()) + " scores for " +
                                std::to_string(labels.size()) + " labels");
  }
  std::size_t n_same = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!std::isfinite(scores[i])) throw DataError("roc_curve: non-finite score at index " + std::to_string(i));
    n_same += labels[i] == TrialLabel::same;
  }
  const std::size_t n_diff = scores.size() - n_same;
  if (n_same == 0 || n_diff == 0) {
    throw DataError("EER needs both same-identity and different-identity trials");
  }

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<RocPoint> points;
  points.push_back({-inf, 1.0, 0.0});
  // Trials strictly below the current threshold.
  std::size_t same_below = 0, diff_below = 0;
  std::size_t k = 0;
  while (k < order.size()) {
    const double t = scores[order[k]];
    points.push_back({t, static_cast<double>(n_diff - diff_below) / static_cast<double>(n_diff),
                      static_cast<double>(same_below) / static_cast<double>(n_same)});
    while (k < order.size() && scores[order[k]] == t) {
      if (labels[order[k]] == TrialLabel::same) {
        ++same_below;
      } else {
        ++diff_below;
      }
      ++k;
    }
  }
  points.push_back({inf, 0.0, 1.0});
  return points;
}

namespace {

ScoredLabels unpack(std::span<const Trial> trials) {
  ScoredLabels out;
  for (const Trial& t : trials) {
    out.scores.push_back(t.score);
    out.labels.push_back(t.label);
  }
  return out;
}

}  // namespace

std::vector<RocPoint> roc_curve(std::span<const Trial> trials) {
  const ScoredLabels s = unpack(trials);
  return roc_curve(s.scores, s.labels);
}

EerResult compute_eer(std::span<const double> scores, std::span<const TrialLabel> labels) {
  const std::vector<RocPoint> roc = roc_curve(scores, labels);
  for (std::size_t i = 0; i < roc.size(); ++i) {
    const double gap = roc[i].far - roc[i].frr;
    if (gap == 0.0) return {100.0 * roc[i].far, roc[i].threshold};
    if (gap < 0.0) {
      // roc[0] has gap +1, so i >= 1 here.
      const RocPoint& a = roc[i - 1];
      const RocPoint& b = roc[i];
      const double gap_a = a.far - a.frr;
      const double alpha = gap_a / (gap_a - gap);
      const double rate = a.far + alpha * (b.far - a.far);
      double threshold;
      if (!std::isfinite(a.threshold)) {
        threshold = b.threshold;
      } else if (!std::isfinite(b.threshold)) {
        threshold = a.threshold;
      } else {
        threshold = a.threshold + alpha * (b.threshold - a.threshold);
      }
      return {100.0 * rate, threshold};
    }
  }
  // Unreachable: the last point has far - frr == -1.
  return {100.0, roc.back().threshold};
}

EerResult compute_eer(std::span<const Trial> trials) {
  const ScoredLabels s = unpack(trials);
  return compute_eer(s.scores, s.labels);
}

double overall_score(std::span<const double> cells) {
  if (cells.empty()) throw std::invalid_argument("overall_score: no cells");
  double total = 0.0;
  for (double c : cells) {
    if (!std::isfinite(c)) throw std::invalid_argument("overall_score: non-finite cell");
    total += c;
  }
  return total / static_cast<double>(cells.size());
}

std::string format_one_decimal(double value) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.1f", value);
  return buf;
}

std::string EvalMatrix::to_csv() const {
  std::string out = "train_lang,test_lang,eer\n";
  for (std::size_t i = 0; i < train_langs.size(); ++i) {
    for (std::size_t j = 0; j < test_langs.size(); ++j) {
      out += train_langs[i] + ',' + test_langs[j] + ',' +
             format_one_decimal(eer(static_cast<Index>(i), static_cast<Index>(j))) + '\n';
    }
  }
  out += "overall,," + format_one_decimal(overall) + '\n';
  return out;
}

EvalMatrix cross_config_report(std::span<const TrainedRun> runs, std::span<const TestSplit> splits,
                               const FeatureStore& store) {
  if (runs.empty()) throw DataError("cross_config_report: no trained runs");
  if (splits.empty()) throw DataError("cross_config_report: no test splits");
  EvalMatrix m;
  m.eer.resize(static_cast<Index>(runs.size()), static_cast<Index>(splits.size()));
  for (const TestSplit& s : splits) m.test_langs.push_back(s.test_lang);
  std::vector<double> cells;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    if (runs[i].params == nullptr) throw DataError("cross_config_report: run '" + runs[i].train_lang + "' has no model");
    m.train_langs.push_back(runs[i].train_lang);
    for (std::size_t j = 0; j < splits.size(); ++j) {
      std::vector<Trial> trials = splits[j].trials;
      score_trials(*runs[i].params, store, trials);
      const double e = compute_eer(trials).eer_percent;
      m.eer(static_cast<Index>(i), static_cast<Index>(j)) = e;
      cells.push_back(e);
    }
  }
  m.overall = overall_score(cells);
  return m;
}

std::vector<Trial> load_trials(const std::filesystem::path& path) {
  const auto rows = csv::lines(bytes::read_file(path));
  if (rows.empty() || rows[0] != "face_sample_id,voice_sample_id,label") {
    throw DataError(path.string() + " line 1: expected header 'face_sample_id,voice_sample_id,label'");
  }
  std::vector<Trial> trials;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].empty()) continue;
    const auto f = csv::split(rows[i]);
    if (f.size() != 3 || f[0].empty() || f[1].empty() || (f[2] != "0" && f[2] != "1")) {
      throw DataError(path.string() + " line " + std::to_string(i + 1) + ": malformed trial '" + rows[i] + "'");
    }
    trials.push_back({f[0], f[1], f[2] == "1" ? TrialLabel::same : TrialLabel::different});
  }
  return trials;
}

void save_trials(const std::filesystem::path& path, std::span<const Trial> trials) {
  std::string out = "face_sample_id,voice_sample_id,label\n";
  for (const Trial& t : trials) {
    out += t.face_sample_id + ',' + t.voice_sample_id + ',' + (t.label == TrialLabel::same ? "1" : "0") + '\n';
  }
  bytes::write_file(path, out);
}

ScoredLabels load_scores(const std::filesystem::path& path) {
  const auto rows = csv::lines(bytes::read_file(path));
  if (rows.empty() || rows[0] != "score,label") {
    throw DataError(path.string() + " line 1: expected header 'score,label'");
  }
  ScoredLabels out;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].empty()) continue;
    const auto f = csv::split(rows[i]);
    std::size_t used = 0;
    double score = 0.0;
    bool ok = f.size() == 2 && (f[1] == "0" || f[1] == "1");
    if (ok) {
      try {
        score = std::stod(f[0], &used);
      } catch (const std::exception&) {
        ok = false;
      }
      ok = ok && used == f[0].size() && std::isfinite(score);
    }
    if (!ok) {
      throw DataError(path.string() + " line " + std::to_string(i + 1) + ": malformed row '" + rows[i] + "'");
    }
    out.scores.push_back(score);
    out.labels.push_back(f[1] == "1" ? TrialLabel::same : TrialLabel::different);
  }
  return out;
}

}  // namespace rfop
