#pragma once

#include <filesystem>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "rfop/model.hpp"

namespace rfop {

class FeatureStore;

enum class TrialLabel : int { different = 0, same = 1 };

struct Trial {
  std::string face_sample_id;
  std::string voice_sample_id;
  TrialLabel label = TrialLabel::different;
  double score = std::numeric_limits<double>::quiet_NaN();
};

/// Scores at or above `threshold` are accepted.
struct RocPoint {
  double threshold = 0.0;
  double far = 0.0;  // accepted different-identity trials / all different
  double frr = 0.0;  // rejected same-identity trials / all same
};

struct EerResult {
  double eer_percent = 0.0;
  double threshold = 0.0;
};

/// Cosine similarity between the projected face and voice latents of each
/// trial's samples. Fills Trial::score in place.
void score_trials(const RFOPParams& params, const FeatureStore& store, std::span<Trial> trials);

/// Points at -inf, every distinct score in increasing order, and +inf.
std::vector<RocPoint> roc_curve(std::span<const double> scores, std::span<const TrialLabel> labels);
std::vector<RocPoint> roc_curve(std::span<const Trial> trials);

/// Equal error rate: the first ROC segment where far - frr changes sign is
/// linearly interpolated to the crossing; an exact tie at a point is returned
/// as is.
EerResult compute_eer(std::span<const double> scores, std::span<const TrialLabel> labels);
EerResult compute_eer(std::span<const Trial> trials);

/// Arithmetic mean of the train/test EER cells.
double overall_score(std::span<const double> cells);
/// One-decimal rendering used in reports.
std::string format_one_decimal(double value);

struct EvalMatrix {
  std::vector<std::string> train_langs;
  std::vector<std::string> test_langs;
  MatrixX eer;  // train x test, percent
  double overall = 0.0;

  /// Rows `train_lang,test_lang,eer` then `overall,,<mean>`.
  std::string to_csv() const;
};

struct TrainedRun {
  std::string train_lang;
  const RFOPParams* params = nullptr;
};

struct TestSplit {
  std::string test_lang;
  std::vector<Trial> trials;
};

/// Evaluates every run on every test split against one feature store.
EvalMatrix cross_config_report(std::span<const TrainedRun> runs, std::span<const TestSplit> splits,
                               const FeatureStore& store);

/// Trials CSV: header `face_sample_id,voice_sample_id,label`, label 1 = same.
std::vector<Trial> load_trials(const std::filesystem::path& path);
void save_trials(const std::filesystem::path& path, std::span<const Trial> trials);

struct ScoredLabels {
  std::vector<double> scores;
  std::vector<TrialLabel> labels;
};

/// Scores CSV: header `score,label`.
ScoredLabels load_scores(const std::filesystem::path& path);

}  // namespace rfop
