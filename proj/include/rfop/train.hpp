#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rfop/losses.hpp"
#include "rfop/optim.hpp"
#include "rfop/sampling.hpp"

namespace rfop {

struct PhasePlan {
  Index epochs = 50;
  double lr_max = 0.01;
  double lr_min = 0.0;
};

struct TrainPlan {
  PhasePlan phase1{50, 0.01, 0.0};
  PhasePlan phase2{50, 0.0001, 0.0};
  PairSampler sampler{16, 4};
  double weight_decay = 0.2;
  std::uint64_t seed = 42;
  /// Size of the validation trial list used for model selection.
  Index validation_same_trials = 500;
  Index validation_diff_trials = 500;

  Index batch_size() const { return sampler.batch_size(); }
  void validate() const;
};

/// One row of the training log.
struct EpochLog {
  int phase = 1;
  Index epoch = 0;  // 1-based within the phase
  double lr = 0.0;
  double l_total = 0.0;
  double l_mse = 0.0;
  double l_op = 0.0;
  double l_ce = 0.0;
  double val_eer = 0.0;
};

struct CheckpointRecord {
  int phase = 1;
  Index epoch = 0;
  double val_eer = 0.0;
  /// Kept only while the record is the best of its phase so far.
  std::optional<RFOPParams> params;
};

/// Training split of one language plus the validation trials used to pick
/// checkpoints.
struct TrainingData {
  const FeatureStore* train = nullptr;
  IdentityIndex train_index;
  const FeatureStore* validation = nullptr;
  std::vector<Trial> validation_trials;
};

TrainingData make_training_data(const FeatureStore& train, const FeatureStore& validation,
                                const std::string& language, const TrainPlan& plan);

struct PhaseResult {
  std::vector<CheckpointRecord> records;
  std::vector<EpochLog> log;
  /// Total loss of every optimisation step, in order.
  std::vector<double> step_losses;
};

struct PhaseSettings {
  int phase = 1;
  PhasePlan plan;
  PairSampler sampler;
  LossWeights weights;
};

/// Runs plan.epochs epochs of minibatch AdamW at lr_at(epoch - 1) of a fresh
/// cosine schedule, validating after each. Throws NumericalError on a
/// non-finite loss.
PhaseResult run_phase(RFOPParams& params, AdamW& optimizer, const TrainingData& data, const PhaseSettings& settings,
                      Rng& rng);

/// Lowest validation EER, earliest on ties.
const CheckpointRecord& select_best(std::span<const CheckpointRecord> records);

/// Validation EER (percent) of `params` on the data's validation trials.
double validation_eer(const RFOPParams& params, const TrainingData& data);

struct TrainResult {
  RFOPParams params;  // best checkpoint over both phases
  CheckpointRecord best;
  RFOPParams phase2_start;
  std::vector<CheckpointRecord> records;
  std::vector<EpochLog> log;
};

/// Phase 1 from freshly initialised weights, restart from its best checkpoint
/// with a new optimiser and schedule for phase 2, return the overall best.
TrainResult two_phase_train(const TrainPlan& plan, const ModelConfig& model, const LossWeights& weights,
                            const TrainingData& data);

/// CSV with header `phase,epoch,lr,l_total,l_mse,l_op,l_ce,val_eer`; reals
/// printed with round-trip precision.
std::string format_training_log(std::span<const EpochLog> log);

}  // namespace rfop
