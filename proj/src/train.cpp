#include "rfop/train.hpp"

#include <cmath>
#include <cstdio>

namespace rfop {

void TrainPlan::validate() const {
  for (const PhasePlan* p : {&phase1, &phase2}) {
    if (p->epochs < 1) throw ConfigError("each training phase needs at least one epoch");
    if (!(p->lr_max > 0) || !(p->lr_min >= 0) || p->lr_min > p->lr_max) {
      throw ConfigError("learning rates must satisfy 0 <= lr_min <= lr_max, lr_max > 0");
    }
  }
  sampler.validate();
  if (batch_size() < 2) throw ConfigError("batch_size must be at least 2");
  if (!(weight_decay >= 0)) throw ConfigError("weight_decay must be non-negative");
  if (validation_same_trials < 1 || validation_diff_trials < 1) {
    throw ConfigError("validation needs at least one same and one different trial");
  }
}

TrainingData make_training_data(const FeatureStore& train, const FeatureStore& validation,
                                const std::string& language, const TrainPlan& plan) {
  TrainingData data{&train, IdentityIndex(train, language), &validation, {}};
  if (data.train_index.num_identities() < 2) {
    throw DataError("training split has fewer than 2 identities in language '" + language + "'");
  }
  // Separate stream so validation trials do not depend on the training seed path.
  Rng rng(plan.seed ^ 0x5eed0fa11dULL);
  data.validation_trials =
      build_trials(validation, language, plan.validation_same_trials, plan.validation_diff_trials, rng);
  return data;
}

double validation_eer(const RFOPParams& params, const TrainingData& data) {
  std::vector<Trial> trials = data.validation_trials;
  score_trials(params, *data.validation, trials);
  return compute_eer(trials).eer_percent;
}

PhaseResult run_phase(RFOPParams& params, AdamW& optimizer, const TrainingData& data, const PhaseSettings& settings,
                      Rng& rng) {
  const CosineSchedule schedule{settings.plan.lr_max, settings.plan.lr_min, settings.plan.epochs};
  PhaseResult result;
  std::optional<std::size_t> best;
  for (Index epoch = 1; epoch <= settings.plan.epochs; ++epoch) {
    const double lr = schedule.lr_at(epoch - 1);
    const std::vector<Batch> batches = epoch_batches(*data.train, data.train_index, settings.sampler, rng);
    EpochLog row{settings.phase, epoch, lr};
    for (const Batch& batch : batches) {
      params.zero_grad();
      Tape tape;
      const BoundParams bound = bind_parameters(tape, params);
      const ForwardOutput out = forward(bound, tape.constant(batch.face), tape.constant(batch.voice));
      const LossTerms loss = total_loss(out, batch.labels, settings.weights);
      const double total = loss.total.item();
      if (!std::isfinite(total)) {
        throw NumericalError("non-finite loss in phase " + std::to_string(settings.phase) + ", epoch " +
                             std::to_string(epoch) + ", step " + std::to_string(result.step_losses.size() + 1));
      }
      tape.backward(loss.total);
      optimizer.step(lr);
      result.step_losses.push_back(total);
      row.l_total += total;
      row.l_mse += loss.mse.item();
      row.l_op += loss.op.item();
      row.l_ce += loss.ce.item();
    }
    const double n = static_cast<double>(batches.size());
    row.l_total /= n;
    row.l_mse /= n;
    row.l_op /= n;
    row.l_ce /= n;
    row.val_eer = validation_eer(params, data);
    result.log.push_back(row);

    CheckpointRecord record{settings.phase, epoch, row.val_eer, std::nullopt};
    if (!best || record.val_eer < result.records[*best].val_eer) {
      if (best) result.records[*best].params.reset();
      record.params = params;
      best = result.records.size();
    }
    result.records.push_back(std::move(record));
  }
  return result;
}

const CheckpointRecord& select_best(std::span<const CheckpointRecord> records) {
  if (records.empty()) throw std::invalid_argument("select_best: no checkpoint records");
  std::size_t best = 0;
  for (std::size_t i = 1; i < records.size(); ++i) {
    const auto& r = records[i];
    const auto& b = records[best];
    if (r.val_eer < b.val_eer ||
        (r.val_eer == b.val_eer && std::make_pair(r.phase, r.epoch) < std::make_pair(b.phase, b.epoch))) {
      best = i;
    }
  }
  return records[best];
}

namespace {

std::vector<Tensor*> parameter_list(RFOPParams& params) {
  std::vector<Tensor*> out;
  for (auto& [name, t] : params.named()) out.push_back(t);
  return out;
}

}  // namespace

TrainResult two_phase_train(const TrainPlan& plan, const ModelConfig& model, const LossWeights& weights,
                            const TrainingData& data) {
  plan.validate();
  weights.validate();
  ModelConfig cfg = model;
  cfg.num_identities = data.train_index.num_identities();
  RFOPParams params = init_params(cfg);
  Rng rng(plan.seed);
  const AdamWConfig adam{0.9, 0.999, 1e-8, plan.weight_decay};

  TrainResult result;
  AdamW phase1_opt(parameter_list(params), adam);
  PhaseResult p1 = run_phase(params, phase1_opt, data, {1, plan.phase1, plan.sampler, weights}, rng);

  params = *select_best(p1.records).params;
  result.phase2_start = params;
  AdamW phase2_opt(parameter_list(params), adam);
  PhaseResult p2 = run_phase(params, phase2_opt, data, {2, plan.phase2, plan.sampler, weights}, rng);

  result.records = std::move(p1.records);
  result.records.insert(result.records.end(), std::make_move_iterator(p2.records.begin()),
                        std::make_move_iterator(p2.records.end()));
  result.log = std::move(p1.log);
  result.log.insert(result.log.end(), p2.log.begin(), p2.log.end());
  result.best = select_best(result.records);
  result.params = *result.best.params;
  return result;
}

std::string format_training_log(std::span<const EpochLog> log) {
  std::string out = "phase,epoch,lr,l_total,l_mse,l_op,l_ce,val_eer\n";
  char buf[512];
  for (const EpochLog& r : log) {
    std::snprintf(buf, sizeof buf, "%d,%ld,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", r.phase,
                  static_cast<long>(r.epoch), r.lr, r.l_total, r.l_mse, r.l_op, r.l_ce, r.val_eer);
    out += buf;
  }
  return out;
}

}  // namespace rfop
