#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "rfop/synthetic.hpp"
#include "rfop/train.hpp"

using namespace rfop;

namespace {

SyntheticSpec two_identity_spec() {
  SyntheticSpec s;
  s.num_identities = 4;  // two are held out for validation
  s.num_test_identities = 2;
  s.prototype_dim = 4;
  s.face_dim = 8;
  s.voice_dim = 6;
  s.samples_per_identity_per_language = 16;
  s.seed = 11;
  return s;
}

ModelConfig model_for(const SyntheticSpec& s, Index classes) {
  ModelConfig m;
  m.face_dim = s.face_dim;
  m.voice_dim = s.voice_dim;
  m.latent_dim = 8;
  m.num_identities = classes;
  m.seed = 1;
  return m;
}

TrainPlan small_plan() {
  TrainPlan plan;
  plan.phase1 = {1, 0.01, 0.0};
  plan.phase2 = {1, 0.0001, 0.0};
  plan.sampler = {2, 1};
  plan.validation_same_trials = 20;
  plan.validation_diff_trials = 20;
  return plan;
}

std::vector<Tensor*> all_params(RFOPParams& p) {
  std::vector<Tensor*> out;
  for (auto& [name, t] : p.named()) out.push_back(t);
  return out;
}

/// Loss over every training sample at once; order-independent.
double full_batch_loss(const RFOPParams& params, const TrainingData& data, Index per_identity) {
  Rng rng(0);
  const Batch all = sample_batch(*data.train, data.train_index,
                                 {data.train_index.num_identities(), per_identity}, rng);
  Tape tape;
  const ForwardOutput out = forward(bind_constants(tape, params), tape.constant(all.face), tape.constant(all.voice));
  return total_loss(out, all.labels, LossWeights{}).total.item();
}

}  // namespace

TEST_CASE("select_best") {
  std::vector<CheckpointRecord> records{{1, 1, 40.0, {}}, {1, 2, 30.0, {}}, {1, 3, 35.0, {}}};
  CHECK(select_best(records).epoch == 2);
  std::vector<CheckpointRecord> tie{{1, 1, 30.0, {}}, {1, 2, 30.0, {}}};
  CHECK(select_best(tie).epoch == 1);
  std::vector<CheckpointRecord> cross_phase{{2, 1, 30.0, {}}, {1, 7, 30.0, {}}};
  CHECK(select_best(cross_phase).phase == 1);
  std::vector<CheckpointRecord> one{{1, 4, 12.0, {}}};
  CHECK(select_best(one).epoch == 4);
  CHECK_THROWS(select_best(std::vector<CheckpointRecord>{}));
}

TEST_CASE("one epoch on a two-identity separable set lowers the training loss") {
  const SyntheticSpec spec = two_identity_spec();
  const SyntheticBenchmark bench = generate_synthetic(spec);
  TrainPlan plan = small_plan();
  const TrainingData data = make_training_data(bench.train, bench.validation, "L1", plan);
  REQUIRE(data.train_index.num_identities() == 2);

  RFOPParams params = init_params(model_for(spec, 2));
  const double before = full_batch_loss(params, data, 16);
  AdamW opt(all_params(params), {0.9, 0.999, 1e-8, plan.weight_decay});
  Rng rng(3);
  const PhaseResult r = run_phase(params, opt, data, {1, plan.phase1, plan.sampler, LossWeights{}}, rng);
  CHECK(r.step_losses.size() == 16);
  const double after = full_batch_loss(params, data, 16);
  CHECK(after < before);
  CHECK(r.step_losses.back() < r.step_losses.front());
  REQUIRE(r.records.size() == 1);
  CHECK(r.records[0].val_eer >= 0.0);
  CHECK(r.records[0].val_eer <= 100.0);
}

TEST_CASE("zero loss weights leave only weight decay") {
  const SyntheticSpec spec = two_identity_spec();
  const SyntheticBenchmark bench = generate_synthetic(spec);
  TrainPlan plan = small_plan();
  plan.phase1.epochs = 3;
  const TrainingData data = make_training_data(bench.train, bench.validation, "L1", plan);

  RFOPParams params = init_params(model_for(spec, 2));
  const RFOPParams start = params;
  AdamW opt(all_params(params), {0.9, 0.999, 1e-8, 0.2});
  Rng rng(3);
  const PhaseResult r = run_phase(params, opt, data, {1, plan.phase1, plan.sampler, LossWeights{0, 0, 0}}, rng);

  const CosineSchedule schedule{plan.phase1.lr_max, plan.phase1.lr_min, plan.phase1.epochs};
  const std::size_t steps_per_epoch = r.step_losses.size() / 3;
  double factor = 1.0;
  for (Index e = 0; e < 3; ++e)
    for (std::size_t s = 0; s < steps_per_epoch; ++s) factor *= 1 - schedule.lr_at(e) * 0.2;

  const auto now = params.named();
  const auto then = start.named();
  for (std::size_t i = 0; i < RFOPParams::count; ++i) {
    CHECK((now[i].second->data - factor * then[i].second->data).abs().maxCoeff() <= 1e-12);
  }
  for (double l : r.step_losses) CHECK(l == 0.0);
}

TEST_CASE("run_phase is deterministic for a fixed seed") {
  const SyntheticSpec spec = two_identity_spec();
  const SyntheticBenchmark bench = generate_synthetic(spec);
  TrainPlan plan = small_plan();
  plan.phase1.epochs = 2;
  const TrainingData data = make_training_data(bench.train, bench.validation, "L2", plan);
  auto run = [&] {
    RFOPParams params = init_params(model_for(spec, 2));
    AdamW opt(all_params(params));
    Rng rng(8);
    PhaseResult r = run_phase(params, opt, data, {1, plan.phase1, plan.sampler, LossWeights{}}, rng);
    return std::make_pair(r.step_losses, params);
  };
  const auto a = run();
  const auto b = run();
  CHECK(a.first == b.first);
  CHECK(a.second == b.second);
}

TEST_CASE("two-phase selection contracts") {
  SyntheticSpec spec = two_identity_spec();
  spec.num_identities = 12;
  spec.samples_per_identity_per_language = 8;
  const SyntheticBenchmark bench = generate_synthetic(spec);
  TrainPlan plan = small_plan();
  plan.phase1.epochs = 6;
  plan.phase2.epochs = 6;
  plan.sampler = {4, 2};
  const TrainingData data = make_training_data(bench.train, bench.validation, "L1", plan);
  const TrainResult r = two_phase_train(plan, model_for(spec, 1), LossWeights{}, data);

  REQUIRE(r.records.size() == 12);
  REQUIRE(r.log.size() == 12);
  const auto phase1 = std::span(r.records).first(6);
  const CheckpointRecord& p1_best = select_best(phase1);
  REQUIRE(p1_best.params);
  CHECK(r.phase2_start == *p1_best.params);

  double lowest = 100.0;
  for (const auto& rec : r.records) lowest = std::min(lowest, rec.val_eer);
  CHECK(r.best.val_eer == lowest);
  CHECK(r.params == *r.best.params);
  CHECK(r.params.classifier_weight.shape[0] == data.train_index.num_identities());
}

TEST_CASE("default synthetic benchmark end to end") {
  const SyntheticSpec spec;
  const SyntheticBenchmark bench = generate_synthetic(spec);
  const TrainPlan plan;
  ModelConfig model;
  model.face_dim = spec.face_dim;
  model.voice_dim = spec.voice_dim;
  model.seed = plan.seed;
  const TrainingData data = make_training_data(bench.train, bench.validation, "L1", plan);
  const TrainResult r = two_phase_train(plan, model, LossWeights{}, data);

  REQUIRE(r.records.size() == 100);
  double lowest = 100.0;
  for (const auto& rec : r.records) lowest = std::min(lowest, rec.val_eer);
  CHECK(r.best.val_eer == lowest);
  CHECK(r.best.val_eer < r.records.front().val_eer);

  // Mean cosine between face and voice latents: same identity vs different.
  const FeatureStore& test = bench.test;
  std::vector<std::size_t> faces, voices;
  for (std::size_t i = 0; i < test.size(); ++i) {
    const auto& rec = test.records()[i];
    if (rec.language != "L1") continue;
    (rec.modality == Modality::face ? faces : voices).push_back(i);
  }
  MatrixX zf = project_face(r.params, test.gather(faces));
  MatrixX zv = project_voice(r.params, test.gather(voices));
  zf.rowwise().normalize();
  zv.rowwise().normalize();
  const MatrixX cos = zf * zv.transpose();
  double same = 0, diff = 0;
  int ns = 0, nd = 0;
  for (Index i = 0; i < cos.rows(); ++i)
    for (Index j = 0; j < cos.cols(); ++j) {
      if (test.records()[faces[static_cast<std::size_t>(i)]].identity ==
          test.records()[voices[static_cast<std::size_t>(j)]].identity) {
        same += cos(i, j);
        ++ns;
      } else {
        diff += cos(i, j);
        ++nd;
      }
    }
  CHECK(same / ns > diff / nd + 0.1);
}

TEST_CASE("training log format") {
  const std::vector<EpochLog> log{{1, 1, 0.01, 1.5, 0.25, 1.0, 0.5, 12.5}};
  const std::string csv = format_training_log(log);
  CHECK(csv == "phase,epoch,lr,l_total,l_mse,l_op,l_ce,val_eer\n1,1,0.01,1.5,0.25,1,0.5,12.5\n");
}

TEST_CASE("plan validation") {
  TrainPlan plan;
  CHECK_NOTHROW(plan.validate());
  plan.sampler = {1, 1};
  CHECK_THROWS_AS(plan.validate(), ConfigError);
  plan = TrainPlan{};
  plan.phase1.epochs = 0;
  CHECK_THROWS_AS(plan.validate(), ConfigError);
  plan = TrainPlan{};
  plan.weight_decay = -1;
  CHECK_THROWS_AS(plan.validate(), ConfigError);
}
