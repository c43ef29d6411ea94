#include "rfop/cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <cstdio>
#include <ostream>

#include "rfop/bytes.hpp"
#include "rfop/checkpoint.hpp"
#include "rfop/config.hpp"
#include "rfop/gradcheck_suite.hpp"
#include "rfop/synthetic.hpp"
#include "rfop/train.hpp"

namespace rfop {

namespace fs = std::filesystem;

namespace {

struct TrainArgs {
  std::string config;
  std::string out;
  std::string log;
  std::optional<std::uint64_t> seed;
};

struct EvalArgs {
  std::vector<std::string> ckpts;
  std::string manifest;
  std::string blob;
  std::vector<std::string> trials;
  std::string report;
};

struct SynthArgs {
  std::string spec;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  Index trials_same = 1000;
  Index trials_diff = 1000;
};

std::string fixed(double value, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, value);
  return buf;
}

/// Holds out max(2, round(10%)) identities of `store` for validation.
std::pair<FeatureStore, FeatureStore> carve_validation(const FeatureStore& store, std::uint64_t seed) {
  std::vector<std::string> ids = store.identities();
  if (ids.size() < 4) throw DataError("training store needs at least 4 identities to hold out a validation split");
  Rng rng(seed);
  std::shuffle(ids.begin(), ids.end(), rng);
  const std::size_t n_val = std::max<std::size_t>(2, static_cast<std::size_t>(std::lround(0.1 * static_cast<double>(ids.size()))));
  std::vector<std::string> val(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_val));
  std::vector<std::string> train(ids.begin() + static_cast<std::ptrdiff_t>(n_val), ids.end());
  return {store.subset(train), store.subset(val)};
}

int cmd_train(const TrainArgs& args, std::ostream&, std::ostream& err) {
  RunConfig cfg;
  try {
    cfg = load_run_config(args.config);
    if (args.seed) {
      cfg.plan.seed = *args.seed;
      cfg.model.seed = *args.seed;
    }
    if (!args.log.empty()) cfg.paths.log = args.log;
    if (cfg.paths.log.empty()) cfg.paths.log = args.out + ".log.csv";
    if (fs::path(args.out).lexically_normal() == cfg.paths.log.lexically_normal()) {
      throw ConfigError("checkpoint and log paths coincide");
    }
    cfg.validate();
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  }

  FeatureStore train, validation;
  try {
    if (!fs::exists(cfg.paths.train_manifest)) throw DataError("missing file " + cfg.paths.train_manifest.string());
    if (!fs::exists(cfg.paths.train_blob)) throw DataError("missing file " + cfg.paths.train_blob.string());
    train = load_store(cfg.paths.train_manifest, cfg.paths.train_blob);
    if (!cfg.paths.validation_manifest.empty()) {
      validation = load_store(cfg.paths.validation_manifest, cfg.paths.validation_blob);
    } else {
      std::tie(train, validation) = carve_validation(train, cfg.plan.seed);
    }
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return kExitData;
  }

  try {
    const TrainingData data = make_training_data(train, validation, cfg.train_lang, cfg.plan);
    const IdentityIndex& index = data.train_index;
    if (!train.empty()) {
      const auto& rec = train.records();
      for (const auto& r : rec) {
        const Index expected = r.modality == Modality::face ? cfg.model.face_dim : cfg.model.voice_dim;
        if (r.dim != expected) {
          throw DataError("sample '" + r.sample_id + "' has dim " + std::to_string(r.dim) + ", model expects " +
                          std::to_string(expected));
        }
      }
    }
    err << "training on " << index.num_identities() << " identities (" << cfg.train_lang << ")\n";
    const TrainResult result = two_phase_train(cfg.plan, cfg.model, cfg.loss_weights, data);
    Checkpoint ckpt{result.params, {cfg.train_lang, result.best.epoch, result.best.val_eer, cfg.plan.seed}};
    save_checkpoint(args.out, ckpt);
    bytes::write_file(cfg.paths.log, format_training_log(result.log));
    err << "best checkpoint: phase " << result.best.phase << " epoch " << result.best.epoch
        << ", validation EER " << fixed(result.best.val_eer, 2) << "%\n";
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const NumericalError& e) {
    err << "numerical abort: " << e.what() << '\n';
    return kExitNumerical;
  }
  return kExitOk;
}

std::string trials_language(const FeatureStore& store, const std::vector<Trial>& trials) {
  std::string lang;
  for (const Trial& t : trials) {
    const std::string& l = store.at(t.voice_sample_id).language;
    if (lang.empty()) {
      lang = l;
    } else if (lang != l) {
      return "mixed";
    }
  }
  return lang;
}

int cmd_eval(const EvalArgs& args, std::ostream& out, std::ostream& err) {
  std::vector<Checkpoint> ckpts;
  try {
    for (const auto& path : args.ckpts) ckpts.push_back(load_checkpoint(path));
  } catch (const DataError& e) {
    err << "bad checkpoint: " << e.what() << '\n';
    return kExitConfig;
  }
  try {
    const FeatureStore store = load_store(args.manifest, args.blob);
    std::vector<TestSplit> splits;
    for (const auto& path : args.trials) {
      std::vector<Trial> trials = load_trials(path);
      if (trials.empty()) throw DataError(path + ": no trials");
      splits.push_back({trials_language(store, trials), std::move(trials)});
    }
    std::vector<TrainedRun> runs;
    for (const Checkpoint& c : ckpts) runs.push_back({c.meta.train_lang, &c.params});
    const EvalMatrix matrix = cross_config_report(runs, splits, store);
    bytes::write_file(args.report, matrix.to_csv());
    for (Index i = 0; i < matrix.eer.rows(); ++i) {
      for (Index j = 0; j < matrix.eer.cols(); ++j) {
        err << matrix.train_langs[i] << " -> " << matrix.test_langs[j] << '\n';
        out << "EER: " << format_one_decimal(matrix.eer(i, j)) << '\n';
      }
    }
    if (matrix.eer.size() > 1) out << "OVERALL: " << format_one_decimal(matrix.overall) << '\n';
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const ShapeError& e) {
    err << "data error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitOk;
}

int cmd_synth(const SynthArgs& args, std::ostream&, std::ostream& err) {
  SyntheticSpec spec;
  try {
    if (!args.spec.empty()) {
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(bytes::read_file(args.spec));
      } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("bad spec JSON: ") + e.what());
      } catch (const DataError& e) {
        throw ConfigError(e.what());
      }
      spec = j.get<SyntheticSpec>();
    }
    if (args.seed) spec.seed = *args.seed;
    spec.validate();
    if (args.trials_same < 0 || args.trials_diff < 0) throw ConfigError("trial counts must be non-negative");
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  }
  try {
    const fs::path dir(args.out_dir);
    fs::create_directories(dir);
    const SyntheticBenchmark bench = generate_synthetic(spec);
    save_store(bench.train, dir / "train_manifest.csv", dir / "train_features.bin");
    save_store(bench.validation, dir / "validation_manifest.csv", dir / "validation_features.bin");
    save_store(bench.test, dir / "test_manifest.csv", dir / "test_features.bin");
    Rng rng(spec.seed + 1);
    for (const std::string& lang : spec.languages) {
      const auto trials = build_trials(bench.test, lang, args.trials_same, args.trials_diff, rng);
      save_trials(dir / ("trials_test_" + lang + ".csv"), trials);
    }
    err << "wrote " << bench.train.identities().size() << " train, " << bench.validation.identities().size()
        << " validation and " << bench.test.identities().size() << " test identities to " << dir.string() << '\n';
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const fs::filesystem_error& e) {
    err << "data error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitOk;
}

int cmd_eer(const std::string& scores_path, std::ostream& out, std::ostream& err) {
  try {
    const ScoredLabels s = load_scores(scores_path);
    const EerResult r = compute_eer(s.scores, s.labels);
    out << "EER: " << fixed(r.eer_percent, 2) << '\n';
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitOk;
}

int cmd_gradcheck(double tol, std::ostream& out, std::ostream& err) {
  if (!(tol > 0)) {
    err << "config error: --tol must be positive\n";
    return kExitConfig;
  }
  bool all_pass = true;
  char buf[256];
  for (const OpCheck& c : run_gradcheck_suite(tol)) {
    std::snprintf(buf, sizeof buf, "%-24s max_rel_err=%.3e %s", c.name.c_str(), c.report.max_rel_err,
                  c.report.pass ? "PASS" : "FAIL");
    out << buf;
    if (!c.report.error.empty()) out << " (" << c.report.error << ')';
    out << '\n';
    all_pass = all_pass && c.report.pass;
  }
  return all_pass ? kExitOk : kExitCheckFailed;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Cross-modal face-voice verification: training, evaluation, synthetic data and checks", "rfop"};
  app.require_subcommand(1);

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train", "Two-phase training; writes an RFOP1 checkpoint and a CSV log");
  train_cmd->add_option("--config", train.config, "Run configuration (JSON)")->required();
  train_cmd->add_option("--out", train.out, "Checkpoint path")->required();
  train_cmd->add_option("--log", train.log, "Training-log CSV (default: <out>.log.csv or paths.log)");
  train_cmd->add_option("--seed", train.seed, "Overrides plan.seed and model.seed");

  EvalArgs eval;
  auto* eval_cmd = app.add_subcommand("eval", "Score trials with trained checkpoints and report EERs");
  eval_cmd->add_option("--ckpt", eval.ckpts, "Checkpoint(s); one report row block per checkpoint")->required();
  eval_cmd->add_option("--manifest", eval.manifest, "Feature-store manifest CSV")->required();
  eval_cmd->add_option("--blob", eval.blob, "Feature-store blob")->required();
  eval_cmd->add_option("--trials", eval.trials, "Trials CSV(s), one per test language")->required();
  eval_cmd->add_option("--report", eval.report, "Report CSV to write")->required();

  SynthArgs synth;
  auto* synth_cmd = app.add_subcommand("synth", "Generate the synthetic multilingual benchmark");
  synth_cmd->add_option("--spec", synth.spec, "Synthetic spec (JSON); defaults apply when omitted");
  synth_cmd->add_option("--out-dir", synth.out_dir, "Output directory")->required();
  synth_cmd->add_option("--seed", synth.seed, "Overrides the spec seed");
  synth_cmd->add_option("--trials-same", synth.trials_same, "Same-identity test trials per language")
      ->capture_default_str();
  synth_cmd->add_option("--trials-diff", synth.trials_diff, "Different-identity test trials per language")
      ->capture_default_str();

  std::string scores;
  auto* eer_cmd = app.add_subcommand("eer", "Equal error rate of a `score,label` CSV");
  eer_cmd->add_option("--scores", scores, "Scores CSV")->required();

  double tol = 1e-4;
  auto* grad_cmd = app.add_subcommand("gradcheck", "Finite-difference check of every differentiable op");
  grad_cmd->add_option("--tol", tol, "Maximum relative error")->capture_default_str();

  std::vector<std::string> argv_store;
  argv_store.push_back("rfop");
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& a : argv_store) argv.push_back(a.data());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  if (*train_cmd) return cmd_train(train, out, err);
  if (*eval_cmd) return cmd_eval(eval, out, err);
  if (*synth_cmd) return cmd_synth(synth, out, err);
  if (*eer_cmd) return cmd_eer(scores, out, err);
  return cmd_gradcheck(tol, out, err);
}

}  // namespace rfop
