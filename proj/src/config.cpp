#include "rfop/config.hpp"

#include <set>

#include "rfop/bytes.hpp"

namespace rfop {

using nlohmann::json;

namespace {

void reject_unknown(const json& j, const char* section, std::initializer_list<const char*> keys) {
  if (!j.is_object()) throw ConfigError(std::string(section) + " must be a JSON object");
  std::set<std::string> known(keys.begin(), keys.end());
  for (const auto& [key, value] : j.items()) {
    if (!known.count(key)) throw ConfigError("unknown key '" + key + "' in " + section);
  }
}

template <typename T>
void take(const json& j, const char* key, T& field) {
  if (j.contains(key)) j.at(key).get_to(field);
}

std::filesystem::path resolve(const json& j, const char* key, const std::filesystem::path& base) {
  if (!j.contains(key)) return {};
  std::filesystem::path p = j.at(key).get<std::string>();
  if (p.is_relative() && !base.empty()) p = base / p;
  return p;
}

void parse_phase(const json& j, const char* section, PhasePlan& phase) {
  reject_unknown(j, section, {"epochs", "lr_max", "lr_min"});
  take(j, "epochs", phase.epochs);
  take(j, "lr_max", phase.lr_max);
  take(j, "lr_min", phase.lr_min);
}

}  // namespace

void RunConfig::validate() const {
  model.validate();
  loss_weights.validate();
  plan.validate();
  if (train_lang.empty()) throw ConfigError("train_lang must be set");
  if (paths.train_manifest.empty() || paths.train_blob.empty()) {
    throw ConfigError("paths.train_manifest and paths.train_blob are required");
  }
  if (paths.validation_manifest.empty() != paths.validation_blob.empty()) {
    throw ConfigError("paths.validation_manifest and paths.validation_blob must be given together");
  }
  std::set<std::filesystem::path> seen;
  for (const auto* p : {&paths.train_manifest, &paths.train_blob, &paths.validation_manifest,
                        &paths.validation_blob, &paths.log}) {
    if (p->empty()) continue;
    if (!seen.insert(p->lexically_normal()).second) {
      throw ConfigError("path '" + p->string() + "' is referenced more than once");
    }
  }
}

RunConfig parse_run_config(const json& j, const std::filesystem::path& base) {
  RunConfig cfg;
  try {
    reject_unknown(j, "config", {"model", "loss_weights", "plan", "paths", "languages"});
    if (j.contains("model")) {
      const json& m = j.at("model");
      reject_unknown(m, "model", {"face_dim", "voice_dim", "latent_dim", "conv_kernel", "seed"});
      take(m, "face_dim", cfg.model.face_dim);
      take(m, "voice_dim", cfg.model.voice_dim);
      take(m, "latent_dim", cfg.model.latent_dim);
      take(m, "conv_kernel", cfg.model.conv_kernel);
      take(m, "seed", cfg.model.seed);
    }
    if (j.contains("loss_weights")) {
      const json& w = j.at("loss_weights");
      reject_unknown(w, "loss_weights", {"alpha_mse", "alpha_op", "alpha_ce"});
      take(w, "alpha_mse", cfg.loss_weights.mse);
      take(w, "alpha_op", cfg.loss_weights.op);
      take(w, "alpha_ce", cfg.loss_weights.ce);
    }
    if (j.contains("plan")) {
      const json& p = j.at("plan");
      reject_unknown(p, "plan",
                     {"phase1", "phase2", "batch_size", "identities_per_batch", "weight_decay", "seed",
                      "validation_same_trials", "validation_diff_trials"});
      if (p.contains("phase1")) parse_phase(p.at("phase1"), "plan.phase1", cfg.plan.phase1);
      if (p.contains("phase2")) parse_phase(p.at("phase2"), "plan.phase2", cfg.plan.phase2);
      take(p, "identities_per_batch", cfg.plan.sampler.identities_per_batch);
      if (p.contains("batch_size")) {
        const auto batch = p.at("batch_size").get<Index>();
        const Index ids = cfg.plan.sampler.identities_per_batch;
        if (ids < 1 || batch % ids != 0) {
          throw ConfigError("plan.batch_size must be a multiple of plan.identities_per_batch");
        }
        cfg.plan.sampler.samples_per_identity = batch / ids;
      }
      take(p, "weight_decay", cfg.plan.weight_decay);
      take(p, "seed", cfg.plan.seed);
      take(p, "validation_same_trials", cfg.plan.validation_same_trials);
      take(p, "validation_diff_trials", cfg.plan.validation_diff_trials);
    }
    if (j.contains("paths")) {
      const json& p = j.at("paths");
      reject_unknown(p, "paths", {"train_manifest", "train_blob", "validation_manifest", "validation_blob", "log"});
      cfg.paths.train_manifest = resolve(p, "train_manifest", base);
      cfg.paths.train_blob = resolve(p, "train_blob", base);
      cfg.paths.validation_manifest = resolve(p, "validation_manifest", base);
      cfg.paths.validation_blob = resolve(p, "validation_blob", base);
      cfg.paths.log = resolve(p, "log", base);
    }
    if (j.contains("languages")) {
      const json& l = j.at("languages");
      reject_unknown(l, "languages", {"train_lang", "test_langs"});
      take(l, "train_lang", cfg.train_lang);
      take(l, "test_langs", cfg.test_langs);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::string text;
  try {
    text = bytes::read_file(path);
  } catch (const DataError& e) {
    throw ConfigError(e.what());
  }
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
  return parse_run_config(j, path.parent_path());
}

json to_json(const RunConfig& cfg) {
  auto phase = [](const PhasePlan& p) { return json{{"epochs", p.epochs}, {"lr_max", p.lr_max}, {"lr_min", p.lr_min}}; };
  return {{"model",
           {{"face_dim", cfg.model.face_dim},
            {"voice_dim", cfg.model.voice_dim},
            {"latent_dim", cfg.model.latent_dim},
            {"conv_kernel", cfg.model.conv_kernel},
            {"seed", cfg.model.seed}}},
          {"loss_weights",
           {{"alpha_mse", cfg.loss_weights.mse}, {"alpha_op", cfg.loss_weights.op}, {"alpha_ce", cfg.loss_weights.ce}}},
          {"plan",
           {{"phase1", phase(cfg.plan.phase1)},
            {"phase2", phase(cfg.plan.phase2)},
            {"batch_size", cfg.plan.batch_size()},
            {"identities_per_batch", cfg.plan.sampler.identities_per_batch},
            {"weight_decay", cfg.plan.weight_decay},
            {"seed", cfg.plan.seed},
            {"validation_same_trials", cfg.plan.validation_same_trials},
            {"validation_diff_trials", cfg.plan.validation_diff_trials}}},
          {"paths",
           {{"train_manifest", cfg.paths.train_manifest.string()},
            {"train_blob", cfg.paths.train_blob.string()},
            {"validation_manifest", cfg.paths.validation_manifest.string()},
            {"validation_blob", cfg.paths.validation_blob.string()},
            {"log", cfg.paths.log.string()}}},
          {"languages", {{"train_lang", cfg.train_lang}, {"test_langs", cfg.test_langs}}}};
}

}  // namespace rfop
