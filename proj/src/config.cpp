#include "hlic/config.hpp"

#include <fstream>
#include <set>

#include "json.hpp"

#include "hlic/error.hpp"

namespace hlic {

namespace {

using nlohmann::json;

[[noreturn]] void bad(const std::string& msg) {
  throw InvalidInput("config: " + msg);
}

void check_keys(const json& obj, const std::string& where,
                const std::set<std::string>& allowed) {
  if (!obj.is_object()) bad("'" + where + "' must be an object");
  for (const auto& item : obj.items()) {
    if (allowed.find(item.key()) == allowed.end()) {
      bad("unknown key '" + where + "." + item.key() + "'");
    }
  }
}

template <typename T>
void get_to(const json& obj, const char* key, const std::string& where,
            T& out) {
  if (!obj.contains(key)) return;
  try {
    obj.at(key).get_to(out);
  } catch (const json::exception&) {
    bad("bad value for '" + where + "." + key + "'");
  }
}

TermShaping parse_shaping(const json& obj, const std::string& where) {
  check_keys(obj, where, {"kind", "weight"});
  TermShaping t;
  std::string kind = "quadratic";
  get_to(obj, "kind", where, kind);
  t.kind = shaping_kind_from_name(kind);
  get_to(obj, "weight", where, t.weight);
  return t;
}

json shaping_to_json(const TermShaping& t) {
  return {{"kind", shaping_kind_name(t.kind)}, {"weight", t.weight}};
}

}  // namespace

AppConfig default_app_config() { return AppConfig{}; }

AppConfig load_app_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("config: cannot open '" + path + "'");
  json root;
  try {
    in >> root;
  } catch (const json::exception& e) {
    throw InvalidInput("config '" + path + "': parse error: " + e.what());
  }
  if (!root.is_object()) bad("top level must be an object");
  check_keys(root, "$",
             {"run", "surrogate", "toy_codec", "baseline"});

  AppConfig cfg;

  if (root.contains("run")) {
    const json& run = root["run"];
    check_keys(run, "run",
               {"trainee", "arms", "trajectory_length", "epochs", "seed",
                "r_target", "reward_preset", "reward_weights", "psnr_curve",
                "msssim_curve", "out", "clip_epsilon", "gamma", "gae_lambda",
                "update_epochs", "value_loss_weight", "entropy_bonus_weight",
                "policy_lr"});
    std::string kind = trainee_kind_name(cfg.trainee);
    get_to(run, "trainee", "run", kind);
    cfg.trainee = trainee_kind_from_name(kind);
    get_to(run, "arms", "run", cfg.arms);
    get_to(run, "trajectory_length", "run", cfg.trajectory_length);
    get_to(run, "epochs", "run", cfg.epochs);
    get_to(run, "seed", "run", cfg.seed);
    get_to(run, "r_target", "run", cfg.r_target);
    get_to(run, "psnr_curve", "run", cfg.psnr_curve_path);
    get_to(run, "msssim_curve", "run", cfg.msssim_curve_path);
    get_to(run, "out", "run", cfg.out_dir);
    get_to(run, "clip_epsilon", "run", cfg.ppo.clip_epsilon);
    get_to(run, "gamma", "run", cfg.ppo.gamma);
    get_to(run, "gae_lambda", "run", cfg.ppo.gae_lambda);
    get_to(run, "update_epochs", "run", cfg.ppo.update_epochs);
    get_to(run, "value_loss_weight", "run", cfg.ppo.value_loss_weight);
    get_to(run, "entropy_bonus_weight", "run", cfg.ppo.entropy_bonus_weight);
    get_to(run, "policy_lr", "run", cfg.ppo.adam.lr);
    if (run.contains("reward_preset") && run.contains("reward_weights")) {
      bad("'run.reward_preset' and 'run.reward_weights' are exclusive");
    }
    if (run.contains("reward_preset")) {
      std::string preset;
      get_to(run, "reward_preset", "run", preset);
      cfg.reward.use_preset = true;
      cfg.reward.preset = reward_preset_from_name(preset);
    } else if (run.contains("reward_weights")) {
      const json& w = run["reward_weights"];
      check_keys(w, "run.reward_weights", {"rate", "psnr", "msssim"});
      cfg.reward.use_preset = false;
      if (w.contains("rate")) {
        cfg.reward.rate = parse_shaping(w["rate"], "run.reward_weights.rate");
      }
      if (w.contains("psnr")) {
        cfg.reward.psnr = parse_shaping(w["psnr"], "run.reward_weights.psnr");
      }
      if (w.contains("msssim")) {
        cfg.reward.msssim =
            parse_shaping(w["msssim"], "run.reward_weights.msssim");
      }
    }
  }

  if (root.contains("surrogate")) {
    const json& s = root["surrogate"];
    check_keys(s, "surrogate",
               {"r_ref", "w_ref", "c1", "kappa", "d_psnr", "d_msssim", "eta",
                "noise_sigma", "psnr_curve", "msssim_curve"});
    get_to(s, "r_ref", "surrogate", cfg.surrogate.r_ref);
    get_to(s, "w_ref", "surrogate", cfg.surrogate.w_ref);
    get_to(s, "c1", "surrogate", cfg.surrogate.c1);
    get_to(s, "kappa", "surrogate", cfg.surrogate.kappa);
    get_to(s, "d_psnr", "surrogate", cfg.surrogate.d_psnr);
    get_to(s, "d_msssim", "surrogate", cfg.surrogate.d_msssim);
    get_to(s, "eta", "surrogate", cfg.surrogate.eta);
    get_to(s, "noise_sigma", "surrogate", cfg.surrogate.noise_sigma);
    get_to(s, "psnr_curve", "surrogate", cfg.surrogate_psnr_curve_path);
    get_to(s, "msssim_curve", "surrogate", cfg.surrogate_msssim_curve_path);
  }

  if (root.contains("toy_codec")) {
    const json& t = root["toy_codec"];
    check_keys(t, "toy_codec",
               {"latent_channels", "block", "crop", "steps_per_epoch",
                "batch", "lr", "sigma_init", "transform_scale", "dataset"});
    get_to(t, "latent_channels", "toy_codec", cfg.toy.latent_channels);
    get_to(t, "block", "toy_codec", cfg.toy.block);
    get_to(t, "crop", "toy_codec", cfg.toy.crop);
    get_to(t, "steps_per_epoch", "toy_codec", cfg.toy.steps_per_epoch);
    get_to(t, "batch", "toy_codec", cfg.toy.batch);
    get_to(t, "lr", "toy_codec", cfg.toy.lr);
    get_to(t, "sigma_init", "toy_codec", cfg.toy.sigma_init);
    get_to(t, "transform_scale", "toy_codec", cfg.toy.transform_scale);
    if (t.contains("dataset")) {
      const json& d = t["dataset"];
      check_keys(d, "toy_codec.dataset",
                 {"kind", "train_count", "val_count", "width", "height",
                  "seed", "train_dir", "val_dir"});
      std::string kind = "synthetic";
      get_to(d, "kind", "toy_codec.dataset", kind);
      if (kind == "synthetic") {
        cfg.dataset.kind = DatasetSpec::Kind::kSynthetic;
      } else if (kind == "files") {
        cfg.dataset.kind = DatasetSpec::Kind::kFiles;
      } else {
        bad("unknown dataset kind '" + kind + "'");
      }
      get_to(d, "train_count", "toy_codec.dataset", cfg.dataset.train_count);
      get_to(d, "val_count", "toy_codec.dataset", cfg.dataset.val_count);
      get_to(d, "width", "toy_codec.dataset", cfg.dataset.width);
      get_to(d, "height", "toy_codec.dataset", cfg.dataset.height);
      get_to(d, "seed", "toy_codec.dataset", cfg.dataset.seed);
      get_to(d, "train_dir", "toy_codec.dataset", cfg.dataset.train_dir);
      get_to(d, "val_dir", "toy_codec.dataset", cfg.dataset.val_dir);
      if (cfg.dataset.kind == DatasetSpec::Kind::kFiles &&
          (cfg.dataset.train_dir.empty() || cfg.dataset.val_dir.empty())) {
        bad("dataset kind 'files' requires train_dir and val_dir");
      }
    }
  }

  if (root.contains("baseline")) {
    const json& b = root["baseline"];
    check_keys(b, "baseline",
               {"epochs", "mse_lambdas", "msssim_lambdas", "label"});
    get_to(b, "epochs", "baseline", cfg.baseline.epochs);
    get_to(b, "mse_lambdas", "baseline", cfg.baseline.mse_lambdas);
    get_to(b, "msssim_lambdas", "baseline", cfg.baseline.msssim_lambdas);
    get_to(b, "label", "baseline", cfg.baseline.label);
  }

  return cfg;
}

std::string app_config_to_json(const AppConfig& cfg) {
  json run = {
      {"trainee", trainee_kind_name(cfg.trainee)},
      {"arms", cfg.arms},
      {"trajectory_length", cfg.trajectory_length},
      {"epochs", cfg.epochs},
      {"seed", cfg.seed},
      {"r_target", cfg.r_target},
      {"psnr_curve", cfg.psnr_curve_path},
      {"msssim_curve", cfg.msssim_curve_path},
      {"out", cfg.out_dir},
      {"clip_epsilon", cfg.ppo.clip_epsilon},
      {"gamma", cfg.ppo.gamma},
      {"gae_lambda", cfg.ppo.gae_lambda},
      {"update_epochs", cfg.ppo.update_epochs},
      {"value_loss_weight", cfg.ppo.value_loss_weight},
      {"entropy_bonus_weight", cfg.ppo.entropy_bonus_weight},
      {"policy_lr", cfg.ppo.adam.lr},
  };
  if (cfg.reward.use_preset) {
    run["reward_preset"] = reward_preset_name(cfg.reward.preset);
  } else {
    run["reward_weights"] = {{"rate", shaping_to_json(cfg.reward.rate)},
                             {"psnr", shaping_to_json(cfg.reward.psnr)},
                             {"msssim", shaping_to_json(cfg.reward.msssim)}};
  }

  json dataset = {{"kind", cfg.dataset.kind == DatasetSpec::Kind::kSynthetic
                               ? "synthetic"
                               : "files"},
                  {"train_count", cfg.dataset.train_count},
                  {"val_count", cfg.dataset.val_count},
                  {"width", cfg.dataset.width},
                  {"height", cfg.dataset.height},
                  {"seed", cfg.dataset.seed},
                  {"train_dir", cfg.dataset.train_dir},
                  {"val_dir", cfg.dataset.val_dir}};

  json root = {
      {"run", run},
      {"surrogate",
       {{"r_ref", cfg.surrogate.r_ref},
        {"w_ref", cfg.surrogate.w_ref},
        {"c1", cfg.surrogate.c1},
        {"kappa", cfg.surrogate.kappa},
        {"d_psnr", cfg.surrogate.d_psnr},
        {"d_msssim", cfg.surrogate.d_msssim},
        {"eta", cfg.surrogate.eta},
        {"noise_sigma", cfg.surrogate.noise_sigma},
        {"psnr_curve", cfg.surrogate_psnr_curve_path},
        {"msssim_curve", cfg.surrogate_msssim_curve_path}}},
      {"toy_codec",
       {{"latent_channels", cfg.toy.latent_channels},
        {"block", cfg.toy.block},
        {"crop", cfg.toy.crop},
        {"steps_per_epoch", cfg.toy.steps_per_epoch},
        {"batch", cfg.toy.batch},
        {"lr", cfg.toy.lr},
        {"sigma_init", cfg.toy.sigma_init},
        {"transform_scale", cfg.toy.transform_scale},
        {"dataset", dataset}}},
      {"baseline",
       {{"epochs", cfg.baseline.epochs},
        {"mse_lambdas", cfg.baseline.mse_lambdas},
        {"msssim_lambdas", cfg.baseline.msssim_lambdas},
        {"label", cfg.baseline.label}}},
  };
  return root.dump(2) + "\n";
}

}  // namespace hlic
