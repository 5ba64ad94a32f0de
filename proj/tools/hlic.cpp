#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"

#include "hlic/config.hpp"
#include "hlic/error.hpp"
#include "hlic/harness.hpp"
#include "hlic/image_io.hpp"
#include "hlic/surrogate.hpp"
#include "hlic/synthdata.hpp"
#include "hlic/textio.hpp"
#include "hlic/toy_codec.hpp"

namespace fs = std::filesystem;
using namespace hlic;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitNumeric = 3;

std::vector<Image> load_image_dir(const std::string& dir) {
  std::vector<std::string> paths;
  if (!fs::is_directory(dir)) {
    throw InvalidInput("dataset: '" + dir + "' is not a directory");
  }
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const std::string ext = entry.path().extension().string();
    if (ext == ".pgm" || ext == ".ppm") paths.push_back(entry.path().string());
  }
  std::sort(paths.begin(), paths.end());
  if (paths.empty()) {
    throw InvalidInput("dataset: no .pgm/.ppm files in '" + dir + "'");
  }
  std::vector<Image> images;
  images.reserve(paths.size());
  for (const std::string& p : paths) images.push_back(read_image(p));
  return images;
}

TraineeFactory make_factory(const AppConfig& cfg) {
  if (cfg.trainee == TraineeKind::kSurrogate) {
    SurrogateConfig s = cfg.surrogate;
    s.psnr_curve = cfg.surrogate_psnr_curve_path.empty()
                       ? default_surrogate_psnr_curve()
                       : load_curve(cfg.surrogate_psnr_curve_path);
    s.msssim_curve = cfg.surrogate_msssim_curve_path.empty()
                         ? default_surrogate_msssim_curve()
                         : load_curve(cfg.surrogate_msssim_curve_path);
    return [s] { return std::make_unique<SurrogateTrainee>(s); };
  }
  std::vector<Image> train, val;
  if (cfg.dataset.kind == DatasetSpec::Kind::kSynthetic) {
    train = synthetic_images(cfg.dataset.train_count, cfg.dataset.width,
                             cfg.dataset.height, cfg.dataset.seed);
    val = synthetic_images(cfg.dataset.val_count, cfg.dataset.width,
                           cfg.dataset.height, cfg.dataset.seed + 1);
  } else {
    train = load_image_dir(cfg.dataset.train_dir);
    val = load_image_dir(cfg.dataset.val_dir);
  }
  auto toy = cfg.toy;
  auto train_ptr = std::make_shared<std::vector<Image>>(std::move(train));
  auto val_ptr = std::make_shared<std::vector<Image>>(std::move(val));
  return [toy, train_ptr, val_ptr] {
    return std::make_unique<ToyCodecTrainee>(toy, *train_ptr, *val_ptr);
  };
}

RewardConfig resolve_reward(const AppConfig& cfg) {
  if (!fs::exists(cfg.psnr_curve_path) || !fs::exists(cfg.msssim_curve_path)) {
    throw InvalidInput(
        "reward: baseline curve file(s) missing ('" + cfg.psnr_curve_path +
        "', '" + cfg.msssim_curve_path +
        "'); run the `baseline` command first to generate them");
  }
  RDCurve pc = load_curve(cfg.psnr_curve_path);
  RDCurve mc = load_curve(cfg.msssim_curve_path);
  if (cfg.reward.use_preset) {
    return make_preset(cfg.reward.preset, cfg.r_target, std::move(pc),
                       std::move(mc));
  }
  RewardConfig rc;
  rc.r_target = cfg.r_target;
  rc.rate = cfg.reward.rate;
  rc.psnr = cfg.reward.psnr;
  rc.msssim = cfg.reward.msssim;
  rc.psnr_curve = std::move(pc);
  rc.msssim_curve = std::move(mc);
  rc.validate();
  return rc;
}

void prepare_out_dir(const AppConfig& cfg) {
  fs::create_directories(cfg.out_dir);
  std::ofstream echo(cfg.out_dir + "/config_echo.json");
  if (!echo) {
    throw InvalidInput("cannot write config echo in '" + cfg.out_dir + "'");
  }
  echo << app_config_to_json(cfg);
}

void save_trainee(const Trainee& trainee, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InvalidInput("cannot write trainee state '" + path + "'");
  trainee.save_state(out);
}

int cmd_metrics(const std::string& ref_path, const std::string& dist_path) {
  Image ref = read_image(ref_path);
  Image dist = read_image(dist_path);
  const double psnr_v = psnr(ref, dist);
  const double msssim_v = ms_ssim_auto(ref, dist, MsSsimConfig{});
  std::cout << "psnr " << format_fixed6(psnr_v) << "\n";
  std::cout << "ms_ssim " << format_fixed6(msssim_v) << "\n";
  std::cout << "mse " << format_fixed6(mse(ref, dist)) << "\n";
  std::cout << "total_variation " << format_fixed6(total_variation(ref))
            << "\n";
  std::cout << "gradient_loss " << format_fixed6(gradient_loss(ref, dist))
            << "\n";
  return kExitOk;
}

struct LadderPoint {
  std::string ladder;
  double lambda = 0.0;
  EvalStats stats;
};

int cmd_baseline(const AppConfig& cfg) {
  if (cfg.baseline.mse_lambdas.empty() || cfg.baseline.msssim_lambdas.empty()) {
    throw InvalidInput("baseline: config must list mse_lambdas and "
                       "msssim_lambdas (non-empty)");
  }
  prepare_out_dir(cfg);
  TraineeFactory factory = make_factory(cfg);

  std::vector<LadderPoint> points;
  auto run_ladder = [&](const std::vector<double>& lambdas, bool mse_side) {
    std::vector<RDPoint> knots;
    for (double lam : lambdas) {
      if (!(lam > 0.0)) {
        throw InvalidInput("baseline: ladder weights must be positive");
      }
      const LambdaWeights lw =
          mse_side ? LambdaWeights(std::log(lam), -kLambdaPrimeClamp)
                   : LambdaWeights(-kLambdaPrimeClamp, std::log(lam));
      FixedResult res =
          run_fixed(lw, cfg.baseline.epochs, cfg.seed, factory);
      const EvalStats& s = res.final_stats;
      knots.push_back({s.rate(), mse_side ? s.psnr : s.ms_ssim});
      points.push_back({mse_side ? "mse" : "msssim", lam, s});
    }
    std::sort(knots.begin(), knots.end(),
              [](const RDPoint& a, const RDPoint& b) { return a.bpp < b.bpp; });
    return knots;
  };

  std::vector<RDPoint> psnr_knots = run_ladder(cfg.baseline.mse_lambdas, true);
  std::vector<RDPoint> msssim_knots =
      run_ladder(cfg.baseline.msssim_lambdas, false);

  // A ladder that fails to produce a valid frontier is refused outright.
  RDCurve psnr_curve, msssim_curve;
  try {
    psnr_curve = RDCurve(MetricKind::kPsnr, cfg.baseline.label + " psnr",
                         psnr_knots);
    msssim_curve = RDCurve(MetricKind::kMsSsim,
                           cfg.baseline.label + " ms_ssim", msssim_knots);
  } catch (const InvalidInput& e) {
    throw NumericError(std::string("baseline: resulting curve is not a "
                                   "valid frontier; widen or reorder the "
                                   "lambda ladder (") +
                       e.what() + ")");
  }
  save_curve(psnr_curve, cfg.out_dir + "/psnr_baseline.curve");
  save_curve(msssim_curve, cfg.out_dir + "/msssim_baseline.curve");

  std::ofstream csv(cfg.out_dir + "/baseline_points.csv");
  csv << "ladder,lambda,bpp,psnr,ms_ssim,gradient_loss,total_variation\n";
  for (const LadderPoint& p : points) {
    csv << p.ladder << ',' << format_double(p.lambda) << ','
        << format_double(p.stats.rate()) << ',' << format_double(p.stats.psnr)
        << ',' << format_double(p.stats.ms_ssim) << ','
        << format_double(p.stats.gradient_loss) << ','
        << format_double(p.stats.total_variation) << "\n";
  }
  std::cout << "baseline: wrote " << cfg.out_dir << "/psnr_baseline.curve, "
            << cfg.out_dir << "/msssim_baseline.curve\n";
  return kExitOk;
}

int cmd_harmonize(const AppConfig& cfg) {
  prepare_out_dir(cfg);
  RunConfig run;
  run.trainee = cfg.trainee;
  run.num_trainees = cfg.arms;
  run.trajectory_length = cfg.trajectory_length;
  run.total_epochs = cfg.epochs;
  run.seed = cfg.seed;
  run.reward = resolve_reward(cfg);
  run.ppo = cfg.ppo;

  HlicResult res = run_hlic(run, make_factory(cfg));
  write_run_csv(res.log, cfg.out_dir + "/run.csv");
  write_run_summary(res.log, "harmonize", cfg.seed, cfg.trainee,
                    cfg.out_dir + "/summary.txt");
  save_trainee(*res.best_trainee, cfg.out_dir + "/trainee_final.state");
  {
    std::ofstream out(cfg.out_dir + "/policy_final.state");
    res.policy->save(out);
  }
  const auto& last = res.log.epochs.back();
  const auto& best = last.trainees[static_cast<size_t>(
      last.best_index >= 0 ? last.best_index : 0)];
  std::cout << "harmonize: " << cfg.epochs << " epochs, final reward "
            << format_fixed6(best.reward.total) << ", lambda_prime ("
            << format_fixed6(best.lambda_prime[0]) << ", "
            << format_fixed6(best.lambda_prime[1]) << ")\n";
  return kExitOk;
}

int run_fixed_mode(const AppConfig& cfg, const LambdaWeights& lambda,
                   const std::string& mode) {
  prepare_out_dir(cfg);
  FixedResult res =
      run_fixed(lambda, cfg.epochs, cfg.seed, make_factory(cfg));
  write_run_csv(res.log, cfg.out_dir + "/run.csv");
  write_run_summary(res.log, mode, cfg.seed, cfg.trainee,
                    cfg.out_dir + "/summary.txt");
  save_trainee(*res.trainee, cfg.out_dir + "/trainee_final.state");
  std::cout << mode << ": " << cfg.epochs << " epochs, final bpp "
            << format_fixed6(res.final_stats.rate()) << ", psnr "
            << format_fixed6(res.final_stats.psnr) << ", ms_ssim "
            << format_fixed6(res.final_stats.ms_ssim) << "\n";
  return kExitOk;
}

int cmd_report(const std::string& from, const std::string& out_dir) {
  RunLog log = read_run_csv(from);
  fs::create_directories(out_dir);

  std::ofstream rd_psnr(out_dir + "/report_rd_psnr.csv");
  std::ofstream rd_msssim(out_dir + "/report_rd_msssim.csv");
  std::ofstream lam(out_dir + "/report_lambda.csv");
  std::ofstream rew(out_dir + "/report_reward.csv");
  rd_psnr << "epoch,bpp,psnr\n";
  rd_msssim << "epoch,bpp,ms_ssim\n";
  lam << "epoch,trainee,lambda_prime_mse,lambda_prime_msssim\n";
  rew << "epoch,reward_mean,reward_max\n";

  for (const EpochRecord& rec : log.epochs) {
    if (rec.epoch == 0) continue;  // training epochs only
    double bpp = 0.0, psnr_v = 0.0, ms = 0.0, rsum = 0.0;
    double rmax = -1e300;
    int with_reward = 0;
    for (size_t i = 0; i < rec.trainees.size(); ++i) {
      const TraineeEpochRecord& tr = rec.trainees[i];
      bpp += tr.stats.rate();
      psnr_v += tr.stats.psnr;
      ms += tr.stats.ms_ssim;
      if (tr.has_reward) {
        rsum += tr.reward.total;
        rmax = std::max(rmax, tr.reward.total);
        ++with_reward;
      }
      if (tr.has_lambda) {
        lam << rec.epoch << ',' << i << ',' << format_double(tr.lambda_prime[0])
            << ',' << format_double(tr.lambda_prime[1]) << "\n";
      }
    }
    const double n = static_cast<double>(rec.trainees.size());
    rd_psnr << rec.epoch << ',' << format_double(bpp / n) << ','
            << format_double(psnr_v / n) << "\n";
    rd_msssim << rec.epoch << ',' << format_double(bpp / n) << ','
              << format_double(ms / n) << "\n";
    if (with_reward > 0) {
      rew << rec.epoch << ',' << format_double(rsum / with_reward) << ','
          << format_double(rmax) << "\n";
    }
  }
  std::cout << "report: wrote 4 series under " << out_dir << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Rate-distortion trainee harness with RL-adapted "
               "two-term distortion weights"};
  app.require_subcommand(1);

  std::string config_path, out_override, from_path;
  uint64_t seed_override = 0;
  bool seed_given = false;

  auto add_common = [&](CLI::App* sub, bool config_required) {
    auto* copt = sub->add_option("--config", config_path, "JSON config file");
    if (config_required) copt->required();
    sub->add_option("--out", out_override, "output directory override");
    sub->add_option("--seed", seed_override, "seed override")
        ->each([&](const std::string&) { seed_given = true; });
  };

  auto* metrics_cmd =
      app.add_subcommand("metrics", "print PSNR, MS-SSIM, MSE, TV and "
                         "gradient loss for an image pair");
  std::string ref_path, dist_path;
  metrics_cmd->add_option("ref", ref_path, "reference image (PGM/PPM)")
      ->required();
  metrics_cmd->add_option("dist", dist_path, "distorted image (PGM/PPM)")
      ->required();

  auto* baseline_cmd = app.add_subcommand(
      "baseline", "train fixed-weight ladders and write baseline RD curves");
  add_common(baseline_cmd, true);

  auto* harmonize_cmd = app.add_subcommand(
      "harmonize", "run the full weight-adaptation control loop");
  add_common(harmonize_cmd, true);

  auto* manual_cmd = app.add_subcommand(
      "manual", "train with a hand-crafted weight-table entry");
  add_common(manual_cmd, true);
  std::string manual_kind = "msssim_pref";
  int manual_i = 0, manual_j = 0;
  manual_cmd->add_option("--kind", manual_kind, "msssim_pref or mse_pref");
  manual_cmd->add_option("--i", manual_i, "metric tradeoff index, 0..5");
  manual_cmd->add_option("--j", manual_j, "rate index, 0..3");

  auto* retrain_cmd = app.add_subcommand(
      "retrain", "retrain from scratch with the final adapted weights of a "
                 "previous run");
  add_common(retrain_cmd, true);
  retrain_cmd->add_option("--from", from_path, "run.csv of the source run")
      ->required();

  auto* report_cmd = app.add_subcommand(
      "report", "convert a run CSV into plot-ready data series");
  report_cmd->add_option("--from", from_path, "run.csv to convert")
      ->required();
  std::string report_out = "report";
  report_cmd->add_option("--out", report_out, "output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (metrics_cmd->parsed()) return cmd_metrics(ref_path, dist_path);

    if (report_cmd->parsed()) return cmd_report(from_path, report_out);

    AppConfig cfg = load_app_config(config_path);
    if (!out_override.empty()) cfg.out_dir = out_override;
    if (seed_given) cfg.seed = seed_override;

    if (baseline_cmd->parsed()) return cmd_baseline(cfg);
    if (harmonize_cmd->parsed()) return cmd_harmonize(cfg);
    if (manual_cmd->parsed()) {
      const LambdaWeights lw = manual_grid_weights(
          manual_grid_kind_from_name(manual_kind), manual_i, manual_j);
      return run_fixed_mode(cfg, lw, "manual");
    }
    if (retrain_cmd->parsed()) {
      const LambdaWeights lw = final_adapted_lambda(read_run_csv(from_path));
      return run_fixed_mode(cfg, lw, "retrain");
    }
    std::cerr << "error: no subcommand\n";
    return kExitUsage;
  } catch (const NumericError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const InvalidInput& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
}
