#include "hlic/harness.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <thread>
#include <vector>

#include "hlic/error.hpp"
#include "hlic/rng.hpp"
#include "hlic/textio.hpp"

namespace hlic {

namespace {

// Runs fn(i) for every arm, concurrently when the hardware allows it. Arms
// are fully independent; results land in per-arm slots so scheduling cannot
// affect the outcome. The lowest-index failure wins deterministically.
void for_each_arm(int arms, const std::function<void(int)>& fn) {
  const unsigned hw = std::thread::hardware_concurrency();
  if (arms == 1 || hw <= 1) {
    for (int i = 0; i < arms; ++i) fn(i);
    return;
  }
  const int workers = static_cast<int>(
      hw < static_cast<unsigned>(arms) ? hw : static_cast<unsigned>(arms));
  std::vector<std::exception_ptr> errors(static_cast<size_t>(arms));
  std::vector<std::thread> pool;
  pool.reserve(static_cast<size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (int i = w; i < arms; i += workers) {
        try {
          fn(i);
        } catch (...) {
          errors[static_cast<size_t>(i)] = std::current_exception();
        }
      }
    });
  }
  for (std::thread& t : pool) t.join();
  for (const std::exception_ptr& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

std::string cell(double v) { return format_double(v); }

void append_stats_cells(std::ostringstream& os,
                        const TraineeEpochRecord& r) {
  os << cell(r.stats.psnr) << ',' << cell(r.stats.ms_ssim) << ','
     << cell(r.stats.bpp_y) << ',' << cell(r.stats.bpp_z) << ','
     << cell(r.stats.gradient_loss) << ',' << cell(r.stats.total_variation);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

double parse_cell(const std::string& s, const char* what, int lineno) {
  try {
    size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw InvalidInput("run csv line " + std::to_string(lineno) +
                       ": bad value for " + what + " ('" + s + "')");
  }
}

}  // namespace

const char* trainee_kind_name(TraineeKind kind) {
  return kind == TraineeKind::kSurrogate ? "surrogate" : "toy_codec";
}

TraineeKind trainee_kind_from_name(const std::string& name) {
  if (name == "surrogate") return TraineeKind::kSurrogate;
  if (name == "toy_codec") return TraineeKind::kToyCodec;
  throw InvalidInput("run config: unknown trainee kind '" + name + "'");
}

void RunConfig::validate() const {
  if (num_trainees < 1) throw InvalidInput("run config: B must be >= 1");
  if (trajectory_length < 1) throw InvalidInput("run config: N must be >= 1");
  if (total_epochs < 0 || total_epochs % trajectory_length != 0) {
    throw InvalidInput(
        "run config: total epochs (" + std::to_string(total_epochs) +
        ") must be a non-negative multiple of the trajectory length (" +
        std::to_string(trajectory_length) + ")");
  }
  reward.validate();
  ppo.validate();
}

HlicResult run_hlic(const RunConfig& cfg, const TraineeFactory& make_trainee) {
  cfg.validate();
  const int b = cfg.num_trainees;
  const int n = cfg.trajectory_length;

  Rng master(cfg.seed);
  const uint64_t policy_seed = master.next_u64();
  const uint64_t sample_seed = master.next_u64();
  const uint64_t train_seed = master.next_u64();

  // B identical clones; identical per-arm training streams keep the arms
  // distinguishable only through the sampled weights.
  std::vector<std::unique_ptr<Trainee>> trainees;
  trainees.push_back(make_trainee());
  for (int i = 1; i < b; ++i) trainees.push_back(trainees[0]->clone());
  std::vector<Rng> train_rngs(static_cast<size_t>(b), Rng(train_seed));

  auto policy = std::make_unique<PolicyNet>(policy_seed, cfg.ppo.adam,
                                            cfg.policy);
  Rng sample_rng(sample_seed);

  HlicResult result;
  std::vector<Observation> obs(static_cast<size_t>(b));

  // Initial evaluation gives r_0 and o_1.
  {
    EpochRecord rec;
    rec.epoch = 0;
    rec.trainees.resize(static_cast<size_t>(b));
    for (int i = 0; i < b; ++i) {
      TraineeEpochRecord& tr = rec.trainees[static_cast<size_t>(i)];
      tr.stats = trainees[static_cast<size_t>(i)]->evaluate();
      tr.reward = compute_reward(tr.stats, cfg.reward);
      tr.has_reward = true;
      obs[static_cast<size_t>(i)] = observe(tr.stats);
    }
    result.log.epochs.push_back(std::move(rec));
  }

  std::vector<std::vector<Transition>> trajectories(static_cast<size_t>(b));
  int last_best = 0;

  for (int t = 1; t <= cfg.total_epochs; ++t) {
    EpochRecord rec;
    rec.epoch = t;
    rec.trainees.resize(static_cast<size_t>(b));

    // Single-threaded barrier: sample actions in arm order.
    std::vector<Action> actions(static_cast<size_t>(b));
    for (int i = 0; i < b; ++i) {
      std::array<double, 2> mu, sigma;
      policy->actor_forward(obs[static_cast<size_t>(i)], mu, sigma);
      actions[static_cast<size_t>(i)] = sample_action(mu, sigma, sample_rng);
      rec.trainees[static_cast<size_t>(i)].value_pred =
          policy->value(obs[static_cast<size_t>(i)]);
    }

    // Train and evaluate the B arms (independent; may run concurrently).
    std::vector<EvalStats> stats(static_cast<size_t>(b));
    for_each_arm(b, [&](int i) {
      try {
        trainees[static_cast<size_t>(i)]->train_epoch(
            lambda_from_prime(actions[static_cast<size_t>(i)].clamped),
            train_rngs[static_cast<size_t>(i)]);
        stats[static_cast<size_t>(i)] =
            trainees[static_cast<size_t>(i)]->evaluate();
        stats[static_cast<size_t>(i)].validate();
      } catch (const Error& e) {
        throw NumericError("epoch " + std::to_string(t) + ", trainee " +
                           std::to_string(i) + ": " + e.what());
      }
    });

    for (int i = 0; i < b; ++i) {
      TraineeEpochRecord& tr = rec.trainees[static_cast<size_t>(i)];
      const Action& act = actions[static_cast<size_t>(i)];
      tr.has_lambda = true;
      tr.has_action = true;
      tr.lambda_prime = act.clamped;
      tr.action_raw = act.raw;
      tr.log_prob = act.log_prob;
      tr.stats = stats[static_cast<size_t>(i)];
      tr.reward = compute_reward(tr.stats, cfg.reward);
      tr.has_reward = true;

      trajectories[static_cast<size_t>(i)].push_back(Transition{
          obs[static_cast<size_t>(i)], act.raw, act.log_prob,
          tr.reward.total, tr.value_pred});
      obs[static_cast<size_t>(i)] = observe(tr.stats);
    }

    if (t % n == 0) {
      TrajectoryBatch batch;
      batch.num_trajectories = b;
      batch.length = n;
      for (int i = 0; i < b; ++i) {
        batch.transitions.insert(batch.transitions.end(),
                                 trajectories[static_cast<size_t>(i)].begin(),
                                 trajectories[static_cast<size_t>(i)].end());
        batch.bootstrap_values.push_back(
            policy->value(obs[static_cast<size_t>(i)]));
        trajectories[static_cast<size_t>(i)].clear();
      }
      rec.did_update = true;
      rec.ppo = ppo_update(batch, *policy, cfg.ppo);

      std::vector<double> rewards(static_cast<size_t>(b));
      for (int i = 0; i < b; ++i) {
        rewards[static_cast<size_t>(i)] =
            rec.trainees[static_cast<size_t>(i)].reward.total;
      }
      rec.best_index = broadcast_best(trainees, rewards);
      last_best = rec.best_index;
      // All arms now share the winner's state; their next observation is
      // the winner's.
      for (int i = 0; i < b; ++i) {
        obs[static_cast<size_t>(i)] =
            obs[static_cast<size_t>(rec.best_index)];
      }
    }
    result.log.epochs.push_back(std::move(rec));
  }

  result.best_trainee = trainees[static_cast<size_t>(last_best)]->clone();
  result.policy = std::move(policy);
  return result;
}

FixedResult run_fixed(const LambdaWeights& lambda, int total_epochs,
                      uint64_t seed, const TraineeFactory& make_trainee,
                      const std::optional<RewardConfig>& reward) {
  if (total_epochs < 0) {
    throw InvalidInput("run_fixed: total_epochs must be >= 0");
  }
  Rng master(seed);
  master.next_u64();  // keep stream layout aligned with run_hlic
  master.next_u64();
  const uint64_t train_seed = master.next_u64();

  FixedResult result;
  result.trainee = make_trainee();
  Rng train_rng(train_seed);

  auto record_epoch = [&](int epoch, bool with_lambda) {
    EpochRecord rec;
    rec.epoch = epoch;
    rec.trainees.resize(1);
    TraineeEpochRecord& tr = rec.trainees[0];
    tr.stats = result.trainee->evaluate();
    tr.stats.validate();
    if (with_lambda) {
      tr.has_lambda = true;
      tr.lambda_prime = {lambda.prime_mse(), lambda.prime_msssim()};
    }
    if (reward.has_value()) {
      tr.reward = compute_reward(tr.stats, *reward);
      tr.has_reward = true;
    }
    result.log.epochs.push_back(std::move(rec));
  };

  record_epoch(0, false);
  for (int t = 1; t <= total_epochs; ++t) {
    try {
      result.trainee->train_epoch(lambda, train_rng);
    } catch (const Error& e) {
      throw NumericError("epoch " + std::to_string(t) + ": " + e.what());
    }
    record_epoch(t, true);
  }
  result.final_stats = result.trainee->evaluate();
  return result;
}

int broadcast_best(std::vector<std::unique_ptr<Trainee>>& trainees,
                   const std::vector<double>& rewards) {
  if (trainees.empty() || trainees.size() != rewards.size()) {
    throw InvalidInput("broadcast: one reward per trainee required");
  }
  int best = 0;
  for (size_t i = 0; i < rewards.size(); ++i) {
    if (!std::isfinite(rewards[i])) {
      throw InvalidInput("broadcast: non-finite reward");
    }
    if (rewards[i] > rewards[static_cast<size_t>(best)]) {
      best = static_cast<int>(i);
    }
  }
  for (size_t i = 0; i < trainees.size(); ++i) {
    if (static_cast<int>(i) != best) {
      trainees[i]->copy_state_from(*trainees[static_cast<size_t>(best)]);
    }
  }
  return best;
}

ManualGridKind manual_grid_kind_from_name(const std::string& name) {
  if (name == "msssim_pref") return ManualGridKind::kMsssimPref;
  if (name == "mse_pref") return ManualGridKind::kMsePref;
  throw InvalidInput("manual grid: unknown kind '" + name + "'");
}

const char* manual_grid_kind_name(ManualGridKind kind) {
  return kind == ManualGridKind::kMsssimPref ? "msssim_pref" : "mse_pref";
}

LambdaWeights manual_grid_weights(ManualGridKind kind, int i, int j) {
  if (i < 0 || i > 5 || j < 0 || j > 3) {
    throw InvalidInput("manual grid: i must be in 0..5 and j in 0..3, got i=" +
                       std::to_string(i) + " j=" + std::to_string(j));
  }
  const double rate_div = std::pow(4.0, j);
  if (kind == ManualGridKind::kMsssimPref) {
    return LambdaWeights::from_weights(0.0128 * std::pow(2.0, i) / rate_div,
                                       120.0 / rate_div);
  }
  return LambdaWeights::from_weights(0.08 / rate_div,
                                     3.0 * std::pow(2.0, i) / rate_div);
}

const char* const kRunCsvHeader =
    "epoch,trainee,lambda_prime_mse,lambda_prime_msssim,action_raw_mse,"
    "action_raw_msssim,log_prob,value_pred,psnr,ms_ssim,bpp_y,bpp_z,"
    "gradient_loss,total_variation,reward_total,term_rate,term_psnr,"
    "term_msssim,x_rate,x_psnr,x_msssim,did_update,best_index,"
    "ppo_mean_ratio,ppo_clip_fraction,ppo_value_loss";

void write_run_csv(const RunLog& log, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InvalidInput("run csv: cannot write '" + path + "'");
  out << kRunCsvHeader << "\n";
  for (const EpochRecord& rec : log.epochs) {
    for (size_t i = 0; i < rec.trainees.size(); ++i) {
      const TraineeEpochRecord& tr = rec.trainees[i];
      std::ostringstream os;
      os << rec.epoch << ',' << i << ',';
      if (tr.has_lambda) {
        os << cell(tr.lambda_prime[0]) << ',' << cell(tr.lambda_prime[1]);
      } else {
        os << ',';
      }
      os << ',';
      if (tr.has_action) {
        os << cell(tr.action_raw[0]) << ',' << cell(tr.action_raw[1]) << ','
           << cell(tr.log_prob) << ',' << cell(tr.value_pred);
      } else {
        os << ",,,";
      }
      os << ',';
      append_stats_cells(os, tr);
      os << ',';
      if (tr.has_reward) {
        os << cell(tr.reward.total) << ',' << cell(tr.reward.term_rate) << ','
           << cell(tr.reward.term_psnr) << ',' << cell(tr.reward.term_msssim)
           << ',' << cell(tr.reward.x_rate) << ',' << cell(tr.reward.x_psnr)
           << ',' << cell(tr.reward.x_msssim);
      } else {
        os << ",,,,,,";
      }
      os << ',' << (rec.did_update ? 1 : 0) << ',';
      if (rec.did_update) {
        os << rec.best_index << ',' << cell(rec.ppo.mean_ratio_first) << ','
           << cell(rec.ppo.clip_fraction_last) << ','
           << cell(rec.ppo.value_loss_last);
      } else {
        os << ",,,";
      }
      out << os.str() << "\n";
    }
  }
  if (!out) throw InvalidInput("run csv: write failed for '" + path + "'");
}

RunLog read_run_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("run csv: cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line) || line != kRunCsvHeader) {
    throw InvalidInput("run csv '" + path + "': unrecognized header");
  }
  RunLog log;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> cells = split_csv_line(line);
    if (cells.size() != 26) {
      throw InvalidInput("run csv line " + std::to_string(lineno) +
                         ": expected 26 columns, got " +
                         std::to_string(cells.size()));
    }
    const int epoch = static_cast<int>(parse_cell(cells[0], "epoch", lineno));
    const int arm = static_cast<int>(parse_cell(cells[1], "trainee", lineno));
    if (log.epochs.empty() || log.epochs.back().epoch != epoch) {
      EpochRecord rec;
      rec.epoch = epoch;
      log.epochs.push_back(rec);
    }
    EpochRecord& rec = log.epochs.back();
    if (static_cast<int>(rec.trainees.size()) != arm) {
      throw InvalidInput("run csv line " + std::to_string(lineno) +
                         ": trainee indices out of order");
    }
    TraineeEpochRecord tr;
    if (!cells[2].empty()) {
      tr.has_lambda = true;
      tr.lambda_prime = {parse_cell(cells[2], "lambda_prime_mse", lineno),
                         parse_cell(cells[3], "lambda_prime_msssim", lineno)};
    }
    if (!cells[4].empty()) {
      tr.has_action = true;
      tr.action_raw = {parse_cell(cells[4], "action_raw_mse", lineno),
                       parse_cell(cells[5], "action_raw_msssim", lineno)};
      tr.log_prob = parse_cell(cells[6], "log_prob", lineno);
      tr.value_pred = parse_cell(cells[7], "value_pred", lineno);
    }
    tr.stats.psnr = parse_cell(cells[8], "psnr", lineno);
    tr.stats.ms_ssim = parse_cell(cells[9], "ms_ssim", lineno);
    tr.stats.bpp_y = parse_cell(cells[10], "bpp_y", lineno);
    tr.stats.bpp_z = parse_cell(cells[11], "bpp_z", lineno);
    tr.stats.gradient_loss = parse_cell(cells[12], "gradient_loss", lineno);
    tr.stats.total_variation =
        parse_cell(cells[13], "total_variation", lineno);
    if (!cells[14].empty()) {
      tr.has_reward = true;
      tr.reward.total = parse_cell(cells[14], "reward_total", lineno);
      tr.reward.term_rate = parse_cell(cells[15], "term_rate", lineno);
      tr.reward.term_psnr = parse_cell(cells[16], "term_psnr", lineno);
      tr.reward.term_msssim = parse_cell(cells[17], "term_msssim", lineno);
      tr.reward.x_rate = parse_cell(cells[18], "x_rate", lineno);
      tr.reward.x_psnr = parse_cell(cells[19], "x_psnr", lineno);
      tr.reward.x_msssim = parse_cell(cells[20], "x_msssim", lineno);
    }
    rec.did_update = rec.did_update || cells[21] == "1";
    if (!cells[22].empty()) {
      rec.best_index = static_cast<int>(parse_cell(cells[22], "best_index",
                                                   lineno));
      rec.ppo.mean_ratio_first =
          parse_cell(cells[23], "ppo_mean_ratio", lineno);
      rec.ppo.clip_fraction_last =
          parse_cell(cells[24], "ppo_clip_fraction", lineno);
      rec.ppo.value_loss_last =
          parse_cell(cells[25], "ppo_value_loss", lineno);
    }
    rec.trainees.push_back(std::move(tr));
  }
  if (log.epochs.empty()) {
    throw InvalidInput("run csv '" + path + "': no data rows");
  }
  return log;
}

LambdaWeights final_adapted_lambda(const RunLog& log) {
  for (auto it = log.epochs.rbegin(); it != log.epochs.rend(); ++it) {
    const EpochRecord& rec = *it;
    if (rec.trainees.empty()) continue;
    int arm = rec.best_index >= 0 &&
                      rec.best_index < static_cast<int>(rec.trainees.size())
                  ? rec.best_index
                  : 0;
    const TraineeEpochRecord& tr = rec.trainees[static_cast<size_t>(arm)];
    if (tr.has_lambda) {
      return LambdaWeights(tr.lambda_prime[0], tr.lambda_prime[1]);
    }
  }
  throw InvalidInput("run log: no lambda columns present (cannot derive the "
                     "adapted weights)");
}

void write_run_summary(const RunLog& log, const std::string& mode,
                       uint64_t seed, TraineeKind kind,
                       const std::string& path) {
  if (log.epochs.empty()) throw InvalidInput("run summary: empty log");
  std::ofstream out(path);
  if (!out) throw InvalidInput("run summary: cannot write '" + path + "'");
  const EpochRecord& last = log.epochs.back();
  int arm = last.best_index >= 0 &&
                    last.best_index < static_cast<int>(last.trainees.size())
                ? last.best_index
                : 0;
  const TraineeEpochRecord& tr = last.trainees[static_cast<size_t>(arm)];

  out << "hlic_run_summary v1\n";
  out << "mode " << mode << "\n";
  out << "trainee " << trainee_kind_name(kind) << "\n";
  out << "seed " << seed << "\n";
  out << "epochs " << last.epoch << "\n";
  out << "arms " << last.trainees.size() << "\n";
  out << "final_arm " << arm << "\n";
  out << "final_psnr " << format_double(tr.stats.psnr) << "\n";
  out << "final_ms_ssim " << format_double(tr.stats.ms_ssim) << "\n";
  out << "final_bpp " << format_double(tr.stats.rate()) << "\n";
  if (tr.has_reward) {
    out << "final_reward " << format_double(tr.reward.total) << "\n";
  }
  if (tr.has_lambda) {
    out << "final_lambda_prime_mse " << format_double(tr.lambda_prime[0])
        << "\n";
    out << "final_lambda_prime_msssim " << format_double(tr.lambda_prime[1])
        << "\n";
  }
  if (!out) throw InvalidInput("run summary: write failed for '" + path + "'");
}

}  // namespace hlic
