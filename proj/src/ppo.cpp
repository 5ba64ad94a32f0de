#include "hlic/ppo.hpp"

#include <cmath>

#include "hlic/error.hpp"

namespace hlic {

namespace {

// min(x, y) = x - max(x - y, 0), elementwise.
Value graph_min(Graph& g, Value x, Value y) {
  return g.sub(x, g.clamp_min(g.sub(x, y), 0.0));
}

// clamp(x, lo, hi) = min(max(x, lo), hi).
Value graph_clamp(Graph& g, Value x, double lo, double hi) {
  Value m = g.clamp_min(x, lo);
  return g.neg(g.clamp_min(g.neg(m), -hi));
}

struct ParamSnapshot {
  std::vector<Tensor> params;
  std::vector<AdamOptimizer::Slot> actor_slots, critic_slots;
  int64_t actor_step = 0, critic_step = 0;
};

ParamSnapshot snapshot(PolicyNet& net) {
  ParamSnapshot s;
  for (Tensor* t : net.actor_params()) s.params.push_back(*t);
  for (Tensor* t : net.critic_params()) s.params.push_back(*t);
  s.actor_slots = net.actor_opt().slots();
  s.critic_slots = net.critic_opt().slots();
  s.actor_step = net.actor_opt().step_count();
  s.critic_step = net.critic_opt().step_count();
  return s;
}

void restore(PolicyNet& net, const ParamSnapshot& s) {
  size_t i = 0;
  for (Tensor* t : net.actor_params()) *t = s.params[i++];
  for (Tensor* t : net.critic_params()) *t = s.params[i++];
  for (size_t k = 0; k < s.actor_slots.size(); ++k) {
    net.actor_opt().slots()[k].m = s.actor_slots[k].m;
    net.actor_opt().slots()[k].v = s.actor_slots[k].v;
  }
  for (size_t k = 0; k < s.critic_slots.size(); ++k) {
    net.critic_opt().slots()[k].m = s.critic_slots[k].m;
    net.critic_opt().slots()[k].v = s.critic_slots[k].v;
  }
  net.actor_opt().set_step_count(s.actor_step);
  net.critic_opt().set_step_count(s.critic_step);
}

}  // namespace

void TrajectoryBatch::validate() const {
  if (num_trajectories < 1 || length < 1) {
    throw InvalidInput("trajectory batch: B and N must be >= 1");
  }
  if (transitions.size() !=
      static_cast<size_t>(num_trajectories) * length) {
    throw InvalidInput("trajectory batch: not rectangular (" +
                       std::to_string(transitions.size()) + " transitions for " +
                       std::to_string(num_trajectories) + "x" +
                       std::to_string(length) + ")");
  }
  if (bootstrap_values.size() != static_cast<size_t>(num_trajectories)) {
    throw InvalidInput("trajectory batch: one bootstrap value per trajectory");
  }
  for (const Transition& tr : transitions) {
    bool ok = std::isfinite(tr.log_prob_old) && std::isfinite(tr.reward) &&
              std::isfinite(tr.value_old) && std::isfinite(tr.action_raw[0]) &&
              std::isfinite(tr.action_raw[1]);
    for (double v : tr.observation) ok = ok && std::isfinite(v);
    if (!ok) throw InvalidInput("trajectory batch: non-finite transition");
  }
  for (double v : bootstrap_values) {
    if (!std::isfinite(v)) {
      throw InvalidInput("trajectory batch: non-finite bootstrap value");
    }
  }
}

void PPOConfig::validate() const {
  if (!(clip_epsilon > 0.0 && clip_epsilon < 1.0)) {
    throw InvalidInput("ppo: clip_epsilon must be in (0, 1)");
  }
  if (!(gamma > 0.0 && gamma <= 1.0) || !(gae_lambda > 0.0 && gae_lambda <= 1.0)) {
    throw InvalidInput("ppo: gamma and gae_lambda must be in (0, 1]");
  }
  if (update_epochs < 1) throw InvalidInput("ppo: update_epochs must be >= 1");
  if (value_loss_weight < 0.0 || entropy_bonus_weight < 0.0) {
    throw InvalidInput("ppo: loss weights must be >= 0");
  }
}

GaeResult gae(const std::vector<double>& rewards,
              const std::vector<double>& values, double bootstrap,
              double gamma, double gae_lambda) {
  if (rewards.size() != values.size()) {
    throw InvalidInput("gae: rewards and values must have equal length");
  }
  const int n = static_cast<int>(rewards.size());
  GaeResult out;
  out.advantages.assign(rewards.size(), 0.0);
  out.returns.assign(rewards.size(), 0.0);
  double acc = 0.0;
  for (int t = n - 1; t >= 0; --t) {
    const double v_next =
        t + 1 < n ? values[static_cast<size_t>(t) + 1] : bootstrap;
    const double delta =
        rewards[static_cast<size_t>(t)] + gamma * v_next -
        values[static_cast<size_t>(t)];
    acc = delta + gamma * gae_lambda * acc;
    out.advantages[static_cast<size_t>(t)] = acc;
    out.returns[static_cast<size_t>(t)] =
        acc + values[static_cast<size_t>(t)];
  }
  return out;
}

double clipped_surrogate(double log_prob_new, double log_prob_old,
                         double advantage, double clip_epsilon) {
  const double f = std::exp(log_prob_new - log_prob_old);
  double clipped = f;
  if (clipped < 1.0 - clip_epsilon) clipped = 1.0 - clip_epsilon;
  if (clipped > 1.0 + clip_epsilon) clipped = 1.0 + clip_epsilon;
  const double a = f * advantage;
  const double b = clipped * advantage;
  return a < b ? a : b;
}

GaeResult batch_gae(const TrajectoryBatch& batch, const PPOConfig& cfg) {
  GaeResult out;
  const int n = batch.length;
  out.advantages.reserve(batch.transitions.size());
  out.returns.reserve(batch.transitions.size());
  for (int i = 0; i < batch.num_trajectories; ++i) {
    std::vector<double> rewards(static_cast<size_t>(n));
    std::vector<double> values(static_cast<size_t>(n));
    for (int t = 0; t < n; ++t) {
      rewards[static_cast<size_t>(t)] = batch.at(i, t).reward;
      values[static_cast<size_t>(t)] = batch.at(i, t).value_old;
    }
    GaeResult traj = gae(rewards, values,
                         batch.bootstrap_values[static_cast<size_t>(i)],
                         cfg.gamma, cfg.gae_lambda);
    out.advantages.insert(out.advantages.end(), traj.advantages.begin(),
                          traj.advantages.end());
    out.returns.insert(out.returns.end(), traj.returns.begin(),
                       traj.returns.end());
  }
  return out;
}

void normalize_advantages(std::vector<double>& advantages) {
  const size_t n = advantages.size();
  if (n < 2) return;
  double mean = 0.0;
  for (double a : advantages) mean += a;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double a : advantages) var += (a - mean) * (a - mean);
  var /= static_cast<double>(n);
  const double sd = std::sqrt(var);
  const double inv = sd > 1e-12 ? 1.0 / sd : 0.0;  // all-equal batch -> zeros
  for (double& a : advantages) a = (a - mean) * inv;
}

UpdateDiagnostics ppo_update(const TrajectoryBatch& batch, PolicyNet& net,
                             const PPOConfig& cfg) {
  batch.validate();
  cfg.validate();

  GaeResult g = batch_gae(batch, cfg);
  normalize_advantages(g.advantages);

  const int m = static_cast<int>(batch.transitions.size());
  Tensor obs = Tensor::zeros({m, kObservationDim});
  Tensor actions = Tensor::zeros({m, 2});
  Tensor logp_old = Tensor::zeros({m, 1});
  Tensor adv = Tensor::zeros({m, 1});
  Tensor returns = Tensor::zeros({m, 1});
  for (int r = 0; r < m; ++r) {
    const Transition& tr = batch.transitions[static_cast<size_t>(r)];
    for (int c = 0; c < kObservationDim; ++c) {
      obs.at(r, c) = tr.observation[static_cast<size_t>(c)];
    }
    actions.at(r, 0) = tr.action_raw[0];
    actions.at(r, 1) = tr.action_raw[1];
    logp_old.data[static_cast<size_t>(r)] = tr.log_prob_old;
    adv.data[static_cast<size_t>(r)] = g.advantages[static_cast<size_t>(r)];
    returns.data[static_cast<size_t>(r)] = g.returns[static_cast<size_t>(r)];
  }

  const ParamSnapshot saved = snapshot(net);
  UpdateDiagnostics diag;
  try {
    for (int pass = 0; pass < cfg.update_epochs; ++pass) {
      Graph graph;
      Value vobs = graph.constant(obs);
      auto actor = net.actor_forward_graph(graph, vobs);

      // Diagonal-Gaussian log density, summed across the two action dims
      // via a matmul with a ones column.
      Value diff = graph.sub(graph.constant(actions), actor.mu);
      Value z = graph.div(diff, actor.sigma);
      Value log_sigma = graph.log(actor.sigma);
      Value per_dim = graph.sub(
          graph.mul(graph.constant(-0.5), graph.mul(z, z)),
          graph.add(log_sigma, graph.constant(0.91893853320467274178)));
      Value logp_new =
          graph.matmul(per_dim, graph.constant(Tensor::full({2, 1}, 1.0)));

      Value ratio = graph.exp(graph.sub(logp_new, graph.constant(logp_old)));
      Value ratio_clipped =
          graph_clamp(graph, ratio, 1.0 - cfg.clip_epsilon,
                      1.0 + cfg.clip_epsilon);
      Value vadv = graph.constant(adv);
      Value surrogate = graph.reduce_mean(
          graph_min(graph, graph.mul(ratio, vadv),
                    graph.mul(ratio_clipped, vadv)));

      Value values = net.critic_forward_graph(graph, vobs);
      Value verr = graph.sub(values, graph.constant(returns));
      Value value_loss = graph.reduce_mean(graph.mul(verr, verr));

      Value loss = graph.add(
          graph.neg(surrogate),
          graph.mul(graph.constant(cfg.value_loss_weight), value_loss));
      if (cfg.entropy_bonus_weight > 0.0) {
        // Diagonal-Gaussian entropy: sum_d (log sigma_d) + const.
        Value entropy = graph.reduce_sum(graph.log(actor.sigma));
        loss = graph.sub(
            loss, graph.mul(graph.constant(cfg.entropy_bonus_weight), entropy));
      }

      if (!std::isfinite(loss.scalar())) {
        throw NumericError("ppo_update: non-finite loss on pass " +
                           std::to_string(pass));
      }

      // Ratio statistics before this pass's step.
      double ratio_sum = 0.0;
      int clipped_count = 0;
      for (double f : ratio.tensor().data) {
        ratio_sum += f;
        if (f < 1.0 - cfg.clip_epsilon || f > 1.0 + cfg.clip_epsilon) {
          ++clipped_count;
        }
      }
      const double mean_ratio = ratio_sum / m;
      const double clip_fraction = static_cast<double>(clipped_count) / m;
      if (pass == 0) {
        diag.mean_ratio_first = mean_ratio;
        diag.clip_fraction_first = clip_fraction;
      }
      diag.mean_ratio_last = mean_ratio;
      diag.clip_fraction_last = clip_fraction;
      diag.value_loss_last = value_loss.scalar();
      diag.surrogate_last = surrogate.scalar();

      net.actor_opt().zero_grad();
      net.critic_opt().zero_grad();
      graph.backward(loss);
      net.actor_opt().step();
      net.critic_opt().step();
    }
  } catch (const NumericError&) {
    restore(net, saved);
    throw;
  }
  return diag;
}

}  // namespace hlic
