#include "symhrl/ppo.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>

namespace symhrl::learn {

namespace {

constexpr double kHalfLogTwoPi = 0.91893853320467274178;  // 0.5 * log(2 pi)

}  // namespace

Advantages compute_gae(const Rollout& rollout, double gamma, double lambda) {
  const auto& steps = rollout.steps;
  const std::size_t n = steps.size();
  Advantages out;
  out.advantages.assign(n, 0.0);
  out.returns.assign(n, 0.0);
  double next_adv = 0.0;
  for (std::size_t i = n; i-- > 0;) {
    const double next_value = i + 1 < n ? steps[i + 1].value : rollout.bootstrap_value;
    const double live = steps[i].terminal ? 0.0 : 1.0;
    const double delta = steps[i].reward + gamma * next_value * live - steps[i].value;
    next_adv = delta + gamma * lambda * live * next_adv;
    out.advantages[i] = next_adv;
    out.returns[i] = next_adv + steps[i].value;
  }
  return out;
}

void normalise(std::vector<double>& xs) {
  if (xs.empty()) return;
  const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
  double var = 0.0;
  for (double x : xs) var += (x - mean) * (x - mean);
  var /= static_cast<double>(xs.size());
  const double sd = std::sqrt(var);
  for (double& x : xs) x = sd > 1e-12 ? (x - mean) / sd : x - mean;
}

double clipped_surrogate(double ratio, double advantage, double clip) {
  const double clipped = std::clamp(ratio, 1.0 - clip, 1.0 + clip);
  return -std::min(ratio * advantage, clipped * advantage);
}

double clipped_surrogate_grad(double ratio, double advantage, double clip) {
  // The clipped branch is the active minimum (and flat in r) exactly when
  // the ratio has moved past the boundary in the advantage's direction.
  if (advantage >= 0.0 && ratio > 1.0 + clip) return 0.0;
  if (advantage < 0.0 && ratio < 1.0 - clip) return 0.0;
  return -advantage;
}

PpoPolicy::PpoPolicy(int obs_size, int action_size, PpoConfig config, std::uint64_t seed)
    : config_(std::move(config)) {
  std::vector<int> actor{obs_size};
  actor.insert(actor.end(), config_.hidden.begin(), config_.hidden.end());
  std::vector<int> critic = actor;
  actor.push_back(action_size);
  critic.push_back(1);
  actor_ = nn::Mlp(actor, nn::OutputActivation::Linear, seed);
  critic_ = nn::Mlp(critic, nn::OutputActivation::Linear, seed ^ 0x9e3779b97f4a7c15ULL);
  // Small initial means keep the first actions close to the exploration noise.
  for (auto& w : actor_.parameters()) w *= 0.1;
  log_std_.assign(static_cast<std::size_t>(action_size), config_.init_log_std);
  const nn::AdamConfig adam{config_.lr};
  actor_adam_ = nn::AdamState(actor_.parameter_count(), adam);
  log_std_adam_ = nn::AdamState(log_std_.size(), adam);
  critic_adam_ = nn::AdamState(critic_.parameter_count(), adam);
}

PpoPolicy::Action PpoPolicy::act(std::span<const double> obs, std::mt19937_64& rng) const {
  Action out;
  const auto mu = mean(obs);
  std::normal_distribution<double> n01(0.0, 1.0);
  out.action.resize(mu.size());
  for (std::size_t i = 0; i < mu.size(); ++i) out.action[i] = mu[i] + std::exp(log_std_[i]) * n01(rng);
  out.log_prob = log_prob(obs, out.action);
  out.value = value(obs);
  return out;
}

double PpoPolicy::log_prob(std::span<const double> obs, std::span<const double> action) const {
  const auto mu = mean(obs);
  double lp = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i) {
    const double z = (action[i] - mu[i]) * std::exp(-log_std_[i]);
    lp += -0.5 * z * z - log_std_[i] - kHalfLogTwoPi;
  }
  return lp;
}

double PpoPolicy::entropy() const {
  double h = 0.0;
  for (double ls : log_std_) h += ls + 0.5 + kHalfLogTwoPi;
  return h;
}

std::vector<double> PpoPolicy::parameters() const {
  std::vector<double> p;
  p.reserve(actor_.parameter_count() + log_std_.size() + critic_.parameter_count());
  p.insert(p.end(), actor_.parameters().begin(), actor_.parameters().end());
  p.insert(p.end(), log_std_.begin(), log_std_.end());
  p.insert(p.end(), critic_.parameters().begin(), critic_.parameters().end());
  return p;
}

void PpoPolicy::set_parameters(std::span<const double> p) {
  const std::size_t na = actor_.parameter_count(), ns = log_std_.size(), nc = critic_.parameter_count();
  if (p.size() != na + ns + nc) throw nn::ShapeError("PPO parameter vector size mismatch");
  std::copy_n(p.begin(), na, actor_.parameters().begin());
  std::copy_n(p.begin() + static_cast<std::ptrdiff_t>(na), ns, log_std_.begin());
  std::copy_n(p.begin() + static_cast<std::ptrdiff_t>(na + ns), nc, critic_.parameters().begin());
}

double PpoPolicy::objective(std::span<const PpoSample> batch, std::vector<double>* grads, PpoLosses* parts) const {
  if (batch.empty()) throw nn::ShapeError("empty PPO minibatch");
  const std::size_t na = actor_.parameter_count(), ns = log_std_.size();
  std::span<double> g_actor, g_log_std, g_critic;
  if (grads) {
    grads->assign(na + ns + critic_.parameter_count(), 0.0);
    g_actor = std::span<double>(grads->data(), na);
    g_log_std = std::span<double>(grads->data() + na, ns);
    g_critic = std::span<double>(grads->data() + na + ns, critic_.parameter_count());
  }
  const double scale = 1.0 / static_cast<double>(batch.size());
  double policy = 0.0, value_loss = 0.0;
  std::vector<double> d_mu(ns);
  for (const auto& s : batch) {
    nn::Mlp::Cache actor_cache, critic_cache;
    const auto mu = actor_.forward(*s.obs, actor_cache);
    double lp = 0.0;
    for (std::size_t i = 0; i < ns; ++i) {
      const double z = ((*s.action)[i] - mu[i]) * std::exp(-log_std_[i]);
      lp += -0.5 * z * z - log_std_[i] - kHalfLogTwoPi;
    }
    const double ratio = std::exp(lp - s.old_log_prob);
    policy += clipped_surrogate(ratio, s.advantage, config_.clip) * scale;
    const double v = critic_.forward(*s.obs, critic_cache)[0];
    value_loss += (v - s.ret) * (v - s.ret) * scale;
    if (!grads) continue;

    const double d_lp = clipped_surrogate_grad(ratio, s.advantage, config_.clip) * ratio * scale;
    if (d_lp != 0.0) {
      for (std::size_t i = 0; i < ns; ++i) {
        const double inv_var = std::exp(-2.0 * log_std_[i]);
        const double diff = (*s.action)[i] - mu[i];
        d_mu[i] = d_lp * diff * inv_var;
        g_log_std[i] += d_lp * (diff * diff * inv_var - 1.0);
      }
      actor_.backward(actor_cache, d_mu, g_actor);
    }
    const double d_v = config_.value_coef * 2.0 * (v - s.ret) * scale;
    const std::array<double, 1> up{d_v};
    critic_.backward(critic_cache, up, g_critic);
  }
  if (grads)
    for (std::size_t i = 0; i < ns; ++i) g_log_std[i] -= config_.entropy_coef;
  const double ent = entropy();
  if (parts) {
    parts->policy = policy;
    parts->value = value_loss;
    parts->entropy = ent;
  }
  const double total = policy + config_.value_coef * value_loss - config_.entropy_coef * ent;
  if (!std::isfinite(total)) throw std::runtime_error("non-finite PPO loss");
  return total;
}

PpoLosses PpoPolicy::update(const Rollout& rollout, std::mt19937_64& rng) {
  if (rollout.steps.empty()) throw nn::ShapeError("empty rollout");
  auto adv = compute_gae(rollout, config_.gamma, config_.lambda);
  normalise(adv.advantages);
  std::vector<PpoSample> samples;
  samples.reserve(rollout.steps.size());
  for (std::size_t i = 0; i < rollout.steps.size(); ++i) {
    const auto& st = rollout.steps[i];
    samples.push_back({&st.obs, &st.action, st.log_prob, adv.advantages[i], adv.returns[i]});
  }

  PpoLosses total;
  std::vector<double> grads;
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), 0);
  const std::size_t na = actor_.parameter_count(), ns = log_std_.size();
  for (int epoch = 0; epoch < config_.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += config_.minibatch) {
      std::vector<PpoSample> mb;
      for (std::size_t k = start; k < std::min(order.size(), start + config_.minibatch); ++k) mb.push_back(samples[order[k]]);
      PpoLosses parts;
      objective(mb, &grads, &parts);
      nn::clip_grad_norm(grads, config_.grad_clip);
      nn::adam_step(actor_.parameters(), std::span<const double>(grads.data(), na), actor_adam_);
      nn::adam_step(log_std_, std::span<const double>(grads.data() + na, ns), log_std_adam_);
      nn::adam_step(critic_.parameters(), std::span<const double>(grads.data() + na + ns, critic_.parameter_count()),
                    critic_adam_);
      total.policy += parts.policy;
      total.value += parts.value;
      total.entropy += parts.entropy;
      ++total.updates;
    }
  }
  if (total.updates > 0) {
    total.policy /= total.updates;
    total.value /= total.updates;
    total.entropy /= total.updates;
  }
  return total;
}

nlohmann::json PpoPolicy::to_json() const {
  return {{"hidden", config_.hidden},
          {"lr", config_.lr},
          {"gamma", config_.gamma},
          {"lambda", config_.lambda},
          {"clip", config_.clip},
          {"entropy_coef", config_.entropy_coef},
          {"value_coef", config_.value_coef},
          {"grad_clip", config_.grad_clip},
          {"minibatch", config_.minibatch},
          {"epochs", config_.epochs},
          {"init_log_std", config_.init_log_std},
          {"actor", actor_.to_json()},
          {"critic", critic_.to_json()},
          {"log_std", log_std_},
          {"actor_adam", nn::adam_to_json(actor_adam_)},
          {"log_std_adam", nn::adam_to_json(log_std_adam_)},
          {"critic_adam", nn::adam_to_json(critic_adam_)}};
}

PpoPolicy PpoPolicy::from_json(const nlohmann::json& j) {
  PpoPolicy p;
  p.config_.hidden = j.at("hidden").get<std::vector<int>>();
  p.config_.lr = j.at("lr").get<double>();
  p.config_.gamma = j.at("gamma").get<double>();
  p.config_.lambda = j.at("lambda").get<double>();
  p.config_.clip = j.at("clip").get<double>();
  p.config_.entropy_coef = j.at("entropy_coef").get<double>();
  p.config_.value_coef = j.at("value_coef").get<double>();
  p.config_.grad_clip = j.at("grad_clip").get<double>();
  p.config_.minibatch = j.at("minibatch").get<std::size_t>();
  p.config_.epochs = j.at("epochs").get<int>();
  p.config_.init_log_std = j.at("init_log_std").get<double>();
  p.actor_ = nn::Mlp::from_json(j.at("actor"));
  p.critic_ = nn::Mlp::from_json(j.at("critic"));
  p.log_std_ = j.at("log_std").get<std::vector<double>>();
  p.actor_adam_ = nn::adam_from_json(j.at("actor_adam"));
  p.log_std_adam_ = nn::adam_from_json(j.at("log_std_adam"));
  p.critic_adam_ = nn::adam_from_json(j.at("critic_adam"));
  return p;
}

}  // namespace symhrl::learn
