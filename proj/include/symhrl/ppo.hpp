#pragma once
// PPO with a diagonal Gaussian policy (state-independent learned log-std),
// a separate value network, GAE and the clipped surrogate objective.

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include <json.hpp>

#include "symhrl/neural.hpp"

namespace symhrl::learn {

struct PpoConfig {
  std::vector<int> hidden{64, 64};
  double lr = 3e-4;
  double gamma = 0.99;
  double lambda = 0.95;
  double clip = 0.2;
  double entropy_coef = 0.003;
  double value_coef = 0.5;
  double grad_clip = 1.0;
  std::size_t minibatch = 16;
  int epochs = 4;
  double init_log_std = -0.5;
};

struct RolloutStep {
  std::vector<double> obs;
  std::vector<double> action;
  double log_prob = 0.0;
  double value = 0.0;
  double reward = 0.0;
  bool terminal = false;
};

struct Rollout {
  std::vector<RolloutStep> steps;
  // V(s) after the last step when the rollout was cut short; ignored if the
  // last step is terminal.
  double bootstrap_value = 0.0;
};

struct Advantages {
  std::vector<double> advantages;
  std::vector<double> returns;  // advantages + values, before normalisation
};

Advantages compute_gae(const Rollout& rollout, double gamma, double lambda);
// In place to mean 0 and (population) standard deviation 1; a constant
// vector is only centred.
void normalise(std::vector<double>& xs);

// -min(r A, clip(r, 1-eps, 1+eps) A) and its derivative with respect to r.
double clipped_surrogate(double ratio, double advantage, double clip);
double clipped_surrogate_grad(double ratio, double advantage, double clip);

struct PpoSample {
  const std::vector<double>* obs = nullptr;
  const std::vector<double>* action = nullptr;
  double old_log_prob = 0.0;
  double advantage = 0.0;
  double ret = 0.0;
};

struct PpoLosses {
  double policy = 0.0;
  double value = 0.0;
  double entropy = 0.0;
  int updates = 0;
};

class PpoPolicy {
 public:
  struct Action {
    std::vector<double> action;
    double log_prob = 0.0;
    double value = 0.0;
  };

  PpoPolicy(int obs_size, int action_size, PpoConfig config, std::uint64_t seed);

  Action act(std::span<const double> obs, std::mt19937_64& rng) const;
  std::vector<double> mean(std::span<const double> obs) const { return actor_.forward(obs); }
  double value(std::span<const double> obs) const { return critic_.forward(obs)[0]; }
  double log_prob(std::span<const double> obs, std::span<const double> action) const;
  const std::vector<double>& log_std() const { return log_std_; }
  double entropy() const;

  // Minibatch objective: policy + value_coef * value - entropy_coef * entropy,
  // each a mean over the batch. Gradients are accumulated into `grads` (laid
  // out like parameters()) when given. Components are written to `parts`.
  double objective(std::span<const PpoSample> batch, std::vector<double>* grads, PpoLosses* parts = nullptr) const;

  // Epochs of shuffled minibatch Adam steps over one rollout.
  PpoLosses update(const Rollout& rollout, std::mt19937_64& rng);

  // Actor weights, then log-std, then critic weights.
  std::vector<double> parameters() const;
  void set_parameters(std::span<const double> p);
  const PpoConfig& config() const { return config_; }

  nlohmann::json to_json() const;
  static PpoPolicy from_json(const nlohmann::json& j);

 private:
  PpoPolicy() = default;

  PpoConfig config_;
  nn::Mlp actor_;
  nn::Mlp critic_;
  std::vector<double> log_std_;
  nn::AdamState actor_adam_, log_std_adam_, critic_adam_;
};

}  // namespace symhrl::learn
