#pragma once
// Value-based learners for option policies: a tabular Q table and a small
// DQN with a target network and uniform replay.

#include <cstdint>
#include <deque>
#include <random>
#include <span>
#include <vector>

#include <json.hpp>

#include "symhrl/neural.hpp"

namespace symhrl::learn {

// Linear decay from `start` to `end` over `steps` calls, flat afterwards.
struct EpsilonSchedule {
  double start = 1.0;
  double end = 0.05;
  std::int64_t steps = 5000;

  double at(std::int64_t t) const;
};

class TabularQ {
 public:
  TabularQ() = default;
  TabularQ(std::size_t states, int actions, double alpha, double gamma, double init = 0.0);

  double value(std::size_t s, int a) const { return table_[s * static_cast<std::size_t>(actions_) + static_cast<std::size_t>(a)]; }
  void set_value(std::size_t s, int a, double v) { table_[s * static_cast<std::size_t>(actions_) + static_cast<std::size_t>(a)] = v; }
  double max_value(std::size_t s) const;
  // Ties go to the lowest action index.
  int greedy(std::size_t s) const;
  // Exploiting choices break ties uniformly at random.
  int epsilon_greedy(std::size_t s, double epsilon, std::mt19937_64& rng) const;

  // q <- q + alpha * (r + gamma * max_a' q(s', a') - q); the bootstrap term
  // is dropped when `terminal`. Returns the TD error before the update.
  double update(std::size_t s, int a, double r, std::size_t s_next, bool terminal);

  std::size_t states() const { return states_; }
  int actions() const { return actions_; }
  double alpha() const { return alpha_; }
  double gamma() const { return gamma_; }

  nlohmann::json to_json() const;
  static TabularQ from_json(const nlohmann::json& j);

 private:
  std::size_t states_ = 0;
  int actions_ = 0;
  double alpha_ = 0.1;
  double gamma_ = 0.99;
  std::vector<double> table_;
};

struct DqnConfig {
  std::vector<int> hidden{64};
  double lr = 1e-3;
  double gamma = 0.99;
  std::size_t batch = 32;
  std::size_t capacity = 10000;
  std::size_t warmup = 64;
  int target_sync = 250;  // updates between target network copies
  double grad_clip = 10.0;
};

struct DqnTransition {
  std::vector<double> obs;
  int action = 0;
  double reward = 0.0;
  std::vector<double> next_obs;
  bool terminal = false;
};

class DqnPolicy {
 public:
  DqnPolicy(int obs_size, int actions, DqnConfig config, std::uint64_t seed);

  std::vector<double> q_values(std::span<const double> obs) const { return online_.forward(obs); }
  int greedy(std::span<const double> obs) const;
  int epsilon_greedy(std::span<const double> obs, double epsilon, std::mt19937_64& rng) const;

  // r + gamma * max_a' q_target(s', a'), or r at a terminal transition.
  double target(const DqnTransition& t) const;
  // One Adam step on the mean of 0.5 * (q(s,a) - target)^2; returns the mean
  // squared TD error before the step. Throws nn::ShapeError on an empty batch
  // and std::runtime_error on non-finite values.
  double update(std::span<const DqnTransition* const> batch);

  void remember(DqnTransition t);
  std::size_t replay_size() const { return replay_.size(); }
  // Samples a minibatch and updates once the replay holds `warmup` items;
  // returns the TD loss, or a negative value when nothing happened.
  double train(std::mt19937_64& rng);
  void sync_target() { target_ = online_; }

  const nn::Mlp& network() const { return online_; }
  nn::Mlp& network() { return online_; }
  const DqnConfig& config() const { return config_; }

  nlohmann::json to_json() const;
  static DqnPolicy from_json(const nlohmann::json& j);

 private:
  DqnPolicy() = default;

  DqnConfig config_;
  int actions_ = 0;
  nn::Mlp online_;
  nn::Mlp target_;
  nn::AdamState adam_;
  std::deque<DqnTransition> replay_;
  std::int64_t updates_ = 0;
};

}  // namespace symhrl::learn
