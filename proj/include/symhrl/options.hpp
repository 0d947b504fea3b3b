#pragma once
// Options: one low-level policy per subgoal, trained on the intrinsic reward
// and executed until the subgoal holds, the robot settles on a different
// subgoal, or the step cap runs out.

#include <cstdint>
#include <map>
#include <memory>
#include <random>
#include <string>

#include <json.hpp>

#include "symhrl/environment.hpp"
#include "symhrl/learners.hpp"
#include "symhrl/ppo.hpp"

namespace symhrl::env {
class RoomWorld;
class NavWorld;
}  // namespace symhrl::env

namespace symhrl::options {

using logic::GroundAtom;

// eta when p holds in the successor label, otherwise the environment reward.
double intrinsic_reward(const logic::SymbolicState& s_next, const GroundAtom& p, double env_reward, double eta);

enum class Learner { Tabular, Dqn, Ppo };
Learner parse_learner(const std::string& name);
std::string learner_name(Learner l);

struct OptionConfig {
  Learner learner = Learner::Tabular;
  int max_steps = 100;  // per-option cap
  double eta = 20.0;
  // Reward for ending on a different subgoal than the one targeted.
  double detour_penalty = -20.0;
  learn::EpsilonSchedule epsilon{};
  double alpha = 0.5;  // tabular step size
  double gamma = 0.99;
  learn::DqnConfig dqn{};
  learn::PpoConfig ppo{};
  // Nav only: reward per unit of distance closed towards the target circle.
  double progress_shaping = 0.0;
  std::uint64_t seed = 0;
};

struct OptionOutcome {
  bool success = false;
  int steps = 0;
  double env_reward = 0.0;
  double intrinsic_return = 0.0;
  bool detour = false;  // ended on a different subgoal
  bool truncated = false;  // the episode ended first
};

class OptionSet {
 public:
  explicit OptionSet(OptionConfig config) : config_(std::move(config)), rng_(config_.seed) {}
  virtual ~OptionSet() = default;

  // Runs the option for p from the environment's current state. Success iff
  // p holds in the final label. `train` enables learning updates.
  virtual OptionOutcome run(env::Environment& env, const GroundAtom& p, bool train) = 0;

  const OptionConfig& config() const { return config_; }
  void set_max_steps(int n) { config_.max_steps = n; }
  std::int64_t steps_taken(const GroundAtom& p) const;

  virtual nlohmann::json to_json() const = 0;
  virtual void load_json(const nlohmann::json& j) = 0;

 protected:
  double epsilon_for(const GroundAtom& p) const { return config_.epsilon.at(steps_taken(p)); }

  OptionConfig config_;
  std::mt19937_64 rng_;
  std::map<GroundAtom, std::int64_t> steps_;
};

// Room-world options over primitive moves: a Q table over (cell, held key)
// or a DQN over the room observation, one per target room.
class RoomOptions final : public OptionSet {
 public:
  RoomOptions(const env::RoomWorld& world, OptionConfig config);
  OptionOutcome run(env::Environment& env, const GroundAtom& p, bool train) override;
  nlohmann::json to_json() const override;
  void load_json(const nlohmann::json& j) override;

  const learn::TabularQ* table(const GroundAtom& p) const;

 private:
  learn::TabularQ& table_for(const GroundAtom& p);
  learn::DqnPolicy& dqn_for(const GroundAtom& p);

  std::size_t tabular_states_;
  int obs_size_;
  std::map<GroundAtom, learn::TabularQ> tables_;
  std::map<GroundAtom, learn::DqnPolicy> dqns_;
};

// Nav options: a PPO policy per target circle, updated after every run.
class NavOptions final : public OptionSet {
 public:
  NavOptions(const env::NavWorld& world, OptionConfig config);
  OptionOutcome run(env::Environment& env, const GroundAtom& p, bool train) override;
  nlohmann::json to_json() const override;
  void load_json(const nlohmann::json& j) override;

  const learn::PpoLosses& last_losses() const { return last_; }

 private:
  learn::PpoPolicy& policy_for(const GroundAtom& p);

  int obs_size_;
  std::map<GroundAtom, learn::PpoPolicy> policies_;
  learn::PpoLosses last_;
};

std::unique_ptr<OptionSet> make_options(const env::Environment& env, OptionConfig config);

}  // namespace symhrl::options
