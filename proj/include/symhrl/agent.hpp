#pragma once
// The high-level learner: tabular Q over symbolic states and subgoals,
// subtask statistics feeding the extrinsic reward, and the loop that
// alternates real episodes (options in the environment) with imagined ones
// (the learned symbolic model).

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "symhrl/environment.hpp"
#include "symhrl/learners.hpp"
#include "symhrl/options.hpp"
#include "symhrl/symbolic_model.hpp"

namespace symhrl::agent {

using logic::GroundAtom;
using logic::SymbolicState;
using model::TransitionRecord;

struct RewardConfig {
  double xi0 = 1.0;   // immature subtasks
  double xi1 = 50.0;  // unlearnable subtasks
  std::int64_t trial_budget = 100;  // N
  double threshold = 0.9;
};

// Exactly one case fires: t above the threshold pays R, otherwise more than
// N trials is unlearnable (-xi1), otherwise immature (-xi0).
double extrinsic_reward(double t, std::int64_t n, double R, const RewardConfig& cfg);

struct SubtaskEntry {
  std::deque<bool> window;  // most recent trial outcomes, newest at the back
  std::int64_t trials = 0;
  std::int64_t successes = 0;
  double reward = 0.0;  // EMA of the environment reward of successful trials
  double rate() const;
};

class SubtaskStats {
 public:
  explicit SubtaskStats(std::size_t window = 20, double reward_decay = 0.9)
      : window_(window), decay_(reward_decay) {}

  void record(const GroundAtom& from, const GroundAtom& to, bool success, double env_reward);
  const SubtaskEntry* find(const GroundAtom& from, const GroundAtom& to) const;
  const std::map<std::pair<GroundAtom, GroundAtom>, SubtaskEntry>& entries() const { return entries_; }
  // Mean windowed success rate over subtasks that have succeeded at least once.
  double mean_feasible_rate() const;

  nlohmann::json to_json() const;
  void load_json(const nlohmann::json& j);

 private:
  std::size_t window_;
  double decay_;
  std::map<std::pair<GroundAtom, GroundAtom>, SubtaskEntry> entries_;
};

class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity = 10000) : capacity_(capacity) {}
  void push(TransitionRecord rec);
  // Up to k distinct records, uniformly without replacement.
  std::vector<const TransitionRecord*> sample(std::size_t k, std::mt19937_64& rng) const;
  std::size_t size() const { return records_.size(); }
  std::size_t capacity() const { return capacity_; }
  const std::deque<TransitionRecord>& records() const { return records_; }

 private:
  std::size_t capacity_;
  std::deque<TransitionRecord> records_;
};

// Canonical text key of the parts of a symbolic state the high level
// conditions on: the achieved subgoal and event atoms, minus `ignored`
// predicates. Independent of atom order.
std::string state_key(const SymbolicState& s, const logic::Vocabulary& vocab, const std::set<logic::PredicateId>& ignored);

class HighLevelQ {
 public:
  HighLevelQ(double alpha = 0.1, double gamma = 0.99) : alpha_(alpha), gamma_(gamma) {}

  double value(const std::string& key, const GroundAtom& p) const;
  // Highest value among candidates; ties go to the earliest candidate.
  const GroundAtom& greedy(const std::string& key, const std::vector<GroundAtom>& candidates) const;
  double max_value(const std::string& key, const std::vector<GroundAtom>& candidates) const;
  double update(const std::string& key, const GroundAtom& p, double reward, const std::string& next_key,
                const std::vector<GroundAtom>& next_candidates, bool terminal);
  void set_value(const std::string& key, const GroundAtom& p, double v) { table_[key][p] = v; }
  std::size_t size() const;

  nlohmann::json to_json() const;
  void load_json(const nlohmann::json& j);

 private:
  double alpha_, gamma_;
  std::map<std::string, std::map<GroundAtom, double>> table_;
};

// Epsilon-greedy over the candidates. Requires a non-empty candidate list.
GroundAtom select_subgoal(const HighLevelQ& q, const std::string& key, const std::vector<GroundAtom>& candidates,
                          double epsilon, std::mt19937_64& rng);

// Subgoals whose constants all occur in s, excluding the current one.
std::vector<GroundAtom> groundable_subgoals(const SymbolicState& s, const env::Environment& env);

struct AgentConfig {
  int trials = 10;          // K
  int max_high_steps = 40;  // subgoal choices per episode, real or imagined
  double alpha = 0.1;
  double gamma = 0.99;
  learn::EpsilonSchedule epsilon{0.3, 0.03, 100};  // over real episodes
  RewardConfig reward{};
  std::size_t stats_window = 20;
  double stats_reward_decay = 0.9;
  std::size_t buffer_capacity = 10000;
  std::size_t fit_batch = 32;
  int fit_steps = 10;  // model fit calls after each episode
  bool use_model = true;
  // Predicates left out of the high-level state key.
  std::vector<std::string> q_ignore;
  // A failed attempt counts as negative evidence once the option for the
  // target has succeeded this many times, and only if no trial was cut off
  // by the episode limit.
  std::int64_t reliable_after = 1;
  std::uint64_t seed = 0;
};

enum class EpisodeKind { Real, Model };

struct EpisodeReport {
  int episode = 0;
  EpisodeKind kind = EpisodeKind::Real;
  std::int64_t real_steps = 0;
  std::int64_t cumulative_real_steps = 0;
  double ret = 0.0;  // sum of extrinsic rewards
  bool success = false;
  int high_steps = 0;
  int repairs = 0;
  double mean_subtask_t = 0.0;
  std::size_t clause_count = 0;
};

class Agent {
 public:
  using EventSink = std::function<void(const nlohmann::json&)>;

  Agent(env::Environment& env, AgentConfig config, model::ModelConfig model_config, options::OptionConfig option_config);

  // Even episodes (and all episodes without the model) are real.
  EpisodeReport run_episode(int e);
  EpisodeReport real_episode(int e);
  EpisodeReport imagined_episode(int e);
  // Greedy real episode with frozen options, Q and model.
  EpisodeReport evaluate_episode(std::uint64_t seed);

  void set_event_sink(EventSink sink) { sink_ = std::move(sink); }

  const AgentConfig& config() const { return config_; }
  env::Environment& environment() { return *env_; }
  model::SymbolicModel& symbolic_model() { return *model_; }
  const model::SymbolicModel& symbolic_model() const { return *model_; }
  options::OptionSet& options() { return *options_; }
  const HighLevelQ& q() const { return q_; }
  const SubtaskStats& stats() const { return stats_; }
  const ReplayBuffer& buffer() const { return buffer_; }
  std::int64_t cumulative_real_steps() const { return real_steps_; }
  int real_episodes() const { return real_episodes_; }
  double current_epsilon() const { return config_.epsilon.at(real_episodes_); }

  nlohmann::json to_json() const;
  void load_json(const nlohmann::json& j);
  // Loads only the symbolic model of a checkpoint (rules and weights).
  void load_model(const nlohmann::json& checkpoint);

 private:
  struct Attempt {
    bool success = false;
    int successes = 0;
    bool truncated = false;  // some trial ran into the episode limit
    std::int64_t steps = 0;
  };
  Attempt attempt_subtask(const GroundAtom& from, const GroundAtom& p, bool train);
  void fit_model();
  void emit(nlohmann::json event);
  std::string key(const SymbolicState& s) const;

  env::Environment* env_;
  AgentConfig config_;
  std::unique_ptr<model::SymbolicModel> model_;
  std::unique_ptr<options::OptionSet> options_;
  HighLevelQ q_;
  SubtaskStats stats_;
  ReplayBuffer buffer_;
  std::set<logic::PredicateId> ignored_;
  std::map<GroundAtom, std::int64_t> option_successes_;
  std::mt19937_64 rng_;
  std::int64_t real_steps_ = 0;
  int real_episodes_ = 0;
  int current_episode_ = 0;
  EventSink sink_;
};

std::string_view kind_name(EpisodeKind k);

}  // namespace symhrl::agent
