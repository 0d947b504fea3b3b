#pragma once
// Learned high-level transition model: a precondition program deciding
// whether a subgoal is reachable from a symbolic state, an effect program
// predicting which events it switches on, and a per-subtask reward table.

#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "symhrl/clause_space.hpp"
#include "symhrl/dilp.hpp"

namespace symhrl::model {

using logic::GroundAtom;
using logic::SymbolicState;
using logic::Vocabulary;

struct TransitionRecord {
  SymbolicState s_hat;
  GroundAtom subgoal;
  SymbolicState s_hat_next;
  double extrinsic_reward = 0.0;
  bool success = false;
  // Failures of an option that has never succeeded say more about the option
  // than about the world; they are kept but not used as negative evidence.
  bool reliable = true;
};

struct ModelConfig {
  dilp::ProgramConfig pre{};
  dilp::ProgramConfig eff{};
  clauses::SearchLimits limits{};
  double tau = 0.5;
  double reward_decay = 0.9;
  double unseen_reward = -1.0;  // -xi0
};

struct Prediction {
  bool achieved = false;
  double confidence = 0.0;
  SymbolicState next;
  double reward = 0.0;
};

struct RepairEvent {
  std::string program;  // "pre" or "eff"
  std::string example;  // formatted head atom with its label
  clauses::RepairStatus status = clauses::RepairStatus::AlreadyExplained;
  std::vector<std::string> added;
  std::vector<std::string> removed;
};

struct FitResult {
  double pre_loss = 0.0;
  double eff_loss = 0.0;
  std::size_t pre_examples = 0;
  std::size_t eff_examples = 0;
};

// The subgoal atom L_G contributes to a symbolic state, if any.
std::optional<GroundAtom> current_subgoal(const SymbolicState& s, const Vocabulary& vocab);

// Facts a precondition clause may consult: properties and events of s_hat,
// binary properties of s_next over exactly (current, target), and
// CurAct(current, target).
SymbolicState precondition_facts(const SymbolicState& s_hat, const SymbolicState& s_next, const GroundAtom& subgoal,
                                 const Vocabulary& vocab);
// Facts an effect clause may consult: the achieved subgoal and properties.
SymbolicState effect_facts(const SymbolicState& s_hat, const SymbolicState& s_next, const GroundAtom& subgoal,
                           const Vocabulary& vocab);

class SymbolicModel {
 public:
  SymbolicModel(const Vocabulary& vocab, ModelConfig config);
  SymbolicModel(const SymbolicModel&) = delete;
  SymbolicModel& operator=(const SymbolicModel&) = delete;

  const Vocabulary& vocab() const { return *vocab_; }
  const ModelConfig& config() const { return config_; }
  const clauses::ClauseSet& pre_clauses() const { return pre_set_; }
  const clauses::ClauseSet& eff_clauses() const { return eff_set_; }
  dilp::WeightedProgram& pre_program() { return pre_; }
  dilp::WeightedProgram& eff_program() { return eff_; }
  const dilp::WeightedProgram& pre_program() const { return pre_; }
  const dilp::WeightedProgram& eff_program() const { return eff_; }

  Prediction predict(const SymbolicState& s_hat, const GroundAtom& subgoal) const;

  // Crisp, weight-independent check of a record against the candidate clauses.
  bool explains(const TransitionRecord& rec) const;
  bool explains_preconditions(const TransitionRecord& rec) const;

  // Stores the record's examples and repairs both clause sets until the
  // record is explained (or a repair reports CoverageFailure).
  std::vector<RepairEvent> observe(const TransitionRecord& rec);

  // One training step per program on the minibatch; also folds the observed
  // extrinsic rewards into the reward table.
  FitResult fit(std::span<const TransitionRecord* const> batch);

  double reward_estimate(const GroundAtom& from, const GroundAtom& to) const;
  std::size_t reward_entries() const { return rewards_.size(); }
  void clear_rewards() { rewards_.clear(); }

  std::vector<logic::Clause> pre_rules(double threshold) const { return pre_.extract_rules(threshold); }
  std::vector<logic::Clause> eff_rules(double threshold) const { return eff_.extract_rules(threshold); }
  std::size_t clause_count() const { return pre_set_.size() + eff_set_.size(); }
  std::size_t stored_examples() const;

  nlohmann::json to_json() const;
  // Replaces clause sets and parameters from a checkpoint. Rules are
  // re-parsed against this model's vocabulary, so a checkpoint from a world
  // with other constants loads as long as the predicates match. Stored
  // examples are discarded; the reward table is restored only on request.
  void load_json(const nlohmann::json& j, bool with_rewards);

 private:
  struct ExampleStore {
    std::map<logic::PredicateId, std::vector<clauses::Example>> by_predicate;
    std::unordered_set<std::string> keys;
    bool add(const clauses::Example& ex);
    std::vector<const clauses::Example*> pointers(logic::PredicateId p) const;
    std::size_t size() const { return keys.size(); }
  };

  std::vector<clauses::Example> precondition_examples(const TransitionRecord& rec) const;
  std::vector<clauses::Example> effect_examples(const TransitionRecord& rec) const;
  std::vector<RepairEvent> repair_examples(const std::vector<clauses::Example>& examples, bool effects,
                                           const GroundAtom& subgoal);
  dilp::TrainingExample pre_training_example(const TransitionRecord& rec) const;
  dilp::TrainingExample eff_training_example(const TransitionRecord& rec) const;

  const Vocabulary* vocab_;
  ModelConfig config_;
  clauses::Language pre_lang_;
  clauses::Language eff_lang_;
  clauses::ClauseSet pre_set_;
  clauses::ClauseSet eff_set_;
  dilp::WeightedProgram pre_;
  dilp::WeightedProgram eff_;
  ExampleStore pre_store_;
  ExampleStore eff_store_;
  std::map<std::pair<GroundAtom, GroundAtom>, double> rewards_;
};

}  // namespace symhrl::model
