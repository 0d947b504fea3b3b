#pragma once
// Differentiable forward chaining over weighted candidate clauses.
//
// Each target predicate owns S rule slots. Slot s mixes the candidate clauses
// for its target with weights softmax(phi_s); slots are combined with the
// probabilistic sum, and so is the input valuation e0, which keeps every
// valuation inside [0,1] and never below e0.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "symhrl/clause_space.hpp"
#include "symhrl/logic.hpp"
#include "symhrl/neural.hpp"

namespace symhrl::dilp {

using logic::AtomIndex;
using logic::Clause;
using logic::GroundAtom;
using logic::PredicateId;
using logic::ValuationVector;
using logic::Vocabulary;

class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr double kBceEpsilon = 1e-7;

// A clause with its substitutions resolved to atom positions.
struct GroundedClause {
  Clause clause;
  std::string key;
  std::size_t head_offset = 0;  // first position of the head predicate's block
  std::size_t head_count = 0;
  std::size_t body_len = 0;
  std::vector<std::uint32_t> head;  // per substitution, relative to head_offset
  std::vector<std::uint32_t> body;  // per substitution, body_len absolute positions
  bool recursive = false;           // body mentions a predicate some slot can derive
};

GroundedClause ground_clause(const Clause& clause, const AtomIndex& index, const Vocabulary& vocab);

// Head block values: for each head atom the max over its substitutions of the
// product of body valuations. `argmax` (optional) receives the winning
// substitution per head atom, ties going to the lowest index.
void clause_values(const GroundedClause& g, std::span<const double> e, std::span<double> out,
                   std::span<std::int32_t> argmax = {});

// Full-length valuation that is zero outside the clause's head predicate.
ValuationVector clause_forward(const Clause& clause, const ValuationVector& e, const AtomIndex& index,
                               const Vocabulary& vocab);

struct TrainingExample {
  ValuationVector e0;
  ValuationVector target;
  std::vector<std::size_t> mask;  // positions scored by the loss
};

// Mean binary cross entropy over the masked positions; 0 for an empty mask.
double bce_loss(const ValuationVector& predicted, const ValuationVector& target, std::span<const std::size_t> mask);

struct DeductionTrace {
  std::vector<ValuationVector> steps;  // steps[0] = e0, steps[T] = final
  const ValuationVector& final() const { return steps.back(); }
};

struct ProgramConfig {
  int slots = 4;
  int steps = 2;
  double learning_rate = 0.05;
  double init_noise = 0.0;  // std-dev of the initial phi for newly added clauses
  std::uint64_t seed = 0;
};

class WeightedProgram {
 public:
  WeightedProgram(const Vocabulary& vocab, AtomIndex index, std::vector<PredicateId> targets, ProgramConfig config);

  // Rebuilds the candidate lists from `set`. Clauses that survive (by
  // canonical key) keep their phi and optimiser moments; new ones start at
  // phi = N(0, init_noise^2).
  void sync(const clauses::ClauseSet& set);

  const AtomIndex& index() const { return index_; }
  const Vocabulary& vocab() const { return *vocab_; }
  const ProgramConfig& config() const { return config_; }
  const std::vector<PredicateId>& targets() const { return target_ids_; }
  std::size_t clause_count(PredicateId target) const;
  std::size_t clause_count() const;
  const std::vector<GroundedClause>& candidates(PredicateId target) const;

  std::vector<double> weights(PredicateId target, int slot) const;
  std::vector<double> phi(PredicateId target, int slot) const;
  void set_phi(PredicateId target, int slot, std::span<const double> values);

  // All phi values, target-major then slot then clause.
  std::vector<double> parameters() const;
  void set_parameters(std::span<const double> values);

  ValuationVector step_deduce(const ValuationVector& e, const ValuationVector& e0) const;
  DeductionTrace deduce(const ValuationVector& e0) const;

  // Mean over examples with a non-empty mask; 0 when there are none.
  double loss(std::span<const TrainingExample> batch) const;
  // Loss and its gradient with respect to parameters().
  double gradient(std::span<const TrainingExample> batch, std::vector<double>& grad) const;
  // One Adam step on every phi; returns the loss before the update.
  double train_step(std::span<const TrainingExample> batch);

  // Argmax clause of each slot whose weight reaches `threshold`, deduplicated
  // and sorted by rule text.
  std::vector<Clause> extract_rules(double threshold) const;

  double confidence(const ValuationVector& v, const GroundAtom& atom) const;

  nlohmann::json parameters_json() const;
  // Restores phi and moments for every stored clause also present in the
  // current candidate lists; returns how many were matched.
  std::size_t load_parameters_json(const nlohmann::json& j);

 private:
  struct Target {
    PredicateId predicate = 0;
    std::size_t offset = 0;
    std::size_t count = 0;
    std::vector<GroundedClause> clauses;
    std::vector<double> phi;  // slots x clauses
    nn::AdamState adam;
  };

  struct StepCache;
  void forward_step(const ValuationVector& e, const ValuationVector& e0, ValuationVector& out,
                    StepCache* cache) const;
  std::vector<double> slot_weights(const Target& t, int slot) const;
  const Target& target(PredicateId p) const;
  Target& target(PredicateId p);

  const Vocabulary* vocab_;
  AtomIndex index_;
  ProgramConfig config_;
  std::vector<PredicateId> target_ids_;
  std::vector<Target> targets_;
  std::vector<bool> derivable_;  // per predicate id
  std::uint64_t noise_draws_ = 0;
};

}  // namespace symhrl::dilp
