#pragma once
// Candidate clause generation by refinement, and the repairs triggered by
// transitions the current clauses fail to explain.

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "symhrl/logic.hpp"

namespace symhrl::clauses {

using logic::Atom;
using logic::Clause;
using logic::FactBase;
using logic::GroundAtom;
using logic::PredicateId;
using logic::Vocabulary;

struct RefinementOp {
  enum class Kind { Seed, AddBodyAtom, ReplaceVariable };
  Kind kind = Kind::Seed;
  Atom added;        // AddBodyAtom
  int from = -1;     // ReplaceVariable
  int to = -1;

  std::string describe(const Vocabulary& vocab) const;
};

struct Refinement {
  Clause clause;
  RefinementOp op;
};

struct SearchLimits {
  int body_cap = 4;
  int depth_cap = 3;
  int max_added = 8;  // per repair_negative call
};

// Which predicates may be added to the body of clauses for a given head.
struct Language {
  const Vocabulary* vocab = nullptr;
  std::map<PredicateId, std::vector<PredicateId>> body_predicates;
  SearchLimits limits;

  const std::vector<PredicateId>& body_for(PredicateId head) const;
};

// Precondition heads (subgoals) draw from properties, events and CurAct;
// effect heads (events) draw from subgoals and properties.
Language precondition_language(const Vocabulary& vocab, SearchLimits limits = {});
Language effect_language(const Vocabulary& vocab, SearchLimits limits = {});

class ClauseSet {
 public:
  struct Entry {
    Clause clause;
    std::string key;     // canonical key
    std::string parent;  // formatted parent clause, empty for seeds
    std::string op;      // refinement description
  };

  const std::vector<Entry>& clauses(PredicateId target) const;
  std::vector<PredicateId> targets() const;
  bool contains(const Clause& c) const;
  // False when an equal clause (up to renaming) is already present.
  bool add(const Clause& c, std::string parent = {}, std::string op = {});
  bool remove(const Clause& c);
  std::size_t size() const;
  std::size_t size(PredicateId target) const;

  std::string serialize(const Vocabulary& vocab) const;
  static ClauseSet parse(std::string_view text, const Vocabulary& vocab);

 private:
  std::map<PredicateId, std::vector<Entry>> by_target_;
  static const std::vector<Entry> kEmpty;
};

// A labelled ground fact for one head atom: positive examples must be
// derivable, negative ones must not be.
struct Example {
  FactBase facts;
  GroundAtom atom;
  bool positive = true;
};

bool covers(const Clause& clause, const Example& ex, const Vocabulary& vocab);

// target(Y) <- CurAct(X,Y) for subgoals; event(Y..) <- subgoal(X..) with
// disjoint variables for event targets.
Clause most_general_clause(PredicateId target, const Vocabulary& vocab,
                           std::optional<PredicateId> subgoal = std::nullopt);

std::vector<Refinement> refine(const Clause& clause, const Language& lang);

enum class RepairStatus { AlreadyExplained, Added, CoverageFailure, Removed };

struct RepairResult {
  RepairStatus status = RepairStatus::AlreadyExplained;
  std::vector<Clause> added;
  std::vector<Clause> removed;
  std::size_t explored = 0;
};

class PreconditionViolation : public logic::LogicError {
 public:
  using LogicError::LogicError;
};

// Breadth-first search from `seed` for a clause covering `ex` that fires on
// no stored negative example with the same head predicate.
RepairResult repair_positive(const Example& ex, const Clause& seed, ClauseSet& set,
                             std::span<const Example* const> stored, const Language& lang);

// Removes `offending` and adds refinements that no longer fire on `ex` yet
// still cover every stored positive that only `offending` covered.
RepairResult repair_negative(const Example& ex, const Clause& offending, ClauseSet& set,
                             std::span<const Example* const> stored, const Language& lang);

// Exhaustive check over every state built from the body predicates of both
// clauses: each head atom `specific` derives is also derived by `general`.
bool subsumes(const Clause& general, const Clause& specific, const Vocabulary& vocab,
              std::size_t max_atoms = 20);

}  // namespace symhrl::clauses
