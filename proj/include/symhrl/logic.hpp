#pragma once
// First-order logic primitives: predicates, atoms, clauses, grounding, and
// the mapping between symbolic states and valuation vectors.

#include <array>
#include <compare>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace symhrl::logic {

inline constexpr int kMaxArity = 3;
inline constexpr std::size_t kDefaultGroundingCap = 200000;

enum class PredicateKind : std::uint8_t { Subgoal, Property, Event, Auxiliary };

std::string_view kind_name(PredicateKind kind);
std::optional<PredicateKind> parse_kind(std::string_view name);

using PredicateId = int;
using ConstantId = int;

struct Predicate {
  std::string name;
  int arity = 0;
  PredicateKind kind = PredicateKind::Property;
};

struct Term {
  bool variable = true;
  int id = 0;

  static Term var(int v) { return {true, v}; }
  static Term constant(ConstantId c) { return {false, c}; }

  auto operator<=>(const Term&) const = default;
};

struct Atom {
  PredicateId predicate = 0;
  std::vector<Term> terms;

  bool is_ground() const;
  auto operator<=>(const Atom&) const = default;
};

struct GroundAtom {
  PredicateId predicate = 0;
  std::uint8_t arity = 0;
  std::array<ConstantId, kMaxArity> args{};

  GroundAtom() = default;
  GroundAtom(PredicateId p, std::initializer_list<ConstantId> a);
  GroundAtom(PredicateId p, std::span<const ConstantId> a);

  std::span<const ConstantId> arguments() const { return {args.data(), arity}; }
  auto operator<=>(const GroundAtom&) const = default;
};

struct GroundAtomHash {
  std::size_t operator()(const GroundAtom& a) const noexcept;
};

struct Clause {
  Atom head;
  std::vector<Atom> body;

  // Distinct variable ids, ascending.
  std::vector<int> variables() const;
  int variable_count() const { return static_cast<int>(variables().size()); }
  auto operator<=>(const Clause&) const = default;
};

class LogicError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SyntaxError : public LogicError {
 public:
  SyntaxError(const std::string& what, std::size_t position);
  std::size_t position() const { return position_; }

 private:
  std::size_t position_;
};

class CapacityError : public LogicError {
 public:
  using LogicError::LogicError;
};

class Vocabulary {
 public:
  PredicateId add_predicate(std::string name, int arity, PredicateKind kind);
  ConstantId add_constant(std::string name);

  const Predicate& predicate(PredicateId id) const { return predicates_.at(static_cast<std::size_t>(id)); }
  std::optional<PredicateId> find_predicate(std::string_view name) const;
  PredicateId predicate_id(std::string_view name) const;  // throws if unknown
  std::size_t predicate_count() const { return predicates_.size(); }
  std::vector<PredicateId> predicates_of_kind(PredicateKind kind) const;

  const std::string& constant_name(ConstantId id) const { return constants_.at(static_cast<std::size_t>(id)); }
  std::optional<ConstantId> find_constant(std::string_view name) const;
  ConstantId constant_id(std::string_view name) const;  // throws if unknown
  std::size_t constant_count() const { return constants_.size(); }

  int max_variables() const { return max_variables_; }
  void set_max_variables(int n) { max_variables_ = n; }

  // Same predicate names, arities and kinds (constants may differ).
  bool same_signature(const Vocabulary& other) const;

 private:
  std::vector<Predicate> predicates_;
  std::vector<std::string> constants_;
  std::unordered_map<std::string, PredicateId> predicate_by_name_;
  std::unordered_map<std::string, ConstantId> constant_by_name_;
  int max_variables_ = 3;
};

// Set of ground atoms that hold in a state, kept sorted.
class SymbolicState {
 public:
  SymbolicState() = default;
  explicit SymbolicState(std::vector<GroundAtom> atoms);

  bool insert(const GroundAtom& a);
  bool erase(const GroundAtom& a);
  bool contains(const GroundAtom& a) const;
  std::size_t size() const { return atoms_.size(); }
  bool empty() const { return atoms_.empty(); }
  const std::vector<GroundAtom>& atoms() const { return atoms_; }
  std::span<const GroundAtom> of_predicate(PredicateId p) const;

  // Atoms whose predicate satisfies the filter.
  SymbolicState filtered(const std::function<bool(PredicateId)>& keep) const;
  void merge(const SymbolicState& other);

  bool operator==(const SymbolicState&) const = default;

 private:
  std::vector<GroundAtom> atoms_;
};

// Deterministically ordered ground atoms of a predicate subset: predicates
// sorted by name, then constants ascending in mixed radix.
class AtomIndex {
 public:
  struct Block {
    PredicateId predicate = 0;
    std::size_t offset = 0;
    std::size_t count = 0;
    int arity = 0;
  };

  AtomIndex() = default;
  static AtomIndex build(const Vocabulary& vocab, std::span<const PredicateId> predicates,
                         std::size_t cap = kDefaultGroundingCap);

  std::size_t size() const { return size_; }
  std::size_t constant_count() const { return constants_; }
  GroundAtom atom(std::size_t position) const;
  std::optional<std::size_t> position(const GroundAtom& a) const;
  const Block* block(PredicateId p) const;
  const std::vector<Block>& blocks() const { return blocks_; }
  bool contains_predicate(PredicateId p) const { return block(p) != nullptr; }

 private:
  std::vector<Block> blocks_;
  std::vector<int> block_of_predicate_;  // -1 when absent
  std::size_t size_ = 0;
  std::size_t constants_ = 0;
};

class ValuationVector {
 public:
  ValuationVector() = default;
  explicit ValuationVector(std::size_t n) : values_(n, 0.0) {}
  explicit ValuationVector(std::vector<double> values);

  std::size_t size() const { return values_.size(); }
  double operator[](std::size_t i) const { return values_[i]; }
  void set(std::size_t i, double v);
  std::span<const double> values() const { return values_; }
  std::vector<double>& mutable_values() { return values_; }
  bool in_unit_interval() const;

 private:
  std::vector<double> values_;
};

struct Substitution {
  std::vector<std::pair<int, ConstantId>> bindings;  // sorted by variable id

  std::optional<ConstantId> lookup(int variable) const;
  bool operator==(const Substitution&) const = default;
};

AtomIndex enumerate_ground_atoms(const Vocabulary& vocab, std::span<const PredicateId> predicates,
                                 std::size_t cap = kDefaultGroundingCap);

// Atoms of the state outside the index are ignored.
ValuationVector valuation_from_state(const SymbolicState& state, const AtomIndex& index);

std::vector<Substitution> ground_substitutions(const Clause& clause, const Vocabulary& vocab,
                                               std::size_t cap = kDefaultGroundingCap);

GroundAtom apply(const Atom& atom, const Substitution& sub);

Clause parse_clause(std::string_view text, const Vocabulary& vocab);
std::string format_clause(const Clause& clause, const Vocabulary& vocab);
std::string format_atom(const Atom& atom, const Vocabulary& vocab);
std::string format_ground_atom(const GroundAtom& atom, const Vocabulary& vocab);
GroundAtom parse_ground_atom(std::string_view text, const Vocabulary& vocab);

// One clause per line; blank lines and lines starting with '#' are skipped.
std::vector<Clause> parse_rules(std::string_view text, const Vocabulary& vocab);

// Variables renamed to 0..k-1 and body sorted; the lexicographically smallest
// such form over all renamings, so clauses equal up to renaming and body
// order map to the same value.
Clause canonical(const Clause& clause);
std::string canonical_key(const Clause& clause);

bool is_valid_clause(const Clause& clause, const Vocabulary& vocab);

// Crisp (boolean) single-step evaluation against a set of facts.
class FactBase {
 public:
  explicit FactBase(const SymbolicState& state);
  std::span<const GroundAtom> facts(PredicateId p) const { return state_.of_predicate(p); }
  bool holds(const GroundAtom& a) const { return state_.contains(a); }
  const SymbolicState& state() const { return state_; }

 private:
  SymbolicState state_;
};

// True when some substitution makes every body atom a fact and the head equal to `head`.
// Head variables the body leaves free range over all constants.
bool derives(const Clause& clause, const FactBase& facts, const GroundAtom& head,
             const Vocabulary& vocab);
std::vector<GroundAtom> consequences(const Clause& clause, const FactBase& facts,
                                     const Vocabulary& vocab);

}  // namespace symhrl::logic
