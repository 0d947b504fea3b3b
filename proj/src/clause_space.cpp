#include "symhrl/clause_space.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <sstream>
#include <unordered_set>

namespace symhrl::clauses {

using logic::PredicateKind;
using logic::Term;

std::string RefinementOp::describe(const Vocabulary& vocab) const {
  switch (kind) {
    case Kind::Seed: return "seed";
    case Kind::AddBodyAtom: return "add " + logic::format_atom(added, vocab);
    case Kind::ReplaceVariable: {
      static constexpr const char* names[] = {"X", "Y", "Z", "U", "V", "W"};
      auto name = [](int v) { return v >= 0 && v < 6 ? std::string(names[v]) : "V" + std::to_string(v); };
      return "replace " + name(from) + "->" + name(to);
    }
  }
  return {};
}

const std::vector<PredicateId>& Language::body_for(PredicateId head) const {
  static const std::vector<PredicateId> none;
  auto it = body_predicates.find(head);
  return it == body_predicates.end() ? none : it->second;
}

namespace {

std::vector<PredicateId> concat(std::initializer_list<std::vector<PredicateId>> parts) {
  std::vector<PredicateId> out;
  for (const auto& p : parts) out.insert(out.end(), p.begin(), p.end());
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

Language precondition_language(const Vocabulary& vocab, SearchLimits limits) {
  Language lang{&vocab, {}, limits};
  const auto body = concat({vocab.predicates_of_kind(PredicateKind::Property),
                            vocab.predicates_of_kind(PredicateKind::Event),
                            vocab.predicates_of_kind(PredicateKind::Auxiliary)});
  for (PredicateId g : vocab.predicates_of_kind(PredicateKind::Subgoal)) lang.body_predicates[g] = body;
  return lang;
}

Language effect_language(const Vocabulary& vocab, SearchLimits limits) {
  Language lang{&vocab, {}, limits};
  const auto body = concat({vocab.predicates_of_kind(PredicateKind::Subgoal),
                            vocab.predicates_of_kind(PredicateKind::Property)});
  for (PredicateId e : vocab.predicates_of_kind(PredicateKind::Event)) lang.body_predicates[e] = body;
  return lang;
}

// ---------------------------------------------------------------- ClauseSet

const std::vector<ClauseSet::Entry> ClauseSet::kEmpty;

const std::vector<ClauseSet::Entry>& ClauseSet::clauses(PredicateId target) const {
  auto it = by_target_.find(target);
  return it == by_target_.end() ? kEmpty : it->second;
}

std::vector<PredicateId> ClauseSet::targets() const {
  std::vector<PredicateId> out;
  for (const auto& [t, entries] : by_target_)
    if (!entries.empty()) out.push_back(t);
  return out;
}

bool ClauseSet::contains(const Clause& c) const {
  const auto key = logic::canonical_key(c);
  const auto& entries = clauses(c.head.predicate);
  return std::any_of(entries.begin(), entries.end(), [&](const Entry& e) { return e.key == key; });
}

bool ClauseSet::add(const Clause& c, std::string parent, std::string op) {
  if (contains(c)) return false;
  by_target_[c.head.predicate].push_back({c, logic::canonical_key(c), std::move(parent), std::move(op)});
  return true;
}

bool ClauseSet::remove(const Clause& c) {
  auto it = by_target_.find(c.head.predicate);
  if (it == by_target_.end()) return false;
  const auto key = logic::canonical_key(c);
  auto& v = it->second;
  auto pos = std::find_if(v.begin(), v.end(), [&](const Entry& e) { return e.key == key; });
  if (pos == v.end()) return false;
  v.erase(pos);
  return true;
}

std::size_t ClauseSet::size() const {
  std::size_t n = 0;
  for (const auto& [t, entries] : by_target_) n += entries.size();
  return n;
}

std::size_t ClauseSet::size(PredicateId target) const { return clauses(target).size(); }

std::string ClauseSet::serialize(const Vocabulary& vocab) const {
  std::ostringstream out;
  for (const auto& [t, entries] : by_target_) {
    for (const auto& e : entries) {
      if (!e.parent.empty()) out << "# parent: " << e.parent << "\n";
      if (!e.op.empty()) out << "# op: " << e.op << "\n";
      out << logic::format_clause(e.clause, vocab) << "\n";
    }
  }
  return out.str();
}

ClauseSet ClauseSet::parse(std::string_view text, const Vocabulary& vocab) {
  ClauseSet set;
  std::string parent, op;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    line = line.substr(first);
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    if (line.rfind("# parent: ", 0) == 0) {
      parent = line.substr(10);
    } else if (line.rfind("# op: ", 0) == 0) {
      op = line.substr(6);
    } else if (line[0] == '#') {
      continue;
    } else {
      set.add(logic::parse_clause(line, vocab), parent, op);
      parent.clear();
      op.clear();
    }
  }
  return set;
}

// ---------------------------------------------------------------- refinement

bool covers(const Clause& clause, const Example& ex, const Vocabulary& vocab) {
  return logic::derives(clause, ex.facts, ex.atom, vocab);
}

Clause most_general_clause(PredicateId target, const Vocabulary& vocab, std::optional<PredicateId> subgoal) {
  const auto& pred = vocab.predicate(target);
  Clause c;
  c.head.predicate = target;
  if (pred.kind == PredicateKind::Subgoal) {
    auto curact = vocab.find_predicate("CurAct");
    if (!curact || pred.arity != 1 || vocab.predicate(*curact).arity != 2)
      throw logic::LogicError("subgoal seed needs a unary subgoal and CurAct/2");
    // target(Y) <- CurAct(X,Y) with X=0, Y=1
    c.head.terms = {Term::var(1)};
    c.body.push_back(Atom{*curact, {Term::var(0), Term::var(1)}});
    return c;
  }
  if (pred.kind == PredicateKind::Event) {
    if (!subgoal) {
      auto goals = vocab.predicates_of_kind(PredicateKind::Subgoal);
      if (goals.empty()) throw logic::LogicError("no subgoal predicate for effect seed");
      subgoal = goals.front();
    }
    const int sub_arity = vocab.predicate(*subgoal).arity;
    Atom body{*subgoal, {}};
    for (int i = 0; i < sub_arity; ++i) body.terms.push_back(Term::var(i));
    for (int i = 0; i < pred.arity; ++i) c.head.terms.push_back(Term::var(sub_arity + i));
    c.body.push_back(std::move(body));
    if (c.variable_count() > vocab.max_variables())
      throw logic::LogicError("effect seed exceeds the variable cap");
    return c;
  }
  throw logic::LogicError("seed clauses exist only for subgoal and event targets");
}

namespace {

void substitute(Atom& a, int from, int to) {
  for (auto& t : a.terms)
    if (t.variable && t.id == from) t.id = to;
}

}  // namespace

std::vector<Refinement> refine(const Clause& clause, const Language& lang) {
  const Vocabulary& vocab = *lang.vocab;
  if (static_cast<int>(clause.body.size()) >= lang.limits.body_cap) return {};

  const auto vars = clause.variables();
  std::vector<int> pool = vars;
  const bool fresh_allowed = static_cast<int>(vars.size()) < vocab.max_variables();
  const int fresh = vars.empty() ? 0 : vars.back() + 1;
  if (fresh_allowed) pool.push_back(fresh);

  std::vector<Refinement> raw;
  for (PredicateId p : lang.body_for(clause.head.predicate)) {
    const int arity = vocab.predicate(p).arity;
    std::vector<std::size_t> digits(static_cast<std::size_t>(arity), 0);
    while (true) {
      Atom atom{p, {}};
      bool uses_existing = arity == 0;
      for (auto d : digits) {
        atom.terms.push_back(Term::var(pool[d]));
        if (pool[d] != fresh || !fresh_allowed) uses_existing = true;
      }
      const bool duplicate = std::find(clause.body.begin(), clause.body.end(), atom) != clause.body.end();
      if (uses_existing && !duplicate) {
        Clause child = clause;
        child.body.push_back(atom);
        RefinementOp op;
        op.kind = RefinementOp::Kind::AddBodyAtom;
        op.added = atom;
        raw.push_back({std::move(child), std::move(op)});
      }
      std::size_t k = digits.size();
      bool advanced = false;
      while (k-- > 0) {
        if (++digits[k] < pool.size()) {
          advanced = true;
          break;
        }
        digits[k] = 0;
      }
      if (!advanced) break;
    }
  }

  for (int from : vars)
    for (int to : vars) {
      if (from == to) continue;
      Clause child = clause;
      substitute(child.head, from, to);
      for (auto& b : child.body) substitute(b, from, to);
      std::vector<Atom> unique_body;
      for (auto& b : child.body)
        if (std::find(unique_body.begin(), unique_body.end(), b) == unique_body.end()) unique_body.push_back(b);
      child.body = std::move(unique_body);
      RefinementOp op;
      op.kind = RefinementOp::Kind::ReplaceVariable;
      op.from = from;
      op.to = to;
      raw.push_back({std::move(child), std::move(op)});
    }

  const auto parent_key = logic::canonical_key(clause);
  std::vector<std::pair<std::string, Refinement>> keyed;
  std::unordered_set<std::string> seen{parent_key};
  for (auto& r : raw) {
    auto key = logic::canonical_key(r.clause);
    if (!seen.insert(key).second) continue;
    keyed.emplace_back(logic::format_clause(logic::canonical(r.clause), vocab), std::move(r));
  }
  std::sort(keyed.begin(), keyed.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<Refinement> out;
  out.reserve(keyed.size());
  for (auto& [k, r] : keyed) out.push_back(std::move(r));
  return out;
}

// ------------------------------------------------------------------- repairs

namespace {

bool fires_on_any_negative(const Clause& c, std::span<const Example* const> stored, const Vocabulary& vocab) {
  for (const Example* ex : stored)
    if (!ex->positive && ex->atom.predicate == c.head.predicate && covers(c, *ex, vocab)) return true;
  return false;
}

}  // namespace

namespace {

// Among equally general repairs, prefer bodies whose literals mention
// variables in the order they were introduced (Lock(X,Y,C) after CurAct(X,Y)
// rather than Lock(Y,X,C)).
int argument_inversions(const Clause& c) {
  std::map<int, int> rank;
  for (const auto& lit : c.body)
    for (const auto& t : lit.terms)
      if (t.variable) rank.try_emplace(t.id, static_cast<int>(rank.size()));
  int inversions = 0;
  for (const auto& lit : c.body)
    for (std::size_t i = 0; i < lit.terms.size(); ++i)
      for (std::size_t j = i + 1; j < lit.terms.size(); ++j)
        if (lit.terms[i].variable && lit.terms[j].variable && rank[lit.terms[i].id] > rank[lit.terms[j].id]) ++inversions;
  return inversions;
}

}  // namespace

RepairResult repair_positive(const Example& ex, const Clause& seed, ClauseSet& set,
                             std::span<const Example* const> stored, const Language& lang) {
  const Vocabulary& vocab = *lang.vocab;
  RepairResult result;
  for (const auto& e : set.clauses(ex.atom.predicate))
    if (covers(e.clause, ex, vocab)) return result;

  std::vector<Refinement> level{{seed, RefinementOp{}}};
  std::unordered_set<std::string> visited{logic::canonical_key(seed)};
  std::map<std::string, std::string> parent_of;
  for (int depth = 0; depth <= lang.limits.depth_cap && !level.empty(); ++depth) {
    std::vector<const Refinement*> covering;
    const Refinement* best = nullptr;
    int best_score = 0;
    for (const auto& r : level) {
      ++result.explored;
      if (!covers(r.clause, ex, vocab)) continue;  // refinements only specialise
      covering.push_back(&r);
      if (set.contains(r.clause) || fires_on_any_negative(r.clause, stored, vocab)) continue;
      const int score = argument_inversions(r.clause);
      if (!best || score < best_score) {
        best = &r;
        best_score = score;
      }
    }
    if (best) {
      const auto key = logic::canonical_key(best->clause);
      set.add(best->clause, parent_of.count(key) ? parent_of[key] : std::string{}, best->op.describe(vocab));
      result.status = RepairStatus::Added;
      result.added.push_back(best->clause);
      return result;
    }
    if (depth == lang.limits.depth_cap) break;
    std::vector<Refinement> next;
    for (const Refinement* r : covering) {
      const auto parent_text = logic::format_clause(r->clause, vocab);
      for (auto& child : refine(r->clause, lang)) {
        auto key = logic::canonical_key(child.clause);
        if (!visited.insert(key).second) continue;
        parent_of[key] = parent_text;
        next.push_back(std::move(child));
      }
    }
    level = std::move(next);
  }
  result.status = RepairStatus::CoverageFailure;
  return result;
}

RepairResult repair_negative(const Example& ex, const Clause& offending, ClauseSet& set,
                             std::span<const Example* const> stored, const Language& lang) {
  const Vocabulary& vocab = *lang.vocab;
  if (ex.positive) throw PreconditionViolation("repair_negative needs a negative example");
  if (!set.contains(offending)) throw PreconditionViolation("offending clause is not in the set");
  if (!covers(offending, ex, vocab)) throw PreconditionViolation("offending clause does not fire on the example");

  const auto offending_key = logic::canonical_key(offending);
  std::vector<const Example*> only_covered;
  for (const Example* s : stored) {
    if (!s->positive || s->atom.predicate != offending.head.predicate) continue;
    if (!covers(offending, *s, vocab)) continue;
    bool other = false;
    for (const auto& e : set.clauses(offending.head.predicate))
      if (e.key != offending_key && covers(e.clause, *s, vocab)) {
        other = true;
        break;
      }
    if (!other) only_covered.push_back(s);
  }

  RepairResult result;
  set.remove(offending);
  result.removed.push_back(offending);
  result.status = RepairStatus::Removed;
  if (only_covered.empty()) return result;

  auto keeps_positives = [&](const Clause& c) {
    return std::all_of(only_covered.begin(), only_covered.end(),
                       [&](const Example* s) { return covers(c, *s, vocab); });
  };

  const auto parent_text = logic::format_clause(offending, vocab);
  std::vector<Refinement> level = refine(offending, lang);
  std::unordered_set<std::string> visited{offending_key};
  for (auto& r : level) visited.insert(logic::canonical_key(r.clause));

  for (int depth = 1; depth <= lang.limits.depth_cap && !level.empty(); ++depth) {
    std::vector<const Refinement*> expandable;
    for (const auto& r : level) {
      ++result.explored;
      if (!keeps_positives(r.clause)) continue;
      if (!covers(r.clause, ex, vocab)) {
        if (static_cast<int>(result.added.size()) < lang.limits.max_added &&
            set.add(r.clause, parent_text, r.op.describe(vocab)))
          result.added.push_back(r.clause);
      } else {
        expandable.push_back(&r);
      }
    }
    if (!result.added.empty()) {
      result.status = RepairStatus::Added;
      return result;
    }
    std::vector<Refinement> next;
    for (const Refinement* r : expandable)
      for (auto& child : refine(r->clause, lang))
        if (visited.insert(logic::canonical_key(child.clause)).second) next.push_back(std::move(child));
    level = std::move(next);
  }
  return result;
}

// -------------------------------------------------------------- subsumption

bool subsumes(const Clause& general, const Clause& specific, const Vocabulary& vocab, std::size_t max_atoms) {
  if (general.head.predicate != specific.head.predicate)
    throw PreconditionViolation("subsumption needs clauses with the same head predicate");
  std::set<PredicateId> preds;
  for (const auto& b : general.body) preds.insert(b.predicate);
  for (const auto& b : specific.body) preds.insert(b.predicate);
  const std::vector<PredicateId> pv(preds.begin(), preds.end());
  const auto index = logic::AtomIndex::build(vocab, pv, max_atoms);
  if (index.size() > max_atoms || index.size() >= 63) throw logic::CapacityError("too many atoms for exhaustive subsumption");

  const std::uint64_t states = 1ull << index.size();
  for (std::uint64_t mask = 0; mask < states; ++mask) {
    std::vector<GroundAtom> atoms;
    for (std::size_t i = 0; i < index.size(); ++i)
      if (mask >> i & 1u) atoms.push_back(index.atom(i));
    const FactBase facts{logic::SymbolicState(std::move(atoms))};
    auto derived = logic::consequences(specific, facts, vocab);
    if (derived.empty()) continue;
    auto general_derived = logic::consequences(general, facts, vocab);
    std::sort(derived.begin(), derived.end());
    std::sort(general_derived.begin(), general_derived.end());
    if (!std::includes(general_derived.begin(), general_derived.end(), derived.begin(), derived.end()))
      return false;
  }
  return true;
}

}  // namespace symhrl::clauses
