#include "symhrl/logic.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <set>

namespace symhrl::logic {

std::string_view kind_name(PredicateKind kind) {
  switch (kind) {
    case PredicateKind::Subgoal: return "subgoal";
    case PredicateKind::Property: return "property";
    case PredicateKind::Event: return "event";
    case PredicateKind::Auxiliary: return "auxiliary";
  }
  return "?";
}

std::optional<PredicateKind> parse_kind(std::string_view name) {
  if (name == "subgoal") return PredicateKind::Subgoal;
  if (name == "property") return PredicateKind::Property;
  if (name == "event") return PredicateKind::Event;
  if (name == "auxiliary") return PredicateKind::Auxiliary;
  return std::nullopt;
}

bool Atom::is_ground() const {
  return std::none_of(terms.begin(), terms.end(), [](const Term& t) { return t.variable; });
}

GroundAtom::GroundAtom(PredicateId p, std::initializer_list<ConstantId> a)
    : GroundAtom(p, std::span<const ConstantId>(a.begin(), a.size())) {}

GroundAtom::GroundAtom(PredicateId p, std::span<const ConstantId> a) : predicate(p) {
  if (a.size() > static_cast<std::size_t>(kMaxArity)) throw LogicError("arity above supported maximum");
  arity = static_cast<std::uint8_t>(a.size());
  std::copy(a.begin(), a.end(), args.begin());
}

std::size_t GroundAtomHash::operator()(const GroundAtom& a) const noexcept {
  std::size_t h = static_cast<std::size_t>(a.predicate) * 0x9E3779B97F4A7C15ull;
  for (int i = 0; i < a.arity; ++i) h = (h ^ static_cast<std::size_t>(a.args[i] + 1)) * 0x100000001B3ull;
  return h;
}

std::vector<int> Clause::variables() const {
  std::set<int> vars;
  auto collect = [&](const Atom& a) {
    for (const auto& t : a.terms)
      if (t.variable) vars.insert(t.id);
  };
  collect(head);
  for (const auto& b : body) collect(b);
  return {vars.begin(), vars.end()};
}

SyntaxError::SyntaxError(const std::string& what, std::size_t position)
    : LogicError(what + " at position " + std::to_string(position)), position_(position) {}

// ---------------------------------------------------------------- Vocabulary

PredicateId Vocabulary::add_predicate(std::string name, int arity, PredicateKind kind) {
  if (arity < 0 || arity > kMaxArity) throw LogicError("unsupported arity for predicate " + name);
  if (predicate_by_name_.count(name)) throw LogicError("duplicate predicate " + name);
  const auto id = static_cast<PredicateId>(predicates_.size());
  predicate_by_name_.emplace(name, id);
  predicates_.push_back({std::move(name), arity, kind});
  return id;
}

ConstantId Vocabulary::add_constant(std::string name) {
  if (auto it = constant_by_name_.find(name); it != constant_by_name_.end()) return it->second;
  if (name.empty() || std::isupper(static_cast<unsigned char>(name[0])))
    throw LogicError("constant names must not start with an uppercase letter: " + name);
  const auto id = static_cast<ConstantId>(constants_.size());
  constant_by_name_.emplace(name, id);
  constants_.push_back(std::move(name));
  return id;
}

std::optional<PredicateId> Vocabulary::find_predicate(std::string_view name) const {
  auto it = predicate_by_name_.find(std::string(name));
  if (it == predicate_by_name_.end()) return std::nullopt;
  return it->second;
}

PredicateId Vocabulary::predicate_id(std::string_view name) const {
  auto p = find_predicate(name);
  if (!p) throw LogicError("unknown predicate " + std::string(name));
  return *p;
}

std::vector<PredicateId> Vocabulary::predicates_of_kind(PredicateKind kind) const {
  std::vector<PredicateId> out;
  for (std::size_t i = 0; i < predicates_.size(); ++i)
    if (predicates_[i].kind == kind) out.push_back(static_cast<PredicateId>(i));
  return out;
}

std::optional<ConstantId> Vocabulary::find_constant(std::string_view name) const {
  auto it = constant_by_name_.find(std::string(name));
  if (it == constant_by_name_.end()) return std::nullopt;
  return it->second;
}

ConstantId Vocabulary::constant_id(std::string_view name) const {
  auto c = find_constant(name);
  if (!c) throw LogicError("unknown constant " + std::string(name));
  return *c;
}

bool Vocabulary::same_signature(const Vocabulary& other) const {
  if (predicates_.size() != other.predicates_.size()) return false;
  for (const auto& p : predicates_) {
    auto q = other.find_predicate(p.name);
    if (!q) return false;
    const auto& op = other.predicate(*q);
    if (op.arity != p.arity || op.kind != p.kind) return false;
  }
  return true;
}

// ------------------------------------------------------------ SymbolicState

SymbolicState::SymbolicState(std::vector<GroundAtom> atoms) : atoms_(std::move(atoms)) {
  std::sort(atoms_.begin(), atoms_.end());
  atoms_.erase(std::unique(atoms_.begin(), atoms_.end()), atoms_.end());
}

bool SymbolicState::insert(const GroundAtom& a) {
  auto it = std::lower_bound(atoms_.begin(), atoms_.end(), a);
  if (it != atoms_.end() && *it == a) return false;
  atoms_.insert(it, a);
  return true;
}

bool SymbolicState::erase(const GroundAtom& a) {
  auto it = std::lower_bound(atoms_.begin(), atoms_.end(), a);
  if (it == atoms_.end() || !(*it == a)) return false;
  atoms_.erase(it);
  return true;
}

bool SymbolicState::contains(const GroundAtom& a) const {
  return std::binary_search(atoms_.begin(), atoms_.end(), a);
}

std::span<const GroundAtom> SymbolicState::of_predicate(PredicateId p) const {
  auto lo = std::lower_bound(atoms_.begin(), atoms_.end(), p,
                             [](const GroundAtom& a, PredicateId q) { return a.predicate < q; });
  auto hi = std::upper_bound(lo, atoms_.end(), p,
                             [](PredicateId q, const GroundAtom& a) { return q < a.predicate; });
  return {atoms_.data() + (lo - atoms_.begin()), static_cast<std::size_t>(hi - lo)};
}

SymbolicState SymbolicState::filtered(const std::function<bool(PredicateId)>& keep) const {
  SymbolicState out;
  for (const auto& a : atoms_)
    if (keep(a.predicate)) out.atoms_.push_back(a);
  return out;
}

void SymbolicState::merge(const SymbolicState& other) {
  std::vector<GroundAtom> merged;
  merged.reserve(atoms_.size() + other.atoms_.size());
  std::set_union(atoms_.begin(), atoms_.end(), other.atoms_.begin(), other.atoms_.end(),
                 std::back_inserter(merged));
  atoms_ = std::move(merged);
}

// ---------------------------------------------------------------- AtomIndex

AtomIndex AtomIndex::build(const Vocabulary& vocab, std::span<const PredicateId> predicates,
                           std::size_t cap) {
  AtomIndex index;
  index.constants_ = vocab.constant_count();
  std::vector<PredicateId> sorted(predicates.begin(), predicates.end());
  std::sort(sorted.begin(), sorted.end(), [&](PredicateId a, PredicateId b) {
    return vocab.predicate(a).name < vocab.predicate(b).name;
  });
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  if (!sorted.empty() && index.constants_ == 0) throw LogicError("vocabulary has no constants");

  index.block_of_predicate_.assign(vocab.predicate_count(), -1);
  std::size_t offset = 0;
  for (PredicateId p : sorted) {
    const int arity = vocab.predicate(p).arity;
    std::size_t count = 1;
    for (int i = 0; i < arity; ++i) {
      count *= index.constants_;
      if (count > cap) throw CapacityError("atom index exceeds capacity");
    }
    index.block_of_predicate_[static_cast<std::size_t>(p)] = static_cast<int>(index.blocks_.size());
    index.blocks_.push_back({p, offset, count, arity});
    offset += count;
    if (offset > cap) throw CapacityError("atom index exceeds capacity");
  }
  index.size_ = offset;
  return index;
}

const AtomIndex::Block* AtomIndex::block(PredicateId p) const {
  if (p < 0 || static_cast<std::size_t>(p) >= block_of_predicate_.size()) return nullptr;
  const int b = block_of_predicate_[static_cast<std::size_t>(p)];
  return b < 0 ? nullptr : &blocks_[static_cast<std::size_t>(b)];
}

GroundAtom AtomIndex::atom(std::size_t position) const {
  auto it = std::upper_bound(blocks_.begin(), blocks_.end(), position,
                             [](std::size_t pos, const Block& b) { return pos < b.offset; });
  if (it == blocks_.begin() || position >= size_) throw LogicError("atom position out of range");
  const Block& b = *std::prev(it);
  std::size_t rel = position - b.offset;
  std::array<ConstantId, kMaxArity> args{};
  for (int i = b.arity - 1; i >= 0; --i) {
    args[static_cast<std::size_t>(i)] = static_cast<ConstantId>(rel % constants_);
    rel /= constants_;
  }
  return GroundAtom(b.predicate, std::span<const ConstantId>(args.data(), static_cast<std::size_t>(b.arity)));
}

std::optional<std::size_t> AtomIndex::position(const GroundAtom& a) const {
  const Block* b = block(a.predicate);
  if (!b || b->arity != a.arity) return std::nullopt;
  std::size_t rel = 0;
  for (int i = 0; i < a.arity; ++i) {
    const auto c = a.args[static_cast<std::size_t>(i)];
    if (c < 0 || static_cast<std::size_t>(c) >= constants_) return std::nullopt;
    rel = rel * constants_ + static_cast<std::size_t>(c);
  }
  return b->offset + rel;
}

// ---------------------------------------------------------- ValuationVector

ValuationVector::ValuationVector(std::vector<double> values) : values_(std::move(values)) {
  if (!in_unit_interval()) throw LogicError("valuation outside [0,1]");
}

void ValuationVector::set(std::size_t i, double v) {
  if (!(v >= 0.0 && v <= 1.0)) throw LogicError("valuation outside [0,1]");
  values_.at(i) = v;
}

bool ValuationVector::in_unit_interval() const {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return v >= 0.0 && v <= 1.0; });
}

std::optional<ConstantId> Substitution::lookup(int variable) const {
  for (const auto& [v, c] : bindings)
    if (v == variable) return c;
  return std::nullopt;
}

// --------------------------------------------------------------- operations

AtomIndex enumerate_ground_atoms(const Vocabulary& vocab, std::span<const PredicateId> predicates,
                                 std::size_t cap) {
  return AtomIndex::build(vocab, predicates, cap);
}

ValuationVector valuation_from_state(const SymbolicState& state, const AtomIndex& index) {
  ValuationVector v(index.size());
  for (const auto& a : state.atoms())
    if (auto pos = index.position(a)) v.set(*pos, 1.0);
  return v;
}

std::vector<Substitution> ground_substitutions(const Clause& clause, const Vocabulary& vocab,
                                               std::size_t cap) {
  const auto vars = clause.variables();
  if (static_cast<int>(vars.size()) > vocab.max_variables())
    throw CapacityError("clause uses more variables than the vocabulary allows");
  const std::size_t n = vocab.constant_count();
  std::size_t total = 1;
  for (std::size_t i = 0; i < vars.size(); ++i) {
    total *= n;
    if (total > cap) throw CapacityError("substitution count exceeds capacity");
  }
  std::vector<Substitution> subs;
  subs.reserve(total);
  std::vector<ConstantId> digits(vars.size(), 0);
  for (std::size_t k = 0; k < total; ++k) {
    Substitution s;
    for (std::size_t i = 0; i < vars.size(); ++i) s.bindings.emplace_back(vars[i], digits[i]);
    subs.push_back(std::move(s));
    for (std::size_t i = vars.size(); i-- > 0;) {
      if (static_cast<std::size_t>(++digits[i]) < n) break;
      digits[i] = 0;
    }
  }
  return subs;
}

GroundAtom apply(const Atom& atom, const Substitution& sub) {
  std::array<ConstantId, kMaxArity> args{};
  for (std::size_t i = 0; i < atom.terms.size(); ++i) {
    const Term& t = atom.terms[i];
    if (t.variable) {
      auto c = sub.lookup(t.id);
      if (!c) throw LogicError("unbound variable during grounding");
      args[i] = *c;
    } else {
      args[i] = t.id;
    }
  }
  return GroundAtom(atom.predicate, std::span<const ConstantId>(args.data(), atom.terms.size()));
}

// ------------------------------------------------------------ text format

namespace {

constexpr std::string_view kArrow = "\xE2\x86\x90";  // U+2190

std::string variable_name(int id) {
  static constexpr std::string_view names = "XYZUVW";
  if (id >= 0 && static_cast<std::size_t>(id) < names.size()) return std::string(1, names[static_cast<std::size_t>(id)]);
  return "V" + std::to_string(id);
}

class Parser {
 public:
  Parser(std::string_view text, const Vocabulary& vocab) : text_(text), vocab_(vocab) {}

  Clause clause() {
    Clause c;
    c.head = atom();
    skip_ws();
    if (consume(kArrow) || consume("<-") || consume(":-")) {
    } else {
      fail("expected '\xE2\x86\x90'");
    }
    do {
      c.body.push_back(atom());
      skip_ws();
    } while (consume(","));
    skip_ws();
    if (pos_ != text_.size()) fail("unexpected trailing input");
    return c;
  }

  GroundAtom ground_atom() {
    Atom a = atom();
    skip_ws();
    if (pos_ != text_.size()) fail("unexpected trailing input");
    if (!a.is_ground()) fail("expected a ground atom");
    std::array<ConstantId, kMaxArity> args{};
    for (std::size_t i = 0; i < a.terms.size(); ++i) args[i] = a.terms[i].id;
    return GroundAtom(a.predicate, std::span<const ConstantId>(args.data(), a.terms.size()));
  }

 private:
  [[noreturn]] void fail(const std::string& msg) const { throw SyntaxError(msg, pos_); }

  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool consume(std::string_view tok) {
    skip_ws();
    if (text_.substr(pos_, tok.size()) == tok) {
      pos_ += tok.size();
      return true;
    }
    return false;
  }

  std::string identifier() {
    skip_ws();
    const std::size_t start = pos_;
    while (pos_ < text_.size() &&
           (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_'))
      ++pos_;
    if (pos_ == start) fail("expected identifier");
    return std::string(text_.substr(start, pos_ - start));
  }

  Atom atom() {
    const std::size_t start = pos_;
    const std::string name = identifier();
    auto pid = vocab_.find_predicate(name);
    if (!pid) throw SyntaxError("unknown predicate '" + name + "'", start);
    Atom a;
    a.predicate = *pid;
    if (!consume("(")) fail("expected '('");
    skip_ws();
    if (!consume(")")) {
      do {
        const std::size_t tpos = pos_;
        const std::string tok = identifier();
        if (std::isupper(static_cast<unsigned char>(tok[0]))) {
          auto [it, inserted] = variables_.emplace(tok, static_cast<int>(variables_.size()));
          a.terms.push_back(Term::var(it->second));
        } else {
          auto cid = vocab_.find_constant(tok);
          if (!cid) throw SyntaxError("unknown constant '" + tok + "'", tpos);
          a.terms.push_back(Term::constant(*cid));
        }
      } while (consume(","));
      if (!consume(")")) fail("expected ')'");
    }
    if (static_cast<int>(a.terms.size()) != vocab_.predicate(a.predicate).arity)
      throw SyntaxError("arity mismatch for '" + name + "'", start);
    return a;
  }

  std::string_view text_;
  const Vocabulary& vocab_;
  std::size_t pos_ = 0;
  std::map<std::string, int> variables_;
};

}  // namespace

Clause parse_clause(std::string_view text, const Vocabulary& vocab) {
  return Parser(text, vocab).clause();
}

GroundAtom parse_ground_atom(std::string_view text, const Vocabulary& vocab) {
  return Parser(text, vocab).ground_atom();
}

std::string format_atom(const Atom& atom, const Vocabulary& vocab) {
  std::string out = vocab.predicate(atom.predicate).name + "(";
  for (std::size_t i = 0; i < atom.terms.size(); ++i) {
    if (i) out += ',';
    const Term& t = atom.terms[i];
    out += t.variable ? variable_name(t.id) : vocab.constant_name(t.id);
  }
  return out + ")";
}

std::string format_ground_atom(const GroundAtom& atom, const Vocabulary& vocab) {
  std::string out = vocab.predicate(atom.predicate).name + "(";
  for (int i = 0; i < atom.arity; ++i) {
    if (i) out += ',';
    out += vocab.constant_name(atom.args[static_cast<std::size_t>(i)]);
  }
  return out + ")";
}

std::string format_clause(const Clause& clause, const Vocabulary& vocab) {
  std::string out = format_atom(clause.head, vocab);
  out += kArrow;
  for (std::size_t i = 0; i < clause.body.size(); ++i) {
    if (i) out += ", ";
    out += format_atom(clause.body[i], vocab);
  }
  return out;
}

std::vector<Clause> parse_rules(std::string_view text, const Vocabulary& vocab) {
  std::vector<Clause> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    while (!line.empty() && std::isspace(static_cast<unsigned char>(line.front()))) line.remove_prefix(1);
    while (!line.empty() && std::isspace(static_cast<unsigned char>(line.back()))) line.remove_suffix(1);
    if (!line.empty() && line.front() != '#') out.push_back(parse_clause(line, vocab));
    start = end + 1;
  }
  return out;
}

// ------------------------------------------------------------- canonical

Clause canonical(const Clause& clause) {
  const auto vars = clause.variables();
  std::vector<int> perm(vars.size());
  for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = static_cast<int>(i);

  auto rename = [&](const Atom& a) {
    Atom r = a;
    for (auto& t : r.terms)
      if (t.variable) {
        const auto k = std::lower_bound(vars.begin(), vars.end(), t.id) - vars.begin();
        t.id = perm[static_cast<std::size_t>(k)];
      }
    return r;
  };

  std::optional<Clause> best;
  do {
    Clause c;
    c.head = rename(clause.head);
    for (const auto& b : clause.body) c.body.push_back(rename(b));
    std::sort(c.body.begin(), c.body.end());
    c.body.erase(std::unique(c.body.begin(), c.body.end()), c.body.end());
    if (!best || c < *best) best = std::move(c);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return *best;
}

std::string canonical_key(const Clause& clause) {
  const Clause c = canonical(clause);
  std::string key;
  auto put_atom = [&](const Atom& a) {
    key += std::to_string(a.predicate);
    key += '(';
    for (const auto& t : a.terms) {
      key += t.variable ? 'v' : 'c';
      key += std::to_string(t.id);
      key += ',';
    }
    key += ')';
  };
  put_atom(c.head);
  key += ":-";
  for (const auto& b : c.body) put_atom(b);
  return key;
}

bool is_valid_clause(const Clause& clause, const Vocabulary& vocab) {
  auto ok = [&](const Atom& a) {
    return a.predicate >= 0 && static_cast<std::size_t>(a.predicate) < vocab.predicate_count() &&
           static_cast<int>(a.terms.size()) == vocab.predicate(a.predicate).arity;
  };
  if (!ok(clause.head)) return false;
  if (vocab.predicate(clause.head.predicate).kind == PredicateKind::Property) return false;
  return std::all_of(clause.body.begin(), clause.body.end(), ok) &&
         clause.variable_count() <= vocab.max_variables();
}

// ---------------------------------------------------------- crisp chaining

FactBase::FactBase(const SymbolicState& state) : state_(state) {}

namespace {

constexpr int kMaxVarId = 32;
using Binding = std::array<ConstantId, kMaxVarId>;

bool unify(const Atom& pattern, const GroundAtom& fact, Binding& b, std::vector<int>& trail) {
  for (std::size_t i = 0; i < pattern.terms.size(); ++i) {
    const Term& t = pattern.terms[i];
    const ConstantId c = fact.args[i];
    if (!t.variable) {
      if (t.id != c) return false;
      continue;
    }
    auto& slot = b[static_cast<std::size_t>(t.id)];
    if (slot < 0) {
      slot = c;
      trail.push_back(t.id);
    } else if (slot != c) {
      return false;
    }
  }
  return true;
}

template <typename Visit>
bool search(const Clause& clause, const FactBase& facts, std::size_t i, Binding& b, Visit&& visit) {
  if (i == clause.body.size()) return visit(b);
  const Atom& a = clause.body[i];
  for (const auto& f : facts.facts(a.predicate)) {
    std::vector<int> trail;
    if (unify(a, f, b, trail) && search(clause, facts, i + 1, b, visit)) {
      for (int v : trail) b[static_cast<std::size_t>(v)] = -1;
      return true;
    }
    for (int v : trail) b[static_cast<std::size_t>(v)] = -1;
  }
  return false;
}

void check_var_ids(const Clause& clause) {
  for (int v : clause.variables())
    if (v < 0 || v >= kMaxVarId) throw LogicError("variable id out of supported range");
}

}  // namespace

bool derives(const Clause& clause, const FactBase& facts, const GroundAtom& head,
             const Vocabulary&) {
  if (clause.head.predicate != head.predicate || clause.head.terms.size() != head.arity) return false;
  check_var_ids(clause);
  Binding b;
  b.fill(-1);
  std::vector<int> trail;
  if (!unify(clause.head, head, b, trail)) return false;
  return search(clause, facts, 0, b, [](const Binding&) { return true; });
}

std::vector<GroundAtom> consequences(const Clause& clause, const FactBase& facts,
                                     const Vocabulary& vocab) {
  check_var_ids(clause);
  std::set<GroundAtom> out;
  Binding b;
  b.fill(-1);
  const auto n = static_cast<ConstantId>(vocab.constant_count());
  search(clause, facts, 0, b, [&](const Binding& bound) {
    std::vector<int> free;
    for (const auto& t : clause.head.terms)
      if (t.variable && bound[static_cast<std::size_t>(t.id)] < 0 &&
          std::find(free.begin(), free.end(), t.id) == free.end())
        free.push_back(t.id);
    Binding local = bound;
    std::vector<ConstantId> digits(free.size(), 0);
    while (true) {
      for (std::size_t k = 0; k < free.size(); ++k) local[static_cast<std::size_t>(free[k])] = digits[k];
      std::array<ConstantId, kMaxArity> args{};
      for (std::size_t k = 0; k < clause.head.terms.size(); ++k) {
        const Term& t = clause.head.terms[k];
        args[k] = t.variable ? local[static_cast<std::size_t>(t.id)] : t.id;
      }
      out.insert(GroundAtom(clause.head.predicate,
                            std::span<const ConstantId>(args.data(), clause.head.terms.size())));
      std::size_t k = free.size();
      bool advanced = false;
      while (k-- > 0) {
        if (++digits[k] < n) {
          advanced = true;
          break;
        }
        digits[k] = 0;
      }
      if (!advanced) break;
    }
    return false;  // keep enumerating
  });
  return {out.begin(), out.end()};
}

}  // namespace symhrl::logic
