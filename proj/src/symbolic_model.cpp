#include "symhrl/symbolic_model.hpp"

#include <algorithm>
#include <array>
#include <set>

namespace symhrl::model {

using clauses::Example;
using logic::PredicateId;
using logic::PredicateKind;

namespace {

bool is_kind(const Vocabulary& v, PredicateId p, PredicateKind k) { return v.predicate(p).kind == k; }

std::vector<PredicateId> kinds(const Vocabulary& v, std::initializer_list<PredicateKind> ks) {
  std::vector<PredicateId> out;
  for (auto k : ks) {
    auto ps = v.predicates_of_kind(k);
    out.insert(out.end(), ps.begin(), ps.end());
  }
  std::sort(out.begin(), out.end());
  return out;
}

dilp::WeightedProgram make_program(const Vocabulary& v, std::initializer_list<PredicateKind> inputs,
                                   PredicateKind target, const dilp::ProgramConfig& cfg) {
  auto preds = kinds(v, inputs);
  return dilp::WeightedProgram(v, logic::enumerate_ground_atoms(v, preds), v.predicates_of_kind(target), cfg);
}

void append_atom(std::string& key, const GroundAtom& a) {
  key += std::to_string(a.predicate);
  for (auto c : a.arguments()) {
    key += ',';
    key += std::to_string(c);
  }
  key += ';';
}

std::string example_key(const Example& ex) {
  std::string key = ex.positive ? "+" : "-";
  append_atom(key, ex.atom);
  key += '|';
  for (const auto& a : ex.facts.state().atoms()) append_atom(key, a);
  return key;
}

}  // namespace

std::optional<GroundAtom> current_subgoal(const SymbolicState& s, const Vocabulary& vocab) {
  for (const auto& a : s.atoms())
    if (is_kind(vocab, a.predicate, PredicateKind::Subgoal)) return a;
  return std::nullopt;
}

SymbolicState precondition_facts(const SymbolicState& s_hat, const SymbolicState& s_next, const GroundAtom& subgoal,
                                 const Vocabulary& vocab) {
  std::vector<GroundAtom> atoms;
  for (const auto& a : s_hat.atoms()) {
    const auto k = vocab.predicate(a.predicate).kind;
    if (k == PredicateKind::Property || k == PredicateKind::Event) atoms.push_back(a);
  }
  const auto cur = current_subgoal(s_hat, vocab);
  if (!cur || cur->arity != 1 || subgoal.arity != 1) return SymbolicState(std::move(atoms));
  const std::array<logic::ConstantId, 2> pair{cur->args[0], subgoal.args[0]};
  // The transition itself may establish facts about the traversed pair
  // (e.g. that it is connected); other facts revealed on arrival are not
  // evidence about whether the move was possible.
  for (const auto& a : s_next.atoms())
    if (is_kind(vocab, a.predicate, PredicateKind::Property) && a.arity == 2 && a.args[0] == pair[0] &&
        a.args[1] == pair[1])
      atoms.push_back(a);
  if (const auto curact = vocab.find_predicate("CurAct")) atoms.push_back(GroundAtom(*curact, pair));
  return SymbolicState(std::move(atoms));
}

SymbolicState effect_facts(const SymbolicState& s_hat, const SymbolicState& s_next, const GroundAtom& subgoal,
                           const Vocabulary& vocab) {
  std::vector<GroundAtom> atoms{subgoal};
  for (const auto* s : {&s_hat, &s_next})
    for (const auto& a : s->atoms())
      if (is_kind(vocab, a.predicate, PredicateKind::Property)) atoms.push_back(a);
  return SymbolicState(std::move(atoms));
}

// ---------------------------------------------------------------- examples

bool SymbolicModel::ExampleStore::add(const Example& ex) {
  std::string key = example_key(ex);
  if (!keys.insert(std::move(key)).second) return false;
  by_predicate[ex.atom.predicate].push_back(ex);
  return true;
}

std::vector<const Example*> SymbolicModel::ExampleStore::pointers(PredicateId p) const {
  std::vector<const Example*> out;
  auto it = by_predicate.find(p);
  if (it == by_predicate.end()) return out;
  out.reserve(it->second.size());
  for (const auto& ex : it->second) out.push_back(&ex);
  return out;
}

SymbolicModel::SymbolicModel(const Vocabulary& vocab, ModelConfig config)
    : vocab_(&vocab),
      config_(config),
      pre_lang_(clauses::precondition_language(vocab, config.limits)),
      eff_lang_(clauses::effect_language(vocab, config.limits)),
      pre_(make_program(vocab, {PredicateKind::Subgoal, PredicateKind::Property, PredicateKind::Event,
                                PredicateKind::Auxiliary},
                        PredicateKind::Subgoal, config.pre)),
      eff_(make_program(vocab, {PredicateKind::Subgoal, PredicateKind::Property, PredicateKind::Event},
                        PredicateKind::Event, config.eff)) {
  pre_.sync(pre_set_);
  eff_.sync(eff_set_);
}

std::vector<Example> SymbolicModel::precondition_examples(const TransitionRecord& rec) const {
  if (!rec.success && !rec.reliable) return {};
  const auto& next = rec.success ? rec.s_hat_next : rec.s_hat;
  return {Example{logic::FactBase(precondition_facts(rec.s_hat, next, rec.subgoal, *vocab_)), rec.subgoal,
                  rec.success}};
}

std::vector<Example> SymbolicModel::effect_examples(const TransitionRecord& rec) const {
  std::vector<Example> out;
  if (!rec.success) return out;
  const logic::FactBase facts(effect_facts(rec.s_hat, rec.s_hat_next, rec.subgoal, *vocab_));
  const auto& index = eff_.index();
  for (const auto& block : index.blocks()) {
    if (!is_kind(*vocab_, block.predicate, PredicateKind::Event)) continue;
    for (std::size_t i = 0; i < block.count; ++i) {
      const auto atom = index.atom(block.offset + i);
      if (rec.s_hat.contains(atom)) continue;
      out.push_back(Example{facts, atom, rec.s_hat_next.contains(atom)});
    }
  }
  return out;
}

bool SymbolicModel::explains_preconditions(const TransitionRecord& rec) const {
  const auto& next = rec.success ? rec.s_hat_next : rec.s_hat;
  const Example ex{logic::FactBase(precondition_facts(rec.s_hat, next, rec.subgoal, *vocab_)), rec.subgoal,
                   rec.success};
  bool fired = false;
  for (const auto& e : pre_set_.clauses(rec.subgoal.predicate))
    if (clauses::covers(e.clause, ex, *vocab_)) {
      fired = true;
      break;
    }
  return fired == rec.success;
}

bool SymbolicModel::explains(const TransitionRecord& rec) const {
  if (!explains_preconditions(rec)) return false;
  for (const auto& ex : effect_examples(rec)) {
    bool fired = false;
    for (const auto& e : eff_set_.clauses(ex.atom.predicate))
      if (clauses::covers(e.clause, ex, *vocab_)) {
        fired = true;
        break;
      }
    if (fired != ex.positive) return false;
  }
  return true;
}

std::vector<RepairEvent> SymbolicModel::repair_examples(const std::vector<Example>& examples, bool effects,
                                                        const GroundAtom& subgoal) {
  auto& store = effects ? eff_store_ : pre_store_;
  auto& set = effects ? eff_set_ : pre_set_;
  const auto& lang = effects ? eff_lang_ : pre_lang_;
  for (const auto& ex : examples) store.add(ex);

  std::vector<RepairEvent> events;
  auto describe = [&](const Example& ex) {
    return std::string(ex.positive ? "+" : "-") + logic::format_ground_atom(ex.atom, *vocab_);
  };
  auto record = [&](const Example& ex, const clauses::RepairResult& r) {
    RepairEvent ev{effects ? "eff" : "pre", describe(ex), r.status, {}, {}};
    for (const auto& c : r.added) ev.added.push_back(logic::format_clause(c, *vocab_));
    for (const auto& c : r.removed) ev.removed.push_back(logic::format_clause(c, *vocab_));
    events.push_back(std::move(ev));
  };

  // Negatives first: specialising an offending clause keeps the positives it
  // alone explained, and the positive search then avoids every negative.
  std::set<logic::PredicateId> pruned;
  for (const auto& ex : examples) {
    if (ex.positive) continue;
    std::vector<logic::Clause> offending;
    for (const auto& e : set.clauses(ex.atom.predicate))
      if (clauses::covers(e.clause, ex, *vocab_)) offending.push_back(e.clause);
    for (const auto& c : offending) {
      if (!set.contains(c) || !clauses::covers(c, ex, *vocab_)) continue;
      const auto stored = store.pointers(ex.atom.predicate);
      auto r = clauses::repair_negative(ex, c, set, stored, lang);
      if (r.status == clauses::RepairStatus::Removed) pruned.insert(ex.atom.predicate);
      record(ex, r);
    }
  }
  // A clause dropped outright may have been the only explanation of an older
  // positive, so those are searched again alongside the new ones.
  std::vector<Example> positives;
  for (const auto p : pruned)
    for (const auto* ex : store.pointers(p))
      if (ex->positive) positives.push_back(*ex);
  for (const auto& ex : examples)
    if (ex.positive) positives.push_back(ex);
  for (const auto& ex : positives) {
    bool covered = false;
    for (const auto& e : set.clauses(ex.atom.predicate))
      if (clauses::covers(e.clause, ex, *vocab_)) {
        covered = true;
        break;
      }
    if (covered) continue;
    const auto seed = effects ? clauses::most_general_clause(ex.atom.predicate, *vocab_, subgoal.predicate)
                              : clauses::most_general_clause(ex.atom.predicate, *vocab_);
    const auto stored = store.pointers(ex.atom.predicate);
    record(ex, clauses::repair_positive(ex, seed, set, stored, lang));
  }
  return events;
}

std::vector<RepairEvent> SymbolicModel::observe(const TransitionRecord& rec) {
  const auto pre_before = pre_set_.size();
  const auto eff_before = eff_set_.size();
  auto events = repair_examples(precondition_examples(rec), false, rec.subgoal);
  auto eff_events = repair_examples(effect_examples(rec), true, rec.subgoal);
  events.insert(events.end(), eff_events.begin(), eff_events.end());
  if (!events.empty() || pre_set_.size() != pre_before) pre_.sync(pre_set_);
  if (!eff_events.empty() || eff_set_.size() != eff_before) eff_.sync(eff_set_);
  return events;
}

std::size_t SymbolicModel::stored_examples() const { return pre_store_.size() + eff_store_.size(); }

// -------------------------------------------------------------- prediction

Prediction SymbolicModel::predict(const SymbolicState& s_hat, const GroundAtom& subgoal) const {
  Prediction out;
  out.next = s_hat;
  const auto cur = current_subgoal(s_hat, *vocab_);
  out.reward = cur ? reward_estimate(*cur, subgoal) : config_.unseen_reward;

  const auto pre_facts = precondition_facts(s_hat, s_hat, subgoal, *vocab_);
  const auto pre_trace = pre_.deduce(logic::valuation_from_state(pre_facts, pre_.index()));
  out.confidence = pre_.confidence(pre_trace.final(), subgoal);
  out.achieved = out.confidence >= config_.tau;
  if (!out.achieved) return out;

  std::vector<GroundAtom> next;
  for (const auto& a : s_hat.atoms())
    if (!is_kind(*vocab_, a.predicate, PredicateKind::Subgoal)) next.push_back(a);
  next.push_back(subgoal);
  const auto eff_facts = effect_facts(s_hat, s_hat, subgoal, *vocab_);
  const auto eff_trace = eff_.deduce(logic::valuation_from_state(eff_facts, eff_.index()));
  const auto& index = eff_.index();
  for (const auto& block : index.blocks()) {
    if (!is_kind(*vocab_, block.predicate, PredicateKind::Event)) continue;
    for (std::size_t i = 0; i < block.count; ++i)
      if (eff_trace.final()[block.offset + i] >= config_.tau) next.push_back(index.atom(block.offset + i));
  }
  out.next = SymbolicState(std::move(next));
  return out;
}

double SymbolicModel::reward_estimate(const GroundAtom& from, const GroundAtom& to) const {
  auto it = rewards_.find({from, to});
  return it == rewards_.end() ? config_.unseen_reward : it->second;
}

// ----------------------------------------------------------------- training

dilp::TrainingExample SymbolicModel::pre_training_example(const TransitionRecord& rec) const {
  const auto& next = rec.success ? rec.s_hat_next : rec.s_hat;
  dilp::TrainingExample ex;
  ex.e0 = logic::valuation_from_state(precondition_facts(rec.s_hat, next, rec.subgoal, *vocab_), pre_.index());
  ex.target = logic::ValuationVector(pre_.index().size());
  const auto pos = pre_.index().position(rec.subgoal);
  if (pos) {
    ex.target.set(*pos, rec.success ? 1.0 : 0.0);
    ex.mask = {*pos};
  }
  return ex;
}

dilp::TrainingExample SymbolicModel::eff_training_example(const TransitionRecord& rec) const {
  const auto& index = eff_.index();
  dilp::TrainingExample ex;
  ex.e0 = logic::valuation_from_state(effect_facts(rec.s_hat, rec.s_hat_next, rec.subgoal, *vocab_), index);
  ex.target = logic::ValuationVector(index.size());
  for (const auto& block : index.blocks()) {
    if (!is_kind(*vocab_, block.predicate, PredicateKind::Event)) continue;
    for (std::size_t i = 0; i < block.count; ++i) {
      const auto atom = index.atom(block.offset + i);
      if (rec.s_hat.contains(atom)) continue;
      ex.mask.push_back(block.offset + i);
      if (rec.s_hat_next.contains(atom)) ex.target.set(block.offset + i, 1.0);
    }
  }
  return ex;
}

FitResult SymbolicModel::fit(std::span<const TransitionRecord* const> batch) {
  FitResult out;
  std::vector<dilp::TrainingExample> pre_batch, eff_batch;
  for (const TransitionRecord* rec : batch) {
    if (const auto cur = current_subgoal(rec->s_hat, *vocab_)) {
      auto [it, fresh] = rewards_.try_emplace({*cur, rec->subgoal}, rec->extrinsic_reward);
      if (!fresh)
        it->second = config_.reward_decay * it->second + (1.0 - config_.reward_decay) * rec->extrinsic_reward;
    }
    if (!rec->success && !rec->reliable) continue;
    pre_batch.push_back(pre_training_example(*rec));
    if (rec->success) eff_batch.push_back(eff_training_example(*rec));
  }
  out.pre_examples = pre_batch.size();
  out.eff_examples = eff_batch.size();
  if (!pre_batch.empty()) out.pre_loss = pre_.train_step(pre_batch);
  if (!eff_batch.empty()) out.eff_loss = eff_.train_step(eff_batch);
  return out;
}

// --------------------------------------------------------------- checkpoint

nlohmann::json SymbolicModel::to_json() const {
  nlohmann::json rewards = nlohmann::json::array();
  for (const auto& [key, value] : rewards_)
    rewards.push_back({{"from", logic::format_ground_atom(key.first, *vocab_)},
                       {"to", logic::format_ground_atom(key.second, *vocab_)},
                       {"value", value}});
  return {{"format", "symhrl-model"},
          {"version", 1},
          {"pre_clauses", pre_set_.serialize(*vocab_)},
          {"eff_clauses", eff_set_.serialize(*vocab_)},
          {"pre_params", pre_.parameters_json()},
          {"eff_params", eff_.parameters_json()},
          {"rewards", rewards}};
}

void SymbolicModel::load_json(const nlohmann::json& j, bool with_rewards) {
  if (j.at("format").get<std::string>() != "symhrl-model") throw std::invalid_argument("not a model checkpoint");
  if (j.at("version").get<int>() != 1) throw std::invalid_argument("unsupported model checkpoint version");
  pre_set_ = clauses::ClauseSet::parse(j.at("pre_clauses").get<std::string>(), *vocab_);
  eff_set_ = clauses::ClauseSet::parse(j.at("eff_clauses").get<std::string>(), *vocab_);
  pre_.sync(pre_set_);
  eff_.sync(eff_set_);
  pre_.load_parameters_json(j.at("pre_params"));
  eff_.load_parameters_json(j.at("eff_params"));
  pre_store_ = {};
  eff_store_ = {};
  rewards_.clear();
  if (with_rewards)
    for (const auto& r : j.at("rewards"))
      rewards_[{logic::parse_ground_atom(r.at("from").get<std::string>(), *vocab_),
                logic::parse_ground_atom(r.at("to").get<std::string>(), *vocab_)}] = r.at("value").get<double>();
}

}  // namespace symhrl::model
