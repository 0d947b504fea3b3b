#include "symhrl/agent.hpp"

#include <algorithm>
#include <stdexcept>

namespace symhrl::agent {

namespace {

std::string_view status_name(clauses::RepairStatus s) {
  switch (s) {
    case clauses::RepairStatus::AlreadyExplained: return "explained";
    case clauses::RepairStatus::Added: return "added";
    case clauses::RepairStatus::CoverageFailure: return "coverage_failure";
    case clauses::RepairStatus::Removed: return "removed";
  }
  return "?";
}

nlohmann::json atom_json(const GroundAtom& a) {
  return {{"predicate", a.predicate}, {"args", std::vector<int>(a.arguments().begin(), a.arguments().end())}};
}

GroundAtom atom_from_json(const nlohmann::json& j) {
  const auto args = j.at("args").get<std::vector<int>>();
  return GroundAtom(j.at("predicate").get<int>(), std::span<const int>(args));
}

}  // namespace

std::string_view kind_name(EpisodeKind k) { return k == EpisodeKind::Real ? "real" : "model"; }

// ------------------------------------------------------------ extrinsic reward

double extrinsic_reward(double t, std::int64_t n, double R, const RewardConfig& cfg) {
  if (t > cfg.threshold) return R;
  if (n > cfg.trial_budget) return -cfg.xi1;
  return -cfg.xi0;
}

double SubtaskEntry::rate() const {
  if (window.empty()) return 0.0;
  return static_cast<double>(std::count(window.begin(), window.end(), true)) / static_cast<double>(window.size());
}

void SubtaskStats::record(const GroundAtom& from, const GroundAtom& to, bool success, double env_reward) {
  auto& e = entries_[{from, to}];
  e.window.push_back(success);
  if (e.window.size() > window_) e.window.pop_front();
  ++e.trials;
  if (success) {
    e.reward = e.successes == 0 ? env_reward : decay_ * e.reward + (1.0 - decay_) * env_reward;
    ++e.successes;
  }
}

const SubtaskEntry* SubtaskStats::find(const GroundAtom& from, const GroundAtom& to) const {
  const auto it = entries_.find({from, to});
  return it == entries_.end() ? nullptr : &it->second;
}

double SubtaskStats::mean_feasible_rate() const {
  double sum = 0.0;
  int count = 0;
  for (const auto& [key, e] : entries_) {
    if (e.successes == 0) continue;
    sum += e.rate();
    ++count;
  }
  return count ? sum / count : 0.0;
}

nlohmann::json SubtaskStats::to_json() const {
  auto arr = nlohmann::json::array();
  for (const auto& [key, e] : entries_)
    arr.push_back({{"from", atom_json(key.first)},
                   {"to", atom_json(key.second)},
                   {"window", std::vector<bool>(e.window.begin(), e.window.end())},
                   {"trials", e.trials},
                   {"successes", e.successes},
                   {"reward", e.reward}});
  return {{"window", window_}, {"reward_decay", decay_}, {"entries", arr}};
}

void SubtaskStats::load_json(const nlohmann::json& j) {
  window_ = j.at("window").get<std::size_t>();
  decay_ = j.at("reward_decay").get<double>();
  entries_.clear();
  for (const auto& e : j.at("entries")) {
    SubtaskEntry entry;
    for (bool b : e.at("window").get<std::vector<bool>>()) entry.window.push_back(b);
    entry.trials = e.at("trials").get<std::int64_t>();
    entry.successes = e.at("successes").get<std::int64_t>();
    entry.reward = e.at("reward").get<double>();
    entries_[{atom_from_json(e.at("from")), atom_from_json(e.at("to"))}] = std::move(entry);
  }
}

// ---------------------------------------------------------------- replay

void ReplayBuffer::push(TransitionRecord rec) {
  if (capacity_ == 0) return;
  if (records_.size() == capacity_) records_.pop_front();
  records_.push_back(std::move(rec));
}

std::vector<const TransitionRecord*> ReplayBuffer::sample(std::size_t k, std::mt19937_64& rng) const {
  std::vector<const TransitionRecord*> all;
  all.reserve(records_.size());
  for (const auto& r : records_) all.push_back(&r);
  if (all.size() <= k) return all;
  std::vector<const TransitionRecord*> out;
  std::sample(all.begin(), all.end(), std::back_inserter(out), k, rng);
  return out;
}

// ------------------------------------------------------------- high-level Q

std::string state_key(const SymbolicState& s, const logic::Vocabulary& vocab, const std::set<logic::PredicateId>& ignored) {
  // SymbolicState keeps its atoms sorted, so the concatenation is canonical.
  std::string key;
  for (const auto& a : s.atoms()) {
    const auto kind = vocab.predicate(a.predicate).kind;
    if (kind != logic::PredicateKind::Subgoal && kind != logic::PredicateKind::Event) continue;
    if (ignored.contains(a.predicate)) continue;
    if (!key.empty()) key += ',';
    key += logic::format_ground_atom(a, vocab);
  }
  return key;
}

double HighLevelQ::value(const std::string& key, const GroundAtom& p) const {
  const auto it = table_.find(key);
  if (it == table_.end()) return 0.0;
  const auto jt = it->second.find(p);
  return jt == it->second.end() ? 0.0 : jt->second;
}

const GroundAtom& HighLevelQ::greedy(const std::string& key, const std::vector<GroundAtom>& candidates) const {
  if (candidates.empty()) throw std::invalid_argument("no candidate subgoals");
  std::size_t best = 0;
  double best_v = value(key, candidates[0]);
  for (std::size_t i = 1; i < candidates.size(); ++i) {
    const double v = value(key, candidates[i]);
    if (v > best_v) {
      best_v = v;
      best = i;
    }
  }
  return candidates[best];
}

double HighLevelQ::max_value(const std::string& key, const std::vector<GroundAtom>& candidates) const {
  if (candidates.empty()) return 0.0;
  return value(key, greedy(key, candidates));
}

double HighLevelQ::update(const std::string& key, const GroundAtom& p, double reward, const std::string& next_key,
                          const std::vector<GroundAtom>& next_candidates, bool terminal) {
  const double target = reward + (terminal ? 0.0 : gamma_ * max_value(next_key, next_candidates));
  double& q = table_[key][p];
  const double td = target - q;
  q += alpha_ * td;
  return td;
}

std::size_t HighLevelQ::size() const {
  std::size_t n = 0;
  for (const auto& [k, row] : table_) n += row.size();
  return n;
}

nlohmann::json HighLevelQ::to_json() const {
  auto rows = nlohmann::json::array();
  for (const auto& [k, row] : table_) {
    auto values = nlohmann::json::array();
    for (const auto& [atom, v] : row) values.push_back({{"atom", atom_json(atom)}, {"q", v}});
    rows.push_back({{"state", k}, {"values", values}});
  }
  return {{"alpha", alpha_}, {"gamma", gamma_}, {"rows", rows}};
}

void HighLevelQ::load_json(const nlohmann::json& j) {
  alpha_ = j.at("alpha").get<double>();
  gamma_ = j.at("gamma").get<double>();
  table_.clear();
  for (const auto& row : j.at("rows")) {
    auto& r = table_[row.at("state").get<std::string>()];
    for (const auto& v : row.at("values")) r[atom_from_json(v.at("atom"))] = v.at("q").get<double>();
  }
}

GroundAtom select_subgoal(const HighLevelQ& q, const std::string& key, const std::vector<GroundAtom>& candidates,
                          double epsilon, std::mt19937_64& rng) {
  if (candidates.empty()) throw std::invalid_argument("no candidate subgoals");
  std::uniform_real_distribution<double> u(0.0, 1.0);
  if (u(rng) < epsilon) {
    std::uniform_int_distribution<std::size_t> pick(0, candidates.size() - 1);
    return candidates[pick(rng)];
  }
  return q.greedy(key, candidates);
}

std::vector<GroundAtom> groundable_subgoals(const SymbolicState& s, const env::Environment& env) {
  std::set<logic::ConstantId> known;
  for (const auto& a : s.atoms())
    for (auto c : a.arguments()) known.insert(c);
  const auto& vocab = env.vocab();
  std::optional<GroundAtom> current;
  for (const auto& a : s.atoms())
    if (vocab.predicate(a.predicate).kind == logic::PredicateKind::Subgoal) current = a;
  std::vector<GroundAtom> out;
  for (const auto& p : env.subgoal_space()) {
    if (current && p == *current) continue;
    const auto args = p.arguments();
    if (std::all_of(args.begin(), args.end(), [&](logic::ConstantId c) { return known.contains(c); })) out.push_back(p);
  }
  return out;
}

// ------------------------------------------------------------------- agent

Agent::Agent(env::Environment& env, AgentConfig config, model::ModelConfig model_config,
             options::OptionConfig option_config)
    : env_(&env),
      config_(std::move(config)),
      model_(std::make_unique<model::SymbolicModel>(env.vocab(), std::move(model_config))),
      options_(options::make_options(env, std::move(option_config))),
      q_(config_.alpha, config_.gamma),
      stats_(config_.stats_window, config_.stats_reward_decay),
      buffer_(config_.buffer_capacity),
      rng_(config_.seed) {
  if (config_.trials < 1) throw std::invalid_argument("agent.trials must be at least 1");
  for (const auto& name : config_.q_ignore) ignored_.insert(env.vocab().predicate_id(name));
}

std::string Agent::key(const SymbolicState& s) const { return state_key(s, env_->vocab(), ignored_); }

void Agent::emit(nlohmann::json event) {
  if (!sink_) return;
  event["episode"] = current_episode_;
  sink_(event);
}

EpisodeReport Agent::run_episode(int e) {
  const bool imagined = config_.use_model && e % 2 == 1;
  auto report = imagined ? imagined_episode(e) : real_episode(e);
  fit_model();
  report.clause_count = model_->clause_count();
  return report;
}

Agent::Attempt Agent::attempt_subtask(const GroundAtom& from, const GroundAtom& p, bool train) {
  Attempt out;
  const auto start = env_->snapshot();
  std::unique_ptr<env::Snapshot> won;
  for (int k = 0; k < config_.trials; ++k) {
    if (k > 0) env_->restore(*start);
    const auto o = options_->run(*env_, p, train);
    out.steps += o.steps;
    out.truncated = out.truncated || o.truncated;
    if (train) stats_.record(from, p, o.success, o.env_reward);
    if (o.success) {
      ++out.successes;
      ++option_successes_[p];
      won = env_->snapshot();
    }
  }
  out.success = won != nullptr;
  env_->restore(out.success ? *won : *start);
  return out;
}

EpisodeReport Agent::real_episode(int e) {
  current_episode_ = e;
  EpisodeReport report;
  report.episode = e;
  report.kind = EpisodeKind::Real;
  const double eps = current_epsilon();
  env_->reset(config_.seed * 7919ULL + static_cast<std::uint64_t>(e));
  auto s_hat = env_->label();
  std::vector<std::string> trace;
  while (report.high_steps < config_.max_high_steps && !env_->is_goal(s_hat) && !env_->done()) {
    const auto candidates = groundable_subgoals(s_hat, *env_);
    if (candidates.empty()) break;
    const auto from = env_->current_subgoal();
    const auto p = select_subgoal(q_, key(s_hat), candidates, eps, rng_);
    const auto attempt = attempt_subtask(from, p, true);
    report.real_steps += attempt.steps;
    real_steps_ += attempt.steps;
    ++report.high_steps;

    const auto* entry = stats_.find(from, p);
    const double r = extrinsic_reward(entry->rate(), entry->trials, entry->reward, config_.reward);
    TransitionRecord rec;
    rec.s_hat = s_hat;
    rec.subgoal = p;
    rec.s_hat_next = attempt.success ? env_->label() : s_hat;
    rec.extrinsic_reward = r;
    rec.success = attempt.success;
    const auto it = option_successes_.find(p);
    rec.reliable = attempt.success ||
                   (!attempt.truncated && it != option_successes_.end() && it->second >= config_.reliable_after);

    const bool explained = model_->explains(rec);
    const auto events = model_->observe(rec);
    if (!explained) {
      ++report.repairs;
      auto ev = nlohmann::json{{"event", "repair"},
                               {"subgoal", logic::format_ground_atom(p, env_->vocab())},
                               {"success", rec.success},
                               {"reliable", rec.reliable}};
      auto steps = nlohmann::json::array();
      for (const auto& re : events)
        steps.push_back({{"program", re.program},
                         {"example", re.example},
                         {"status", status_name(re.status)},
                         {"added", re.added},
                         {"removed", re.removed}});
      ev["steps"] = steps;
      emit(std::move(ev));
    }

    const bool terminal = env_->is_goal(rec.s_hat_next);
    const auto next = env_->label();
    q_.update(key(rec.s_hat), p, r, key(next), groundable_subgoals(next, *env_), terminal);
    report.ret += r;
    trace.push_back(logic::format_ground_atom(p, env_->vocab()) + (rec.success ? "+" : "-"));
    buffer_.push(std::move(rec));
    s_hat = next;
  }
  report.success = env_->is_goal(s_hat);
  emit({{"event", "episode"}, {"success", report.success}, {"real_steps", report.real_steps}, {"subgoals", trace}});
  ++real_episodes_;
  report.cumulative_real_steps = real_steps_;
  report.mean_subtask_t = stats_.mean_feasible_rate();
  return report;
}

EpisodeReport Agent::imagined_episode(int e) {
  current_episode_ = e;
  EpisodeReport report;
  report.episode = e;
  report.kind = EpisodeKind::Model;
  const double eps = current_epsilon();
  // Reading the initial label costs no environment steps.
  env_->reset(config_.seed * 7919ULL + static_cast<std::uint64_t>(e));
  auto s_hat = env_->label();
  while (report.high_steps < config_.max_high_steps && !env_->is_goal(s_hat)) {
    const auto candidates = groundable_subgoals(s_hat, *env_);
    if (candidates.empty()) break;
    const auto p = select_subgoal(q_, key(s_hat), candidates, eps, rng_);
    const auto pred = model_->predict(s_hat, p);
    // A subtask the model deems impossible is scored like an unlearnable one.
    const double r = pred.achieved ? pred.reward : -config_.reward.xi1;
    const bool terminal = env_->is_goal(pred.next);
    q_.update(key(s_hat), p, r, key(pred.next), groundable_subgoals(pred.next, *env_), terminal);
    report.ret += r;
    ++report.high_steps;
    s_hat = pred.next;
  }
  report.success = env_->is_goal(s_hat);
  report.cumulative_real_steps = real_steps_;
  report.mean_subtask_t = stats_.mean_feasible_rate();
  return report;
}

EpisodeReport Agent::evaluate_episode(std::uint64_t seed) {
  EpisodeReport report;
  report.kind = EpisodeKind::Real;
  env_->reset(seed);
  auto s_hat = env_->label();
  while (report.high_steps < config_.max_high_steps && !env_->is_goal(s_hat) && !env_->done()) {
    const auto candidates = groundable_subgoals(s_hat, *env_);
    if (candidates.empty()) break;
    const auto p = q_.greedy(key(s_hat), candidates);
    const auto o = options_->run(*env_, p, false);
    report.real_steps += o.steps;
    report.ret += o.env_reward;
    ++report.high_steps;
    s_hat = env_->label();
  }
  report.success = env_->is_goal(s_hat);
  return report;
}

void Agent::fit_model() {
  if (buffer_.size() == 0) return;
  for (int i = 0; i < config_.fit_steps; ++i) {
    const auto batch = buffer_.sample(config_.fit_batch, rng_);
    model_->fit(batch);
  }
}

nlohmann::json Agent::to_json() const {
  std::vector<std::string> predicates;
  for (std::size_t i = 0; i < env_->vocab().predicate_count(); ++i)
    predicates.push_back(env_->vocab().predicate(static_cast<logic::PredicateId>(i)).name);
  auto successes = nlohmann::json::array();
  for (const auto& [atom, n] : option_successes_) successes.push_back({{"atom", atom_json(atom)}, {"count", n}});
  return {{"environment", std::string(env_->id())},
          {"predicates", predicates},
          {"constants", env_->vocab().constant_count()},
          {"real_steps", real_steps_},
          {"real_episodes", real_episodes_},
          {"q", q_.to_json()},
          {"stats", stats_.to_json()},
          {"option_successes", successes},
          {"model", model_->to_json()},
          {"options", options_->to_json()}};
}

void Agent::load_json(const nlohmann::json& j) {
  if (j.at("environment").get<std::string>() != env_->id())
    throw std::invalid_argument("checkpoint was written for environment '" + j.at("environment").get<std::string>() + "'");
  std::vector<std::string> predicates;
  for (std::size_t i = 0; i < env_->vocab().predicate_count(); ++i)
    predicates.push_back(env_->vocab().predicate(static_cast<logic::PredicateId>(i)).name);
  if (j.at("predicates").get<std::vector<std::string>>() != predicates ||
      j.at("constants").get<std::size_t>() != env_->vocab().constant_count())
    throw std::invalid_argument("checkpoint vocabulary does not match the environment");
  real_steps_ = j.at("real_steps").get<std::int64_t>();
  real_episodes_ = j.at("real_episodes").get<int>();
  q_.load_json(j.at("q"));
  stats_.load_json(j.at("stats"));
  option_successes_.clear();
  for (const auto& e : j.at("option_successes")) option_successes_[atom_from_json(e.at("atom"))] = e.at("count").get<std::int64_t>();
  model_->load_json(j.at("model"), true);
  options_->load_json(j.at("options"));
}

void Agent::load_model(const nlohmann::json& checkpoint) {
  const auto& m = checkpoint.contains("model") ? checkpoint.at("model") : checkpoint;
  model_->load_json(m, false);
}

}  // namespace symhrl::agent
