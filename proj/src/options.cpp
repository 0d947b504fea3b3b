#include "symhrl/options.hpp"

#include <stdexcept>

#include "symhrl/nav_world.hpp"
#include "symhrl/room_world.hpp"

namespace symhrl::options {

namespace {

nlohmann::json atom_json(const GroundAtom& a) {
  return {{"predicate", a.predicate}, {"args", std::vector<int>(a.arguments().begin(), a.arguments().end())}};
}

GroundAtom atom_from_json(const nlohmann::json& j) {
  const auto args = j.at("args").get<std::vector<int>>();
  return GroundAtom(j.at("predicate").get<int>(), std::span<const int>(args));
}

nlohmann::json steps_json(const std::map<GroundAtom, std::int64_t>& steps) {
  auto out = nlohmann::json::array();
  for (const auto& [atom, n] : steps) out.push_back({{"atom", atom_json(atom)}, {"steps", n}});
  return out;
}

std::map<GroundAtom, std::int64_t> steps_from_json(const nlohmann::json& j) {
  std::map<GroundAtom, std::int64_t> out;
  for (const auto& e : j) out[atom_from_json(e.at("atom"))] = e.at("steps").get<std::int64_t>();
  return out;
}

// Both worlds put exactly one subgoal atom into L(s), the L_G one, so
// "p in L(s')" is the cheaper "L_G(s') == p".
struct Progress {
  bool achieved = false;
  bool detour = false;
};

Progress check(const env::Environment& env, const GroundAtom& p, const GroundAtom& start) {
  const auto now = env.current_subgoal();
  return {now == p, now != p && now != start};
}

}  // namespace

double intrinsic_reward(const logic::SymbolicState& s_next, const GroundAtom& p, double env_reward, double eta) {
  return s_next.contains(p) ? eta : env_reward;
}

Learner parse_learner(const std::string& name) {
  if (name == "tabular") return Learner::Tabular;
  if (name == "dqn") return Learner::Dqn;
  if (name == "ppo") return Learner::Ppo;
  throw std::invalid_argument("unknown option learner '" + name + "' (tabular, dqn, ppo)");
}

std::string learner_name(Learner l) {
  switch (l) {
    case Learner::Tabular: return "tabular";
    case Learner::Dqn: return "dqn";
    case Learner::Ppo: return "ppo";
  }
  return "?";
}

std::int64_t OptionSet::steps_taken(const GroundAtom& p) const {
  const auto it = steps_.find(p);
  return it == steps_.end() ? 0 : it->second;
}

// ------------------------------------------------------------------- room

RoomOptions::RoomOptions(const env::RoomWorld& world, OptionConfig config)
    : OptionSet(std::move(config)),
      tabular_states_(world.tabular_state_count()),
      obs_size_(static_cast<int>(world.observation_size())) {
  if (config_.learner == Learner::Ppo) throw std::invalid_argument("room options use tabular or dqn learners");
}

learn::TabularQ& RoomOptions::table_for(const GroundAtom& p) {
  auto it = tables_.find(p);
  if (it == tables_.end())
    it = tables_.emplace(p, learn::TabularQ(tabular_states_, env::kMoveCount, config_.alpha, config_.gamma)).first;
  return it->second;
}

const learn::TabularQ* RoomOptions::table(const GroundAtom& p) const {
  const auto it = tables_.find(p);
  return it == tables_.end() ? nullptr : &it->second;
}

learn::DqnPolicy& RoomOptions::dqn_for(const GroundAtom& p) {
  auto it = dqns_.find(p);
  if (it == dqns_.end()) {
    auto cfg = config_.dqn;
    cfg.gamma = config_.gamma;
    const auto seed = config_.seed * 1000003ULL + static_cast<std::uint64_t>(p.args[0]);
    it = dqns_.emplace(p, learn::DqnPolicy(obs_size_, env::kMoveCount, cfg, seed)).first;
  }
  return it->second;
}

OptionOutcome RoomOptions::run(env::Environment& env, const GroundAtom& p, bool train) {
  auto& world = dynamic_cast<env::RoomWorld&>(env);
  OptionOutcome out;
  const auto start = world.current_subgoal();
  if (start == p) {
    out.success = true;
    return out;
  }
  while (out.steps < config_.max_steps && !world.done()) {
    const double eps = train ? epsilon_for(p) : 0.0;
    int action = 0;
    std::size_t s = 0;
    std::vector<double> obs;
    if (config_.learner == Learner::Tabular) {
      s = world.tabular_state();
      action = table_for(p).epsilon_greedy(s, eps, rng_);
    } else {
      obs = world.observe();
      action = dqn_for(p).epsilon_greedy(obs, eps, rng_);
    }
    const auto st = world.step(static_cast<env::Move>(action));
    ++out.steps;
    if (train) ++steps_[p];
    out.env_reward += st.reward;
    const auto prog = check(world, p, start);
    const double r = prog.detour ? config_.detour_penalty : (prog.achieved ? config_.eta : st.reward);
    const bool terminal = prog.achieved || prog.detour;
    out.intrinsic_return += r;
    if (train) {
      if (config_.learner == Learner::Tabular) {
        table_for(p).update(s, action, r, world.tabular_state(), terminal);
      } else {
        auto& dqn = dqn_for(p);
        dqn.remember({std::move(obs), action, r, st.observation, terminal});
        dqn.train(rng_);
      }
    }
    if (terminal) {
      out.success = prog.achieved;
      out.detour = prog.detour;
      break;
    }
  }
  out.truncated = !out.success && !out.detour && world.done();
  return out;
}

nlohmann::json RoomOptions::to_json() const {
  nlohmann::json j{{"kind", "room"}, {"learner", learner_name(config_.learner)}, {"steps", steps_json(steps_)}};
  auto tables = nlohmann::json::array();
  for (const auto& [atom, t] : tables_) tables.push_back({{"atom", atom_json(atom)}, {"q", t.to_json()}});
  auto dqns = nlohmann::json::array();
  for (const auto& [atom, d] : dqns_) dqns.push_back({{"atom", atom_json(atom)}, {"dqn", d.to_json()}});
  j["tables"] = std::move(tables);
  j["dqns"] = std::move(dqns);
  return j;
}

void RoomOptions::load_json(const nlohmann::json& j) {
  if (j.at("kind") != "room") throw std::invalid_argument("option checkpoint is not for the room world");
  steps_ = steps_from_json(j.at("steps"));
  tables_.clear();
  dqns_.clear();
  for (const auto& e : j.at("tables")) {
    auto q = learn::TabularQ::from_json(e.at("q"));
    if (q.states() != tabular_states_) throw std::invalid_argument("option table does not fit this map");
    tables_.emplace(atom_from_json(e.at("atom")), std::move(q));
  }
  for (const auto& e : j.at("dqns")) dqns_.emplace(atom_from_json(e.at("atom")), learn::DqnPolicy::from_json(e.at("dqn")));
}

// -------------------------------------------------------------------- nav

NavOptions::NavOptions(const env::NavWorld& world, OptionConfig config)
    : OptionSet(std::move(config)), obs_size_(static_cast<int>(world.observation_size())) {
  if (config_.learner != Learner::Ppo) throw std::invalid_argument("nav options use the ppo learner");
}

learn::PpoPolicy& NavOptions::policy_for(const GroundAtom& p) {
  auto it = policies_.find(p);
  if (it == policies_.end()) {
    auto cfg = config_.ppo;
    cfg.gamma = config_.gamma;
    const auto seed = config_.seed * 1000003ULL + static_cast<std::uint64_t>(p.args[0]);
    it = policies_.emplace(p, learn::PpoPolicy(obs_size_, 2, cfg, seed)).first;
  }
  return it->second;
}

OptionOutcome NavOptions::run(env::Environment& env, const GroundAtom& p, bool train) {
  auto& world = dynamic_cast<env::NavWorld&>(env);
  OptionOutcome out;
  const auto start = world.current_subgoal();
  if (start == p) {
    out.success = true;
    return out;
  }
  auto& policy = policy_for(p);
  const int target = world.object_of_subgoal(p);
  learn::Rollout rollout;
  std::vector<double> obs = world.observe();
  double dist = world.distance_to(target);
  bool terminal = false;
  while (out.steps < config_.max_steps && !world.done()) {
    learn::PpoPolicy::Action a;
    if (train) {
      a = policy.act(obs, rng_);
    } else {
      a.action = policy.mean(obs);
    }
    const auto st = world.step({a.action[0], a.action[1]});
    ++out.steps;
    if (train) ++steps_[p];
    out.env_reward += st.reward;
    const auto prog = check(world, p, start);
    const double now = world.distance_to(target);
    double r = prog.detour ? config_.detour_penalty : (prog.achieved ? config_.eta : st.reward);
    if (!prog.achieved && !prog.detour) r += config_.progress_shaping * (dist - now);
    dist = now;
    terminal = prog.achieved || prog.detour;
    out.intrinsic_return += r;
    if (train) rollout.steps.push_back({std::move(obs), a.action, a.log_prob, a.value, r, terminal});
    obs = st.observation;
    if (terminal) {
      out.success = prog.achieved;
      out.detour = prog.detour;
      break;
    }
  }
  if (train && !rollout.steps.empty()) {
    rollout.bootstrap_value = terminal ? 0.0 : policy.value(obs);
    last_ = policy.update(rollout, rng_);
  }
  out.truncated = !out.success && !out.detour && world.done();
  return out;
}

nlohmann::json NavOptions::to_json() const {
  nlohmann::json j{{"kind", "nav"}, {"learner", "ppo"}, {"steps", steps_json(steps_)}};
  auto pol = nlohmann::json::array();
  for (const auto& [atom, pp] : policies_) pol.push_back({{"atom", atom_json(atom)}, {"ppo", pp.to_json()}});
  j["policies"] = std::move(pol);
  return j;
}

void NavOptions::load_json(const nlohmann::json& j) {
  if (j.at("kind") != "nav") throw std::invalid_argument("option checkpoint is not for the nav world");
  steps_ = steps_from_json(j.at("steps"));
  policies_.clear();
  for (const auto& e : j.at("policies"))
    policies_.emplace(atom_from_json(e.at("atom")), learn::PpoPolicy::from_json(e.at("ppo")));
}

std::unique_ptr<OptionSet> make_options(const env::Environment& env, OptionConfig config) {
  if (const auto* room = dynamic_cast<const env::RoomWorld*>(&env)) return std::make_unique<RoomOptions>(*room, std::move(config));
  if (const auto* nav = dynamic_cast<const env::NavWorld*>(&env)) return std::make_unique<NavOptions>(*nav, std::move(config));
  throw std::invalid_argument("no option learner for environment " + std::string(env.id()));
}

}  // namespace symhrl::options
