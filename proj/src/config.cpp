#include "symhrl/config.hpp"

#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <tuple>

#include "symhrl/nav_world.hpp"
#include "symhrl/room_world.hpp"

namespace symhrl::config {

namespace {

const std::map<std::string, std::string>& default_values() {
  static const std::map<std::string, std::string> d{
      {"env.kind", "room"},
      {"env.max_episode_steps", "1000"},
      {"room.map", "maps/training.map"},
      {"nav.layout_seed", "7"},
      {"nav.colours", "red,yellow,grey,black"},
      {"nav.requires", "yellow:red,black:grey"},
      {"nav.connect_limit", "300"},
      {"nav.start_jitter", "0.2"},
      {"nav.size", "6"},
      {"nav.max_speed", "2"},
      {"nav.start", "3:3"},
      {"nav.layout", ""},

      {"run.seeds", "1,2,3,4,5"},
      {"run.episodes", "400"},
      {"run.output", "runs/room"},
      {"run.jobs", "1"},
      {"run.no_model", "false"},
      {"run.pretrained_model", ""},
      {"run.rules_every", "50"},
      {"run.rule_threshold", "0.9"},
      {"run.solve_window", "32"},
      {"run.solve_rate", "0.9"},
      {"run.stop_when_solved", "false"},

      {"agent.trials", "10"},
      {"agent.max_high_steps", "40"},
      {"agent.alpha", "0.1"},
      {"agent.gamma", "0.99"},
      {"agent.epsilon_start", "0.3"},
      {"agent.epsilon_end", "0.03"},
      {"agent.epsilon_episodes", "100"},
      {"agent.xi0", "1"},
      {"agent.xi1", "50"},
      {"agent.trial_budget", "100"},
      {"agent.success_threshold", "0.9"},
      {"agent.stats_window", "20"},
      {"agent.stats_reward_decay", "0.9"},
      {"agent.buffer_capacity", "10000"},
      {"agent.fit_batch", "32"},
      {"agent.fit_steps", "10"},
      {"agent.q_ignore", ""},
      {"agent.reliable_after", "1"},

      {"model.tau", "0.5"},
      {"model.reward_decay", "0.9"},
      {"model.slots", "4"},
      {"model.steps", "2"},
      {"model.learning_rate", "0.05"},
      {"model.init_noise", "0.1"},
      {"model.body_cap", "4"},
      {"model.depth_cap", "3"},
      {"model.max_added", "8"},

      {"options.learner", "tabular"},
      {"options.max_steps", "100"},
      {"options.eta", "20"},
      {"options.detour_penalty", "-20"},
      {"options.epsilon_start", "1.0"},
      {"options.epsilon_end", "0.05"},
      {"options.epsilon_steps", "5000"},
      {"options.alpha", "0.5"},
      {"options.gamma", "0.99"},
      {"options.progress_shaping", "0"},
      {"options.dqn.hidden", "64"},
      {"options.dqn.lr", "0.001"},
      {"options.dqn.batch", "32"},
      {"options.dqn.capacity", "10000"},
      {"options.dqn.warmup", "64"},
      {"options.dqn.target_sync", "250"},
      {"options.ppo.hidden", "64,64"},
      {"options.ppo.lr", "0.0003"},
      {"options.ppo.lambda", "0.95"},
      {"options.ppo.clip", "0.2"},
      {"options.ppo.entropy", "0.003"},
      {"options.ppo.minibatch", "16"},
      {"options.ppo.epochs", "4"},
      {"options.ppo.init_log_std", "-0.5"},
  };
  return d;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

void check_range(bool ok, const std::string& key, const std::string& what) {
  if (!ok) throw ConfigError(key + " " + what);
}

}  // namespace

Config::Config() : values_(default_values()) {}

void Config::set(const std::string& key, const std::string& value) {
  const auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown config key: " + key);
  it->second = value;
}

void Config::apply_override(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError("override must look like key=value: " + assignment);
  set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

void Config::load_text(const std::string& text, const std::string& origin) {
  std::istringstream in(text);
  std::string line;
  std::vector<std::string> unknown;
  for (int lineno = 1; std::getline(in, line); ++lineno) {
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected key = value");
    const auto key = trim(std::string_view(body).substr(0, eq));
    if (!values_.contains(key)) {
      unknown.push_back(key);
      continue;
    }
    values_[key] = trim(std::string_view(body).substr(eq + 1));
  }
  if (!unknown.empty()) {
    std::string msg = origin + ": unknown config keys:";
    for (const auto& k : unknown) msg += " " + k;
    throw ConfigError(msg);
  }
}

void Config::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  load_text(ss.str(), path);
}

const std::string& Config::get(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown config key: " + key);
  return it->second;
}

double Config::number(const std::string& key) const {
  const auto& v = get(key);
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) throw ConfigError(key + " is not a number: '" + v + "'");
  return out;
}

std::int64_t Config::integer(const std::string& key) const {
  const auto& v = get(key);
  std::int64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) throw ConfigError(key + " is not an integer: '" + v + "'");
  return out;
}

bool Config::flag(const std::string& key) const {
  const auto& v = get(key);
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(key + " is not a boolean: '" + v + "'");
}

std::vector<std::string> Config::list(const std::string& key) const {
  std::vector<std::string> out;
  std::istringstream in(get(key));
  std::string item;
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<int> Config::int_list(const std::string& key) const {
  std::vector<int> out;
  for (const auto& item : list(key)) {
    int v = 0;
    const auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
    if (ec != std::errc() || ptr != item.data() + item.size()) throw ConfigError(key + " has a non-integer entry: '" + item + "'");
    out.push_back(v);
  }
  return out;
}

std::string Config::dump() const {
  std::string out;
  for (const auto& [k, v] : values_) out += k + " = " + v + "\n";
  return out;
}

std::string resolve_data_path(const std::string& path) {
  namespace fs = std::filesystem;
  if (fs::exists(path)) return path;
  const auto under = fs::path(SYMHRL_DATA_DIR) / path;
  if (fs::exists(under)) return under.string();
  return path;
}

std::unique_ptr<env::Environment> make_environment(const Config& cfg) {
  const auto kind = cfg.get("env.kind");
  const auto max_steps = static_cast<int>(cfg.integer("env.max_episode_steps"));
  check_range(max_steps > 0, "env.max_episode_steps", "must be positive");
  if (kind == "room") {
    env::RoomWorld::Config rc;
    rc.max_episode_steps = max_steps;
    return std::make_unique<env::RoomWorld>(env::load_map_file(resolve_data_path(cfg.get("room.map"))), rc);
  }
  if (kind == "nav") {
    env::NavWorld::Config nc;
    nc.max_episode_steps = max_steps;
    nc.layout_seed = static_cast<std::uint64_t>(cfg.integer("nav.layout_seed"));
    nc.colours = cfg.list("nav.colours");
    nc.requires_colour.clear();
    for (const auto& pair : cfg.list("nav.requires")) {
      const auto colon = pair.find(':');
      if (colon == std::string::npos) throw ConfigError("nav.requires entries look like colour:prerequisite");
      nc.requires_colour[pair.substr(0, colon)] = pair.substr(colon + 1);
    }
    nc.connect_limit = static_cast<int>(cfg.integer("nav.connect_limit"));
    nc.start_jitter = cfg.number("nav.start_jitter");
    nc.size = cfg.number("nav.size");
    nc.max_speed = cfg.number("nav.max_speed");
    check_range(nc.size > 0.0 && nc.max_speed > 0.0, "nav.size and nav.max_speed", "must be positive");
    const auto point = [](const std::string& key, const std::string& text) {
      const auto colon = text.find(':');
      if (colon == std::string::npos) throw ConfigError(key + " entries look like x:y, not '" + text + "'");
      try {
        return std::pair{std::stod(text.substr(0, colon)), std::stod(text.substr(colon + 1))};
      } catch (const std::exception&) {
        throw ConfigError(key + " has a non-numeric point '" + text + "'");
      }
    };
    std::tie(nc.start_x, nc.start_y) = point("nav.start", cfg.get("nav.start"));
    for (const auto& p : cfg.list("nav.layout")) nc.layout.push_back(point("nav.layout", p));
    try {
      return std::make_unique<env::NavWorld>(nc);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  }
  throw ConfigError("env.kind must be room or nav, not '" + kind + "'");
}

agent::AgentConfig agent_config(const Config& cfg, std::uint64_t seed) {
  agent::AgentConfig a;
  a.trials = static_cast<int>(cfg.integer("agent.trials"));
  check_range(a.trials >= 1, "agent.trials", "must be at least 1");
  a.max_high_steps = static_cast<int>(cfg.integer("agent.max_high_steps"));
  check_range(a.max_high_steps >= 1, "agent.max_high_steps", "must be at least 1");
  a.alpha = cfg.number("agent.alpha");
  check_range(a.alpha > 0.0 && a.alpha <= 1.0, "agent.alpha", "must be in (0, 1]");
  a.gamma = cfg.number("agent.gamma");
  check_range(a.gamma >= 0.0 && a.gamma <= 1.0, "agent.gamma", "must be in [0, 1]");
  a.epsilon = {cfg.number("agent.epsilon_start"), cfg.number("agent.epsilon_end"), cfg.integer("agent.epsilon_episodes")};
  a.reward.xi0 = cfg.number("agent.xi0");
  a.reward.xi1 = cfg.number("agent.xi1");
  check_range(a.reward.xi0 > 0.0 && a.reward.xi0 < a.reward.xi1, "agent.xi0", "must satisfy 0 < xi0 < xi1");
  a.reward.trial_budget = cfg.integer("agent.trial_budget");
  a.reward.threshold = cfg.number("agent.success_threshold");
  a.stats_window = static_cast<std::size_t>(cfg.integer("agent.stats_window"));
  check_range(a.stats_window >= 1, "agent.stats_window", "must be at least 1");
  a.stats_reward_decay = cfg.number("agent.stats_reward_decay");
  a.buffer_capacity = static_cast<std::size_t>(cfg.integer("agent.buffer_capacity"));
  a.fit_batch = static_cast<std::size_t>(cfg.integer("agent.fit_batch"));
  a.fit_steps = static_cast<int>(cfg.integer("agent.fit_steps"));
  a.use_model = !cfg.flag("run.no_model");
  a.q_ignore = cfg.list("agent.q_ignore");
  a.reliable_after = cfg.integer("agent.reliable_after");
  a.seed = seed;
  return a;
}

model::ModelConfig model_config(const Config& cfg, std::uint64_t seed) {
  model::ModelConfig m;
  m.tau = cfg.number("model.tau");
  check_range(m.tau > 0.0 && m.tau < 1.0, "model.tau", "must be in (0, 1)");
  m.reward_decay = cfg.number("model.reward_decay");
  m.unseen_reward = -cfg.number("agent.xi0");
  for (auto* p : {&m.pre, &m.eff}) {
    p->slots = static_cast<int>(cfg.integer("model.slots"));
    p->steps = static_cast<int>(cfg.integer("model.steps"));
    p->learning_rate = cfg.number("model.learning_rate");
    p->init_noise = cfg.number("model.init_noise");
  }
  check_range(m.pre.slots >= 1, "model.slots", "must be at least 1");
  check_range(m.pre.steps >= 1, "model.steps", "must be at least 1");
  m.pre.seed = seed * 2 + 1;
  m.eff.seed = seed * 2 + 2;
  m.limits.body_cap = static_cast<int>(cfg.integer("model.body_cap"));
  m.limits.depth_cap = static_cast<int>(cfg.integer("model.depth_cap"));
  m.limits.max_added = static_cast<int>(cfg.integer("model.max_added"));
  return m;
}

options::OptionConfig option_config(const Config& cfg, std::uint64_t seed) {
  options::OptionConfig o;
  try {
    o.learner = options::parse_learner(cfg.get("options.learner"));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  o.max_steps = static_cast<int>(cfg.integer("options.max_steps"));
  check_range(o.max_steps >= 1, "options.max_steps", "must be at least 1");
  o.eta = cfg.number("options.eta");
  o.detour_penalty = cfg.number("options.detour_penalty");
  o.epsilon = {cfg.number("options.epsilon_start"), cfg.number("options.epsilon_end"), cfg.integer("options.epsilon_steps")};
  o.alpha = cfg.number("options.alpha");
  o.gamma = cfg.number("options.gamma");
  o.progress_shaping = cfg.number("options.progress_shaping");
  o.dqn.hidden = cfg.int_list("options.dqn.hidden");
  o.dqn.lr = cfg.number("options.dqn.lr");
  o.dqn.batch = static_cast<std::size_t>(cfg.integer("options.dqn.batch"));
  o.dqn.capacity = static_cast<std::size_t>(cfg.integer("options.dqn.capacity"));
  o.dqn.warmup = static_cast<std::size_t>(cfg.integer("options.dqn.warmup"));
  o.dqn.target_sync = static_cast<int>(cfg.integer("options.dqn.target_sync"));
  o.ppo.hidden = cfg.int_list("options.ppo.hidden");
  o.ppo.lr = cfg.number("options.ppo.lr");
  o.ppo.lambda = cfg.number("options.ppo.lambda");
  o.ppo.clip = cfg.number("options.ppo.clip");
  o.ppo.entropy_coef = cfg.number("options.ppo.entropy");
  o.ppo.minibatch = static_cast<std::size_t>(cfg.integer("options.ppo.minibatch"));
  o.ppo.epochs = static_cast<int>(cfg.integer("options.ppo.epochs"));
  o.ppo.init_log_std = cfg.number("options.ppo.init_log_std");
  o.seed = seed * 31 + 17;
  return o;
}

}  // namespace symhrl::config
