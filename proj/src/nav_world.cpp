#include "symhrl/nav_world.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

namespace symhrl::env {

namespace {

std::string capitalised(std::string s) {
  if (!s.empty()) s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
  return s;
}

double wrap_angle(double a) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  a = std::fmod(a, two_pi);
  return a < 0.0 ? a + two_pi : a;
}

}  // namespace

NavWorld::NavWorld() : NavWorld(Config{}) {}

NavWorld::NavWorld(Config config) : config_(std::move(config)) {
  const auto& colours = config_.colours;
  if (colours.empty()) throw std::invalid_argument("nav world needs at least one colour");
  auto colour_index = [&](const std::string& name) {
    const auto it = std::find(colours.begin(), colours.end(), name);
    if (it == colours.end()) throw std::invalid_argument("unknown colour in constraint: " + name);
    return static_cast<int>(it - colours.begin());
  };
  requirement_.assign(colours.size(), -1);
  for (const auto& [colour, prereq] : config_.requires_colour)
    requirement_[static_cast<std::size_t>(colour_index(colour))] = colour_index(prereq);
  for (std::size_t c = 0; c < colours.size(); ++c) {
    int cur = static_cast<int>(c);
    for (std::size_t hops = 0; cur >= 0; ++hops) {
      if (hops > colours.size()) throw std::invalid_argument("colour constraints contain a cycle");
      cur = requirement_[static_cast<std::size_t>(cur)];
    }
  }

  using logic::PredicateKind;
  achieve_ = vocab_.add_predicate("AchieveObj", 1, PredicateKind::Subgoal);
  connect_p_ = vocab_.add_predicate("Connect", 2, PredicateKind::Property);
  for (const auto& c : colours) is_colour_.push_back(vocab_.add_predicate("is" + capitalised(c), 1, PredicateKind::Property));
  for (const auto& c : colours)
    visited_colour_.push_back(vocab_.add_predicate("visited" + capitalised(c), 0, PredicateKind::Event));
  vocab_.add_predicate("CurAct", 2, PredicateKind::Auxiliary);
  vocab_.add_constant("origin");
  for (std::size_t i = 1; i <= colours.size(); ++i) vocab_.add_constant("c" + std::to_string(i));

  spawn_circles();
  reset(0);
}

void NavWorld::spawn_circles() {
  if (!config_.layout.empty()) {
    if (config_.layout.size() != config_.colours.size())
      throw std::invalid_argument("layout needs one circle per colour");
    std::vector<Circle> fixed;
    for (std::size_t c = 0; c < config_.layout.size(); ++c) {
      const auto [x, y] = config_.layout[c];
      if (x < config_.radius || y < config_.radius || x > config_.size - config_.radius || y > config_.size - config_.radius)
        throw std::invalid_argument("layout circle outside the arena");
      fixed.push_back({x, y, static_cast<int>(c)});
    }
    set_circles(std::move(fixed));
    return;
  }
  std::mt19937_64 rng(config_.layout_seed);
  const double margin = config_.radius + 0.3;
  std::uniform_real_distribution<double> coord(margin, config_.size - margin);
  circles_.clear();
  for (std::size_t c = 0; c < config_.colours.size(); ++c) {
    for (int attempt = 0;; ++attempt) {
      if (attempt > 10000) throw std::runtime_error("cannot place non-overlapping circles");
      Circle circle{coord(rng), coord(rng), static_cast<int>(c)};
      bool ok = std::hypot(circle.x - config_.start_x, circle.y - config_.start_y) > 1.0 + config_.radius;
      for (const auto& other : circles_) ok = ok && std::hypot(circle.x - other.x, circle.y - other.y) > 1.2;
      if (ok) {
        circles_.push_back(circle);
        break;
      }
    }
  }
}

void NavWorld::set_circles(std::vector<Circle> circles) {
  if (circles.size() != config_.colours.size()) throw std::invalid_argument("one circle per colour expected");
  for (std::size_t i = 0; i < circles.size(); ++i)
    for (std::size_t j = i + 1; j < circles.size(); ++j)
      if (std::hypot(circles[i].x - circles[j].x, circles[i].y - circles[j].y) < 2.0 * config_.radius)
        throw std::invalid_argument("circles overlap");
  circles_ = std::move(circles);
  update_contacts();
}

void NavWorld::set_pose(double x, double y, double heading, double speed) {
  state_.x = std::clamp(x, 0.0, config_.size);
  state_.y = std::clamp(y, 0.0, config_.size);
  state_.heading = heading;
  state_.speed = speed;
}

bool NavWorld::prerequisite_met(int colour) const {
  const int need = requirement_[static_cast<std::size_t>(colour)];
  return need < 0 || colour_visited(need);
}

double NavWorld::distance_to(int object) const {
  if (object == 0) return std::hypot(state_.x - config_.start_x, state_.y - config_.start_y);
  const auto& c = circles_[static_cast<std::size_t>(object - 1)];
  return std::hypot(state_.x - c.x, state_.y - c.y);
}

EnvStep NavWorld::reset(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> jitter(-config_.start_jitter, config_.start_jitter);
  std::uniform_real_distribution<double> angle(-std::numbers::pi, std::numbers::pi);
  state_ = State{};
  state_.visited.assign(config_.colours.size(), false);
  state_.x = config_.start_x + jitter(rng);
  state_.y = config_.start_y + jitter(rng);
  state_.heading = angle(rng);
  return {observe(), 0.0, false};
}

void NavWorld::update_contacts() {
  int inside = 0;
  for (std::size_t i = 0; i < circles_.size(); ++i)
    if (std::hypot(state_.x - circles_[i].x, state_.y - circles_[i].y) <= config_.radius) inside = static_cast<int>(i) + 1;
  if (inside != 0 && inside != state_.inside && inside != state_.current) {
    if (state_.since_achieved < config_.connect_limit) connect_.insert({state_.current, inside});
    const int colour = circles_[static_cast<std::size_t>(inside - 1)].colour;
    if (prerequisite_met(colour)) {
      state_.current = inside;
      state_.visited[static_cast<std::size_t>(colour)] = true;
      state_.since_achieved = 0;
    }
  }
  state_.inside = inside;
}

EnvStep NavWorld::step(NavAction action) {
  if (state_.done) return {observe(), 0.0, true};
  const double steer = std::clamp(action.steer, -1.0, 1.0);
  const double accel = std::clamp(action.accel, -1.0, 1.0);
  state_.heading = wrap_angle(state_.heading + config_.k_steer * steer * config_.dt);
  state_.speed = (state_.speed + config_.k_accel * accel * config_.dt) * (1.0 - config_.damping);
  state_.speed = std::clamp(state_.speed, -config_.max_speed, config_.max_speed);
  state_.x = std::clamp(state_.x + state_.speed * std::cos(state_.heading) * config_.dt, 0.0, config_.size);
  state_.y = std::clamp(state_.y + state_.speed * std::sin(state_.heading) * config_.dt, 0.0, config_.size);
  ++state_.steps;
  ++state_.since_achieved;

  const bool before = std::all_of(state_.visited.begin(), state_.visited.end(), [](bool v) { return v; });
  update_contacts();
  const bool after = std::all_of(state_.visited.begin(), state_.visited.end(), [](bool v) { return v; });
  double reward = 0.0;
  if (after && !before) {
    reward = kNavFinishReward;
    state_.done = true;
  }
  if (state_.steps >= config_.max_episode_steps) state_.done = true;
  return {observe(), reward, state_.done};
}

logic::SymbolicState NavWorld::label() const {
  std::vector<logic::GroundAtom> atoms;
  atoms.push_back(current_subgoal());
  for (std::size_t i = 0; i < circles_.size(); ++i)
    atoms.emplace_back(is_colour_[static_cast<std::size_t>(circles_[i].colour)],
                       std::initializer_list<logic::ConstantId>{static_cast<logic::ConstantId>(i + 1)});
  for (std::size_t c = 0; c < state_.visited.size(); ++c)
    if (state_.visited[c]) atoms.emplace_back(visited_colour_[c], std::initializer_list<logic::ConstantId>{});
  for (const auto& [from, to] : connect_) atoms.emplace_back(connect_p_, std::initializer_list<logic::ConstantId>{from, to});
  return logic::SymbolicState(std::move(atoms));
}

logic::GroundAtom NavWorld::current_subgoal() const { return {achieve_, {state_.current}}; }

std::vector<logic::GroundAtom> NavWorld::subgoal_space() const {
  std::vector<logic::GroundAtom> out;
  for (std::size_t i = 1; i <= circles_.size(); ++i) out.push_back({achieve_, {static_cast<logic::ConstantId>(i)}});
  return out;
}

bool NavWorld::is_goal(const logic::SymbolicState& s) const {
  return std::all_of(visited_colour_.begin(), visited_colour_.end(),
                     [&](logic::PredicateId p) { return s.contains({p, {}}); });
}

std::unique_ptr<Snapshot> NavWorld::snapshot() const {
  auto snap = std::make_unique<NavSnapshot>();
  snap->state = state_;
  return snap;
}

void NavWorld::restore(const Snapshot& snap) { state_ = dynamic_cast<const NavSnapshot&>(snap).state; }

std::size_t NavWorld::observation_size() const {
  return config_.colours.size() * static_cast<std::size_t>(config_.lidar_bins) + 3;
}

std::vector<double> NavWorld::observe() const {
  const auto bins = static_cast<std::size_t>(config_.lidar_bins);
  std::vector<double> obs(observation_size(), 0.0);
  const double width = 2.0 * std::numbers::pi / static_cast<double>(bins);
  for (const auto& c : circles_) {
    const double dx = c.x - state_.x, dy = c.y - state_.y;
    const double d = std::hypot(dx, dy);
    const double rel = d > 0.0 ? wrap_angle(std::atan2(dy, dx) - state_.heading) : 0.0;
    const auto bin = std::min(bins - 1, static_cast<std::size_t>(rel / width));
    auto& slot = obs[static_cast<std::size_t>(c.colour) * bins + bin];
    // Proximity in arena units of a sixth of the side.
    slot = std::max(slot, 1.0 / (1.0 + 6.0 * d / config_.size));
  }
  const std::size_t tail = config_.colours.size() * bins;
  obs[tail] = state_.speed / config_.max_speed;
  obs[tail + 1] = std::sin(state_.heading);
  obs[tail + 2] = std::cos(state_.heading);
  return obs;
}

}  // namespace symhrl::env
