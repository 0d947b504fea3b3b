#pragma once
// Kinematic robot on a bounded plane with coloured circles. A circle counts
// as achieved only once its colour's prerequisite colour has been visited;
// Connect(X,Y) facts are learned from traversals that beat the step limit.

#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "symhrl/environment.hpp"

namespace symhrl::env {

struct NavAction {
  double steer = 0.0;
  double accel = 0.0;
};

inline constexpr double kNavFinishReward = 10.0;

class NavWorld final : public Environment {
 public:
  struct Config {
    double size = 6.0;
    double radius = 0.4;
    double dt = 0.1;
    double k_steer = 2.0;
    double k_accel = 1.0;
    double damping = 0.05;
    double max_speed = 2.0;
    int lidar_bins = 16;
    int connect_limit = 300;  // T_s
    int max_episode_steps = 1000;
    double start_x = 3.0, start_y = 3.0;
    double start_jitter = 0.2;
    std::uint64_t layout_seed = 7;
    // Fixed circle centres, one per colour in colour order; empty places the
    // circles at random from layout_seed.
    std::vector<std::pair<double, double>> layout;
    std::vector<std::string> colours{"red", "yellow", "grey", "black"};
    // colour -> colour that must be visited first
    std::map<std::string, std::string> requires_colour{{"yellow", "red"}, {"black", "grey"}};
  };

  struct Circle {
    double x = 0.0, y = 0.0;
    int colour = 0;  // index into Config::colours
  };

  explicit NavWorld(Config config);
  NavWorld();

  std::string_view id() const override { return "nav"; }
  const logic::Vocabulary& vocab() const override { return vocab_; }
  EnvStep reset(std::uint64_t seed) override;
  EnvStep step(NavAction action);

  logic::SymbolicState label() const override;
  logic::GroundAtom current_subgoal() const override;
  std::vector<logic::GroundAtom> subgoal_space() const override;
  bool is_goal(const logic::SymbolicState& s) const override;
  bool done() const override { return state_.done; }
  int episode_steps() const override { return state_.steps; }
  int max_episode_steps() const override { return config_.max_episode_steps; }
  std::unique_ptr<Snapshot> snapshot() const override;
  void restore(const Snapshot& snap) override;

  const Config& config() const { return config_; }
  const std::vector<Circle>& circles() const { return circles_; }
  // Replaces the layout (tests build exact scenes this way).
  void set_circles(std::vector<Circle> circles);
  void set_pose(double x, double y, double heading, double speed);

  double x() const { return state_.x; }
  double y() const { return state_.y; }
  double heading() const { return state_.heading; }
  double speed() const { return state_.speed; }
  // 0 is the start position, i >= 1 is circle i.
  int current_object() const { return state_.current; }
  bool colour_visited(int colour) const { return state_.visited[static_cast<std::size_t>(colour)]; }
  bool connected(int from, int to) const { return connect_.count({from, to}) > 0; }
  bool prerequisite_met(int colour) const;
  // Circle index (1-based) of a subgoal atom.
  int object_of_subgoal(const logic::GroundAtom& a) const { return a.args[0]; }
  double distance_to(int object) const;

  // Per colour, lidar_bins inverse distances 1/(1+d) to the nearest circle of
  // that colour in each angular bin (robot frame), then speed / max_speed,
  // sin(heading), cos(heading).
  std::vector<double> observe() const;
  std::size_t observation_size() const;

 private:
  struct State {
    double x = 0.0, y = 0.0, heading = 0.0, speed = 0.0;
    int current = 0;
    int inside = 0;  // circle the robot is in, 0 for none
    int since_achieved = 0;
    std::vector<bool> visited;
    int steps = 0;
    bool done = false;
  };
  struct NavSnapshot final : Snapshot {
    State state;
  };

  void spawn_circles();
  void update_contacts();

  Config config_;
  std::vector<int> requirement_;  // per colour, -1 for none
  std::vector<Circle> circles_;
  logic::Vocabulary vocab_;
  logic::PredicateId achieve_, connect_p_;
  std::vector<logic::PredicateId> is_colour_, visited_colour_;
  State state_;
  std::set<std::pair<int, int>> connect_;
};

}  // namespace symhrl::env
