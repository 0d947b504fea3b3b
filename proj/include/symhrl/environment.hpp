#pragma once
// Surface shared by the benchmark worlds: primitive stepping is world
// specific, but the high-level agent only needs labels, subgoals and
// snapshots.

#include <cstdint>
#include <memory>
#include <string_view>
#include <vector>

#include "symhrl/logic.hpp"

namespace symhrl::env {

struct EnvStep {
  std::vector<double> observation;
  double reward = 0.0;
  bool done = false;
};

// Opaque copy of a world's dynamic state.
struct Snapshot {
  virtual ~Snapshot() = default;
};

class Environment {
 public:
  virtual ~Environment() = default;

  virtual std::string_view id() const = 0;
  virtual const logic::Vocabulary& vocab() const = 0;

  // Starts a new episode. Discovered facts survive resets.
  virtual EnvStep reset(std::uint64_t seed) = 0;

  // L(s): properties known so far, current events and the L_G atom.
  virtual logic::SymbolicState label() const = 0;
  // L_G(s): the subgoal the robot currently satisfies.
  virtual logic::GroundAtom current_subgoal() const = 0;
  // Every subgoal the high level may pick, in a fixed order.
  virtual std::vector<logic::GroundAtom> subgoal_space() const = 0;
  // Whether a symbolic state satisfies the task.
  virtual bool is_goal(const logic::SymbolicState& s) const = 0;

  virtual bool done() const = 0;
  virtual int episode_steps() const = 0;
  virtual int max_episode_steps() const = 0;

  // Restoring brings back the robot and episode state; discovered facts are
  // kept, since the knowledge base only grows.
  virtual std::unique_ptr<Snapshot> snapshot() const = 0;
  virtual void restore(const Snapshot& snap) = 0;
};

}  // namespace symhrl::env
