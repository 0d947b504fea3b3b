#pragma once
// Lock-and-key gridworld. Rooms are 3x3 cells laid out on a lattice and
// separated by one-cell walls; openings in the walls are plain corridors or
// coloured locks. The robot only learns about a room by entering it.

#include <array>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "symhrl/environment.hpp"

namespace symhrl::env {

class MapError : public std::runtime_error {
 public:
  MapError(const std::string& what, int row, int col);
  int row() const { return row_; }
  int col() const { return col_; }

 private:
  int row_;
  int col_;
};

enum class Move { Up, Down, Left, Right };
inline constexpr int kMoveCount = 4;

inline constexpr double kRoomStepReward = -1.0;
inline constexpr double kRoomGoalReward = 100.0;

// Key colours by map letter: a/A red, b/B green, c/C blue, d/D yellow.
std::string_view colour_name(int colour);

struct RoomMap {
  enum class Cell : std::uint8_t { Wall, Floor, Corridor, Lock };

  struct Door {
    int row = 0, col = 0;
    int room_a = 0, room_b = 0;  // 0-based room indices
    std::optional<int> colour;   // set for locks
  };
  struct Key {
    int colour = 0;
    int room = 0;
    int row = 0, col = 0;
  };

  int width = 0, height = 0;
  int room_cols = 0, room_rows = 0;
  std::vector<Cell> cells;
  std::vector<int> lock_colour;  // per cell, -1 unless a lock
  std::vector<Door> doors;
  std::vector<Key> keys;
  int start_row = 0, start_col = 0;
  int goal_room = 0;

  int room_count() const { return room_cols * room_rows; }
  Cell at(int row, int col) const { return cells[static_cast<std::size_t>(row * width + col)]; }
  // Room index of a floor cell, or -1 for walls and openings.
  int room_of(int row, int col) const;
  // Colours used by the map, ascending.
  std::vector<int> colours() const;
  // Length of the shortest primitive path; locks pass only with `key`.
  std::optional<int> shortest_path(int from_row, int from_col, int to_room, std::optional<int> key) const;
};

// Parses the ASCII format: '#' wall, '.' floor, 'S' start, 'G' a cell of the
// goal room, 'a'-'d' keys (on floor), 'A'-'D' locks and '-' or '|' open
// corridors (both only in wall lines between two rooms).
RoomMap load_map(std::string_view text);
RoomMap load_map_file(const std::string& path);

class RoomWorld final : public Environment {
 public:
  struct Config {
    int max_episode_steps = 1000;
  };

  explicit RoomWorld(RoomMap map);
  RoomWorld(RoomMap map, Config config);

  std::string_view id() const override { return "room"; }
  const logic::Vocabulary& vocab() const override { return vocab_; }
  EnvStep reset(std::uint64_t seed) override;
  EnvStep step(Move move);

  logic::SymbolicState label() const override;
  logic::GroundAtom current_subgoal() const override;
  std::vector<logic::GroundAtom> subgoal_space() const override;
  bool is_goal(const logic::SymbolicState& s) const override;
  bool done() const override { return state_.done; }
  int episode_steps() const override { return state_.steps; }
  int max_episode_steps() const override { return config_.max_episode_steps; }
  std::unique_ptr<Snapshot> snapshot() const override;
  void restore(const Snapshot& snap) override;

  const RoomMap& map() const { return map_; }
  int row() const { return state_.row; }
  int col() const { return state_.col; }
  int current_room() const { return state_.room; }
  std::optional<int> held_key() const;  // colour
  bool visited(int room) const { return state_.visited[static_cast<std::size_t>(room)]; }
  bool discovered(int room) const { return discovered_[static_cast<std::size_t>(room)]; }

  logic::ConstantId room_constant(int room) const { return static_cast<logic::ConstantId>(room); }
  logic::ConstantId colour_constant(int colour) const;
  // Room index named by a ReachRoom atom.
  int room_of_subgoal(const logic::GroundAtom& a) const;

  // Current room one-hot, offset inside the room, held key colour one-hot.
  std::vector<double> observe() const;
  std::size_t observation_size() const;
  // Dense index of (cell, held key) for tabular learners.
  std::size_t tabular_state() const;
  std::size_t tabular_state_count() const;

 private:
  struct State {
    int row = 0, col = 0;
    int room = 0;
    int held = -1;  // index into map_.keys
    std::vector<bool> visited;
    int steps = 0;
    bool done = false;
  };
  struct RoomSnapshot final : Snapshot {
    State state;
  };

  void enter_room(int room);
  void discover(int room);

  RoomMap map_;
  Config config_;
  logic::Vocabulary vocab_;
  std::vector<int> colours_;  // colour ids in constant order
  logic::PredicateId reach_, connect_, lock_, has_key_room_, visited_p_, has_key_;
  State state_;
  std::vector<bool> discovered_;
};

}  // namespace symhrl::env
