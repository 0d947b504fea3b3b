#include "symhrl/room_world.hpp"

#include <algorithm>
#include <deque>
#include <fstream>
#include <map>
#include <sstream>

namespace symhrl::env {

namespace {

constexpr std::array<std::string_view, 4> kColourNames{"red", "green", "blue", "yellow"};

std::vector<std::string> split_lines(std::string_view text) {
  std::vector<std::string> lines;
  std::string cur;
  for (char ch : text) {
    if (ch == '\n') {
      lines.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  if (!cur.empty()) lines.push_back(cur);
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  return lines;
}

}  // namespace

MapError::MapError(const std::string& what, int row, int col)
    : std::runtime_error("map line " + std::to_string(row + 1) + ", column " + std::to_string(col + 1) + ": " +
                         what),
      row_(row),
      col_(col) {}

std::string_view colour_name(int colour) { return kColourNames.at(static_cast<std::size_t>(colour)); }

int RoomMap::room_of(int row, int col) const {
  if (row <= 0 || col <= 0 || row >= height - 1 || col >= width - 1) return -1;
  if (row % 4 == 0 || col % 4 == 0) return -1;
  return (row / 4) * room_cols + col / 4;
}

std::vector<int> RoomMap::colours() const {
  std::set<int> out;
  for (const auto& k : keys) out.insert(k.colour);
  for (const auto& d : doors)
    if (d.colour) out.insert(*d.colour);
  return {out.begin(), out.end()};
}

std::optional<int> RoomMap::shortest_path(int from_row, int from_col, int to_room, std::optional<int> key) const {
  std::vector<int> dist(cells.size(), -1);
  std::deque<std::pair<int, int>> queue;
  dist[static_cast<std::size_t>(from_row * width + from_col)] = 0;
  queue.emplace_back(from_row, from_col);
  constexpr std::array<std::pair<int, int>, 4> deltas{{{-1, 0}, {1, 0}, {0, -1}, {0, 1}}};
  while (!queue.empty()) {
    auto [r, c] = queue.front();
    queue.pop_front();
    const int d = dist[static_cast<std::size_t>(r * width + c)];
    if (room_of(r, c) == to_room) return d;
    for (auto [dr, dc] : deltas) {
      const int nr = r + dr, nc = c + dc;
      if (nr < 0 || nc < 0 || nr >= height || nc >= width) continue;
      const auto cell = at(nr, nc);
      if (cell == Cell::Wall) continue;
      if (cell == Cell::Lock && lock_colour[static_cast<std::size_t>(nr * width + nc)] != key) continue;
      auto& nd = dist[static_cast<std::size_t>(nr * width + nc)];
      if (nd >= 0) continue;
      nd = d + 1;
      queue.emplace_back(nr, nc);
    }
  }
  return std::nullopt;
}

RoomMap load_map(std::string_view text) {
  const auto lines = split_lines(text);
  if (lines.empty()) throw MapError("empty map", 0, 0);
  RoomMap m;
  m.height = static_cast<int>(lines.size());
  m.width = static_cast<int>(lines.front().size());
  for (int r = 0; r < m.height; ++r)
    if (static_cast<int>(lines[static_cast<std::size_t>(r)].size()) != m.width)
      throw MapError("row length differs from the first row", r, 0);
  if (m.width < 5 || m.height < 5 || m.width % 4 != 1 || m.height % 4 != 1)
    throw MapError("dimensions must be 4k+1 (3x3 rooms separated by walls)", m.height - 1, m.width - 1);
  m.room_cols = (m.width - 1) / 4;
  m.room_rows = (m.height - 1) / 4;
  m.cells.assign(static_cast<std::size_t>(m.width * m.height), RoomMap::Cell::Wall);
  m.lock_colour.assign(m.cells.size(), -1);

  bool have_start = false, have_goal = false;
  std::map<std::pair<int, int>, bool> pairs;
  std::vector<std::pair<int, std::pair<int, int>>> lock_sites;
  for (int r = 0; r < m.height; ++r) {
    for (int c = 0; c < m.width; ++c) {
      const char ch = lines[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
      const auto idx = static_cast<std::size_t>(r * m.width + c);
      const int room = m.room_of(r, c);
      if (room >= 0) {
        if (ch == '#') throw MapError("wall inside a room", r, c);
        m.cells[idx] = RoomMap::Cell::Floor;
        if (ch == 'S') {
          if (have_start) throw MapError("second start cell", r, c);
          have_start = true;
          m.start_row = r;
          m.start_col = c;
        } else if (ch == 'G') {
          if (have_goal) throw MapError("second goal cell", r, c);
          have_goal = true;
          m.goal_room = room;
        } else if (ch >= 'a' && ch <= 'd') {
          for (const auto& k : m.keys)
            if (k.room == room) throw MapError("second key in one room", r, c);
          m.keys.push_back({ch - 'a', room, r, c});
        } else if (ch != '.') {
          throw MapError(std::string("unexpected '") + ch + "' inside a room", r, c);
        }
        continue;
      }
      if (ch == '#') continue;
      const bool opening = ch == '-' || ch == '|' || (ch >= 'A' && ch <= 'D');
      if (!opening) throw MapError(std::string("unexpected '") + ch + "' on a wall line", r, c);
      const bool border = r == 0 || c == 0 || r == m.height - 1 || c == m.width - 1;
      if (border || (r % 4 == 0) == (c % 4 == 0)) throw MapError("opening must join exactly two rooms", r, c);
      RoomMap::Door door;
      door.row = r;
      door.col = c;
      if (r % 4 == 0) {
        door.room_a = (r / 4 - 1) * m.room_cols + c / 4;
        door.room_b = door.room_a + m.room_cols;
      } else {
        door.room_a = (r / 4) * m.room_cols + c / 4 - 1;
        door.room_b = door.room_a + 1;
      }
      if (pairs[{door.room_a, door.room_b}]) throw MapError("second opening between the same rooms", r, c);
      pairs[{door.room_a, door.room_b}] = true;
      if (ch >= 'A' && ch <= 'D') {
        door.colour = ch - 'A';
        m.cells[idx] = RoomMap::Cell::Lock;
        m.lock_colour[idx] = ch - 'A';
        lock_sites.push_back({ch - 'A', {r, c}});
      } else {
        m.cells[idx] = RoomMap::Cell::Corridor;
      }
      m.doors.push_back(door);
    }
  }
  if (!have_start) throw MapError("no start cell 'S'", 0, 0);
  if (!have_goal) throw MapError("no goal cell 'G'", 0, 0);
  for (const auto& [colour, pos] : lock_sites) {
    const bool has_key = std::any_of(m.keys.begin(), m.keys.end(), [&](const auto& k) { return k.colour == colour; });
    if (!has_key)
      throw MapError(std::string("lock '") + static_cast<char>('A' + colour) + "' has no matching key", pos.first,
                     pos.second);
  }
  return m;
}

RoomMap load_map_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open map file " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return load_map(buf.str());
}

// ------------------------------------------------------------------ world

RoomWorld::RoomWorld(RoomMap map) : RoomWorld(std::move(map), Config{}) {}

RoomWorld::RoomWorld(RoomMap map, Config config) : map_(std::move(map)), config_(config) {
  using logic::PredicateKind;
  reach_ = vocab_.add_predicate("ReachRoom", 1, PredicateKind::Subgoal);
  connect_ = vocab_.add_predicate("Connect", 2, PredicateKind::Property);
  lock_ = vocab_.add_predicate("Lock", 3, PredicateKind::Property);
  has_key_room_ = vocab_.add_predicate("RoomHasKeyColor", 2, PredicateKind::Property);
  visited_p_ = vocab_.add_predicate("visited", 1, PredicateKind::Event);
  has_key_ = vocab_.add_predicate("hasKeyColor", 1, PredicateKind::Event);
  vocab_.add_predicate("CurAct", 2, PredicateKind::Auxiliary);
  for (int r = 1; r <= map_.room_count(); ++r) vocab_.add_constant(std::to_string(r));
  colours_ = map_.colours();
  for (int c : colours_) vocab_.add_constant(std::string(colour_name(c)));
  discovered_.assign(static_cast<std::size_t>(map_.room_count()), false);
  reset(0);
}

logic::ConstantId RoomWorld::colour_constant(int colour) const {
  const auto it = std::find(colours_.begin(), colours_.end(), colour);
  if (it == colours_.end()) throw std::out_of_range("colour not on this map");
  return static_cast<logic::ConstantId>(map_.room_count() + (it - colours_.begin()));
}

int RoomWorld::room_of_subgoal(const logic::GroundAtom& a) const {
  if (a.predicate != reach_) throw std::invalid_argument("not a ReachRoom atom");
  return a.args[0];
}

std::optional<int> RoomWorld::held_key() const {
  if (state_.held < 0) return std::nullopt;
  return map_.keys[static_cast<std::size_t>(state_.held)].colour;
}

void RoomWorld::discover(int room) { discovered_[static_cast<std::size_t>(room)] = true; }

void RoomWorld::enter_room(int room) {
  state_.room = room;
  state_.visited[static_cast<std::size_t>(room)] = true;
  discover(room);
  // Holding one key at a time: picking up another sends the old one back
  // to the room it came from.
  for (std::size_t k = 0; k < map_.keys.size(); ++k)
    if (map_.keys[k].room == room && state_.held != static_cast<int>(k)) state_.held = static_cast<int>(k);
}

EnvStep RoomWorld::reset(std::uint64_t /*seed*/) {
  state_ = State{};
  state_.visited.assign(static_cast<std::size_t>(map_.room_count()), false);
  state_.row = map_.start_row;
  state_.col = map_.start_col;
  enter_room(map_.room_of(state_.row, state_.col));
  return {observe(), 0.0, false};
}

EnvStep RoomWorld::step(Move move) {
  if (state_.done) return {observe(), 0.0, true};
  int nr = state_.row, nc = state_.col;
  switch (move) {
    case Move::Up: --nr; break;
    case Move::Down: ++nr; break;
    case Move::Left: --nc; break;
    case Move::Right: ++nc; break;
  }
  double reward = kRoomStepReward;
  const auto cell = map_.at(nr, nc);
  bool passable = cell != RoomMap::Cell::Wall;
  if (cell == RoomMap::Cell::Lock) passable = held_key() == map_.lock_colour[static_cast<std::size_t>(nr * map_.width + nc)];
  if (passable) {
    state_.row = nr;
    state_.col = nc;
    const int room = map_.room_of(nr, nc);
    if (room >= 0 && room != state_.room) {
      enter_room(room);
      if (room == map_.goal_room) {
        reward = kRoomGoalReward;
        state_.done = true;
      }
    }
  }
  ++state_.steps;
  if (state_.steps >= config_.max_episode_steps) state_.done = true;
  return {observe(), reward, state_.done};
}

logic::SymbolicState RoomWorld::label() const {
  std::vector<logic::GroundAtom> atoms;
  atoms.emplace_back(reach_, std::initializer_list<logic::ConstantId>{room_constant(state_.room)});
  for (int r = 0; r < map_.room_count(); ++r)
    if (visited(r)) atoms.emplace_back(visited_p_, std::initializer_list<logic::ConstantId>{room_constant(r)});
  if (const auto key = held_key())
    atoms.emplace_back(has_key_, std::initializer_list<logic::ConstantId>{colour_constant(*key)});
  for (const auto& d : map_.doors) {
    for (auto [x, y] : {std::pair{d.room_a, d.room_b}, std::pair{d.room_b, d.room_a}}) {
      if (!discovered(x)) continue;
      if (d.colour)
        atoms.emplace_back(lock_, std::initializer_list<logic::ConstantId>{room_constant(x), room_constant(y),
                                                                          colour_constant(*d.colour)});
      else
        atoms.emplace_back(connect_, std::initializer_list<logic::ConstantId>{room_constant(x), room_constant(y)});
    }
  }
  for (const auto& k : map_.keys)
    if (discovered(k.room))
      atoms.emplace_back(has_key_room_,
                         std::initializer_list<logic::ConstantId>{room_constant(k.room), colour_constant(k.colour)});
  return logic::SymbolicState(std::move(atoms));
}

logic::GroundAtom RoomWorld::current_subgoal() const { return {reach_, {room_constant(state_.room)}}; }

std::vector<logic::GroundAtom> RoomWorld::subgoal_space() const {
  std::vector<logic::GroundAtom> out;
  for (int r = 0; r < map_.room_count(); ++r) out.push_back({reach_, {room_constant(r)}});
  return out;
}

bool RoomWorld::is_goal(const logic::SymbolicState& s) const {
  return s.contains({reach_, {room_constant(map_.goal_room)}});
}

std::unique_ptr<Snapshot> RoomWorld::snapshot() const {
  auto snap = std::make_unique<RoomSnapshot>();
  snap->state = state_;
  return snap;
}

void RoomWorld::restore(const Snapshot& snap) { state_ = dynamic_cast<const RoomSnapshot&>(snap).state; }

std::size_t RoomWorld::observation_size() const {
  return static_cast<std::size_t>(map_.room_count()) + 2 + colours_.size();
}

std::vector<double> RoomWorld::observe() const {
  std::vector<double> obs(observation_size(), 0.0);
  obs[static_cast<std::size_t>(state_.room)] = 1.0;
  const int centre_row = (state_.room / map_.room_cols) * 4 + 2;
  const int centre_col = (state_.room % map_.room_cols) * 4 + 2;
  const auto n = static_cast<std::size_t>(map_.room_count());
  obs[n] = 0.5 * (state_.col - centre_col);
  obs[n + 1] = 0.5 * (state_.row - centre_row);
  if (const auto key = held_key()) {
    const auto it = std::find(colours_.begin(), colours_.end(), *key);
    obs[n + 2 + static_cast<std::size_t>(it - colours_.begin())] = 1.0;
  }
  return obs;
}

std::size_t RoomWorld::tabular_state_count() const { return map_.cells.size() * (colours_.size() + 1); }

std::size_t RoomWorld::tabular_state() const {
  std::size_t slot = 0;
  if (const auto key = held_key())
    slot = 1 + static_cast<std::size_t>(std::find(colours_.begin(), colours_.end(), *key) - colours_.begin());
  return static_cast<std::size_t>(state_.row * map_.width + state_.col) * (colours_.size() + 1) + slot;
}

}  // namespace symhrl::env
