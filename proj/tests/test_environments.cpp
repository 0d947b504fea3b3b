#include <doctest.h>

#include <cmath>
#include <deque>
#include <map>
#include <numbers>
#include <random>
#include <sstream>
#include <tuple>

#include "symhrl/nav_world.hpp"
#include "symhrl/room_world.hpp"

using namespace symhrl;
using namespace symhrl::env;
using logic::format_ground_atom;
using logic::GroundAtom;
using logic::parse_ground_atom;

namespace {

const std::string kMaps = std::string(SYMHRL_DATA_DIR) + "/maps/";

RoomWorld training_world() { return RoomWorld(load_map_file(kMaps + "training.map")); }

bool has(const Environment& w, const std::string& atom) {
  return w.label().contains(parse_ground_atom(atom, w.vocab()));
}

std::string label_text(const Environment& w) {
  std::string out;
  const auto s = w.label();
  for (const auto& a : s.atoms()) out += format_ground_atom(a, w.vocab()) + " ";
  return out;
}

// Independent BFS over the raw ASCII grid, returning the moves of a
// shortest path from the robot to any floor cell of `room`.
std::vector<Move> plan_moves(const RoomWorld& w, int room) {
  const auto& m = w.map();
  const std::optional<int> key = w.held_key();
  auto passable = [&](int r, int c) {
    const auto cell = m.at(r, c);
    if (cell == RoomMap::Cell::Wall) return false;
    if (cell == RoomMap::Cell::Lock) return key == m.lock_colour[static_cast<std::size_t>(r * m.width + c)];
    return true;
  };
  std::map<std::pair<int, int>, std::pair<std::pair<int, int>, Move>> parent;
  std::deque<std::pair<int, int>> queue{{w.row(), w.col()}};
  parent[{w.row(), w.col()}] = {{-1, -1}, Move::Up};
  const std::array<std::pair<Move, std::pair<int, int>>, 4> dirs{
      {{Move::Up, {-1, 0}}, {Move::Down, {1, 0}}, {Move::Left, {0, -1}}, {Move::Right, {0, 1}}}};
  while (!queue.empty()) {
    auto cur = queue.front();
    queue.pop_front();
    if (m.room_of(cur.first, cur.second) == room) {
      std::vector<Move> moves;
      while (parent[cur].first.first >= 0) {
        moves.push_back(parent[cur].second);
        cur = parent[cur].first;
      }
      return {moves.rbegin(), moves.rend()};
    }
    for (auto [mv, d] : dirs) {
      const std::pair<int, int> next{cur.first + d.first, cur.second + d.second};
      if (!passable(next.first, next.second) || parent.count(next)) continue;
      // Walking through another room on the way would change the current room.
      const int r = m.room_of(next.first, next.second);
      if (r >= 0 && r != room && r != w.current_room()) continue;
      parent[next] = {cur, mv};
      queue.push_back(next);
    }
  }
  return {};
}

// Breadth-first search over (cell, held key) using the world itself as the
// transition function.
bool solvable(RoomWorld& w) {
  std::set<std::tuple<int, int, int>> seen;
  std::deque<std::unique_ptr<Snapshot>> queue;
  queue.push_back(w.snapshot());
  while (!queue.empty()) {
    w.restore(*queue.front());
    queue.pop_front();
    const auto key = std::make_tuple(w.row(), w.col(), w.held_key().value_or(-1));
    if (!seen.insert(key).second) continue;
    const auto base = w.snapshot();
    for (int m = 0; m < kMoveCount; ++m) {
      w.restore(*base);
      w.step(static_cast<Move>(m));
      if (w.current_room() == w.map().goal_room) return true;
      queue.push_back(w.snapshot());
    }
  }
  return false;
}

// Checks every atom of L(s) against the world internals and every fact the
// internals imply against L(s).
void check_room_label(const RoomWorld& w) {
  const auto& v = w.vocab();
  const auto& m = w.map();
  const auto s = w.label();
  std::set<GroundAtom> expected;
  expected.insert(w.current_subgoal());
  for (int r = 0; r < m.room_count(); ++r)
    if (w.visited(r)) expected.insert(parse_ground_atom("visited(" + std::to_string(r + 1) + ")", v));
  if (w.held_key())
    expected.insert(parse_ground_atom("hasKeyColor(" + std::string(colour_name(*w.held_key())) + ")", v));
  for (const auto& d : m.doors)
    for (auto [x, y] : {std::pair{d.room_a, d.room_b}, std::pair{d.room_b, d.room_a}}) {
      if (!w.discovered(x)) continue;
      const auto xs = std::to_string(x + 1), ys = std::to_string(y + 1);
      expected.insert(d.colour ? parse_ground_atom("Lock(" + xs + "," + ys + "," + std::string(colour_name(*d.colour)) + ")", v)
                               : parse_ground_atom("Connect(" + xs + "," + ys + ")", v));
    }
  for (const auto& k : m.keys)
    if (w.discovered(k.room))
      expected.insert(parse_ground_atom(
          "RoomHasKeyColor(" + std::to_string(k.room + 1) + "," + std::string(colour_name(k.colour)) + ")", v));
  CHECK(std::set<GroundAtom>(s.atoms().begin(), s.atoms().end()) == expected);
  CHECK(m.at(w.row(), w.col()) != RoomMap::Cell::Wall);
  const int here = m.room_of(w.row(), w.col());
  CHECK((here < 0 || here == w.current_room()));
}

}  // namespace

TEST_CASE("bundled maps load") {
  const auto train = load_map_file(kMaps + "training.map");
  CHECK(train.width == 17);
  CHECK(train.room_count() == 16);
  CHECK(train.colours() == std::vector<int>{0, 1});
  CHECK(train.keys.size() == 2);
  CHECK(train.goal_room == 15);

  const auto t1 = load_map_file(kMaps + "test1.map");
  CHECK(t1.colours().size() == 3);
  const auto t2 = load_map_file(kMaps + "test2.map");
  CHECK(t2.room_count() == 25);

  for (const auto* m : {&train, &t1, &t2})
    CHECK_FALSE(m->shortest_path(m->start_row, m->start_col, m->goal_room, std::nullopt).has_value());
  for (const char* name : {"training.map", "test1.map", "test2.map"}) {
    RoomWorld w(load_map_file(kMaps + name));
    CHECK_MESSAGE(solvable(w), name);
  }
}

TEST_CASE("map validation errors") {
  const std::string ok =
      "#########\n"
      "#.S.|.G.#\n"
      "#########\n";
  CHECK_THROWS_AS(load_map(ok), MapError);  // height 3 is not 4k+1

  const std::string two_rooms =
      "#########\n"
      "#...#...#\n"
      "#.S.|.G.#\n"
      "#...#...#\n"
      "#########\n";
  CHECK_NOTHROW(load_map(two_rooms));

  std::string lock_without_key = two_rooms;
  lock_without_key[10 * 2 + 4] = 'A';
  try {
    load_map(lock_without_key);
    FAIL("expected MapError");
  } catch (const MapError& e) {
    CHECK(e.row() == 2);
    CHECK(e.col() == 4);
  }

  std::string border_door = two_rooms;
  border_door[10 * 2 + 0] = '|';
  CHECK_THROWS_AS(load_map(border_door), MapError);
  std::string stray = two_rooms;
  stray[10 + 1] = 'x';
  CHECK_THROWS_AS(load_map(stray), MapError);
  std::string no_start = two_rooms;
  no_start[10 * 2 + 2] = '.';
  CHECK_THROWS_AS(load_map(no_start), MapError);
}

TEST_CASE("room dynamics") {
  const std::string text =
      "#############\n"
      "#...#...#...#\n"
      "#.S.|.a.B.G.#\n"
      "#b..#...#...#\n"
      "#############\n";
  RoomWorld w(load_map(text));
  // Start room holds the green key, room 2 the red key.
  CHECK(w.held_key() == 1);
  CHECK(has(w, "hasKeyColor(green)"));

  SUBCASE("walls block") {
    const int r = w.row(), c = w.col();
    w.step(Move::Up);
    auto st = w.step(Move::Up);
    CHECK(w.row() == r - 1);
    CHECK(w.col() == c);
    CHECK(st.reward == kRoomStepReward);
    CHECK_FALSE(st.done);
  }
  SUBCASE("wrong key is blocked, key swap returns the old key") {
    for (int i = 0; i < 3; ++i) w.step(Move::Right);  // into room 2, picks up red
    CHECK(w.current_room() == 1);
    CHECK(w.held_key() == 0);
    CHECK(has(w, "hasKeyColor(red)"));
    CHECK_FALSE(has(w, "hasKeyColor(green)"));
    for (int i = 0; i < 2; ++i) w.step(Move::Right);
    const int c = w.col();
    auto st = w.step(Move::Right);  // green lock, red key held
    CHECK(w.col() == c);
    CHECK(st.reward == kRoomStepReward);
    // Back to room 1: the green key is there again.
    for (int i = 0; i < 4; ++i) w.step(Move::Left);
    CHECK(w.current_room() == 0);
    CHECK(w.held_key() == 1);
  }
  SUBCASE("matching key opens the lock") {
    const std::string keyed =
        "#############\n"
        "#a..#...#...#\n"
        "#.S.|...A.G.#\n"
        "#...#...#...#\n"
        "#############\n";
    RoomWorld k(load_map(keyed));
    REQUIRE(k.held_key() == 0);
    double total = 0.0;
    for (int i = 0; i < 8; ++i) total += k.step(Move::Right).reward;
    CHECK(k.current_room() == 2);
    CHECK(k.done());
    CHECK(total == -6.0 + kRoomGoalReward);
  }
  SUBCASE("goal room") {
    const std::string direct =
        "#########\n"
        "#...#...#\n"
        "#.S.|.G.#\n"
        "#...#...#\n"
        "#########\n";
    RoomWorld g(load_map(direct));
    g.step(Move::Right);
    auto st = g.step(Move::Right);
    CHECK_FALSE(st.done);
    st = g.step(Move::Right);
    CHECK(st.reward == kRoomGoalReward);
    CHECK(st.done);
    CHECK(g.is_goal(g.label()));
    st = g.step(Move::Right);
    CHECK(st.reward == 0.0);
  }
}

TEST_CASE("room labels and discovery") {
  auto w = training_world();
  CHECK(label_text(w) == "ReachRoom(1) Connect(1,2) Connect(1,5) visited(1) ");
  for (auto m : plan_moves(w, 1)) w.step(m);
  CHECK(w.current_room() == 1);
  CHECK(has(w, "Connect(1,2)"));
  CHECK(has(w, "Connect(2,1)"));
  CHECK(has(w, "Connect(2,6)"));
  CHECK_FALSE(has(w, "Connect(3,2)"));
  w.reset(0);
  // The knowledge base outlives the episode; events do not.
  CHECK(has(w, "Connect(2,3)"));
  CHECK_FALSE(has(w, "visited(2)"));
  check_room_label(w);
}

TEST_CASE("scripted optimal plan solves the training map") {
  auto w = training_world();
  const std::vector<int> rooms{2, 3, 4, 3, 2, 1, 5, 9, 10, 14, 13, 14, 15, 16};
  int expected_steps = 0;
  double total = 0.0;
  for (int room : rooms) {
    const auto len = w.map().shortest_path(w.row(), w.col(), room - 1, w.held_key());
    REQUIRE(len.has_value());
    const auto moves = plan_moves(w, room - 1);
    CHECK(static_cast<int>(moves.size()) == *len);
    expected_steps += *len;
    for (auto m : moves) total += w.step(m).reward;
    CHECK(w.current_room() == room - 1);
    check_room_label(w);
    if (room == 4) CHECK(has(w, "hasKeyColor(red)"));
    if (room == 13) CHECK(has(w, "hasKeyColor(green)"));
  }
  CHECK(w.done());
  CHECK(w.is_goal(w.label()));
  CHECK(w.episode_steps() == expected_steps);
  CHECK(total == doctest::Approx(-(expected_steps - 1) + kRoomGoalReward));
}

TEST_CASE("room label soundness and determinism under random play") {
  auto run = [](std::uint64_t seed) {
    auto w = training_world();
    std::mt19937_64 rng(seed);
    std::ostringstream log;
    for (int ep = 0; ep < 3; ++ep) {
      w.reset(seed + static_cast<std::uint64_t>(ep));
      while (!w.done()) {
        const auto st = w.step(static_cast<Move>(rng() % kMoveCount));
        for (double x : st.observation) log << x << ',';
        log << st.reward << ' ' << st.done << ' ' << label_text(w) << '\n';
        if (w.episode_steps() % 97 == 0) check_room_label(w);
      }
    }
    return log.str();
  };
  const auto a = run(11), b = run(11), c = run(12);
  CHECK(a == b);
  CHECK(a != c);
}

TEST_CASE("room snapshots restore the episode but keep discoveries") {
  auto w = training_world();
  const auto snap = w.snapshot();
  for (auto m : plan_moves(w, 1)) w.step(m);
  w.restore(*snap);
  CHECK(w.current_room() == 0);
  CHECK(w.episode_steps() == 0);
  CHECK_FALSE(has(w, "visited(2)"));
  CHECK(has(w, "Connect(2,6)"));
}

TEST_CASE("room observation and tabular encoding") {
  auto w = training_world();
  const auto obs = w.observe();
  REQUIRE(obs.size() == 16 + 2 + 2);
  CHECK(obs[0] == 1.0);
  CHECK(obs[16] == 0.0);
  CHECK(obs[17] == 0.0);
  std::set<std::size_t> seen;
  for (int i = 0; i < 200; ++i) {
    w.step(static_cast<Move>(i % 4 == 0 ? 3 : i % 3));
    CHECK(w.tabular_state() < w.tabular_state_count());
    seen.insert(w.tabular_state());
  }
  CHECK(seen.size() > 1);
}

// ---------------------------------------------------------------- nav world

namespace {

NavWorld scene() {
  NavWorld w;
  // red, yellow, grey, black
  w.set_circles({{1.0, 1.0, 0}, {5.0, 1.0, 1}, {1.0, 5.0, 2}, {5.0, 5.0, 3}});
  return w;
}

void check_nav_label(const NavWorld& w) {
  const auto s = w.label();
  const auto& v = w.vocab();
  for (const auto& a : s.atoms()) {
    const auto& name = v.predicate(a.predicate).name;
    if (name == "AchieveObj") {
      CHECK(a.args[0] == w.current_object());
    } else if (name == "Connect") {
      CHECK(w.connected(a.args[0], a.args[1]));
    } else if (name.rfind("is", 0) == 0) {
      const auto& colour = w.config().colours[static_cast<std::size_t>(w.circles()[static_cast<std::size_t>(a.args[0] - 1)].colour)];
      CHECK(name == "is" + std::string(1, static_cast<char>(std::toupper(colour[0]))) + colour.substr(1));
    } else if (name.rfind("visited", 0) == 0) {
      bool any = false;
      for (std::size_t c = 0; c < w.config().colours.size(); ++c) {
        const auto& colour = w.config().colours[c];
        if (name.substr(7) == std::string(1, static_cast<char>(std::toupper(colour[0]))) + colour.substr(1))
          any = w.colour_visited(static_cast<int>(c));
      }
      CHECK(any);
    } else {
      FAIL("unexpected predicate " << name);
    }
  }
  CHECK(s.of_predicate(v.predicate_id("AchieveObj")).size() == 1);
}

}  // namespace

TEST_CASE("nav kinematics") {
  auto w = scene();
  w.set_pose(3.0, 3.0, 0.0, 1.0);
  w.step({0.0, 0.0});
  CHECK(w.speed() == doctest::Approx(0.95));
  CHECK(w.x() == doctest::Approx(3.0 + 0.95 * 0.1));
  CHECK(w.y() == doctest::Approx(3.0));
  CHECK(w.heading() == doctest::Approx(0.0));

  w.set_pose(3.0, 3.0, 0.0, 0.0);
  w.step({5.0, -7.0});  // clamped to (1, -1)
  CHECK(w.heading() == doctest::Approx(0.2));
  CHECK(w.speed() == doctest::Approx(-0.1 * 0.95));

  w.set_pose(5.99, 3.0, 0.0, 2.0);
  w.step({0.0, 1.0});
  CHECK(w.x() == 6.0);
}

TEST_CASE("nav visit order and events") {
  auto w = scene();
  CHECK(w.current_object() == 0);
  SUBCASE("red first") {
    w.set_pose(1.0, 1.0, 0.0, 0.0);
    w.step({});
    CHECK(w.current_object() == 1);
    CHECK(w.label().contains(parse_ground_atom("visitedRed()", w.vocab())));
    CHECK(w.label().contains(parse_ground_atom("Connect(origin,c1)", w.vocab())));
    w.set_pose(5.0, 1.0, 0.0, 0.0);
    w.step({});
    CHECK(w.current_object() == 2);
    CHECK(w.label().contains(parse_ground_atom("visitedYellow()", w.vocab())));
  }
  SUBCASE("yellow before red") {
    w.set_pose(5.0, 1.0, 0.0, 0.0);
    w.step({});
    CHECK(w.current_object() == 0);
    CHECK_FALSE(w.label().contains(parse_ground_atom("visitedYellow()", w.vocab())));
    // The pair is still physically connected.
    CHECK(w.connected(0, 2));
  }
  SUBCASE("slow traversals do not establish Connect") {
    for (int i = 0; i < 300; ++i) w.step({});
    w.set_pose(1.0, 5.0, 0.0, 0.0);
    w.step({});
    CHECK(w.current_object() == 3);
    CHECK_FALSE(w.connected(0, 3));
  }
  SUBCASE("finishing pays once") {
    double total = 0.0;
    for (auto [x, y] : {std::pair{1.0, 1.0}, {5.0, 1.0}, {1.0, 5.0}, {5.0, 5.0}}) {
      w.set_pose(x, y, 0.0, 0.0);
      total += w.step({}).reward;
    }
    CHECK(total == kNavFinishReward);
    CHECK(w.done());
    CHECK(w.is_goal(w.label()));
  }
}

TEST_CASE("scripted drive establishes Connect under the step limit") {
  auto w = scene();
  w.set_pose(3.0, 3.0, 0.0, 0.0);
  int steps = 0;
  while (w.current_object() != 1 && steps < 300) {
    const double want = std::atan2(1.0 - w.y(), 1.0 - w.x());
    double err = std::remainder(want - w.heading(), 2.0 * std::numbers::pi);
    w.step({std::clamp(err * 5.0, -1.0, 1.0), std::abs(err) < 0.3 ? 1.0 : 0.0});
    ++steps;
  }
  CHECK(w.current_object() == 1);
  CHECK(steps < 300);
  CHECK(w.connected(0, 1));
  check_nav_label(w);
}

TEST_CASE("nav constraint safety and label soundness") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    NavWorld::Config cfg;
    cfg.layout_seed = seed;
    NavWorld w(cfg);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::uniform_real_distribution<double> pos(0.0, 6.0);
    const auto& v = w.vocab();
    const auto red = parse_ground_atom("visitedRed()", v), yellow = parse_ground_atom("visitedYellow()", v);
    const auto grey = parse_ground_atom("visitedGrey()", v), black = parse_ground_atom("visitedBlack()", v);
    w.reset(seed);
    for (int t = 0; t < 1500 && !w.done(); ++t) {
      if (t % 10 == 0) w.set_pose(pos(rng), pos(rng), w.heading(), w.speed());
      w.step({u(rng), u(rng)});
      const auto s = w.label();
      CHECK((!s.contains(yellow) || s.contains(red)));
      CHECK((!s.contains(black) || s.contains(grey)));
      if (t % 50 == 0) check_nav_label(w);
    }
  }
}

TEST_CASE("nav determinism") {
  auto run = [](std::uint64_t seed) {
    NavWorld w;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::ostringstream log;
    log.precision(17);
    w.reset(seed);
    for (int t = 0; t < 500; ++t) {
      const auto st = w.step({u(rng), u(rng)});
      for (double x : st.observation) log << x << ',';
      log << st.reward << st.done << label_text(w) << '\n';
    }
    return log.str();
  };
  CHECK(run(5) == run(5));
  CHECK(run(5) != run(6));
}

TEST_CASE("lidar") {
  NavWorld w;
  const auto bins = static_cast<std::size_t>(w.config().lidar_bins);
  REQUIRE(w.observation_size() == 4 * bins + 3);

  SUBCASE("robot on a circle centre saturates") {
    w.set_circles({{1.0, 1.0, 0}, {5.0, 1.0, 1}, {1.0, 5.0, 2}, {5.0, 5.0, 3}});
    w.set_pose(1.0, 1.0, 0.3, 0.0);
    const auto obs = w.observe();
    CHECK(*std::max_element(obs.begin(), obs.begin() + static_cast<long>(bins)) == 1.0);
    // Exactly one lit bin per colour block.
    for (std::size_t c = 0; c < 4; ++c) {
      int lit = 0;
      for (std::size_t b = 0; b < bins; ++b) lit += obs[c * bins + b] > 0.0;
      CHECK(lit == 1);
    }
  }

  SUBCASE("rotating the scene by one bin rotates every block by one slot") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> radius(1.0, 2.4);
    const double width = 2.0 * std::numbers::pi / static_cast<double>(bins);
    for (int trial = 0; trial < 50; ++trial) {
      std::vector<std::pair<double, int>> polar;  // (distance, bin)
      for (int c = 0; c < 4; ++c) polar.push_back({radius(rng), static_cast<int>(rng() % bins)});
      auto place = [&](int shift) {
        std::vector<NavWorld::Circle> cs;
        for (int c = 0; c < 4; ++c) {
          const double theta = (polar[static_cast<std::size_t>(c)].second + shift + 0.5) * width;
          cs.push_back({3.0 + polar[static_cast<std::size_t>(c)].first * std::cos(theta),
                        3.0 + polar[static_cast<std::size_t>(c)].first * std::sin(theta), c});
        }
        return cs;
      };
      try {
        w.set_circles(place(0));
      } catch (const std::invalid_argument&) {
        continue;  // overlapping draw
      }
      w.set_pose(3.0, 3.0, 0.0, 0.0);
      const auto before = w.observe();
      w.set_circles(place(1));
      w.set_pose(3.0, 3.0, 0.0, 0.0);
      const auto after = w.observe();
      for (std::size_t c = 0; c < 4; ++c)
        for (std::size_t b = 0; b < bins; ++b)
          CHECK(after[c * bins + (b + 1) % bins] == doctest::Approx(before[c * bins + b]).epsilon(1e-12));
    }
  }
}

TEST_CASE("nav snapshots") {
  auto w = scene();
  const auto snap = w.snapshot();
  w.set_pose(1.0, 1.0, 0.0, 0.0);
  w.step({});
  REQUIRE(w.current_object() == 1);
  w.restore(*snap);
  CHECK(w.current_object() == 0);
  CHECK(w.connected(0, 1));
  CHECK(w.episode_steps() == 0);
}
