#include <doctest.h>

#include <cmath>
#include <deque>
#include <numeric>
#include <random>
#include <set>

#include "symhrl/nav_world.hpp"
#include "symhrl/options.hpp"
#include "symhrl/room_world.hpp"

using namespace symhrl;
using namespace symhrl::learn;
using namespace symhrl::options;
using logic::parse_ground_atom;

namespace {

const std::string kMaps = std::string(SYMHRL_DATA_DIR) + "/maps/";

// Two-state chain: action 0 moves right (A -> B, B -> exit with reward 1),
// action 1 stays put with reward 0. Closed form with discount g:
// Q(B,0)=1, Q(B,1)=g, Q(A,0)=g, Q(A,1)=g^2.
struct Chain {
  static constexpr std::size_t A = 0, B = 1;
  struct Step {
    std::size_t next;
    double reward;
    bool terminal;
  };
  static Step step(std::size_t s, int a) {
    if (a == 1) return {s, 0.0, false};
    if (s == A) return {B, 0.0, false};
    return {A, 1.0, true};
  }
  static double q_star(std::size_t s, int a, double g) {
    if (s == B) return a == 0 ? 1.0 : g;
    return a == 0 ? g : g * g;
  }
};

// Shortest number of moves from the robot to any floor cell of `room`,
// computed on the raw map without entering third rooms.
int bfs_moves(const env::RoomWorld& w, int room) {
  const auto& m = w.map();
  std::vector<int> dist(m.cells.size(), -1);
  std::deque<std::pair<int, int>> q{{w.row(), w.col()}};
  dist[static_cast<std::size_t>(w.row() * m.width + w.col())] = 0;
  while (!q.empty()) {
    auto [r, c] = q.front();
    q.pop_front();
    const int d = dist[static_cast<std::size_t>(r * m.width + c)];
    if (m.room_of(r, c) == room) return d;
    for (auto [dr, dc] : {std::pair{-1, 0}, {1, 0}, {0, -1}, {0, 1}}) {
      const int nr = r + dr, nc = c + dc;
      const auto cell = m.at(nr, nc);
      if (cell == env::RoomMap::Cell::Wall) continue;
      if (cell == env::RoomMap::Cell::Lock && w.held_key() != m.lock_colour[static_cast<std::size_t>(nr * m.width + nc)])
        continue;
      const int rr = m.room_of(nr, nc);
      if (rr >= 0 && rr != room && rr != w.current_room()) continue;
      auto& nd = dist[static_cast<std::size_t>(nr * m.width + nc)];
      if (nd >= 0) continue;
      nd = d + 1;
      q.push_back({nr, nc});
    }
  }
  return -1;
}

OptionConfig room_option_config(std::uint64_t seed = 1) {
  OptionConfig c;
  c.learner = Learner::Tabular;
  c.max_steps = 100;
  c.eta = 20.0;
  c.epsilon = {0.2, 0.05, 2000};
  c.seed = seed;
  return c;
}

}  // namespace

TEST_CASE("epsilon schedule") {
  EpsilonSchedule e{1.0, 0.05, 100};
  CHECK(e.at(0) == 1.0);
  CHECK(e.at(50) == doctest::Approx(0.525));
  CHECK(e.at(100) == 0.05);
  CHECK(e.at(1000) == 0.05);
  CHECK(EpsilonSchedule{0.3, 0.1, 0}.at(0) == 0.1);
}

TEST_CASE("tabular Q update") {
  TabularQ q(3, 2, 0.5, 0.9);
  q.set_value(1, 0, 2.0);
  q.set_value(1, 1, 4.0);
  const double td = q.update(0, 1, 1.0, 1, false);
  CHECK(td == doctest::Approx(1.0 + 0.9 * 4.0));
  CHECK(q.value(0, 1) == doctest::Approx(0.5 * 4.6));
  // Terminal: the target is the reward alone.
  q.update(2, 0, 100.0, 1, true);
  CHECK(q.value(2, 0) == doctest::Approx(50.0));
  // gamma = 0: the target is the reward.
  TabularQ z(2, 2, 1.0, 0.0);
  z.set_value(1, 0, 9.0);
  z.update(0, 0, 3.0, 1, false);
  CHECK(z.value(0, 0) == 3.0);
  // Ties go to the lowest index.
  TabularQ t(1, 4, 0.1, 0.9);
  CHECK(t.greedy(0) == 0);
  t.set_value(0, 2, 1.0);
  t.set_value(0, 3, 1.0);
  CHECK(t.greedy(0) == 2);
}

TEST_CASE("tabular Q converges on the two-state chain") {
  for (double g : {0.0, 0.5, 0.9, 0.99}) {
    TabularQ q(2, 2, 0.1, g);
    std::mt19937_64 rng(4);
    std::size_t s = Chain::A;
    for (int t = 0; t < 200000; ++t) {
      const int a = static_cast<int>(rng() % 2);
      const auto st = Chain::step(s, a);
      q.update(s, a, st.reward, st.next, st.terminal);
      s = st.terminal ? Chain::A : st.next;
      if (rng() % 4 == 0) s = rng() % 2;
    }
    for (std::size_t st : {Chain::A, Chain::B})
      for (int a : {0, 1}) CHECK(std::abs(q.value(st, a) - Chain::q_star(st, a, g)) < 1e-2);
  }
}

TEST_CASE("DQN targets and chain convergence") {
  DqnConfig cfg;
  cfg.hidden = {16};
  cfg.lr = 5e-3;
  cfg.gamma = 0.9;
  cfg.target_sync = 50;
  DqnPolicy dqn(2, 2, cfg, 3);

  const DqnTransition terminal{{1.0, 0.0}, 0, 100.0, {0.0, 1.0}, true};
  CHECK(dqn.target(terminal) == 100.0);
  DqnConfig zero = cfg;
  zero.gamma = 0.0;
  DqnPolicy greedy(2, 2, zero, 3);
  CHECK(greedy.target({{1.0, 0.0}, 1, 2.5, {0.0, 1.0}, false}) == 2.5);
  CHECK_THROWS_AS(dqn.update({}), nn::ShapeError);

  auto one_hot = [](std::size_t s) { return std::vector<double>{s == 0 ? 1.0 : 0.0, s == 1 ? 1.0 : 0.0}; };
  std::vector<DqnTransition> all;
  for (std::size_t s : {Chain::A, Chain::B})
    for (int a : {0, 1}) {
      const auto st = Chain::step(s, a);
      all.push_back({one_hot(s), a, st.reward, one_hot(st.next), st.terminal});
    }
  std::vector<const DqnTransition*> batch;
  for (const auto& t : all) batch.push_back(&t);
  double loss = 0.0;
  for (int i = 0; i < 6000; ++i) loss = dqn.update(batch);
  CHECK(loss < 1e-4);
  for (std::size_t s : {Chain::A, Chain::B}) {
    const auto q = dqn.q_values(one_hot(s));
    for (int a : {0, 1}) CHECK(std::abs(q[static_cast<std::size_t>(a)] - Chain::q_star(s, a, 0.9)) < 1e-2);
  }

  const auto j = dqn.to_json();
  const auto back = DqnPolicy::from_json(j);
  CHECK(back.q_values(one_hot(0)) == dqn.q_values(one_hot(0)));
}

TEST_CASE("GAE and advantage normalisation") {
  Rollout r;
  r.steps.push_back({{}, {}, 0.0, 1.0, 0.5, false});
  r.steps.push_back({{}, {}, 0.0, 2.0, 1.0, false});
  r.bootstrap_value = 3.0;
  const auto adv = compute_gae(r, 0.9, 0.8);
  const double d1 = 1.0 + 0.9 * 3.0 - 2.0;
  const double d0 = 0.5 + 0.9 * 2.0 - 1.0;
  CHECK(adv.advantages[1] == doctest::Approx(d1));
  CHECK(adv.advantages[0] == doctest::Approx(d0 + 0.9 * 0.8 * d1));
  CHECK(adv.returns[0] == doctest::Approx(adv.advantages[0] + 1.0));

  r.steps[0].terminal = true;
  const auto cut = compute_gae(r, 0.9, 0.8);
  CHECK(cut.advantages[0] == doctest::Approx(0.5 - 1.0));

  std::mt19937_64 rng(2);
  std::normal_distribution<double> n(3.0, 7.0);
  for (std::size_t len : {2u, 5u, 64u, 301u}) {
    std::vector<double> xs(len);
    for (auto& x : xs) x = n(rng);
    normalise(xs);
    const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(len);
    double var = 0.0;
    for (double x : xs) var += (x - mean) * (x - mean);
    CHECK(std::abs(mean) < 1e-6);
    CHECK(std::abs(std::sqrt(var / static_cast<double>(len)) - 1.0) < 1e-6);
  }
}

TEST_CASE("clipped surrogate") {
  CHECK(clipped_surrogate(1.0, 0.0, 0.2) == 0.0);
  CHECK(clipped_surrogate(1.5, 2.0, 0.2) == doctest::Approx(-1.2 * 2.0));
  CHECK(clipped_surrogate_grad(1.5, 2.0, 0.2) == 0.0);
  CHECK(clipped_surrogate_grad(1.1, 2.0, 0.2) == -2.0);
  CHECK(clipped_surrogate_grad(0.5, -1.0, 0.2) == 0.0);
  CHECK(clipped_surrogate_grad(0.5, 1.0, 0.2) == -1.0);  // below 1-eps with A>0 still pulls up
  CHECK(clipped_surrogate_grad(1.5, -1.0, 0.2) == 1.0);
}

TEST_CASE("PPO objective") {
  PpoConfig cfg;
  cfg.hidden = {8};
  PpoPolicy pol(3, 2, cfg, 5);
  std::mt19937_64 rng(9);
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<std::vector<double>> obs, acts;
  for (int i = 0; i < 6; ++i) {
    obs.push_back({n(rng), n(rng), n(rng)});
    acts.push_back(pol.act(obs.back(), rng).action);
  }

  SUBCASE("same policy and zero advantage give zero policy loss") {
    std::vector<PpoSample> batch;
    for (int i = 0; i < 6; ++i) batch.push_back({&obs[i], &acts[i], pol.log_prob(obs[i], acts[i]), 0.0, 0.0});
    PpoLosses parts;
    pol.objective(batch, nullptr, &parts);
    CHECK(parts.policy == 0.0);
  }

  SUBCASE("gradient matches finite differences") {
    std::vector<PpoSample> batch;
    for (int i = 0; i < 6; ++i)
      batch.push_back({&obs[i], &acts[i], pol.log_prob(obs[i], acts[i]) + 0.05 * n(rng), n(rng), n(rng)});
    std::vector<double> grads;
    pol.objective(batch, &grads);
    auto p = pol.parameters();
    double worst = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double h = 1e-6, keep = p[i];
      p[i] = keep + h;
      pol.set_parameters(p);
      const double up = pol.objective(batch, nullptr);
      p[i] = keep - h;
      pol.set_parameters(p);
      const double down = pol.objective(batch, nullptr);
      p[i] = keep;
      pol.set_parameters(p);
      const double fd = (up - down) / (2 * h);
      worst = std::max(worst, std::abs(fd - grads[i]) / std::max(1e-6, std::abs(fd) + std::abs(grads[i])));
    }
    CHECK(worst < 1e-4);
  }

  SUBCASE("update pulls the mean towards rewarded actions") {
    PpoConfig c = cfg;
    c.lr = 1e-2;
    PpoPolicy bandit(1, 2, c, 1);
    const std::vector<double> o{1.0};
    for (int round = 0; round < 60; ++round) {
      Rollout r;
      for (int i = 0; i < 32; ++i) {
        auto a = bandit.act(o, rng);
        const double reward = -(a.action[0] - 0.5) * (a.action[0] - 0.5) - (a.action[1] + 0.5) * (a.action[1] + 0.5);
        r.steps.push_back({o, a.action, a.log_prob, a.value, reward, true});
      }
      const auto l = bandit.update(r, rng);
      CHECK(std::isfinite(l.policy));
    }
    const auto mu = bandit.mean(o);
    CHECK(mu[0] == doctest::Approx(0.5).epsilon(0.2));
    CHECK(mu[1] == doctest::Approx(-0.5).epsilon(0.2));
  }
}

TEST_CASE("intrinsic reward") {
  env::RoomWorld w(env::load_map_file(kMaps + "training.map"));
  const auto& v = w.vocab();
  const auto p = parse_ground_atom("ReachRoom(2)", v);
  auto s = w.label();
  CHECK(intrinsic_reward(s, p, -1.0, 20.0) == -1.0);
  s.insert(p);
  CHECK(intrinsic_reward(s, p, -1.0, 20.0) == 20.0);
  CHECK(intrinsic_reward(s, p, 100.0, 1.0) == 1.0);
}

TEST_CASE("room options: entry, unreachable targets and termination") {
  SUBCASE("already satisfied") {
    env::RoomWorld w(env::load_map_file(kMaps + "training.map"));
    RoomOptions opts(w, room_option_config());
    const auto out = opts.run(w, w.current_subgoal(), true);
    CHECK(out.success);
    CHECK(out.steps == 0);
  }
  SUBCASE("locked without a key") {
    const std::string text =
        "#############\n"
        "#...#...#aG.#\n"
        "#.S.A...|...#\n"
        "#...#...#...#\n"
        "#############\n";
    env::RoomWorld w(env::load_map(text));
    RoomOptions opts(w, room_option_config());
    const auto out = opts.run(w, parse_ground_atom("ReachRoom(2)", w.vocab()), true);
    CHECK_FALSE(out.success);
    CHECK_FALSE(out.detour);
    CHECK(out.steps == 100);
  }
  SUBCASE("success iff the subgoal holds at the end") {
    env::RoomWorld w(env::load_map_file(kMaps + "training.map"));
    RoomOptions opts(w, room_option_config(3));
    std::mt19937_64 rng(1);
    for (int i = 0; i < 200; ++i) {
      w.reset(0);
      const auto p = w.subgoal_space()[rng() % 16];
      const auto out = opts.run(w, p, true);
      CHECK(out.success == w.label().contains(p));
      CHECK(out.steps <= 100);
      if (!out.success && !out.detour) CHECK(out.steps == 100);
    }
  }
}

TEST_CASE("trained corridor option is near-optimal and improves monotonically") {
  env::RoomWorld w(env::load_map_file(kMaps + "training.map"));
  RoomOptions opts(w, room_option_config(7));
  const auto p = parse_ground_atom("ReachRoom(2)", w.vocab());
  w.reset(0);
  const int shortest = bfs_moves(w, 1);
  REQUIRE(shortest > 0);

  auto evaluate = [&] {
    int wins = 0;
    for (int i = 0; i < 100; ++i) {
      w.reset(0);
      wins += opts.run(w, p, false).success;
    }
    return wins / 100.0;
  };
  std::vector<double> rates;
  for (int checkpoint = 0; checkpoint < 5; ++checkpoint) {
    for (int i = 0; i < 10; ++i) {
      w.reset(0);
      opts.run(w, p, true);
    }
    rates.push_back(evaluate());
  }
  for (std::size_t i = 1; i < rates.size(); ++i) CHECK(rates[i] >= rates[i - 1] - 0.05);
  CHECK(rates.back() == 1.0);
  w.reset(0);
  const auto out = opts.run(w, p, false);
  CHECK(out.success);
  CHECK(out.steps <= shortest + 2);

  // Checkpoint round trip keeps the greedy behaviour.
  RoomOptions copy(w, room_option_config(7));
  copy.load_json(opts.to_json());
  w.reset(0);
  CHECK(copy.run(w, p, false).steps == out.steps);
  CHECK(copy.steps_taken(p) == opts.steps_taken(p));
}

TEST_CASE("room DQN options learn a corridor") {
  env::RoomWorld w(env::load_map_file(kMaps + "training.map"));
  auto cfg = room_option_config(2);
  cfg.learner = Learner::Dqn;
  cfg.dqn.hidden = {32};
  cfg.dqn.lr = 1e-3;
  cfg.epsilon = {1.0, 0.05, 1500};
  RoomOptions opts(w, cfg);
  const auto p = parse_ground_atom("ReachRoom(2)", w.vocab());
  int late = 0;
  for (int i = 0; i < 120; ++i) {
    w.reset(0);
    const bool ok = opts.run(w, p, true).success;
    if (i >= 100) late += ok;
  }
  CHECK(late >= 15);
}

TEST_CASE("nav options run, learn and are deterministic") {
  auto run = [](std::uint64_t seed) {
    env::NavWorld w;
    OptionConfig cfg;
    cfg.learner = Learner::Ppo;
    cfg.max_steps = 300;
    cfg.eta = 1.0;
    cfg.detour_penalty = -1.0;
    cfg.progress_shaping = 0.1;
    cfg.seed = seed;
    NavOptions opts(w, cfg);
    const auto p = w.subgoal_space()[0];
    std::vector<int> steps;
    for (int i = 0; i < 4; ++i) {
      w.reset(static_cast<std::uint64_t>(i));
      const auto out = opts.run(w, p, true);
      CHECK(out.success == w.label().contains(p));
      CHECK(std::isfinite(opts.last_losses().policy));
      steps.push_back(out.steps);
    }
    return steps;
  };
  CHECK(run(1) == run(1));
}
