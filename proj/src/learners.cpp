#include "symhrl/learners.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace symhrl::learn {

double EpsilonSchedule::at(std::int64_t t) const {
  if (steps <= 0 || t >= steps) return end;
  const double frac = static_cast<double>(std::max<std::int64_t>(t, 0)) / static_cast<double>(steps);
  return start + (end - start) * frac;
}

// ----------------------------------------------------------------- tabular

TabularQ::TabularQ(std::size_t states, int actions, double alpha, double gamma, double init)
    : states_(states), actions_(actions), alpha_(alpha), gamma_(gamma),
      table_(states * static_cast<std::size_t>(actions), init) {
  if (actions <= 0) throw std::invalid_argument("TabularQ needs at least one action");
}

double TabularQ::max_value(std::size_t s) const { return value(s, greedy(s)); }

int TabularQ::greedy(std::size_t s) const {
  int best = 0;
  for (int a = 1; a < actions_; ++a)
    if (value(s, a) > value(s, best)) best = a;
  return best;
}

int TabularQ::epsilon_greedy(std::size_t s, double epsilon, std::mt19937_64& rng) const {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  if (u(rng) < epsilon) return std::uniform_int_distribution<int>(0, actions_ - 1)(rng);
  const double best = max_value(s);
  int ties[64];
  int n = 0;
  for (int a = 0; a < actions_ && n < 64; ++a)
    if (value(s, a) == best) ties[n++] = a;
  return n == 1 ? ties[0] : ties[std::uniform_int_distribution<int>(0, n - 1)(rng)];
}

double TabularQ::update(std::size_t s, int a, double r, std::size_t s_next, bool terminal) {
  const double target = terminal ? r : r + gamma_ * max_value(s_next);
  const double td = target - value(s, a);
  set_value(s, a, value(s, a) + alpha_ * td);
  return td;
}

nlohmann::json TabularQ::to_json() const {
  return {{"states", states_}, {"actions", actions_}, {"alpha", alpha_}, {"gamma", gamma_}, {"table", table_}};
}

TabularQ TabularQ::from_json(const nlohmann::json& j) {
  TabularQ q(j.at("states").get<std::size_t>(), j.at("actions").get<int>(), j.at("alpha").get<double>(),
             j.at("gamma").get<double>());
  auto table = j.at("table").get<std::vector<double>>();
  if (table.size() != q.table_.size()) throw nn::ShapeError("tabular Q size mismatch");
  q.table_ = std::move(table);
  return q;
}

// --------------------------------------------------------------------- DQN

DqnPolicy::DqnPolicy(int obs_size, int actions, DqnConfig config, std::uint64_t seed)
    : config_(std::move(config)), actions_(actions) {
  std::vector<int> sizes{obs_size};
  sizes.insert(sizes.end(), config_.hidden.begin(), config_.hidden.end());
  sizes.push_back(actions);
  online_ = nn::Mlp(sizes, nn::OutputActivation::Linear, seed);
  target_ = online_;
  adam_ = nn::AdamState(online_.parameter_count(), nn::AdamConfig{config_.lr});
}

int DqnPolicy::greedy(std::span<const double> obs) const {
  const auto q = q_values(obs);
  return static_cast<int>(std::max_element(q.begin(), q.end()) - q.begin());
}

int DqnPolicy::epsilon_greedy(std::span<const double> obs, double epsilon, std::mt19937_64& rng) const {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  if (u(rng) < epsilon) return std::uniform_int_distribution<int>(0, actions_ - 1)(rng);
  return greedy(obs);
}

double DqnPolicy::target(const DqnTransition& t) const {
  if (t.terminal) return t.reward;
  const auto q = target_.forward(t.next_obs);
  return t.reward + config_.gamma * *std::max_element(q.begin(), q.end());
}

double DqnPolicy::update(std::span<const DqnTransition* const> batch) {
  if (batch.empty()) throw nn::ShapeError("empty DQN minibatch");
  std::vector<double> grads(online_.parameter_count(), 0.0);
  std::vector<double> upstream(static_cast<std::size_t>(actions_));
  double loss = 0.0;
  const double scale = 1.0 / static_cast<double>(batch.size());
  for (const auto* t : batch) {
    nn::Mlp::Cache cache;
    const auto q = online_.forward(t->obs, cache);
    const double td = q[static_cast<std::size_t>(t->action)] - target(*t);
    loss += td * td * scale;
    std::fill(upstream.begin(), upstream.end(), 0.0);
    upstream[static_cast<std::size_t>(t->action)] = td * scale;
    online_.backward(cache, upstream, grads);
  }
  if (!std::isfinite(loss)) throw std::runtime_error("non-finite DQN loss");
  nn::clip_grad_norm(grads, config_.grad_clip);
  nn::adam_step(online_.parameters(), grads, adam_);
  if (++updates_ % config_.target_sync == 0) sync_target();
  return loss;
}

void DqnPolicy::remember(DqnTransition t) {
  replay_.push_back(std::move(t));
  while (replay_.size() > config_.capacity) replay_.pop_front();
}

double DqnPolicy::train(std::mt19937_64& rng) {
  if (replay_.size() < std::max(config_.warmup, config_.batch)) return -1.0;
  std::vector<const DqnTransition*> batch;
  std::uniform_int_distribution<std::size_t> pick(0, replay_.size() - 1);
  for (std::size_t i = 0; i < config_.batch; ++i) batch.push_back(&replay_[pick(rng)]);
  return update(batch);
}

nlohmann::json DqnPolicy::to_json() const {
  return {{"actions", actions_},
          {"hidden", config_.hidden},
          {"lr", config_.lr},
          {"gamma", config_.gamma},
          {"batch", config_.batch},
          {"capacity", config_.capacity},
          {"warmup", config_.warmup},
          {"target_sync", config_.target_sync},
          {"grad_clip", config_.grad_clip},
          {"online", online_.to_json()},
          {"target", target_.to_json()},
          {"adam", nn::adam_to_json(adam_)},
          {"updates", updates_}};
}

DqnPolicy DqnPolicy::from_json(const nlohmann::json& j) {
  DqnPolicy p;
  p.actions_ = j.at("actions").get<int>();
  p.config_.hidden = j.at("hidden").get<std::vector<int>>();
  p.config_.lr = j.at("lr").get<double>();
  p.config_.gamma = j.at("gamma").get<double>();
  p.config_.batch = j.at("batch").get<std::size_t>();
  p.config_.capacity = j.at("capacity").get<std::size_t>();
  p.config_.warmup = j.at("warmup").get<std::size_t>();
  p.config_.target_sync = j.at("target_sync").get<int>();
  p.config_.grad_clip = j.at("grad_clip").get<double>();
  p.online_ = nn::Mlp::from_json(j.at("online"));
  p.target_ = nn::Mlp::from_json(j.at("target"));
  p.adam_ = nn::adam_from_json(j.at("adam"));
  p.updates_ = j.at("updates").get<std::int64_t>();
  return p;
}

}  // namespace symhrl::learn
