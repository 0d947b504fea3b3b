#include "symhrl/dilp.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>

#include "symhrl/kernels.hpp"

namespace symhrl::dilp {

namespace {

std::vector<double> softmax(std::span<const double> phi) {
  std::vector<double> w(phi.begin(), phi.end());
  if (w.empty()) return w;
  const double mx = *std::max_element(w.begin(), w.end());
  double sum = 0.0;
  for (double& x : w) sum += (x = std::exp(x - mx));
  for (double& x : w) x /= sum;
  return w;
}

}  // namespace

GroundedClause ground_clause(const Clause& clause, const AtomIndex& index, const Vocabulary& vocab) {
  GroundedClause g;
  g.clause = clause;
  g.key = logic::canonical_key(clause);
  const auto* block = index.block(clause.head.predicate);
  if (!block) throw logic::LogicError("head predicate " + vocab.predicate(clause.head.predicate).name + " is not indexed");
  g.head_offset = block->offset;
  g.head_count = block->count;
  g.body_len = clause.body.size();
  for (const auto& b : clause.body)
    if (!index.block(b.predicate))
      throw logic::LogicError("body predicate " + vocab.predicate(b.predicate).name + " is not indexed");

  const auto subs = logic::ground_substitutions(clause, vocab);
  g.head.reserve(subs.size());
  g.body.reserve(subs.size() * g.body_len);
  for (const auto& sub : subs) {
    const auto h = index.position(logic::apply(clause.head, sub));
    g.head.push_back(static_cast<std::uint32_t>(*h - g.head_offset));
    for (const auto& b : clause.body) g.body.push_back(static_cast<std::uint32_t>(*index.position(logic::apply(b, sub))));
  }
  return g;
}

void clause_values(const GroundedClause& g, std::span<const double> e, std::span<double> out,
                   std::span<std::int32_t> argmax) {
  std::fill(out.begin(), out.end(), 0.0);
  const bool track = !argmax.empty();
  if (track) std::fill(argmax.begin(), argmax.end(), -1);
  const std::size_t n = g.head.size();
  const std::size_t L = g.body_len;
  for (std::size_t s = 0; s < n; ++s) {
    const std::uint32_t h = g.head[s];
    double prod = 1.0;
    const std::uint32_t* body = g.body.data() + s * L;
    for (std::size_t k = 0; k < L && prod != 0.0; ++k) prod *= e[body[k]];
    if (track) {
      if (argmax[h] < 0 || prod > out[h]) {
        argmax[h] = static_cast<std::int32_t>(s);
        out[h] = prod;
      }
    } else if (prod > out[h]) {
      out[h] = prod;
    }
  }
}

ValuationVector clause_forward(const Clause& clause, const ValuationVector& e, const AtomIndex& index,
                               const Vocabulary& vocab) {
  const auto g = ground_clause(clause, index, vocab);
  ValuationVector out(index.size());
  auto& values = out.mutable_values();
  clause_values(g, e.values(), std::span<double>(values.data() + g.head_offset, g.head_count));
  return out;
}

double bce_loss(const ValuationVector& predicted, const ValuationVector& target, std::span<const std::size_t> mask) {
  if (mask.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t pos : mask) {
    const double y = target[pos];
    const double p = predicted[pos];
    total -= y * std::log(p + kBceEpsilon) + (1.0 - y) * std::log(1.0 - p + kBceEpsilon);
  }
  return total / static_cast<double>(mask.size());
}

// ------------------------------------------------------------------ program

struct WeightedProgram::StepCache {
  struct PerTarget {
    std::vector<std::vector<double>> f;             // per clause, head block
    std::vector<std::vector<std::int32_t>> argmax;  // per clause, head block
    std::vector<std::vector<double>> mix;           // per slot, head block
    std::vector<std::vector<double>> weights;       // per slot, per clause
  };
  std::vector<PerTarget> targets;
};

WeightedProgram::WeightedProgram(const Vocabulary& vocab, AtomIndex index, std::vector<PredicateId> targets,
                                 ProgramConfig config)
    : vocab_(&vocab), index_(std::move(index)), config_(config), target_ids_(std::move(targets)) {
  if (config_.slots < 1) throw std::invalid_argument("a program needs at least one slot per target");
  if (config_.steps < 0) throw std::invalid_argument("deduction steps must be non-negative");
  derivable_.assign(vocab.predicate_count(), false);
  for (PredicateId p : target_ids_) {
    const auto* block = index_.block(p);
    if (!block) throw logic::LogicError("target " + vocab.predicate(p).name + " is not indexed");
    Target t;
    t.predicate = p;
    t.offset = block->offset;
    t.count = block->count;
    t.adam = nn::AdamState(0, nn::AdamConfig{config_.learning_rate});
    targets_.push_back(std::move(t));
    derivable_[p] = true;
  }
}

const WeightedProgram::Target& WeightedProgram::target(PredicateId p) const {
  for (const auto& t : targets_)
    if (t.predicate == p) return t;
  throw logic::LogicError("predicate " + vocab_->predicate(p).name + " is not a target of this program");
}

WeightedProgram::Target& WeightedProgram::target(PredicateId p) {
  return const_cast<Target&>(static_cast<const WeightedProgram*>(this)->target(p));
}

void WeightedProgram::sync(const clauses::ClauseSet& set) {
  std::mt19937_64 rng(config_.seed ^ (0x9e3779b97f4a7c15ull * (noise_draws_ + 1)));
  std::normal_distribution<double> noise(0.0, 1.0);
  ++noise_draws_;
  const auto S = static_cast<std::size_t>(config_.slots);
  for (auto& t : targets_) {
    std::map<std::string, std::size_t> old;
    for (std::size_t j = 0; j < t.clauses.size(); ++j) old[t.clauses[j].key] = j;
    const std::size_t n_old = t.clauses.size();

    const auto& entries = set.clauses(t.predicate);
    const std::size_t n = entries.size();
    std::vector<GroundedClause> grounded;
    std::vector<double> phi(S * n, 0.0), m(S * n, 0.0), v(S * n, 0.0);
    grounded.reserve(n);
    for (std::size_t j = 0; j < n; ++j) {
      auto it = old.find(entries[j].key);
      if (it != old.end()) {
        grounded.push_back(std::move(t.clauses[it->second]));
        for (std::size_t s = 0; s < S; ++s) {
          phi[s * n + j] = t.phi[s * n_old + it->second];
          m[s * n + j] = t.adam.m[s * n_old + it->second];
          v[s * n + j] = t.adam.v[s * n_old + it->second];
        }
      } else {
        grounded.push_back(ground_clause(entries[j].clause, index_, *vocab_));
        for (std::size_t s = 0; s < S; ++s) phi[s * n + j] = config_.init_noise > 0 ? config_.init_noise * noise(rng) : 0.0;
      }
      auto& g = grounded.back();
      g.recursive = std::any_of(g.clause.body.begin(), g.clause.body.end(),
                                [&](const logic::Atom& a) { return derivable_[a.predicate]; });
    }
    t.clauses = std::move(grounded);
    t.phi = std::move(phi);
    t.adam.m = std::move(m);
    t.adam.v = std::move(v);
  }
}

std::size_t WeightedProgram::clause_count(PredicateId p) const { return target(p).clauses.size(); }

std::size_t WeightedProgram::clause_count() const {
  std::size_t n = 0;
  for (const auto& t : targets_) n += t.clauses.size();
  return n;
}

const std::vector<GroundedClause>& WeightedProgram::candidates(PredicateId p) const { return target(p).clauses; }

std::vector<double> WeightedProgram::slot_weights(const Target& t, int slot) const {
  const std::size_t n = t.clauses.size();
  return softmax(std::span<const double>(t.phi.data() + static_cast<std::size_t>(slot) * n, n));
}

std::vector<double> WeightedProgram::weights(PredicateId p, int slot) const {
  return slot_weights(target(p), slot);
}

std::vector<double> WeightedProgram::phi(PredicateId p, int slot) const {
  const auto& t = target(p);
  const std::size_t n = t.clauses.size();
  return {t.phi.begin() + static_cast<std::ptrdiff_t>(slot * n), t.phi.begin() + static_cast<std::ptrdiff_t>((slot + 1) * n)};
}

void WeightedProgram::set_phi(PredicateId p, int slot, std::span<const double> values) {
  auto& t = target(p);
  if (values.size() != t.clauses.size()) throw std::invalid_argument("phi length differs from the candidate count");
  std::copy(values.begin(), values.end(), t.phi.begin() + static_cast<std::ptrdiff_t>(slot * t.clauses.size()));
}

std::vector<double> WeightedProgram::parameters() const {
  std::vector<double> out;
  for (const auto& t : targets_) out.insert(out.end(), t.phi.begin(), t.phi.end());
  return out;
}

void WeightedProgram::set_parameters(std::span<const double> values) {
  std::size_t at = 0;
  for (auto& t : targets_) {
    if (at + t.phi.size() > values.size()) throw std::invalid_argument("too few parameter values");
    std::copy(values.begin() + static_cast<std::ptrdiff_t>(at),
              values.begin() + static_cast<std::ptrdiff_t>(at + t.phi.size()), t.phi.begin());
    at += t.phi.size();
  }
  if (at != values.size()) throw std::invalid_argument("too many parameter values");
}

void WeightedProgram::forward_step(const ValuationVector& e, const ValuationVector& e0, ValuationVector& out,
                                   StepCache* cache) const {
  out = e0;
  auto& values = out.mutable_values();
  const auto S = static_cast<std::size_t>(config_.slots);
  if (cache) cache->targets.assign(targets_.size(), {});
  std::vector<std::vector<double>> f;
  std::vector<double> acc, mix;
  for (std::size_t ti = 0; ti < targets_.size(); ++ti) {
    const auto& t = targets_[ti];
    const std::size_t n = t.clauses.size();
    if (n == 0) continue;
    f.assign(n, std::vector<double>(t.count));
    std::vector<std::vector<std::int32_t>> argmax;
    if (cache) argmax.assign(n, std::vector<std::int32_t>(t.count));
    for (std::size_t j = 0; j < n; ++j)
      clause_values(t.clauses[j], e.values(), f[j], cache ? std::span<std::int32_t>(argmax[j]) : std::span<std::int32_t>{});

    acc.assign(t.count, 0.0);
    StepCache::PerTarget* pc = cache ? &cache->targets[ti] : nullptr;
    for (std::size_t s = 0; s < S; ++s) {
      const auto w = slot_weights(t, static_cast<int>(s));
      mix.assign(t.count, 0.0);
      for (std::size_t j = 0; j < n; ++j) kernels::axpy(w[j], f[j], mix);
      kernels::prob_sum(acc, mix);
      if (pc) {
        pc->mix.push_back(mix);
        pc->weights.push_back(w);
      }
    }
    kernels::prob_sum(std::span<double>(values.data() + t.offset, t.count), acc);
    if (pc) {
      pc->f = std::move(f);
      pc->argmax = std::move(argmax);
    }
  }
}

ValuationVector WeightedProgram::step_deduce(const ValuationVector& e, const ValuationVector& e0) const {
  ValuationVector out;
  forward_step(e, e0, out, nullptr);
  return out;
}

DeductionTrace WeightedProgram::deduce(const ValuationVector& e0) const {
  if (e0.size() != index_.size()) throw std::invalid_argument("valuation does not conform to the atom index");
  DeductionTrace trace;
  trace.steps.push_back(e0);
  for (int t = 0; t < config_.steps; ++t) trace.steps.push_back(step_deduce(trace.steps.back(), e0));
  return trace;
}

double WeightedProgram::loss(std::span<const TrainingExample> batch) const {
  double total = 0.0;
  std::size_t used = 0;
  for (const auto& ex : batch) {
    if (ex.mask.empty()) continue;
    ++used;
    total += bce_loss(deduce(ex.e0).final(), ex.target, ex.mask);
  }
  return used ? total / static_cast<double>(used) : 0.0;
}

double WeightedProgram::gradient(std::span<const TrainingExample> batch, std::vector<double>& grad) const {
  const auto S = static_cast<std::size_t>(config_.slots);
  const auto T = static_cast<std::size_t>(config_.steps);
  std::vector<std::size_t> param_offset;
  std::size_t total_params = 0;
  for (const auto& t : targets_) {
    param_offset.push_back(total_params);
    total_params += t.phi.size();
  }
  grad.assign(total_params, 0.0);

  double total = 0.0;
  std::size_t used = 0;
  const std::size_t N = index_.size();
  std::vector<StepCache> caches(T);
  std::vector<ValuationVector> d(T + 1);
  std::vector<double> g, g_prev, ga, prefix, suffix;
  std::vector<std::vector<double>> gm(S);

  for (const auto& ex : batch) {
    if (ex.mask.empty()) continue;
    if (ex.e0.size() != N || ex.target.size() != N) throw std::invalid_argument("example does not conform to the index");
    ++used;
    d[0] = ex.e0;
    for (std::size_t t = 0; t < T; ++t) forward_step(d[t], ex.e0, d[t + 1], &caches[t]);
    total += bce_loss(d[T], ex.target, ex.mask);

    g.assign(N, 0.0);
    const double scale = 1.0 / static_cast<double>(ex.mask.size());
    for (std::size_t pos : ex.mask) {
      const double y = ex.target[pos], p = d[T][pos];
      g[pos] += scale * (-y / (p + kBceEpsilon) + (1.0 - y) / (1.0 - p + kBceEpsilon));
    }

    for (std::size_t step = T; step-- > 0;) {
      const auto& cache = caches[step];
      const auto& prev = d[step].values();
      g_prev.assign(N, 0.0);
      for (std::size_t ti = 0; ti < targets_.size(); ++ti) {
        const auto& t = targets_[ti];
        const std::size_t n = t.clauses.size();
        if (n == 0) continue;
        const auto& pc = cache.targets[ti];
        ga.assign(t.count, 0.0);
        bool any = false;
        for (std::size_t h = 0; h < t.count; ++h) {
          ga[h] = g[t.offset + h] * (1.0 - ex.e0[t.offset + h]);
          any = any || ga[h] != 0.0;
        }
        if (!any) continue;

        // d(acc)/d(mix_s) = prod over the other slots of (1 - mix).
        prefix.assign(S + 1, 1.0);
        suffix.assign(S + 1, 1.0);
        for (std::size_t s = 0; s < S; ++s) gm[s].assign(t.count, 0.0);
        for (std::size_t h = 0; h < t.count; ++h) {
          if (ga[h] == 0.0) continue;
          for (std::size_t s = 0; s < S; ++s) prefix[s + 1] = prefix[s] * (1.0 - pc.mix[s][h]);
          for (std::size_t s = S; s-- > 0;) suffix[s] = suffix[s + 1] * (1.0 - pc.mix[s][h]);
          for (std::size_t s = 0; s < S; ++s) gm[s][h] = ga[h] * prefix[s] * suffix[s + 1];
        }

        std::vector<double> gw(n);
        for (std::size_t s = 0; s < S; ++s) {
          const auto& w = pc.weights[s];
          for (std::size_t j = 0; j < n; ++j) gw[j] = kernels::dot(gm[s], pc.f[j]);
          const double inner = kernels::dot(gw, w);
          double* out = grad.data() + param_offset[ti] + s * n;
          for (std::size_t j = 0; j < n; ++j) out[j] += w[j] * (gw[j] - inner);
        }

        for (std::size_t j = 0; j < n; ++j) {
          const auto& gc = t.clauses[j];
          if (!gc.recursive) continue;
          for (std::size_t h = 0; h < t.count; ++h) {
            double gf = 0.0;
            for (std::size_t s = 0; s < S; ++s) gf += gm[s][h] * pc.weights[s][j];
            if (gf == 0.0) continue;
            const std::int32_t sub = pc.argmax[j][h];
            if (sub < 0) continue;
            const std::uint32_t* body = gc.body.data() + static_cast<std::size_t>(sub) * gc.body_len;
            for (std::size_t k = 0; k < gc.body_len; ++k) {
              double others = 1.0;
              for (std::size_t k2 = 0; k2 < gc.body_len; ++k2)
                if (k2 != k) others *= prev[body[k2]];
              g_prev[body[k]] += gf * others;
            }
          }
        }
      }
      g.swap(g_prev);
    }
  }
  if (used == 0) return 0.0;
  for (double& x : grad) x /= static_cast<double>(used);
  return total / static_cast<double>(used);
}

double WeightedProgram::train_step(std::span<const TrainingExample> batch) {
  const bool any = std::any_of(batch.begin(), batch.end(), [](const TrainingExample& e) { return !e.mask.empty(); });
  if (!any) return 0.0;
  std::vector<double> grad;
  const double l = gradient(batch, grad);
  if (!std::isfinite(l)) throw NumericalError("non-finite loss in differentiable deduction");
  std::size_t at = 0;
  for (auto& t : targets_) {
    const std::size_t n = t.phi.size();
    if (n > 0) nn::adam_step(t.phi, std::span<const double>(grad.data() + at, n), t.adam);
    at += n;
  }
  return l;
}

std::vector<Clause> WeightedProgram::extract_rules(double threshold) const {
  if (!(threshold > 0.0 && threshold < 1.0)) throw std::invalid_argument("threshold must lie in (0,1)");
  std::vector<std::pair<std::string, Clause>> found;
  std::vector<std::string> keys;
  for (const auto& t : targets_) {
    if (t.clauses.empty()) continue;
    for (int s = 0; s < config_.slots; ++s) {
      const auto w = slot_weights(t, s);
      const auto best = static_cast<std::size_t>(std::max_element(w.begin(), w.end()) - w.begin());
      if (w[best] < threshold) continue;
      const auto& g = t.clauses[best];
      if (std::find(keys.begin(), keys.end(), g.key) != keys.end()) continue;
      keys.push_back(g.key);
      found.emplace_back(logic::format_clause(g.clause, *vocab_), g.clause);
    }
  }
  std::sort(found.begin(), found.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<Clause> out;
  for (auto& [text, c] : found) out.push_back(std::move(c));
  return out;
}

double WeightedProgram::confidence(const ValuationVector& v, const GroundAtom& atom) const {
  const auto pos = index_.position(atom);
  return pos ? v[*pos] : 0.0;
}

nlohmann::json WeightedProgram::parameters_json() const {
  nlohmann::json targets = nlohmann::json::array();
  const auto S = static_cast<std::size_t>(config_.slots);
  for (const auto& t : targets_) {
    nlohmann::json clauses = nlohmann::json::array();
    const std::size_t n = t.clauses.size();
    for (std::size_t j = 0; j < n; ++j) {
      std::vector<double> phi, m, v;
      for (std::size_t s = 0; s < S; ++s) {
        phi.push_back(t.phi[s * n + j]);
        m.push_back(t.adam.m[s * n + j]);
        v.push_back(t.adam.v[s * n + j]);
      }
      clauses.push_back({{"clause", logic::format_clause(t.clauses[j].clause, *vocab_)}, {"phi", phi}, {"m", m}, {"v", v}});
    }
    targets.push_back({{"predicate", vocab_->predicate(t.predicate).name}, {"adam_step", t.adam.step}, {"clauses", clauses}});
  }
  return {{"slots", config_.slots}, {"steps", config_.steps}, {"targets", targets}};
}

std::size_t WeightedProgram::load_parameters_json(const nlohmann::json& j) {
  if (j.at("slots").get<int>() != config_.slots) throw std::invalid_argument("stored program has a different slot count");
  const auto S = static_cast<std::size_t>(config_.slots);
  std::size_t matched = 0;
  for (const auto& jt : j.at("targets")) {
    const auto pid = vocab_->find_predicate(jt.at("predicate").get<std::string>());
    if (!pid || !derivable_[*pid]) continue;
    auto& t = target(*pid);
    t.adam.step = jt.at("adam_step").get<std::int64_t>();
    const std::size_t n = t.clauses.size();
    for (const auto& jc : jt.at("clauses")) {
      const auto key = logic::canonical_key(logic::parse_clause(jc.at("clause").get<std::string>(), *vocab_));
      auto it = std::find_if(t.clauses.begin(), t.clauses.end(), [&](const GroundedClause& g) { return g.key == key; });
      if (it == t.clauses.end()) continue;
      const auto col = static_cast<std::size_t>(it - t.clauses.begin());
      const auto phi = jc.at("phi").get<std::vector<double>>();
      const auto m = jc.at("m").get<std::vector<double>>();
      const auto v = jc.at("v").get<std::vector<double>>();
      for (std::size_t s = 0; s < S; ++s) {
        t.phi[s * n + col] = phi.at(s);
        t.adam.m[s * n + col] = m.at(s);
        t.adam.v[s * n + col] = v.at(s);
      }
      ++matched;
    }
  }
  return matched;
}

}  // namespace symhrl::dilp
