#include "symhrl/neural.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "symhrl/kernels.hpp"

namespace symhrl::nn {

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& s) {
  if (params.size() != grads.size() || s.m.size() != params.size())
    throw ShapeError("adam_step: parameter, gradient and moment sizes differ");
  ++s.step;
  const auto& c = s.config;
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(s.step));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(s.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    s.m[i] = c.beta1 * s.m[i] + (1.0 - c.beta1) * grads[i];
    s.v[i] = c.beta2 * s.v[i] + (1.0 - c.beta2) * grads[i] * grads[i];
    const double mhat = s.m[i] / bc1;
    const double vhat = s.v[i] / bc2;
    params[i] -= c.lr * mhat / (std::sqrt(vhat) + c.eps);
  }
}

double clip_grad_norm(std::span<double> grads, double max_norm) {
  double sq = 0.0;
  for (double g : grads) sq += g * g;
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    const double scale = max_norm / norm;
    for (double& g : grads) g *= scale;
  }
  return norm;
}

Mlp::Mlp(std::vector<int> sizes, OutputActivation output, std::uint64_t seed)
    : sizes_(std::move(sizes)), output_(output) {
  if (sizes_.size() < 2) throw ShapeError("an MLP needs at least an input and an output size");
  for (int s : sizes_)
    if (s <= 0) throw ShapeError("layer sizes must be positive");
  layout();
  std::mt19937_64 rng(seed);
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    const double fan_in = sizes_[l], fan_out = sizes_[l + 1];
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    std::uniform_real_distribution<double> u(-limit, limit);
    const std::size_t n = static_cast<std::size_t>(sizes_[l] * sizes_[l + 1]);
    for (std::size_t i = 0; i < n; ++i) params_[weight_offset(l) + i] = u(rng);
  }
}

void Mlp::layout() {
  offsets_.clear();
  std::size_t total = 0;
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    offsets_.push_back(total);
    total += static_cast<std::size_t>(sizes_[l] * sizes_[l + 1] + sizes_[l + 1]);
  }
  params_.assign(total, 0.0);
}

std::vector<double> Mlp::forward(std::span<const double> input) const {
  Cache cache;
  return forward(input, cache);
}

std::vector<double> Mlp::forward(std::span<const double> input, Cache& cache) const {
  if (static_cast<int>(input.size()) != input_size())
    throw ShapeError("MLP input has " + std::to_string(input.size()) + " values, expected " +
                     std::to_string(input_size()));
  const std::size_t layers = sizes_.size() - 1;
  cache.activations.resize(layers + 1);
  cache.activations[0].assign(input.begin(), input.end());
  for (std::size_t l = 0; l < layers; ++l) {
    const auto in = static_cast<std::size_t>(sizes_[l]);
    const auto out = static_cast<std::size_t>(sizes_[l + 1]);
    auto& y = cache.activations[l + 1];
    y.assign(out, 0.0);
    std::span<const double> w(params_.data() + weight_offset(l), in * out);
    std::span<const double> b(params_.data() + bias_offset(l), out);
    kernels::gemv(w, cache.activations[l], b, y);
    if (l + 1 < layers) {
      for (double& v : y) v = std::max(0.0, v);
    } else if (output_ == OutputActivation::Softmax) {
      const double mx = *std::max_element(y.begin(), y.end());
      double sum = 0.0;
      for (double& v : y) sum += (v = std::exp(v - mx));
      for (double& v : y) v /= sum;
    }
  }
  return cache.activations.back();
}

std::vector<double> Mlp::backward(const Cache& cache, std::span<const double> upstream,
                                  std::span<double> grads) const {
  const std::size_t layers = sizes_.size() - 1;
  if (cache.activations.size() != layers + 1) throw ShapeError("backward called without a matching forward cache");
  if (static_cast<int>(upstream.size()) != output_size()) throw ShapeError("upstream gradient size mismatch");
  if (grads.size() != params_.size()) throw ShapeError("gradient buffer size mismatch");

  std::vector<double> g(upstream.begin(), upstream.end());
  if (output_ == OutputActivation::Softmax) {
    const auto& y = cache.activations.back();
    const double inner = kernels::dot(g, y);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = y[i] * (g[i] - inner);
  }
  for (std::size_t l = layers; l-- > 0;) {
    const auto in = static_cast<std::size_t>(sizes_[l]);
    const auto out = static_cast<std::size_t>(sizes_[l + 1]);
    if (l + 1 < layers) {
      const auto& y = cache.activations[l + 1];
      for (std::size_t i = 0; i < out; ++i)
        if (y[i] <= 0.0) g[i] = 0.0;
    }
    kernels::outer_acc(g, cache.activations[l], grads.subspan(weight_offset(l), in * out));
    kernels::axpy(1.0, g, grads.subspan(bias_offset(l), out));
    std::vector<double> prev(in, 0.0);
    kernels::gemv_t_acc(std::span<const double>(params_.data() + weight_offset(l), in * out), g, prev);
    g = std::move(prev);
  }
  return g;
}

bool Mlp::finite() const {
  return std::all_of(params_.begin(), params_.end(), [](double v) { return std::isfinite(v); });
}

nlohmann::json Mlp::to_json() const {
  return {{"sizes", sizes_},
          {"output", output_ == OutputActivation::Softmax ? "softmax" : "linear"},
          {"params", params_}};
}

Mlp Mlp::from_json(const nlohmann::json& j) {
  Mlp m;
  m.sizes_ = j.at("sizes").get<std::vector<int>>();
  m.output_ = j.at("output").get<std::string>() == "softmax" ? OutputActivation::Softmax : OutputActivation::Linear;
  m.layout();
  auto p = j.at("params").get<std::vector<double>>();
  if (p.size() != m.params_.size()) throw ShapeError("stored MLP parameters do not match its sizes");
  m.params_ = std::move(p);
  return m;
}

nlohmann::json adam_to_json(const AdamState& s) {
  return {{"lr", s.config.lr}, {"beta1", s.config.beta1}, {"beta2", s.config.beta2},
          {"eps", s.config.eps}, {"step", s.step},        {"m", s.m},
          {"v", s.v}};
}

AdamState adam_from_json(const nlohmann::json& j) {
  AdamState s;
  s.config = {j.at("lr").get<double>(), j.at("beta1").get<double>(), j.at("beta2").get<double>(),
              j.at("eps").get<double>()};
  s.step = j.at("step").get<std::int64_t>();
  s.m = j.at("m").get<std::vector<double>>();
  s.v = j.at("v").get<std::vector<double>>();
  return s;
}

}  // namespace symhrl::nn
