#pragma once
// Small dense networks with hand-written backprop, and Adam.

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include <json.hpp>

namespace symhrl::nn {

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct AdamConfig {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  AdamConfig config;
  std::vector<double> m;
  std::vector<double> v;
  std::int64_t step = 0;

  AdamState() = default;
  AdamState(std::size_t n, AdamConfig cfg) : config(cfg), m(n, 0.0), v(n, 0.0) {}
};

// One bias-corrected Adam update; params -= lr * mhat / (sqrt(vhat) + eps).
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state);

// Rescales grads in place so their global L2 norm is at most max_norm; returns the norm before.
double clip_grad_norm(std::span<double> grads, double max_norm);

enum class OutputActivation { Linear, Softmax };

class Mlp {
 public:
  struct Cache {
    // activations[0] is the input, activations[l] the output of layer l
    // (after ReLU for hidden layers, after the output activation for the last).
    std::vector<std::vector<double>> activations;
  };

  Mlp() = default;
  // sizes = {in, hidden..., out}; Xavier-uniform weights, zero biases.
  Mlp(std::vector<int> sizes, OutputActivation output, std::uint64_t seed);

  std::vector<double> forward(std::span<const double> input) const;
  std::vector<double> forward(std::span<const double> input, Cache& cache) const;

  // Accumulates d(loss)/d(params) into `grads` given d(loss)/d(output) and
  // returns d(loss)/d(input).
  std::vector<double> backward(const Cache& cache, std::span<const double> upstream,
                               std::span<double> grads) const;

  std::span<double> parameters() { return params_; }
  std::span<const double> parameters() const { return params_; }
  std::size_t parameter_count() const { return params_.size(); }
  const std::vector<int>& sizes() const { return sizes_; }
  int input_size() const { return sizes_.empty() ? 0 : sizes_.front(); }
  int output_size() const { return sizes_.empty() ? 0 : sizes_.back(); }
  OutputActivation output_activation() const { return output_; }
  bool finite() const;

  nlohmann::json to_json() const;
  static Mlp from_json(const nlohmann::json& j);

 private:
  std::size_t weight_offset(std::size_t layer) const { return offsets_[layer]; }
  std::size_t bias_offset(std::size_t layer) const {
    return offsets_[layer] + static_cast<std::size_t>(sizes_[layer] * sizes_[layer + 1]);
  }
  void layout();

  std::vector<int> sizes_;
  OutputActivation output_ = OutputActivation::Linear;
  std::vector<double> params_;
  std::vector<std::size_t> offsets_;
};

nlohmann::json adam_to_json(const AdamState& s);
AdamState adam_from_json(const nlohmann::json& j);

}  // namespace symhrl::nn
