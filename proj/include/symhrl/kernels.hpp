#pragma once
// Dense vector kernels used by the deduction engine and the MLP layers.
//
// Every kernel has a scalar reference in kernels::scalar and an AVX2/FMA
// variant in kernels::avx2. The free functions in kernels:: dispatch once per
// process to the best variant the CPU supports. Set SYMHRL_SIMD=scalar in the
// environment to force the reference path.

#include <cstddef>
#include <span>
#include <string_view>

namespace symhrl::kernels {

enum class Isa { Scalar, Avx2 };

Isa active_isa();
std::string_view isa_name(Isa isa);
bool avx2_available();

// Overrides the dispatch (tests use this to compare variants).
void force_isa(Isa isa);

double dot(std::span<const double> a, std::span<const double> b);
// y += alpha * x
void axpy(double alpha, std::span<const double> x, std::span<double> y);
// acc = acc + x - acc * x  (probabilistic sum, elementwise)
void prob_sum(std::span<double> acc, std::span<const double> x);
// y = W x + b, W is rows x cols row-major
void gemv(std::span<const double> w, std::span<const double> x, std::span<const double> b,
          std::span<double> y);
// x^T W accumulated into out: out[c] += sum_r g[r] * W[r, c]
void gemv_t_acc(std::span<const double> w, std::span<const double> g, std::span<double> out);
// W[r, c] += g[r] * x[c]
void outer_acc(std::span<const double> g, std::span<const double> x, std::span<double> w);

namespace scalar {
double dot(const double* a, const double* b, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
void prob_sum(double* acc, const double* x, std::size_t n);
void gemv(const double* w, const double* x, const double* b, double* y, std::size_t rows,
          std::size_t cols);
void gemv_t_acc(const double* w, const double* g, double* out, std::size_t rows, std::size_t cols);
void outer_acc(const double* g, const double* x, double* w, std::size_t rows, std::size_t cols);
}  // namespace scalar

namespace avx2 {
double dot(const double* a, const double* b, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
void prob_sum(double* acc, const double* x, std::size_t n);
void gemv(const double* w, const double* x, const double* b, double* y, std::size_t rows,
          std::size_t cols);
void gemv_t_acc(const double* w, const double* g, double* out, std::size_t rows, std::size_t cols);
void outer_acc(const double* g, const double* x, double* w, std::size_t rows, std::size_t cols);
}  // namespace avx2

}  // namespace symhrl::kernels
