#include "symhrl/kernels.hpp"

#include <cassert>
#include <cstdlib>
#include <string>

namespace symhrl::kernels {

namespace {

Isa detect() {
  if (const char* env = std::getenv("SYMHRL_SIMD"); env && std::string(env) == "scalar")
    return Isa::Scalar;
  return avx2_available() ? Isa::Avx2 : Isa::Scalar;
}

Isa& current() {
  static Isa isa = detect();
  return isa;
}

}  // namespace

bool avx2_available() {
#if defined(__x86_64__) || defined(_M_X64)
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Isa active_isa() { return current(); }

std::string_view isa_name(Isa isa) { return isa == Isa::Avx2 ? "avx2" : "scalar"; }

void force_isa(Isa isa) {
  if (isa == Isa::Avx2 && !avx2_available()) isa = Isa::Scalar;
  current() = isa;
}

double dot(std::span<const double> a, std::span<const double> b) {
  assert(a.size() == b.size());
  return current() == Isa::Avx2 ? avx2::dot(a.data(), b.data(), a.size())
                                : scalar::dot(a.data(), b.data(), a.size());
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  assert(x.size() == y.size());
  if (current() == Isa::Avx2)
    avx2::axpy(alpha, x.data(), y.data(), x.size());
  else
    scalar::axpy(alpha, x.data(), y.data(), x.size());
}

void prob_sum(std::span<double> acc, std::span<const double> x) {
  assert(acc.size() == x.size());
  if (current() == Isa::Avx2)
    avx2::prob_sum(acc.data(), x.data(), x.size());
  else
    scalar::prob_sum(acc.data(), x.data(), x.size());
}

void gemv(std::span<const double> w, std::span<const double> x, std::span<const double> b,
          std::span<double> y) {
  assert(w.size() == x.size() * y.size() && b.size() == y.size());
  if (current() == Isa::Avx2)
    avx2::gemv(w.data(), x.data(), b.data(), y.data(), y.size(), x.size());
  else
    scalar::gemv(w.data(), x.data(), b.data(), y.data(), y.size(), x.size());
}

void gemv_t_acc(std::span<const double> w, std::span<const double> g, std::span<double> out) {
  assert(w.size() == g.size() * out.size());
  if (current() == Isa::Avx2)
    avx2::gemv_t_acc(w.data(), g.data(), out.data(), g.size(), out.size());
  else
    scalar::gemv_t_acc(w.data(), g.data(), out.data(), g.size(), out.size());
}

void outer_acc(std::span<const double> g, std::span<const double> x, std::span<double> w) {
  assert(w.size() == g.size() * x.size());
  if (current() == Isa::Avx2)
    avx2::outer_acc(g.data(), x.data(), w.data(), g.size(), x.size());
  else
    scalar::outer_acc(g.data(), x.data(), w.data(), g.size(), x.size());
}

}  // namespace symhrl::kernels
