#pragma once

#include <complex>
#include <cstdint>
#include <random>

#include "nlsgibbs/fourier_state.hpp"

namespace nlsgibbs::testing {

/// Coefficients uniform in the complex square of half-width `amplitude`.
inline FourierState random_state(int n, std::uint64_t seed, double amplitude = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-amplitude, amplitude);
  FourierState s(n);
  for (int k = -n; k <= n; ++k) s.set(k, Complex(u(rng), u(rng)));
  return s;
}

inline ModelParams params_q2(double c2 = 1.0, double beta = 16.0, int n = 8) {
  ModelParams p;
  p.c = {c2};
  p.beta = beta;
  p.n = n;
  return p;
}

inline ModelParams params_q3(double c2 = 1.0, double c3 = 0.5, double beta = 16.0, int n = 8) {
  ModelParams p;
  p.c = {c2, c3};
  p.beta = beta;
  p.n = n;
  return p;
}

}  // namespace nlsgibbs::testing
