#pragma once

// Gaussian-norm bounds for polynomials with bounded coefficients:
//   ||f||_{g,beta} <= A0 C_g(n) / beta^n
// and, when every monomial admits an (M, tk) relation, the sharper A0 C_g(n) M² / ((1+tk²) beta^n).

#include <cmath>
#include <numbers>
#include <optional>
#include <vector>

#include "json.hpp"
#include "nlsgibbs/gibbs.hpp"
#include "nlsgibbs/modulated_polynomial.hpp"
#include "nlsgibbs/sparse_polynomial.hpp"

namespace nlsgibbs {

/// Σ_{l ∈ Z} 1/(1+l²) = π coth π.
inline double lattice_sum() { return std::numbers::pi / std::tanh(std::numbers::pi); }

/// C_g(n) = 2^{n+2} [(2n)!]^{3/2} (2n-1)² (π coth π)^n.
inline double gaussian_norm_constant(int n) {
  if (n < 1) throw InvalidArgument("gaussian_norm_constant: n must be positive");
  const double fact = std::tgamma(2.0 * n + 1.0);
  return std::pow(2.0, n + 2) * std::pow(fact, 1.5) * (2.0 * n - 1.0) * (2.0 * n - 1.0) * std::pow(lattice_sum(), n);
}

struct GaussianNormReport {
  Estimate norm;
  double a0 = 0.0;
  int half_degree = 0;
  double bound = 0.0;
  std::optional<double> admissible_bound;
  bool pass = false;

  nlohmann::json to_json() const {
    nlohmann::json j = {{"norm", norm.to_json()}, {"A0", a0}, {"n", half_degree}, {"bound", bound}, {"pass", pass}};
    if (admissible_bound) j["admissible_bound"] = *admissible_bound;
    return j;
  }
};

namespace detail {

template <class Poly>
GaussianNormReport gaussian_norm_report(const Poly& f, double a0, const SamplerConfig& config) {
  SamplerConfig c = config;
  c.method = SamplingMethod::GaussianOnly;
  c.params.n = std::max(c.params.n, f.truncation());
  const auto samples = draw_samples(c);
  GaussianNormReport r;
  r.a0 = a0;
  r.half_degree = f.degree() / 2;
  r.norm = estimate_norm([&](const FourierState& s) { return f.evaluate(s); }, samples);
  const double beta = c.params.beta;
  r.bound = a0 * gaussian_norm_constant(r.half_degree) / std::pow(beta, r.half_degree);
  r.pass = r.norm.mean <= r.bound;
  if (const auto& adm = f.admissibility()) {
    r.admissible_bound = r.bound * double(adm->m) * adm->m / (1.0 + double(adm->tk) * adm->tk);
    r.pass = r.pass && r.norm.mean <= *r.admissible_bound;
  }
  return r;
}

}  // namespace detail

/// Monte Carlo ||f||_{g,beta} against the bounds, with A0 = |||f|||.
inline GaussianNormReport gaussian_norm_check(const SparsePolynomial& f, const SamplerConfig& config) {
  return detail::gaussian_norm_report(f, sup_norm(f), config);
}

/// Same with A0 the recorded zeroth-order coefficient bound.
inline GaussianNormReport gaussian_norm_check(const ModulatedPolynomial& f, const SamplerConfig& config) {
  return detail::gaussian_norm_report(f, f.derivative_bounds(0).at(0), config);
}

}  // namespace nlsgibbs
