#pragma once

// Flat, cache-friendly layout of a polynomial's monomials for repeated evaluation.

#include <array>
#include <complex>
#include <cstdint>
#include <vector>

#include "nlsgibbs/fourier_state.hpp"
#include "nlsgibbs/monomial.hpp"

namespace nlsgibbs::detail {

struct CompiledTerms {
  int half = 0;
  std::vector<std::int16_t> index;  // 2*half slots per term, holo then anti, as k + N offsets
  std::vector<Complex> coefficient;
  std::vector<int> group;           // coefficient-function group per term (modulated only)

  std::size_t size() const { return coefficient.size(); }

  void push(const Monomial& m, Complex c, int offset, int g = -1) {
    half = m.half_degree();
    for (int i = 0; i < half; ++i) index.push_back(static_cast<std::int16_t>(m.holo(i) + offset));
    for (int i = 0; i < half; ++i) index.push_back(static_cast<std::int16_t>(m.anti(i) + offset));
    coefficient.push_back(c);
    group.push_back(g);
  }
};

/// psi and conj(psi) indexed by k + N.
struct StateValues {
  std::vector<Complex> psi, conj_psi;
  explicit StateValues(const FourierState& s) : psi(s.coeffs().begin(), s.coeffs().end()), conj_psi(psi.size()) {
    for (std::size_t i = 0; i < psi.size(); ++i) conj_psi[i] = std::conj(psi[i]);
  }
};

inline Complex monomial_value(const CompiledTerms& t, std::size_t term, const StateValues& v) {
  if (t.half == 0) return 1.0;
  const std::int16_t* idx = t.index.data() + term * static_cast<std::size_t>(2 * t.half);
  Complex p = v.psi[static_cast<std::size_t>(idx[0])];
  for (int i = 1; i < t.half; ++i) p *= v.psi[static_cast<std::size_t>(idx[i])];
  for (int i = 0; i < t.half; ++i) p *= v.conj_psi[static_cast<std::size_t>(idx[t.half + i])];
  return p;
}

/// Adds weight * ∂(monomial)/∂psi and ∂/∂conj(psi) to the gradient arrays; returns the monomial value.
inline Complex monomial_gradient(const CompiledTerms& t, std::size_t term, const StateValues& v, Complex weight,
                                 std::vector<Complex>& d_psi, std::vector<Complex>& d_conj) {
  const int len = 2 * t.half;
  const std::int16_t* idx = t.index.data() + term * static_cast<std::size_t>(len);
  std::array<Complex, 2 * Monomial::kMaxHalf> val{};
  std::array<Complex, 2 * Monomial::kMaxHalf + 1> prefix{};
  for (int i = 0; i < t.half; ++i) val[static_cast<std::size_t>(i)] = v.psi[static_cast<std::size_t>(idx[i])];
  for (int i = t.half; i < len; ++i) val[static_cast<std::size_t>(i)] = v.conj_psi[static_cast<std::size_t>(idx[i])];
  prefix[0] = 1.0;
  for (int i = 0; i < len; ++i) prefix[static_cast<std::size_t>(i + 1)] = prefix[static_cast<std::size_t>(i)] * val[static_cast<std::size_t>(i)];
  if (weight != Complex{}) {
    Complex suffix = weight;
    for (int i = len - 1; i >= 0; --i) {
      const Complex partial = prefix[static_cast<std::size_t>(i)] * suffix;
      if (i < t.half) {
        d_psi[static_cast<std::size_t>(idx[i])] += partial;
      } else {
        d_conj[static_cast<std::size_t>(idx[i])] += partial;
      }
      suffix *= val[static_cast<std::size_t>(i)];
    }
  }
  return prefix[static_cast<std::size_t>(len)];
}

}  // namespace nlsgibbs::detail
