#pragma once

// Truncated Fourier representation of a field on the 2π-torus and the NLS
// Hamiltonian H = H2 + P evaluated on it.
//
// Conventions:
//   psi_k  = (2π)^{-1/2} ∫ psi(x) e^{-ikx} dx,   psi(x) = (2π)^{-1/2} Σ_k psi_k e^{ikx}
//   H2     = ½ Σ_k k² |psi_k|²
//   P      = Σ_{j=2}^{q} (c_j / 2j) ∫ |psi|^{2j} dx
// The vector field of H is i dpsi_k/dt = k² psi_k + [f(|psi|²) psi]_k with
// f(x) = Σ_j c_j x^{j-1}; this is 2 ∂H/∂conj(psi_k) and is what gradient_H returns.

#include <algorithm>
#include <bit>
#include <cmath>
#include <complex>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nlsgibbs/error.hpp"
#include "nlsgibbs/fft.hpp"

namespace nlsgibbs {

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Polynomial nonlinearity F(x) = Σ_{j=2}^{q} c_j x^j, inverse temperature and truncation.
struct ModelParams {
  std::vector<double> c;  // c[0] = c_2, c[1] = c_3, ...
  double beta = 1.0;
  int n = 8;

  int q() const { return static_cast<int>(c.size()) + 1; }

  double coefficient(int j) const {
    if (j < 2 || j > q()) return 0.0;
    return c[static_cast<std::size_t>(j - 2)];
  }

  double F(double x) const {
    double s = 0.0;
    for (int j = 2; j <= q(); ++j) s += coefficient(j) * std::pow(x, j);
    return s;
  }

  /// f(x) = Σ c_j x^{j-1}; the nonlinear frequency of a grid point with |psi|² = x.
  double nonlinear_frequency(double x) const {
    double s = 0.0, p = x;
    for (int j = 2; j <= q(); ++j, p *= x) s += coefficient(j) * p;
    return s;
  }

  bool linear() const {
    return std::all_of(c.begin(), c.end(), [](double v) { return v == 0.0; });
  }

  /// Checks c_2 != 0, beta > 0, N >= 0 and F >= 0 on a log grid of [0, 1e3].
  void validate(bool allow_linear = false) const {
    if (c.empty()) throw InvalidArgument("ModelParams: need at least c_2");
    if (!allow_linear && c[0] == 0.0) throw InvalidArgument("ModelParams: c_2 must be nonzero");
    if (!(beta > 0.0)) throw InvalidArgument("ModelParams: beta must be positive");
    if (n < 0) throw InvalidArgument("ModelParams: truncation must be nonnegative");
    for (int i = 0; i <= 400; ++i) {
      const double x = std::pow(10.0, -6.0 + 9.0 * i / 400.0);
      if (F(x) < 0.0) {
        throw InvalidArgument("ModelParams: F(x) < 0 at x = " + std::to_string(x) +
                              " (nonlinearity must be defocusing)");
      }
    }
  }
};

/// Smallest power of two >= 2qN+1: exact quadrature for every integrand met by H and its gradient.
inline int grid_size_for(int q, int n) {
  const unsigned need = static_cast<unsigned>(2 * q * n + 1);
  return static_cast<int>(std::bit_ceil(std::max(need, 2u)));
}

/// Fourier coefficients psi_k for |k| <= N.
class FourierState {
 public:
  FourierState() = default;
  explicit FourierState(int n) : n_(n), coeffs_(static_cast<std::size_t>(2 * n + 1)) {
    if (n < 0) throw InvalidArgument("FourierState: negative truncation");
  }
  FourierState(int n, std::vector<Complex> coeffs) : n_(n), coeffs_(std::move(coeffs)) {
    if (n < 0 || coeffs_.size() != static_cast<std::size_t>(2 * n + 1)) {
      throw InvalidArgument("FourierState: coefficient vector must have 2N+1 entries");
    }
  }

  int n() const { return n_; }
  std::size_t size() const { return coeffs_.size(); }
  bool contains(int k) const { return k >= -n_ && k <= n_; }

  Complex operator[](int k) const { return coeffs_[index(k)]; }
  Complex at(int k) const {
    if (!contains(k)) throw InvalidMode("mode " + std::to_string(k) + " outside |k| <= " + std::to_string(n_));
    return coeffs_[index(k)];
  }
  void set(int k, Complex v) {
    if (!contains(k)) throw InvalidMode("mode " + std::to_string(k) + " outside |k| <= " + std::to_string(n_));
    coeffs_[index(k)] = v;
    grid_.reset();
  }

  std::span<const Complex> coeffs() const { return coeffs_; }
  /// Mutable access invalidates the grid cache.
  std::span<Complex> mutable_coeffs() {
    grid_.reset();
    return coeffs_;
  }

  /// Restriction to |k| <= m (m may exceed n; missing modes are zero).
  FourierState restricted(int m) const {
    FourierState out(m);
    for (int k = -std::min(m, n_); k <= std::min(m, n_); ++k) out.coeffs_[out.index(k)] = (*this)[k];
    return out;
  }

  FourierState scaled(Complex factor) const {
    FourierState out = *this;
    out.grid_.reset();
    for (auto& v : out.coeffs_) v *= factor;
    return out;
  }

  /// psi(x_m) on M equispaced points, cached until the next mutation.
  const std::vector<Complex>& grid(int m) const;

 private:
  std::size_t index(int k) const { return static_cast<std::size_t>(k + n_); }

  int n_ = 0;
  std::vector<Complex> coeffs_;
  struct GridCache {
    int m;
    std::vector<Complex> values;
  };
  mutable std::optional<GridCache> grid_;
};

/// Maps between truncated coefficients and grid values on M points.
class SpectralGrid {
 public:
  explicit SpectralGrid(int m) : fft_(m), spectrum_(static_cast<std::size_t>(m)), values_(static_cast<std::size_t>(m)) {}

  int size() const { return fft_.size(); }

  /// values[m] = psi(2π m / M).
  void to_grid(std::span<const Complex> coeffs, int n, std::span<Complex> values) {
    const int m = size();
    if (2 * n + 1 > m) throw InsufficientResolution(m, 2 * n + 1);
    std::fill(spectrum_.begin(), spectrum_.end(), Complex{});
    for (int k = -n; k <= n; ++k) spectrum_[wrap(k)] = coeffs[static_cast<std::size_t>(k + n)];
    fft_.backward(spectrum_, values);
    const double s = 1.0 / std::sqrt(kTwoPi);
    for (auto& v : values) v *= s;
  }

  /// Fourier coefficients |k| <= n of the grid function (exact for trigonometric degree < M - n).
  void from_grid(std::span<const Complex> values, int n, std::span<Complex> coeffs) {
    fft_.forward(values, spectrum_);
    const double s = std::sqrt(kTwoPi) / size();
    for (int k = -n; k <= n; ++k) coeffs[static_cast<std::size_t>(k + n)] = spectrum_[wrap(k)] * s;
  }

  std::vector<Complex>& scratch() { return values_; }

 private:
  std::size_t wrap(int k) const {
    const int m = size();
    return static_cast<std::size_t>(((k % m) + m) % m);
  }
  Fft fft_;
  std::vector<Complex> spectrum_;
  std::vector<Complex> values_;
};

inline const std::vector<Complex>& FourierState::grid(int m) const {
  if (!grid_ || grid_->m != m) {
    GridCache cache{m, std::vector<Complex>(static_cast<std::size_t>(m))};
    SpectralGrid g(m);
    g.to_grid(coeffs_, n_, cache.values);
    grid_ = std::move(cache);
  }
  return grid_->values;
}

/// sqrt(Σ (1+k²)^{s1} |psi_k|²).
inline double hs_norm(const FourierState& state, double s1) {
  double sum = 0.0;
  for (int k = -state.n(); k <= state.n(); ++k) {
    sum += std::pow(1.0 + double(k) * k, s1) * std::norm(state[k]);
  }
  return std::sqrt(sum);
}

/// I_k = |psi_k|².
inline double action(const FourierState& state, int k) { return std::norm(state.at(k)); }

inline double l2_norm_squared(const FourierState& state) {
  double s = 0.0;
  for (const auto& v : state.coeffs()) s += std::norm(v);
  return s;
}

/// Σ k |psi_k|².
inline double momentum(const FourierState& state) {
  double s = 0.0;
  for (int k = -state.n(); k <= state.n(); ++k) s += k * std::norm(state[k]);
  return s;
}

inline double evaluate_H2(const FourierState& state) {
  double s = 0.0;
  for (int k = -state.n(); k <= state.n(); ++k) s += 0.5 * double(k) * k * std::norm(state[k]);
  return s;
}

/// P by trapezoidal quadrature on the grid. Throws if M < 2qN+1.
inline double evaluate_P(const FourierState& state, const ModelParams& params, std::optional<int> grid_points = {}) {
  const int need = 2 * params.q() * state.n() + 1;
  const int m = grid_points.value_or(grid_size_for(params.q(), state.n()));
  if (m < need) throw InsufficientResolution(m, need);
  const auto& values = state.grid(m);
  double total = 0.0;
  for (const auto& v : values) {
    const double x = std::norm(v);
    double p = x * x, s = 0.0;
    for (int j = 2; j <= params.q(); ++j, p *= x) s += params.coefficient(j) / (2.0 * j) * p;
    total += s;
  }
  return total * kTwoPi / m;
}

/// P from Fourier convolution powers: ∫|psi|^{2j} = (2π)^{1-j} Σ_k |(psi * ... * psi)_k|².
inline double evaluate_P_fourier(const FourierState& state, const ModelParams& params) {
  const int n = state.n();
  std::vector<Complex> power(state.coeffs().begin(), state.coeffs().end());  // psi^{*1}, support |k| <= n
  int support = n;
  double total = 0.0;
  for (int j = 2; j <= params.q(); ++j) {
    const int next_support = support + n;
    std::vector<Complex> next(static_cast<std::size_t>(2 * next_support + 1));
    for (int a = -support; a <= support; ++a) {
      const Complex pa = power[static_cast<std::size_t>(a + support)];
      if (pa == Complex{}) continue;
      for (int b = -n; b <= n; ++b) next[static_cast<std::size_t>(a + b + next_support)] += pa * state[b];
    }
    power = std::move(next);
    support = next_support;
    if (params.coefficient(j) == 0.0) continue;
    double s = 0.0;
    for (const auto& v : power) s += std::norm(v);
    total += params.coefficient(j) / (2.0 * j) * std::pow(kTwoPi, 1 - j) * s;
  }
  return total;
}

inline double evaluate_H(const FourierState& state, const ModelParams& params) {
  return evaluate_H2(state) + evaluate_P(state, params);
}

/// G_k = k² psi_k + [f(|psi|²) psi]_k, so that i dpsi_k/dt = G_k and dH = Re Σ G_k conj(dpsi_k).
inline std::vector<Complex> gradient_H(const FourierState& state, const ModelParams& params) {
  const int n = state.n();
  std::vector<Complex> g(state.size());
  for (int k = -n; k <= n; ++k) g[static_cast<std::size_t>(k + n)] = double(k) * k * state[k];
  if (params.linear()) return g;
  const int m = grid_size_for(params.q(), n);
  SpectralGrid grid(m);
  std::vector<Complex> values(state.grid(m));
  for (auto& v : values) v *= params.nonlinear_frequency(std::norm(v));
  std::vector<Complex> nl(state.size());
  grid.from_grid(values, n, nl);
  for (std::size_t i = 0; i < g.size(); ++i) g[i] += nl[i];
  return g;
}

}  // namespace nlsgibbs
