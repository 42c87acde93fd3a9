#pragma once

// Smooth even cutoff rho: 0 on [-1,1], 1 outside [-2,2], built from the exp(-1/t) smoothstep.

#include <cmath>
#include <string>

#include "nlsgibbs/error.hpp"

namespace nlsgibbs {

namespace detail {

// g(t) = exp(-1/t) for t > 0 and its first two derivatives.
inline double bump(double t) { return t > 0.0 ? std::exp(-1.0 / t) : 0.0; }
inline double bump_d1(double t) { return t > 0.0 ? std::exp(-1.0 / t) / (t * t) : 0.0; }
inline double bump_d2(double t) {
  return t > 0.0 ? std::exp(-1.0 / t) * (1.0 / (t * t * t * t) - 2.0 / (t * t * t)) : 0.0;
}

}  // namespace detail

/// S(t) = g(t) / (g(t) + g(1-t)).
inline double smoothstep(double t) {
  if (t <= 0.0) return 0.0;
  if (t >= 1.0) return 1.0;
  const double u = detail::bump(t), v = detail::bump(1.0 - t);
  return u / (u + v);
}

inline double smoothstep_d1(double t) {
  if (t <= 0.0 || t >= 1.0) return 0.0;
  const double u = detail::bump(t), v = detail::bump(1.0 - t);
  const double du = detail::bump_d1(t), dv = -detail::bump_d1(1.0 - t);
  const double d = u + v;
  return (du * v - u * dv) / (d * d);
}

inline double smoothstep_d2(double t) {
  if (t <= 0.0 || t >= 1.0) return 0.0;
  const double u = detail::bump(t), v = detail::bump(1.0 - t);
  const double du = detail::bump_d1(t), dv = -detail::bump_d1(1.0 - t);
  const double ddu = detail::bump_d2(t), ddv = detail::bump_d2(1.0 - t);
  const double d = u + v, dd = du + dv;
  const double num = du * v - u * dv;
  const double dnum = ddu * v - u * ddv;
  return (dnum * d - 2.0 * num * dd) / (d * d * d);
}

inline double rho(double x) { return smoothstep(std::abs(x) - 1.0); }
inline double rho_d1(double x) { return (x < 0.0 ? -1.0 : 1.0) * smoothstep_d1(std::abs(x) - 1.0); }
inline double rho_d2(double x) { return smoothstep_d2(std::abs(x) - 1.0); }

struct CutoffSpec {
  double delta = 0.0;

  /// delta = beta^{-13/10}.
  static CutoffSpec automatic(double beta) { return {std::pow(beta, -1.3)}; }

  /// Requires 0 < delta * beta < 1.
  void validate(double beta) const {
    if (!(delta > 0.0) || !(delta * beta < 1.0)) {
      throw InvalidArgument("CutoffSpec: need 0 < delta*beta < 1, got delta = " + std::to_string(delta) +
                            ", beta = " + std::to_string(beta));
    }
  }
};

}  // namespace nlsgibbs
