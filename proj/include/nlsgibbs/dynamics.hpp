#pragma once

// Time integration of the Galerkin-truncated NLS  i dpsi_k/dt = k² psi_k + [f(|psi|²) psi]_k.
//
// Strang splitting: exact linear half steps around a nonlinear step. The nonlinear
// subflow of the truncated system is solved by the implicit midpoint rule, iterated to
// roundoff; it preserves every quadratic invariant of that subflow (L² norm, momentum),
// so the composed scheme conserves both and is symmetric in time.

#include <cmath>
#include <complex>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "nlsgibbs/error.hpp"
#include "nlsgibbs/fourier_state.hpp"

namespace nlsgibbs {

struct IntegratorConfig {
  double dt = 1e-3;
  double t_end = 0.0;
  int observe_every = 1;

  /// min(1e-3, 0.1/N²).
  static double default_dt(int n) { return std::min(1e-3, n > 0 ? 0.1 / (double(n) * n) : 1e-3); }

  long steps() const { return std::lround(t_end / std::abs(dt)); }

  void validate(int n) const {
    if (!(dt != 0.0) || !std::isfinite(dt)) throw InvalidArgument("IntegratorConfig: dt must be finite and nonzero");
    if (std::abs(dt) * double(n) * n > std::numbers::pi) {
      throw InvalidArgument("IntegratorConfig: |dt| N² = " + std::to_string(std::abs(dt) * n * n) + " exceeds pi");
    }
    if (t_end < 0.0) throw InvalidArgument("IntegratorConfig: t_end must be nonnegative (use dt < 0 to run backward)");
    if (observe_every < 1) throw InvalidArgument("IntegratorConfig: observe_every must be positive");
  }
};

/// Reusable integrator for one truncation and nonlinearity.
class StrangStepper {
 public:
  StrangStepper(const ModelParams& params, int n)
      : params_(params), n_(n), grid_(grid_size_for(params.q(), std::max(n, 1))),
        values_(static_cast<std::size_t>(grid_.size())), mid_(static_cast<std::size_t>(2 * n + 1)),
        next_(static_cast<std::size_t>(2 * n + 1)), nl_(static_cast<std::size_t>(2 * n + 1)) {}

  int truncation() const { return n_; }

  void step(FourierState& state, double dt) {
    if (state.n() != n_) throw InvalidArgument("StrangStepper: state truncation mismatch");
    auto c = state.mutable_coeffs();
    linear(c, 0.5 * dt);
    if (!params_.linear()) nonlinear(c, dt);
    linear(c, 0.5 * dt);
  }

 private:
  void linear(std::span<Complex> c, double tau) const {
    for (int k = -n_; k <= n_; ++k) c[static_cast<std::size_t>(k + n_)] *= std::polar(1.0, -double(k) * k * tau);
  }

  // [f(|u|²) u]_k for |k| <= N.
  void field(std::span<const Complex> u, std::span<Complex> out) {
    grid_.to_grid(u, n_, values_);
    for (auto& v : values_) v *= params_.nonlinear_frequency(std::norm(v));
    grid_.from_grid(values_, n_, out);
  }

  // psi1 = psi0 - i dt N((psi0 + psi1)/2), fixed-point iteration.
  void nonlinear(std::span<Complex> c, double dt) {
    const std::size_t size = c.size();
    std::copy(c.begin(), c.end(), next_.begin());
    double scale = 0.0;
    for (const auto& v : c) scale = std::max(scale, std::abs(v));
    if (scale == 0.0) return;
    double previous = std::numeric_limits<double>::infinity();
    for (int iter = 0; iter < 100; ++iter) {
      for (std::size_t i = 0; i < size; ++i) mid_[i] = 0.5 * (c[i] + next_[i]);
      field(mid_, nl_);
      double change = 0.0;
      for (std::size_t i = 0; i < size; ++i) {
        const Complex updated = c[i] - Complex(0.0, dt) * nl_[i];
        change = std::max(change, std::abs(updated - next_[i]));
        next_[i] = updated;
      }
      if (!std::isfinite(change)) break;
      // Stop at roundoff: either tiny or no longer contracting.
      if (change <= 1e-16 * scale || (iter > 1 && change >= previous)) {
        std::copy(next_.begin(), next_.end(), c.begin());
        return;
      }
      previous = change;
    }
    for (std::size_t i = 0; i < size; ++i) {
      if (!std::isfinite(next_[i].real()) || !std::isfinite(next_[i].imag())) {
        throw NumericalFailure("StrangStepper: non-finite value in nonlinear step");
      }
    }
    std::copy(next_.begin(), next_.end(), c.begin());
  }

  ModelParams params_;
  int n_;
  SpectralGrid grid_;
  std::vector<Complex> values_, mid_, next_, nl_;
};

inline FourierState step_strang(const FourierState& state, double dt, const ModelParams& params) {
  StrangStepper stepper(params, state.n());
  FourierState out = state;
  stepper.step(out, dt);
  return out;
}

struct Trajectory {
  std::vector<double> times;
  std::vector<FourierState> states;
};

inline bool finite_state(const FourierState& s) {
  for (const auto& v : s.coeffs()) {
    if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) return false;
  }
  return true;
}

/// Calls observer(t, state) at t = 0 and every observe_every steps (and at the final step).
/// Throws NumericalFailure naming the time if a non-finite coefficient appears.
template <class Observer>
void integrate(FourierState state, const IntegratorConfig& config, const ModelParams& params, Observer&& observer) {
  config.validate(state.n());
  StrangStepper stepper(params, state.n());
  const long steps = config.steps();
  observer(0.0, static_cast<const FourierState&>(state));
  for (long i = 1; i <= steps; ++i) {
    stepper.step(state, config.dt);
    if (i % config.observe_every == 0 || i == steps) {
      if (!finite_state(state)) {
        throw NumericalFailure("evolve: non-finite state at t = " + std::to_string(double(i) * config.dt));
      }
      observer(double(i) * config.dt, static_cast<const FourierState&>(state));
    }
  }
}

inline Trajectory evolve(const FourierState& state, const IntegratorConfig& config, const ModelParams& params) {
  Trajectory traj;
  integrate(state, config, params, [&](double t, const FourierState& s) {
    traj.times.push_back(t);
    traj.states.push_back(s);
  });
  return traj;
}

struct ConservationReport {
  double h_drift = 0.0;         // max |H(t) - H(0)| / |H(0)|
  double l2_drift = 0.0;        // max |‖psi(t)‖² - ‖psi(0)‖²| / ‖psi(0)‖²
  double momentum_drift = 0.0;  // max |P(t) - P(0)|, absolute
};

inline ConservationReport conservation_report(const Trajectory& traj, const ModelParams& params) {
  ConservationReport r;
  if (traj.states.empty()) return r;
  const double h0 = evaluate_H(traj.states.front(), params);
  const double l0 = l2_norm_squared(traj.states.front());
  const double p0 = momentum(traj.states.front());
  for (const auto& s : traj.states) {
    if (h0 != 0.0) r.h_drift = std::max(r.h_drift, std::abs(evaluate_H(s, params) - h0) / std::abs(h0));
    if (l0 != 0.0) r.l2_drift = std::max(r.l2_drift, std::abs(l2_norm_squared(s) - l0) / l0);
    r.momentum_drift = std::max(r.momentum_drift, std::abs(momentum(s) - p0));
  }
  return r;
}

/// CSV with columns t, H, l2, action_{-kmax}..action_{kmax}, and phi6 when provided.
inline void write_trajectory_csv(std::ostream& os, const Trajectory& traj, const ModelParams& params, int k_max,
                                 const std::function<double(const FourierState&)>& phi = {}) {
  os << "t,H,l2";
  for (int k = -k_max; k <= k_max; ++k) os << ",action_" << k;
  if (phi) os << ",phi6_tk";
  os << '\n';
  os.precision(17);
  for (std::size_t i = 0; i < traj.states.size(); ++i) {
    const auto& s = traj.states[i];
    os << traj.times[i] << ',' << evaluate_H(s, params) << ',' << l2_norm_squared(s);
    for (int k = -k_max; k <= k_max; ++k) os << ',' << (s.contains(k) ? std::norm(s[k]) : 0.0);
    if (phi) os << ',' << phi(s);
    os << '\n';
  }
}

}  // namespace nlsgibbs
