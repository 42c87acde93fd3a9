#pragma once

// Sampling of the Gaussian measure mu_{g,beta} ∝ exp(-(beta/2) Σ (1+k²)|psi_k|²)
// on |k| <= N, reweighting to the Gibbs measure mu_beta ∝ exp(-beta P) mu_{g,beta},
// and Monte Carlo estimators for the measure-theoretic statements about them.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"
#include "nlsgibbs/error.hpp"
#include "nlsgibbs/fourier_state.hpp"
#include "nlsgibbs/random.hpp"
#include "nlsgibbs/statistics.hpp"

namespace nlsgibbs {

enum class SamplingMethod { GaussianOnly, ImportanceWeights, IndependenceMetropolis };

inline std::string to_string(SamplingMethod m) {
  switch (m) {
    case SamplingMethod::GaussianOnly: return "gaussian-only";
    case SamplingMethod::ImportanceWeights: return "importance-weights";
    case SamplingMethod::IndependenceMetropolis: return "independence-metropolis";
  }
  return "?";
}

inline SamplingMethod sampling_method_from_string(const std::string& s) {
  if (s == "gaussian-only") return SamplingMethod::GaussianOnly;
  if (s == "importance-weights") return SamplingMethod::ImportanceWeights;
  if (s == "independence-metropolis") return SamplingMethod::IndependenceMetropolis;
  throw InvalidArgument("unknown sampling method '" + s + "'");
}

struct SamplerConfig {
  ModelParams params;
  std::uint64_t seed = 1;
  SamplingMethod method = SamplingMethod::ImportanceWeights;
  int n_samples = 1000;
};

struct WeightedSample {
  FourierState state;
  double log_weight = 0.0;  // -beta P for importance sampling, 0 otherwise
};

/// Variance of Re psi_k (and of Im psi_k) under mu_{g,beta}; E|psi_k|² is twice this.
inline double gaussian_component_variance(double beta, int k) { return 1.0 / (beta * (1.0 + double(k) * k)); }

/// One draw from mu_{g,beta} on |k| <= n.
template <class Rng>
FourierState draw_gaussian(double beta, int n, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  FourierState state(n);
  auto coeffs = state.mutable_coeffs();
  for (int k = -n; k <= n; ++k) {
    const double sd = std::sqrt(gaussian_component_variance(beta, k));
    const double re = normal(rng);
    const double im = normal(rng);
    coeffs[static_cast<std::size_t>(k + n)] = Complex(sd * re, sd * im);
  }
  return state;
}

/// Sample i of the stream is a function of (seed, i) only.
inline FourierState gaussian_sample(const SamplerConfig& config, std::uint64_t index) {
  auto rng = stream_for(config.seed, index);
  return draw_gaussian(config.params.beta, config.params.n, rng);
}

inline std::vector<FourierState> sample_gaussian(const SamplerConfig& config, int count) {
  if (!(config.params.beta > 0.0)) throw InvalidArgument("sample_gaussian: beta must be positive");
  std::vector<FourierState> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) out.push_back(gaussian_sample(config, static_cast<std::uint64_t>(i)));
  return out;
}

/// exp(-beta P(psi)) in (0, 1].
inline double gibbs_weight(const FourierState& state, const ModelParams& params) {
  const double p = evaluate_P(state, params);
  if (p < -1e-14) throw NumericalFailure("gibbs_weight: negative potential energy " + std::to_string(p));
  return std::exp(-params.beta * std::max(p, 0.0));
}

/// Draws config.n_samples samples with the configured method.
/// Independence Metropolis uses mu_{g,beta} as proposal; its output is unweighted
/// and the chain starts from the first proposal.
inline std::vector<WeightedSample> draw_samples(const SamplerConfig& config) {
  config.params.validate(true);
  std::vector<WeightedSample> out;
  out.reserve(static_cast<std::size_t>(config.n_samples));
  const double beta = config.params.beta;
  if (config.method == SamplingMethod::IndependenceMetropolis) {
    FourierState current;
    double current_p = 0.0;
    for (int i = 0; i < config.n_samples; ++i) {
      auto rng = stream_for(config.seed, static_cast<std::uint64_t>(i));
      FourierState proposal = draw_gaussian(beta, config.params.n, rng);
      const double p = evaluate_P(proposal, config.params);
      const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
      if (i == 0 || u < std::exp(-beta * (p - current_p))) {
        current = std::move(proposal);
        current_p = p;
      }
      out.push_back({current, 0.0});
    }
    return out;
  }
  for (int i = 0; i < config.n_samples; ++i) {
    WeightedSample s{gaussian_sample(config, static_cast<std::uint64_t>(i)), 0.0};
    if (config.method == SamplingMethod::ImportanceWeights) s.log_weight = -beta * evaluate_P(s.state, config.params);
    out.push_back(std::move(s));
  }
  return out;
}

/// Self-normalized estimate with delta-method standard error and Kish effective sample size.
struct Estimate {
  double mean = 0.0;
  double std_error = 0.0;
  double ess = 0.0;
  int n = 0;

  nlohmann::json to_json() const { return {{"mean", mean}, {"stderr", std_error}, {"ess", ess}, {"n", n}}; }
};

/// Normalized weights exp(lw - max lw); all ones when every log weight is zero.
inline std::vector<double> normalized_weights(const std::vector<WeightedSample>& samples) {
  double top = -std::numeric_limits<double>::infinity();
  for (const auto& s : samples) top = std::max(top, s.log_weight);
  std::vector<double> w;
  w.reserve(samples.size());
  for (const auto& s : samples) w.push_back(s.log_weight == top ? 1.0 : std::exp(s.log_weight - top));
  return w;
}

inline Estimate weighted_mean(std::span<const double> values, std::span<const double> weights) {
  if (values.size() != weights.size() || values.empty()) throw InvalidArgument("weighted_mean: size mismatch");
  double sw = 0.0, sw2 = 0.0, swf = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    sw += weights[i];
    sw2 += weights[i] * weights[i];
    swf += weights[i] * values[i];
  }
  Estimate e;
  e.n = static_cast<int>(values.size());
  e.ess = sw * sw / sw2;
  if (e.ess < 10.0) throw EffectiveSampleSizeTooSmall(e.ess);
  e.mean = swf / sw;
  double var = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double d = values[i] - e.mean;
    var += weights[i] * weights[i] * d * d;
  }
  e.std_error = std::sqrt(var) / sw;
  return e;
}

template <class Observable>
Estimate estimate_mean(Observable&& f, const std::vector<WeightedSample>& samples) {
  std::vector<double> values;
  values.reserve(samples.size());
  for (const auto& s : samples) values.push_back(static_cast<double>(f(s.state)));
  const auto w = normalized_weights(samples);
  return weighted_mean(values, w);
}

/// ||f||_{mu} = sqrt(<|f|²>) with delta-method standard error.
template <class Observable>
Estimate estimate_norm(Observable&& f, const std::vector<WeightedSample>& samples) {
  Estimate e = estimate_mean(
      [&](const FourierState& s) {
        const auto v = f(s);
        return std::norm(v);
      },
      samples);
  const double m = std::sqrt(std::max(e.mean, 0.0));
  e.std_error = m > 0.0 ? e.std_error / (2.0 * m) : 0.0;
  e.mean = m;
  return e;
}

/// Smallest beta in the (increasing) grid whose importance-weight ESS/n reaches min_ratio;
/// empty when none does. Reported as the operational regime threshold, never assumed.
inline std::optional<double> operational_beta_star(const std::vector<double>& grid, const SamplerConfig& config,
                                                   double min_ratio = 0.5) {
  for (double beta : grid) {
    SamplerConfig c = config;
    c.params.beta = beta;
    c.method = SamplingMethod::ImportanceWeights;
    const auto w = normalized_weights(draw_samples(c));
    double sw = 0.0, sw2 = 0.0;
    for (double x : w) sw += x, sw2 += x * x;
    if (sw * sw / sw2 >= min_ratio * static_cast<double>(w.size())) return beta;
  }
  return std::nullopt;
}

/// Closed-form Gaussian moments of the action: <I_k> and <I_k²>.
inline double gaussian_action_mean(double beta, int k) { return 2.0 / (beta * (1.0 + double(k) * k)); }
inline double gaussian_action_second_moment(double beta, int k) {
  const double a = gaussian_action_mean(beta, k);
  return 2.0 * a * a;
}

struct ActionBoundRow {
  int k = 0;
  Estimate norm;
  double ratio = 0.0;  // ||I_k|| * beta (1+k²)
  bool pass = false;
};

struct ActionBoundReport {
  double beta = 0.0;
  double floor = 0.5;
  std::vector<ActionBoundRow> rows;
  bool pass = true;

  nlohmann::json to_json() const {
    nlohmann::json rs = nlohmann::json::array();
    for (const auto& r : rows) {
      rs.push_back({{"k", r.k}, {"norm", r.norm.to_json()}, {"ratio", r.ratio}, {"pass", r.pass}});
    }
    return {{"beta", beta}, {"floor", floor}, {"rows", rs}, {"pass", pass}};
  }
};

/// Estimates || |psi_k|² ||_{mu_beta} and reports the ratio to 1/(beta(1+k²)).
inline ActionBoundReport verify_action_lower_bound(const std::vector<int>& ks, const SamplerConfig& config,
                                                   double floor = 0.5) {
  const auto samples = draw_samples(config);
  ActionBoundReport rep;
  rep.beta = config.params.beta;
  rep.floor = floor;
  for (int k : ks) {
    ActionBoundRow row;
    row.k = k;
    row.norm = estimate_norm([k](const FourierState& s) { return action(s, k); }, samples);
    row.ratio = row.norm.mean * config.params.beta * (1.0 + double(k) * k);
    row.pass = row.ratio >= floor;
    rep.pass = rep.pass && row.pass;
    rep.rows.push_back(row);
  }
  return rep;
}

struct TailReport {
  std::vector<double> thresholds;
  std::vector<double> tails;
  std::vector<double> tail_stderr;
  double slope = 0.0;  // d log(tail) / d(beta M²)
  int fitted_points = 0;
  bool degenerate = false;
  bool pass = false;

  nlohmann::json to_json() const {
    return {{"thresholds", thresholds}, {"tails", tails},         {"tail_stderr", tail_stderr},
            {"slope", slope},           {"fitted_points", fitted_points}, {"degenerate", degenerate},
            {"pass", pass}};
  }
};

/// mu(||psi||_{H^{s1}} > M) over the given thresholds; fits log(tail) against beta M²
/// using the thresholds above the median norm whose tail has >= min_count exceedances.
inline TailReport tail_probability(const std::vector<double>& thresholds, double s1,
                                   const std::vector<WeightedSample>& samples, double beta,
                                   double decay_floor = 0.25, int min_count = 20) {
  TailReport rep;
  rep.thresholds = thresholds;
  const auto w = normalized_weights(samples);
  std::vector<double> norms;
  norms.reserve(samples.size());
  for (const auto& s : samples) norms.push_back(hs_norm(s.state, s1));
  const double med = median(norms);
  std::vector<double> xs, ys;
  double sw = 0.0, sw2 = 0.0;
  for (double wi : w) sw += wi, sw2 += wi * wi;
  for (double m : thresholds) {
    double hit = 0.0;
    int count = 0;
    for (std::size_t i = 0; i < norms.size(); ++i) {
      if (norms[i] > m) hit += w[i], ++count;
    }
    const double p = hit / sw;
    rep.tails.push_back(p);
    const double ess = sw * sw / sw2;
    rep.tail_stderr.push_back(std::sqrt(std::max(p * (1.0 - p), 0.0) / ess));
    if (m > med && count >= min_count && p > 0.0) {
      xs.push_back(beta * m * m);
      ys.push_back(std::log(p));
    }
  }
  rep.fitted_points = static_cast<int>(xs.size());
  if (xs.size() < 2) {
    rep.degenerate = true;
    return rep;
  }
  rep.slope = fit_line(xs, ys).slope;
  rep.pass = rep.slope <= -decay_floor;
  return rep;
}

struct SmallBallReport {
  Estimate monte_carlo;
  double closed_form = 0.0;
  bool agree = false;  // within 3 standard errors

  nlohmann::json to_json() const {
    return {{"monte_carlo", monte_carlo.to_json()}, {"closed_form", closed_form}, {"agree", agree}};
  }
};

/// Π_{|k|<=N} (1 - exp(-(1+k²)^{1-gamma}/2)); independent of beta.
inline double small_ball_closed_form(double gamma, int n) {
  double p = 1.0;
  for (int k = -n; k <= n; ++k) p *= 1.0 - std::exp(-0.5 * std::pow(1.0 + double(k) * k, 1.0 - gamma));
  return p;
}

inline bool in_small_ball(const FourierState& s, double gamma, double beta) {
  for (int k = -s.n(); k <= s.n(); ++k) {
    const double r = std::pow(1.0 + double(k) * k, -gamma / 2.0) / std::sqrt(beta);
    if (std::abs(s[k]) >= r) return false;
  }
  return true;
}

/// Gaussian measure of {|psi_k| < (1+k²)^{-gamma/2} beta^{-1/2} for all k}, two ways.
inline SmallBallReport small_ball_probability(double gamma, const SamplerConfig& config) {
  if (!(gamma > 0.0 && gamma < 1.0)) throw InvalidArgument("small_ball_probability: need 0 < gamma < 1");
  SamplerConfig c = config;
  c.method = SamplingMethod::GaussianOnly;
  const auto samples = draw_samples(c);
  SmallBallReport rep;
  const double beta = c.params.beta;
  rep.monte_carlo =
      estimate_mean([&](const FourierState& s) { return in_small_ball(s, gamma, beta) ? 1.0 : 0.0; }, samples);
  rep.closed_form = small_ball_closed_form(gamma, c.params.n);
  const double p = rep.closed_form;
  const double se = std::sqrt(p * (1.0 - p) / rep.monte_carlo.n);
  rep.agree = std::abs(rep.monte_carlo.mean - p) <= 3.0 * se;
  return rep;
}

/// Z(beta)/Z_g(beta) = <exp(-beta P)>_{g,beta}.
inline Estimate partition_ratio(const SamplerConfig& config) {
  SamplerConfig c = config;
  c.method = SamplingMethod::GaussianOnly;
  const auto samples = draw_samples(c);
  return estimate_mean([&](const FourierState& s) { return gibbs_weight(s, c.params); }, samples);
}

struct NormComparison {
  double gibbs_norm = 0.0;
  double gaussian_norm = 0.0;
  double c_hat = 0.0;  // -log(mean weight)
  bool holds = false;  // gibbs <= exp(c_hat) gaussian

  nlohmann::json to_json() const {
    return {{"gibbs_norm", gibbs_norm}, {"gaussian_norm", gaussian_norm}, {"c_hat", c_hat}, {"holds", holds}};
  }
};

/// ||f||_{mu_beta} against e^{C}||f||_{g,beta} on one importance-weighted stream.
template <class Observable>
NormComparison compare_gibbs_gaussian_norm(Observable&& f, const std::vector<WeightedSample>& samples) {
  double sw = 0.0, swf = 0.0, sf = 0.0;
  for (const auto& s : samples) {
    const double v = std::norm(f(s.state));
    const double w = std::exp(s.log_weight);
    sw += w;
    swf += w * v;
    sf += v;
  }
  const double n = static_cast<double>(samples.size());
  NormComparison c;
  c.gibbs_norm = std::sqrt(swf / sw);
  c.gaussian_norm = std::sqrt(sf / n);
  c.c_hat = -std::log(sw / n);
  c.holds = c.gibbs_norm <= std::exp(c.c_hat) * c.gaussian_norm * (1.0 + 1e-12);
  return c;
}

struct RestrictedNormReport {
  double gibbs_norm = 0.0;
  double restricted_gaussian_norm = 0.0;
  double radius = 0.0;  // the H^{s1} ball radius used for the characteristic function
  double gamma = 0.9;
  double s1 = 1.0 / 3.0;
  bool holds = false;

  nlohmann::json to_json() const {
    return {{"gibbs_norm", gibbs_norm}, {"restricted_gaussian_norm", restricted_gaussian_norm},
            {"radius", radius},         {"gamma", gamma},
            {"s1", s1},                 {"holds", holds},
            {"note", "gamma and s1 are conventional defaults; D' depends on them"}};
  }
};

/// ||f||_{mu_beta} >= exp(-sup_{ball} beta P) ||f chi_{||psi||²_{H^{s1}} <= D'/beta}||_{g,beta},
/// with D' = Σ_j (1+j²)^{-(gamma - s1)} over |j| <= N and the exponential replaced by
/// its empirical worst case over the ball.
template <class Observable>
RestrictedNormReport restricted_norm_chain(Observable&& f, const std::vector<WeightedSample>& samples,
                                           const ModelParams& params, double gamma = 0.9, double s1 = 1.0 / 3.0) {
  double d_prime = 0.0;
  for (int j = -params.n; j <= params.n; ++j) d_prime += std::pow(1.0 + double(j) * j, -(gamma - s1));
  RestrictedNormReport rep;
  rep.gamma = gamma;
  rep.s1 = s1;
  rep.radius = std::sqrt(d_prime / params.beta);
  double sw = 0.0, swf = 0.0, sres = 0.0, worst = 0.0;
  for (const auto& s : samples) {
    const double v = std::norm(f(s.state));
    const double w = std::exp(s.log_weight);
    sw += w;
    swf += w * v;
    if (hs_norm(s.state, s1) <= rep.radius) {
      sres += v;
      worst = std::max(worst, -s.log_weight);
    }
  }
  rep.gibbs_norm = std::sqrt(swf / sw);
  rep.restricted_gaussian_norm = std::sqrt(sres / static_cast<double>(samples.size()));
  rep.holds = rep.gibbs_norm >= std::exp(-worst) * rep.restricted_gaussian_norm * (1.0 - 1e-12);
  return rep;
}

}  // namespace nlsgibbs
