#pragma once

// End-to-end experiments: action and Phi drift statistics along Gibbs-distributed trajectories,
// Chebyshev bookkeeping for the bad sets, all-mode union bounds, and Monte Carlo scaling fits
// for the norm estimates behind them.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "nlsgibbs/cutoff.hpp"
#include "nlsgibbs/dynamics.hpp"
#include "nlsgibbs/error.hpp"
#include "nlsgibbs/fourier_state.hpp"
#include "nlsgibbs/gaussian_bounds.hpp"
#include "nlsgibbs/gibbs.hpp"
#include "nlsgibbs/normal_form.hpp"
#include "nlsgibbs/random.hpp"
#include "nlsgibbs/statistics.hpp"
#include "nlsgibbs/toml_subset.hpp"

namespace nlsgibbs {

/// delta = beta^{-13/10} or a fixed value.
struct DeltaRule {
  bool automatic = true;
  double value = 0.0;

  double at(double beta) const { return automatic ? CutoffSpec::automatic(beta).delta : value; }
  std::string describe() const { return automatic ? "auto" : std::to_string(value); }
};

struct ExperimentConfig {
  ModelParams params;  // params.beta is overridden by each beta_grid entry
  SamplerConfig sampler;
  IntegratorConfig integrator;
  int nf_truncation = 8;
  std::vector<int> tk_list{1};
  std::vector<double> beta_grid{16.0, 32.0};
  DeltaRule delta_rule;
  double eta1 = 1.0;
  double eta2 = 0.5;
  double alpha = 0.25;
  double horizon_c = 1.0;
  bool full_horizon = false;  // T = c beta^{2.1} instead of c beta²
  int observations = 100;     // observation points per trajectory
  bool control_sample = false;
  bool all_modes = false;     // record action drifts for every |k| <= N

  ExperimentConfig() {
    params.c = {1.0};
    params.n = 8;
    params.beta = 16.0;
    sampler.method = SamplingMethod::IndependenceMetropolis;
    sampler.n_samples = 200;
    integrator.dt = 0.01;
  }

  double horizon(double beta) const { return horizon_c * std::pow(beta, full_horizon ? 2.1 : 2.0); }

  ModelParams params_at(double beta) const {
    ModelParams p = params;
    p.beta = beta;
    return p;
  }

  void validate() const {
    if (beta_grid.empty()) throw InvalidArgument("ExperimentConfig: beta_grid is empty");
    for (std::size_t i = 0; i < beta_grid.size(); ++i) {
      if (!(beta_grid[i] > 0.0)) throw InvalidArgument("ExperimentConfig: beta values must be positive");
      if (i > 0 && !(beta_grid[i] > beta_grid[i - 1])) {
        throw InvalidArgument("ExperimentConfig: beta_grid must be strictly increasing");
      }
    }
    if (!(eta1 > 0.0 && eta1 <= 1.0)) throw InvalidArgument("ExperimentConfig: eta1 must lie in (0, 1]");
    if (!(eta2 > 0.0 && eta2 < 1.0)) throw InvalidArgument("ExperimentConfig: eta2 must lie in (0, 1)");
    if (!(alpha < 0.5)) throw InvalidArgument("ExperimentConfig: alpha must be below 1/2");
    if (!(horizon_c > 0.0)) throw InvalidArgument("ExperimentConfig: horizon_c must be positive");
    if (observations < 1) throw InvalidArgument("ExperimentConfig: observations must be positive");
    if (sampler.n_samples < 1) throw InvalidArgument("ExperimentConfig: n_samples must be positive");
    if (nf_truncation < 1 || nf_truncation > params.n) {
      throw InvalidArgument("ExperimentConfig: nf_truncation must lie in [1, N]");
    }
    if (tk_list.empty()) throw InvalidArgument("ExperimentConfig: tk list is empty");
    for (int k : tk_list) {
      if (std::abs(k) > nf_truncation) throw InvalidMode("ExperimentConfig: tracked mode " + std::to_string(k) + " outside the normal-form truncation");
    }
    if (!delta_rule.automatic && !(delta_rule.value > 0.0)) throw InvalidArgument("ExperimentConfig: fixed delta must be positive");
    params.validate();
    integrator.validate(params.n);
  }

  /// (seed, N, dt, M, delta rule) and the rest of the knobs that determine a run.
  nlohmann::json provenance() const {
    return {{"seed", sampler.seed},
            {"N", params.n},
            {"N_nf", nf_truncation},
            {"dt", integrator.dt},
            {"M", grid_size_for(params.q(), params.n)},
            {"delta_rule", delta_rule.describe()},
            {"c", params.c},
            {"method", to_string(sampler.method)},
            {"n_samples", sampler.n_samples},
            {"horizon_c", horizon_c},
            {"full_horizon", full_horizon},
            {"observations", observations}};
  }
};

namespace detail {

template <class T>
T toml_get(const nlohmann::json& table, const char* key, T fallback) {
  if (!table.contains(key)) return fallback;
  try {
    return table.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw InvalidArgument(std::string("config: key '") + key + "' has the wrong type");
  }
}

inline void reject_unknown(const nlohmann::json& table, const std::string& section, std::initializer_list<const char*> known) {
  for (const auto& [key, value] : table.items()) {
    bool ok = false;
    for (const char* k : known) ok = ok || key == k;
    if (!ok) throw InvalidArgument("config: unknown key '" + key + "' in [" + section + "]");
  }
}

}  // namespace detail

/// Sections [model], [sampler], [integrator], [experiment]; every key is optional.
inline ExperimentConfig experiment_config_from_toml(const nlohmann::json& doc) {
  ExperimentConfig c;
  for (const auto& [name, table] : doc.items()) {
    if (name != "model" && name != "sampler" && name != "integrator" && name != "experiment") {
      throw InvalidArgument("config: unknown section or top-level key '" + name + "'");
    }
  }
  const auto section = [&](const char* name) { return doc.contains(name) ? doc.at(name) : nlohmann::json::object(); };
  const auto model = section("model");
  detail::reject_unknown(model, "model", {"c", "n", "nf_truncation"});
  c.params.c = detail::toml_get(model, "c", c.params.c);
  c.params.n = detail::toml_get(model, "n", c.params.n);
  c.nf_truncation = detail::toml_get(model, "nf_truncation", std::min(c.params.n, 8));

  const auto sampler = section("sampler");
  detail::reject_unknown(sampler, "sampler", {"seed", "method", "n_samples"});
  c.sampler.seed = detail::toml_get<std::uint64_t>(sampler, "seed", c.sampler.seed);
  if (sampler.contains("method")) c.sampler.method = sampling_method_from_string(detail::toml_get<std::string>(sampler, "method", ""));
  c.sampler.n_samples = detail::toml_get(sampler, "n_samples", c.sampler.n_samples);

  const auto integ = section("integrator");
  detail::reject_unknown(integ, "integrator", {"dt", "observations", "horizon_c", "full_horizon"});
  c.integrator.dt = detail::toml_get(integ, "dt", c.integrator.dt);
  c.observations = detail::toml_get(integ, "observations", c.observations);
  c.horizon_c = detail::toml_get(integ, "horizon_c", c.horizon_c);
  c.full_horizon = detail::toml_get(integ, "full_horizon", c.full_horizon);

  const auto exp = section("experiment");
  detail::reject_unknown(exp, "experiment", {"tk", "beta_grid", "delta", "eta1", "eta2", "alpha", "control_sample", "all_modes"});
  c.tk_list = detail::toml_get(exp, "tk", c.tk_list);
  c.beta_grid = detail::toml_get(exp, "beta_grid", c.beta_grid);
  if (exp.contains("delta")) {
    const auto& d = exp.at("delta");
    if (d.is_string()) {
      if (d.get<std::string>() != "auto") throw InvalidArgument("config: delta must be \"auto\" or a number");
      c.delta_rule = {};
    } else if (d.is_number()) {
      c.delta_rule = {false, d.get<double>()};
    } else {
      throw InvalidArgument("config: delta must be \"auto\" or a number");
    }
  }
  c.eta1 = detail::toml_get(exp, "eta1", c.eta1);
  c.eta2 = detail::toml_get(exp, "eta2", c.eta2);
  c.alpha = detail::toml_get(exp, "alpha", c.alpha);
  c.control_sample = detail::toml_get(exp, "control_sample", c.control_sample);
  c.all_modes = detail::toml_get(exp, "all_modes", c.all_modes);
  c.params.beta = c.beta_grid.empty() ? 1.0 : c.beta_grid.front();
  c.sampler.params = c.params;
  c.validate();
  return c;
}

inline ExperimentConfig load_experiment_config(const std::string& path) {
  return experiment_config_from_toml(load_toml_subset(path));
}

// ---------------------------------------------------------------------------------------------
// Drift experiments

/// Scale that turns an action change into the normalized drift: (1+k²) beta.
inline double drift_scale(int k, double beta) { return (1.0 + double(k) * k) * beta; }

struct DriftRecord {
  int sample = 0;
  int k = 0;
  double beta = 0.0;
  double horizon = 0.0;
  double drift_I = 0.0;               // max_t |I_k(t) - I_k(0)| (1+k²) beta
  std::optional<double> drift_phi;    // same for Phi^(6)_k, when k is a normal-form target
  double raw_I = 0.0;                 // max_t |I_k(t) - I_k(0)|
  std::optional<double> raw_phi;
  std::string flags;                  // "", "control" or "nan"

  bool valid() const { return flags.empty(); }
};

struct DriftRun {
  double beta = 0.0;
  double horizon = 0.0;
  double delta = 0.0;
  std::vector<DriftRecord> records;
  int failed_samples = 0;
  int distinct_trajectories = 0;
  double max_leakage = 0.0;  // max over samples and times of Σ_{|k| > N_nf} I_k / ||psi||²
  std::map<int, std::size_t> resonance_counts;
};

namespace detail {

struct TrackedDrift {
  std::vector<double> raw_i;
  std::vector<double> raw_phi;
  double leakage = 0.0;
  bool failed = false;
};

inline double high_mode_fraction(const FourierState& s, int n_nf) {
  double hi = 0.0, all = 0.0;
  for (int k = -s.n(); k <= s.n(); ++k) {
    const double a = std::norm(s[k]);
    all += a;
    if (std::abs(k) > n_nf) hi += a;
  }
  return all > 0.0 ? hi / all : 0.0;
}

inline TrackedDrift track_drift(const FourierState& initial, const std::vector<int>& modes,
                                const std::vector<const NormalFormPackage*>& packages, const IntegratorConfig& ic,
                                const ModelParams& params, int n_nf) {
  TrackedDrift d;
  d.raw_i.assign(modes.size(), 0.0);
  d.raw_phi.assign(packages.size(), 0.0);
  std::vector<double> i0(modes.size()), phi0(packages.size());
  bool first = true;
  try {
    integrate(initial, ic, params, [&](double, const FourierState& s) {
      d.leakage = std::max(d.leakage, high_mode_fraction(s, n_nf));
      for (std::size_t j = 0; j < modes.size(); ++j) {
        const double v = std::norm(s[modes[j]]);
        if (first) i0[j] = v;
        d.raw_i[j] = std::max(d.raw_i[j], std::abs(v - i0[j]));
      }
      for (std::size_t j = 0; j < packages.size(); ++j) {
        const double v = phi6_evaluate(*packages[j], s);
        if (first) phi0[j] = v;
        d.raw_phi[j] = std::max(d.raw_phi[j], std::abs(v - phi0[j]));
      }
      first = false;
    });
  } catch (const NumericalFailure&) {
    d.failed = true;
  }
  return d;
}

inline bool same_state(const FourierState& a, const FourierState& b) {
  return a.n() == b.n() && std::equal(a.coeffs().begin(), a.coeffs().end(), b.coeffs().begin());
}

}  // namespace detail

/// Seed for the sample stream at beta_grid[index].
inline std::uint64_t beta_stream_seed(std::uint64_t seed, std::size_t index) { return mix64(seed + 0x51ed2701ULL * (index + 1)); }

/// A single-mode state of typical size; its actions are constants of the motion.
inline FourierState control_state(int n, int k, double beta) {
  FourierState s(n);
  s.set(k, Complex(std::sqrt(gaussian_action_mean(beta, k)), 0.0));
  return s;
}

/// Integrates each sample to T = c beta^2 (or c beta^{2.1}) and records the normalized drifts.
/// Samples must carry equal weights, so importance weighting is rejected. Consecutive identical
/// Metropolis states reuse the previous trajectory.
inline DriftRun run_drift_at(const ExperimentConfig& config, std::size_t beta_index,
                             const std::vector<NormalFormPackage>& packages) {
  const double beta = config.beta_grid.at(beta_index);
  if (config.sampler.method == SamplingMethod::ImportanceWeights) {
    throw InvalidArgument("drift experiments need equal-weight samples; use gaussian-only or independence-metropolis");
  }
  if (packages.size() != config.tk_list.size()) throw InvalidArgument("run_drift_at: one package per tracked mode required");
  DriftRun run;
  run.beta = beta;
  run.horizon = config.horizon(beta);
  run.delta = config.delta_rule.at(beta);
  const ModelParams params = config.params_at(beta);

  std::vector<int> modes;
  if (config.all_modes) {
    for (int k = -params.n; k <= params.n; ++k) modes.push_back(k);
  }
  for (int k : config.tk_list) {
    if (std::find(modes.begin(), modes.end(), k) == modes.end()) modes.push_back(k);
  }
  std::vector<const NormalFormPackage*> pkg_ptrs;
  for (const auto& p : packages) {
    pkg_ptrs.push_back(&p);
    run.resonance_counts[p.tk] = p.resonance_count();
  }

  IntegratorConfig ic = config.integrator;
  ic.t_end = run.horizon;
  ic.observe_every = static_cast<int>(std::max<long>(1, ic.steps() / config.observations));

  SamplerConfig sc = config.sampler;
  sc.params = params;
  sc.seed = beta_stream_seed(config.sampler.seed, beta_index);
  const auto samples = draw_samples(sc);

  auto emit = [&](int sample, const detail::TrackedDrift& d, const std::string& flag) {
    for (std::size_t j = 0; j < modes.size(); ++j) {
      DriftRecord r;
      r.sample = sample;
      r.k = modes[j];
      r.beta = beta;
      r.horizon = run.horizon;
      r.flags = d.failed ? "nan" : flag;
      r.raw_I = d.failed ? std::numeric_limits<double>::quiet_NaN() : d.raw_i[j];
      r.drift_I = r.raw_I * drift_scale(r.k, beta);
      for (std::size_t p = 0; p < packages.size(); ++p) {
        if (packages[p].tk == r.k) {
          r.raw_phi = d.failed ? std::numeric_limits<double>::quiet_NaN() : d.raw_phi[p];
          r.drift_phi = *r.raw_phi * drift_scale(r.k, beta);
        }
      }
      run.records.push_back(r);
    }
  };

  std::optional<FourierState> previous;
  detail::TrackedDrift last;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i].state;
    if (!previous || !detail::same_state(*previous, s)) {
      last = detail::track_drift(s, modes, pkg_ptrs, ic, params, config.nf_truncation);
      previous = s;
      ++run.distinct_trajectories;
      if (last.failed) ++run.failed_samples;
      run.max_leakage = std::max(run.max_leakage, last.leakage);
    } else if (last.failed) {
      ++run.failed_samples;
    }
    emit(static_cast<int>(i), last, "");
  }
  if (config.control_sample) {
    const auto d = detail::track_drift(control_state(params.n, config.tk_list.front(), beta), modes, pkg_ptrs, ic, params,
                                       config.nf_truncation);
    emit(static_cast<int>(samples.size()), d, "control");
  }
  return run;
}

/// Normal-form packages for every tracked mode at beta_grid[index].
inline std::vector<NormalFormPackage> build_packages(const ExperimentConfig& config, std::size_t beta_index) {
  const double beta = config.beta_grid.at(beta_index);
  std::vector<NormalFormPackage> out;
  for (int tk : config.tk_list) {
    out.push_back(build_normal_form(config.nf_truncation, tk, config.params_at(beta), CutoffSpec{config.delta_rule.at(beta)}));
  }
  return out;
}

inline std::vector<DriftRun> run_drift_experiment(const ExperimentConfig& config) {
  config.validate();
  std::vector<DriftRun> runs;
  for (std::size_t i = 0; i < config.beta_grid.size(); ++i) runs.push_back(run_drift_at(config, i, build_packages(config, i)));
  return runs;
}

/// Columns sample,k,T,drift_I_normalized,drift_phi_normalized,flags; T separates the beta values.
inline void write_drift_csv(std::ostream& os, const std::vector<DriftRun>& runs) {
  os << "sample,k,T,drift_I_normalized,drift_phi_normalized,flags\n";
  os.precision(17);
  for (const auto& run : runs) {
    for (const auto& r : run.records) {
      os << r.sample << ',' << r.k << ',' << r.horizon << ',';
      if (std::isnan(r.drift_I)) {
        os << "nan";
      } else {
        os << r.drift_I;
      }
      os << ',';
      if (r.drift_phi) {
        if (std::isnan(*r.drift_phi)) {
          os << "nan";
        } else {
          os << *r.drift_phi;
        }
      }
      os << ',' << r.flags << '\n';
    }
  }
}

struct DriftSummary {
  double beta = 0.0;
  int k = 0;
  int n_valid = 0;
  int failed = 0;
  double median_I = 0.0;
  double median_I_se = 0.0;
  std::optional<double> median_phi;
  std::optional<double> median_phi_se;

  nlohmann::json to_json() const {
    nlohmann::json j = {{"beta", beta}, {"k", k}, {"n_valid", n_valid}, {"failed", failed},
                        {"median_I", median_I}, {"median_I_stderr", median_I_se}};
    if (median_phi) {
      j["median_phi"] = *median_phi;
      j["median_phi_stderr"] = *median_phi_se;
    }
    return j;
  }
};

/// Medians over valid, non-control records of mode k, with bootstrap standard errors.
inline DriftSummary summarize_drift(const DriftRun& run, int k, int resamples = 400, std::uint64_t seed = 7) {
  DriftSummary s;
  s.beta = run.beta;
  s.k = k;
  std::vector<double> di, dp;
  for (const auto& r : run.records) {
    if (r.k != k) continue;
    if (r.flags == "nan") ++s.failed;
    if (!r.valid()) continue;
    di.push_back(r.drift_I);
    if (r.drift_phi) dp.push_back(*r.drift_phi);
  }
  s.n_valid = static_cast<int>(di.size());
  if (di.empty()) throw InvalidArgument("summarize_drift: no valid records for mode " + std::to_string(k));
  s.median_I = median(di);
  s.median_I_se = bootstrap_median_stderr(di, resamples, seed);
  if (!dp.empty()) {
    s.median_phi = median(dp);
    s.median_phi_se = bootstrap_median_stderr(dp, resamples, seed + 1);
  }
  return s;
}

// ---------------------------------------------------------------------------------------------
// Bad sets and Chebyshev envelopes

enum class DriftQuantity { Action, Phi };

struct BadSetReport {
  int k = 0;
  double eta1 = 0.0;
  int exceed = 0;
  int n = 0;
  double fraction = 0.0;
  double std_error = 0.0;

  nlohmann::json to_json() const {
    return {{"k", k}, {"eta1", eta1}, {"exceed", exceed}, {"n", n}, {"fraction", fraction}, {"stderr", std_error}};
  }
};

inline BadSetReport bad_fraction(const std::vector<double>& drifts, int k, double eta1) {
  BadSetReport b;
  b.k = k;
  b.eta1 = eta1;
  b.n = static_cast<int>(drifts.size());
  for (double d : drifts) b.exceed += d > eta1 ? 1 : 0;
  if (b.n > 0) {
    b.fraction = double(b.exceed) / b.n;
    b.std_error = std::sqrt(b.fraction * (1.0 - b.fraction) / b.n);
  }
  return b;
}

/// Empirical fraction of valid samples whose normalized drift of mode k exceeds eta1.
inline BadSetReport estimate_bad_set(const std::vector<DriftRecord>& records, int k, double eta1,
                                     DriftQuantity which = DriftQuantity::Phi) {
  std::vector<double> drifts;
  for (const auto& r : records) {
    if (r.k != k || !r.valid()) continue;
    if (which == DriftQuantity::Phi) {
      if (!r.drift_phi) throw InvalidArgument("estimate_bad_set: no Phi drift recorded for mode " + std::to_string(k));
      drifts.push_back(*r.drift_phi);
    } else {
      drifts.push_back(r.drift_I);
    }
  }
  return bad_fraction(drifts, k, eta1);
}

/// Norms entering the Chebyshev envelope, estimated on a sample independent of the drift run.
struct FlowNorms {
  Estimate phi_dot;     // ||{H, Phi}||_{mu_beta}
  Estimate action_dot;  // ||{H, I_k}||_{mu_beta}
  Estimate action;      // ||I_k||_{mu_beta}

  nlohmann::json to_json() const {
    return {{"phi_dot", phi_dot.to_json()}, {"action_dot", action_dot.to_json()}, {"action", action.to_json()}};
  }
};

inline FlowNorms estimate_flow_norms(const NormalFormPackage& pkg, const SamplerConfig& config) {
  const auto samples = draw_samples(config);
  const int k = pkg.tk;
  FlowNorms f;
  f.phi_dot = estimate_norm([&](const FourierState& s) { return phi6_time_derivative(pkg, s, config.params); }, samples);
  f.action_dot = estimate_norm([&](const FourierState& s) { return action_time_derivative(s, k, config.params); }, samples);
  f.action = estimate_norm([&](const FourierState& s) { return action(s, k); }, samples);
  return f;
}

struct ChebyshevReport {
  double beta = 0.0;
  double horizon = 0.0;
  int k = 0;
  double eta1 = 0.0;
  FlowNorms norms;
  BadSetReport bad;             // drift normalized by (1+k²) beta
  double envelope = 0.0;        // T² ||Phi'||² ((1+k²) beta)² / eta1²
  BadSetReport bad_rel;         // drift normalized by ||I_k||
  double envelope_rel = 0.0;    // T² ||Phi'||² / (eta1² ||I_k||²)
  bool pass = false;

  nlohmann::json to_json() const {
    return {{"beta", beta},         {"T", horizon},        {"k", k},
            {"eta1", eta1},         {"norms", norms.to_json()}, {"bad", bad.to_json()},
            {"envelope", envelope}, {"bad_rel", bad_rel.to_json()}, {"envelope_rel", envelope_rel},
            {"pass", pass}};
  }
};

/// Since sup_{t<=T} |Phi(t) - Phi(0)| <= ∫_0^T |Phi'| and the flow preserves mu_beta,
/// mu(sup drift > x) <= T² ||Phi'||² / x². Checked for both normalizations; a violation
/// counts only beyond 3 standard errors of the empirical fraction.
inline ChebyshevReport chebyshev_check(const DriftRun& run, int k, double eta1, const FlowNorms& norms) {
  ChebyshevReport c;
  c.beta = run.beta;
  c.horizon = run.horizon;
  c.k = k;
  c.eta1 = eta1;
  c.norms = norms;
  c.bad = estimate_bad_set(run.records, k, eta1, DriftQuantity::Phi);
  const double t2 = run.horizon * run.horizon;
  const double phidot2 = norms.phi_dot.mean * norms.phi_dot.mean;
  const double scale = drift_scale(k, run.beta);
  c.envelope = t2 * phidot2 * scale * scale / (eta1 * eta1);
  std::vector<double> rel;
  for (const auto& r : run.records) {
    if (r.k == k && r.valid() && r.raw_phi) rel.push_back(*r.raw_phi / norms.action.mean);
  }
  c.bad_rel = bad_fraction(rel, k, eta1);
  c.envelope_rel = t2 * phidot2 / (eta1 * eta1 * norms.action.mean * norms.action.mean);
  c.pass = c.bad.fraction - 3.0 * c.bad.std_error <= std::min(1.0, c.envelope) &&
           c.bad_rel.fraction - 3.0 * c.bad_rel.std_error <= std::min(1.0, c.envelope_rel);
  return c;
}

// ---------------------------------------------------------------------------------------------
// Union bound over all modes

struct CorollaryMode {
  int k = 0;
  double threshold = 0.0;  // on the (1+k²) beta normalized drift
  double fraction = 0.0;
  double eta2_k = 0.0;
};

struct CorollaryReport {
  double alpha = 0.0;
  double eta1 = 0.0;
  double eta2 = 0.0;
  std::vector<CorollaryMode> modes;
  double union_fraction = 0.0;
  double sum_fraction = 0.0;
  int n = 0;
  bool pass = false;

  nlohmann::json to_json() const {
    nlohmann::json ms = nlohmann::json::array();
    for (const auto& m : modes) {
      ms.push_back({{"k", m.k}, {"threshold", m.threshold}, {"fraction", m.fraction}, {"eta2_k", m.eta2_k}});
    }
    return {{"alpha", alpha}, {"eta1", eta1}, {"eta2", eta2}, {"modes", ms}, {"union", union_fraction},
            {"sum", sum_fraction}, {"n", n}, {"pass", pass}};
  }
};

/// Measure of ∪_k {|I_k(t) - I_k(0)| > eta1 / ((1+k²)^alpha beta)} over the valid samples of one run.
/// Per-mode budgets eta2_k = eta2 / ((1+k²) π coth π) sum to eta2 over Z.
inline CorollaryReport corollary_all_modes(const std::vector<DriftRecord>& records, double alpha, double eta1,
                                           double eta2, int k_max) {
  if (!(alpha < 0.5)) throw InvalidArgument("corollary_all_modes: alpha must be below 1/2");
  if (k_max < 0) throw InvalidArgument("corollary_all_modes: k_max must be nonnegative");
  CorollaryReport rep;
  rep.alpha = alpha;
  rep.eta1 = eta1;
  rep.eta2 = eta2;
  std::map<int, std::map<int, double>> by_sample;  // sample -> k -> normalized drift
  for (const auto& r : records) {
    if (!r.valid() || std::abs(r.k) > k_max) continue;
    by_sample[r.sample][r.k] = r.drift_I;
  }
  rep.n = static_cast<int>(by_sample.size());
  if (rep.n == 0) return rep;
  std::set<int> bad_samples;
  for (int k = -k_max; k <= k_max; ++k) {
    CorollaryMode m;
    m.k = k;
    m.threshold = eta1 * std::pow(1.0 + double(k) * k, 1.0 - alpha);
    m.eta2_k = eta2 / ((1.0 + double(k) * k) * lattice_sum());
    int exceed = 0;
    for (const auto& [sample, drifts] : by_sample) {
      const auto it = drifts.find(k);
      if (it == drifts.end()) throw InvalidArgument("corollary_all_modes: no record for mode " + std::to_string(k));
      if (it->second > m.threshold) {
        ++exceed;
        bad_samples.insert(sample);
      }
    }
    m.fraction = double(exceed) / rep.n;
    rep.sum_fraction += m.fraction;
    rep.modes.push_back(m);
  }
  rep.union_fraction = double(bad_samples.size()) / rep.n;
  rep.pass = rep.union_fraction <= eta2;
  return rep;
}

// ---------------------------------------------------------------------------------------------
// Stationarity of mu_beta under the flow

struct StationarityReport {
  double beta = 0.0;
  double horizon = 0.0;
  int k = 0;
  Estimate at_start;
  Estimate at_end;
  double sigma = 0.0;
  bool pass = false;

  nlohmann::json to_json() const {
    return {{"beta", beta}, {"T", horizon}, {"k", k}, {"start", at_start.to_json()}, {"end", at_end.to_json()},
            {"sigma", sigma}, {"pass", pass}};
  }
};

/// <I_k> at t = 0 against <I_k(T)>, both weighted by the initial-data weights.
inline StationarityReport stationarity_check(const SamplerConfig& config, const IntegratorConfig& integrator, int k) {
  const auto samples = draw_samples(config);
  StationarityReport rep;
  rep.beta = config.params.beta;
  rep.horizon = integrator.t_end;
  rep.k = k;
  std::vector<WeightedSample> evolved;
  evolved.reserve(samples.size());
  StrangStepper stepper(config.params, config.params.n);
  integrator.validate(config.params.n);
  const long steps = integrator.steps();
  std::optional<FourierState> prev_in;
  FourierState prev_out;
  for (const auto& s : samples) {
    if (!prev_in || !detail::same_state(*prev_in, s.state)) {
      FourierState x = s.state;
      for (long i = 0; i < steps; ++i) stepper.step(x, integrator.dt);
      if (!finite_state(x)) throw NumericalFailure("stationarity_check: non-finite state");
      prev_in = s.state;
      prev_out = x;
    }
    evolved.push_back({prev_out, s.log_weight});
  }
  const auto obs = [k](const FourierState& s) { return action(s, k); };
  rep.at_start = estimate_mean(obs, samples);
  rep.at_end = estimate_mean(obs, evolved);
  rep.sigma = std::hypot(rep.at_start.std_error, rep.at_end.std_error);
  rep.pass = std::abs(rep.at_start.mean - rep.at_end.mean) <= 3.0 * rep.sigma;
  return rep;
}

// ---------------------------------------------------------------------------------------------
// Norm scaling fits

enum class NormMeasure { Gaussian, Gibbs };

inline SamplerConfig measure_sampler(const ModelParams& params, std::uint64_t seed, int n_samples, NormMeasure m) {
  SamplerConfig sc;
  sc.params = params;
  sc.seed = seed;
  sc.n_samples = n_samples;
  sc.method = m == NormMeasure::Gaussian ? SamplingMethod::GaussianOnly : SamplingMethod::ImportanceWeights;
  return sc;
}

struct PhiDotRow {
  double beta = 0.0;
  double delta = 0.0;
  Estimate phi_dot;
  Estimate action_dot;
  double ratio = 0.0;
};

struct PhiDotReport {
  int k = 0;
  NormMeasure measure = NormMeasure::Gaussian;
  std::vector<PhiDotRow> rows;
  double phi_slope = 0.0;
  double action_slope = 0.0;
  double ratio_slope = 0.0;
  bool phi_pass = false;     // slope <= -3.1 + 0.5
  bool action_pass = false;  // slope within -2 +- 0.3
  bool ratio_pass = false;   // slope <= -1 + 0.2
  bool pass = false;

  nlohmann::json to_json() const {
    nlohmann::json rs = nlohmann::json::array();
    for (const auto& r : rows) {
      rs.push_back({{"beta", r.beta}, {"delta", r.delta}, {"phi_dot", r.phi_dot.to_json()},
                    {"action_dot", r.action_dot.to_json()}, {"ratio", r.ratio}});
    }
    return {{"k", k},
            {"measure", measure == NormMeasure::Gaussian ? "gaussian" : "gibbs"},
            {"rows", rs},
            {"phi_slope", phi_slope},
            {"action_slope", action_slope},
            {"ratio_slope", ratio_slope},
            {"phi_pass", phi_pass},
            {"action_pass", action_pass},
            {"ratio_pass", ratio_pass},
            {"pass", pass}};
  }
};

/// ||{H, Phi^(6)_k}|| and ||{H, I_k}|| over the beta grid, with log-log slope fits.
inline PhiDotReport verify_phi_dot_norm(const ExperimentConfig& config, int k, int n_samples,
                                        NormMeasure measure = NormMeasure::Gaussian) {
  config.validate();
  PhiDotReport rep;
  rep.k = k;
  rep.measure = measure;
  std::vector<double> betas, phis, acts, ratios;
  for (std::size_t i = 0; i < config.beta_grid.size(); ++i) {
    const double beta = config.beta_grid[i];
    const ModelParams params = config.params_at(beta);
    const auto pkg = build_normal_form(config.nf_truncation, k, params, CutoffSpec{config.delta_rule.at(beta)});
    const auto samples = draw_samples(measure_sampler(params, beta_stream_seed(config.sampler.seed, i), n_samples, measure));
    PhiDotRow row;
    row.beta = beta;
    row.delta = pkg.cutoff.delta;
    row.phi_dot = estimate_norm([&](const FourierState& s) { return phi6_time_derivative(pkg, s, params); }, samples);
    row.action_dot = estimate_norm([&](const FourierState& s) { return action_time_derivative(s, k, params); }, samples);
    row.ratio = row.phi_dot.mean / row.action_dot.mean;
    betas.push_back(beta);
    phis.push_back(row.phi_dot.mean);
    acts.push_back(row.action_dot.mean);
    ratios.push_back(row.ratio);
    rep.rows.push_back(row);
  }
  if (betas.size() >= 2) {
    rep.phi_slope = fit_power_law(betas, phis).slope;
    rep.action_slope = fit_power_law(betas, acts).slope;
    rep.ratio_slope = fit_power_law(betas, ratios).slope;
    rep.phi_pass = rep.phi_slope <= -3.1 + 0.5;
    rep.action_pass = std::abs(rep.action_slope + 2.0) <= 0.3;
    rep.ratio_pass = rep.ratio_slope <= -1.0 + 0.2;
  }
  rep.pass = rep.phi_pass && rep.action_pass;
  return rep;
}

struct DeltaSweepRow {
  double delta = 0.0;
  Estimate remainder;  // ||{H, Phi} + R6^R||, the degree >= 8 part
  Estimate resonant;   // ||R6^R||
};

struct DeltaSweepReport {
  double beta = 0.0;
  int k = 0;
  std::vector<DeltaSweepRow> rows;
  bool crossing = false;  // the larger contribution changes across the sweep

  nlohmann::json to_json() const {
    nlohmann::json rs = nlohmann::json::array();
    for (const auto& r : rows) {
      rs.push_back({{"delta", r.delta}, {"remainder", r.remainder.to_json()}, {"resonant", r.resonant.to_json()}});
    }
    return {{"beta", beta}, {"k", k}, {"rows", rs}, {"crossing", crossing}};
  }
};

/// Splits ||{H, Phi}|| into its resonant part and the higher-degree remainder as delta varies.
inline DeltaSweepReport delta_sweep(const ExperimentConfig& config, double beta, int k, const std::vector<double>& deltas,
                                    int n_samples) {
  DeltaSweepReport rep;
  rep.beta = beta;
  rep.k = k;
  const ModelParams params = config.params_at(beta);
  const auto samples = draw_samples(measure_sampler(params, config.sampler.seed, n_samples, NormMeasure::Gaussian));
  std::optional<bool> first_sign;
  for (double d : deltas) {
    const auto pkg = build_normal_form(config.nf_truncation, k, params, CutoffSpec{d});
    DeltaSweepRow row;
    row.delta = d;
    row.remainder = estimate_norm(
        [&](const FourierState& s) {
          return phi6_time_derivative(pkg, s, params) + pkg.r6_resonant.evaluate(s.restricted(pkg.n)).real();
        },
        samples);
    row.resonant = estimate_norm([&](const FourierState& s) { return pkg.r6_resonant.evaluate(s.restricted(pkg.n)).real(); },
                                 samples);
    const bool sign = row.remainder.mean > row.resonant.mean;
    if (!first_sign) first_sign = sign;
    rep.crossing = rep.crossing || sign != *first_sign;
    rep.rows.push_back(row);
  }
  return rep;
}

struct ConstituentRow {
  double beta = 0.0;
  int k = 0;
  std::size_t resonance_count = 0;
  Estimate phi_minus_action;  // ||Phi^(6)_k - I_k||_{g,beta}
  std::optional<Estimate> resonant;  // ||R6^R||_{g,beta}; empty when R6^R has no terms
};

struct ConstituentReport {
  std::vector<ConstituentRow> rows;
  std::map<int, double> phi_slope;       // per k, predicted -1.7
  std::map<int, double> resonant_slope;  // per k, predicted -3.1
  std::vector<double> mode_ratio;        // per beta: ||Phi-I||(k=3) (1+9) / ||Phi-I||(k=0)
  bool skipped = false;
  bool slopes_pass = false;
  bool mode_pass = false;
  bool pass = false;

  nlohmann::json to_json() const {
    nlohmann::json rs = nlohmann::json::array();
    for (const auto& r : rows) {
      nlohmann::json j = {{"beta", r.beta}, {"k", r.k}, {"resonance_count", r.resonance_count},
                          {"phi_minus_action", r.phi_minus_action.to_json()}};
      j["resonant"] = r.resonant ? r.resonant->to_json() : nlohmann::json(nullptr);
      rs.push_back(j);
    }
    nlohmann::json ps = nlohmann::json::object(), qs = nlohmann::json::object();
    for (auto [k, s] : phi_slope) ps[std::to_string(k)] = s;
    for (auto [k, s] : resonant_slope) qs[std::to_string(k)] = s;
    return {{"rows", rs},           {"phi_slope", ps},          {"resonant_slope", qs},
            {"mode_ratio", mode_ratio}, {"skipped", skipped},   {"slopes_pass", slopes_pass},
            {"mode_pass", mode_pass},   {"pass", pass}};
  }
};

/// Predicted slopes at delta = beta^{-13/10}: ||Phi - I|| ~ beta^{-1.7}, ||R6^R|| ~ beta^{-3.1}.
inline constexpr double kPhiMinusActionSlope = -1.7;
inline constexpr double kResonantSlope = -3.1;

/// Gaussian-norm estimates of Phi^(6)_k - I_k and R6^R over the beta grid for each k in ks.
/// Slopes must match within 0.4; when 0 and 3 are both in ks, (1+9)||Phi-I||_{k=3}/||Phi-I||_{k=0}
/// must lie within a factor 3 of 1. An empty R6^R is reported as skipped.
inline ConstituentReport verify_constituent_bounds(const ExperimentConfig& config, const std::vector<int>& ks, int n_samples) {
  config.validate();
  ConstituentReport rep;
  std::map<int, std::vector<double>> betas, phi_norms, res_betas, res_norms;
  std::map<double, std::map<int, double>> by_beta;
  for (std::size_t i = 0; i < config.beta_grid.size(); ++i) {
    const double beta = config.beta_grid[i];
    const ModelParams params = config.params_at(beta);
    const auto samples =
        draw_samples(measure_sampler(params, beta_stream_seed(config.sampler.seed, i), n_samples, NormMeasure::Gaussian));
    for (int k : ks) {
      const auto pkg = build_normal_form(config.nf_truncation, k, params, CutoffSpec{config.delta_rule.at(beta)});
      ConstituentRow row;
      row.beta = beta;
      row.k = k;
      row.resonance_count = pkg.resonance_count();
      row.phi_minus_action =
          estimate_norm([&](const FourierState& s) { return phi6_evaluate(pkg, s) - action(s, k); }, samples);
      betas[k].push_back(beta);
      phi_norms[k].push_back(row.phi_minus_action.mean);
      by_beta[beta][k] = row.phi_minus_action.mean;
      if (pkg.r6_resonant.empty()) {
        rep.skipped = true;
      } else {
        row.resonant = estimate_norm(
            [&](const FourierState& s) { return pkg.r6_resonant.evaluate(s.restricted(pkg.n)).real(); }, samples);
        res_betas[k].push_back(beta);
        res_norms[k].push_back(row.resonant->mean);
      }
      rep.rows.push_back(row);
    }
  }
  bool slopes_ok = true;
  for (int k : ks) {
    if (betas[k].size() >= 2) {
      rep.phi_slope[k] = fit_power_law(betas[k], phi_norms[k]).slope;
      slopes_ok = slopes_ok && std::abs(rep.phi_slope[k] - kPhiMinusActionSlope) <= 0.4;
    }
    if (res_betas[k].size() >= 2) {
      rep.resonant_slope[k] = fit_power_law(res_betas[k], res_norms[k]).slope;
      slopes_ok = slopes_ok && std::abs(rep.resonant_slope[k] - kResonantSlope) <= 0.4;
    }
  }
  rep.slopes_pass = slopes_ok && !rep.skipped && config.beta_grid.size() >= 2;
  const bool has_modes = std::find(ks.begin(), ks.end(), 0) != ks.end() && std::find(ks.begin(), ks.end(), 3) != ks.end();
  rep.mode_pass = has_modes;
  if (has_modes) {
    for (const auto& [beta, m] : by_beta) {
      const double r = m.at(3) * 10.0 / m.at(0);
      rep.mode_ratio.push_back(r);
      rep.mode_pass = rep.mode_pass && r >= 1.0 / 3.0 && r <= 3.0;
    }
  }
  rep.pass = rep.slopes_pass && rep.mode_pass;
  return rep;
}

// ---------------------------------------------------------------------------------------------
// Lemma verdicts

struct LemmaVerdict {
  std::string lemma;
  double estimate = 0.0;
  double bound_or_slope = 0.0;
  bool pass = false;
  nlohmann::json details;

  nlohmann::json to_json() const {
    return {{"lemma", lemma}, {"estimate", estimate}, {"bound_or_slope", bound_or_slope}, {"pass", pass},
            {"details", details}};
  }
};

inline const std::vector<std::string>& lemma_names() {
  static const std::vector<std::string> names{"stimaazione", "grandideviazioni", "gausemplice", "gau",
                                              "stimaresto",  "resonantpart",     "phidot"};
  return names;
}

namespace detail {

inline std::vector<double> norm_quantiles(std::vector<double> norms, const std::vector<double>& qs) {
  std::sort(norms.begin(), norms.end());
  std::vector<double> out;
  for (double q : qs) out.push_back(norms[static_cast<std::size_t>(q * double(norms.size() - 1))]);
  return out;
}

}  // namespace detail

/// Runs one named bound check on the config's grid; n_samples Monte Carlo draws per point.
inline LemmaVerdict verify_lemma(const std::string& name, const ExperimentConfig& config, int n_samples) {
  config.validate();
  LemmaVerdict v;
  v.lemma = name;
  const int tk = config.tk_list.front();
  if (name == "stimaazione") {
    // (1+k²) beta ||I_k||_{mu_beta} within [0.5, 5] for every tracked k and beta.
    v.bound_or_slope = 0.5;
    v.estimate = std::numeric_limits<double>::infinity();
    v.pass = true;
    nlohmann::json reports = nlohmann::json::array();
    for (std::size_t i = 0; i < config.beta_grid.size(); ++i) {
      const auto sc = measure_sampler(config.params_at(config.beta_grid[i]), beta_stream_seed(config.sampler.seed, i),
                                      n_samples, NormMeasure::Gibbs);
      const auto rep = verify_action_lower_bound(config.tk_list, sc, 0.5);
      for (const auto& row : rep.rows) {
        v.estimate = std::min(v.estimate, row.ratio);
        v.pass = v.pass && row.ratio >= 0.5 && row.ratio <= 5.0;
      }
      reports.push_back(rep.to_json());
    }
    v.details = {{"reports", reports}, {"upper", 5.0}};
  } else if (name == "grandideviazioni") {
    const double beta = config.beta_grid.front();
    const auto samples =
        draw_samples(measure_sampler(config.params_at(beta), config.sampler.seed, n_samples, NormMeasure::Gibbs));
    std::vector<double> norms;
    for (const auto& s : samples) norms.push_back(hs_norm(s.state, 1.0 / 3.0));
    const auto thresholds = detail::norm_quantiles(norms, {0.5, 0.6, 0.7, 0.8, 0.85, 0.9, 0.95, 0.98});
    const auto rep = tail_probability(thresholds, 1.0 / 3.0, samples, beta);
    v.estimate = rep.slope;
    v.bound_or_slope = -0.25;
    v.pass = rep.pass;
    v.details = rep.to_json();
  } else if (name == "gausemplice" || name == "gau") {
    // H4 for the plain bound; Phi_{k,4}, which carries an (M, k) admissibility tag, for the sharper one.
    v.pass = true;
    v.estimate = 0.0;
    v.bound_or_slope = 0.0;
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t i = 0; i < config.beta_grid.size(); ++i) {
      const double beta = config.beta_grid[i];
      const ModelParams params = config.params_at(beta);
      const auto sc = measure_sampler(params, beta_stream_seed(config.sampler.seed, i), n_samples, NormMeasure::Gaussian);
      GaussianNormReport rep;
      if (name == "gausemplice") {
        rep = gaussian_norm_check(build_h2j(config.nf_truncation, params, 2), sc);
      } else {
        const auto pkg = build_normal_form(config.nf_truncation, tk, params, CutoffSpec{config.delta_rule.at(beta)});
        rep = gaussian_norm_check(pkg.phi4, sc);
      }
      const double bound = rep.admissible_bound.value_or(rep.bound);
      if (i == 0) {
        v.estimate = rep.norm.mean;
        v.bound_or_slope = bound;
      }
      v.pass = v.pass && rep.pass;
      auto j = rep.to_json();
      j["beta"] = beta;
      rows.push_back(j);
    }
    v.details = {{"rows", rows}};
  } else if (name == "stimaresto" || name == "resonantpart") {
    std::vector<int> ks = config.tk_list;
    for (int extra : {0, 3}) {
      if (std::abs(extra) <= config.nf_truncation && std::find(ks.begin(), ks.end(), extra) == ks.end()) ks.push_back(extra);
    }
    const auto rep = verify_constituent_bounds(config, ks, n_samples);
    v.details = rep.to_json();
    if (name == "stimaresto") {
      v.estimate = rep.phi_slope.count(tk) ? rep.phi_slope.at(tk) : std::numeric_limits<double>::quiet_NaN();
      v.bound_or_slope = kPhiMinusActionSlope;
      v.pass = rep.mode_pass && std::abs(v.estimate - kPhiMinusActionSlope) <= 0.4;
    } else if (rep.skipped) {
      v.estimate = std::numeric_limits<double>::quiet_NaN();
      v.bound_or_slope = kResonantSlope;
      v.pass = false;
      v.details["status"] = "skip";
    } else {
      v.estimate = rep.resonant_slope.count(tk) ? rep.resonant_slope.at(tk) : std::numeric_limits<double>::quiet_NaN();
      v.bound_or_slope = kResonantSlope;
      v.pass = std::abs(v.estimate - kResonantSlope) <= 0.4;
    }
  } else if (name == "phidot") {
    const auto rep = verify_phi_dot_norm(config, tk, n_samples);
    v.estimate = rep.phi_slope;
    v.bound_or_slope = -3.1 + 0.5;
    v.pass = rep.pass;
    v.details = rep.to_json();
  } else {
    throw InvalidArgument("verify_lemma: unknown lemma '" + name + "'");
  }
  v.details["provenance"] = config.provenance();
  return v;
}

}  // namespace nlsgibbs
