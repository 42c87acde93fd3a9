#pragma once

// Sixth-order approximate invariant Phi^(6)_tk of the truncated NLS and its building blocks.
//
// All brackets here are flow brackets, so that L_f g := flow_bracket(f, g) and
// dF/dt = flow_bracket(H, F). The construction:
//   chi4 = -L_{H2}^{-1} H4^R,                       Z4 = H4^N
//   G    = ½{H4^R, chi4} + {Z4, chi4} + H6,         Z6 = G^N,  chi6 = -L_{H2}^{-1} G^R
//   Phi2 = |psi_tk|²,  Phi4 = {chi4, Phi2},  Phi6 = ½{chi4, Phi4} + {chi6, Phi2}
//   R6   = {Phi2, Z6} = R6^NR + R6^R  (factors rho(a/delta) and 1 - rho(a/delta))
//   Phi~ = Σ R6_k rho(a_k/delta) / (4 i b a_k) m_k, solving {Z4, Phi~} = R6^NR
//   Phi^(6) = Phi2 + Phi4 + Phi6 + Phi~ + {chi4, Phi~}
// with Z4 = A (Σ I)² - b Σ I² and a_k the signed sum of the actions of m_k.

#include <cmath>
#include <complex>
#include <map>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "nlsgibbs/cutoff.hpp"
#include "nlsgibbs/error.hpp"
#include "nlsgibbs/fourier_state.hpp"
#include "nlsgibbs/modulated_polynomial.hpp"
#include "nlsgibbs/monomial.hpp"
#include "nlsgibbs/sparse_polynomial.hpp"
#include "nlsgibbs/statistics.hpp"

namespace nlsgibbs {

namespace detail {

/// Sorted multisets of `size` modes from [-n, n].
inline void multisets(int n, int size, std::vector<int>& current, std::vector<std::vector<int>>& out) {
  if (static_cast<int>(current.size()) == size) {
    out.push_back(current);
    return;
  }
  const int start = current.empty() ? -n : current.back();
  for (int k = start; k <= n; ++k) {
    current.push_back(k);
    multisets(n, size, current, out);
    current.pop_back();
  }
}

/// Number of distinct orderings of a sorted list.
inline double orderings(const std::vector<int>& sorted) {
  double r = std::tgamma(static_cast<double>(sorted.size()) + 1.0);
  std::size_t i = 0;
  while (i < sorted.size()) {
    std::size_t j = i;
    while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
    r /= std::tgamma(static_cast<double>(j - i) + 1.0);
    i = j;
  }
  return r;
}

}  // namespace detail

/// Canonical zero-momentum monomials of the given half degree over |k| <= n.
inline std::vector<Monomial> zero_momentum_monomials(int n, int half) {
  std::vector<std::vector<int>> sets;
  std::vector<int> cur;
  detail::multisets(n, half, cur, sets);
  std::map<int, std::vector<std::size_t>> by_sum;
  for (std::size_t i = 0; i < sets.size(); ++i) {
    int s = 0;
    for (int k : sets[i]) s += k;
    by_sum[s].push_back(i);
  }
  std::vector<Monomial> out;
  for (const auto& [s, idx] : by_sum) {
    for (auto i : idx) {
      for (auto j : idx) out.push_back(Monomial::make(sets[i], sets[j]));
    }
  }
  return out;
}

/// H_{2j} = (c_j / 2j) ∫ |psi|^{2j} as a polynomial in the Fourier coefficients over |k| <= n.
/// Each canonical monomial carries (c_j/2j) (2π)^{1-j} times the number of orderings of each half.
inline SparsePolynomial build_h2j(int n, const ModelParams& params, int j) {
  if (j < 2 || j > params.q()) throw InvalidArgument("build_h2j: need 2 <= j <= q, got j = " + std::to_string(j));
  if (j > Monomial::kMaxHalf) throw InvalidArgument("build_h2j: degree above 12 unsupported");
  SparsePolynomial h(n, 2 * j);
  const double cj = params.coefficient(j);
  if (cj == 0.0) return h;
  const double base = cj / (2.0 * j) * std::pow(kTwoPi, 1 - j);
  for (const auto& m : zero_momentum_monomials(n, j)) {
    h.add_term(m, base * detail::orderings(m.holo_modes()) * detail::orderings(m.anti_modes()));
  }
  return h;
}

/// a_k = Σ_{holo} |psi|² - Σ_{anti} |psi|² over the monomial's indices.
inline double a_k(const FourierState& state, const Monomial& m) {
  double a = 0.0;
  for (int i = 0; i < m.half_degree(); ++i) a += std::norm(state.at(m.holo(i))) - std::norm(state.at(m.anti(i)));
  return a;
}

/// omega_j = c2 (|psi_j|² + Σ_k |psi_k|²).
inline double omega(const FourierState& state, int j, double c2) { return c2 * (std::norm(state.at(j)) + l2_norm_squared(state)); }

struct NormalFormPackage {
  int n = 0;
  int tk = 0;
  ModelParams params;
  CutoffSpec cutoff;

  SparsePolynomial h2, h4, h6;
  SparsePolynomial z4, h4_range, chi4;
  SparsePolynomial g6, z6, chi6;
  SparsePolynomial phi2, phi4, phi6;
  SparsePolynomial r6;
  double z4_a = 0.0;  // Z4 = z4_a (Σ I)² - z4_b Σ I²
  double z4_b = 0.0;

  ModulatedPolynomial r6_nonresonant, r6_resonant;
  ModulatedPolynomial tilde_phi6;
  ModulatedPolynomial correction_f1, correction_f2;  // {chi4, Phi~} split by degree

  /// Number of distinct sextuple monomials contributing to R6.
  std::size_t resonance_count() const { return r6.size(); }

  Complex evaluate_complex(const FourierState& s) const {
    Complex v = phi2.evaluate(s) + phi4.evaluate(s) + phi6.evaluate(s);
    v += tilde_phi6.evaluate(s) + correction_f1.evaluate(s) + correction_f2.evaluate(s);
    return v;
  }

  Gradient gradient(const FourierState& s) const {
    Gradient g(s.n());
    phi2.accumulate_gradient(s, 1.0, g);
    phi4.accumulate_gradient(s, 1.0, g);
    phi6.accumulate_gradient(s, 1.0, g);
    tilde_phi6.accumulate_gradient(s, 1.0, g);
    correction_f1.accumulate_gradient(s, 1.0, g);
    correction_f2.accumulate_gradient(s, 1.0, g);
    return g;
  }
};

inline NormalFormPackage make_package(int n, int tk, const ModelParams& params, const CutoffSpec& cutoff) {
  params.validate();
  if (n < 1) throw InvalidArgument("normal form: truncation must be at least 1");
  if (std::abs(tk) > n) throw InvalidMode("normal form: target mode " + std::to_string(tk) + " outside |k| <= " + std::to_string(n));
  cutoff.validate(params.beta);
  NormalFormPackage p;
  p.n = n;
  p.tk = tk;
  p.params = params;
  p.params.n = n;
  p.cutoff = cutoff;
  p.h2 = build_h2(n);
  p.h4 = build_h2j(n, params, 2);
  p.h6 = params.q() >= 3 ? build_h2j(n, params, 3) : SparsePolynomial(n, 6);
  return p;
}

inline void build_z4_chi4(NormalFormPackage& p) {
  auto split = kernel_range_split(p.h4);
  p.z4 = std::move(split.kernel);
  p.h4_range = std::move(split.range);
  p.chi4 = lh2_invert(p.h4_range).scaled(-1.0);
  // Off-diagonal products I_0 I_1 carry 2A, squares I_0² carry A - b.
  const Complex diag = p.z4.coefficient(Monomial::make({0, 0}, {0, 0}));
  const Complex off = p.z4.coefficient(Monomial::make({0, 1}, {0, 1}));
  p.z4_a = off.real() / 2.0;
  p.z4_b = p.z4_a - diag.real();
}

inline void build_z6_chi6(NormalFormPackage& p) {
  SparsePolynomial g = flow_bracket(p.h4_range, p.chi4).scaled(0.5);
  g += flow_bracket(p.z4, p.chi4);
  g += p.h6;
  auto split = kernel_range_split(g);
  p.g6 = std::move(g);
  p.z6 = std::move(split.kernel);
  p.chi6 = lh2_invert(split.range).scaled(-1.0);
}

inline void build_phi_corrections(NormalFormPackage& p) {
  p.phi2 = action_polynomial(p.n, p.tk);
  p.phi4 = flow_bracket(p.chi4, p.phi2);
  p.phi6 = flow_bracket(p.chi4, p.phi4).scaled(0.5);
  p.phi6 += flow_bracket(p.chi6, p.phi2);
}

/// R6 from the weighted form -2i (h_tk - a_tk) z_m m over the monomials of Z6, where h_tk and
/// a_tk count tk in each half; terms with zero weight are dropped.
inline SparsePolynomial r6_weighted_form(const SparsePolynomial& z6, int tk) {
  SparsePolynomial r(z6.truncation(), z6.degree());
  for (const auto& [m, c] : z6.terms()) {
    const int w = m.holo_count(tk) - m.anti_count(tk);
    if (w != 0) r.add_term(m, Complex(0.0, -2.0 * w) * c);
  }
  r.set_admissibility(Admissibility{2, tk});
  return r;
}

inline void build_tilde_phi6(NormalFormPackage& p) {
  p.cutoff.validate(p.params.beta);
  const double delta = p.cutoff.delta;
  p.r6 = flow_bracket(p.phi2, p.z6);
  p.r6_nonresonant = ModulatedPolynomial(p.n, 6, delta);
  p.r6_resonant = ModulatedPolynomial(p.n, 6, delta);
  p.tilde_phi6 = ModulatedPolynomial(p.n, 6, delta);
  const Complex denominator(0.0, 4.0 * p.z4_b);
  for (const auto& [m, c] : p.r6.sorted_terms()) {
    if (m.action_only()) continue;
    const auto combo = ActionCombination::from_signature(m);
    p.r6_nonresonant.add_term(m, CoefficientKind::Cutoff, combo, c);
    p.r6_resonant.add_term(m, CoefficientKind::ResonantComplement, combo, c);
    p.tilde_phi6.add_term(m, CoefficientKind::CutoffOverA, combo, c / denominator);
  }
  const Admissibility two{2, p.tk};
  p.r6_nonresonant.set_admissibility(two);
  p.r6_resonant.set_admissibility(two);
  p.tilde_phi6.set_admissibility(two);
  auto corr = flow_bracket(p.chi4, p.tilde_phi6);
  p.correction_f1 = std::move(corr.f1);
  p.correction_f2 = std::move(corr.f2);
}

/// Runs every construction step.
inline NormalFormPackage build_normal_form(int n, int tk, const ModelParams& params, const CutoffSpec& cutoff) {
  auto p = make_package(n, tk, params, cutoff);
  build_z4_chi4(p);
  build_z6_chi6(p);
  build_phi_corrections(p);
  build_tilde_phi6(p);
  return p;
}

/// Phi^(6)_tk on the restriction of state to the package truncation; throws if the imaginary
/// residue exceeds 1e-12 relative to max(1, |value|).
inline double phi6_evaluate(const NormalFormPackage& p, const FourierState& state) {
  const FourierState s = state.n() == p.n ? state : state.restricted(p.n);
  const Complex v = p.evaluate_complex(s);
  if (std::abs(v.imag()) > 1e-12 * std::max(1.0, std::abs(v.real()))) {
    throw NumericalFailure("phi6_evaluate: imaginary residue " + std::to_string(v.imag()));
  }
  return v.real();
}

/// {H, Phi^(6)}(state) = dPhi/dt along the flow, from analytic gradients.
inline double phi6_time_derivative(const NormalFormPackage& p, const FourierState& state, const ModelParams& params) {
  if (state.n() < p.n) throw InvalidArgument("phi6_time_derivative: state truncation below package truncation");
  const Complex v = flow_bracket_value(hamiltonian_gradient(state, params), p.gradient(state));
  return v.real();
}

/// {H, |psi_k|²}(state).
inline double action_time_derivative(const FourierState& state, int k, const ModelParams& params) {
  const auto g = gradient_H(state, params);
  // d|psi_k|²/dt = 2 Re(conj(psi_k) dpsi_k/dt) with dpsi_k/dt = -i G_k.
  return 2.0 * (std::conj(state.at(k)) * Complex(0.0, -1.0) * g[static_cast<std::size_t>(k + state.n())]).real();
}

/// Identity residuals of the construction, as coefficient sup norms.
struct IdentityReport {
  double h2_z4 = 0.0;           // {H2, Z4}
  double homological4 = 0.0;    // L_{H2} chi4 + H4^R
  double order4 = 0.0;          // {H2, Phi4} + {H4, Phi2}
  double homological6 = 0.0;    // L_{H2} chi6 + G^R
  double h2_z6 = 0.0;           // {H2, Z6}
  double order6 = 0.0;          // {H2, Phi6} + {H4, Phi4} + {H6, Phi2} - {Z6, Phi2}
  double r6_forms = 0.0;        // {Phi2, Z6} against the weighted form

  double max() const { return std::max({h2_z4, homological4, order4, homological6, h2_z6, order6, r6_forms}); }

  nlohmann::json to_json() const {
    return {{"h2_z4", h2_z4},   {"homological4", homological4}, {"order4", order4}, {"homological6", homological6},
            {"h2_z6", h2_z6},   {"order6", order6},             {"r6_forms", r6_forms}};
  }
};

inline IdentityReport check_identities(const NormalFormPackage& p) {
  IdentityReport r;
  r.h2_z4 = sup_norm(flow_bracket(p.h2, p.z4));
  r.homological4 = sup_norm(lh2_apply(p.chi4) + p.h4_range);
  r.order4 = sup_norm(flow_bracket(p.h2, p.phi4) + flow_bracket(p.h4, p.phi2));
  r.homological6 = sup_norm(lh2_apply(p.chi6) + kernel_range_split(p.g6).range);
  r.h2_z6 = sup_norm(flow_bracket(p.h2, p.z6));
  auto line6 = flow_bracket(p.h2, p.phi6) + flow_bracket(p.h4, p.phi4);
  line6 += flow_bracket(p.h6, p.phi2);
  line6 -= flow_bracket(p.z6, p.phi2);
  r.order6 = sup_norm(line6);
  r.r6_forms = sup_norm(p.r6 - r6_weighted_form(p.z6, p.tk));
  return r;
}

/// Pointwise residual of {Z4, Phi~} = R6^NR, relative to max(|R6^NR|, |{Z4,Phi~}|, tiny).
inline double nonresonant_equation_residual(const NormalFormPackage& p, const FourierState& s) {
  const Complex lhs = flow_bracket_value(p.z4.gradient(s), p.tilde_phi6.gradient(s));
  const Complex rhs = p.r6_nonresonant.evaluate(s);
  const double scale = std::max({std::abs(lhs), std::abs(rhs), 1e-300});
  return std::abs(lhs - rhs) / scale;
}

/// Pointwise order-6 balance:
/// {H2,Phi6}+{H4,Phi4}+{H6,Phi2} + {Z4,Phi~} + {H4^R,Phi~} + {H2,{chi4,Phi~}} + R6^R, which vanishes identically.
struct OrderSixBalance {
  Complex residual;
  double scale = 0.0;  // largest modulus among the summands
};

inline OrderSixBalance order_six_balance(const NormalFormPackage& p, const FourierState& s) {
  auto line6 = flow_bracket(p.h2, p.phi6) + flow_bracket(p.h4, p.phi4);
  line6 += flow_bracket(p.h6, p.phi2);
  const Gradient gt = p.tilde_phi6.gradient(s);
  Gradient gc = p.correction_f1.gradient(s);
  gc += p.correction_f2.gradient(s);
  const Complex parts[] = {line6.evaluate(s), flow_bracket_value(p.z4.gradient(s), gt),
                           flow_bracket_value(p.h4_range.gradient(s), gt), flow_bracket_value(p.h2.gradient(s), gc),
                           p.r6_resonant.evaluate(s)};
  OrderSixBalance b;
  for (const auto& x : parts) {
    b.residual += x;
    b.scale = std::max(b.scale, std::abs(x));
  }
  return b;
}

/// Copy of a modulated polynomial with another cutoff width.
inline ModulatedPolynomial with_delta(const ModulatedPolynomial& f, double delta) {
  ModulatedPolynomial out(f.truncation(), f.degree(), delta);
  out.set_admissibility(f.admissibility());
  for (const auto& t : f.terms()) out.add_term(t.monomial, t.kind, t.combination, t.coefficient);
  return out;
}

struct DecompositionReport {
  std::vector<double> lambdas;
  std::vector<double> residuals;  // mean over states of |{H,Phi} + R6^R|
  double exponent = 0.0;
  bool pass = false;

  nlohmann::json to_json() const {
    return {{"lambdas", lambdas}, {"residuals", residuals}, {"exponent", exponent}, {"pass", pass}};
  }
};

/// Scales each state by lambda and the cutoff width by lambda² (keeping every rho argument fixed)
/// and fits the power of |{H, Phi^(6)} + R6^R| in lambda; the remainder starts at degree 8.
inline DecompositionReport derivative_decomposition_check(const NormalFormPackage& p, const std::vector<FourierState>& states,
                                                          const std::vector<double>& lambdas = {0.5, 0.25, 0.125},
                                                          double min_exponent = 7.8) {
  DecompositionReport rep;
  rep.lambdas = lambdas;
  for (double lam : lambdas) {
    NormalFormPackage q = p;
    const double d = p.cutoff.delta * lam * lam;
    q.cutoff.delta = d;
    q.tilde_phi6 = with_delta(p.tilde_phi6, d);
    q.correction_f1 = with_delta(p.correction_f1, d);
    q.correction_f2 = with_delta(p.correction_f2, d);
    q.r6_resonant = with_delta(p.r6_resonant, d);
    double total = 0.0;
    for (const auto& s0 : states) {
      const FourierState s = s0.restricted(p.n).scaled(lam);
      total += std::abs(phi6_time_derivative(q, s, p.params) + q.r6_resonant.evaluate(s).real());
    }
    rep.residuals.push_back(total / static_cast<double>(states.size()));
  }
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < lambdas.size(); ++i) {
    if (rep.residuals[i] > 0.0) {
      lx.push_back(std::log(lambdas[i]));
      ly.push_back(std::log(rep.residuals[i]));
    }
  }
  if (lx.size() < 2) throw NumericalFailure("derivative_decomposition_check: residual vanished; cannot fit");
  rep.exponent = fit_line(lx, ly).slope;
  rep.pass = rep.exponent >= min_exponent;
  return rep;
}

namespace detail {

inline nlohmann::json sparse_to_json(const SparsePolynomial& f) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& [m, c] : f.sorted_terms()) arr.push_back(f.to_json_line(m, c));
  return {{"degree", f.degree()}, {"terms", arr}};
}

inline SparsePolynomial sparse_from_json(const nlohmann::json& j, int n) {
  SparsePolynomial f(n, j.at("degree").get<int>());
  for (const auto& t : j.at("terms")) {
    f.add_term(Monomial::make(t.at("holo").get<std::vector<int>>(), t.at("anti").get<std::vector<int>>()),
               Complex(t.at("re").get<double>(), t.at("im").get<double>()));
  }
  return f;
}

inline nlohmann::json modulated_to_json(const ModulatedPolynomial& f) {
  std::stringstream ss;
  f.write_jsonl(ss);
  nlohmann::json arr = nlohmann::json::array();
  std::string line;
  while (std::getline(ss, line)) arr.push_back(nlohmann::json::parse(line));
  return {{"degree", f.degree()}, {"delta", f.delta()}, {"terms", arr}};
}

inline ModulatedPolynomial modulated_from_json(const nlohmann::json& j, int n) {
  ModulatedPolynomial f(n, j.at("degree").get<int>(), j.at("delta").get<double>());
  for (const auto& t : j.at("terms")) {
    std::vector<std::pair<int, int>> pairs;
    for (const auto& pw : t.at("combo")) pairs.emplace_back(pw.at(0).get<int>(), pw.at(1).get<int>());
    f.add_term(Monomial::make(t.at("holo").get<std::vector<int>>(), t.at("anti").get<std::vector<int>>()),
               coefficient_kind_from_string(t.at("tag").get<std::string>()), ActionCombination::from_pairs(pairs),
               Complex(t.at("re").get<double>(), t.at("im").get<double>()));
  }
  return f;
}

}  // namespace detail

inline nlohmann::json package_to_json(const NormalFormPackage& p) {
  using detail::modulated_to_json;
  using detail::sparse_to_json;
  return {{"n", p.n},
          {"tk", p.tk},
          {"beta", p.params.beta},
          {"c", p.params.c},
          {"delta", p.cutoff.delta},
          {"z4_a", p.z4_a},
          {"z4_b", p.z4_b},
          {"resonance_count", p.resonance_count()},
          {"h4", sparse_to_json(p.h4)},
          {"h6", sparse_to_json(p.h6)},
          {"z4", sparse_to_json(p.z4)},
          {"chi4", sparse_to_json(p.chi4)},
          {"g6", sparse_to_json(p.g6)},
          {"z6", sparse_to_json(p.z6)},
          {"chi6", sparse_to_json(p.chi6)},
          {"phi_k2", sparse_to_json(p.phi2)},
          {"phi_k4", sparse_to_json(p.phi4)},
          {"phi_k6", sparse_to_json(p.phi6)},
          {"r6", sparse_to_json(p.r6)},
          {"r6_nonresonant", modulated_to_json(p.r6_nonresonant)},
          {"r6_resonant", modulated_to_json(p.r6_resonant)},
          {"tilde_phi6", modulated_to_json(p.tilde_phi6)},
          {"correction_f1", modulated_to_json(p.correction_f1)},
          {"correction_f2", modulated_to_json(p.correction_f2)}};
}

inline NormalFormPackage package_from_json(const nlohmann::json& j) {
  using detail::modulated_from_json;
  using detail::sparse_from_json;
  NormalFormPackage p;
  p.n = j.at("n").get<int>();
  p.tk = j.at("tk").get<int>();
  p.params.c = j.at("c").get<std::vector<double>>();
  p.params.beta = j.at("beta").get<double>();
  p.params.n = p.n;
  p.cutoff.delta = j.at("delta").get<double>();
  p.z4_a = j.at("z4_a").get<double>();
  p.z4_b = j.at("z4_b").get<double>();
  p.h2 = build_h2(p.n);
  p.h4 = sparse_from_json(j.at("h4"), p.n);
  p.h6 = sparse_from_json(j.at("h6"), p.n);
  p.z4 = sparse_from_json(j.at("z4"), p.n);
  p.h4_range = kernel_range_split(p.h4).range;
  p.chi4 = sparse_from_json(j.at("chi4"), p.n);
  p.g6 = sparse_from_json(j.at("g6"), p.n);
  p.z6 = sparse_from_json(j.at("z6"), p.n);
  p.chi6 = sparse_from_json(j.at("chi6"), p.n);
  p.phi2 = sparse_from_json(j.at("phi_k2"), p.n);
  p.phi2.set_admissibility(Admissibility{1, p.tk});
  p.phi4 = sparse_from_json(j.at("phi_k4"), p.n);
  p.phi6 = sparse_from_json(j.at("phi_k6"), p.n);
  p.r6 = sparse_from_json(j.at("r6"), p.n);
  p.r6_nonresonant = modulated_from_json(j.at("r6_nonresonant"), p.n);
  p.r6_resonant = modulated_from_json(j.at("r6_resonant"), p.n);
  p.tilde_phi6 = modulated_from_json(j.at("tilde_phi6"), p.n);
  p.correction_f1 = modulated_from_json(j.at("correction_f1"), p.n);
  p.correction_f2 = modulated_from_json(j.at("correction_f2"), p.n);
  return p;
}

}  // namespace nlsgibbs
