#pragma once

// Homogeneous zero-momentum polynomials in (psi, conj psi) over |k| <= N, stored as
// canonical monomial -> complex coefficient.

#include <algorithm>
#include <cmath>
#include <complex>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "json.hpp"
#include "nlsgibbs/compiled_terms.hpp"
#include "nlsgibbs/error.hpp"
#include "nlsgibbs/fourier_state.hpp"
#include "nlsgibbs/monomial.hpp"

namespace nlsgibbs {

/// Partial derivatives with respect to psi_k and conj(psi_k), indexed k + N.
struct Gradient {
  std::vector<Complex> d_psi;
  std::vector<Complex> d_conj;

  explicit Gradient(int n = 0)
      : d_psi(static_cast<std::size_t>(2 * n + 1)), d_conj(static_cast<std::size_t>(2 * n + 1)) {}

  Gradient& operator+=(const Gradient& o) {
    for (std::size_t i = 0; i < d_psi.size(); ++i) {
      d_psi[i] += o.d_psi[i];
      d_conj[i] += o.d_conj[i];
    }
    return *this;
  }
};

class SparsePolynomial {
 public:
  using Map = std::unordered_map<Monomial, Complex, MonomialHash>;

  SparsePolynomial() = default;
  SparsePolynomial(int truncation, int degree) : n_(truncation), degree_(degree) {
    if (truncation < 0) throw InvalidArgument("SparsePolynomial: negative truncation");
    if (degree < 0 || degree % 2 != 0 || degree > 2 * Monomial::kMaxHalf) {
      throw InvalidArgument("SparsePolynomial: degree must be even and at most 12");
    }
  }

  int truncation() const { return n_; }
  int degree() const { return degree_; }
  std::size_t size() const { return terms_.size(); }
  bool empty() const { return terms_.empty(); }
  const Map& terms() const { return terms_; }

  const std::optional<Admissibility>& admissibility() const { return admissibility_; }
  void set_admissibility(std::optional<Admissibility> a) { admissibility_ = a; }

  Complex coefficient(const Monomial& m) const {
    auto it = terms_.find(m);
    return it == terms_.end() ? Complex{} : it->second;
  }

  /// Adds c to the coefficient of m; the entry disappears if the sum is exactly zero.
  void add_term(const Monomial& m, Complex c) {
    check(m);
    compiled_.reset();
    if (c == Complex{}) return;
    auto [it, inserted] = terms_.try_emplace(m, c);
    if (!inserted) {
      it->second += c;
      if (it->second == Complex{}) terms_.erase(it);
    }
  }

  /// Drops coefficients with modulus <= tol.
  void prune(double tol) {
    compiled_.reset();
    std::erase_if(terms_, [tol](const auto& kv) { return std::abs(kv.second) <= tol; });
  }

  /// Terms in canonical monomial order.
  std::vector<std::pair<Monomial, Complex>> sorted_terms() const {
    std::vector<std::pair<Monomial, Complex>> out(terms_.begin(), terms_.end());
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    return out;
  }

  SparsePolynomial& operator+=(const SparsePolynomial& o) {
    require_compatible(o, "+");
    for (const auto& [m, c] : o.terms_) add_term(m, c);
    admissibility_ = merge(admissibility_, o.admissibility_);
    return *this;
  }
  SparsePolynomial& operator-=(const SparsePolynomial& o) {
    require_compatible(o, "-");
    for (const auto& [m, c] : o.terms_) add_term(m, -c);
    admissibility_ = merge(admissibility_, o.admissibility_);
    return *this;
  }
  friend SparsePolynomial operator+(SparsePolynomial a, const SparsePolynomial& b) { return a += b; }
  friend SparsePolynomial operator-(SparsePolynomial a, const SparsePolynomial& b) { return a -= b; }

  SparsePolynomial scaled(Complex factor) const {
    SparsePolynomial out(n_, degree_);
    out.admissibility_ = admissibility_;
    if (factor == Complex{}) return out;
    out.compiled_.reset();
    for (const auto& [m, c] : terms_) out.terms_.emplace(m, c * factor);
    return out;
  }

  Complex evaluate(const FourierState& state) const {
    require_state(state);
    const auto& t = compiled();
    const detail::StateValues v(state.n() == n_ ? state : state.restricted(n_));
    Complex s{};
    for (std::size_t i = 0; i < t.size(); ++i) s += t.coefficient[i] * detail::monomial_value(t, i, v);
    return s;
  }

  /// Analytic derivatives at state, indexed over the state's modes.
  Gradient gradient(const FourierState& state) const {
    require_state(state);
    Gradient g(state.n());
    accumulate_gradient(state, Complex(1.0), g);
    return g;
  }

  /// g += factor * gradient of this polynomial.
  void accumulate_gradient(const FourierState& state, Complex factor, Gradient& g) const {
    require_state(state);
    const auto& t = compiled();
    const detail::StateValues v(state.n() == n_ ? state : state.restricted(n_));
    std::vector<Complex> dp(v.psi.size()), dc(v.psi.size());
    for (std::size_t i = 0; i < t.size(); ++i) detail::monomial_gradient(t, i, v, factor * t.coefficient[i], dp, dc);
    const std::size_t shift = static_cast<std::size_t>(state.n() - n_);
    for (std::size_t i = 0; i < dp.size(); ++i) {
      g.d_psi[i + shift] += dp[i];
      g.d_conj[i + shift] += dc[i];
    }
  }

  nlohmann::json to_json_line(const Monomial& m, Complex c) const {
    return {{"holo", m.holo_modes()}, {"anti", m.anti_modes()}, {"re", c.real()}, {"im", c.imag()}, {"tag", "const"}};
  }

  /// One JSON object per line, canonical order.
  void write_jsonl(std::ostream& os) const {
    for (const auto& [m, c] : sorted_terms()) os << to_json_line(m, c).dump() << '\n';
  }

  static SparsePolynomial from_jsonl(std::istream& is, int truncation) {
    std::optional<SparsePolynomial> out;
    std::string line;
    while (std::getline(is, line)) {
      if (line.empty()) continue;
      const auto j = nlohmann::json::parse(line);
      const auto holo = j.at("holo").get<std::vector<int>>();
      const auto anti = j.at("anti").get<std::vector<int>>();
      const Monomial m = Monomial::make(holo, anti);
      if (!out) out.emplace(truncation, m.degree());
      out->add_term(m, Complex(j.at("re").get<double>(), j.at("im").get<double>()));
    }
    if (!out) throw InvalidArgument("SparsePolynomial: empty JSON-lines input");
    return *out;
  }

 private:
  static std::optional<Admissibility> merge(const std::optional<Admissibility>& a, const std::optional<Admissibility>& b) {
    if (!a || !b || a->tk != b->tk) return std::nullopt;
    return Admissibility{std::max(a->m, b->m), a->tk};
  }

  void check(const Monomial& m) const {
    if (m.degree() != degree_) {
      throw InvalidArgument("SparsePolynomial: monomial " + m.to_string() + " has degree " + std::to_string(m.degree()) +
                            ", expected " + std::to_string(degree_));
    }
    if (m.momentum() != 0) throw InvalidArgument("SparsePolynomial: monomial " + m.to_string() + " violates zero momentum");
    if (m.max_abs_mode() > n_) throw InvalidMode("SparsePolynomial: monomial " + m.to_string() + " outside truncation");
  }
  void require_compatible(const SparsePolynomial& o, const char* op) const {
    if (o.n_ != n_) throw InvalidArgument(std::string("SparsePolynomial ") + op + ": mixed truncations");
    if (o.degree_ != degree_) throw InvalidArgument(std::string("SparsePolynomial ") + op + ": mixed degrees");
  }
  void require_state(const FourierState& s) const {
    if (s.n() < n_) throw InvalidArgument("SparsePolynomial: state truncation smaller than polynomial truncation");
  }

  const detail::CompiledTerms& compiled() const {
    if (!compiled_) {
      auto c = std::make_shared<detail::CompiledTerms>();
      c->half = degree_ / 2;
      for (const auto& [m, coef] : terms_) c->push(m, coef, n_);
      compiled_ = std::move(c);
    }
    return *compiled_;
  }

  int n_ = 0;
  int degree_ = 0;
  Map terms_;
  std::optional<Admissibility> admissibility_;
  mutable std::shared_ptr<const detail::CompiledTerms> compiled_;
};

/// max |coefficient|, 0 for the empty polynomial.
inline double sup_norm(const SparsePolynomial& f) {
  double s = 0.0;
  for (const auto& [m, c] : f.terms()) s = std::max(s, std::abs(c));
  return s;
}

namespace detail {

/// Σ_k (∂f/∂psi_k ∂g/∂conj psi_k - ∂g/∂psi_k ∂f/∂conj psi_k) times `scale`.
inline SparsePolynomial bracket_sum(const SparsePolynomial& f, const SparsePolynomial& g, Complex scale) {
  if (f.truncation() != g.truncation()) throw InvalidArgument("poisson_bracket: mixed truncations");
  const int n = f.truncation();
  const int deg = f.degree() + g.degree() - 2;
  SparsePolynomial out(n, std::max(deg, 0));
  if (f.degree() == 0 || g.degree() == 0 || f.empty() || g.empty()) return out;

  std::vector<std::pair<Monomial, Complex>> gt(g.terms().begin(), g.terms().end());
  std::vector<std::vector<int>> by_holo(static_cast<std::size_t>(2 * n + 1)), by_anti(static_cast<std::size_t>(2 * n + 1));
  for (int idx = 0; idx < static_cast<int>(gt.size()); ++idx) {
    const auto& m = gt[static_cast<std::size_t>(idx)].first;
    int prev = 1 << 20;
    for (int i = 0; i < m.half_degree(); ++i) {
      if (m.holo(i) != prev) by_holo[static_cast<std::size_t>(m.holo(i) + n)].push_back(idx);
      prev = m.holo(i);
    }
    prev = 1 << 20;
    for (int i = 0; i < m.half_degree(); ++i) {
      if (m.anti(i) != prev) by_anti[static_cast<std::size_t>(m.anti(i) + n)].push_back(idx);
      prev = m.anti(i);
    }
  }

  for (const auto& [mf, cf] : f.terms()) {
    for (int k : mf.distinct_modes()) {
      const int hf = mf.holo_count(k), af = mf.anti_count(k);
      if (hf > 0) {
        for (int idx : by_anti[static_cast<std::size_t>(k + n)]) {
          const auto& [mg, cg] = gt[static_cast<std::size_t>(idx)];
          const Monomial r = Monomial::contract(mf, k, mg, k);
          if (r.momentum() != 0) throw NumericalFailure("poisson_bracket: momentum violated by " + r.to_string());
          out.add_term(r, scale * cf * cg * double(hf * mg.anti_count(k)));
        }
      }
      if (af > 0) {
        for (int idx : by_holo[static_cast<std::size_t>(k + n)]) {
          const auto& [mg, cg] = gt[static_cast<std::size_t>(idx)];
          const Monomial r = Monomial::contract(mg, k, mf, k);
          if (r.momentum() != 0) throw NumericalFailure("poisson_bracket: momentum violated by " + r.to_string());
          out.add_term(r, -scale * cf * cg * double(af * mg.holo_count(k)));
        }
      }
    }
  }
  return out;
}

inline std::optional<Admissibility> bracket_admissibility(const SparsePolynomial& f, const SparsePolynomial& g) {
  const auto& a = f.admissibility() ? f.admissibility() : g.admissibility();
  if (!a) return std::nullopt;
  return Admissibility{2 * a->m, a->tk};
}

}  // namespace detail

/// {f,g} = -i Σ_k (∂f/∂psi_k ∂g/∂conj psi_k - ∂g/∂psi_k ∂f/∂conj psi_k).
inline SparsePolynomial poisson_bracket(const SparsePolynomial& f, const SparsePolynomial& g) {
  auto out = detail::bracket_sum(f, g, Complex(0.0, -1.0));
  out.set_admissibility(detail::bracket_admissibility(f, g));
  return out;
}

/// The bracket generating the flow of i dpsi/dt = 2 ∂H/∂conj(psi): dF/dt = flow_bracket(H, F),
/// equal to -2 poisson_bracket. lh2_apply(f) == flow_bracket(H2, f).
inline SparsePolynomial flow_bracket(const SparsePolynomial& f, const SparsePolynomial& g) {
  auto out = detail::bracket_sum(f, g, Complex(0.0, 2.0));
  out.set_admissibility(detail::bracket_admissibility(f, g));
  return out;
}

/// H2 = ½ Σ k² |psi_k|² as a polynomial (the k = 0 term is absent).
inline SparsePolynomial build_h2(int n) {
  SparsePolynomial h(n, 2);
  for (int k = -n; k <= n; ++k) {
    if (k != 0) h.add_term(Monomial::action(k), 0.5 * k * k);
  }
  return h;
}

/// |psi_k|² tagged (1, k)-admissible.
inline SparsePolynomial action_polynomial(int n, int k) {
  SparsePolynomial p(n, 2);
  p.add_term(Monomial::action(k), 1.0);
  p.set_admissibility(Admissibility{1, k});
  return p;
}

/// Multiplies each monomial by -i (Σ holo k² - Σ anti k²).
inline SparsePolynomial lh2_apply(const SparsePolynomial& f) {
  SparsePolynomial out(f.truncation(), f.degree());
  out.set_admissibility(f.admissibility());
  for (const auto& [m, c] : f.terms()) out.add_term(m, Complex(0.0, -double(m.frequency())) * c);
  return out;
}

struct KernelRangeSplit {
  SparsePolynomial kernel;
  SparsePolynomial range;
};

inline KernelRangeSplit kernel_range_split(const SparsePolynomial& f) {
  KernelRangeSplit s{SparsePolynomial(f.truncation(), f.degree()), SparsePolynomial(f.truncation(), f.degree())};
  s.kernel.set_admissibility(f.admissibility());
  s.range.set_admissibility(f.admissibility());
  for (const auto& [m, c] : f.terms()) (m.resonant() ? s.kernel : s.range).add_term(m, c);
  return s;
}

/// Inverse of lh2_apply on range polynomials.
inline SparsePolynomial lh2_invert(const SparsePolynomial& f) {
  SparsePolynomial out(f.truncation(), f.degree());
  out.set_admissibility(f.admissibility());
  for (const auto& [m, c] : f.terms()) {
    if (m.resonant()) throw InvalidArgument("lh2_invert: kernel monomial " + m.to_string() + " has no inverse");
    out.add_term(m, c / Complex(0.0, -double(m.frequency())));
  }
  return out;
}

/// Flow bracket of two functions from their gradients at one point.
inline Complex flow_bracket_value(const Gradient& f, const Gradient& g) {
  Complex s{};
  for (std::size_t i = 0; i < f.d_psi.size(); ++i) s += f.d_psi[i] * g.d_conj[i] - g.d_psi[i] * f.d_conj[i];
  return Complex(0.0, 2.0) * s;
}

/// Gradient of the Hamiltonian in the same layout: ∂H/∂conj(psi) = G/2, ∂H/∂psi = conj(G)/2.
inline Gradient hamiltonian_gradient(const FourierState& state, const ModelParams& params) {
  const auto g = gradient_H(state, params);
  Gradient out(state.n());
  for (std::size_t i = 0; i < g.size(); ++i) {
    out.d_conj[i] = 0.5 * g[i];
    out.d_psi[i] = 0.5 * std::conj(g[i]);
  }
  return out;
}

}  // namespace nlsgibbs
