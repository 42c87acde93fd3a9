#pragma once

// Polynomials whose coefficients are closed-form functions of a linear combination of
// the actions, h(a) with a = Σ_l w_l |psi_l|².

#include <algorithm>
#include <array>
#include <cmath>
#include <compare>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"
#include "nlsgibbs/compiled_terms.hpp"
#include "nlsgibbs/cutoff.hpp"
#include "nlsgibbs/error.hpp"
#include "nlsgibbs/fourier_state.hpp"
#include "nlsgibbs/monomial.hpp"
#include "nlsgibbs/sparse_polynomial.hpp"

namespace nlsgibbs {

enum class CoefficientKind : std::uint8_t {
  Constant,               // 1
  Cutoff,                 // rho(a/delta)
  ResonantComplement,     // 1 - rho(a/delta)
  CutoffDerivative,       // rho'(a/delta) / delta
  CutoffOverA,            // rho(a/delta) / a
  CutoffOverADerivative,  // d/da [rho(a/delta) / a]
};

inline std::string to_string(CoefficientKind k) {
  switch (k) {
    case CoefficientKind::Constant: return "const";
    case CoefficientKind::Cutoff: return "rho";
    case CoefficientKind::ResonantComplement: return "one_minus_rho";
    case CoefficientKind::CutoffDerivative: return "d_rho";
    case CoefficientKind::CutoffOverA: return "rho_over_a";
    case CoefficientKind::CutoffOverADerivative: return "d_rho_over_a";
  }
  return "?";
}

inline CoefficientKind coefficient_kind_from_string(const std::string& s) {
  for (auto k : {CoefficientKind::Constant, CoefficientKind::Cutoff, CoefficientKind::ResonantComplement,
                 CoefficientKind::CutoffDerivative, CoefficientKind::CutoffOverA, CoefficientKind::CutoffOverADerivative}) {
    if (to_string(k) == s) return k;
  }
  throw InvalidArgument("unknown coefficient tag '" + s + "'");
}

/// Highest derivative order for which the kind's bounds are tracked.
inline int smoothness_order(CoefficientKind k) {
  return (k == CoefficientKind::CutoffDerivative || k == CoefficientKind::CutoffOverADerivative) ? 1 : 2;
}

/// d/da of the kind as another kind times a scalar; nullopt when the derivative is identically zero.
struct DerivedKind {
  CoefficientKind kind;
  double sign;
};
inline std::optional<DerivedKind> derivative_kind(CoefficientKind k) {
  switch (k) {
    case CoefficientKind::Constant: return std::nullopt;
    case CoefficientKind::Cutoff: return DerivedKind{CoefficientKind::CutoffDerivative, 1.0};
    case CoefficientKind::ResonantComplement: return DerivedKind{CoefficientKind::CutoffDerivative, -1.0};
    case CoefficientKind::CutoffOverA: return DerivedKind{CoefficientKind::CutoffOverADerivative, 1.0};
    default: throw InvalidArgument("derivative_kind: second derivatives of the cutoff are not tracked as tags");
  }
}

/// The i-th derivative (i = 0, 1, 2) in a of the coefficient function.
inline double coefficient_function(CoefficientKind kind, double a, double delta, int order = 0) {
  const double x = a / delta;
  const bool inside = std::abs(x) <= 1.0;
  switch (kind) {
    case CoefficientKind::Constant: return order == 0 ? 1.0 : 0.0;
    case CoefficientKind::Cutoff:
      if (order == 0) return rho(x);
      if (order == 1) return rho_d1(x) / delta;
      return rho_d2(x) / (delta * delta);
    case CoefficientKind::ResonantComplement:
      if (order == 0) return 1.0 - rho(x);
      if (order == 1) return -rho_d1(x) / delta;
      return -rho_d2(x) / (delta * delta);
    case CoefficientKind::CutoffDerivative:
      if (order == 0) return rho_d1(x) / delta;
      if (order == 1) return rho_d2(x) / (delta * delta);
      break;
    case CoefficientKind::CutoffOverA:
      if (inside) return 0.0;
      if (order == 0) return rho(x) / a;
      if (order == 1) return rho_d1(x) / (delta * a) - rho(x) / (a * a);
      return rho_d2(x) / (delta * delta * a) - 2.0 * rho_d1(x) / (delta * a * a) + 2.0 * rho(x) / (a * a * a);
    case CoefficientKind::CutoffOverADerivative:
      if (inside) return 0.0;
      if (order == 0) return rho_d1(x) / (delta * a) - rho(x) / (a * a);
      if (order == 1) {
        return rho_d2(x) / (delta * delta * a) - 2.0 * rho_d1(x) / (delta * a * a) + 2.0 * rho(x) / (a * a * a);
      }
      break;
  }
  throw InvalidArgument("coefficient_function: derivative order " + std::to_string(order) + " not available for " +
                        to_string(kind));
}

/// a = Σ w_l |psi_l|² over at most six distinct modes.
class ActionCombination {
 public:
  static constexpr int kMaxModes = 2 * Monomial::kMaxHalf;

  ActionCombination() = default;

  /// +1 for each holomorphic index, -1 for each antiholomorphic one, merged by mode.
  static ActionCombination from_signature(const Monomial& m) {
    ActionCombination c;
    for (int i = 0; i < m.half_degree(); ++i) {
      c.add(m.holo(i), 1);
      c.add(m.anti(i), -1);
    }
    return c;
  }
  static ActionCombination from_pairs(const std::vector<std::pair<int, int>>& pairs) {
    ActionCombination c;
    for (auto [mode, w] : pairs) c.add(mode, w);
    return c;
  }

  int size() const { return size_; }
  int mode(int i) const { return mode_[static_cast<std::size_t>(i)]; }
  int weight(int i) const { return weight_[static_cast<std::size_t>(i)]; }

  double value(const FourierState& s) const {
    double a = 0.0;
    for (int i = 0; i < size_; ++i) a += weight(i) * std::norm(s[mode(i)]);
    return a;
  }

  std::vector<std::pair<int, int>> pairs() const {
    std::vector<std::pair<int, int>> out;
    for (int i = 0; i < size_; ++i) out.emplace_back(mode(i), weight(i));
    return out;
  }

  friend bool operator==(const ActionCombination&, const ActionCombination&) = default;
  friend auto operator<=>(const ActionCombination& a, const ActionCombination& b) {
    if (auto c = a.size_ <=> b.size_; c != 0) return c;
    if (auto c = a.mode_ <=> b.mode_; c != 0) return c;
    return a.weight_ <=> b.weight_;
  }

 private:
  void add(int mode, int w) {
    for (int i = 0; i < size_; ++i) {
      if (this->mode(i) == mode) {
        weight_[static_cast<std::size_t>(i)] = static_cast<std::int8_t>(weight(i) + w);
        if (weight(i) == 0) erase(i);
        return;
      }
    }
    if (w == 0) return;
    if (size_ == kMaxModes) throw InvalidArgument("ActionCombination: too many modes");
    int pos = size_;
    while (pos > 0 && this->mode(pos - 1) > mode) {
      mode_[static_cast<std::size_t>(pos)] = mode_[static_cast<std::size_t>(pos - 1)];
      weight_[static_cast<std::size_t>(pos)] = weight_[static_cast<std::size_t>(pos - 1)];
      --pos;
    }
    mode_[static_cast<std::size_t>(pos)] = static_cast<std::int8_t>(mode);
    weight_[static_cast<std::size_t>(pos)] = static_cast<std::int8_t>(w);
    ++size_;
  }
  void erase(int i) {
    for (int j = i; j + 1 < size_; ++j) {
      mode_[static_cast<std::size_t>(j)] = mode_[static_cast<std::size_t>(j + 1)];
      weight_[static_cast<std::size_t>(j)] = weight_[static_cast<std::size_t>(j + 1)];
    }
    --size_;
    mode_[static_cast<std::size_t>(size_)] = 0;
    weight_[static_cast<std::size_t>(size_)] = 0;
  }

  std::array<std::int8_t, kMaxModes> mode_{};
  std::array<std::int8_t, kMaxModes> weight_{};
  std::int8_t size_ = 0;
};

struct ModulatedTerm {
  Monomial monomial;
  CoefficientKind kind = CoefficientKind::Constant;
  ActionCombination combination;
  Complex coefficient;
};

class ModulatedPolynomial {
 public:
  struct Key {
    Monomial monomial;
    CoefficientKind kind;
    ActionCombination combination;
    friend auto operator<=>(const Key&, const Key&) = default;
    friend bool operator==(const Key&, const Key&) = default;
  };

  ModulatedPolynomial() = default;
  ModulatedPolynomial(int truncation, int degree, double delta) : n_(truncation), degree_(degree), delta_(delta) {
    if (!(delta > 0.0)) throw InvalidArgument("ModulatedPolynomial: cutoff width must be positive");
    if (degree < 0 || degree % 2 != 0 || degree > 2 * Monomial::kMaxHalf) {
      throw InvalidArgument("ModulatedPolynomial: degree must be even and at most 12");
    }
  }

  int truncation() const { return n_; }
  int degree() const { return degree_; }
  double delta() const { return delta_; }
  std::size_t size() const { return terms_.size(); }
  bool empty() const { return terms_.empty(); }

  const std::optional<Admissibility>& admissibility() const { return admissibility_; }
  void set_admissibility(std::optional<Admissibility> a) { admissibility_ = a; }

  void add_term(const Monomial& m, CoefficientKind kind, const ActionCombination& combo, Complex c) {
    if (m.degree() != degree_) throw InvalidArgument("ModulatedPolynomial: monomial " + m.to_string() + " has wrong degree");
    if (m.momentum() != 0) throw InvalidArgument("ModulatedPolynomial: monomial " + m.to_string() + " violates zero momentum");
    if (m.max_abs_mode() > n_) throw InvalidMode("ModulatedPolynomial: monomial " + m.to_string() + " outside truncation");
    compiled_.reset();
    if (c == Complex{}) return;
    auto [it, inserted] = terms_.try_emplace(Key{m, kind, combo}, c);
    if (!inserted) {
      it->second += c;
      if (it->second == Complex{}) terms_.erase(it);
    }
  }

  /// Terms in canonical order.
  std::vector<ModulatedTerm> terms() const {
    std::vector<ModulatedTerm> out;
    out.reserve(terms_.size());
    for (const auto& [k, c] : terms_) out.push_back({k.monomial, k.kind, k.combination, c});
    return out;
  }

  ModulatedPolynomial& operator+=(const ModulatedPolynomial& o) {
    if (o.n_ != n_ || o.degree_ != degree_ || o.delta_ != delta_) {
      throw InvalidArgument("ModulatedPolynomial +: incompatible operands");
    }
    for (const auto& [k, c] : o.terms_) add_term(k.monomial, k.kind, k.combination, c);
    return *this;
  }

  Complex evaluate(const FourierState& state) const {
    if (state.n() < n_) throw InvalidArgument("ModulatedPolynomial: state truncation smaller than polynomial truncation");
    const auto& cc = compiled();
    const FourierState& local = state.n() == n_ ? state : state.restricted(n_);
    const detail::StateValues v(local);
    std::vector<double> h(cc.groups.size());
    for (std::size_t i = 0; i < h.size(); ++i) {
      h[i] = coefficient_function(cc.groups[i].first, cc.groups[i].second.value(local), delta_);
    }
    Complex s{};
    for (std::size_t i = 0; i < cc.terms.size(); ++i) {
      const double hi = h[static_cast<std::size_t>(cc.terms.group[i])];
      if (hi != 0.0) s += cc.terms.coefficient[i] * hi * detail::monomial_value(cc.terms, i, v);
    }
    return s;
  }

  Gradient gradient(const FourierState& state) const {
    Gradient g(state.n());
    accumulate_gradient(state, Complex(1.0), g);
    return g;
  }

  /// g += factor * gradient, including the chain rule through h(a).
  void accumulate_gradient(const FourierState& state, Complex factor, Gradient& g) const {
    if (state.n() < n_) throw InvalidArgument("ModulatedPolynomial: state truncation smaller than polynomial truncation");
    const auto& cc = compiled();
    const FourierState& local = state.n() == n_ ? state : state.restricted(n_);
    const detail::StateValues v(local);
    const std::size_t ng = cc.groups.size();
    std::vector<double> h(ng), dh(ng);
    for (std::size_t i = 0; i < ng; ++i) {
      const double a = cc.groups[i].second.value(local);
      h[i] = coefficient_function(cc.groups[i].first, a, delta_, 0);
      dh[i] = coefficient_function(cc.groups[i].first, a, delta_, 1);
    }
    // Σ over terms of c * monomial, per group, feeds the chain-rule part.
    std::vector<Complex> group_sum(ng);
    std::vector<Complex> dp(v.psi.size()), dc(v.psi.size());
    for (std::size_t i = 0; i < cc.terms.size(); ++i) {
      const auto gi = static_cast<std::size_t>(cc.terms.group[i]);
      if (h[gi] == 0.0 && dh[gi] == 0.0) continue;
      const Complex c = cc.terms.coefficient[i] * factor;
      const Complex val = detail::monomial_gradient(cc.terms, i, v, c * h[gi], dp, dc);
      if (dh[gi] != 0.0) group_sum[gi] += c * val;
    }
    for (std::size_t i = 0; i < ng; ++i) {
      if (dh[i] == 0.0 || group_sum[i] == Complex{}) continue;
      const Complex base = dh[i] * group_sum[i];
      const auto& combo = cc.groups[i].second;
      for (int j = 0; j < combo.size(); ++j) {
        const auto l = static_cast<std::size_t>(combo.mode(j) + n_);
        const double w = combo.weight(j);
        dp[l] += base * w * v.conj_psi[l];
        dc[l] += base * w * v.psi[l];
      }
    }
    const std::size_t shift = static_cast<std::size_t>(state.n() - n_);
    for (std::size_t i = 0; i < dp.size(); ++i) {
      g.d_psi[i + shift] += dp[i];
      g.d_conj[i + shift] += dc[i];
    }
  }

  /// A_i = max over terms of |coefficient| * sup_a |h^{(i)}(a)| for i = 0..order, where order is the
  /// smallest smoothness order among the terms' kinds (capped at max_order).
  std::vector<double> derivative_bounds(int max_order = 2) const {
    int order = max_order;
    for (const auto& [k, c] : terms_) order = std::min(order, smoothness_order(k.kind));
    std::vector<double> bounds(static_cast<std::size_t>(order + 1), 0.0);
    std::map<std::pair<CoefficientKind, int>, double> sup_cache;
    for (const auto& [k, c] : terms_) {
      for (int i = 0; i <= order; ++i) {
        auto key = std::make_pair(k.kind, i);
        auto it = sup_cache.find(key);
        if (it == sup_cache.end()) it = sup_cache.emplace(key, coefficient_sup(k.kind, i, delta_)).first;
        bounds[static_cast<std::size_t>(i)] = std::max(bounds[static_cast<std::size_t>(i)], std::abs(c) * it->second);
      }
    }
    return bounds;
  }

  /// sup_a |h^{(i)}(a)| by dense sampling of a/delta in [-4, 4] (every kind is constant or decaying beyond).
  static double coefficient_sup(CoefficientKind kind, int order, double delta) {
    double s = 0.0;
    for (int j = -8000; j <= 8000; ++j) {
      const double x = j * 5e-4;
      s = std::max(s, std::abs(coefficient_function(kind, x * delta, delta, order)));
    }
    return s;
  }

  void write_jsonl(std::ostream& os) const {
    for (const auto& [k, c] : terms_) {
      nlohmann::json combo = nlohmann::json::array();
      for (auto [mode, w] : k.combination.pairs()) combo.push_back({mode, w});
      nlohmann::json line = {{"holo", k.monomial.holo_modes()},
                             {"anti", k.monomial.anti_modes()},
                             {"re", c.real()},
                             {"im", c.imag()},
                             {"tag", to_string(k.kind)},
                             {"combo", combo}};
      os << line.dump() << '\n';
    }
  }

 private:
  struct Compiled {
    std::vector<std::pair<CoefficientKind, ActionCombination>> groups;
    detail::CompiledTerms terms;
  };

  const Compiled& compiled() const {
    if (!compiled_) {
      auto c = std::make_shared<Compiled>();
      c->terms.half = degree_ / 2;
      std::map<std::pair<CoefficientKind, ActionCombination>, int> index;
      for (const auto& [k, coef] : terms_) {
        auto key = std::make_pair(k.kind, k.combination);
        auto [it, inserted] = index.try_emplace(key, static_cast<int>(c->groups.size()));
        if (inserted) c->groups.push_back(key);
        c->terms.push(k.monomial, coef, n_, it->second);
      }
      compiled_ = std::move(c);
    }
    return *compiled_;
  }

  int n_ = 0;
  int degree_ = 0;
  double delta_ = 1.0;
  std::map<Key, Complex> terms_;
  std::optional<Admissibility> admissibility_;
  mutable std::shared_ptr<const Compiled> compiled_;
};

/// flow_bracket(f, g) for g modulated: F1 keeps g's coefficient functions on the bracket with each
/// monomial (degree deg f + deg g - 2); F2 collects the chain-rule terms h'(a) Σ_l w_l {f, |psi_l|²}
/// times the monomial (degree deg f + deg g).
struct ModulatedBracket {
  ModulatedPolynomial f1;
  ModulatedPolynomial f2;
};

inline ModulatedBracket flow_bracket(const SparsePolynomial& f, const ModulatedPolynomial& g) {
  if (f.truncation() != g.truncation()) throw InvalidArgument("flow_bracket: mixed truncations");
  const int n = g.truncation();
  ModulatedBracket out{ModulatedPolynomial(n, f.degree() + g.degree() - 2, g.delta()),
                       ModulatedPolynomial(n, f.degree() + g.degree(), g.delta())};
  std::optional<Admissibility> tag;
  if (g.admissibility()) tag = Admissibility{2 * g.admissibility()->m, g.admissibility()->tk};
  out.f1.set_admissibility(tag);
  out.f2.set_admissibility(tag);

  std::map<int, SparsePolynomial> action_brackets;
  for (const auto& t : g.terms()) {
    SparsePolynomial single(n, g.degree());
    single.add_term(t.monomial, 1.0);
    const SparsePolynomial contracted = flow_bracket(f, single);
    for (const auto& [m, c] : contracted.terms()) out.f1.add_term(m, t.kind, t.combination, c * t.coefficient);

    const auto dk = derivative_kind(t.kind);
    if (!dk) continue;
    for (int i = 0; i < t.combination.size(); ++i) {
      const int l = t.combination.mode(i);
      auto it = action_brackets.find(l);
      if (it == action_brackets.end()) it = action_brackets.emplace(l, flow_bracket(f, action_polynomial(n, l))).first;
      const double w = t.combination.weight(i) * dk->sign;
      for (const auto& [m, c] : it->second.terms()) {
        out.f2.add_term(Monomial::product(m, t.monomial), dk->kind, t.combination, c * w * t.coefficient);
      }
    }
  }
  return out;
}

}  // namespace nlsgibbs
