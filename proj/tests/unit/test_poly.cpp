#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "nlsgibbs/gaussian_bounds.hpp"
#include "nlsgibbs/modulated_polynomial.hpp"
#include "nlsgibbs/normal_form.hpp"
#include "nlsgibbs/sparse_polynomial.hpp"
#include "test_helpers.hpp"

namespace nlsgibbs {
namespace {

using testing::params_q2;
using testing::random_state;

/// Random zero-momentum polynomial with `terms` monomials of the given half degree.
SparsePolynomial random_polynomial(int n, int half, int terms, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> mode(-n, n);
  std::normal_distribution<double> coef;
  SparsePolynomial f(n, 2 * half);
  int added = 0;
  while (added < terms) {
    std::vector<int> h(static_cast<std::size_t>(half)), a(static_cast<std::size_t>(half));
    for (auto& x : h) x = mode(rng);
    for (int i = 0; i + 1 < half; ++i) a[static_cast<std::size_t>(i)] = mode(rng);
    int s = 0;
    for (int i = 0; i < half; ++i) s += h[static_cast<std::size_t>(i)];
    for (int i = 0; i + 1 < half; ++i) s -= a[static_cast<std::size_t>(i)];
    if (std::abs(s) > n) continue;
    a.back() = s;
    f.add_term(Monomial::make(h, a), Complex(coef(rng), coef(rng)));
    ++added;
  }
  return f;
}

double directional_fd(const std::function<Complex(const FourierState&)>& f, const FourierState& s, const FourierState& dir,
                      double h) {
  auto at = [&](double t) {
    FourierState x = s;
    auto c = x.mutable_coeffs();
    for (std::size_t i = 0; i < c.size(); ++i) c[i] += t * dir.coeffs()[i];
    return f(x);
  };
  return ((at(h) - at(-h)) / (2.0 * h)).real();
}

/// Re of the directional derivative of a real-part functional from a Gradient.
double directional_from_gradient(const Gradient& g, const FourierState& dir) {
  Complex s{};
  for (std::size_t i = 0; i < g.d_psi.size(); ++i) s += g.d_psi[i] * dir.coeffs()[i] + g.d_conj[i] * std::conj(dir.coeffs()[i]);
  return s.real();
}

TEST(Monomial, CanonicalFormAndArithmetic) {
  const auto m = Monomial::make({2, 1}, {3, 0});
  EXPECT_EQ(m.holo(0), 1);
  EXPECT_EQ(m.anti(0), 0);
  EXPECT_EQ(m.momentum(), 0);
  EXPECT_EQ(m.frequency(), 1 + 4 - 9);
  EXPECT_EQ(m, Monomial::make({1, 2}, {0, 3}));
  EXPECT_EQ(m.to_string(), "(1,2|0,3)");
  EXPECT_THROW(Monomial::make({1, 2}, {3}), InvalidArgument);
}

TEST(PoissonBracket, SelfBracketVanishes) {
  const auto i3 = action_polynomial(4, 3);
  EXPECT_TRUE(poisson_bracket(i3, i3).empty());
}

TEST(PoissonBracket, H2CommutesWithActions) {
  const auto h2 = build_h2(5);
  for (int k = -5; k <= 5; ++k) EXPECT_TRUE(poisson_bracket(h2, action_polynomial(5, k)).empty());
}

TEST(PoissonBracket, SingleTermChainRule) {
  // A zero-momentum monomial containing psi_1 once: {c m, |psi_1|²} = -i c m.
  SparsePolynomial f(3, 4);
  const auto m = Monomial::make({1, 2}, {0, 3});
  const Complex c(0.7, -0.2);
  f.add_term(m, c);
  const auto b = poisson_bracket(f, action_polynomial(3, 1));
  ASSERT_EQ(b.size(), 1u);
  EXPECT_LT(std::abs(b.coefficient(m) - Complex(0.0, -1.0) * c), 1e-15);
}

TEST(PoissonBracket, MixedTruncationsRejected) {
  EXPECT_THROW(poisson_bracket(action_polynomial(3, 1), action_polynomial(4, 1)), InvalidArgument);
}

TEST(PoissonBracket, AntisymmetryDegreeLawAndMomentum) {
  const auto f = random_polynomial(4, 2, 25, 1);
  const auto g = random_polynomial(4, 3, 25, 2);
  const auto fg = poisson_bracket(f, g);
  const auto gf = poisson_bracket(g, f);
  EXPECT_EQ(fg.degree(), 4 + 6 - 2);
  EXPECT_FALSE(fg.empty());
  EXPECT_LT(sup_norm(fg + gf), 1e-13);
  for (const auto& [m, c] : fg.terms()) {
    EXPECT_EQ(m.momentum(), 0);
    EXPECT_EQ(m.degree(), 8);
  }
}

TEST(PoissonBracket, MatchesGradientContraction) {
  const auto f = random_polynomial(3, 2, 15, 3);
  const auto g = random_polynomial(3, 2, 15, 4);
  const auto s = random_state(3, 5, 0.7);
  const Complex symbolic = flow_bracket(f, g).evaluate(s);
  const Complex numeric = flow_bracket_value(f.gradient(s), g.gradient(s));
  EXPECT_LT(std::abs(symbolic - numeric), 1e-12 * std::max(1.0, std::abs(symbolic)));
  EXPECT_LT(sup_norm(flow_bracket(f, g) + poisson_bracket(f, g).scaled(2.0)), 1e-13);
}

TEST(PoissonBracket, JacobiIdentity) {
  const auto f = random_polynomial(3, 2, 8, 6);
  const auto g = random_polynomial(3, 2, 8, 7);
  const auto h = random_polynomial(3, 1, 3, 8);
  auto sum = poisson_bracket(f, poisson_bracket(g, h)) + poisson_bracket(g, poisson_bracket(h, f));
  sum += poisson_bracket(h, poisson_bracket(f, g));
  EXPECT_LT(sup_norm(sum), 1e-12);
}

TEST(PoissonBracket, AdmissibilityDoubles) {
  const auto b = flow_bracket(random_polynomial(4, 2, 10, 9), action_polynomial(4, 2));
  ASSERT_TRUE(b.admissibility().has_value());
  EXPECT_EQ(b.admissibility()->m, 2);
  EXPECT_EQ(b.admissibility()->tk, 2);
  const auto bb = flow_bracket(random_polynomial(4, 2, 10, 10), b);
  EXPECT_EQ(bb.admissibility()->m, 4);
}

TEST(Lh2, ApplyExample) {
  SparsePolynomial f(3, 4);
  const auto m = Monomial::make({1, 2}, {3, 0});
  f.add_term(m, 1.0);
  EXPECT_EQ(lh2_apply(f).coefficient(m), Complex(0.0, 4.0));
  EXPECT_LT(sup_norm(lh2_apply(f) - flow_bracket(build_h2(3), f)), 1e-15);
}

TEST(Lh2, KernelMonomialAnnihilated) {
  SparsePolynomial f(7, 6);
  f.add_term(Monomial::make({1, 5, 6}, {2, 3, 7}), 2.5);
  EXPECT_TRUE(lh2_apply(f).empty());
}

TEST(Lh2, Linearity) {
  const auto f = random_polynomial(4, 2, 20, 11);
  const auto g = random_polynomial(4, 2, 20, 12);
  EXPECT_LT(sup_norm(lh2_apply(f + g) - lh2_apply(f) - lh2_apply(g)), 1e-13);
}

TEST(Lh2, InvertExampleAndContract) {
  SparsePolynomial f(3, 4);
  const auto m = Monomial::make({1, 2}, {3, 0});
  f.add_term(m, Complex(0.0, 4.0));
  EXPECT_LT(std::abs(lh2_invert(f).coefficient(m) - 1.0), 1e-15);
  EXPECT_TRUE(lh2_invert(SparsePolynomial(3, 4)).empty());
  const auto r = kernel_range_split(random_polynomial(5, 2, 40, 13)).range;
  EXPECT_LT(sup_norm(lh2_apply(lh2_invert(r)) - r), 1e-13);
}

TEST(Lh2, InvertRejectsKernelMonomial) {
  SparsePolynomial f(4, 4);
  f.add_term(Monomial::make({1, 2}, {1, 2}), 1.0);
  try {
    lh2_invert(f);
    FAIL() << "expected InvalidArgument";
  } catch (const InvalidArgument& e) {
    EXPECT_NE(std::string(e.what()).find("(1,2|1,2)"), std::string::npos);
  }
}

TEST(KernelRangeSplit, Examples) {
  const auto six = Monomial::make({1, 5, 6}, {2, 3, 7});
  EXPECT_EQ(six.momentum(), 0);
  EXPECT_TRUE(six.resonant());
  EXPECT_FALSE(six.action_only());
  EXPECT_FALSE(Monomial::make({0, 3}, {1, 2}).resonant());
}

TEST(KernelRangeSplit, DirectSum) {
  const auto f = random_polynomial(5, 3, 60, 14);
  const auto s = kernel_range_split(f);
  EXPECT_EQ(sup_norm(s.kernel + s.range - f), 0.0);
  for (const auto& [m, c] : s.kernel.terms()) {
    EXPECT_TRUE(m.resonant());
    EXPECT_EQ(s.range.coefficient(m), Complex{});
  }
  for (const auto& [m, c] : s.range.terms()) EXPECT_FALSE(m.resonant());
}

TEST(SixthOrderResonances, BruteForceFindsNontrivialClass) {
  // Exhaustive search over |k| <= 7 for sextuples with equal sums and equal square sums.
  bool found = false;
  for (const auto& m : zero_momentum_monomials(7, 3)) {
    if (m.resonant() && !m.action_only() && m == Monomial::make({1, 5, 6}, {2, 3, 7})) found = true;
  }
  EXPECT_TRUE(found);
}

TEST(Evaluate, ActionAndH4SingleMode) {
  FourierState s(2);
  s.set(1, 2.0);
  EXPECT_EQ(action_polynomial(2, 1).evaluate(s), Complex(4.0));
  const auto p = params_q2(1.3);
  const auto h4 = build_h2j(2, p, 2);
  FourierState z(2);
  const Complex a(0.4, 0.9);
  z.set(0, a);
  EXPECT_NEAR(h4.evaluate(z).real(), evaluate_P(z, p), 1e-15);
}

TEST(Evaluate, SobolevTypeBound) {
  // |f(psi)| <= C ||psi||^{2n}_{H^{s1}} |||f|||, with C estimated as the worst observed ratio
  // on one batch and checked on an independent batch with a safety factor of 10.
  const auto f = build_h2j(4, params_q2(), 2);
  SamplerConfig cfg;
  cfg.params = params_q2(1.0, 8.0, 4);
  cfg.method = SamplingMethod::GaussianOnly;
  cfg.n_samples = 100;
  double c_hat = 0.0;
  for (const auto& w : draw_samples(cfg)) {
    c_hat = std::max(c_hat, std::abs(f.evaluate(w.state)) / (std::pow(hs_norm(w.state, 1.0 / 3.0), 4) * sup_norm(f)));
  }
  cfg.seed = 99;
  for (const auto& w : draw_samples(cfg)) {
    EXPECT_LE(std::abs(f.evaluate(w.state)), 10.0 * c_hat * std::pow(hs_norm(w.state, 1.0 / 3.0), 4) * sup_norm(f));
  }
}

TEST(Gradient, ActionDerivative) {
  FourierState s(2);
  s.set(-1, Complex(0.3, 0.2));
  const auto g = action_polynomial(2, -1).gradient(s);
  EXPECT_EQ(g.d_conj[1], s[-1]);
  EXPECT_EQ(g.d_psi[1], std::conj(s[-1]));
}

TEST(Gradient, FiniteDifference) {
  const auto f = random_polynomial(4, 3, 30, 15);
  const auto s = random_state(4, 16, 0.8);
  const auto dir = random_state(4, 17);
  const double fd = directional_fd([&](const FourierState& x) { return f.evaluate(x); }, s, dir, 1e-5);
  const double an = directional_from_gradient(f.gradient(s), dir);
  EXPECT_NEAR(fd, an, 1e-6 * std::max(1.0, std::abs(an)));
}

TEST(SupNorm, EmptyAndHomogeneous) {
  EXPECT_EQ(sup_norm(SparsePolynomial(3, 4)), 0.0);
  const auto f = random_polynomial(3, 2, 10, 18);
  EXPECT_DOUBLE_EQ(sup_norm(f.scaled(2.0)), 2.0 * sup_norm(f));
}

TEST(Serialization, JsonLinesRoundTrip) {
  const auto f = random_polynomial(4, 2, 20, 19);
  std::stringstream ss;
  f.write_jsonl(ss);
  const auto g = SparsePolynomial::from_jsonl(ss, 4);
  EXPECT_EQ(sup_norm(f - g), 0.0);
}

TEST(Admissibility, RelationSearch) {
  EXPECT_TRUE(admits_relation(Monomial::make({1, 2}, {0, 3}), 1, 1));
  EXPECT_TRUE(admits_relation(Monomial::make({2, 2}, {0, 4}), 2, 6));
  EXPECT_FALSE(admits_relation(Monomial::make({2, 2}, {0, 4}), 1, 1));
}

TEST(Cutoff, ShapeAndDerivatives) {
  EXPECT_EQ(rho(0.0), 0.0);
  EXPECT_EQ(rho(1.0), 0.0);
  EXPECT_EQ(rho(-0.7), 0.0);
  EXPECT_EQ(rho(2.0), 1.0);
  EXPECT_EQ(rho(-5.0), 1.0);
  double prev = 0.0;
  for (double x = 1.0; x <= 2.0; x += 1e-3) {
    EXPECT_GE(rho(x), prev);
    EXPECT_EQ(rho(x), rho(-x));
    prev = rho(x);
  }
  const double h = 1e-6;
  for (double x : {1.2, 1.5, -1.7, 1.93}) {
    EXPECT_NEAR(rho_d1(x), (rho(x + h) - rho(x - h)) / (2 * h), 1e-6);
    EXPECT_NEAR(rho_d2(x), (rho_d1(x + h) - rho_d1(x - h)) / (2 * h), 1e-5);
  }
  EXPECT_THROW(CutoffSpec{0.1}.validate(20.0), InvalidArgument);
  EXPECT_NO_THROW(CutoffSpec::automatic(32.0).validate(32.0));
}

TEST(Modulated, CoefficientFunctionsDifferentiate) {
  const double delta = 0.3, h = 1e-7;
  for (auto kind : {CoefficientKind::Cutoff, CoefficientKind::ResonantComplement, CoefficientKind::CutoffOverA,
                    CoefficientKind::CutoffDerivative, CoefficientKind::CutoffOverADerivative}) {
    for (double a : {0.35, 0.45, -0.5, 0.58, 0.9}) {
      const double fd = (coefficient_function(kind, a + h, delta) - coefficient_function(kind, a - h, delta)) / (2 * h);
      EXPECT_NEAR(coefficient_function(kind, a, delta, 1), fd, 1e-5 * std::max(1.0, std::abs(fd))) << to_string(kind);
    }
  }
}

TEST(Modulated, GradientFarFromCutoffEdge) {
  // rho = 1 and rho' = 0 at |a| > 2 delta: only the 1/a chain-rule term remains.
  const double delta = 0.01;
  const auto m = Monomial::make({1, 1}, {0, 2});
  ModulatedPolynomial f(3, 4, delta);
  const auto combo = ActionCombination::from_signature(m);
  f.add_term(m, CoefficientKind::CutoffOverA, combo, 1.0);
  FourierState s(3);
  s.set(1, Complex(0.5, 0.1));
  s.set(0, Complex(0.2, -0.1));
  s.set(2, Complex(-0.1, 0.2));
  const double a = 2 * std::norm(s[1]) - std::norm(s[0]) - std::norm(s[2]);
  ASSERT_GT(std::abs(a), 2 * delta);
  const auto g = f.gradient(s);
  const Complex mono = m.evaluate(s);
  // ∂/∂conj(psi_0) = (1/a) psi_1² conj(psi_2) + (-1/a²)(-1) psi_0 mono
  const Complex expected = s[1] * s[1] * std::conj(s[2]) / a + mono * s[0] / (a * a);
  EXPECT_LT(std::abs(g.d_conj[3] - expected), 1e-12);
}

TEST(Modulated, GradientFiniteDifference) {
  const double delta = 0.07;
  ModulatedPolynomial f(3, 4, delta);
  const auto m1 = Monomial::make({1, 1}, {0, 2});
  const auto m2 = Monomial::make({-1, 2}, {0, 1});
  f.add_term(m1, CoefficientKind::CutoffOverA, ActionCombination::from_signature(m1), Complex(0.3, 0.1));
  f.add_term(m2, CoefficientKind::Cutoff, ActionCombination::from_signature(m2), Complex(-0.2, 0.4));
  f.add_term(m1, CoefficientKind::CutoffOverADerivative, ActionCombination::from_signature(m1), 0.01);
  FourierState s(3);
  s.set(1, Complex(0.25, 0.05));
  s.set(0, Complex(0.1, -0.05));
  s.set(2, Complex(-0.05, 0.12));
  s.set(-1, Complex(0.2, 0.1));
  const double a1 = ActionCombination::from_signature(m1).value(s);
  ASSERT_GT(std::abs(a1), delta);
  ASSERT_LT(std::abs(a1), 2 * delta);  // inside the transition region
  const auto dir = random_state(3, 23, 0.1);
  const double fd = directional_fd([&](const FourierState& x) { return f.evaluate(x); }, s, dir, 1e-6);
  EXPECT_NEAR(directional_from_gradient(f.gradient(s), dir), fd, 1e-6 * std::max(1.0, std::abs(fd)));
}

TEST(Modulated, BracketSplitsIntoF1AndF2) {
  const double delta = 0.05;
  const auto chi = random_polynomial(3, 2, 12, 24);
  ModulatedPolynomial g(3, 6, delta);
  const auto m = Monomial::make({-2, 1, 1}, {-1, -1, 2});
  g.add_term(m, CoefficientKind::CutoffOverA, ActionCombination::from_signature(m), 1.0);
  g.set_admissibility(Admissibility{2, 1});
  const auto b = flow_bracket(chi, g);
  EXPECT_EQ(b.f1.degree(), 4 + 6 - 2);
  EXPECT_EQ(b.f2.degree(), 4 + 6);
  EXPECT_FALSE(b.f1.empty());
  EXPECT_FALSE(b.f2.empty());
  EXPECT_EQ(b.f1.admissibility()->m, 4);
  for (const auto& t : b.f2.terms()) EXPECT_EQ(t.kind, CoefficientKind::CutoffOverADerivative);
  // Pointwise: the bracket of the values equals F1 + F2.
  FourierState s(3);
  s.set(-2, Complex(0.1, 0.05));
  s.set(1, Complex(0.3, -0.1));
  s.set(-1, Complex(0.12, 0.02));
  s.set(2, Complex(0.05, 0.1));
  s.set(0, Complex(0.07, -0.04));
  const Complex lhs = flow_bracket_value(chi.gradient(s), g.gradient(s));
  const Complex rhs = b.f1.evaluate(s) + b.f2.evaluate(s);
  EXPECT_LT(std::abs(lhs - rhs), 1e-12 * std::max(1.0, std::abs(lhs)));
}

TEST(Modulated, DerivativeBounds) {
  const double delta = 0.1;
  ModulatedPolynomial f(2, 2, delta);
  f.add_term(Monomial::make({1}, {1}), CoefficientKind::Cutoff, ActionCombination::from_pairs({{1, 1}}), 2.0);
  const auto b = f.derivative_bounds(2);
  ASSERT_EQ(b.size(), 3u);
  EXPECT_NEAR(b[0], 2.0, 1e-12);
  EXPECT_GT(b[1], 2.0 / delta);  // rho rises by 1 over a/delta in [1,2]
  EXPECT_GT(b[2], b[1]);
}

TEST(GaussianBounds, LatticeSum) {
  double direct = 1.0;
  for (long l = 1; l <= 1000000; ++l) direct += 2.0 / (1.0 + double(l) * double(l));
  EXPECT_NEAR(lattice_sum(), 3.153348, 1e-6);
  EXPECT_NEAR(direct, lattice_sum(), 2.1e-6);
}

TEST(GaussianBounds, ConstantAndExactActionNorm) {
  EXPECT_NEAR(gaussian_norm_constant(1), 8.0 * std::pow(2.0, 1.5) * lattice_sum(), 1e-9);
  // ||I_0||_{g,beta} = sqrt(8)/beta, well below C_g(1)/beta.
  SamplerConfig cfg;
  cfg.params = params_q2(1.0, 16.0, 2);
  cfg.n_samples = 4000;
  const auto r = gaussian_norm_check(action_polynomial(2, 0), cfg);
  EXPECT_NEAR(r.norm.mean, std::sqrt(8.0) / 16.0, 4 * r.norm.std_error);
  EXPECT_TRUE(r.pass);
}

}  // namespace
}  // namespace nlsgibbs
