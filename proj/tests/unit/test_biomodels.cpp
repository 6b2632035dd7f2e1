#include <gtest/gtest.h>

#include <cmath>
#include <sstream>
#include <vector>

#include "sbfnn/biomodels.hpp"
#include "sbfnn/rng.hpp"

using namespace sbfnn;

namespace {

std::vector<double> random_state(std::size_t n, std::uint64_t seed, double lo = 0.0, double hi = 5.0) {
  Rng rng(seed);
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(lo, hi);
  return v;
}

double sum(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s;
}

// Finite-difference check of the Jacobian-transpose product.
double vjp_error(const ModelSpec& m, const std::vector<double>& y, std::uint64_t seed) {
  const auto g = random_state(y.size(), seed, -1.0, 1.0);
  std::vector<double> out(y.size(), 0.0);
  m.rhs_vjp(y, 0.0, g, out);
  double worst = 0.0;
  auto probe = y;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double h = 1e-6;
    probe[i] = y[i] + h;
    const auto fp = m.rhs(probe);
    probe[i] = y[i] - h;
    const auto fm = m.rhs(probe);
    probe[i] = y[i];
    double fd = 0.0;
    for (std::size_t k = 0; k < y.size(); ++k) fd += g[k] * (fp[k] - fm[k]) / (2 * h);
    worst = std::max(worst, std::abs(fd - out[i]) / std::max(1.0, std::abs(fd)));
  }
  return worst;
}

}  // namespace

TEST(Rep3, Examples) {
  const auto a = rhs_rep3(std::vector<double>{0, 0, 0}, {});
  for (double v : a) EXPECT_EQ(v, 10.0);
  const auto b = rhs_rep3(std::vector<double>{1, 1, 1}, {});
  for (double v : b) EXPECT_EQ(v, 4.0);
}

TEST(Rep3, CyclicRepressionOrder) {
  // lacI is repressed by cI, tetR by lacI, cI by tetR.
  const std::vector<double> P{1.0, 2.0, 0.5};
  const auto d = rhs_rep3(P, {});
  EXPECT_DOUBLE_EQ(d[0], 10.0 / (1.0 + 0.125) - 1.0);
  EXPECT_DOUBLE_EQ(d[1], 10.0 / 2.0 - 2.0);
  EXPECT_DOUBLE_EQ(d[2], 10.0 / 9.0 - 0.5);
}

TEST(Rep3, FixedPointResidual) {
  // P* = beta / (1 + P*^3) by bisection on [0, beta].
  double lo = 0.0, hi = 10.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (mid - 10.0 / (1.0 + mid * mid * mid) > 0.0 ? hi : lo) = mid;
  }
  const double p = 0.5 * (lo + hi);
  for (double v : rhs_rep3(std::vector<double>{p, p, p}, {})) EXPECT_LT(std::abs(v), 1e-10);
}

TEST(Rep6, Examples) {
  const auto z = rhs_rep6(std::vector<double>(6, 0.0), {});
  for (int i = 0; i < 3; ++i) EXPECT_DOUBLE_EQ(z[i], 10.00001);
  for (int i = 3; i < 6; ++i) EXPECT_EQ(z[i], 0.0);
  const auto eq = rhs_rep6(std::vector<double>{1.0, 2.0, 3.0, 1.0, 2.0, 3.0}, {});
  for (int i = 3; i < 6; ++i) EXPECT_EQ(eq[i], 0.0);
}

TEST(Rep6, MatchesDirectSubstitution) {
  const Rep6Params p;
  for (std::uint64_t s = 0; s < 10; ++s) {
    const auto y = random_state(6, s);
    const auto d = rhs_rep6(y, p);
    const double m1 = y[0], m2 = y[1], m3 = y[2], p1 = y[3], p2 = y[4], p3 = y[5];
    const std::vector<double> ref{-m1 + 10.0 / (1 + p3 * p3 * p3) + 1e-5, -m2 + 10.0 / (1 + p1 * p1 * p1) + 1e-5,
                                  -m3 + 10.0 / (1 + p2 * p2 * p2) + 1e-5, -10.0 * (p1 - m1),
                                  -10.0 * (p2 - m2), -10.0 * (p3 - m3)};
    for (int i = 0; i < 6; ++i) EXPECT_NEAR(d[i], ref[i], 1e-12);
  }
}

TEST(Sir, Examples) {
  const auto fixed = rhs_sir(std::vector<double>{50, 0, 50}, {});
  for (double v : fixed) EXPECT_EQ(v, 0.0);
  const auto d = rhs_sir(std::vector<double>{99, 1, 0}, {});
  EXPECT_NEAR(d[0], -0.0099, 1e-15);
  EXPECT_NEAR(d[1], -0.0401, 1e-15);
  EXPECT_NEAR(d[2], 0.05, 1e-15);
}

TEST(Sir, ConservationForAnyState) {
  for (std::uint64_t s = 0; s < 50; ++s) {
    const auto d = rhs_sir(random_state(3, s, 0.0, 100.0), {});
    EXPECT_NEAR(d[0] + d[1] + d[2], 0.0, 1e-12);
  }
}

TEST(Asir, ZeroInfectionAndConservation) {
  const auto m = make_asir();
  std::vector<double> y(15, 0.0);
  for (int i = 0; i < 5; ++i) y[3 * i] = 20.0;
  for (double v : m.rhs(y)) EXPECT_EQ(v, 0.0);
  for (std::uint64_t s = 0; s < 20; ++s) EXPECT_NEAR(sum(m.rhs(random_state(15, s, 0.0, 20.0))), 0.0, 1e-12);
}

TEST(Asir, OneGroupReducesToSir) {
  AsirParams p;
  p.groups = 1;
  p.contact = {1.0};
  const auto m = make_asir(p);
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto y = random_state(3, s, 0.0, 100.0);
    const auto a = m.rhs(y);
    const auto b = rhs_sir(y, {});
    for (int i = 0; i < 3; ++i) EXPECT_NEAR(a[i], b[i], 1e-13 * std::max(1.0, std::abs(b[i])));
  }
}

TEST(Asir, ContactMatrixShapeChecked) {
  AsirParams p;
  p.groups = 3;
  p.contact = std::vector<double>(4, 1.0);
  EXPECT_THROW(make_asir(p), ContractError);
  const auto d = AsirParams::default_contact(3);
  EXPECT_EQ(d[0], 5.0);
  EXPECT_EQ(d[1], 1.0);
}

TEST(Asir, ContactCsv) {
  std::istringstream in("1,2\n3,4\n");
  std::size_t n = 0;
  const auto m = load_contact_csv(in, n);
  EXPECT_EQ(n, 2u);
  EXPECT_EQ(m, (std::vector<double>{1, 2, 3, 4}));
  std::istringstream bad("1,2\n3\n");
  EXPECT_THROW(load_contact_csv(bad, n), ContractError);
}

TEST(Laplacian, Examples) {
  const SpatialGrid g{3, 1, 1.0};
  const auto c = laplacian(std::vector<double>{2, 2, 2}, g);
  for (double v : c) EXPECT_EQ(v, 0.0);
  const auto d = laplacian(std::vector<double>{0, 1, 0}, g);
  EXPECT_EQ(d[1], -2.0);
  EXPECT_EQ(d[0], 1.0);
  EXPECT_EQ(d[2], 1.0);
  EXPECT_THROW(laplacian(std::vector<double>{1, 2}, SpatialGrid{2, 1, 1.0}), ContractError);
  EXPECT_THROW(laplacian(std::vector<double>(12, 0.0), SpatialGrid{4, 2, 1.0}), ContractError);
}

TEST(Laplacian, SumIsZeroUnderNeumann) {
  for (auto g : {SpatialGrid{17, 1, 1.0}, SpatialGrid{6, 5, 0.5}}) {
    const auto f = random_state(g.cells(), g.cells(), -3.0, 3.0);
    EXPECT_NEAR(sum(laplacian(f, g)), 0.0, 1e-11);
  }
}

TEST(Laplacian, TwoDimensionalStencilAndSpacing) {
  const SpatialGrid g{3, 3, 0.5};
  std::vector<double> f(9, 0.0);
  f[4] = 1.0;  // centre
  const auto l = laplacian(f, g);
  EXPECT_DOUBLE_EQ(l[4], -4.0 / 0.25);
  EXPECT_DOUBLE_EQ(l[1], 1.0 / 0.25);
  EXPECT_DOUBLE_EQ(l[0], 0.0);
}

TEST(Turing, HomogeneousSteadyStateIsExactlyStill) {
  for (const auto& m : {make_turing1d(100, 0.0), make_turing2d(25, 0.0), make_turing2d(8, 0.0)}) {
    const auto y = m.initial_condition(3);
    EXPECT_EQ(y[0], 1.0);
    EXPECT_EQ(y[m.dim() / 2], 0.9);
    for (double v : m.rhs(y)) EXPECT_EQ(v, 0.0);
  }
}

TEST(Turing, ReactionOnlyIsUniform) {
  TuringParams p;
  p.d1 = p.d2 = 0.0;
  p.grid = {10, 1, 1.0};
  const auto m = make_turing(p, false, 0.0);
  std::vector<double> y(20);
  for (int i = 0; i < 10; ++i) y[i] = 0.7, y[10 + i] = 1.3;
  const auto d = m.rhs(y);
  for (int i = 1; i < 10; ++i) {
    EXPECT_EQ(d[i], d[0]);
    EXPECT_EQ(d[10 + i], d[10]);
  }
  EXPECT_NEAR(d[0], 0.1 - 0.7 + 0.49 * 1.3, 1e-15);
}

// Loop-free restatement: vectorised with explicit neighbour vectors.
TEST(Turing, MatchesIndependentReimplementation) {
  const auto m = make_turing1d(12, 0.0);
  const auto y = random_state(24, 5, 0.2, 2.0);
  const auto d = m.rhs(y);
  const std::size_t n = 12;
  for (std::size_t i = 0; i < n; ++i) {
    const double u = y[i], v = y[n + i];
    const double ul = y[i == 0 ? 1 : i - 1], ur = y[i == n - 1 ? n - 2 : i + 1];
    const double vl = y[n + (i == 0 ? 1 : i - 1)], vr = y[n + (i == n - 1 ? n - 2 : i + 1)];
    // reflected ghost: the ghost equals the cell itself, so the missing side contributes 0
    const double lu = (i == 0 ? u : ul) + (i == n - 1 ? u : ur) - 2 * u;
    const double lv = (i == 0 ? v : vl) + (i == n - 1 ? v : vr) - 2 * v;
    EXPECT_NEAR(d[i], 0.1 - u + u * u * v + lu, 1e-12);
    EXPECT_NEAR(d[n + i], 0.9 - u * u * v + 40.0 * lv, 1e-12);
  }
}

TEST(Turing, PerturbationIsSeeded) {
  const auto m = make_turing1d();
  EXPECT_EQ(m.initial_condition(7), m.initial_condition(7));
  EXPECT_NE(m.initial_condition(7), m.initial_condition(8));
  for (double v : m.initial_condition(7)) EXPECT_TRUE(std::abs(v - 1.0) <= 0.1 || std::abs(v - 0.9) <= 0.1);
}

TEST(Models, JacobianTransposeProducts) {
  for (const auto& m : {make_rep3(), make_rep6(), make_sir(), make_asir(), make_turing1d(6), make_turing2d(4)}) {
    const auto y = random_state(m.dim(), m.dim(), 0.2, 3.0);
    EXPECT_LT(vjp_error(m, y, 3), 1e-6) << m.name();
  }
}

TEST(Models, RegistryAndDomains) {
  EXPECT_EQ(make_model("rep3").dim(), 3u);
  EXPECT_EQ(make_model("rep6").dim(), 6u);
  EXPECT_EQ(make_model("asir").dim(), 15u);
  EXPECT_EQ(make_model("turing1d").dim(), 200u);
  EXPECT_EQ(make_model("turing2d").dim(), 1250u);
  EXPECT_EQ(make_model("turing2d").t_end(), 2.0);
  EXPECT_EQ(make_model("sir").t_end(), 100.0);
  EXPECT_TRUE(make_model("rep3").oscillatory());
  EXPECT_FALSE(make_model("sir").oscillatory());
  EXPECT_THROW(make_model("lorenz"), ContractError);
  EXPECT_EQ(dimension_names(make_asir())[3], "S_2");
}

TEST(Models, RepressilatorRhsFiniteOnOrthant) {
  for (std::uint64_t s = 0; s < 100; ++s) {
    for (double v : make_rep3().rhs(random_state(3, s, 0.0, 1e6))) EXPECT_TRUE(std::isfinite(v));
    for (double v : make_rep6().rhs(random_state(6, s, 0.0, 1e6))) EXPECT_TRUE(std::isfinite(v));
  }
}
