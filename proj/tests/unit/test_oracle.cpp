#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <sstream>
#include <vector>

#include "sbfnn/biomodels.hpp"
#include "sbfnn/oracle.hpp"

using namespace sbfnn;

namespace {

std::vector<double> linspace(double a, double b, std::size_t n) {
  std::vector<double> t(n);
  for (std::size_t i = 0; i < n; ++i) t[i] = a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1);
  return t;
}

const RhsFn decay = [](std::span<const double> y, double, std::span<double> d) { d[0] = -y[0]; };
const RhsFn harmonic = [](std::span<const double> y, double, std::span<double> d) {
  d[0] = y[1];
  d[1] = -y[0];
};

double spatial_variance(const Trajectory& tr, std::size_t row, std::size_t cells) {
  double m = 0.0, v = 0.0;
  for (std::size_t c = 0; c < cells; ++c) m += tr.at(row, c) / static_cast<double>(cells);
  for (std::size_t c = 0; c < cells; ++c) v += (tr.at(row, c) - m) * (tr.at(row, c) - m) / static_cast<double>(cells);
  return v;
}

}  // namespace

TEST(Rk4, ExponentialDecay) {
  const auto tr = integrate_rk4(decay, {1.0}, {0.0, 1.0}, 100);
  EXPECT_NEAR(tr.at(1, 0), std::exp(-1.0), 1e-8);
  EXPECT_NEAR(tr.at(1, 0), 0.3678794, 1e-7);
}

TEST(Rk4, RowsAlignWithTimes) {
  const std::vector<double> times{0.0, 0.3, 0.35, 2.0};
  const auto tr = integrate_rk4(decay, {2.0}, times, 50);
  ASSERT_EQ(tr.size(), 4u);
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(tr.times[i], times[i]);
    EXPECT_NEAR(tr.at(i, 0), 2.0 * std::exp(-times[i]), 1e-8);
  }
}

TEST(Rk4, Preconditions) {
  EXPECT_THROW(integrate_rk4(decay, {1.0}, {0.5, 1.0}, 10), ContractError);
  EXPECT_THROW(integrate_rk4(decay, {1.0}, {0.0, 1.0}, 0), ContractError);
  EXPECT_THROW(integrate_rk4(decay, {1.0}, {0.0, 1.0, 1.0}, 1), ContractError);
}

TEST(Rk4, DivergenceReportsTime) {
  const RhsFn blowup = [](std::span<const double> y, double, std::span<double> d) { d[0] = y[0] * y[0]; };
  try {
    integrate_rk4(blowup, {1.0}, {0.0, 2.0}, 2000);
    FAIL() << "expected divergence";
  } catch (const DivergenceError& e) {
    EXPECT_GT(e.at(), 0.9);
    EXPECT_LE(e.at(), 2.0);
  }
}

TEST(Rk4, SirConservation) {
  const auto m = make_sir();
  const auto tr = integrate_rk4(m, m.initial_condition(0), linspace(0, 100, 101), 100);
  for (std::size_t i = 0; i < tr.size(); ++i) EXPECT_NEAR(tr.at(i, 0) + tr.at(i, 1) + tr.at(i, 2), 100.0, 1e-9);
}

// Global error against the exact harmonic solution; slope of log err vs log h.
TEST(Rk4, HarmonicFourthOrder) {
  std::vector<double> lh, le;
  for (double h : {0.1, 0.05, 0.025}) {
    const double T = 10.0;
    const auto steps = static_cast<std::size_t>(std::lround(T / h));
    const auto tr = integrate_rk4(harmonic, {1.0, 0.0}, {0.0, T}, steps);
    const double err = std::hypot(tr.at(1, 0) - std::cos(T), tr.at(1, 1) + std::sin(T));
    lh.push_back(std::log(h));
    le.push_back(std::log(err));
  }
  const double slope = (le[2] - le[0]) / (lh[2] - lh[0]);
  EXPECT_NEAR(slope, 4.0, 0.2);
  EXPECT_NEAR((le[1] - le[0]) / (lh[1] - lh[0]), 4.0, 0.2);
}

TEST(Rk4, DoublingSubstepsCutsErrorSixteenfold) {
  const auto exact = integrate_rk4(harmonic, {1.0, 0.0}, {0.0, 5.0}, 20000);
  const auto a = integrate_rk4(harmonic, {1.0, 0.0}, {0.0, 5.0}, 100);
  const auto b = integrate_rk4(harmonic, {1.0, 0.0}, {0.0, 5.0}, 200);
  const double ea = std::abs(a.at(1, 0) - exact.at(1, 0)), eb = std::abs(b.at(1, 0) - exact.at(1, 0));
  EXPECT_NEAR(ea / eb, 16.0, 1.6);
}

TEST(ConvergenceOrder, ExponentialAndRep3) {
  EXPECT_NEAR(convergence_order(decay, {1.0}, 1.0, 10), 4.0, 0.2);
  const auto m = make_rep3();
  // coarser steps are pre-asymptotic for rep3 (about 3.3 at h = 0.05)
  EXPECT_NEAR(convergence_order(m, m.initial_condition(0), 10.0, 2000), 4.0, 0.2);
}

TEST(ConvergenceOrder, ZeroRhsGivesSentinel) {
  const RhsFn zero = [](std::span<const double>, double, std::span<double> d) { d[0] = 0.0; };
  EXPECT_TRUE(std::isnan(convergence_order(zero, {3.0}, 1.0)));
  const auto tr = integrate_rk4(zero, {3.0}, {0.0, 1.0}, 7);
  EXPECT_EQ(tr.at(1, 0), 3.0);
}

TEST(Truth, Rep3Bounded) {
  const auto m = make_rep3();
  const auto tr = generate_truth(m, linspace(0, 10, 100), 0);
  for (double v : tr.states) {
    EXPECT_GT(v, 0.0);
    EXPECT_LE(v, 10.0);
  }
}

TEST(Truth, MatchesFineRk4) {
  const auto m = make_rep3();
  const std::vector<double> times{0.0, 0.7, 3.3, 3.4, 10.0};
  const auto a = generate_truth(m, times, 0);
  const auto b = integrate_rk4(m, m.initial_condition(0), times, 4000);
  for (std::size_t i = 0; i < a.states.size(); ++i) EXPECT_NEAR(a.states[i], b.states[i], 1e-9);
}

TEST(Truth, DeterministicBySeed) {
  const auto m = make_turing1d(20);
  const auto times = linspace(0, 1, 5);
  const auto a = generate_truth(m, times, 7), b = generate_truth(m, times, 7), c = generate_truth(m, times, 8);
  EXPECT_EQ(a.states, b.states);
  EXPECT_NE(a.states, c.states);
}

TEST(Truth, TuringPatternForms) {
  const auto m = make_turing1d();
  const auto tr = generate_truth(m, {0.0, 10.0}, 1);
  EXPECT_GT(spatial_variance(tr, 1, 100), 10.0 * spatial_variance(tr, 0, 100));
}

TEST(Truth, TuringSteadyStateStaysHomogeneous) {
  const auto m = make_turing1d(100, 0.0);
  const auto tr = generate_truth(m, {0.0, 5.0, 10.0}, 1);
  for (std::size_t c = 0; c < 100; ++c) {
    EXPECT_NEAR(tr.at(2, c), 1.0, 1e-8);
    EXPECT_NEAR(tr.at(2, 100 + c), 0.9, 1e-8);
  }
}

TEST(Csv, HeaderAndPrecision) {
  Trajectory tr{{0.0, 0.1}, {1.0, 1.0 / 3.0, 2.0, 0.25}, 2};
  std::ostringstream os;
  write_trajectory_csv(os, tr);
  std::istringstream in(os.str());
  std::string header, row;
  std::getline(in, header);
  std::getline(in, row);
  EXPECT_EQ(header, "t,dim_0,dim_1");
  EXPECT_EQ(row, "0,1,0.33333333333333331");
}
