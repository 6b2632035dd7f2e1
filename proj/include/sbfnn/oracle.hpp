#pragma once
/**
 * @file oracle.hpp
 * @brief Fixed-step RK4 reference trajectories used as ground truth.
 *
 * Never part of the training loss; only tests and N-MSE evaluation read it.
 */

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "sbfnn/biomodels.hpp"
#include "sbfnn/errors.hpp"

namespace sbfnn {

/// Row-major samples: states[i * dim + d] is dimension d at times[i].
struct Trajectory {
  std::vector<double> times;
  std::vector<double> states;
  std::size_t dim = 0;

  std::size_t size() const { return times.size(); }
  std::span<const double> state(std::size_t i) const { return {states.data() + i * dim, dim}; }
  double at(std::size_t i, std::size_t d) const { return states[i * dim + d]; }
};

using RhsFn = std::function<void(std::span<const double>, double, std::span<double>)>;

namespace detail {
inline void check_finite(std::span<const double> y, double t) {
  for (double v : y)
    if (!std::isfinite(v)) throw DivergenceError("integration diverged at t = " + std::to_string(t), t);
}
}  // namespace detail

/// Classical RK4 with `substeps` equal steps between consecutive requested
/// times. Rows align with `times` exactly.
inline Trajectory integrate_rk4(const RhsFn& f, std::vector<double> y, const std::vector<double>& times,
                                std::size_t substeps) {
  if (times.empty() || times.front() != 0.0) throw ContractError("integrate_rk4: times must start at 0");
  if (substeps < 1) throw ContractError("integrate_rk4: substeps must be >= 1");
  for (std::size_t i = 1; i < times.size(); ++i)
    if (!(times[i] > times[i - 1])) throw ContractError("integrate_rk4: times must be strictly ascending");
  const std::size_t n = y.size();
  Trajectory out{times, {}, n};
  out.states.reserve(times.size() * n);
  out.states.insert(out.states.end(), y.begin(), y.end());
  std::vector<double> k1(n), k2(n), k3(n), k4(n), tmp(n);
  double t = 0.0;
  for (std::size_t i = 1; i < times.size(); ++i) {
    const double h = (times[i] - times[i - 1]) / static_cast<double>(substeps);
    for (std::size_t s = 0; s < substeps; ++s) {
      t = times[i - 1] + static_cast<double>(s) * h;
      f(y, t, k1);
      for (std::size_t d = 0; d < n; ++d) tmp[d] = y[d] + 0.5 * h * k1[d];
      f(tmp, t + 0.5 * h, k2);
      for (std::size_t d = 0; d < n; ++d) tmp[d] = y[d] + 0.5 * h * k2[d];
      f(tmp, t + 0.5 * h, k3);
      for (std::size_t d = 0; d < n; ++d) tmp[d] = y[d] + h * k3[d];
      f(tmp, t + h, k4);
      for (std::size_t d = 0; d < n; ++d) y[d] += h / 6.0 * (k1[d] + 2.0 * k2[d] + 2.0 * k3[d] + k4[d]);
      detail::check_finite(y, t + h);
    }
    out.states.insert(out.states.end(), y.begin(), y.end());
  }
  return out;
}

inline RhsFn rhs_of(const ModelSpec& model) {
  return [&model](std::span<const double> y, double t, std::span<double> dy) { model.rhs(y, t, dy); };
}

inline Trajectory integrate_rk4(const ModelSpec& model, std::vector<double> ic, const std::vector<double>& times,
                                std::size_t substeps) {
  if (ic.size() != model.dim()) throw DimensionError("integrate_rk4: initial state does not match model dimension");
  return integrate_rk4(rhs_of(model), std::move(ic), times, substeps);
}

/// Integrates each interval with the fewest equal substeps keeping the step
/// at or below t_end / 10000. The seed only drives stochastic initial states.
inline Trajectory generate_truth(const ModelSpec& model, const std::vector<double>& times, std::uint64_t seed) {
  if (times.empty() || times.front() != 0.0) throw ContractError("generate_truth: times must start at 0");
  const double max_step = model.t_end() / 10000.0;
  std::vector<double> y = model.initial_condition(seed);
  const std::size_t n = y.size();
  Trajectory out{times, {}, n};
  out.states.insert(out.states.end(), y.begin(), y.end());
  const auto f = rhs_of(model);
  for (std::size_t i = 1; i < times.size(); ++i) {
    const double span = times[i] - times[i - 1];
    if (!(span > 0.0)) throw ContractError("generate_truth: times must be strictly ascending");
    const auto steps = static_cast<std::size_t>(std::max(1.0, std::ceil(span / max_step - 1e-9)));
    const auto seg = integrate_rk4(f, y, {0.0, span}, steps);
    // Segment integrates on a local clock; the models are autonomous.
    std::copy(seg.states.begin() + static_cast<std::ptrdiff_t>(n), seg.states.end(), y.begin());
    out.states.insert(out.states.end(), y.begin(), y.end());
  }
  return out;
}

/// Richardson estimate of the global order from solutions at T with base,
/// 2*base and 4*base steps. Returns NaN when the differences vanish (for
/// example a zero right-hand side), where no order can be measured.
inline double convergence_order(const RhsFn& f, const std::vector<double>& ic, double T, std::size_t base_steps = 100) {
  auto solve = [&](std::size_t steps) {
    const auto tr = integrate_rk4(f, ic, {0.0, T}, steps);
    return std::vector<double>(tr.states.end() - static_cast<std::ptrdiff_t>(ic.size()), tr.states.end());
  };
  const auto a = solve(base_steps), b = solve(2 * base_steps), c = solve(4 * base_steps);
  double e1 = 0.0, e2 = 0.0;
  for (std::size_t d = 0; d < ic.size(); ++d) {
    e1 = std::max(e1, std::abs(a[d] - b[d]));
    e2 = std::max(e2, std::abs(b[d] - c[d]));
  }
  if (e1 == 0.0 || e2 == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return std::log2(e1 / e2);
}

inline double convergence_order(const ModelSpec& model, const std::vector<double>& ic, double T,
                                std::size_t base_steps = 100) {
  return convergence_order(rhs_of(model), ic, T, base_steps);
}

/// CSV with header t,<names> (default dim_0,...,dim_{D-1}) and 17
/// significant digits.
inline void write_trajectory_csv(std::ostream& out, const Trajectory& tr, const std::vector<std::string>& names = {}) {
  if (!names.empty() && names.size() != tr.dim) throw DimensionError("write_trajectory_csv: need one name per dimension");
  out << 't';
  for (std::size_t d = 0; d < tr.dim; ++d) {
    if (names.empty()) out << ",dim_" << d;
    else out << ',' << names[d];
  }
  out << '\n';
  char buf[32];
  for (std::size_t i = 0; i < tr.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g", tr.times[i]);
    out << buf;
    for (std::size_t d = 0; d < tr.dim; ++d) {
      std::snprintf(buf, sizeof buf, "%.17g", tr.at(i, d));
      out << ',' << buf;
    }
    out << '\n';
  }
}

inline void write_trajectory_csv(const std::string& path, const Trajectory& tr) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  write_trajectory_csv(out, tr);
  if (!out) throw IoError("failed writing " + path);
}

}  // namespace sbfnn
