#pragma once
/**
 * @file training.hpp
 * @brief Physics-informed training: time sampling, the four-term loss with
 * the variance constraint, Adam with the reciprocal learning-rate decay, and
 * the full-batch epoch loop.
 */

#include <algorithm>
#include <array>
#include <exception>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "sbfnn/autodiff.hpp"
#include "sbfnn/biomodels.hpp"
#include "sbfnn/errors.hpp"
#include "sbfnn/evaluation.hpp"
#include "sbfnn/network.hpp"
#include "sbfnn/oracle.hpp"
#include "sbfnn/rng.hpp"

namespace sbfnn {

// ---------------------------------------------------------------------------
// Configuration

struct TrainConfig {
  std::string model = "rep3";
  Architecture arch = Architecture::SbFnn;
  ActivationMode activation{};
  bool constraint = true;

  double lambda_o = 1.0;
  double lambda_f = 1.0;
  double lambda_b = 0.0;
  double lambda_p = 1.0;
  double penalty_alpha = 0.05;
  double penalty_tau = 100.0;

  double lr_init = 0.01;
  double lr_decay = 1000.0;  // b in b * lr_init / (b + epoch)
  std::size_t epochs = 50000;
  std::size_t train_samples = 1000;
  std::size_t test_samples = 0;  // 0 selects train_samples / 10
  std::uint64_t seed = 0;
  std::uint64_t ic_seed = 0;

  std::size_t hidden = 16;
  std::size_t modes = 12;
  std::size_t depth = 4;
  SpectralAxis spectral_axis = SpectralAxis::Index;
  std::vector<std::size_t> mlp_hidden{32, 32, 32};
  Activation mlp_activation = Activation::Tanh;

  std::size_t log_every = 100;
  bool nmse_exclusion = true;

  std::size_t effective_test_samples() const { return test_samples ? test_samples : std::max<std::size_t>(train_samples / 10, 3); }

  /// Per-model presets: epochs, decay constant and whether the penalty applies.
  static TrainConfig defaults_for(std::string_view model) {
    TrainConfig c;
    c.model = std::string(model);
    switch (model_kind_from_string(model)) {
      case ModelKind::Rep3:
      case ModelKind::Rep6:
        c.epochs = 50000;
        break;
      case ModelKind::Sir:
        c.epochs = 20000;
        c.lambda_p = 0.0;
        break;
      case ModelKind::Asir:
        c.epochs = 30000;
        c.lambda_p = 0.0;
        break;
      case ModelKind::Turing1D:
      case ModelKind::Turing2D:
        c.epochs = 5000;
        c.lr_decay = 100.0;
        c.lambda_p = 0.0;
        break;
    }
    return c;
  }

  void validate() const {
    auto nonneg = [](double v, const char* field) {
      if (!(v >= 0.0)) throw ContractError(std::string(field) + " must be non-negative");
    };
    nonneg(lambda_o, "lambda_o");
    nonneg(lambda_f, "lambda_f");
    nonneg(lambda_b, "lambda_b");
    nonneg(lambda_p, "lambda_p");
    if (!(penalty_tau > 0.0)) throw ContractError("penalty_tau must be positive");
    if (!(lr_init > 0.0)) throw ContractError("lr_init must be positive");
    if (!(lr_decay > 0.0)) throw ContractError("lr_decay must be positive");
    if (train_samples < 3) throw ContractError("train_samples must be at least 3");
    if (effective_test_samples() < 3) throw ContractError("test_samples must be at least 3");
    if (hidden == 0) throw ContractError("hidden must be positive");
    if (modes == 0) throw ContractError("modes must be positive");
    if (log_every == 0) throw ContractError("log_every must be positive");
    (void)model_kind_from_string(model);
  }
};

// ---------------------------------------------------------------------------
// Sampling and schedule

/// Latin hypercube sample of [0, T]: t = 0 first, then one uniform draw in
/// each of the n-1 equal strata of (0, T], ascending.
inline std::vector<double> lhs_sample(std::size_t n, double T, std::uint64_t seed) {
  if (n < 2) throw ContractError("lhs_sample: need at least 2 samples, got " + std::to_string(n));
  if (!(T > 0.0)) throw ContractError("lhs_sample: time domain end must be positive");
  Rng rng(seed);
  const double width = T / static_cast<double>(n - 1);
  std::vector<double> t(n);
  t[0] = 0.0;
  for (std::size_t i = 1; i < n; ++i) {
    const double u = 1.0 - rng.uniform();  // (0, 1]
    t[i] = std::min(T, (static_cast<double>(i - 1) + u) * width);
  }
  return t;
}

/// b * lr_init / (b + epoch).
inline double lr_at(std::size_t epoch, double lr_init, double b) {
  return b * lr_init / (b + static_cast<double>(epoch));
}

// ---------------------------------------------------------------------------
// Loss building blocks

/// Three-point weights of the nonuniform second-order derivative at row i.
struct StencilRow {
  std::size_t first;
  std::array<double, 3> w;
};

inline std::vector<StencilRow> derivative_stencil(std::span<const double> t) {
  const std::size_t n = t.size();
  if (n < 3) throw ContractError("time_derivative: need at least 3 samples");
  for (std::size_t i = 1; i < n; ++i)
    if (!(t[i] > t[i - 1])) throw ContractError("time_derivative: times must be strictly ascending (duplicate or unordered at index " + std::to_string(i) + ")");
  std::vector<StencilRow> rows(n);
  {
    const double h1 = t[1] - t[0], h2 = t[2] - t[1];
    rows[0] = {0, {-(2 * h1 + h2) / (h1 * (h1 + h2)), (h1 + h2) / (h1 * h2), -h1 / (h2 * (h1 + h2))}};
  }
  for (std::size_t i = 1; i + 1 < n; ++i) {
    const double h1 = t[i] - t[i - 1], h2 = t[i + 1] - t[i];
    rows[i] = {i - 1, {-h2 / (h1 * (h1 + h2)), (h2 - h1) / (h1 * h2), h1 / (h2 * (h1 + h2))}};
  }
  {
    const double h1 = t[n - 2] - t[n - 3], h2 = t[n - 1] - t[n - 2];
    rows[n - 1] = {n - 3, {h2 / (h1 * (h1 + h2)), -(h1 + h2) / (h1 * h2), (2 * h2 + h1) / (h2 * (h1 + h2))}};
  }
  return rows;
}

/// d/dt of each column of Y[n x D] on the sample grid: central three-point
/// in the interior, one-sided three-point at both ends.
inline ad::Tensor time_derivative(const ad::Tensor& Y, std::span<const double> times) {
  if (Y.rank() != 2 || Y.rows() != times.size())
    throw DimensionError("time_derivative: " + ad::shape_str(Y.shape()) + " does not match " +
                         std::to_string(times.size()) + " sample times");
  auto stencil = derivative_stencil(times);
  const std::size_t n = Y.rows(), D = Y.cols();
  std::vector<double> out(n * D, 0.0);
  const auto V = Y.data();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < 3; ++k) {
      const double w = stencil[i].w[k];
      const double* src = &V[(stencil[i].first + k) * D];
      for (std::size_t d = 0; d < D; ++d) out[i * D + d] += w * src[d];
    }
  return ad::make_result(ad::Op::Custom, Y.shape(), std::move(out), {Y},
                         [stencil = std::move(stencil), n, D](ad::Node& self) {
                           auto* g = ad::grad_sink(self, 0);
                           if (!g) return;
                           for (std::size_t i = 0; i < n; ++i)
                             for (std::size_t k = 0; k < 3; ++k) {
                               const double w = stencil[i].w[k];
                               double* dst = &(*g)[(stencil[i].first + k) * D];
                               for (std::size_t d = 0; d < D; ++d) dst[d] += w * self.grad[i * D + d];
                             }
                         });
}

/// Model right-hand side applied to every row of Y.
inline ad::Tensor model_rhs(const ad::Tensor& Y, const ModelSpec& model, std::span<const double> times) {
  if (Y.rank() != 2 || Y.cols() != model.dim() || Y.rows() != times.size())
    throw DimensionError("model_rhs: " + ad::shape_str(Y.shape()) + " does not fit model " + model.name());
  const std::size_t n = Y.rows(), D = Y.cols();
  std::vector<double> out(n * D);
  for (std::size_t i = 0; i < n; ++i)
    model.rhs(Y.data().subspan(i * D, D), times[i], std::span<double>(out).subspan(i * D, D));
  std::vector<double> t(times.begin(), times.end());
  return ad::make_result(ad::Op::Custom, Y.shape(), std::move(out), {Y},
                         [&model, t = std::move(t), n, D](ad::Node& self) {
                           auto* g = ad::grad_sink(self, 0);
                           if (!g) return;
                           const auto& Yv = self.inputs[0]->value;
                           for (std::size_t i = 0; i < n; ++i)
                             model.rhs_vjp(std::span<const double>(Yv).subspan(i * D, D), t[i],
                                           std::span<const double>(self.grad).subspan(i * D, D),
                                           std::span<double>(*g).subspan(i * D, D));
                         });
}

inline constexpr double kNormalizeDegenerate = 1e-12;

/// (v - min) / (max - min); all zeros (and zero gradient) when the range is
/// below 1e-12.
inline std::vector<double> normalize01(std::span<const double> v) {
  if (v.empty()) return {};
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  const double range = *hi - *lo;
  std::vector<double> out(v.size(), 0.0);
  if (range < kNormalizeDegenerate) return out;
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = (v[i] - *lo) / range;
  return out;
}

inline ad::Tensor normalize01(const ad::Tensor& v) {
  ad::require_real(v, "normalize01");
  const auto data = v.data();
  const auto lo_it = std::min_element(data.begin(), data.end());
  const auto hi_it = std::max_element(data.begin(), data.end());
  const std::size_t lo = static_cast<std::size_t>(lo_it - data.begin());
  const std::size_t hi = static_cast<std::size_t>(hi_it - data.begin());
  const double range = *hi_it - *lo_it;
  auto out = normalize01(data);
  if (range < kNormalizeDegenerate) return ad::make_result(ad::Op::Custom, v.shape(), std::move(out), {v}, [](ad::Node&) {});
  return ad::make_result(ad::Op::Custom, v.shape(), std::move(out), {v}, [lo, hi, range](ad::Node& self) {
    auto* g = ad::grad_sink(self, 0);
    if (!g) return;
    double to_min = 0.0, to_max = 0.0;
    for (std::size_t i = 0; i < g->size(); ++i) {
      const double gi = self.grad[i];
      (*g)[i] += gi / range;
      to_min += gi * (self.value[i] - 1.0) / range;
      to_max -= gi * self.value[i] / range;
    }
    (*g)[lo] += to_min;
    (*g)[hi] += to_max;
  });
}

/// 0.5 * (1 - tanh((x - alpha) * tau)): near 1 for x << alpha, near 0 beyond.
inline double phi(double x, double alpha, double tau) { return 0.5 * (-std::tanh((x - alpha) * tau) + 1.0); }

inline ad::Tensor phi(const ad::Tensor& x, double alpha, double tau) {
  return ad::scale(ad::add_scalar(ad::scale(ad::tanh(ad::scale(ad::add_scalar(x, -alpha), tau)), -1.0), 1.0), 0.5);
}

/// Sum over output dimensions of phi(Var(normalize01(Y[:, d]))).
inline ad::Tensor variance_penalty(const ad::Tensor& Y, double alpha, double tau) {
  if (Y.rank() != 2 || Y.rows() < 2) throw ContractError("variance_penalty: need at least 2 samples");
  ad::Tensor total;
  for (std::size_t d = 0; d < Y.cols(); ++d) {
    ad::Tensor term = phi(ad::variance(normalize01(ad::column(Y, d))), alpha, tau);
    total = total.defined() ? ad::add(total, term) : term;
  }
  return total;
}

struct LossTerms {
  ad::Tensor total;
  double initial = 0.0;   // ||Y[0] - y0||_2
  double residual = 0.0;  // mean squared (dY/dt - rhs(Y))
  double boundary = 0.0;
  double penalty = 0.0;   // 0 when the constraint does not apply
};

inline bool penalty_applies(const TrainConfig& cfg, const ModelSpec& model) {
  return cfg.constraint && model.oscillatory();
}

/// lambda_o ||Y0 - y0||_2 + lambda_f mean((dY/dt - rhs(Y))^2) + lambda_b * 0
/// + lambda_p * penalty. Throws DivergenceError (at = epoch) on a NaN total.
inline LossTerms total_loss(const ad::Tensor& Y, const ModelSpec& model, std::span<const double> times,
                            std::span<const double> y0, const TrainConfig& cfg, std::size_t epoch = 0) {
  if (Y.rank() != 2 || Y.cols() != model.dim() || Y.rows() != times.size())
    throw DimensionError("total_loss: prediction " + ad::shape_str(Y.shape()) + " does not fit model " + model.name());
  if (y0.size() != model.dim()) throw DimensionError("total_loss: initial state has the wrong length");
  LossTerms out;
  ad::Tensor ic = ad::norm2(ad::sub(ad::row(Y, 0), ad::Tensor::from({y0.size()}, {y0.begin(), y0.end()})));
  ad::Tensor res = ad::mean(ad::square(ad::sub(time_derivative(Y, times), model_rhs(Y, model, times))));
  out.initial = ic.item();
  out.residual = res.item();
  // No model here carries a Dirichlet-type boundary term; zero-flux
  // boundaries are built into the Laplacian stencil.
  out.boundary = 0.0;
  ad::Tensor total = ad::add(ad::scale(ic, cfg.lambda_o), ad::scale(res, cfg.lambda_f));
  if (penalty_applies(cfg, model)) {
    ad::Tensor pen = variance_penalty(Y, cfg.penalty_alpha, cfg.penalty_tau);
    out.penalty = pen.item();
    total = ad::add(total, ad::scale(pen, cfg.lambda_p));
  }
  out.total = total;
  if (!std::isfinite(total.item()))
    throw DivergenceError("training loss is not finite at epoch " + std::to_string(epoch), static_cast<double>(epoch));
  return out;
}

// ---------------------------------------------------------------------------
// Adam

struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::size_t step = 0;
  std::vector<std::vector<double>> m, v;
};

/// One bias-corrected Adam update using each parameter's accumulated grad.
inline void adam_step(std::span<ad::Tensor> params, AdamState& s, double lr) {
  if (s.m.empty()) {
    for (const auto& p : params) {
      s.m.emplace_back(p.numel(), 0.0);
      s.v.emplace_back(p.numel(), 0.0);
    }
  }
  if (s.m.size() != params.size()) throw DimensionError("adam_step: optimizer state does not match parameters");
  ++s.step;
  const double c1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.step));
  const double c2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.step));
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& p = params[k];
    if (s.m[k].size() != p.numel()) throw DimensionError("adam_step: moment shape mismatch");
    if (!p.has_grad()) continue;
    auto data = p.mutable_data();
    const auto g = p.grad();
    auto& m = s.m[k];
    auto& v = s.v[k];
    for (std::size_t i = 0; i < data.size(); ++i) {
      m[i] = s.beta1 * m[i] + (1.0 - s.beta1) * g[i];
      v[i] = s.beta2 * v[i] + (1.0 - s.beta2) * g[i] * g[i];
      data[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + s.eps);
    }
  }
}

// ---------------------------------------------------------------------------
// Training loop

struct TrainResult {
  std::unique_ptr<Network> net;  // parameters after the last epoch
  std::vector<std::vector<double>> best_params;
  double best_test_nmse = std::numeric_limits<double>::infinity();
  std::size_t best_epoch = 0;
  std::vector<HistoryRow> history;
  std::vector<double> train_times;
  std::vector<double> test_times;
  std::vector<double> initial_state;
  Trajectory test_truth;
  std::vector<std::size_t> excluded_dims;
  std::size_t epochs_run = 0;
  double final_loss = std::numeric_limits<double>::quiet_NaN();
  double final_test_nmse = std::numeric_limits<double>::quiet_NaN();
  bool diverged = false;
  std::string error;
};

/// Network inputs: the time column scaled to [0, 1] by the domain length.
inline ad::Tensor encode_times(std::span<const double> times, double t_end) {
  std::vector<double> x(times.size());
  for (std::size_t i = 0; i < times.size(); ++i) x[i] = times[i] / t_end;
  return ad::Tensor::from({times.size(), 1}, std::move(x));
}

inline std::unique_ptr<Network> make_network(const TrainConfig& cfg, std::size_t out_dim) {
  if (cfg.arch == Architecture::SbFnn) {
    FourierNetConfig c;
    c.input_dim = 1;
    c.output_dim = out_dim;
    c.hidden = cfg.hidden;
    c.modes = cfg.modes;
    c.depth = cfg.depth;
    c.activation = cfg.activation;
    c.axis = cfg.spectral_axis;
    return std::make_unique<FourierNet>(c, cfg.seed);
  }
  MlpConfig c;
  c.sizes = {1};
  c.sizes.insert(c.sizes.end(), cfg.mlp_hidden.begin(), cfg.mlp_hidden.end());
  c.sizes.push_back(out_dim);
  c.activation = cfg.mlp_activation;
  return std::make_unique<MlpNet>(c, cfg.seed);
}

/// Forward pass without recording a graph, as a row-major matrix.
inline std::vector<double> predict(const Network& net, std::span<const double> times, double t_end) {
  ad::NoGradGuard guard;
  const auto Y = net.forward(encode_times(times, t_end));
  return {Y.data().begin(), Y.data().end()};
}

using ProgressFn = std::function<void(const HistoryRow&)>;

/// Full-batch training for cfg.epochs epochs. Training and test times are
/// drawn once per run. Divergence stops the loop and is reported in the
/// result with the history gathered so far.
inline TrainResult train(const TrainConfig& cfg, const ModelSpec& model, const ProgressFn& progress = {}) {
  cfg.validate();
  TrainResult r;
  r.net = make_network(cfg, model.dim());
  r.train_times = lhs_sample(cfg.train_samples, model.t_end(), Rng::derive(cfg.seed, 0x7A11));
  r.test_times = lhs_sample(cfg.effective_test_samples(), model.t_end(), Rng::derive(cfg.seed, 0x7E57));
  r.initial_state = model.initial_condition(cfg.ic_seed);
  r.test_truth = generate_truth(model, r.test_times, cfg.ic_seed);
  r.excluded_dims = cfg.nmse_exclusion ? vanishing_dimensions(r.test_truth) : std::vector<std::size_t>{};
  if (r.excluded_dims.size() == model.dim()) r.excluded_dims.clear();

  const ad::Tensor X = encode_times(r.train_times, model.t_end());
  auto params = r.net->parameters();
  AdamState adam;

  auto test_nmse = [&] {
    const auto pred = predict(*r.net, r.test_times, model.t_end());
    return nmse(pred, r.test_truth.states, model.dim(), r.excluded_dims);
  };
  auto consider_best = [&](double score, std::size_t epoch) {
    if (score < r.best_test_nmse) {
      r.best_test_nmse = score;
      r.best_epoch = epoch;
      r.best_params = r.net->snapshot();
    }
  };

  try {
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
      ad::zero_grad(params);
      const ad::Tensor Y = r.net->forward(X);
      const LossTerms loss = total_loss(Y, model, r.train_times, r.initial_state, cfg, epoch);
      ad::backward(loss.total);
      const double lr = lr_at(epoch, cfg.lr_init, cfg.lr_decay);
      if (epoch % cfg.log_every == 0 || epoch + 1 == cfg.epochs) {
        HistoryRow row{epoch, lr, loss.total.item(), loss.initial, loss.residual, loss.boundary, loss.penalty,
                       test_nmse()};
        consider_best(row.test_nmse, epoch);
        r.history.push_back(row);
        if (progress) progress(row);
      }
      adam_step(params, adam, lr);
      r.epochs_run = epoch + 1;
    }
    {
      ad::NoGradGuard guard;
      const ad::Tensor Y = r.net->forward(X);
      r.final_loss = total_loss(Y, model, r.train_times, r.initial_state, cfg, cfg.epochs).total.item();
    }
    r.final_test_nmse = test_nmse();
    consider_best(r.final_test_nmse, cfg.epochs);
  } catch (const DivergenceError& e) {
    r.diverged = true;
    r.error = e.what();
  }
  return r;
}

/// Runs one training per seed, at most `threads` at a time. Results are
/// returned in seed order; runs share no mutable state.
inline std::vector<TrainResult> train_seeds(const TrainConfig& base, const ModelSpec& model,
                                            const std::vector<std::uint64_t>& seeds, std::size_t threads = 1) {
  std::vector<TrainResult> out(seeds.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < seeds.size(); i = next++) {
      try {
        TrainConfig cfg = base;
        cfg.seed = seeds[i];
        out[i] = train(cfg, model);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const std::size_t n = std::clamp<std::size_t>(threads, 1, std::max<std::size_t>(seeds.size(), 1));
  if (n == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t k = 0; k < n; ++k) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

}  // namespace sbfnn
