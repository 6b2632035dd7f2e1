#pragma once
/**
 * @file activations.hpp
 * @brief The six candidate activations and their softmax-weighted mixture.
 */

#include <array>
#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>

#include "sbfnn/autodiff.hpp"
#include "sbfnn/errors.hpp"

namespace sbfnn {

/// Candidate order matters: it is the order of the mixing logits.
enum class Activation { Tanh = 0, ReLU, Softplus, ELU, GELU, Sin };

inline constexpr std::size_t kActivationCount = 6;
inline constexpr std::array<Activation, kActivationCount> kActivations{
    Activation::Tanh, Activation::ReLU, Activation::Softplus, Activation::ELU, Activation::GELU, Activation::Sin};

inline std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::Tanh: return "tanh";
    case Activation::ReLU: return "relu";
    case Activation::Softplus: return "softplus";
    case Activation::ELU: return "elu";
    case Activation::GELU: return "gelu";
    case Activation::Sin: return "sin";
  }
  return "?";
}

inline Activation activation_from_string(std::string_view s) {
  for (auto a : kActivations)
    if (to_string(a) == s) return a;
  throw ContractError("unknown activation kind '" + std::string(s) + "'");
}

namespace act {

/// Standard normal CDF.
inline double normal_cdf(double x) { return 0.5 * std::erfc(-x * std::numbers::sqrt2 / 2.0); }

inline double normal_pdf(double x) { return std::exp(-0.5 * x * x) * (std::numbers::inv_sqrtpi / std::numbers::sqrt2); }

struct ValueSlope {
  double value;
  double slope;  // d/dx
};

/// Value and x-derivative; beta only affects Sin. ELU uses alpha = 1.
inline ValueSlope eval(Activation kind, double x, double beta = 1.0) {
  switch (kind) {
    case Activation::Tanh: {
      const double t = std::tanh(x);
      return {t, 1.0 - t * t};
    }
    case Activation::ReLU:
      return x > 0.0 ? ValueSlope{x, 1.0} : ValueSlope{0.0, 0.0};
    case Activation::Softplus: {
      const double v = x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
      const double s = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
      return {v, s};
    }
    case Activation::ELU:
      return x > 0.0 ? ValueSlope{x, 1.0} : ValueSlope{std::expm1(x), std::exp(x)};
    case Activation::GELU: {
      const double cdf = normal_cdf(x);
      return {x * cdf, cdf + x * normal_pdf(x)};
    }
    case Activation::Sin:
      return {std::sin(beta * x), beta * std::cos(beta * x)};
  }
  throw ContractError("unknown activation kind");
}

inline double value(Activation kind, double x, double beta = 1.0) { return eval(kind, x, beta).value; }

}  // namespace act

/// Elementwise activation. `beta` is the trainable Sin scale (scalar tensor);
/// it may be left undefined for the other kinds.
inline ad::Tensor activation_eval(Activation kind, const ad::Tensor& x, const ad::Tensor& beta = {}) {
  ad::require_real(x, "activation_eval");
  if (kind == Activation::Sin && !beta.defined()) return activation_eval(kind, x, ad::Tensor::scalar(1.0));
  const double b = beta.defined() ? beta.item() : 1.0;
  const auto X = x.data();
  std::vector<double> out(X.size());
  std::vector<double> slope(X.size());
  for (std::size_t i = 0; i < X.size(); ++i) {
    const auto vs = act::eval(kind, X[i], b);
    out[i] = vs.value;
    slope[i] = vs.slope;
  }
  std::vector<ad::Tensor> inputs{x};
  if (kind == Activation::Sin) inputs.push_back(beta);
  return ad::make_result(ad::Op::Custom, x.shape(), std::move(out), inputs,
                         [kind, b, slope = std::move(slope)](ad::Node& self) {
                           if (auto* gx = ad::grad_sink(self, 0))
                             for (std::size_t i = 0; i < gx->size(); ++i) (*gx)[i] += self.grad[i] * slope[i];
                           if (kind == Activation::Sin)
                             if (auto* gb = ad::grad_sink(self, 1)) {
                               const auto& X = self.inputs[0]->value;
                               for (std::size_t i = 0; i < X.size(); ++i)
                                 (*gb)[0] += self.grad[i] * X[i] * std::cos(b * X[i]);
                             }
                         });
}

inline std::array<double, kActivationCount> softmax(std::span<const double> r) {
  if (r.size() != kActivationCount) throw DimensionError("softmax: expected 6 logits, got " + std::to_string(r.size()));
  std::array<double, kActivationCount> w{};
  double mx = r[0];
  for (double v : r) mx = std::max(mx, v);
  double s = 0.0;
  for (std::size_t j = 0; j < kActivationCount; ++j) s += (w[j] = std::exp(r[j] - mx));
  for (auto& v : w) v /= s;
  return w;
}

/// sum_j softmax(r)_j * sigma_j(x) over the six candidates, with gradients
/// to x, the logits r, and the Sin scale beta.
inline ad::Tensor adaptive_mix(const ad::Tensor& x, const ad::Tensor& r, const ad::Tensor& beta) {
  ad::require_real(x, "adaptive_mix");
  if (r.numel() != kActivationCount)
    throw DimensionError("adaptive_mix: expected 6 logits, got " + ad::shape_str(r.shape()));
  if (beta.numel() != 1) throw DimensionError("adaptive_mix: beta must be a scalar");
  const auto w = softmax(r.data());
  const double b = beta.item();
  const auto X = x.data();
  const std::size_t n = X.size();
  std::vector<double> out(n, 0.0);
  std::vector<double> slope(n, 0.0);
  // Candidate values are kept for the logit gradient.
  std::vector<double> candidates(n * kActivationCount);
  for (std::size_t i = 0; i < n; ++i) {
    double v = 0.0, s = 0.0;
    for (std::size_t j = 0; j < kActivationCount; ++j) {
      const auto vs = act::eval(kActivations[j], X[i], b);
      candidates[i * kActivationCount + j] = vs.value;
      v += w[j] * vs.value;
      s += w[j] * vs.slope;
    }
    out[i] = v;
    slope[i] = s;
  }
  constexpr std::size_t kSin = static_cast<std::size_t>(Activation::Sin);
  return ad::make_result(
      ad::Op::Custom, x.shape(), std::move(out), {x, r, beta},
      [w, b, n, slope = std::move(slope), candidates = std::move(candidates)](ad::Node& self) {
        const auto& G = self.grad;
        if (auto* gx = ad::grad_sink(self, 0))
          for (std::size_t i = 0; i < n; ++i) (*gx)[i] += G[i] * slope[i];
        if (auto* gr = ad::grad_sink(self, 1)) {
          std::array<double, kActivationCount> dw{};
          for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < kActivationCount; ++j) dw[j] += G[i] * candidates[i * kActivationCount + j];
          double dot = 0.0;
          for (std::size_t j = 0; j < kActivationCount; ++j) dot += w[j] * dw[j];
          for (std::size_t j = 0; j < kActivationCount; ++j) (*gr)[j] += w[j] * (dw[j] - dot);
        }
        if (auto* gb = ad::grad_sink(self, 2)) {
          const auto& X = self.inputs[0]->value;
          double acc = 0.0;
          for (std::size_t i = 0; i < n; ++i) acc += G[i] * X[i] * std::cos(b * X[i]);
          (*gb)[0] += w[kSin] * acc;
        }
      });
}

}  // namespace sbfnn
