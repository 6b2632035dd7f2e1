#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "sbfnn/activations.hpp"
#include "sbfnn/rng.hpp"

using namespace sbfnn;
using ad::Tensor;

namespace {

// Normal CDF by composite Simpson on [-12, x], independent of erf.
double simpson_cdf(double x) {
  const int n = 20000;
  const double a = -12.0, h = (x - a) / n;
  auto pdf = [](double t) { return std::exp(-0.5 * t * t) / std::sqrt(2.0 * std::numbers::pi); };
  double s = pdf(a) + pdf(x);
  for (int i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * pdf(a + i * h);
  return s * h / 3.0;
}

Tensor logits(std::initializer_list<double> v) { return Tensor::from({6}, std::vector<double>(v), true); }

}  // namespace

TEST(Activation, OriginValues) {
  for (auto k : {Activation::Tanh, Activation::ReLU, Activation::GELU, Activation::ELU, Activation::Sin})
    EXPECT_EQ(act::value(k, 0.0), 0.0) << to_string(k);
  EXPECT_EQ(act::value(Activation::ReLU, -1.0), 0.0);
  EXPECT_NEAR(act::value(Activation::Softplus, 0.0), std::log(2.0), 1e-15);
  EXPECT_NEAR(act::value(Activation::Softplus, 0.0), 0.693147, 1e-6);
}

TEST(Activation, GeluMatchesQuadratureCdf) {
  EXPECT_NEAR(act::value(Activation::GELU, 1.0), 1.0 * simpson_cdf(1.0), 1e-12);
  EXPECT_NEAR(act::value(Activation::GELU, 1.0), 0.841345, 1e-6);
  for (double x : {-3.0, -0.7, 0.4, 2.2}) EXPECT_NEAR(act::normal_cdf(x), simpson_cdf(x), 1e-12) << x;
}

TEST(Activation, ElementwiseForms) {
  const double x = -0.8, beta = 1.7;
  EXPECT_DOUBLE_EQ(act::value(Activation::ELU, x), std::exp(x) - 1.0);
  EXPECT_DOUBLE_EQ(act::value(Activation::Sin, x, beta), std::sin(beta * x));
  EXPECT_NEAR(act::value(Activation::Softplus, 40.0), 40.0, 1e-15);
  EXPECT_NEAR(act::value(Activation::Softplus, -40.0), std::exp(-40.0), 1e-25);
}

TEST(Activation, UnknownNameIsContractError) {
  EXPECT_THROW(activation_from_string("swish"), ContractError);
  EXPECT_EQ(activation_from_string("gelu"), Activation::GELU);
}

TEST(Activation, GradientsMatchFiniteDifferences) {
  Rng rng(4);
  for (auto k : kActivations)
    for (int i = 0; i < 10; ++i) {
      double x0 = rng.uniform(-2.0, 2.0);
      if (std::abs(x0) < 1e-3) x0 = 0.5;  // keep away from the ReLU kink
      const auto p = Tensor::from({3}, {x0, -x0 / 2, x0 + 0.3});
      auto beta = Tensor::scalar(1.3);
      EXPECT_LT(ad::grad_check([&](const Tensor& t) { return ad::sum(activation_eval(k, t, beta)); }, p, 1e-5), 1e-6)
          << to_string(k);
    }
  // Sin scale
  const auto x = Tensor::from({4}, {0.2, -0.5, 1.1, 0.9});
  EXPECT_LT(ad::grad_check([&](const Tensor& b) { return ad::sum(activation_eval(Activation::Sin, x, b)); },
                           Tensor::scalar(0.8), 1e-5),
            1e-6);
}

TEST(AdaptiveMix, UniformLogitsAverage) {
  const auto x = Tensor::from({3}, {-1.2, 0.3, 2.0});
  const auto y = adaptive_mix(x, logits({0, 0, 0, 0, 0, 0}), Tensor::scalar(1.0));
  for (std::size_t i = 0; i < 3; ++i) {
    double avg = 0.0;
    for (auto k : kActivations) avg += act::value(k, x.data()[i]) / 6.0;
    EXPECT_NEAR(y.data()[i], avg, 1e-15);
  }
  const auto z = adaptive_mix(Tensor::from({1}, {0.0}), logits({0, 0, 0, 0, 0, 0}), Tensor::scalar(1.0));
  EXPECT_NEAR(z.item(), std::log(2.0) / 6.0, 1e-15);
  EXPECT_NEAR(z.item(), 0.115525, 1e-6);
}

TEST(AdaptiveMix, SaturatedLogitsReduceToCandidate) {
  const auto x = Tensor::from({5}, {-2.0, -0.3, 0.0, 0.7, 3.0});
  for (std::size_t j = 0; j < kActivationCount; ++j) {
    std::vector<double> r(6, -50.0);
    r[j] = 50.0;
    const auto y = adaptive_mix(x, Tensor::from({6}, r), Tensor::scalar(1.0));
    for (std::size_t i = 0; i < 5; ++i)
      EXPECT_NEAR(y.data()[i], act::value(kActivations[j], x.data()[i]), 1e-9) << to_string(kActivations[j]);
  }
}

TEST(AdaptiveMix, SoftmaxProperties) {
  Rng rng(9);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> r(6);
    for (auto& v : r) v = rng.uniform(-20.0, 20.0);
    const auto w = softmax(r);
    double s = 0.0;
    for (double v : w) {
      EXPECT_GT(v, 0.0);
      s += v;
    }
    EXPECT_NEAR(s, 1.0, 1e-12);
    EXPECT_EQ(std::max_element(w.begin(), w.end()) - w.begin(), std::max_element(r.begin(), r.end()) - r.begin());
  }
}

TEST(AdaptiveMix, GradientsToInputsLogitsAndScale) {
  const auto x = Tensor::from({4}, {-1.1, 0.25, 0.8, 1.9});
  const auto r = Tensor::from({6}, {0.3, -0.2, 0.1, 0.5, -0.4, 0.2});
  const auto b = Tensor::scalar(1.2);
  EXPECT_LT(ad::grad_check([&](const Tensor& t) { return ad::sum(ad::square(adaptive_mix(t, r, b))); }, x, 1e-5), 1e-6);
  EXPECT_LT(ad::grad_check([&](const Tensor& t) { return ad::sum(ad::square(adaptive_mix(x, t, b))); }, r, 1e-5), 1e-6);
  EXPECT_LT(ad::grad_check([&](const Tensor& t) { return ad::sum(ad::square(adaptive_mix(x, r, t))); }, b, 1e-5), 1e-6);
}
