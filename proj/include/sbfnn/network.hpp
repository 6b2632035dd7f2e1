#pragma once
/**
 * @file network.hpp
 * @brief Fourier-layer network (lift, spectral layers, projection) and the
 * plain MLP baseline, with seeded initialization and JSON checkpoints.
 *
 * Both map a [T_N x d_in] sample matrix to [T_N x d_out]. The Fourier
 * layers couple samples through the truncated spectrum of the sample axis;
 * the MLP treats samples independently.
 */

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sbfnn/activations.hpp"
#include "sbfnn/autodiff.hpp"
#include "sbfnn/errors.hpp"
#include "sbfnn/rng.hpp"
#include "sbfnn/spectral.hpp"

namespace sbfnn {

enum class Architecture { SbFnn, PinnMlp };

inline std::string_view to_string(Architecture a) { return a == Architecture::SbFnn ? "sbfnn" : "pinn-mlp"; }

inline Architecture architecture_from_string(std::string_view s) {
  if (s == "sbfnn") return Architecture::SbFnn;
  if (s == "pinn-mlp" || s == "pinn") return Architecture::PinnMlp;
  throw ContractError("unknown architecture '" + std::string(s) + "'");
}

/// Either the softmax mixture of all six candidates or one fixed kind.
struct ActivationMode {
  bool adaptive = true;
  Activation fixed = Activation::GELU;

  static ActivationMode parse(std::string_view s) {
    if (s == "adaptive") return {};
    if (s.starts_with("fixed:")) s.remove_prefix(6);
    return {false, activation_from_string(s)};
  }
  std::string str() const { return adaptive ? "adaptive" : std::string(to_string(fixed)); }
  bool operator==(const ActivationMode&) const = default;
};

struct NamedTensor {
  std::string name;
  ad::Tensor tensor;
};

/// x * weight + bias with weight stored [in x out].
struct Affine {
  ad::Tensor weight;
  ad::Tensor bias;

  ad::Tensor operator()(const ad::Tensor& x) const { return ad::add_row_bias(ad::matmul(x, weight), bias); }

  /// Weights and bias ~ U(-1/sqrt(in), 1/sqrt(in)).
  static Affine init(std::size_t in, std::size_t out, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    std::vector<double> w(in * out), b(out);
    for (auto& v : w) v = rng.uniform(-bound, bound);
    for (auto& v : b) v = rng.uniform(-bound, bound);
    return {ad::Tensor::from({in, out}, std::move(w), true), ad::Tensor::from({out}, std::move(b), true)};
  }
};

class Network {
 public:
  virtual ~Network() = default;
  virtual Architecture architecture() const = 0;
  virtual std::size_t input_dim() const = 0;
  virtual std::size_t output_dim() const = 0;
  virtual ad::Tensor forward(const ad::Tensor& X) const = 0;
  virtual std::vector<NamedTensor> named_parameters() const = 0;
  virtual nlohmann::json config_json() const = 0;

  std::vector<ad::Tensor> parameters() const {
    std::vector<ad::Tensor> out;
    for (auto& p : named_parameters()) out.push_back(p.tensor);
    return out;
  }

  /// Trainable reals; complex spectral weights count real and imaginary parts.
  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& p : named_parameters()) n += p.tensor.numel();
    return n;
  }

  std::vector<std::vector<double>> snapshot() const {
    std::vector<std::vector<double>> out;
    for (const auto& p : named_parameters()) out.emplace_back(p.tensor.data().begin(), p.tensor.data().end());
    return out;
  }

  void restore(const std::vector<std::vector<double>>& values) {
    auto params = named_parameters();
    if (values.size() != params.size()) throw DimensionError("restore: parameter group count mismatch");
    for (std::size_t i = 0; i < params.size(); ++i) {
      auto dst = params[i].tensor.mutable_data();
      if (dst.size() != values[i].size())
        throw DimensionError("restore: size mismatch for parameter '" + params[i].name + "'");
      std::copy(values[i].begin(), values[i].end(), dst.begin());
    }
  }

 protected:
  void check_input(const ad::Tensor& X) const {
    if (X.rank() != 2 || X.cols() != input_dim())
      throw DimensionError("network input " + ad::shape_str(X.shape()) + " does not have " +
                           std::to_string(input_dim()) + " columns");
  }
};

// ---------------------------------------------------------------------------

/// Where the truncated transform samples its modes: by sample index (the
/// plain FFT grid) or at each sample's coordinate, read from input column 0.
enum class SpectralAxis { Index, Time };

inline std::string_view to_string(SpectralAxis a) { return a == SpectralAxis::Index ? "index" : "time"; }

inline SpectralAxis spectral_axis_from_string(std::string_view s) {
  if (s == "index") return SpectralAxis::Index;
  if (s == "time") return SpectralAxis::Time;
  throw ContractError("unknown spectral axis '" + std::string(s) + "' (expected index or time)");
}

struct FourierNetConfig {
  std::size_t input_dim = 1;
  std::size_t output_dim = 1;
  std::size_t hidden = 16;
  std::size_t modes = 12;
  std::size_t depth = 4;
  ActivationMode activation{};
  SpectralAxis axis = SpectralAxis::Index;
};

struct FourierLayerParams {
  ad::Tensor w_re;        // [M x H x H], mode-major
  ad::Tensor w_im;        // [M x H x H]
  Affine pointwise;       // 1x1 channel map
  ad::Tensor mix_logits;  // [6], adaptive mode only
  ad::Tensor sin_scale;   // [1], adaptive mode or fixed Sin
};

/// The Fourier layer: act( irfft(W . truncate(rfft(Z))) + Z C + c ), with
/// the transform pair sampled through `basis`.
inline ad::Tensor fourier_layer_forward(const ad::Tensor& Z, const FourierLayerParams& p,
                                        const std::shared_ptr<const spectral::ModeBasis>& basis,
                                        const ActivationMode& mode) {
  if (Z.rank() != 2 || Z.rows() < 2) throw ContractError("fourier layer: need at least 2 samples");
  const std::size_t h = Z.cols();
  if (p.pointwise.weight.shape()[0] != h || p.w_re.shape()[1] != h)
    throw DimensionError("fourier layer: input has " + std::to_string(h) + " channels, layer expects " +
                         std::to_string(p.pointwise.weight.shape()[0]));
  ad::Tensor spectral =
      spectral::irfft_modes(spectral::mix_channels(spectral::rfft_modes(Z, basis), p.w_re, p.w_im), basis);
  ad::Tensor pre = ad::add(spectral, p.pointwise(Z));
  if (mode.adaptive) return adaptive_mix(pre, p.mix_logits, p.sin_scale);
  return activation_eval(mode.fixed, pre, p.sin_scale);
}

/// Same layer on the index (FFT) grid.
inline ad::Tensor fourier_layer_forward(const ad::Tensor& Z, const FourierLayerParams& p, std::size_t modes,
                                        const ActivationMode& mode) {
  if (Z.rank() != 2 || Z.rows() < 2) throw ContractError("fourier layer: need at least 2 samples");
  if (modes < 1) throw ContractError("truncate_modes: mode count must be at least 1");
  return fourier_layer_forward(Z, p, spectral::ModeBasis::uniform(Z.rows(), modes), mode);
}

/// Mode basis for the samples of X. In time mode u_j = x_j0 (n-1)/n, so an
/// evenly spaced grid from 0 to 1 reproduces the FFT grid exactly.
inline std::shared_ptr<const spectral::ModeBasis> mode_basis_for(const ad::Tensor& X, std::size_t modes,
                                                                 SpectralAxis axis) {
  const std::size_t n = X.rows();
  if (n < 2) throw ContractError("fourier layer: need at least 2 samples");
  if (axis == SpectralAxis::Index) return spectral::ModeBasis::uniform(n, modes);
  std::vector<double> u(n);
  const double stretch = static_cast<double>(n - 1) / static_cast<double>(n);
  for (std::size_t j = 0; j < n; ++j) u[j] = X.at(j, 0) * stretch;
  return spectral::ModeBasis::at_positions(u, modes);
}

class FourierNet final : public Network {
 public:
  FourierNet(FourierNetConfig cfg, std::uint64_t seed) : cfg_(cfg) {
    if (cfg.hidden == 0 || cfg.modes == 0 || cfg.input_dim == 0 || cfg.output_dim == 0)
      throw ContractError("FourierNet: dimensions and mode count must be positive");
    Rng rng(seed);
    const std::size_t H = cfg.hidden, M = cfg.modes;
    lift_ = Affine::init(cfg.input_dim, H, rng);
    const double wscale = 1.0 / static_cast<double>(H * H);
    for (std::size_t l = 0; l < cfg.depth; ++l) {
      FourierLayerParams p;
      std::vector<double> re(M * H * H), im(M * H * H);
      for (auto& v : re) v = wscale * rng.uniform();
      for (auto& v : im) v = wscale * rng.uniform();
      p.w_re = ad::Tensor::from({M, H, H}, std::move(re), true);
      p.w_im = ad::Tensor::from({M, H, H}, std::move(im), true);
      p.pointwise = Affine::init(H, H, rng);
      if (cfg.activation.adaptive) p.mix_logits = ad::Tensor::zeros({kActivationCount}, true);
      if (cfg.activation.adaptive || cfg.activation.fixed == Activation::Sin)
        p.sin_scale = ad::Tensor::scalar(1.0, true);
      layers_.push_back(std::move(p));
    }
    projection_ = Affine::init(H, cfg.output_dim, rng);
  }

  Architecture architecture() const override { return Architecture::SbFnn; }
  std::size_t input_dim() const override { return cfg_.input_dim; }
  std::size_t output_dim() const override { return cfg_.output_dim; }
  const FourierNetConfig& config() const { return cfg_; }
  const std::vector<FourierLayerParams>& layers() const { return layers_; }
  std::vector<FourierLayerParams>& layers() { return layers_; }
  const Affine& lift() const { return lift_; }
  const Affine& projection() const { return projection_; }

  /// V . L_l . ... . L_1 . U, no activation after the projection.
  ad::Tensor forward(const ad::Tensor& X) const override {
    check_input(X);
    ad::Tensor Z = lift_(X);
    if (layers_.empty()) return projection_(Z);
    const auto basis = mode_basis_for(X, cfg_.modes, cfg_.axis);
    for (const auto& layer : layers_) Z = fourier_layer_forward(Z, layer, basis, cfg_.activation);
    return projection_(Z);
  }

  std::vector<NamedTensor> named_parameters() const override {
    std::vector<NamedTensor> out{{"lift.weight", lift_.weight}, {"lift.bias", lift_.bias}};
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      const auto pre = "layer" + std::to_string(l) + ".";
      const auto& p = layers_[l];
      out.push_back({pre + "w_re", p.w_re});
      out.push_back({pre + "w_im", p.w_im});
      out.push_back({pre + "pointwise.weight", p.pointwise.weight});
      out.push_back({pre + "pointwise.bias", p.pointwise.bias});
      if (p.mix_logits.defined()) out.push_back({pre + "mix_logits", p.mix_logits});
      if (p.sin_scale.defined()) out.push_back({pre + "sin_scale", p.sin_scale});
    }
    out.push_back({"projection.weight", projection_.weight});
    out.push_back({"projection.bias", projection_.bias});
    return out;
  }

  nlohmann::json config_json() const override {
    return {{"arch", "sbfnn"},           {"input_dim", cfg_.input_dim}, {"output_dim", cfg_.output_dim},
            {"hidden", cfg_.hidden},     {"modes", cfg_.modes},         {"depth", cfg_.depth},
            {"activation", cfg_.activation.str()}, {"spectral_axis", std::string(to_string(cfg_.axis))}};
  }

 private:
  FourierNetConfig cfg_;
  Affine lift_;
  std::vector<FourierLayerParams> layers_;
  Affine projection_;
};

// ---------------------------------------------------------------------------

struct MlpConfig {
  std::vector<std::size_t> sizes{1, 32, 32, 32, 1};
  Activation activation = Activation::Tanh;
};

class MlpNet final : public Network {
 public:
  MlpNet(MlpConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)) {
    if (cfg_.sizes.size() < 2) throw ContractError("MlpNet: need at least input and output sizes");
    for (auto s : cfg_.sizes)
      if (s == 0) throw ContractError("MlpNet: layer sizes must be positive");
    Rng rng(seed);
    for (std::size_t i = 0; i + 1 < cfg_.sizes.size(); ++i)
      layers_.push_back(Affine::init(cfg_.sizes[i], cfg_.sizes[i + 1], rng));
  }

  Architecture architecture() const override { return Architecture::PinnMlp; }
  std::size_t input_dim() const override { return cfg_.sizes.front(); }
  std::size_t output_dim() const override { return cfg_.sizes.back(); }
  const MlpConfig& config() const { return cfg_; }
  std::vector<Affine>& layers() { return layers_; }

  ad::Tensor forward(const ad::Tensor& X) const override {
    check_input(X);
    ad::Tensor h = X;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      h = layers_[i](h);
      if (i + 1 < layers_.size()) h = activation_eval(cfg_.activation, h);
    }
    return h;
  }

  std::vector<NamedTensor> named_parameters() const override {
    std::vector<NamedTensor> out;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      out.push_back({"dense" + std::to_string(i) + ".weight", layers_[i].weight});
      out.push_back({"dense" + std::to_string(i) + ".bias", layers_[i].bias});
    }
    return out;
  }

  nlohmann::json config_json() const override {
    return {{"arch", "pinn-mlp"}, {"sizes", cfg_.sizes}, {"activation", std::string(to_string(cfg_.activation))}};
  }

 private:
  MlpConfig cfg_;
  std::vector<Affine> layers_;
};

// ---------------------------------------------------------------------------
// Checkpoints

/// FNV-1a over the canonical JSON text of a network configuration.
inline std::string config_hash(const nlohmann::json& cfg) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : cfg.dump()) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline constexpr int kCheckpointVersion = 1;

inline nlohmann::json checkpoint_json(const Network& net, std::uint64_t seed) {
  nlohmann::json tensors = nlohmann::json::array();
  for (const auto& p : net.named_parameters())
    tensors.push_back({{"name", p.name},
                       {"shape", p.tensor.shape()},
                       {"data", std::vector<double>(p.tensor.data().begin(), p.tensor.data().end())}});
  const auto cfg = net.config_json();
  return {{"format", "sbfnn-checkpoint"}, {"version", kCheckpointVersion}, {"seed", seed},
          {"config", cfg},                {"config_hash", config_hash(cfg)}, {"parameter_count", net.parameter_count()},
          {"tensors", tensors}};
}

inline std::unique_ptr<Network> network_from_config(const nlohmann::json& cfg, std::uint64_t seed) {
  const auto arch = architecture_from_string(cfg.at("arch").get<std::string>());
  if (arch == Architecture::SbFnn) {
    FourierNetConfig c;
    c.input_dim = cfg.at("input_dim");
    c.output_dim = cfg.at("output_dim");
    c.hidden = cfg.at("hidden");
    c.modes = cfg.at("modes");
    c.depth = cfg.at("depth");
    c.activation = ActivationMode::parse(cfg.at("activation").get<std::string>());
    c.axis = spectral_axis_from_string(cfg.value("spectral_axis", std::string("index")));
    return std::make_unique<FourierNet>(c, seed);
  }
  MlpConfig c;
  c.sizes = cfg.at("sizes").get<std::vector<std::size_t>>();
  c.activation = activation_from_string(cfg.at("activation").get<std::string>());
  return std::make_unique<MlpNet>(c, seed);
}

inline std::unique_ptr<Network> network_from_checkpoint(const nlohmann::json& doc) {
  if (doc.value("format", "") != "sbfnn-checkpoint") throw IoError("not an sbfnn checkpoint");
  if (doc.at("version").get<int>() != kCheckpointVersion)
    throw IoError("unsupported checkpoint version " + doc.at("version").dump());
  const auto& cfg = doc.at("config");
  if (doc.at("config_hash").get<std::string>() != config_hash(cfg)) throw IoError("checkpoint config hash mismatch");
  auto net = network_from_config(cfg, doc.at("seed").get<std::uint64_t>());
  auto params = net->named_parameters();
  const auto& tensors = doc.at("tensors");
  if (tensors.size() != params.size()) throw IoError("checkpoint tensor count does not match its config");
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& t = tensors[i];
    if (t.at("name").get<std::string>() != params[i].name ||
        t.at("shape").get<ad::Shape>() != params[i].tensor.shape())
      throw IoError("checkpoint tensor '" + t.at("name").get<std::string>() + "' does not match the network");
    const auto data = t.at("data").get<std::vector<double>>();
    auto dst = params[i].tensor.mutable_data();
    if (data.size() != dst.size()) throw IoError("checkpoint tensor '" + params[i].name + "' has wrong length");
    std::copy(data.begin(), data.end(), dst.begin());
  }
  return net;
}

inline void save_checkpoint(const std::string& path, const Network& net, std::uint64_t seed) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write checkpoint " + path);
  out << checkpoint_json(net, seed).dump() << '\n';
  if (!out) throw IoError("failed writing checkpoint " + path);
}

inline std::unique_ptr<Network> load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read checkpoint " + path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed checkpoint " + path + ": " + e.what());
  }
  return network_from_checkpoint(doc);
}

}  // namespace sbfnn
