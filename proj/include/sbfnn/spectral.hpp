#pragma once
/**
 * @file spectral.hpp
 * @brief Real-input DFT along the sample axis, mode truncation, and their
 * differentiable forms.
 *
 * The transform core is an iterative radix-2 FFT; other lengths go through
 * Bluestein's chirp-z identity on a power-of-two convolution. Conventions:
 * forward unnormalized with e^{-2 pi i jk/n}, inverse normalized by 1/n.
 *
 * For the network path, `rfft_modes` / `irfft_modes` compute only the first
 * M coefficients with cached twiddles; they are the same linear maps as
 * truncate_modes(rfft(.)) and irfft(zero-padded .) at O(n M) cost.
 */

#include <cmath>
#include <complex>
#include <cstddef>
#include <map>
#include <memory>
#include <numbers>
#include <span>
#include <vector>

#include "sbfnn/autodiff.hpp"
#include "sbfnn/errors.hpp"

namespace sbfnn::spectral {

using cplx = std::complex<double>;

inline bool is_pow2(std::size_t n) { return n && !(n & (n - 1)); }

inline std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

/// In-place radix-2 transform; sign = -1 forward, +1 inverse (unnormalized).
inline void fft_radix2(std::span<cplx> a, int sign) {
  const std::size_t n = a.size();
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = sign * 2.0 * std::numbers::pi / static_cast<double>(len);
    const std::size_t half = len / 2;
    // Per-stage twiddles computed directly; repeated multiplication drifts on long transforms.
    std::vector<cplx> w(half);
    for (std::size_t k = 0; k < half; ++k) w[k] = std::polar(1.0, ang * static_cast<double>(k));
    for (std::size_t i = 0; i < n; i += len)
      for (std::size_t k = 0; k < half; ++k) {
        const cplx u = a[i + k];
        const cplx v = a[i + k + half] * w[k];
        a[i + k] = u + v;
        a[i + k + half] = u - v;
      }
  }
}

/// Bluestein chirp-z plan for one length and direction.
struct BluesteinPlan {
  std::size_t n = 0, m = 0;
  std::vector<cplx> chirp;       // e^{sign * i pi k^2 / n}
  std::vector<cplx> kernel_fft;  // FFT of the conjugate chirp, wrapped to length m

  BluesteinPlan(std::size_t len, int sign) : n(len), m(next_pow2(2 * len - 1)), chirp(len) {
    for (std::size_t k = 0; k < n; ++k) {
      // k^2 mod 2n keeps the angle argument small for long transforms.
      const std::size_t k2 = (k * k) % (2 * n);
      chirp[k] = std::polar(1.0, sign * std::numbers::pi * static_cast<double>(k2) / static_cast<double>(n));
    }
    kernel_fft.assign(m, cplx{});
    kernel_fft[0] = std::conj(chirp[0]);
    for (std::size_t k = 1; k < n; ++k) kernel_fft[k] = kernel_fft[m - k] = std::conj(chirp[k]);
    fft_radix2(kernel_fft, -1);
  }

  void run(std::span<cplx> a) const {
    std::vector<cplx> buf(m, cplx{});
    for (std::size_t k = 0; k < n; ++k) buf[k] = a[k] * chirp[k];
    fft_radix2(buf, -1);
    for (std::size_t k = 0; k < m; ++k) buf[k] *= kernel_fft[k];
    fft_radix2(buf, +1);
    const double inv_m = 1.0 / static_cast<double>(m);
    for (std::size_t k = 0; k < n; ++k) a[k] = buf[k] * inv_m * chirp[k];
  }
};

namespace detail {
inline const BluesteinPlan& bluestein_plan(std::size_t n, int sign) {
  thread_local std::map<std::pair<std::size_t, int>, std::unique_ptr<BluesteinPlan>> cache;
  auto& slot = cache[{n, sign}];
  if (!slot) slot = std::make_unique<BluesteinPlan>(n, sign);
  return *slot;
}
}  // namespace detail

/// Unnormalized complex DFT of any length; sign = -1 forward, +1 inverse.
inline void fft(std::span<cplx> a, int sign) {
  if (a.size() <= 1) return;
  if (is_pow2(a.size()))
    fft_radix2(a, sign);
  else
    detail::bluestein_plan(a.size(), sign).run(a);
}

/// Non-negative frequency half of the DFT of a real signal.
struct HalfSpectrum {
  std::vector<cplx> modes;  // floor(n/2)+1 entries
  std::size_t source_length = 0;
};

inline std::size_t half_length(std::size_t n) { return n / 2 + 1; }

inline HalfSpectrum rfft(std::span<const double> v) {
  const std::size_t n = v.size();
  if (n < 2) throw ContractError("rfft: length must be at least 2, got " + std::to_string(n));
  std::vector<cplx> a(v.begin(), v.end());
  fft(a, -1);
  a.resize(half_length(n));
  return {std::move(a), n};
}

inline std::vector<double> irfft(const HalfSpectrum& s, std::size_t n) {
  if (n < 2 || s.modes.size() != half_length(n) || (s.source_length != 0 && s.source_length != n))
    throw ContractError("irfft: spectrum of " + std::to_string(s.modes.size()) + " modes is inconsistent with length " +
                        std::to_string(n));
  std::vector<cplx> a(n);
  a[0] = cplx(s.modes[0].real(), 0.0);
  for (std::size_t k = 1; k < s.modes.size(); ++k) {
    if (2 * k == n) {
      a[k] = cplx(s.modes[k].real(), 0.0);
    } else {
      a[k] = s.modes[k];
      a[n - k] = std::conj(s.modes[k]);
    }
  }
  fft(a, +1);
  std::vector<double> out(n);
  for (std::size_t j = 0; j < n; ++j) out[j] = a[j].real() / static_cast<double>(n);
  return out;
}

/// Keeps the lowest min(M, available) frequencies, zeroes the rest.
inline HalfSpectrum truncate_modes(HalfSpectrum s, std::size_t M) {
  if (M < 1) throw ContractError("truncate_modes: mode count must be at least 1");
  for (std::size_t k = M; k < s.modes.size(); ++k) s.modes[k] = cplx{};
  return s;
}

/// Weight of mode k in the Hermitian reconstruction of a length-n signal.
inline double hermitian_weight(std::size_t k, std::size_t n) { return (k == 0 || 2 * k == n) ? 1.0 : 2.0; }

// ---------------------------------------------------------------------------
// Differentiable transforms over the columns of a [n x H] tensor.
// Complex outputs are [modes x H] complex tensors.

/// Column-wise rfft: real [n x H] -> complex [n/2+1 x H].
inline ad::Tensor rfft_cols(const ad::Tensor& x) {
  ad::require_real(x, "rfft_cols");
  const std::size_t n = x.rows(), h = x.cols();
  if (n < 2) throw ContractError("rfft: length must be at least 2, got " + std::to_string(n));
  const std::size_t m = half_length(n);
  std::vector<double> out(2 * m * h);
  std::vector<cplx> buf(n);
  for (std::size_t c = 0; c < h; ++c) {
    for (std::size_t j = 0; j < n; ++j) buf[j] = x.data()[j * h + c];
    fft(buf, -1);
    for (std::size_t k = 0; k < m; ++k) {
      out[2 * (k * h + c)] = buf[k].real();
      out[2 * (k * h + c) + 1] = buf[k].imag();
    }
  }
  return ad::make_result(ad::Op::Custom, {m, h}, std::move(out), {x}, [n, h, m](ad::Node& self) {
    auto* gx = ad::grad_sink(self, 0);
    if (!gx) return;
    // Adjoint: dL/dx_j = Re sum_k (gRe_k + i gIm_k) e^{+2 pi i jk/n}.
    std::vector<cplx> buf(n);
    for (std::size_t c = 0; c < h; ++c) {
      std::fill(buf.begin(), buf.end(), cplx{});
      for (std::size_t k = 0; k < m; ++k) buf[k] = cplx(self.grad[2 * (k * h + c)], self.grad[2 * (k * h + c) + 1]);
      fft(buf, +1);
      for (std::size_t j = 0; j < n; ++j) (*gx)[j * h + c] += buf[j].real();
    }
  }, true);
}

/// Column-wise normalized inverse: complex [n/2+1 x H] -> real [n x H].
inline ad::Tensor irfft_cols(const ad::Tensor& s, std::size_t n) {
  if (!s.is_complex()) throw ContractError("irfft: expects a complex spectrum");
  const std::size_t m = s.rows(), h = s.cols();
  if (n < 2 || m != half_length(n))
    throw ContractError("irfft: spectrum of " + std::to_string(m) + " modes is inconsistent with length " +
                        std::to_string(n));
  std::vector<double> out(n * h);
  for (std::size_t c = 0; c < h; ++c) {
    HalfSpectrum hs{std::vector<cplx>(m), n};
    for (std::size_t k = 0; k < m; ++k) hs.modes[k] = cplx(s.data()[2 * (k * h + c)], s.data()[2 * (k * h + c) + 1]);
    const auto col = irfft(hs, n);
    for (std::size_t j = 0; j < n; ++j) out[j * h + c] = col[j];
  }
  return ad::make_result(ad::Op::Custom, {n, h}, std::move(out), {s}, [n, h, m](ad::Node& self) {
    auto* gs = ad::grad_sink(self, 0);
    if (!gs) return;
    std::vector<cplx> buf(n);
    for (std::size_t c = 0; c < h; ++c) {
      for (std::size_t j = 0; j < n; ++j) buf[j] = self.grad[j * h + c];
      fft(buf, -1);
      for (std::size_t k = 0; k < m; ++k) {
        const double w = hermitian_weight(k, n) / static_cast<double>(n);
        (*gs)[2 * (k * h + c)] += w * buf[k].real();
        // Imaginary parts of DC and Nyquist do not reach the output.
        (*gs)[2 * (k * h + c) + 1] += (k == 0 || 2 * k == n) ? 0.0 : w * buf[k].imag();
      }
    }
  });
}

/// Zeroes rows k >= M of a complex [modes x H] spectrum.
inline ad::Tensor truncate_modes(const ad::Tensor& s, std::size_t M) {
  if (M < 1) throw ContractError("truncate_modes: mode count must be at least 1");
  if (!s.is_complex()) throw ContractError("truncate_modes: expects a complex spectrum");
  const std::size_t h = s.cols();
  const std::size_t keep = std::min(M, s.rows()) * h * 2;
  std::vector<double> out(s.data().begin(), s.data().end());
  std::fill(out.begin() + static_cast<std::ptrdiff_t>(keep), out.end(), 0.0);
  return ad::make_result(ad::Op::Custom, s.shape(), std::move(out), {s}, [keep](ad::Node& self) {
    if (auto* g = ad::grad_sink(self, 0))
      for (std::size_t i = 0; i < keep; ++i) (*g)[i] += self.grad[i];
  }, true);
}

/// cos/sin of 2 pi r / n for r in [0, n); indexed by (j k) mod n.
class TwiddleTable {
 public:
  explicit TwiddleTable(std::size_t n) : n_(n), cos_(n), sin_(n) {
    for (std::size_t r = 0; r < n; ++r) {
      const double a = 2.0 * std::numbers::pi * static_cast<double>(r) / static_cast<double>(n);
      cos_[r] = std::cos(a);
      sin_[r] = std::sin(a);
    }
  }
  std::size_t size() const { return n_; }
  double cos(std::size_t r) const { return cos_[r]; }
  double sin(std::size_t r) const { return sin_[r]; }

  static const TwiddleTable& get(std::size_t n) {
    thread_local std::map<std::size_t, std::unique_ptr<TwiddleTable>> cache;
    auto& slot = cache[n];
    if (!slot) slot = std::make_unique<TwiddleTable>(n);
    return *slot;
  }

 private:
  std::size_t n_;
  std::vector<double> cos_, sin_;
};

/// Number of modes actually retained for a length-n signal.
inline std::size_t retained_modes(std::size_t n, std::size_t M) { return std::min(M, half_length(n)); }

/// cos/sin of the retained modes at every sample, row-major [n x m]. The
/// uniform basis uses angle 2 pi j k / n (the FFT grid); the positional one
/// uses 2 pi k u_j for sample coordinates u_j in units of one period.
struct ModeBasis {
  std::size_t n = 0, m = 0;
  std::vector<double> cos, sin;

  static std::shared_ptr<const ModeBasis> uniform(std::size_t n, std::size_t M) {
    thread_local std::map<std::pair<std::size_t, std::size_t>, std::shared_ptr<const ModeBasis>> cache;
    auto& slot = cache[{n, M}];
    if (!slot) {
      auto b = std::make_shared<ModeBasis>();
      b->n = n;
      b->m = retained_modes(n, M);
      b->cos.resize(n * b->m);
      b->sin.resize(n * b->m);
      const auto& tw = TwiddleTable::get(n);
      for (std::size_t j = 0; j < n; ++j)
        for (std::size_t k = 0; k < b->m; ++k) {
          const std::size_t r = (j * k) % n;
          b->cos[j * b->m + k] = tw.cos(r);
          b->sin[j * b->m + k] = tw.sin(r);
        }
      slot = std::move(b);
    }
    return slot;
  }

  static std::shared_ptr<const ModeBasis> at_positions(std::span<const double> u, std::size_t M) {
    const std::size_t n = u.size();
    if (n < 2) throw ContractError("rfft: length must be at least 2, got " + std::to_string(n));
    auto b = std::make_shared<ModeBasis>();
    b->n = n;
    b->m = retained_modes(n, M);
    b->cos.resize(n * b->m);
    b->sin.resize(n * b->m);
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t k = 0; k < b->m; ++k) {
        const double a = 2.0 * std::numbers::pi * static_cast<double>(k) * u[j];
        b->cos[j * b->m + k] = std::cos(a);
        b->sin[j * b->m + k] = std::sin(a);
      }
    return b;
  }
};

/// Retained rows of the unnormalized forward transform, X_k = sum_j x_j e^{-i a_jk}.
inline ad::Tensor rfft_modes(const ad::Tensor& x, std::shared_ptr<const ModeBasis> basis) {
  ad::require_real(x, "rfft_modes");
  const std::size_t n = x.rows(), h = x.cols();
  if (!basis || basis->n != n)
    throw DimensionError("rfft_modes: basis does not match " + std::to_string(n) + " samples");
  const std::size_t m = basis->m;
  std::vector<double> out(2 * m * h, 0.0);
  const auto X = x.data();
  for (std::size_t j = 0; j < n; ++j) {
    const double* xr = &X[j * h];
    for (std::size_t k = 0; k < m; ++k) {
      const double c = basis->cos[j * m + k], s = basis->sin[j * m + k];
      double* o = &out[2 * k * h];
      for (std::size_t ch = 0; ch < h; ++ch) {
        o[2 * ch] += xr[ch] * c;
        o[2 * ch + 1] -= xr[ch] * s;
      }
    }
  }
  return ad::make_result(ad::Op::Custom, {m, h}, std::move(out), {x}, [basis, n, h, m](ad::Node& self) {
    auto* gx = ad::grad_sink(self, 0);
    if (!gx) return;
    const auto& G = self.grad;
    for (std::size_t j = 0; j < n; ++j) {
      double* gr = &(*gx)[j * h];
      for (std::size_t k = 0; k < m; ++k) {
        const double c = basis->cos[j * m + k], s = basis->sin[j * m + k];
        const double* g = &G[2 * k * h];
        for (std::size_t ch = 0; ch < h; ++ch) gr[ch] += g[2 * ch] * c - g[2 * ch + 1] * s;
      }
    }
  }, true);
}

/// truncate_modes(rfft_cols(x), M) restricted to its first min(M, n/2+1) rows.
inline ad::Tensor rfft_modes(const ad::Tensor& x, std::size_t M) {
  if (M < 1) throw ContractError("truncate_modes: mode count must be at least 1");
  if (x.rows() < 2) throw ContractError("rfft: length must be at least 2, got " + std::to_string(x.rows()));
  return rfft_modes(x, ModeBasis::uniform(x.rows(), M));
}

/// Inverse of a truncated half spectrum sampled through `basis`:
/// y_j = (1/n) sum_k c_k Re(S_k e^{i a_jk}), c_k the Hermitian weight.
inline ad::Tensor irfft_modes(const ad::Tensor& s, std::shared_ptr<const ModeBasis> basis) {
  if (!s.is_complex()) throw ContractError("irfft: expects a complex spectrum");
  const std::size_t m = s.rows(), h = s.cols();
  if (!basis || m > basis->m)
    throw ContractError("irfft: spectrum of " + std::to_string(m) + " modes does not fit the basis");
  const std::size_t n = basis->n, bm = basis->m;
  const double inv_n = 1.0 / static_cast<double>(n);
  std::vector<double> out(n * h, 0.0);
  const auto S = s.data();
  for (std::size_t j = 0; j < n; ++j) {
    double* o = &out[j * h];
    for (std::size_t k = 0; k < m; ++k) {
      const double w = hermitian_weight(k, n) * inv_n;
      const double c = w * basis->cos[j * bm + k], sn = w * basis->sin[j * bm + k];
      const double* sk = &S[2 * k * h];
      for (std::size_t ch = 0; ch < h; ++ch) o[ch] += sk[2 * ch] * c - sk[2 * ch + 1] * sn;
    }
  }
  return ad::make_result(ad::Op::Custom, {n, h}, std::move(out), {s}, [basis, n, h, m, bm](ad::Node& self) {
    auto* gs = ad::grad_sink(self, 0);
    if (!gs) return;
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t j = 0; j < n; ++j) {
      const double* g = &self.grad[j * h];
      for (std::size_t k = 0; k < m; ++k) {
        const double w = hermitian_weight(k, n) * inv_n;
        const double c = w * basis->cos[j * bm + k], sn = w * basis->sin[j * bm + k];
        double* gk = &(*gs)[2 * k * h];
        for (std::size_t ch = 0; ch < h; ++ch) {
          gk[2 * ch] += g[ch] * c;
          gk[2 * ch + 1] -= g[ch] * sn;
        }
      }
    }
  });
}

/// irfft_cols of a spectrum whose rows beyond s.rows() are zero.
inline ad::Tensor irfft_modes(const ad::Tensor& s, std::size_t n) {
  if (!s.is_complex()) throw ContractError("irfft: expects a complex spectrum");
  if (n < 2 || s.rows() > half_length(n))
    throw ContractError("irfft: spectrum of " + std::to_string(s.rows()) + " modes is inconsistent with length " +
                        std::to_string(n));
  return irfft_modes(s, ModeBasis::uniform(n, s.rows()));
}

/// Per-mode complex channel mixing: out[k, o] = sum_i s[k, i] * W[k, i, o].
/// Weights are real and imaginary parts stored as [M x H x H] tensors; only
/// the first s.rows() modes are used.
inline ad::Tensor mix_channels(const ad::Tensor& s, const ad::Tensor& w_re, const ad::Tensor& w_im) {
  if (!s.is_complex()) throw ContractError("mix_channels: expects a complex spectrum");
  const std::size_t m = s.rows(), h = s.cols();
  if (w_re.rank() != 3 || w_re.shape() != w_im.shape() || w_re.shape()[1] != h || w_re.shape()[2] != h ||
      w_re.shape()[0] < m)
    throw DimensionError("mix_channels: weights " + ad::shape_str(w_re.shape()) + " do not fit spectrum " +
                         ad::shape_str(s.shape()));
  std::vector<double> out(2 * m * h, 0.0);
  const auto S = s.data();
  const auto WR = w_re.data();
  const auto WI = w_im.data();
  for (std::size_t k = 0; k < m; ++k)
    for (std::size_t i = 0; i < h; ++i) {
      const double sr = S[2 * (k * h + i)], si = S[2 * (k * h + i) + 1];
      const double* wr = &WR[(k * h + i) * h];
      const double* wi = &WI[(k * h + i) * h];
      double* o = &out[2 * k * h];
      for (std::size_t c = 0; c < h; ++c) {
        o[2 * c] += sr * wr[c] - si * wi[c];
        o[2 * c + 1] += sr * wi[c] + si * wr[c];
      }
    }
  return ad::make_result(ad::Op::Custom, {m, h}, std::move(out), {s, w_re, w_im}, [m, h](ad::Node& self) {
    const auto& S = self.inputs[0]->value;
    const auto& WR = self.inputs[1]->value;
    const auto& WI = self.inputs[2]->value;
    const auto& G = self.grad;
    auto* gs = ad::grad_sink(self, 0);
    auto* gwr = ad::grad_sink(self, 1);
    auto* gwi = ad::grad_sink(self, 2);
    // Treating (re, im) as independent reals: out_re = sr wr - si wi, out_im = sr wi + si wr.
    for (std::size_t k = 0; k < m; ++k)
      for (std::size_t i = 0; i < h; ++i) {
        const double sr = S[2 * (k * h + i)], si = S[2 * (k * h + i) + 1];
        const std::size_t wbase = (k * h + i) * h;
        double dsr = 0.0, dsi = 0.0;
        for (std::size_t c = 0; c < h; ++c) {
          const double gr = G[2 * (k * h + c)], gi = G[2 * (k * h + c) + 1];
          const double wr = WR[wbase + c], wi = WI[wbase + c];
          dsr += gr * wr + gi * wi;
          dsi += -gr * wi + gi * wr;
          if (gwr) (*gwr)[wbase + c] += gr * sr + gi * si;
          if (gwi) (*gwi)[wbase + c] += -gr * si + gi * sr;
        }
        if (gs) {
          (*gs)[2 * (k * h + i)] += dsr;
          (*gs)[2 * (k * h + i) + 1] += dsi;
        }
      }
  }, true);
}

}  // namespace sbfnn::spectral
