#pragma once
/**
 * @file biomodels.hpp
 * @brief Right-hand sides, parameters and initial conditions of the six
 * systems-biology models: two repressilators, SIR, age-structured SIR and
 * Schnakenberg reaction-diffusion on 1-D and 2-D grids.
 *
 * Each model also provides the vector-Jacobian product of its right-hand
 * side, which the training residual needs for backpropagation.
 */

#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "sbfnn/errors.hpp"
#include "sbfnn/rng.hpp"

namespace sbfnn {

// ---------------------------------------------------------------------------
// Spatial grid and Laplacian

/// Cell-centred grid; ny == 1 means a 1-D line of nx cells.
struct SpatialGrid {
  std::size_t nx = 100;
  std::size_t ny = 1;
  double spacing = 1.0;

  std::size_t cells() const { return nx * ny; }
  bool is_2d() const { return ny > 1; }

  void require_laplacian_ready() const {
    if (nx < 3 || (ny != 1 && ny < 3))
      throw ContractError("laplacian: grid dims must be >= 3, got " + std::to_string(nx) + "x" + std::to_string(ny));
    if (!(spacing > 0.0)) throw ContractError("laplacian: grid spacing must be positive");
  }
};

/// out += coeff * lap(field) with zero-flux (reflected ghost cell) boundaries.
/// The operator is symmetric, so it is also its own adjoint.
inline void laplacian_accumulate(std::span<const double> field, const SpatialGrid& grid, double coeff,
                                 std::span<double> out) {
  const std::size_t nx = grid.nx, ny = grid.ny;
  const double c = coeff / (grid.spacing * grid.spacing);
  for (std::size_t y = 0; y < ny; ++y)
    for (std::size_t x = 0; x < nx; ++x) {
      const std::size_t i = y * nx + x;
      const double u = field[i];
      double acc = 0.0;
      if (x > 0) acc += field[i - 1] - u;
      if (x + 1 < nx) acc += field[i + 1] - u;
      if (ny > 1) {
        if (y > 0) acc += field[i - nx] - u;
        if (y + 1 < ny) acc += field[i + nx] - u;
      }
      out[i] += c * acc;
    }
}

inline std::vector<double> laplacian(std::span<const double> field, const SpatialGrid& grid) {
  grid.require_laplacian_ready();
  if (field.size() != grid.cells())
    throw DimensionError("laplacian: field has " + std::to_string(field.size()) + " cells, grid has " +
                         std::to_string(grid.cells()));
  std::vector<double> out(field.size(), 0.0);
  laplacian_accumulate(field, grid, 1.0, out);
  return out;
}

// ---------------------------------------------------------------------------
// Parameter records

struct Rep3Params {
  double beta = 10.0;
  double hill = 3.0;
};

struct Rep6Params {
  double alpha = 10.0;
  double alpha0 = 1e-5;
  double beta = 10.0;
  double hill = 3.0;
};

struct SirParams {
  double beta = 0.01;
  double gamma = 0.05;
  double population = 100.0;
};

struct AsirParams {
  double beta = 0.01;
  double gamma = 0.05;
  double population = 100.0;
  std::size_t groups = 5;
  std::vector<double> contact;  // groups x groups, row-major

  /// 1 everywhere plus 4 on the diagonal.
  static std::vector<double> default_contact(std::size_t n) {
    std::vector<double> m(n * n, 1.0);
    for (std::size_t i = 0; i < n; ++i) m[i * n + i] += 4.0;
    return m;
  }

  void validate() const {
    if (groups < 1) throw ContractError("A-SIR: need at least one age group");
    if (contact.size() != groups * groups)
      throw DimensionError("A-SIR: contact matrix has " + std::to_string(contact.size()) + " entries, expected " +
                           std::to_string(groups) + "x" + std::to_string(groups));
    for (double v : contact)
      if (v < 0.0) throw ContractError("A-SIR: contact matrix entries must be non-negative");
  }
};

struct TuringParams {
  double c1 = 0.1;
  double c2 = 0.9;
  double c_minus1 = 1.0;
  double c3 = 1.0;
  double d1 = 1.0;
  double d2 = 40.0;
  SpatialGrid grid{};

  /// Homogeneous steady state (U*, V*) = (c1 + c2, c2 / (c3 U*^2)) when c_minus1 = 1.
  std::array<double, 2> steady_state() const {
    const double u = (c1 + c2) / c_minus1;
    return {u, c2 / (c3 * u * u)};
  }
};

using ModelParams = std::variant<Rep3Params, Rep6Params, SirParams, AsirParams, TuringParams>;

// ---------------------------------------------------------------------------
// Right-hand sides

namespace detail {
/// beta / (1 + p^n) and its derivative in p.
inline std::pair<double, double> repression(double p, double amplitude, double hill) {
  const double pn = std::pow(p, hill);
  const double denom = 1.0 + pn;
  const double dpn = hill * std::pow(p, hill - 1.0);
  return {amplitude / denom, -amplitude * dpn / (denom * denom)};
}
/// Repressor of gene i in the lacI <- cI, tetR <- lacI, cI <- tetR cycle.
constexpr std::size_t repressor_of(std::size_t i) { return (i + 2) % 3; }
}  // namespace detail

inline std::array<double, 3> rhs_rep3(std::span<const double> P, const Rep3Params& p) {
  std::array<double, 3> d{};
  for (std::size_t i = 0; i < 3; ++i)
    d[i] = detail::repression(P[detail::repressor_of(i)], p.beta, p.hill).first - P[i];
  return d;
}

/// State order (M_lacI, M_tetR, M_cI, P_lacI, P_tetR, P_cI).
inline std::array<double, 6> rhs_rep6(std::span<const double> s, const Rep6Params& p) {
  std::array<double, 6> d{};
  for (std::size_t i = 0; i < 3; ++i) {
    const double m = s[i], prot = s[3 + i];
    d[i] = -m + detail::repression(s[3 + detail::repressor_of(i)], p.alpha, p.hill).first + p.alpha0;
    d[3 + i] = -p.beta * (prot - m);
  }
  return d;
}

/// State order (S, I, R).
inline std::array<double, 3> rhs_sir(std::span<const double> s, const SirParams& p) {
  const double infection = p.beta * s[1] * s[0] / p.population;
  const double removal = p.gamma * s[1];
  return {-infection, infection - removal, removal};
}

/// State interleaved per age group: (S_1, I_1, R_1, S_2, ...).
inline std::vector<double> rhs_asir(std::span<const double> s, const AsirParams& p) {
  p.validate();
  const std::size_t n = p.groups;
  if (s.size() != 3 * n) throw DimensionError("A-SIR: state length must be 3n");
  std::vector<double> d(3 * n);
  for (std::size_t i = 0; i < n; ++i) {
    double pressure = 0.0;
    for (std::size_t j = 0; j < n; ++j) pressure += p.contact[i * n + j] * s[3 * j + 1];
    const double infection = p.beta * s[3 * i] / p.population * pressure;
    const double removal = p.gamma * s[3 * i + 1];
    d[3 * i] = -infection;
    d[3 * i + 1] = infection - removal;
    d[3 * i + 2] = removal;
  }
  return d;
}

/// State is all U cells followed by all V cells.
inline void rhs_turing_into(std::span<const double> s, const TuringParams& p, std::span<double> d) {
  const std::size_t g = p.grid.cells();
  const auto U = s.subspan(0, g), V = s.subspan(g, g);
  for (std::size_t i = 0; i < g; ++i) {
    const double u2v = U[i] * U[i] * V[i];
    d[i] = p.c1 - p.c_minus1 * U[i] + p.c3 * u2v;
    d[g + i] = p.c2 - p.c3 * u2v;
  }
  laplacian_accumulate(U, p.grid, p.d1, d.subspan(0, g));
  laplacian_accumulate(V, p.grid, p.d2, d.subspan(g, g));
}

inline std::vector<double> rhs_turing(std::span<const double> s, const TuringParams& p) {
  p.grid.require_laplacian_ready();
  if (s.size() != 2 * p.grid.cells())
    throw DimensionError("Turing: state has " + std::to_string(s.size()) + " entries, grid needs " +
                         std::to_string(2 * p.grid.cells()));
  std::vector<double> d(s.size());
  rhs_turing_into(s, p, d);
  return d;
}

// ---------------------------------------------------------------------------
// Model specification

enum class ModelKind { Rep3, Rep6, Sir, Asir, Turing1D, Turing2D };

inline constexpr std::array<std::string_view, 6> kModelNames{"rep3", "rep6", "sir", "asir", "turing1d", "turing2d"};

class ModelSpec {
 public:
  ModelSpec(std::string name, ModelKind kind, ModelParams params, double t_end, std::vector<double> base_state,
            bool oscillatory, double ic_perturbation = 0.0)
      : name_(std::move(name)),
        kind_(kind),
        params_(std::move(params)),
        t_end_(t_end),
        base_state_(std::move(base_state)),
        oscillatory_(oscillatory),
        ic_perturbation_(ic_perturbation) {
    validate();
  }

  const std::string& name() const { return name_; }
  ModelKind kind() const { return kind_; }
  const ModelParams& params() const { return params_; }
  double t_end() const { return t_end_; }
  std::size_t dim() const { return base_state_.size(); }
  bool oscillatory() const { return oscillatory_; }
  double ic_perturbation() const { return ic_perturbation_; }
  const std::vector<double>& base_state() const { return base_state_; }

  std::optional<SpatialGrid> grid() const {
    if (auto* t = std::get_if<TuringParams>(&params_)) return t->grid;
    return std::nullopt;
  }

  /// Default state plus, for the reaction-diffusion models, a seeded
  /// uniform(-a, a) perturbation of every cell.
  std::vector<double> initial_condition(std::uint64_t seed) const {
    std::vector<double> y = base_state_;
    if (ic_perturbation_ > 0.0) {
      Rng rng(Rng::derive(seed, 0x1C));
      for (auto& v : y) v += rng.uniform(-ic_perturbation_, ic_perturbation_);
    }
    return y;
  }

  void rhs(std::span<const double> y, double /*t*/, std::span<double> dy) const {
    std::visit(
        [&](const auto& p) {
          using P = std::decay_t<decltype(p)>;
          if constexpr (std::is_same_v<P, Rep3Params>) {
            const auto d = rhs_rep3(y, p);
            std::copy(d.begin(), d.end(), dy.begin());
          } else if constexpr (std::is_same_v<P, Rep6Params>) {
            const auto d = rhs_rep6(y, p);
            std::copy(d.begin(), d.end(), dy.begin());
          } else if constexpr (std::is_same_v<P, SirParams>) {
            const auto d = rhs_sir(y, p);
            std::copy(d.begin(), d.end(), dy.begin());
          } else if constexpr (std::is_same_v<P, AsirParams>) {
            const auto d = rhs_asir(y, p);
            std::copy(d.begin(), d.end(), dy.begin());
          } else {
            rhs_turing_into(y, p, dy);
          }
        },
        params_);
  }

  std::vector<double> rhs(std::span<const double> y, double t = 0.0) const {
    std::vector<double> d(y.size());
    rhs(y, t, d);
    return d;
  }

  /// out += J(y)^T g, where J is the Jacobian of rhs at y.
  void rhs_vjp(std::span<const double> y, double /*t*/, std::span<const double> g, std::span<double> out) const {
    std::visit([&](const auto& p) { vjp(p, y, g, out); }, params_);
  }

 private:
  void validate() const {
    if (!(t_end_ > 0.0)) throw ContractError(name_ + ": time domain end must be positive");
    std::visit(
        [&](const auto& p) {
          using P = std::decay_t<decltype(p)>;
          std::size_t expected = 0;
          if constexpr (std::is_same_v<P, Rep3Params> || std::is_same_v<P, SirParams>) expected = 3;
          else if constexpr (std::is_same_v<P, Rep6Params>) expected = 6;
          else if constexpr (std::is_same_v<P, AsirParams>) {
            p.validate();
            expected = 3 * p.groups;
          } else {
            p.grid.require_laplacian_ready();
            expected = 2 * p.grid.cells();
          }
          if (base_state_.size() != expected)
            throw DimensionError(name_ + ": initial state has " + std::to_string(base_state_.size()) +
                                 " entries, model has " + std::to_string(expected));
        },
        params_);
  }

  static void vjp(const Rep3Params& p, std::span<const double> y, std::span<const double> g, std::span<double> out) {
    for (std::size_t i = 0; i < 3; ++i) {
      const std::size_t j = detail::repressor_of(i);
      out[i] -= g[i];
      out[j] += g[i] * detail::repression(y[j], p.beta, p.hill).second;
    }
  }

  static void vjp(const Rep6Params& p, std::span<const double> y, std::span<const double> g, std::span<double> out) {
    for (std::size_t i = 0; i < 3; ++i) {
      const std::size_t j = 3 + detail::repressor_of(i);
      out[i] -= g[i];
      out[j] += g[i] * detail::repression(y[j], p.alpha, p.hill).second;
      out[3 + i] -= p.beta * g[3 + i];
      out[i] += p.beta * g[3 + i];
    }
  }

  static void vjp(const SirParams& p, std::span<const double> y, std::span<const double> g, std::span<double> out) {
    const double a = g[1] - g[0];
    out[0] += a * p.beta * y[1] / p.population;
    out[1] += a * p.beta * y[0] / p.population + p.gamma * (g[2] - g[1]);
  }

  static void vjp(const AsirParams& p, std::span<const double> y, std::span<const double> g, std::span<double> out) {
    const std::size_t n = p.groups;
    const double k = p.beta / p.population;
    for (std::size_t i = 0; i < n; ++i) {
      const double a = g[3 * i + 1] - g[3 * i];
      double pressure = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        pressure += p.contact[i * n + j] * y[3 * j + 1];
        out[3 * j + 1] += a * k * y[3 * i] * p.contact[i * n + j];
      }
      out[3 * i] += a * k * pressure;
      out[3 * i + 1] += p.gamma * (g[3 * i + 2] - g[3 * i + 1]);
    }
  }

  static void vjp(const TuringParams& p, std::span<const double> y, std::span<const double> g,
                  std::span<double> out) {
    const std::size_t c = p.grid.cells();
    const auto U = y.subspan(0, c), V = y.subspan(c, c);
    const auto gU = g.subspan(0, c), gV = g.subspan(c, c);
    for (std::size_t i = 0; i < c; ++i) {
      const double diff = gU[i] - gV[i];
      out[i] += -p.c_minus1 * gU[i] + 2.0 * p.c3 * U[i] * V[i] * diff;
      out[c + i] += p.c3 * U[i] * U[i] * diff;
    }
    laplacian_accumulate(gU, p.grid, p.d1, out.subspan(0, c));
    laplacian_accumulate(gV, p.grid, p.d2, out.subspan(c, c));
  }

  std::string name_;
  ModelKind kind_;
  ModelParams params_;
  double t_end_;
  std::vector<double> base_state_;
  bool oscillatory_;
  double ic_perturbation_;
};

/// Dimension labels used in CSV headers and plots.
inline std::vector<std::string> dimension_names(const ModelSpec& m) {
  std::vector<std::string> out;
  switch (m.kind()) {
    case ModelKind::Rep3: return {"P_lacI", "P_tetR", "P_cI"};
    case ModelKind::Rep6: return {"M_lacI", "M_tetR", "M_cI", "P_lacI", "P_tetR", "P_cI"};
    case ModelKind::Sir: return {"S", "I", "R"};
    case ModelKind::Asir:
      for (std::size_t i = 0; i < m.dim() / 3; ++i)
        for (const char* c : {"S", "I", "R"}) out.push_back(std::string(c) + "_" + std::to_string(i + 1));
      return out;
    default:
      for (const char* f : {"U", "V"})
        for (std::size_t i = 0; i < m.dim() / 2; ++i) out.push_back(std::string(f) + "_" + std::to_string(i));
      return out;
  }
}

inline ModelKind model_kind_from_string(std::string_view name) {
  for (std::size_t i = 0; i < kModelNames.size(); ++i)
    if (kModelNames[i] == name) return static_cast<ModelKind>(i);
  throw ContractError("unknown model '" + std::string(name) + "'");
}

/// Builders with the default parameters, time domains and initial states.
inline ModelSpec make_rep3(Rep3Params p = {}) { return {"rep3", ModelKind::Rep3, p, 10.0, {1.0, 1.5, 2.0}, true}; }

inline ModelSpec make_rep6(Rep6Params p = {}) {
  return {"rep6", ModelKind::Rep6, p, 20.0, {1.0, 1.2, 1.5, 2.0, 1.0, 3.0}, true};
}

inline ModelSpec make_sir(SirParams p = {}) { return {"sir", ModelKind::Sir, p, 100.0, {99.0, 1.0, 0.0}, false}; }

inline ModelSpec make_asir(AsirParams p = {}) {
  if (p.contact.empty()) p.contact = AsirParams::default_contact(p.groups);
  std::vector<double> ic;
  for (std::size_t i = 0; i < p.groups; ++i) ic.insert(ic.end(), {19.8, 0.2, 0.0});
  return {"asir", ModelKind::Asir, std::move(p), 100.0, std::move(ic), false};
}

inline ModelSpec make_turing(TuringParams p, bool two_d, double perturbation = 0.1) {
  const auto ss = p.steady_state();
  std::vector<double> base(2 * p.grid.cells());
  std::fill(base.begin(), base.begin() + static_cast<std::ptrdiff_t>(p.grid.cells()), ss[0]);
  std::fill(base.begin() + static_cast<std::ptrdiff_t>(p.grid.cells()), base.end(), ss[1]);
  return {two_d ? "turing2d" : "turing1d", two_d ? ModelKind::Turing2D : ModelKind::Turing1D, p,
          two_d ? 2.0 : 10.0, std::move(base), false, perturbation};
}

inline ModelSpec make_turing1d(std::size_t cells = 100, double perturbation = 0.1) {
  TuringParams p;
  p.grid = {cells, 1, 1.0};
  return make_turing(p, false, perturbation);
}

inline ModelSpec make_turing2d(std::size_t side = 25, double perturbation = 0.1) {
  TuringParams p;
  p.grid = {side, side, 1.0};
  return make_turing(p, true, perturbation);
}

inline ModelSpec make_model(std::string_view name) {
  switch (model_kind_from_string(name)) {
    case ModelKind::Rep3: return make_rep3();
    case ModelKind::Rep6: return make_rep6();
    case ModelKind::Sir: return make_sir();
    case ModelKind::Asir: return make_asir();
    case ModelKind::Turing1D: return make_turing1d();
    case ModelKind::Turing2D: return make_turing2d();
  }
  throw ContractError("unknown model");
}

/// n x n contact matrix, one comma-separated row per line.
inline std::vector<double> load_contact_csv(std::istream& in, std::size_t& n_out) {
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(cell, &used));
        if (cell.find_first_not_of(" \t\r", used) != std::string::npos) throw std::invalid_argument(cell);
      } catch (const std::exception&) {
        throw IoError("contact matrix: cannot parse '" + cell + "'");
      }
    }
    rows.push_back(std::move(row));
  }
  const std::size_t n = rows.size();
  if (n == 0) throw IoError("contact matrix: file is empty");
  std::vector<double> flat;
  for (const auto& r : rows) {
    if (r.size() != n) throw DimensionError("contact matrix must be square, got a row of " + std::to_string(r.size()) +
                                            " in a " + std::to_string(n) + "-row file");
    flat.insert(flat.end(), r.begin(), r.end());
  }
  n_out = n;
  return flat;
}

inline std::vector<double> load_contact_csv(const std::string& path, std::size_t& n_out) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read contact matrix " + path);
  return load_contact_csv(in, n_out);
}

}  // namespace sbfnn
