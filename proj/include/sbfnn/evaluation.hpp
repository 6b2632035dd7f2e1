#pragma once
// N-MSE, vanishing-dimension exclusion, seed aggregation, rank scores and
// report files (JSON metrics, CSV histories, SVG plots).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sbfnn/errors.hpp"
#include "sbfnn/oracle.hpp"
#include "sbfnn/svg.hpp"

namespace sbfnn {

inline constexpr double kVanishingLevel = 1e-6;

/// Dimensions whose trajectory ends within 1e-6 of zero and whose magnitude
/// never grows over the final 10% of samples.
inline std::vector<std::size_t> vanishing_dimensions(std::span<const double> truth, std::size_t dim) {
  if (dim == 0 || truth.size() % dim != 0) throw DimensionError("vanishing_dimensions: data does not divide into rows");
  const std::size_t n = truth.size() / dim;
  std::vector<std::size_t> out;
  if (n == 0) return out;
  const std::size_t tail = std::min(n, std::max<std::size_t>(2, (n + 9) / 10));
  for (std::size_t d = 0; d < dim; ++d) {
    if (std::abs(truth[(n - 1) * dim + d]) > kVanishingLevel) continue;
    bool decaying = true;
    for (std::size_t i = n - tail + 1; i < n && decaying; ++i)
      decaying = std::abs(truth[i * dim + d]) <= std::abs(truth[(i - 1) * dim + d]);
    if (decaying) out.push_back(d);
  }
  return out;
}

inline std::vector<std::size_t> vanishing_dimensions(const Trajectory& tr) {
  return vanishing_dimensions(tr.states, tr.dim);
}

/// Mean over rows of ||pred_i - truth_i|| / ||truth_i||, restricted to the
/// dimensions not listed in `excluded`.
inline double nmse(std::span<const double> pred, std::span<const double> truth, std::size_t dim,
                   const std::vector<std::size_t>& excluded = {}) {
  if (pred.size() != truth.size()) throw DimensionError("nmse: prediction and truth differ in size");
  if (dim == 0 || truth.size() % dim != 0 || truth.empty())
    throw DimensionError("nmse: need at least one row of " + std::to_string(dim) + " values");
  std::vector<char> keep(dim, 1);
  for (auto d : excluded) {
    if (d >= dim) throw DimensionError("nmse: excluded dimension out of range");
    keep[d] = 0;
  }
  if (std::none_of(keep.begin(), keep.end(), [](char k) { return k != 0; }))
    throw DomainError("nmse: every dimension is excluded, metric undefined");
  const std::size_t n = truth.size() / dim;
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double num = 0.0, den = 0.0;
    for (std::size_t d = 0; d < dim; ++d) {
      if (!keep[d]) continue;
      const double e = pred[i * dim + d] - truth[i * dim + d];
      num += e * e;
      den += truth[i * dim + d] * truth[i * dim + d];
    }
    if (den == 0.0) throw DomainError("nmse: truth row " + std::to_string(i) + " has zero norm");
    acc += std::sqrt(num) / std::sqrt(den);
  }
  return acc / static_cast<double>(n);
}

inline double nmse(std::span<const double> pred, std::span<const double> truth, std::size_t dim, bool exclusion) {
  return nmse(pred, truth, dim, exclusion ? vanishing_dimensions(truth, dim) : std::vector<std::size_t>{});
}

// ---------------------------------------------------------------------------
// Histories

struct HistoryRow {
  std::size_t epoch = 0;
  double lr = 0.0;
  double loss_total = 0.0;
  double loss_o = 0.0;
  double loss_f = 0.0;
  double loss_b = 0.0;
  double loss_p = 0.0;
  double test_nmse = 0.0;
};

inline constexpr const char* kHistoryHeader = "epoch,lr,loss_total,loss_o,loss_f,loss_b,loss_p,test_nmse";

inline void write_history_csv(std::ostream& out, const std::vector<HistoryRow>& rows) {
  out << kHistoryHeader << '\n';
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", r.epoch, r.lr, r.loss_total,
                  r.loss_o, r.loss_f, r.loss_b, r.loss_p, r.test_nmse);
    out << buf;
  }
}

inline std::vector<HistoryRow> read_history_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kHistoryHeader) throw IoError("history CSV: unexpected header");
  std::vector<HistoryRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    HistoryRow r;
    std::istringstream ls(line);
    std::string f;
    std::vector<std::string> fields;
    while (std::getline(ls, f, ',')) fields.push_back(f);
    if (fields.size() != 8) throw IoError("history CSV: expected 8 fields in '" + line + "'");
    try {
      r.epoch = std::stoull(fields[0]);
      double* dst[] = {&r.lr, &r.loss_total, &r.loss_o, &r.loss_f, &r.loss_b, &r.loss_p, &r.test_nmse};
      for (std::size_t k = 0; k < 7; ++k) *dst[k] = std::stod(fields[k + 1]);
    } catch (const std::exception&) {
      throw IoError("history CSV: malformed row '" + line + "'");
    }
    rows.push_back(r);
  }
  return rows;
}

/// Mean test N-MSE over the last 10% of logged rows (at least one).
inline double tail_nmse(const std::vector<HistoryRow>& history) {
  if (history.empty()) return std::numeric_limits<double>::quiet_NaN();
  const std::size_t k = std::max<std::size_t>(1, (history.size() + 9) / 10);
  double s = 0.0;
  for (std::size_t i = history.size() - k; i < history.size(); ++i) s += history[i].test_nmse;
  return s / static_cast<double>(k);
}

// ---------------------------------------------------------------------------
// Reports

struct EvalReport {
  std::string model;
  std::string method;
  std::vector<std::uint64_t> seeds;
  std::vector<double> per_seed;
  double mean = 0.0;
  std::optional<double> std;  // absent for a single seed
  std::size_t epochs = 0;
  std::vector<std::string> histories;  // relative CSV paths, when written

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["model"] = model;
    j["method"] = method;
    j["seeds"] = seeds;
    j["nmse"] = {{"mean", mean}, {"std", std ? nlohmann::json(*std) : nlohmann::json(nullptr)}, {"per_seed", per_seed}};
    j["epochs"] = epochs;
    if (!histories.empty()) j["histories"] = histories;
    return j;
  }

  static EvalReport from_json(const nlohmann::json& j) {
    EvalReport r;
    r.model = j.at("model").get<std::string>();
    r.method = j.at("method").get<std::string>();
    r.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    const auto& m = j.at("nmse");
    r.per_seed = m.at("per_seed").get<std::vector<double>>();
    r.mean = m.at("mean").get<double>();
    if (m.contains("std") && !m.at("std").is_null()) r.std = m.at("std").get<double>();
    r.epochs = j.at("epochs").get<std::size_t>();
    if (j.contains("histories")) r.histories = j.at("histories").get<std::vector<std::string>>();
    return r;
  }
};

/// Mean and, for two or more values, the sample standard deviation.
inline EvalReport summarize(std::string model, std::string method, std::vector<std::uint64_t> seeds,
                            std::vector<double> per_seed, std::size_t epochs) {
  if (per_seed.empty()) throw ContractError("summarize: no runs");
  if (seeds.size() != per_seed.size()) throw DimensionError("summarize: seeds and values differ in length");
  EvalReport r{std::move(model), std::move(method), std::move(seeds), std::move(per_seed), 0.0, std::nullopt, epochs, {}};
  double s = 0.0;
  for (double v : r.per_seed) s += v;
  r.mean = s / static_cast<double>(r.per_seed.size());
  if (r.per_seed.size() >= 2) {
    double ss = 0.0;
    for (double v : r.per_seed) ss += (v - r.mean) * (v - r.mean);
    r.std = std::sqrt(ss / static_cast<double>(r.per_seed.size() - 1));
  }
  return r;
}

struct SeedRun {
  std::uint64_t seed = 0;
  std::vector<HistoryRow> history;
  std::size_t epochs = 0;
};

/// Aggregates at least two runs; each run scores the tail mean of its
/// logged test N-MSE.
inline EvalReport aggregate_seeds(const std::string& model, const std::string& method, const std::vector<SeedRun>& runs) {
  if (runs.size() < 2) throw ContractError("aggregate_seeds: need at least 2 runs, got " + std::to_string(runs.size()));
  std::vector<std::uint64_t> seeds;
  std::vector<double> vals;
  std::size_t epochs = 0;
  for (const auto& r : runs) {
    seeds.push_back(r.seed);
    vals.push_back(tail_nmse(r.history));
    epochs = std::max(epochs, r.epochs);
  }
  return summarize(model, method, std::move(seeds), std::move(vals), epochs);
}

// ---------------------------------------------------------------------------
// Rank scores

struct RankTable {
  std::map<std::string, std::map<std::string, double>> scores;  // method -> model -> score
  std::map<std::string, double> mean;                            // method -> mean score

  nlohmann::json to_json() const { return {{"scores", scores}, {"mean", mean}}; }
};

/// Per model, the k methods get scores 1..k with k for the lowest N-MSE; tied
/// methods share the average of their ranks. Non-finite N-MSE ranks last.
inline RankTable rank_score(const std::map<std::string, std::map<std::string, double>>& results) {
  RankTable out;
  if (results.empty()) return out;
  const auto& models_ref = results.begin()->second;
  for (const auto& [method, per_model] : results) {
    if (per_model.size() != models_ref.size())
      throw ContractError("rank_score: method '" + method + "' is not evaluated on every model");
    for (const auto& [model, v] : models_ref)
      if (!per_model.count(model)) throw ContractError("rank_score: method '" + method + "' lacks model '" + model + "'");
  }
  auto key = [](double v) { return std::isfinite(v) ? v : std::numeric_limits<double>::infinity(); };
  for (const auto& [model, unused] : models_ref) {
    (void)unused;
    std::vector<std::pair<double, std::string>> col;
    for (const auto& [method, per_model] : results) col.emplace_back(key(per_model.at(model)), method);
    // descending N-MSE: worst gets rank 1
    std::sort(col.begin(), col.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    for (std::size_t i = 0; i < col.size();) {
      std::size_t j = i;
      while (j < col.size() && col[j].first == col[i].first) ++j;
      const double rank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
      for (std::size_t k = i; k < j; ++k) out.scores[col[k].second][model] = rank;
      i = j;
    }
  }
  for (const auto& [method, per_model] : out.scores) {
    double s = 0.0;
    for (const auto& [m, v] : per_model) s += v;
    out.mean[method] = s / static_cast<double>(per_model.size());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Report emission

/// One finished run as seen by the report writer.
struct RunRecord {
  std::string model;
  std::string method;
  std::uint64_t seed = 0;
  std::size_t epochs = 0;
  std::vector<HistoryRow> history;
  Trajectory truth;                 // on the test grid
  std::vector<double> prediction;   // same layout as truth.states
  std::vector<std::string> dim_names;
};

inline constexpr std::size_t kMaxPanelsPerRun = 12;

namespace detail {
inline void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw IoError("cannot write " + p.string());
  out << text;
  if (!out) throw IoError("failed writing " + p.string());
}

inline std::string slug(const std::string& s) {
  std::string out;
  for (char c : s) out += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '.') ? c : '_';
  return out;
}

inline void ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) throw IoError("cannot create directory " + dir.string());
}
}  // namespace detail

/// Truth (dashed) against prediction for one dimension.
inline std::string trajectory_svg(const RunRecord& run, std::size_t d) {
  svg::LinePlot plot;
  const std::string name = d < run.dim_names.size() ? run.dim_names[d] : "dim_" + std::to_string(d);
  plot.title = run.model + " " + name + " (" + run.method + ", seed " + std::to_string(run.seed) + ")";
  plot.xlabel = "t";
  plot.ylabel = name;
  svg::Series truth{"truth", run.truth.times, {}, "#444444", true};
  svg::Series pred{"prediction", run.truth.times, {}, svg::palette(1)};
  pred.markers = true;
  for (std::size_t i = 0; i < run.truth.size(); ++i) {
    truth.y.push_back(run.truth.at(i, d));
    pred.y.push_back(i * run.truth.dim + d < run.prediction.size() ? run.prediction[i * run.truth.dim + d]
                                                                   : std::numeric_limits<double>::quiet_NaN());
  }
  plot.series = {truth, pred};
  return plot.render();
}

/// Total loss against epoch: mean across runs with a min/max band.
inline std::string loss_svg(const std::string& title, const std::vector<const RunRecord*>& runs) {
  std::map<std::size_t, std::vector<double>> by_epoch;
  for (const auto* r : runs)
    for (const auto& h : r->history) by_epoch[h.epoch].push_back(h.loss_total);
  svg::LinePlot plot;
  plot.title = title;
  plot.xlabel = "epoch";
  plot.ylabel = "training loss";
  plot.log_y = true;
  svg::Series mean{"mean", {}, {}, svg::palette(0)};
  svg::Band band;
  band.color = svg::palette(0);
  for (const auto& [ep, vals] : by_epoch) {
    double s = 0.0;
    for (double v : vals) s += v;
    mean.x.push_back(static_cast<double>(ep));
    mean.y.push_back(s / static_cast<double>(vals.size()));
    band.x.push_back(static_cast<double>(ep));
    band.lo.push_back(*std::min_element(vals.begin(), vals.end()));
    band.hi.push_back(*std::max_element(vals.begin(), vals.end()));
  }
  plot.series = {mean};
  plot.bands = {band};
  return plot.render();
}

/// Writes, under out_dir: per run a history CSV and up to 12 trajectory
/// panels; per (model, method) group a metrics JSON and a loss plot; and
/// index.txt listing every file written (empty for no runs). Returns the
/// relative paths in index order.
inline std::vector<std::string> emit_report(const std::vector<RunRecord>& runs, const std::string& out_dir) {
  namespace fs = std::filesystem;
  const fs::path root(out_dir);
  detail::ensure_dir(root);
  std::vector<std::string> files;
  auto put = [&](const std::string& rel, const std::string& text) {
    detail::write_text(root / rel, text);
    files.push_back(rel);
  };

  std::map<std::pair<std::string, std::string>, std::vector<const RunRecord*>> groups;
  for (const auto& r : runs) groups[{r.model, r.method}].push_back(&r);

  for (const auto& [key, members] : groups) {
    const std::string stem = detail::slug(key.first) + "_" + detail::slug(key.second);
    std::vector<std::uint64_t> seeds;
    std::vector<double> vals;
    std::vector<std::string> hist_files;
    std::size_t epochs = 0;
    for (const auto* r : members) {
      const std::string run_stem = stem + "_seed" + std::to_string(r->seed);
      std::ostringstream csv;
      write_history_csv(csv, r->history);
      put(run_stem + "_history.csv", csv.str());
      hist_files.push_back(run_stem + "_history.csv");
      const std::size_t panels = std::min(r->truth.dim, kMaxPanelsPerRun);
      for (std::size_t d = 0; d < panels; ++d)
        put(run_stem + "_traj_" + std::to_string(d) + ".svg", trajectory_svg(*r, d));
      seeds.push_back(r->seed);
      vals.push_back(tail_nmse(r->history));
      epochs = std::max(epochs, r->epochs);
    }
    EvalReport rep = summarize(key.first, key.second, seeds, vals, epochs);
    rep.histories = hist_files;
    put(stem + "_loss.svg", loss_svg(key.first + " " + key.second + " training loss", members));
    put(stem + "_metrics.json", rep.to_json().dump(2) + "\n");
  }

  std::string index;
  for (const auto& f : files) index += f + "\n";
  detail::write_text(root / "index.txt", index);
  return files;
}

}  // namespace sbfnn
