// sbfnn: simulate / train / compare.
// Exit codes: 0 ok, 2 usage or config, 3 numerical failure.

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "sbfnn/sbfnn.hpp"

namespace fs = std::filesystem;
using namespace sbfnn;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitNumeric = 3;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw IoError("cannot write " + p.string());
  out << text;
}

void make_dirs(const fs::path& p) {
  std::error_code ec;
  fs::create_directories(p, ec);
  if (!fs::is_directory(p)) throw IoError("cannot create directory " + p.string());
}

std::size_t thread_cap(std::size_t jobs) {
  std::size_t n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("SBFNN_THREADS")) {
    try {
      const long v = std::stol(env);
      if (v > 0) n = static_cast<std::size_t>(v);
    } catch (const std::exception&) {
      std::cerr << "warning: ignoring SBFNN_THREADS='" << env << "'\n";
    }
  }
  return std::clamp<std::size_t>(n, 1, std::max<std::size_t>(jobs, 1));
}

// ---------------------------------------------------------------------------
// simulate

struct SimulateOpts {
  std::string model;
  std::size_t samples = 200;
  std::uint64_t seed = 0;
  std::string out = "runs/sim";
  std::optional<std::size_t> grid_cells;
  bool plot = true;
};

int cmd_simulate(const SimulateOpts& o) {
  nlohmann::json j{{"model", o.model}};
  if (o.grid_cells) j["grid_cells"] = *o.grid_cells;
  RunConfig rc = parse_run_config(j);
  const ModelSpec model = build_model(rc);
  if (o.samples < 2) throw UsageError("--samples must be at least 2");

  std::vector<double> times(o.samples);
  for (std::size_t i = 0; i < o.samples; ++i)
    times[i] = model.t_end() * static_cast<double>(i) / static_cast<double>(o.samples - 1);
  const Trajectory tr = generate_truth(model, times, o.seed);

  const fs::path dir(o.out);
  make_dirs(dir);
  std::ostringstream csv;
  write_trajectory_csv(csv, tr, dimension_names(model));
  write_file(dir / "trajectory.csv", csv.str());

  if (o.plot) {
    const auto names = dimension_names(model);
    svg::LinePlot plot;
    plot.title = model.name() + " reference trajectory";
    plot.xlabel = "t";
    plot.ylabel = "state";
    const std::size_t shown = std::min(model.dim(), kMaxPanelsPerRun);
    for (std::size_t d = 0; d < shown; ++d) {
      svg::Series s{names[d], tr.times, {}, svg::palette(d)};
      for (std::size_t i = 0; i < tr.size(); ++i) s.y.push_back(tr.at(i, d));
      plot.series.push_back(std::move(s));
    }
    write_file(dir / "trajectory.svg", plot.render());
  }
  std::cout << "wrote " << (dir / "trajectory.csv").string() << " (" << tr.size() << " rows, " << model.dim() + 1
            << " columns)\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// train

struct TrainOpts {
  std::string config;
  std::string model;
  std::vector<std::uint64_t> seeds;
  std::optional<std::size_t> epochs;
  std::string out = "runs/train";
  std::string arch;
  std::string activation;
  std::string constraint;
  std::optional<std::size_t> samples;
  std::string method;
  bool quiet = false;
};

RunConfig resolve_config(const TrainOpts& o) {
  nlohmann::json j = nlohmann::json::object();
  if (!o.config.empty()) {
    std::ifstream in(o.config);
    if (!in) throw ConfigError("--config", "cannot read " + o.config);
    try {
      in >> j;
    } catch (const nlohmann::json::parse_error& e) {
      throw ConfigError("<root>", std::string("invalid JSON: ") + e.what());
    }
    if (!j.is_object()) throw ConfigError("<root>", "configuration must be a JSON object");
    if (j.contains("contact_csv") && j["contact_csv"].is_string()) {
      const fs::path p(j["contact_csv"].get<std::string>());
      if (p.is_relative()) j["contact_csv"] = (fs::path(o.config).parent_path() / p).string();
    }
  }
  // flags win over the file
  if (!o.model.empty()) j["model"] = o.model;
  if (o.epochs) j["epochs"] = *o.epochs;
  if (!o.arch.empty()) j["arch"] = o.arch;
  if (!o.activation.empty()) j["activation"] = o.activation;
  if (!o.constraint.empty()) j["constraint"] = o.constraint;
  if (o.samples) j["train_samples"] = *o.samples;
  if (!o.method.empty()) j["method"] = o.method;
  return parse_run_config(j);
}

nlohmann::json run_metrics(const RunConfig& rc, std::uint64_t seed, const TrainResult& r) {
  const double tail = tail_nmse(r.history);
  auto rep = summarize(rc.train.model, rc.method_label(), {seed}, {tail}, r.epochs_run);
  rep.histories = {"history.csv"};
  auto j = rep.to_json();
  j["final_test_nmse"] = std::isfinite(r.final_test_nmse) ? nlohmann::json(r.final_test_nmse) : nlohmann::json(nullptr);
  j["best_test_nmse"] = std::isfinite(r.best_test_nmse) ? nlohmann::json(r.best_test_nmse) : nlohmann::json(nullptr);
  j["best_epoch"] = r.best_epoch;
  j["final_loss"] = std::isfinite(r.final_loss) ? nlohmann::json(r.final_loss) : nlohmann::json(nullptr);
  j["excluded_dims"] = r.excluded_dims;
  j["epochs_requested"] = rc.train.epochs;
  j["diverged"] = r.diverged;
  if (r.diverged) j["error"] = r.error;
  return j;
}

void write_run(const fs::path& dir, const RunConfig& rc, const ModelSpec& model, std::uint64_t seed, TrainResult& r) {
  make_dirs(dir);
  RunConfig echo = rc;
  echo.train.seed = seed;
  write_file(dir / "config.json", to_json(echo).dump(2) + "\n");

  std::ostringstream hist;
  write_history_csv(hist, r.history);
  write_file(dir / "history.csv", hist.str());
  write_file(dir / "metrics.json", run_metrics(rc, seed, r).dump(2) + "\n");
  if (r.diverged) return;

  save_checkpoint((dir / "checkpoint.json").string(), *r.net, seed);
  const auto last = r.net->snapshot();
  if (!r.best_params.empty()) {
    r.net->restore(r.best_params);
    save_checkpoint((dir / "checkpoint_best.json").string(), *r.net, seed);
    r.net->restore(last);
  }

  RunRecord rec;
  rec.model = model.name();
  rec.method = rc.method_label();
  rec.seed = seed;
  rec.epochs = r.epochs_run;
  rec.history = r.history;
  rec.truth = r.test_truth;
  rec.prediction = predict(*r.net, r.test_times, model.t_end());
  rec.dim_names = dimension_names(model);
  emit_report({rec}, (dir / "plots").string());

  Trajectory pred{r.test_times, rec.prediction, model.dim()};
  std::ostringstream csv;
  write_trajectory_csv(csv, pred, rec.dim_names);
  write_file(dir / "prediction.csv", csv.str());
}

int cmd_train(TrainOpts o) {
  const RunConfig rc = resolve_config(o);
  const ModelSpec model = build_model(rc);
  if (o.seeds.empty()) o.seeds = {rc.train.seed};
  std::sort(o.seeds.begin(), o.seeds.end());
  o.seeds.erase(std::unique(o.seeds.begin(), o.seeds.end()), o.seeds.end());

  const fs::path root(o.out);
  make_dirs(root);
  const std::size_t threads = thread_cap(o.seeds.size());
  if (!o.quiet)
    std::cerr << "training " << model.name() << " (" << rc.method_label() << ") for " << rc.train.epochs
              << " epochs, " << o.seeds.size() << " seed(s), " << threads << " thread(s)\n";

  auto results = train_seeds(rc.train, model, o.seeds, threads);

  bool diverged = false;
  std::vector<SeedRun> runs;
  for (std::size_t i = 0; i < o.seeds.size(); ++i) {
    auto& r = results[i];
    const fs::path dir = root / ("seed_" + std::to_string(o.seeds[i]));
    write_run(dir, rc, model, o.seeds[i], r);
    runs.push_back({o.seeds[i], r.history, r.epochs_run});
    if (r.diverged) {
      diverged = true;
      std::cerr << "seed " << o.seeds[i] << ": " << r.error << " (after " << r.epochs_run << " epochs)\n";
    } else if (!o.quiet) {
      std::printf("seed %llu: test N-MSE %.6g (tail mean %.6g), final loss %.6g\n",
                  static_cast<unsigned long long>(o.seeds[i]), r.final_test_nmse, tail_nmse(r.history), r.final_loss);
    }
  }
  EvalReport summary = runs.size() >= 2 ? aggregate_seeds(rc.train.model, rc.method_label(), runs)
                                        : summarize(rc.train.model, rc.method_label(), {runs[0].seed},
                                                    {tail_nmse(runs[0].history)}, runs[0].epochs);
  for (auto s : o.seeds) summary.histories.push_back("seed_" + std::to_string(s) + "/history.csv");
  write_file(root / "summary.json", summary.to_json().dump(2) + "\n");
  if (!o.quiet) {
    std::printf("mean N-MSE %.6g", summary.mean);
    if (summary.std) std::printf(" +- %.6g", *summary.std);
    std::printf("\n");
  }
  return diverged ? kExitNumeric : kExitOk;
}

// ---------------------------------------------------------------------------
// compare

std::vector<fs::path> metric_files(const std::vector<std::string>& dirs) {
  std::vector<fs::path> out;
  for (const auto& d : dirs) {
    const fs::path p(d);
    if (fs::is_regular_file(p / "metrics.json")) {
      out.push_back(p / "metrics.json");
      continue;
    }
    // a train output root: take its seed_* children
    std::vector<fs::path> kids;
    if (fs::is_directory(p))
      for (const auto& e : fs::directory_iterator(p))
        if (e.is_directory() && e.path().filename().string().starts_with("seed_") &&
            fs::is_regular_file(e.path() / "metrics.json"))
          kids.push_back(e.path() / "metrics.json");
    if (kids.empty()) throw UsageError("missing metrics file: " + (p / "metrics.json").string());
    std::sort(kids.begin(), kids.end());
    out.insert(out.end(), kids.begin(), kids.end());
  }
  return out;
}

int cmd_compare(const std::vector<std::string>& dirs, const std::string& out) {
  struct Group {
    std::vector<std::uint64_t> seeds;
    std::vector<double> values;
    std::size_t epochs = 0;
    std::vector<std::string> histories;
  };
  std::map<std::pair<std::string, std::string>, Group> groups;
  for (const auto& f : metric_files(dirs)) {
    std::ifstream in(f);
    EvalReport r;
    try {
      r = EvalReport::from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::exception& e) {
      throw UsageError("malformed metrics file " + f.string() + ": " + e.what());
    }
    auto& g = groups[{r.model, r.method}];
    for (std::size_t i = 0; i < r.per_seed.size(); ++i) {
      g.seeds.push_back(i < r.seeds.size() ? r.seeds[i] : 0);
      g.values.push_back(r.per_seed[i]);
    }
    g.epochs = std::max(g.epochs, r.epochs);
    for (const auto& h : r.histories) g.histories.push_back((f.parent_path() / h).string());
  }

  nlohmann::json entries = nlohmann::json::array();
  std::map<std::string, std::map<std::string, double>> by_method;
  std::set<std::string> models;
  std::vector<svg::Bar> bars;
  for (auto& [key, g] : groups) {
    auto rep = summarize(key.first, key.second, g.seeds, g.values, g.epochs);
    rep.histories = g.histories;
    entries.push_back(rep.to_json());
    by_method[key.second][key.first] = rep.mean;
    models.insert(key.first);
    bars.push_back({models.size() > 1 || groups.size() > 1 ? key.first + "/" + key.second : key.second, rep.mean,
                    rep.std});
  }
  nlohmann::json doc{{"groups", entries}};
  bool complete = true;
  for (const auto& [m, per_model] : by_method) complete = complete && per_model.size() == models.size();
  if (complete)
    doc["rank"] = rank_score(by_method).to_json();
  else
    doc["rank"] = nullptr;

  const fs::path root(out);
  make_dirs(root);
  write_file(root / "comparison.json", doc.dump(2) + "\n");
  write_file(root / "comparison.svg", svg::bar_chart("mean test N-MSE", "N-MSE", bars));
  for (const auto& e : entries) {
    std::printf("%-10s %-28s %.6g", e["model"].get<std::string>().c_str(), e["method"].get<std::string>().c_str(),
                e["nmse"]["mean"].get<double>());
    if (!e["nmse"]["std"].is_null()) std::printf(" +- %.6g", e["nmse"]["std"].get<double>());
    std::printf("\n");
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fourier-network surrogate training for systems biology models"};
  app.require_subcommand(1);

  SimulateOpts sim;
  auto* s = app.add_subcommand("simulate", "write a reference trajectory");
  s->add_option("--model", sim.model, "rep3|rep6|sir|asir|turing1d|turing2d")->required();
  s->add_option("--samples", sim.samples, "uniform time samples over the model's domain");
  s->add_option("--seed", sim.seed, "seed for the initial perturbation (Turing models)");
  s->add_option("--out", sim.out, "output directory");
  s->add_option("--grid-cells", sim.grid_cells, "Turing grid cells per axis");
  s->add_flag("!--no-plot", sim.plot, "skip the SVG");

  TrainOpts tr;
  auto* t = app.add_subcommand("train", "train one network per seed");
  t->add_option("--config", tr.config, "JSON run configuration");
  t->add_option("--model", tr.model, "model preset");
  t->add_option("--seed", tr.seeds, "seed, repeatable");
  t->add_option("--epochs", tr.epochs);
  t->add_option("--out", tr.out, "output root; one seed_<n> directory per seed");
  t->add_option("--arch", tr.arch, "sbfnn|pinn");
  t->add_option("--activation", tr.activation, "adaptive|tanh|relu|softplus|elu|gelu|sin");
  t->add_option("--constraint", tr.constraint, "on|off");
  t->add_option("--samples", tr.samples, "training time samples");
  t->add_option("--method", tr.method, "label used in reports");
  t->add_flag("--quiet", tr.quiet);

  std::vector<std::string> cmp_dirs;
  std::string cmp_out = "runs/compare";
  auto* c = app.add_subcommand("compare", "aggregate and rank finished runs");
  c->add_option("runs", cmp_dirs, "run directories")->required();
  c->add_option("--out", cmp_out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (s->parsed()) return cmd_simulate(sim);
    if (t->parsed()) {
      if (tr.config.empty() && tr.model.empty()) throw UsageError("train needs --config or --model");
      return cmd_train(tr);
    }
    if (c->parsed()) return cmd_compare(cmp_dirs, cmp_out);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    if (e.field() == "model") std::cerr << app.help();
    return kExitUsage;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n" << app.help();
    return kExitUsage;
  } catch (const ContractError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const DivergenceError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const DomainError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}
