#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "sbfnn/evaluation.hpp"
#include "sbfnn/rng.hpp"

using namespace sbfnn;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("sbfnn_eval_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// Minimal XML well-formedness: balanced, properly nested tags, quoted
// attributes, single root. Enough for the SVG writer's output.
bool well_formed_xml(const std::string& doc, std::string* why) {
  std::vector<std::string> stack;
  std::size_t i = 0, roots = 0;
  auto fail = [&](const std::string& m) {
    if (why) *why = m + " at " + std::to_string(i);
    return false;
  };
  while (i < doc.size()) {
    if (doc[i] != '<') {
      if (doc[i] == '&') {
        const auto semi = doc.find(';', i);
        if (semi == std::string::npos || semi - i > 8) return fail("bare ampersand");
      } else if (stack.empty() && !std::isspace(static_cast<unsigned char>(doc[i]))) {
        return fail("text outside root");
      }
      ++i;
      continue;
    }
    if (doc.compare(i, 4, "<!--") == 0) {
      const auto e = doc.find("-->", i);
      if (e == std::string::npos) return fail("open comment");
      i = e + 3;
      continue;
    }
    if (doc.compare(i, 2, "<?") == 0 || doc.compare(i, 2, "<!") == 0) {
      const auto e = doc.find('>', i);
      if (e == std::string::npos) return fail("open declaration");
      i = e + 1;
      continue;
    }
    const bool closing = i + 1 < doc.size() && doc[i + 1] == '/';
    std::size_t j = i + (closing ? 2 : 1);
    std::string name;
    while (j < doc.size() && (std::isalnum(static_cast<unsigned char>(doc[j])) || doc[j] == ':' || doc[j] == '-' ||
                              doc[j] == '_'))
      name += doc[j++];
    if (name.empty()) return fail("empty tag name");
    bool self_close = false;
    char quote = 0;
    for (; j < doc.size(); ++j) {
      const char c = doc[j];
      if (quote) {
        if (c == quote) quote = 0;
        else if (c == '<') return fail("'<' inside attribute");
        continue;
      }
      if (c == '"' || c == '\'') quote = c;
      else if (c == '>') break;
      else if (c == '/' && j + 1 < doc.size() && doc[j + 1] == '>') self_close = true;
    }
    if (j >= doc.size()) return fail("unterminated tag");
    if (closing) {
      if (stack.empty() || stack.back() != name) return fail("mismatched </" + name + ">");
      stack.pop_back();
    } else if (!self_close) {
      if (stack.empty()) ++roots;
      stack.push_back(name);
    } else if (stack.empty()) {
      ++roots;
    }
    i = j + 1;
  }
  if (!stack.empty()) return fail("unclosed <" + stack.back() + ">");
  if (roots != 1) return fail("expected one root element");
  return true;
}

std::vector<HistoryRow> history_with_tail(std::size_t rows, double tail_value) {
  std::vector<HistoryRow> h;
  for (std::size_t i = 0; i < rows; ++i) {
    HistoryRow r;
    r.epoch = i * 10;
    r.lr = 0.01;
    r.loss_total = 1.0 / (1.0 + static_cast<double>(i));
    r.test_nmse = i + rows / 10 >= rows ? tail_value : 5.0;
    h.push_back(r);
  }
  return h;
}

RunRecord rep3_run() {
  RunRecord r;
  r.model = "rep3";
  r.method = "SB-FNN";
  r.seed = 0;
  r.epochs = 100;
  r.dim_names = {"P_lacI", "P_tetR", "P_cI"};
  r.truth.dim = 3;
  for (int i = 0; i < 20; ++i) {
    const double t = 0.5 * i;
    r.truth.times.push_back(t);
    for (int d = 0; d < 3; ++d) {
      r.truth.states.push_back(2.0 + std::sin(t + d));
      r.prediction.push_back(2.0 + std::sin(t + d) + 0.01);
    }
  }
  r.history = history_with_tail(20, 1e-3);
  return r;
}

}  // namespace

TEST(XmlChecker, SanityOnKnownDocuments) {
  EXPECT_TRUE(well_formed_xml("<?xml version=\"1.0\"?><svg a=\"1\"><g><path d=\"M0 0\"/></g></svg>", nullptr));
  EXPECT_FALSE(well_formed_xml("<svg><g></svg>", nullptr));
  EXPECT_FALSE(well_formed_xml("<svg>a & b</svg>", nullptr));
  EXPECT_FALSE(well_formed_xml("<a/><b/>", nullptr));
}

TEST(Nmse, IdentityIsZero) {
  const std::vector<double> t{1.0, 2.0, 3.0, 4.0};
  EXPECT_EQ(nmse(t, t, 2), 0.0);
}

TEST(Nmse, SingleRowExample) {
  const std::vector<double> truth{1.0, 1.0}, pred{1.1, 0.9};
  EXPECT_NEAR(nmse(pred, truth, 2), std::sqrt(0.02) / std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(nmse(pred, truth, 2), 0.1, 1e-12);
}

// 3-sample SIR-like toy: S settles at 20, I decays to 0, R settles at 80.
TEST(Nmse, SirToyIncludeExclude) {
  const std::vector<double> truth{90, 10, 0, 40, 1e-3, 60, 20, 0.0, 80};
  const std::vector<double> pred{91, 9, 0, 41, 0.5, 59, 20, 0.1, 81};
  const auto ex = vanishing_dimensions(truth, 3);
  ASSERT_EQ(ex, std::vector<std::size_t>{1});

  // by hand, all dimensions
  const double r0 = std::sqrt(1 + 1 + 0) / std::sqrt(8100 + 100 + 0);
  const double r1 = std::sqrt(1 + 0.499 * 0.499 + 1) / std::sqrt(1600 + 1e-6 + 3600);
  const double r2 = std::sqrt(0 + 0.01 + 1) / std::sqrt(400 + 0 + 6400);
  // by hand, I dropped
  const double e0 = std::sqrt(1.0) / std::sqrt(8100.0);
  const double e1 = std::sqrt(2.0) / std::sqrt(5200.0);
  const double e2 = std::sqrt(1.0) / std::sqrt(6800.0);

  EXPECT_NEAR(nmse(pred, truth, 3, false), (r0 + r1 + r2) / 3.0, 1e-15);
  EXPECT_NEAR(nmse(pred, truth, 3, true), (e0 + e1 + e2) / 3.0, 1e-15);
  EXPECT_NE(nmse(pred, truth, 3, true), nmse(pred, truth, 3, false));
}

TEST(Nmse, VanishingNeedsDecayingTail) {
  // ends at zero, but grows inside the final 10%
  std::vector<double> up(40, 1.0);
  up[36] = 0.0;
  up[37] = 0.5;
  up[38] = 0.2;
  up[39] = 0.0;
  EXPECT_TRUE(vanishing_dimensions(up, 1).empty());
  std::vector<double> down(20);
  for (std::size_t i = 0; i < 20; ++i) down[i] = std::exp(-static_cast<double>(i)) * (i == 19 ? 0.0 : 1.0);
  EXPECT_EQ(vanishing_dimensions(down, 1), std::vector<std::size_t>{0});
  std::vector<double> level(20, 3e-6);
  EXPECT_TRUE(vanishing_dimensions(level, 1).empty());
}

TEST(Nmse, AllExcludedIsDomainError) {
  const std::vector<double> truth{1.0, 0.5, 0.0}, pred{1.0, 0.5, 0.1};
  EXPECT_THROW(nmse(pred, truth, 1, true), DomainError);
  EXPECT_THROW(nmse(pred, truth, 1, std::vector<std::size_t>{0}), DomainError);
}

TEST(Nmse, ShapeMismatch) {
  EXPECT_THROW(nmse(std::vector<double>{1, 2}, std::vector<double>{1, 2, 3}, 1), DimensionError);
  EXPECT_THROW(nmse(std::vector<double>{}, std::vector<double>{}, 2), DimensionError);
}

TEST(Nmse, PermutationInvariantAndNonNegative) {
  Rng rng(31);
  const std::size_t n = 40, D = 3;
  std::vector<double> t(n * D), p(n * D);
  for (auto& v : t) v = rng.uniform(0.5, 2.0);
  for (std::size_t i = 0; i < t.size(); ++i) p[i] = t[i] + rng.uniform(-0.1, 0.1);
  const double base = nmse(p, t, D);
  EXPECT_GT(base, 0.0);
  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;
  for (std::size_t i = n - 1; i > 0; --i) std::swap(perm[i], perm[std::min<std::size_t>(i, static_cast<std::size_t>(rng.uniform() * static_cast<double>(i + 1)))]);
  std::vector<double> tp(n * D), pp(n * D);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t d = 0; d < D; ++d) {
      tp[i * D + d] = t[perm[i] * D + d];
      pp[i * D + d] = p[perm[i] * D + d];
    }
  EXPECT_NEAR(nmse(pp, tp, D), base, 1e-14);
}

TEST(Aggregate, ExampleMeanAndSampleStd) {
  std::vector<SeedRun> runs;
  for (int s = 1; s <= 5; ++s) runs.push_back({static_cast<std::uint64_t>(s), history_with_tail(30, s * 1e-3), 100});
  const auto rep = aggregate_seeds("rep3", "SB-FNN", runs);
  EXPECT_NEAR(rep.mean, 3e-3, 1e-15);
  ASSERT_TRUE(rep.std.has_value());
  EXPECT_NEAR(*rep.std, 1.5811e-3, 1e-7);
  EXPECT_NEAR(*rep.std, std::sqrt(2.5) * 1e-3, 1e-15);
  EXPECT_EQ(rep.epochs, 100u);

  // invariant: recomputed from the list
  double m = 0.0, ss = 0.0;
  for (double v : rep.per_seed) m += v / 5.0;
  for (double v : rep.per_seed) ss += (v - m) * (v - m);
  EXPECT_NEAR(rep.mean, m, 1e-12);
  EXPECT_NEAR(*rep.std, std::sqrt(ss / 4.0), 1e-12);
}

TEST(Aggregate, IdenticalRunsZeroStd) {
  const auto h = history_with_tail(10, 0.02);
  const auto rep = aggregate_seeds("sir", "PINN", {{0, h, 10}, {1, h, 10}, {2, h, 10}});
  EXPECT_EQ(*rep.std, 0.0);
  EXPECT_NEAR(rep.mean, 0.02, 1e-15);
}

TEST(Aggregate, NeedsTwoRuns) {
  EXPECT_THROW(aggregate_seeds("rep3", "x", {{0, history_with_tail(10, 1.0), 10}}), ContractError);
  EXPECT_THROW(aggregate_seeds("rep3", "x", {}), ContractError);
}

TEST(Aggregate, TailMean) {
  EXPECT_NEAR(tail_nmse(history_with_tail(50, 0.25)), 0.25, 1e-15);
  // 25 rows -> last 3 rows
  auto h = history_with_tail(25, 0.0);
  for (std::size_t i = 0; i < 25; ++i) h[i].test_nmse = static_cast<double>(i);
  EXPECT_NEAR(tail_nmse(h), (22.0 + 23.0 + 24.0) / 3.0, 1e-15);
  EXPECT_NEAR(tail_nmse({h[0]}), 0.0, 0.0);
  EXPECT_TRUE(std::isnan(tail_nmse({})));
}

TEST(Report, JsonRoundTripAndAbsentStd) {
  const auto one = summarize("rep6", "Adaptive", {4}, {0.5}, 10);
  EXPECT_FALSE(one.std.has_value());
  const auto j = one.to_json();
  EXPECT_TRUE(j["nmse"]["std"].is_null());
  const auto back = EvalReport::from_json(j);
  EXPECT_FALSE(back.std.has_value());
  EXPECT_EQ(back.per_seed, one.per_seed);
  EXPECT_EQ(back.seeds, one.seeds);

  auto two = summarize("rep6", "Adaptive", {0, 1}, {0.5, 0.7}, 10);
  two.histories = {"a.csv", "b.csv"};
  const auto b2 = EvalReport::from_json(nlohmann::json::parse(two.to_json().dump()));
  ASSERT_TRUE(b2.std.has_value());
  EXPECT_DOUBLE_EQ(*b2.std, *two.std);
  EXPECT_EQ(b2.histories, two.histories);
  EXPECT_EQ(b2.model, "rep6");
}

TEST(History, CsvRoundTrip) {
  auto h = history_with_tail(7, 1.0 / 3.0);
  h[2].loss_p = 1e-300;
  std::stringstream s;
  write_history_csv(s, h);
  const auto back = read_history_csv(s);
  ASSERT_EQ(back.size(), h.size());
  for (std::size_t i = 0; i < h.size(); ++i) {
    EXPECT_EQ(back[i].epoch, h[i].epoch);
    EXPECT_EQ(back[i].test_nmse, h[i].test_nmse);
    EXPECT_EQ(back[i].loss_p, h[i].loss_p);
  }
  std::istringstream bad("epoch,lr\n1,2\n");
  EXPECT_THROW(read_history_csv(bad), IoError);
}

TEST(Rank, SixMethodActivationTable) {
  // mean N-MSE per activation and model, Rep3 Rep6 SIR A-SIR Turing1D Turing2D
  const std::vector<std::string> models{"rep3", "rep6", "sir", "asir", "turing1d", "turing2d"};
  const std::map<std::string, std::vector<double>> table{
      {"Tanh", {5.4551e-5, 9.4097e-4, 1.1149e-1, 1.3860e-4, 2.1986e-2, 6.9811e-3}},
      {"ReLU", {6.3463e-4, 1.1152e2, 2.3020e-1, 3.2724e-1, 2.7842e-1, 7.0822e-3}},
      {"Softplus", {2.3713e-4, 1.3282e-3, 2.0404e-4, 9.6764e-5, 7.5665e-2, 5.9022e-3}},
      {"ELU", {1.2048e-4, 6.5232e1, 2.2249e-4, 8.3467e-5, 1.4560e0, 5.0241e-3}},
      {"GELU", {1.0203e-4, 2.0271e-3, 1.1022e-4, 7.0913e-5, 1.8851e-2, 4.3966e-3}},
      {"Sin", {3.9671e-5, 1.4455e-3, 7.4375e-1, 5.8169e-1, 5.8022e-2, 4.5739e-3}},
      {"Adaptive", {6.8001e-5, 1.0955e-3, 6.8226e-5, 7.4510e-5, 1.8099e-2, 4.7462e-3}},
  };
  std::map<std::string, std::map<std::string, double>> results;
  for (const auto& [method, vals] : table)
    for (std::size_t m = 0; m < models.size(); ++m) results[method][models[m]] = vals[m];
  const auto r = rank_score(results);
  EXPECT_NEAR(r.mean.at("Adaptive"), 6.00, 1e-12);
  // the full published score table
  EXPECT_NEAR(r.mean.at("Tanh"), 26.0 / 6.0, 1e-12);
  EXPECT_NEAR(r.mean.at("ReLU"), 1.50, 1e-12);
  EXPECT_NEAR(r.mean.at("Softplus"), 22.0 / 6.0, 1e-12);
  EXPECT_NEAR(r.mean.at("ELU"), 19.0 / 6.0, 1e-12);
  EXPECT_NEAR(r.mean.at("GELU"), 5.50, 1e-12);
  EXPECT_NEAR(r.mean.at("Sin"), 23.0 / 6.0, 1e-12);
  const std::vector<double> adaptive{5, 6, 7, 6, 7, 5};
  for (std::size_t m = 0; m < models.size(); ++m) EXPECT_EQ(r.scores.at("Adaptive").at(models[m]), adaptive[m]);

  // no ties: each model's column is a permutation of 1..7
  for (const auto& model : models) {
    std::vector<double> col;
    for (const auto& [method, s] : r.scores) col.push_back(s.at(model));
    std::sort(col.begin(), col.end());
    for (std::size_t k = 0; k < col.size(); ++k) EXPECT_EQ(col[k], static_cast<double>(k + 1));
  }
  for (const auto& [method, mean] : r.mean) {
    EXPECT_GE(mean, 1.0);
    EXPECT_LE(mean, 7.0);
  }
}

TEST(Rank, SmallCases) {
  const auto one = rank_score({{"only", {{"a", 0.3}, {"b", 1.0}}}});
  EXPECT_EQ(one.mean.at("only"), 1.0);
  EXPECT_EQ(one.scores.at("only").at("b"), 1.0);

  const auto two = rank_score({{"good", {{"a", 0.1}, {"b", 0.2}}}, {"bad", {{"a", 0.5}, {"b", 0.9}}}});
  EXPECT_EQ(two.mean.at("good"), 2.0);
  EXPECT_EQ(two.mean.at("bad"), 1.0);

  const auto tie = rank_score({{"x", {{"a", 0.1}}}, {"y", {{"a", 0.1}}}, {"z", {{"a", 0.5}}}});
  EXPECT_EQ(tie.scores.at("x").at("a"), 2.5);
  EXPECT_EQ(tie.scores.at("y").at("a"), 2.5);
  EXPECT_EQ(tie.scores.at("z").at("a"), 1.0);

  const auto nan = rank_score({{"x", {{"a", std::nan("")}}}, {"y", {{"a", 3.0}}}});
  EXPECT_EQ(nan.scores.at("x").at("a"), 1.0);

  EXPECT_THROW(rank_score({{"x", {{"a", 0.1}}}, {"y", {{"b", 0.1}}}}), ContractError);
  EXPECT_TRUE(rank_score({}).mean.empty());
}

TEST(Emit, EmptyListWritesEmptyIndex) {
  const auto dir = scratch("empty");
  const auto files = emit_report({}, dir.string());
  EXPECT_TRUE(files.empty());
  ASSERT_TRUE(fs::exists(dir / "index.txt"));
  EXPECT_EQ(slurp(dir / "index.txt"), "");
  fs::remove_all(dir);
}

TEST(Emit, Rep3RunFileContract) {
  const auto dir = scratch("rep3");
  const auto files = emit_report({rep3_run()}, dir.string());
  std::size_t traj = 0, loss = 0, csv = 0, json = 0;
  for (const auto& f : files) {
    ASSERT_TRUE(fs::exists(dir / f)) << f;
    if (f.find("_traj_") != std::string::npos) ++traj;
    else if (f.ends_with("_loss.svg")) ++loss;
    else if (f.ends_with(".csv")) ++csv;
    else if (f.ends_with(".json")) ++json;
    if (f.ends_with(".svg")) {
      std::string why;
      EXPECT_TRUE(well_formed_xml(slurp(dir / f), &why)) << f << ": " << why;
    }
  }
  EXPECT_EQ(traj, 3u);
  EXPECT_EQ(loss, 1u);
  EXPECT_EQ(csv, 1u);
  EXPECT_EQ(json, 1u);

  std::istringstream idx(slurp(dir / "index.txt"));
  std::vector<std::string> listed;
  for (std::string line; std::getline(idx, line);) listed.push_back(line);
  EXPECT_EQ(listed, files);

  const auto metrics = nlohmann::json::parse(slurp(dir / "rep3_SB-FNN_metrics.json"));
  EXPECT_EQ(metrics["model"], "rep3");
  EXPECT_TRUE(metrics["nmse"]["std"].is_null());
  EXPECT_NEAR(metrics["nmse"]["mean"].get<double>(), 1e-3, 1e-15);
  fs::remove_all(dir);
}

TEST(Emit, PanelCapAndGroups) {
  const auto dir = scratch("cap");
  RunRecord wide = rep3_run();
  wide.model = "turing1d";
  wide.truth.dim = 20;
  wide.truth.states.assign(wide.truth.times.size() * 20, 1.0);
  wide.prediction = wide.truth.states;
  wide.dim_names.clear();
  RunRecord second = wide;
  second.seed = 1;
  const auto files = emit_report({wide, second}, dir.string());
  const auto traj = std::count_if(files.begin(), files.end(), [](const auto& f) { return f.find("_traj_") != std::string::npos; });
  EXPECT_EQ(traj, 2 * static_cast<long>(kMaxPanelsPerRun));
  const auto metrics = nlohmann::json::parse(slurp(dir / "turing1d_SB-FNN_metrics.json"));
  EXPECT_EQ(metrics["seeds"].size(), 2u);
  EXPECT_EQ(metrics["nmse"]["std"].get<double>(), 0.0);
  fs::remove_all(dir);
}

TEST(Emit, UnwritableDirectoryIsIoError) {
  const auto dir = scratch("blocker");
  { std::ofstream(dir.string()) << "file"; }
  EXPECT_THROW(emit_report({}, (dir / "sub").string()), IoError);
  fs::remove_all(dir);
}
