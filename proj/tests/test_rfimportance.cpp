#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <random>

#include "slidepp/error.hpp"
#include "slidepp/rfimportance.hpp"
#include "support.hpp"

using namespace slidepp;
using namespace slidepp::rf;

namespace {

// One separating feature, three weak features sharing a latent factor, two
// pure-noise features.
LabeledTable mixed_fixture(std::uint64_t seed, std::size_t n = 300) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> nd;
  std::bernoulli_distribution coin(0.5);
  LabeledTable t;
  t.names = {"sep", "weak1", "weak2", "weak3", "noise1", "noise2"};
  t.columns.assign(6, {});
  for (std::size_t i = 0; i < n; ++i) {
    const int y = coin(gen);
    const double latent = nd(gen);
    t.labels.push_back(static_cast<std::uint8_t>(y));
    t.columns[0].push_back(3.0 * y + nd(gen) * 0.5);
    for (int k = 1; k <= 3; ++k) t.columns[static_cast<std::size_t>(k)].push_back(0.6 * y + latent + 0.7 * nd(gen));
    t.columns[4].push_back(nd(gen));
    t.columns[5].push_back(nd(gen));
  }
  return t;
}

double importance_of(const ImportanceRanking& r, const std::string& name) {
  for (const auto& e : r.entries) {
    if (e.covariate == name) return e.importance;
  }
  return NAN;
}

std::size_t rank_of(const ImportanceRanking& r, const std::string& name) {
  for (std::size_t i = 0; i < r.entries.size(); ++i) {
    if (r.entries[i].covariate == name) return i;
  }
  return r.entries.size();
}

}  // namespace

TEST_CASE("dataset construction") {
  const GridGeometry g(0, 0, 50, 50, 5.0);
  CovariateStack s(g);
  std::mt19937_64 gen(1);
  s.add("a", testing::random_grid(g, gen));
  s.add("b", testing::random_grid(g, gen));

  SUBCASE("5 crowns and a 100-node grid") {
    const std::vector<Point> crowns = {{1, 1}, {101, 203}, {77, 31}, {248, 248}, {140, 60}};
    const LabeledTable t = build_rf_dataset(PointPattern(Window(g), crowns), s, 25.0);
    CHECK(t.class_count(1) == 5);
    CHECK(t.class_count(0) <= 100);
    CHECK(t.class_count(0) == 100);
    CHECK(t.names == std::vector<std::string>{"a", "b"});
    CHECK(t.columns[0][1] == s.get("a")[g.index(g.locate({101, 203})->row, g.locate({101, 203})->col)]);
  }
  SUBCASE("a crown sharing a cell with a grid node removes that node") {
    // Grid node (12.5, 12.5) lies in the cell [10, 15) x [10, 15).
    const LabeledTable t = build_rf_dataset(PointPattern(Window(g), {{11.0, 14.0}, {200.0, 1.0}}), s, 25.0);
    CHECK(t.class_count(1) == 2);
    CHECK(t.class_count(0) == 99);
    const auto crown_cell = *g.locate({11.0, 14.0});
    const double crown_a = s.get("a")[g.index(crown_cell.row, crown_cell.col)];
    std::size_t same = 0;
    for (std::size_t r = 0; r < t.rows(); ++r) same += t.labels[r] == 0 && t.columns[0][r] == crown_a;
    CHECK(same == 0);
  }
  SUBCASE("no crowns") {
    CHECK_THROWS_AS(build_rf_dataset(PointPattern(Window(g), {}), s, 25.0), DataError);
  }
  SUBCASE("crowns on NODATA are dropped") {
    RasterGrid holed = s.get("a");
    holed.at(49, 0) = kNoData;
    CovariateStack h(g);
    h.add("a", holed);
    const LabeledTable t = build_rf_dataset(PointPattern(Window(g), {{1, 1}, {30, 30}}), h, 25.0);
    CHECK(t.class_count(1) == 1);
  }
  SUBCASE("validation") {
    LabeledTable t;
    t.names = {"x"};
    t.columns = {{1.0, NAN}};
    t.labels = {0, 1};
    CHECK_THROWS_AS(t.validate(), DataError);
    t.columns = {{1.0, 2.0}};
    CHECK_NOTHROW(t.validate());
    t.labels = {1, 1};
    CHECK_THROWS_AS(t.validate(), DataError);
  }
}

TEST_CASE("a separating feature gives a perfect training fit") {
  std::mt19937_64 gen(2);
  std::normal_distribution<double> nd;
  LabeledTable t;
  t.names = {"x"};
  t.columns = {{}};
  for (int i = 0; i < 200; ++i) {
    const int y = i % 2;
    t.labels.push_back(static_cast<std::uint8_t>(y));
    t.columns[0].push_back(y ? 5.0 + std::abs(nd(gen)) : -std::abs(nd(gen)));
  }
  ForestConfig c;
  c.trees = 50;
  const Forest f = fit_forest(t, c);
  int correct = 0;
  for (std::size_t r = 0; r < t.rows(); ++r) correct += f.predict(std::vector<double>{t.columns[0][r]}) == t.labels[r];
  CHECK(correct == 200);
  const ImportanceRanking ranking = gini_importance(f, t);
  REQUIRE(ranking.entries.size() == 1);
  CHECK(ranking.entries[0].importance == 1.0);
}

TEST_CASE("tree structure invariants") {
  const LabeledTable t = mixed_fixture(3);
  ForestConfig c;
  c.trees = 20;
  const Forest f = fit_forest(t, c);
  REQUIRE(f.trees.size() == 20);
  for (const auto& tree : f.trees) {
    std::size_t bag = 0;
    for (auto m : tree.in_bag) bag += m;
    CHECK(bag == t.rows());
    for (const auto& node : tree.nodes) {
      CHECK(node.class_counts[0] + node.class_counts[1] == node.samples);
      if (node.leaf()) continue;
      const auto& l = tree.nodes[static_cast<std::size_t>(node.left)];
      const auto& r = tree.nodes[static_cast<std::size_t>(node.right)];
      CHECK(l.samples > 0);
      CHECK(r.samples > 0);
      CHECK(l.samples + r.samples == node.samples);
      CHECK(node.samples >= static_cast<std::size_t>(c.min_node_size));
      CHECK(node.impurity_decrease > 0.0);
    }
  }
}

TEST_CASE("out-of-bag error on two Gaussian classes") {
  // Classes N(0,1) and N(2.8,1) in one dimension plus one noise column: the
  // Bayes error is Phi(-1.4), about 0.08.
  std::mt19937_64 gen(4);
  std::normal_distribution<double> nd;
  LabeledTable t;
  t.names = {"x", "z"};
  t.columns = {{}, {}};
  for (int i = 0; i < 600; ++i) {
    const int y = i % 2;
    t.labels.push_back(static_cast<std::uint8_t>(y));
    t.columns[0].push_back(2.8 * y + nd(gen));
    t.columns[1].push_back(nd(gen));
  }
  ForestConfig c;
  c.trees = 200;
  c.threads = 4;
  const Forest f = fit_forest(t, c);
  CHECK(f.oob_error <= 0.2);
  CHECK(f.oob_error >= 0.0);
}

TEST_CASE("importances are a distribution and noise gets little") {
  const LabeledTable t = mixed_fixture(5, 400);
  ForestConfig c;
  c.trees = 200;
  c.threads = 4;
  const ImportanceRanking r = gini_importance(fit_forest(t, c), t);
  double sum = 0.0;
  for (std::size_t i = 0; i < r.entries.size(); ++i) {
    CHECK(r.entries[i].importance >= 0.0);
    if (i > 0) CHECK(r.entries[i].importance <= r.entries[i - 1].importance);
    sum += r.entries[i].importance;
  }
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(r.entries[0].covariate == "sep");

  SUBCASE("pure noise next to a separating feature") {
    LabeledTable s;
    s.names = {"sep", "noise"};
    s.columns = {t.columns[0], t.columns[4]};
    s.labels = t.labels;
    const ImportanceRanking rs = gini_importance(fit_forest(s, c), s);
    CHECK(importance_of(rs, "noise") < 0.05);
  }
}

TEST_CASE("deterministic and independent of thread count") {
  const LabeledTable t = mixed_fixture(6);
  ForestConfig c;
  c.trees = 60;
  c.seed = 17;
  c.threads = 1;
  const ImportanceRanking a = gini_importance(fit_forest(t, c), t);
  c.threads = 4;
  const Forest f = fit_forest(t, c);
  const ImportanceRanking b = gini_importance(f, t);
  REQUIRE(a.entries.size() == b.entries.size());
  for (std::size_t i = 0; i < a.entries.size(); ++i) {
    CHECK(a.entries[i].covariate == b.entries[i].covariate);
    CHECK(a.entries[i].importance == b.entries[i].importance);
  }
  c.seed = 18;
  const ImportanceRanking d = gini_importance(fit_forest(t, c), t);
  CHECK(importance_of(d, "weak1") != importance_of(a, "weak1"));
}

TEST_CASE("column permutation permutes the importances") {
  const LabeledTable t = mixed_fixture(7);
  ForestConfig c;
  c.trees = 40;
  const ImportanceRanking a = gini_importance(fit_forest(t, c), t);
  std::vector<std::size_t> perm = {3, 5, 0, 1, 4, 2};
  LabeledTable p;
  p.labels = t.labels;
  for (auto k : perm) {
    p.names.push_back(t.names[k]);
    p.columns.push_back(t.columns[k]);
  }
  const ImportanceRanking b = gini_importance(fit_forest(p, c), p);
  for (const auto& name : t.names) CHECK(importance_of(a, name) == importance_of(b, name));
  CHECK(a.boundary == b.boundary);
}

TEST_CASE("duplicating a feature does not inflate the pair") {
  const LabeledTable t = mixed_fixture(8);
  SUBCASE("every feature a candidate: the copies split one share") {
    ForestConfig c;
    c.trees = 50;
    c.mtry = 7;
    const ImportanceRanking single = gini_importance(fit_forest(t, c), t);
    for (std::size_t f = 0; f < t.features(); ++f) {
      LabeledTable d = t;
      d.names.push_back(t.names[f] + "_copy");
      d.columns.push_back(t.columns[f]);
      const ImportanceRanking r = gini_importance(fit_forest(d, c), d);
      const double pair = importance_of(r, t.names[f]) + importance_of(r, t.names[f] + "_copy");
      CHECK(pair <= 2.0 * importance_of(single, t.names[f]));
      CHECK(pair == doctest::Approx(importance_of(single, t.names[f])).epsilon(1e-12));
    }
  }
  SUBCASE("default subsets: the dominant feature") {
    ForestConfig c;
    c.trees = 200;
    const double single = importance_of(gini_importance(fit_forest(t, c), t), "sep");
    LabeledTable d = t;
    d.names.push_back("sep_copy");
    d.columns.push_back(t.columns[0]);
    const ImportanceRanking r = gini_importance(fit_forest(d, c), d);
    CHECK(importance_of(r, "sep") + importance_of(r, "sep_copy") <= 2.0 * single);
  }
}

TEST_CASE("separating feature first and noise in the second block") {
  int ok = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const LabeledTable t = mixed_fixture(1000 + seed, 200);
    ForestConfig c;
    c.trees = 100;
    c.seed = seed;
    c.threads = 4;
    const ImportanceRanking r = gini_importance(fit_forest(t, c), t);
    ok += r.entries[0].covariate == "sep" && rank_of(r, "noise1") >= r.boundary && rank_of(r, "noise2") >= r.boundary;
  }
  CHECK(ok >= 95);
}

TEST_CASE("block split at the largest gap") {
  auto ranking = [](std::vector<double> v) {
    ImportanceRanking r;
    for (std::size_t i = 0; i < v.size(); ++i) r.entries.push_back({"f" + std::to_string(i), v[i]});
    return r;
  };
  CHECK(split_blocks(ranking({0.5, 0.4, 0.05, 0.05})) == 2);
  CHECK(split_blocks(ranking({0.25, 0.25, 0.25, 0.25})) == 1);
  CHECK(split_blocks(ranking({0.6, 0.4})) == 1);
  CHECK_THROWS_AS(split_blocks(ranking({1.0})), DataError);

  std::mt19937_64 gen(9);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int rep = 0; rep < 200; ++rep) {
    std::vector<double> v(2 + rep % 9);
    for (auto& x : v) x = u(gen);
    std::sort(v.rbegin(), v.rend());
    std::size_t best = 0;
    for (std::size_t i = 1; i + 1 < v.size(); ++i) {
      if (v[i] - v[i + 1] > v[best] - v[best + 1]) best = i;
    }
    const std::size_t b = split_blocks(ranking(v));
    CHECK(b == best + 1);
    CHECK(b >= 1);
    CHECK(b < v.size());
  }
}

TEST_CASE("ranking CSV") {
  ImportanceRanking r;
  r.entries = {{"slope", 0.5}, {"dtm", 0.3}, {"prc", 0.2}};
  r.boundary = 2;
  testing::TempDir dir;
  write_ranking_csv(r, dir / "r.csv");
  CHECK(testing::read_file(dir / "r.csv") == "covariate,importance,block\nslope,0.5,1\ndtm,0.29999999999999999,1\nprc,0.20000000000000001,2\n");
  CHECK(r.top_block() == std::vector<std::string>{"slope", "dtm"});
}

TEST_CASE("forest configuration errors") {
  const LabeledTable t = mixed_fixture(10, 50);
  ForestConfig c;
  c.trees = 0;
  CHECK_THROWS_AS(fit_forest(t, c), ConfigError);
  c.trees = 5;
  c.mtry = -1;
  CHECK_THROWS_AS(fit_forest(t, c), ConfigError);
  // Larger than the feature count means every feature.
  c.mtry = 7;
  const ImportanceRanking wide = gini_importance(fit_forest(t, c), t);
  c.mtry = 6;
  const ImportanceRanking all = gini_importance(fit_forest(t, c), t);
  for (const auto& name : t.names) CHECK(importance_of(wide, name) == importance_of(all, name));
  c.mtry = 0;
  c.min_node_size = 0;
  CHECK_THROWS_AS(fit_forest(t, c), ConfigError);
}
