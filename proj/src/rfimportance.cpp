#include "slidepp/rfimportance.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>

#include "slidepp/error.hpp"
#include "slidepp/log.hpp"
#include "slidepp/parallel.hpp"
#include "slidepp/rng.hpp"

namespace slidepp::rf {

std::size_t LabeledTable::class_count(int label) const {
  return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), static_cast<std::uint8_t>(label)));
}

void LabeledTable::validate() const {
  if (columns.size() != names.size()) throw DataError("feature table has mismatched names and columns");
  if (names.empty()) throw DataError("feature table has no features");
  for (std::size_t f = 0; f < columns.size(); ++f) {
    if (columns[f].size() != labels.size()) throw DataError("feature column '" + names[f] + "' has wrong length");
    for (double v : columns[f]) {
      if (std::isnan(v)) throw DataError("feature column '" + names[f] + "' contains NaN");
    }
  }
  for (auto l : labels) {
    if (l > 1) throw DataError("labels must be 0 or 1");
  }
  if (class_count(0) == 0 || class_count(1) == 0) throw DataError("both classes must be present in the table");
}

LabeledTable build_rf_dataset(const PointPattern& pattern, const CovariateStack& stack, double dummy_spacing) {
  const auto& g = stack.geometry();
  if (!(pattern.window().geometry() == g)) throw DataError("pattern grid does not match the covariate grid");
  if (!(dummy_spacing > 0.0)) throw ConfigError("dummy spacing must be positive");
  LabeledTable t;
  t.names = stack.names();
  t.columns.resize(t.names.size());
  const Window window = stack.window();

  std::set<std::size_t> crown_cells;
  std::size_t dropped = 0;
  for (const auto& p : pattern.points()) {
    auto cell = window.locate_valid(p);
    if (!cell) {
      ++dropped;
      continue;
    }
    const std::size_t idx = g.index(cell->row, cell->col);
    crown_cells.insert(idx);
    for (std::size_t f = 0; f < t.names.size(); ++f) t.columns[f].push_back(stack.get(t.names[f])[idx]);
    t.labels.push_back(1);
  }
  if (dropped > 0) warn(std::to_string(dropped) + " crown(s) on cells with missing covariates were excluded");

  const auto nx = static_cast<std::size_t>(std::ceil(g.width() / dummy_spacing));
  const auto ny = static_cast<std::size_t>(std::ceil(g.height() / dummy_spacing));
  for (std::size_t j = 0; j < ny; ++j) {
    for (std::size_t i = 0; i < nx; ++i) {
      const Point p{g.origin_x() + (static_cast<double>(i) + 0.5) * dummy_spacing,
                    g.origin_y() + (static_cast<double>(j) + 0.5) * dummy_spacing};
      auto cell = window.locate_valid(p);
      if (!cell) continue;
      const std::size_t idx = g.index(cell->row, cell->col);
      if (crown_cells.count(idx)) continue;
      for (std::size_t f = 0; f < t.names.size(); ++f) t.columns[f].push_back(stack.get(t.names[f])[idx]);
      t.labels.push_back(0);
    }
  }
  t.validate();
  return t;
}

namespace {

double gini(const double w[2]) {
  const double total = w[0] + w[1];
  if (total <= 0.0) return 0.0;
  const double p0 = w[0] / total;
  const double p1 = w[1] / total;
  return 1.0 - p0 * p0 - p1 * p1;
}

struct Grower {
  const LabeledTable& table;
  const ForestConfig& config;
  const double* class_weight;
  std::uint64_t tree_seed;
  std::size_t mtry;
  double root_weight = 0.0;
  std::vector<std::uint64_t> name_keys;

  struct Candidate {
    int feature = -1;
    double threshold = 0.0;
    double decrease = 0.0;
  };

  void fill_stats(TreeNode& node, std::span<const std::uint32_t> rows) const {
    node.samples = rows.size();
    for (auto r : rows) {
      const int c = table.labels[r];
      ++node.class_counts[c];
      node.weighted[c] += class_weight[c];
    }
  }

  std::vector<std::size_t> pick_features(std::size_t node_id) const {
    std::vector<std::pair<std::uint64_t, std::size_t>> keyed;
    const std::uint64_t node_key = splitmix64(tree_seed ^ splitmix64(node_id));
    for (std::size_t f = 0; f < table.features(); ++f) keyed.push_back({splitmix64(node_key ^ name_keys[f]), f});
    std::sort(keyed.begin(), keyed.end());
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < mtry; ++i) out.push_back(keyed[i].second);
    return out;
  }

  Candidate best_split(const TreeNode& node, std::span<const std::uint32_t> rows, std::size_t node_id) const {
    Candidate best;
    best.decrease = 1e-12 * (node.weighted[0] + node.weighted[1]);
    const double parent = (node.weighted[0] + node.weighted[1]) * gini(node.weighted);
    std::vector<std::uint32_t> order(rows.begin(), rows.end());
    for (std::size_t f : pick_features(node_id)) {
      const auto& col = table.columns[f];
      std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
        return col[a] < col[b] || (col[a] == col[b] && a < b);
      });
      double left[2] = {0.0, 0.0};
      for (std::size_t i = 0; i + 1 < order.size(); ++i) {
        const int c = table.labels[order[i]];
        left[c] += class_weight[c];
        const double v = col[order[i]];
        const double next = col[order[i + 1]];
        if (!(v < next)) continue;
        const double right[2] = {node.weighted[0] - left[0], node.weighted[1] - left[1]};
        const double decrease =
            parent - (left[0] + left[1]) * gini(left) - (right[0] + right[1]) * gini(right);
        if (decrease > best.decrease) {
          double mid = v + 0.5 * (next - v);
          if (!(mid < next)) mid = v;
          best = {static_cast<int>(f), mid, decrease};
        }
      }
    }
    return best;
  }

  Tree grow(std::vector<std::uint32_t> rows) const {
    Tree tree;
    struct Pending {
      int node;
      std::vector<std::uint32_t> rows;
    };
    tree.nodes.emplace_back();
    fill_stats(tree.nodes[0], rows);
    std::vector<Pending> stack;
    stack.push_back({0, std::move(rows)});
    while (!stack.empty()) {
      Pending p = std::move(stack.back());
      stack.pop_back();
      TreeNode node = tree.nodes[static_cast<std::size_t>(p.node)];
      const bool pure = node.class_counts[0] == 0 || node.class_counts[1] == 0;
      if (pure || node.samples < static_cast<std::size_t>(config.min_node_size)) continue;
      const Candidate split = best_split(node, p.rows, static_cast<std::size_t>(p.node));
      if (split.feature < 0) continue;
      std::vector<std::uint32_t> lrows, rrows;
      const auto& col = table.columns[static_cast<std::size_t>(split.feature)];
      for (auto r : p.rows) (col[r] <= split.threshold ? lrows : rrows).push_back(r);
      if (lrows.empty() || rrows.empty()) continue;
      node.feature = split.feature;
      node.threshold = split.threshold;
      node.impurity_decrease = split.decrease / root_weight;
      node.left = static_cast<int>(tree.nodes.size());
      node.right = node.left + 1;
      tree.nodes[static_cast<std::size_t>(p.node)] = node;
      tree.nodes.emplace_back();
      fill_stats(tree.nodes.back(), lrows);
      tree.nodes.emplace_back();
      fill_stats(tree.nodes.back(), rrows);
      // Right first so the left subtree is numbered depth-first.
      stack.push_back({node.right, std::move(rrows)});
      stack.push_back({node.left, std::move(lrows)});
    }
    return tree;
  }
};

const TreeNode& leaf_for(const Tree& tree, std::span<const double> row) {
  const TreeNode* n = &tree.nodes[0];
  while (!n->leaf()) {
    n = &tree.nodes[static_cast<std::size_t>(row[static_cast<std::size_t>(n->feature)] <= n->threshold ? n->left
                                                                                                      : n->right)];
  }
  return *n;
}

double leaf_share(const TreeNode& n) {
  const double total = n.weighted[0] + n.weighted[1];
  return total > 0.0 ? n.weighted[1] / total : 0.0;
}

}  // namespace

double Forest::probability(std::span<const double> row) const {
  if (row.size() != names.size()) throw DataError("feature row has the wrong length");
  if (trees.empty()) return 0.0;
  double s = 0.0;
  for (const auto& t : trees) s += leaf_share(leaf_for(t, row));
  return s / static_cast<double>(trees.size());
}

Forest fit_forest(const LabeledTable& table, const ForestConfig& config) {
  table.validate();
  if (config.trees < 1) throw ConfigError("forest needs at least one tree");
  if (config.min_node_size < 1) throw ConfigError("minimum node size must be at least 1");
  if (config.mtry < 0) throw ConfigError("features per split must be non-negative (0 selects the default)");
  const std::size_t q = table.features();
  std::size_t mtry = config.mtry > 0 ? static_cast<std::size_t>(config.mtry)
                                     : static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(q))));
  mtry = std::clamp<std::size_t>(mtry, 1, q);

  Forest forest;
  forest.config = config;
  forest.names = table.names;
  const auto n = table.rows();
  if (config.class_weighted) {
    for (int c = 0; c < 2; ++c) {
      forest.class_weight[c] = static_cast<double>(n) / (2.0 * static_cast<double>(table.class_count(c)));
    }
  }
  std::vector<std::uint64_t> name_keys;
  for (const auto& name : table.names) name_keys.push_back(hash_name(name));

  forest.trees.resize(static_cast<std::size_t>(config.trees));
  const SeededRng root(config.seed);
  parallel_for(forest.trees.size(), config.threads, [&](std::size_t t) {
    SeededRng rng = root.derive(t);
    Grower grower{table, config, forest.class_weight, rng.next_u64(), mtry, 0.0, name_keys};
    std::vector<std::uint32_t> rows(n);
    std::vector<std::uint32_t> in_bag(n, 0);
    for (auto& r : rows) {
      r = static_cast<std::uint32_t>(rng.below(n));
      ++in_bag[r];
    }
    std::sort(rows.begin(), rows.end());
    for (auto r : rows) grower.root_weight += forest.class_weight[table.labels[r]];
    forest.trees[t] = grower.grow(std::move(rows));
    forest.trees[t].in_bag = std::move(in_bag);
  });

  std::size_t evaluated = 0;
  std::size_t wrong = 0;
  std::vector<double> row(q);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t f = 0; f < q; ++f) row[f] = table.columns[f][i];
    double s = 0.0;
    std::size_t votes = 0;
    for (const auto& t : forest.trees) {
      if (t.in_bag[i]) continue;
      s += leaf_share(leaf_for(t, row));
      ++votes;
    }
    if (votes == 0) continue;
    ++evaluated;
    const int predicted = s / static_cast<double>(votes) > 0.5 ? 1 : 0;
    if (predicted != table.labels[i]) ++wrong;
  }
  forest.oob_error = evaluated ? static_cast<double>(wrong) / static_cast<double>(evaluated) : 0.0;
  return forest;
}

std::vector<std::string> ImportanceRanking::top_block() const {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < boundary && i < entries.size(); ++i) out.push_back(entries[i].covariate);
  return out;
}

ImportanceRanking gini_importance(const Forest& forest, const LabeledTable& table) {
  if (forest.names != table.names) throw DataError("forest and table features differ");
  const std::size_t q = forest.names.size();
  std::vector<double> total(q, 0.0);
  for (const auto& t : forest.trees) {
    for (const auto& node : t.nodes) {
      if (!node.leaf()) total[static_cast<std::size_t>(node.feature)] += node.impurity_decrease;
    }
  }
  double sum = 0.0;
  for (auto& v : total) {
    v /= static_cast<double>(std::max<std::size_t>(forest.trees.size(), 1));
    sum += v;
  }
  ImportanceRanking ranking;
  for (std::size_t f = 0; f < q; ++f) {
    ranking.entries.push_back({forest.names[f], sum > 0.0 ? total[f] / sum : 1.0 / static_cast<double>(q)});
  }
  std::stable_sort(ranking.entries.begin(), ranking.entries.end(),
                   [](const ImportanceEntry& a, const ImportanceEntry& b) {
                     if (a.importance != b.importance) return a.importance > b.importance;
                     return a.covariate < b.covariate;
                   });
  ranking.boundary = q >= 2 ? split_blocks(ranking) : q;
  return ranking;
}

std::size_t split_blocks(const ImportanceRanking& ranking) {
  const auto& e = ranking.entries;
  if (e.size() < 2) throw DataError("block split needs at least two features");
  std::size_t best = 0;
  double best_gap = -1.0;
  for (std::size_t i = 0; i + 1 < e.size(); ++i) {
    const double gap = e[i].importance - e[i + 1].importance;
    if (gap > best_gap) {
      best_gap = gap;
      best = i;
    }
  }
  return best + 1;
}

void write_ranking_csv(const ImportanceRanking& ranking, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out.precision(17);
  out << "covariate,importance,block\n";
  for (std::size_t i = 0; i < ranking.entries.size(); ++i) {
    out << ranking.entries[i].covariate << ',' << ranking.entries[i].importance << ','
        << (i < ranking.boundary ? 1 : 2) << '\n';
  }
}

}  // namespace slidepp::rf
