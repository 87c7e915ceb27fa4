#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "slidepp/raster.hpp"

namespace slidepp::rf {

// Column-major feature table with binary labels (1 = crown, 0 = dummy).
struct LabeledTable {
  std::vector<std::string> names;
  std::vector<std::vector<double>> columns;
  std::vector<std::uint8_t> labels;

  std::size_t rows() const { return labels.size(); }
  std::size_t features() const { return names.size(); }
  std::size_t class_count(int label) const;
  // Throws DataError on NaN features, ragged columns or a missing class.
  void validate() const;
};

// Crowns become class-1 rows; class-0 rows come from a regular grid of
// dummy_spacing (node at each square's centre) on valid cells, skipping cells
// that hold a crown. Crowns with missing covariates are dropped with a
// warning.
LabeledTable build_rf_dataset(const PointPattern& pattern, const CovariateStack& stack,
                              double dummy_spacing = 25.0);

struct ForestConfig {
  int trees = 500;
  int mtry = 0;  // 0: floor(sqrt(features))
  int min_node_size = 5;
  bool class_weighted = true;
  std::uint64_t seed = 1;
  int threads = 1;
};

struct TreeNode {
  int feature = -1;  // -1 for leaves
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  std::size_t samples = 0;
  std::size_t class_counts[2] = {0, 0};
  double weighted[2] = {0.0, 0.0};
  double impurity_decrease = 0.0;  // weighted by node share of the root

  bool leaf() const { return feature < 0; }
};

struct Tree {
  std::vector<TreeNode> nodes;
  std::vector<std::uint32_t> in_bag;  // bootstrap multiplicity per row
};

struct Forest {
  ForestConfig config;
  std::vector<std::string> names;
  std::vector<Tree> trees;
  double class_weight[2] = {1.0, 1.0};
  double oob_error = 0.0;

  // Averaged leaf class-1 share (weighted) for one feature row.
  double probability(std::span<const double> row) const;
  int predict(std::span<const double> row) const { return probability(row) > 0.5 ? 1 : 0; }
};

Forest fit_forest(const LabeledTable& table, const ForestConfig& config = {});

struct ImportanceEntry {
  std::string covariate;
  double importance = 0.0;
};

struct ImportanceRanking {
  std::vector<ImportanceEntry> entries;  // non-increasing importance
  std::size_t boundary = 0;              // size of the first block

  std::vector<std::string> top_block() const;
};

// Mean decrease in (class-weighted) Gini impurity, normalised to sum to 1.
ImportanceRanking gini_importance(const Forest& forest, const LabeledTable& table);

// Number of leading entries before the first largest gap between consecutive
// importances.
std::size_t split_blocks(const ImportanceRanking& ranking);

void write_ranking_csv(const ImportanceRanking& ranking, const std::filesystem::path& path);

}  // namespace slidepp::rf
