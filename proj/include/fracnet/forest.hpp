#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace fracnet {

/// Numeric feature matrix with named columns, a target and a group key per row.
struct FeatureTable {
  std::vector<std::string> columns;
  Eigen::MatrixXd features; ///< rows x columns
  Eigen::VectorXd target;
  std::vector<int> groups;  ///< network id

  Eigen::Index rows() const { return features.rows(); }
  Eigen::Index cols() const { return features.cols(); }
  /// Column index by name; throws when missing.
  int column(const std::string& name) const;

  FeatureTable select_rows(const std::vector<Eigen::Index>& rows) const;
  FeatureTable select_columns(const std::vector<std::string>& names) const;
  /// Throws on shape mismatch, non-finite values or a target outside [0,1].
  void validate() const;
};

enum class MaxFeatures { all, sqrt, log2 };

MaxFeatures parse_max_features(const std::string& text);
std::string to_string(MaxFeatures m);
/// Candidate features per node: p, ceil(sqrt p) or ceil(log2 p), at least 1.
int candidate_feature_count(MaxFeatures m, int p);

struct ForestParams {
  int n_estimators = 100;
  std::optional<int> max_depth; ///< unlimited when empty
  MaxFeatures max_features = MaxFeatures::all;
  int min_samples_leaf = 1;
  int min_samples_split = 2;
  std::uint64_t seed = 0;
  int threads = 1;

  /// Throws when a field is out of range.
  void validate() const;
};

/// Flat binary regression tree. Leaves have feature == -1; rows with
/// x[feature] <= threshold go left.
struct Tree {
  std::vector<int> feature;
  std::vector<double> threshold;
  std::vector<int> left;
  std::vector<int> right;
  std::vector<double> value;
  std::vector<int> samples; ///< in-bag rows reaching the node, duplicates counted

  std::size_t node_count() const { return feature.size(); }
  std::size_t leaf_count() const;
  int depth() const;

  template <typename Row>
  double predict(const Row& x) const
  {
    int node = 0;
    while (feature[static_cast<std::size_t>(node)] >= 0) {
      const auto n = static_cast<std::size_t>(node);
      node = x(feature[n]) <= threshold[n] ? left[n] : right[n];
    }
    return value[static_cast<std::size_t>(node)];
  }
};

/// Greedy CART on the multiset `rows` of (x, y).
Tree fit_tree(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, std::vector<Eigen::Index> rows,
              const ForestParams& params, std::mt19937_64& rng);

struct ForestModel {
  std::vector<Tree> trees;
  std::vector<std::uint64_t> tree_seeds;
  std::vector<std::vector<Eigen::Index>> bootstrap; ///< sorted in-bag multiset per tree
  std::vector<std::string> feature_names;
  ForestParams params;
  Eigen::Index training_rows = 0;

  /// Out-of-bag flags per tree for the training rows.
  std::vector<std::vector<char>> out_of_bag_masks() const;
};

/// Bootstrap indices for one tree, drawn from its own seed.
std::vector<Eigen::Index> bootstrap_sample(std::uint64_t tree_seed, Eigen::Index n);

ForestModel fit_forest(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const ForestParams& params,
                       std::vector<std::string> feature_names = {});
ForestModel fit_forest(const FeatureTable& table, const ForestParams& params);

Eigen::VectorXd predict(const ForestModel& model, const Eigen::MatrixXd& x);
/// Checks the column names against the training schema.
Eigen::VectorXd predict(const ForestModel& model, const FeatureTable& table);

struct OutOfBagPrediction {
  Eigen::VectorXd value;
  std::vector<int> tree_count; ///< trees for which the row was out of bag
};

OutOfBagPrediction oob_predict(const ForestModel& model, const Eigen::MatrixXd& x);
/// R² over the rows with at least one out-of-bag tree.
double oob_score(const ForestModel& model, const Eigen::MatrixXd& x, const Eigen::VectorXd& y);

struct FeatureImportance {
  std::vector<std::string> names;
  Eigen::VectorXd mean; ///< drop in OOB R²
  Eigen::VectorXd std;
  Eigen::VectorXd share; ///< positive part, normalised to sum 1
  double baseline = 0.0;

  /// Feature indices by decreasing mean importance (stable).
  std::vector<int> ranking() const;
};

FeatureImportance permutation_importance(const ForestModel& model, const Eigen::MatrixXd& x,
                                         const Eigen::VectorXd& y, int repeats, std::uint64_t seed);

struct ParamGrid {
  std::vector<int> n_estimators{100};
  std::vector<std::optional<int>> max_depth{std::nullopt};
  std::vector<MaxFeatures> max_features{MaxFeatures::all};
  std::vector<int> min_samples_leaf{1};
  std::vector<int> min_samples_split{2};

  std::vector<ForestParams> expand(const ForestParams& base) const;
};

struct GridPoint {
  ForestParams params;
  std::vector<double> fold_r2; ///< NaN for skipped folds
  double mean_r2 = 0.0;
};

struct GridSearchResult {
  ForestParams best;
  std::vector<GridPoint> points;
};

/// Fold index per row; group-aware folds keep each group in one fold.
std::vector<int> assign_folds(Eigen::Index rows, int folds, std::uint64_t seed,
                              const std::vector<int>* groups = nullptr);

GridSearchResult grid_search(const FeatureTable& table, const ParamGrid& grid, int folds,
                             std::uint64_t seed, bool by_group = false,
                             const ForestParams& base = {});

struct TrainTestSplit {
  std::vector<Eigen::Index> train;
  std::vector<Eigen::Index> test;
};

/// Random split with the given train share, by row or by group.
TrainTestSplit train_test_split(const FeatureTable& table, double train_fraction, std::uint64_t seed,
                                bool by_group = false);

struct CorrelationMatrix {
  std::vector<std::string> names;
  Eigen::MatrixXd values;
  std::vector<char> constant; ///< column had zero variance
};

CorrelationMatrix correlation_matrix(const FeatureTable& table, bool include_target = true);

void write_forest(const ForestModel& model, const std::filesystem::path& path);
ForestModel read_forest(const std::filesystem::path& path);
void write_importance_csv(const FeatureImportance& imp, const std::filesystem::path& path);

} // namespace fracnet
