#include "fracnet/forest.hpp"

#include "fracnet/parallel.hpp"
#include "fracnet/rng.hpp"
#include "fracnet/stats.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <map>
#include <numeric>
#include <stdexcept>

namespace fracnet {

using Eigen::Index;

namespace {

class TreeBuilder {
public:
  TreeBuilder(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const ForestParams& params,
              std::mt19937_64& rng)
      : x_(x), y_(y), params_(params), rng_(rng),
        candidates_(candidate_feature_count(params.max_features, static_cast<int>(x.cols()))),
        features_(static_cast<std::size_t>(x.cols()))
  {
    std::iota(features_.begin(), features_.end(), 0);
  }

  Tree build(std::vector<Index> rows)
  {
    rows_ = std::move(rows);
    buffer_.reserve(rows_.size());
    grow(0, rows_.size(), 0);
    return std::move(tree_);
  }

private:
  int add_node(double value, int samples)
  {
    tree_.feature.push_back(-1);
    tree_.threshold.push_back(0.0);
    tree_.left.push_back(-1);
    tree_.right.push_back(-1);
    tree_.value.push_back(value);
    tree_.samples.push_back(samples);
    return static_cast<int>(tree_.feature.size() - 1);
  }

  int grow(std::size_t begin, std::size_t end, int depth)
  {
    const std::size_t n = end - begin;
    double sum = 0.0;
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (std::size_t i = begin; i < end; ++i) {
      const double v = y_(rows_[i]);
      sum += v;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    const int node = add_node(sum / static_cast<double>(n), static_cast<int>(n));
    const auto leaf = static_cast<std::size_t>(params_.min_samples_leaf);
    if ((params_.max_depth && depth >= *params_.max_depth) ||
        n < static_cast<std::size_t>(params_.min_samples_split) || lo == hi || n < 2 * leaf)
      return node;

    // Candidate subset by partial Fisher-Yates.
    const auto p = features_.size();
    const auto m = static_cast<std::size_t>(candidates_);
    if (m < p)
      for (std::size_t i = 0; i < m; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, p - 1);
        std::swap(features_[i], features_[pick(rng_)]);
      }

    double best_gain = 0.0;
    int best_feature = -1;
    double best_threshold = 0.0;
    const double parent = sum * sum / static_cast<double>(n);
    for (std::size_t c = 0; c < m; ++c) {
      const int f = features_[c];
      buffer_.clear();
      for (std::size_t i = begin; i < end; ++i)
        buffer_.emplace_back(x_(rows_[i], f), y_(rows_[i]));
      std::sort(buffer_.begin(), buffer_.end());
      if (buffer_.front().first == buffer_.back().first)
        continue;
      double left_sum = 0.0;
      for (std::size_t i = 1; i < n; ++i) {
        left_sum += buffer_[i - 1].second;
        if (buffer_[i - 1].first == buffer_[i].first || i < leaf || n - i < leaf)
          continue;
        const double right_sum = sum - left_sum;
        const double gain = left_sum * left_sum / static_cast<double>(i) +
                            right_sum * right_sum / static_cast<double>(n - i) - parent;
        // Near-ties keep the earlier candidate, so rounding cannot reorder equivalent splits.
        if (gain > best_gain * (1.0 + 1e-12)) {
          best_gain = gain;
          best_feature = f;
          const double a = buffer_[i - 1].first, b = buffer_[i].first;
          double mid = a + (b - a) / 2.0;
          if (!(mid < b))
            mid = a;
          best_threshold = mid;
        }
      }
    }
    if (best_feature < 0)
      return node;

    const auto split = std::stable_partition(rows_.begin() + static_cast<long>(begin),
                                             rows_.begin() + static_cast<long>(end),
                                             [&](Index r) { return x_(r, best_feature) <= best_threshold; });
    const auto mid = static_cast<std::size_t>(split - rows_.begin());
    const auto k = static_cast<std::size_t>(node);
    tree_.feature[k] = best_feature;
    tree_.threshold[k] = best_threshold;
    const int l = grow(begin, mid, depth + 1);
    tree_.left[k] = l;
    const int r = grow(mid, end, depth + 1);
    tree_.right[k] = r;
    return node;
  }

  const Eigen::MatrixXd& x_;
  const Eigen::VectorXd& y_;
  const ForestParams& params_;
  std::mt19937_64& rng_;
  int candidates_;
  std::vector<int> features_;
  std::vector<Index> rows_;
  std::vector<std::pair<double, double>> buffer_;
  Tree tree_;
};

std::vector<Index> draw_bootstrap(std::mt19937_64& rng, Index n)
{
  std::uniform_int_distribution<Index> pick(0, n - 1);
  std::vector<Index> rows(static_cast<std::size_t>(n));
  for (auto& r : rows)
    r = pick(rng);
  std::sort(rows.begin(), rows.end());
  return rows;
}

double r2_over(const Eigen::VectorXd& y, const Eigen::VectorXd& pred, const std::vector<int>& count)
{
  std::vector<Index> used;
  for (std::size_t i = 0; i < count.size(); ++i)
    if (count[i] > 0)
      used.push_back(static_cast<Index>(i));
  if (used.size() < 2)
    throw std::runtime_error("too few out-of-bag rows");
  Eigen::VectorXd a(static_cast<Index>(used.size())), b(static_cast<Index>(used.size()));
  for (std::size_t i = 0; i < used.size(); ++i) {
    a(static_cast<Index>(i)) = y(used[i]);
    b(static_cast<Index>(i)) = pred(used[i]);
  }
  return r2_score(a, b);
}

std::vector<std::vector<Index>> oob_rows(const ForestModel& model)
{
  const auto masks = model.out_of_bag_masks();
  std::vector<std::vector<Index>> out(masks.size());
  for (std::size_t t = 0; t < masks.size(); ++t)
    for (std::size_t i = 0; i < masks[t].size(); ++i)
      if (masks[t][i])
        out[t].push_back(static_cast<Index>(i));
  return out;
}

OutOfBagPrediction oob_from_rows(const ForestModel& model, const std::vector<std::vector<Index>>& rows,
                                 const Eigen::MatrixXd& x)
{
  OutOfBagPrediction out;
  out.value = Eigen::VectorXd::Zero(x.rows());
  out.tree_count.assign(static_cast<std::size_t>(x.rows()), 0);
  for (std::size_t t = 0; t < model.trees.size(); ++t)
    for (Index r : rows[t]) {
      out.value(r) += model.trees[t].predict(x.row(r));
      ++out.tree_count[static_cast<std::size_t>(r)];
    }
  for (Index r = 0; r < x.rows(); ++r)
    if (out.tree_count[static_cast<std::size_t>(r)] > 0)
      out.value(r) /= out.tree_count[static_cast<std::size_t>(r)];
  return out;
}

} // namespace

int FeatureTable::column(const std::string& name) const
{
  const auto it = std::find(columns.begin(), columns.end(), name);
  if (it == columns.end())
    throw std::invalid_argument("unknown column: " + name);
  return static_cast<int>(it - columns.begin());
}

FeatureTable FeatureTable::select_rows(const std::vector<Index>& rows) const
{
  FeatureTable out;
  out.columns = columns;
  out.features.resize(static_cast<Index>(rows.size()), cols());
  out.target.resize(static_cast<Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto k = static_cast<Index>(i);
    out.features.row(k) = features.row(rows[i]);
    out.target(k) = target(rows[i]);
    if (!groups.empty())
      out.groups.push_back(groups[static_cast<std::size_t>(rows[i])]);
  }
  return out;
}

FeatureTable FeatureTable::select_columns(const std::vector<std::string>& names) const
{
  FeatureTable out;
  out.columns = names;
  out.features.resize(rows(), static_cast<Index>(names.size()));
  for (std::size_t c = 0; c < names.size(); ++c)
    out.features.col(static_cast<Index>(c)) = features.col(column(names[c]));
  out.target = target;
  out.groups = groups;
  return out;
}

void FeatureTable::validate() const
{
  if (static_cast<Index>(columns.size()) != cols())
    throw std::invalid_argument("column names do not match the feature matrix");
  if (target.size() != rows() || (!groups.empty() && static_cast<Index>(groups.size()) != rows()))
    throw std::invalid_argument("row count mismatch");
  if (!features.allFinite() || !target.allFinite())
    throw std::invalid_argument("non-finite value in feature table");
  if (rows() > 0 && (target.minCoeff() < 0.0 || target.maxCoeff() > 1.0))
    throw std::invalid_argument("target outside [0,1]");
}

MaxFeatures parse_max_features(const std::string& text)
{
  if (text == "all" || text == "none" || text == "None")
    return MaxFeatures::all;
  if (text == "sqrt")
    return MaxFeatures::sqrt;
  if (text == "log2" || text == "log")
    return MaxFeatures::log2;
  throw std::invalid_argument("max_features must be all, sqrt or log2: " + text);
}

std::string to_string(MaxFeatures m)
{
  switch (m) {
  case MaxFeatures::sqrt:
    return "sqrt";
  case MaxFeatures::log2:
    return "log2";
  default:
    return "all";
  }
}

int candidate_feature_count(MaxFeatures m, int p)
{
  if (p <= 0)
    return 0;
  int k = p;
  if (m == MaxFeatures::sqrt)
    k = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(p)) - 1e-12));
  else if (m == MaxFeatures::log2)
    k = static_cast<int>(std::ceil(std::log2(static_cast<double>(p)) - 1e-12));
  return std::clamp(k, 1, p);
}

void ForestParams::validate() const
{
  if (n_estimators < 1)
    throw std::invalid_argument("n_estimators must be at least 1");
  if (min_samples_split < 2)
    throw std::invalid_argument("min_samples_split must be at least 2");
  if (min_samples_leaf < 1)
    throw std::invalid_argument("min_samples_leaf must be at least 1");
  if (max_depth && *max_depth < 0)
    throw std::invalid_argument("max_depth must be non-negative");
}

std::size_t Tree::leaf_count() const
{
  return static_cast<std::size_t>(std::count(feature.begin(), feature.end(), -1));
}

int Tree::depth() const
{
  if (feature.empty())
    return 0;
  std::vector<int> level(feature.size(), 0);
  int deepest = 0;
  // Children are always appended after their parent.
  for (std::size_t n = 0; n < feature.size(); ++n) {
    deepest = std::max(deepest, level[n]);
    if (feature[n] >= 0) {
      level[static_cast<std::size_t>(left[n])] = level[n] + 1;
      level[static_cast<std::size_t>(right[n])] = level[n] + 1;
    }
  }
  return deepest;
}

Tree fit_tree(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, std::vector<Index> rows,
              const ForestParams& params, std::mt19937_64& rng)
{
  params.validate();
  if (rows.empty())
    throw std::invalid_argument("cannot fit a tree on zero rows");
  if (x.rows() != y.size())
    throw std::invalid_argument("row count mismatch");
  TreeBuilder builder(x, y, params, rng);
  return builder.build(std::move(rows));
}

std::vector<std::vector<char>> ForestModel::out_of_bag_masks() const
{
  std::vector<std::vector<char>> masks(bootstrap.size(),
                                       std::vector<char>(static_cast<std::size_t>(training_rows), 1));
  for (std::size_t t = 0; t < bootstrap.size(); ++t)
    for (Index r : bootstrap[t])
      masks[t][static_cast<std::size_t>(r)] = 0;
  return masks;
}

std::vector<Index> bootstrap_sample(std::uint64_t tree_seed, Index n)
{
  std::mt19937_64 rng(tree_seed);
  return draw_bootstrap(rng, n);
}

ForestModel fit_forest(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const ForestParams& params,
                       std::vector<std::string> feature_names)
{
  params.validate();
  if (x.rows() == 0)
    throw std::invalid_argument("cannot fit a forest on an empty table");
  if (x.rows() != y.size())
    throw std::invalid_argument("row count mismatch");
  if (feature_names.empty())
    for (Index c = 0; c < x.cols(); ++c)
      feature_names.push_back("x" + std::to_string(c));
  if (static_cast<Index>(feature_names.size()) != x.cols())
    throw std::invalid_argument("feature name count mismatch");

  ForestModel model;
  model.params = params;
  model.feature_names = std::move(feature_names);
  model.training_rows = x.rows();
  const auto count = static_cast<std::size_t>(params.n_estimators);
  model.trees.resize(count);
  model.tree_seeds.resize(count);
  model.bootstrap.resize(count);
  parallel_for(count, params.threads, [&](std::size_t t) {
    const std::uint64_t seed = derive_seed(params.seed, t);
    std::mt19937_64 rng(seed);
    auto rows = draw_bootstrap(rng, x.rows());
    model.tree_seeds[t] = seed;
    model.bootstrap[t] = rows;
    model.trees[t] = fit_tree(x, y, std::move(rows), params, rng);
  });
  return model;
}

ForestModel fit_forest(const FeatureTable& table, const ForestParams& params)
{
  table.validate();
  return fit_forest(table.features, table.target, params, table.columns);
}

Eigen::VectorXd predict(const ForestModel& model, const Eigen::MatrixXd& x)
{
  if (x.cols() != static_cast<Index>(model.feature_names.size()))
    throw std::invalid_argument("feature count does not match the training schema");
  if (model.trees.empty())
    throw std::invalid_argument("empty forest");
  Eigen::VectorXd out(x.rows());
  const std::size_t chunk = 1024;
  const std::size_t chunks = (static_cast<std::size_t>(x.rows()) + chunk - 1) / chunk;
  parallel_for(chunks, model.params.threads, [&](std::size_t c) {
    const Index begin = static_cast<Index>(c * chunk);
    const Index end = std::min<Index>(x.rows(), begin + static_cast<Index>(chunk));
    for (Index r = begin; r < end; ++r) {
      double s = 0.0;
      for (const auto& tree : model.trees)
        s += tree.predict(x.row(r));
      out(r) = s / static_cast<double>(model.trees.size());
    }
  });
  return out;
}

Eigen::VectorXd predict(const ForestModel& model, const FeatureTable& table)
{
  if (table.columns != model.feature_names)
    throw std::invalid_argument("columns do not match the training schema");
  return predict(model, table.features);
}

OutOfBagPrediction oob_predict(const ForestModel& model, const Eigen::MatrixXd& x)
{
  if (x.rows() != model.training_rows)
    throw std::invalid_argument("out-of-bag prediction needs the training rows");
  auto out = oob_from_rows(model, oob_rows(model), x);
  const auto never = std::count(out.tree_count.begin(), out.tree_count.end(), 0);
  if (never > 0)
    std::cerr << "warning: " << never << " row(s) in-bag for every tree, excluded from OOB\n";
  return out;
}

double oob_score(const ForestModel& model, const Eigen::MatrixXd& x, const Eigen::VectorXd& y)
{
  const auto oob = oob_predict(model, x);
  return r2_over(y, oob.value, oob.tree_count);
}

std::vector<int> FeatureImportance::ranking() const
{
  std::vector<int> order(static_cast<std::size_t>(mean.size()));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return mean(a) > mean(b); });
  return order;
}

FeatureImportance permutation_importance(const ForestModel& model, const Eigen::MatrixXd& x,
                                         const Eigen::VectorXd& y, int repeats, std::uint64_t seed)
{
  if (repeats < 1)
    throw std::invalid_argument("repeats must be at least 1");
  if (x.rows() != model.training_rows || x.cols() != static_cast<Index>(model.feature_names.size()))
    throw std::invalid_argument("importance needs the training table");
  const auto rows = oob_rows(model);
  const auto base = oob_from_rows(model, rows, x);

  FeatureImportance out;
  out.names = model.feature_names;
  out.baseline = r2_over(y, base.value, base.tree_count);
  const Index p = x.cols();
  out.mean = Eigen::VectorXd::Zero(p);
  out.std = Eigen::VectorXd::Zero(p);

  parallel_for(static_cast<std::size_t>(p), model.params.threads, [&](std::size_t j) {
    Eigen::MatrixXd shuffled = x;
    const auto col = static_cast<Index>(j);
    std::vector<double> drops;
    std::vector<Index> perm(static_cast<std::size_t>(x.rows()));
    for (int r = 0; r < repeats; ++r) {
      std::iota(perm.begin(), perm.end(), Index(0));
      std::mt19937_64 rng(derive_seed(seed, j, static_cast<std::uint64_t>(r)));
      std::shuffle(perm.begin(), perm.end(), rng);
      for (Index i = 0; i < x.rows(); ++i)
        shuffled(i, col) = x(perm[static_cast<std::size_t>(i)], col);
      const auto permuted = oob_from_rows(model, rows, shuffled);
      drops.push_back(out.baseline - r2_over(y, permuted.value, permuted.tree_count));
    }
    const double mean = std::accumulate(drops.begin(), drops.end(), 0.0) / repeats;
    double var = 0.0;
    for (double d : drops)
      var += (d - mean) * (d - mean);
    out.mean(col) = mean;
    out.std(col) = std::sqrt(var / repeats);
  });

  const Eigen::VectorXd positive = out.mean.cwiseMax(0.0);
  const double total = positive.sum();
  out.share = total > 0.0 ? Eigen::VectorXd(positive / total) : Eigen::VectorXd::Zero(p);
  return out;
}

std::vector<ForestParams> ParamGrid::expand(const ForestParams& base) const
{
  std::vector<ForestParams> out;
  for (int n : n_estimators)
    for (const auto& d : max_depth)
      for (MaxFeatures m : max_features)
        for (int leaf : min_samples_leaf)
          for (int split : min_samples_split) {
            ForestParams p = base;
            p.n_estimators = n;
            p.max_depth = d;
            p.max_features = m;
            p.min_samples_leaf = leaf;
            if (split < 2) {
              std::cerr << "warning: min_samples_split " << split << " clamped to 2\n";
              split = 2;
            }
            p.min_samples_split = split;
            out.push_back(p);
          }
  return out;
}

std::vector<int> assign_folds(Index rows, int folds, std::uint64_t seed, const std::vector<int>* groups)
{
  if (folds < 2)
    throw std::invalid_argument("need at least 2 folds");
  std::mt19937_64 rng(seed);
  std::vector<int> fold(static_cast<std::size_t>(rows));
  if (groups) {
    std::vector<int> keys(groups->begin(), groups->end());
    std::sort(keys.begin(), keys.end());
    keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
    std::shuffle(keys.begin(), keys.end(), rng);
    std::map<int, int> of;
    for (std::size_t i = 0; i < keys.size(); ++i)
      of[keys[i]] = static_cast<int>(i % static_cast<std::size_t>(folds));
    for (std::size_t i = 0; i < fold.size(); ++i)
      fold[i] = of[(*groups)[i]];
    return fold;
  }
  std::vector<std::size_t> order(fold.size());
  std::iota(order.begin(), order.end(), std::size_t(0));
  std::shuffle(order.begin(), order.end(), rng);
  for (std::size_t i = 0; i < order.size(); ++i)
    fold[order[i]] = static_cast<int>(i % static_cast<std::size_t>(folds));
  return fold;
}

GridSearchResult grid_search(const FeatureTable& table, const ParamGrid& grid, int folds,
                             std::uint64_t seed, bool by_group, const ForestParams& base)
{
  table.validate();
  const auto candidates = grid.expand(base);
  if (candidates.empty())
    throw std::invalid_argument("empty parameter grid");
  if (by_group && table.groups.empty())
    throw std::invalid_argument("group-aware folds need group keys");
  const auto fold = assign_folds(table.rows(), folds, seed, by_group ? &table.groups : nullptr);

  std::vector<FeatureTable> train(static_cast<std::size_t>(folds)), valid(static_cast<std::size_t>(folds));
  std::vector<char> usable(static_cast<std::size_t>(folds), 1);
  for (int f = 0; f < folds; ++f) {
    std::vector<Index> in, out;
    for (Index r = 0; r < table.rows(); ++r)
      (fold[static_cast<std::size_t>(r)] == f ? out : in).push_back(r);
    train[static_cast<std::size_t>(f)] = table.select_rows(in);
    valid[static_cast<std::size_t>(f)] = table.select_rows(out);
    const auto& t = valid[static_cast<std::size_t>(f)].target;
    if (in.empty() || t.size() < 2 || t.maxCoeff() == t.minCoeff()) {
      std::cerr << "warning: fold " << f << " skipped (no target variance)\n";
      usable[static_cast<std::size_t>(f)] = 0;
    }
  }

  GridSearchResult result;
  for (const auto& params : candidates) {
    GridPoint point;
    point.params = params;
    double sum = 0.0;
    int used = 0;
    for (int f = 0; f < folds; ++f) {
      const auto k = static_cast<std::size_t>(f);
      if (!usable[k]) {
        point.fold_r2.push_back(std::numeric_limits<double>::quiet_NaN());
        continue;
      }
      const auto model = fit_forest(train[k], params);
      const double r2 = r2_score(valid[k].target, predict(model, valid[k].features));
      point.fold_r2.push_back(r2);
      sum += r2;
      ++used;
    }
    if (used == 0)
      throw std::runtime_error("every fold was skipped");
    point.mean_r2 = sum / used;
    result.points.push_back(point);
  }

  auto depth_key = [](const ForestParams& p) { return p.max_depth ? *p.max_depth : std::numeric_limits<int>::max(); };
  const GridPoint* best = &result.points.front();
  for (const auto& point : result.points) {
    if (point.mean_r2 > best->mean_r2)
      best = &point;
    else if (point.mean_r2 == best->mean_r2) {
      const auto& a = point.params;
      const auto& b = best->params;
      if (a.n_estimators < b.n_estimators ||
          (a.n_estimators == b.n_estimators && depth_key(a) < depth_key(b)))
        best = &point;
    }
  }
  result.best = best->params;
  return result;
}

TrainTestSplit train_test_split(const FeatureTable& table, double train_fraction, std::uint64_t seed,
                                bool by_group)
{
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw std::invalid_argument("train fraction must be in (0,1)");
  std::mt19937_64 rng(seed);
  TrainTestSplit out;
  if (by_group) {
    if (table.groups.empty())
      throw std::invalid_argument("group split needs group keys");
    std::vector<int> keys(table.groups.begin(), table.groups.end());
    std::sort(keys.begin(), keys.end());
    keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
    std::shuffle(keys.begin(), keys.end(), rng);
    const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(keys.size())));
    std::vector<int> in(keys.begin(), keys.begin() + static_cast<long>(std::min(n_train, keys.size())));
    std::sort(in.begin(), in.end());
    for (Index r = 0; r < table.rows(); ++r)
      (std::binary_search(in.begin(), in.end(), table.groups[static_cast<std::size_t>(r)]) ? out.train : out.test)
          .push_back(r);
    return out;
  }
  std::vector<Index> order(static_cast<std::size_t>(table.rows()));
  std::iota(order.begin(), order.end(), Index(0));
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(order.size())));
  out.train.assign(order.begin(), order.begin() + static_cast<long>(n_train));
  out.test.assign(order.begin() + static_cast<long>(n_train), order.end());
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.test.begin(), out.test.end());
  return out;
}

CorrelationMatrix correlation_matrix(const FeatureTable& table, bool include_target)
{
  if (table.rows() < 3)
    throw std::invalid_argument("correlation needs at least 3 rows");
  Eigen::MatrixXd data = table.features;
  CorrelationMatrix out;
  out.names = table.columns;
  if (include_target) {
    data.conservativeResize(Eigen::NoChange, data.cols() + 1);
    data.col(data.cols() - 1) = table.target;
    out.names.push_back("remaining_fraction");
  }
  const Index p = data.cols();
  out.values = Eigen::MatrixXd::Identity(p, p);
  out.constant.assign(static_cast<std::size_t>(p), 0);
  for (Index c = 0; c < p; ++c)
    if (data.col(c).maxCoeff() == data.col(c).minCoeff())
      out.constant[static_cast<std::size_t>(c)] = 1;
  for (Index a = 0; a < p; ++a)
    for (Index b = a + 1; b < p; ++b)
      out.values(a, b) = out.values(b, a) = pearson(data.col(a), data.col(b));
  return out;
}

namespace {

constexpr const char* kForestSchema = "fracnet-forest/1";

nlohmann::json params_to_json(const ForestParams& p)
{
  nlohmann::json j = {{"n_estimators", p.n_estimators},
                      {"max_features", to_string(p.max_features)},
                      {"min_samples_leaf", p.min_samples_leaf},
                      {"min_samples_split", p.min_samples_split},
                      {"seed", p.seed}};
  j["max_depth"] = p.max_depth ? nlohmann::json(*p.max_depth) : nlohmann::json(nullptr);
  return j;
}

ForestParams params_from_json(const nlohmann::json& j)
{
  ForestParams p;
  p.n_estimators = j.at("n_estimators").get<int>();
  p.max_features = parse_max_features(j.at("max_features").get<std::string>());
  p.min_samples_leaf = j.at("min_samples_leaf").get<int>();
  p.min_samples_split = j.at("min_samples_split").get<int>();
  p.seed = j.at("seed").get<std::uint64_t>();
  if (!j.at("max_depth").is_null())
    p.max_depth = j.at("max_depth").get<int>();
  return p;
}

} // namespace

void write_forest(const ForestModel& model, const std::filesystem::path& path)
{
  nlohmann::json doc;
  doc["schema"] = kForestSchema;
  doc["features"] = model.feature_names;
  doc["params"] = params_to_json(model.params);
  doc["training_rows"] = model.training_rows;
  auto& trees = doc["trees"] = nlohmann::json::array();
  for (std::size_t t = 0; t < model.trees.size(); ++t) {
    const Tree& tree = model.trees[t];
    trees.push_back({{"seed", model.tree_seeds[t]},
                     {"feature", tree.feature},
                     {"threshold", tree.threshold},
                     {"left", tree.left},
                     {"right", tree.right},
                     {"value", tree.value},
                     {"samples", tree.samples}});
  }
  std::ofstream out(path);
  if (!out)
    throw std::runtime_error("cannot write " + path.string());
  out << doc.dump();
}

ForestModel read_forest(const std::filesystem::path& path)
{
  std::ifstream in(path);
  if (!in)
    throw std::runtime_error("cannot read " + path.string());
  const auto doc = nlohmann::json::parse(in);
  if (doc.value("schema", "") != kForestSchema)
    throw std::runtime_error("unsupported forest schema in " + path.string());
  ForestModel model;
  model.feature_names = doc.at("features").get<std::vector<std::string>>();
  model.params = params_from_json(doc.at("params"));
  model.training_rows = doc.at("training_rows").get<Index>();
  for (const auto& j : doc.at("trees")) {
    Tree tree;
    tree.feature = j.at("feature").get<std::vector<int>>();
    tree.threshold = j.at("threshold").get<std::vector<double>>();
    tree.left = j.at("left").get<std::vector<int>>();
    tree.right = j.at("right").get<std::vector<int>>();
    tree.value = j.at("value").get<std::vector<double>>();
    tree.samples = j.at("samples").get<std::vector<int>>();
    const auto n = tree.feature.size();
    if (n == 0 || tree.threshold.size() != n || tree.left.size() != n || tree.right.size() != n ||
        tree.value.size() != n)
      throw std::runtime_error("malformed tree in " + path.string());
    const auto seed = j.at("seed").get<std::uint64_t>();
    model.tree_seeds.push_back(seed);
    model.bootstrap.push_back(bootstrap_sample(seed, model.training_rows));
    model.trees.push_back(std::move(tree));
  }
  model.params.n_estimators = static_cast<int>(model.trees.size());
  return model;
}

void write_importance_csv(const FeatureImportance& imp, const std::filesystem::path& path)
{
  std::ofstream out(path);
  if (!out)
    throw std::runtime_error("cannot write " + path.string());
  out << "rank,feature,importance,std,share\n" << std::setprecision(10);
  int rank = 1;
  for (int j : imp.ranking())
    out << rank++ << ',' << imp.names[static_cast<std::size_t>(j)] << ',' << imp.mean(j) << ','
        << imp.std(j) << ',' << imp.share(j) << '\n';
}

} // namespace fracnet
