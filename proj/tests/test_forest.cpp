#include "fracnet/forest.hpp"
#include "fracnet/stats.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <limits>
#include <numeric>
#include <random>
#include <set>

using namespace fracnet;
using fracnet::oracle::cart_mismatches;

namespace {

struct Synthetic {
  Eigen::MatrixXd x;
  Eigen::VectorXd y;
};

// y = x1 with five uniform noise columns.
Synthetic identity_problem(Eigen::Index n, std::uint64_t seed)
{
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Synthetic s{Eigen::MatrixXd(n, 6), Eigen::VectorXd(n)};
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < 6; ++j)
      s.x(i, j) = u(rng);
    s.y(i) = s.x(i, 0);
  }
  return s;
}

Synthetic noisy_linear(Eigen::Index n, std::uint64_t seed)
{
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 0.05);
  Synthetic s{Eigen::MatrixXd(n, 4), Eigen::VectorXd(n)};
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < 4; ++j)
      s.x(i, j) = 0.05 + u(rng);
    s.y(i) = 0.5 * s.x(i, 0) + 0.2 * s.x(i, 1) + 0.05 * s.x(i, 2) + noise(rng);
  }
  return s;
}

FeatureTable grouped_table(Eigen::Index n, std::uint64_t seed)
{
  const auto s = noisy_linear(n, seed);
  FeatureTable t;
  t.columns = {"a", "b", "c", "d"};
  t.features = s.x;
  t.target = ((s.y.array() - s.y.minCoeff()) / (s.y.maxCoeff() - s.y.minCoeff())).matrix();
  for (Eigen::Index i = 0; i < n; ++i)
    t.groups.push_back(static_cast<int>(i % 17));
  return t;
}

} // namespace

TEST_SUITE("forest")
{
  TEST_CASE("CART matches an exhaustive split oracle on small data")
  {
    std::mt19937_64 rng(77);
    std::uniform_int_distribution<int> level(0, 5);
    std::uniform_int_distribution<int> size(2, 30);
    std::normal_distribution<double> noise(0.0, 1.0);
    for (int trial = 0; trial < 60; ++trial) {
      const Eigen::Index n = size(rng);
      Eigen::MatrixXd x(n, 3);
      Eigen::VectorXd y(n);
      for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < 3; ++j)
          x(i, j) = level(rng); // many ties
        y(i) = x(i, 0) - 2.0 * x(i, 2) + noise(rng);
      }
      ForestParams params;
      params.max_features = MaxFeatures::all;
      params.min_samples_leaf = 1 + trial % 3;
      params.min_samples_split = 2 + trial % 4;
      if (trial % 5 == 0)
        params.max_depth = 2;
      std::vector<Eigen::Index> rows(static_cast<std::size_t>(n));
      std::iota(rows.begin(), rows.end(), Eigen::Index(0));
      std::mt19937_64 tree_rng(trial);
      const Tree tree = fit_tree(x, y, rows, params, tree_rng);
      CHECK(cart_mismatches(tree, x, y, rows, params) == 0);
      if (params.max_depth)
        CHECK(tree.depth() <= *params.max_depth);
    }
  }

  TEST_CASE("constant target and a perfect step")
  {
    std::mt19937_64 rng(1);
    Eigen::MatrixXd x(6, 1);
    x << -3, -2, -1, 1, 2, 3;
    const std::vector<Eigen::Index> rows{0, 1, 2, 3, 4, 5};
    const Tree flat = fit_tree(x, Eigen::VectorXd::Constant(6, 0.4), rows, {}, rng);
    CHECK(flat.node_count() == 1);
    CHECK(flat.value[0] == doctest::Approx(0.4));

    Eigen::VectorXd step(6);
    step << 0, 0, 0, 1, 1, 1;
    const Tree t = fit_tree(x, step, rows, {}, rng);
    CHECK(t.depth() == 1);
    CHECK(t.threshold[0] == 0.0);
    CHECK(t.value[static_cast<std::size_t>(t.left[0])] == 0.0);
    CHECK(t.value[static_cast<std::size_t>(t.right[0])] == 1.0);
  }

  TEST_CASE("duplicating every row leaves the splits unchanged")
  {
    const auto s = noisy_linear(40, 5);
    std::vector<Eigen::Index> once(40), twice;
    std::iota(once.begin(), once.end(), Eigen::Index(0));
    for (auto r : once) {
      twice.push_back(r);
      twice.push_back(r);
    }
    std::mt19937_64 a(3), b(3);
    const Tree t1 = fit_tree(s.x, s.y, once, {}, a);
    const Tree t2 = fit_tree(s.x, s.y, twice, {}, b);
    CHECK(t1.feature == t2.feature);
    CHECK(t1.threshold == t2.threshold);
  }

  TEST_CASE("forest mechanics")
  {
    const auto s = noisy_linear(300, 9);
    ForestParams params;
    params.n_estimators = 20;
    params.seed = 42;
    const ForestModel m = fit_forest(s.x, s.y, params);
    REQUIRE(m.trees.size() == 20);

    Eigen::VectorXd manual = Eigen::VectorXd::Zero(s.x.rows());
    for (const auto& tree : m.trees)
      for (Eigen::Index r = 0; r < s.x.rows(); ++r)
        manual(r) += tree.predict(s.x.row(r));
    manual /= 20.0;
    const Eigen::VectorXd pred = predict(m, s.x);
    CHECK((pred - manual).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK(pred.minCoeff() >= s.y.minCoeff());
    CHECK(pred.maxCoeff() <= s.y.maxCoeff());

    for (std::size_t t = 0; t < m.trees.size(); ++t) {
      CHECK(static_cast<Eigen::Index>(m.bootstrap[t].size()) == s.x.rows());
      CHECK(m.trees[t].samples[0] == s.x.rows());
      auto drawn = bootstrap_sample(m.tree_seeds[t], s.x.rows());
      std::sort(drawn.begin(), drawn.end());
      CHECK(drawn == m.bootstrap[t]);
    }

    const ForestModel again = fit_forest(s.x, s.y, params);
    CHECK(again.bootstrap == m.bootstrap);
    CHECK((predict(again, s.x) - pred).cwiseAbs().maxCoeff() == 0.0);
    params.seed = 43;
    CHECK(fit_forest(s.x, s.y, params).bootstrap != m.bootstrap);

    params.seed = 42;
    params.threads = 4;
    CHECK((predict(fit_forest(s.x, s.y, params), s.x) - pred).cwiseAbs().maxCoeff() == 0.0);
  }

  TEST_CASE("a one-tree forest is a tree on its bootstrap sample")
  {
    const auto s = noisy_linear(200, 10);
    ForestParams params;
    params.n_estimators = 1;
    params.seed = 5;
    const ForestModel m = fit_forest(s.x, s.y, params);
    std::mt19937_64 rng(0);
    const Tree t = fit_tree(s.x, s.y, bootstrap_sample(m.tree_seeds[0], s.x.rows()), params, rng);
    CHECK(t.feature == m.trees[0].feature);
    CHECK(t.threshold == m.trees[0].threshold);
    for (Eigen::Index r = 0; r < s.x.rows(); ++r)
      CHECK(predict(m, s.x)(r) == doctest::Approx(t.predict(s.x.row(r))).epsilon(1e-12));
  }

  TEST_CASE("fully grown trees reproduce their in-bag rows")
  {
    const auto s = noisy_linear(20, 12);
    ForestParams params;
    params.n_estimators = 10;
    params.min_samples_leaf = 1;
    const ForestModel m = fit_forest(s.x, s.y, params);
    for (std::size_t t = 0; t < m.trees.size(); ++t)
      for (auto r : m.bootstrap[t])
        CHECK(m.trees[t].predict(s.x.row(r)) == doctest::Approx(s.y(r)).epsilon(1e-12));
  }

  TEST_CASE("out-of-bag scoring")
  {
    const auto s = noisy_linear(1000, 13);
    ForestParams params;
    params.n_estimators = 50;
    const ForestModel m = fit_forest(s.x, s.y, params);
    const auto oob = oob_predict(m, s.x);
    CHECK(std::count(oob.tree_count.begin(), oob.tree_count.end(), 0) == 0);
    const auto masks = m.out_of_bag_masks();
    for (Eigen::Index r = 0; r < 1000; r += 97) {
      double sum = 0.0;
      int count = 0;
      for (std::size_t t = 0; t < m.trees.size(); ++t)
        if (masks[t][static_cast<std::size_t>(r)]) {
          sum += m.trees[t].predict(s.x.row(r));
          ++count;
        }
      CHECK(count == oob.tree_count[static_cast<std::size_t>(r)]);
      CHECK(oob.value(r) == doctest::Approx(sum / count).epsilon(1e-12));
    }
    CHECK(oob_score(m, s.x, s.y) == doctest::Approx(r2_score(s.y, oob.value)).epsilon(1e-12));
  }

  TEST_CASE("synthetic identity target: accuracy and importance")
  {
    const auto train = identity_problem(2000, 21);
    const auto test = identity_problem(1000, 22);
    ForestParams params;
    params.n_estimators = 100;
    params.seed = 3;
    const ForestModel m = fit_forest(train.x, train.y, params);
    CHECK(r2_score(test.y, predict(m, test.x)) >= 0.95);
    const auto imp = permutation_importance(m, train.x, train.y, 3, 11);
    CHECK(imp.ranking().front() == 0);
    for (int j = 1; j < 6; ++j)
      CHECK(imp.mean(0) >= 10.0 * imp.mean(j));
    CHECK(imp.share.sum() == doctest::Approx(1.0));
  }

  TEST_CASE("more trees do not hurt on held-out data")
  {
    const auto train = noisy_linear(600, 31);
    const auto test = noisy_linear(600, 32);
    ForestParams params;
    params.seed = 1;
    params.n_estimators = 10;
    const double few = r2_score(test.y, predict(fit_forest(train.x, train.y, params), test.x));
    params.n_estimators = 200;
    const double many = r2_score(test.y, predict(fit_forest(train.x, train.y, params), test.x));
    CHECK(many >= few);
  }

  TEST_CASE("importance of a constant column is zero and ranks survive monotone transforms")
  {
    auto s = noisy_linear(500, 41);
    s.x.col(3).setZero();
    ForestParams params;
    params.n_estimators = 60;
    params.seed = 8;
    const auto imp = permutation_importance(fit_forest(s.x, s.y, params), s.x, s.y, 3, 2);
    CHECK(imp.mean(3) == 0.0);
    CHECK(imp.std(3) == 0.0);

    Eigen::MatrixXd logged = s.x;
    logged.col(0) = s.x.col(0).array().log().matrix();
    logged.col(1) = s.x.col(1).array().log().matrix();
    const auto imp_log = permutation_importance(fit_forest(logged, s.y, params), logged, s.y, 3, 2);
    CHECK(imp.ranking() == imp_log.ranking());
  }

  TEST_CASE("parameter handling")
  {
    CHECK(candidate_feature_count(MaxFeatures::all, 14) == 14);
    CHECK(candidate_feature_count(MaxFeatures::sqrt, 14) == 4);
    CHECK(candidate_feature_count(MaxFeatures::log2, 14) == 4);
    CHECK(candidate_feature_count(MaxFeatures::sqrt, 1) == 1);
    CHECK(candidate_feature_count(MaxFeatures::log2, 1) == 1);
    CHECK(parse_max_features("sqrt") == MaxFeatures::sqrt);
    CHECK(to_string(MaxFeatures::log2) == "log2");
    CHECK_THROWS(parse_max_features("half"));

    ForestParams bad;
    bad.min_samples_split = 1;
    CHECK_THROWS(bad.validate());
    bad = {};
    bad.min_samples_leaf = 0;
    CHECK_THROWS(bad.validate());
    bad = {};
    bad.n_estimators = 0;
    CHECK_THROWS(bad.validate());

    ParamGrid grid;
    grid.min_samples_split = {1};
    const auto expanded = grid.expand({});
    REQUIRE(expanded.size() == 1);
    CHECK(expanded[0].min_samples_split == 2);
  }

  TEST_CASE("feature table validation and schema checks")
  {
    FeatureTable t = grouped_table(30, 1);
    CHECK_NOTHROW(t.validate());
    CHECK(t.column("c") == 2);
    CHECK_THROWS(t.column("missing"));
    FeatureTable bad = t;
    bad.target(0) = 1.5;
    CHECK_THROWS(bad.validate());
    bad = t;
    bad.features(1, 1) = std::nan("");
    CHECK_THROWS(bad.validate());

    ForestParams params;
    params.n_estimators = 3;
    const auto m = fit_forest(t, params);
    FeatureTable renamed = t;
    renamed.columns[0] = "z";
    CHECK_THROWS(predict(m, renamed));
    CHECK_THROWS(predict(m, Eigen::MatrixXd::Zero(3, 2)));
    const auto sub = t.select_columns({"b", "a"});
    CHECK(sub.features.col(0) == t.features.col(1));
    const auto few = t.select_rows({4, 2});
    CHECK(few.target(0) == t.target(4));
    CHECK(few.groups[1] == t.groups[2]);
  }

  TEST_CASE("splits and folds")
  {
    const FeatureTable t = grouped_table(300, 2);
    const auto rows = train_test_split(t, 2.0 / 3.0, 7);
    CHECK(rows.train.size() == 200);
    CHECK(rows.train.size() + rows.test.size() == 300);
    std::set<Eigen::Index> all(rows.train.begin(), rows.train.end());
    all.insert(rows.test.begin(), rows.test.end());
    CHECK(all.size() == 300);

    const auto grouped = train_test_split(t, 2.0 / 3.0, 7, true);
    std::set<int> train_groups, test_groups;
    for (auto r : grouped.train)
      train_groups.insert(t.groups[static_cast<std::size_t>(r)]);
    for (auto r : grouped.test)
      test_groups.insert(t.groups[static_cast<std::size_t>(r)]);
    for (int g : test_groups)
      CHECK(train_groups.count(g) == 0);

    const auto folds = assign_folds(300, 5, 3, &t.groups);
    for (std::size_t i = 0; i < 300; ++i)
      for (std::size_t j = i + 1; j < 300; ++j)
        if (t.groups[i] == t.groups[j])
          CHECK(folds[i] == folds[j]);
    const auto plain = assign_folds(300, 5, 3);
    for (int f = 0; f < 5; ++f)
      CHECK(std::count(plain.begin(), plain.end(), f) == 60);
  }

  TEST_CASE("grid search")
  {
    const FeatureTable t = grouped_table(240, 3);
    ParamGrid one;
    one.n_estimators = {15};
    one.max_depth = {4};
    const auto single = grid_search(t, one, 3, 5);
    REQUIRE(single.points.size() == 1);
    CHECK(single.best.n_estimators == 15);
    CHECK(single.best.max_depth == 4);

    ParamGrid super = one;
    super.max_depth = {4, std::nullopt};
    super.max_features = {MaxFeatures::all, MaxFeatures::sqrt};
    const auto wide = grid_search(t, super, 3, 5);
    CHECK(wide.points.size() == 4);
    double best = -1e300;
    for (const auto& p : wide.points)
      best = std::max(best, p.mean_r2);
    CHECK(best >= single.points.front().mean_r2);
    const auto repeat = grid_search(t, super, 3, 5);
    for (std::size_t i = 0; i < wide.points.size(); ++i)
      CHECK(repeat.points[i].mean_r2 == wide.points[i].mean_r2);
    CHECK_NOTHROW(grid_search(t, super, 3, 5, true));
  }

  TEST_CASE("correlation matrix")
  {
    FeatureTable t = grouped_table(100, 4);
    t.features.col(3).setConstant(2.0);
    const auto c = correlation_matrix(t);
    const auto k = static_cast<Eigen::Index>(c.names.size());
    CHECK(k == 5);
    CHECK((c.values - c.values.transpose()).cwiseAbs().maxCoeff() == 0.0);
    for (Eigen::Index i = 0; i < k; ++i) {
      if (!c.constant[static_cast<std::size_t>(i)])
        CHECK(c.values(i, i) == doctest::Approx(1.0));
    }
    CHECK(c.constant[3]);
    for (Eigen::Index j = 0; j < k; ++j)
      if (j != 3)
        CHECK(c.values(3, j) == 0.0);
    CHECK(c.values.cwiseAbs().maxCoeff() <= 1.0);
    CHECK(c.values(0, 1) == doctest::Approx(pearson(t.features.col(0), t.features.col(1))).epsilon(1e-12));
  }

  TEST_CASE("model round trip through JSON")
  {
    const FeatureTable t = grouped_table(150, 5);
    ForestParams params;
    params.n_estimators = 7;
    params.max_depth = 6;
    params.max_features = MaxFeatures::sqrt;
    params.seed = 99;
    const auto m = fit_forest(t, params);
    const auto path = std::filesystem::temp_directory_path() / "fracnet_forest_roundtrip.json";
    write_forest(m, path);
    const auto back = read_forest(path);
    std::filesystem::remove(path);
    CHECK(back.feature_names == m.feature_names);
    CHECK(back.bootstrap == m.bootstrap);
    CHECK(back.params.max_depth == m.params.max_depth);
    CHECK(back.params.max_features == m.params.max_features);
    CHECK((predict(back, t.features) - predict(m, t.features)).cwiseAbs().maxCoeff() == 0.0);
  }
}
