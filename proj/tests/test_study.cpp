#include "fracnet/study.hpp"

#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <regex>
#include <set>
#include <sstream>

using namespace fracnet;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& path)
{
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path scratch(const std::string& name)
{
  const fs::path dir = fs::temp_directory_path() / ("fracnet_test_" + name);
  fs::remove_all(dir);
  return dir;
}

StudyConfig small_study(const fs::path& out)
{
  StudyConfig c = StudyConfig::parse(R"(
# two networks, four rates
target_p32 = 1.0
n_networks = 2
seed = 5
base_n_estimators = 5
opt_n_estimators = 20
importance_repeats = 1
)");
  c.output_dir = out;
  return c;
}

std::vector<std::string> csv_column(const fs::path& path, std::size_t col)
{
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  std::vector<std::string> out;
  while (std::getline(in, line)) {
    std::stringstream s(line);
    std::string cell;
    for (std::size_t i = 0; i <= col; ++i)
      std::getline(s, cell, ',');
    out.push_back(cell);
  }
  return out;
}

} // namespace

TEST_SUITE("study")
{
  TEST_CASE("config parsing")
  {
    const StudyConfig d;
    CHECK(d.rate_constants == std::vector<double>{1e-9, 1e-10, 1e-11, 1e-12});
    CHECK(d.optimized_forest.n_estimators == 1000);
    CHECK(d.optimized_forest.max_depth == 30);
    CHECK(d.optimized_forest.max_features == MaxFeatures::sqrt);
    CHECK(d.base_forest.n_estimators == 10);
    CHECK_FALSE(d.base_forest.max_depth.has_value());
    CHECK(d.base_forest.min_samples_split == 2);

    const auto c = StudyConfig::parse("n_networks = 3  # comment\nrate_constants = 1e-9, 1e-12\n\nopt_max_depth = none\n");
    CHECK(c.n_networks == 3);
    CHECK(c.rate_constants == std::vector<double>{1e-9, 1e-12});
    CHECK_FALSE(c.optimized_forest.max_depth.has_value());

    CHECK_THROWS(StudyConfig::parse("no_such_key = 1\n"));
    CHECK_THROWS(StudyConfig::parse("n_networks = many\n"));
    CHECK_THROWS(StudyConfig::parse("n_networks = 0\n"));
    CHECK_THROWS(StudyConfig::parse("rate_constants = \n"));
    CHECK_THROWS(StudyConfig::parse("just text\n"));

    // The canonical text parses back to itself.
    const auto back = StudyConfig::parse(c.canonical());
    CHECK(back.canonical() == c.canonical());
  }

  TEST_CASE("hashes track the settings they cover")
  {
    StudyConfig a;
    StudyConfig b = a;
    b.optimized_forest.n_estimators = 7;
    CHECK(a.simulation_hash() == b.simulation_hash());
    CHECK(a.dataset_hash() == b.dataset_hash());
    b.controls.qss_tol = 1e-5;
    CHECK(a.simulation_hash() != b.simulation_hash());
    CHECK(a.dataset_hash() != b.dataset_hash());
    CHECK(fnv1a_hex("") == "cbf29ce484222325");
    CHECK(fnv1a_hex("a") == "af63dc4c8601ec8c");
  }

  TEST_CASE("environment overrides")
  {
    StudyConfig c;
    ::setenv("FRACNET_OUT_DIR", "/tmp/fracnet_env_dir", 1);
    ::setenv("FRACNET_WORKERS", "3", 1);
    c.apply_environment();
    ::unsetenv("FRACNET_OUT_DIR");
    ::unsetenv("FRACNET_WORKERS");
    CHECK(c.output_dir == fs::path("/tmp/fracnet_env_dir"));
    CHECK(c.workers == 3);
  }

  TEST_CASE("small ensemble, rerun determinism and training")
  {
    const fs::path out = scratch("ensemble");
    const StudyConfig config = small_study(out);
    const auto first = run_ensemble(config);
    REQUIRE(first.network_ids.size() == 2);
    CHECK(first.simulations.size() == 8);
    CHECK(first.failures() == 0);

    std::size_t fractures = 0;
    for (int id : first.network_ids)
      fractures += csv_column(network_dir(config, id) / "features.csv", 0).size();
    CHECK(first.dataset_rows == fractures * 4);
    for (const auto& s : first.simulations) {
      CHECK(s.ok);
      CHECK(s.ledger_error <= 0.01);
      CHECK(fs::exists(simulation_dir(config, s.network_id, s.rate_constant) / "result.csv"));
      CHECK(fs::exists(simulation_dir(config, s.network_id, s.rate_constant) / "history.csv"));
    }

    const std::string digest = fnv1a_hex(slurp(first.dataset_path));
    const auto second = run_ensemble(config);
    CHECK(fnv1a_hex(slurp(second.dataset_path)) == digest);
    for (const auto& s : second.simulations)
      CHECK(s.reused);

    const Dataset data = read_dataset_csv(first.dataset_path);
    CHECK(static_cast<std::size_t>(data.rows()) == first.dataset_rows);
    CHECK(data.config_hash == config.dataset_hash());
    CHECK(data.rate_constants().size() == 4);
    CHECK((data.table.target.array() >= 0.0).all());
    CHECK((data.table.target.array() <= 1.0).all());

    // A fresh directory reproduces the dataset byte for byte.
    StudyConfig again = config;
    again.output_dir = scratch("ensemble_again");
    again.workers = 2;
    CHECK(fnv1a_hex(slurp(run_ensemble(again).dataset_path)) == digest);
    fs::remove_all(again.output_dir);

    const StudyReport report = train_models(data, config);
    const auto* rf1 = report.find("RF-1", "optimized");
    const auto* rf2 = report.find("RF-2", "optimized");
    const auto* rf3 = report.find("RF-3", "optimized");
    REQUIRE(rf1);
    REQUIRE(rf2);
    REQUIRE(rf3);
    REQUIRE(report.find("RF-3", "base"));
    const std::set<std::string> s1(rf1->features.begin(), rf1->features.end());
    const std::set<std::string> s2(rf2->features.begin(), rf2->features.end());
    const std::set<std::string> s3(rf3->features.begin(), rf3->features.end());
    CHECK(std::includes(s2.begin(), s2.end(), s1.begin(), s1.end()));
    CHECK(std::includes(s3.begin(), s3.end(), s2.begin(), s2.end()));
    CHECK(s1.size() < s2.size());
    CHECK(s2.size() < s3.size());
    int per_rate = 0;
    for (const auto& m : report.models)
      per_rate += m.rate_constant ? 1 : 0;
    CHECK(per_rate == 4);
    CHECK(report.config_hash == config.dataset_hash());

    // Same seeds give the same scores.
    const StudyReport repeat = train_models(data, config);
    CHECK(repeat.find("RF-3", "optimized")->r2_test == rf3->r2_test);

    const fs::path dir = out / "report";
    write_report(report, dir);
    CHECK(fs::exists(dir / "summary.txt"));
    CHECK(fs::exists(dir / "model_scores.csv"));
    CHECK(fs::exists(dir / "correlation.svg"));
    for (const auto& m : report.models)
      if (m.rate_constant) {
        const fs::path path = dir / ("scatter_" + std::regex_replace(m.name, std::regex("="), "_") + "_" + m.variant + ".svg");
        REQUIRE(fs::exists(path));
        const std::string svg = slurp(path);
        CHECK(svg.find("train") != std::string::npos);
        CHECK(svg.find("test") != std::string::npos);
      }

    // Bars appear in the CSV ranking order.
    const std::string stem = "RF-3_optimized";
    const auto ranked = csv_column(dir / ("importance_" + stem + ".csv"), 1);
    const std::string svg = slurp(dir / ("importance_" + stem + ".svg"));
    std::vector<std::string> bars;
    const std::regex title("<title>([A-Za-z_]+) ");
    for (auto it = std::sregex_iterator(svg.begin(), svg.end(), title); it != std::sregex_iterator(); ++it)
      bars.push_back((*it)[1]);
    CHECK(bars == ranked);

    const fs::path json = out / "study.json";
    write_study_json(report, json);
    const StudyReport back = read_study_json(json);
    REQUIRE(back.models.size() == report.models.size());
    for (std::size_t i = 0; i < back.models.size(); ++i) {
      CHECK(back.models[i].name == report.models[i].name);
      CHECK(back.models[i].r2_test == report.models[i].r2_test);
      CHECK(back.models[i].oob == report.models[i].oob);
      CHECK(back.models[i].importance.ranking() == report.models[i].importance.ranking());
      CHECK((back.models[i].p_test - report.models[i].p_test).cwiseAbs().maxCoeff() == 0.0);
    }
    CHECK(back.config_hash == report.config_hash);
    fs::remove_all(out);
  }

  TEST_CASE("assembly without simulations reports failures")
  {
    const fs::path out = scratch("assemble");
    StudyConfig config = small_study(out);
    config.n_networks = 1;
    const auto gen = run_ensemble(config, EnsembleStage::generate);
    CHECK(gen.simulations.empty());
    const auto assembled = run_ensemble(config, EnsembleStage::assemble);
    CHECK(assembled.failures() == 4);
    for (const auto& s : assembled.simulations)
      CHECK(s.error == "no simulation result");
    fs::remove_all(out);
  }

  TEST_CASE("an empty study writes only the summary")
  {
    const fs::path dir = scratch("empty_report");
    write_report(StudyReport{}, dir);
    std::size_t files = 0;
    for (const auto& e : fs::directory_iterator(dir)) {
      ++files;
      CHECK(e.path().filename() == "summary.txt");
    }
    CHECK(files == 1);
    fs::remove_all(dir);
  }
}
