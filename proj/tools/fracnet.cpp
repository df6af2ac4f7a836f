// fracnet: fracture-network dissolution study driver.

#include "fracnet/dataset.hpp"
#include "fracnet/graph.hpp"
#include "fracnet/network_io.hpp"
#include "fracnet/study.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using namespace fracnet;

namespace {

constexpr int kOk = 0;
constexpr int kFatal = 1;
constexpr int kPartial = 2;

struct Common {
  std::string config;
  std::string out;
  int workers = 0;
  std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, Common& c)
{
  cmd->add_option("-c,--config", c.config, "key = value config file")->check(CLI::ExistingFile);
  cmd->add_option("-o,--out", c.out, "output directory (overrides config and FRACNET_OUT_DIR)");
  cmd->add_option("-j,--workers", c.workers, "worker threads (overrides config and FRACNET_WORKERS)");
  cmd->add_option("--set", c.overrides, "extra key=value settings, applied after the file");
}

StudyConfig load_config(const Common& c)
{
  StudyConfig config = c.config.empty() ? StudyConfig{} : StudyConfig::load(c.config);
  for (const auto& kv : c.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("--set expects key=value, got " + kv);
    config.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  config.apply_environment();
  if (!c.out.empty())
    config.output_dir = c.out;
  if (c.workers > 0)
    config.workers = c.workers;
  config.validate();
  return config;
}

void save_config(const StudyConfig& config)
{
  fs::create_directories(config.output_dir);
  std::ofstream out(config.output_dir / "config.txt");
  out << config.canonical();
}

int ensemble_status(const EnsembleSummary& s, EnsembleStage stage)
{
  std::cout << s.network_ids.size() << " networks";
  if (!s.skipped_seeds.empty())
    std::cout << ", " << s.skipped_seeds.size() << " non-percolating seeds skipped";
  if (stage != EnsembleStage::generate)
    std::cout << ", " << s.simulations.size() << " simulations (" << s.failures() << " failed)";
  if (!s.dataset_path.empty())
    std::cout << ", " << s.dataset_rows << " rows in " << s.dataset_path.string();
  std::cout << '\n';
  return s.failures() > 0 ? kPartial : kOk;
}

// One network from an explicit seed.
int generate_one(const StudyConfig& config, std::uint64_t seed, const fs::path& out)
{
  const auto outcome = generate_network(config.generation, seed);
  fs::create_directories(out);
  if (!outcome.network) {
    std::cerr << "seed " << seed << ": no inlet-outlet cluster after pruning (" << outcome.fractures_before_pruning
              << " fractures, P32 " << outcome.p32_before_pruning << ")\n";
    return kPartial;
  }
  FractureNetwork network = *outcome.network;
  const auto features = compute_network_features(network, config.hydro(), config.include_terminals, config.viscosity);
  write_network(network, out / "network.json");
  write_edge_list(to_graph(network), out / "graph.txt");
  write_network_features_csv(features, out / "features.csv");
  std::cout << "seed " << seed << ": " << network.fractures.size() << " fractures, " << network.intersections.size()
            << " intersections, P32 " << network.p32_achieved << " -> " << out.string() << '\n';
  return kOk;
}

// One simulation of an existing network file.
int simulate_one(const StudyConfig& config, const fs::path& network_file, double k, const fs::path& out)
{
  const FractureNetwork network = read_network(network_file);
  ReactiveSimulation sim(network, k, config.chemistry, config.law, config.controls, config.viscosity);
  const auto result = sim.run_to_quasi_steady();
  fs::create_directories(out);
  write_result_csv(out / "result.csv", network, sim.state());
  write_history_csv(out / "history.csv", sim.state());
  const auto& s = sim.state();
  std::cout << "k=" << k << ": " << result.steps << " steps, t=" << s.time / kSecondsPerYear << " yr, "
            << (result.reached_quasi_steady ? "quasi-steady" : "horizon reached") << ", ledger error "
            << s.ledger.cumulative_error() << ", remaining " << sim.remaining_fractions().mean() << " (mean)\n";
  return kOk;
}

int train(const StudyConfig& config, const fs::path& dataset_path)
{
  const Dataset data = read_dataset_csv(dataset_path);
  if (!data.config_hash.empty() && data.config_hash != config.dataset_hash())
    std::cerr << "warning: " << dataset_path.string() << " was built with a different configuration\n";
  const StudyReport report = train_models(data, config);
  write_study_json(report, config.output_dir / "study.json");
  for (const auto& m : report.models)
    std::printf("%-10s %-9s train %.4f  test %.4f  oob %.4f\n", m.name.c_str(), m.variant.c_str(), m.r2_train,
                m.r2_test, m.oob);
  for (const auto& s : report.skipped)
    std::cerr << "skipped " << s << '\n';
  return report.skipped.empty() ? kOk : kPartial;
}

int report(const StudyConfig& config)
{
  const StudyReport r = read_study_json(config.output_dir / "study.json");
  write_report(r, config.output_dir / "report");
  std::cout << "report written to " << (config.output_dir / "report").string() << '\n';
  return kOk;
}

} // namespace

int main(int argc, char** argv)
{
  CLI::App app{"Quartz dissolution in discrete fracture networks"};
  app.require_subcommand(1);

  Common gen_opts, sim_opts, feat_opts, train_opts, report_opts, all_opts;
  std::optional<std::uint64_t> gen_seed;
  std::string sim_network, sim_out, dataset_path;
  std::optional<double> sim_rate;

  auto* gen = app.add_subcommand("generate", "generate the network ensemble, or one network with --seed");
  add_common(gen, gen_opts);
  gen->add_option("--seed", gen_seed, "generate a single network from this seed into --out");

  auto* sim = app.add_subcommand("simulate", "generate and simulate the ensemble, or one network");
  add_common(sim, sim_opts);
  sim->add_option("--network", sim_network, "simulate this network.json only")->check(CLI::ExistingFile);
  sim->add_option("--rate", sim_rate, "rate constant for --network (mol/m^2/s)");

  auto* feat = app.add_subcommand("features", "assemble dataset.csv from simulation results");
  add_common(feat, feat_opts);

  auto* tr = app.add_subcommand("train", "fit the random-forest models on dataset.csv");
  add_common(tr, train_opts);
  tr->add_option("--dataset", dataset_path, "dataset CSV (default <out>/dataset.csv)")->check(CLI::ExistingFile);

  auto* rep = app.add_subcommand("report", "write tables and plots from study.json");
  add_common(rep, report_opts);

  auto* all = app.add_subcommand("all", "generate, simulate, assemble, train and report");
  add_common(all, all_opts);

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      const StudyConfig config = load_config(gen_opts);
      if (gen_seed) {
        if (gen_opts.out.empty())
          throw std::invalid_argument("--seed needs --out");
        return generate_one(config, *gen_seed, gen_opts.out);
      }
      save_config(config);
      return ensemble_status(run_ensemble(config, EnsembleStage::generate), EnsembleStage::generate);
    }
    if (sim->parsed()) {
      const StudyConfig config = load_config(sim_opts);
      if (!sim_network.empty()) {
        if (sim_opts.out.empty())
          throw std::invalid_argument("--network needs --out");
        return simulate_one(config, sim_network, sim_rate.value_or(config.rate_constants.front()), sim_opts.out);
      }
      save_config(config);
      return ensemble_status(run_ensemble(config, EnsembleStage::simulate), EnsembleStage::simulate);
    }
    if (feat->parsed()) {
      const StudyConfig config = load_config(feat_opts);
      save_config(config);
      return ensemble_status(run_ensemble(config, EnsembleStage::assemble), EnsembleStage::assemble);
    }
    if (tr->parsed()) {
      const StudyConfig config = load_config(train_opts);
      save_config(config);
      return train(config, dataset_path.empty() ? config.output_dir / "dataset.csv" : fs::path(dataset_path));
    }
    if (rep->parsed())
      return report(load_config(report_opts));
    if (all->parsed()) {
      const StudyConfig config = load_config(all_opts);
      save_config(config);
      const int ensemble = ensemble_status(run_ensemble(config), EnsembleStage::all);
      const int trained = train(config, config.output_dir / "dataset.csv");
      const int reported = report(config);
      return std::max({ensemble, trained, reported});
    }
  } catch (const std::exception& e) {
    std::cerr << "fracnet: " << e.what() << '\n';
    return kFatal;
  }
  return kFatal;
}
