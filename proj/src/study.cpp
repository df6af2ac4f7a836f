#include "fracnet/study.hpp"

#include "fracnet/graph.hpp"
#include "fracnet/network_io.hpp"
#include "fracnet/parallel.hpp"
#include "fracnet/rng.hpp"
#include "fracnet/stats.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <stdexcept>

namespace fracnet {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

std::string trim(const std::string& s)
{
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos)
    return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::string fmt(double v)
{
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double to_double(const std::string& key, const std::string& v)
{
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size())
      throw std::invalid_argument(v);
    return d;
  } catch (const std::logic_error&) {
    throw std::invalid_argument("config key " + key + ": not a number: " + v);
  }
}

long long to_integer(const std::string& key, const std::string& v)
{
  try {
    std::size_t used = 0;
    const long long i = std::stoll(v, &used);
    if (used != v.size())
      throw std::invalid_argument(v);
    return i;
  } catch (const std::logic_error&) {
    throw std::invalid_argument("config key " + key + ": not an integer: " + v);
  }
}

bool to_bool(const std::string& key, const std::string& v)
{
  if (v == "true" || v == "1" || v == "yes")
    return true;
  if (v == "false" || v == "0" || v == "no")
    return false;
  throw std::invalid_argument("config key " + key + ": not a boolean: " + v);
}

std::vector<std::string> to_list(const std::string& v)
{
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!trim(item).empty())
      out.push_back(trim(item));
  return out;
}

std::optional<int> to_depth(const std::string& key, const std::string& v)
{
  if (v == "none" || v == "None" || v == "null")
    return std::nullopt;
  return static_cast<int>(to_integer(key, v));
}

std::string depth_text(const std::optional<int>& d) { return d ? std::to_string(*d) : "none"; }

// Applies forest keys with the given prefix ("base_" or "opt_").
bool set_forest(ForestParams& p, const std::string& key, const std::string& v)
{
  if (key == "n_estimators")
    p.n_estimators = static_cast<int>(to_integer(key, v));
  else if (key == "max_depth")
    p.max_depth = to_depth(key, v);
  else if (key == "max_features")
    p.max_features = parse_max_features(v);
  else if (key == "min_samples_leaf")
    p.min_samples_leaf = static_cast<int>(to_integer(key, v));
  else if (key == "min_samples_split") {
    p.min_samples_split = static_cast<int>(to_integer(key, v));
    if (p.min_samples_split < 2) {
      std::cerr << "warning: min_samples_split " << v << " clamped to 2\n";
      p.min_samples_split = 2;
    }
  } else
    return false;
  return true;
}

std::string forest_text(const std::string& prefix, const ForestParams& p)
{
  std::ostringstream out;
  out << prefix << "n_estimators = " << p.n_estimators << '\n'
      << prefix << "max_depth = " << depth_text(p.max_depth) << '\n'
      << prefix << "max_features = " << to_string(p.max_features) << '\n'
      << prefix << "min_samples_leaf = " << p.min_samples_leaf << '\n'
      << prefix << "min_samples_split = " << p.min_samples_split << '\n';
  return out.str();
}

template <typename T, typename F>
std::string join(const std::vector<T>& items, F&& show)
{
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i)
    out += (i ? "," : "") + show(items[i]);
  return out;
}

std::string rate_tag(double k)
{
  char buf[32];
  std::snprintf(buf, sizeof buf, "k%.3g", k);
  return buf;
}

void write_text_atomically(const fs::path& path, const std::string& text)
{
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp);
    if (!out)
      throw std::runtime_error("cannot write " + tmp.string());
    out << text;
  }
  fs::rename(tmp, path);
}

std::optional<nlohmann::json> read_json(const fs::path& path)
{
  std::ifstream in(path);
  if (!in)
    return std::nullopt;
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception&) {
    return std::nullopt;
  }
}

} // namespace

std::string fnv1a_hex(const std::string& text)
{
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

StudyConfig::StudyConfig()
{
  generation.target_p32 = 1.0;

  base_forest.n_estimators = 10;
  base_forest.max_depth = std::nullopt;
  base_forest.max_features = MaxFeatures::all;
  base_forest.min_samples_leaf = 2;
  base_forest.min_samples_split = 2;

  optimized_forest.n_estimators = 1000;
  optimized_forest.max_depth = 30;
  optimized_forest.max_features = MaxFeatures::sqrt;
  optimized_forest.min_samples_leaf = 2;
  optimized_forest.min_samples_split = 2;

  grid.n_estimators = {100};
  grid.max_depth = {10, 30};
  grid.max_features = {MaxFeatures::all, MaxFeatures::sqrt, MaxFeatures::log2};
  grid.min_samples_leaf = {1, 2};
  grid.min_samples_split = {2};
}

void StudyConfig::set(const std::string& key, const std::string& v)
{
  auto& g = generation;
  if (key == "side_length")
    g.side_length = to_double(key, v);
  else if (key == "radius")
    g.radius = to_double(key, v);
  else if (key == "target_p32")
    g.target_p32 = to_double(key, v);
  else if (key == "aperture")
    g.aperture = to_double(key, v);
  else if (key == "margin")
    g.margin = to_double(key, v);
  else if (key == "polygon_sides")
    g.polygon_sides = static_cast<int>(to_integer(key, v));
  else if (key == "n_networks")
    n_networks = static_cast<int>(to_integer(key, v));
  else if (key == "seed")
    seed = static_cast<std::uint64_t>(to_integer(key, v));
  else if (key == "include_terminals")
    include_terminals = to_bool(key, v);
  else if (key == "rate_constants") {
    rate_constants.clear();
    for (const auto& item : to_list(v))
      rate_constants.push_back(to_double(key, item));
  } else if (key == "rate_constant")
    rate_constants = {to_double(key, v)};
  else if (key == "log10_k_eq")
    chemistry.equilibrium_constant = std::pow(10.0, to_double(key, v));
  else if (key == "specific_surface_area")
    chemistry.specific_surface_area = to_double(key, v);
  else if (key == "quartz_density")
    chemistry.quartz_density = to_double(key, v);
  else if (key == "molar_volume")
    chemistry.molar_volume = to_double(key, v);
  else if (key == "diffusion")
    chemistry.diffusion = to_double(key, v);
  else if (key == "inflow_silica")
    chemistry.inflow_silica = to_double(key, v);
  else if (key == "initial_porosity")
    chemistry.initial_porosity = to_double(key, v);
  else if (key == "perm_a")
    law.exponent = to_double(key, v);
  else if (key == "perm_phi_c")
    law.critical_porosity = to_double(key, v);
  else if (key == "perm_f_min")
    law.f_min = to_double(key, v);
  else if (key == "area_exponent")
    law.n = to_double(key, v);
  else if (key == "n_prime")
    law.n_prime = to_double(key, v);
  else if (key == "horizon_years")
    controls.horizon_years = to_double(key, v);
  else if (key == "qss_tol")
    controls.qss_tol = to_double(key, v);
  else if (key == "qss_window")
    controls.qss_window = static_cast<int>(to_integer(key, v));
  else if (key == "qss_full_steps_only")
    controls.qss_full_steps_only = to_bool(key, v);
  else if (key == "max_loss_fraction")
    controls.max_loss_fraction = to_double(key, v);
  else if (key == "max_dt_years")
    controls.max_dt_years = to_double(key, v);
  else if (key == "flow_refresh_tol")
    controls.flow_refresh_tol = to_double(key, v);
  else if (key == "viscosity")
    viscosity = to_double(key, v);
  else if (key.rfind("base_", 0) == 0 && set_forest(base_forest, key.substr(5), v))
    return;
  else if (key.rfind("opt_", 0) == 0 && set_forest(optimized_forest, key.substr(4), v))
    return;
  else if (key == "grid_search")
    run_grid_search = to_bool(key, v);
  else if (key == "grid_n_estimators") {
    grid.n_estimators.clear();
    for (const auto& item : to_list(v))
      grid.n_estimators.push_back(static_cast<int>(to_integer(key, item)));
  } else if (key == "grid_max_depth") {
    grid.max_depth.clear();
    for (const auto& item : to_list(v))
      grid.max_depth.push_back(to_depth(key, item));
  } else if (key == "grid_max_features") {
    grid.max_features.clear();
    for (const auto& item : to_list(v))
      grid.max_features.push_back(parse_max_features(item));
  } else if (key == "grid_min_samples_leaf") {
    grid.min_samples_leaf.clear();
    for (const auto& item : to_list(v))
      grid.min_samples_leaf.push_back(static_cast<int>(to_integer(key, item)));
  } else if (key == "grid_min_samples_split") {
    grid.min_samples_split.clear();
    for (const auto& item : to_list(v))
      grid.min_samples_split.push_back(static_cast<int>(to_integer(key, item)));
  } else if (key == "cv_folds")
    cv_folds = static_cast<int>(to_integer(key, v));
  else if (key == "split_mode") {
    if (v == "fracture")
      split_by_network = false;
    else if (v == "network")
      split_by_network = true;
    else
      throw std::invalid_argument("split_mode must be fracture or network");
  } else if (key == "train_fraction")
    train_fraction = to_double(key, v);
  else if (key == "importance_repeats")
    importance_repeats = static_cast<int>(to_integer(key, v));
  else if (key == "forest_seed")
    forest_seed = static_cast<std::uint64_t>(to_integer(key, v));
  else if (key == "output_dir")
    output_dir = v;
  else if (key == "workers")
    workers = static_cast<int>(to_integer(key, v));
  else
    throw std::invalid_argument("unknown config key: " + key);
}

StudyConfig StudyConfig::parse(const std::string& text)
{
  StudyConfig config;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos)
      line.erase(hash);
    line = trim(line);
    if (line.empty())
      continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config line " + std::to_string(line_no) + ": expected key = value");
    config.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  config.validate();
  return config;
}

StudyConfig StudyConfig::load(const fs::path& path)
{
  std::ifstream in(path);
  if (!in)
    throw std::runtime_error("cannot read config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

void StudyConfig::apply_environment()
{
  if (const char* dir = std::getenv("FRACNET_OUT_DIR"); dir && *dir)
    output_dir = dir;
  if (const char* w = std::getenv("FRACNET_WORKERS"); w && *w)
    workers = static_cast<int>(to_integer("FRACNET_WORKERS", w));
}

void StudyConfig::validate() const
{
  if (rate_constants.empty())
    throw std::invalid_argument("rate_constants must not be empty");
  for (double k : rate_constants)
    if (!(k >= 0.0))
      throw std::invalid_argument("rate constants must be non-negative");
  if (n_networks < 1)
    throw std::invalid_argument("n_networks must be at least 1");
  if (workers < 1)
    throw std::invalid_argument("workers must be at least 1");
  if (!(generation.side_length > 0.0) || !(generation.radius > 0.0) || !(generation.aperture > 0.0) ||
      !(generation.target_p32 > 0.0) || generation.margin < 0.0)
    throw std::invalid_argument("generation parameters must be positive");
  if (!(chemistry.initial_porosity > 0.0 && chemistry.initial_porosity < 1.0))
    throw std::invalid_argument("initial_porosity must be in (0,1)");
  if (!(controls.horizon_years > 0.0) || !(controls.max_dt_years > 0.0) || controls.qss_window < 1)
    throw std::invalid_argument("invalid simulation controls");
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw std::invalid_argument("train_fraction must be in (0,1)");
  if (cv_folds < 2)
    throw std::invalid_argument("cv_folds must be at least 2");
  if (importance_repeats < 1)
    throw std::invalid_argument("importance_repeats must be at least 1");
  base_forest.validate();
  optimized_forest.validate();
}

namespace {

std::string simulation_text(const StudyConfig& c)
{
  const auto& g = c.generation;
  const auto& ch = c.chemistry;
  std::ostringstream out;
  out << "side_length = " << fmt(g.side_length) << '\n'
      << "radius = " << fmt(g.radius) << '\n'
      << "target_p32 = " << fmt(g.target_p32) << '\n'
      << "aperture = " << fmt(g.aperture) << '\n'
      << "margin = " << fmt(g.margin) << '\n'
      << "polygon_sides = " << g.polygon_sides << '\n'
      << "log10_k_eq = " << fmt(std::log10(ch.equilibrium_constant)) << '\n'
      << "specific_surface_area = " << fmt(ch.specific_surface_area) << '\n'
      << "quartz_density = " << fmt(ch.quartz_density) << '\n'
      << "molar_volume = " << fmt(ch.molar_volume) << '\n'
      << "diffusion = " << fmt(ch.diffusion) << '\n'
      << "inflow_silica = " << fmt(ch.inflow_silica) << '\n'
      << "initial_porosity = " << fmt(ch.initial_porosity) << '\n'
      << "perm_a = " << fmt(c.law.exponent) << '\n'
      << "perm_phi_c = " << fmt(c.law.critical_porosity) << '\n'
      << "perm_f_min = " << fmt(c.law.f_min) << '\n'
      << "area_exponent = " << fmt(c.law.n) << '\n'
      << "n_prime = " << fmt(c.law.n_prime) << '\n'
      << "horizon_years = " << fmt(c.controls.horizon_years) << '\n'
      << "qss_tol = " << fmt(c.controls.qss_tol) << '\n'
      << "qss_window = " << c.controls.qss_window << '\n'
      << "qss_full_steps_only = " << (c.controls.qss_full_steps_only ? "true" : "false") << '\n'
      << "max_loss_fraction = " << fmt(c.controls.max_loss_fraction) << '\n'
      << "max_dt_years = " << fmt(c.controls.max_dt_years) << '\n'
      << "flow_refresh_tol = " << fmt(c.controls.flow_refresh_tol) << '\n'
      << "viscosity = " << fmt(c.viscosity) << '\n';
  return out.str();
}

std::string dataset_text(const StudyConfig& c)
{
  std::ostringstream out;
  out << simulation_text(c) << "n_networks = " << c.n_networks << '\n'
      << "seed = " << c.seed << '\n'
      << "include_terminals = " << (c.include_terminals ? "true" : "false") << '\n'
      << "rate_constants = " << join(c.rate_constants, fmt) << '\n';
  return out.str();
}

} // namespace

std::string StudyConfig::canonical() const
{
  std::ostringstream out;
  out << dataset_text(*this) << forest_text("base_", base_forest) << forest_text("opt_", optimized_forest)
      << "grid_search = " << (run_grid_search ? "true" : "false") << '\n'
      << "grid_n_estimators = " << join(grid.n_estimators, [](int v) { return std::to_string(v); }) << '\n'
      << "grid_max_depth = " << join(grid.max_depth, depth_text) << '\n'
      << "grid_max_features = " << join(grid.max_features, [](MaxFeatures m) { return to_string(m); }) << '\n'
      << "grid_min_samples_leaf = " << join(grid.min_samples_leaf, [](int v) { return std::to_string(v); }) << '\n'
      << "grid_min_samples_split = " << join(grid.min_samples_split, [](int v) { return std::to_string(v); }) << '\n'
      << "cv_folds = " << cv_folds << '\n'
      << "split_mode = " << (split_by_network ? "network" : "fracture") << '\n'
      << "train_fraction = " << fmt(train_fraction) << '\n'
      << "importance_repeats = " << importance_repeats << '\n'
      << "forest_seed = " << forest_seed << '\n'
      << "output_dir = " << output_dir.string() << '\n'
      << "workers = " << workers << '\n';
  return out.str();
}

std::string StudyConfig::simulation_hash() const { return fnv1a_hex(simulation_text(*this)); }
std::string StudyConfig::dataset_hash() const { return fnv1a_hex(dataset_text(*this)); }

HydroConstants StudyConfig::hydro() const
{
  HydroConstants h;
  h.diffusion = chemistry.diffusion;
  h.molar_volume = chemistry.molar_volume;
  return h;
}

std::size_t EnsembleSummary::failures() const
{
  return static_cast<std::size_t>(
      std::count_if(simulations.begin(), simulations.end(), [](const SimulationRecord& r) { return !r.ok; }));
}

std::uint64_t network_seed(const StudyConfig& config, int index)
{
  return derive_seed(config.seed, static_cast<std::uint64_t>(index));
}

fs::path network_dir(const StudyConfig& config, int network_id)
{
  char buf[32];
  std::snprintf(buf, sizeof buf, "net_%04d", network_id);
  return config.output_dir / "networks" / buf;
}

fs::path simulation_dir(const StudyConfig& config, int network_id, double rate_constant)
{
  char buf[64];
  std::snprintf(buf, sizeof buf, "net_%04d_%s", network_id, rate_tag(rate_constant).c_str());
  return config.output_dir / "simulations" / buf;
}

namespace {

struct NetworkJob {
  int id = 0;
  std::uint64_t seed = 0;
  std::optional<FractureNetwork> network;
  NetworkFeatures features;
};

// Reuses network.json when its recorded hash matches, else generates.
NetworkJob prepare_network(const StudyConfig& config, int id, const std::string& hash, std::mutex& log)
{
  NetworkJob job;
  job.id = id;
  job.seed = network_seed(config, id);
  const fs::path dir = network_dir(config, id);
  const auto meta = read_json(dir / "meta.json");
  if (meta && meta->value("config_hash", "") == hash && meta->value("seed", std::uint64_t{0}) == job.seed) {
    if (!meta->value("percolating", false))
      return job;
    job.network = read_network(dir / "network.json");
  } else {
    const auto outcome = generate_network(config.generation, job.seed);
    fs::create_directories(dir);
    nlohmann::json m = {{"config_hash", hash},
                        {"seed", job.seed},
                        {"network_id", id},
                        {"percolating", !outcome.disconnected()},
                        {"fractures_before_pruning", outcome.fractures_before_pruning},
                        {"p32_before_pruning", outcome.p32_before_pruning}};
    if (outcome.network) {
      write_network(*outcome.network, dir / "network.json");
      m["fractures"] = outcome.network->fractures.size();
      m["p32"] = outcome.network->p32_achieved;
    }
    write_text_atomically(dir / "meta.json", m.dump(1));
    if (!outcome.network) {
      std::lock_guard<std::mutex> lock(log);
      std::cerr << "[ensemble] seed " << job.seed << " (network " << id << ") has no inlet-outlet cluster, skipped\n";
      return job;
    }
    job.network = *outcome.network;
  }
  job.features = compute_network_features(*job.network, config.hydro(), config.include_terminals, config.viscosity);
  const NetworkGraph graph = to_graph(*job.network);
  write_edge_list(graph, dir / "graph.txt");
  write_network_features_csv(job.features, dir / "features.csv");
  const FlowSolution flow = solve_flow(build_pipe_model(*job.network, config.viscosity), job.features.total_rate);
  write_flow_csv(dir / "flow.csv", *job.network, flow, hydro_features(flow.fracture_q, *job.network, 0.0, config.hydro()));
  return job;
}

struct SimulationOutput {
  Eigen::VectorXd initial_quartz;
  Eigen::VectorXd final_quartz;
  Eigen::VectorXd remaining;
};

std::optional<SimulationOutput> read_result(const fs::path& path, std::size_t expected)
{
  std::ifstream in(path);
  if (!in)
    return std::nullopt;
  std::string line;
  std::getline(in, line);
  std::vector<double> vo, vf, rf;
  while (std::getline(in, line)) {
    if (line.empty())
      continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ss, cell, ','))
      cells.push_back(cell);
    if (cells.size() != 4)
      return std::nullopt;
    vo.push_back(std::stod(cells[1]));
    vf.push_back(std::stod(cells[2]));
    rf.push_back(std::stod(cells[3]));
  }
  if (vo.size() != expected)
    return std::nullopt;
  SimulationOutput out;
  out.initial_quartz = Eigen::Map<Eigen::VectorXd>(vo.data(), static_cast<Eigen::Index>(vo.size()));
  out.final_quartz = Eigen::Map<Eigen::VectorXd>(vf.data(), static_cast<Eigen::Index>(vf.size()));
  out.remaining = Eigen::Map<Eigen::VectorXd>(rf.data(), static_cast<Eigen::Index>(rf.size()));
  return out;
}

SimulationRecord run_simulation(const StudyConfig& config, const NetworkJob& job, double k,
                                const std::string& hash, bool reuse_only)
{
  SimulationRecord rec;
  rec.network_id = job.id;
  rec.seed = job.seed;
  rec.rate_constant = k;
  const fs::path dir = simulation_dir(config, job.id, k);
  if (const auto meta = read_json(dir / "meta.json");
      meta && meta->value("config_hash", "") == hash && meta->value("status", "") == "ok" &&
      read_result(dir / "result.csv", job.network->fractures.size())) {
    rec.ok = true;
    rec.reused = true;
    rec.steps = meta->value("steps", std::size_t{0});
    rec.reached_quasi_steady = meta->value("reached_quasi_steady", false);
    rec.final_time_years = meta->value("final_time_years", 0.0);
    rec.ledger_error = meta->value("ledger_cumulative_error", 0.0);
    rec.ledger_max_step_error = meta->value("ledger_max_step_error", 0.0);
    rec.seconds = meta->value("seconds", 0.0);
    return rec;
  }
  if (reuse_only) {
    rec.error = "no simulation result";
    return rec;
  }
  fs::create_directories(dir);
  const auto start = Clock::now();
  nlohmann::json meta = {{"config_hash", hash}, {"seed", job.seed}, {"network_id", job.id}, {"rate_constant", k}};
  try {
    ReactiveSimulation sim(*job.network, k, config.chemistry, config.law, config.controls, config.viscosity);
    const auto result = sim.run_to_quasi_steady();
    const auto& state = sim.state();
    write_result_csv(dir / "result.csv", *job.network, state);
    write_history_csv(dir / "history.csv", state);
    rec.ok = true;
    rec.steps = result.steps;
    rec.reached_quasi_steady = result.reached_quasi_steady;
    rec.final_time_years = state.time / kSecondsPerYear;
    rec.ledger_error = state.ledger.cumulative_error();
    rec.ledger_max_step_error = state.ledger.max_step_error;
    meta["status"] = "ok";
  } catch (const std::exception& e) {
    rec.error = e.what();
    meta["status"] = "failed";
    meta["error"] = rec.error;
  }
  rec.seconds = std::chrono::duration<double>(Clock::now() - start).count();
  meta["steps"] = rec.steps;
  meta["reached_quasi_steady"] = rec.reached_quasi_steady;
  meta["final_time_years"] = rec.final_time_years;
  meta["ledger_cumulative_error"] = rec.ledger_error;
  meta["ledger_max_step_error"] = rec.ledger_max_step_error;
  meta["seconds"] = rec.seconds;
  write_text_atomically(dir / "meta.json", meta.dump(1));
  return rec;
}

} // namespace

EnsembleSummary run_ensemble(const StudyConfig& config, EnsembleStage stage)
{
  config.validate();
  const auto start = Clock::now();
  const std::string sim_hash = config.simulation_hash();
  fs::create_directories(config.output_dir);
  std::mutex log;

  // Networks: draw seeds in order until n_networks have an inlet-outlet cluster.
  std::vector<NetworkJob> networks;
  EnsembleSummary summary;
  const int max_attempts = 10 * config.n_networks + 10;
  int attempt = 0;
  while (static_cast<int>(networks.size()) < config.n_networks && attempt < max_attempts) {
    const int batch = std::min(config.n_networks - static_cast<int>(networks.size()), max_attempts - attempt);
    std::vector<NetworkJob> jobs(static_cast<std::size_t>(batch));
    parallel_for(jobs.size(), config.workers, [&](std::size_t b) {
      jobs[b] = prepare_network(config, attempt + static_cast<int>(b), sim_hash, log);
    });
    for (auto& job : jobs) {
      if (!job.network)
        summary.skipped_seeds.push_back(job.seed);
      else if (static_cast<int>(networks.size()) < config.n_networks)
        networks.push_back(std::move(job));
    }
    attempt += batch;
  }
  if (networks.empty())
    throw std::runtime_error("no percolating network within " + std::to_string(max_attempts) + " seeds");
  if (static_cast<int>(networks.size()) < config.n_networks)
    std::cerr << "[ensemble] only " << networks.size() << " percolating networks in " << max_attempts << " seeds\n";
  for (const auto& n : networks) {
    summary.network_ids.push_back(n.id);
    summary.network_seeds.push_back(n.seed);
  }

  if (stage == EnsembleStage::generate) {
    summary.seconds = std::chrono::duration<double>(Clock::now() - start).count();
    return summary;
  }

  // Simulations, one job per (network, rate constant).
  const std::size_t rates = config.rate_constants.size();
  summary.simulations.resize(networks.size() * rates);
  parallel_for(summary.simulations.size(), config.workers, [&](std::size_t j) {
    const auto& job = networks[j / rates];
    const double k = config.rate_constants[j % rates];
    auto rec = run_simulation(config, job, k, sim_hash, stage == EnsembleStage::assemble);
    std::lock_guard<std::mutex> lock(log);
    std::cerr << "[ensemble] network " << job.id << " k=" << k << ' '
              << (rec.ok ? (rec.reused ? "reused" : "done") : "FAILED: " + rec.error) << " ("
              << job.network->fractures.size() << " fractures, " << rec.steps << " steps, "
              << rec.seconds << " s)\n";
    summary.simulations[j] = std::move(rec);
  });

  if (stage == EnsembleStage::simulate) {
    summary.seconds = std::chrono::duration<double>(Clock::now() - start).count();
    return summary;
  }

  // Single-writer merge in (network, rate, fracture) order.
  Dataset data;
  for (const auto& c : feature_columns())
    data.table.columns.emplace_back(c.name);
  std::vector<Eigen::MatrixXd> blocks;
  std::vector<double> target, vo, vf;
  Eigen::Index total = 0;
  for (std::size_t j = 0; j < summary.simulations.size(); ++j) {
    const auto& rec = summary.simulations[j];
    if (!rec.ok)
      continue;
    const auto& job = networks[j / rates];
    const auto result = read_result(simulation_dir(config, job.id, rec.rate_constant) / "result.csv",
                                    job.network->fractures.size());
    if (!result)
      throw std::runtime_error("missing simulation result for network " + std::to_string(job.id));
    blocks.push_back(rows_for_rate(job.features, *job.network, rec.rate_constant, config.hydro()));
    for (Eigen::Index i = 0; i < result->remaining.size(); ++i) {
      data.table.groups.push_back(job.id);
      data.seed.push_back(job.seed);
      data.fracture_id.push_back(job.features.fracture_id[static_cast<std::size_t>(i)]);
      target.push_back(std::clamp(result->remaining(i), 0.0, 1.0));
      vo.push_back(result->initial_quartz(i));
      vf.push_back(result->final_quartz(i));
    }
    total += blocks.back().rows();
  }
  data.table.features.resize(total, static_cast<Eigen::Index>(data.table.columns.size()));
  Eigen::Index row = 0;
  for (const auto& b : blocks) {
    data.table.features.middleRows(row, b.rows()) = b;
    row += b.rows();
  }
  data.table.target = Eigen::Map<Eigen::VectorXd>(target.data(), total);
  data.initial_quartz = Eigen::Map<Eigen::VectorXd>(vo.data(), total);
  data.final_quartz = Eigen::Map<Eigen::VectorXd>(vf.data(), total);
  data.table.validate();

  summary.dataset_path = config.output_dir / "dataset.csv";
  write_dataset_csv(data, summary.dataset_path, config.dataset_hash());
  summary.dataset_rows = static_cast<std::size_t>(total);
  summary.seconds = std::chrono::duration<double>(Clock::now() - start).count();

  nlohmann::json s = {{"config_hash", config.dataset_hash()},
                      {"simulation_hash", sim_hash},
                      {"networks", summary.network_ids.size()},
                      {"skipped_seeds", summary.skipped_seeds},
                      {"dataset_rows", summary.dataset_rows},
                      {"seconds", summary.seconds}};
  auto& failures = s["failures"] = nlohmann::json::array();
  for (const auto& rec : summary.simulations)
    if (!rec.ok)
      failures.push_back({{"network_id", rec.network_id}, {"seed", rec.seed}, {"rate_constant", rec.rate_constant},
                          {"error", rec.error}});
  write_text_atomically(config.output_dir / "ensemble.json", s.dump(1));
  return summary;
}

const ModelScore* StudyReport::find(const std::string& name, const std::string& variant) const
{
  for (const auto& m : models)
    if (m.name == name && m.variant == variant)
      return &m;
  return nullptr;
}

ModelScore score_model(const FeatureTable& table, const TrainTestSplit& split, const ForestParams& params,
                       int importance_repeats, std::uint64_t importance_seed)
{
  const FeatureTable train = table.select_rows(split.train);
  const FeatureTable test = table.select_rows(split.test);
  ModelScore s;
  s.features = table.columns;
  s.params = params;
  const ForestModel model = fit_forest(train, params);
  s.y_train = train.target;
  s.p_train = predict(model, train.features);
  s.y_test = test.target;
  s.p_test = predict(model, test.features);
  s.r2_train = r2_score(s.y_train, s.p_train);
  s.r2_test = r2_score(s.y_test, s.p_test);
  s.oob = oob_score(model, train.features, train.target);
  s.importance = permutation_importance(model, train.features, train.target, importance_repeats, importance_seed);
  return s;
}

StudyReport train_models(const Dataset& data, const StudyConfig& config)
{
  data.table.validate();
  StudyReport report;
  report.config_hash = config.dataset_hash();
  report.forest_seed = config.forest_seed;
  const auto split = train_test_split(data.table, config.train_fraction, config.forest_seed, config.split_by_network);

  ForestParams optimized = config.optimized_forest;
  optimized.threads = config.workers;
  ForestParams base = config.base_forest;
  base.threads = config.workers;

  auto timed = [&](const std::string& key, auto&& fn) {
    const auto t0 = Clock::now();
    fn();
    report.timings[key] = std::chrono::duration<double>(Clock::now() - t0).count();
  };

  if (config.run_grid_search) {
    timed("grid_search", [&] {
      const FeatureTable train = data.table.select_columns(feature_set(3)).select_rows(split.train);
      report.grid = grid_search(train, config.grid, config.cv_folds, derive_seed(config.forest_seed, 101),
                                config.split_by_network, optimized);
      optimized = report.grid->best;
      optimized.threads = config.workers;
    });
  }

  for (int level = 1; level <= 3; ++level) {
    const std::string name = "RF-" + std::to_string(level);
    const FeatureTable table = data.table.select_columns(feature_set(level));
    for (const auto& [variant, params] : {std::pair{std::string("base"), base}, std::pair{std::string("optimized"), optimized}}) {
      ForestParams p = params;
      p.seed = derive_seed(config.forest_seed, static_cast<std::uint64_t>(level));
      try {
        timed(name + " " + variant, [&] {
          ModelScore s = score_model(table, split, p, config.importance_repeats,
                                     derive_seed(config.forest_seed, 200 + static_cast<std::uint64_t>(level)));
          s.name = name;
          s.variant = variant;
          report.models.push_back(std::move(s));
        });
      } catch (const std::exception& e) {
        report.skipped.push_back(name + " " + variant + ": " + e.what());
      }
    }
  }

  const FeatureTable all = data.table.select_columns(feature_set(3));
  std::vector<char> in_train(static_cast<std::size_t>(data.rows()), 0);
  for (auto r : split.train)
    in_train[static_cast<std::size_t>(r)] = 1;
  for (std::size_t i = 0; i < config.rate_constants.size(); ++i) {
    const double k = config.rate_constants[i];
    const auto rows = data.rows_with_rate(k);
    const std::string name = "k=" + rate_tag(k).substr(1);
    TrainTestSplit local;
    for (std::size_t j = 0; j < rows.size(); ++j)
      (in_train[static_cast<std::size_t>(rows[j])] ? local.train : local.test).push_back(static_cast<Eigen::Index>(j));
    try {
      if (local.train.size() < 4 || local.test.size() < 2)
        throw std::runtime_error("insufficient rows");
      ForestParams p = optimized;
      p.seed = derive_seed(config.forest_seed, 10 + i);
      timed(name, [&] {
        ModelScore s = score_model(all.select_rows(rows), local, p, config.importance_repeats,
                                   derive_seed(config.forest_seed, 300 + i));
        s.name = name;
        s.variant = "optimized";
        s.rate_constant = k;
        report.models.push_back(std::move(s));
      });
    } catch (const std::exception& e) {
      report.skipped.push_back(name + ": " + e.what());
    }
  }

  timed("correlation", [&] { report.correlation = correlation_matrix(all); });
  return report;
}

} // namespace fracnet
