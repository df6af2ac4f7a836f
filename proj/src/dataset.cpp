#include "fracnet/dataset.hpp"

#include "fracnet/graph.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

namespace fracnet {

namespace {

enum Column : int {
  kRate,
  kDegree,
  kDegreeCentrality,
  kDistance,
  kBetweenness,
  kCurrentFlow,
  kSurfaceArea,
  kTotalVolume,
  kProjectedVolume,
  kIntersectionArea,
  kFlowRate,
  kPeclet,
  kDaI,
  kDaII,
  kColumnCount
};

std::string format_double(double v)
{
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<std::string> split(const std::string& line)
{
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ','))
    out.push_back(cell);
  if (!line.empty() && line.back() == ',')
    out.emplace_back();
  return out;
}

} // namespace

const std::vector<FeatureColumn>& feature_columns()
{
  static const std::vector<FeatureColumn> columns = {
      {"rate_constant", FeatureCategory::control},
      {"degree", FeatureCategory::topological},
      {"degree_centrality", FeatureCategory::topological},
      {"distance_to_backbone", FeatureCategory::topological},
      {"betweenness_centrality", FeatureCategory::topological},
      {"current_flow", FeatureCategory::topological},
      {"surface_area", FeatureCategory::geometric},
      {"total_volume", FeatureCategory::geometric},
      {"projected_volume", FeatureCategory::geometric},
      {"intersection_area", FeatureCategory::geometric},
      {"volumetric_flow_rate", FeatureCategory::hydrological},
      {"peclet", FeatureCategory::hydrological},
      {"damkohler_advective", FeatureCategory::hydrological},
      {"damkohler_diffusive", FeatureCategory::hydrological},
  };
  return columns;
}

std::vector<std::string> feature_names(FeatureCategory category)
{
  std::vector<std::string> out;
  for (const auto& c : feature_columns())
    if (c.category == category)
      out.emplace_back(c.name);
  return out;
}

std::vector<std::string> feature_set(int level)
{
  if (level < 1 || level > 3)
    throw std::invalid_argument("feature set level must be 1, 2 or 3");
  std::vector<std::string> out;
  for (const auto& c : feature_columns()) {
    const bool keep = c.category == FeatureCategory::control || c.category == FeatureCategory::topological ||
                      (level >= 2 && c.category == FeatureCategory::geometric) ||
                      (level >= 3 && c.category == FeatureCategory::hydrological);
    if (keep)
      out.emplace_back(c.name);
  }
  return out;
}

NetworkFeatures compute_network_features(FractureNetwork& network, const HydroConstants& hydro,
                                         bool include_terminals, double viscosity)
{
  const auto n = static_cast<Eigen::Index>(network.fractures.size());
  const auto geometric = geometric_features(network);
  const NetworkGraph graph = to_graph(network);
  const TopologicalFeatures topo = topological_features(graph, include_terminals);
  const PipeModel model = build_pipe_model(network, viscosity);

  NetworkFeatures out;
  out.total_rate = network_volume_per_year(network);
  const FlowSolution flow = solve_flow(model, out.total_rate);
  const HydroFeatures h = hydro_features(flow.fracture_q, network, 0.0, hydro);

  out.values = Eigen::MatrixXd::Zero(n, kColumnCount);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(i);
    out.fracture_id.push_back(network.fractures[k].id);
    out.values(i, kDegree) = topo.degree(i);
    out.values(i, kDegreeCentrality) = topo.degree_centrality(i);
    out.values(i, kDistance) = topo.distance_to_backbone(i);
    out.values(i, kBetweenness) = topo.betweenness(i);
    out.values(i, kCurrentFlow) = topo.current_flow(i);
    out.values(i, kSurfaceArea) = geometric[k].surface_area;
    out.values(i, kTotalVolume) = geometric[k].total_volume;
    out.values(i, kProjectedVolume) = geometric[k].projected_volume;
    out.values(i, kIntersectionArea) = geometric[k].intersection_area;
    out.values(i, kFlowRate) = h.volumetric_flow_rate(i);
    out.values(i, kPeclet) = h.peclet(i);
  }
  return out;
}

Eigen::MatrixXd rows_for_rate(const NetworkFeatures& features, const FractureNetwork& network,
                              double rate_constant, const HydroConstants& hydro)
{
  Eigen::MatrixXd rows = features.values;
  const HydroFeatures h = hydro_features(features.values.col(kFlowRate), network, rate_constant, hydro);
  rows.col(kRate).setConstant(rate_constant);
  rows.col(kDaI) = h.damkohler_advective;
  rows.col(kDaII) = h.damkohler_diffusive;
  return rows;
}

void write_network_features_csv(const NetworkFeatures& features, const std::filesystem::path& path)
{
  std::ofstream out(path);
  if (!out)
    throw std::runtime_error("cannot write " + path.string());
  out << "fracture_id";
  const auto& columns = feature_columns();
  for (int c = kDegree; c <= kPeclet; ++c)
    out << ',' << columns[static_cast<std::size_t>(c)].name;
  out << '\n';
  for (Eigen::Index i = 0; i < features.values.rows(); ++i) {
    out << features.fracture_id[static_cast<std::size_t>(i)];
    for (int c = kDegree; c <= kPeclet; ++c)
      out << ',' << format_double(features.values(i, c));
    out << '\n';
  }
}

std::vector<Eigen::Index> Dataset::rows_with_rate(double rate_constant) const
{
  const int col = table.column("rate_constant");
  std::vector<Eigen::Index> out;
  for (Eigen::Index r = 0; r < rows(); ++r)
    if (table.features(r, col) == rate_constant)
      out.push_back(r);
  return out;
}

std::vector<double> Dataset::rate_constants() const
{
  const int col = table.column("rate_constant");
  std::set<double> seen;
  for (Eigen::Index r = 0; r < rows(); ++r)
    seen.insert(table.features(r, col));
  return {seen.rbegin(), seen.rend()};
}

void write_dataset_csv(const Dataset& data, const std::filesystem::path& path, const std::string& config_hash)
{
  std::ofstream out(path);
  if (!out)
    throw std::runtime_error("cannot write " + path.string());
  out << "# schema=" << kDatasetSchema << " config_hash=" << config_hash << '\n';
  out << "network_id,seed,fracture_id";
  for (const auto& name : data.table.columns)
    out << ',' << name;
  out << ",V_o,V_final,remaining_fraction\n";
  for (Eigen::Index r = 0; r < data.rows(); ++r) {
    const auto k = static_cast<std::size_t>(r);
    out << data.table.groups[k] << ',' << data.seed[k] << ',' << data.fracture_id[k];
    for (Eigen::Index c = 0; c < data.table.cols(); ++c)
      out << ',' << format_double(data.table.features(r, c));
    out << ',' << format_double(data.initial_quartz(r)) << ',' << format_double(data.final_quartz(r))
        << ',' << format_double(data.table.target(r)) << '\n';
  }
}

Dataset read_dataset_csv(const std::filesystem::path& path)
{
  std::ifstream in(path);
  if (!in)
    throw std::runtime_error("cannot read " + path.string());
  std::string line;
  std::vector<std::string> header;
  std::string hash;
  while (std::getline(in, line)) {
    if (line.empty())
      continue;
    if (line[0] == '#') {
      if (line.find(std::string("schema=") + kDatasetSchema) == std::string::npos)
        throw std::runtime_error("unsupported dataset schema in " + path.string());
      if (const auto h = line.find("config_hash="); h != std::string::npos)
        hash = line.substr(h + 12);
      continue;
    }
    header = split(line);
    break;
  }
  if (header.empty())
    throw std::runtime_error("empty dataset " + path.string());
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < header.size(); ++i)
    index[header[i]] = i;
  auto at = [&](const std::string& name) {
    const auto it = index.find(name);
    if (it == index.end())
      throw std::runtime_error("dataset column missing: " + name);
    return it->second;
  };

  Dataset data;
  data.config_hash = hash;
  for (const auto& c : feature_columns())
    data.table.columns.emplace_back(c.name);
  std::vector<std::size_t> feature_index;
  for (const auto& name : data.table.columns)
    feature_index.push_back(at(name));
  const auto net_col = at("network_id"), seed_col = at("seed"), id_col = at("fracture_id");
  const auto vo_col = at("V_o"), vf_col = at("V_final"), target_col = at("remaining_fraction");

  std::vector<std::vector<double>> features;
  std::vector<double> target, vo, vf;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#')
      continue;
    const auto cells = split(line);
    if (cells.size() != header.size())
      throw std::runtime_error("malformed dataset row " + std::to_string(line_no));
    try {
      data.table.groups.push_back(std::stoi(cells[net_col]));
      data.seed.push_back(std::stoull(cells[seed_col]));
      data.fracture_id.push_back(std::stoi(cells[id_col]));
      std::vector<double> row;
      for (auto c : feature_index)
        row.push_back(std::stod(cells[c]));
      features.push_back(std::move(row));
      vo.push_back(std::stod(cells[vo_col]));
      vf.push_back(std::stod(cells[vf_col]));
      target.push_back(std::stod(cells[target_col]));
    } catch (const std::logic_error&) {
      throw std::runtime_error("unparsable dataset row " + std::to_string(line_no));
    }
  }
  const auto n = static_cast<Eigen::Index>(features.size());
  data.table.features.resize(n, static_cast<Eigen::Index>(data.table.columns.size()));
  data.table.target.resize(n);
  data.initial_quartz.resize(n);
  data.final_quartz.resize(n);
  for (Eigen::Index r = 0; r < n; ++r) {
    const auto k = static_cast<std::size_t>(r);
    for (std::size_t c = 0; c < features[k].size(); ++c)
      data.table.features(r, static_cast<Eigen::Index>(c)) = features[k][c];
    data.table.target(r) = target[k];
    data.initial_quartz(r) = vo[k];
    data.final_quartz(r) = vf[k];
  }
  data.table.validate();
  return data;
}

} // namespace fracnet
