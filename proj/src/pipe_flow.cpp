#include "fracnet/pipe_flow.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <queue>
#include <stdexcept>
#include <unordered_map>

namespace fracnet {

PipeModel::PipeModel(int fracture_count, std::vector<Pipe> pipes, double viscosity)
    : fracture_count_(fracture_count),
      pipes_(std::move(pipes)),
      viscosity_(viscosity),
      incident_(static_cast<std::size_t>(fracture_count + 2))
{
  if (!(viscosity > 0.0))
    throw std::invalid_argument("viscosity must be positive");
  for (std::size_t k = 0; k < pipes_.size(); ++k) {
    Pipe& p = pipes_[k];
    if (p.a < 0 || p.a >= fracture_count_ || p.b < 0 || p.b >= node_count() || p.a == p.b)
      throw std::invalid_argument("pipe endpoints out of range");
    if (p.length() < kMinPipeLength) {
      // Coincident centres: stretch to the minimum length, keeping the split.
      const double total = p.length();
      if (total > 0.0) {
        p.length_a *= kMinPipeLength / total;
        p.length_b *= kMinPipeLength / total;
      } else {
        p.length_a = kMinPipeLength;
      }
      ++clamped_lengths;
    }
    incident_[p.a].push_back(static_cast<int>(k));
    incident_[p.b].push_back(static_cast<int>(k));
  }
  if (clamped_lengths > 0)
    std::cerr << "warning: " << clamped_lengths << " pipe length(s) clamped to " << kMinPipeLength
              << " m\n";
}

Eigen::VectorXd PipeModel::conductances(const Eigen::VectorXd& perm_factor) const
{
  if (perm_factor.size() != fracture_count_)
    throw std::invalid_argument("permeability factor size mismatch");
  Eigen::VectorXd g(static_cast<Eigen::Index>(pipes_.size()));
  for (std::size_t k = 0; k < pipes_.size(); ++k) {
    const Pipe& p = pipes_[k];
    double resistance = p.length_a / perm_factor(p.a);
    if (!is_reservoir(p.b))
      resistance += p.length_b / perm_factor(p.b);
    // Same as cubic_law_conductance with an effective length.
    g(static_cast<Eigen::Index>(k)) = cubic_law_conductance(p.aperture, p.width, resistance, viscosity_);
  }
  return g;
}

Eigen::VectorXd PipeModel::conductances() const
{
  return conductances(Eigen::VectorXd::Ones(fracture_count_));
}

PipeModel build_pipe_model(const FractureNetwork& network, double viscosity)
{
  const int n = static_cast<int>(network.fractures.size());
  std::unordered_map<int, int> index;
  std::vector<Vector3d> position(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const auto& f = network.fractures[static_cast<std::size_t>(i)];
    index[f.id] = i;
    position[static_cast<std::size_t>(i)] = f.center;
  }

  std::vector<Pipe> pipes;
  pipes.reserve(network.intersections.size() + static_cast<std::size_t>(n));
  for (const auto& seg : network.intersections) {
    const int a = index.at(seg.fracture_a);
    const int b = index.at(seg.fracture_b);
    const Vector3d mid = 0.5 * (seg.p0 + seg.p1);
    const double aperture = std::min(network.fractures[static_cast<std::size_t>(a)].aperture,
                                     network.fractures[static_cast<std::size_t>(b)].aperture);
    pipes.push_back({a, b, seg.length, (position[a] - mid).norm(), (mid - position[b]).norm(),
                     aperture});
  }
  const double side = network.domain.side_length;
  for (int i = 0; i < n; ++i) {
    const auto& f = network.fractures[static_cast<std::size_t>(i)];
    if (f.touches_inlet)
      pipes.push_back({i, n, boundary_trace_length(f, 0.0), std::abs(position[i].x()), 0.0,
                       f.aperture});
    if (f.touches_outlet)
      pipes.push_back({i, n + 1, boundary_trace_length(f, side), std::abs(side - position[i].x()),
                       0.0, f.aperture});
  }
  return PipeModel(n, std::move(pipes), viscosity);
}

FlowSolution solve_flow(const PipeModel& model, const Eigen::VectorXd& conductance,
                        double total_rate)
{
  const int n = model.fracture_count();
  const auto& pipes = model.pipes();
  if (conductance.size() != static_cast<Eigen::Index>(pipes.size()))
    throw std::invalid_argument("conductance size mismatch");
  if (!conductance.allFinite() || (conductance.array() <= 0.0).any())
    throw std::invalid_argument("non-finite or non-positive conductance");

  // Every fracture node must see a reservoir, and the inlet must reach the outlet.
  {
    std::vector<char> seen(static_cast<std::size_t>(model.node_count()), 0);
    std::queue<int> frontier;
    seen[model.inlet()] = 1;
    frontier.push(model.inlet());
    bool outlet_seen = false;
    while (!frontier.empty()) {
      const int u = frontier.front();
      frontier.pop();
      for (int k : model.incident()[u]) {
        const int v = pipes[k].a == u ? pipes[k].b : pipes[k].a;
        if (v == model.outlet())
          outlet_seen = true;
        if (!seen[v] && !model.is_reservoir(v)) {
          seen[v] = 1;
          frontier.push(v);
        }
      }
    }
    if (!outlet_seen)
      throw std::runtime_error("singular flow system: inlet and outlet are disconnected");
    for (int i = 0; i < n; ++i)
      if (!seen[i])
        throw std::runtime_error("singular flow system: fracture not connected to the inlet");
  }

  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(4 * pipes.size());
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
  for (std::size_t k = 0; k < pipes.size(); ++k) {
    const Pipe& p = pipes[k];
    const double g = conductance(static_cast<Eigen::Index>(k));
    triplets.emplace_back(p.a, p.a, g);
    if (model.is_reservoir(p.b)) {
      if (p.b == model.inlet())
        rhs(p.a) += g; // unit pressure at the inlet, zero at the outlet
    } else {
      triplets.emplace_back(p.b, p.b, g);
      triplets.emplace_back(p.a, p.b, -g);
      triplets.emplace_back(p.b, p.a, -g);
    }
  }
  Eigen::SparseMatrix<double> system(n, n);
  system.setFromTriplets(triplets.begin(), triplets.end());
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(system);
  if (solver.info() != Eigen::Success)
    throw std::runtime_error("singular flow system");
  const Eigen::VectorXd interior = solver.solve(rhs);

  FlowSolution out;
  out.pressure = Eigen::VectorXd::Zero(model.node_count());
  out.pressure.head(n) = interior;
  out.pressure(model.inlet()) = 1.0;

  double inflow = 0.0;
  for (std::size_t k = 0; k < pipes.size(); ++k)
    if (pipes[k].b == model.inlet())
      inflow += conductance(static_cast<Eigen::Index>(k)) * (1.0 - out.pressure(pipes[k].a));
  if (!(inflow > 0.0))
    throw std::runtime_error("no flow between inlet and outlet");

  const double scale = total_rate / inflow;
  out.pressure *= scale;
  out.pipe_flow.resize(static_cast<Eigen::Index>(pipes.size()));
  for (std::size_t k = 0; k < pipes.size(); ++k)
    out.pipe_flow(static_cast<Eigen::Index>(k)) =
        conductance(static_cast<Eigen::Index>(k)) * (out.pressure(pipes[k].a) - out.pressure(pipes[k].b));
  out.fracture_q = fracture_flow_rate(model, out.pipe_flow);
  out.total_throughput = total_rate;
  return out;
}

FlowSolution solve_flow(const PipeModel& model, double total_rate)
{
  return solve_flow(model, model.conductances(), total_rate);
}

Eigen::VectorXd fracture_flow_rate(const PipeModel& model, const Eigen::VectorXd& pipe_flow)
{
  Eigen::VectorXd q = Eigen::VectorXd::Zero(model.fracture_count());
  const auto& pipes = model.pipes();
  for (std::size_t k = 0; k < pipes.size(); ++k) {
    const double magnitude = 0.5 * std::abs(pipe_flow(static_cast<Eigen::Index>(k)));
    q(pipes[k].a) += magnitude;
    if (!model.is_reservoir(pipes[k].b))
      q(pipes[k].b) += magnitude;
  }
  return q;
}

double network_volume_per_year(const FractureNetwork& network)
{
  double volume = 0.0;
  for (const auto& f : network.fractures)
    volume += f.total_volume;
  return volume / kSecondsPerYear;
}

HydroFeatures hydro_features(const Eigen::VectorXd& fracture_q, const FractureNetwork& network,
                             double rate_constant, const HydroConstants& constants)
{
  const auto n = static_cast<Eigen::Index>(network.fractures.size());
  if (fracture_q.size() != n)
    throw std::invalid_argument("flow vector size mismatch");
  HydroFeatures out;
  out.rate_velocity = rate_constant * constants.molar_volume;
  out.volumetric_flow_rate = fracture_q;
  out.peclet.resize(n);
  out.damkohler_advective.resize(n);
  out.damkohler_diffusive.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& f = network.fractures[static_cast<std::size_t>(i)];
    const double q = fracture_q(i);
    out.peclet(i) = q * f.radius / (f.surface_area * constants.diffusion);
    const double da1 = q > 0.0 ? out.rate_velocity * f.surface_area / q : constants.damkohler_cap;
    out.damkohler_advective(i) = std::min(da1, constants.damkohler_cap);
    out.damkohler_diffusive(i) = out.rate_velocity * f.radius / constants.diffusion;
  }
  return out;
}

void write_flow_csv(const std::filesystem::path& path, const FractureNetwork& network,
                    const FlowSolution& flow, const HydroFeatures& hydro)
{
  std::ofstream out(path);
  if (!out)
    throw std::runtime_error("cannot write " + path.string());
  out << "fracture_id,Q,peclet,da1,da2,pressure_mean\n" << std::setprecision(17);
  for (std::size_t i = 0; i < network.fractures.size(); ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    out << network.fractures[i].id << ',' << hydro.volumetric_flow_rate(k) << ','
        << hydro.peclet(k) << ',' << hydro.damkohler_advective(k) << ','
        << hydro.damkohler_diffusive(k) << ',' << flow.pressure(k) << '\n';
  }
}

} // namespace fracnet
