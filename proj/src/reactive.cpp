#include "fracnet/reactive.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <stdexcept>

namespace fracnet {

namespace {

// (V/V_o)^n, exact for perfect cubes when n = 2/3.
double volume_ratio_power(double ratio, double exponent)
{
  if (exponent == 0.0)
    return 1.0;
  if (exponent == 2.0 / 3.0) {
    const double c = std::cbrt(ratio);
    return c * c;
  }
  return std::pow(ratio, exponent);
}

} // namespace

double dissolution_rate(const ReactiveCell& cell, double silica_mol_per_l, double rate_constant,
                        const ChemistryConstants& chem)
{
  if (silica_mol_per_l < 0.0)
    throw std::invalid_argument("negative concentration");
  if (cell.quartz_volume <= 0.0 || cell.fluid_volume <= 0.0)
    return 0.0;
  const double undersaturation = 1.0 - silica_mol_per_l / chem.equilibrium_constant;
  return std::max(0.0, rate_constant * cell.quartz_area / cell.fluid_volume * undersaturation);
}

CellUpdate update_geometry_chemistry(const ReactiveCell& cell, double dissolved_moles,
                                     const ChemistryConstants& chem, const PermeabilityLaw& law)
{
  if (dissolved_moles < 0.0)
    throw std::invalid_argument("dissolved moles must be non-negative");
  CellUpdate out{cell, 0.0, 0.0};
  if (dissolved_moles == 0.0)
    return out;

  ReactiveCell& c = out.cell;
  const double available = c.quartz_volume / chem.molar_volume;
  if (dissolved_moles >= available) {
    out.dissolved_moles = available;
    out.clamped_moles = dissolved_moles - available;
    c.quartz_volume = 0.0;
  } else {
    out.dissolved_moles = dissolved_moles;
    c.quartz_volume -= dissolved_moles * chem.molar_volume;
  }

  c.mineral_fraction = c.quartz_volume / c.total_volume;
  c.porosity = 1.0 - c.mineral_fraction;
  c.fluid_volume = c.porosity * c.total_volume;
  if (c.quartz_volume > 0.0) {
    const double ratio = c.quartz_volume / c.initial_quartz_volume;
    // With one mineral, (1 - phi)/(1 - phi_0) equals the volume ratio.
    c.quartz_area = c.initial_area * volume_ratio_power(ratio, law.n) *
                    volume_ratio_power(ratio, law.n_prime);
  } else {
    c.quartz_area = 0.0;
  }
  c.permeability_factor = law.factor(c.porosity, c.initial_porosity);
  return out;
}

double MassLedger::cumulative_error() const
{
  const double fluid_side = (inventory - initial_inventory) + exported - imported - clamped;
  const double scale = std::max(removed, 1e-30);
  return std::abs(removed - fluid_side) / scale;
}

struct ReactiveSimulation::Solver {
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  bool analysed = false;
  bool first_transport = true;
};

ReactiveSimulation::ReactiveSimulation(const FractureNetwork& network, double rate_constant,
                                       const ChemistryConstants& chem, const PermeabilityLaw& law,
                                       const SimulationControls& controls, double viscosity)
    : model_(build_pipe_model(network, viscosity)),
      chem_(chem),
      law_(law),
      controls_(controls),
      total_rate_(network_volume_per_year(network)),
      solver_(std::make_unique<Solver>())
{
  if (rate_constant < 0.0)
    throw std::invalid_argument("rate constant must be non-negative");
  const auto& pipes = model_.pipes();
  diffusive_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(pipes.size()));
  for (std::size_t k = 0; k < pipes.size(); ++k)
    if (!model_.is_reservoir(pipes[k].b))
      diffusive_(static_cast<Eigen::Index>(k)) =
          chem_.diffusion * pipes[k].width * pipes[k].aperture / pipes[k].length();

  state_.rate_constant = rate_constant;
  const double phi0 = chem_.initial_porosity;
  double total_quartz = 0.0;
  for (const auto& f : network.fractures) {
    ReactiveCell cell;
    cell.total_volume = f.total_volume;
    cell.initial_porosity = phi0;
    cell.porosity = phi0;
    cell.mineral_fraction = 1.0 - phi0;
    cell.initial_quartz_volume = cell.mineral_fraction * f.total_volume;
    cell.quartz_volume = cell.initial_quartz_volume;
    cell.fluid_volume = phi0 * f.total_volume;
    cell.initial_area = chem_.area_per_volume() * cell.initial_quartz_volume;
    cell.quartz_area = cell.initial_area;
    cell.permeability_factor = 1.0;
    cell.silica = chem_.equilibrium_constant;
    state_.ledger.initial_inventory += cell.silica * kLitresPerCubicMetre * cell.fluid_volume;
    total_quartz += cell.quartz_volume;
    state_.cells.push_back(cell);
  }
  state_.ledger.inventory = state_.ledger.initial_inventory;

  solved_conductance_ = model_.conductances();
  state_.flow = solve_flow(model_, solved_conductance_, total_rate_);
  state_.history.push_back({0.0, chem_.equilibrium_constant, total_quartz});
}

ReactiveSimulation::~ReactiveSimulation() = default;
ReactiveSimulation::ReactiveSimulation(ReactiveSimulation&&) noexcept = default;
ReactiveSimulation& ReactiveSimulation::operator=(ReactiveSimulation&&) noexcept = default;

bool ReactiveSimulation::refresh_flow_if_needed()
{
  Eigen::VectorXd factors(static_cast<Eigen::Index>(state_.cells.size()));
  for (std::size_t i = 0; i < state_.cells.size(); ++i)
    factors(static_cast<Eigen::Index>(i)) = state_.cells[i].permeability_factor;
  const Eigen::VectorXd g = model_.conductances(factors);
  const double change =
      ((g - solved_conductance_).array().abs() / solved_conductance_.array()).maxCoeff();
  if (!(change > controls_.flow_refresh_tol))
    return false;
  state_.flow = solve_flow(model_, g, total_rate_);
  solved_conductance_ = g;
  return true;
}

TransportSolution ReactiveSimulation::solve_transport()
{
  const auto n = static_cast<Eigen::Index>(state_.cells.size());
  const auto& pipes = model_.pipes();
  const double k_eq = chem_.equilibrium_mol_per_m3();
  const double c_in = chem_.inflow_silica * kLitresPerCubicMetre;
  const Eigen::VectorXd& q = state_.flow.pipe_flow;

  // Unknown is the undersaturation u = K_eq - c, which vanishes exactly at
  // equilibrium; the TST source k A (1 - c/K_eq) becomes k A u / K_eq.
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(static_cast<std::size_t>(n) + 6 * pipes.size());
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& cell = state_.cells[static_cast<std::size_t>(i)];
    const double reaction = cell.quartz_volume > 0.0 ? state_.rate_constant * cell.quartz_area / k_eq : 0.0;
    triplets.emplace_back(i, i, reaction);
  }
  for (std::size_t k = 0; k < pipes.size(); ++k) {
    const Pipe& p = pipes[k];
    const double flow = q(static_cast<Eigen::Index>(k));
    if (model_.is_reservoir(p.b)) {
      if (flow < 0.0)
        rhs(p.a) += -flow * (k_eq - c_in);
      else
        triplets.emplace_back(p.a, p.a, flow);
      continue;
    }
    const double g = diffusive_(static_cast<Eigen::Index>(k));
    const double forward = std::max(flow, 0.0);   // a -> b
    const double backward = std::max(-flow, 0.0); // b -> a
    triplets.emplace_back(p.a, p.a, forward + g);
    triplets.emplace_back(p.b, p.b, backward + g);
    triplets.emplace_back(p.b, p.a, -forward - g);
    triplets.emplace_back(p.a, p.b, -backward - g);
  }
  Eigen::SparseMatrix<double> system(n, n);
  system.setFromTriplets(triplets.begin(), triplets.end());
  system.makeCompressed();

  auto& lu = solver_->lu;
  if (!solver_->analysed) {
    lu.analyzePattern(system);
    solver_->analysed = true;
  }
  lu.factorize(system);
  if (lu.info() != Eigen::Success)
    throw std::runtime_error("singular transport system");
  const Eigen::VectorXd u = lu.solve(rhs);
  if (lu.info() != Eigen::Success || !u.allFinite())
    throw std::runtime_error("transport solve failed");

  TransportSolution out;
  out.silica.resize(n);
  out.source.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& cell = state_.cells[static_cast<std::size_t>(i)];
    const double under = std::clamp(u(i), 0.0, k_eq);
    const double c = k_eq - under;
    out.silica(i) = c / kLitresPerCubicMetre;
    out.source(i) = cell.quartz_volume > 0.0 ? state_.rate_constant * cell.quartz_area * under / k_eq : 0.0;
    out.inventory += c * cell.fluid_volume;
  }
  for (std::size_t k = 0; k < pipes.size(); ++k) {
    const Pipe& p = pipes[k];
    if (!model_.is_reservoir(p.b))
      continue;
    const double flow = q(static_cast<Eigen::Index>(k));
    if (flow > 0.0)
      out.export_rate += flow * out.silica(p.a) * kLitresPerCubicMetre;
    else
      out.import_rate += -flow * c_in;
  }
  return out;
}

double ReactiveSimulation::adaptive_dt(const TransportSolution& transport) const
{
  double dt = controls_.max_dt_years * kSecondsPerYear;
  for (std::size_t i = 0; i < state_.cells.size(); ++i) {
    const double source = transport.source(static_cast<Eigen::Index>(i));
    if (source > 0.0) {
      const double limit = controls_.max_loss_fraction * state_.cells[i].initial_quartz_volume /
                           (source * chem_.molar_volume);
      dt = std::min(dt, limit);
    }
  }
  const double remaining = controls_.horizon_years * kSecondsPerYear - state_.time;
  if (remaining > 0.0 && remaining < dt)
    return remaining;
  if (dt < controls_.min_dt_seconds)
    throw std::runtime_error("stiff step");
  return dt;
}

StepReport ReactiveSimulation::apply(const TransportSolution& transport, double dt, bool refreshed)
{
  StepReport report;
  report.dt = dt;
  report.flow_refreshed = refreshed;

  double clamped = 0.0;
  double total_quartz = 0.0;
  for (std::size_t i = 0; i < state_.cells.size(); ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    auto update = update_geometry_chemistry(state_.cells[i], transport.source(k) * dt, chem_, law_);
    update.cell.silica = transport.silica(k);
    state_.cells[i] = update.cell;
    report.removed += update.dissolved_moles;
    clamped += update.clamped_moles;
    total_quartz += update.cell.quartz_volume;
  }

  auto& ledger = state_.ledger;
  if (solver_->first_transport) {
    // The initial equilibrium fluid is flushed through the outlet within one
    // residence time, far shorter than any step.
    ledger.exported += ledger.inventory - transport.inventory;
    ledger.inventory = transport.inventory;
    solver_->first_transport = false;
  }
  const double exported = transport.export_rate * dt;
  const double imported = transport.import_rate * dt;
  const double fluid_side = (transport.inventory - ledger.inventory) + exported - imported - clamped;
  report.ledger_error = std::abs(report.removed - fluid_side) / std::max(report.removed, 1e-30);
  if (report.removed > 0.0)
    ledger.max_step_error = std::max(ledger.max_step_error, report.ledger_error);
  ledger.removed += report.removed;
  ledger.exported += exported;
  ledger.imported += imported;
  ledger.clamped += clamped;
  ledger.inventory = transport.inventory;

  state_.time += dt;
  double outflow = 0.0;
  const auto& pipes = model_.pipes();
  for (std::size_t k = 0; k < pipes.size(); ++k)
    if (model_.is_reservoir(pipes[k].b) && state_.flow.pipe_flow(static_cast<Eigen::Index>(k)) > 0.0)
      outflow += state_.flow.pipe_flow(static_cast<Eigen::Index>(k));
  const double c_out = outflow > 0.0 ? transport.export_rate / outflow / kLitresPerCubicMetre : 0.0;
  state_.history.push_back({state_.time, c_out, total_quartz});
  return report;
}

StepReport ReactiveSimulation::step(double dt)
{
  if (!(dt > 0.0))
    throw std::invalid_argument("step length must be positive");
  if (dt < controls_.min_dt_seconds)
    throw std::runtime_error("stiff step");
  const bool refreshed = refresh_flow_if_needed();
  const TransportSolution transport = solve_transport();
  return apply(transport, dt, refreshed);
}

StepReport ReactiveSimulation::advance()
{
  const bool refreshed = refresh_flow_if_needed();
  const TransportSolution transport = solve_transport();
  return apply(transport, adaptive_dt(transport), refreshed);
}

QuasiSteadyResult ReactiveSimulation::run_to_quasi_steady()
{
  QuasiSteadyResult result;
  const double horizon = controls_.horizon_years * kSecondsPerYear;
  const double cap = controls_.max_dt_years * kSecondsPerYear;
  const auto window = static_cast<std::size_t>(std::max(controls_.qss_window, 1));
  std::vector<char> at_cap;
  while (state_.time < horizon * (1.0 - 1e-15)) {
    const StepReport report = advance();
    ++result.steps;
    at_cap.push_back(report.dt >= cap * (1.0 - 1e-12));

    // Quasi-steady: over the last `window` full-length steps the outflow
    // concentration changed by less than qss_tol (relative).
    if (at_cap.size() < window)
      continue;
    if (controls_.qss_full_steps_only &&
        !std::all_of(at_cap.end() - static_cast<long>(window), at_cap.end(), [](char c) { return c; }))
      continue;
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    for (auto it = state_.history.end() - static_cast<long>(window); it != state_.history.end(); ++it) {
      lo = std::min(lo, it->outflow_silica);
      hi = std::max(hi, it->outflow_silica);
    }
    if (hi == 0.0 || (hi - lo) / hi < controls_.qss_tol) {
      result.reached_quasi_steady = true;
      break;
    }
  }
  return result;
}

Eigen::VectorXd ReactiveSimulation::remaining_fractions() const
{
  Eigen::VectorXd out(static_cast<Eigen::Index>(state_.cells.size()));
  for (std::size_t i = 0; i < state_.cells.size(); ++i)
    out(static_cast<Eigen::Index>(i)) = state_.cells[i].remaining_fraction();
  return out;
}

void write_result_csv(const std::filesystem::path& path, const FractureNetwork& network,
                      const ReactiveState& state)
{
  std::ofstream out(path);
  if (!out)
    throw std::runtime_error("cannot write " + path.string());
  out << "fracture_id,V_o,V_final,remaining_fraction\n" << std::setprecision(17);
  for (std::size_t i = 0; i < state.cells.size(); ++i) {
    const auto& c = state.cells[i];
    out << network.fractures[i].id << ',' << c.initial_quartz_volume << ',' << c.quartz_volume
        << ',' << c.remaining_fraction() << '\n';
  }
}

void write_history_csv(const std::filesystem::path& path, const ReactiveState& state)
{
  std::ofstream out(path);
  if (!out)
    throw std::runtime_error("cannot write " + path.string());
  out << "time_s,outflow_c_mol_per_L,total_quartz_m3\n" << std::setprecision(17);
  for (const auto& h : state.history)
    out << h.time << ',' << h.outflow_silica << ',' << h.total_quartz << '\n';
}

} // namespace fracnet
