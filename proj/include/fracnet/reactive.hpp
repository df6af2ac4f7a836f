#pragma once

#include "fracnet/dfn.hpp"
#include "fracnet/pipe_flow.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <filesystem>
#include <memory>
#include <vector>

namespace fracnet {

// mol/L -> mol/m^3
inline constexpr double kLitresPerCubicMetre = 1000.0;

struct ChemistryConstants {
  double equilibrium_constant = std::pow(10.0, -3.9993); ///< K_eq, mol/L, quartz at 25 C
  double specific_surface_area = 0.0225;                 ///< m^2/g
  double quartz_density = 2650.0;                        ///< kg/m^3
  double molar_volume = 22.6880e-6;                      ///< m^3/mol
  double diffusion = 1e-12;                              ///< m^2/s
  double inflow_silica = 1e-20;                          ///< mol/L
  double initial_porosity = 0.2;

  double equilibrium_mol_per_m3() const { return equilibrium_constant * kLitresPerCubicMetre; }
  /// Quartz surface area per unit quartz volume, m^2/m^3.
  double area_per_volume() const { return specific_surface_area * 1000.0 * quartz_density; }
};

/// Porosity-permeability and mineral-area laws.
struct PermeabilityLaw {
  double exponent = 3.0;           ///< a
  double critical_porosity = 0.01; ///< phi_c
  double f_min = 1e-6;
  double n = 2.0 / 3.0;
  double n_prime = 0.0;

  double factor(double porosity, double initial_porosity) const
  {
    if (porosity <= critical_porosity)
      return f_min;
    return std::pow((porosity - critical_porosity) / (initial_porosity - critical_porosity), exponent);
  }
};

struct ReactiveCell {
  double total_volume = 0.0; ///< fracture volume, m^3
  double quartz_volume = 0.0;
  double initial_quartz_volume = 0.0;
  double quartz_area = 0.0;
  double initial_area = 0.0;
  double porosity = 0.0;
  double initial_porosity = 0.0;
  double mineral_fraction = 0.0;
  double permeability_factor = 1.0;
  double silica = 0.0; ///< mol/L
  double fluid_volume = 0.0;

  double remaining_fraction() const
  {
    return initial_quartz_volume > 0.0 ? quartz_volume / initial_quartz_volume : 0.0;
  }
};

/// TST dissolution rate per unit fluid volume (mol m^-3 s^-1), never negative.
double dissolution_rate(const ReactiveCell& cell, double silica_mol_per_l, double rate_constant,
                        const ChemistryConstants& chem);

struct CellUpdate {
  ReactiveCell cell;
  double dissolved_moles = 0.0; ///< actually removed
  double clamped_moles = 0.0;   ///< requested beyond the available quartz
};

/// Removes quartz and refreshes area, porosity and permeability factor.
CellUpdate update_geometry_chemistry(const ReactiveCell& cell, double dissolved_moles,
                                     const ChemistryConstants& chem, const PermeabilityLaw& law);

struct SimulationControls {
  double horizon_years = 1e7;
  int qss_window = 10;
  double qss_tol = 1e-4;
  double max_loss_fraction = 0.05; ///< of V_o per cell per step
  double max_dt_years = 1e4;
  double flow_refresh_tol = 0.01;
  double min_dt_seconds = 1.0;
  bool qss_full_steps_only = true; ///< window counts only steps at the dt cap
};

struct HistoryPoint {
  double time = 0.0;         ///< s
  double outflow_silica = 0.0; ///< mol/L, flux-weighted
  double total_quartz = 0.0; ///< m^3
};

struct MassLedger {
  double removed = 0.0;  ///< mol of quartz dissolved
  double exported = 0.0; ///< mol leaving through the reservoirs
  double imported = 0.0; ///< mol entering with the inflow
  double clamped = 0.0;  ///< mol requested beyond available quartz
  double initial_inventory = 0.0;
  double inventory = 0.0; ///< mol in the fluid at the last transport state
  double max_step_error = 0.0;

  /// removed - (inventory change + exported - imported - clamped), relative.
  double cumulative_error() const;
};

struct ReactiveState {
  std::vector<ReactiveCell> cells;
  double time = 0.0;
  double rate_constant = 0.0;
  FlowSolution flow;
  std::vector<HistoryPoint> history;
  MassLedger ledger;
};

struct TransportSolution {
  Eigen::VectorXd silica;   ///< mol/L per cell
  Eigen::VectorXd source;   ///< mol/s dissolution per cell
  double export_rate = 0.0; ///< mol/s
  double import_rate = 0.0; ///< mol/s
  double inventory = 0.0;   ///< mol in the fluid
};

struct StepReport {
  double dt = 0.0;
  double removed = 0.0;
  double ledger_error = 0.0; ///< relative
  bool flow_refreshed = false;
};

struct QuasiSteadyResult {
  bool reached_quasi_steady = false; ///< false when the horizon ended the run
  std::size_t steps = 0;
};

/// Quasi-static dissolution on the pipe network: steady flow and steady
/// advection-diffusion-reaction between explicit quartz updates.
class ReactiveSimulation {
public:
  ReactiveSimulation(const FractureNetwork& network, double rate_constant,
                     const ChemistryConstants& chem = {}, const PermeabilityLaw& law = {},
                     const SimulationControls& controls = {},
                     double viscosity = kWaterViscosity);
  ~ReactiveSimulation();
  ReactiveSimulation(ReactiveSimulation&&) noexcept;
  ReactiveSimulation& operator=(ReactiveSimulation&&) noexcept;

  const ReactiveState& state() const { return state_; }
  const PipeModel& pipe_model() const { return model_; }
  double total_rate() const { return total_rate_; }
  const ChemistryConstants& chemistry() const { return chem_; }

  /// Steady silica field for the current quartz state and flow.
  TransportSolution solve_transport();

  /// One step of fixed length (seconds).
  StepReport step(double dt);
  /// One step with the adaptive step size.
  StepReport advance();
  QuasiSteadyResult run_to_quasi_steady();

  Eigen::VectorXd remaining_fractions() const;

private:
  bool refresh_flow_if_needed();
  StepReport apply(const TransportSolution& transport, double dt, bool refreshed);
  double adaptive_dt(const TransportSolution& transport) const;

  PipeModel model_;
  ChemistryConstants chem_;
  PermeabilityLaw law_;
  SimulationControls controls_;
  double total_rate_;
  Eigen::VectorXd diffusive_;        ///< per pipe, m^3/s
  Eigen::VectorXd solved_conductance_;
  ReactiveState state_;
  struct Solver;
  std::unique_ptr<Solver> solver_;
};

void write_result_csv(const std::filesystem::path& path, const FractureNetwork& network,
                      const ReactiveState& state);
void write_history_csv(const std::filesystem::path& path, const ReactiveState& state);

} // namespace fracnet
