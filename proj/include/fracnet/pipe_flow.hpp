#pragma once

#include "fracnet/dfn.hpp"

#include <Eigen/Dense>

#include <filesystem>
#include <vector>

namespace fracnet {

inline constexpr double kSecondsPerYear = 3.1536e7;
inline constexpr double kWaterViscosity = 1e-3;
inline constexpr double kMinPipeLength = 1e-9;

/// One channel of the pipe network. `a` is always a fracture node; `b` is a
/// fracture node or a reservoir node. The channel length is split into the
/// part inside fracture a and the part inside fracture b (zero for a
/// reservoir), so per-fracture permeability factors combine in series.
struct Pipe {
  int a = 0;
  int b = 0;
  double width = 0.0;
  double length_a = 0.0;
  double length_b = 0.0;
  double aperture = 0.0;

  double length() const { return length_a + length_b; }
};

class PipeModel {
public:
  PipeModel(int fracture_count, std::vector<Pipe> pipes, double viscosity);

  int fracture_count() const { return fracture_count_; }
  int node_count() const { return fracture_count_ + 2; }
  int inlet() const { return fracture_count_; }
  int outlet() const { return fracture_count_ + 1; }
  bool is_reservoir(int node) const { return node >= fracture_count_; }
  const std::vector<Pipe>& pipes() const { return pipes_; }
  double viscosity() const { return viscosity_; }

  /// Cubic-law conductances with a per-fracture permeability multiplier.
  Eigen::VectorXd conductances(const Eigen::VectorXd& perm_factor) const;
  Eigen::VectorXd conductances() const;

  /// Pipes incident to each node (indices into pipes()).
  const std::vector<std::vector<int>>& incident() const { return incident_; }

  std::size_t clamped_lengths = 0;

private:
  int fracture_count_;
  std::vector<Pipe> pipes_;
  double viscosity_;
  std::vector<std::vector<int>> incident_;
};

/// Pipe conductance of a channel of aperture b, width w, length L.
inline double cubic_law_conductance(double aperture, double width, double length, double viscosity)
{
  return aperture * aperture * aperture / (12.0 * viscosity) * width / length;
}

/// Permeability of a parallel-plate fracture of the given aperture.
inline double cubic_law_permeability(double aperture) { return aperture * aperture / 12.0; }

/// One node per fracture at its disc center, one pipe per intersection
/// routed through the intersection midpoint, and reservoir pipes from
/// boundary-touching fractures to the inlet and outlet walls.
PipeModel build_pipe_model(const FractureNetwork& network, double viscosity = kWaterViscosity);

struct FlowSolution {
  Eigen::VectorXd pressure;  ///< per node, outlet at 0
  Eigen::VectorXd pipe_flow; ///< signed, positive from pipe.a to pipe.b
  Eigen::VectorXd fracture_q;
  double total_throughput = 0.0;
};

/// Steady nodal solve scaled so the net inlet flow equals total_rate.
FlowSolution solve_flow(const PipeModel& model, const Eigen::VectorXd& conductance,
                        double total_rate);
FlowSolution solve_flow(const PipeModel& model, double total_rate);

/// Half the summed absolute pipe flow at each fracture, reservoir pipes included.
Eigen::VectorXd fracture_flow_rate(const PipeModel& model, const Eigen::VectorXd& pipe_flow);

/// Total rate equal to the network volume per year.
double network_volume_per_year(const FractureNetwork& network);

struct HydroConstants {
  double diffusion = 1e-12;          ///< m^2/s
  double molar_volume = 22.6880e-6;  ///< m^3/mol, quartz
  double damkohler_cap = 1e12;       ///< Da_I reported for stagnant fractures
};

struct HydroFeatures {
  Eigen::VectorXd volumetric_flow_rate;
  Eigen::VectorXd peclet;
  Eigen::VectorXd damkohler_advective;
  Eigen::VectorXd damkohler_diffusive;
  double rate_velocity = 0.0; ///< k' = k Vm, m/s
};

HydroFeatures hydro_features(const Eigen::VectorXd& fracture_q, const FractureNetwork& network,
                             double rate_constant, const HydroConstants& constants = {});

void write_flow_csv(const std::filesystem::path& path, const FractureNetwork& network,
                    const FlowSolution& flow, const HydroFeatures& hydro);

} // namespace fracnet
