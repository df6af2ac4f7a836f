#pragma once

#include "fracnet/dfn.hpp"
#include "fracnet/forest.hpp"
#include "fracnet/pipe_flow.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace fracnet {

inline constexpr const char* kDatasetSchema = "fracnet-dataset/1";

enum class FeatureCategory { control, topological, geometric, hydrological };

struct FeatureColumn {
  const char* name;
  FeatureCategory category;
};

/// Feature columns in dataset order.
const std::vector<FeatureColumn>& feature_columns();
std::vector<std::string> feature_names(FeatureCategory category);

/// RF-1 = rate constant + topological, RF-2 adds geometric, RF-3 adds hydrological.
std::vector<std::string> feature_set(int level);

/// Per-fracture features that do not depend on the rate constant.
struct NetworkFeatures {
  std::vector<int> fracture_id;
  Eigen::MatrixXd values; ///< fractures x feature_columns(), hydrological Da columns unset
  double total_rate = 0.0;
};

/// Graph, geometric and initial-flow features of a pruned network.
NetworkFeatures compute_network_features(FractureNetwork& network, const HydroConstants& hydro = {},
                                         bool include_terminals = false,
                                         double viscosity = kWaterViscosity);

/// Feature rows for one rate constant (adds rate_constant, Da_I, Da_II).
Eigen::MatrixXd rows_for_rate(const NetworkFeatures& features, const FractureNetwork& network,
                              double rate_constant, const HydroConstants& hydro = {});

void write_network_features_csv(const NetworkFeatures& features, const std::filesystem::path& path);

/// Full dataset: one row per (network, rate constant, fracture).
struct Dataset {
  FeatureTable table; ///< every feature column, target = remaining_fraction
  std::vector<std::uint64_t> seed;
  std::vector<int> fracture_id;
  Eigen::VectorXd initial_quartz;
  Eigen::VectorXd final_quartz;
  std::string config_hash; ///< as read from the file header

  Eigen::Index rows() const { return table.rows(); }
  /// Row indices with the given rate constant (exact match).
  std::vector<Eigen::Index> rows_with_rate(double rate_constant) const;
  std::vector<double> rate_constants() const;
};

/// CSV with a leading `# schema=... config_hash=...` line.
void write_dataset_csv(const Dataset& data, const std::filesystem::path& path,
                       const std::string& config_hash);
Dataset read_dataset_csv(const std::filesystem::path& path);

} // namespace fracnet
