#pragma once

#include "fracnet/dfn.hpp"

#include <Eigen/Dense>

#include <filesystem>
#include <utility>
#include <vector>

namespace fracnet {

/// Fracture intersection graph. Nodes 0..n-1 are fractures (in network
/// order); node n is the source s (inlet plane) and n+1 the target t (outlet).
class NetworkGraph {
public:
  using Edge = std::pair<int, int>;

  /// Fracture-fracture edges plus the inlet/outlet attachments.
  NetworkGraph(int fracture_count, const std::vector<Edge>& fracture_edges,
               const std::vector<int>& inlet_nodes, const std::vector<int>& outlet_nodes);

  int fracture_count() const { return fracture_count_; }
  int node_count() const { return fracture_count_ + 2; }
  int source() const { return fracture_count_; }
  int target() const { return fracture_count_ + 1; }
  bool is_terminal(int node) const { return node >= fracture_count_; }

  /// Every edge, fracture-fracture edges first, then s/t attachments.
  const std::vector<Edge>& edges() const { return edges_; }
  std::size_t fracture_edge_count() const { return fracture_edge_count_; }
  const std::vector<int>& neighbours(int node) const { return adjacency_[node]; }

  /// Fracture id per fracture node (identity when built from raw edges).
  std::vector<int> fracture_ids;

  Eigen::MatrixXd adjacency_matrix() const;
  Eigen::MatrixXd laplacian() const;

private:
  int fracture_count_;
  std::size_t fracture_edge_count_;
  std::vector<Edge> edges_;
  std::vector<std::vector<int>> adjacency_;
};

NetworkGraph to_graph(const FractureNetwork& network);

/// Moore-Penrose pseudoinverse of a symmetric positive semi-definite matrix
/// through its eigendecomposition; eigenvalues below rel_tol * max are
/// treated as zero.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic>
symmetric_pseudoinverse(const Eigen::MatrixBase<Derived>& m,
                        typename Derived::Scalar rel_tol = typename Derived::Scalar(1e-10))
{
  using Scalar = typename Derived::Scalar;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  Eigen::SelfAdjointEigenSolver<Matrix> solver(m.derived());
  const auto& values = solver.eigenvalues();
  const Scalar cutoff = rel_tol * values.cwiseAbs().maxCoeff();
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> inverted(values.size());
  for (Eigen::Index k = 0; k < values.size(); ++k)
    inverted(k) = std::abs(values(k)) > cutoff ? Scalar(1) / values(k) : Scalar(0);
  const Matrix& vectors = solver.eigenvectors();
  return vectors * inverted.asDiagonal() * vectors.transpose();
}

struct DegreeFeatures {
  Eigen::VectorXi degree;
  Eigen::VectorXd centrality;
};

/// Degree over fracture-fracture edges only; centrality = degree / (n - 1).
DegreeFeatures degree_and_centrality(const NetworkGraph& g);

/// Normalised betweenness over ordered pairs of fracture nodes, Brandes
/// accumulation. With include_terminals, s and t also act as path endpoints
/// and intermediates and enter the normalisation.
Eigen::VectorXd betweenness(const NetworkGraph& g, bool include_terminals = false);

struct CurrentFlow {
  Eigen::VectorXd potential;    ///< per node, unit injection at s, extraction at t
  Eigen::VectorXd edge_current; ///< |potential difference| per edge in g.edges()
  Eigen::VectorXd node_current; ///< half the summed incident current; 1 at s and t
};

/// Unit-resistance current flow from s to t via the Laplacian pseudoinverse.
/// Currents below 1e-12 of the largest edge current are round-off and set to 0.
CurrentFlow current_flow(const NetworkGraph& g);

struct BackbonePartition {
  std::vector<char> primary; ///< per fracture node
  Eigen::VectorXd edge_currents;

  std::vector<int> primary_nodes() const;
  std::vector<int> secondary_nodes() const;
};

inline constexpr double kBackboneEpsilon = 1e-16;

BackbonePartition extract_backbone(const NetworkGraph& g, const CurrentFlow& flow,
                                   double eps = kBackboneEpsilon);

/// Hop count from each fracture node to the nearest primary node.
Eigen::VectorXi distance_to_backbone(const NetworkGraph& g, const BackbonePartition& partition);

struct TopologicalFeatures {
  Eigen::VectorXi degree;
  Eigen::VectorXd degree_centrality;
  Eigen::VectorXi distance_to_backbone;
  Eigen::VectorXd betweenness;
  Eigen::VectorXd current_flow;
  BackbonePartition backbone;
};

TopologicalFeatures topological_features(const NetworkGraph& g, bool include_terminals = false);

/// Edge list dump: one "u v" line per edge, with terminals written as s and t.
void write_edge_list(const NetworkGraph& g, const std::filesystem::path& path);

} // namespace fracnet
