#pragma once

#include "fracnet/geometry.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace fracnet {

struct DomainBox {
  double side_length = 10.0;
  double generation_margin = 0.5;

  double volume() const { return side_length * side_length * side_length; }
};

struct GenerationParams {
  double side_length = 10.0;
  double radius = 1.5;
  double target_p32 = 3.25;
  double aperture = 1e-5;
  double margin = 0.5;
  int polygon_sides = 16;
};

struct Fracture {
  int id = 0;
  Vector3d center = Vector3d::Zero();
  Vector3d normal = Vector3d::UnitZ();
  double radius = 0.0;
  Polygon3d vertices;
  double aperture = 0.0;
  double surface_area = 0.0;
  double total_volume = 0.0;
  double projected_volume = 0.0;
  double intersection_area = 0.0;
  bool touches_inlet = false;
  bool touches_outlet = false;
};

struct IntersectionSegment {
  int fracture_a = 0;
  int fracture_b = 0;
  Vector3d p0 = Vector3d::Zero();
  Vector3d p1 = Vector3d::Zero();
  double length = 0.0;
};

struct FractureNetwork {
  DomainBox domain;
  GenerationParams params;
  std::vector<Fracture> fractures;
  std::vector<IntersectionSegment> intersections;
  double p32_achieved = 0.0;
  std::uint64_t rng_seed = 0;

  /// Position of the fracture with the given id, or -1.
  int index_of(int id) const;
};

/// Result of generation: `network` is empty when no inlet-to-outlet cluster
/// survives pruning (a "disconnected network").
struct GenerationOutcome {
  std::optional<FractureNetwork> network;
  std::size_t fractures_before_pruning = 0;
  double p32_before_pruning = 0.0;

  bool disconnected() const { return !network.has_value(); }
};

// Contacts shorter than this are treated as no intersection.
inline constexpr double kMinIntersectionLength = 1e-9;
inline constexpr double kBoundaryTolerance = 1e-9;
inline constexpr double kMinFractureArea = 1e-12;

/// Builds a fracture from disc parameters, polygonised with `sides` vertices.
Fracture make_disc_fracture(int id, const Vector3d& center, const Vector3d& normal, double radius,
                            double aperture, int sides);

/// Refreshes surface_area and total_volume from the polygon.
void update_area(Fracture& f);

std::optional<IntersectionSegment> disc_intersection(const Fracture& a, const Fracture& b);

/// Clips to the box; empty or degenerate results are discarded (nullopt).
std::optional<Fracture> truncate_to_domain(const Fracture& f, const DomainBox& domain);

/// All pairwise intersections, ordered by (fracture_a, fracture_b).
std::vector<IntersectionSegment> compute_intersections(const std::vector<Fracture>& fractures);

/// Network with fractures placed until the target intensity is reached,
/// truncated and intersected but not yet pruned.
FractureNetwork generate_unpruned(const GenerationParams& params, std::uint64_t seed);

/// Keeps only clusters connected to both the inlet and the outlet plane.
std::optional<FractureNetwork> prune_isolated(const FractureNetwork& network);

GenerationOutcome generate_network(const GenerationParams& params, std::uint64_t seed);

struct GeometricFeatures {
  double surface_area = 0.0;
  double total_volume = 0.0;
  double projected_volume = 0.0;
  double intersection_area = 0.0;
};

/// Computes per-fracture geometric features and stores them on the fractures.
std::vector<GeometricFeatures> geometric_features(FractureNetwork& network);

/// Length of the polygon trace lying on the plane x = x_plane.
double boundary_trace_length(const Fracture& f, double x_plane);

double p32(const std::vector<Fracture>& fractures, const DomainBox& domain);

} // namespace fracnet
