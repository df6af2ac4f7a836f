#include "fracnet/dfn.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <random>
#include <stdexcept>
#include <tuple>
#include <unordered_map>

namespace fracnet {

int FractureNetwork::index_of(int id) const
{
  for (std::size_t i = 0; i < fractures.size(); ++i)
    if (fractures[i].id == id)
      return static_cast<int>(i);
  return -1;
}

void update_area(Fracture& f)
{
  f.surface_area = polygon_area(f.vertices);
  f.total_volume = f.surface_area * f.aperture;
}

Fracture make_disc_fracture(int id, const Vector3d& center, const Vector3d& normal, double radius,
                            double aperture, int sides)
{
  if (sides < 3)
    throw std::invalid_argument("disc polygon needs at least 3 sides");
  Fracture f;
  f.id = id;
  f.center = center;
  f.normal = normal.normalized();
  f.radius = radius;
  f.aperture = aperture;
  f.vertices = disc_polygon<double>(center, f.normal, radius, sides);
  update_area(f);
  return f;
}

std::optional<IntersectionSegment> disc_intersection(const Fracture& fa, const Fracture& fb)
{
  // Canonical order makes the result independent of argument order.
  const Fracture& a = fa.id <= fb.id ? fa : fb;
  const Fracture& b = fa.id <= fb.id ? fb : fa;

  const Vector3d n1 = a.normal;
  const Vector3d n2 = b.normal;
  const Vector3d t = n1.cross(n2);
  const double t2 = t.squaredNorm();
  // Parallel and coplanar pairs never intersect.
  if (t2 < 1e-24)
    return std::nullopt;

  const double d1 = n1.dot(a.center);
  const double d2 = n2.dot(b.center);
  const Vector3d dir = t / std::sqrt(t2);
  const Vector3d origin = (d1 * n2.cross(t) + d2 * t.cross(n1)) / t2;

  constexpr double on_plane = 1e-12;
  const auto chord_a = plane_chord<double>(a.vertices, n2, d2, dir, on_plane);
  if (!chord_a)
    return std::nullopt;
  const auto chord_b = plane_chord<double>(b.vertices, n1, d1, dir, on_plane);
  if (!chord_b)
    return std::nullopt;

  const double lo = std::max(chord_a->first, chord_b->first);
  const double hi = std::min(chord_a->second, chord_b->second);
  if (hi - lo <= kMinIntersectionLength)
    return std::nullopt;

  IntersectionSegment seg;
  seg.fracture_a = a.id;
  seg.fracture_b = b.id;
  seg.p0 = origin + lo * dir;
  seg.p1 = origin + hi * dir;
  seg.length = hi - lo;
  return seg;
}

namespace {

bool edge_on_plane(const Polygon3d& poly, double x_plane, Eigen::Index k)
{
  const Eigen::Index n = poly.cols();
  return std::abs(poly(0, k) - x_plane) <= kBoundaryTolerance &&
         std::abs(poly(0, (k + 1) % n) - x_plane) <= kBoundaryTolerance &&
         (poly.col(k) - poly.col((k + 1) % n)).norm() > kBoundaryTolerance;
}

} // namespace

double boundary_trace_length(const Fracture& f, double x_plane)
{
  double length = 0.0;
  const Eigen::Index n = f.vertices.cols();
  for (Eigen::Index k = 0; k < n; ++k)
    if (edge_on_plane(f.vertices, x_plane, k))
      length += (f.vertices.col(k) - f.vertices.col((k + 1) % n)).norm();
  return length;
}

std::optional<Fracture> truncate_to_domain(const Fracture& f, const DomainBox& domain)
{
  if (f.vertices.cols() == 0)
    throw std::invalid_argument("cannot truncate an empty polygon");
  Fracture out = f;
  out.vertices = clip_to_box<double>(f.vertices, 0.0, domain.side_length);
  update_area(out);
  if (out.vertices.cols() < 3 || out.surface_area < kMinFractureArea)
    return std::nullopt;
  out.touches_inlet = boundary_trace_length(out, 0.0) > 0.0;
  out.touches_outlet = boundary_trace_length(out, domain.side_length) > 0.0;
  return out;
}

std::vector<IntersectionSegment> compute_intersections(const std::vector<Fracture>& fractures)
{
  std::vector<IntersectionSegment> segments;
  for (std::size_t i = 0; i < fractures.size(); ++i) {
    for (std::size_t j = i + 1; j < fractures.size(); ++j) {
      const Fracture& a = fractures[i];
      const Fracture& b = fractures[j];
      if ((a.center - b.center).norm() > a.radius + b.radius)
        continue;
      if (auto seg = disc_intersection(a, b))
        segments.push_back(*seg);
    }
  }
  std::sort(segments.begin(), segments.end(), [](const auto& x, const auto& y) {
    return std::tie(x.fracture_a, x.fracture_b) < std::tie(y.fracture_a, y.fracture_b);
  });
  return segments;
}

double p32(const std::vector<Fracture>& fractures, const DomainBox& domain)
{
  double area = 0.0;
  for (const auto& f : fractures)
    area += f.surface_area;
  return area / domain.volume();
}

std::vector<GeometricFeatures> geometric_features(FractureNetwork& network)
{
  std::unordered_map<int, double> trace_length;
  for (const auto& seg : network.intersections) {
    trace_length[seg.fracture_a] += seg.length;
    trace_length[seg.fracture_b] += seg.length;
  }
  std::vector<GeometricFeatures> out;
  out.reserve(network.fractures.size());
  for (auto& f : network.fractures) {
    update_area(f);
    const double yz = std::sqrt(f.normal.y() * f.normal.y() + f.normal.z() * f.normal.z());
    f.projected_volume = f.total_volume * yz;
    const auto it = trace_length.find(f.id);
    f.intersection_area = f.aperture * (it == trace_length.end() ? 0.0 : it->second);
    out.push_back({f.surface_area, f.total_volume, f.projected_volume, f.intersection_area});
  }
  return out;
}

FractureNetwork generate_unpruned(const GenerationParams& params, std::uint64_t seed)
{
  if (!(params.target_p32 > 0.0))
    throw std::invalid_argument("target_p32 must be positive");
  if (!(params.side_length > 0.0) || params.margin < 0.0)
    throw std::invalid_argument("invalid domain box");
  if (!(params.radius > 0.0) || !(params.radius < params.side_length / 2.0))
    throw std::invalid_argument("radius must lie in (0, side_length/2)");

  FractureNetwork network;
  network.domain = {params.side_length, params.margin};
  network.params = params;
  network.rng_seed = seed;

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> position(-params.margin,
                                                  params.side_length + params.margin);
  std::normal_distribution<double> gauss(0.0, 1.0);

  const double target_area = params.target_p32 * network.domain.volume();
  double area = 0.0;
  int next_id = 0;
  constexpr long kMaxAttempts = 10'000'000;
  for (long attempt = 0; area < target_area; ++attempt) {
    if (attempt >= kMaxAttempts)
      throw std::runtime_error("fracture placement did not reach the target intensity");
    Vector3d center;
    for (int k = 0; k < 3; ++k)
      center(k) = position(rng);
    Vector3d normal;
    do {
      for (int k = 0; k < 3; ++k)
        normal(k) = gauss(rng);
    } while (normal.squaredNorm() < 1e-20);

    auto disc = make_disc_fracture(next_id, center, normal, params.radius, params.aperture,
                                   params.polygon_sides);
    if (auto kept = truncate_to_domain(disc, network.domain)) {
      area += kept->surface_area;
      network.fractures.push_back(std::move(*kept));
      ++next_id;
    }
  }

  network.intersections = compute_intersections(network.fractures);
  network.p32_achieved = p32(network.fractures, network.domain);
  geometric_features(network);
  return network;
}

std::optional<FractureNetwork> prune_isolated(const FractureNetwork& network)
{
  const std::size_t n = network.fractures.size();
  std::unordered_map<int, std::size_t> index;
  for (std::size_t i = 0; i < n; ++i)
    index[network.fractures[i].id] = i;

  std::vector<std::vector<std::size_t>> adjacency(n);
  for (const auto& seg : network.intersections) {
    const auto a = index.at(seg.fracture_a);
    const auto b = index.at(seg.fracture_b);
    adjacency[a].push_back(b);
    adjacency[b].push_back(a);
  }

  auto reach = [&](auto touches) {
    std::vector<char> seen(n, 0);
    std::queue<std::size_t> frontier;
    for (std::size_t i = 0; i < n; ++i)
      if (touches(network.fractures[i])) {
        seen[i] = 1;
        frontier.push(i);
      }
    while (!frontier.empty()) {
      const auto u = frontier.front();
      frontier.pop();
      for (auto v : adjacency[u])
        if (!seen[v]) {
          seen[v] = 1;
          frontier.push(v);
        }
    }
    return seen;
  };
  const auto from_inlet = reach([](const Fracture& f) { return f.touches_inlet; });
  const auto from_outlet = reach([](const Fracture& f) { return f.touches_outlet; });

  FractureNetwork out;
  out.domain = network.domain;
  out.params = network.params;
  out.rng_seed = network.rng_seed;
  std::vector<char> keep(n, 0);
  for (std::size_t i = 0; i < n; ++i)
    if (from_inlet[i] && from_outlet[i]) {
      keep[i] = 1;
      out.fractures.push_back(network.fractures[i]);
    }
  if (out.fractures.empty())
    return std::nullopt;
  for (const auto& seg : network.intersections)
    if (keep[index.at(seg.fracture_a)] && keep[index.at(seg.fracture_b)])
      out.intersections.push_back(seg);
  out.p32_achieved = p32(out.fractures, out.domain);
  geometric_features(out);
  return out;
}

GenerationOutcome generate_network(const GenerationParams& params, std::uint64_t seed)
{
  const FractureNetwork raw = generate_unpruned(params, seed);
  GenerationOutcome outcome;
  outcome.fractures_before_pruning = raw.fractures.size();
  outcome.p32_before_pruning = raw.p32_achieved;
  outcome.network = prune_isolated(raw);
  return outcome;
}

} // namespace fracnet
