#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <optional>
#include <utility>

namespace fracnet {

template <typename Scalar>
using Vector3 = Eigen::Matrix<Scalar, 3, 1>;

// Planar polygon stored column-wise, vertices in order.
template <typename Scalar>
using Polygon3 = Eigen::Matrix<Scalar, 3, Eigen::Dynamic>;

using Vector3d = Vector3<double>;
using Polygon3d = Polygon3<double>;

/// Orthonormal in-plane basis (u, v) for a unit normal. Deterministic: u is
/// built against the coordinate axis least aligned with the normal.
template <typename Scalar>
std::pair<Vector3<Scalar>, Vector3<Scalar>> plane_basis(const Vector3<Scalar>& normal)
{
  Eigen::Index axis = 0;
  normal.cwiseAbs().minCoeff(&axis);
  Vector3<Scalar> e = Vector3<Scalar>::Zero();
  e(axis) = Scalar(1);
  Vector3<Scalar> u = normal.cross(e).normalized();
  Vector3<Scalar> v = normal.cross(u);
  return {u, v};
}

/// Regular polygon with `sides` vertices inscribed in the disc.
template <typename Scalar>
Polygon3<Scalar> disc_polygon(const Vector3<Scalar>& center, const Vector3<Scalar>& normal,
                              Scalar radius, int sides)
{
  const auto [u, v] = plane_basis<Scalar>(normal);
  Polygon3<Scalar> poly(3, sides);
  for (int k = 0; k < sides; ++k) {
    const Scalar theta = Scalar(2) * std::numbers::pi_v<Scalar> * Scalar(k) / Scalar(sides);
    poly.col(k) = center + radius * (std::cos(theta) * u + std::sin(theta) * v);
  }
  return poly;
}

/// Area of the n-gon inscribed in a circle of the given radius.
template <typename Scalar>
Scalar inscribed_polygon_area(Scalar radius, int sides)
{
  return Scalar(0.5) * Scalar(sides) * radius * radius *
         std::sin(Scalar(2) * std::numbers::pi_v<Scalar> / Scalar(sides));
}

// Newell's method: half the norm of the summed edge cross products.
template <typename Scalar>
Vector3<Scalar> polygon_area_vector(const Polygon3<Scalar>& poly)
{
  Vector3<Scalar> acc = Vector3<Scalar>::Zero();
  const Eigen::Index n = poly.cols();
  for (Eigen::Index k = 0; k < n; ++k)
    acc += poly.col(k).cross(poly.col((k + 1) % n));
  return Scalar(0.5) * acc;
}

template <typename Scalar>
Scalar polygon_area(const Polygon3<Scalar>& poly)
{
  if (poly.cols() < 3)
    return Scalar(0);
  return polygon_area_vector(poly).norm();
}

/// Area centroid of a planar polygon (fan triangulation from vertex 0).
template <typename Scalar>
Vector3<Scalar> polygon_centroid(const Polygon3<Scalar>& poly)
{
  const Eigen::Index n = poly.cols();
  if (n == 0)
    return Vector3<Scalar>::Zero();
  Vector3<Scalar> mean = poly.rowwise().mean();
  if (n < 3)
    return mean;
  const Vector3<Scalar> normal = polygon_area_vector(poly);
  const Scalar norm2 = normal.squaredNorm();
  if (norm2 == Scalar(0))
    return mean;
  Vector3<Scalar> acc = Vector3<Scalar>::Zero();
  Scalar total = 0;
  for (Eigen::Index k = 1; k + 1 < n; ++k) {
    const Vector3<Scalar> a = poly.col(0), b = poly.col(k), c = poly.col(k + 1);
    const Scalar w = (b - a).cross(c - a).dot(normal);
    acc += w * (a + b + c) / Scalar(3);
    total += w;
  }
  return total == Scalar(0) ? mean : Vector3<Scalar>(acc / total);
}

/// Sutherland-Hodgman clip of a convex or simple polygon against the
/// half-space  sign * (x[axis] - offset) >= 0.
template <typename Scalar>
Polygon3<Scalar> clip_half_space(const Polygon3<Scalar>& poly, int axis, Scalar offset, Scalar sign)
{
  const Eigen::Index n = poly.cols();
  Polygon3<Scalar> out(3, 2 * n);
  Eigen::Index m = 0;
  for (Eigen::Index k = 0; k < n; ++k) {
    const Vector3<Scalar> a = poly.col(k);
    const Vector3<Scalar> b = poly.col((k + 1) % n);
    const Scalar da = sign * (a(axis) - offset);
    const Scalar db = sign * (b(axis) - offset);
    if (da >= 0)
      out.col(m++) = a;
    if ((da >= 0) != (db >= 0)) {
      const Scalar t = da / (da - db);
      Vector3<Scalar> p = a + t * (b - a);
      p(axis) = offset;
      out.col(m++) = p;
    }
  }
  out.conservativeResize(3, m);
  return out;
}

/// Clip a polygon to the axis-aligned box [lo, hi]^3.
template <typename Scalar>
Polygon3<Scalar> clip_to_box(Polygon3<Scalar> poly, Scalar lo, Scalar hi)
{
  for (int axis = 0; axis < 3 && poly.cols() > 0; ++axis) {
    poly = clip_half_space<Scalar>(poly, axis, lo, Scalar(1));
    if (poly.cols() > 0)
      poly = clip_half_space<Scalar>(poly, axis, hi, Scalar(-1));
  }
  return poly;
}

/// Parameter interval along direction `dir` (relative to the origin) covered
/// by the chord where a convex polygon crosses the plane n.x = d.
template <typename Scalar>
std::optional<std::pair<Scalar, Scalar>> plane_chord(const Polygon3<Scalar>& poly,
                                                     const Vector3<Scalar>& n, Scalar d,
                                                     const Vector3<Scalar>& dir,
                                                     Scalar on_plane_tol)
{
  const Eigen::Index count = poly.cols();
  bool found = false;
  Scalar lo = 0, hi = 0;
  auto take = [&](const Vector3<Scalar>& p) {
    const Scalar s = dir.dot(p);
    if (!found) {
      lo = hi = s;
      found = true;
    } else {
      lo = std::min(lo, s);
      hi = std::max(hi, s);
    }
  };
  for (Eigen::Index k = 0; k < count; ++k) {
    const Vector3<Scalar> a = poly.col(k);
    const Vector3<Scalar> b = poly.col((k + 1) % count);
    const Scalar da = n.dot(a) - d;
    const Scalar db = n.dot(b) - d;
    if (std::abs(da) <= on_plane_tol)
      take(a);
    if ((da > on_plane_tol && db < -on_plane_tol) || (da < -on_plane_tol && db > on_plane_tol))
      take(a + (da / (da - db)) * (b - a));
  }
  if (!found)
    return std::nullopt;
  return std::make_pair(lo, hi);
}

} // namespace fracnet
