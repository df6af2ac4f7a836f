#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace fracnet {

/// Coefficient of determination 1 - SSE/SST.
template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar r2_score(const Eigen::MatrixBase<DerivedA>& y,
                                   const Eigen::MatrixBase<DerivedB>& yhat)
{
  using Scalar = typename DerivedA::Scalar;
  if (y.size() != yhat.size())
    throw std::invalid_argument("size mismatch");
  if (y.size() < 2)
    throw std::invalid_argument("undefined R²");
  const Scalar mean = y.mean();
  const Scalar sst = (y.array() - mean).square().sum();
  if (!(sst > Scalar(0)))
    throw std::invalid_argument("undefined R²");
  const Scalar sse = (y - yhat).squaredNorm();
  return Scalar(1) - sse / sst;
}

/// Pearson correlation; 0 when either vector is constant.
template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar pearson(const Eigen::MatrixBase<DerivedA>& x,
                                  const Eigen::MatrixBase<DerivedB>& y)
{
  using Scalar = typename DerivedA::Scalar;
  if (x.size() != y.size())
    throw std::invalid_argument("size mismatch");
  const auto dx = (x.array() - x.mean()).eval();
  const auto dy = (y.array() - y.mean()).eval();
  const Scalar sxx = dx.square().sum();
  const Scalar syy = dy.square().sum();
  if (!(sxx > Scalar(0)) || !(syy > Scalar(0)))
    return Scalar(0);
  return std::clamp((dx * dy).sum() / std::sqrt(sxx * syy), Scalar(-1), Scalar(1));
}

/// Ranks starting at 1, ties get their average rank.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> average_ranks(const Eigen::MatrixBase<Derived>& x)
{
  using Scalar = typename Derived::Scalar;
  const Eigen::Index n = x.size();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index(0));
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return x(a) < x(b); });
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> ranks(n);
  for (Eigen::Index i = 0; i < n;) {
    Eigen::Index j = i;
    while (j + 1 < n && x(order[j + 1]) == x(order[i]))
      ++j;
    const Scalar r = Scalar(i + j) / Scalar(2) + Scalar(1);
    for (Eigen::Index k = i; k <= j; ++k)
      ranks(order[k]) = r;
    i = j + 1;
  }
  return ranks;
}

namespace detail {

// Continued fraction for the regularized incomplete beta (modified Lentz).
template <typename Scalar>
Scalar beta_continued_fraction(Scalar a, Scalar b, Scalar x)
{
  const Scalar tiny = std::numeric_limits<Scalar>::min() / std::numeric_limits<Scalar>::epsilon();
  const Scalar eps = std::numeric_limits<Scalar>::epsilon();
  Scalar c = 1, d = 1 - (a + b) * x / (a + 1);
  if (std::abs(d) < tiny)
    d = tiny;
  d = 1 / d;
  Scalar h = d;
  for (int m = 1; m <= 10000; ++m) {
    const Scalar m2 = 2 * m;
    Scalar aa = m * (b - m) * x / ((a - 1 + m2) * (a + m2));
    d = 1 + aa * d;
    if (std::abs(d) < tiny)
      d = tiny;
    c = 1 + aa / c;
    if (std::abs(c) < tiny)
      c = tiny;
    d = 1 / d;
    h *= d * c;
    aa = -(a + m) * (a + b + m) * x / ((a + m2) * (a + 1 + m2));
    d = 1 + aa * d;
    if (std::abs(d) < tiny)
      d = tiny;
    c = 1 + aa / c;
    if (std::abs(c) < tiny)
      c = tiny;
    d = 1 / d;
    const Scalar delta = d * c;
    h *= delta;
    if (std::abs(delta - 1) < eps)
      break;
  }
  return h;
}

} // namespace detail

/// Regularized incomplete beta function I_x(a, b).
template <typename Scalar>
Scalar incomplete_beta(Scalar a, Scalar b, Scalar x)
{
  if (x <= 0)
    return 0;
  if (x >= 1)
    return 1;
  const Scalar log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) +
                           b * std::log1p(-x);
  const Scalar front = std::exp(log_front);
  if (x < (a + 1) / (a + b + 2))
    return front * detail::beta_continued_fraction(a, b, x) / a;
  return 1 - front * detail::beta_continued_fraction(b, a, 1 - x) / b;
}

/// Two-sided p-value of Student's t with `dof` degrees of freedom.
template <typename Scalar>
Scalar student_t_two_sided(Scalar t, Scalar dof)
{
  if (!std::isfinite(t))
    return 0;
  return incomplete_beta(dof / 2, Scalar(0.5), dof / (dof + t * t));
}

template <typename Scalar>
struct RankCorrelation {
  Scalar rho = 0;
  Scalar p_value = 1;
};

/// Spearman rank correlation with the t-approximation p-value.
template <typename DerivedA, typename DerivedB>
RankCorrelation<typename DerivedA::Scalar> spearman(const Eigen::MatrixBase<DerivedA>& x,
                                                    const Eigen::MatrixBase<DerivedB>& y)
{
  using Scalar = typename DerivedA::Scalar;
  if (x.size() != y.size() || x.size() < 3)
    throw std::invalid_argument("spearman needs matching vectors of at least 3 values");
  RankCorrelation<Scalar> out;
  out.rho = pearson(average_ranks(x), average_ranks(y));
  const Scalar dof = Scalar(x.size() - 2);
  if (std::abs(out.rho) >= Scalar(1)) {
    out.p_value = 0;
    return out;
  }
  const Scalar t = out.rho * std::sqrt(dof / (1 - out.rho * out.rho));
  out.p_value = student_t_two_sided(t, dof);
  return out;
}

} // namespace fracnet
