#include "fracnet/dfn.hpp"
#include "fracnet/graph.hpp"
#include "fracnet/pipe_flow.hpp"

#include <doctest.h>

#include <algorithm>
#include <limits>
#include <random>
#include <set>

using namespace fracnet;

namespace {

// Dense Kirchhoff solve with p(inlet) = 1, p(outlet) = 0, then rescaled to the requested inflow.
Eigen::VectorXd dense_pressures(const PipeModel& m, const Eigen::VectorXd& g, double total_rate)
{
  const int n = m.fracture_count();
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
  for (std::size_t k = 0; k < m.pipes().size(); ++k) {
    const auto& p = m.pipes()[k];
    const double c = g(static_cast<Eigen::Index>(k));
    a(p.a, p.a) += c;
    if (p.b == m.inlet())
      rhs(p.a) += c;
    else if (p.b < n) {
      a(p.b, p.b) += c;
      a(p.a, p.b) -= c;
      a(p.b, p.a) -= c;
    }
  }
  Eigen::VectorXd p = Eigen::VectorXd::Zero(n + 2);
  p.head(n) = a.fullPivLu().solve(rhs);
  p(m.inlet()) = 1.0;
  double inflow = 0;
  for (std::size_t k = 0; k < m.pipes().size(); ++k)
    if (m.pipes()[k].b == m.inlet())
      inflow += g(static_cast<Eigen::Index>(k)) * (1.0 - p(m.pipes()[k].a));
  return p * (total_rate / inflow);
}

Eigen::VectorXd node_balance(const PipeModel& m, const Eigen::VectorXd& flow)
{
  Eigen::VectorXd net = Eigen::VectorXd::Zero(m.node_count());
  for (std::size_t k = 0; k < m.pipes().size(); ++k) {
    net(m.pipes()[k].a) -= flow(static_cast<Eigen::Index>(k));
    net(m.pipes()[k].b) += flow(static_cast<Eigen::Index>(k));
  }
  return net;
}

FractureNetwork sample_network(std::uint64_t seed)
{
  GenerationParams params;
  params.target_p32 = 1.0;
  for (std::uint64_t s = seed;; ++s)
    if (auto net = generate_network(params, s).network)
      return *net;
}

Fracture disc(int id, double area)
{
  Fracture f;
  f.id = id;
  f.radius = 1.5;
  f.aperture = 1e-5;
  f.surface_area = area;
  f.total_volume = area * f.aperture;
  return f;
}

} // namespace

TEST_SUITE("pipe_flow")
{
  TEST_CASE("cubic law conductance and permeability")
  {
    CHECK(cubic_law_conductance(1e-5, 1.0, 1.0, 1e-3) == doctest::Approx(8.333333e-14).epsilon(1e-6));
    CHECK(cubic_law_conductance(2e-5, 1.0, 1.0, 1e-3) ==
          doctest::Approx(8.0 * cubic_law_conductance(1e-5, 1.0, 1.0, 1e-3)).epsilon(1e-14));
    CHECK(cubic_law_permeability(1e-5) == doctest::Approx(8.333e-12).epsilon(1e-4));
  }

  TEST_CASE("pipe model mirrors the intersection graph")
  {
    const FractureNetwork net = sample_network(11);
    const PipeModel m = build_pipe_model(net);
    const NetworkGraph g = to_graph(net);
    REQUIRE(m.pipes().size() == g.edges().size());
    std::multiset<std::pair<int, int>> from_pipes, from_graph;
    for (const auto& p : m.pipes())
      from_pipes.insert({std::min(p.a, p.b), std::max(p.a, p.b)});
    for (auto [u, v] : g.edges())
      from_graph.insert({std::min(u, v), std::max(u, v)});
    CHECK(from_pipes == from_graph);

    for (std::size_t k = 0; k < net.intersections.size(); ++k) {
      const auto& seg = net.intersections[k];
      const auto& p = m.pipes()[k];
      const Vector3d mid = 0.5 * (seg.p0 + seg.p1);
      const double expected = (net.fractures[p.a].center - mid).norm() + (mid - net.fractures[p.b].center).norm();
      CHECK(p.length() == doctest::Approx(expected).epsilon(1e-12));
      CHECK(p.width == doctest::Approx(seg.length).epsilon(1e-12));
      const double g0 = cubic_law_conductance(p.aperture, p.width, p.length(), kWaterViscosity);
      CHECK(m.conductances()(static_cast<Eigen::Index>(k)) == doctest::Approx(g0).epsilon(1e-12));
    }
    CHECK((m.conductances().array() > 0.0).all());
  }

  TEST_CASE("series and parallel circuits")
  {
    const PipeModel series(1, {{0, 1, 1.0, 1.0, 0.0, 1e-5}, {0, 2, 1.0, 1.0, 0.0, 1e-5}}, 1e-3);
    const auto s = solve_flow(series, 2e-6);
    CHECK(s.pressure(0) == doctest::Approx(0.5 * s.pressure(series.inlet())).epsilon(1e-12));
    CHECK(std::abs(s.pipe_flow(0)) == doctest::Approx(2e-6).epsilon(1e-12));
    CHECK(std::abs(s.pipe_flow(1)) == doctest::Approx(2e-6).epsilon(1e-12));

    const PipeModel parallel(2,
                             {{0, 2, 1.0, 1.0, 0.0, 1e-5},
                              {0, 3, 1.0, 1.0, 0.0, 1e-5},
                              {1, 2, 1.0, 1.0, 0.0, 1e-5},
                              {1, 3, 1.0, 1.0, 0.0, 1e-5}},
                             1e-3);
    Eigen::VectorXd g(4);
    g << 1.0, 1.0, 2.0, 2.0;
    const auto p = solve_flow(parallel, g, 3.0);
    CHECK(std::abs(p.pipe_flow(0)) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::abs(p.pipe_flow(2)) == doctest::Approx(2.0).epsilon(1e-12));
  }

  TEST_CASE("random 50-node pipe network matches a dense solve")
  {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(0.1, 10.0);
    std::uniform_int_distribution<int> pick(0, 49);
    for (int trial = 0; trial < 5; ++trial) {
      std::vector<Pipe> pipes;
      for (int v = 1; v < 50; ++v)
        pipes.push_back({v, pick(rng) % v, 1.0, u(rng), u(rng), 1e-5});
      for (int k = 0; k < 60; ++k) {
        const int a = pick(rng), b = pick(rng);
        if (a != b)
          pipes.push_back({a, b, u(rng), u(rng), u(rng), 1e-5});
      }
      for (int k = 0; k < 4; ++k) {
        pipes.push_back({pick(rng), 50, u(rng), u(rng), 0.0, 1e-5});
        pipes.push_back({pick(rng), 51, u(rng), u(rng), 0.0, 1e-5});
      }
      const PipeModel m(50, pipes, 1e-3);
      Eigen::VectorXd g(static_cast<Eigen::Index>(pipes.size()));
      for (auto& c : g)
        c = u(rng);
      const auto sol = solve_flow(m, g, 1e-7);
      const auto oracle = dense_pressures(m, g, 1e-7);
      CHECK((sol.pressure - oracle).cwiseAbs().maxCoeff() <= 1e-9 * oracle.cwiseAbs().maxCoeff());
    }
  }

  TEST_CASE("mass balance, positivity and conductance scaling on a generated network")
  {
    const FractureNetwork net = sample_network(21);
    const PipeModel m = build_pipe_model(net);
    const double rate = network_volume_per_year(net);
    double volume = 0;
    for (const auto& f : net.fractures)
      volume += f.total_volume;
    CHECK(rate == doctest::Approx(volume / 3.1536e7).epsilon(1e-14));

    const auto sol = solve_flow(m, rate);
    const Eigen::VectorXd net_flow = node_balance(m, sol.pipe_flow);
    CHECK(net_flow.head(m.fracture_count()).cwiseAbs().maxCoeff() <= 1e-10 * rate);
    CHECK(-net_flow(m.inlet()) == doctest::Approx(rate).epsilon(1e-10));
    CHECK(net_flow(m.outlet()) == doctest::Approx(rate).epsilon(1e-10));
    CHECK((sol.fracture_q.array() >= 0.0).all());
    CHECK(sol.total_throughput == rate);

    const Eigen::VectorXd g = m.conductances();
    const auto scaled = solve_flow(m, 7.5 * g, rate);
    CHECK((scaled.pipe_flow - sol.pipe_flow).cwiseAbs().maxCoeff() <= 1e-9 * rate);
    CHECK((7.5 * scaled.pressure - sol.pressure).cwiseAbs().maxCoeff() <= 1e-9 * sol.pressure.maxCoeff());
  }

  TEST_CASE("per-fracture flow is half the exchanged flow")
  {
    // Fracture 0 receives 2e-6 from the inlet and 1e-6 from fracture 1, and sends 3e-6 to the outlet.
    const PipeModel m(2,
                      {{0, 2, 1.0, 1.0, 0.0, 1e-5}, {0, 1, 1.0, 1.0, 1.0, 1e-5}, {0, 3, 1.0, 1.0, 0.0, 1e-5}},
                      1e-3);
    Eigen::VectorXd flow(3);
    flow << -2e-6, -1e-6, 3e-6;
    const auto q = fracture_flow_rate(m, flow);
    CHECK(q(0) == doctest::Approx(3e-6).epsilon(1e-14));

    const PipeModel pass(1, {{0, 1, 1.0, 1.0, 0.0, 1e-5}, {0, 2, 1.0, 1.0, 0.0, 1e-5}}, 1e-3);
    Eigen::VectorXd through(2);
    through << -1e-6, 1e-6;
    CHECK(fracture_flow_rate(pass, through)(0) == doctest::Approx(1e-6).epsilon(1e-14));

    // Dead end hanging off a pass-through fracture carries nothing at steady state.
    const PipeModel dead(2, {{0, 2, 1.0, 1.0, 0.0, 1e-5}, {0, 3, 1.0, 1.0, 0.0, 1e-5}, {1, 0, 1.0, 1.0, 1.0, 1e-5}},
                         1e-3);
    const auto sol = solve_flow(dead, 1e-6);
    CHECK(sol.fracture_q(1) <= 1e-15 * 1e-6);
    CHECK(sol.fracture_q(0) == doctest::Approx(1e-6).epsilon(1e-10));
  }

  TEST_CASE("Peclet and Damkohler numbers")
  {
    FractureNetwork net;
    net.fractures = {disc(0, 6.888), disc(1, 3.0), disc(2, 6.888)};
    Eigen::VectorXd q(3);
    q << 1e-9, 2e-12, 0.0;
    const auto h = hydro_features(q, net, 1e-12);
    CHECK(h.rate_velocity == doctest::Approx(2.2688e-17).epsilon(1e-12));
    for (int i = 0; i < 3; ++i)
      CHECK(h.damkohler_diffusive(i) == doctest::Approx(3.4032e-5).epsilon(1e-12));
    CHECK(h.peclet(0) == doctest::Approx(1e-9 * 1.5 / (6.888 * 1e-12)).epsilon(1e-14));
    CHECK(h.peclet(1) == doctest::Approx(2e-12 * 1.5 / (3.0 * 1e-12)).epsilon(1e-14));
    CHECK(h.damkohler_advective(0) == doctest::Approx(2.2688e-17 * 6.888 / 1e-9).epsilon(1e-12));
    CHECK(h.peclet(2) == 0.0);
    CHECK(h.damkohler_advective(2) == 1e12);

    // Pe = 1 exactly at Q = S D / r.
    Eigen::VectorXd edge(3);
    edge << 6.888 * 1e-12 / 1.5, 0.0, 0.0;
    CHECK(hydro_features(edge, net, 1e-12).peclet(0) == doctest::Approx(1.0).epsilon(1e-14));
  }

  TEST_CASE("coincident centres are clamped and bad inputs are rejected")
  {
    const PipeModel m(1, {{0, 1, 1.0, 0.0, 0.0, 1e-5}, {0, 2, 1.0, 1.0, 0.0, 1e-5}}, 1e-3);
    CHECK(m.clamped_lengths == 1);
    CHECK(m.pipes()[0].length() == doctest::Approx(kMinPipeLength));

    const PipeModel split(2, {{0, 2, 1.0, 1.0, 0.0, 1e-5}, {1, 3, 1.0, 1.0, 0.0, 1e-5}}, 1e-3);
    CHECK_THROWS(solve_flow(split, 1.0));
    const PipeModel ok(1, {{0, 1, 1.0, 1.0, 0.0, 1e-5}, {0, 2, 1.0, 1.0, 0.0, 1e-5}}, 1e-3);
    Eigen::VectorXd g(2);
    g << 1.0, std::numeric_limits<double>::infinity();
    CHECK_THROWS(solve_flow(ok, g, 1.0));
    g << 1.0, 0.0;
    CHECK_THROWS(solve_flow(ok, g, 1.0));
  }

  TEST_CASE("advective fractures lie on the current-flow backbone")
  {
    int advective = 0, on_backbone = 0;
    for (std::uint64_t seed = 100; seed < 110; ++seed) {
      const FractureNetwork net = sample_network(seed);
      const auto sol = solve_flow(build_pipe_model(net), network_volume_per_year(net));
      const auto h = hydro_features(sol.fracture_q, net, 1e-12);
      const auto topo = topological_features(to_graph(net));
      for (Eigen::Index i = 0; i < h.peclet.size(); ++i)
        if (h.peclet(i) >= 1.0) {
          ++advective;
          on_backbone += topo.backbone.primary[static_cast<std::size_t>(i)] ? 1 : 0;
        }
    }
    REQUIRE(advective > 0);
    CHECK(on_backbone >= 0.9 * advective);
  }
}
