#include "fracnet/graph.hpp"

#include <algorithm>
#include <fstream>
#include <queue>
#include <stack>
#include <stdexcept>
#include <string>
#include <unordered_map>

namespace fracnet {

NetworkGraph::NetworkGraph(int fracture_count, const std::vector<Edge>& fracture_edges,
                           const std::vector<int>& inlet_nodes,
                           const std::vector<int>& outlet_nodes)
    : fracture_count_(fracture_count),
      fracture_edge_count_(fracture_edges.size()),
      adjacency_(static_cast<std::size_t>(fracture_count + 2))
{
  if (fracture_count < 0)
    throw std::invalid_argument("negative node count");
  fracture_ids.resize(static_cast<std::size_t>(fracture_count));
  for (int i = 0; i < fracture_count; ++i)
    fracture_ids[static_cast<std::size_t>(i)] = i;

  auto add = [&](int u, int v) {
    if (u < 0 || v < 0 || u >= node_count() || v >= node_count() || u == v)
      throw std::invalid_argument("invalid edge");
    edges_.emplace_back(u, v);
    adjacency_[u].push_back(v);
    adjacency_[v].push_back(u);
  };
  for (const auto& [u, v] : fracture_edges) {
    if (is_terminal(u) || is_terminal(v))
      throw std::invalid_argument("fracture edge touches a terminal node");
    add(u, v);
  }
  for (int u : inlet_nodes)
    add(source(), u);
  for (int u : outlet_nodes)
    add(u, target());
}

Eigen::MatrixXd NetworkGraph::adjacency_matrix() const
{
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(node_count(), node_count());
  for (const auto& [u, v] : edges_) {
    a(u, v) += 1.0;
    a(v, u) += 1.0;
  }
  return a;
}

Eigen::MatrixXd NetworkGraph::laplacian() const
{
  const Eigen::MatrixXd a = adjacency_matrix();
  Eigen::MatrixXd l = -a;
  l.diagonal() += a.rowwise().sum();
  return l;
}

NetworkGraph to_graph(const FractureNetwork& network)
{
  const int n = static_cast<int>(network.fractures.size());
  std::unordered_map<int, int> index;
  std::vector<int> inlet, outlet;
  for (int i = 0; i < n; ++i) {
    const auto& f = network.fractures[static_cast<std::size_t>(i)];
    index[f.id] = i;
    if (f.touches_inlet)
      inlet.push_back(i);
    if (f.touches_outlet)
      outlet.push_back(i);
  }
  if (inlet.empty() || outlet.empty())
    throw std::runtime_error("graph has no source/target attachment");

  std::vector<NetworkGraph::Edge> edges;
  edges.reserve(network.intersections.size());
  for (const auto& seg : network.intersections)
    edges.emplace_back(index.at(seg.fracture_a), index.at(seg.fracture_b));

  NetworkGraph g(n, edges, inlet, outlet);
  for (int i = 0; i < n; ++i)
    g.fracture_ids[static_cast<std::size_t>(i)] = network.fractures[static_cast<std::size_t>(i)].id;
  return g;
}

DegreeFeatures degree_and_centrality(const NetworkGraph& g)
{
  const int n = g.fracture_count();
  if (n <= 1)
    throw std::invalid_argument("degenerate graph");
  DegreeFeatures out{Eigen::VectorXi::Zero(n), Eigen::VectorXd::Zero(n)};
  for (std::size_t e = 0; e < g.fracture_edge_count(); ++e) {
    const auto [u, v] = g.edges()[e];
    ++out.degree(u);
    ++out.degree(v);
  }
  out.centrality = out.degree.cast<double>() / static_cast<double>(n - 1);
  return out;
}

Eigen::VectorXd betweenness(const NetworkGraph& g, bool include_terminals)
{
  const int n = g.fracture_count();
  const int nodes = include_terminals ? g.node_count() : n;
  Eigen::VectorXd score = Eigen::VectorXd::Zero(g.node_count());
  if (nodes < 3)
    return Eigen::VectorXd::Zero(n);

  auto usable = [&](int v) { return include_terminals || !g.is_terminal(v); };

  std::vector<int> dist(static_cast<std::size_t>(g.node_count()));
  std::vector<double> delta(static_cast<std::size_t>(g.node_count()));
  std::vector<std::vector<int>> pred(static_cast<std::size_t>(g.node_count()));
  std::vector<double> sigma_d(static_cast<std::size_t>(g.node_count()));

  for (int s = 0; s < g.node_count(); ++s) {
    if (!usable(s))
      continue;
    std::stack<int> order;
    std::queue<int> frontier;
    std::fill(sigma_d.begin(), sigma_d.end(), 0.0);
    std::fill(dist.begin(), dist.end(), -1);
    std::fill(delta.begin(), delta.end(), 0.0);
    for (auto& p : pred)
      p.clear();
    sigma_d[s] = 1.0;
    dist[s] = 0;
    frontier.push(s);
    while (!frontier.empty()) {
      const int v = frontier.front();
      frontier.pop();
      order.push(v);
      for (int w : g.neighbours(v)) {
        if (!usable(w))
          continue;
        if (dist[w] < 0) {
          dist[w] = dist[v] + 1;
          frontier.push(w);
        }
        if (dist[w] == dist[v] + 1) {
          sigma_d[w] += sigma_d[v];
          pred[w].push_back(v);
        }
      }
    }
    while (!order.empty()) {
      const int w = order.top();
      order.pop();
      for (int v : pred[w])
        delta[v] += sigma_d[v] / sigma_d[w] * (1.0 + delta[w]);
      if (w != s)
        score(w) += delta[w];
    }
  }
  const double norm = 1.0 / (static_cast<double>(nodes - 1) * static_cast<double>(nodes - 2));
  return score.head(n) * norm;
}

namespace {

std::vector<char> reachable(const NetworkGraph& g, int start,
                            const std::vector<char>* edge_mask = nullptr)
{
  std::vector<std::vector<int>> adjacency;
  if (edge_mask) {
    adjacency.resize(static_cast<std::size_t>(g.node_count()));
    for (std::size_t e = 0; e < g.edges().size(); ++e)
      if ((*edge_mask)[e]) {
        const auto [u, v] = g.edges()[e];
        adjacency[u].push_back(v);
        adjacency[v].push_back(u);
      }
  }
  std::vector<char> seen(static_cast<std::size_t>(g.node_count()), 0);
  std::queue<int> frontier;
  seen[start] = 1;
  frontier.push(start);
  while (!frontier.empty()) {
    const int u = frontier.front();
    frontier.pop();
    for (int v : edge_mask ? adjacency[u] : g.neighbours(u))
      if (!seen[v]) {
        seen[v] = 1;
        frontier.push(v);
      }
  }
  return seen;
}

} // namespace

CurrentFlow current_flow(const NetworkGraph& g)
{
  if (!reachable(g, g.source())[g.target()])
    throw std::runtime_error("no source-target path");

  const Eigen::MatrixXd pinv = symmetric_pseudoinverse(g.laplacian());
  CurrentFlow out;
  out.potential = pinv.col(g.source()) - pinv.col(g.target());

  const auto& edges = g.edges();
  out.edge_current.resize(static_cast<Eigen::Index>(edges.size()));
  for (std::size_t e = 0; e < edges.size(); ++e) {
    const auto [u, v] = edges[e];
    out.edge_current(static_cast<Eigen::Index>(e)) = std::abs(out.potential(u) - out.potential(v));
  }
  if (out.edge_current.size() > 0) {
    const double floor = 1e-12 * out.edge_current.maxCoeff();
    out.edge_current = out.edge_current.unaryExpr([floor](double c) { return c < floor ? 0.0 : c; });
  }

  out.node_current = Eigen::VectorXd::Zero(g.node_count());
  for (std::size_t e = 0; e < edges.size(); ++e) {
    const auto [u, v] = edges[e];
    out.node_current(u) += 0.5 * out.edge_current(static_cast<Eigen::Index>(e));
    out.node_current(v) += 0.5 * out.edge_current(static_cast<Eigen::Index>(e));
  }
  out.node_current(g.source()) = 1.0;
  out.node_current(g.target()) = 1.0;
  return out;
}

std::vector<int> BackbonePartition::primary_nodes() const
{
  std::vector<int> out;
  for (std::size_t i = 0; i < primary.size(); ++i)
    if (primary[i])
      out.push_back(static_cast<int>(i));
  return out;
}

std::vector<int> BackbonePartition::secondary_nodes() const
{
  std::vector<int> out;
  for (std::size_t i = 0; i < primary.size(); ++i)
    if (!primary[i])
      out.push_back(static_cast<int>(i));
  return out;
}

BackbonePartition extract_backbone(const NetworkGraph& g, const CurrentFlow& flow, double eps)
{
  std::vector<char> keep(g.edges().size(), 0);
  for (std::size_t e = 0; e < keep.size(); ++e)
    keep[e] = flow.edge_current(static_cast<Eigen::Index>(e)) > eps;

  const auto core = reachable(g, g.source(), &keep);
  BackbonePartition out;
  out.edge_currents = flow.edge_current;
  out.primary.assign(static_cast<std::size_t>(g.fracture_count()), 0);
  if (!core[g.target()])
    return out;
  for (int i = 0; i < g.fracture_count(); ++i)
    out.primary[i] = core[i];
  return out;
}

Eigen::VectorXi distance_to_backbone(const NetworkGraph& g, const BackbonePartition& partition)
{
  const int n = g.fracture_count();
  Eigen::VectorXi dist = Eigen::VectorXi::Constant(n, -1);
  std::queue<int> frontier;
  for (int i = 0; i < n; ++i)
    if (partition.primary[i]) {
      dist(i) = 0;
      frontier.push(i);
    }
  if (frontier.empty())
    throw std::runtime_error("empty backbone");
  while (!frontier.empty()) {
    const int u = frontier.front();
    frontier.pop();
    for (int v : g.neighbours(u))
      if (!g.is_terminal(v) && dist(v) < 0) {
        dist(v) = dist(u) + 1;
        frontier.push(v);
      }
  }
  if ((dist.array() < 0).any())
    throw std::runtime_error("fracture without a path to the backbone");
  return dist;
}

TopologicalFeatures topological_features(const NetworkGraph& g, bool include_terminals)
{
  TopologicalFeatures out;
  auto degrees = degree_and_centrality(g);
  out.degree = std::move(degrees.degree);
  out.degree_centrality = std::move(degrees.centrality);
  out.betweenness = betweenness(g, include_terminals);
  const CurrentFlow flow = current_flow(g);
  out.current_flow = flow.node_current.head(g.fracture_count());
  out.backbone = extract_backbone(g, flow);
  out.distance_to_backbone = distance_to_backbone(g, out.backbone);
  return out;
}

void write_edge_list(const NetworkGraph& g, const std::filesystem::path& path)
{
  std::ofstream out(path);
  if (!out)
    throw std::runtime_error("cannot write " + path.string());
  auto name = [&](int node) {
    if (node == g.source())
      return std::string("s");
    if (node == g.target())
      return std::string("t");
    return std::to_string(g.fracture_ids[static_cast<std::size_t>(node)]);
  };
  for (const auto& [u, v] : g.edges())
    out << name(u) << ' ' << name(v) << '\n';
}

} // namespace fracnet
