#include "fracnet/network_io.hpp"

#include <nlohmann/json.hpp>

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace fracnet {

using nlohmann::json;

namespace {

json to_array(const Vector3d& v) { return json::array({v.x(), v.y(), v.z()}); }

Vector3d from_array(const json& j)
{
  if (!j.is_array() || j.size() != 3)
    throw std::runtime_error("expected a 3-vector");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

} // namespace

std::string network_to_json(const FractureNetwork& network)
{
  json doc;
  doc["schema"] = kNetworkSchema;
  doc["seed"] = network.rng_seed;
  const auto& p = network.params;
  doc["parameters"] = {{"side_length", p.side_length}, {"radius", p.radius},
                       {"target_p32", p.target_p32},   {"aperture", p.aperture},
                       {"margin", p.margin},           {"polygon_sides", p.polygon_sides}};
  doc["p32"] = network.p32_achieved;

  json fractures = json::array();
  for (const auto& f : network.fractures) {
    json vertices = json::array();
    for (Eigen::Index k = 0; k < f.vertices.cols(); ++k)
      vertices.push_back(to_array(f.vertices.col(k)));
    fractures.push_back({{"id", f.id},
                         {"center", to_array(f.center)},
                         {"normal", to_array(f.normal)},
                         {"radius", f.radius},
                         {"vertices", std::move(vertices)},
                         {"aperture", f.aperture},
                         {"touches_inlet", f.touches_inlet},
                         {"touches_outlet", f.touches_outlet}});
  }
  doc["fractures"] = std::move(fractures);

  json intersections = json::array();
  for (const auto& s : network.intersections)
    intersections.push_back({{"a", s.fracture_a},
                             {"b", s.fracture_b},
                             {"p0", to_array(s.p0)},
                             {"p1", to_array(s.p1)},
                             {"length", s.length}});
  doc["intersections"] = std::move(intersections);
  return doc.dump(1);
}

FractureNetwork network_from_json(const std::string& text)
{
  const json doc = json::parse(text);
  if (doc.value("schema", std::string{}) != kNetworkSchema)
    throw std::runtime_error("unsupported network schema");

  FractureNetwork network;
  network.rng_seed = doc.at("seed").get<std::uint64_t>();
  const auto& p = doc.at("parameters");
  network.params.side_length = p.at("side_length").get<double>();
  network.params.radius = p.at("radius").get<double>();
  network.params.target_p32 = p.at("target_p32").get<double>();
  network.params.aperture = p.at("aperture").get<double>();
  network.params.margin = p.at("margin").get<double>();
  network.params.polygon_sides = p.at("polygon_sides").get<int>();
  network.domain = {network.params.side_length, network.params.margin};

  for (const auto& jf : doc.at("fractures")) {
    Fracture f;
    f.id = jf.at("id").get<int>();
    f.center = from_array(jf.at("center"));
    f.normal = from_array(jf.at("normal"));
    f.radius = jf.at("radius").get<double>();
    f.aperture = jf.at("aperture").get<double>();
    const auto& verts = jf.at("vertices");
    f.vertices.resize(3, static_cast<Eigen::Index>(verts.size()));
    for (std::size_t k = 0; k < verts.size(); ++k)
      f.vertices.col(static_cast<Eigen::Index>(k)) = from_array(verts[k]);
    f.touches_inlet = jf.at("touches_inlet").get<bool>();
    f.touches_outlet = jf.at("touches_outlet").get<bool>();
    network.fractures.push_back(std::move(f));
  }
  for (const auto& js : doc.at("intersections")) {
    IntersectionSegment s;
    s.fracture_a = js.at("a").get<int>();
    s.fracture_b = js.at("b").get<int>();
    s.p0 = from_array(js.at("p0"));
    s.p1 = from_array(js.at("p1"));
    s.length = js.at("length").get<double>();
    network.intersections.push_back(s);
  }
  geometric_features(network);
  network.p32_achieved = p32(network.fractures, network.domain);
  return network;
}

void write_network(const FractureNetwork& network, const std::filesystem::path& path)
{
  std::ofstream out(path);
  if (!out)
    throw std::runtime_error("cannot write " + path.string());
  out << network_to_json(network) << '\n';
}

FractureNetwork read_network(const std::filesystem::path& path)
{
  std::ifstream in(path);
  if (!in)
    throw std::runtime_error("cannot read " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return network_from_json(buffer.str());
}

} // namespace fracnet
