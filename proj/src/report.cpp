#include "fracnet/study.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace fracnet {

namespace fs = std::filesystem;

namespace {

std::string num(double v, int digits = 4)
{
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string gnum(double v)
{
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::string escape(const std::string& s)
{
  std::string out;
  for (char c : s) {
    switch (c) {
    case '&': out += "&amp;"; break;
    case '<': out += "&lt;"; break;
    case '>': out += "&gt;"; break;
    case '"': out += "&quot;"; break;
    default: out += c;
    }
  }
  return out;
}

std::string file_stem(const ModelScore& m)
{
  std::string s = m.name + "_" + m.variant;
  for (char& c : s)
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '.')
      c = '_';
  return s;
}

std::string params_text(const ForestParams& p)
{
  return "n_estimators=" + std::to_string(p.n_estimators) +
         " max_depth=" + (p.max_depth ? std::to_string(*p.max_depth) : std::string("none")) +
         " max_features=" + to_string(p.max_features) + " min_samples_leaf=" + std::to_string(p.min_samples_leaf) +
         " min_samples_split=" + std::to_string(p.min_samples_split);
}

std::ofstream open(const fs::path& path)
{
  std::ofstream out(path);
  if (!out)
    throw std::runtime_error("cannot write " + path.string());
  return out;
}

struct Svg {
  std::ostringstream body;
  double width, height;

  Svg(double w, double h) : width(w), height(h) {}

  void text(double x, double y, const std::string& s, int size = 12, const char* anchor = "start",
            double rotate = 0.0)
  {
    body << "<text x=\"" << num(x, 1) << "\" y=\"" << num(y, 1) << "\" font-size=\"" << size
         << "\" text-anchor=\"" << anchor << '"';
    if (rotate != 0.0)
      body << " transform=\"rotate(" << num(rotate, 1) << ' ' << num(x, 1) << ' ' << num(y, 1) << ")\"";
    body << ">" << escape(s) << "</text>\n";
  }
  void rect(double x, double y, double w, double h, const std::string& fill, const std::string& title = {})
  {
    body << "<rect x=\"" << num(x, 2) << "\" y=\"" << num(y, 2) << "\" width=\"" << num(std::max(w, 0.0), 2)
         << "\" height=\"" << num(std::max(h, 0.0), 2) << "\" fill=\"" << fill << '"';
    if (title.empty())
      body << "/>\n";
    else
      body << "><title>" << escape(title) << "</title></rect>\n";
  }
  void line(double x1, double y1, double x2, double y2, const char* stroke = "#333", double w = 1.0)
  {
    body << "<line x1=\"" << num(x1, 2) << "\" y1=\"" << num(y1, 2) << "\" x2=\"" << num(x2, 2) << "\" y2=\""
         << num(y2, 2) << "\" stroke=\"" << stroke << "\" stroke-width=\"" << num(w, 2) << "\"/>\n";
  }
  void circle(double x, double y, double r, const char* fill)
  {
    body << "<circle cx=\"" << num(x, 2) << "\" cy=\"" << num(y, 2) << "\" r=\"" << num(r, 1) << "\" fill=\""
         << fill << "\" fill-opacity=\"0.45\"/>\n";
  }
  void save(const fs::path& path) const
  {
    auto out = open(path);
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(width, 0) << "\" height=\""
        << num(height, 0) << "\" viewBox=\"0 0 " << num(width, 0) << ' ' << num(height, 0)
        << "\" font-family=\"sans-serif\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
        << body.str() << "</svg>\n";
  }
};

// Bars in ranking order, top to bottom.
void importance_svg(const ModelScore& m, const fs::path& path)
{
  const auto order = m.importance.ranking();
  const double left = 190, top = 40, bar = 22, plot_w = 360;
  Svg svg(left + plot_w + 80, top + bar * static_cast<double>(order.size()) + 50);
  svg.text(svg.width / 2, 22, m.name + " (" + m.variant + ") permutation importance", 14, "middle");
  double hi = 0.0, lo = 0.0;
  for (int j : order) {
    hi = std::max(hi, m.importance.mean(j) + m.importance.std(j));
    lo = std::min(lo, m.importance.mean(j));
  }
  if (hi - lo <= 0.0)
    hi = lo + 1.0;
  const auto sx = [&](double v) { return left + (v - lo) / (hi - lo) * plot_w; };
  for (std::size_t i = 0; i < order.size(); ++i) {
    const int j = order[i];
    const double y = top + bar * static_cast<double>(i);
    const double v = m.importance.mean(j);
    const double x0 = sx(std::min(0.0, v)), x1 = sx(std::max(0.0, v));
    svg.rect(x0, y + 3, x1 - x0, bar - 6, v >= 0 ? "#3b6ea5" : "#b55d4c",
             m.importance.names[static_cast<std::size_t>(j)] + " " + gnum(v));
    svg.line(sx(v - m.importance.std(j)), y + bar / 2, sx(v + m.importance.std(j)), y + bar / 2, "#222", 1.2);
    svg.text(left - 6, y + bar / 2 + 4, m.importance.names[static_cast<std::size_t>(j)], 11, "end");
  }
  const double axis_y = top + bar * static_cast<double>(order.size()) + 4;
  svg.line(sx(0.0), top, sx(0.0), axis_y);
  svg.line(left, axis_y, left + plot_w, axis_y);
  svg.text(left, axis_y + 16, gnum(lo), 10, "middle");
  svg.text(left + plot_w, axis_y + 16, gnum(hi), 10, "middle");
  svg.text(left + plot_w / 2, axis_y + 34, "mean decrease in OOB R2", 11, "middle");
  svg.save(path);
}

std::string diverging(double v)
{
  const double t = std::clamp(v, -1.0, 1.0);
  int r, g, b;
  if (t >= 0) {
    r = 255;
    g = static_cast<int>(std::lround(255 * (1 - t)));
    b = g;
  } else {
    r = static_cast<int>(std::lround(255 * (1 + t)));
    g = r;
    b = 255;
  }
  char buf[8];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", r, g, b);
  return buf;
}

void correlation_svg(const CorrelationMatrix& c, const fs::path& path)
{
  const auto n = static_cast<double>(c.names.size());
  const double cell = 30, left = 190, top = 190;
  Svg svg(left + cell * n + 30, top + cell * n + 30);
  svg.text(svg.width / 2, 20, "Pearson correlation", 14, "middle");
  for (std::size_t i = 0; i < c.names.size(); ++i) {
    const double p = static_cast<double>(i);
    svg.text(left - 6, top + cell * p + cell / 2 + 4, c.names[i], 11, "end");
    svg.text(left + cell * p + cell / 2 + 4, top - 6, c.names[i], 11, "start", -90);
    for (std::size_t j = 0; j < c.names.size(); ++j) {
      const double v = c.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      const double x = left + cell * static_cast<double>(j), y = top + cell * p;
      const bool undefined = c.constant[i] || c.constant[j];
      svg.rect(x, y, cell - 1, cell - 1, undefined ? "#cccccc" : diverging(v),
               c.names[i] + " / " + c.names[j] + " " + (undefined ? std::string("n/a") : num(v, 3)));
      if (!undefined)
        svg.text(x + cell / 2, y + cell / 2 + 3, num(v, 2), 8, "middle");
    }
  }
  svg.save(path);
}

// Observed against predicted, train panel left and test panel right.
void scatter_svg(const ModelScore& m, const fs::path& path)
{
  const double panel = 300, pad = 50;
  Svg svg(2 * (panel + pad) + pad, panel + 2 * pad + 20);
  svg.text(svg.width / 2, 20, m.name + " observed vs predicted remaining fraction", 14, "middle");
  const auto draw = [&](double ox, const Eigen::VectorXd& y, const Eigen::VectorXd& p, const std::string& label,
                        const char* colour) {
    const double oy = pad + 10;
    svg.rect(ox, oy, panel, panel, "#f7f7f7");
    svg.line(ox, oy + panel, ox + panel, oy, "#999", 1.0);
    for (Eigen::Index i = 0; i < y.size(); ++i)
      svg.circle(ox + std::clamp(y(i), 0.0, 1.0) * panel, oy + panel - std::clamp(p(i), 0.0, 1.0) * panel, 2.0,
                 colour);
    svg.line(ox, oy + panel, ox + panel, oy + panel);
    svg.line(ox, oy, ox, oy + panel);
    svg.text(ox, oy + panel + 14, "0", 10, "middle");
    svg.text(ox + panel, oy + panel + 14, "1", 10, "middle");
    svg.text(ox - 8, oy + 4, "1", 10, "end");
    svg.text(ox + panel / 2, oy + panel + 30, "observed", 11, "middle");
    svg.text(ox - 30, oy + panel / 2, "predicted", 11, "middle", -90);
    svg.text(ox + panel / 2, oy - 6, label, 12, "middle");
  };
  draw(pad, m.y_train, m.p_train, "train (R2 = " + num(m.r2_train, 3) + ")", "#3b6ea5");
  draw(2 * pad + panel, m.y_test, m.p_test, "test (R2 = " + num(m.r2_test, 3) + ")", "#c0602f");
  svg.save(path);
}

} // namespace

void write_report(const StudyReport& report, const fs::path& dir)
{
  fs::create_directories(dir);
  std::ostringstream summary;
  summary << "config_hash " << report.config_hash << "\nforest_seed " << report.forest_seed << '\n';

  if (!report.models.empty()) {
    auto table = open(dir / "model_scores.csv");
    table << "model,variant,features,r2_train,r2_test,oob_r2,params\n";
    for (const auto& m : report.models) {
      table << m.name << ',' << m.variant << ',' << m.features.size() << ',' << num(m.r2_train) << ','
            << num(m.r2_test) << ',' << num(m.oob) << ",\"" << params_text(m.params) << "\"\n";
      write_importance_csv(m.importance, dir / ("importance_" + file_stem(m) + ".csv"));
      importance_svg(m, dir / ("importance_" + file_stem(m) + ".svg"));
      if (m.rate_constant)
        scatter_svg(m, dir / ("scatter_" + file_stem(m) + ".svg"));
    }

    summary << "\nmodel        variant    R2 train  R2 test   OOB R2\n";
    for (const auto& m : report.models) {
      char line[160];
      std::snprintf(line, sizeof line, "%-12s %-10s %8.4f  %8.4f  %8.4f\n", m.name.c_str(), m.variant.c_str(),
                    m.r2_train, m.r2_test, m.oob);
      summary << line;
    }
    summary << "\ntop features\n";
    for (const auto& m : report.models) {
      const auto order = m.importance.ranking();
      summary << m.name << ' ' << m.variant << ':';
      for (std::size_t i = 0; i < std::min<std::size_t>(3, order.size()); ++i)
        summary << ' ' << m.importance.names[static_cast<std::size_t>(order[i])] << '('
                << gnum(m.importance.mean(order[i])) << ')';
      summary << '\n';
    }
  }

  if (!report.correlation.names.empty()) {
    const auto& c = report.correlation;
    auto out = open(dir / "correlation.csv");
    out << "feature";
    for (const auto& n : c.names)
      out << ',' << n;
    out << '\n';
    for (std::size_t i = 0; i < c.names.size(); ++i) {
      out << c.names[i];
      for (std::size_t j = 0; j < c.names.size(); ++j) {
        if (c.constant[i] || c.constant[j])
          out << ",nan";
        else
          out << ',' << num(c.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)), 6);
      }
      out << '\n';
    }
    correlation_svg(c, dir / "correlation.svg");
  }

  if (report.grid) {
    auto out = open(dir / "grid_search.csv");
    out << "params,mean_r2,fold_r2\n";
    for (const auto& p : report.grid->points) {
      out << '"' << params_text(p.params) << "\"," << num(p.mean_r2) << ",\"";
      for (std::size_t f = 0; f < p.fold_r2.size(); ++f)
        out << (f ? " " : "") << num(p.fold_r2[f]);
      out << "\"\n";
    }
    summary << "\ngrid search best: " << params_text(report.grid->best) << '\n';
  }

  if (!report.skipped.empty()) {
    summary << "\nskipped\n";
    for (const auto& s : report.skipped)
      summary << "  " << s << '\n';
  }
  if (!report.timings.empty()) {
    summary << "\nseconds\n";
    for (const auto& [k, v] : report.timings)
      summary << "  " << k << ' ' << num(v, 2) << '\n';
  }
  auto out = open(dir / "summary.txt");
  out << summary.str();
}

namespace {

using nlohmann::json;

json vec_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Eigen::VectorXd json_vec(const json& j)
{
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

json params_json(const ForestParams& p)
{
  return {{"n_estimators", p.n_estimators},
          {"max_depth", p.max_depth ? json(*p.max_depth) : json(nullptr)},
          {"max_features", to_string(p.max_features)},
          {"min_samples_leaf", p.min_samples_leaf},
          {"min_samples_split", p.min_samples_split},
          {"seed", p.seed}};
}

ForestParams json_params(const json& j)
{
  ForestParams p;
  p.n_estimators = j.at("n_estimators").get<int>();
  if (!j.at("max_depth").is_null())
    p.max_depth = j.at("max_depth").get<int>();
  p.max_features = parse_max_features(j.at("max_features").get<std::string>());
  p.min_samples_leaf = j.at("min_samples_leaf").get<int>();
  p.min_samples_split = j.at("min_samples_split").get<int>();
  p.seed = j.at("seed").get<std::uint64_t>();
  return p;
}

// NaN is not valid JSON; null stands in for it.
json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }
double null_or_nan(const json& j) { return j.is_null() ? std::nan("") : j.get<double>(); }

} // namespace

void write_study_json(const StudyReport& report, const fs::path& path)
{
  json j;
  j["schema"] = "fracnet-study/1";
  j["config_hash"] = report.config_hash;
  j["forest_seed"] = report.forest_seed;
  j["timings"] = report.timings;
  j["skipped"] = report.skipped;
  auto& models = j["models"] = json::array();
  for (const auto& m : report.models) {
    json e = {{"name", m.name},
              {"variant", m.variant},
              {"features", m.features},
              {"params", params_json(m.params)},
              {"r2_train", m.r2_train},
              {"r2_test", m.r2_test},
              {"oob", m.oob},
              {"importance",
               {{"names", m.importance.names},
                {"mean", vec_json(m.importance.mean)},
                {"std", vec_json(m.importance.std)},
                {"share", vec_json(m.importance.share)},
                {"baseline", m.importance.baseline}}},
              {"y_train", vec_json(m.y_train)},
              {"p_train", vec_json(m.p_train)},
              {"y_test", vec_json(m.y_test)},
              {"p_test", vec_json(m.p_test)}};
    e["rate_constant"] = m.rate_constant ? json(*m.rate_constant) : json(nullptr);
    models.push_back(std::move(e));
  }
  const auto& c = report.correlation;
  json rows = json::array();
  for (Eigen::Index i = 0; i < c.values.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index k = 0; k < c.values.cols(); ++k)
      row.push_back(finite_or_null(c.values(i, k)));
    rows.push_back(std::move(row));
  }
  j["correlation"] = {{"names", c.names}, {"values", rows}, {"constant", std::vector<int>(c.constant.begin(), c.constant.end())}};
  if (report.grid) {
    json points = json::array();
    for (const auto& p : report.grid->points) {
      json folds = json::array();
      for (double f : p.fold_r2)
        folds.push_back(finite_or_null(f));
      points.push_back({{"params", params_json(p.params)}, {"fold_r2", folds}, {"mean_r2", finite_or_null(p.mean_r2)}});
    }
    j["grid"] = {{"best", params_json(report.grid->best)}, {"points", points}};
  }
  auto out = open(path);
  out << j.dump(1) << '\n';
}

StudyReport read_study_json(const fs::path& path)
{
  std::ifstream in(path);
  if (!in)
    throw std::runtime_error("cannot read " + path.string());
  const json j = json::parse(in);
  if (j.value("schema", "") != "fracnet-study/1")
    throw std::runtime_error(path.string() + ": not a fracnet study file");
  StudyReport r;
  r.config_hash = j.at("config_hash").get<std::string>();
  r.forest_seed = j.at("forest_seed").get<std::uint64_t>();
  r.timings = j.at("timings").get<std::map<std::string, double>>();
  r.skipped = j.at("skipped").get<std::vector<std::string>>();
  for (const auto& e : j.at("models")) {
    ModelScore m;
    m.name = e.at("name").get<std::string>();
    m.variant = e.at("variant").get<std::string>();
    m.features = e.at("features").get<std::vector<std::string>>();
    m.params = json_params(e.at("params"));
    m.r2_train = e.at("r2_train").get<double>();
    m.r2_test = e.at("r2_test").get<double>();
    m.oob = e.at("oob").get<double>();
    const auto& imp = e.at("importance");
    m.importance.names = imp.at("names").get<std::vector<std::string>>();
    m.importance.mean = json_vec(imp.at("mean"));
    m.importance.std = json_vec(imp.at("std"));
    m.importance.share = json_vec(imp.at("share"));
    m.importance.baseline = imp.at("baseline").get<double>();
    m.y_train = json_vec(e.at("y_train"));
    m.p_train = json_vec(e.at("p_train"));
    m.y_test = json_vec(e.at("y_test"));
    m.p_test = json_vec(e.at("p_test"));
    if (!e.at("rate_constant").is_null())
      m.rate_constant = e.at("rate_constant").get<double>();
    r.models.push_back(std::move(m));
  }
  const auto& c = j.at("correlation");
  r.correlation.names = c.at("names").get<std::vector<std::string>>();
  const auto n = static_cast<Eigen::Index>(r.correlation.names.size());
  r.correlation.values.resize(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index k = 0; k < n; ++k)
      r.correlation.values(i, k) = null_or_nan(c.at("values").at(static_cast<std::size_t>(i)).at(static_cast<std::size_t>(k)));
  for (int flag : c.at("constant").get<std::vector<int>>())
    r.correlation.constant.push_back(static_cast<char>(flag));
  if (j.contains("grid")) {
    GridSearchResult g;
    g.best = json_params(j["grid"].at("best"));
    for (const auto& p : j["grid"].at("points")) {
      GridPoint gp;
      gp.params = json_params(p.at("params"));
      for (const auto& f : p.at("fold_r2"))
        gp.fold_r2.push_back(null_or_nan(f));
      gp.mean_r2 = null_or_nan(p.at("mean_r2"));
      g.points.push_back(std::move(gp));
    }
    r.grid = std::move(g);
  }
  return r;
}

} // namespace fracnet
