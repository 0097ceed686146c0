#include "reifenberg/io.hpp"

#include <cstdint>
#include <fstream>
#include <sstream>

namespace reifenberg::io {

using nlohmann::json;

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' '))
      cell.pop_back();
    while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
    out.push_back(cell);
  }
  return out;
}

}  // namespace

core::FiniteMetricSpace load_cloud_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw core::InvalidInput("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw core::InvalidInput("empty file " + path);
  const auto header = split_csv_line(line);
  if (header.size() < 2 || header[0] != "id")
    throw core::InvalidInput("cloud csv must start with 'id,x1,...'");
  const std::size_t d = header.size() - 1;
  std::vector<std::string> ids;
  std::vector<double> vals;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != d + 1)
      throw core::InvalidInput("cloud csv row width mismatch");
    ids.push_back(cells[0]);
    for (std::size_t k = 1; k < cells.size(); ++k)
      vals.push_back(std::stod(cells[k]));
  }
  Eigen::MatrixXd coords(ids.size(), d);
  for (std::size_t i = 0; i < ids.size(); ++i)
    for (std::size_t k = 0; k < d; ++k) coords(i, k) = vals[i * d + k];
  return core::FiniteMetricSpace(std::move(ids), std::move(coords), true);
}

core::FiniteMetricSpace load_matrix_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw core::InvalidInput("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw core::InvalidInput("empty file " + path);
  auto header = split_csv_line(line);
  if (header.empty() || !(header[0].empty() || header[0] == "id"))
    throw core::InvalidInput("matrix csv must start with an id header row");
  std::vector<std::string> ids(header.begin() + 1, header.end());
  const std::size_t m = ids.size();
  Eigen::MatrixXd dist(m, m);
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != m + 1)
      throw core::InvalidInput("matrix csv row width mismatch");
    if (row >= m) throw core::InvalidInput("matrix csv too many rows");
    for (std::size_t k = 0; k < m; ++k) dist(row, k) = std::stod(cells[k + 1]);
    ++row;
  }
  if (row != m) throw core::InvalidInput("matrix csv too few rows");
  return core::FiniteMetricSpace(std::move(ids), std::move(dist));
}

core::FiniteMetricSpace load_matrix_bin(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw core::InvalidInput("cannot open " + path);
  std::uint64_t count = 0;
  in.read(reinterpret_cast<char*>(&count), sizeof(count));
  if (!in || count == 0) throw core::InvalidInput("bad binary header");
  Eigen::MatrixXd dist(count, count);
  std::vector<double> row(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    in.read(reinterpret_cast<char*>(row.data()),
            static_cast<std::streamsize>(count * sizeof(double)));
    if (!in) throw core::InvalidInput("truncated binary distance block");
    for (std::uint64_t j = 0; j < count; ++j) dist(i, j) = row[j];
  }
  std::vector<std::string> ids(count);
  for (std::uint64_t i = 0; i < count; ++i) ids[i] = std::to_string(i);
  return core::FiniteMetricSpace(std::move(ids), std::move(dist));
}

void save_matrix_bin(const core::FiniteMetricSpace& space,
                     const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  const std::uint64_t count = space.size();
  out.write(reinterpret_cast<const char*>(&count), sizeof(count));
  std::vector<double> row(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    for (std::uint64_t j = 0; j < count; ++j) row[j] = space.dist(i, j);
    out.write(reinterpret_cast<const char*>(row.data()),
              static_cast<std::streamsize>(count * sizeof(double)));
  }
}

void save_cloud_csv(const core::FiniteMetricSpace& space,
                    const std::string& path) {
  if (!space.has_coords())
    throw core::InvalidInput("save_cloud_csv: no coordinates");
  std::ofstream out(path);
  out << "id";
  for (Eigen::Index k = 0; k < space.coords().cols(); ++k)
    out << ",x" << (k + 1);
  out << "\n";
  out.precision(17);
  for (std::size_t i = 0; i < space.size(); ++i) {
    out << space.ids()[i];
    for (Eigen::Index k = 0; k < space.coords().cols(); ++k)
      out << "," << space.coords()(i, k);
    out << "\n";
  }
}

core::FiniteMetricSpace load_space(const std::string& path) {
  if (path.size() > 4 && path.substr(path.size() - 4) == ".bin")
    return load_matrix_bin(path);
  std::ifstream in(path);
  if (!in) throw core::InvalidInput("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw core::InvalidInput("empty file " + path);
  const auto header = split_csv_line(line);
  in.close();
  if (!header.empty() && header[0] == "id" && header.size() >= 2 &&
      header[1].size() && header[1][0] == 'x')
    return load_cloud_csv(path);
  return load_matrix_csv(path);
}

namespace {

json vec_to_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

Eigen::VectorXd vec_from_json(const json& a) {
  Eigen::VectorXd v(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) v(i) = a[i].get<double>();
  return v;
}

json mat_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    rows.push_back(vec_to_json(m.row(i).transpose()));
  return rows;
}

Eigen::MatrixXd mat_from_json(const json& rows) {
  const std::size_t r = rows.size();
  const std::size_t c = rows.empty() ? 0 : rows[0].size();
  Eigen::MatrixXd m(r, c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) m(i, j) = rows[i][j].get<double>();
  return m;
}

json rigid_to_json(const rigid::RigidMotion& m) {
  return json{{"Q", mat_to_json(m.Q)}, {"v", vec_to_json(m.v)}};
}

rigid::RigidMotion rigid_from_json(const json& j) {
  return {mat_from_json(j.at("Q")), vec_from_json(j.at("v"))};
}

json region_to_json(const smooth::Region& r) {
  json balls = json::array();
  for (const auto& b : r.balls) {
    json clips = json::array();
    for (const auto& [nrm, c] : b.clips)
      clips.push_back(json{{"n", vec_to_json(nrm)}, {"c", c}});
    balls.push_back(json{{"center", vec_to_json(b.center)},
                         {"radius", b.radius},
                         {"clips", clips}});
  }
  return json{{"balls", balls}};
}

smooth::Region region_from_json(const json& j) {
  smooth::Region r;
  for (const auto& bj : j.at("balls")) {
    smooth::ClippedBall b;
    b.center = vec_from_json(bj.at("center"));
    b.radius = bj.at("radius").get<double>();
    for (const auto& cj : bj.at("clips"))
      b.clips.emplace_back(vec_from_json(cj.at("n")), cj.at("c").get<double>());
    r.balls.push_back(std::move(b));
  }
  return r;
}

}  // namespace

json smooth_map_to_json(const smooth::SmoothMap& m) {
  using Node = smooth::SmoothMap::Node;
  const Node& nd = m.root();
  switch (nd.kind) {
    case Node::Kind::Rigid:
      return json{{"kind", "rigid"}, {"motion", rigid_to_json(nd.motion)}};
    case Node::Kind::Compose:
      return json{{"kind", "compose"},
                  {"f", smooth_map_to_json(smooth::SmoothMap::from_node(nd.f))},
                  {"g", smooth_map_to_json(smooth::SmoothMap::from_node(nd.g))}};
    case Node::Kind::Blend: {
      json bumps = json::array();
      for (const auto& b : nd.bumps)
        bumps.push_back(json{{"center", vec_to_json(b.center)},
                             {"r1", b.r1},
                             {"r2", b.r2}});
      return json{{"kind", "blend"},
                  {"H", smooth_map_to_json(smooth::SmoothMap::from_node(nd.f))},
                  {"bumps", bumps}};
    }
    case Node::Kind::Select: {
      json pieces = json::array();
      for (const auto& [reg, sub] : nd.pieces)
        pieces.push_back(
            json{{"region", region_to_json(reg)},
                 {"map", smooth_map_to_json(smooth::SmoothMap::from_node(sub))}});
      return json{{"kind", "select"}, {"pieces", pieces}};
    }
    case Node::Kind::Invert:
      return json{{"kind", "invert"},
                  {"f", smooth_map_to_json(smooth::SmoothMap::from_node(nd.f))},
                  {"hint", rigid_to_json(nd.inv_hint)},
                  {"contraction", nd.contraction_bound}};
  }
  return {};
}

smooth::SmoothMap smooth_map_from_json(const json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "rigid")
    return smooth::SmoothMap::rigid(rigid_from_json(j.at("motion")));
  if (kind == "compose")
    return smooth::SmoothMap::compose(smooth_map_from_json(j.at("f")),
                                      smooth_map_from_json(j.at("g")));
  if (kind == "blend") {
    std::vector<smooth::Bump> bumps;
    for (const auto& bj : j.at("bumps"))
      bumps.push_back({vec_from_json(bj.at("center")), bj.at("r1").get<double>(),
                       bj.at("r2").get<double>()});
    return smooth::SmoothMap::blended(smooth_map_from_json(j.at("H")),
                                      std::move(bumps));
  }
  if (kind == "select") {
    std::vector<std::pair<smooth::Region, smooth::SmoothMap>> pieces;
    for (const auto& pj : j.at("pieces"))
      pieces.emplace_back(region_from_json(pj.at("region")),
                          smooth_map_from_json(pj.at("map")));
    return smooth::SmoothMap::select(std::move(pieces));
  }
  if (kind == "invert")
    return smooth::SmoothMap::inverse(smooth_map_from_json(j.at("f")),
                                      rigid_from_json(j.at("hint")),
                                      j.at("contraction").get<double>());
  throw core::InvalidInput("unknown smooth map node kind: " + kind);
}

json atlas_to_json(const atlas::GluingAtlas& a) {
  json j;
  j["format"] = "reifenberg-atlas";
  j["version"] = 1;
  j["scale_i"] = a.scale_i;
  j["n"] = a.n;
  j["r"] = a.r;
  j["t"] = a.t;
  j["chart_radius"] = a.chart_radius;
  j["anchors"] = a.anchors;
  j["anchor_class"] = a.anchor_class;
  j["resolution_floored"] = a.resolution_floored;
  j["chart_capped"] = a.chart_capped;
  j["connected"] = a.connected;
  j["measured"] = json{{"eps_fit", a.eps_fit},
                       {"beta_defect", a.beta_defect},
                       {"sigma", a.sigma},
                       {"cocyclicity", a.cocyclicity},
                       {"f_welldef", a.f_welldef},
                       {"coverage_defect", a.coverage_defect}};
  json fits = json::array();
  for (const auto& pf : a.pair_fits)
    fits.push_back(json{{"a", pf.a},
                        {"b", pf.b},
                        {"rigid", rigid_to_json(pf.rigid)},
                        {"residual", pf.residual},
                        {"samples", pf.samples}});
  j["pair_fits"] = fits;
  json trans = json::array();
  for (const auto& [key, st] : a.transitions.maps)
    trans.push_back(json{{"from", st.from},
                         {"to", st.to},
                         {"map", smooth_map_to_json(st.map)},
                         {"c2_change", st.c2_change}});
  j["transitions"] = trans;
  return j;
}

atlas::GluingAtlas atlas_from_json(const json& j,
                                   const core::FiniteMetricSpace& space) {
  if (j.at("format").get<std::string>() != "reifenberg-atlas")
    throw core::InvalidInput("not an atlas file");
  std::vector<atlas::PairFit> fits;
  for (const auto& fj : j.at("pair_fits")) {
    atlas::PairFit pf;
    pf.a = fj.at("a").get<std::size_t>();
    pf.b = fj.at("b").get<std::size_t>();
    pf.rigid = rigid_from_json(fj.at("rigid"));
    pf.residual = fj.at("residual").get<double>();
    pf.samples = fj.at("samples").get<std::size_t>();
    fits.push_back(pf);
  }
  atlas::BuildConfig cfg;
  atlas::GluingAtlas a = atlas::build_atlas_from_gluing_data(
      space, j.at("n").get<int>(), j.at("r").get<double>(),
      j.at("t").get<double>(), j.at("anchors").get<std::vector<std::size_t>>(),
      j.at("anchor_class").get<std::vector<int>>(), fits,
      j.at("chart_radius").get<double>(), cfg);
  a.scale_i = j.at("scale_i").get<int>();
  // stored transition trees override the rebuilt ones (bit-exact round trip)
  for (const auto& tj : j.at("transitions")) {
    const auto from = tj.at("from").get<std::size_t>();
    const auto to = tj.at("to").get<std::size_t>();
    auto& st = a.transitions.maps.at({std::min(from, to), std::max(from, to)});
    st.from = from;
    st.to = to;
    st.map = smooth_map_from_json(tj.at("map"));
    st.c2_change = tj.at("c2_change").get<double>();
  }
  return a;
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  out << content;
}

}  // namespace reifenberg::io
