#include "cmig/data/io.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <random>
#include <sstream>
#include <vector>

#include <Eigen/Geometry>

#include "cmig/errors.hpp"

namespace cmig::data {

using geometry::PointCloud;
using geometry::Points;

namespace {

struct Mesh {
  std::vector<Eigen::Vector3d> vertices;
  std::vector<std::array<std::size_t, 3>> faces;
};

class LineReader {
 public:
  explicit LineReader(const std::string& text) : in_(text) {}

  // Next non-empty, non-comment line; false at end of input.
  bool next(std::string& line) {
    while (std::getline(in_, line)) {
      ++number_;
      const auto first = line.find_first_not_of(" \t\r");
      if (first == std::string::npos || line[first] == '#') continue;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      return true;
    }
    return false;
  }

  std::string require(const char* what) {
    std::string line;
    if (!next(line)) throw ParseError(std::string("unexpected end of file, expected ") + what, number_ + 1);
    return line;
  }

  std::size_t line() const { return number_; }

 private:
  std::istringstream in_;
  std::size_t number_ = 0;
};

Eigen::Vector3d parse_xyz_line(const std::string& line, std::size_t lineno) {
  std::istringstream ls(line);
  Eigen::Vector3d p;
  if (!(ls >> p.x() >> p.y() >> p.z())) throw ParseError("expected three coordinates", lineno);
  if (!p.allFinite()) throw ParseError("non-finite coordinate", lineno);
  return p;
}

void read_face(const std::string& line, std::size_t lineno, std::size_t n_vertices, Mesh& mesh) {
  std::istringstream ls(line);
  std::size_t count = 0;
  if (!(ls >> count)) throw ParseError("malformed face record", lineno);
  if (count != 3) throw ParseError("only triangle faces are supported (got " + std::to_string(count) + ")", lineno);
  std::array<std::size_t, 3> f{};
  for (auto& idx : f) {
    long v = -1;
    if (!(ls >> v) || v < 0 || static_cast<std::size_t>(v) >= n_vertices)
      throw ParseError("face references an invalid vertex", lineno);
    idx = static_cast<std::size_t>(v);
  }
  mesh.faces.push_back(f);
}

Mesh parse_off(const std::string& text) {
  LineReader r(text);
  std::string line = r.require("OFF header");
  if (line.rfind("OFF", 0) != 0) throw ParseError("missing OFF header", r.line());
  // ModelNet files sometimes glue the counts onto the header line.
  std::string counts = line.substr(3);
  if (counts.find_first_not_of(" \t") == std::string::npos) counts = r.require("vertex/face counts");
  std::istringstream cs(counts);
  std::size_t nv = 0, nf = 0;
  if (!(cs >> nv >> nf)) throw ParseError("malformed vertex/face counts", r.line());
  if (nv < 3) throw ParseError("mesh needs at least 3 vertices", r.line());
  Mesh mesh;
  for (std::size_t i = 0; i < nv; ++i) mesh.vertices.push_back(parse_xyz_line(r.require("vertex"), r.line()));
  for (std::size_t i = 0; i < nf; ++i) {
    const std::string f = r.require("face");
    read_face(f, r.line(), nv, mesh);
  }
  return mesh;
}

Mesh parse_ply(const std::string& text) {
  LineReader r(text);
  if (r.require("PLY header") != "ply") throw ParseError("missing 'ply' magic", r.line());
  std::size_t nv = 0, nf = 0;
  bool ascii = false;
  std::string current;
  std::vector<std::string> vertex_props;
  for (;;) {
    const std::string line = r.require("end_header");
    std::istringstream ls(line);
    std::string kw;
    ls >> kw;
    if (kw == "end_header") break;
    if (kw == "format") {
      std::string fmt;
      ls >> fmt;
      ascii = fmt == "ascii";
      if (!ascii) throw ParseError("only ASCII PLY is supported", r.line());
    } else if (kw == "element") {
      std::size_t n = 0;
      ls >> current >> n;
      if (current == "vertex") nv = n;
      else if (current == "face") nf = n;
      else if (n > 0) throw ParseError("unsupported PLY element '" + current + "'", r.line());
    } else if (kw == "property" && current == "vertex") {
      std::string type, name;
      ls >> type >> name;
      if (type == "list") throw ParseError("list property on vertex element", r.line());
      vertex_props.push_back(name);
    }
  }
  if (!ascii) throw ParseError("PLY format line missing", r.line());
  auto pos = [&](const char* n) -> std::size_t {
    auto it = std::find(vertex_props.begin(), vertex_props.end(), n);
    if (it == vertex_props.end()) throw ParseError(std::string("PLY vertex has no '") + n + "' property", r.line());
    return static_cast<std::size_t>(it - vertex_props.begin());
  };
  const std::size_t ix = pos("x"), iy = pos("y"), iz = pos("z");
  if (nv < 3) throw ParseError("mesh needs at least 3 vertices", r.line());
  Mesh mesh;
  for (std::size_t i = 0; i < nv; ++i) {
    const std::string line = r.require("vertex");
    std::istringstream ls(line);
    std::vector<double> vals(vertex_props.size());
    for (double& v : vals)
      if (!(ls >> v)) throw ParseError("vertex has fewer values than declared properties", r.line());
    const Eigen::Vector3d p(vals[ix], vals[iy], vals[iz]);
    if (!p.allFinite()) throw ParseError("non-finite coordinate", r.line());
    mesh.vertices.push_back(p);
  }
  for (std::size_t i = 0; i < nf; ++i) {
    const std::string f = r.require("face");
    read_face(f, r.line(), nv, mesh);
  }
  return mesh;
}

Points sample_mesh(const Mesh& mesh, std::size_t n, std::mt19937_64& rng) {
  std::vector<double> cumulative;
  double total = 0.0;
  for (const auto& f : mesh.faces) {
    const auto& a = mesh.vertices[f[0]];
    const auto& b = mesh.vertices[f[1]];
    const auto& c = mesh.vertices[f[2]];
    total += 0.5 * (b - a).cross(c - a).norm();
    cumulative.push_back(total);
  }
  if (!(total > 0.0)) throw ParseError("mesh has zero surface area");
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Points out(static_cast<Eigen::Index>(n), 3);
  for (std::size_t i = 0; i < n; ++i) {
    const double pick = u(rng) * total;
    auto it = std::upper_bound(cumulative.begin(), cumulative.end(), pick);
    if (it == cumulative.end()) --it;
    const auto& f = mesh.faces[static_cast<std::size_t>(it - cumulative.begin())];
    const double r1 = std::sqrt(u(rng));
    const double r2 = u(rng);
    const Eigen::Vector3d p = (1 - r1) * mesh.vertices[f[0]] + r1 * (1 - r2) * mesh.vertices[f[1]] +
                              r1 * r2 * mesh.vertices[f[2]];
    out.row(static_cast<Eigen::Index>(i)) = p.transpose();
  }
  return out;
}

Points resample(const std::vector<Eigen::Vector3d>& pts, std::size_t n, std::mt19937_64& rng) {
  std::vector<std::size_t> idx(pts.size());
  std::iota(idx.begin(), idx.end(), 0);
  if (pts.size() > n) {
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(n);
    std::sort(idx.begin(), idx.end());
  } else {
    std::uniform_int_distribution<std::size_t> pick(0, pts.size() - 1);
    while (idx.size() < n) idx.push_back(pick(rng));
  }
  Points out(static_cast<Eigen::Index>(n), 3);
  for (std::size_t i = 0; i < n; ++i) out.row(static_cast<Eigen::Index>(i)) = pts[idx[i]].transpose();
  return out;
}

}  // namespace

CloudFormat format_from_path(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  if (ext == ".off") return CloudFormat::kOff;
  if (ext == ".ply") return CloudFormat::kPly;
  return CloudFormat::kXyz;
}

PointCloud normalize(PointCloud cloud) {
  cloud.validate();
  const Eigen::RowVector3d centroid = cloud.points.colwise().mean();
  cloud.points.rowwise() -= centroid;
  const double radius = cloud.points.rowwise().norm().maxCoeff();
  if (radius > 0.0) cloud.points /= radius;
  return cloud;
}

PointCloud parse_cloud(const std::string& text, CloudFormat format, std::size_t n_points, std::uint64_t seed) {
  if (n_points == 0) throw ContractViolation("load_cloud: n_points must be positive");
  std::mt19937_64 rng(seed);
  if (format == CloudFormat::kXyz) {
    LineReader r(text);
    std::vector<Eigen::Vector3d> pts;
    std::string line;
    while (r.next(line)) pts.push_back(parse_xyz_line(line, r.line()));
    if (pts.empty()) throw ParseError("empty point file", 1);
    return normalize(PointCloud(resample(pts, n_points, rng)));
  }
  if (text.find_first_not_of(" \t\r\n") == std::string::npos) throw ParseError("empty mesh file", 1);
  const Mesh mesh = format == CloudFormat::kOff ? parse_off(text) : parse_ply(text);
  if (mesh.faces.empty()) return normalize(PointCloud(resample(mesh.vertices, n_points, rng)));
  return normalize(PointCloud(sample_mesh(mesh, n_points, rng)));
}

PointCloud load_cloud(const std::filesystem::path& path, CloudFormat format, std::size_t n_points,
                      std::uint64_t seed) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return parse_cloud(ss.str(), format, n_points, seed);
}

void write_xyz(const std::filesystem::path& path, const PointCloud& cloud) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write " + path.string());
  os << std::setprecision(17);
  for (Eigen::Index i = 0; i < cloud.points.rows(); ++i)
    os << cloud.points(i, 0) << ' ' << cloud.points(i, 1) << ' ' << cloud.points(i, 2) << '\n';
  if (!os) throw IoError("failed writing " + path.string());
}

PointCloud read_xyz(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  LineReader r(ss.str());
  std::vector<Eigen::Vector3d> pts;
  std::string line;
  while (r.next(line)) pts.push_back(parse_xyz_line(line, r.line()));
  if (pts.empty()) throw ParseError("empty point file " + path.string(), 1);
  Points out(static_cast<Eigen::Index>(pts.size()), 3);
  for (std::size_t i = 0; i < pts.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = pts[i].transpose();
  return PointCloud(std::move(out));
}

}  // namespace cmig::data
