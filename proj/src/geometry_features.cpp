#include "meshmamba/geometry_features.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>

#include <nlohmann/json.hpp>

#include "meshmamba/error.hpp"
#include "meshmamba/parallel.hpp"

namespace meshmamba {

namespace {

double angle_deg(const Vec3& a, const Vec3& b) {
  return std::atan2(a.cross(b).norm(), a.dot(b)) * 180.0 / std::numbers::pi;
}

Vec3 normalize_in_box(const Vec3& p, const Vec3& lo, const Vec3& hi) {
  Vec3 out;
  for (int a = 0; a < 3; ++a) {
    const double extent = hi[a] - lo[a];
    out[a] = extent > 0.0 ? (p[a] - lo[a]) / extent : 0.5;
  }
  return out;
}

}  // namespace

Vec3 spatial_feature(const TriMesh& mesh, int face) {
  const auto [lo, hi] = mesh.bounds();
  return normalize_in_box(face_basis(mesh, face).center, lo, hi);
}

std::array<double, 3> curve_feature(const TriMesh& mesh, int face) {
  std::array<double, 3> out{1.0, 1.0, 1.0};
  const Vec3 n = face_basis(mesh, face).normal;
  const auto& adj = mesh.adjacency()[face];
  for (std::size_t k = 0; k < adj.size() && k < 3; ++k) {
    out[k] = std::clamp(n.dot(face_basis(mesh, adj[k]).normal), -1.0, 1.0);
  }
  return out;
}

ShapeFeature shape_feature(const TriMesh& mesh, int face) {
  const FaceBasis b = face_basis(mesh, face);
  ShapeFeature s;
  for (int k = 0; k < 3; ++k) {
    s.angles_deg[k] = angle_deg(b.corners[k], b.corners[(k + 1) % 3]);
    s.lengths[k] = b.corners[k].norm();
  }
  s.area = b.area;
  double longest = 0.0;
  double perimeter = 0.0;
  for (int k = 0; k < 3; ++k) {
    const double e = (mesh.vertex(face, (k + 1) % 3) - mesh.vertex(face, k)).norm();
    longest = std::max(longest, e);
    perimeter += e;
  }
  // inradius r = 2A / P, so longest / (2r) = longest * P / (4A).
  s.irregularity = longest * perimeter / (4.0 * b.area);
  return s;
}

std::vector<GeoFeature> geometry_features(const TriMesh& mesh) {
  const std::size_t n = mesh.face_count();
  std::vector<FaceBasis> bases(n);
  parallel_for(n, [&](std::size_t begin, std::size_t end) {
    for (std::size_t f = begin; f < end; ++f) bases[f] = face_basis(mesh, static_cast<int>(f));
  });
  const auto [lo, hi] = mesh.bounds();
  std::vector<GeoFeature> out(n);
  parallel_for(n, [&](std::size_t begin, std::size_t end) {
    for (std::size_t f = begin; f < end; ++f) {
      GeoFeature& g = out[f];
      g.center = bases[f].center;
      g.spatial = normalize_in_box(g.center, lo, hi);
      g.curve = {1.0, 1.0, 1.0};
      const auto& adj = mesh.adjacency()[f];
      for (std::size_t k = 0; k < adj.size() && k < 3; ++k) {
        g.curve[k] = std::clamp(bases[f].normal.dot(bases[adj[k]].normal), -1.0, 1.0);
      }
      g.shape = shape_feature(mesh, static_cast<int>(f));
    }
  });
  return out;
}

std::array<double, kGeoFeatureDim> flatten(const GeoFeature& g) {
  return {g.spatial.x(),        g.spatial.y(),        g.spatial.z(),        g.curve[0],
          g.curve[1],           g.curve[2],           g.shape.angles_deg[0], g.shape.angles_deg[1],
          g.shape.angles_deg[2], g.shape.lengths[0],  g.shape.lengths[1],    g.shape.lengths[2],
          g.shape.area,         g.shape.irregularity};
}

void write_feature_matrix(const FeatureMatrix& matrix, const std::filesystem::path& path) {
  if (matrix.data.size() != static_cast<std::size_t>(matrix.rows) * matrix.cols) {
    throw Error(ErrorKind::Config, "feature matrix size does not match its shape");
  }
  nlohmann::ordered_json header;
  header["format"] = "meshmamba-features";
  header["version"] = 1;
  header["rows"] = matrix.rows;
  header["cols"] = matrix.cols;
  header["dtype"] = "float64-le";
  nlohmann::ordered_json layout = nlohmann::ordered_json::array();
  for (const auto& [name, width] : matrix.layout) layout.push_back({{"name", name}, {"width", width}});
  header["layout"] = layout;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  out << header.dump() << '\n';
  out.write(reinterpret_cast<const char*>(matrix.data.data()),
            static_cast<std::streamsize>(matrix.data.size() * sizeof(double)));
}

FeatureMatrix read_feature_matrix(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  FeatureMatrix m;
  try {
    const auto header = nlohmann::json::parse(line);
    m.rows = header.at("rows").get<int>();
    m.cols = header.at("cols").get<int>();
    for (const auto& block : header.at("layout")) {
      m.layout.emplace_back(block.at("name").get<std::string>(), block.at("width").get<int>());
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Format, path.string() + ": bad header: " + e.what());
  }
  m.data.resize(static_cast<std::size_t>(m.rows) * m.cols);
  in.read(reinterpret_cast<char*>(m.data.data()), static_cast<std::streamsize>(m.data.size() * sizeof(double)));
  if (!in) throw Error(ErrorKind::Format, path.string() + ": truncated feature matrix");
  return m;
}

}  // namespace meshmamba
