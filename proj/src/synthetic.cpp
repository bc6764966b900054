#include "meshmamba/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>

#include <Eigen/Geometry>

#include "meshmamba/error.hpp"
#include "meshmamba/geometry_features.hpp"
#include "meshmamba/rng.hpp"

namespace meshmamba {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

}  // namespace

TriMesh make_cube(double size) {
  const double h = 0.5 * size;
  MeshData d;
  for (int i = 0; i < 8; ++i) d.vertices.emplace_back(i & 1 ? h : -h, i & 2 ? h : -h, i & 4 ? h : -h);
  // Two triangles per side, counter-clockwise seen from outside.
  d.faces = {{0, 2, 1}, {1, 2, 3}, {4, 5, 6}, {5, 7, 6}, {0, 1, 4}, {1, 5, 4},
             {2, 6, 3}, {3, 6, 7}, {0, 4, 2}, {2, 4, 6}, {1, 3, 5}, {3, 7, 5}};
  return make_mesh(std::move(d));
}

TriMesh make_uv_sphere(int stacks, int slices, double radius) {
  if (stacks < 2 || slices < 3) throw Error(ErrorKind::Config, "sphere needs stacks >= 2 and slices >= 3");
  MeshData d;
  d.vertices.emplace_back(0.0, 0.0, radius);
  for (int i = 1; i < stacks; ++i) {
    const double theta = std::numbers::pi * i / stacks;
    for (int j = 0; j < slices; ++j) {
      const double phi = 2.0 * std::numbers::pi * j / slices;
      d.vertices.emplace_back(radius * std::sin(theta) * std::cos(phi), radius * std::sin(theta) * std::sin(phi),
                              radius * std::cos(theta));
    }
  }
  const int south = static_cast<int>(d.vertices.size());
  d.vertices.emplace_back(0.0, 0.0, -radius);
  auto ring = [&](int i, int j) { return 1 + (i - 1) * slices + (j % slices); };
  for (int j = 0; j < slices; ++j) d.faces.push_back({0, ring(1, j), ring(1, j + 1)});
  for (int i = 1; i + 1 < stacks; ++i) {
    for (int j = 0; j < slices; ++j) {
      d.faces.push_back({ring(i, j), ring(i + 1, j), ring(i + 1, j + 1)});
      d.faces.push_back({ring(i, j), ring(i + 1, j + 1), ring(i, j + 1)});
    }
  }
  for (int j = 0; j < slices; ++j) d.faces.push_back({south, ring(stacks - 1, j + 1), ring(stacks - 1, j)});
  return make_mesh(std::move(d));
}

TriMesh make_icosphere(int level, double radius) {
  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Vec3> v = {{-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0}, {0, -1, t}, {0, 1, t},
                         {0, -1, -t}, {0, 1, -t}, {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1}};
  for (Vec3& p : v) p.normalize();
  std::vector<Face> f = {{0, 11, 5}, {0, 5, 1}, {0, 1, 7}, {0, 7, 10}, {0, 10, 11}, {1, 5, 9}, {5, 11, 4},
                         {11, 10, 2}, {10, 7, 6}, {7, 1, 8}, {3, 9, 4}, {3, 4, 2}, {3, 2, 6}, {3, 6, 8},
                         {3, 8, 9}, {4, 9, 5}, {2, 4, 11}, {6, 2, 10}, {8, 6, 7}, {9, 8, 1}};
  for (int l = 0; l < level; ++l) {
    std::map<std::pair<int, int>, int> mid;
    auto midpoint = [&](int a, int b) {
      const auto key = std::minmax(a, b);
      const auto it = mid.find(key);
      if (it != mid.end()) return it->second;
      v.push_back((v[a] + v[b]).normalized());
      const int id = static_cast<int>(v.size()) - 1;
      mid.emplace(key, id);
      return id;
    };
    std::vector<Face> next;
    next.reserve(f.size() * 4);
    for (const Face& face : f) {
      const int ab = midpoint(face[0], face[1]), bc = midpoint(face[1], face[2]), ca = midpoint(face[2], face[0]);
      next.push_back({face[0], ab, ca});
      next.push_back({face[1], bc, ab});
      next.push_back({face[2], ca, bc});
      next.push_back({ab, bc, ca});
    }
    f = std::move(next);
  }
  MeshData d;
  for (const Vec3& p : v) d.vertices.push_back(radius * p);
  d.faces = std::move(f);
  return make_mesh(std::move(d));
}

TriMesh make_grid(const GridOptions& o) {
  if (o.nx < 1 || o.ny < 1) throw Error(ErrorKind::Config, "grid needs at least one cell per axis");
  Rng rng(mix_seed(o.seed, 0x67726964ULL));
  MeshData d;
  std::vector<Vec2> uv;
  for (int j = 0; j <= o.ny; ++j) {
    for (int i = 0; i <= o.nx; ++i) {
      double x = static_cast<double>(i) / o.nx;
      double y = static_cast<double>(j) / o.ny;
      uv.emplace_back(x, y);
      const bool interior = i > 0 && i < o.nx && j > 0 && j < o.ny;
      if (interior && o.jitter > 0.0) {
        x += o.jitter * rng.uniform(-0.5, 0.5) / o.nx;
        y += o.jitter * rng.uniform(-0.5, 0.5) / o.ny;
      }
      const double z = o.amplitude * std::sin(2.0 * std::numbers::pi * x) * std::cos(std::numbers::pi * y);
      d.vertices.emplace_back(x, y, z);
    }
  }
  auto id = [&](int i, int j) { return j * (o.nx + 1) + i; };
  for (int j = 0; j < o.ny; ++j) {
    for (int i = 0; i < o.nx; ++i) {
      const Face a{id(i, j), id(i + 1, j), id(i + 1, j + 1)};
      const Face b{id(i, j), id(i + 1, j + 1), id(i, j + 1)};
      for (const Face& face : {a, b}) {
        d.faces.push_back(face);
        if (o.uvs) d.uvs.push_back({uv[face[0]], uv[face[1]], uv[face[2]]});
      }
    }
  }
  if (o.uvs) d.texture = o.texture;
  return make_mesh(std::move(d));
}

TriMesh make_strip(int faces) {
  if (faces < 1) throw Error(ErrorKind::Config, "strip needs at least one face");
  MeshData d;
  for (int k = 0; k < faces + 2; ++k) d.vertices.emplace_back(0.5 * k, k % 2 == 0 ? 0.0 : 1.0, 0.0);
  for (int i = 0; i < faces; ++i) {
    if (i % 2 == 0) {
      d.faces.push_back({i, i + 2, i + 1});
    } else {
      d.faces.push_back({i, i + 1, i + 2});
    }
  }
  return make_mesh(std::move(d));
}

TextureImage procedural_texture(int width, int height, std::uint64_t seed) {
  Rng rng(mix_seed(seed, 0x746578ULL));
  struct Blob {
    double x, y, r, color[3];
  };
  std::vector<Blob> blobs(5);
  for (Blob& b : blobs) {
    b.x = rng.uniform();
    b.y = rng.uniform();
    b.r = rng.uniform(0.08, 0.25);
    for (double& c : b.color) c = rng.uniform();
  }
  TextureImage img;
  img.width = width;
  img.height = height;
  img.channels = 3;
  img.data.assign(static_cast<std::size_t>(width) * height * 3, 0.0);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const double u = (x + 0.5) / width, v = 1.0 - (y + 0.5) / height;
      double rgb[3] = {0.2 + 0.1 * std::sin(12.0 * u), 0.2, 0.2 + 0.1 * std::cos(9.0 * v)};
      for (const Blob& b : blobs) {
        const double w = std::exp(-((u - b.x) * (u - b.x) + (v - b.y) * (v - b.y)) / (2.0 * b.r * b.r));
        for (int c = 0; c < 3; ++c) rgb[c] += w * b.color[c];
      }
      for (int c = 0; c < 3; ++c) img.at(x, y, c) = std::clamp(rgb[c], 0.0, 1.0);
    }
  }
  return img;
}

TextureImage constant_texture(int width, int height, double value) {
  TextureImage img;
  img.width = width;
  img.height = height;
  img.channels = 3;
  img.data.assign(static_cast<std::size_t>(width) * height * 3, value);
  return img;
}

SaliencyMap blob_saliency(const TriMesh& mesh, const Vec3& center, double radius) {
  SaliencyMap map;
  map.values.reserve(mesh.faces().size());
  for (std::size_t f = 0; f < mesh.faces().size(); ++f) {
    const Vec3 c = (mesh.vertex(static_cast<int>(f), 0) + mesh.vertex(static_cast<int>(f), 1) +
                    mesh.vertex(static_cast<int>(f), 2)) /
                   3.0;
    map.values.push_back(std::exp(-(c - center).squaredNorm() / (2.0 * radius * radius)));
  }
  return map;
}

SaliencyMap shape_blob_saliency(const TriMesh& mesh, const Vec3& blob_center, double blob_radius) {
  const SaliencyMap blob = blob_saliency(mesh, blob_center, blob_radius);
  const std::vector<GeoFeature> geo = geometry_features(mesh);
  std::vector<double> irr(geo.size());
  for (std::size_t f = 0; f < geo.size(); ++f) irr[f] = std::log(geo[f].shape.irregularity / std::sqrt(3.0));
  const auto [lo, hi] = std::minmax_element(irr.begin(), irr.end());
  const double span = *hi - *lo;
  SaliencyMap out;
  out.values.resize(geo.size());
  for (std::size_t f = 0; f < geo.size(); ++f) {
    const double shape = span > 0.0 ? (irr[f] - *lo) / span : 0.0;
    out.values[f] = 0.5 * blob.values[f] + 0.5 * shape;
  }
  return out.max_normalized();
}

GazeSession synthetic_session(const std::vector<SyntheticFixation>& fixations, double dwell_s, double rate_hz,
                              double yaw_deg) {
  const Eigen::AngleAxisd to_world(yaw_deg * kDeg, Vec3::UnitY());
  const double dt = 1.0 / rate_hz;
  const int dwell = std::max(2, static_cast<int>(std::lround(dwell_s * rate_hz)));
  GazeSession session;
  double t = 0.0;
  auto emit = [&](const Vec3& origin, const Vec3& dir) {
    GazeSample s;
    s.time = t;
    s.origin = to_world * origin;
    s.gaze = (to_world * dir).normalized();
    s.head = s.gaze;
    s.model_yaw_deg = yaw_deg;
    session.push_back(s);
    t += dt;
  };
  for (std::size_t k = 0; k < fixations.size(); ++k) {
    const Vec3 dir = (fixations[k].target - fixations[k].origin).normalized();
    if (k > 0) {
      // Saccade: two samples far off the fixation axis.
      emit(fixations[k].origin, cone_direction(dir, 30.0 * kDeg, 0.0));
      emit(fixations[k].origin, cone_direction(dir, 30.0 * kDeg, std::numbers::pi));
    }
    for (int i = 0; i < dwell; ++i) emit(fixations[k].origin, dir);
  }
  return session;
}

GazeSession random_session(const TriMesh& mesh, int count, double distance, std::uint64_t seed, double yaw_deg) {
  Rng rng(mix_seed(seed, 0x67617a65ULL));
  std::vector<SyntheticFixation> fixations;
  for (int k = 0; k < count; ++k) {
    const int f = static_cast<int>(rng.below(mesh.faces().size()));
    const FaceBasis b = face_basis(mesh, f);
    fixations.push_back({b.center + distance * b.normal, b.center});
  }
  return synthetic_session(fixations, 0.3, 120.0, yaw_deg);
}

}  // namespace meshmamba
