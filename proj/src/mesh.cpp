#include "meshmamba/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <unordered_map>

#include <Eigen/Geometry>

#include "meshmamba/error.hpp"

namespace meshmamba {

namespace {

double wrap_unit(double x) {
  if (x >= 0.0 && x <= 1.0) return x;
  return x - std::floor(x);
}

std::uint64_t edge_key(int a, int b) {
  const auto lo = static_cast<std::uint32_t>(std::min(a, b));
  const auto hi = static_cast<std::uint32_t>(std::max(a, b));
  return (static_cast<std::uint64_t>(lo) << 32) | hi;
}

double triangle_area(const Vec3& a, const Vec3& b, const Vec3& c) {
  return 0.5 * (b - a).cross(c - a).norm();
}

[[noreturn]] void format_error(const std::filesystem::path& path, int line, const std::string& what) {
  throw Error(ErrorKind::Format, path.string() + ":" + std::to_string(line) + ": " + what);
}

// Parses one "v/vt/vn" corner; returns 1-based or negative OBJ indices (0 = absent).
std::array<long, 3> parse_corner(const std::string& token) {
  std::array<long, 3> idx{0, 0, 0};
  std::size_t start = 0;
  for (int k = 0; k < 3; ++k) {
    const std::size_t slash = token.find('/', start);
    const std::string part = token.substr(start, slash == std::string::npos ? std::string::npos : slash - start);
    if (!part.empty()) {
      std::size_t used = 0;
      idx[k] = std::stol(part, &used);
      if (used != part.size()) throw std::invalid_argument(part);
    } else if (k == 0) {
      throw std::invalid_argument(token);
    }
    if (slash == std::string::npos) break;
    start = slash + 1;
  }
  return idx;
}

std::optional<std::filesystem::path> find_texture(const std::filesystem::path& mtl_path) {
  std::ifstream in(mtl_path);
  if (!in) return std::nullopt;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ss(line);
    std::string key;
    ss >> key;
    if (key == "map_Kd") {
      std::string rest;
      std::getline(ss, rest);
      const auto first = rest.find_first_not_of(" \t");
      if (first == std::string::npos) continue;
      rest = rest.substr(first);
      while (!rest.empty() && (rest.back() == '\r' || rest.back() == ' ')) rest.pop_back();
      return mtl_path.parent_path() / rest;
    }
  }
  return std::nullopt;
}

}  // namespace

std::pair<Vec3, Vec3> TriMesh::bounds() const {
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = Vec3::Constant(-std::numeric_limits<double>::infinity());
  for (const Face& f : faces_) {
    for (int v : f) {
      lo = lo.cwiseMin(vertices_[v]);
      hi = hi.cwiseMax(vertices_[v]);
    }
  }
  if (faces_.empty()) {
    lo.setZero();
    hi.setZero();
  }
  return {lo, hi};
}

std::vector<std::vector<int>> build_adjacency(const std::vector<Face>& faces,
                                              std::size_t* nonmanifold_edges) {
  std::unordered_map<std::uint64_t, std::vector<int>> edge_faces;
  edge_faces.reserve(faces.size() * 2);
  for (std::size_t f = 0; f < faces.size(); ++f) {
    for (int e = 0; e < 3; ++e) {
      edge_faces[edge_key(faces[f][e], faces[f][(e + 1) % 3])].push_back(static_cast<int>(f));
    }
  }
  std::size_t nonmanifold = 0;
  for (const auto& [key, incident] : edge_faces) {
    if (incident.size() > 2) ++nonmanifold;
  }
  std::vector<std::vector<int>> adjacency(faces.size());
  for (std::size_t f = 0; f < faces.size(); ++f) {
    auto& list = adjacency[f];
    for (int e = 0; e < 3; ++e) {
      const auto& incident = edge_faces.at(edge_key(faces[f][e], faces[f][(e + 1) % 3]));
      for (int g : incident) {
        if (g != static_cast<int>(f) && std::find(list.begin(), list.end(), g) == list.end()) {
          list.push_back(g);
        }
      }
    }
  }
  if (nonmanifold_edges) *nonmanifold_edges = nonmanifold;
  return adjacency;
}

TriMesh make_mesh(MeshData data, LoadReport* report) {
  LoadReport local;
  LoadReport& rep = report ? *report : local;

  const auto nv = static_cast<long>(data.vertices.size());
  for (const Face& f : data.faces) {
    for (int v : f) {
      if (v < 0 || v >= nv) {
        throw Error(ErrorKind::Format, "face references vertex " + std::to_string(v) +
                                           " outside [0," + std::to_string(nv) + ")");
      }
    }
  }
  if (!data.uvs.empty() && data.uvs.size() != data.faces.size()) {
    throw Error(ErrorKind::Format, "uv triple count does not match face count");
  }
  if (!data.vertex_colors.empty() && data.vertex_colors.size() != data.vertices.size()) {
    throw Error(ErrorKind::Format, "vertex color count does not match vertex count");
  }

  // Degenerate threshold is relative to the squared bounding-box diagonal.
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = -lo;
  for (const Vec3& p : data.vertices) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  const double diag2 = data.vertices.empty() ? 0.0 : (hi - lo).squaredNorm();
  const double area_eps = 1e-14 * diag2;

  TriMesh mesh;
  mesh.vertices_ = std::move(data.vertices);
  mesh.vertex_colors_ = std::move(data.vertex_colors);
  mesh.texture_ = std::move(data.texture);
  const bool has_uvs = !data.uvs.empty();
  for (std::size_t f = 0; f < data.faces.size(); ++f) {
    const Face& face = data.faces[f];
    const bool distinct = face[0] != face[1] && face[1] != face[2] && face[0] != face[2];
    if (!distinct || triangle_area(mesh.vertices_[face[0]], mesh.vertices_[face[1]],
                                   mesh.vertices_[face[2]]) <= area_eps) {
      ++rep.dropped_degenerate;
      continue;
    }
    mesh.faces_.push_back(face);
    if (has_uvs) {
      FaceUv uv = data.uvs[f];
      for (Vec2& c : uv) {
        c.x() = wrap_unit(c.x());
        c.y() = wrap_unit(c.y());
      }
      mesh.uvs_.push_back(uv);
    }
  }
  if (rep.dropped_degenerate > 0) {
    rep.warnings.push_back("dropped " + std::to_string(rep.dropped_degenerate) + " degenerate faces");
  }
  mesh.adjacency_ = build_adjacency(mesh.faces_, &rep.nonmanifold_edges);
  if (rep.nonmanifold_edges > 0) {
    const std::string msg = std::to_string(rep.nonmanifold_edges) +
                            " non-manifold edges; incident faces made mutually adjacent";
    rep.warnings.push_back(msg);
    warn(msg);
  }
  return mesh;
}

TriMesh load_mesh(const std::filesystem::path& path, const LoadOptions& options, LoadReport* report) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());

  MeshData data;
  std::vector<Vec2> texcoords;
  std::vector<std::array<long, 3>> face_uv_refs;
  std::vector<int> face_lines;
  bool any_missing_uv = false;
  bool any_color = false;
  std::optional<std::filesystem::path> mtl;

  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ss(line);
    std::string key;
    if (!(ss >> key) || key[0] == '#') continue;
    if (key == "v") {
      std::vector<double> vals;
      double x;
      while (ss >> x) vals.push_back(x);
      if (!ss.eof() || (vals.size() != 3 && vals.size() != 4 && vals.size() != 6)) {
        format_error(path, line_no, "malformed vertex record");
      }
      data.vertices.emplace_back(vals[0], vals[1], vals[2]);
      if (vals.size() == 6) {
        any_color = true;
        data.vertex_colors.emplace_back(vals[3], vals[4], vals[5]);
      } else {
        data.vertex_colors.emplace_back(1.0, 1.0, 1.0);
      }
    } else if (key == "vt") {
      double u, v;
      if (!(ss >> u >> v)) format_error(path, line_no, "malformed texture coordinate");
      texcoords.emplace_back(u, v);
    } else if (key == "f") {
      std::vector<std::string> tokens;
      std::string tok;
      while (ss >> tok) tokens.push_back(tok);
      if (tokens.size() < 3) format_error(path, line_no, "face with fewer than 3 corners");
      if (tokens.size() > 3) {
        throw Error(ErrorKind::UnsupportedTopology,
                    path.string() + ":" + std::to_string(line_no) + ": face with " +
                        std::to_string(tokens.size()) + " corners; only triangles are supported");
      }
      Face face;
      std::array<long, 3> uv_ref{0, 0, 0};
      for (int k = 0; k < 3; ++k) {
        std::array<long, 3> idx;
        try {
          idx = parse_corner(tokens[k]);
        } catch (const std::exception&) {
          format_error(path, line_no, "malformed face corner '" + tokens[k] + "'");
        }
        const long nv = static_cast<long>(data.vertices.size());
        const long v = idx[0] > 0 ? idx[0] - 1 : nv + idx[0];
        if (v < 0 || v >= nv) format_error(path, line_no, "vertex index out of range");
        face[k] = static_cast<int>(v);
        if (idx[1] == 0) {
          any_missing_uv = true;
        } else {
          const long nt = static_cast<long>(texcoords.size());
          const long t = idx[1] > 0 ? idx[1] - 1 : nt + idx[1];
          if (t < 0 || t >= nt) format_error(path, line_no, "texture coordinate index out of range");
          uv_ref[k] = t;
        }
      }
      data.faces.push_back(face);
      face_uv_refs.push_back(uv_ref);
      face_lines.push_back(line_no);
    } else if (key == "mtllib") {
      std::string name;
      std::getline(ss, name);
      const auto first = name.find_first_not_of(" \t");
      if (first != std::string::npos) mtl = path.parent_path() / name.substr(first);
    }
  }

  if (!any_color) data.vertex_colors.clear();
  if (!texcoords.empty() && !any_missing_uv) {
    for (const auto& ref : face_uv_refs) {
      data.uvs.push_back({texcoords[ref[0]], texcoords[ref[1]], texcoords[ref[2]]});
    }
  } else if (!texcoords.empty()) {
    warn(path.string() + ": some faces lack texture coordinates; UVs ignored");
  }

  LoadReport local;
  LoadReport& rep = report ? *report : local;
  if (!data.uvs.empty() && options.load_texture) {
    std::optional<std::filesystem::path> tex_path = options.texture_override;
    if (!tex_path && mtl) tex_path = find_texture(*mtl);
    if (tex_path && std::filesystem::exists(*tex_path)) {
      data.texture = std::make_shared<TextureImage>(load_png(*tex_path));
    } else {
      const std::string msg = path.string() + ": UVs present but texture missing; texture absent";
      rep.warnings.push_back(msg);
      warn(msg);
    }
  }
  return make_mesh(std::move(data), &rep);
}

void write_obj(const TriMesh& mesh, const std::filesystem::path& path) {
  std::FILE* out = std::fopen(path.string().c_str(), "w");
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  if (mesh.has_texture() && !mesh.texture()->source.empty()) {
    auto mtl_path = path;
    mtl_path.replace_extension(".mtl");
    if (std::FILE* mtl = std::fopen(mtl_path.string().c_str(), "w")) {
      // Relative to the .mtl so a copied directory stays self-contained.
      const auto texture = std::filesystem::proximate(std::filesystem::absolute(mesh.texture()->source),
                                                      std::filesystem::absolute(mtl_path).parent_path());
      std::fprintf(mtl, "newmtl material0\nmap_Kd %s\n", texture.generic_string().c_str());
      std::fclose(mtl);
      std::fprintf(out, "mtllib %s\nusemtl material0\n", mtl_path.filename().string().c_str());
    }
  }
  const auto& vs = mesh.vertices();
  for (std::size_t i = 0; i < vs.size(); ++i) {
    if (mesh.has_colors()) {
      const Vec3& c = mesh.vertex_colors()[i];
      std::fprintf(out, "v %.17g %.17g %.17g %.17g %.17g %.17g\n", vs[i].x(), vs[i].y(), vs[i].z(),
                   c.x(), c.y(), c.z());
    } else {
      std::fprintf(out, "v %.17g %.17g %.17g\n", vs[i].x(), vs[i].y(), vs[i].z());
    }
  }
  for (const FaceUv& uv : mesh.uvs()) {
    for (const Vec2& c : uv) std::fprintf(out, "vt %.17g %.17g\n", c.x(), c.y());
  }
  for (std::size_t f = 0; f < mesh.face_count(); ++f) {
    const Face& face = mesh.faces()[f];
    if (mesh.has_uvs()) {
      const std::size_t t = 3 * f + 1;
      std::fprintf(out, "f %d/%zu %d/%zu %d/%zu\n", face[0] + 1, t, face[1] + 1, t + 1, face[2] + 1,
                   t + 2);
    } else {
      std::fprintf(out, "f %d %d %d\n", face[0] + 1, face[1] + 1, face[2] + 1);
    }
  }
  std::fclose(out);
}

FaceBasis face_basis(const TriMesh& mesh, int face) {
  if (face < 0 || static_cast<std::size_t>(face) >= mesh.face_count()) {
    throw Error(ErrorKind::Config, "face index " + std::to_string(face) + " out of range");
  }
  const Vec3& a = mesh.vertex(face, 0);
  const Vec3& b = mesh.vertex(face, 1);
  const Vec3& c = mesh.vertex(face, 2);
  const Vec3 cross = (b - a).cross(c - a);
  const double len = cross.norm();
  const double scale = std::max({(b - a).squaredNorm(), (c - b).squaredNorm(), (a - c).squaredNorm()});
  if (!(len > 1e-14 * scale) || scale == 0.0) {
    throw Error(ErrorKind::DegenerateGeometry, "face " + std::to_string(face) + " is degenerate");
  }
  FaceBasis basis;
  basis.center = (a + b + c) / 3.0;
  basis.normal = cross / len;
  basis.corners = {a - basis.center, b - basis.center, c - basis.center};
  basis.area = 0.5 * len;
  return basis;
}

std::size_t winding_inconsistencies(const TriMesh& mesh) {
  std::map<std::pair<int, int>, int> directed;
  for (const Face& f : mesh.faces()) {
    for (int e = 0; e < 3; ++e) ++directed[{f[e], f[(e + 1) % 3]}];
  }
  std::size_t bad = 0;
  for (const auto& [edge, count] : directed) {
    if (count > 1) bad += count - 1;
  }
  return bad;
}

std::vector<int> connected_components(const TriMesh& mesh, int* component_count) {
  std::vector<int> label(mesh.face_count(), -1);
  int next = 0;
  std::vector<int> stack;
  for (std::size_t s = 0; s < mesh.face_count(); ++s) {
    if (label[s] >= 0) continue;
    label[s] = next;
    stack.push_back(static_cast<int>(s));
    while (!stack.empty()) {
      const int f = stack.back();
      stack.pop_back();
      for (int g : mesh.adjacency()[f]) {
        if (label[g] < 0) {
          label[g] = next;
          stack.push_back(g);
        }
      }
    }
    ++next;
  }
  if (component_count) *component_count = next;
  return label;
}

}  // namespace meshmamba
