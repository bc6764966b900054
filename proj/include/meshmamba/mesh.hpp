#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "meshmamba/texture_image.hpp"

namespace meshmamba {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Face = std::array<int, 3>;
using FaceUv = std::array<Vec2, 3>;

// Raw arrays handed to make_mesh. uvs and colors are optional (empty).
struct MeshData {
  std::vector<Vec3> vertices;
  std::vector<Face> faces;
  std::vector<FaceUv> uvs;           // one triple per face when present
  std::vector<Vec3> vertex_colors;   // one per vertex when present
  std::shared_ptr<const TextureImage> texture;
};

struct LoadReport {
  std::size_t dropped_degenerate = 0;
  std::size_t nonmanifold_edges = 0;
  std::vector<std::string> warnings;
};

struct LoadOptions {
  bool load_texture = true;
  std::optional<std::filesystem::path> texture_override;
};

// Indexed triangle mesh with per-face edge adjacency. Immutable once built.
class TriMesh {
 public:
  TriMesh() = default;

  std::size_t face_count() const { return faces_.size(); }
  std::size_t vertex_count() const { return vertices_.size(); }

  const std::vector<Vec3>& vertices() const { return vertices_; }
  const std::vector<Face>& faces() const { return faces_; }
  const std::vector<FaceUv>& uvs() const { return uvs_; }
  const std::vector<Vec3>& vertex_colors() const { return vertex_colors_; }
  const std::vector<std::vector<int>>& adjacency() const { return adjacency_; }
  const std::shared_ptr<const TextureImage>& texture() const { return texture_; }

  bool has_uvs() const { return !uvs_.empty(); }
  bool has_colors() const { return !vertex_colors_.empty(); }
  bool has_texture() const { return texture_ != nullptr; }

  const Vec3& vertex(int face, int corner) const { return vertices_[faces_[face][corner]]; }

  // Axis-aligned bounds over referenced vertices.
  std::pair<Vec3, Vec3> bounds() const;

 private:
  friend TriMesh make_mesh(MeshData data, LoadReport* report);

  std::vector<Vec3> vertices_;
  std::vector<Face> faces_;
  std::vector<FaceUv> uvs_;
  std::vector<Vec3> vertex_colors_;
  std::vector<std::vector<int>> adjacency_;
  std::shared_ptr<const TextureImage> texture_;
};

// Validates indices, drops zero-area faces, wraps UVs by repeat and builds
// adjacency.
TriMesh make_mesh(MeshData data, LoadReport* report = nullptr);

// Wavefront OBJ reader (v/vt/f, triangles only). Optional "v x y z r g b"
// vertex colors. Texture from the first map_Kd of the mtllib, or the override.
TriMesh load_mesh(const std::filesystem::path& path, const LoadOptions& options = {},
                  LoadReport* report = nullptr);

// Writes v/vt/f records with 17 significant digits, so reload is bit-exact.
void write_obj(const TriMesh& mesh, const std::filesystem::path& path);

// Two faces are adjacent iff they share an undirected edge. Lists follow the
// face's edge order (v0v1, v1v2, v2v0). Edges with more than two incident
// faces make all of them mutually adjacent.
std::vector<std::vector<int>> build_adjacency(const std::vector<Face>& faces,
                                              std::size_t* nonmanifold_edges = nullptr);

struct FaceBasis {
  Vec3 center;
  Vec3 normal;
  std::array<Vec3, 3> corners;  // vertex minus center
  double area = 0.0;
};

// Throws ErrorKind::DegenerateGeometry for zero-area faces.
FaceBasis face_basis(const TriMesh& mesh, int face);

// Number of shared edges traversed in the same direction by both faces.
std::size_t winding_inconsistencies(const TriMesh& mesh);

// Faces per connected component, via adjacency.
std::vector<int> connected_components(const TriMesh& mesh, int* component_count = nullptr);

}  // namespace meshmamba
