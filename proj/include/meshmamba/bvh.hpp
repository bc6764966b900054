#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include <Eigen/Geometry>

#include "meshmamba/mesh.hpp"

namespace meshmamba {

struct TriangleHit {
  double t = 0.0;
  double u = 0.0;
  double v = 0.0;
};

// Moller-Trumbore. Returns the forward hit with t > kRayEpsilon and
// barycentrics inside the closed triangle.
std::optional<TriangleHit> intersect_ray_triangle(const Vec3& origin, const Vec3& direction,
                                                  const Vec3& v0, const Vec3& v1, const Vec3& v2);

inline constexpr double kRayEpsilon = 1e-9;

// Count of degenerate triangles seen by intersect_ray_triangle (debug aid).
std::size_t degenerate_triangle_count();
void reset_degenerate_triangle_count();

struct MeshHit {
  int face = -1;
  double t = 0.0;
  double u = 0.0;
  double v = 0.0;
  Vec3 point = Vec3::Zero();
};

// Nearest hit over all faces; ties in t resolve to the lowest face index.
std::optional<MeshHit> intersect_brute_force(const TriMesh& mesh, const Vec3& origin,
                                             const Vec3& direction);

class Bvh {
 public:
  struct Node {
    Eigen::AlignedBox3d box;
    int left = -1;   // child node indices; -1 for leaves
    int right = -1;
    int first = 0;   // range into face_order() for leaves
    int count = 0;
    bool is_leaf() const { return left < 0; }
  };

  // Median split on the longest centroid axis.
  static Bvh build(const TriMesh& mesh, int leaf_size = 4);

  // Same hit as intersect_brute_force, including the tie rule.
  std::optional<MeshHit> intersect(const Vec3& origin, const Vec3& direction) const;

  const std::vector<Node>& nodes() const { return nodes_; }
  const std::vector<int>& face_order() const { return face_order_; }
  int leaf_size() const { return leaf_size_; }
  const TriMesh& mesh() const { return *mesh_; }

 private:
  int build_node(int first, int count, std::vector<Vec3>& centroids);

  const TriMesh* mesh_ = nullptr;
  std::vector<Node> nodes_;
  std::vector<int> face_order_;
  int leaf_size_ = 4;
};

}  // namespace meshmamba
