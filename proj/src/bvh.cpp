#include "meshmamba/bvh.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>

#include "meshmamba/error.hpp"

namespace meshmamba {

namespace {

std::atomic<std::size_t> g_degenerate{0};

bool better(double t, int face, const std::optional<MeshHit>& best) {
  return !best || t < best->t || (t == best->t && face < best->face);
}

// Slab test; returns entry distance or nullopt. Zero direction components
// fall back to an origin-in-slab check so no NaN reaches the comparison.
std::optional<double> box_entry(const Eigen::AlignedBox3d& box, const Vec3& origin, const Vec3& dir,
                                double t_max) {
  double t0 = 0.0;
  double t1 = t_max;
  for (int a = 0; a < 3; ++a) {
    // Relative pad keeps hits on box faces from slipping through rounding.
    const double pad = 1e-9 * (std::abs(box.min()[a]) + std::abs(box.max()[a]) + 1.0);
    const double lo = box.min()[a] - pad;
    const double hi = box.max()[a] + pad;
    if (dir[a] == 0.0) {
      if (origin[a] < lo || origin[a] > hi) return std::nullopt;
      continue;
    }
    const double inv = 1.0 / dir[a];
    double near = (lo - origin[a]) * inv;
    double far = (hi - origin[a]) * inv;
    if (near > far) std::swap(near, far);
    t0 = std::max(t0, near);
    t1 = std::min(t1, far);
    if (t0 > t1) return std::nullopt;
  }
  return t0;
}

}  // namespace

std::size_t degenerate_triangle_count() { return g_degenerate.load(); }
void reset_degenerate_triangle_count() { g_degenerate.store(0); }

std::optional<TriangleHit> intersect_ray_triangle(const Vec3& origin, const Vec3& direction,
                                                  const Vec3& v0, const Vec3& v1, const Vec3& v2) {
  const Vec3 e1 = v1 - v0;
  const Vec3 e2 = v2 - v0;
  const double area2 = e1.cross(e2).norm();
  if (!(area2 > 0.0)) {
    g_degenerate.fetch_add(1, std::memory_order_relaxed);
    return std::nullopt;
  }
  const Vec3 p = direction.cross(e2);
  const double det = e1.dot(p);
  // Parallel when |det| is negligible relative to the triangle's area.
  if (std::abs(det) <= 1e-12 * area2) return std::nullopt;
  const double inv_det = 1.0 / det;
  const Vec3 s = origin - v0;
  const double u = s.dot(p) * inv_det;
  if (u < 0.0 || u > 1.0) return std::nullopt;
  const Vec3 q = s.cross(e1);
  const double v = direction.dot(q) * inv_det;
  if (v < 0.0 || u + v > 1.0) return std::nullopt;
  const double t = e2.dot(q) * inv_det;
  if (!(t > kRayEpsilon)) return std::nullopt;
  return TriangleHit{t, u, v};
}

std::optional<MeshHit> intersect_brute_force(const TriMesh& mesh, const Vec3& origin,
                                             const Vec3& direction) {
  std::optional<MeshHit> best;
  for (std::size_t f = 0; f < mesh.face_count(); ++f) {
    const int fi = static_cast<int>(f);
    auto hit = intersect_ray_triangle(origin, direction, mesh.vertex(fi, 0), mesh.vertex(fi, 1),
                                      mesh.vertex(fi, 2));
    if (hit && better(hit->t, fi, best)) {
      best = MeshHit{fi, hit->t, hit->u, hit->v, origin + hit->t * direction};
    }
  }
  return best;
}

Bvh Bvh::build(const TriMesh& mesh, int leaf_size) {
  if (mesh.face_count() == 0) throw Error(ErrorKind::Config, "cannot build a BVH over an empty mesh");
  if (leaf_size < 1) throw Error(ErrorKind::Config, "leaf size must be positive");
  Bvh bvh;
  bvh.mesh_ = &mesh;
  bvh.leaf_size_ = leaf_size;
  const int n = static_cast<int>(mesh.face_count());
  bvh.face_order_.resize(n);
  std::vector<Vec3> centroids(n);
  for (int f = 0; f < n; ++f) {
    bvh.face_order_[f] = f;
    centroids[f] = (mesh.vertex(f, 0) + mesh.vertex(f, 1) + mesh.vertex(f, 2)) / 3.0;
  }
  bvh.nodes_.reserve(2 * (n / leaf_size + 1));
  bvh.build_node(0, n, centroids);
  return bvh;
}

int Bvh::build_node(int first, int count, std::vector<Vec3>& centroids) {
  const int index = static_cast<int>(nodes_.size());
  nodes_.emplace_back();
  Eigen::AlignedBox3d box;
  Eigen::AlignedBox3d centroid_box;
  for (int i = first; i < first + count; ++i) {
    const int f = face_order_[i];
    for (int c = 0; c < 3; ++c) box.extend(mesh_->vertex(f, c));
    centroid_box.extend(centroids[f]);
  }
  nodes_[index].box = box;
  if (count <= leaf_size_) {
    nodes_[index].first = first;
    nodes_[index].count = count;
    return index;
  }
  int axis = 0;
  centroid_box.sizes().maxCoeff(&axis);
  const int mid = first + count / 2;
  std::nth_element(face_order_.begin() + first, face_order_.begin() + mid,
                   face_order_.begin() + first + count, [&](int a, int b) {
                     if (centroids[a][axis] != centroids[b][axis]) {
                       return centroids[a][axis] < centroids[b][axis];
                     }
                     return a < b;
                   });
  const int left = build_node(first, mid - first, centroids);
  const int right = build_node(mid, first + count - mid, centroids);
  nodes_[index].left = left;
  nodes_[index].right = right;
  return index;
}

std::optional<MeshHit> Bvh::intersect(const Vec3& origin, const Vec3& direction) const {
  std::optional<MeshHit> best;
  if (nodes_.empty()) return best;
  int stack[128];
  int top = 0;
  stack[top++] = 0;
  while (top > 0) {
    const Node& node = nodes_[stack[--top]];
    const double limit = best ? best->t : std::numeric_limits<double>::infinity();
    if (!box_entry(node.box, origin, direction, limit)) continue;
    if (node.is_leaf()) {
      for (int i = node.first; i < node.first + node.count; ++i) {
        const int f = face_order_[i];
        auto hit = intersect_ray_triangle(origin, direction, mesh_->vertex(f, 0), mesh_->vertex(f, 1),
                                          mesh_->vertex(f, 2));
        if (hit && better(hit->t, f, best)) {
          best = MeshHit{f, hit->t, hit->u, hit->v, origin + hit->t * direction};
        }
      }
      continue;
    }
    // Push the farther child first so the nearer one is visited next.
    const auto tl = box_entry(nodes_[node.left].box, origin, direction, limit);
    const auto tr = box_entry(nodes_[node.right].box, origin, direction, limit);
    if (tl && tr) {
      if (*tl <= *tr) {
        stack[top++] = node.right;
        stack[top++] = node.left;
      } else {
        stack[top++] = node.left;
        stack[top++] = node.right;
      }
    } else if (tl) {
      stack[top++] = node.left;
    } else if (tr) {
      stack[top++] = node.right;
    }
  }
  return best;
}

}  // namespace meshmamba
