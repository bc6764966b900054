#include "meshmamba/simplify.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <queue>
#include <tuple>

#include <Eigen/LU>

#include "meshmamba/error.hpp"

namespace meshmamba {

Quadric plane_quadric(const Vec3& normal, double d) {
  const Eigen::Vector4d p(normal.x(), normal.y(), normal.z(), d);
  return p * p.transpose();
}

double quadric_error(const Quadric& q, const Vec3& p) {
  const Eigen::Vector4d h(p.x(), p.y(), p.z(), 1.0);
  return h.dot(q * h);
}

std::vector<Quadric> vertex_quadrics(const TriMesh& mesh) {
  std::vector<Quadric> q(mesh.vertex_count(), Quadric::Zero());
  for (std::size_t f = 0; f < mesh.faces().size(); ++f) {
    const Face& face = mesh.faces()[f];
    const Vec3& p0 = mesh.vertices()[face[0]];
    const Vec3 n = (mesh.vertices()[face[1]] - p0).cross(mesh.vertices()[face[2]] - p0).normalized();
    const Quadric k = plane_quadric(n, -n.dot(p0));
    for (int v : face) q[v] += k;
  }
  return q;
}

std::vector<double> vertex_saliency(const TriMesh& mesh, const SaliencyMap& saliency) {
  if (saliency.face_count() != mesh.faces().size()) {
    throw Error(ErrorKind::LengthMismatch, "saliency has " + std::to_string(saliency.face_count()) +
                                               " values for " + std::to_string(mesh.faces().size()) + " faces");
  }
  std::vector<double> sum(mesh.vertex_count(), 0.0);
  std::vector<int> count(mesh.vertex_count(), 0);
  for (std::size_t f = 0; f < mesh.faces().size(); ++f) {
    for (int v : mesh.faces()[f]) {
      sum[v] += saliency.values[f];
      ++count[v];
    }
  }
  for (std::size_t v = 0; v < sum.size(); ++v) {
    if (count[v] > 0) sum[v] /= count[v];
  }
  return sum;
}

double saliency_weighted_cost(double qem, double edge_saliency, double lambda) {
  if (lambda < 0.0) throw Error(ErrorKind::Config, "saliency weight lambda must be nonnegative");
  return qem * (1.0 + lambda * edge_saliency);
}

EdgeCost edge_cost(const Quadric& qa, const Quadric& qb, const Vec3& pa, const Vec3& pb, double sa, double sb,
                   double lambda) {
  const Quadric q = qa + qb;
  EdgeCost best;
  const Eigen::Matrix3d a = q.topLeftCorner<3, 3>();
  Eigen::FullPivLU<Eigen::Matrix3d> lu(a);
  lu.setThreshold(1e-10);
  bool solved = false;
  if (lu.isInvertible()) {
    const Vec3 x = lu.solve(-q.topRightCorner<3, 1>());
    // Keep the optimum near the edge; far solutions come from near-singular systems.
    const double reach = 2.0 * (pb - pa).norm() + 1e-12;
    if (x.allFinite() && (x - 0.5 * (pa + pb)).norm() <= reach) {
      best.position = x;
      best.qem = quadric_error(q, x);
      solved = true;
    }
  }
  if (!solved) {
    const Vec3 candidates[3] = {0.5 * (pa + pb), pa, pb};
    best.qem = std::numeric_limits<double>::infinity();
    for (const Vec3& c : candidates) {
      const double e = quadric_error(q, c);
      if (e < best.qem) {
        best.qem = e;
        best.position = c;
      }
    }
  }
  best.qem = std::max(best.qem, 0.0);
  best.cost = saliency_weighted_cost(best.qem, 0.5 * (sa + sb), lambda);
  return best;
}

namespace {

struct Candidate {
  double cost;
  int a;
  int b;
  unsigned va;
  unsigned vb;
  bool operator>(const Candidate& o) const { return std::tie(cost, a, b) > std::tie(o.cost, o.a, o.b); }
};

class Collapser {
 public:
  Collapser(const TriMesh& mesh, const SaliencyMap& saliency, const SimplifyOptions& options)
      : options_(options),
        pos_(mesh.vertices()),
        faces_(mesh.faces()),
        uvs_(mesh.uvs()),
        alive_(mesh.faces().size(), 1),
        origin_(mesh.faces().size()),
        vfaces_(mesh.vertex_count()),
        quadric_(vertex_quadrics(mesh)),
        sal_(vertex_saliency(mesh, saliency)),
        version_(mesh.vertex_count(), 0),
        alive_faces_(static_cast<int>(mesh.faces().size())) {
    for (std::size_t f = 0; f < faces_.size(); ++f) {
      origin_[f] = static_cast<int>(f);
      for (int v : faces_[f]) vfaces_[v].push_back(static_cast<int>(f));
    }
    const auto [lo, hi] = mesh.bounds();
    const double diag = (hi - lo).norm();
    min_area2_ = std::pow(1e-10 * diag * diag, 2);
    cos_fold_ = std::cos(options.fold_threshold_deg * std::numbers::pi / 180.0);
    for (int v = 0; v < static_cast<int>(pos_.size()); ++v) {
      for (int w : neighbors(v)) {
        if (v < w) push(v, w);
      }
    }
  }

  void run(SimplifyResult& result) {
    while (alive_faces_ > options_.target_faces) {
      if (queue_.empty()) {
        result.locked = true;
        warn("simplification stopped at " + std::to_string(alive_faces_) + " faces: no valid collapse left");
        break;
      }
      const Candidate c = queue_.top();
      queue_.pop();
      if (c.va != version_[c.a] || c.vb != version_[c.b]) continue;
      const EdgeCost ec = cost(c.a, c.b);
      if (!can_collapse(c.a, c.b, ec.position)) continue;
      collapse(c.a, c.b, ec.position);
      result.collapses.push_back({c.a, c.b, ec.position, ec.cost, alive_faces_});
    }
  }

  void finish(const TriMesh& input, SimplifyResult& result) const {
    std::vector<int> remap(pos_.size(), -1);
    MeshData data;
    data.texture = input.texture();
    for (std::size_t f = 0; f < faces_.size(); ++f) {
      if (!alive_[f]) continue;
      Face nf;
      for (int k = 0; k < 3; ++k) {
        int& r = remap[faces_[f][k]];
        if (r < 0) {
          r = static_cast<int>(data.vertices.size());
          data.vertices.push_back(pos_[faces_[f][k]]);
          if (input.has_colors()) data.vertex_colors.push_back(input.vertex_colors()[faces_[f][k]]);
        }
        nf[k] = r;
      }
      data.faces.push_back(nf);
      if (!uvs_.empty()) data.uvs.push_back(uvs_[f]);
      result.face_origin.push_back(origin_[f]);
    }
    LoadReport report;
    result.mesh = make_mesh(std::move(data), &report);
    if (report.dropped_degenerate > 0) {
      throw Error(ErrorKind::DegenerateGeometry, "simplification produced degenerate faces");
    }
  }

 private:
  std::vector<int> neighbors(int v) const {
    std::vector<int> out;
    for (int f : vfaces_[v]) {
      if (!alive_[f]) continue;
      for (int w : faces_[f]) {
        if (w != v) out.push_back(w);
      }
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }

  EdgeCost cost(int a, int b) const {
    return edge_cost(quadric_[a], quadric_[b], pos_[a], pos_[b], sal_[a], sal_[b], options_.lambda);
  }

  void push(int a, int b) {
    if (a > b) std::swap(a, b);
    queue_.push({cost(a, b).cost, a, b, version_[a], version_[b]});
  }

  bool has_vertex(int f, int v) const {
    const Face& face = faces_[f];
    return face[0] == v || face[1] == v || face[2] == v;
  }

  bool can_collapse(int a, int b, const Vec3& p) const {
    const std::vector<int> na = neighbors(a), nb = neighbors(b);
    std::vector<int> common;
    std::set_intersection(na.begin(), na.end(), nb.begin(), nb.end(), std::back_inserter(common));
    int shared = 0;
    for (int f : vfaces_[a]) {
      if (alive_[f] && has_vertex(f, b)) ++shared;
    }
    if (shared == 0 || static_cast<int>(common.size()) != shared) return false;
    // A collapse that leaves fewer than 4 vertices in a closed piece would
    // degenerate it.
    if (na.size() + nb.size() - common.size() <= 4) return false;

    for (int v : {a, b}) {
      for (int f : vfaces_[v]) {
        if (!alive_[f] || (has_vertex(f, a) && has_vertex(f, b))) continue;
        std::array<Vec3, 3> before, after;
        for (int k = 0; k < 3; ++k) {
          const int w = faces_[f][k];
          before[k] = pos_[w];
          after[k] = (w == a || w == b) ? p : pos_[w];
        }
        const Vec3 n0 = (before[1] - before[0]).cross(before[2] - before[0]);
        const Vec3 n1 = (after[1] - after[0]).cross(after[2] - after[0]);
        if (n1.squaredNorm() <= min_area2_) return false;
        if (n0.dot(n1) <= cos_fold_ * n0.norm() * n1.norm()) return false;
      }
    }
    return true;
  }

  void collapse(int a, int b, const Vec3& p) {
    const bool nearer_b = (p - pos_[b]).squaredNorm() < (p - pos_[a]).squaredNorm();
    // UV pairs (a's UV, b's UV) from the faces being removed share a chart.
    std::vector<std::pair<Vec2, Vec2>> chart;
    for (int f : vfaces_[a]) {
      if (!alive_[f] || !has_vertex(f, b)) continue;
      if (!uvs_.empty()) {
        Vec2 ua = Vec2::Zero(), ub = Vec2::Zero();
        for (int k = 0; k < 3; ++k) {
          if (faces_[f][k] == a) ua = uvs_[f][k];
          if (faces_[f][k] == b) ub = uvs_[f][k];
        }
        chart.push_back({ua, ub});
      }
      alive_[f] = 0;
      --alive_faces_;
    }
    auto carry = [&](int f, int k, bool from_a) {
      if (uvs_.empty() || from_a != nearer_b) return;
      Vec2& uv = uvs_[f][k];
      for (const auto& [ua, ub] : chart) {
        if (from_a && uv == ua) {
          uv = ub;
          return;
        }
        if (!from_a && uv == ub) {
          uv = ua;
          return;
        }
      }
    };
    for (int f : vfaces_[a]) {
      if (!alive_[f]) continue;
      for (int k = 0; k < 3; ++k) {
        if (faces_[f][k] == a) carry(f, k, true);
      }
    }
    for (int f : vfaces_[b]) {
      if (!alive_[f]) continue;
      for (int k = 0; k < 3; ++k) {
        if (faces_[f][k] == b) {
          faces_[f][k] = a;
          carry(f, k, false);
        }
      }
      vfaces_[a].push_back(f);
    }
    vfaces_[b].clear();
    std::erase_if(vfaces_[a], [&](int f) { return !alive_[f]; });
    std::sort(vfaces_[a].begin(), vfaces_[a].end());
    vfaces_[a].erase(std::unique(vfaces_[a].begin(), vfaces_[a].end()), vfaces_[a].end());

    pos_[a] = p;
    quadric_[a] += quadric_[b];
    sal_[a] = std::max(sal_[a], sal_[b]);
    ++version_[a];
    ++version_[b];
    for (int w : neighbors(a)) {
      ++version_[w];
    }
    // Every edge touching a or a neighbor may have changed validity or cost.
    std::vector<int> ring = neighbors(a);
    ring.push_back(a);
    for (int v : ring) {
      for (int w : neighbors(v)) push(v, w);
    }
  }

  SimplifyOptions options_;
  std::vector<Vec3> pos_;
  std::vector<Face> faces_;
  std::vector<FaceUv> uvs_;
  std::vector<char> alive_;
  std::vector<int> origin_;
  std::vector<std::vector<int>> vfaces_;
  std::vector<Quadric> quadric_;
  std::vector<double> sal_;
  std::vector<unsigned> version_;
  int alive_faces_;
  double min_area2_ = 0.0;
  double cos_fold_ = 0.0;
  std::priority_queue<Candidate, std::vector<Candidate>, std::greater<Candidate>> queue_;
};

}  // namespace

SimplifyResult simplify_to(const TriMesh& mesh, const SaliencyMap& saliency, const SimplifyOptions& options) {
  if (options.lambda < 0.0) throw Error(ErrorKind::Config, "saliency weight lambda must be nonnegative");
  if (options.target_faces < 0) throw Error(ErrorKind::Config, "target face count must be nonnegative");
  if (options.target_faces > static_cast<int>(mesh.faces().size())) {
    throw Error(ErrorKind::Config, "target face count exceeds the mesh's " + std::to_string(mesh.faces().size()));
  }
  SimplifyResult result;
  Collapser collapser(mesh, saliency, options);
  collapser.run(result);
  collapser.finish(mesh, result);
  return result;
}

}  // namespace meshmamba
