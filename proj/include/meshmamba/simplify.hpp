#pragma once

#include <vector>

#include <Eigen/Core>

#include "meshmamba/mesh.hpp"
#include "meshmamba/saliency.hpp"

namespace meshmamba {

using Quadric = Eigen::Matrix4d;

// Fundamental quadric of the plane n.x + d = 0 (n unit).
Quadric plane_quadric(const Vec3& normal, double d);
double quadric_error(const Quadric& q, const Vec3& p);

// Sum of incident face-plane quadrics per vertex.
std::vector<Quadric> vertex_quadrics(const TriMesh& mesh);

// Mean saliency of the faces incident to each vertex.
std::vector<double> vertex_saliency(const TriMesh& mesh, const SaliencyMap& saliency);

// qem * (1 + lambda * s). Throws ErrorKind::Config for lambda < 0.
double saliency_weighted_cost(double qem, double edge_saliency, double lambda);

struct EdgeCost {
  Vec3 position = Vec3::Zero();  // minimizer of the summed quadric, or best of midpoint / endpoints
  double qem = 0.0;
  double cost = 0.0;
};

// Collapse cost of edge (a, b): optimal placement for qa + qb, weighted by
// the mean of the endpoint saliencies.
EdgeCost edge_cost(const Quadric& qa, const Quadric& qb, const Vec3& pa, const Vec3& pb, double sa, double sb,
                   double lambda);

struct SimplifyOptions {
  int target_faces = 0;
  double lambda = 5.0;
  double fold_threshold_deg = 90.0;  // reject collapses turning a face normal further than this
};

struct CollapseRecord {
  int kept = 0;
  int removed = 0;
  Vec3 position = Vec3::Zero();
  double cost = 0.0;
  int faces_after = 0;
};

struct SimplifyResult {
  TriMesh mesh;
  std::vector<int> face_origin;  // output face -> input face it descends from
  std::vector<CollapseRecord> collapses;
  bool locked = false;  // ran out of valid collapses before the target
};

// Greedy edge collapse in (cost, lower vertex, higher vertex) order. A
// collapse must satisfy the link condition and must not fold any surviving
// face past the threshold. The merged vertex takes the larger endpoint
// saliency. Corner UVs follow their face; a moved corner switches to the
// other endpoint's UV when the new position is nearer to it and that UV is
// known in the same chart.
SimplifyResult simplify_to(const TriMesh& mesh, const SaliencyMap& saliency, const SimplifyOptions& options);

}  // namespace meshmamba
