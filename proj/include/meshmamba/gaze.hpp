#pragma once

#include <filesystem>
#include <optional>
#include <vector>

#include "meshmamba/bvh.hpp"
#include "meshmamba/mesh.hpp"
#include "meshmamba/saliency.hpp"

namespace meshmamba {

struct GazeSample {
  double time = 0.0;  // seconds
  Vec3 origin = Vec3::Zero();
  Vec3 gaze = Vec3::UnitZ();
  Vec3 head = Vec3::UnitZ();
  double model_yaw_deg = 0.0;  // model rotation about +Y at this sample
};

using GazeSession = std::vector<GazeSample>;

// CSV with header t,ox,oy,oz,gx,gy,gz,hx,hy,hz,yaw_deg. Directions are
// renormalized; timestamps must be strictly increasing.
GazeSession read_gaze_csv(const std::filesystem::path& path);
void write_gaze_csv(const GazeSession& session, const std::filesystem::path& path);

// Rotates rays by -yaw about +Y so they are expressed in the model frame.
GazeSession to_model_frame(const GazeSession& session);

struct Fixation {
  double start = 0.0;
  double end = 0.0;
  Vec3 mean_origin = Vec3::Zero();
  Vec3 mean_direction = Vec3::UnitZ();
  std::optional<int> hit_face;
  std::optional<Vec3> hit_point;

  double duration() const { return end - start; }
};

struct IvtParams {
  double velocity_threshold_deg_s = 30.0;
  double min_duration_s = 0.1;
};

// I-VT: sample i>0 moves at angle(d[i-1], d[i]) / (t[i] - t[i-1]); sample 0
// inherits sample 1's velocity. Maximal runs below threshold lasting at least
// min_duration become fixations.
std::vector<Fixation> classify_fixations(const GazeSession& samples, const IvtParams& params = {});

// Fills hit_face/hit_point by casting the mean ray.
void resolve_hits(const Bvh& bvh, std::vector<Fixation>& fixations);

struct ConeParams {
  double aperture_deg = 1.0;  // cone half-angle
  double sigma_deg = 0.5;
  int ray_count = 64;
};

struct FaceWeight {
  int face;
  double weight;
};

// Casts ray_count rays in the cone (ray 0 on the axis, the rest on a
// sunflower pattern) and adds exp(-theta^2 / 2 sigma^2) to each hit face.
// Increments are sorted by face; empty when the fixation has no hit.
std::vector<FaceWeight> splat_fixation_cone(const Bvh& bvh, const Fixation& fixation,
                                            const ConeParams& params = {});

// Dense convenience wrapper over splat_fixation_cone.
std::vector<double> splat_dense(const Bvh& bvh, const Fixation& fixation, const ConeParams& params = {});

struct GroundTruthParams {
  IvtParams ivt;
  ConeParams cone;
  int bvh_leaf_size = 4;
};

struct GroundTruth {
  SaliencyMap normalized;
  SaliencyMap raw;
  std::size_t fixations = 0;
  std::size_t fixations_hit = 0;
};

// Splats every fixation of every session (after de-rotation) and normalizes.
// Fixations are accumulated in a canonical order, so session order does not
// change a single bit of the result. Throws ErrorKind::NoFixations when
// nothing lands on the mesh.
GroundTruth build_saliency_map(const TriMesh& mesh, const std::vector<GazeSession>& sessions,
                               const GroundTruthParams& params = {});

// Unit vector rotated from `axis` by theta around azimuth phi, using a
// deterministic orthonormal frame.
Vec3 cone_direction(const Vec3& axis, double theta_rad, double phi_rad);

}  // namespace meshmamba
