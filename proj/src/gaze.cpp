#include "meshmamba/gaze.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>

#include <Eigen/Geometry>

#include "meshmamba/error.hpp"
#include "meshmamba/parallel.hpp"

namespace meshmamba {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

double angle_between(const Vec3& a, const Vec3& b) {
  // atan2 form stays accurate for tiny angles.
  return std::atan2(a.cross(b).norm(), a.dot(b));
}

Vec3 checked_unit(const Vec3& v, const std::string& what) {
  const double n = v.norm();
  if (!(n > 0.0) || !std::isfinite(n)) throw Error(ErrorKind::Format, what + " has zero length");
  return v / n;
}

}  // namespace

GazeSession read_gaze_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorKind::Format, path.string() + ": empty gaze log");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "t,ox,oy,oz,gx,gy,gz,hx,hy,hz,yaw_deg") {
    throw Error(ErrorKind::Format, path.string() + ":1: unexpected header '" + line + "'");
  }
  GazeSession session;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::array<double, 11> f{};
    std::istringstream ss(line);
    std::string cell;
    int k = 0;
    try {
      while (std::getline(ss, cell, ',')) {
        if (k >= 11) throw std::invalid_argument("too many columns");
        f[k++] = std::stod(cell);
      }
    } catch (const std::exception&) {
      throw Error(ErrorKind::Format, path.string() + ":" + std::to_string(line_no) + ": bad number");
    }
    if (k != 11) {
      throw Error(ErrorKind::Format, path.string() + ":" + std::to_string(line_no) + ": expected 11 columns");
    }
    GazeSample s;
    s.time = f[0];
    s.origin = Vec3(f[1], f[2], f[3]);
    const std::string where = path.string() + ":" + std::to_string(line_no);
    s.gaze = checked_unit(Vec3(f[4], f[5], f[6]), where + ": gaze direction");
    s.head = checked_unit(Vec3(f[7], f[8], f[9]), where + ": head direction");
    s.model_yaw_deg = f[10];
    if (!session.empty() && !(s.time > session.back().time)) {
      throw Error(ErrorKind::Format, where + ": timestamps must be strictly increasing");
    }
    session.push_back(s);
  }
  return session;
}

void write_gaze_csv(const GazeSession& session, const std::filesystem::path& path) {
  std::FILE* out = std::fopen(path.string().c_str(), "w");
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  std::fprintf(out, "t,ox,oy,oz,gx,gy,gz,hx,hy,hz,yaw_deg\n");
  for (const GazeSample& s : session) {
    std::fprintf(out, "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", s.time,
                 s.origin.x(), s.origin.y(), s.origin.z(), s.gaze.x(), s.gaze.y(), s.gaze.z(),
                 s.head.x(), s.head.y(), s.head.z(), s.model_yaw_deg);
  }
  std::fclose(out);
}

GazeSession to_model_frame(const GazeSession& session) {
  GazeSession out = session;
  for (GazeSample& s : out) {
    if (s.model_yaw_deg == 0.0) continue;
    const Eigen::AngleAxisd undo(-s.model_yaw_deg * kDeg, Vec3::UnitY());
    s.origin = undo * s.origin;
    s.gaze = (undo * s.gaze).normalized();
    s.head = (undo * s.head).normalized();
    s.model_yaw_deg = 0.0;
  }
  return out;
}

std::vector<Fixation> classify_fixations(const GazeSession& samples, const IvtParams& params) {
  std::vector<Fixation> fixations;
  const std::size_t n = samples.size();
  if (n < 2) return fixations;

  std::vector<double> velocity(n);
  for (std::size_t i = 1; i < n; ++i) {
    const double dt = samples[i].time - samples[i - 1].time;
    velocity[i] = angle_between(samples[i - 1].gaze, samples[i].gaze) / kDeg / dt;
  }
  velocity[0] = velocity[1];

  std::size_t i = 0;
  while (i < n) {
    if (!(velocity[i] < params.velocity_threshold_deg_s)) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j + 1 < n && velocity[j + 1] < params.velocity_threshold_deg_s) ++j;
    const double duration = samples[j].time - samples[i].time;
    if (duration >= params.min_duration_s) {
      Fixation fx;
      fx.start = samples[i].time;
      fx.end = samples[j].time;
      Vec3 origin = Vec3::Zero();
      Vec3 dir = Vec3::Zero();
      for (std::size_t k = i; k <= j; ++k) {
        origin += samples[k].origin;
        dir += samples[k].gaze;
      }
      fx.mean_origin = origin / static_cast<double>(j - i + 1);
      fx.mean_direction = dir.normalized();
      fixations.push_back(fx);
    }
    i = j + 1;
  }
  return fixations;
}

void resolve_hits(const Bvh& bvh, std::vector<Fixation>& fixations) {
  for (Fixation& fx : fixations) {
    const auto hit = bvh.intersect(fx.mean_origin, fx.mean_direction);
    if (hit) {
      fx.hit_face = hit->face;
      fx.hit_point = hit->point;
    } else {
      fx.hit_face.reset();
      fx.hit_point.reset();
    }
  }
}

Vec3 cone_direction(const Vec3& axis, double theta_rad, double phi_rad) {
  const Vec3 a = axis.normalized();
  // Helper axis least aligned with a.
  Eigen::Index axis_index = 0;
  a.cwiseAbs().minCoeff(&axis_index);
  const Vec3 helper = Vec3::Unit(axis_index);
  const Vec3 u = a.cross(helper).normalized();
  const Vec3 w = a.cross(u);
  const Vec3 d = std::cos(theta_rad) * a +
                 std::sin(theta_rad) * (std::cos(phi_rad) * u + std::sin(phi_rad) * w);
  return d.normalized();
}

std::vector<FaceWeight> splat_fixation_cone(const Bvh& bvh, const Fixation& fixation,
                                            const ConeParams& params) {
  if (!(params.aperture_deg > 0.0)) throw Error(ErrorKind::Config, "cone aperture must be positive");
  if (!(params.sigma_deg > 0.0)) throw Error(ErrorKind::Config, "cone sigma must be positive");
  if (params.ray_count < 1) throw Error(ErrorKind::Config, "ray count must be at least 1");
  std::vector<FaceWeight> out;
  if (!fixation.hit_face) return out;

  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  const double aperture = params.aperture_deg * kDeg;
  const double sigma = params.sigma_deg * kDeg;
  const int rings = params.ray_count - 1;
  for (int k = 0; k < params.ray_count; ++k) {
    double theta = 0.0;
    double phi = 0.0;
    if (k > 0) {
      theta = aperture * std::sqrt((k - 0.5) / rings);
      phi = k * golden;
    }
    const double weight = std::exp(-theta * theta / (2.0 * sigma * sigma));
    const Vec3 dir = cone_direction(fixation.mean_direction, theta, phi);
    const auto hit = bvh.intersect(fixation.mean_origin, dir);
    if (!hit || weight == 0.0) continue;
    out.push_back({hit->face, weight});
  }
  // Merge per face in ray order; stable sort keeps the summation order fixed.
  std::stable_sort(out.begin(), out.end(), [](const FaceWeight& a, const FaceWeight& b) { return a.face < b.face; });
  std::vector<FaceWeight> merged;
  for (const FaceWeight& fw : out) {
    if (!merged.empty() && merged.back().face == fw.face) {
      merged.back().weight += fw.weight;
    } else {
      merged.push_back(fw);
    }
  }
  return merged;
}

std::vector<double> splat_dense(const Bvh& bvh, const Fixation& fixation, const ConeParams& params) {
  std::vector<double> dense(bvh.mesh().face_count(), 0.0);
  for (const FaceWeight& fw : splat_fixation_cone(bvh, fixation, params)) dense[fw.face] += fw.weight;
  return dense;
}

GroundTruth build_saliency_map(const TriMesh& mesh, const std::vector<GazeSession>& sessions,
                               const GroundTruthParams& params) {
  if (sessions.empty()) throw Error(ErrorKind::Config, "at least one gaze session is required");
  const Bvh bvh = Bvh::build(mesh, params.bvh_leaf_size);

  std::vector<Fixation> all;
  for (const GazeSession& session : sessions) {
    auto fixations = classify_fixations(to_model_frame(session), params.ivt);
    all.insert(all.end(), fixations.begin(), fixations.end());
  }
  // Canonical order: equal keys imply identical fixations and contributions.
  auto key = [](const Fixation& f) {
    return std::array<double, 8>{f.start,           f.end,
                                 f.mean_origin.x(), f.mean_origin.y(),
                                 f.mean_origin.z(), f.mean_direction.x(),
                                 f.mean_direction.y(), f.mean_direction.z()};
  };
  std::sort(all.begin(), all.end(), [&](const Fixation& a, const Fixation& b) { return key(a) < key(b); });
  resolve_hits(bvh, all);

  std::vector<std::vector<FaceWeight>> splats(all.size());
  parallel_for(all.size(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) splats[i] = splat_fixation_cone(bvh, all[i], params.cone);
  });

  GroundTruth gt;
  gt.raw.values.assign(mesh.face_count(), 0.0);
  gt.fixations = all.size();
  for (std::size_t i = 0; i < all.size(); ++i) {
    if (all[i].hit_face) ++gt.fixations_hit;
    for (const FaceWeight& fw : splats[i]) gt.raw.values[fw.face] += fw.weight;
  }
  if (!(gt.raw.total() > 0.0)) throw Error(ErrorKind::NoFixations, "no fixations hit the mesh");
  gt.normalized = gt.raw.normalized();
  return gt;
}

}  // namespace meshmamba
