#pragma once

#include <cstdint>
#include <vector>

#include "meshmamba/gaze.hpp"
#include "meshmamba/mesh.hpp"
#include "meshmamba/saliency.hpp"
#include "meshmamba/texture_image.hpp"

namespace meshmamba {

// Axis-aligned cube centered at the origin, 12 outward-facing triangles.
TriMesh make_cube(double size = 1.0);

// Closed latitude/longitude sphere: 2 * slices * (stacks - 1) faces.
TriMesh make_uv_sphere(int stacks, int slices, double radius = 1.0);

// Subdivided icosahedron projected to the sphere: 20 * 4^level faces.
TriMesh make_icosphere(int level, double radius = 1.0);

struct GridOptions {
  int nx = 10;
  int ny = 10;
  double jitter = 0.0;     // vertex offset as a fraction of the cell size
  double amplitude = 0.0;  // height-field bump amplitude
  std::uint64_t seed = 0;
  bool uvs = true;
  std::shared_ptr<const TextureImage> texture;
};

// Height field over [0,1]^2 with 2 * nx * ny faces, facing +z. UVs follow
// the undisplaced grid position.
TriMesh make_grid(const GridOptions& options);

// Triangle strip whose faces form a path: face i touches only i-1 and i+1.
TriMesh make_strip(int faces);

// Smooth colored pattern with a few blobs; deterministic in the seed.
TextureImage procedural_texture(int width, int height, std::uint64_t seed);
TextureImage constant_texture(int width, int height, double value);

// exp(-|c_f - center|^2 / (2 r^2)) per face center.
SaliencyMap blob_saliency(const TriMesh& mesh, const Vec3& center, double radius);

// Desk-scale training target: half a Gaussian blob, half face
// irregularity, max-normalized.
SaliencyMap shape_blob_saliency(const TriMesh& mesh, const Vec3& blob_center, double blob_radius);

struct SyntheticFixation {
  Vec3 origin;
  Vec3 target;  // model-frame point the gaze rests on
};

// Samples at `rate_hz`: each fixation holds steady for `dwell_s`, separated
// by fast saccades. Rays are rotated into the world frame by `yaw_deg`
// about +Y, as a viewer turning the model would record them.
GazeSession synthetic_session(const std::vector<SyntheticFixation>& fixations, double dwell_s = 0.3,
                              double rate_hz = 120.0, double yaw_deg = 0.0);

// `count` fixations on uniformly drawn faces, each viewed from `distance`
// along the face normal.
GazeSession random_session(const TriMesh& mesh, int count, double distance, std::uint64_t seed, double yaw_deg = 0.0);

}  // namespace meshmamba
