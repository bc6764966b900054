#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "meshmamba/mesh.hpp"

namespace meshmamba {

struct ShapeFeature {
  std::array<double, 3> angles_deg{};  // (c0,c1), (c1,c2), (c2,c0) corner-vector angles
  std::array<double, 3> lengths{};     // |c0|, |c1|, |c2|
  double area = 0.0;
  double irregularity = 0.0;  // longest edge / (2 * inradius)
};

struct GeoFeature {
  Vec3 spatial = Vec3::Zero();        // center in the unit bounding box
  Vec3 center = Vec3::Zero();         // raw center, kept for sampling and propagation
  std::array<double, 3> curve{};      // normal cosines with adjacent faces, padded with 1
  ShapeFeature shape;
};

// Flattened layout used by feature dumps:
// spatial(3) curve(3) angles_deg(3) lengths(3) area irregularity.
inline constexpr int kGeoFeatureDim = 14;

Vec3 spatial_feature(const TriMesh& mesh, int face);
std::array<double, 3> curve_feature(const TriMesh& mesh, int face);
ShapeFeature shape_feature(const TriMesh& mesh, int face);

std::vector<GeoFeature> geometry_features(const TriMesh& mesh);

std::array<double, kGeoFeatureDim> flatten(const GeoFeature& feature);

struct FeatureMatrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;                                // row-major
  std::vector<std::pair<std::string, int>> layout;         // block name, width
};

// One JSON header line, then rows*cols little-endian float64 values.
void write_feature_matrix(const FeatureMatrix& matrix, const std::filesystem::path& path);
FeatureMatrix read_feature_matrix(const std::filesystem::path& path);

}  // namespace meshmamba
