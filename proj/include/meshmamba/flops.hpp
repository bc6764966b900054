#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "meshmamba/model.hpp"

namespace meshmamba {

struct FlopPoint {
  int patches = 0;  // L
  int length = 0;   // M
  std::uint64_t flops = 0;
};

// Forward-pass FLOPs of a freshly initialized model for every (L, M) pair,
// L-major. Only the learned forward pass is counted, not the per-mesh
// precomputation.
std::vector<FlopPoint> measure_flops(std::shared_ptr<const TriMesh> mesh, const ModelConfig& base,
                                     const std::vector<int>& patches, const std::vector<int>& lengths);

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;  // 1 when y is constant and fitted exactly
};

// Ordinary least squares y = slope * x + intercept.
LinearFit fit_line(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace meshmamba
