#pragma once

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "meshmamba/geometry_features.hpp"
#include "meshmamba/mesh.hpp"
#include "meshmamba/nn/parameters.hpp"
#include "meshmamba/rng.hpp"

namespace meshmamba {

enum class InputMode { Geometry, Color, Texture };

struct FeatureToggles {
  bool spatial = true;
  bool curve = true;
  bool shape = true;
};

using Layout = std::vector<std::pair<std::string, int>>;

struct FusedInputs {
  nn::Matrix values;  // faces x dim
  Layout layout;
};

// Width of the geometric block for the given toggles (14 with all on).
int geometric_dim(const FeatureToggles& toggles);

// Model-facing geometric block. Per face, in order:
//   spatial(3)  bounding-box normalized center
//   curve(3)    adjacent-normal cosines, padded with 1
//   shape(8)    corner angles / 180 deg (3), corner lengths / mesh mean (3),
//               area / mesh mean, log(irregularity / sqrt 3)
nn::Matrix geometric_block(const std::vector<GeoFeature>& geo, const FeatureToggles& toggles);

// Mean vertex color per face. Throws ErrorKind::Config if the mesh has none.
nn::Matrix face_colors(const TriMesh& mesh);

// Concatenates geometry, then color (Color mode), then texture (Texture
// mode). A mode whose channel is missing is a config error.
FusedInputs fuse_inputs(const std::vector<GeoFeature>& geo, const nn::Matrix* texture, const nn::Matrix* color,
                        InputMode mode, const FeatureToggles& toggles = {});

enum class Activation { SiLU, Identity };

struct GraphConvConfig {
  int layers = 2;
  int width = 128;
  Activation activation = Activation::SiLU;
  bool use_neighbors = true;  // false drops the neighbor term (per-face MLP)
};

// Row i averages the adjacent faces of i; faces without neighbors use
// themselves.
std::shared_ptr<nn::SparseMatrix> neighbor_mean_matrix(const std::vector<std::vector<int>>& adjacency);

// Stack of new(i) = act(W_self x(i) + W_neigh mean_{j in adj(i)} x(j) + b).
class GraphConvEncoder {
 public:
  struct Layer {
    nn::Var w_self;
    nn::Var w_neigh;  // undefined when neighbors are disabled
    nn::Var bias;
  };

  GraphConvEncoder() = default;
  GraphConvEncoder(nn::ParameterSet& params, const std::string& prefix, int in_dim, const GraphConvConfig& config,
                   Rng& rng);

  // Throws ErrorKind::Numeric naming the layer if activations turn non-finite.
  nn::Var forward(const nn::Var& x, const std::shared_ptr<const nn::SparseMatrix>& neighbor_mean) const;

  int out_dim() const;
  const std::vector<Layer>& layers() const { return layers_; }

 private:
  GraphConvConfig config_;
  int in_dim_ = 0;
  std::vector<Layer> layers_;
};

// Glorot-uniform matrix.
nn::Matrix glorot(int rows, int cols, Rng& rng);

}  // namespace meshmamba
