#include "meshmamba/graph_conv.hpp"

#include <cmath>

#include "meshmamba/error.hpp"

namespace meshmamba {

int geometric_dim(const FeatureToggles& toggles) {
  return (toggles.spatial ? 3 : 0) + (toggles.curve ? 3 : 0) + (toggles.shape ? 8 : 0);
}

nn::Matrix geometric_block(const std::vector<GeoFeature>& geo, const FeatureToggles& toggles) {
  const int n = static_cast<int>(geo.size());
  double mean_length = 0.0;
  double mean_area = 0.0;
  for (const GeoFeature& g : geo) {
    for (double l : g.shape.lengths) mean_length += l;
    mean_area += g.shape.area;
  }
  if (n > 0) {
    mean_length /= 3.0 * n;
    mean_area /= n;
  }
  nn::Matrix out(n, geometric_dim(toggles));
  for (int f = 0; f < n; ++f) {
    const GeoFeature& g = geo[f];
    double* row = out.row(f);
    int k = 0;
    if (toggles.spatial) {
      for (int a = 0; a < 3; ++a) row[k++] = g.spatial[a];
    }
    if (toggles.curve) {
      for (double c : g.curve) row[k++] = c;
    }
    if (toggles.shape) {
      for (double a : g.shape.angles_deg) row[k++] = a / 180.0;
      for (double l : g.shape.lengths) row[k++] = mean_length > 0.0 ? l / mean_length : 0.0;
      row[k++] = mean_area > 0.0 ? g.shape.area / mean_area : 0.0;
      row[k++] = std::log(g.shape.irregularity / std::sqrt(3.0));
    }
  }
  return out;
}

nn::Matrix face_colors(const TriMesh& mesh) {
  if (!mesh.has_colors()) throw Error(ErrorKind::Config, "color mode requires vertex colors");
  nn::Matrix out(static_cast<int>(mesh.face_count()), 3);
  for (std::size_t f = 0; f < mesh.face_count(); ++f) {
    Vec3 sum = Vec3::Zero();
    for (int v : mesh.faces()[f]) sum += mesh.vertex_colors()[v];
    for (int a = 0; a < 3; ++a) out(static_cast<int>(f), a) = sum[a] / 3.0;
  }
  return out;
}

FusedInputs fuse_inputs(const std::vector<GeoFeature>& geo, const nn::Matrix* texture, const nn::Matrix* color,
                        InputMode mode, const FeatureToggles& toggles) {
  const int n = static_cast<int>(geo.size());
  std::vector<const nn::Matrix*> blocks;
  FusedInputs fused;
  const nn::Matrix geometric = geometric_block(geo, toggles);
  if (toggles.spatial) fused.layout.emplace_back("spatial", 3);
  if (toggles.curve) fused.layout.emplace_back("curve", 3);
  if (toggles.shape) fused.layout.emplace_back("shape", 8);
  blocks.push_back(&geometric);
  if (mode == InputMode::Color) {
    if (!color) throw Error(ErrorKind::Config, "color mode requires vertex colors");
    blocks.push_back(color);
    fused.layout.emplace_back("color", color->cols);
  }
  if (mode == InputMode::Texture) {
    if (!texture) throw Error(ErrorKind::Config, "texture mode requires a textured mesh");
    blocks.push_back(texture);
    fused.layout.emplace_back("texture", texture->cols);
  }
  int dim = 0;
  for (const nn::Matrix* b : blocks) {
    if (b->rows != n) throw Error(ErrorKind::Config, "feature tables are not aligned to the same mesh");
    dim += b->cols;
  }
  fused.values = nn::Matrix(n, dim);
  for (int f = 0; f < n; ++f) {
    int off = 0;
    for (const nn::Matrix* b : blocks) {
      std::copy_n(b->row(f), b->cols, fused.values.row(f) + off);
      off += b->cols;
    }
  }
  return fused;
}

std::shared_ptr<nn::SparseMatrix> neighbor_mean_matrix(const std::vector<std::vector<int>>& adjacency) {
  auto s = std::make_shared<nn::SparseMatrix>();
  s->cols = static_cast<int>(adjacency.size());
  for (std::size_t i = 0; i < adjacency.size(); ++i) {
    std::vector<std::pair<int, double>> row;
    if (adjacency[i].empty()) {
      row.emplace_back(static_cast<int>(i), 1.0);
    } else {
      const double w = 1.0 / static_cast<double>(adjacency[i].size());
      for (int j : adjacency[i]) row.emplace_back(j, w);
    }
    s->append_row(row);
  }
  return s;
}

nn::Matrix glorot(int rows, int cols, Rng& rng) {
  const double bound = std::sqrt(6.0 / (rows + cols));
  nn::Matrix m(rows, cols);
  for (double& v : m.data) v = rng.uniform(-bound, bound);
  return m;
}

GraphConvEncoder::GraphConvEncoder(nn::ParameterSet& params, const std::string& prefix, int in_dim,
                                   const GraphConvConfig& config, Rng& rng)
    : config_(config), in_dim_(in_dim) {
  if (config.layers < 0 || config.width < 1) throw Error(ErrorKind::Config, "bad graph conv shape");
  int width_in = in_dim;
  for (int l = 0; l < config.layers; ++l) {
    const std::string p = prefix + ".layer" + std::to_string(l);
    Layer layer;
    layer.w_self = params.add(p + ".w_self", glorot(width_in, config.width, rng));
    if (config.use_neighbors) layer.w_neigh = params.add(p + ".w_neigh", glorot(width_in, config.width, rng));
    layer.bias = params.add(p + ".bias", nn::Matrix(1, config.width));
    layers_.push_back(layer);
    width_in = config.width;
  }
}

int GraphConvEncoder::out_dim() const { return layers_.empty() ? in_dim_ : config_.width; }

nn::Var GraphConvEncoder::forward(const nn::Var& x,
                                  const std::shared_ptr<const nn::SparseMatrix>& neighbor_mean) const {
  nn::Var h = x;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const Layer& layer = layers_[l];
    nn::Var pre = nn::matmul(h, layer.w_self);
    if (layer.w_neigh.defined()) pre = nn::add(pre, nn::matmul(nn::spmm(neighbor_mean, h), layer.w_neigh));
    pre = nn::add_row(pre, layer.bias);
    h = config_.activation == Activation::SiLU ? nn::silu(pre) : pre;
    for (double v : h.value().data) {
      if (!std::isfinite(v)) {
        throw Error(ErrorKind::Numeric, "non-finite activation in graph conv layer " + std::to_string(l));
      }
    }
  }
  return h;
}

}  // namespace meshmamba
