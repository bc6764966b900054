#pragma once

#include <memory>
#include <string>
#include <vector>

#include "meshmamba/mesh.hpp"
#include "meshmamba/nn/parameters.hpp"
#include "meshmamba/rng.hpp"

namespace meshmamba {

struct InterpolationConfig {
  double eps = 1e-8;
  double power = 1.0;  // weights 1 / (d + eps)^power
};

// Row f blends the three token centers nearest to query f with normalized
// inverse-distance weights. A query that coincides with a center takes that
// token alone. Throws ErrorKind::Config when fewer than 3 centers are given.
std::shared_ptr<nn::SparseMatrix> interpolation_matrix(const std::vector<Vec3>& token_centers,
                                                       const std::vector<Vec3>& query_centers,
                                                       const InterpolationConfig& config = {});

// tokens: L x D without the cls row.
nn::Var propagate(const nn::Var& tokens, const std::shared_ptr<const nn::SparseMatrix>& interpolation);

// Per-face head: relu(silu(x W1 + b1) W2 + b2). With hidden = 0 it is a
// single linear layer followed by the clamp.
struct HeadParams {
  nn::Var w1;
  nn::Var b1;
  nn::Var w2;
  nn::Var b2;

  static HeadParams create(nn::ParameterSet& params, const std::string& prefix, int in_dim, int hidden, Rng& rng);
};

// Head output before the clamp.
nn::Var head_output(const nn::Var& features, const HeadParams& head);
nn::Var predict_head(const nn::Var& features, const HeadParams& head);

}  // namespace meshmamba
