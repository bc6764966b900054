#include "meshmamba/propagation.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "meshmamba/error.hpp"
#include "meshmamba/graph_conv.hpp"
#include "meshmamba/parallel.hpp"

namespace meshmamba {

std::shared_ptr<nn::SparseMatrix> interpolation_matrix(const std::vector<Vec3>& token_centers,
                                                       const std::vector<Vec3>& query_centers,
                                                       const InterpolationConfig& config) {
  const int L = static_cast<int>(token_centers.size());
  if (L < 3) throw Error(ErrorKind::Config, "propagation needs at least 3 token centers, got " + std::to_string(L));
  const int F = static_cast<int>(query_centers.size());
  std::vector<std::vector<std::pair<int, double>>> rows(F);
  parallel_for(F, [&](std::size_t begin, std::size_t end) {
    for (std::size_t f = begin; f < end; ++f) {
      std::array<std::pair<double, int>, 3> best;
      best.fill({std::numeric_limits<double>::infinity(), -1});
      for (int k = 0; k < L; ++k) {
        const std::pair<double, int> cand{(query_centers[f] - token_centers[k]).norm(), k};
        if (cand < best[2]) {
          best[2] = cand;
          std::sort(best.begin(), best.end());
        }
      }
      auto& row = rows[f];
      if (best[0].first == 0.0) {
        row.push_back({best[0].second, 1.0});
        continue;
      }
      double total = 0.0;
      std::array<double, 3> w;
      for (int j = 0; j < 3; ++j) {
        w[j] = 1.0 / std::pow(best[j].first + config.eps, config.power);
        total += w[j];
      }
      for (int j = 0; j < 3; ++j) row.push_back({best[j].second, w[j] / total});
      std::sort(row.begin(), row.end());
    }
  });
  auto out = std::make_shared<nn::SparseMatrix>();
  out->cols = L;
  for (const auto& row : rows) out->append_row(row);
  return out;
}

nn::Var propagate(const nn::Var& tokens, const std::shared_ptr<const nn::SparseMatrix>& interpolation) {
  if (interpolation->cols != tokens.rows()) {
    throw Error(ErrorKind::Config, "interpolation matrix does not match the token count");
  }
  return nn::spmm(interpolation, tokens);
}

HeadParams HeadParams::create(nn::ParameterSet& params, const std::string& prefix, int in_dim, int hidden,
                              Rng& rng) {
  HeadParams head;
  if (hidden > 0) {
    head.w1 = params.add(prefix + ".w1", glorot(in_dim, hidden, rng));
    head.b1 = params.add(prefix + ".b1", nn::Matrix(1, hidden));
    head.w2 = params.add(prefix + ".w2", glorot(hidden, 1, rng));
  } else {
    head.w2 = params.add(prefix + ".w2", glorot(in_dim, 1, rng));
  }
  // Small positive bias keeps the clamp open at initialization.
  head.b2 = params.add(prefix + ".b2", nn::Matrix(1, 1, 0.1));
  return head;
}

nn::Var head_output(const nn::Var& features, const HeadParams& head) {
  nn::Var x = features;
  if (head.w1.defined()) x = nn::silu(nn::add_row(nn::matmul(x, head.w1), head.b1));
  return nn::add_row(nn::matmul(x, head.w2), head.b2);
}

nn::Var predict_head(const nn::Var& features, const HeadParams& head) { return nn::relu(head_output(features, head)); }

}  // namespace meshmamba
