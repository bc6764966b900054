#include <numeric>

#include <gtest/gtest.h>

#include "meshmamba/error.hpp"
#include "meshmamba/graph_conv.hpp"
#include "meshmamba/synthetic.hpp"

using namespace meshmamba;

namespace {

nn::Matrix random_matrix(int r, int c, Rng& rng) {
  nn::Matrix m(r, c);
  for (double& v : m.data) v = rng.uniform(-1, 1);
  return m;
}

// Per-face loop over explicit adjacency lists.
nn::Matrix reference_layer(const nn::Matrix& x, const std::vector<std::vector<int>>& adj,
                           const GraphConvEncoder::Layer& layer, bool silu) {
  const nn::Matrix& ws = layer.w_self.value();
  const nn::Matrix& wn = layer.w_neigh.value();
  nn::Matrix out(x.rows, ws.cols);
  for (int i = 0; i < x.rows; ++i) {
    std::vector<double> mean(x.cols, 0.0);
    if (adj[i].empty()) {
      for (int k = 0; k < x.cols; ++k) mean[k] = x(i, k);
    } else {
      for (int j : adj[i])
        for (int k = 0; k < x.cols; ++k) mean[k] += x(j, k) / adj[i].size();
    }
    for (int o = 0; o < ws.cols; ++o) {
      double acc = layer.bias.value()(0, o);
      for (int k = 0; k < x.cols; ++k) acc += ws(k, o) * x(i, k) + wn(k, o) * mean[k];
      out(i, o) = silu ? acc / (1.0 + std::exp(-acc)) : acc;
    }
  }
  return out;
}

}  // namespace

TEST(GraphConv, MatchesPerFaceReference) {
  const TriMesh mesh = make_grid({4, 3, 0.3, 0.1, 1});
  Rng rng(3);
  nn::ParameterSet params;
  GraphConvEncoder enc(params, "gc", 5, {2, 6, Activation::SiLU, true}, rng);
  for (auto& p : params.all())
    for (double& v : p.var.mutable_value().data) v = rng.uniform(-1, 1);
  const nn::Matrix x = random_matrix(static_cast<int>(mesh.face_count()), 5, rng);
  const nn::Var out = enc.forward(nn::Var(x), neighbor_mean_matrix(mesh.adjacency()));
  nn::Matrix ref = x;
  for (const auto& layer : enc.layers()) ref = reference_layer(ref, mesh.adjacency(), layer, true);
  ASSERT_TRUE(out.value().same_shape(ref));
  for (std::size_t i = 0; i < ref.size(); ++i) EXPECT_NEAR(out.value().data[i], ref.data[i], 1e-12);
}

TEST(GraphConv, CubeSymmetry) {
  const TriMesh cube = make_cube();
  Rng rng(1);
  nn::ParameterSet params;
  GraphConvEncoder enc(params, "gc", 4, {3, 8, Activation::SiLU, true}, rng);
  const nn::Matrix x(12, 4, 0.37);
  const nn::Matrix y = enc.forward(nn::Var(x), neighbor_mean_matrix(cube.adjacency())).value();
  for (int f = 1; f < 12; ++f)
    for (int k = 0; k < y.cols; ++k) EXPECT_NEAR(y(f, k), y(0, k), 1e-14);
}

TEST(GraphConv, OneLayerLocality) {
  const TriMesh mesh = make_icosphere(1);
  const int n = static_cast<int>(mesh.face_count());
  Rng rng(2);
  nn::ParameterSet params;
  GraphConvEncoder enc(params, "gc", 3, {1, 4, Activation::SiLU, true}, rng);
  const auto nm = neighbor_mean_matrix(mesh.adjacency());
  nn::Matrix x = random_matrix(n, 3, rng);
  const nn::Matrix base = enc.forward(nn::Var(x), nm).value();
  const int j = 11;
  x(j, 1) += 0.5;
  const nn::Matrix moved = enc.forward(nn::Var(x), nm).value();
  const auto& adj_j = mesh.adjacency()[j];
  for (int i = 0; i < n; ++i) {
    bool changed = false;
    for (int k = 0; k < 4; ++k) changed |= moved(i, k) != base(i, k);
    const bool near = i == j || std::find(adj_j.begin(), adj_j.end(), i) != adj_j.end();
    EXPECT_EQ(changed, near) << "face " << i;
  }
}

TEST(GraphConv, ZeroWeightsIdentityGivesBias) {
  const TriMesh mesh = make_cube();
  Rng rng(5);
  nn::ParameterSet params;
  GraphConvEncoder enc(params, "gc", 3, {1, 2, Activation::Identity, true}, rng);
  const auto& layer = enc.layers()[0];
  for (double& v : layer.w_self.node()->value.data) v = 0.0;
  for (double& v : layer.w_neigh.node()->value.data) v = 0.0;
  layer.bias.node()->value = nn::Matrix(1, 2, std::vector<double>{0.25, -2.0});
  const nn::Matrix y = enc.forward(nn::Var(random_matrix(12, 3, rng)), neighbor_mean_matrix(mesh.adjacency())).value();
  for (int f = 0; f < 12; ++f) {
    EXPECT_EQ(y(f, 0), 0.25);
    EXPECT_EQ(y(f, 1), -2.0);
  }
}

TEST(GraphConv, PermutationEquivariant) {
  const TriMesh mesh = make_icosphere(1);
  const int n = static_cast<int>(mesh.face_count());
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(8);
  for (int i = n - 1; i > 0; --i) std::swap(perm[i], perm[rng.below(i + 1)]);
  // Face i of the relabeled mesh is face perm[i] of the original.
  MeshData d;
  d.vertices = mesh.vertices();
  for (int i = 0; i < n; ++i) d.faces.push_back(mesh.faces()[perm[i]]);
  const TriMesh relabeled = make_mesh(std::move(d));

  nn::ParameterSet params;
  GraphConvEncoder enc(params, "gc", 3, {2, 5, Activation::SiLU, true}, rng);
  const nn::Matrix x = random_matrix(n, 3, rng);
  nn::Matrix xp(n, 3);
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < 3; ++k) xp(i, k) = x(perm[i], k);
  const nn::Matrix y = enc.forward(nn::Var(x), neighbor_mean_matrix(mesh.adjacency())).value();
  const nn::Matrix yp = enc.forward(nn::Var(xp), neighbor_mean_matrix(relabeled.adjacency())).value();
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < 5; ++k) EXPECT_NEAR(yp(i, k), y(perm[i], k), 1e-12);
}

TEST(GraphConv, IsolatedFaceUsesItself) {
  const auto nm = neighbor_mean_matrix({{}, {2}, {1}});
  EXPECT_EQ(nm->row_ptr[1] - nm->row_ptr[0], 1);
  EXPECT_EQ(nm->col_index[0], 0);
  EXPECT_EQ(nm->values[0], 1.0);
}

TEST(GraphConv, NonFiniteNamesLayer) {
  const TriMesh mesh = make_cube();
  Rng rng(5);
  nn::ParameterSet params;
  GraphConvEncoder enc(params, "gc", 3, {2, 4, Activation::SiLU, true}, rng);
  enc.layers()[1].bias.node()->value(0, 2) = std::numeric_limits<double>::infinity();
  try {
    enc.forward(nn::Var(random_matrix(12, 3, rng)), neighbor_mean_matrix(mesh.adjacency()));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Numeric);
    EXPECT_NE(std::string(e.what()).find("layer 1"), std::string::npos);
  }
}

TEST(GraphConv, Deterministic) {
  const TriMesh mesh = make_icosphere(1);
  auto run = [&] {
    Rng rng(12);
    nn::ParameterSet params;
    GraphConvEncoder enc(params, "gc", 3, {}, rng);
    return enc.forward(nn::Var(random_matrix(static_cast<int>(mesh.face_count()), 3, rng)),
                       neighbor_mean_matrix(mesh.adjacency()))
        .value()
        .data;
  };
  EXPECT_EQ(run(), run());
}
