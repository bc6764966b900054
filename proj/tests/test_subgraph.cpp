#include <fstream>
#include <numeric>
#include <set>

#include <gtest/gtest.h>

#include "meshmamba/error.hpp"
#include "meshmamba/geometry_features.hpp"
#include "meshmamba/parallel.hpp"
#include "meshmamba/subgraph.hpp"
#include "meshmamba/synthetic.hpp"
#include "test_util.hpp"

using namespace meshmamba;

namespace {

std::vector<Vec3> centers_of(const TriMesh& mesh) {
  std::vector<Vec3> out;
  for (int f = 0; f < static_cast<int>(mesh.face_count()); ++f) out.push_back(face_basis(mesh, f).center);
  return out;
}

double min_pairwise(const std::vector<Vec3>& c, const std::vector<int>& pick) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < pick.size(); ++i)
    for (std::size_t j = i + 1; j < pick.size(); ++j) best = std::min(best, (c[pick[i]] - c[pick[j]]).norm());
  return best;
}

}  // namespace

TEST(Fps, CollinearPicksExtremes) {
  std::vector<Vec3> c;
  for (int i = 0; i < 10; ++i) c.emplace_back(i, 0, 0);
  auto pick = fps_centers(c, 2, SeedRule::FarthestFromCentroid);
  std::sort(pick.begin(), pick.end());
  EXPECT_EQ(pick, (std::vector<int>{0, 9}));
}

TEST(Fps, NearestCentroidSeedStartsInMiddle) {
  std::vector<Vec3> c;
  for (int i = 0; i < 9; ++i) c.emplace_back(i, 0, 0);
  const auto pick = fps_centers(c, 3);
  EXPECT_EQ(pick[0], 4);
  EXPECT_EQ(std::set<int>(pick.begin() + 1, pick.end()), (std::set<int>{0, 8}));
}

TEST(Fps, AllFacesWhenCountEqualsSize) {
  const auto c = centers_of(make_icosphere(1));
  auto pick = fps_centers(c, static_cast<int>(c.size()));
  std::sort(pick.begin(), pick.end());
  std::vector<int> all(c.size());
  std::iota(all.begin(), all.end(), 0);
  EXPECT_EQ(pick, all);
}

TEST(Fps, TooManyIsConfigError) {
  try {
    fps_centers(std::vector<Vec3>(5, Vec3::Zero()), 6);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Config);
  }
}

TEST(Fps, BeatsRandomSubsets) {
  const auto c = centers_of(make_grid({10, 10, 0.5, 0.1, 21}));
  ASSERT_EQ(c.size(), 200u);
  const int L = 8;
  const double fps = min_pairwise(c, fps_centers(c, L));
  Rng rng(77);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<int> all(c.size());
    std::iota(all.begin(), all.end(), 0);
    for (int i = 0; i < L; ++i) std::swap(all[i], all[i + rng.below(all.size() - i)]);
    all.resize(L);
    EXPECT_GE(fps, min_pairwise(c, all));
  }
}

TEST(Fps, RadiusNonIncreasingInCount) {
  const auto c = centers_of(make_icosphere(2));
  const auto pick = fps_centers(c, 40);
  double prev = std::numeric_limits<double>::infinity();
  for (int L = 2; L <= 40; ++L) {
    const std::vector<int> prefix(pick.begin(), pick.begin() + L);
    const double r = min_pairwise(c, prefix);
    EXPECT_LE(r, prev + 1e-12);
    prev = r;
  }
}

TEST(RandomWalk, LengthOneIsCenter) {
  const TriMesh mesh = make_icosphere(1);
  Rng rng(1);
  const Subgraph sg = random_walk_subgraph(mesh.adjacency(), 7, 1, rng);
  EXPECT_EQ(sg.members, std::vector<int>{7});
}

TEST(RandomWalk, StripIsForced) {
  const TriMesh strip = make_strip(20);
  for (std::size_t f = 1; f + 1 < 20; ++f) ASSERT_EQ(strip.adjacency()[f].size(), 2u);
  Rng rng(3);
  const Subgraph sg = random_walk_subgraph(strip.adjacency(), 0, 6, rng);
  EXPECT_EQ(sg.members, (std::vector<int>{0, 1, 2, 3, 4, 5}));
}

TEST(RandomWalk, DistinctAndConnected) {
  const TriMesh mesh = make_grid({8, 8, 0.3, 0.0, 1});
  for (int seed = 0; seed < 50; ++seed) {
    Rng rng(seed);
    const Subgraph sg = random_walk_subgraph(mesh.adjacency(), seed % 128, 32, rng);
    EXPECT_EQ(sg.members.size(), 32u);
    EXPECT_TRUE(is_connected_walk(mesh.adjacency(), sg));
  }
}

TEST(RandomWalk, SmallComponentPadded) {
  testkit::QuietWarnings quiet;
  const TriMesh strip = make_strip(3);
  Rng rng(0);
  const Subgraph sg = random_walk_subgraph(strip.adjacency(), 1, 5, rng);
  EXPECT_EQ(sg.members.size(), 3u);
  EXPECT_EQ(sg.padding, 2);
  const auto seg = pooling_segments({sg});
  EXPECT_EQ(seg[0].size(), 5u);
  EXPECT_EQ(seg[0][3], 1);
  EXPECT_EQ(seg[0][4], 1);
}

TEST(RandomWalk, OracleRejectsDisconnected) {
  const TriMesh strip = make_strip(10);
  EXPECT_FALSE(is_connected_walk(strip.adjacency(), Subgraph{0, {0, 2}, 0}));
  EXPECT_FALSE(is_connected_walk(strip.adjacency(), Subgraph{0, {0, 1, 0}, 0}));
  EXPECT_TRUE(is_connected_walk(strip.adjacency(), Subgraph{3, {3, 4, 2, 1}, 0}));
}

TEST(Knn, NearestByCenterDistance) {
  std::vector<Vec3> c;
  for (int i = 0; i < 10; ++i) c.emplace_back(i * i, 0, 0);
  const Subgraph sg = knn_subgraph(c, 3, 3);
  EXPECT_EQ(sg.members, (std::vector<int>{3, 2, 4}));
}

TEST(Sampling, ReproducibleAndThreadIndependent) {
  const TriMesh mesh = make_icosphere(2);
  const auto c = centers_of(mesh);
  const auto centers = fps_centers(c, 16);
  const auto a = sample_subgraphs(mesh, c, centers, 12, 99);
  set_thread_count(1);
  const auto b = sample_subgraphs(mesh, c, centers, 12, 99);
  set_thread_count(0);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t k = 0; k < a.size(); ++k) EXPECT_EQ(a[k].members, b[k].members);
  const auto other = sample_subgraphs(mesh, c, centers, 12, 100);
  bool differs = false;
  for (std::size_t k = 0; k < a.size(); ++k) differs |= a[k].members != other[k].members;
  EXPECT_TRUE(differs);
}

TEST(Sampling, DumpOneLinePerSubgraph) {
  const auto dir = testkit::scratch_dir("subgraph_dump");
  write_subgraphs({{0, {0, 1, 2}, 0}, {5, {5, 4}, 0}}, dir / "s.txt");
  std::ifstream in(dir / "s.txt");
  std::string l1, l2;
  std::getline(in, l1);
  std::getline(in, l2);
  EXPECT_EQ(l1, "0 1 2");
  EXPECT_EQ(l2, "5 4");
}

TEST(PatchEmbed, EqualMembersPoolToSelf) {
  Rng rng(4);
  nn::ParameterSet params;
  const PatchEmbedParams p = PatchEmbedParams::create(params, "patch", 3, 5, 2, false, rng);
  nn::Matrix emb(6, 3);
  for (int r = 0; r < 6; ++r) emb(r, 0) = 0.2, emb(r, 1) = -0.4, emb(r, 2) = 1.5;
  const auto seq = embed_patches({{0, 1, 2}, {3, 4, 5}}, {Vec3::Zero(), Vec3::Zero()}, nn::Var(emb), p);
  ASSERT_EQ(seq.tokens.rows(), 3);
  const std::vector<double> v{0.2, -0.4, 1.5, 0.2, -0.4, 1.5};
  for (int k = 0; k < 5; ++k) {
    double expected = p.pos.value()(1, k);
    for (int j = 0; j < 6; ++j) expected += v[j] * p.projection.value()(j, k);
    EXPECT_NEAR(seq.tokens.value()(1, k), expected, 1e-12);
    EXPECT_NEAR(seq.tokens.value()(0, k), p.cls.value()(0, k) + p.pos.value()(0, k), 1e-15);
  }
}

TEST(PatchEmbed, MemberOrderIrrelevant) {
  Rng rng(5);
  nn::ParameterSet params;
  const PatchEmbedParams p = PatchEmbedParams::create(params, "patch", 4, 6, 1, false, rng);
  nn::Matrix emb(5, 4);
  for (double& v : emb.data) v = rng.uniform(-1, 1);
  const auto a = embed_patches({{0, 1, 2, 3, 4}}, {Vec3::Zero()}, nn::Var(emb), p);
  const auto b = embed_patches({{3, 0, 4, 2, 1}}, {Vec3::Zero()}, nn::Var(emb), p);
  for (int k = 0; k < 6; ++k) EXPECT_NEAR(a.tokens.value()(1, k), b.tokens.value()(1, k), 1e-14);
}

TEST(PatchEmbed, DimMismatchIsConfigError) {
  Rng rng(6);
  nn::ParameterSet params;
  const PatchEmbedParams p = PatchEmbedParams::create(params, "patch", 4, 6, 1, false, rng);
  try {
    embed_patches({{0}}, {Vec3::Zero()}, nn::Var(nn::Matrix(2, 3)), p);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Config);
  }
}
