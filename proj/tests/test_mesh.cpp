#include <fstream>

#include <gtest/gtest.h>

#include "meshmamba/error.hpp"
#include "meshmamba/mesh.hpp"
#include "meshmamba/synthetic.hpp"
#include "test_util.hpp"

using namespace meshmamba;
namespace fs = std::filesystem;

namespace {

fs::path write_text(const fs::path& dir, const std::string& name, const std::string& text) {
  const auto path = dir / name;
  std::ofstream(path) << text;
  return path;
}

ErrorKind error_kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorKind::Io;
}

}  // namespace

TEST(Mesh, CubeFacesHaveThreeNeighbors) {
  const auto dir = testkit::scratch_dir("mesh_cube");
  const TriMesh cube = make_cube();
  write_obj(cube, dir / "cube.obj");
  const TriMesh loaded = load_mesh(dir / "cube.obj");
  ASSERT_EQ(loaded.face_count(), 12u);
  for (const auto& adj : loaded.adjacency()) EXPECT_EQ(adj.size(), 3u);
  EXPECT_EQ(winding_inconsistencies(loaded), 0u);
}

TEST(Mesh, QuadFaceIsUnsupported) {
  const auto dir = testkit::scratch_dir("mesh_quad");
  const auto path = write_text(dir, "quad.obj", "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n");
  EXPECT_EQ(error_kind_of([&] { load_mesh(path); }), ErrorKind::UnsupportedTopology);
}

TEST(Mesh, ParseErrorNamesLine) {
  const auto dir = testkit::scratch_dir("mesh_parse");
  const auto path = write_text(dir, "bad.obj", "v 0 0 0\nv 1 0 0\nv nope 1 0\nf 1 2 3\n");
  try {
    load_mesh(path);
    FAIL() << "expected format error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Format);
    EXPECT_NE(std::string(e.what()).find(":3:"), std::string::npos);
  }
}

TEST(Mesh, OutOfRangeIndexIsFormatError) {
  const auto dir = testkit::scratch_dir("mesh_index");
  const auto path = write_text(dir, "idx.obj", "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 9\n");
  EXPECT_EQ(error_kind_of([&] { load_mesh(path); }), ErrorKind::Format);
}

TEST(Mesh, DropsZeroAreaFace) {
  MeshData d;
  for (int i = 0; i < 12; ++i) d.vertices.push_back(Vec3(i, (i % 2) * 1.0, 0));
  for (int i = 0; i < 9; ++i) d.faces.push_back({i, i + 1, i + 2});
  d.vertices.push_back(Vec3(20, 0, 0));
  d.vertices.push_back(Vec3(21, 0, 0));
  d.vertices.push_back(Vec3(22, 0, 0));
  d.faces.push_back({12, 13, 14});  // collinear
  LoadReport report;
  const TriMesh mesh = make_mesh(std::move(d), &report);
  EXPECT_EQ(mesh.face_count(), 9u);
  EXPECT_EQ(report.dropped_degenerate, 1u);
}

TEST(Mesh, FaceBasisCenterNormal) {
  const TriMesh t = testkit::single_triangle(Vec3(0, 0, 0), Vec3(3, 0, 0), Vec3(0, 3, 0));
  const FaceBasis b = face_basis(t, 0);
  EXPECT_NEAR((b.center - Vec3(1, 1, 0)).norm(), 0.0, 1e-12);
  EXPECT_NEAR((b.normal - Vec3(0, 0, 1)).norm(), 0.0, 1e-12);
  EXPECT_NEAR(b.area, 4.5, 1e-12);
}

TEST(Mesh, EquilateralCornerAngles) {
  const TriMesh t = testkit::single_triangle(Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0.5, std::sqrt(3.0) / 2, 0));
  const FaceBasis b = face_basis(t, 0);
  for (int i = 0; i < 3; ++i) {
    const Vec3& p = b.corners[i];
    const Vec3& q = b.corners[(i + 1) % 3];
    const double deg = std::acos(p.dot(q) / (p.norm() * q.norm())) * 180.0 / M_PI;
    EXPECT_NEAR(deg, 120.0, 1e-9);
  }
}

TEST(Mesh, CornerVectorsSumToZero) {
  GridOptions o;
  o.jitter = 0.4;
  o.amplitude = 0.2;
  o.seed = 3;
  const TriMesh mesh = make_grid(o);
  for (int f = 0; f < static_cast<int>(mesh.face_count()); ++f) {
    const FaceBasis b = face_basis(mesh, f);
    const Vec3 sum = b.corners[0] + b.corners[1] + b.corners[2];
    double diameter = 0.0;
    for (int i = 0; i < 3; ++i) diameter = std::max(diameter, (b.corners[i] - b.corners[(i + 1) % 3]).norm());
    EXPECT_LE(sum.norm(), 1e-6 * diameter);
  }
}

TEST(Mesh, TwoTrianglesShareEdge) {
  const auto adj = build_adjacency({{0, 1, 2}, {2, 1, 3}});
  ASSERT_EQ(adj.size(), 2u);
  EXPECT_EQ(adj[0], std::vector<int>{1});
  EXPECT_EQ(adj[1], std::vector<int>{0});
}

TEST(Mesh, VertexFanIsNotAdjacent) {
  const auto adj = build_adjacency({{0, 1, 2}, {0, 3, 4}, {0, 5, 6}});
  for (const auto& a : adj) EXPECT_TRUE(a.empty());
}

TEST(Mesh, NonManifoldEdgeMakesAllMutuallyAdjacent) {
  testkit::QuietWarnings quiet;
  std::size_t nonmanifold = 0;
  const auto adj = build_adjacency({{0, 1, 2}, {1, 0, 3}, {0, 1, 4}}, &nonmanifold);
  EXPECT_EQ(nonmanifold, 1u);
  for (int f = 0; f < 3; ++f) EXPECT_EQ(adj[f].size(), 2u);
}

TEST(Mesh, AdjacencyIsSymmetric) {
  for (const TriMesh& mesh : {make_icosphere(2), make_uv_sphere(8, 12), make_grid({})}) {
    const auto& adj = mesh.adjacency();
    for (std::size_t f = 0; f < adj.size(); ++f)
      for (int g : adj[f]) EXPECT_NE(std::find(adj[g].begin(), adj[g].end(), static_cast<int>(f)), adj[g].end());
  }
}

TEST(Mesh, ObjRoundTripIsBitExact) {
  const auto dir = testkit::scratch_dir("mesh_roundtrip");
  GridOptions o;
  o.nx = 4;
  o.ny = 3;
  o.jitter = 0.3;
  o.amplitude = 0.1;
  o.seed = 11;
  const TriMesh mesh = make_grid(o);
  write_obj(mesh, dir / "g.obj");
  const TriMesh back = load_mesh(dir / "g.obj");
  ASSERT_EQ(back.face_count(), mesh.face_count());
  EXPECT_EQ(back.faces(), mesh.faces());
  ASSERT_EQ(back.vertex_count(), mesh.vertex_count());
  for (std::size_t i = 0; i < mesh.vertex_count(); ++i) EXPECT_EQ(back.vertices()[i], mesh.vertices()[i]);
  ASSERT_TRUE(back.has_uvs());
  for (std::size_t f = 0; f < mesh.face_count(); ++f)
    for (int k = 0; k < 3; ++k) EXPECT_EQ(back.uvs()[f][k], mesh.uvs()[f][k]);
}

TEST(Mesh, UvsWrapByRepeat) {
  MeshData d;
  d.vertices = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0)};
  d.faces = {{0, 1, 2}};
  d.uvs = {{Vec2(1.25, -0.25), Vec2(2.5, 0.5), Vec2(-1.0, 0.75)}};
  const TriMesh m = make_mesh(std::move(d));
  EXPECT_NEAR(m.uvs()[0][0].x(), 0.25, 1e-12);
  EXPECT_NEAR(m.uvs()[0][0].y(), 0.75, 1e-12);
  EXPECT_NEAR(m.uvs()[0][1].x(), 0.5, 1e-12);
  EXPECT_NEAR(m.uvs()[0][2].x(), 0.0, 1e-12);
}

TEST(Mesh, MissingTextureWarnsAndLoads) {
  testkit::QuietWarnings quiet;
  const auto dir = testkit::scratch_dir("mesh_missing_tex");
  write_text(dir, "m.mtl", "newmtl a\nmap_Kd missing.png\n");
  const auto path = write_text(dir, "m.obj",
                               "mtllib m.mtl\nv 0 0 0\nv 1 0 0\nv 0 1 0\nvt 0 0\nvt 1 0\nvt 0 1\nf 1/1 2/2 3/3\n");
  LoadReport report;
  const TriMesh m = load_mesh(path, {}, &report);
  EXPECT_TRUE(m.has_uvs());
  EXPECT_FALSE(m.has_texture());
  EXPECT_FALSE(report.warnings.empty());
}

TEST(Mesh, VertexColorsParsed) {
  const auto dir = testkit::scratch_dir("mesh_colors");
  const auto path = write_text(dir, "c.obj", "v 0 0 0 1 0 0\nv 1 0 0 0 1 0\nv 0 1 0 0 0 1\nf 1 2 3\n");
  const TriMesh m = load_mesh(path);
  ASSERT_TRUE(m.has_colors());
  EXPECT_EQ(m.vertex_colors()[1], Vec3(0, 1, 0));
}

TEST(Mesh, ComponentsCounted) {
  const TriMesh m = make_mesh(MeshData{{Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(5, 0, 0), Vec3(6, 0, 0),
                                        Vec3(5, 1, 0)},
                                       {{0, 1, 2}, {3, 4, 5}},
                                       {},
                                       {},
                                       nullptr});
  int count = 0;
  connected_components(m, &count);
  EXPECT_EQ(count, 2);
}
