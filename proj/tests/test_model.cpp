#include <cmath>
#include <fstream>

#include <gtest/gtest.h>

#include "meshmamba/checkpoint.hpp"
#include "meshmamba/error.hpp"
#include "meshmamba/model.hpp"
#include "meshmamba/synthetic.hpp"
#include "test_util.hpp"

using namespace meshmamba;
using meshmamba::testkit::gradient_check;

namespace {

std::shared_ptr<const TriMesh> textured_grid(int nx, int ny, double texture_value = -1.0) {
  GridOptions o;
  o.nx = nx;
  o.ny = ny;
  o.jitter = 0.3;
  o.amplitude = 0.1;
  o.seed = 4;
  o.texture = std::make_shared<TextureImage>(texture_value < 0 ? procedural_texture(16, 16, 2)
                                                                : constant_texture(16, 16, texture_value));
  return std::make_shared<const TriMesh>(make_grid(o));
}

ModelConfig tiny_config() {
  ModelConfig c;
  c.input_mode = InputMode::Texture;
  c.latent_dim = 4;
  c.texture_density = 3;
  c.graph_conv = {2, 8, Activation::SiLU, true};
  c.patches = 6;
  c.patch_length = 4;
  c.token_dim = 8;
  c.state_dim = 4;
  c.blocks = 2;
  c.head_hidden = 8;
  c.seed = 3;
  return c;
}

}  // namespace

TEST(Model, ForwardShapeAndClamp) {
  const auto mesh = textured_grid(5, 4);
  const ModelConfig cfg = tiny_config();
  const MeshInputs in = prepare_inputs(mesh, cfg, 1);
  const MeshMambaModel model(cfg);
  const SaliencyMap pred = model.predict(in);
  EXPECT_EQ(pred.face_count(), mesh->face_count());
  for (double v : pred.values) EXPECT_GE(v, 0.0);
}

TEST(Model, DeterministicForFixedSeeds) {
  const auto mesh = textured_grid(5, 4);
  const ModelConfig cfg = tiny_config();
  const MeshMambaModel a(cfg), b(cfg);
  EXPECT_EQ(a.predict(prepare_inputs(mesh, cfg, 1)).values, b.predict(prepare_inputs(mesh, cfg, 1)).values);
}

TEST(Model, ConfigJsonRoundTrip) {
  ModelConfig c = tiny_config();
  c.subgraph_mode = SubgraphMode::Knn;
  c.seed_rule = SeedRule::FarthestFromCentroid;
  c.features.curve = false;
  c.interpolation.power = 2.0;
  c.jitter = 0.25;
  const ModelConfig back = ModelConfig::from_json(c.to_json());
  EXPECT_EQ(back.to_json(), c.to_json());
  EXPECT_EQ(back.hash(), c.hash());
  c.seed += 1;
  EXPECT_NE(back.hash(), c.hash());
}

TEST(Model, EveryAblationRuns) {
  const auto mesh = textured_grid(5, 4);
  const ModelConfig base = tiny_config();
  const std::size_t full = MeshMambaModel(base).parameters().scalar_count();
  for (const std::string& name : ablation_names()) {
    ModelConfig cfg = base;
    apply_ablation(cfg, name);
    const MeshMambaModel model(cfg);
    const SaliencyMap pred = model.predict(prepare_inputs(mesh, cfg, 1));
    EXPECT_EQ(pred.face_count(), mesh->face_count()) << name;
    if (name != "subgraph") EXPECT_LT(model.parameters().scalar_count(), full) << name;
  }
  ModelConfig cfg = base;
  EXPECT_THROW(apply_ablation(cfg, "attention"), Error);
}

TEST(Model, InputModesChangeDim) {
  ModelConfig c = tiny_config();
  EXPECT_EQ(c.input_dim(), 14 + 4);
  c.texture_encoder = EncoderKind::Identity;
  EXPECT_EQ(c.input_dim(), 14 + 3);
  c.input_mode = InputMode::Geometry;
  EXPECT_EQ(c.input_dim(), 14);
  c.input_mode = InputMode::Color;
  EXPECT_EQ(c.input_dim(), 17);
}

TEST(Model, TooManyPatchesIsConfigError) {
  ModelConfig cfg = tiny_config();
  cfg.patches = 1000;
  try {
    prepare_inputs(textured_grid(3, 3), cfg, 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Config);
  }
}

TEST(Model, TextureModeNeedsTexture) {
  ModelConfig cfg = tiny_config();
  const auto mesh = std::make_shared<const TriMesh>(make_icosphere(2));
  EXPECT_THROW(prepare_inputs(mesh, cfg, 0), Error);
  cfg.input_mode = InputMode::Geometry;
  EXPECT_NO_THROW(prepare_inputs(mesh, cfg, 0));
}

TEST(Model, TextureSamplerRowsAreAverages) {
  ModelConfig cfg = tiny_config();
  cfg.texture_encoder = EncoderKind::Identity;
  const MeshInputs in = prepare_inputs(textured_grid(4, 4, 0.7), cfg, 0);
  const auto& s = *in.texture_sampler;
  for (int r = 0; r < s.rows; ++r) {
    double sum = 0.0;
    for (int k = s.row_ptr[r]; k < s.row_ptr[r + 1]; ++k) sum += s.values[k];
    EXPECT_NEAR(sum, 1.0, 1e-12);
  }
  cfg.use_graph_conv = false;
  const MeshMambaModel model(cfg);
  const nn::Matrix emb = model.face_embeddings(in).value();
  for (int f = 0; f < emb.rows; ++f)
    for (int k = 14; k < 17; ++k) EXPECT_NEAR(emb(f, k), 0.7, 1e-12);
}

TEST(Model, InterpolationRowsSumToOne) {
  const MeshInputs in = prepare_inputs(textured_grid(6, 5), tiny_config(), 0);
  const auto& s = *in.interpolation;
  for (int r = 0; r < s.rows; ++r) {
    double sum = 0.0;
    for (int k = s.row_ptr[r]; k < s.row_ptr[r + 1]; ++k) {
      EXPECT_GE(s.values[k], 0.0);
      sum += s.values[k];
    }
    EXPECT_NEAR(sum, 1.0, 1e-9);
  }
}

TEST(Model, GradientMatchesFiniteDifferences) {
  const auto mesh = textured_grid(2, 5);
  ASSERT_EQ(mesh->face_count(), 20u);
  ModelConfig cfg = tiny_config();
  cfg.patches = 4;
  cfg.patch_length = 3;
  cfg.blocks = 1;
  const MeshInputs in = prepare_inputs(mesh, cfg, 2);
  MeshMambaModel model(cfg);
  Rng rng(5);
  nn::Matrix w(20, 1);
  for (double& v : w.data) v = rng.uniform(-1, 1);
  std::vector<nn::Var> leaves;
  for (const auto& p : model.parameters().all()) leaves.push_back(p.var);
  const auto r = gradient_check([&] { return nn::weighted_sum(model.forward_unclamped(in), w); }, leaves);
  EXPECT_GT(r.checked, 500u);
  EXPECT_LT(r.max_rel, 1e-3);
}

TEST(Model, ZeroLossZeroHeadBiasGradient) {
  const auto mesh = textured_grid(4, 3);
  const ModelConfig cfg = tiny_config();
  const MeshInputs in = prepare_inputs(mesh, cfg, 0);
  MeshMambaModel model(cfg);
  const nn::Matrix target = [&] {
    nn::NoGradGuard guard;
    return model.forward_unclamped(in).value();
  }();
  model.parameters().zero_grad();
  nn::l1_loss(model.forward_unclamped(in), target).backward();
  EXPECT_EQ(model.parameters().find("head.b2")->var.grad()(0, 0), 0.0);
}

TEST(Checkpoint, RoundTripIsBitExact) {
  const auto dir = testkit::scratch_dir("checkpoint");
  const auto mesh = textured_grid(5, 4);
  const ModelConfig cfg = tiny_config();
  MeshMambaModel model(cfg);
  for (auto& p : model.parameters().all())
    for (double& v : p.var.mutable_value().data) v += 1e-3 * std::sin(v * 1e4);
  save_checkpoint(model, {17, "state", "{\"lr\":0.001}"}, dir / "m.ckpt");
  const LoadedCheckpoint back = load_checkpoint(dir / "m.ckpt");
  EXPECT_EQ(back.state.epoch, 17);
  EXPECT_EQ(back.state.rng_state, "state");
  EXPECT_EQ(back.model->config().to_json(), cfg.to_json());
  const MeshInputs in = prepare_inputs(mesh, cfg, 1);
  EXPECT_EQ(back.model->predict(in).values, model.predict(in).values);
}

TEST(Checkpoint, CorruptFileIsFormatError) {
  const auto dir = testkit::scratch_dir("checkpoint_bad");
  std::ofstream(dir / "bad.ckpt") << "MMCKgarbage";
  try {
    load_checkpoint(dir / "bad.ckpt");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Format);
  }
}
