#include <cmath>
#include <fstream>
#include <set>
#include <string>

#include <gtest/gtest.h>

#include "meshmamba/checkpoint.hpp"
#include "meshmamba/error.hpp"
#include "meshmamba/synthetic.hpp"
#include "meshmamba/train.hpp"
#include "test_util.hpp"

using namespace meshmamba;

namespace {

ModelConfig small_model() {
  ModelConfig c;
  c.graph_conv = {1, 8, Activation::SiLU, true};
  c.patches = 5;
  c.patch_length = 4;
  c.token_dim = 8;
  c.state_dim = 4;
  c.blocks = 1;
  c.head_hidden = 8;
  c.seed = 2;
  return c;
}

std::vector<TrainSample> small_dataset(const ModelConfig& cfg) {
  std::vector<TrainSample> out;
  for (int k = 0; k < 2; ++k) {
    auto mesh = std::make_shared<const TriMesh>(make_grid({4, 3, 0.3, 0.1, static_cast<std::uint64_t>(k + 1)}));
    const SaliencyMap gt = blob_saliency(*mesh, Vec3(0.3, 0.5, 0), 0.3);
    out.push_back(make_sample("grid" + std::to_string(k), mesh, gt, cfg));
  }
  return out;
}

TrainConfig short_run() {
  TrainConfig t;
  t.epochs = 3;
  t.seed = 9;
  return t;
}

}  // namespace

TEST(Schedule, StepDecay) {
  const TrainConfig t;
  EXPECT_DOUBLE_EQ(lr_at(t, 0), 1e-3);
  EXPECT_DOUBLE_EQ(lr_at(t, 49), 1e-3);
  EXPECT_NEAR(lr_at(t, 50), 1e-4, 1e-18);
  EXPECT_NEAR(lr_at(t, 100), 1e-5, 1e-19);
}

TEST(Loss, L1Values) {
  const SaliencyMap a{{0.1, 0.5, 0.9}}, b{{0.2, 0.6, 1.0}};
  EXPECT_EQ(loss_l1(a, a), 0.0);
  EXPECT_NEAR(loss_l1(a, b), 0.1, 1e-15);
  EXPECT_EQ(loss_l1(a, b), loss_l1(b, a));
  try {
    loss_l1(a, SaliencyMap{{0.0}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::LengthMismatch);
  }
}

TEST(Loss, L1GradientIsSignOverCount) {
  nn::Var pred(nn::Matrix(4, 1, std::vector<double>{0.5, 0.1, 0.9, 0.3}), true);
  const nn::Matrix target(4, 1, std::vector<double>{0.2, 0.4, 0.8, 0.7});
  nn::l1_loss(pred, target).backward();
  EXPECT_EQ(pred.grad().data, (std::vector<double>{0.25, -0.25, 0.25, -0.25}));
}

TEST(Optimizer, ZeroGradientOnlyDecays) {
  nn::ParameterSet params;
  nn::Var p = params.add("p", nn::Matrix(1, 3, std::vector<double>{1.0, -2.0, 0.5}));
  params.zero_grad();
  nn::AdamW opt({0.9, 0.999, 1e-8, 0.01});
  opt.step(params, 1e-3);
  EXPECT_NEAR(p.value()(0, 0), 1.0 * (1 - 1e-5), 1e-15);
  EXPECT_NEAR(p.value()(0, 1), -2.0 * (1 - 1e-5), 1e-15);
  EXPECT_NEAR(p.value()(0, 2), 0.5 * (1 - 1e-5), 1e-15);
}

TEST(Split, DisjointAndComplete) {
  const DatasetSplit s = split_dataset(10, 3, 0.2);
  EXPECT_EQ(s.train.size(), 8u);
  EXPECT_EQ(s.test.size(), 2u);
  std::set<int> all(s.train.begin(), s.train.end());
  all.insert(s.test.begin(), s.test.end());
  EXPECT_EQ(all.size(), 10u);
  const DatasetSplit again = split_dataset(10, 3, 0.2);
  EXPECT_EQ(again.test, s.test);
  EXPECT_EQ(split_dataset(1, 3, 0.5).train.size(), 1u);
}

TEST(Sample, LengthMismatchNamesMesh) {
  auto mesh = std::make_shared<const TriMesh>(make_grid({2, 2, 0.0, 0.0, 1}));
  try {
    make_sample("bunny", mesh, SaliencyMap{{1.0, 2.0}}, small_model());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::LengthMismatch);
    EXPECT_NE(std::string(e.what()).find("bunny"), std::string::npos);
  }
}

TEST(Train, FixedSeedReproducesLossCurve) {
  const ModelConfig cfg = small_model();
  auto run = [&] {
    MeshMambaModel model(cfg);
    auto data = small_dataset(cfg);
    std::vector<TrainSample> eval;
    return train_loop(model, data, eval, short_run());
  };
  const TrainResult a = run(), b = run();
  ASSERT_EQ(a.history.size(), 3u);
  for (std::size_t e = 0; e < 3; ++e) {
    EXPECT_EQ(a.history[e].train_l1, b.history[e].train_l1);
    EXPECT_EQ(a.history[e].eval.cc, b.history[e].eval.cc);
  }
}

TEST(Train, LossDecreasesOnTinySet) {
  const ModelConfig cfg = small_model();
  MeshMambaModel model(cfg);
  auto data = small_dataset(cfg);
  std::vector<TrainSample> eval;
  TrainConfig t = short_run();
  t.epochs = 40;
  t.lr = 3e-3;
  const TrainResult r = train_loop(model, data, eval, t);
  EXPECT_LT(r.history.back().train_l1, r.history.front().train_l1);
}

TEST(Train, WritesLogAndCheckpoint) {
  const auto dir = testkit::scratch_dir("train_outputs");
  const ModelConfig cfg = small_model();
  MeshMambaModel model(cfg);
  auto data = small_dataset(cfg);
  std::vector<TrainSample> eval;
  const TrainResult r = train_loop(model, data, eval, short_run(), {dir / "best.ckpt", dir / "log.csv"});
  std::ifstream log(dir / "log.csv");
  std::string line;
  int lines = 0;
  std::getline(log, line);
  EXPECT_EQ(line, "epoch,lr,train_l1,val_cc,val_sim,val_kld,val_se");
  while (std::getline(log, line)) ++lines;
  EXPECT_EQ(lines, 3);
  const LoadedCheckpoint ck = load_checkpoint(dir / "best.ckpt");
  EXPECT_EQ(ck.state.epoch, r.best_epoch);
  EXPECT_EQ(TrainConfig::from_json(ck.state.train_json).to_json(), short_run().to_json());
}

TEST(Train, DivergenceStopsCleanly) {
  testkit::QuietWarnings quiet;
  const ModelConfig cfg = small_model();
  MeshMambaModel model(cfg);
  auto data = small_dataset(cfg);
  data[0].target.values[0] = std::nan("");
  data[1].target.values[0] = std::nan("");
  std::vector<TrainSample> eval;
  const TrainResult r = train_loop(model, data, eval, short_run());
  EXPECT_TRUE(r.diverged);
  EXPECT_NE(r.divergence.find("non-finite"), std::string::npos);
  EXPECT_TRUE(r.history.empty());
}

TEST(Train, InvalidConfigRejected) {
  TrainConfig t;
  t.lr = 0.0;
  EXPECT_THROW(t.validate(), Error);
  t = TrainConfig();
  t.test_fraction = 1.0;
  EXPECT_THROW(t.validate(), Error);
}
