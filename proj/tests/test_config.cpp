#include <fstream>

#include <gtest/gtest.h>

#include "meshmamba/config.hpp"
#include "meshmamba/error.hpp"
#include "test_util.hpp"

using namespace meshmamba;

namespace {

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorKind::Io;
}

}  // namespace

TEST(Config, ParsesSectionsAndComments) {
  const ConfigFile file = parse_config(
      "# leading comment\n"
      "[model]\n"
      "patches = 64 \n"
      "; another comment\n"
      "  # indented comment\n"
      "input_mode = texture\n"
      "[train]\n"
      "lr=0.002\n");
  EXPECT_EQ(file.get("model", "patches"), "64");
  EXPECT_EQ(file.get("model", "input_mode"), "texture");
  EXPECT_EQ(file.get("train", "lr"), "0.002");
  EXPECT_FALSE(file.get("train", "epochs").has_value());
  EXPECT_FALSE(file.get("gaze", "rays").has_value());
}

TEST(Config, AppliesEverySection) {
  const ConfigFile file = parse_config(
      "[gaze]\nrays = 16\nsigma_deg = 0.25\n"
      "[model]\npatches = 64\nsubgraph_mode = knn\nseed_rule = farthest\nssm_backward = false\nseed = 12\n"
      "[train]\nepochs = 7\nweight_decay = 0.05\nresample_subgraphs = off\n"
      "[simplify]\ntarget_faces = 500\nlambda = 2.5\n");
  GroundTruthParams gaze;
  ModelConfig model;
  TrainConfig train;
  SimplifyOptions simplify;
  apply_gaze_section(file, gaze);
  apply_model_section(file, model);
  apply_train_section(file, train);
  apply_simplify_section(file, simplify);
  EXPECT_EQ(gaze.cone.ray_count, 16);
  EXPECT_EQ(gaze.cone.sigma_deg, 0.25);
  EXPECT_EQ(model.patches, 64);
  EXPECT_EQ(model.subgraph_mode, SubgraphMode::Knn);
  EXPECT_EQ(model.seed_rule, SeedRule::FarthestFromCentroid);
  EXPECT_FALSE(model.use_ssm_backward);
  EXPECT_EQ(model.seed, 12u);
  EXPECT_EQ(model.patch_length, ModelConfig().patch_length);
  EXPECT_EQ(train.epochs, 7);
  EXPECT_EQ(train.optimizer.weight_decay, 0.05);
  EXPECT_FALSE(train.resample_subgraphs);
  EXPECT_EQ(simplify.target_faces, 500);
  EXPECT_EQ(simplify.lambda, 2.5);
}

TEST(Config, UnknownKeyNamed) {
  ModelConfig model;
  try {
    apply_model_section(parse_config("[model]\npatchez = 3\n"), model);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Config);
    EXPECT_NE(std::string(e.what()).find("patchez"), std::string::npos);
  }
}

TEST(Config, BadValuesRejected) {
  ModelConfig model;
  TrainConfig train;
  EXPECT_EQ(kind_of([&] { apply_model_section(parse_config("[model]\npatches = 6x\n"), model); }),
            ErrorKind::Config);
  EXPECT_EQ(kind_of([&] { apply_model_section(parse_config("[model]\ninput_mode = voxels\n"), model); }),
            ErrorKind::Config);
  EXPECT_EQ(kind_of([&] { apply_train_section(parse_config("[train]\nresample_subgraphs = maybe\n"), train); }),
            ErrorKind::Config);
  EXPECT_EQ(kind_of([&] { apply_train_section(parse_config("[train]\nlr = \n"), train); }), ErrorKind::Config);
}

TEST(Config, MalformedFile) {
  EXPECT_EQ(kind_of([] { parse_config("[model\npatches = 3\n"); }), ErrorKind::Config);
  EXPECT_EQ(kind_of([] { parse_config("patches = 3\n"); }), ErrorKind::Config);
  EXPECT_EQ(kind_of([] { read_config("/nonexistent/meshmamba.ini"); }), ErrorKind::Io);
}

TEST(Config, ReadsFromDisk) {
  const auto dir = testkit::scratch_dir("config");
  std::ofstream(dir / "run.ini") << "[simplify]\nlambda = 0\n";
  SimplifyOptions o;
  apply_simplify_section(read_config(dir / "run.ini"), o);
  EXPECT_EQ(o.lambda, 0.0);
}
