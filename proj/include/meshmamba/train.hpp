#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "meshmamba/metrics.hpp"
#include "meshmamba/model.hpp"
#include "meshmamba/nn/parameters.hpp"

namespace meshmamba {

struct TrainConfig {
  double lr = 1e-3;
  double decay = 0.1;
  int decay_every = 50;
  int epochs = 150;
  int loop = 1;   // passes over the training set per epoch
  int batch = 1;  // meshes per optimizer step
  nn::AdamWConfig optimizer;
  std::uint64_t seed = 0;
  bool resample_subgraphs = true;
  double test_fraction = 0.2;

  void validate() const;
  std::string to_json() const;
  static TrainConfig from_json(const std::string& text);
};

// lr * decay^floor(epoch / decay_every)
double lr_at(const TrainConfig& config, int epoch);

// Mean absolute difference. Throws ErrorKind::LengthMismatch.
double loss_l1(const SaliencyMap& pred, const SaliencyMap& gt);

struct TrainSample {
  std::string name;
  MeshInputs inputs;
  SaliencyMap target;  // max-normalized ground truth
};

// Builds a sample; the target is the max-normalized map.
TrainSample make_sample(std::string name, std::shared_ptr<const TriMesh> mesh, const SaliencyMap& gt,
                        const ModelConfig& config);

struct DatasetSplit {
  std::vector<int> train;
  std::vector<int> test;
};

// Seeded shuffle, then the last round(test_fraction * n) items go to test.
// A single item is always kept for training.
DatasetSplit split_dataset(std::size_t count, std::uint64_t seed, double test_fraction = 0.2);

struct EpochRecord {
  int epoch = 0;
  double lr = 0.0;
  double train_l1 = 0.0;  // mean step loss over the epoch
  MetricRow eval;         // on the evaluation set with frozen subgraphs
};

struct TrainOutputs {
  std::filesystem::path checkpoint;  // best-by-CC, skipped when empty
  std::filesystem::path log;         // per-epoch CSV, skipped when empty
};

struct TrainResult {
  std::vector<EpochRecord> history;
  int best_epoch = -1;
  double best_cc = 0.0;
  bool diverged = false;
  std::string divergence;
};

// Evaluation uses subgraphs frozen under the model seed.
MetricRow evaluate_model(const MeshMambaModel& model, std::vector<TrainSample>& samples);

// Per epoch: `loop` shuffled passes, each sample a step (or `batch` samples
// per step with summed gradients in fixed order). Evaluates on `eval`
// (the training set when empty). Stops on a non-finite loss or gradient,
// leaving the last best checkpoint in place.
TrainResult train_loop(MeshMambaModel& model, std::vector<TrainSample>& train, std::vector<TrainSample>& eval,
                       const TrainConfig& config, const TrainOutputs& outputs = {});

}  // namespace meshmamba
