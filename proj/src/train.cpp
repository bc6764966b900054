#include "meshmamba/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "meshmamba/checkpoint.hpp"
#include "meshmamba/error.hpp"

namespace meshmamba {

void TrainConfig::validate() const {
  if (!(lr > 0.0)) throw Error(ErrorKind::Config, "learning rate must be positive");
  if (epochs < 1) throw Error(ErrorKind::Config, "epochs must be at least 1");
  if (decay_every < 1) throw Error(ErrorKind::Config, "decay interval must be at least 1");
  if (loop < 1 || batch < 1) throw Error(ErrorKind::Config, "loop and batch must be at least 1");
  if (test_fraction < 0.0 || test_fraction >= 1.0) throw Error(ErrorKind::Config, "test fraction must be in [0, 1)");
}

std::string TrainConfig::to_json() const {
  nlohmann::ordered_json j;
  j["lr"] = lr;
  j["decay"] = decay;
  j["decay_every"] = decay_every;
  j["epochs"] = epochs;
  j["loop"] = loop;
  j["batch"] = batch;
  j["beta1"] = optimizer.beta1;
  j["beta2"] = optimizer.beta2;
  j["eps"] = optimizer.eps;
  j["weight_decay"] = optimizer.weight_decay;
  j["seed"] = seed;
  j["resample_subgraphs"] = resample_subgraphs;
  j["test_fraction"] = test_fraction;
  return j.dump();
}

TrainConfig TrainConfig::from_json(const std::string& text) {
  TrainConfig c;
  try {
    const auto j = nlohmann::json::parse(text);
    auto opt = [&](const char* key, auto& out) {
      if (j.contains(key)) out = j.at(key).get<std::decay_t<decltype(out)>>();
    };
    opt("lr", c.lr);
    opt("decay", c.decay);
    opt("decay_every", c.decay_every);
    opt("epochs", c.epochs);
    opt("loop", c.loop);
    opt("batch", c.batch);
    opt("beta1", c.optimizer.beta1);
    opt("beta2", c.optimizer.beta2);
    opt("eps", c.optimizer.eps);
    opt("weight_decay", c.optimizer.weight_decay);
    opt("seed", c.seed);
    opt("resample_subgraphs", c.resample_subgraphs);
    opt("test_fraction", c.test_fraction);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Config, std::string("bad training config: ") + e.what());
  }
  return c;
}

double lr_at(const TrainConfig& config, int epoch) {
  return config.lr * std::pow(config.decay, epoch / config.decay_every);
}

double loss_l1(const SaliencyMap& pred, const SaliencyMap& gt) {
  if (pred.face_count() != gt.face_count()) {
    throw Error(ErrorKind::LengthMismatch, "prediction has " + std::to_string(pred.face_count()) +
                                               " faces, ground truth " + std::to_string(gt.face_count()));
  }
  if (pred.face_count() == 0) return 0.0;
  double s = 0.0;
  for (std::size_t i = 0; i < pred.face_count(); ++i) s += std::abs(pred.values[i] - gt.values[i]);
  return s / static_cast<double>(pred.face_count());
}

TrainSample make_sample(std::string name, std::shared_ptr<const TriMesh> mesh, const SaliencyMap& gt,
                        const ModelConfig& config) {
  if (gt.face_count() != mesh->faces().size()) {
    throw Error(ErrorKind::LengthMismatch, name + ": ground truth has " + std::to_string(gt.face_count()) +
                                               " values for " + std::to_string(mesh->faces().size()) + " faces");
  }
  TrainSample s;
  s.name = std::move(name);
  s.inputs = prepare_inputs(std::move(mesh), config, config.seed);
  s.target = gt.max_normalized();
  return s;
}

DatasetSplit split_dataset(std::size_t count, std::uint64_t seed, double test_fraction) {
  std::vector<int> order(count);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(mix_seed(seed, 0x73706c6974ULL));
  for (std::size_t i = count; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
  std::size_t test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(count)));
  if (count >= 1 && test >= count) test = count - 1;
  DatasetSplit split;
  split.train.assign(order.begin(), order.end() - static_cast<std::ptrdiff_t>(test));
  split.test.assign(order.end() - static_cast<std::ptrdiff_t>(test), order.end());
  return split;
}

MetricRow evaluate_model(const MeshMambaModel& model, std::vector<TrainSample>& samples) {
  MetricRow mean;
  if (samples.empty()) return mean;
  for (TrainSample& s : samples) {
    resample_subgraphs(s.inputs, model.config(), model.config().seed);
    const MetricRow row = evaluate(model.predict(s.inputs), s.target);
    mean.cc += row.cc;
    mean.sim += row.sim;
    mean.kld += row.kld;
    mean.se += row.se;
  }
  const double n = static_cast<double>(samples.size());
  mean.cc /= n;
  mean.sim /= n;
  mean.kld /= n;
  mean.se /= n;
  return mean;
}

namespace {

std::string engine_state(const Rng& rng) {
  std::ostringstream os;
  os << rng.engine();
  return os.str();
}

void write_log_line(std::ofstream& log, const EpochRecord& r) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%d,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g\n", r.epoch, r.lr, r.train_l1, r.eval.cc,
                r.eval.sim, r.eval.kld, r.eval.se);
  log << buf;
  log.flush();
}

}  // namespace

TrainResult train_loop(MeshMambaModel& model, std::vector<TrainSample>& train, std::vector<TrainSample>& eval,
                       const TrainConfig& config, const TrainOutputs& outputs) {
  config.validate();
  if (train.empty()) throw Error(ErrorKind::Config, "training needs at least one mesh with ground truth");
  std::vector<TrainSample>& eval_set = eval.empty() ? train : eval;

  std::ofstream log;
  if (!outputs.log.empty()) {
    log.open(outputs.log, std::ios::trunc);
    if (!log) throw Error(ErrorKind::Io, "cannot write " + outputs.log.string());
    log << "epoch,lr,train_l1,val_cc,val_sim,val_kld,val_se\n";
  }

  nn::ParameterSet& params = model.parameters();
  nn::AdamW optimizer(config.optimizer);
  Rng order_rng(mix_seed(config.seed, 0x6f72646572ULL));
  Rng jitter_rng(mix_seed(config.seed, 0x6a6974746572ULL));
  TrainResult result;
  result.best_cc = -std::numeric_limits<double>::infinity();
  std::uint64_t step = 0;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const double lr = lr_at(config, epoch);
    double loss_sum = 0.0;
    std::size_t loss_count = 0;
    try {
      for (int pass = 0; pass < config.loop; ++pass) {
        std::vector<int> order(train.size());
        std::iota(order.begin(), order.end(), 0);
        for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[order_rng.below(i)]);
        for (std::size_t first = 0; first < order.size(); first += config.batch) {
          const std::size_t last = std::min(order.size(), first + config.batch);
          params.zero_grad();
          for (std::size_t k = first; k < last; ++k) {
            TrainSample& s = train[order[k]];
            if (config.resample_subgraphs) {
              resample_subgraphs(s.inputs, model.config(), mix_seed(config.seed, step * 1024 + (k - first) + 1));
            }
            const nn::Var pred = model.forward_unclamped(s.inputs, &jitter_rng);
            nn::Var loss = nn::l1_loss(pred, nn::Matrix(s.inputs.faces, 1, s.target.values));
            const double value = loss.value().data[0];
            if (!std::isfinite(value)) {
              throw Error(ErrorKind::Numeric, "non-finite loss on " + s.name + " at epoch " + std::to_string(epoch));
            }
            loss_sum += value;
            ++loss_count;
            if (last - first > 1) loss = nn::scale(loss, 1.0 / static_cast<double>(last - first));
            loss.backward();
          }
          optimizer.step(params, lr);
          ++step;
        }
      }
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::Numeric) throw;
      result.diverged = true;
      result.divergence = e.what();
      warn("training diverged: " + result.divergence);
      break;
    }

    EpochRecord record;
    record.epoch = epoch;
    record.lr = lr;
    record.train_l1 = loss_sum / static_cast<double>(std::max<std::size_t>(loss_count, 1));
    record.eval = evaluate_model(model, eval_set);
    result.history.push_back(record);
    if (log.is_open()) write_log_line(log, record);

    if (std::isfinite(record.eval.cc) && record.eval.cc > result.best_cc) {
      result.best_cc = record.eval.cc;
      result.best_epoch = epoch;
      if (!outputs.checkpoint.empty()) {
        save_checkpoint(model, {epoch, engine_state(order_rng), config.to_json()}, outputs.checkpoint);
      }
    }
  }
  if (result.best_epoch < 0) result.best_cc = std::numeric_limits<double>::quiet_NaN();
  return result;
}

}  // namespace meshmamba
