#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "meshmamba/checkpoint.hpp"
#include "meshmamba/config.hpp"
#include "meshmamba/error.hpp"
#include "meshmamba/flops.hpp"
#include "meshmamba/gaze.hpp"
#include "meshmamba/geometry_features.hpp"
#include "meshmamba/metrics.hpp"
#include "meshmamba/model.hpp"
#include "meshmamba/parallel.hpp"
#include "meshmamba/saliency.hpp"
#include "meshmamba/simplify.hpp"
#include "meshmamba/subgraph.hpp"
#include "meshmamba/synthetic.hpp"
#include "meshmamba/texture.hpp"
#include "meshmamba/train.hpp"

namespace fs = std::filesystem;
using namespace meshmamba;
using nlohmann::ordered_json;

namespace {

constexpr const char* kVersion = "0.1.0";

struct Global {
  std::uint64_t seed = 0;
  unsigned threads = 0;
  std::string config;
};

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string hex(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

// Rounds to four decimals and never prints a negative zero.
std::string fixed4(double v) {
  if (!std::isfinite(v)) return "nan";
  double r = std::round(v * 1e4) / 1e4;
  if (r == 0.0) r = 0.0;
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f", r);
  return buf;
}

ConfigFile load_config(const Global& g) { return g.config.empty() ? ConfigFile{} : read_config(g.config); }

void write_manifest(const fs::path& path, const std::string& command, const Global& g, const std::string& config_json,
                    const std::vector<std::string>& inputs, const std::vector<std::string>& outputs) {
  ordered_json m;
  m["command"] = command;
  m["seed"] = g.seed;
  m["config_hash"] = hex(fnv1a(config_json));
  m["config"] = ordered_json::parse(config_json);
  m["versions"] = {{"meshmamba", kVersion},
                   {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                 std::to_string(EIGEN_MINOR_VERSION)},
                   {"libpng", png_version()},
                   {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                         std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                         std::to_string(NLOHMANN_JSON_VERSION_PATCH)}};
  m["inputs"] = inputs;
  m["outputs"] = outputs;
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  out << m.dump(2) << "\n";
}

fs::path manifest_for(const fs::path& output) {
  fs::path p = output;
  p += ".manifest.json";
  return p;
}

std::string gaze_json(const GroundTruthParams& p) {
  ordered_json j;
  j["velocity_threshold_deg_s"] = p.ivt.velocity_threshold_deg_s;
  j["min_fixation_s"] = p.ivt.min_duration_s;
  j["aperture_deg"] = p.cone.aperture_deg;
  j["sigma_deg"] = p.cone.sigma_deg;
  j["rays"] = p.cone.ray_count;
  j["bvh_leaf_size"] = p.bvh_leaf_size;
  return j.dump();
}

std::shared_ptr<const TriMesh> read_mesh(const std::string& path) {
  return std::make_shared<const TriMesh>(load_mesh(path));
}

// --- gen-gt ---------------------------------------------------------------

struct GenGtArgs {
  std::string mesh;
  std::vector<std::string> gaze;
  std::string out;
  std::string raw_out;
  double aperture = -1.0;
  double sigma = -1.0;
  int rays = -1;
};

int run_gen_gt(const Global& g, const GenGtArgs& a) {
  GroundTruthParams params;
  apply_gaze_section(load_config(g), params);
  if (a.aperture > 0.0) params.cone.aperture_deg = a.aperture;
  if (a.sigma > 0.0) params.cone.sigma_deg = a.sigma;
  if (a.rays > 0) params.cone.ray_count = a.rays;

  const TriMesh mesh = load_mesh(a.mesh);
  std::vector<GazeSession> sessions;
  for (const std::string& path : a.gaze) sessions.push_back(read_gaze_csv(path));
  const GroundTruth gt = build_saliency_map(mesh, sessions, params);

  const Header header{{"kind", "ground_truth"},
                      {"normalization", "sum"},
                      {"fixations", std::to_string(gt.fixations)},
                      {"fixations_hit", std::to_string(gt.fixations_hit)}};
  write_saliency(gt.normalized, header, a.out);
  std::vector<std::string> outputs{a.out};
  if (!a.raw_out.empty()) {
    write_saliency(gt.raw, {{"kind", "ground_truth"}, {"normalization", "none"}}, a.raw_out);
    outputs.push_back(a.raw_out);
  }
  std::vector<std::string> inputs{a.mesh};
  inputs.insert(inputs.end(), a.gaze.begin(), a.gaze.end());
  write_manifest(manifest_for(a.out), "gen-gt", g, gaze_json(params), inputs, outputs);
  std::cout << "faces=" << mesh.face_count() << " fixations=" << gt.fixations << " hit=" << gt.fixations_hit
            << "\n";
  return 0;
}

// --- features -------------------------------------------------------------

struct FeaturesArgs {
  std::string mesh;
  std::string out;
  std::string texture_out;
  std::string subgraphs_out;
  std::string cache;
  int latent_dim = 8;
  int density = 8;
  std::string pool = "mean";
  std::string encoder = "conv";
  int patches = 16;
  int length = 8;
};

int run_features(const Global& g, const FeaturesArgs& a) {
  const TriMesh mesh = load_mesh(a.mesh);
  const std::vector<GeoFeature> geo = geometry_features(mesh);
  FeatureMatrix fm;
  fm.rows = static_cast<int>(geo.size());
  fm.cols = kGeoFeatureDim;
  fm.layout = {{"spatial", 3}, {"curve", 3}, {"angles_deg", 3}, {"lengths", 3}, {"area", 1}, {"irregularity", 1}};
  for (const GeoFeature& f : geo) {
    const auto row = flatten(f);
    fm.data.insert(fm.data.end(), row.begin(), row.end());
  }
  write_feature_matrix(fm, a.out);
  std::vector<std::string> outputs{a.out};
  ordered_json cfg;
  cfg["geometry"] = "spatial,curve,shape";

  if (!a.texture_out.empty()) {
    if (!mesh.has_uvs() || !mesh.has_texture()) throw Error(ErrorKind::TextureAbsent, "mesh has no texture to encode");
    EncoderConfig enc;
    enc.kind = a.encoder == "identity" ? EncoderKind::Identity : EncoderKind::Conv;
    enc.dim = a.latent_dim;
    enc.seed = g.seed;
    const TextureImage& image = *mesh.texture();
    std::optional<LatentCodeMap> codes;
    if (!a.cache.empty()) codes = load_latent_cache(a.cache, texture_hash(image), enc.hash());
    if (!codes) {
      codes = encode_texture(image, enc);
      if (!a.cache.empty()) save_latent_cache(*codes, texture_hash(image), enc.hash(), a.cache);
    }
    const PoolMode mode = a.pool == "max" ? PoolMode::Max : PoolMode::Mean;
    FeatureMatrix tm;
    tm.rows = static_cast<int>(mesh.face_count());
    tm.cols = codes->dim;
    tm.layout = {{"texture_" + a.pool, codes->dim}};
    for (int f = 0; f < tm.rows; ++f) {
      const auto pooled = pool_face_feature(face_feature_grid(mesh, *codes, f, a.density), mode);
      tm.data.insert(tm.data.end(), pooled.begin(), pooled.end());
    }
    write_feature_matrix(tm, a.texture_out);
    outputs.push_back(a.texture_out);
    cfg["encoder"] = a.encoder;
    cfg["latent_dim"] = a.latent_dim;
    cfg["density"] = a.density;
    cfg["pool"] = a.pool;
  }
  if (!a.subgraphs_out.empty()) {
    std::vector<Vec3> centers;
    for (const GeoFeature& f : geo) centers.push_back(f.center);
    const std::vector<int> seeds = fps_centers(centers, a.patches);
    write_subgraphs(sample_subgraphs(mesh, centers, seeds, a.length, g.seed), a.subgraphs_out);
    outputs.push_back(a.subgraphs_out);
    cfg["patches"] = a.patches;
    cfg["length"] = a.length;
  }
  write_manifest(manifest_for(a.out), "features", g, cfg.dump(), {a.mesh}, outputs);
  std::cout << "faces=" << fm.rows << " geometry_cols=" << fm.cols << "\n";
  return 0;
}

// --- model / training options shared by train and ablate ----------------

struct ModelArgs {
  std::string mode;
  int patches = -1;
  int length = -1;
  int token_dim = -1;
  int state_dim = -1;
  int blocks = -1;
  int width = -1;
};

struct TrainArgs {
  int epochs = -1;
  double lr = -1.0;
  int loop = -1;
};

void add_model_options(CLI::App* cmd, ModelArgs& m) {
  cmd->add_option("--mode", m.mode, "input mode: geometry, color or texture")
      ->check(CLI::IsMember({"geometry", "color", "texture"}));
  cmd->add_option("--patches", m.patches, "subgraph count L");
  cmd->add_option("--length", m.length, "subgraph length M");
  cmd->add_option("--token-dim", m.token_dim, "token width");
  cmd->add_option("--state-dim", m.state_dim, "SSM state size per channel");
  cmd->add_option("--blocks", m.blocks, "Mamba block count");
  cmd->add_option("--width", m.width, "graph-conv width");
}

void add_train_options(CLI::App* cmd, TrainArgs& t) {
  cmd->add_option("--epochs", t.epochs, "training epochs");
  cmd->add_option("--lr", t.lr, "initial learning rate");
  cmd->add_option("--loop", t.loop, "passes over the training set per epoch");
}

ModelConfig model_config(const Global& g, const ConfigFile& file, const ModelArgs& m) {
  ModelConfig c;
  c.seed = g.seed;
  apply_model_section(file, c);
  if (m.mode == "geometry") c.input_mode = InputMode::Geometry;
  if (m.mode == "color") c.input_mode = InputMode::Color;
  if (m.mode == "texture") c.input_mode = InputMode::Texture;
  if (m.patches > 0) c.patches = m.patches;
  if (m.length > 0) c.patch_length = m.length;
  if (m.token_dim > 0) c.token_dim = m.token_dim;
  if (m.state_dim > 0) c.state_dim = m.state_dim;
  if (m.blocks > 0) c.blocks = m.blocks;
  if (m.width > 0) c.graph_conv.width = m.width;
  return c;
}

TrainConfig train_config(const Global& g, const ConfigFile& file, const TrainArgs& t) {
  TrainConfig c;
  c.seed = g.seed;
  apply_train_section(file, c);
  if (t.epochs > 0) c.epochs = t.epochs;
  if (t.lr > 0.0) c.lr = t.lr;
  if (t.loop > 0) c.loop = t.loop;
  c.validate();
  return c;
}

struct Dataset {
  std::vector<std::string> meshes;
  std::vector<std::string> gts;
};

struct LoadedData {
  std::vector<std::shared_ptr<const TriMesh>> meshes;
  std::vector<SaliencyMap> gts;
  DatasetSplit split;
};

LoadedData load_dataset(const Dataset& d, const TrainConfig& tc) {
  if (d.meshes.size() != d.gts.size()) {
    throw Error(ErrorKind::Config, "--mesh and --gt must be given the same number of times");
  }
  LoadedData out;
  for (std::size_t i = 0; i < d.meshes.size(); ++i) {
    out.meshes.push_back(read_mesh(d.meshes[i]));
    out.gts.push_back(read_saliency(d.gts[i]));
  }
  out.split = split_dataset(d.meshes.size(), tc.seed, tc.test_fraction);
  return out;
}

void build_samples(const LoadedData& data, const Dataset& d, const ModelConfig& mc, std::vector<TrainSample>& train,
                   std::vector<TrainSample>& test) {
  for (int i : data.split.train) train.push_back(make_sample(d.meshes[i], data.meshes[i], data.gts[i], mc));
  for (int i : data.split.test) test.push_back(make_sample(d.meshes[i], data.meshes[i], data.gts[i], mc));
}

std::string metric_line(const MetricRow& r) {
  return "CC=" + fixed4(r.cc) + " SIM=" + fixed4(r.sim) + " KLD=" + fixed4(r.kld) + " SE=" + fixed4(r.se);
}

// --- train ----------------------------------------------------------------

int run_train(const Global& g, const Dataset& d, const ModelArgs& ma, const TrainArgs& ta, const std::string& out_dir) {
  const ConfigFile file = load_config(g);
  const ModelConfig mc = model_config(g, file, ma);
  const TrainConfig tc = train_config(g, file, ta);
  const LoadedData data = load_dataset(d, tc);
  std::vector<TrainSample> train, test;
  build_samples(data, d, mc, train, test);

  fs::create_directories(out_dir);
  const fs::path dir(out_dir);
  {
    std::ofstream split(dir / "split.txt", std::ios::trunc);
    for (int i : data.split.train) split << "train " << d.meshes[i] << "\n";
    for (int i : data.split.test) split << "test " << d.meshes[i] << "\n";
  }
  MeshMambaModel model(mc);
  const TrainResult result = train_loop(model, train, test, tc, {dir / "best.ckpt", dir / "train_log.csv"});
  save_checkpoint(model, {tc.epochs, "", tc.to_json()}, dir / "final.ckpt");

  ordered_json cfg;
  cfg["model"] = ordered_json::parse(mc.to_json());
  cfg["train"] = ordered_json::parse(tc.to_json());
  std::vector<std::string> inputs = d.meshes;
  inputs.insert(inputs.end(), d.gts.begin(), d.gts.end());
  write_manifest(dir / "manifest.json", "train", g, cfg.dump(), inputs,
                 {(dir / "best.ckpt").string(), (dir / "final.ckpt").string(), (dir / "train_log.csv").string(),
                  (dir / "split.txt").string()});
  if (result.diverged) throw Error(ErrorKind::Numeric, "training diverged: " + result.divergence);
  const EpochRecord& last = result.history.back();
  std::cout << "epochs=" << result.history.size() << " best_epoch=" << result.best_epoch
            << " train_l1=" << fixed4(last.train_l1) << " " << metric_line(last.eval) << "\n";
  return 0;
}

// --- predict --------------------------------------------------------------

int run_predict(const Global& g, const std::string& ckpt, const std::string& mesh_path, const std::string& out) {
  LoadedCheckpoint loaded = load_checkpoint(ckpt);
  const MeshMambaModel& model = *loaded.model;
  const MeshInputs inputs = prepare_inputs(read_mesh(mesh_path), model.config(), model.config().seed);
  const SaliencyMap pred = model.predict(inputs);
  write_saliency(pred, {{"kind", "prediction"}, {"normalization", "none"}}, out);
  write_manifest(manifest_for(out), "predict", g, model.config().to_json(), {ckpt, mesh_path}, {out});
  std::cout << "faces=" << pred.face_count() << "\n";
  return 0;
}

// --- eval -----------------------------------------------------------------

int run_eval(const Global& g, const std::string& pred_path, const std::string& gt_path, const std::string& csv) {
  const SaliencyMap pred = read_saliency(pred_path);
  const SaliencyMap gt = read_saliency(gt_path);
  const MetricRow row = evaluate(pred, gt);
  std::cout << metric_line(row) << "\n";
  if (!csv.empty()) {
    std::ofstream out(csv, std::ios::trunc);
    if (!out) throw Error(ErrorKind::Io, "cannot write " + csv);
    out << "cc,sim,kld,se\n" << fixed4(row.cc) << "," << fixed4(row.sim) << "," << fixed4(row.kld) << ","
        << fixed4(row.se) << "\n";
    write_manifest(manifest_for(csv), "eval", g, "{}", {pred_path, gt_path}, {csv});
  }
  return 0;
}

// --- simplify -------------------------------------------------------------

struct SimplifyArgs {
  std::string in;
  std::string out;
  std::string saliency;
  int target = -1;
  double lambda = -1.0;
  std::string map_out;
  std::string log_out;
};

int run_simplify(const Global& g, const SimplifyArgs& a) {
  SimplifyOptions opt;
  apply_simplify_section(load_config(g), opt);
  if (a.target >= 0) opt.target_faces = a.target;
  if (a.lambda >= 0.0) opt.lambda = a.lambda;
  const TriMesh mesh = load_mesh(a.in);
  SaliencyMap sal;
  if (a.saliency.empty()) {
    sal.values.assign(mesh.face_count(), 0.0);
  } else {
    sal = read_saliency(a.saliency).max_normalized();
  }
  const SimplifyResult r = simplify_to(mesh, sal, opt);
  write_obj(r.mesh, a.out);
  std::vector<std::string> outputs{a.out};
  if (!a.map_out.empty()) {
    std::ofstream out(a.map_out, std::ios::trunc);
    out << "# new_face original_face\n";
    for (std::size_t f = 0; f < r.face_origin.size(); ++f) out << f << " " << r.face_origin[f] << "\n";
    outputs.push_back(a.map_out);
  }
  if (!a.log_out.empty()) {
    std::ofstream out(a.log_out, std::ios::trunc);
    out << "step,kept,removed,x,y,z,cost,faces_after\n";
    char buf[256];
    for (std::size_t i = 0; i < r.collapses.size(); ++i) {
      const CollapseRecord& c = r.collapses[i];
      std::snprintf(buf, sizeof buf, "%zu,%d,%d,%.17g,%.17g,%.17g,%.17g,%d\n", i, c.kept, c.removed,
                    c.position.x(), c.position.y(), c.position.z(), c.cost, c.faces_after);
      out << buf;
    }
    outputs.push_back(a.log_out);
  }
  ordered_json cfg;
  cfg["target_faces"] = opt.target_faces;
  cfg["lambda"] = opt.lambda;
  cfg["fold_threshold_deg"] = opt.fold_threshold_deg;
  std::vector<std::string> inputs{a.in};
  if (!a.saliency.empty()) inputs.push_back(a.saliency);
  write_manifest(manifest_for(a.out), "simplify", g, cfg.dump(), inputs, outputs);
  std::cout << "faces_in=" << mesh.face_count() << " faces_out=" << r.mesh.face_count()
            << " collapses=" << r.collapses.size() << (r.locked ? " locked" : "") << "\n";
  return 0;
}

// --- flops ----------------------------------------------------------------

int run_flops(const Global& g, const std::vector<int>& Ls, const std::vector<int>& Ms, const std::string& mesh_path,
              const ModelArgs& ma, const std::string& out) {
  const ModelConfig base = model_config(g, load_config(g), ma);
  const std::shared_ptr<const TriMesh> mesh =
      mesh_path.empty() ? std::make_shared<const TriMesh>(make_icosphere(4)) : read_mesh(mesh_path);
  const std::vector<FlopPoint> points = measure_flops(mesh, base, Ls, Ms);

  std::ostringstream csv;
  csv << "L,M,flops\n";
  for (const FlopPoint& p : points) csv << p.patches << "," << p.length << "," << p.flops << "\n";
  std::ostringstream fits;
  auto fit_axis = [&](bool along_l) {
    const auto& fixed = along_l ? Ms : Ls;
    for (int k : fixed) {
      std::vector<double> x, y;
      for (const FlopPoint& p : points) {
        if ((along_l ? p.length : p.patches) != k) continue;
        x.push_back(along_l ? p.patches : p.length);
        y.push_back(static_cast<double>(p.flops));
      }
      if (x.size() < 2) continue;
      const LinearFit f = fit_line(x, y);
      char buf[200];
      std::snprintf(buf, sizeof buf, "# fit axis=%s %s=%d slope=%.6g intercept=%.6g r2=%.6f\n", along_l ? "L" : "M",
                    along_l ? "M" : "L", k, f.slope, f.intercept, f.r2);
      fits << buf;
    }
  };
  fit_axis(true);
  fit_axis(false);
  std::cout << csv.str() << fits.str();
  if (!out.empty()) {
    std::ofstream file(out, std::ios::trunc);
    if (!file) throw Error(ErrorKind::Io, "cannot write " + out);
    file << csv.str();
    write_manifest(manifest_for(out), "flops", g, base.to_json(), mesh_path.empty() ? std::vector<std::string>{}
                                                                                     : std::vector<std::string>{mesh_path},
                   {out});
  }
  return 0;
}

// --- ablate ---------------------------------------------------------------

int run_ablate(const Global& g, const Dataset& d, const ModelArgs& ma, const TrainArgs& ta,
               const std::vector<std::string>& off, bool all, const std::string& out) {
  const ConfigFile file = load_config(g);
  const ModelConfig base = model_config(g, file, ma);
  const TrainConfig tc = train_config(g, file, ta);
  const LoadedData data = load_dataset(d, tc);

  std::vector<std::pair<std::string, std::vector<std::string>>> variants;
  if (all) {
    variants.push_back({"full", {}});
    for (const std::string& name : ablation_names()) variants.push_back({"w/o " + name, {name}});
  } else if (off.empty()) {
    variants.push_back({"full", {}});
  } else {
    std::string label = "w/o";
    for (const std::string& name : off) label += " " + name;
    variants.push_back({label, off});
  }

  std::ostringstream csv;
  csv << "variant,cc,sim,kld,se\n";
  for (const auto& [label, names] : variants) {
    ModelConfig mc = base;
    for (const std::string& name : names) apply_ablation(mc, name);
    std::vector<TrainSample> train, test;
    build_samples(data, d, mc, train, test);
    MeshMambaModel model(mc);
    train_loop(model, train, test, tc);
    const MetricRow row = evaluate_model(model, test.empty() ? train : test);
    csv << label << "," << fixed4(row.cc) << "," << fixed4(row.sim) << "," << fixed4(row.kld) << ","
        << fixed4(row.se) << "\n";
    std::cerr << label << ": " << metric_line(row) << "\n";
  }
  std::cout << csv.str();
  if (!out.empty()) {
    std::ofstream file(out, std::ios::trunc);
    if (!file) throw Error(ErrorKind::Io, "cannot write " + out);
    file << csv.str();
    ordered_json cfg;
    cfg["model"] = ordered_json::parse(base.to_json());
    cfg["train"] = ordered_json::parse(tc.to_json());
    std::vector<std::string> inputs = d.meshes;
    inputs.insert(inputs.end(), d.gts.begin(), d.gts.end());
    write_manifest(manifest_for(out), "ablate", g, cfg.dump(), inputs, {out});
  }
  return 0;
}

// --- synth ----------------------------------------------------------------

int run_synth(const Global& g, const std::string& out_dir, int cells, int sessions, int fixations) {
  fs::create_directories(out_dir);
  const fs::path dir(out_dir);
  auto texture = std::make_shared<TextureImage>(procedural_texture(64, 64, g.seed));
  texture->source = (dir / "demo_texture.png").string();
  save_png(*texture, texture->source);
  GridOptions opt;
  opt.nx = cells;
  opt.ny = cells;
  opt.jitter = 0.6;
  opt.amplitude = 0.15;
  opt.seed = g.seed;
  opt.texture = texture;
  const TriMesh mesh = make_grid(opt);
  write_obj(mesh, dir / "demo.obj");
  std::vector<std::string> outputs{(dir / "demo.obj").string(), texture->source};
  for (int s = 0; s < sessions; ++s) {
    const fs::path p = dir / ("gaze_" + std::to_string(s) + ".csv");
    write_gaze_csv(random_session(mesh, fixations, 1.5, mix_seed(g.seed, s), 15.0 * s), p);
    outputs.push_back(p.string());
  }
  ordered_json cfg;
  cfg["cells"] = cells;
  cfg["sessions"] = sessions;
  cfg["fixations"] = fixations;
  write_manifest(dir / "manifest.json", "synth", g, cfg.dump(), {}, outputs);
  std::cout << "faces=" << mesh.face_count() << " sessions=" << sessions << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mesh saliency: ground truth from gaze, prediction, evaluation and simplification"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  app.fallthrough();

  Global g;
  app.add_option("--seed", g.seed, "master seed");
  app.add_option("--threads", g.threads, "worker cap (0 = all cores)");
  app.add_option("--config", g.config, "INI config file with [gaze] [model] [train] [simplify] sections")
      ->check(CLI::ExistingFile);

  GenGtArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-gt", "gaze logs -> per-face ground-truth saliency");
  gen_cmd->add_option("--mesh", gen.mesh, "OBJ mesh")->required()->check(CLI::ExistingFile);
  gen_cmd->add_option("--gaze", gen.gaze, "gaze CSV (repeatable)")->required()->check(CLI::ExistingFile);
  gen_cmd->add_option("--out", gen.out, "output map (sum-normalized)")->required();
  gen_cmd->add_option("--raw-out", gen.raw_out, "optional unnormalized map");
  gen_cmd->add_option("--aperture", gen.aperture, "cone half-angle in degrees");
  gen_cmd->add_option("--sigma", gen.sigma, "angular falloff in degrees");
  gen_cmd->add_option("--rays", gen.rays, "rays per fixation cone");

  FeaturesArgs feat;
  auto* feat_cmd = app.add_subcommand("features", "dump geometric, texture and subgraph features");
  feat_cmd->add_option("--mesh", feat.mesh, "OBJ mesh")->required()->check(CLI::ExistingFile);
  feat_cmd->add_option("--out", feat.out, "geometric feature matrix")->required();
  feat_cmd->add_option("--texture-out", feat.texture_out, "pooled texture feature matrix");
  feat_cmd->add_option("--subgraphs", feat.subgraphs_out, "subgraph dump");
  feat_cmd->add_option("--cache", feat.cache, "latent code cache file");
  feat_cmd->add_option("--latent-dim", feat.latent_dim, "latent code width");
  feat_cmd->add_option("--density", feat.density, "samples per axis in each face window");
  feat_cmd->add_option("--pool", feat.pool, "mean or max")->check(CLI::IsMember({"mean", "max"}));
  feat_cmd->add_option("--encoder", feat.encoder, "conv or identity")->check(CLI::IsMember({"conv", "identity"}));
  feat_cmd->add_option("--patches", feat.patches, "subgraph count for the dump");
  feat_cmd->add_option("--length", feat.length, "subgraph length for the dump");

  Dataset train_data;
  ModelArgs train_model;
  TrainArgs train_args;
  std::string train_out;
  auto* train_cmd = app.add_subcommand("train", "fit the model to meshes with ground truth");
  train_cmd->add_option("--mesh", train_data.meshes, "OBJ mesh (repeatable)")->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--gt", train_data.gts, "ground truth per mesh (repeatable)")->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--out-dir", train_out, "checkpoint and log directory")->required();
  add_model_options(train_cmd, train_model);
  add_train_options(train_cmd, train_args);

  std::string pred_ckpt, pred_mesh, pred_out;
  auto* pred_cmd = app.add_subcommand("predict", "predict per-face saliency with a checkpoint");
  pred_cmd->add_option("--checkpoint", pred_ckpt, "model checkpoint")->required()->check(CLI::ExistingFile);
  pred_cmd->add_option("--mesh", pred_mesh, "OBJ mesh")->required()->check(CLI::ExistingFile);
  pred_cmd->add_option("--out", pred_out, "output map")->required();

  std::string eval_pred, eval_gt, eval_csv;
  auto* eval_cmd = app.add_subcommand("eval", "CC, SIM, KLD and SE of a prediction");
  eval_cmd->add_option("--pred", eval_pred, "predicted map")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--gt", eval_gt, "ground-truth map")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--csv", eval_csv, "also write the row as CSV");

  SimplifyArgs simp;
  auto* simp_cmd = app.add_subcommand("simplify", "saliency-weighted quadric edge collapse");
  simp_cmd->add_option("input", simp.in, "input OBJ")->required()->check(CLI::ExistingFile);
  simp_cmd->add_option("output", simp.out, "output OBJ")->required();
  simp_cmd->add_option("--target-faces", simp.target, "face budget");
  simp_cmd->add_option("--lambda", simp.lambda, "saliency weight (0 = plain QEM)");
  simp_cmd->add_option("--saliency", simp.saliency, "per-face saliency map")->check(CLI::ExistingFile);
  simp_cmd->add_option("--map", simp.map_out, "new-to-original face correspondence");
  simp_cmd->add_option("--log", simp.log_out, "collapse sequence CSV");

  std::vector<int> flops_l{64, 128, 256}, flops_m{16, 32, 64};
  std::string flops_mesh, flops_out;
  ModelArgs flops_model;
  auto* flops_cmd = app.add_subcommand("flops", "forward FLOPs over a grid of subgraph counts and lengths");
  flops_cmd->add_option("--L", flops_l, "subgraph counts")->delimiter(',');
  flops_cmd->add_option("--M", flops_m, "subgraph lengths")->delimiter(',');
  flops_cmd->add_option("--mesh", flops_mesh, "OBJ mesh (default: 5120-face sphere)")->check(CLI::ExistingFile);
  flops_cmd->add_option("--out", flops_out, "CSV output");
  add_model_options(flops_cmd, flops_model);

  Dataset abl_data;
  ModelArgs abl_model;
  TrainArgs abl_train;
  std::vector<std::string> abl_off;
  bool abl_all = false;
  std::string abl_out;
  auto* abl_cmd = app.add_subcommand("ablate", "train and evaluate with components switched off");
  abl_cmd->add_option("--mesh", abl_data.meshes, "OBJ mesh (repeatable)")->required()->check(CLI::ExistingFile);
  abl_cmd->add_option("--gt", abl_data.gts, "ground truth per mesh (repeatable)")->required()->check(CLI::ExistingFile);
  abl_cmd->add_option("--off", abl_off, "component to disable (repeatable)")->check(CLI::IsMember(ablation_names()));
  abl_cmd->add_flag("--all", abl_all, "full model plus every single-component ablation");
  abl_cmd->add_option("--out", abl_out, "CSV output");
  add_model_options(abl_cmd, abl_model);
  add_train_options(abl_cmd, abl_train);

  std::string synth_out;
  int synth_cells = 20, synth_sessions = 3, synth_fix = 40;
  auto* synth_cmd = app.add_subcommand("synth", "write a textured demo mesh and synthetic gaze logs");
  synth_cmd->add_option("--out-dir", synth_out, "output directory")->required();
  synth_cmd->add_option("--cells", synth_cells, "grid cells per side (faces = 2 * cells^2)");
  synth_cmd->add_option("--sessions", synth_sessions, "gaze logs to write");
  synth_cmd->add_option("--fixations", synth_fix, "fixations per log");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    set_thread_count(g.threads);
    if (gen_cmd->parsed()) return run_gen_gt(g, gen);
    if (feat_cmd->parsed()) return run_features(g, feat);
    if (train_cmd->parsed()) return run_train(g, train_data, train_model, train_args, train_out);
    if (pred_cmd->parsed()) return run_predict(g, pred_ckpt, pred_mesh, pred_out);
    if (eval_cmd->parsed()) return run_eval(g, eval_pred, eval_gt, eval_csv);
    if (simp_cmd->parsed()) return run_simplify(g, simp);
    if (flops_cmd->parsed()) return run_flops(g, flops_l, flops_m, flops_mesh, flops_model, flops_out);
    if (abl_cmd->parsed()) return run_ablate(g, abl_data, abl_model, abl_train, abl_off, abl_all, abl_out);
    if (synth_cmd->parsed()) return run_synth(g, synth_out, synth_cells, synth_sessions, synth_fix);
  } catch (const Error& e) {
    std::cerr << ordered_json{{"error", to_string(e.kind())}, {"message", e.what()}}.dump() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << ordered_json{{"error", "internal"}, {"message", e.what()}}.dump() << "\n";
    return 1;
  }
  return 2;
}
