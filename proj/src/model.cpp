#include "meshmamba/model.hpp"

#include <algorithm>
#include <map>

#include <nlohmann/json.hpp>

#include "meshmamba/error.hpp"
#include "meshmamba/geometry_features.hpp"

namespace meshmamba {

namespace {

using nlohmann::ordered_json;

const char* mode_name(InputMode m) {
  switch (m) {
    case InputMode::Geometry: return "geometry";
    case InputMode::Color: return "color";
    case InputMode::Texture: return "texture";
  }
  return "geometry";
}

InputMode parse_mode(const std::string& s) {
  if (s == "geometry") return InputMode::Geometry;
  if (s == "color") return InputMode::Color;
  if (s == "texture") return InputMode::Texture;
  throw Error(ErrorKind::Config, "unknown input mode '" + s + "'");
}

template <typename T>
void read_opt(const ordered_json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

int ModelConfig::input_dim() const {
  int d = geometric_dim(features);
  if (input_mode == InputMode::Color) d += 3;
  if (input_mode == InputMode::Texture) d += texture_encoder == EncoderKind::Identity ? 3 : latent_dim;
  return d;
}

std::string ModelConfig::to_json() const {
  ordered_json j;
  j["input_mode"] = mode_name(input_mode);
  j["feature_spatial"] = features.spatial;
  j["feature_curve"] = features.curve;
  j["feature_shape"] = features.shape;
  j["texture_encoder"] = texture_encoder == EncoderKind::Identity ? "identity" : "conv";
  j["latent_dim"] = latent_dim;
  j["texture_density"] = texture_density;
  j["use_graph_conv"] = use_graph_conv;
  j["graph_conv_layers"] = graph_conv.layers;
  j["graph_conv_width"] = graph_conv.width;
  j["graph_conv_activation"] = graph_conv.activation == Activation::SiLU ? "silu" : "identity";
  j["graph_conv_neighbors"] = graph_conv.use_neighbors;
  j["patches"] = patches;
  j["patch_length"] = patch_length;
  j["subgraph_mode"] = subgraph_mode == SubgraphMode::Knn ? "knn" : "random_walk";
  j["seed_rule"] = seed_rule == SeedRule::FarthestFromCentroid ? "farthest" : "nearest";
  j["center_encoding"] = center_encoding;
  j["token_dim"] = token_dim;
  j["state_dim"] = state_dim;
  j["blocks"] = blocks;
  j["pseudo_neighbors"] = pseudo_neighbors;
  j["jitter"] = jitter;
  j["use_diffusion"] = use_diffusion;
  j["use_ssm_forward"] = use_ssm_forward;
  j["use_ssm_backward"] = use_ssm_backward;
  j["interpolation_eps"] = interpolation.eps;
  j["interpolation_power"] = interpolation.power;
  j["head_hidden"] = head_hidden;
  j["face_skip"] = face_skip;
  j["seed"] = seed;
  return j.dump();
}

ModelConfig ModelConfig::from_json(const std::string& text) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const std::exception& e) {
    throw Error(ErrorKind::Format, std::string("model config is not valid JSON: ") + e.what());
  }
  ModelConfig c;
  try {
    if (j.contains("input_mode")) c.input_mode = parse_mode(j.at("input_mode").get<std::string>());
    read_opt(j, "feature_spatial", c.features.spatial);
    read_opt(j, "feature_curve", c.features.curve);
    read_opt(j, "feature_shape", c.features.shape);
    if (j.contains("texture_encoder")) {
      c.texture_encoder = j.at("texture_encoder") == "identity" ? EncoderKind::Identity : EncoderKind::Conv;
    }
    read_opt(j, "latent_dim", c.latent_dim);
    read_opt(j, "texture_density", c.texture_density);
    read_opt(j, "use_graph_conv", c.use_graph_conv);
    read_opt(j, "graph_conv_layers", c.graph_conv.layers);
    read_opt(j, "graph_conv_width", c.graph_conv.width);
    if (j.contains("graph_conv_activation")) {
      c.graph_conv.activation = j.at("graph_conv_activation") == "identity" ? Activation::Identity : Activation::SiLU;
    }
    read_opt(j, "graph_conv_neighbors", c.graph_conv.use_neighbors);
    read_opt(j, "patches", c.patches);
    read_opt(j, "patch_length", c.patch_length);
    if (j.contains("subgraph_mode")) {
      c.subgraph_mode = j.at("subgraph_mode") == "knn" ? SubgraphMode::Knn : SubgraphMode::RandomWalk;
    }
    if (j.contains("seed_rule")) {
      c.seed_rule = j.at("seed_rule") == "farthest" ? SeedRule::FarthestFromCentroid : SeedRule::NearestCentroid;
    }
    read_opt(j, "center_encoding", c.center_encoding);
    read_opt(j, "token_dim", c.token_dim);
    read_opt(j, "state_dim", c.state_dim);
    read_opt(j, "blocks", c.blocks);
    read_opt(j, "pseudo_neighbors", c.pseudo_neighbors);
    read_opt(j, "jitter", c.jitter);
    read_opt(j, "use_diffusion", c.use_diffusion);
    read_opt(j, "use_ssm_forward", c.use_ssm_forward);
    read_opt(j, "use_ssm_backward", c.use_ssm_backward);
    read_opt(j, "interpolation_eps", c.interpolation.eps);
    read_opt(j, "interpolation_power", c.interpolation.power);
    read_opt(j, "head_hidden", c.head_hidden);
    read_opt(j, "face_skip", c.face_skip);
    read_opt(j, "seed", c.seed);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Config, std::string("bad model config value: ") + e.what());
  }
  return c;
}

std::uint64_t ModelConfig::hash() const {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : to_json()) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  return h;
}

const std::vector<std::string>& ablation_names() {
  static const std::vector<std::string> names{"texture",   "spatial",   "shape",       "curve",       "graph-conv",
                                              "subgraph",  "diffusion", "ssm-forward", "ssm-backward"};
  return names;
}

void apply_ablation(ModelConfig& config, const std::string& name) {
  if (name == "texture") {
    if (config.input_mode == InputMode::Texture) config.input_mode = InputMode::Geometry;
  } else if (name == "spatial") {
    config.features.spatial = false;
  } else if (name == "shape") {
    config.features.shape = false;
  } else if (name == "curve") {
    config.features.curve = false;
  } else if (name == "graph-conv") {
    config.use_graph_conv = false;
  } else if (name == "subgraph") {
    config.subgraph_mode = SubgraphMode::Knn;
  } else if (name == "diffusion") {
    config.use_diffusion = false;
  } else if (name == "ssm-forward") {
    config.use_ssm_forward = false;
  } else if (name == "ssm-backward") {
    config.use_ssm_backward = false;
  } else {
    throw Error(ErrorKind::Config, "unknown ablation '" + name + "'");
  }
}

TextureImage to_rgb(const TextureImage& image) {
  const int c = supported_channels(image);
  if (c == 3) return image;
  TextureImage out;
  out.width = image.width;
  out.height = image.height;
  out.channels = 3;
  out.source = image.source;
  out.data.resize(static_cast<std::size_t>(image.width) * image.height * 3);
  for (int y = 0; y < image.height; ++y) {
    for (int x = 0; x < image.width; ++x) {
      for (int k = 0; k < 3; ++k) out.at(x, y, k) = image.at(x, y, c == 1 ? 0 : k);
    }
  }
  return out;
}

namespace {

void prepare_texture(MeshInputs& in, const ModelConfig& config) {
  const TriMesh& mesh = *in.mesh;
  if (!mesh.has_uvs() || !mesh.has_texture()) {
    throw Error(ErrorKind::Config, "texture input mode needs a mesh with UVs and a texture");
  }
  const TextureImage rgb = to_rgb(*mesh.texture());
  const int G = config.texture_density;
  if (G < 1) throw Error(ErrorKind::Config, "texture density must be positive");
  const double per_sample = 1.0 / (static_cast<double>(G) * G);

  std::vector<std::map<int, double>> rows(in.faces);
  std::vector<int> used;
  for (int f = 0; f < in.faces; ++f) {
    const FaceSampling s = face_sampling(mesh.uvs()[f], G);
    for (const Vec2& p : s.points) {
      for (const BilinearTap& tap : bilinear_taps(rgb.width, rgb.height, p)) {
        if (tap.weight == 0.0) continue;
        rows[f][tap.cell] += tap.weight * per_sample;
        used.push_back(tap.cell);
      }
    }
  }
  std::sort(used.begin(), used.end());
  used.erase(std::unique(used.begin(), used.end()), used.end());
  std::map<int, int> compact;
  for (std::size_t k = 0; k < used.size(); ++k) compact[used[k]] = static_cast<int>(k);

  auto sampler = std::make_shared<nn::SparseMatrix>();
  sampler->cols = static_cast<int>(used.size());
  for (const auto& row : rows) {
    std::vector<std::pair<int, double>> entries;
    for (const auto& [cell, w] : row) entries.push_back({compact[cell], w});
    sampler->append_row(entries);
  }
  in.texture_sampler = sampler;

  if (config.texture_encoder == EncoderKind::Identity) {
    in.texels = nn::Matrix(static_cast<int>(used.size()), 3);
    for (std::size_t k = 0; k < used.size(); ++k) {
      for (int c = 0; c < 3; ++c) in.texels(static_cast<int>(k), c) = rgb.data[static_cast<std::size_t>(used[k]) * 3 + c];
    }
  } else {
    const std::vector<double> patches = texture_patches(rgb);
    in.texels = nn::Matrix(static_cast<int>(used.size()), 27);
    for (std::size_t k = 0; k < used.size(); ++k) {
      std::copy_n(patches.data() + static_cast<std::size_t>(used[k]) * 27, 27, in.texels.row(static_cast<int>(k)));
    }
  }
}

}  // namespace

MeshInputs prepare_inputs(std::shared_ptr<const TriMesh> mesh, const ModelConfig& config,
                          std::uint64_t subgraph_seed) {
  MeshInputs in;
  in.mesh = std::move(mesh);
  in.faces = static_cast<int>(in.mesh->faces().size());
  if (in.faces == 0) throw Error(ErrorKind::DegenerateGeometry, "mesh has no faces");
  if (config.patches > in.faces) {
    throw Error(ErrorKind::Config, "patch count " + std::to_string(config.patches) + " exceeds face count " +
                                       std::to_string(in.faces));
  }
  const std::vector<GeoFeature> geo = geometry_features(*in.mesh);
  in.geometry = geometric_block(geo, config.features);
  in.face_centers.reserve(geo.size());
  for (const GeoFeature& g : geo) in.face_centers.push_back(g.center);
  if (config.input_mode == InputMode::Color) in.color = face_colors(*in.mesh);
  if (config.input_mode == InputMode::Texture) prepare_texture(in, config);
  in.neighbor_mean = neighbor_mean_matrix(in.mesh->adjacency());

  in.patch_faces = fps_centers(in.face_centers, config.patches, config.seed_rule);
  in.normalized_patch_centers = nn::Matrix(config.patches, 3);
  for (int k = 0; k < config.patches; ++k) {
    const int f = in.patch_faces[k];
    in.patch_centers.push_back(in.face_centers[f]);
    for (int a = 0; a < 3; ++a) in.normalized_patch_centers(k, a) = geo[f].spatial[a];
  }
  in.interpolation = interpolation_matrix(in.patch_centers, in.face_centers, config.interpolation);
  resample_subgraphs(in, config, subgraph_seed);
  return in;
}

void resample_subgraphs(MeshInputs& inputs, const ModelConfig& config, std::uint64_t seed) {
  inputs.subgraphs =
      sample_subgraphs(*inputs.mesh, inputs.face_centers, inputs.patch_faces, config.patch_length, seed,
                       config.subgraph_mode);
  inputs.segments = pooling_segments(inputs.subgraphs);
}

MeshMambaModel::MeshMambaModel(const ModelConfig& config) : config_(config) {
  if (config.patches < 3) throw Error(ErrorKind::Config, "at least 3 patches are required for propagation");
  if (config.patch_length < 1 || config.token_dim < 1 || config.state_dim < 1 || config.blocks < 1) {
    throw Error(ErrorKind::Config, "patch length, token dim, state dim and block count must be positive");
  }
  Rng rng(mix_seed(config.seed, 0x6d6f64656cULL));
  if (config.input_mode == InputMode::Texture && config.texture_encoder == EncoderKind::Conv) {
    texture_weight_ = params_.add("texture.weight", glorot(27, config.latent_dim, rng));
    texture_bias_ = params_.add("texture.bias", nn::Matrix(1, config.latent_dim));
  }
  int embed_dim = config.input_dim();
  if (config.use_graph_conv) {
    encoder_ = GraphConvEncoder(params_, "graph_conv", embed_dim, config.graph_conv, rng);
    embed_dim = encoder_.out_dim();
  }
  patch_ = PatchEmbedParams::create(params_, "patch", embed_dim, config.token_dim, config.patches,
                                    config.center_encoding, rng);
  MambaBlockConfig bc;
  bc.ssm = {config.token_dim, config.state_dim};
  bc.pseudo_neighbors = config.pseudo_neighbors;
  bc.jitter = config.jitter;
  bc.use_diffusion = config.use_diffusion;
  bc.use_forward = config.use_ssm_forward;
  bc.use_backward = config.use_ssm_backward;
  for (int t = 0; t < config.blocks; ++t) {
    blocks_.push_back(MambaBlockParams::create(params_, "block" + std::to_string(t), bc, rng));
  }
  const int head_in = config.token_dim + (config.face_skip ? embed_dim : 0);
  head_ = HeadParams::create(params_, "head", head_in, config.head_hidden, rng);
}

nn::Var MeshMambaModel::face_embeddings(const MeshInputs& in) const {
  std::vector<nn::Var> parts{nn::Var(in.geometry)};
  if (config_.input_mode == InputMode::Color) parts.push_back(nn::Var(in.color));
  if (config_.input_mode == InputMode::Texture) {
    if (!in.texture_sampler) throw Error(ErrorKind::Config, "inputs were prepared without texture");
    nn::Var codes(in.texels);
    if (texture_weight_.defined()) {
      codes = nn::silu(nn::add_row(nn::matmul(codes, texture_weight_), texture_bias_));
    }
    parts.push_back(nn::spmm(in.texture_sampler, codes));
  }
  const nn::Var x = parts.size() == 1 ? parts[0] : nn::concat_cols(parts);
  if (x.cols() != config_.input_dim()) {
    throw Error(ErrorKind::Config, "inputs do not match the model configuration");
  }
  if (!config_.use_graph_conv) return x;
  return encoder_.forward(x, in.neighbor_mean);
}

nn::Var MeshMambaModel::forward(const MeshInputs& in, Rng* jitter_rng) const {
  return nn::relu(forward_unclamped(in, jitter_rng));
}

nn::Var MeshMambaModel::forward_unclamped(const MeshInputs& in, Rng* jitter_rng) const {
  const nn::Var emb = face_embeddings(in);
  const TokenSequence seq = embed_patches(in.segments, in.patch_centers, emb, patch_,
                                          config_.center_encoding ? &in.normalized_patch_centers : nullptr);
  const nn::Var z = stack_forward(seq.tokens, blocks_, jitter_rng);
  // The cls slot is carried through the blocks and dropped here.
  const nn::Var tokens = nn::slice_rows(z, 1, z.rows());
  nn::Var features = propagate(tokens, in.interpolation);
  if (config_.face_skip) features = nn::concat_cols({features, emb});
  return head_output(features, head_);
}

SaliencyMap MeshMambaModel::predict(const MeshInputs& inputs) const {
  nn::NoGradGuard guard;
  const nn::Var out = forward(inputs);
  return SaliencyMap{out.value().data};
}

}  // namespace meshmamba
