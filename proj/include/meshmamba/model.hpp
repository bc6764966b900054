#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "meshmamba/graph_conv.hpp"
#include "meshmamba/mesh.hpp"
#include "meshmamba/nn/parameters.hpp"
#include "meshmamba/propagation.hpp"
#include "meshmamba/saliency.hpp"
#include "meshmamba/ssm.hpp"
#include "meshmamba/subgraph.hpp"
#include "meshmamba/texture.hpp"

namespace meshmamba {

struct ModelConfig {
  InputMode input_mode = InputMode::Geometry;
  FeatureToggles features;

  EncoderKind texture_encoder = EncoderKind::Conv;
  int latent_dim = 8;
  int texture_density = 4;  // G x G samples per face window

  bool use_graph_conv = true;
  GraphConvConfig graph_conv;

  int patches = 128;      // L
  int patch_length = 32;  // M
  SubgraphMode subgraph_mode = SubgraphMode::RandomWalk;
  SeedRule seed_rule = SeedRule::NearestCentroid;
  bool center_encoding = false;

  int token_dim = 192;
  int state_dim = 16;
  int blocks = 4;  // T
  int pseudo_neighbors = 2;
  double jitter = 0.0;
  bool use_diffusion = true;
  bool use_ssm_forward = true;
  bool use_ssm_backward = true;

  InterpolationConfig interpolation;
  int head_hidden = 64;
  bool face_skip = true;  // concatenate face embeddings to the propagated features

  std::uint64_t seed = 0;

  int input_dim() const;
  std::string to_json() const;
  static ModelConfig from_json(const std::string& text);
  std::uint64_t hash() const;
};

// Names accepted by apply_ablation: texture, spatial, shape, curve,
// graph-conv, subgraph, diffusion, ssm-forward, ssm-backward.
const std::vector<std::string>& ablation_names();
// Switches one component off. Throws ErrorKind::Config on unknown names.
void apply_ablation(ModelConfig& config, const std::string& name);

// Everything the forward pass needs from one mesh that does not depend on
// learned parameters.
struct MeshInputs {
  std::shared_ptr<const TriMesh> mesh;
  int faces = 0;
  nn::Matrix geometry;  // faces x geometric_dim
  nn::Matrix color;     // faces x 3, color mode only
  // Texture mode: rows of the texels the face windows touch (3x3 RGB
  // neighborhoods for the conv encoder, RGB for identity) and the sparse
  // faces x texels matrix that averages each window's bilinear samples.
  nn::Matrix texels;
  std::shared_ptr<nn::SparseMatrix> texture_sampler;
  std::shared_ptr<nn::SparseMatrix> neighbor_mean;
  std::vector<Vec3> face_centers;
  std::vector<int> patch_faces;
  std::vector<Vec3> patch_centers;
  nn::Matrix normalized_patch_centers;  // L x 3
  std::shared_ptr<nn::SparseMatrix> interpolation;
  std::vector<Subgraph> subgraphs;
  std::vector<std::vector<int>> segments;
};

MeshInputs prepare_inputs(std::shared_ptr<const TriMesh> mesh, const ModelConfig& config, std::uint64_t subgraph_seed);
void resample_subgraphs(MeshInputs& inputs, const ModelConfig& config, std::uint64_t seed);

// Texture as RGB: gray is replicated, alpha dropped.
TextureImage to_rgb(const TextureImage& image);

class MeshMambaModel {
 public:
  explicit MeshMambaModel(const ModelConfig& config);

  const ModelConfig& config() const { return config_; }
  nn::ParameterSet& parameters() { return params_; }
  const nn::ParameterSet& parameters() const { return params_; }

  // faces x 1 nonnegative prediction.
  nn::Var forward(const MeshInputs& inputs, Rng* jitter_rng = nullptr) const;
  // The same before the clamp; training fits this so a clamped face still
  // receives gradient.
  nn::Var forward_unclamped(const MeshInputs& inputs, Rng* jitter_rng = nullptr) const;
  // Face embeddings before patching (faces x embed dim).
  nn::Var face_embeddings(const MeshInputs& inputs) const;
  SaliencyMap predict(const MeshInputs& inputs) const;

 private:
  ModelConfig config_;
  nn::ParameterSet params_;
  nn::Var texture_weight_;  // 27 x latent_dim
  nn::Var texture_bias_;    // 1 x latent_dim
  GraphConvEncoder encoder_;
  PatchEmbedParams patch_;
  std::vector<MambaBlockParams> blocks_;
  HeadParams head_;
};

}  // namespace meshmamba
