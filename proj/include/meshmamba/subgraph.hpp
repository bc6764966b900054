#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "meshmamba/mesh.hpp"
#include "meshmamba/nn/parameters.hpp"
#include "meshmamba/rng.hpp"

namespace meshmamba {

enum class SeedRule {
  NearestCentroid,       // start at the face nearest the bounding-box centroid
  FarthestFromCentroid,  // start at the face farthest from it
};

// Greedy max-min farthest point sampling on face centers. Ties resolve to
// the lowest face index. Throws ErrorKind::Config when count > faces.
std::vector<int> fps_centers(const std::vector<Vec3>& centers, int count,
                             SeedRule rule = SeedRule::NearestCentroid);

struct Subgraph {
  int center = 0;
  std::vector<int> members;  // distinct, walk order, members[0] == center
  int padding = 0;           // copies of the center appended when the component is too small
};

// Non-repeating random walk: step to a uniformly chosen unvisited neighbor;
// when stuck, restart from a uniformly chosen visited face that still has
// unvisited neighbors.
Subgraph random_walk_subgraph(const std::vector<std::vector<int>>& adjacency, int center, int length, Rng& rng);

// The `length` faces nearest to the center face by center distance.
Subgraph knn_subgraph(const std::vector<Vec3>& centers, int center, int length);

enum class SubgraphMode { RandomWalk, Knn };

// One subgraph per center; walk k draws from stream mix_seed(seed, k).
std::vector<Subgraph> sample_subgraphs(const TriMesh& mesh, const std::vector<Vec3>& face_centers,
                                       const std::vector<int>& centers, int length, std::uint64_t seed,
                                       SubgraphMode mode = SubgraphMode::RandomWalk);

// True if the members are distinct and each one after the first touches an
// earlier member through mesh adjacency.
bool is_connected_walk(const std::vector<std::vector<int>>& adjacency, const Subgraph& subgraph);

// Member lists with center padding applied, as pooling segments.
std::vector<std::vector<int>> pooling_segments(const std::vector<Subgraph>& subgraphs);

void write_subgraphs(const std::vector<Subgraph>& subgraphs, const std::filesystem::path& path);

struct PatchEmbedParams {
  nn::Var projection;  // 2*D_enc x D_tok, applied to mean||max pooled members
  nn::Var cls;         // 1 x D_tok
  nn::Var pos;         // (L+1) x D_tok, slot-indexed
  nn::Var center_projection;  // 3 x D_tok, only with center encoding

  static PatchEmbedParams create(nn::ParameterSet& params, const std::string& prefix, int embed_dim, int token_dim,
                                 int tokens, bool center_encoding, Rng& rng);
};

struct TokenSequence {
  nn::Var tokens;             // (L+1) x D_tok, row 0 = cls
  std::vector<Vec3> centers;  // L patch centers, for propagation
};

// z0 = [cls; pool(members_1) W; ...; pool(members_L) W] + pos, where pool is
// the mean||max concatenation over members.
TokenSequence embed_patches(const std::vector<std::vector<int>>& segments, const std::vector<Vec3>& patch_centers,
                            const nn::Var& face_embeddings, const PatchEmbedParams& params,
                            const nn::Matrix* normalized_centers = nullptr);

}  // namespace meshmamba
