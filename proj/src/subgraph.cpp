#include "meshmamba/subgraph.hpp"

#include <algorithm>
#include <cstdio>
#include <limits>
#include <numeric>

#include "meshmamba/error.hpp"
#include "meshmamba/graph_conv.hpp"
#include "meshmamba/parallel.hpp"

namespace meshmamba {

std::vector<int> fps_centers(const std::vector<Vec3>& centers, int count, SeedRule rule) {
  const int n = static_cast<int>(centers.size());
  if (count < 0 || count > n) {
    throw Error(ErrorKind::Config, "cannot pick " + std::to_string(count) + " centers from " + std::to_string(n) +
                                       " faces");
  }
  std::vector<int> chosen;
  if (count == 0) return chosen;
  Vec3 lo = centers[0];
  Vec3 hi = centers[0];
  for (const Vec3& c : centers) {
    lo = lo.cwiseMin(c);
    hi = hi.cwiseMax(c);
  }
  const Vec3 mid = 0.5 * (lo + hi);
  int first = 0;
  double best = (centers[0] - mid).squaredNorm();
  for (int i = 1; i < n; ++i) {
    const double d = (centers[i] - mid).squaredNorm();
    if (rule == SeedRule::NearestCentroid ? d < best : d > best) {
      best = d;
      first = i;
    }
  }
  chosen.reserve(count);
  chosen.push_back(first);
  std::vector<double> dist(n, std::numeric_limits<double>::infinity());
  int last = first;
  while (static_cast<int>(chosen.size()) < count) {
    int next = -1;
    double far = -1.0;
    for (int i = 0; i < n; ++i) {
      dist[i] = std::min(dist[i], (centers[i] - centers[last]).squaredNorm());
      if (dist[i] > far) {
        far = dist[i];
        next = i;
      }
    }
    chosen.push_back(next);
    last = next;
  }
  return chosen;
}

Subgraph random_walk_subgraph(const std::vector<std::vector<int>>& adjacency, int center, int length, Rng& rng) {
  if (length < 1) throw Error(ErrorKind::Config, "subgraph length must be positive");
  Subgraph sg;
  sg.center = center;
  sg.members.push_back(center);
  std::vector<int> visited_list{center};
  std::vector<char> visited(adjacency.size(), 0);
  visited[center] = 1;
  auto unvisited_neighbors = [&](int f) {
    std::vector<int> out;
    for (int g : adjacency[f]) {
      if (!visited[g]) out.push_back(g);
    }
    return out;
  };
  int current = center;
  while (static_cast<int>(sg.members.size()) < length) {
    std::vector<int> options = unvisited_neighbors(current);
    if (options.empty()) {
      std::vector<int> frontier;
      for (int f : sg.members) {
        if (!unvisited_neighbors(f).empty()) frontier.push_back(f);
      }
      if (frontier.empty()) {
        sg.padding = length - static_cast<int>(sg.members.size());
        warn("component of face " + std::to_string(center) + " has only " + std::to_string(sg.members.size()) +
             " faces; padding subgraph with the center");
        break;
      }
      current = frontier[rng.below(frontier.size())];
      continue;
    }
    const int next = options[rng.below(options.size())];
    visited[next] = 1;
    sg.members.push_back(next);
    current = next;
  }
  return sg;
}

Subgraph knn_subgraph(const std::vector<Vec3>& centers, int center, int length) {
  const int n = static_cast<int>(centers.size());
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  const int take = std::min(length, n);
  std::vector<double> d(n);
  for (int i = 0; i < n; ++i) d[i] = (centers[i] - centers[center]).squaredNorm();
  std::partial_sort(order.begin(), order.begin() + take, order.end(), [&](int a, int b) {
    if (a == center || b == center) return a == center && b != center;
    return d[a] != d[b] ? d[a] < d[b] : a < b;
  });
  Subgraph sg;
  sg.center = center;
  sg.members.assign(order.begin(), order.begin() + take);
  sg.padding = length - take;
  return sg;
}

std::vector<Subgraph> sample_subgraphs(const TriMesh& mesh, const std::vector<Vec3>& face_centers,
                                       const std::vector<int>& centers, int length, std::uint64_t seed,
                                       SubgraphMode mode) {
  std::vector<Subgraph> out(centers.size());
  parallel_for(centers.size(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t k = begin; k < end; ++k) {
      if (mode == SubgraphMode::Knn) {
        out[k] = knn_subgraph(face_centers, centers[k], length);
      } else {
        Rng rng(mix_seed(seed, k));
        out[k] = random_walk_subgraph(mesh.adjacency(), centers[k], length, rng);
      }
    }
  });
  return out;
}

bool is_connected_walk(const std::vector<std::vector<int>>& adjacency, const Subgraph& subgraph) {
  const auto& m = subgraph.members;
  if (m.empty() || m[0] != subgraph.center) return false;
  for (std::size_t i = 0; i < m.size(); ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      if (m[i] == m[j]) return false;
    }
    if (i == 0) continue;
    bool linked = false;
    for (std::size_t j = 0; j < i && !linked; ++j) {
      const auto& adj = adjacency[m[i]];
      linked = std::find(adj.begin(), adj.end(), m[j]) != adj.end();
    }
    if (!linked) return false;
  }
  return true;
}

std::vector<std::vector<int>> pooling_segments(const std::vector<Subgraph>& subgraphs) {
  std::vector<std::vector<int>> segments;
  segments.reserve(subgraphs.size());
  for (const Subgraph& sg : subgraphs) {
    std::vector<int> seg = sg.members;
    seg.insert(seg.end(), sg.padding, sg.center);
    segments.push_back(std::move(seg));
  }
  return segments;
}

void write_subgraphs(const std::vector<Subgraph>& subgraphs, const std::filesystem::path& path) {
  std::FILE* out = std::fopen(path.string().c_str(), "w");
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  for (const Subgraph& sg : subgraphs) {
    for (std::size_t i = 0; i < sg.members.size(); ++i) std::fprintf(out, i ? " %d" : "%d", sg.members[i]);
    std::fprintf(out, "\n");
  }
  std::fclose(out);
}

PatchEmbedParams PatchEmbedParams::create(nn::ParameterSet& params, const std::string& prefix, int embed_dim,
                                          int token_dim, int tokens, bool center_encoding, Rng& rng) {
  PatchEmbedParams p;
  p.projection = params.add(prefix + ".projection", glorot(2 * embed_dim, token_dim, rng));
  nn::Matrix cls(1, token_dim);
  for (double& v : cls.data) v = 0.02 * rng.normal();
  p.cls = params.add(prefix + ".cls", cls);
  nn::Matrix pos(tokens + 1, token_dim);
  for (double& v : pos.data) v = 0.02 * rng.normal();
  p.pos = params.add(prefix + ".pos", pos);
  if (center_encoding) p.center_projection = params.add(prefix + ".center_projection", glorot(3, token_dim, rng));
  return p;
}

TokenSequence embed_patches(const std::vector<std::vector<int>>& segments, const std::vector<Vec3>& patch_centers,
                            const nn::Var& face_embeddings, const PatchEmbedParams& params,
                            const nn::Matrix* normalized_centers) {
  const int tokens = static_cast<int>(segments.size());
  if (params.projection.rows() != 2 * face_embeddings.cols()) {
    throw Error(ErrorKind::Config, "patch projection expects " + std::to_string(params.projection.rows() / 2) +
                                       "-dim embeddings, got " + std::to_string(face_embeddings.cols()));
  }
  if (params.pos.rows() != tokens + 1) {
    throw Error(ErrorKind::Config, "positional embedding has " + std::to_string(params.pos.rows()) +
                                       " slots for " + std::to_string(tokens + 1) + " tokens");
  }
  const nn::Var pooled = nn::concat_cols({nn::segment_mean(face_embeddings, segments),
                                          nn::segment_max(face_embeddings, segments)});
  nn::Var patches = nn::matmul(pooled, params.projection);
  if (params.center_projection.defined() && normalized_centers) {
    patches = nn::add(patches, nn::matmul(nn::Var(*normalized_centers), params.center_projection));
  }
  TokenSequence seq;
  seq.tokens = nn::add(nn::concat_rows({params.cls, patches}), params.pos);
  seq.centers = patch_centers;
  return seq;
}

}  // namespace meshmamba
