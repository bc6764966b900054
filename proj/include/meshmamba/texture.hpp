#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "meshmamba/mesh.hpp"
#include "meshmamba/texture_image.hpp"

namespace meshmamba {

// Feature grid aligned with the texture: cell (x, y) covers texel (x, y).
struct LatentCodeMap {
  int width = 0;
  int height = 0;
  int dim = 0;
  std::vector<double> codes;  // (y * width + x) * dim + k

  const double* code(int x, int y) const {
    return codes.data() + (static_cast<std::size_t>(y) * width + x) * dim;
  }
};

enum class EncoderKind { Identity, Conv };

// 3x3 convolution (repeat padding) followed by SiLU; weight is (9*C) x dim,
// row index = (dy * 3 + dx) * C + c.
struct ConvEncoderWeights {
  int in_channels = 0;
  int dim = 0;
  std::vector<double> weight;
  std::vector<double> bias;

  static ConvEncoderWeights init(int in_channels, int dim, std::uint64_t seed);
};

struct EncoderConfig {
  EncoderKind kind = EncoderKind::Conv;
  int dim = 8;
  std::uint64_t seed = 7;
  std::optional<ConvEncoderWeights> weights;  // drawn from seed when absent

  std::uint64_t hash() const;
};

int supported_channels(const TextureImage& image);

// im2col over 3x3 windows with repeat padding: one row per texel, 9*C columns.
std::vector<double> texture_patches(const TextureImage& image);

LatentCodeMap encode_texture(const TextureImage& image, const EncoderConfig& config = {});

struct BilinearTap {
  int cell;  // y * width + x
  double weight;
};

// The four cells around uv (wrapped by repeat) and their bilinear weights.
// Cell centers sit at ((x + 0.5) / W, 1 - (y + 0.5) / H).
std::array<BilinearTap, 4> bilinear_taps(int width, int height, const Vec2& uv);

std::vector<double> sample_latent(const LatentCodeMap& map, const Vec2& uv);

struct FaceSampling {
  std::vector<Vec2> points;  // G*G UV positions, row-major
  Vec2 extension{1.0, 1.0};  // window side / bbox extent per axis
  Vec2 step{0.0, 0.0};       // spacing between samples per axis
  bool degenerate = false;
};

// Square window centered on the UV triangle's bounding box, the short side
// stretched to the long one, sampled on a uniform G x G grid. Zero-area UV
// triangles sample the centroid everywhere.
FaceSampling face_sampling(const FaceUv& uv, int density);

struct FaceFeatureGrid {
  int face = 0;
  int density = 0;
  int dim = 0;
  std::vector<double> values;  // (row * density + col) * dim + k
  Vec2 extension{1.0, 1.0};
};

// Throws ErrorKind::TextureAbsent when the mesh has no UVs.
FaceFeatureGrid face_feature_grid(const TriMesh& mesh, const LatentCodeMap& map, int face, int density = 8);

enum class PoolMode { Mean, Max };

std::vector<double> pool_face_feature(const FaceFeatureGrid& grid, PoolMode mode = PoolMode::Mean);

std::uint64_t texture_hash(const TextureImage& image);

// Binary sidecar keyed by texture and encoder hashes.
void save_latent_cache(const LatentCodeMap& map, std::uint64_t texture_key, std::uint64_t encoder_key,
                       const std::filesystem::path& path);
std::optional<LatentCodeMap> load_latent_cache(const std::filesystem::path& path, std::uint64_t texture_key,
                                               std::uint64_t encoder_key);

}  // namespace meshmamba
