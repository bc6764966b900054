#include "meshmamba/texture.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include <png.h>

#include "meshmamba/error.hpp"
#include "meshmamba/rng.hpp"

namespace meshmamba {

namespace {

int wrap_index(int i, int n) {
  const int m = i % n;
  return m < 0 ? m + n : m;
}

double wrap01(double x) { return x - std::floor(x); }

double silu(double x) { return x / (1.0 + std::exp(-x)); }

std::uint64_t fnv1a(const void* data, std::size_t size, std::uint64_t h = 1469598103934665603ULL) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < size; ++i) {
    h ^= p[i];
    h *= 1099511628211ULL;
  }
  return h;
}

constexpr char kCacheMagic[4] = {'M', 'M', 'L', 'C'};
constexpr std::uint32_t kCacheVersion = 1;

}  // namespace

std::string png_version() { return png_get_libpng_ver(nullptr); }

TextureImage load_png(const std::filesystem::path& path) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.string().c_str())) {
    throw Error(ErrorKind::Format, path.string() + ": " + image.message);
  }
  int channels = 3;
  if (image.format & PNG_FORMAT_FLAG_ALPHA) {
    image.format = PNG_FORMAT_RGBA;
    channels = 4;
  } else if (!(image.format & PNG_FORMAT_FLAG_COLOR)) {
    image.format = PNG_FORMAT_GRAY;
    channels = 1;
  } else {
    image.format = PNG_FORMAT_RGB;
  }
  std::vector<png_byte> buffer(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, buffer.data(), 0, nullptr)) {
    png_image_free(&image);
    throw Error(ErrorKind::Format, path.string() + ": " + image.message);
  }
  TextureImage out;
  out.width = static_cast<int>(image.width);
  out.height = static_cast<int>(image.height);
  out.channels = channels;
  out.source = path.string();
  out.data.resize(buffer.size());
  for (std::size_t i = 0; i < buffer.size(); ++i) out.data[i] = buffer[i] / 255.0;
  return out;
}

void save_png(const TextureImage& image, const std::filesystem::path& path) {
  if (!image.valid()) throw Error(ErrorKind::Config, "invalid texture image");
  png_image png;
  std::memset(&png, 0, sizeof(png));
  png.version = PNG_IMAGE_VERSION;
  png.width = static_cast<png_uint_32>(image.width);
  png.height = static_cast<png_uint_32>(image.height);
  switch (image.channels) {
    case 1: png.format = PNG_FORMAT_GRAY; break;
    case 3: png.format = PNG_FORMAT_RGB; break;
    case 4: png.format = PNG_FORMAT_RGBA; break;
    default: throw Error(ErrorKind::Config, "PNG output supports 1, 3 or 4 channels");
  }
  std::vector<png_byte> buffer(image.data.size());
  for (std::size_t i = 0; i < buffer.size(); ++i) {
    buffer[i] = static_cast<png_byte>(std::lround(std::clamp(image.data[i], 0.0, 1.0) * 255.0));
  }
  if (!png_image_write_to_file(&png, path.string().c_str(), 0, buffer.data(), 0, nullptr)) {
    throw Error(ErrorKind::Io, path.string() + ": " + png.message);
  }
}

ConvEncoderWeights ConvEncoderWeights::init(int in_channels, int dim, std::uint64_t seed) {
  ConvEncoderWeights w;
  w.in_channels = in_channels;
  w.dim = dim;
  const int fan_in = 9 * in_channels;
  const double bound = std::sqrt(6.0 / (fan_in + dim));
  Rng rng(seed);
  w.weight.resize(static_cast<std::size_t>(fan_in) * dim);
  for (double& v : w.weight) v = rng.uniform(-bound, bound);
  w.bias.assign(dim, 0.0);
  return w;
}

std::uint64_t EncoderConfig::hash() const {
  std::uint64_t h = fnv1a(&kind, sizeof(kind));
  h = fnv1a(&dim, sizeof(dim), h);
  h = fnv1a(&seed, sizeof(seed), h);
  if (weights) {
    h = fnv1a(weights->weight.data(), weights->weight.size() * sizeof(double), h);
    h = fnv1a(weights->bias.data(), weights->bias.size() * sizeof(double), h);
  }
  return h;
}

int supported_channels(const TextureImage& image) {
  if (!image.valid()) throw Error(ErrorKind::Config, "invalid texture image");
  if (image.channels != 1 && image.channels != 3 && image.channels != 4) {
    throw Error(ErrorKind::Config, "unsupported texture channel count " + std::to_string(image.channels));
  }
  return image.channels;
}

std::vector<double> texture_patches(const TextureImage& image) {
  const int c = supported_channels(image);
  const int cols = 9 * c;
  std::vector<double> patches(static_cast<std::size_t>(image.width) * image.height * cols);
  for (int y = 0; y < image.height; ++y) {
    for (int x = 0; x < image.width; ++x) {
      double* row = patches.data() + (static_cast<std::size_t>(y) * image.width + x) * cols;
      for (int dy = 0; dy < 3; ++dy) {
        for (int dx = 0; dx < 3; ++dx) {
          const int sx = wrap_index(x + dx - 1, image.width);
          const int sy = wrap_index(y + dy - 1, image.height);
          for (int k = 0; k < c; ++k) row[(dy * 3 + dx) * c + k] = image.at(sx, sy, k);
        }
      }
    }
  }
  return patches;
}

LatentCodeMap encode_texture(const TextureImage& image, const EncoderConfig& config) {
  const int c = supported_channels(image);
  LatentCodeMap map;
  map.width = image.width;
  map.height = image.height;
  if (config.kind == EncoderKind::Identity) {
    map.dim = c;
    map.codes = image.data;
    return map;
  }
  const ConvEncoderWeights weights =
      config.weights ? *config.weights : ConvEncoderWeights::init(c, config.dim, config.seed);
  if (weights.in_channels != c) {
    throw Error(ErrorKind::Config, "encoder expects " + std::to_string(weights.in_channels) +
                                       " channels, texture has " + std::to_string(c));
  }
  map.dim = weights.dim;
  const int cols = 9 * c;
  const std::vector<double> patches = texture_patches(image);
  const std::size_t cells = static_cast<std::size_t>(map.width) * map.height;
  map.codes.assign(cells * map.dim, 0.0);
  for (std::size_t cell = 0; cell < cells; ++cell) {
    const double* in = patches.data() + cell * cols;
    double* out = map.codes.data() + cell * map.dim;
    for (int k = 0; k < map.dim; ++k) {
      double acc = weights.bias[k];
      for (int j = 0; j < cols; ++j) acc += in[j] * weights.weight[static_cast<std::size_t>(j) * map.dim + k];
      out[k] = silu(acc);
    }
  }
  return map;
}

std::array<BilinearTap, 4> bilinear_taps(int width, int height, const Vec2& uv) {
  const double x = wrap01(uv.x()) * width - 0.5;
  const double y = (1.0 - wrap01(uv.y())) * height - 0.5;
  const double x0f = std::floor(x);
  const double y0f = std::floor(y);
  const double fx = x - x0f;
  const double fy = y - y0f;
  const int x0 = wrap_index(static_cast<int>(x0f), width);
  const int x1 = wrap_index(static_cast<int>(x0f) + 1, width);
  const int y0 = wrap_index(static_cast<int>(y0f), height);
  const int y1 = wrap_index(static_cast<int>(y0f) + 1, height);
  return {BilinearTap{y0 * width + x0, (1.0 - fx) * (1.0 - fy)}, BilinearTap{y0 * width + x1, fx * (1.0 - fy)},
          BilinearTap{y1 * width + x0, (1.0 - fx) * fy}, BilinearTap{y1 * width + x1, fx * fy}};
}

std::vector<double> sample_latent(const LatentCodeMap& map, const Vec2& uv) {
  std::vector<double> out(map.dim, 0.0);
  for (const BilinearTap& tap : bilinear_taps(map.width, map.height, uv)) {
    if (tap.weight == 0.0) continue;
    const double* code = map.codes.data() + static_cast<std::size_t>(tap.cell) * map.dim;
    for (int k = 0; k < map.dim; ++k) out[k] += tap.weight * code[k];
  }
  return out;
}

FaceSampling face_sampling(const FaceUv& uv, int density) {
  if (density < 1) throw Error(ErrorKind::Config, "sampling density must be positive");
  FaceSampling s;
  s.points.reserve(static_cast<std::size_t>(density) * density);
  const Vec2 e1 = uv[1] - uv[0];
  const Vec2 e2 = uv[2] - uv[0];
  const double area2 = std::abs(e1.x() * e2.y() - e1.y() * e2.x());
  const Vec2 lo = uv[0].cwiseMin(uv[1]).cwiseMin(uv[2]);
  const Vec2 hi = uv[0].cwiseMax(uv[1]).cwiseMax(uv[2]);
  const Vec2 extent = hi - lo;
  if (!(area2 > 1e-18) || extent.minCoeff() <= 0.0) {
    s.degenerate = true;
    const Vec2 centroid = (uv[0] + uv[1] + uv[2]) / 3.0;
    s.points.assign(static_cast<std::size_t>(density) * density, centroid);
    return s;
  }
  const double side = extent.maxCoeff();
  s.extension = Vec2(side / extent.x(), side / extent.y());
  const Vec2 center = 0.5 * (lo + hi);
  const Vec2 origin = center - Vec2::Constant(0.5 * side);
  const double step = side / density;
  s.step = Vec2(step, step);
  // Row 0 is the top of the window (largest v), matching image rows.
  for (int r = 0; r < density; ++r) {
    for (int c = 0; c < density; ++c) {
      s.points.emplace_back(origin.x() + (c + 0.5) * step, origin.y() + side - (r + 0.5) * step);
    }
  }
  return s;
}

FaceFeatureGrid face_feature_grid(const TriMesh& mesh, const LatentCodeMap& map, int face, int density) {
  if (!mesh.has_uvs()) throw Error(ErrorKind::TextureAbsent, "mesh has no UV coordinates");
  const FaceSampling sampling = face_sampling(mesh.uvs()[face], density);
  FaceFeatureGrid grid;
  grid.face = face;
  grid.density = density;
  grid.dim = map.dim;
  grid.extension = sampling.extension;
  grid.values.reserve(sampling.points.size() * map.dim);
  for (const Vec2& p : sampling.points) {
    const auto v = sample_latent(map, p);
    grid.values.insert(grid.values.end(), v.begin(), v.end());
  }
  return grid;
}

std::vector<double> pool_face_feature(const FaceFeatureGrid& grid, PoolMode mode) {
  const std::size_t cells = grid.dim > 0 ? grid.values.size() / grid.dim : 0;
  if (cells == 0) throw Error(ErrorKind::Config, "cannot pool an empty feature grid");
  std::vector<double> out(grid.values.begin(), grid.values.begin() + grid.dim);
  for (std::size_t i = 1; i < cells; ++i) {
    const double* v = grid.values.data() + i * grid.dim;
    for (int k = 0; k < grid.dim; ++k) {
      out[k] = mode == PoolMode::Mean ? out[k] + v[k] : std::max(out[k], v[k]);
    }
  }
  if (mode == PoolMode::Mean) {
    for (double& v : out) v /= static_cast<double>(cells);
  }
  return out;
}

std::uint64_t texture_hash(const TextureImage& image) {
  std::uint64_t h = fnv1a(&image.width, sizeof(image.width));
  h = fnv1a(&image.height, sizeof(image.height), h);
  h = fnv1a(&image.channels, sizeof(image.channels), h);
  return fnv1a(image.data.data(), image.data.size() * sizeof(double), h);
}

void save_latent_cache(const LatentCodeMap& map, std::uint64_t texture_key, std::uint64_t encoder_key,
                       const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  out.write(kCacheMagic, 4);
  out.write(reinterpret_cast<const char*>(&kCacheVersion), sizeof(kCacheVersion));
  out.write(reinterpret_cast<const char*>(&texture_key), sizeof(texture_key));
  out.write(reinterpret_cast<const char*>(&encoder_key), sizeof(encoder_key));
  const std::int32_t dims[3] = {map.width, map.height, map.dim};
  out.write(reinterpret_cast<const char*>(dims), sizeof(dims));
  out.write(reinterpret_cast<const char*>(map.codes.data()),
            static_cast<std::streamsize>(map.codes.size() * sizeof(double)));
}

std::optional<LatentCodeMap> load_latent_cache(const std::filesystem::path& path, std::uint64_t texture_key,
                                               std::uint64_t encoder_key) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  char magic[4];
  std::uint32_t version = 0;
  std::uint64_t tk = 0, ek = 0;
  std::int32_t dims[3];
  in.read(magic, 4);
  in.read(reinterpret_cast<char*>(&version), sizeof(version));
  in.read(reinterpret_cast<char*>(&tk), sizeof(tk));
  in.read(reinterpret_cast<char*>(&ek), sizeof(ek));
  in.read(reinterpret_cast<char*>(dims), sizeof(dims));
  if (!in || std::memcmp(magic, kCacheMagic, 4) != 0 || version != kCacheVersion || tk != texture_key ||
      ek != encoder_key || dims[0] < 1 || dims[1] < 1 || dims[2] < 1) {
    return std::nullopt;
  }
  LatentCodeMap map;
  map.width = dims[0];
  map.height = dims[1];
  map.dim = dims[2];
  map.codes.resize(static_cast<std::size_t>(dims[0]) * dims[1] * dims[2]);
  in.read(reinterpret_cast<char*>(map.codes.data()), static_cast<std::streamsize>(map.codes.size() * sizeof(double)));
  if (!in) return std::nullopt;
  return map;
}

}  // namespace meshmamba
