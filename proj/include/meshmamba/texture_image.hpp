#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

namespace meshmamba {

// Row-major raster, row 0 at the top, channel-interleaved values in [0,1].
struct TextureImage {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<double> data;
  std::string source;  // path the image was decoded from, if any

  double at(int x, int y, int c) const {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  double& at(int x, int y, int c) {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }

  bool valid() const {
    return width >= 1 && height >= 1 && channels >= 1 &&
           data.size() == static_cast<std::size_t>(width) * height * channels;
  }
};

TextureImage load_png(const std::filesystem::path& path);
void save_png(const TextureImage& image, const std::filesystem::path& path);

// Version string of the PNG codec in use.
std::string png_version();

}  // namespace meshmamba
