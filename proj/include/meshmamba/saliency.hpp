#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace meshmamba {

// Per-face nonnegative scalar field.
struct SaliencyMap {
  std::vector<double> values;

  std::size_t face_count() const { return values.size(); }
  double total() const;
  double max() const;
  // Distribution view; sums to 1 when total() > 0, otherwise a copy.
  SaliencyMap normalized() const;
  // Scaled so the maximum is 1 when max() > 0, otherwise a copy.
  SaliencyMap max_normalized() const;
};

using Header = std::vector<std::pair<std::string, std::string>>;

// Text format: "# key=value ..." header line, then one %.17g value per face.
void write_saliency(const SaliencyMap& map, const Header& header, const std::filesystem::path& path);
SaliencyMap read_saliency(const std::filesystem::path& path, Header* header = nullptr);

}  // namespace meshmamba
