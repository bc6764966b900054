#include "meshmamba/saliency.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "meshmamba/error.hpp"

namespace meshmamba {

double SaliencyMap::total() const {
  double sum = 0.0;
  for (double v : values) sum += v;
  return sum;
}

double SaliencyMap::max() const {
  return values.empty() ? 0.0 : *std::max_element(values.begin(), values.end());
}

SaliencyMap SaliencyMap::normalized() const {
  SaliencyMap out = *this;
  const double sum = total();
  if (sum > 0.0) {
    for (double& v : out.values) v /= sum;
  }
  return out;
}

SaliencyMap SaliencyMap::max_normalized() const {
  SaliencyMap out = *this;
  const double peak = max();
  if (peak > 0.0) {
    for (double& v : out.values) v /= peak;
  }
  return out;
}

void write_saliency(const SaliencyMap& map, const Header& header, const std::filesystem::path& path) {
  std::FILE* out = std::fopen(path.string().c_str(), "w");
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  std::fprintf(out, "#");
  bool has_faces = false;
  for (const auto& [key, value] : header) {
    std::fprintf(out, " %s=%s", key.c_str(), value.c_str());
    has_faces = has_faces || key == "faces";
  }
  if (!has_faces) std::fprintf(out, " faces=%zu", map.face_count());
  std::fprintf(out, "\n");
  for (double v : map.values) std::fprintf(out, "%.17g\n", v);
  std::fclose(out);
}

SaliencyMap read_saliency(const std::filesystem::path& path, Header* header) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  SaliencyMap map;
  Header local;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::istringstream ss(line.substr(1));
      std::string kv;
      while (ss >> kv) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) continue;
        local.emplace_back(kv.substr(0, eq), kv.substr(eq + 1));
      }
      continue;
    }
    try {
      std::size_t used = 0;
      const double v = std::stod(line, &used);
      if (line.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument(line);
      map.values.push_back(v);
    } catch (const std::exception&) {
      throw Error(ErrorKind::Format, path.string() + ":" + std::to_string(line_no) + ": bad value");
    }
  }
  for (const auto& [key, value] : local) {
    if (key == "faces" && std::stoul(value) != map.values.size()) {
      throw Error(ErrorKind::Format, path.string() + ": header says " + value + " faces, file has " +
                                         std::to_string(map.values.size()));
    }
  }
  if (header) *header = std::move(local);
  return map;
}

}  // namespace meshmamba
