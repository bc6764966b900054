#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>

#include "meshmamba/gaze.hpp"
#include "meshmamba/model.hpp"
#include "meshmamba/simplify.hpp"
#include "meshmamba/train.hpp"

namespace meshmamba {

// INI-style file: "[section]" headers, "key = value" lines, ';' or '#'
// comments. Sections: gaze, model, train, simplify.
struct ConfigFile {
  std::map<std::string, std::map<std::string, std::string>> sections;

  std::optional<std::string> get(const std::string& section, const std::string& key) const;
};

ConfigFile read_config(const std::filesystem::path& path);
ConfigFile parse_config(const std::string& text);

// Overlay a section onto defaults. Unknown keys and unparsable values are
// ErrorKind::Config errors naming the key.
void apply_gaze_section(const ConfigFile& file, GroundTruthParams& params);
void apply_model_section(const ConfigFile& file, ModelConfig& config);
void apply_train_section(const ConfigFile& file, TrainConfig& config);
void apply_simplify_section(const ConfigFile& file, SimplifyOptions& options);

}  // namespace meshmamba
