#include "meshmamba/config.hpp"

#include <fstream>
#include <functional>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "meshmamba/error.hpp"

namespace meshmamba {

std::optional<std::string> ConfigFile::get(const std::string& section, const std::string& key) const {
  const auto s = sections.find(section);
  if (s == sections.end()) return std::nullopt;
  const auto k = s->second.find(key);
  if (k == s->second.end()) return std::nullopt;
  return k->second;
}

ConfigFile parse_config(const std::string& text) {
  // The ini parser only knows ';' comments.
  std::istringstream lines(text);
  std::string cleaned, line;
  while (std::getline(lines, line)) {
    const auto first = line.find_first_not_of(" \t");
    if (first != std::string::npos && line[first] == '#') continue;
    cleaned += line + "\n";
  }
  boost::property_tree::ptree tree;
  std::istringstream in(cleaned);
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw Error(ErrorKind::Config, "config line " + std::to_string(e.line()) + ": " + e.message());
  }
  ConfigFile file;
  for (const auto& [name, section] : tree) {
    if (section.empty()) throw Error(ErrorKind::Config, "config key '" + name + "' is outside any section");
    for (const auto& [key, value] : section) file.sections[name][key] = value.data();
  }
  return file;
}

ConfigFile read_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open config " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  try {
    return parse_config(text.str());
  } catch (const Error& e) {
    throw Error(e.kind(), path.string() + ": " + e.what());
  }
}

namespace {

using Setter = std::function<void(const std::string&)>;

void apply(const ConfigFile& file, const std::string& section, const std::map<std::string, Setter>& setters) {
  const auto s = file.sections.find(section);
  if (s == file.sections.end()) return;
  for (const auto& [key, value] : s->second) {
    const auto setter = setters.find(key);
    if (setter == setters.end()) throw Error(ErrorKind::Config, "unknown key [" + section + "] " + key);
    try {
      setter->second(value);
    } catch (const Error&) {
      throw;
    } catch (const std::exception&) {
      throw Error(ErrorKind::Config, "bad value for [" + section + "] " + key + ": '" + value + "'");
    }
  }
}

double to_double(const std::string& s) {
  std::size_t used = 0;
  const double v = std::stod(s, &used);
  if (used != s.size()) throw std::invalid_argument(s);
  return v;
}

int to_int(const std::string& s) {
  std::size_t used = 0;
  const int v = std::stoi(s, &used);
  if (used != s.size()) throw std::invalid_argument(s);
  return v;
}

bool to_bool(const std::string& s) {
  if (s == "true" || s == "1" || s == "on" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "off" || s == "no") return false;
  throw std::invalid_argument(s);
}

template <typename T>
Setter number(T& out) {
  if constexpr (std::is_same_v<T, double>) {
    return [&out](const std::string& s) { out = to_double(s); };
  } else if constexpr (std::is_same_v<T, bool>) {
    return [&out](const std::string& s) { out = to_bool(s); };
  } else if constexpr (std::is_same_v<T, std::uint64_t>) {
    return [&out](const std::string& s) {
      std::size_t used = 0;
      out = std::stoull(s, &used);
      if (used != s.size()) throw std::invalid_argument(s);
    };
  } else {
    return [&out](const std::string& s) { out = to_int(s); };
  }
}

template <typename E>
Setter choice(E& out, std::map<std::string, E> options) {
  return [&out, options](const std::string& s) {
    const auto it = options.find(s);
    if (it == options.end()) throw std::invalid_argument(s);
    out = it->second;
  };
}

}  // namespace

void apply_gaze_section(const ConfigFile& file, GroundTruthParams& p) {
  apply(file, "gaze",
        {{"velocity_threshold_deg_s", number(p.ivt.velocity_threshold_deg_s)},
         {"min_fixation_s", number(p.ivt.min_duration_s)},
         {"aperture_deg", number(p.cone.aperture_deg)},
         {"sigma_deg", number(p.cone.sigma_deg)},
         {"rays", number(p.cone.ray_count)},
         {"bvh_leaf_size", number(p.bvh_leaf_size)}});
}

void apply_model_section(const ConfigFile& file, ModelConfig& c) {
  apply(file, "model",
        {{"input_mode",
          choice(c.input_mode, std::map<std::string, InputMode>{{"geometry", InputMode::Geometry},
                                                                {"color", InputMode::Color},
                                                                {"texture", InputMode::Texture}})},
         {"spatial", number(c.features.spatial)},
         {"curve", number(c.features.curve)},
         {"shape", number(c.features.shape)},
         {"texture_encoder", choice(c.texture_encoder, std::map<std::string, EncoderKind>{
                                                           {"identity", EncoderKind::Identity},
                                                           {"conv", EncoderKind::Conv}})},
         {"latent_dim", number(c.latent_dim)},
         {"texture_density", number(c.texture_density)},
         {"graph_conv", number(c.use_graph_conv)},
         {"graph_conv_layers", number(c.graph_conv.layers)},
         {"graph_conv_width", number(c.graph_conv.width)},
         {"graph_conv_activation", choice(c.graph_conv.activation, std::map<std::string, Activation>{
                                                                       {"silu", Activation::SiLU},
                                                                       {"identity", Activation::Identity}})},
         {"patches", number(c.patches)},
         {"patch_length", number(c.patch_length)},
         {"subgraph_mode", choice(c.subgraph_mode, std::map<std::string, SubgraphMode>{
                                                       {"random_walk", SubgraphMode::RandomWalk},
                                                       {"knn", SubgraphMode::Knn}})},
         {"seed_rule", choice(c.seed_rule, std::map<std::string, SeedRule>{
                                               {"nearest", SeedRule::NearestCentroid},
                                               {"farthest", SeedRule::FarthestFromCentroid}})},
         {"center_encoding", number(c.center_encoding)},
         {"token_dim", number(c.token_dim)},
         {"state_dim", number(c.state_dim)},
         {"blocks", number(c.blocks)},
         {"pseudo_neighbors", number(c.pseudo_neighbors)},
         {"jitter", number(c.jitter)},
         {"diffusion", number(c.use_diffusion)},
         {"ssm_forward", number(c.use_ssm_forward)},
         {"ssm_backward", number(c.use_ssm_backward)},
         {"interpolation_eps", number(c.interpolation.eps)},
         {"interpolation_power", number(c.interpolation.power)},
         {"head_hidden", number(c.head_hidden)},
         {"face_skip", number(c.face_skip)},
         {"seed", number(c.seed)}});
}

void apply_train_section(const ConfigFile& file, TrainConfig& c) {
  apply(file, "train",
        {{"lr", number(c.lr)},
         {"decay", number(c.decay)},
         {"decay_every", number(c.decay_every)},
         {"epochs", number(c.epochs)},
         {"loop", number(c.loop)},
         {"batch", number(c.batch)},
         {"beta1", number(c.optimizer.beta1)},
         {"beta2", number(c.optimizer.beta2)},
         {"eps", number(c.optimizer.eps)},
         {"weight_decay", number(c.optimizer.weight_decay)},
         {"seed", number(c.seed)},
         {"resample_subgraphs", number(c.resample_subgraphs)},
         {"test_fraction", number(c.test_fraction)}});
}

void apply_simplify_section(const ConfigFile& file, SimplifyOptions& o) {
  apply(file, "simplify",
        {{"target_faces", number(o.target_faces)},
         {"lambda", number(o.lambda)},
         {"fold_threshold_deg", number(o.fold_threshold_deg)}});
}

}  // namespace meshmamba
