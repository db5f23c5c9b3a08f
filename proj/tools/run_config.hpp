#pragma once

// Settings shared by every subcommand, merged from three layers with fixed
// precedence: command-line flag > config-file entry > built-in default. Both
// layers arrive as string maps so the same parser handles them; unknown keys
// are rejected up front rather than silently ignored.

#include <cstdint>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "pcup/camera.hpp"
#include "pcup/cloud.hpp"
#include "pcup/losses.hpp"
#include "pcup/optim.hpp"
#include "pcup/types.hpp"

namespace pcup::cli {

struct RunConfig {
  // Upsampling.
  Index rate = 4;
  std::string mode = "direct";  // "direct" or "neu"
  Index iters = 100;
  // Optimizer.
  double lr = 0.001;
  Index epochs = 30;
  Index batch = 28;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double jitter = 0.01;
  std::uint64_t seed = 0;
  AugmentOptions augment;
  LossWeights weights;
  // Rendering.
  int views = 8;
  int img_size = 64;
  double gamma = 1e-4;
  double scale = 0.0;  // 0 sizes the triangles from the cloud spacing
  double radius = 2.5;
  double elevation = 20.0;
  double extent = 1.3;
  // Network shape.
  Index width = 32;
  Index neighbors = 4;
};

inline double parse_double(const std::string& key, const std::string& value) {
  std::size_t used = 0;
  double parsed = 0.0;
  try {
    parsed = std::stod(value, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != value.size() || value.empty())
    throw DataError("config: expected a number for '" + key + "', got '" + value + "'");
  return parsed;
}

inline long parse_integer(const std::string& key, const std::string& value) {
  std::size_t used = 0;
  long parsed = 0;
  try {
    parsed = std::stol(value, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != value.size() || value.empty())
    throw DataError("config: expected an integer for '" + key + "', got '" + value + "'");
  return parsed;
}

inline bool parse_flag(const std::string& key, const std::string& value) {
  if (value == "1" || value == "true") return true;
  if (value == "0" || value == "false") return false;
  throw DataError("config: expected a boolean for '" + key + "', got '" + value + "'");
}

/// Comma-separated "sc,ic,hd,un".
inline LossWeights parse_weights(const std::string& value) {
  std::vector<double> parts;
  std::istringstream in(value);
  std::string field;
  while (std::getline(in, field, ',')) parts.push_back(parse_double("weights", field));
  if (parts.size() != 4)
    throw DataError("config: 'weights' needs four comma-separated values, got '" + value + "'");
  return {parts[0], parts[1], parts[2], parts[3]};
}

/// Applies one layer of key=value settings on top of `config`. Throws
/// DataError for unrecognized keys and malformed values.
inline void apply(RunConfig& config, const std::map<std::string, std::string>& values) {
  for (const auto& [key, value] : values) {
    if (key == "rate") config.rate = parse_integer(key, value);
    else if (key == "mode") {
      if (value != "direct" && value != "neu")
        throw DataError("config: mode must be 'direct' or 'neu', got '" + value + "'");
      config.mode = value;
    } else if (key == "iters") config.iters = parse_integer(key, value);
    else if (key == "lr") config.lr = parse_double(key, value);
    else if (key == "epochs") config.epochs = parse_integer(key, value);
    else if (key == "batch") config.batch = parse_integer(key, value);
    else if (key == "beta1") config.beta1 = parse_double(key, value);
    else if (key == "beta2") config.beta2 = parse_double(key, value);
    else if (key == "epsilon") config.epsilon = parse_double(key, value);
    else if (key == "jitter") config.jitter = parse_double(key, value);
    else if (key == "seed") config.seed = static_cast<std::uint64_t>(parse_integer(key, value));
    else if (key == "augment_rotate") config.augment.rotate = parse_flag(key, value);
    else if (key == "augment_scale_min") config.augment.scale_min = parse_double(key, value);
    else if (key == "augment_scale_max") config.augment.scale_max = parse_double(key, value);
    else if (key == "augment_jitter") config.augment.jitter_sigma = parse_double(key, value);
    else if (key == "augment_clip") config.augment.jitter_clip = parse_double(key, value);
    else if (key == "weights") config.weights = parse_weights(value);
    else if (key == "views") config.views = static_cast<int>(parse_integer(key, value));
    else if (key == "img_size") config.img_size = static_cast<int>(parse_integer(key, value));
    else if (key == "gamma") config.gamma = parse_double(key, value);
    else if (key == "scale") config.scale = parse_double(key, value);
    else if (key == "radius") config.radius = parse_double(key, value);
    else if (key == "elevation") config.elevation = parse_double(key, value);
    else if (key == "extent") config.extent = parse_double(key, value);
    else if (key == "width") config.width = parse_integer(key, value);
    else if (key == "neighbors") config.neighbors = parse_integer(key, value);
    else throw DataError("config: unrecognized key '" + key + "'");
  }
}

/// Defaults, then the config file, then the flags the user actually set.
inline RunConfig merged_config(const std::map<std::string, std::string>& file_values,
                               const std::map<std::string, std::string>& flag_values) {
  RunConfig config;
  apply(config, file_values);
  apply(config, flag_values);
  return config;
}

inline OptimConfig optimizer_config(const RunConfig& config, Index iterations) {
  OptimConfig out;
  out.learning_rate = config.lr;
  out.iterations = iterations;
  out.batch_size = config.batch;
  out.weights = config.weights;
  out.render.gamma = config.gamma;
  out.render.scale = config.scale;
  out.beta1 = config.beta1;
  out.beta2 = config.beta2;
  out.epsilon = config.epsilon;
  out.init_jitter = config.jitter;
  out.augment = config.augment;
  out.seed = config.seed;
  return out;
}

inline CameraRig view_ring(const RunConfig& config) {
  return make_view_ring(config.views, config.radius, config.elevation, config.img_size,
                        config.img_size, config.extent);
}

}  // namespace pcup::cli
