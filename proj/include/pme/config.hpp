#pragma once

// Pipeline configuration and its flat key-value file format.

#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>

#include "pme/core.hpp"

namespace pme {

/// Track aggregation rule. kSignVote is max of sign voting; the others are ablation variants.
enum class EmbedVariant { kSignVote, kMean, kMax, kMeanSignVote };

inline std::string to_string(EmbedVariant v) {
  switch (v) {
    case EmbedVariant::kSignVote: return "sign-vote";
    case EmbedVariant::kMean: return "mean";
    case EmbedVariant::kMax: return "max";
    case EmbedVariant::kMeanSignVote: return "mean-sign-vote";
  }
  return "sign-vote";
}

inline std::optional<EmbedVariant> parse_embed_variant(std::string_view s) {
  if (s == "sign-vote") return EmbedVariant::kSignVote;
  if (s == "mean") return EmbedVariant::kMean;
  if (s == "max") return EmbedVariant::kMax;
  if (s == "mean-sign-vote") return EmbedVariant::kMeanSignVote;
  return std::nullopt;
}

enum class TrackingMetric { kCosine, kEuclidean };

struct PipelineConfig {
  // tracking / embedding
  int track_length = 10;
  TrackingMetric tracking_metric = TrackingMetric::kCosine;
  double gating_threshold = 0.5;
  double confidence_threshold = kDefaultConfidenceThreshold;
  EmbedVariant embed_variant = EmbedVariant::kSignVote;

  // clustering; k unset means "derive from the scene header"
  std::optional<int> k;
  bool k_auto = false;
  int kmeans_max_iterations = 100;

  // geometry
  double lower_leg_length_m = 0.5;
  double ransac_threshold = 1e-3;
  int ransac_iterations = 500;
  int geometry_window = 10;  // frames aggregated for pose estimation; 0 = all
  std::optional<int> reference_camera;

  // bundle adjustment
  int ba_max_iterations = 100;
  double ba_gradient_tolerance = 1e-8;
  double ba_step_tolerance = 1e-10;
  bool ba_huber = false;
  double ba_huber_delta = 2.0;
  bool fix_cameras = false;

  // noise injection on 2D joints (uniform over a W x W pixel square)
  int noise_window = 0;

  std::uint64_t seed = 0;
  int threads = 1;

  void validate() const {
    if (track_length < 1) throw ConfigError("t must be >= 1");
    if (k && *k < 2) throw ConfigError("k must be >= 2");
    if (!(lower_leg_length_m > 0.0)) throw ConfigError("leg-length must be > 0");
    if (noise_window < 0) throw ConfigError("noise-window must be >= 0");
    if (ransac_iterations < 1) throw ConfigError("ransac-iterations must be >= 1");
    if (!(ransac_threshold > 0.0)) throw ConfigError("ransac-threshold must be > 0");
    if (ba_max_iterations < 0) throw ConfigError("ba-max-iterations must be >= 0");
    if (kmeans_max_iterations < 1) throw ConfigError("kmeans-max-iterations must be >= 1");
    if (threads < 1) throw ConfigError("threads must be >= 1");
    if (geometry_window < 0) throw ConfigError("geometry-window must be >= 0");
    if (!(gating_threshold >= 0.0)) throw ConfigError("gating-threshold must be >= 0");
  }
};

namespace detail {

inline bool parse_bool(const std::string& v) {
  if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
  if (v == "0" || v == "false" || v == "no" || v == "off") return false;
  throw ConfigError("expected boolean, got '" + v + "'");
}

template <typename T>
T parse_number(const std::string& key, const std::string& v) {
  std::istringstream in(v);
  T out{};
  in >> out;
  if (in.fail() || !in.eof()) throw ConfigError("key '" + key + "': bad value '" + v + "'");
  return out;
}

}  // namespace detail

/// Set one config key. Keys are the CLI long-flag names without leading dashes.
inline void apply_config_entry(PipelineConfig& cfg, const std::string& key, const std::string& value) {
  using detail::parse_bool;
  using detail::parse_number;
  if (key == "t") {
    cfg.track_length = parse_number<int>(key, value);
  } else if (key == "k") {
    if (value == "auto") {
      cfg.k.reset();
      cfg.k_auto = true;
    } else {
      cfg.k = parse_number<int>(key, value);
      cfg.k_auto = false;
    }
  } else if (key == "seed") {
    cfg.seed = parse_number<std::uint64_t>(key, value);
  } else if (key == "leg-length") {
    cfg.lower_leg_length_m = parse_number<double>(key, value);
  } else if (key == "fix-cameras") {
    cfg.fix_cameras = parse_bool(value);
  } else if (key == "embed-variant") {
    auto v = parse_embed_variant(value);
    if (!v) throw ConfigError("embed-variant: unknown variant '" + value + "'");
    cfg.embed_variant = *v;
  } else if (key == "noise-window") {
    cfg.noise_window = parse_number<int>(key, value);
  } else if (key == "tracking-metric") {
    if (value == "cosine") cfg.tracking_metric = TrackingMetric::kCosine;
    else if (value == "euclidean") cfg.tracking_metric = TrackingMetric::kEuclidean;
    else throw ConfigError("tracking-metric: unknown metric '" + value + "'");
  } else if (key == "gating-threshold") {
    cfg.gating_threshold = parse_number<double>(key, value);
  } else if (key == "confidence-threshold") {
    cfg.confidence_threshold = parse_number<double>(key, value);
  } else if (key == "kmeans-max-iterations") {
    cfg.kmeans_max_iterations = parse_number<int>(key, value);
  } else if (key == "ransac-threshold") {
    cfg.ransac_threshold = parse_number<double>(key, value);
  } else if (key == "ransac-iterations") {
    cfg.ransac_iterations = parse_number<int>(key, value);
  } else if (key == "geometry-window") {
    cfg.geometry_window = parse_number<int>(key, value);
  } else if (key == "reference-camera") {
    cfg.reference_camera = parse_number<int>(key, value);
  } else if (key == "ba-max-iterations") {
    cfg.ba_max_iterations = parse_number<int>(key, value);
  } else if (key == "ba-gradient-tolerance") {
    cfg.ba_gradient_tolerance = parse_number<double>(key, value);
  } else if (key == "ba-step-tolerance") {
    cfg.ba_step_tolerance = parse_number<double>(key, value);
  } else if (key == "ba-huber") {
    cfg.ba_huber = parse_bool(value);
  } else if (key == "ba-huber-delta") {
    cfg.ba_huber_delta = parse_number<double>(key, value);
  } else if (key == "threads") {
    cfg.threads = parse_number<int>(key, value);
  } else {
    throw ConfigError("unknown config key '" + key + "'");
  }
}

/// Parse "key = value" lines; '#' starts a comment. Errors carry the line number.
inline PipelineConfig parse_config(std::istream& in, PipelineConfig cfg = {}) {
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      if (b == std::string::npos) return std::string{};
      const auto e = s.find_last_not_of(" \t\r");
      return s.substr(b, e - b + 1);
    };
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    try {
      apply_config_entry(cfg, key, value);
    } catch (const ConfigError& e) {
      throw ConfigError("config line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  cfg.validate();
  return cfg;
}

inline PipelineConfig read_config(const std::string& path, PipelineConfig cfg = {}) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file '" + path + "'");
  return parse_config(in, std::move(cfg));
}

}  // namespace pme
