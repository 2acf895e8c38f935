#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>

#include "coopfuse/eval.hpp"
#include "coopfuse/keypoints.hpp"
#include "coopfuse/localization.hpp"
#include "coopfuse/matching.hpp"
#include "coopfuse/sim.hpp"

namespace coopfuse {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Everything a run needs besides the seed and the pipeline/n_v selection.
struct AppConfig {
  SimConfig sim;
  SelectConfig select;
  MatchConfig match;
  ConsensusConfig consensus;
  double nms_fusion_iou = 0.3;
  double final_nms_iou = 0.01;
};

// Strict JSON loader: unknown keys, type mismatches, and out-of-range values
// raise ConfigError naming the offending field. Every field is optional and
// falls back to its default.
AppConfig load_config(const std::filesystem::path& path);
AppConfig parse_config(const std::string& json_text);
void validate_config(const AppConfig& cfg);
std::string config_to_json(const AppConfig& cfg);

PipelineConfig make_pipeline_config(const AppConfig& cfg, Pipeline pipeline, int n_v);

}  // namespace coopfuse
