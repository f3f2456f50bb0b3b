#pragma once

#include <optional>
#include <string>
#include <vector>

#include "regdiff/detect.hpp"
#include "regdiff/io.hpp"
#include "regdiff/toml.hpp"

namespace regdiff {

/// Strategy selection as written in a run config; resolved against a pair's
/// available inputs at run time.
struct StrategySpec {
  std::string name = "auto";
  std::optional<std::array<double, 9>> homography;    // row-major, supplied variants
  std::optional<std::array<double, 16>> transform;    // row-major
  RansacConfig ransac;
};

struct RunConfig {
  StrategySpec strategy;
  PipelineConfig pipeline;
  GeneratorConfig generator;
  std::vector<std::string> pairs;  // optional input listing
  std::string output_dir;
};

RunConfig run_config_from_toml(const TomlTable& table);
RunConfig load_run_config(const std::filesystem::path& path);

/// Binds a strategy spec to one pair's inputs. Throws InputDomainError naming
/// the missing input when the strategy's requirements are not met. "auto"
/// picks ground_truth_pose when cameras are present, then
/// transform3d_estimated (correspondences + depth), then identity.
RegistrationStrategy resolve_strategy(const StrategySpec& spec, const PairInputs& inputs);

/// Worker-thread budget for batch operations; REGDIFF_THREADS caps it.
int thread_budget();

}  // namespace regdiff
