#pragma once

#include <utility>
#include <vector>

#include "regdiff/dfrm.hpp"

namespace regdiff {

/// Normalized change-evidence map in [0, 1]; raw_max keeps the
/// pre-normalization scale for score calibration.
struct Heatmap {
  int height = 0;
  int width = 0;
  std::vector<float> values;
  double raw_max = 0.0;

  float at(int y, int x) const { return values[static_cast<std::size_t>(y) * width + x]; }
};

struct ScoredBox {
  double x_min = 0, y_min = 0, x_max = 0, y_max = 0;  // pixels, full resolution
  double score = 0.0;
};

struct DetectConfig {
  double heat_threshold = 0.35;
  int min_area = 16;      // pixels^2
  int morph_radius = 1;   // closing radius
  int max_boxes = 100;

  void validate() const;
};

/// Per level: per-pixel channel L2 norm, bilinear upsample to the target
/// size, average across levels; normalize by the 99.5th percentile, clip to
/// [0, 1]. raw_max records the pre-normalization maximum.
Heatmap fuse_heatmap(const DifferencePyramid& pyramid, int height, int width);

/// Threshold, close, 8-connected components, tight boxes. Score = mean heat
/// inside the component scaled by min(1, raw_max); components under min_area
/// dropped; sorted by descending score (index tie-break), truncated.
std::vector<ScoredBox> heatmap_to_boxes(const Heatmap& heat, const DetectConfig& cfg);

struct PipelineConfig {
  FeatureConfig features;
  RenderConfig render;
  DetectConfig detect;
};

struct PipelineResult {
  std::vector<ScoredBox> boxes1;
  std::vector<ScoredBox> boxes2;
  Heatmap heat1;
  Heatmap heat2;
  VisibilityMask vis1;  // fused v_{2->1} at full resolution
  VisibilityMask vis2;  // fused v_{1->2}
  PlanDiagnostics registration;
};

/// Full pipeline: features -> registration plan -> warp/difference -> fused
/// heatmaps -> scored boxes for both images. Deterministic for fixed configs.
PipelineResult detect_changes(const ImageRGB& img1, const ImageRGB& img2, const DepthMap* depth1,
                              const DepthMap* depth2, const RegistrationStrategy& strategy,
                              const PipelineConfig& cfg);

/// Average of the per-level visibility masks, upsampled to full resolution.
VisibilityMask fuse_visibility(const DifferencePyramid& pyramid, int height, int width);

}  // namespace regdiff
