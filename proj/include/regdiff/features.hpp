#pragma once

#include <vector>

#include "regdiff/featgrid.hpp"

namespace regdiff {

/// Configuration of the handcrafted multi-scale feature extractor. With the
/// defaults this yields 8 channels per level: smoothed RGB (3 per sigma) plus
/// gradient magnitude and 4 soft orientation bins.
struct FeatureConfig {
  int levels = 3;
  std::vector<double> gaussian_sigmas = {1.0};
  bool include_color = true;
  bool include_gradients = true;

  int channel_count() const;
  void validate() const;
};

/// Multi-resolution feature maps; level l has resolution (H/2^l, W/2^l) and
/// all levels share the channel count.
struct FeaturePyramid {
  std::vector<FeatureGrid> levels;

  int channels() const { return levels.empty() ? 0 : levels.front().channels; }
};

/// Deterministic feature extraction. Level 0 concatenates Gaussian-smoothed
/// RGB and gradient responses, each channel standardized over interior pixels
/// (a border of width ceil(max sigma) is excluded from the statistics).
/// Deeper levels are 2x2 box-downsampled from the previous level and
/// re-smoothed. Bit-identical for identical inputs.
FeaturePyramid extract_pyramid(const ImageRGB& image, const FeatureConfig& cfg);

}  // namespace regdiff
