#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <variant>
#include <vector>

#include "regdiff/geometry.hpp"

namespace regdiff {

/// Dense c x h x w feature map, channel-major, float32 (the on-disk dtype).
struct FeatureGrid {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<float> data;  // size c*h*w

  FeatureGrid() = default;
  FeatureGrid(int channels, int height, int width);

  float at(int c, int y, int x) const {
    return data[(static_cast<std::size_t>(c) * height + y) * width + x];
  }
  float& at(int c, int y, int x) {
    return data[(static_cast<std::size_t>(c) * height + y) * width + x];
  }
  const float* channel(int c) const { return data.data() + static_cast<std::size_t>(c) * height * width; }
  float* channel(int c) { return data.data() + static_cast<std::size_t>(c) * height * width; }

  void validate() const;  // finite values, positive dims
};

/// RGB images are stored as 3-channel grids in [0, 1].
using ImageRGB = FeatureGrid;

/// Soft per-pixel visibility in [0, 1]; exactly 0 where no point splats.
struct VisibilityMask {
  int height = 0;
  int width = 0;
  std::vector<float> values;

  VisibilityMask() = default;
  VisibilityMask(int height, int width)
      : height(height), width(width), values(static_cast<std::size_t>(height) * width, 0.0f) {}

  float at(int y, int x) const { return values[static_cast<std::size_t>(y) * width + x]; }
  float& at(int y, int x) { return values[static_cast<std::size_t>(y) * width + x]; }
};

struct RenderConfig {
  double splat_radius = 1.5;  // pixels at target resolution
  int k_nearest = 4;          // points accumulated per pixel
  double weight_power = 2.0;  // exponent of the disk profile
  double depth_sigma = 0.05;  // relative depth softness of the accumulation

  void validate() const;
};

/// 3D points carrying feature vectors. Positions are (x, y) in normalized
/// image coordinates of the target view plus the depth there; points the warp
/// dropped (behind camera, at infinity, invalid depth) are counted, not stored.
struct FeaturePointCloud {
  struct Position {
    double x, y, z;
  };
  std::vector<Position> positions;
  std::vector<float> features;  // n x channels, row-major
  int channels = 0;
  std::pair<int, int> source_grid_dims{0, 0};  // (h, w)
  int dropped = 0;

  std::size_t size() const { return positions.size(); }
  const float* feature(std::size_t i) const { return features.data() + i * channels; }
};

/// A resolved warp: identity, planar homography, 4x4 transform on the
/// back-projected space, or the exact known-pose warp.
class Warp {
 public:
  Warp() : impl_(std::monostate{}) {}
  explicit Warp(Transform3D t) : impl_(std::move(t)) {}
  explicit Warp(Homography2D h) : impl_(std::move(h)) {}
  explicit Warp(PoseWarp p) : impl_(std::move(p)) {}

  static Warp identity() { return Warp{}; }

  bool is_identity() const { return std::holds_alternative<std::monostate>(impl_); }
  const Transform3D* transform() const { return std::get_if<Transform3D>(&impl_); }
  const Homography2D* homography() const { return std::get_if<Homography2D>(&impl_); }
  const PoseWarp* pose() const { return std::get_if<PoseWarp>(&impl_); }

  /// Normalized (x, y) + depth -> warped (x, y, depth); nullopt = point dropped.
  std::optional<Eigen::Vector3d> apply(double x, double y, double depth) const;

 private:
  std::variant<std::monostate, Transform3D, Homography2D, PoseWarp> impl_;
};

/// Lifts every grid cell: back-project the cell's normalized center with its
/// depth, apply the warp, keep (x, y, depth) plus the cell's feature vector.
/// The homography route stays in 2D and carries depth through unchanged.
FeaturePointCloud lift_features(const FeatureGrid& grid, const DepthMap& depth, const Warp& warp);

/// Soft splatting with K-nearest z-buffer accumulation. Each point covers the
/// disk of splat_radius pixels around its projected location with spatial
/// weight (1 - (dist/r)^2)^p; per pixel the k_nearest points by depth are
/// blended with weights w_s * exp(-(z - z_min)/(depth_sigma * z_min)),
/// normalized over the kept set. The mask accumulates the same unnormalized
/// weights for the constant value 1, clamped to [0, 1]. Pixels no point
/// touches hold the zero feature vector and mask 0.
std::pair<FeatureGrid, VisibilityMask> splat_render(const FeaturePointCloud& cloud, int height,
                                                    int width, const RenderConfig& cfg);

/// With fixed geometry the renderer is linear in features; this renders
/// alpha*f + beta*g against the recombined per-cloud renders and returns the
/// max absolute discrepancy. Throws InputDomainError on position mismatch.
double render_linearity_check(const FeaturePointCloud& cloud_f, const FeaturePointCloud& cloud_g,
                              double alpha, double beta, int height, int width,
                              const RenderConfig& cfg);

/// Nearest-neighbor decimation keeping the top-left sample of each block.
/// factor must be a power of two dividing both dimensions.
DepthMap downsample_depth(const DepthMap& depth, int factor);

}  // namespace regdiff
