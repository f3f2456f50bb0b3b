#pragma once

#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "regdiff/featgrid.hpp"
#include "regdiff/features.hpp"
#include "regdiff/geometry.hpp"

namespace regdiff {

// ---------------------------------------------------------------------------
// Registration strategies. The "1 -> 2" direction means "content of image 1
// expressed in image 2's frame"; supplied transforms/homographies are 1 -> 2.
// ---------------------------------------------------------------------------

struct IdentityStrategy {};

struct HomographySupplied {
  Homography2D h_1to2;
};

struct HomographyEstimated {
  CorrespondenceSet corr;  // (image 1 side, image 2 side)
};

struct Transform3DSupplied {
  Transform3D t_1to2;
};

struct Transform3DEstimated {
  CorrespondenceSet corr;
  RansacConfig ransac;
};

struct GroundTruthPose {
  CameraModel cam1;
  CameraModel cam2;
};

using RegistrationStrategy = std::variant<IdentityStrategy, HomographySupplied,
                                          HomographyEstimated, Transform3DSupplied,
                                          Transform3DEstimated, GroundTruthPose>;

struct DirectionDiagnostics {
  int inlier_count = -1;
  int valid_samples = -1;
  double residual_rms = 0.0;
  double condition_number = 0.0;
  std::array<double, 4> transform_last_row{0, 0, 0, 1};
  bool has_transform = false;
};

struct PlanDiagnostics {
  std::string strategy;
  DirectionDiagnostics dir_1to2;
  DirectionDiagnostics dir_2to1;
  double composition_residual = 0.0;  // max displacement of round-tripped sample points
};

/// Both directional warps resolved from a strategy, plus what the estimators
/// reported on the way.
struct RegistrationPlan {
  Warp warp_1to2;
  Warp warp_2to1;
  PlanDiagnostics diag;
};

/// Resolves a strategy into both directional warps. 3D strategies need both
/// depth maps (pass nullptr otherwise); estimated variants are fit
/// independently per direction, never by inverting the other fit.
/// width/height fix the pixel frame for the ground-truth-pose path.
RegistrationPlan build_plan(const RegistrationStrategy& strategy, const DepthMap* depth1,
                            const DepthMap* depth2, int width, int height);

/// One resolution level of a difference pyramid: H = mask * (target - warped).
struct DifferenceLevel {
  FeatureGrid diff;
  VisibilityMask mask;
};

struct DifferencePyramid {
  std::vector<DifferenceLevel> levels;
};

/// Masked feature differencing at every pyramid level, in both directions.
/// Returns (pyramid for image 1, pyramid for image 2): the image-1 output
/// differences image 1's features against image 2's features warped 2 -> 1.
/// Both operands are rendered with the same splat configuration (the target
/// through the identity warp), so the renderer's point-spread cancels in the
/// difference and identical registered inputs give an exactly-zero H. The
/// level mask is the warped-side visibility gated by target-depth validity.
/// Depth per level comes from downsample_depth; identity/homography plans
/// need no depth (a unit depth plane is substituted).
std::pair<DifferencePyramid, DifferencePyramid> warp_and_difference(
    const FeaturePyramid& pyr1, const FeaturePyramid& pyr2, const DepthMap* depth1,
    const DepthMap* depth2, const RegistrationPlan& plan, const RenderConfig& render_cfg);

}  // namespace regdiff
