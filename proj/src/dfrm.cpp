#include "regdiff/dfrm.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace regdiff {

namespace {

DirectionDiagnostics transform_diag(const TransformEstimate& est) {
  DirectionDiagnostics d;
  d.condition_number = est.condition_number;
  d.residual_rms = est.residual_rms;
  for (int c = 0; c < 4; ++c) d.transform_last_row[static_cast<std::size_t>(c)] = est.transform.m(3, c);
  d.has_transform = true;
  return d;
}

DirectionDiagnostics ransac_diag(const RansacResult& res) {
  DirectionDiagnostics d = transform_diag(res.final_fit);
  d.inlier_count = res.inlier_count;
  d.valid_samples = res.valid_samples;
  d.residual_rms = res.residual_rms;
  return d;
}

void require_depth(const DepthMap* depth1, const DepthMap* depth2) {
  if (depth1 == nullptr || depth2 == nullptr) {
    throw InputDomainError("build_plan: this registration strategy requires both depth maps");
  }
}

// max round-trip displacement of a coarse grid of sample points; reported in
// diagnostics and the basis of the plan-invertibility property
double composition_residual(const Warp& w12, const Warp& w21) {
  double worst = 0.0;
  for (double y = -0.75; y <= 0.76; y += 0.375) {
    for (double x = -0.75; x <= 0.76; x += 0.375) {
      for (double d : {0.8, 1.6, 3.2}) {
        const auto fwd = w12.apply(x, y, d);
        if (!fwd) continue;
        const auto back = w21.apply((*fwd)(0), (*fwd)(1), (*fwd)(2));
        if (!back) continue;
        worst = std::max(worst, std::hypot((*back)(0) - x, (*back)(1) - y));
      }
    }
  }
  return worst;
}

}  // namespace

RegistrationPlan build_plan(const RegistrationStrategy& strategy, const DepthMap* depth1,
                            const DepthMap* depth2, int width, int height) {
  RegistrationPlan plan;

  if (std::holds_alternative<IdentityStrategy>(strategy)) {
    plan.diag.strategy = "identity";
    plan.warp_1to2 = Warp::identity();
    plan.warp_2to1 = Warp::identity();
  } else if (const auto* hs = std::get_if<HomographySupplied>(&strategy)) {
    plan.diag.strategy = "homography_supplied";
    plan.warp_1to2 = Warp(hs->h_1to2.normalized());
    plan.warp_2to1 = Warp(hs->h_1to2.inverse());
  } else if (const auto* he = std::get_if<HomographyEstimated>(&strategy)) {
    plan.diag.strategy = "homography_estimated";
    he->corr.validate();
    try {
      plan.warp_1to2 = Warp(estimate_homography_dlt(he->corr));
      plan.warp_2to1 = Warp(estimate_homography_dlt(he->corr.swapped()));
    } catch (const InsufficientDataError& e) {
      throw RegistrationFailureError(std::string("homography estimation failed: ") + e.what());
    } catch (const DegenerateConfigurationError& e) {
      throw RegistrationFailureError(std::string("homography estimation failed: ") + e.what());
    }
  } else if (const auto* ts = std::get_if<Transform3DSupplied>(&strategy)) {
    plan.diag.strategy = "transform3d_supplied";
    require_depth(depth1, depth2);
    plan.warp_1to2 = Warp(ts->t_1to2);
    plan.warp_2to1 = Warp(ts->t_1to2.inverse());
    DirectionDiagnostics d;
    for (int c = 0; c < 4; ++c) d.transform_last_row[static_cast<std::size_t>(c)] = ts->t_1to2.m(3, c);
    d.has_transform = true;
    plan.diag.dir_1to2 = d;
  } else if (const auto* te = std::get_if<Transform3DEstimated>(&strategy)) {
    plan.diag.strategy = "transform3d_estimated";
    require_depth(depth1, depth2);
    te->corr.validate();
    // independent fits per direction; the unconstrained fit need not have a
    // well-conditioned inverse
    try {
      const RansacResult r12 = estimate_transform_ransac(te->corr, *depth1, *depth2, te->ransac);
      const RansacResult r21 = estimate_transform_ransac(te->corr.swapped(), *depth2, *depth1,
                                                         te->ransac);
      plan.warp_1to2 = Warp(r12.transform);
      plan.warp_2to1 = Warp(r21.transform);
      plan.diag.dir_1to2 = ransac_diag(r12);
      plan.diag.dir_2to1 = ransac_diag(r21);
    } catch (const InsufficientDataError& e) {
      throw RegistrationFailureError(std::string("transform estimation failed: ") + e.what());
    } catch (const DegenerateConfigurationError& e) {
      throw RegistrationFailureError(std::string("transform estimation failed: ") + e.what());
    }
  } else if (const auto* gt = std::get_if<GroundTruthPose>(&strategy)) {
    plan.diag.strategy = "ground_truth_pose";
    require_depth(depth1, depth2);
    plan.warp_1to2 = Warp(relative_pose_transform(gt->cam1, gt->cam2, width, height));
    plan.warp_2to1 = Warp(relative_pose_transform(gt->cam2, gt->cam1, width, height));
  }

  plan.diag.composition_residual = composition_residual(plan.warp_1to2, plan.warp_2to1);
  return plan;
}

namespace {

DepthMap level_depth(const DepthMap* depth, const FeatureGrid& grid) {
  if (!depth) return DepthMap::constant(grid.height, grid.width, 1.0f);
  if (depth->height != grid.height || depth->width != grid.width) {
    throw InputDomainError("warp_and_difference: level depth does not match grid resolution");
  }
  return *depth;
}

DifferenceLevel difference_one_level(const FeatureGrid& target, const DepthMap* target_depth,
                                     const FeatureGrid& source, const DepthMap* source_depth,
                                     const Warp& warp, const RenderConfig& render_cfg) {
  // Both operands pass through the same render operator: the target through
  // the identity warp, the source through the registration warp. The splat
  // response then cancels in the difference instead of reading as change.
  const FeaturePointCloud target_cloud =
      lift_features(target, level_depth(target_depth, target), Warp::identity());
  auto [rendered_target, target_mask] =
      splat_render(target_cloud, target.height, target.width, render_cfg);

  const FeaturePointCloud source_cloud =
      lift_features(source, level_depth(source_depth, source), warp);
  auto [rendered_source, source_mask] =
      splat_render(source_cloud, target.height, target.width, render_cfg);

  DifferenceLevel level;
  level.diff = FeatureGrid(target.channels, target.height, target.width);
  level.mask = std::move(source_mask);
  const std::size_t hw = static_cast<std::size_t>(target.height) * target.width;
  // the level mask is the warped-side visibility gated by target validity
  for (std::size_t i = 0; i < hw; ++i) {
    level.mask.values[i] = std::min(level.mask.values[i], target_mask.values[i]);
  }
  for (int c = 0; c < target.channels; ++c) {
    const float* t = rendered_target.channel(c);
    const float* r = rendered_source.channel(c);
    float* out = level.diff.channel(c);
    for (std::size_t i = 0; i < hw; ++i) {
      const float m = level.mask.values[i];
      // masking law: zero mask must yield an exactly-zero difference vector
      out[i] = m == 0.0f ? 0.0f : m * (t[i] - r[i]);
    }
  }
  return level;
}

}  // namespace

std::pair<DifferencePyramid, DifferencePyramid> warp_and_difference(
    const FeaturePyramid& pyr1, const FeaturePyramid& pyr2, const DepthMap* depth1,
    const DepthMap* depth2, const RegistrationPlan& plan, const RenderConfig& render_cfg) {
  if (pyr1.levels.size() != pyr2.levels.size()) {
    throw InputDomainError("warp_and_difference: pyramids have different level counts");
  }
  if (pyr1.levels.empty()) {
    throw InputDomainError("warp_and_difference: empty pyramids");
  }

  DifferencePyramid out1, out2;
  for (std::size_t l = 0; l < pyr1.levels.size(); ++l) {
    const FeatureGrid& g1 = pyr1.levels[l];
    const FeatureGrid& g2 = pyr2.levels[l];
    if (g1.channels != g2.channels || g1.height != g2.height || g1.width != g2.width) {
      throw InputDomainError("warp_and_difference: level shapes differ between pyramids");
    }

    std::optional<DepthMap> d1_level, d2_level;
    if (depth1) {
      const int factor = depth1->height / g1.height;
      d1_level = downsample_depth(*depth1, factor);
    }
    if (depth2) {
      const int factor = depth2->height / g2.height;
      d2_level = downsample_depth(*depth2, factor);
    }

    // H^1 = v_{2->1} (G^1 - warp_{2->1}(G^2)), and symmetrically for image 2
    out1.levels.push_back(difference_one_level(g1, d1_level ? &*d1_level : nullptr, g2,
                                               d2_level ? &*d2_level : nullptr, plan.warp_2to1,
                                               render_cfg));
    out2.levels.push_back(difference_one_level(g2, d2_level ? &*d2_level : nullptr, g1,
                                               d1_level ? &*d1_level : nullptr, plan.warp_1to2,
                                               render_cfg));
  }
  return {std::move(out1), std::move(out2)};
}

}  // namespace regdiff
