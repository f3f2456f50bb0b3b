#include "regdiff/featgrid.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace regdiff {

FeatureGrid::FeatureGrid(int channels, int height, int width)
    : channels(channels), height(height), width(width) {
  if (channels <= 0 || height <= 0 || width <= 0) {
    throw InputDomainError("FeatureGrid: dimensions must be positive");
  }
  data.assign(static_cast<std::size_t>(channels) * height * width, 0.0f);
}

void FeatureGrid::validate() const {
  if (channels <= 0 || height <= 0 || width <= 0) {
    throw InputDomainError("FeatureGrid: dimensions must be positive");
  }
  if (data.size() != static_cast<std::size_t>(channels) * height * width) {
    throw InputDomainError("FeatureGrid: data size does not match dimensions");
  }
  for (float v : data) {
    if (!std::isfinite(v)) throw InputDomainError("FeatureGrid: nonfinite value");
  }
}

void RenderConfig::validate() const {
  if (!(splat_radius > 0.0)) throw InputDomainError("RenderConfig: splat_radius must be > 0");
  if (k_nearest < 1) throw InputDomainError("RenderConfig: k_nearest must be >= 1");
  if (!(weight_power >= 0.0)) throw InputDomainError("RenderConfig: weight_power must be >= 0");
  if (!(depth_sigma > 0.0)) throw InputDomainError("RenderConfig: depth_sigma must be > 0");
}

std::optional<Eigen::Vector3d> Warp::apply(double x, double y, double depth) const {
  if (const auto* t = std::get_if<Transform3D>(&impl_)) {
    const Eigen::Vector4d v = t->m * back_project({x, y}, depth);
    const double k = v(3);
    if (std::abs(k) < 1e-12) return std::nullopt;
    const double z = v(2) / k;
    if (z <= 0.0 || !std::isfinite(z)) return std::nullopt;
    // rendered image location is the perspective projection x'/z', y'/z'
    return Eigen::Vector3d{v(0) / v(2), v(1) / v(2), z};
  }
  if (const auto* h = std::get_if<Homography2D>(&impl_)) {
    const Eigen::Vector3d v = h->m * Eigen::Vector3d(x, y, 1.0);
    if (std::abs(v(2)) < 1e-12) return std::nullopt;
    return Eigen::Vector3d{v(0) / v(2), v(1) / v(2), depth};
  }
  if (const auto* p = std::get_if<PoseWarp>(&impl_)) {
    return (*p)(x, y, depth);
  }
  return Eigen::Vector3d{x, y, depth};
}

FeaturePointCloud lift_features(const FeatureGrid& grid, const DepthMap& depth, const Warp& warp) {
  if (grid.height != depth.height || grid.width != depth.width) {
    std::ostringstream os;
    os << "lift_features: grid is " << grid.height << "x" << grid.width << " but depth is "
       << depth.height << "x" << depth.width;
    throw InputDomainError(os.str());
  }

  FeaturePointCloud cloud;
  cloud.channels = grid.channels;
  cloud.source_grid_dims = {grid.height, grid.width};
  cloud.positions.reserve(static_cast<std::size_t>(grid.height) * grid.width);
  cloud.features.reserve(cloud.positions.capacity() * grid.channels);

  for (int y = 0; y < grid.height; ++y) {
    const double ny = (2.0 * y + 1.0 - grid.height) / grid.height;
    for (int x = 0; x < grid.width; ++x) {
      if (!depth.is_valid(y, x)) {
        ++cloud.dropped;
        continue;
      }
      const double d = depth.at(y, x);
      if (!(d > 0.0) || !std::isfinite(d)) {
        ++cloud.dropped;
        continue;
      }
      const double nx = (2.0 * x + 1.0 - grid.width) / grid.width;
      const auto warped = warp.apply(nx, ny, d);
      if (!warped || !warped->allFinite() || (*warped)(2) <= 0.0) {
        ++cloud.dropped;
        continue;
      }
      cloud.positions.push_back({(*warped)(0), (*warped)(1), (*warped)(2)});
      for (int c = 0; c < grid.channels; ++c) cloud.features.push_back(grid.at(c, y, x));
    }
  }
  return cloud;
}

namespace {

struct Candidate {
  float depth;
  int point;
  float weight;  // spatial disk weight
};

// Per-pixel candidate buckets for one render pass. Shared by the feature and
// mask outputs so both see identical weights.
std::vector<std::vector<Candidate>> gather_candidates(const FeaturePointCloud& cloud, int height,
                                                      int width, const RenderConfig& cfg) {
  std::vector<std::vector<Candidate>> buckets(static_cast<std::size_t>(height) * width);
  const double r = cfg.splat_radius;
  const double r2 = r * r;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto& p = cloud.positions[i];
    const double uc = norm_to_pixel(p.x, width);
    const double vc = norm_to_pixel(p.y, height);
    const int x0 = std::max(0, static_cast<int>(std::ceil(uc - 0.5 - r)));
    const int x1 = std::min(width - 1, static_cast<int>(std::floor(uc - 0.5 + r)));
    const int y0 = std::max(0, static_cast<int>(std::ceil(vc - 0.5 - r)));
    const int y1 = std::min(height - 1, static_cast<int>(std::floor(vc - 0.5 + r)));
    for (int y = y0; y <= y1; ++y) {
      const double dy = (y + 0.5) - vc;
      for (int x = x0; x <= x1; ++x) {
        const double dx = (x + 0.5) - uc;
        const double d2 = dx * dx + dy * dy;
        if (d2 >= r2) continue;  // zero-weight boundary contributes nothing
        const double w = std::pow(1.0 - d2 / r2, cfg.weight_power);
        if (!(w > 0.0)) continue;
        buckets[static_cast<std::size_t>(y) * width + x].push_back(
            {static_cast<float>(p.z), static_cast<int>(i), static_cast<float>(w)});
      }
    }
  }
  return buckets;
}

}  // namespace

std::pair<FeatureGrid, VisibilityMask> splat_render(const FeaturePointCloud& cloud, int height,
                                                    int width, const RenderConfig& cfg) {
  if (height <= 0 || width <= 0) {
    throw InputDomainError("splat_render: target dimensions must be positive");
  }
  cfg.validate();

  FeatureGrid out(std::max(cloud.channels, 1), height, width);
  VisibilityMask mask(height, width);
  if (cloud.size() == 0) return {std::move(out), std::move(mask)};

  auto buckets = gather_candidates(cloud, height, width, cfg);
  const int c = cloud.channels;
  std::vector<double> blended(static_cast<std::size_t>(c));

  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      auto& cands = buckets[static_cast<std::size_t>(y) * width + x];
      if (cands.empty()) continue;
      // per-pixel depth-sorted reduction keeps results independent of point
      // order and tile scheduling
      std::sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
        return a.depth != b.depth ? a.depth < b.depth : a.point < b.point;
      });
      const std::size_t keep = std::min<std::size_t>(cands.size(),
                                                     static_cast<std::size_t>(cfg.k_nearest));
      const double z_min = cands[0].depth;
      std::fill(blended.begin(), blended.end(), 0.0);
      double weight_sum = 0.0;
      for (std::size_t k = 0; k < keep; ++k) {
        const double wd = std::exp(-(cands[k].depth - z_min) / (cfg.depth_sigma * z_min));
        const double w = cands[k].weight * wd;
        weight_sum += w;
        const float* f = cloud.feature(static_cast<std::size_t>(cands[k].point));
        for (int ch = 0; ch < c; ++ch) blended[static_cast<std::size_t>(ch)] += w * f[ch];
      }
      if (weight_sum <= 0.0) continue;
      for (int ch = 0; ch < c; ++ch) {
        out.at(ch, y, x) = static_cast<float>(blended[static_cast<std::size_t>(ch)] / weight_sum);
      }
      mask.at(y, x) = static_cast<float>(std::min(1.0, weight_sum));
    }
  }
  return {std::move(out), std::move(mask)};
}

double render_linearity_check(const FeaturePointCloud& cloud_f, const FeaturePointCloud& cloud_g,
                              double alpha, double beta, int height, int width,
                              const RenderConfig& cfg) {
  if (cloud_f.size() != cloud_g.size() || cloud_f.channels != cloud_g.channels) {
    throw InputDomainError("render_linearity_check: clouds have different shapes");
  }
  for (std::size_t i = 0; i < cloud_f.size(); ++i) {
    const auto& a = cloud_f.positions[i];
    const auto& b = cloud_g.positions[i];
    if (a.x != b.x || a.y != b.y || a.z != b.z) {
      throw InputDomainError("render_linearity_check: positions differ");
    }
  }

  FeaturePointCloud combined = cloud_f;
  for (std::size_t i = 0; i < combined.features.size(); ++i) {
    combined.features[i] = static_cast<float>(alpha * cloud_f.features[i] +
                                              beta * cloud_g.features[i]);
  }

  const auto [grid_combined, mask_c] = splat_render(combined, height, width, cfg);
  const auto [grid_f, mask_f] = splat_render(cloud_f, height, width, cfg);
  const auto [grid_g, mask_g] = splat_render(cloud_g, height, width, cfg);
  (void)mask_c;
  (void)mask_f;
  (void)mask_g;

  double max_abs = 0.0;
  for (std::size_t i = 0; i < grid_combined.data.size(); ++i) {
    const double recombined = alpha * grid_f.data[i] + beta * grid_g.data[i];
    max_abs = std::max(max_abs, std::abs(grid_combined.data[i] - recombined));
  }
  return max_abs;
}

DepthMap downsample_depth(const DepthMap& depth, int factor) {
  if (factor < 1 || (factor & (factor - 1)) != 0) {
    throw InputDomainError("downsample_depth: factor must be a power of two");
  }
  if (depth.height % factor != 0 || depth.width % factor != 0) {
    throw InputDomainError("downsample_depth: factor must divide both dimensions");
  }
  if (factor == 1) return depth;

  DepthMap out;
  out.height = depth.height / factor;
  out.width = depth.width / factor;
  out.values.resize(static_cast<std::size_t>(out.height) * out.width);
  if (!depth.valid.empty()) out.valid.resize(out.values.size());
  for (int y = 0; y < out.height; ++y) {
    for (int x = 0; x < out.width; ++x) {
      out.at(y, x) = depth.at(y * factor, x * factor);
      if (!depth.valid.empty()) {
        out.valid[static_cast<std::size_t>(y) * out.width + x] =
            depth.valid[static_cast<std::size_t>(y) * factor * depth.width + x * factor];
      }
    }
  }
  return out;
}

}  // namespace regdiff
