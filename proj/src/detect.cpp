#include "regdiff/detect.hpp"

#include <opencv2/imgproc.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace regdiff {

namespace {

// per-pixel L2 norm across channels, bilinearly resized to (height, width)
cv::Mat level_norm_upsampled(const FeatureGrid& grid, int height, int width) {
  cv::Mat norm(grid.height, grid.width, CV_32F, cv::Scalar(0));
  const std::size_t hw = static_cast<std::size_t>(grid.height) * grid.width;
  for (int c = 0; c < grid.channels; ++c) {
    const float* p = grid.channel(c);
    float* n = norm.ptr<float>(0);
    for (std::size_t i = 0; i < hw; ++i) n[i] += p[i] * p[i];
  }
  cv::sqrt(norm, norm);
  if (grid.height == height && grid.width == width) return norm;
  cv::Mat up;
  cv::resize(norm, up, cv::Size(width, height), 0.0, 0.0, cv::INTER_LINEAR);
  return up;
}

float percentile(std::vector<float> values, double q) {
  if (values.empty()) return 0.0f;
  const auto idx = static_cast<std::size_t>(
      std::min<double>(static_cast<double>(values.size() - 1),
                       std::floor(q * static_cast<double>(values.size() - 1) + 0.5)));
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(idx), values.end());
  return values[idx];
}

}  // namespace

void DetectConfig::validate() const {
  if (!(heat_threshold > 0.0) || !(heat_threshold < 1.0)) {
    throw InputDomainError("DetectConfig: heat_threshold must be in (0, 1)");
  }
  if (min_area < 0) throw InputDomainError("DetectConfig: min_area must be >= 0");
  if (morph_radius < 0) throw InputDomainError("DetectConfig: morph_radius must be >= 0");
  if (max_boxes < 1) throw InputDomainError("DetectConfig: max_boxes must be >= 1");
}

Heatmap fuse_heatmap(const DifferencePyramid& pyramid, int height, int width) {
  if (pyramid.levels.empty()) throw InputDomainError("fuse_heatmap: empty difference pyramid");
  if (height <= 0 || width <= 0) throw InputDomainError("fuse_heatmap: bad target size");

  cv::Mat acc(height, width, CV_32F, cv::Scalar(0));
  for (const auto& level : pyramid.levels) {
    acc += level_norm_upsampled(level.diff, height, width);
  }
  acc /= static_cast<float>(pyramid.levels.size());

  Heatmap heat;
  heat.height = height;
  heat.width = width;
  heat.values.assign(acc.ptr<float>(0), acc.ptr<float>(0) + static_cast<std::size_t>(height) * width);

  double raw_max = 0.0;
  for (float v : heat.values) raw_max = std::max(raw_max, static_cast<double>(v));
  heat.raw_max = raw_max;

  float denom = percentile(heat.values, 0.995);
  if (!(denom > 0.0f)) denom = static_cast<float>(raw_max);  // near-empty map: fall back to the peak
  if (denom > 0.0f) {
    for (float& v : heat.values) v = std::min(1.0f, v / denom);
  }
  return heat;
}

std::vector<ScoredBox> heatmap_to_boxes(const Heatmap& heat, const DetectConfig& cfg) {
  cfg.validate();
  if (heat.height <= 0 || heat.width <= 0) throw InputDomainError("heatmap_to_boxes: empty heatmap");

  cv::Mat binary(heat.height, heat.width, CV_8U);
  for (int y = 0; y < heat.height; ++y) {
    for (int x = 0; x < heat.width; ++x) {
      binary.at<std::uint8_t>(y, x) = heat.at(y, x) >= cfg.heat_threshold ? 255 : 0;
    }
  }

  if (cfg.morph_radius > 0) {
    const int k = 2 * cfg.morph_radius + 1;
    const cv::Mat element = cv::getStructuringElement(cv::MORPH_ELLIPSE, cv::Size(k, k));
    cv::morphologyEx(binary, binary, cv::MORPH_CLOSE, element);
  }

  cv::Mat labels, stats, centroids;
  const int n = cv::connectedComponentsWithStats(binary, labels, stats, centroids, 8, CV_32S);

  std::vector<ScoredBox> boxes;
  std::vector<double> heat_sum(static_cast<std::size_t>(n), 0.0);
  std::vector<int> area(static_cast<std::size_t>(n), 0);
  for (int y = 0; y < heat.height; ++y) {
    const int* row = labels.ptr<int>(y);
    for (int x = 0; x < heat.width; ++x) {
      const int l = row[x];
      if (l == 0) continue;
      heat_sum[static_cast<std::size_t>(l)] += heat.at(y, x);
      area[static_cast<std::size_t>(l)] += 1;
    }
  }

  const double calibration = std::min(1.0, heat.raw_max);
  for (int l = 1; l < n; ++l) {
    if (area[static_cast<std::size_t>(l)] < cfg.min_area) continue;
    ScoredBox box;
    box.x_min = stats.at<int>(l, cv::CC_STAT_LEFT);
    box.y_min = stats.at<int>(l, cv::CC_STAT_TOP);
    box.x_max = box.x_min + stats.at<int>(l, cv::CC_STAT_WIDTH);
    box.y_max = box.y_min + stats.at<int>(l, cv::CC_STAT_HEIGHT);
    box.score = std::clamp(heat_sum[static_cast<std::size_t>(l)] /
                               area[static_cast<std::size_t>(l)] * calibration,
                           0.0, 1.0);
    boxes.push_back(box);
  }

  // score-descending with discovery-order tie-break keeps output deterministic
  std::vector<std::size_t> order(boxes.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return boxes[a].score > boxes[b].score;
  });
  std::vector<ScoredBox> sorted;
  for (std::size_t i = 0; i < order.size() && i < static_cast<std::size_t>(cfg.max_boxes); ++i) {
    sorted.push_back(boxes[order[i]]);
  }
  return sorted;
}

VisibilityMask fuse_visibility(const DifferencePyramid& pyramid, int height, int width) {
  if (pyramid.levels.empty()) throw InputDomainError("fuse_visibility: empty difference pyramid");
  cv::Mat acc(height, width, CV_32F, cv::Scalar(0));
  for (const auto& level : pyramid.levels) {
    const cv::Mat m(level.mask.height, level.mask.width, CV_32F,
                    const_cast<float*>(level.mask.values.data()));
    if (level.mask.height == height && level.mask.width == width) {
      acc += m;
    } else {
      cv::Mat up;
      cv::resize(m, up, cv::Size(width, height), 0.0, 0.0, cv::INTER_LINEAR);
      acc += up;
    }
  }
  acc /= static_cast<float>(pyramid.levels.size());

  VisibilityMask out(height, width);
  std::copy(acc.ptr<float>(0), acc.ptr<float>(0) + out.values.size(), out.values.begin());
  return out;
}

PipelineResult detect_changes(const ImageRGB& img1, const ImageRGB& img2, const DepthMap* depth1,
                              const DepthMap* depth2, const RegistrationStrategy& strategy,
                              const PipelineConfig& cfg) {
  if (img1.height != img2.height || img1.width != img2.width) {
    throw InputDomainError("detect_changes: images have different sizes");
  }
  const FeaturePyramid pyr1 = extract_pyramid(img1, cfg.features);
  const FeaturePyramid pyr2 = extract_pyramid(img2, cfg.features);

  const RegistrationPlan plan = build_plan(strategy, depth1, depth2, img1.width, img1.height);
  auto [diff1, diff2] = warp_and_difference(pyr1, pyr2, depth1, depth2, plan, cfg.render);

  PipelineResult result;
  result.registration = plan.diag;
  result.heat1 = fuse_heatmap(diff1, img1.height, img1.width);
  result.heat2 = fuse_heatmap(diff2, img2.height, img2.width);
  result.vis1 = fuse_visibility(diff1, img1.height, img1.width);
  result.vis2 = fuse_visibility(diff2, img2.height, img2.width);
  result.boxes1 = heatmap_to_boxes(result.heat1, cfg.detect);
  result.boxes2 = heatmap_to_boxes(result.heat2, cfg.detect);
  return result;
}

}  // namespace regdiff
