#include "regdiff/features.hpp"

#include <opencv2/imgproc.hpp>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace regdiff {

namespace {

constexpr double kResmoothSigma = 0.5;
constexpr double kPi = 3.14159265358979323846;

void gaussian_blur(const float* src, float* dst, int h, int w, double sigma) {
  const cv::Mat in(h, w, CV_32F, const_cast<float*>(src));
  cv::Mat out(h, w, CV_32F, dst);
  const int k = 2 * static_cast<int>(std::ceil(3.0 * sigma)) + 1;
  cv::GaussianBlur(in, out, cv::Size(k, k), sigma, sigma, cv::BORDER_REFLECT_101);
}

// mean/variance over interior pixels only; boundary rows/cols carry blur
// artifacts that would contaminate the statistics
void standardize_channel(float* data, int h, int w, int border) {
  const int y0 = std::min(border, std::max(0, h / 2 - 1));
  const int x0 = std::min(border, std::max(0, w / 2 - 1));
  double sum = 0.0, sq = 0.0;
  std::int64_t count = 0;
  for (int y = y0; y < h - y0; ++y) {
    for (int x = x0; x < w - x0; ++x) {
      const double v = data[static_cast<std::size_t>(y) * w + x];
      sum += v;
      sq += v * v;
      ++count;
    }
  }
  const double mean = sum / static_cast<double>(count);
  const double var = std::max(0.0, sq / static_cast<double>(count) - mean * mean);
  const double sd = std::sqrt(var);
  const std::size_t total = static_cast<std::size_t>(h) * w;
  if (sd < 1e-12) {
    for (std::size_t i = 0; i < total; ++i) data[i] = static_cast<float>(data[i] - mean);
  } else {
    for (std::size_t i = 0; i < total; ++i) data[i] = static_cast<float>((data[i] - mean) / sd);
  }
}

FeatureGrid box_downsample_2x(const FeatureGrid& src) {
  FeatureGrid dst(src.channels, src.height / 2, src.width / 2);
  for (int c = 0; c < src.channels; ++c) {
    for (int y = 0; y < dst.height; ++y) {
      for (int x = 0; x < dst.width; ++x) {
        const float a = src.at(c, 2 * y, 2 * x);
        const float b = src.at(c, 2 * y, 2 * x + 1);
        const float d = src.at(c, 2 * y + 1, 2 * x);
        const float e = src.at(c, 2 * y + 1, 2 * x + 1);
        dst.at(c, y, x) = 0.25f * (a + b + d + e);
      }
    }
  }
  return dst;
}

}  // namespace

int FeatureConfig::channel_count() const {
  int c = 0;
  if (include_color) c += 3 * static_cast<int>(gaussian_sigmas.size());
  if (include_gradients) c += 5;  // magnitude + 4 orientation bins
  return c;
}

void FeatureConfig::validate() const {
  if (levels < 1) throw InputDomainError("FeatureConfig: levels must be >= 1");
  if (!include_color && !include_gradients) {
    throw InputDomainError("FeatureConfig: at least one channel family must be enabled");
  }
  if (include_color && gaussian_sigmas.empty()) {
    throw InputDomainError("FeatureConfig: color channels need at least one sigma");
  }
  for (double s : gaussian_sigmas) {
    if (!(s > 0.0)) throw InputDomainError("FeatureConfig: sigmas must be positive");
  }
}

FeaturePyramid extract_pyramid(const ImageRGB& image, const FeatureConfig& cfg) {
  cfg.validate();
  if (image.channels != 3) throw InputDomainError("extract_pyramid: expected a 3-channel image");
  const int h = image.height;
  const int w = image.width;
  const int min_extent = (1 << (cfg.levels - 1)) * 8;
  if (h < min_extent || w < min_extent) {
    std::ostringstream os;
    os << "extract_pyramid: image " << h << "x" << w << " too small for " << cfg.levels
       << " levels (needs >= " << min_extent << " per side)";
    throw InputDomainError(os.str());
  }

  const double smooth_sigma = cfg.gaussian_sigmas.empty() ? 1.0 : cfg.gaussian_sigmas.front();
  FeatureGrid level0(cfg.channel_count(), h, w);
  int ch = 0;

  std::vector<float> gray(static_cast<std::size_t>(h) * w, 0.0f);
  {
    // smoothed luminance feeds the gradient channels
    std::vector<float> tmp(gray.size());
    for (std::size_t i = 0; i < gray.size(); ++i) {
      tmp[i] = 0.299f * image.data[i] +
               0.587f * image.data[gray.size() + i] +
               0.114f * image.data[2 * gray.size() + i];
    }
    gaussian_blur(tmp.data(), gray.data(), h, w, smooth_sigma);
  }

  if (cfg.include_color) {
    for (double sigma : cfg.gaussian_sigmas) {
      for (int c = 0; c < 3; ++c) {
        gaussian_blur(image.channel(c), level0.channel(ch++), h, w, sigma);
      }
    }
  }

  if (cfg.include_gradients) {
    float* mag = level0.channel(ch);
    float* bins[4] = {level0.channel(ch + 1), level0.channel(ch + 2), level0.channel(ch + 3),
                      level0.channel(ch + 4)};
    ch += 5;
    auto g = [&](int y, int x) {
      return gray[static_cast<std::size_t>(std::clamp(y, 0, h - 1)) * w + std::clamp(x, 0, w - 1)];
    };
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const double gx = 0.5 * (g(y, x + 1) - g(y, x - 1));
        const double gy = 0.5 * (g(y + 1, x) - g(y - 1, x));
        const double m = std::hypot(gx, gy);
        const std::size_t idx = static_cast<std::size_t>(y) * w + x;
        mag[idx] = static_cast<float>(m);
        if (m <= 0.0) continue;
        double theta = std::atan2(gy, gx);
        if (theta < 0.0) theta += kPi;
        if (theta >= kPi) theta -= kPi;
        // soft assignment between adjacent bins keeps the features continuous
        const double t = theta / (kPi / 4.0);
        const int k0 = std::min(3, static_cast<int>(t));
        const double frac = t - k0;
        bins[k0][idx] += static_cast<float>(m * (1.0 - frac));
        bins[(k0 + 1) % 4][idx] += static_cast<float>(m * frac);
      }
    }
  }

  double max_sigma = smooth_sigma;
  for (double s : cfg.gaussian_sigmas) max_sigma = std::max(max_sigma, s);
  const int border = static_cast<int>(std::ceil(max_sigma));
  for (int c = 0; c < level0.channels; ++c) standardize_channel(level0.channel(c), h, w, border);

  FeaturePyramid pyramid;
  pyramid.levels.push_back(std::move(level0));
  for (int l = 1; l < cfg.levels; ++l) {
    FeatureGrid down = box_downsample_2x(pyramid.levels.back());
    FeatureGrid smoothed(down.channels, down.height, down.width);
    for (int c = 0; c < down.channels; ++c) {
      gaussian_blur(down.channel(c), smoothed.channel(c), down.height, down.width, kResmoothSigma);
    }
    pyramid.levels.push_back(std::move(smoothed));
  }
  return pyramid;
}

}  // namespace regdiff
