#include "regdiff/geometry.hpp"

#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "regdiff/rng.hpp"

namespace regdiff {

namespace {

constexpr double kPinvRelTol = 1e-10;
constexpr double kHomographyRankRelTol = 1e-9;
constexpr double kHomogeneousEps = 1e-12;

bool finite(double v) { return std::isfinite(v); }

}  // namespace

NormalizedPoint2D normalize_pixel(int u, int v, int width, int height) {
  if (width <= 0 || height <= 0) {
    throw InputDomainError("normalize_pixel: image dimensions must be positive");
  }
  if (u < 0 || u >= width || v < 0 || v >= height) {
    std::ostringstream os;
    os << "normalize_pixel: pixel (" << u << ", " << v << ") outside " << width << "x" << height;
    throw InputDomainError(os.str());
  }
  return {(2.0 * u + 1.0 - width) / width, (2.0 * v + 1.0 - height) / height};
}

std::pair<int, int> denormalize_point(const NormalizedPoint2D& p, int width, int height) {
  if (width <= 0 || height <= 0) {
    throw InputDomainError("denormalize_point: image dimensions must be positive");
  }
  if (!finite(p.x) || !finite(p.y) || p.x < -1.0 || p.x > 1.0 || p.y < -1.0 || p.y > 1.0) {
    throw InputDomainError("denormalize_point: coordinates must lie in [-1, 1]");
  }
  const int u = static_cast<int>(std::lround(norm_to_pixel(p.x, width) - 0.5));
  const int v = static_cast<int>(std::lround(norm_to_pixel(p.y, height) - 0.5));
  return {std::clamp(u, 0, width - 1), std::clamp(v, 0, height - 1)};
}

Eigen::Vector4d back_project(const NormalizedPoint2D& p, double depth) {
  if (!finite(depth) || depth <= 0.0) {
    throw InvalidDepthError("back_project: depth must be positive and finite");
  }
  return {depth * p.x, depth * p.y, depth, 1.0};
}

// --- Transform3D -------------------------------------------------------------

Transform3D Transform3D::inverse() const {
  Eigen::Matrix4d inv;
  bool invertible = false;
  double det = 0.0;
  m.computeInverseAndDetWithCheck(inv, det, invertible);
  if (!invertible) {
    throw DegenerateConfigurationError("Transform3D::inverse: matrix is singular", {});
  }
  return Transform3D{inv};
}

std::array<double, 16> Transform3D::row_major() const {
  std::array<double, 16> out{};
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) out[static_cast<std::size_t>(r) * 4 + c] = m(r, c);
  return out;
}

Transform3D Transform3D::from_row_major(const std::array<double, 16>& values) {
  Transform3D t;
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) t.m(r, c) = values[static_cast<std::size_t>(r) * 4 + c];
  return t;
}

// --- Homography2D ------------------------------------------------------------

Homography2D Homography2D::normalized() const {
  Homography2D out{m};
  if (std::abs(m(2, 2)) > kHomogeneousEps) out.m /= m(2, 2);
  return out;
}

Homography2D Homography2D::inverse() const {
  Eigen::Matrix3d inv;
  bool invertible = false;
  double det = 0.0;
  m.computeInverseAndDetWithCheck(inv, det, invertible);
  if (!invertible) {
    throw DegenerateConfigurationError("Homography2D::inverse: matrix is singular", {});
  }
  return Homography2D{inv}.normalized();
}

std::array<double, 9> Homography2D::row_major() const {
  std::array<double, 9> out{};
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) out[static_cast<std::size_t>(r) * 3 + c] = m(r, c);
  return out;
}

Homography2D Homography2D::from_row_major(const std::array<double, 9>& values) {
  Homography2D h;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) h.m(r, c) = values[static_cast<std::size_t>(r) * 3 + c];
  return h;
}

// --- CorrespondenceSet -------------------------------------------------------

void CorrespondenceSet::validate() const {
  if (r.size() != q.size()) {
    throw InputDomainError("CorrespondenceSet: sides have different lengths");
  }
  for (std::size_t i = 0; i < r.size(); ++i) {
    for (const NormalizedPoint2D* p : {&r[i], &q[i]}) {
      if (!finite(p->x) || !finite(p->y) || p->x < -1.0 || p->x > 1.0 || p->y < -1.0 ||
          p->y > 1.0) {
        std::ostringstream os;
        os << "CorrespondenceSet: pair " << i << " outside [-1, 1]";
        throw InputDomainError(os.str());
      }
    }
  }
}

// --- DepthMap ----------------------------------------------------------------

DepthMap DepthMap::constant(int height, int width, float value) {
  if (height <= 0 || width <= 0) throw InputDomainError("DepthMap: dimensions must be positive");
  if (!(value > 0.0f) || !std::isfinite(value)) {
    throw InvalidDepthError("DepthMap::constant: value must be positive");
  }
  DepthMap d;
  d.width = width;
  d.height = height;
  d.values.assign(static_cast<std::size_t>(width) * height, value);
  return d;
}

DepthMap DepthMap::from_values(int height, int width, std::vector<float> values) {
  if (height <= 0 || width <= 0) throw InputDomainError("DepthMap: dimensions must be positive");
  if (values.size() != static_cast<std::size_t>(width) * height) {
    throw InputDomainError("DepthMap: value count does not match dimensions");
  }
  DepthMap d;
  d.width = width;
  d.height = height;
  d.values = std::move(values);
  bool any_bad = false;
  for (float v : d.values) {
    if (!(v > 0.0f) || !std::isfinite(v)) {
      any_bad = true;
      break;
    }
  }
  if (any_bad) {
    d.valid.assign(d.values.size(), 1);
    for (std::size_t i = 0; i < d.values.size(); ++i) {
      if (!(d.values[i] > 0.0f) || !std::isfinite(d.values[i])) d.valid[i] = 0;
    }
  }
  return d;
}

bool DepthMap::all_valid() const {
  if (valid.empty()) return true;
  return std::all_of(valid.begin(), valid.end(), [](std::uint8_t v) { return v != 0; });
}

std::optional<double> sample_depth_bilinear(const DepthMap& depth, const NormalizedPoint2D& p,
                                            double max_rel_spread) {
  const double fu = norm_to_pixel(p.x, depth.width) - 0.5;
  const double fv = norm_to_pixel(p.y, depth.height) - 0.5;
  const int u0 = static_cast<int>(std::floor(fu));
  const int v0 = static_cast<int>(std::floor(fv));
  if (u0 < 0 || v0 < 0 || u0 + 1 >= depth.width || v0 + 1 >= depth.height) return std::nullopt;

  const double d00 = depth.at(v0, u0);
  const double d01 = depth.at(v0, u0 + 1);
  const double d10 = depth.at(v0 + 1, u0);
  const double d11 = depth.at(v0 + 1, u0 + 1);
  if (!depth.is_valid(v0, u0) || !depth.is_valid(v0, u0 + 1) || !depth.is_valid(v0 + 1, u0) ||
      !depth.is_valid(v0 + 1, u0 + 1)) {
    return std::nullopt;
  }

  const double dmin = std::min(std::min(d00, d01), std::min(d10, d11));
  const double dmax = std::max(std::max(d00, d01), std::max(d10, d11));
  if (dmin <= 0.0) return std::nullopt;
  // 4-neighborhoods spanning a depth discontinuity are rejected outright
  if ((dmax - dmin) / dmin > max_rel_spread) return std::nullopt;

  const double a = fu - u0;
  const double b = fv - v0;
  return (1.0 - b) * ((1.0 - a) * d00 + a * d01) + b * ((1.0 - a) * d10 + a * d11);
}

// --- CameraModel -------------------------------------------------------------

void CameraModel::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0)) {
    throw InputDomainError("CameraModel: focal lengths must be positive");
  }
  const Eigen::Matrix3d orth = R.transpose() * R - Eigen::Matrix3d::Identity();
  if (orth.cwiseAbs().maxCoeff() > 1e-6) {
    throw InputDomainError("CameraModel: rotation is not orthonormal within 1e-6");
  }
}

std::optional<Eigen::Vector3d> CameraModel::project(const Eigen::Vector3d& x_world) const {
  const Eigen::Vector3d xc = world_to_camera(x_world);
  if (xc.z() <= 0.0) return std::nullopt;
  return Eigen::Vector3d{fx * xc.x() / xc.z() + cx, fy * xc.y() / xc.z() + cy, xc.z()};
}

void RansacConfig::validate() const {
  if (!(inlier_threshold > 0.0)) throw InputDomainError("RansacConfig: inlier_threshold must be > 0");
  if (max_iterations < 1) throw InputDomainError("RansacConfig: max_iterations must be >= 1");
  if (min_sample < 4) throw InputDomainError("RansacConfig: min_sample must be >= 4");
  if (!(confidence > 0.0) || !(confidence < 1.0)) {
    throw InputDomainError("RansacConfig: confidence must be in (0, 1)");
  }
}

// --- estimate_transform_lsq --------------------------------------------------

TransformEstimate estimate_transform_lsq(const Eigen::Matrix<double, Eigen::Dynamic, 4>& src,
                                         const Eigen::Matrix<double, Eigen::Dynamic, 4>& dst) {
  const auto n = src.rows();
  if (n != dst.rows()) {
    throw InputDomainError("estimate_transform_lsq: src/dst row counts differ");
  }
  if (n < 4) {
    throw InsufficientDataError("estimate_transform_lsq: need at least 4 point pairs");
  }
  if (!src.allFinite() || !dst.allFinite()) {
    throw InputDomainError("estimate_transform_lsq: nonfinite input");
  }

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(src, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::Vector4d sv = svd.singularValues();
  if (!(sv(0) > 0.0) || sv(3) <= kPinvRelTol * sv(0)) {
    throw DegenerateConfigurationError(
        "estimate_transform_lsq: source points have numerical rank < 4",
        {sv(0), sv(1), sv(2), sv(3)});
  }

  Eigen::Vector4d inv_sv;
  for (int i = 0; i < 4; ++i) inv_sv(i) = sv(i) > kPinvRelTol * sv(0) ? 1.0 / sv(i) : 0.0;
  const Eigen::Matrix<double, 4, Eigen::Dynamic> pinv =
      svd.matrixV() * inv_sv.asDiagonal() * svd.matrixU().transpose();

  TransformEstimate est;
  const Eigen::Matrix4d t_transposed = pinv * dst;
  est.transform.m = t_transposed.transpose();
  est.condition_number = sv(0) / sv(3);
  est.singular_values = sv;
  est.residual_rms = (src * t_transposed - dst).norm() / std::sqrt(static_cast<double>(n));
  return est;
}

Eigen::Vector3d apply_transform(const Transform3D& transform, const Eigen::Vector4d& p) {
  const Eigen::Vector4d v = transform.m * p;
  const double k = v(3);
  if (std::abs(k) < kHomogeneousEps) {
    throw PointAtInfinityError("apply_transform: homogeneous coordinate vanished");
  }
  return {v(0) / k, v(1) / k, v(2) / k};
}

// --- RANSAC ------------------------------------------------------------------

namespace {

struct BackProjected {
  std::vector<Eigen::Vector4d> src;
  std::vector<Eigen::Vector4d> dst;
  std::vector<int> index;  // position in the original correspondence list
};

BackProjected back_project_correspondences(const CorrespondenceSet& corr, const DepthMap& depth_r,
                                           const DepthMap& depth_q) {
  BackProjected out;
  for (std::size_t j = 0; j < corr.size(); ++j) {
    const auto dr = sample_depth_bilinear(depth_r, corr.r[j]);
    const auto dq = sample_depth_bilinear(depth_q, corr.q[j]);
    if (!dr || !dq) continue;
    out.src.push_back(back_project(corr.r[j], *dr));
    out.dst.push_back(back_project(corr.q[j], *dq));
    out.index.push_back(static_cast<int>(j));
  }
  return out;
}

// Reprojection distance in normalized image coordinates; nullopt when the
// warped point is at infinity or behind the target view.
std::optional<double> reprojection_error(const Transform3D& t, const Eigen::Vector4d& src,
                                         const NormalizedPoint2D& target) {
  const Eigen::Vector4d v = t.m * src;
  const double k = v(3);
  if (std::abs(k) < kHomogeneousEps) return std::nullopt;
  const double z = v(2) / k;
  if (z <= 0.0 || std::abs(v(2)) < kHomogeneousEps) return std::nullopt;
  const double x = v(0) / v(2);
  const double y = v(1) / v(2);
  return std::hypot(x - target.x, y - target.y);
}

Eigen::Matrix<double, Eigen::Dynamic, 4> stack(const std::vector<Eigen::Vector4d>& pts,
                                               const std::vector<int>& rows) {
  Eigen::Matrix<double, Eigen::Dynamic, 4> m(static_cast<Eigen::Index>(rows.size()), 4);
  for (std::size_t i = 0; i < rows.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = pts[rows[i]];
  return m;
}

}  // namespace

RansacResult estimate_transform_ransac(const CorrespondenceSet& corr, const DepthMap& depth_r,
                                       const DepthMap& depth_q, const RansacConfig& cfg) {
  cfg.validate();
  corr.validate();
  const int n = static_cast<int>(corr.size());
  if (n < cfg.min_sample) {
    throw InsufficientDataError("estimate_transform_ransac: fewer correspondences than min_sample");
  }

  const BackProjected pts = back_project_correspondences(corr, depth_r, depth_q);
  const int n_valid = static_cast<int>(pts.src.size());
  if (n_valid < cfg.min_sample) {
    throw RegistrationFailureError(
        "estimate_transform_ransac: too few correspondences with usable depth");
  }

  Rng rng(cfg.seed);
  std::vector<int> best_inliers;
  int iterations_needed = cfg.max_iterations;
  int it = 0;
  std::vector<int> sample(static_cast<std::size_t>(cfg.min_sample));
  for (; it < cfg.max_iterations && it < iterations_needed; ++it) {
    // distinct minimal sample
    for (int s = 0; s < cfg.min_sample;) {
      const int cand = static_cast<int>(rng.next_index(static_cast<std::uint64_t>(n_valid)));
      bool dup = false;
      for (int u = 0; u < s; ++u) dup |= sample[u] == cand;
      if (!dup) sample[s++] = cand;
    }

    Transform3D model;
    try {
      std::vector<int> rows(sample.begin(), sample.end());
      model = estimate_transform_lsq(stack(pts.src, rows), stack(pts.dst, rows)).transform;
    } catch (const DegenerateConfigurationError&) {
      continue;
    }

    std::vector<int> inliers;
    inliers.reserve(static_cast<std::size_t>(n_valid));
    for (int j = 0; j < n_valid; ++j) {
      const auto err = reprojection_error(model, pts.src[j], corr.q[pts.index[j]]);
      if (err && *err < cfg.inlier_threshold) inliers.push_back(j);
    }
    if (inliers.size() > best_inliers.size()) {
      best_inliers = std::move(inliers);
      const double w = static_cast<double>(best_inliers.size()) / n_valid;
      const double p_all = std::pow(w, cfg.min_sample);
      if (p_all >= 1.0 - 1e-12) {
        iterations_needed = it + 1;
      } else if (p_all > 0.0) {
        const double need = std::log(1.0 - cfg.confidence) / std::log(1.0 - p_all);
        iterations_needed = static_cast<int>(std::min<double>(cfg.max_iterations,
                                                              std::ceil(need)));
      }
    }
  }

  if (static_cast<int>(best_inliers.size()) < cfg.min_sample) {
    throw RegistrationFailureError("estimate_transform_ransac: no consensus set found");
  }

  RansacResult result;
  result.final_fit = estimate_transform_lsq(stack(pts.src, best_inliers),
                                            stack(pts.dst, best_inliers));
  result.transform = result.final_fit.transform;
  result.valid_samples = n_valid;
  result.iterations = it;

  // final mask and residuals are reported against the refit model
  result.inliers.assign(static_cast<std::size_t>(n), 0);
  double sq_sum = 0.0;
  for (int j = 0; j < n_valid; ++j) {
    const auto err = reprojection_error(result.transform, pts.src[j], corr.q[pts.index[j]]);
    if (err && *err < cfg.inlier_threshold) {
      result.inliers[static_cast<std::size_t>(pts.index[j])] = 1;
      ++result.inlier_count;
      sq_sum += *err * *err;
    }
  }
  if (result.inlier_count < cfg.min_sample) {
    throw RegistrationFailureError("estimate_transform_ransac: refit model lost its consensus");
  }
  result.residual_rms = std::sqrt(sq_sum / result.inlier_count);
  return result;
}

// --- homography --------------------------------------------------------------

namespace {

Eigen::Matrix3d hartley_normalization(const std::vector<NormalizedPoint2D>& pts) {
  double mx = 0.0, my = 0.0;
  for (const auto& p : pts) {
    mx += p.x;
    my += p.y;
  }
  mx /= static_cast<double>(pts.size());
  my /= static_cast<double>(pts.size());
  double mean_dist = 0.0;
  for (const auto& p : pts) mean_dist += std::hypot(p.x - mx, p.y - my);
  mean_dist /= static_cast<double>(pts.size());
  const double s = mean_dist > 1e-15 ? std::sqrt(2.0) / mean_dist : 1.0;
  Eigen::Matrix3d t;
  t << s, 0, -s * mx, 0, s, -s * my, 0, 0, 1;
  return t;
}

}  // namespace

Homography2D estimate_homography_dlt(const CorrespondenceSet& corr) {
  corr.validate();
  const int n = static_cast<int>(corr.size());
  if (n < 4) {
    throw InsufficientDataError("estimate_homography_dlt: need at least 4 correspondences");
  }

  const Eigen::Matrix3d tr = hartley_normalization(corr.r);
  const Eigen::Matrix3d tq = hartley_normalization(corr.q);

  Eigen::MatrixXd a(2 * n, 9);
  for (int i = 0; i < n; ++i) {
    const Eigen::Vector3d pr = tr * Eigen::Vector3d(corr.r[i].x, corr.r[i].y, 1.0);
    const Eigen::Vector3d pq = tq * Eigen::Vector3d(corr.q[i].x, corr.q[i].y, 1.0);
    const double x = pr.x(), y = pr.y();
    const double xp = pq.x(), yp = pq.y();
    a.row(2 * i) << -x, -y, -1, 0, 0, 0, x * xp, y * xp, xp;
    a.row(2 * i + 1) << 0, 0, 0, -x, -y, -1, x * yp, y * yp, yp;
  }

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
  const Eigen::VectorXd sv = svd.singularValues();
  // rank must be 8 for a unique (up to scale) solution
  const Eigen::Index rank_idx = std::min<Eigen::Index>(7, sv.size() - 1);
  if (!(sv(0) > 0.0) || sv(rank_idx) <= kHomographyRankRelTol * sv(0)) {
    std::vector<double> values(sv.data(), sv.data() + sv.size());
    throw DegenerateConfigurationError(
        "estimate_homography_dlt: degenerate configuration (collinear or coincident points)",
        std::move(values));
  }

  const Eigen::VectorXd h = svd.matrixV().col(8);
  Eigen::Matrix3d hn;
  hn << h(0), h(1), h(2), h(3), h(4), h(5), h(6), h(7), h(8);
  const Eigen::Matrix3d result = tq.inverse() * hn * tr;
  return Homography2D{result}.normalized();
}

// --- pose-based warp ----------------------------------------------------------

std::optional<Eigen::Vector3d> PoseWarp::operator()(double x, double y, double depth) const {
  if (!(depth > 0.0) || !std::isfinite(depth)) return std::nullopt;
  const double u_c = norm_to_pixel(x, width);
  const double v_c = norm_to_pixel(y, height);
  const Eigen::Vector3d x_cam_r = depth * cam_r.pixel_ray(u_c, v_c);
  const Eigen::Vector3d x_world = cam_r.camera_to_world(x_cam_r);
  const Eigen::Vector3d x_cam_q = cam_q.world_to_camera(x_world);
  if (x_cam_q.z() <= 0.0) return std::nullopt;
  const double uq = cam_q.fx * x_cam_q.x() / x_cam_q.z() + cam_q.cx;
  const double vq = cam_q.fy * x_cam_q.y() / x_cam_q.z() + cam_q.cy;
  return Eigen::Vector3d{pixel_to_norm(uq, width), pixel_to_norm(vq, height), x_cam_q.z()};
}

PoseWarp relative_pose_transform(const CameraModel& cam_r, const CameraModel& cam_q, int width,
                                 int height) {
  if (width <= 0 || height <= 0) {
    throw InputDomainError("relative_pose_transform: dimensions must be positive");
  }
  cam_r.validate();
  cam_q.validate();
  return PoseWarp{cam_r, cam_q, width, height};
}

Homography2D plane_induced_homography(const CameraModel& cam_r, const CameraModel& cam_q, int width,
                                      int height) {
  cam_r.validate();
  cam_q.validate();
  auto view_matrix = [](const CameraModel& cam) {
    Eigen::Matrix3d k;
    k << cam.fx, 0, cam.cx, 0, cam.fy, cam.cy, 0, 0, 1;
    Eigen::Matrix3d m;
    m.col(0) = cam.R.col(0);
    m.col(1) = cam.R.col(1);
    m.col(2) = cam.t;
    return Eigen::Matrix3d(k * m);
  };
  // continuous pixel -> normalized
  auto norm_affine = [](int w, int h) {
    Eigen::Matrix3d s;
    s << 2.0 / w, 0, -1, 0, 2.0 / h, -1, 0, 0, 1;
    return s;
  };
  const Eigen::Matrix3d s = norm_affine(width, height);
  const Eigen::Matrix3d h = s * view_matrix(cam_q) * view_matrix(cam_r).inverse() * s.inverse();
  return Homography2D{h}.normalized();
}

}  // namespace regdiff
