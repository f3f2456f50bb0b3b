#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "regdiff/errors.hpp"

namespace regdiff {

// ---------------------------------------------------------------------------
// Coordinate conventions (fixed project-wide)
//
// A pixel index (u, v) in a WxH image maps to normalized coordinates
//   x = (2u + 1 - W) / W,  y = (2v + 1 - H) / H
// i.e. pixel centers land on a symmetric [-1, 1] grid. The continuous pixel
// coordinate of a normalized point is u_c = (x + 1) * W / 2, with u_c in
// [0, W] and pixel (u, v) covering [u, u+1) x [v, v+1).
// ---------------------------------------------------------------------------

struct NormalizedPoint2D {
  double x = 0.0;
  double y = 0.0;
};

NormalizedPoint2D normalize_pixel(int u, int v, int width, int height);

/// Exact inverse of normalize_pixel on pixel centers.
std::pair<int, int> denormalize_point(const NormalizedPoint2D& p, int width, int height);

inline double norm_to_pixel(double coord, int extent) { return (coord + 1.0) * extent / 2.0; }
inline double pixel_to_norm(double continuous, int extent) { return 2.0 * continuous / extent - 1.0; }

/// Back-projection of a normalized point with depth d: (d*x, d*y, d, 1).
Eigen::Vector4d back_project(const NormalizedPoint2D& p, double depth);

// ---------------------------------------------------------------------------
// Core linear maps
// ---------------------------------------------------------------------------

/// Unconstrained 4x4 linear map acting on homogeneous back-projected points.
/// Serialized (JSON, python) as 16 values in row-major order.
struct Transform3D {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();

  static Transform3D identity() { return Transform3D{}; }
  Transform3D inverse() const;

  std::array<double, 16> row_major() const;
  static Transform3D from_row_major(const std::array<double, 16>& values);
};

/// 3x3 planar map on normalized coordinates; normalized so m(2,2) == 1 when nonzero.
struct Homography2D {
  Eigen::Matrix3d m = Eigen::Matrix3d::Identity();

  Homography2D normalized() const;
  Homography2D inverse() const;

  std::array<double, 9> row_major() const;
  static Homography2D from_row_major(const std::array<double, 9>& values);
};

/// Paired 2D points (image r side, image q side) in normalized coordinates.
struct CorrespondenceSet {
  std::vector<NormalizedPoint2D> r;
  std::vector<NormalizedPoint2D> q;

  std::size_t size() const { return r.size(); }
  /// Throws InputDomainError on length mismatch or coordinates outside [-1, 1].
  void validate() const;
  CorrespondenceSet swapped() const { return CorrespondenceSet{q, r}; }
};

/// HxW grid of positive depths in scene units. Entries that failed validation
/// (nonpositive / nonfinite at load) are flagged invalid rather than stored.
struct DepthMap {
  int width = 0;
  int height = 0;
  std::vector<float> values;          // row-major h*w
  std::vector<std::uint8_t> valid;    // empty means "all valid"

  static DepthMap constant(int height, int width, float value);
  /// Builds from raw values, flagging nonpositive/nonfinite entries invalid.
  static DepthMap from_values(int height, int width, std::vector<float> values);

  float at(int y, int x) const { return values[static_cast<std::size_t>(y) * width + x]; }
  float& at(int y, int x) { return values[static_cast<std::size_t>(y) * width + x]; }
  bool is_valid(int y, int x) const {
    return valid.empty() || valid[static_cast<std::size_t>(y) * width + x] != 0;
  }
  bool all_valid() const;
};

/// Bilinear depth lookup at a normalized location. Returns nullopt when the
/// 4-neighborhood is out of bounds, touches an invalid entry, or spans a
/// relative depth discontinuity larger than max_rel_spread (correspondences
/// on occlusion edges poison the transform fit).
std::optional<double> sample_depth_bilinear(const DepthMap& depth, const NormalizedPoint2D& p,
                                            double max_rel_spread = 0.10);

/// Pinhole camera with world-to-camera rigid pose (x_cam = R * x_world + t).
/// Intrinsics are in pixels of the camera's native image; the pixel frame is
/// the continuous one described at the top of this header.
struct CameraModel {
  double fx = 0.0, fy = 0.0;
  double cx = 0.0, cy = 0.0;
  Eigen::Matrix3d R = Eigen::Matrix3d::Identity();
  Eigen::Vector3d t = Eigen::Vector3d::Zero();

  /// Throws InputDomainError unless fx, fy > 0 and R is orthonormal within 1e-6.
  void validate() const;

  Eigen::Vector3d camera_center() const { return -R.transpose() * t; }
  Eigen::Vector3d world_to_camera(const Eigen::Vector3d& x_world) const { return R * x_world + t; }
  Eigen::Vector3d camera_to_world(const Eigen::Vector3d& x_cam) const {
    return R.transpose() * (x_cam - t);
  }

  /// Projects a world point; nullopt when it lies at or behind the camera.
  /// Returns continuous pixel coordinates plus the camera-frame depth.
  std::optional<Eigen::Vector3d> project(const Eigen::Vector3d& x_world) const;

  /// Ray direction (camera frame, z = 1) through continuous pixel (u_c, v_c).
  Eigen::Vector3d pixel_ray(double u_c, double v_c) const {
    return {(u_c - cx) / fx, (v_c - cy) / fy, 1.0};
  }
};

struct RansacConfig {
  int max_iterations = 1000;
  double inlier_threshold = 0.01;  // reprojection distance, normalized units
  int min_sample = 5;
  std::uint64_t seed = 0;
  double confidence = 0.999;

  void validate() const;
};

// ---------------------------------------------------------------------------
// Estimators
// ---------------------------------------------------------------------------

struct TransformEstimate {
  Transform3D transform;
  double condition_number = 0.0;       // sigma_max / sigma_min of the source matrix
  Eigen::Vector4d singular_values = Eigen::Vector4d::Zero();
  double residual_rms = 0.0;           // ||src * T^T - dst||_F / sqrt(n)
};

/// Least-squares fit of T with src * T^T ~= dst, T = (pinv(src) * dst)^T.
/// The pseudoinverse truncates singular values below 1e-10 relative.
/// Throws InsufficientDataError (n < 4) or DegenerateConfigurationError
/// (numerical rank < 4, carrying the singular values).
TransformEstimate estimate_transform_lsq(const Eigen::Matrix<double, Eigen::Dynamic, 4>& src,
                                         const Eigen::Matrix<double, Eigen::Dynamic, 4>& dst);

/// T * p, dehomogenized. The returned z is the warped point's depth in the
/// target view. Throws PointAtInfinityError when |k| < 1e-12.
Eigen::Vector3d apply_transform(const Transform3D& transform, const Eigen::Vector4d& p);

struct RansacResult {
  Transform3D transform;
  std::vector<std::uint8_t> inliers;  // one flag per input correspondence
  int inlier_count = 0;
  int valid_samples = 0;              // correspondences that survived depth lookup
  double residual_rms = 0.0;          // over final inliers, normalized units
  int iterations = 0;
  TransformEstimate final_fit;
};

/// Seeded RANSAC around estimate_transform_lsq. Depths are sampled from the
/// maps at the correspondence locations via sample_depth_bilinear; scoring is
/// reprojection distance in normalized image coordinates.
RansacResult estimate_transform_ransac(const CorrespondenceSet& corr, const DepthMap& depth_r,
                                       const DepthMap& depth_q, const RansacConfig& cfg);

/// Normalized DLT (Hartley normalization), algebraic-error minimizer, scaled
/// so the bottom-right entry is 1. Throws on n < 4 or degenerate input.
Homography2D estimate_homography_dlt(const CorrespondenceSet& corr);

/// Exact warp for the known-pose path: back-project through cam_r's pinhole
/// model, move to cam_q's frame, reproject. Operates on normalized
/// coordinates; width/height fix the pixel frame the intrinsics live in.
struct PoseWarp {
  CameraModel cam_r;
  CameraModel cam_q;
  int width = 0;
  int height = 0;

  /// (x, y) normalized + depth in the source view -> same in the target view.
  /// nullopt when the point lands at or behind the target camera.
  std::optional<Eigen::Vector3d> operator()(double x, double y, double depth) const;
};

PoseWarp relative_pose_transform(const CameraModel& cam_r, const CameraModel& cam_q, int width,
                                 int height);

/// Ground-truth homography induced by the world plane z = 0 between two
/// views, expressed on normalized coordinates. Used as the oracle for the
/// planar registration path.
Homography2D plane_induced_homography(const CameraModel& cam_r, const CameraModel& cam_q, int width,
                                      int height);

}  // namespace regdiff
