#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/SVD>
#include <cmath>

#include "regdiff/geometry.hpp"
#include "regdiff/rng.hpp"
#include "regdiff/synthgen.hpp"

using namespace regdiff;

namespace {

Eigen::Matrix<double, Eigen::Dynamic, 4> random_rank4_points(Rng& rng, int n) {
  Eigen::Matrix<double, Eigen::Dynamic, 4> pts(n, 4);
  for (int i = 0; i < n; ++i) {
    const double x = rng.uniform(-0.9, 0.9);
    const double y = rng.uniform(-0.9, 0.9);
    const double d = rng.uniform(0.5, 4.0);
    pts.row(i) = back_project({x, y}, d);
  }
  return pts;
}

Eigen::Matrix4d random_well_conditioned_transform(Rng& rng) {
  while (true) {
    Eigen::Matrix4d a;
    for (int r = 0; r < 4; ++r)
      for (int c = 0; c < 4; ++c) a(r, c) = (r == c ? 1.0 : 0.0) + 0.3 * rng.next_normal();
    if (std::abs(a.determinant()) > 0.1) return a;
  }
}

// two oblique cameras over the z=0 plane; depth maps computed analytically
struct PlaneScene {
  CameraModel cam1, cam2;
  int width = 64, height = 64;

  PlaneScene() {
    cam1 = look_at({2.2, 0.3, 2.0}, {0.05, 0.0, 0.0});
    cam2 = look_at({1.6, 1.5, 2.4}, {-0.05, 0.1, 0.0});
  }

  CameraModel look_at(const Eigen::Vector3d& pos, const Eigen::Vector3d& target) const {
    const Eigen::Vector3d fwd = (target - pos).normalized();
    Eigen::Vector3d right = fwd.cross(Eigen::Vector3d::UnitZ()).normalized();
    const Eigen::Vector3d down = fwd.cross(right).normalized();
    CameraModel cam;
    cam.fx = cam.fy = 70.0;
    cam.cx = width / 2.0;
    cam.cy = height / 2.0;
    cam.R.row(0) = right;
    cam.R.row(1) = down;
    cam.R.row(2) = fwd;
    cam.t = -cam.R * pos;
    return cam;
  }

  DepthMap depth_for(const CameraModel& cam) const {
    DepthMap d = DepthMap::constant(height, width, 1.0f);
    const Eigen::Vector3d c = cam.camera_center();
    for (int v = 0; v < height; ++v) {
      for (int u = 0; u < width; ++u) {
        const Eigen::Vector3d dir = cam.R.transpose() * cam.pixel_ray(u + 0.5, v + 0.5);
        REQUIRE(dir.z() < 0.0);  // every ray must reach the plane
        d.at(v, u) = static_cast<float>(-c.z() / dir.z());
      }
    }
    return d;
  }

  // project a plane point into both views, in normalized coordinates
  bool correspondence(const Eigen::Vector3d& world, NormalizedPoint2D& p1,
                      NormalizedPoint2D& p2) const {
    const auto a = cam1.project(world);
    const auto b = cam2.project(world);
    if (!a || !b) return false;
    if (a->x() < 2 || a->x() > width - 2 || a->y() < 2 || a->y() > height - 2) return false;
    if (b->x() < 2 || b->x() > width - 2 || b->y() < 2 || b->y() > height - 2) return false;
    p1 = {pixel_to_norm(a->x(), width), pixel_to_norm(a->y(), height)};
    p2 = {pixel_to_norm(b->x(), width), pixel_to_norm(b->y(), height)};
    return true;
  }

  CorrespondenceSet sample_correspondences(int target) const {
    CorrespondenceSet corr;
    for (int i = 0; i < 60 && static_cast<int>(corr.size()) < target; ++i) {
      for (int j = 0; j < 60 && static_cast<int>(corr.size()) < target; ++j) {
        const Eigen::Vector3d w(-0.9 + 1.8 * i / 59.0, -0.9 + 1.8 * j / 59.0, 0.0);
        NormalizedPoint2D p1, p2;
        if (correspondence(w, p1, p2)) {
          corr.r.push_back(p1);
          corr.q.push_back(p2);
        }
      }
    }
    return corr;
  }
};

}  // namespace

TEST_CASE("normalize_pixel follows the pixel-center convention") {
  auto p = normalize_pixel(0, 0, 4, 4);
  CHECK(p.x == doctest::Approx(-0.75).epsilon(1e-15));
  CHECK(p.y == doctest::Approx(-0.75).epsilon(1e-15));

  p = normalize_pixel(1, 1, 3, 3);
  CHECK(p.x == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(p.y == doctest::Approx(0.0).epsilon(1e-15));

  p = normalize_pixel(3, 0, 4, 4);
  CHECK(p.x == doctest::Approx(0.75).epsilon(1e-15));
  CHECK(p.y == doctest::Approx(-0.75).epsilon(1e-15));

  CHECK_THROWS_AS(normalize_pixel(4, 0, 4, 4), InputDomainError);
  CHECK_THROWS_AS(normalize_pixel(0, -1, 4, 4), InputDomainError);
  CHECK_THROWS_AS(normalize_pixel(0, 0, 0, 4), InputDomainError);
}

TEST_CASE("pixel -> normalized -> pixel round trip is exact for all sizes up to 64") {
  for (int w = 1; w <= 64; ++w) {
    for (int h = 1; h <= 64; ++h) {
      for (int u = 0; u < w; ++u) {
        const auto p = normalize_pixel(u, h / 2, w, h);
        const auto [ru, rv] = denormalize_point(p, w, h);
        REQUIRE(ru == u);
        REQUIRE(rv == h / 2);
      }
      for (int v = 0; v < h; ++v) {
        const auto p = normalize_pixel(w / 2, v, w, h);
        const auto [ru, rv] = denormalize_point(p, w, h);
        REQUIRE(ru == w / 2);
        REQUIRE(rv == v);
      }
    }
  }
}

TEST_CASE("back_project multiplies by depth and appends 1") {
  const Eigen::Vector4d a = back_project({0.5, -0.25}, 2.0);
  CHECK(a == Eigen::Vector4d(1.0, -0.5, 2.0, 1.0));

  const Eigen::Vector4d b = back_project({0.0, 0.0}, 1.0);
  CHECK(b == Eigen::Vector4d(0.0, 0.0, 1.0, 1.0));

  CHECK_THROWS_AS(back_project({0.1, 0.1}, 0.0), InvalidDepthError);
  CHECK_THROWS_AS(back_project({0.1, 0.1}, -1.0), InvalidDepthError);
}

TEST_CASE("estimate_transform_lsq: identity on self-fit") {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const auto pts = random_rank4_points(rng, 12);
    const auto est = estimate_transform_lsq(pts, pts);
    CHECK((est.transform.m - Eigen::Matrix4d::Identity()).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("estimate_transform_lsq recovers a sampled linear map") {
  Rng rng(23);
  for (int trial = 0; trial < 25; ++trial) {
    const Eigen::Matrix4d a = random_well_conditioned_transform(rng);
    const auto src = random_rank4_points(rng, 20);
    const Eigen::Matrix<double, Eigen::Dynamic, 4> dst = src * a.transpose();
    const auto est = estimate_transform_lsq(src, dst);
    const double rel = (est.transform.m - a).norm() / a.norm();
    CHECK(rel < 1e-8);
    CHECK(est.condition_number >= 1.0);
  }
}

TEST_CASE("estimate_transform_lsq rejects rank-deficient input") {
  // constant depth + collinear pixels: back-projected points span only rank 3
  Eigen::Matrix<double, Eigen::Dynamic, 4> src(10, 4);
  for (int i = 0; i < 10; ++i) {
    const double x = -0.9 + 0.2 * i;
    src.row(i) = back_project({x, 0.5 * x + 0.1}, 2.0);
  }
  // independent rank check on the constructed matrix
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(src);
  CHECK(svd.singularValues()(3) < 1e-12 * svd.singularValues()(0));

  CHECK_THROWS_AS(estimate_transform_lsq(src, src), DegenerateConfigurationError);
  try {
    estimate_transform_lsq(src, src);
  } catch (const DegenerateConfigurationError& e) {
    REQUIRE(e.singular_values().size() == 4);
    CHECK(e.singular_values()[3] < 1e-10 * e.singular_values()[0]);
  }

  Eigen::Matrix<double, Eigen::Dynamic, 4> tiny(3, 4);
  tiny.setOnes();
  CHECK_THROWS_AS(estimate_transform_lsq(tiny, tiny), InsufficientDataError);
}

TEST_CASE("apply_transform dehomogenizes") {
  const Transform3D id = Transform3D::identity();
  const Eigen::Vector3d a = apply_transform(id, {1.0, -0.5, 2.0, 1.0});
  CHECK(a == Eigen::Vector3d(1.0, -0.5, 2.0));

  Transform3D shift;
  shift.m(2, 3) = 1.0;  // translate depth by +1
  const Eigen::Vector3d b = apply_transform(shift, {0.0, 0.0, 1.0, 1.0});
  CHECK(b == Eigen::Vector3d(0.0, 0.0, 2.0));

  Transform3D projective = Transform3D::identity();
  projective.m.row(3) << 0, 0, 1, 0;  // k picks up the depth
  const Eigen::Vector3d c = apply_transform(projective, {1.0, 1.0, 2.0, 1.0});
  CHECK(c.x() == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(c.y() == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(c.z() == doctest::Approx(1.0).epsilon(1e-15));

  Transform3D to_infinity;
  to_infinity.m.setIdentity();
  to_infinity.m.row(3).setZero();
  CHECK_THROWS_AS(apply_transform(to_infinity, {0.1, 0.2, 1.0, 1.0}), PointAtInfinityError);
}

namespace {

// synthetic-pair correspondences whose depth samples survive the bilinear
// lookup in both views; the unconstrained fit needs true 3D structure, so
// scenes whose usable points are too close to coplanar are skipped
struct CleanSample {
  ChangePairSample sample;
  CorrespondenceSet corr;
  Eigen::Matrix<double, Eigen::Dynamic, 4> src, dst;
  Eigen::Matrix4d clean_fit;
};

std::optional<CleanSample> clean_sample(std::uint64_t seed, int want) {
  GeneratorConfig cfg;
  CleanSample out;
  try {
    out.sample = make_change_pair(cfg, seed);
  } catch (const GenerationFailureError&) {
    return std::nullopt;
  }
  const auto& all = out.sample.gt_correspondences;
  for (std::size_t i = 0; i < all.size() && static_cast<int>(out.corr.size()) < want; ++i) {
    const auto dr = sample_depth_bilinear(out.sample.depth1, all.r[i]);
    const auto dq = sample_depth_bilinear(out.sample.depth2, all.q[i]);
    if (!dr || !dq) continue;
    out.corr.r.push_back(all.r[i]);
    out.corr.q.push_back(all.q[i]);
  }
  if (static_cast<int>(out.corr.size()) < want) return std::nullopt;
  out.src.resize(want, 4);
  out.dst.resize(want, 4);
  for (int i = 0; i < want; ++i) {
    out.src.row(i) = back_project(out.corr.r[static_cast<std::size_t>(i)],
                                  *sample_depth_bilinear(out.sample.depth1,
                                                         out.corr.r[static_cast<std::size_t>(i)]));
    out.dst.row(i) = back_project(out.corr.q[static_cast<std::size_t>(i)],
                                  *sample_depth_bilinear(out.sample.depth2,
                                                         out.corr.q[static_cast<std::size_t>(i)]));
  }
  try {
    const auto fit = estimate_transform_lsq(out.src, out.dst);
    if (fit.condition_number > 1e6) return std::nullopt;
    out.clean_fit = fit.transform.m;
  } catch (const DegenerateConfigurationError&) {
    return std::nullopt;
  }
  return out;
}

std::optional<CleanSample> first_clean_sample(std::uint64_t seed0, int want) {
  for (std::uint64_t seed = seed0; seed < seed0 + 30; ++seed) {
    if (auto s = clean_sample(seed, want)) return s;
  }
  return std::nullopt;
}

}  // namespace

TEST_CASE("RANSAC on noiseless synthetic correspondences keeps every point") {
  const auto s = first_clean_sample(1000, 70);
  REQUIRE(s.has_value());

  RansacConfig cfg;
  cfg.seed = 99;
  const RansacResult res = estimate_transform_ransac(s->corr, s->sample.depth1, s->sample.depth2,
                                                     cfg);
  CHECK(res.valid_samples == static_cast<int>(s->corr.size()));
  CHECK(res.inlier_count == static_cast<int>(s->corr.size()));
  for (auto flag : res.inliers) CHECK(flag == 1);

  // with every point an inlier the refit IS the plain fit on all points
  CHECK((res.transform.m - s->clean_fit).norm() / s->clean_fit.norm() < 1e-12);
}

TEST_CASE("RANSAC rejects 30% uniform outliers") {
  const auto s = first_clean_sample(2000, 70);
  REQUIRE(s.has_value());

  CorrespondenceSet corr = s->corr;
  Rng rng(5);
  for (int i = 0; i < 30; ++i) {
    corr.r.push_back({rng.uniform(-0.8, 0.8), rng.uniform(-0.8, 0.8)});
    corr.q.push_back({rng.uniform(-0.8, 0.8), rng.uniform(-0.8, 0.8)});
  }

  RansacConfig cfg;
  cfg.inlier_threshold = 0.01;
  cfg.seed = 1234;
  const RansacResult res = estimate_transform_ransac(corr, s->sample.depth1, s->sample.depth2,
                                                     cfg);
  CHECK(res.inlier_count >= 68);
  int true_inliers_kept = 0;
  for (int i = 0; i < 70; ++i) true_inliers_kept += res.inliers[static_cast<std::size_t>(i)];
  CHECK(true_inliers_kept >= 68);
  CHECK((res.transform.m - s->clean_fit).norm() / s->clean_fit.norm() < 1e-6);
}

TEST_CASE("RANSAC is deterministic and validates inputs") {
  const auto s = first_clean_sample(3000, 40);
  REQUIRE(s.has_value());

  RansacConfig cfg;
  cfg.seed = 7;
  const RansacResult a = estimate_transform_ransac(s->corr, s->sample.depth1, s->sample.depth2, cfg);
  const RansacResult b = estimate_transform_ransac(s->corr, s->sample.depth1, s->sample.depth2, cfg);
  CHECK(a.inliers == b.inliers);
  CHECK(a.transform.m == b.transform.m);

  CorrespondenceSet three;
  three.r = {s->corr.r[0], s->corr.r[1], s->corr.r[2]};
  three.q = {s->corr.q[0], s->corr.q[1], s->corr.q[2]};
  CHECK_THROWS_AS(estimate_transform_ransac(three, s->sample.depth1, s->sample.depth2, cfg),
                  InsufficientDataError);
}

TEST_CASE("depth sampling rejects discontinuities and borders") {
  DepthMap d = DepthMap::constant(8, 8, 2.0f);
  CHECK(sample_depth_bilinear(d, {0.0, 0.0}).value() == doctest::Approx(2.0));

  d.at(4, 4) = 3.0f;  // 50% jump within the 4-neighborhood
  const auto p = normalize_pixel(4, 4, 8, 8);
  CHECK_FALSE(sample_depth_bilinear(d, {p.x + 0.05, p.y + 0.05}).has_value());

  CHECK_FALSE(sample_depth_bilinear(d, {-1.0, -1.0}).has_value());  // outside the center lattice
}

TEST_CASE("homography DLT: identity, recovery, degeneracy") {
  Rng rng(31);
  CorrespondenceSet same;
  for (int i = 0; i < 12; ++i) {
    same.r.push_back({rng.uniform(-0.8, 0.8), rng.uniform(-0.8, 0.8)});
  }
  same.q = same.r;
  const Homography2D h_id = estimate_homography_dlt(same);
  CHECK((h_id.m - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() < 1e-10);

  for (int trial = 0; trial < 20; ++trial) {
    Eigen::Matrix3d h0 = Eigen::Matrix3d::Identity();
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) h0(r, c) += 0.08 * rng.next_normal();
    h0 /= h0(2, 2);

    CorrespondenceSet corr;
    while (corr.size() < 10) {
      const Eigen::Vector3d p(rng.uniform(-0.6, 0.6), rng.uniform(-0.6, 0.6), 1.0);
      const Eigen::Vector3d q = h0 * p;
      const double qx = q.x() / q.z(), qy = q.y() / q.z();
      if (std::abs(qx) > 0.95 || std::abs(qy) > 0.95) continue;
      corr.r.push_back({p.x(), p.y()});
      corr.q.push_back({qx, qy});
    }
    const Homography2D h = estimate_homography_dlt(corr);
    CHECK((h.m - h0).norm() / h0.norm() < 1e-8);
  }

  // 5 collinear points: the DLT system loses rank
  CorrespondenceSet collinear;
  for (int i = 0; i < 5; ++i) {
    const double t = -0.8 + 0.4 * i;
    collinear.r.push_back({t, 0.3 * t});
    collinear.q.push_back({t, 0.3 * t});
  }
  CHECK_THROWS_AS(estimate_homography_dlt(collinear), DegenerateConfigurationError);

  CorrespondenceSet three;
  three.r = {{0, 0}, {0.5, 0}, {0, 0.5}};
  three.q = three.r;
  CHECK_THROWS_AS(estimate_homography_dlt(three), InsufficientDataError);
}

TEST_CASE("relative_pose_transform: identity pose is the identity map") {
  const PlaneScene scene;
  const PoseWarp warp = relative_pose_transform(scene.cam1, scene.cam1, scene.width, scene.height);
  for (int u = 0; u < scene.width; u += 7) {
    for (int v = 0; v < scene.height; v += 7) {
      const auto p = normalize_pixel(u, v, scene.width, scene.height);
      for (double d : {0.5, 1.7, 4.2}) {
        const auto out = warp(p.x, p.y, d);
        REQUIRE(out.has_value());
        CHECK(std::abs((*out)(0) - p.x) < 1e-12);
        CHECK(std::abs((*out)(1) - p.y) < 1e-12);
        CHECK(std::abs((*out)(2) - d) < 1e-12);
      }
    }
  }
}

TEST_CASE("relative_pose_transform: z-translation toward the scene shifts depth") {
  CameraModel cam_r;
  cam_r.fx = cam_r.fy = 100.0;
  cam_r.cx = cam_r.cy = 32.0;
  CameraModel cam_q = cam_r;
  const double delta = 0.4;
  cam_q.t = Eigen::Vector3d(0, 0, -delta);  // camera center moves to z = +delta

  const PoseWarp warp = relative_pose_transform(cam_r, cam_q, 64, 64);
  const auto center = warp(0.0, 0.0, 2.0);
  REQUIRE(center.has_value());
  CHECK(std::abs((*center)(0)) < 1e-12);
  CHECK(std::abs((*center)(1)) < 1e-12);
  CHECK(std::abs((*center)(2) - (2.0 - delta)) < 1e-12);

  const auto off = warp(0.3, -0.2, 1.5);
  REQUIRE(off.has_value());
  CHECK(std::abs((*off)(2) - (1.5 - delta)) < 1e-12);

  // behind the camera: dropped, not returned
  CHECK_FALSE(warp(0.0, 0.0, 0.3).has_value());
}

TEST_CASE("plane_induced_homography matches projected plane points") {
  const PlaneScene scene;
  const Homography2D h = plane_induced_homography(scene.cam1, scene.cam2, scene.width, scene.height);
  int checked = 0;
  for (int i = 0; i < 40; ++i) {
    const Eigen::Vector3d w(-0.8 + 1.6 * (i % 8) / 7.0, -0.8 + 1.6 * (i / 8) / 4.0, 0.0);
    NormalizedPoint2D p1, p2;
    if (!scene.correspondence(w, p1, p2)) continue;
    const Eigen::Vector3d mapped = h.m * Eigen::Vector3d(p1.x, p1.y, 1.0);
    CHECK(std::abs(mapped.x() / mapped.z() - p2.x) < 1e-10);
    CHECK(std::abs(mapped.y() / mapped.z() - p2.y) < 1e-10);
    ++checked;
  }
  CHECK(checked > 10);
}

TEST_CASE("Transform3D and Homography2D row-major round trips") {
  Rng rng(3);
  Transform3D t;
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) t.m(r, c) = rng.next_normal();
  CHECK(Transform3D::from_row_major(t.row_major()).m == t.m);

  Homography2D h;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) h.m(r, c) = rng.next_normal();
  CHECK(Homography2D::from_row_major(h.row_major()).m == h.m);
}
