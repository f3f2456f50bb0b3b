#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "regdiff/synthgen.hpp"

using namespace regdiff;

namespace {

GeneratorConfig small_config() {
  GeneratorConfig cfg = easy_suite_config();
  cfg.image_height = 96;
  cfg.image_width = 96;
  cfg.focal_px = 110.0;
  cfg.min_box_px = 10.0;
  return cfg;
}

}  // namespace

TEST_CASE("generate_scene is deterministic and honors the count range") {
  GeneratorConfig cfg;
  cfg.object_count_min = 3;
  cfg.object_count_max = 3;
  const SceneSpec a = generate_scene(cfg, 42);
  const SceneSpec b = generate_scene(cfg, 42);
  REQUIRE(a.objects.size() == 3);
  REQUIRE(b.objects.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(a.objects[i].center == b.objects[i].center);
    CHECK(a.objects[i].size == b.objects[i].size);
    CHECK(a.objects[i].albedo == b.objects[i].albedo);
    CHECK(a.objects[i].texture_seed == b.objects[i].texture_seed);
  }
  const SceneSpec c = generate_scene(cfg, 43);
  CHECK(a.objects[0].center != c.objects[0].center);
}

TEST_CASE("scene placement satisfies rest-on-plane and separation invariants") {
  GeneratorConfig cfg;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const SceneSpec scene = generate_scene(cfg, seed);
    CHECK_NOTHROW(scene.validate(cfg.min_separation));
    for (std::size_t i = 0; i < scene.objects.size(); ++i) {
      for (std::size_t j = i + 1; j < scene.objects.size(); ++j) {
        const double gap = (scene.objects[i].center.head<2>() -
                            scene.objects[j].center.head<2>()).norm() -
                           scene.objects[i].footprint_radius() -
                           scene.objects[j].footprint_radius();
        CHECK(gap >= 0.05 - 1e-12);
      }
    }
  }
}

TEST_CASE("empty scene viewed straight down has uniform plane depth") {
  SceneSpec scene;
  scene.plane_half_extent = 50.0;
  const double h = 2.3;
  const CameraModel cam = make_lookat_camera({0, 0, h}, {0, 0, 0}, 60.0, 48, 48);
  const auto [rgb, depth] = render_view(scene, cam, 48, 48);
  for (int y = 0; y < 48; ++y) {
    for (int x = 0; x < 48; ++x) {
      REQUIRE(std::abs(depth.at(y, x) - h) < 1e-6);
    }
  }
  (void)rgb;
}

TEST_CASE("objects are strictly in front of the plane behind them") {
  SceneSpec scene;
  SceneObject box;
  box.shape = ShapeKind::Box;
  box.size = Eigen::Vector3d(0.4, 0.4, 0.4);
  box.center = Eigen::Vector3d(0, 0, 0.2);
  scene.objects.push_back(box);

  const CameraModel cam = make_lookat_camera({2.0, 0.4, 1.6}, {0, 0, 0.1}, 80.0, 64, 64);
  const auto [rgb, depth] = render_view(scene, cam, 64, 64);
  (void)rgb;
  const Eigen::Vector3d center = cam.camera_center();
  int box_pixels = 0;
  for (int v = 0; v < 64; ++v) {
    for (int u = 0; u < 64; ++u) {
      CHECK(depth.at(v, u) > 0.0f);
      const Eigen::Vector3d dir = cam.R.transpose() * cam.pixel_ray(u + 0.5, v + 0.5);
      const auto hit = cast_ray(scene, center, dir);
      REQUIRE(hit.has_value());
      if (hit->object == 0) {
        ++box_pixels;
        // analytic depth of the plane behind this pixel
        const double plane_depth = -center.z() / dir.z();
        CHECK(depth.at(v, u) < plane_depth);
        CHECK(std::abs(depth.at(v, u) - hit->t) < 1e-6);
      }
    }
  }
  CHECK(box_pixels > 50);
}

TEST_CASE("make_change_pair is bit-identical per seed") {
  const GeneratorConfig cfg = small_config();
  const ChangePairSample a = make_change_pair(cfg, 11);
  const ChangePairSample b = make_change_pair(cfg, 11);
  CHECK(a.rgb1.data == b.rgb1.data);
  CHECK(a.rgb2.data == b.rgb2.data);
  CHECK(a.depth1.values == b.depth1.values);
  CHECK(a.depth2.values == b.depth2.values);
  CHECK(a.removed == b.removed);
  REQUIRE(a.gt_correspondences.size() == b.gt_correspondences.size());
  for (std::size_t i = 0; i < a.gt_correspondences.size(); ++i) {
    CHECK(a.gt_correspondences.r[i].x == b.gt_correspondences.r[i].x);
    CHECK(a.gt_correspondences.q[i].y == b.gt_correspondences.q[i].y);
  }
  REQUIRE(a.gt_boxes_1.size() == b.gt_boxes_1.size());
}

TEST_CASE("ground-truth correspondences reproject exactly through the pose warp") {
  const GeneratorConfig cfg = small_config();
  for (std::uint64_t seed : {1ULL, 2ULL, 3ULL}) {
    const ChangePairSample s = make_change_pair(cfg, seed);
    const PoseWarp warp = relative_pose_transform(s.cam1, s.cam2, s.width, s.height);
    REQUIRE(s.gt_correspondences.size() >= 64);
    for (std::size_t i = 0; i < s.gt_correspondences.size(); ++i) {
      const auto& pr = s.gt_correspondences.r[i];
      // r-side points sit on view-1 pixel centers, so the stored depth is exact
      const auto [u, v] = denormalize_point(pr, s.width, s.height);
      const double d = s.depth1.at(v, u);
      const auto warped = warp(pr.x, pr.y, d);
      REQUIRE(warped.has_value());
      const auto& pq = s.gt_correspondences.q[i];
      const double err = std::hypot((*warped)(0) - pq.x, (*warped)(1) - pq.y);
      REQUIRE(err < 1e-6);
    }
  }
}

TEST_CASE("removed-object box encloses every pixel that changed in view 1") {
  const GeneratorConfig cfg = small_config();
  const ChangePairSample s = make_change_pair(cfg, 21);

  std::vector<std::uint8_t> mask(s.scene.objects.size(), 0);
  for (int idx : s.removed) mask[static_cast<std::size_t>(idx)] = 1;
  const auto [rgb_after, depth_after] = render_view(s.scene, s.cam1, s.height, s.width, &mask);
  (void)depth_after;

  REQUIRE(s.gt_boxes_1.size() == 1);
  const GtBox& box = s.gt_boxes_1[0];
  for (int y = 0; y < s.height; ++y) {
    for (int x = 0; x < s.width; ++x) {
      bool differs = false;
      for (int c = 0; c < 3; ++c) {
        if (s.rgb1.at(c, y, x) != rgb_after.at(c, y, x)) differs = true;
      }
      if (differs) {
        REQUIRE(x + 0.5 >= box.x_min);
        REQUIRE(x + 0.5 <= box.x_max);
        REQUIRE(y + 0.5 >= box.y_min);
        REQUIRE(y + 0.5 <= box.y_max);
      }
    }
  }
}

TEST_CASE("exactly one ground-truth box per view when one object is removed") {
  GeneratorConfig cfg = small_config();
  cfg.removal_count_min = cfg.removal_count_max = 1;
  for (std::uint64_t seed : {5ULL, 6ULL, 7ULL}) {
    const ChangePairSample s = make_change_pair(cfg, seed);
    CHECK(s.gt_boxes_1.size() == 1);
    CHECK(s.gt_boxes_2.size() == 1);
    CHECK(s.gt_boxes_1[0].visibility > cfg.min_visibility);
    CHECK(s.gt_boxes_2[0].visibility > cfg.min_visibility);
    CHECK(s.gt_boxes_1[0].x_min < s.gt_boxes_1[0].x_max);
    CHECK(s.gt_boxes_1[0].y_min < s.gt_boxes_1[0].y_max);
  }
}

TEST_CASE("planar suite: estimated homography matches the plane-induced one") {
  GeneratorConfig cfg = planar_suite_config();
  cfg.image_height = 96;
  cfg.image_width = 96;
  cfg.focal_px = 110.0;
  cfg.min_box_px = 10.0;
  const ChangePairSample s = make_change_pair(cfg, 3);
  const Homography2D gt = plane_induced_homography(s.cam1, s.cam2, s.width, s.height);
  const Homography2D est = estimate_homography_dlt(s.gt_correspondences);
  const double rel = (est.m - gt.m).norm() / gt.m.norm();
  CHECK(rel < 1e-6);
}

TEST_CASE("disocclusion pair: the change is outside view 2") {
  const GeneratorConfig cfg = small_config();
  const ChangePairSample s = make_disocclusion_pair(cfg, 13);
  CHECK(s.gt_boxes_1.size() == 1);
  CHECK(s.gt_boxes_2.empty());
  REQUIRE(s.removed.size() == 1);
  const auto box2 = project_object_box(s.scene.objects[static_cast<std::size_t>(s.removed[0])],
                                       s.cam2, s.width, s.height);
  CHECK_FALSE(box2.has_value());
}

TEST_CASE("generation failure surfaces as an error") {
  GeneratorConfig cfg;
  cfg.object_count_min = cfg.object_count_max = 40;  // cannot pack 40 objects on the disk
  cfg.placement_radius = 0.3;
  CHECK_THROWS_AS(generate_scene(cfg, 0), GenerationFailureError);
}
