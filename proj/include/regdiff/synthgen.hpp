#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "regdiff/featgrid.hpp"
#include "regdiff/geometry.hpp"

namespace regdiff {

enum class ShapeKind { Box, Sphere };

struct SceneObject {
  ShapeKind shape = ShapeKind::Box;
  Eigen::Vector3d center = Eigen::Vector3d::Zero();  // meters; rests on the z=0 plane
  Eigen::Vector3d size = Eigen::Vector3d::Ones();    // box: full extents; sphere: size.x() = radius
  Eigen::Vector3d albedo = Eigen::Vector3d::Constant(0.5);
  std::uint64_t texture_seed = 0;

  double footprint_radius() const;
  /// 8 corners of the axis-aligned bounding volume (the box itself, or the
  /// sphere's bounding cube).
  std::array<Eigen::Vector3d, 8> bounding_corners() const;
};

/// A textured ground plane at z = 0 plus primitive objects resting on it.
struct SceneSpec {
  std::vector<SceneObject> objects;
  Eigen::Vector3d light_dir = Eigen::Vector3d(0.3, 0.2, 0.93);  // unit, surface -> light
  std::uint64_t plane_seed = 0;
  double plane_tone_a = 0.42;
  double plane_tone_b = 0.68;
  double texture_contrast = 0.5;
  double plane_half_extent = 6.0;

  /// Checks the rest-on-plane and pairwise-separation invariants.
  void validate(double min_separation) const;
};

struct GeneratorConfig {
  int image_height = 224;
  int image_width = 224;
  int object_count_min = 4;
  int object_count_max = 7;
  int removal_count_min = 1;
  int removal_count_max = 1;
  double camera_radius_min = 2.0;
  double camera_radius_max = 4.0;
  double camera_height_min = 0.8;
  double camera_height_max = 2.5;
  double camera_azimuth_sep_min = 0.25;  // radians between the two view azimuths
  double camera_azimuth_sep_max = 1.2;
  double lookat_jitter = 0.15;  // meters around the scene center
  double focal_px = 200.0;
  double texture_contrast = 0.5;
  double placement_radius = 1.0;
  double min_separation = 0.05;
  bool allow_boxes = true;
  bool allow_spheres = true;
  double box_size_min = 0.18;
  double box_size_max = 0.45;
  double sphere_radius_min = 0.10;
  double sphere_radius_max = 0.22;
  double object_albedo_min = 0.15;
  double object_albedo_max = 0.90;
  double plane_tone_a = 0.42;
  double plane_tone_b = 0.68;
  double min_visibility = 0.25;  // both-view co-visibility cutoff for a change
  double min_box_px = 0.0;       // minimum GT box side in pixels; 0 disables
  bool planar = false;           // near-zero-height boxes; correspondences on the plane only
  int correspondence_target = 96;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Benchmark presets.
GeneratorConfig easy_suite_config();
GeneratorConfig planar_suite_config();

struct GtBox {
  double x_min = 0, y_min = 0, x_max = 0, y_max = 0;
  double visibility = 0.0;  // fraction of surface samples visible in this view
};

/// One before/after two-view sample with exact geometry ground truth.
struct ChangePairSample {
  int width = 0;
  int height = 0;
  ImageRGB rgb1;   // "before" scene seen from camera 1
  ImageRGB rgb2;   // "after" scene seen from camera 2
  DepthMap depth1;
  DepthMap depth2;
  CameraModel cam1;
  CameraModel cam2;
  SceneSpec scene;  // before-scene
  std::vector<int> removed;
  std::vector<GtBox> gt_boxes_1;
  std::vector<GtBox> gt_boxes_2;
  CorrespondenceSet gt_correspondences;  // static-surface points, exact in both views
  std::uint64_t seed = 0;
};

struct RayHit {
  double t = 0.0;            // in units of the ray direction
  int object = -1;           // index into SceneSpec::objects, or -1 for the plane
  Eigen::Vector3d point = Eigen::Vector3d::Zero();
  Eigen::Vector3d normal = Eigen::Vector3d::UnitZ();
};

/// Nearest intersection along origin + t*dir for t > 1e-9. skip marks object
/// indices treated as absent (the "after" scene). nullopt = sky.
std::optional<RayHit> cast_ray(const SceneSpec& scene, const Eigen::Vector3d& origin,
                               const Eigen::Vector3d& dir,
                               const std::vector<std::uint8_t>* skip = nullptr);

/// Placement by rejection sampling; deterministic per seed.
SceneSpec generate_scene(const GeneratorConfig& cfg, std::uint64_t seed);

/// Per-pixel ray-cast render: Lambertian shading with 0.2 ambient; depth is
/// the camera-frame z of the nearest hit; sky rays get depth 100 m.
std::pair<ImageRGB, DepthMap> render_view(const SceneSpec& scene, const CameraModel& cam,
                                          int height, int width,
                                          const std::vector<std::uint8_t>* skip = nullptr);

/// Full synthetic pair: scene, two cylinder cameras, removals co-visible in
/// both views, renders, GT boxes with visibility fractions, and exact
/// static-surface correspondences.
ChangePairSample make_change_pair(const GeneratorConfig& cfg, std::uint64_t seed);

/// Variant for masking-law tests: camera 2 is aimed so the removed object
/// falls outside its frustum (the change is NOT co-visible; gt_boxes_2 is
/// empty by construction).
ChangePairSample make_disocclusion_pair(const GeneratorConfig& cfg, std::uint64_t seed);

/// World-to-camera look-at pose (x right, y down, z forward; up = world +z).
CameraModel make_lookat_camera(const Eigen::Vector3d& position, const Eigen::Vector3d& target,
                               double focal_px, int width, int height);

/// Surface visibility fraction of one object in a view (occlusion-aware
/// sampling; skip marks absent objects for "after" views).
double visibility_fraction(const SceneSpec& scene, int object_index, const CameraModel& cam,
                           int width, int height, const std::vector<std::uint8_t>* skip = nullptr);

/// Axis-aligned hull of the object's projected bounding corners, clipped to
/// the image. nullopt when it projects entirely outside / behind.
std::optional<GtBox> project_object_box(const SceneObject& object, const CameraModel& cam,
                                        int width, int height);

}  // namespace regdiff
