#include "regdiff/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "regdiff/rng.hpp"

namespace regdiff {

namespace {

constexpr double kRayEps = 1e-9;
constexpr double kOcclusionTol = 1e-6;
constexpr double kSkyDepth = 100.0;
constexpr double kAmbient = 0.2;
const Eigen::Vector3d kSkyColor(0.62, 0.78, 0.94);

// rng substreams per sample
enum Stream : std::uint64_t { kSceneStream = 1, kCameraStream, kRemovalStream, kLightStream };

double hash01(std::uint64_t key) {
  return static_cast<double>(mix_seed(key, 0x5bf03635) >> 11) * 0x1.0p-53;
}

double lattice_value(std::int64_t ix, std::int64_t iy, std::uint64_t seed) {
  const std::uint64_t key = static_cast<std::uint64_t>(ix) * 0x8da6b343ULL +
                            static_cast<std::uint64_t>(iy) * 0xd8163841ULL + seed;
  return hash01(key);
}

double smoothstep(double t) { return t * t * (3.0 - 2.0 * t); }

// two-octave value noise in [0, 1]
double value_noise(double x, double y, std::uint64_t seed) {
  double total = 0.0;
  double amplitude = 0.65;
  double freq = 1.0;
  for (int octave = 0; octave < 2; ++octave) {
    const double fx = x * freq;
    const double fy = y * freq;
    const auto ix = static_cast<std::int64_t>(std::floor(fx));
    const auto iy = static_cast<std::int64_t>(std::floor(fy));
    const double tx = smoothstep(fx - static_cast<double>(ix));
    const double ty = smoothstep(fy - static_cast<double>(iy));
    const double v00 = lattice_value(ix, iy, seed + octave);
    const double v01 = lattice_value(ix + 1, iy, seed + octave);
    const double v10 = lattice_value(ix, iy + 1, seed + octave);
    const double v11 = lattice_value(ix + 1, iy + 1, seed + octave);
    total += amplitude * ((1 - ty) * ((1 - tx) * v00 + tx * v01) + ty * ((1 - tx) * v10 + tx * v11));
    amplitude *= 0.35;
    freq *= 2.3;
  }
  return std::clamp(total, 0.0, 1.0);
}

std::optional<double> intersect_box(const Eigen::Vector3d& o, const Eigen::Vector3d& d,
                                    const Eigen::Vector3d& center, const Eigen::Vector3d& half) {
  double tmin = -1e30, tmax = 1e30;
  for (int a = 0; a < 3; ++a) {
    if (std::abs(d(a)) < 1e-15) {
      if (o(a) < center(a) - half(a) || o(a) > center(a) + half(a)) return std::nullopt;
      continue;
    }
    double t0 = (center(a) - half(a) - o(a)) / d(a);
    double t1 = (center(a) + half(a) - o(a)) / d(a);
    if (t0 > t1) std::swap(t0, t1);
    tmin = std::max(tmin, t0);
    tmax = std::min(tmax, t1);
    if (tmin > tmax) return std::nullopt;
  }
  if (tmax < kRayEps) return std::nullopt;
  return tmin >= kRayEps ? tmin : tmax;
}

std::optional<double> intersect_sphere(const Eigen::Vector3d& o, const Eigen::Vector3d& d,
                                       const Eigen::Vector3d& center, double radius) {
  const Eigen::Vector3d oc = o - center;
  const double a = d.squaredNorm();
  const double b = 2.0 * oc.dot(d);
  const double c = oc.squaredNorm() - radius * radius;
  const double disc = b * b - 4.0 * a * c;
  if (disc < 0.0) return std::nullopt;
  const double sq = std::sqrt(disc);
  const double t0 = (-b - sq) / (2.0 * a);
  const double t1 = (-b + sq) / (2.0 * a);
  if (t0 >= kRayEps) return t0;
  if (t1 >= kRayEps) return t1;
  return std::nullopt;
}

Eigen::Vector3d box_normal(const Eigen::Vector3d& p, const Eigen::Vector3d& center,
                           const Eigen::Vector3d& half) {
  int axis = 0;
  double best = -1.0;
  for (int a = 0; a < 3; ++a) {
    const double r = std::abs(p(a) - center(a)) / half(a);
    if (r > best) {
      best = r;
      axis = a;
    }
  }
  Eigen::Vector3d n = Eigen::Vector3d::Zero();
  n(axis) = p(axis) >= center(axis) ? 1.0 : -1.0;
  return n;
}

Eigen::Vector3d object_albedo(const SceneObject& obj, const Eigen::Vector3d& p,
                              const Eigen::Vector3d& n, double contrast) {
  // texture coordinates from the dominant tangent plane of the hit
  double u, v;
  if (obj.shape == ShapeKind::Sphere) {
    const Eigen::Vector3d d = (p - obj.center).normalized();
    u = std::atan2(d.y(), d.x()) * 2.0;
    v = std::acos(std::clamp(d.z(), -1.0, 1.0)) * 2.0;
  } else {
    const Eigen::Vector3d local = p - obj.center;
    int axis = 0;
    double best = -1.0;
    for (int a = 0; a < 3; ++a) {
      if (std::abs(n(a)) > best) {
        best = std::abs(n(a));
        axis = a;
      }
    }
    const int ua = (axis + 1) % 3;
    const int va = (axis + 2) % 3;
    u = local(ua) * 9.0;
    v = local(va) * 9.0;
  }
  const double noise = value_noise(u, v, obj.texture_seed);
  const double factor = 1.0 - contrast / 2.0 + contrast * noise;
  return (obj.albedo * factor).cwiseMax(0.0).cwiseMin(1.0);
}

Eigen::Vector3d plane_albedo(const SceneSpec& scene, const Eigen::Vector3d& p) {
  const double noise = value_noise(p.x() * 2.4, p.y() * 2.4, scene.plane_seed);
  const double checker =
      (static_cast<std::int64_t>(std::floor(p.x() * 2.0)) +
       static_cast<std::int64_t>(std::floor(p.y() * 2.0))) % 2 == 0 ? 0.0 : 1.0;
  const double mix = std::clamp(0.65 * noise + 0.35 * checker, 0.0, 1.0);
  const double base = scene.plane_tone_a + (scene.plane_tone_b - scene.plane_tone_a) * mix;
  const double c = scene.texture_contrast;
  const double fine = value_noise(p.x() * 11.0, p.y() * 11.0, scene.plane_seed + 77);
  const double tone = std::clamp(base * (1.0 - c * 0.25 + c * 0.5 * fine), 0.0, 1.0);
  return {tone, tone * 0.97, tone * 0.92};
}

}  // namespace

double SceneObject::footprint_radius() const {
  if (shape == ShapeKind::Sphere) return size.x();
  return 0.5 * std::hypot(size.x(), size.y());
}

std::array<Eigen::Vector3d, 8> SceneObject::bounding_corners() const {
  Eigen::Vector3d half;
  if (shape == ShapeKind::Sphere) {
    half = Eigen::Vector3d::Constant(size.x());
  } else {
    half = size / 2.0;
  }
  std::array<Eigen::Vector3d, 8> corners;
  int i = 0;
  for (int sx : {-1, 1})
    for (int sy : {-1, 1})
      for (int sz : {-1, 1}) {
        corners[i++] = center + Eigen::Vector3d(sx * half.x(), sy * half.y(), sz * half.z());
      }
  return corners;
}

void SceneSpec::validate(double min_separation) const {
  for (std::size_t i = 0; i < objects.size(); ++i) {
    const auto& o = objects[i];
    const double lowest = o.shape == ShapeKind::Sphere ? o.center.z() - o.size.x()
                                                       : o.center.z() - o.size.z() / 2.0;
    if (std::abs(lowest) > 1e-9) {
      throw GenerationFailureError("SceneSpec: object does not rest on the plane");
    }
    for (std::size_t j = i + 1; j < objects.size(); ++j) {
      const double dist = (objects[j].center.head<2>() - o.center.head<2>()).norm();
      if (dist < o.footprint_radius() + objects[j].footprint_radius() + min_separation - 1e-12) {
        throw GenerationFailureError("SceneSpec: objects closer than the minimum separation");
      }
    }
  }
  if (std::abs(light_dir.norm() - 1.0) > 1e-9) {
    throw GenerationFailureError("SceneSpec: light direction must be a unit vector");
  }
}

void GeneratorConfig::validate() const {
  if (image_height < 16 || image_width < 16) {
    throw InputDomainError("GeneratorConfig: image size too small");
  }
  if (object_count_min < 1 || object_count_max < object_count_min) {
    throw InputDomainError("GeneratorConfig: bad object count range");
  }
  if (removal_count_min < 1 || removal_count_max < removal_count_min) {
    throw InputDomainError("GeneratorConfig: removal count range must start at >= 1");
  }
  if (removal_count_max > object_count_max) {
    throw InputDomainError("GeneratorConfig: cannot remove more objects than exist");
  }
  if (!allow_boxes && !allow_spheres) {
    throw InputDomainError("GeneratorConfig: at least one shape kind must be allowed");
  }
  if (!(camera_radius_min > 0) || camera_radius_max < camera_radius_min) {
    throw InputDomainError("GeneratorConfig: bad camera radius range");
  }
  if (!(camera_height_min > 0) || camera_height_max < camera_height_min) {
    throw InputDomainError("GeneratorConfig: bad camera height range");
  }
  if (!(focal_px > 0)) throw InputDomainError("GeneratorConfig: focal length must be positive");
}

GeneratorConfig easy_suite_config() {
  GeneratorConfig cfg;
  cfg.object_count_min = 4;
  cfg.object_count_max = 6;
  cfg.allow_spheres = false;
  cfg.box_size_min = 0.30;
  cfg.box_size_max = 0.50;
  cfg.object_albedo_min = 0.65;
  cfg.object_albedo_max = 0.95;
  cfg.plane_tone_a = 0.22;
  cfg.plane_tone_b = 0.38;
  cfg.focal_px = 260.0;
  cfg.camera_radius_min = 2.0;
  cfg.camera_radius_max = 3.0;
  cfg.camera_height_min = 1.0;
  cfg.camera_height_max = 2.2;
  cfg.camera_azimuth_sep_min = 0.25;
  cfg.camera_azimuth_sep_max = 0.9;
  cfg.placement_radius = 0.8;
  cfg.min_box_px = 24.0;
  cfg.texture_contrast = 0.6;
  return cfg;
}

GeneratorConfig planar_suite_config() {
  GeneratorConfig cfg = easy_suite_config();
  cfg.planar = true;
  cfg.allow_spheres = false;
  cfg.box_size_min = 0.34;
  cfg.box_size_max = 0.55;
  cfg.camera_height_min = 1.6;
  cfg.camera_height_max = 2.8;
  return cfg;
}

std::optional<RayHit> cast_ray(const SceneSpec& scene, const Eigen::Vector3d& origin,
                               const Eigen::Vector3d& dir,
                               const std::vector<std::uint8_t>* skip) {
  std::optional<RayHit> best;
  auto consider = [&](double t, int object) {
    if (!best || t < best->t) {
      best = RayHit{t, object, origin + t * dir, Eigen::Vector3d::UnitZ()};
    }
  };

  if (std::abs(dir.z()) > 1e-15) {
    const double t = -origin.z() / dir.z();
    if (t >= kRayEps) {
      const Eigen::Vector3d p = origin + t * dir;
      if (std::abs(p.x()) <= scene.plane_half_extent && std::abs(p.y()) <= scene.plane_half_extent) {
        consider(t, -1);
      }
    }
  }

  for (std::size_t i = 0; i < scene.objects.size(); ++i) {
    if (skip && (*skip)[i]) continue;
    const auto& obj = scene.objects[i];
    std::optional<double> t;
    if (obj.shape == ShapeKind::Sphere) {
      t = intersect_sphere(origin, dir, obj.center, obj.size.x());
    } else {
      t = intersect_box(origin, dir, obj.center, obj.size / 2.0);
    }
    if (t) consider(*t, static_cast<int>(i));
  }

  if (!best) return std::nullopt;
  if (best->object >= 0) {
    const auto& obj = scene.objects[static_cast<std::size_t>(best->object)];
    if (obj.shape == ShapeKind::Sphere) {
      best->normal = (best->point - obj.center).normalized();
    } else {
      best->normal = box_normal(best->point, obj.center, obj.size / 2.0);
    }
  }
  return best;
}

SceneSpec generate_scene(const GeneratorConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Rng rng(mix_seed(seed, kSceneStream));
  SceneSpec scene;
  scene.plane_seed = rng.next_u64();
  scene.plane_tone_a = cfg.plane_tone_a;
  scene.plane_tone_b = cfg.plane_tone_b;
  scene.texture_contrast = cfg.texture_contrast;

  {
    Rng light(mix_seed(seed, kLightStream));
    const double az = light.uniform(0.0, 2.0 * M_PI);
    const double el = light.uniform(0.9, 1.3);  // elevation above horizon, radians
    scene.light_dir = Eigen::Vector3d(std::cos(az) * std::cos(el), std::sin(az) * std::cos(el),
                                      std::sin(el))
                          .normalized();
  }

  const int count = static_cast<int>(rng.uniform_int(cfg.object_count_min, cfg.object_count_max));
  int attempts = 0;
  while (static_cast<int>(scene.objects.size()) < count) {
    if (++attempts > 10000) {
      throw GenerationFailureError("generate_scene: could not place objects with the required separation");
    }
    SceneObject obj;
    const bool sphere = cfg.allow_spheres && (!cfg.allow_boxes || rng.next_double() < 0.5);
    obj.shape = sphere ? ShapeKind::Sphere : ShapeKind::Box;
    if (sphere) {
      const double r = rng.uniform(cfg.sphere_radius_min, cfg.sphere_radius_max);
      obj.size = Eigen::Vector3d::Constant(r);
    } else {
      obj.size = Eigen::Vector3d(rng.uniform(cfg.box_size_min, cfg.box_size_max),
                                 rng.uniform(cfg.box_size_min, cfg.box_size_max),
                                 cfg.planar ? 0.002
                                            : rng.uniform(cfg.box_size_min, cfg.box_size_max));
    }
    // uniform position on the placement disk
    const double ang = rng.uniform(0.0, 2.0 * M_PI);
    const double rad = cfg.placement_radius * std::sqrt(rng.next_double());
    obj.center = Eigen::Vector3d(rad * std::cos(ang), rad * std::sin(ang),
                                 sphere ? obj.size.x() : obj.size.z() / 2.0);
    obj.albedo = Eigen::Vector3d(rng.uniform(cfg.object_albedo_min, cfg.object_albedo_max),
                                 rng.uniform(cfg.object_albedo_min, cfg.object_albedo_max),
                                 rng.uniform(cfg.object_albedo_min, cfg.object_albedo_max));
    obj.texture_seed = rng.next_u64();

    bool ok = true;
    for (const auto& other : scene.objects) {
      const double dist = (other.center.head<2>() - obj.center.head<2>()).norm();
      if (dist < other.footprint_radius() + obj.footprint_radius() + cfg.min_separation) {
        ok = false;
        break;
      }
    }
    if (ok) scene.objects.push_back(obj);
  }
  return scene;
}

CameraModel make_lookat_camera(const Eigen::Vector3d& position, const Eigen::Vector3d& target,
                               double focal_px, int width, int height) {
  const Eigen::Vector3d forward = (target - position).normalized();
  Eigen::Vector3d right = forward.cross(Eigen::Vector3d::UnitZ());
  if (right.norm() < 1e-9) right = Eigen::Vector3d::UnitX();  // looking straight down
  right.normalize();
  const Eigen::Vector3d down = forward.cross(right).normalized();

  CameraModel cam;
  cam.fx = cam.fy = focal_px;
  cam.cx = width / 2.0;
  cam.cy = height / 2.0;
  cam.R.row(0) = right;
  cam.R.row(1) = down;
  cam.R.row(2) = forward;
  cam.t = -cam.R * position;
  cam.validate();
  return cam;
}

std::pair<ImageRGB, DepthMap> render_view(const SceneSpec& scene, const CameraModel& cam,
                                          int height, int width,
                                          const std::vector<std::uint8_t>* skip) {
  if (height <= 0 || width <= 0) throw InputDomainError("render_view: bad image size");
  ImageRGB rgb(3, height, width);
  DepthMap depth = DepthMap::constant(height, width, static_cast<float>(kSkyDepth));
  const Eigen::Vector3d center = cam.camera_center();
  const Eigen::Matrix3d r_t = cam.R.transpose();

  for (int v = 0; v < height; ++v) {
    for (int u = 0; u < width; ++u) {
      // parametrized so t equals camera-frame depth (dir has z_cam = 1)
      const Eigen::Vector3d dir = r_t * cam.pixel_ray(u + 0.5, v + 0.5);
      const auto hit = cast_ray(scene, center, dir, skip);
      Eigen::Vector3d color = kSkyColor;
      if (hit) {
        depth.at(v, u) = static_cast<float>(hit->t);
        const Eigen::Vector3d albedo =
            hit->object < 0 ? plane_albedo(scene, hit->point)
                            : object_albedo(scene.objects[static_cast<std::size_t>(hit->object)],
                                            hit->point, hit->normal, scene.texture_contrast);
        const double lambert = std::max(0.0, hit->normal.dot(scene.light_dir));
        color = albedo * (kAmbient + (1.0 - kAmbient) * lambert);
      }
      rgb.at(0, v, u) = static_cast<float>(std::clamp(color.x(), 0.0, 1.0));
      rgb.at(1, v, u) = static_cast<float>(std::clamp(color.y(), 0.0, 1.0));
      rgb.at(2, v, u) = static_cast<float>(std::clamp(color.z(), 0.0, 1.0));
    }
  }
  return {std::move(rgb), std::move(depth)};
}

namespace {

std::vector<Eigen::Vector3d> surface_samples(const SceneObject& obj) {
  std::vector<Eigen::Vector3d> pts;
  if (obj.shape == ShapeKind::Sphere) {
    const double r = obj.size.x();
    const int n = 128;
    const double golden = M_PI * (3.0 - std::sqrt(5.0));
    for (int i = 0; i < n; ++i) {
      const double z = 1.0 - 2.0 * (i + 0.5) / n;
      const double rho = std::sqrt(std::max(0.0, 1.0 - z * z));
      const double phi = golden * i;
      pts.push_back(obj.center + r * Eigen::Vector3d(rho * std::cos(phi), rho * std::sin(phi), z));
    }
  } else {
    const Eigen::Vector3d half = obj.size / 2.0;
    const int grid = 5;
    // all faces except the bottom one, which is flush against the plane
    for (int axis = 0; axis < 3; ++axis) {
      for (int side : {-1, 1}) {
        if (axis == 2 && side == -1) continue;
        const int ua = (axis + 1) % 3;
        const int va = (axis + 2) % 3;
        for (int i = 0; i < grid; ++i) {
          for (int j = 0; j < grid; ++j) {
            Eigen::Vector3d p = obj.center;
            p(axis) += side * half(axis);
            p(ua) += half(ua) * (2.0 * (i + 0.5) / grid - 1.0);
            p(va) += half(va) * (2.0 * (j + 0.5) / grid - 1.0);
            pts.push_back(p);
          }
        }
      }
    }
  }
  return pts;
}

bool point_visible(const SceneSpec& scene, const Eigen::Vector3d& p, const CameraModel& cam,
                   int width, int height, const std::vector<std::uint8_t>* skip) {
  const auto proj = cam.project(p);
  if (!proj) return false;
  if (proj->x() < 0.0 || proj->x() > width || proj->y() < 0.0 || proj->y() > height) return false;
  const Eigen::Vector3d origin = cam.camera_center();
  const auto hit = cast_ray(scene, origin, p - origin, skip);
  return !hit || hit->t >= 1.0 - kOcclusionTol;
}

}  // namespace

double visibility_fraction(const SceneSpec& scene, int object_index, const CameraModel& cam,
                           int width, int height, const std::vector<std::uint8_t>* skip) {
  const auto pts = surface_samples(scene.objects[static_cast<std::size_t>(object_index)]);
  int visible = 0;
  for (const auto& p : pts) {
    if (point_visible(scene, p, cam, width, height, skip)) ++visible;
  }
  return static_cast<double>(visible) / static_cast<double>(pts.size());
}

std::optional<GtBox> project_object_box(const SceneObject& object, const CameraModel& cam,
                                        int width, int height) {
  double x0 = 1e30, y0 = 1e30, x1 = -1e30, y1 = -1e30;
  int in_front = 0;
  for (const auto& corner : object.bounding_corners()) {
    const auto proj = cam.project(corner);
    if (!proj) continue;
    ++in_front;
    x0 = std::min(x0, proj->x());
    y0 = std::min(y0, proj->y());
    x1 = std::max(x1, proj->x());
    y1 = std::max(y1, proj->y());
  }
  if (in_front < 2) return std::nullopt;
  GtBox box;
  box.x_min = std::clamp(x0, 0.0, static_cast<double>(width));
  box.y_min = std::clamp(y0, 0.0, static_cast<double>(height));
  box.x_max = std::clamp(x1, 0.0, static_cast<double>(width));
  box.y_max = std::clamp(y1, 0.0, static_cast<double>(height));
  if (box.x_max - box.x_min < 1.0 || box.y_max - box.y_min < 1.0) return std::nullopt;
  return box;
}

namespace {

CameraModel sample_camera(Rng& rng, const GeneratorConfig& cfg, double azimuth) {
  const double radius = rng.uniform(cfg.camera_radius_min, cfg.camera_radius_max);
  const double height = rng.uniform(cfg.camera_height_min, cfg.camera_height_max);
  const Eigen::Vector3d pos(radius * std::cos(azimuth), radius * std::sin(azimuth), height);
  const Eigen::Vector3d target(rng.uniform(-cfg.lookat_jitter, cfg.lookat_jitter),
                               rng.uniform(-cfg.lookat_jitter, cfg.lookat_jitter),
                               std::max(0.05, 0.15 + rng.uniform(-cfg.lookat_jitter,
                                                                 cfg.lookat_jitter)));
  return make_lookat_camera(pos, target, cfg.focal_px, cfg.image_width, cfg.image_height);
}

// exact static-surface correspondences through view-1 pixel centers
CorrespondenceSet collect_correspondences(const SceneSpec& scene, const CameraModel& cam1,
                                          const CameraModel& cam2, int width, int height,
                                          const std::vector<std::uint8_t>& removed_mask,
                                          bool plane_only, int target) {
  CorrespondenceSet corr;
  const Eigen::Vector3d c1 = cam1.camera_center();
  const Eigen::Matrix3d r1t = cam1.R.transpose();
  for (int stride = std::max(1, std::min(width, height) / 16); stride >= 1; stride /= 2) {
    corr.r.clear();
    corr.q.clear();
    for (int v = stride / 2; v < height; v += stride) {
      for (int u = stride / 2; u < width; u += stride) {
        const Eigen::Vector3d dir = r1t * cam1.pixel_ray(u + 0.5, v + 0.5);
        const auto hit = cast_ray(scene, c1, dir);
        if (!hit) continue;
        if (hit->object >= 0 && removed_mask[static_cast<std::size_t>(hit->object)]) continue;
        if (plane_only && hit->object != -1) continue;
        if (!point_visible(scene, hit->point, cam2, width, height, &removed_mask)) continue;
        const auto proj = cam2.project(hit->point);
        corr.r.push_back(normalize_pixel(u, v, width, height));
        corr.q.push_back({pixel_to_norm(proj->x(), width), pixel_to_norm(proj->y(), height)});
      }
    }
    if (static_cast<int>(corr.size()) >= target) break;
    if (stride == 1) break;
  }
  return corr;
}

struct PairGeometry {
  CameraModel cam1, cam2;
  std::vector<int> removed;
  std::vector<std::uint8_t> removed_mask;
  std::vector<GtBox> boxes1, boxes2;
};

ChangePairSample finish_pair(const GeneratorConfig& cfg, std::uint64_t seed,
                             const SceneSpec& scene, const PairGeometry& geo) {
  ChangePairSample sample;
  sample.seed = seed;
  sample.width = cfg.image_width;
  sample.height = cfg.image_height;
  sample.scene = scene;
  sample.cam1 = geo.cam1;
  sample.cam2 = geo.cam2;
  sample.removed = geo.removed;
  sample.gt_boxes_1 = geo.boxes1;
  sample.gt_boxes_2 = geo.boxes2;

  auto [rgb1, depth1] = render_view(scene, geo.cam1, cfg.image_height, cfg.image_width);
  auto [rgb2, depth2] = render_view(scene, geo.cam2, cfg.image_height, cfg.image_width,
                                    &geo.removed_mask);
  sample.rgb1 = std::move(rgb1);
  sample.depth1 = std::move(depth1);
  sample.rgb2 = std::move(rgb2);
  sample.depth2 = std::move(depth2);

  sample.gt_correspondences =
      collect_correspondences(scene, geo.cam1, geo.cam2, cfg.image_width, cfg.image_height,
                              geo.removed_mask, cfg.planar, cfg.correspondence_target);
  if (sample.gt_correspondences.size() < 64) {
    throw GenerationFailureError("make_change_pair: fewer than 64 static correspondences");
  }
  return sample;
}

}  // namespace

ChangePairSample make_change_pair(const GeneratorConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  const SceneSpec scene = generate_scene(cfg, seed);
  Rng cam_rng(mix_seed(seed, kCameraStream));
  Rng removal_rng(mix_seed(seed, kRemovalStream));
  const int n_objects = static_cast<int>(scene.objects.size());

  for (int attempt = 0; attempt < 50; ++attempt) {
    const double az1 = cam_rng.uniform(0.0, 2.0 * M_PI);
    const double sep = cam_rng.uniform(cfg.camera_azimuth_sep_min, cfg.camera_azimuth_sep_max);
    const double az2 = az1 + (cam_rng.next_double() < 0.5 ? -sep : sep);
    PairGeometry geo;
    geo.cam1 = sample_camera(cam_rng, cfg, az1);
    geo.cam2 = sample_camera(cam_rng, cfg, az2);

    int removal_count = static_cast<int>(
        removal_rng.uniform_int(cfg.removal_count_min, cfg.removal_count_max));
    removal_count = std::min(removal_count, n_objects);

    // sample a removal subset without replacement
    std::vector<int> order(static_cast<std::size_t>(n_objects));
    for (int i = 0; i < n_objects; ++i) order[static_cast<std::size_t>(i)] = i;
    for (int i = n_objects - 1; i > 0; --i) {
      const int j = static_cast<int>(removal_rng.next_index(static_cast<std::uint64_t>(i + 1)));
      std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
    }
    geo.removed.assign(order.begin(), order.begin() + removal_count);
    std::sort(geo.removed.begin(), geo.removed.end());
    geo.removed_mask.assign(static_cast<std::size_t>(n_objects), 0);
    for (int idx : geo.removed) geo.removed_mask[static_cast<std::size_t>(idx)] = 1;

    // every removed object must be co-visible and large enough in both views
    bool ok = true;
    for (int idx : geo.removed) {
      const double vis1 = visibility_fraction(scene, idx, geo.cam1, cfg.image_width,
                                              cfg.image_height, nullptr);
      const double vis2 = visibility_fraction(scene, idx, geo.cam2, cfg.image_width,
                                              cfg.image_height, &geo.removed_mask);
      if (vis1 <= cfg.min_visibility || vis2 <= cfg.min_visibility) {
        ok = false;
        break;
      }
      const auto box1 = project_object_box(scene.objects[static_cast<std::size_t>(idx)], geo.cam1,
                                           cfg.image_width, cfg.image_height);
      const auto box2 = project_object_box(scene.objects[static_cast<std::size_t>(idx)], geo.cam2,
                                           cfg.image_width, cfg.image_height);
      if (!box1 || !box2) {
        ok = false;
        break;
      }
      if (cfg.min_box_px > 0.0 &&
          (box1->x_max - box1->x_min < cfg.min_box_px || box1->y_max - box1->y_min < cfg.min_box_px ||
           box2->x_max - box2->x_min < cfg.min_box_px || box2->y_max - box2->y_min < cfg.min_box_px)) {
        ok = false;
        break;
      }
      GtBox b1 = *box1, b2 = *box2;
      b1.visibility = vis1;
      b2.visibility = vis2;
      geo.boxes1.push_back(b1);
      geo.boxes2.push_back(b2);
    }
    if (!ok) continue;
    try {
      return finish_pair(cfg, seed, scene, geo);
    } catch (const GenerationFailureError&) {
      continue;  // too few shared correspondences; resample cameras
    }
  }
  throw GenerationFailureError(
      "make_change_pair: no co-visible removal candidate after 50 camera resamples");
}

ChangePairSample make_disocclusion_pair(const GeneratorConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  const SceneSpec scene = generate_scene(cfg, seed);
  Rng cam_rng(mix_seed(seed, kCameraStream));
  Rng removal_rng(mix_seed(seed, kRemovalStream));
  const int n_objects = static_cast<int>(scene.objects.size());

  for (int attempt = 0; attempt < 50; ++attempt) {
    const double az1 = cam_rng.uniform(0.0, 2.0 * M_PI);
    PairGeometry geo;
    geo.cam1 = sample_camera(cam_rng, cfg, az1);

    const int removed = static_cast<int>(removal_rng.next_index(static_cast<std::uint64_t>(n_objects)));
    geo.removed = {removed};
    geo.removed_mask.assign(static_cast<std::size_t>(n_objects), 0);
    geo.removed_mask[static_cast<std::size_t>(removed)] = 1;
    const auto& obj = scene.objects[static_cast<std::size_t>(removed)];

    if (visibility_fraction(scene, removed, geo.cam1, cfg.image_width, cfg.image_height) <=
        cfg.min_visibility) {
      continue;
    }
    const auto box1 = project_object_box(obj, geo.cam1, cfg.image_width, cfg.image_height);
    if (!box1) continue;

    // aim camera 2 away from the removed object so it leaves the frustum but
    // the views still share scene content
    const double az2 = az1 + cam_rng.uniform(0.35, 0.8) * (cam_rng.next_double() < 0.5 ? -1 : 1);
    const double radius = cam_rng.uniform(cfg.camera_radius_min, cfg.camera_radius_max);
    const double height = cam_rng.uniform(cfg.camera_height_min, cfg.camera_height_max);
    const Eigen::Vector3d pos2(radius * std::cos(az2), radius * std::sin(az2), height);
    bool found = false;
    for (int k = 1; k <= 12 && !found; ++k) {
      const Eigen::Vector3d away = (Eigen::Vector3d(0, 0, 0.15) - obj.center) *
                                   (0.4 * static_cast<double>(k));
      const Eigen::Vector3d target = Eigen::Vector3d(0, 0, 0.15) + Eigen::Vector3d(away.x(),
                                                                                   away.y(), 0.0);
      geo.cam2 = make_lookat_camera(pos2, target, cfg.focal_px, cfg.image_width, cfg.image_height);
      if (!project_object_box(obj, geo.cam2, cfg.image_width, cfg.image_height)) found = true;
    }
    if (!found) continue;

    GtBox b1 = *box1;
    b1.visibility = visibility_fraction(scene, removed, geo.cam1, cfg.image_width,
                                        cfg.image_height);
    geo.boxes1.push_back(b1);
    // gt_boxes_2 stays empty: the change is not co-visible

    try {
      return finish_pair(cfg, seed, scene, geo);
    } catch (const GenerationFailureError&) {
      continue;  // too few shared correspondences; try another geometry
    }
  }
  throw GenerationFailureError("make_disocclusion_pair: no suitable camera pair found");
}

}  // namespace regdiff
