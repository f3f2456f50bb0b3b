#include "regdiff/config.hpp"

#include <algorithm>
#include <cstdlib>
#include <thread>

namespace regdiff {

namespace {

GeneratorConfig generator_from_toml(const TomlTable& t) {
  const std::string preset = t.get_string("generator.preset", "default");
  GeneratorConfig cfg;
  if (preset == "easy") {
    cfg = easy_suite_config();
  } else if (preset == "planar") {
    cfg = planar_suite_config();
  } else if (preset != "default") {
    throw IoError("unknown generator preset '" + preset + "'");
  }

  const auto size = t.get_double_array("generator.image_size");
  if (size.size() == 2) {
    cfg.image_height = static_cast<int>(size[0]);
    cfg.image_width = static_cast<int>(size[1]);
  } else if (!size.empty()) {
    throw IoError("generator.image_size must be [height, width]");
  }
  cfg.object_count_min = static_cast<int>(t.get_int("generator.object_count_min", cfg.object_count_min));
  cfg.object_count_max = static_cast<int>(t.get_int("generator.object_count_max", cfg.object_count_max));
  cfg.removal_count_min = static_cast<int>(t.get_int("generator.removal_count_min", cfg.removal_count_min));
  cfg.removal_count_max = static_cast<int>(t.get_int("generator.removal_count_max", cfg.removal_count_max));
  cfg.camera_radius_min = t.get_double("generator.camera_radius_min", cfg.camera_radius_min);
  cfg.camera_radius_max = t.get_double("generator.camera_radius_max", cfg.camera_radius_max);
  cfg.camera_height_min = t.get_double("generator.camera_height_min", cfg.camera_height_min);
  cfg.camera_height_max = t.get_double("generator.camera_height_max", cfg.camera_height_max);
  cfg.camera_azimuth_sep_min = t.get_double("generator.camera_azimuth_sep_min", cfg.camera_azimuth_sep_min);
  cfg.camera_azimuth_sep_max = t.get_double("generator.camera_azimuth_sep_max", cfg.camera_azimuth_sep_max);
  cfg.lookat_jitter = t.get_double("generator.lookat_jitter", cfg.lookat_jitter);
  cfg.focal_px = t.get_double("generator.focal_px", cfg.focal_px);
  cfg.texture_contrast = t.get_double("generator.texture_contrast", cfg.texture_contrast);
  cfg.placement_radius = t.get_double("generator.placement_radius", cfg.placement_radius);
  cfg.min_separation = t.get_double("generator.min_separation", cfg.min_separation);
  cfg.allow_boxes = t.get_bool("generator.allow_boxes", cfg.allow_boxes);
  cfg.allow_spheres = t.get_bool("generator.allow_spheres", cfg.allow_spheres);
  cfg.box_size_min = t.get_double("generator.box_size_min", cfg.box_size_min);
  cfg.box_size_max = t.get_double("generator.box_size_max", cfg.box_size_max);
  cfg.sphere_radius_min = t.get_double("generator.sphere_radius_min", cfg.sphere_radius_min);
  cfg.sphere_radius_max = t.get_double("generator.sphere_radius_max", cfg.sphere_radius_max);
  cfg.object_albedo_min = t.get_double("generator.object_albedo_min", cfg.object_albedo_min);
  cfg.object_albedo_max = t.get_double("generator.object_albedo_max", cfg.object_albedo_max);
  cfg.plane_tone_a = t.get_double("generator.plane_tone_a", cfg.plane_tone_a);
  cfg.plane_tone_b = t.get_double("generator.plane_tone_b", cfg.plane_tone_b);
  cfg.min_visibility = t.get_double("generator.min_visibility", cfg.min_visibility);
  cfg.min_box_px = t.get_double("generator.min_box_px", cfg.min_box_px);
  cfg.planar = t.get_bool("generator.planar", cfg.planar);
  cfg.correspondence_target = static_cast<int>(
      t.get_int("generator.correspondence_target", cfg.correspondence_target));
  cfg.seed = static_cast<std::uint64_t>(t.get_int("generator.seed", static_cast<std::int64_t>(cfg.seed)));
  return cfg;
}

}  // namespace

RunConfig run_config_from_toml(const TomlTable& t) {
  RunConfig cfg;

  cfg.strategy.name = t.get_string("strategy.name", "auto");
  if (t.has("strategy.homography")) {
    const auto values = t.get_double_array("strategy.homography");
    if (values.size() != 9) throw IoError("strategy.homography must have 9 row-major entries");
    std::array<double, 9> h{};
    std::copy(values.begin(), values.end(), h.begin());
    cfg.strategy.homography = h;
  }
  if (t.has("strategy.transform")) {
    const auto values = t.get_double_array("strategy.transform");
    if (values.size() != 16) throw IoError("strategy.transform must have 16 row-major entries");
    std::array<double, 16> m{};
    std::copy(values.begin(), values.end(), m.begin());
    cfg.strategy.transform = m;
  }
  cfg.strategy.ransac.max_iterations =
      static_cast<int>(t.get_int("strategy.ransac.max_iterations", 1000));
  cfg.strategy.ransac.inlier_threshold = t.get_double("strategy.ransac.inlier_threshold", 0.01);
  cfg.strategy.ransac.min_sample = static_cast<int>(t.get_int("strategy.ransac.min_sample", 5));
  cfg.strategy.ransac.seed = static_cast<std::uint64_t>(t.get_int("strategy.ransac.seed", 0));
  cfg.strategy.ransac.confidence = t.get_double("strategy.ransac.confidence", 0.999);

  FeatureConfig& f = cfg.pipeline.features;
  f.levels = static_cast<int>(t.get_int("features.levels", f.levels));
  const auto sigmas = t.get_double_array("features.sigmas");
  if (!sigmas.empty()) f.gaussian_sigmas = sigmas;
  f.include_color = t.get_bool("features.include_color", f.include_color);
  f.include_gradients = t.get_bool("features.include_gradients", f.include_gradients);

  RenderConfig& r = cfg.pipeline.render;
  r.splat_radius = t.get_double("render.splat_radius", r.splat_radius);
  r.k_nearest = static_cast<int>(t.get_int("render.k_nearest", r.k_nearest));
  r.weight_power = t.get_double("render.weight_power", r.weight_power);
  r.depth_sigma = t.get_double("render.depth_sigma", r.depth_sigma);

  DetectConfig& d = cfg.pipeline.detect;
  d.heat_threshold = t.get_double("detect.heat_threshold", d.heat_threshold);
  d.min_area = static_cast<int>(t.get_int("detect.min_area", d.min_area));
  d.morph_radius = static_cast<int>(t.get_int("detect.morph_radius", d.morph_radius));
  d.max_boxes = static_cast<int>(t.get_int("detect.max_boxes", d.max_boxes));

  cfg.generator = generator_from_toml(t);
  cfg.pairs = t.get_string_array("inputs.pairs");
  cfg.output_dir = t.get_string("output.dir", "");
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  RunConfig cfg = run_config_from_toml(load_toml(path));
  for (const auto& pair : cfg.pairs) {
    if (!std::filesystem::exists(pair)) {
      throw InputDomainError("run config references a missing input: " + pair);
    }
  }
  return cfg;
}

RegistrationStrategy resolve_strategy(const StrategySpec& spec, const PairInputs& inputs) {
  const bool has_depth = inputs.depth1.has_value() && inputs.depth2.has_value();

  auto need_depth = [&](const std::string& who) {
    if (!has_depth) {
      throw InputDomainError("strategy '" + who +
                             "' requires both depth maps (depth1.pfm/depth2.pfm or --depth1/--depth2)");
    }
  };

  if (spec.name == "identity") return IdentityStrategy{};
  if (spec.name == "homography_supplied") {
    if (!spec.homography) {
      throw InputDomainError("strategy 'homography_supplied' requires strategy.homography (9 values)");
    }
    return HomographySupplied{Homography2D::from_row_major(*spec.homography)};
  }
  if (spec.name == "homography_estimated") {
    if (!inputs.correspondences) {
      throw InputDomainError(
          "strategy 'homography_estimated' requires correspondences.json or --correspondences");
    }
    return HomographyEstimated{*inputs.correspondences};
  }
  if (spec.name == "transform3d_supplied") {
    if (!spec.transform) {
      throw InputDomainError("strategy 'transform3d_supplied' requires strategy.transform (16 values)");
    }
    need_depth("transform3d_supplied");
    return Transform3DSupplied{Transform3D::from_row_major(*spec.transform)};
  }
  if (spec.name == "transform3d_estimated") {
    if (!inputs.correspondences) {
      throw InputDomainError(
          "strategy 'transform3d_estimated' requires correspondences.json or --correspondences");
    }
    need_depth("transform3d_estimated");
    return Transform3DEstimated{*inputs.correspondences, spec.ransac};
  }
  if (spec.name == "ground_truth_pose") {
    if (!inputs.cameras) {
      throw InputDomainError("strategy 'ground_truth_pose' requires cameras.json or --cameras");
    }
    need_depth("ground_truth_pose");
    return GroundTruthPose{inputs.cameras->cam1, inputs.cameras->cam2};
  }
  if (spec.name == "auto") {
    if (inputs.cameras && has_depth) return GroundTruthPose{inputs.cameras->cam1, inputs.cameras->cam2};
    if (inputs.correspondences && has_depth) {
      return Transform3DEstimated{*inputs.correspondences, spec.ransac};
    }
    return IdentityStrategy{};
  }
  throw InputDomainError("unknown registration strategy '" + spec.name + "'");
}

int thread_budget() {
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  int budget = static_cast<int>(hw);
  if (const char* env = std::getenv("REGDIFF_THREADS")) {
    const int requested = std::atoi(env);
    if (requested >= 1) budget = std::min(budget, requested);
  }
  return budget;
}

}  // namespace regdiff
