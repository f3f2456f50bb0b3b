#include <CLI11.hpp>

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <mutex>
#include <thread>
#include <vector>

#include "regdiff/config.hpp"
#include "regdiff/detect.hpp"
#include "regdiff/io.hpp"

namespace fs = std::filesystem;
using namespace regdiff;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInputError = 1;
constexpr int kExitRegistrationFailure = 2;

RunConfig load_config_or_default(const std::string& path) {
  if (path.empty()) return RunConfig{};
  return load_run_config(path);
}

// simple index-sharded worker pool; REGDIFF_THREADS caps the width
void parallel_over(std::size_t count, const std::function<void(std::size_t)>& work) {
  const int threads = std::min<int>(thread_budget(), static_cast<int>(count));
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) work(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next.fetch_add(1); i < count; i = next.fetch_add(1)) work(i);
    });
  }
  for (auto& th : pool) th.join();
}

int run_generate(const std::string& config_path, int count, const std::string& out_dir,
                 std::int64_t seed_override) {
  RunConfig cfg = load_config_or_default(config_path);
  if (seed_override >= 0) cfg.generator.seed = static_cast<std::uint64_t>(seed_override);
  fs::create_directories(out_dir);

  std::mutex log_mutex;
  std::atomic<int> failures{0};
  parallel_over(static_cast<std::size_t>(count), [&](std::size_t i) {
    const std::uint64_t seed = cfg.generator.seed + i;
    try {
      const ChangePairSample sample = make_change_pair(cfg.generator, seed);
      const fs::path dir = save_sample(sample, cfg.generator, out_dir);
      std::lock_guard lock(log_mutex);
      std::cerr << "generated " << dir.string() << " (" << sample.gt_correspondences.size()
                << " correspondences, " << sample.removed.size() << " removed)\n";
    } catch (const std::exception& e) {
      ++failures;
      std::lock_guard lock(log_mutex);
      std::cerr << "seed " << seed << " failed: " << e.what() << "\n";
    }
  });
  return failures.load() == 0 ? kExitOk : kExitInputError;
}

struct DetectJob {
  PairInputs inputs;
  fs::path out_dir;
};

int detect_one(const RunConfig& cfg, const DetectJob& job, bool overlays) {
  const RegistrationStrategy strategy = resolve_strategy(cfg.strategy, job.inputs);
  const DepthMap* d1 = job.inputs.depth1 ? &*job.inputs.depth1 : nullptr;
  const DepthMap* d2 = job.inputs.depth2 ? &*job.inputs.depth2 : nullptr;

  const PipelineResult result =
      detect_changes(job.inputs.rgb1, job.inputs.rgb2, d1, d2, strategy, cfg.pipeline);

  fs::create_directories(job.out_dir);
  save_predictions(result.boxes1, result.boxes2, job.out_dir / "predictions.json");
  if (overlays) {
    save_overlay_png(job.inputs.rgb1, result.boxes1, job.out_dir / "overlay1.png");
    save_overlay_png(job.inputs.rgb2, result.boxes2, job.out_dir / "overlay2.png");
  }
  return kExitOk;
}

int run_detect(const std::string& config_path, const std::vector<std::string>& pair_dirs,
               const std::string& img1, const std::string& img2, const std::string& depth1,
               const std::string& depth2, const std::string& cameras,
               const std::string& correspondences, const std::string& out_dir, bool overlays) {
  const RunConfig cfg = load_config_or_default(config_path);

  std::vector<std::string> pairs = pair_dirs;
  pairs.insert(pairs.end(), cfg.pairs.begin(), cfg.pairs.end());
  const std::string out = !out_dir.empty() ? out_dir
                          : !cfg.output_dir.empty() ? cfg.output_dir
                                                    : std::string("out");

  std::vector<DetectJob> jobs;
  if (!pairs.empty()) {
    for (const auto& dir : pairs) {
      DetectJob job;
      job.inputs = load_pair_dir(dir);
      job.out_dir = fs::path(out) / job.inputs.name;
      jobs.push_back(std::move(job));
    }
  } else {
    if (img1.empty() || img2.empty()) {
      std::cerr << "detect: provide --pair or both --img1 and --img2\n";
      return kExitInputError;
    }
    DetectJob job;
    job.inputs.name = fs::path(img1).stem().string() + "_pair";
    job.inputs.rgb1 = load_image_rgb(img1);
    job.inputs.rgb2 = load_image_rgb(img2);
    job.inputs.width = job.inputs.rgb1.width;
    job.inputs.height = job.inputs.rgb1.height;
    if (!depth1.empty()) job.inputs.depth1 = load_depth_any(depth1);
    if (!depth2.empty()) job.inputs.depth2 = load_depth_any(depth2);
    if (!cameras.empty()) job.inputs.cameras = load_camera_pair(cameras);
    if (!correspondences.empty()) job.inputs.correspondences = load_correspondences(correspondences);
    job.out_dir = fs::path(out) / job.inputs.name;
    jobs.push_back(std::move(job));
  }

  std::mutex log_mutex;
  std::atomic<int> worst{kExitOk};
  parallel_over(jobs.size(), [&](std::size_t i) {
    try {
      detect_one(cfg, jobs[i], overlays);
      std::lock_guard lock(log_mutex);
      std::cerr << "detected " << jobs[i].inputs.name << "\n";
    } catch (const RegistrationFailureError& e) {
      worst.store(kExitRegistrationFailure);
      std::lock_guard lock(log_mutex);
      std::cerr << jobs[i].inputs.name << ": registration failed: " << e.what() << "\n";
    } catch (const std::exception& e) {
      int expected = worst.load();
      while (expected == kExitOk && !worst.compare_exchange_weak(expected, kExitInputError)) {
      }
      std::lock_guard lock(log_mutex);
      std::cerr << jobs[i].inputs.name << ": " << e.what() << "\n";
    }
  });
  return worst.load();
}

int run_eval(const std::string& pred_dir, const std::string& gt_dir, double iou_threshold,
             std::string out_file) {
  std::map<std::string, fs::path> preds, gts;
  for (const auto& entry : fs::directory_iterator(pred_dir)) {
    if (entry.is_directory() && fs::exists(entry.path() / "predictions.json")) {
      preds[entry.path().filename().string()] = entry.path() / "predictions.json";
    }
  }
  for (const auto& entry : fs::directory_iterator(gt_dir)) {
    if (entry.is_directory() && fs::exists(entry.path() / "gt_boxes.json")) {
      gts[entry.path().filename().string()] = entry.path() / "gt_boxes.json";
    }
  }
  if (preds.empty()) {
    std::cerr << "eval: no predictions under " << pred_dir << "\n";
    return kExitInputError;
  }
  if (preds.size() != gts.size()) {
    std::cerr << "eval: prediction and ground-truth sample sets differ in size (" << preds.size()
              << " vs " << gts.size() << ")\n";
    return kExitInputError;
  }

  std::vector<ImagePredictions> pooled_preds;
  std::vector<ImageGroundTruth> pooled_gts;
  std::vector<ImagePredictions> view_preds[2];
  std::vector<ImageGroundTruth> view_gts[2];
  for (const auto& [name, pred_path] : preds) {
    const auto gt_it = gts.find(name);
    if (gt_it == gts.end()) {
      std::cerr << "eval: no ground truth for sample '" << name << "'\n";
      return kExitInputError;
    }
    const auto [boxes1, boxes2] = load_predictions(pred_path);
    const GtBoxesFile gt = load_gt_boxes(gt_it->second);
    auto to_boxes = [](const std::vector<GtBox>& in) {
      std::vector<Box> out;
      for (const auto& b : in) out.push_back({b.x_min, b.y_min, b.x_max, b.y_max});
      return out;
    };
    pooled_preds.push_back({name + "#1", boxes1});
    pooled_preds.push_back({name + "#2", boxes2});
    pooled_gts.push_back({name + "#1", to_boxes(gt.image1)});
    pooled_gts.push_back({name + "#2", to_boxes(gt.image2)});
    view_preds[0].push_back({name + "#1", boxes1});
    view_gts[0].push_back({name + "#1", to_boxes(gt.image1)});
    view_preds[1].push_back({name + "#2", boxes2});
    view_gts[1].push_back({name + "#2", to_boxes(gt.image2)});
  }

  EvalResult result = average_precision(pooled_preds, pooled_gts, iou_threshold);
  result.per_view["image1"] = average_precision(view_preds[0], view_gts[0], iou_threshold).ap;
  result.per_view["image2"] = average_precision(view_preds[1], view_gts[1], iou_threshold).ap;

  if (out_file.empty()) out_file = (fs::path(pred_dir) / "eval.json").string();
  save_eval_result(result, out_file);

  std::printf("AP@%g: %.4f\n", iou_threshold, result.ap);
  return kExitOk;
}

int run_warp_debug(const std::string& pair_dir, int level, const std::string& out_dir,
                   const std::string& config_path) {
  const RunConfig cfg = load_config_or_default(config_path);
  const PairInputs inputs = load_pair_dir(pair_dir);
  if (level < 0 || level >= cfg.pipeline.features.levels) {
    std::cerr << "warp-debug: level " << level << " outside the configured pyramid\n";
    return kExitInputError;
  }

  const RegistrationStrategy strategy = resolve_strategy(cfg.strategy, inputs);
  const DepthMap* d1 = inputs.depth1 ? &*inputs.depth1 : nullptr;
  const DepthMap* d2 = inputs.depth2 ? &*inputs.depth2 : nullptr;
  const RegistrationPlan plan = build_plan(strategy, d1, d2, inputs.width, inputs.height);

  const FeaturePyramid pyr1 = extract_pyramid(inputs.rgb1, cfg.pipeline.features);
  const FeaturePyramid pyr2 = extract_pyramid(inputs.rgb2, cfg.pipeline.features);

  fs::create_directories(out_dir);
  auto render_direction = [&](const FeatureGrid& source, const DepthMap* source_depth,
                              const Warp& warp, const FeatureGrid& target,
                              const std::string& tag) {
    DepthMap depth = source_depth
                         ? downsample_depth(*source_depth, source_depth->height / source.height)
                         : DepthMap::constant(source.height, source.width, 1.0f);
    const FeaturePointCloud cloud = lift_features(source, depth, warp);
    const auto [rendered, mask] = splat_render(cloud, target.height, target.width, cfg.pipeline.render);

    std::vector<float> norm(static_cast<std::size_t>(rendered.height) * rendered.width, 0.0f);
    for (int c = 0; c < rendered.channels; ++c) {
      const float* p = rendered.channel(c);
      for (std::size_t i = 0; i < norm.size(); ++i) norm[i] += p[i] * p[i];
    }
    for (float& v : norm) v = std::sqrt(v);
    save_gray_png(norm, rendered.height, rendered.width,
                  fs::path(out_dir) / ("warped_norm_" + tag + ".png"), true);
    save_gray_png(mask.values, mask.height, mask.width,
                  fs::path(out_dir) / ("visibility_" + tag + ".png"), false);
  };

  render_direction(pyr2.levels[static_cast<std::size_t>(level)], d2, plan.warp_2to1,
                   pyr1.levels[static_cast<std::size_t>(level)], "2to1");
  render_direction(pyr1.levels[static_cast<std::size_t>(level)], d1, plan.warp_1to2,
                   pyr2.levels[static_cast<std::size_t>(level)], "1to2");
  std::cerr << "warp-debug wrote 4 PNGs to " << out_dir << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"register-and-difference change detection for two-view 3D scenes"};
  app.require_subcommand(1);

  // generate
  auto* gen = app.add_subcommand("generate", "render synthetic change-pair samples");
  std::string gen_config, gen_out = "dataset";
  int gen_count = 1;
  std::int64_t gen_seed = -1;
  gen->add_option("--config", gen_config, "run config (TOML)");
  gen->add_option("--count", gen_count, "number of samples")->check(CLI::PositiveNumber);
  gen->add_option("--out", gen_out, "output directory")->required();
  gen->add_option("--seed", gen_seed, "base seed (overrides config)");

  // detect
  auto* det = app.add_subcommand("detect", "detect changes in one or more pairs");
  std::string det_config, det_img1, det_img2, det_depth1, det_depth2, det_cameras, det_corr;
  std::string det_out;
  std::vector<std::string> det_pairs;
  bool det_overlays = false;
  det->add_option("--config", det_config, "run config (TOML)");
  det->add_option("--pair", det_pairs, "sample directory (repeatable)");
  det->add_option("--img1", det_img1, "first image");
  det->add_option("--img2", det_img2, "second image");
  det->add_option("--depth1", det_depth1, "depth for image 1 (.pfm or 16-bit .png)");
  det->add_option("--depth2", det_depth2, "depth for image 2");
  det->add_option("--cameras", det_cameras, "camera pair JSON");
  det->add_option("--correspondences", det_corr, "correspondence JSON");
  det->add_option("--out", det_out, "output directory");
  det->add_flag("--overlays", det_overlays, "write box overlays next to predictions");

  // eval
  auto* ev = app.add_subcommand("eval", "average precision of predictions against ground truth");
  std::string ev_pred, ev_gt, ev_out;
  double ev_iou = 0.5;
  ev->add_option("--pred", ev_pred, "directory of per-sample prediction folders")->required();
  ev->add_option("--gt", ev_gt, "dataset directory with gt_boxes.json per sample")->required();
  ev->add_option("--iou", ev_iou, "IoU threshold");
  ev->add_option("--out", ev_out, "result JSON path (default <pred>/eval.json)");

  // warp-debug
  auto* wd = app.add_subcommand("warp-debug", "dump warped feature norms and visibility masks");
  std::string wd_pair, wd_out = "warp_debug", wd_config;
  int wd_level = 0;
  wd->add_option("--pair", wd_pair, "sample directory")->required();
  wd->add_option("--level", wd_level, "pyramid level");
  wd->add_option("--out", wd_out, "output directory")->required();
  wd->add_option("--config", wd_config, "run config (TOML)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return e.get_exit_code() == 0 ? kExitOk : kExitInputError;
  }

  try {
    if (gen->parsed()) return run_generate(gen_config, gen_count, gen_out, gen_seed);
    if (det->parsed()) {
      return run_detect(det_config, det_pairs, det_img1, det_img2, det_depth1, det_depth2,
                        det_cameras, det_corr, det_out, det_overlays);
    }
    if (ev->parsed()) return run_eval(ev_pred, ev_gt, ev_iou, ev_out);
    if (wd->parsed()) return run_warp_debug(wd_pair, wd_level, wd_out, wd_config);
  } catch (const RegistrationFailureError& e) {
    std::cerr << "registration failure: " << e.what() << "\n";
    return kExitRegistrationFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInputError;
  }
  return kExitInputError;
}
