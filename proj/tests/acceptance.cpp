// Acceptance suite: one pass/fail line per criterion, exit 0 only if all pass.
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "regdiff/config.hpp"
#include "regdiff/detect.hpp"
#include "regdiff/io.hpp"
#include "regdiff/rng.hpp"
#include "regdiff/synthgen.hpp"

using namespace regdiff;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string details;
};

class Runner {
 public:
  void run(int number, const std::string& title, const std::function<Outcome()>& fn) {
    const auto start = std::chrono::steady_clock::now();
    Outcome outcome;
    try {
      outcome = fn();
    } catch (const std::exception& e) {
      outcome.pass = false;
      outcome.details = std::string("exception: ") + e.what();
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("[%s] criterion %2d: %s (%s; %.1fs)\n", outcome.pass ? "PASS" : "FAIL", number,
                title.c_str(), outcome.details.c_str(), secs);
    std::fflush(stdout);
    all_pass_ &= outcome.pass;
  }

  bool all_pass() const { return all_pass_; }

 private:
  bool all_pass_ = true;
};

double elapsed_since(const std::chrono::steady_clock::time_point& t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---- shared constructions --------------------------------------------------

Eigen::Matrix<double, Eigen::Dynamic, 4> random_rank4_points(Rng& rng, int n) {
  Eigen::Matrix<double, Eigen::Dynamic, 4> pts(n, 4);
  for (int i = 0; i < n; ++i) {
    pts.row(i) = back_project({rng.uniform(-0.9, 0.9), rng.uniform(-0.9, 0.9)},
                              rng.uniform(0.5, 4.0));
  }
  return pts;
}

CameraModel look_at(const Eigen::Vector3d& pos, const Eigen::Vector3d& target, double f, int w,
                    int h) {
  return make_lookat_camera(pos, target, f, w, h);
}

// oblique plane-scene pair with analytic depth maps, for RANSAC trials
struct PlanePair {
  CameraModel cam1, cam2;
  DepthMap d1, d2;
  int width = 64, height = 64;

  explicit PlanePair(Rng& rng)
      : cam1(look_at({rng.uniform(1.8, 2.4), rng.uniform(-0.4, 0.4), rng.uniform(1.6, 2.2)},
                     {0.05, 0, 0}, 70.0, 64, 64)),
        cam2(look_at({rng.uniform(1.2, 1.8), rng.uniform(1.0, 1.7), rng.uniform(1.8, 2.6)},
                     {-0.05, 0.1, 0}, 70.0, 64, 64)),
        d1(depth_for(cam1)),
        d2(depth_for(cam2)) {}

  DepthMap depth_for(const CameraModel& cam) const {
    DepthMap d = DepthMap::constant(height, width, 1.0f);
    const Eigen::Vector3d c = cam.camera_center();
    for (int v = 0; v < height; ++v) {
      for (int u = 0; u < width; ++u) {
        const Eigen::Vector3d dir = cam.R.transpose() * cam.pixel_ray(u + 0.5, v + 0.5);
        d.at(v, u) = static_cast<float>(-c.z() / dir.z());
      }
    }
    return d;
  }

  CorrespondenceSet sample(int target) const {
    CorrespondenceSet corr;
    for (int i = 0; i < 60 && static_cast<int>(corr.size()) < target; ++i) {
      for (int j = 0; j < 60 && static_cast<int>(corr.size()) < target; ++j) {
        const Eigen::Vector3d w(-0.9 + 1.8 * i / 59.0, -0.9 + 1.8 * j / 59.0, 0.0);
        const auto a = cam1.project(w);
        const auto b = cam2.project(w);
        if (!a || !b) continue;
        if (a->x() < 2 || a->x() > width - 2 || a->y() < 2 || a->y() > height - 2) continue;
        if (b->x() < 2 || b->x() > width - 2 || b->y() < 2 || b->y() > height - 2) continue;
        corr.r.push_back({pixel_to_norm(a->x(), width), pixel_to_norm(a->y(), height)});
        corr.q.push_back({pixel_to_norm(b->x(), width), pixel_to_norm(b->y(), height)});
      }
    }
    return corr;
  }
};

FeaturePointCloud random_cloud(Rng& rng, int n, int channels) {
  FeaturePointCloud cloud;
  cloud.channels = channels;
  for (int i = 0; i < n; ++i) {
    cloud.positions.push_back({rng.uniform(-1.1, 1.1), rng.uniform(-1.1, 1.1),
                               rng.uniform(0.4, 3.5)});
    for (int c = 0; c < channels; ++c) cloud.features.push_back(static_cast<float>(rng.next_normal()));
  }
  return cloud;
}

// dataset of generated pairs kept in memory for the benchmark criteria
std::vector<ChangePairSample> generate_suite(const GeneratorConfig& cfg, int count,
                                             std::uint64_t seed0,
                                             std::string* error) {
  std::vector<ChangePairSample> samples;
  std::uint64_t seed = seed0;
  int failures = 0;
  while (static_cast<int>(samples.size()) < count && failures < count) {
    try {
      samples.push_back(make_change_pair(cfg, seed));
    } catch (const GenerationFailureError&) {
      ++failures;
    }
    ++seed;
  }
  if (static_cast<int>(samples.size()) < count && error) {
    *error = "generator produced only " + std::to_string(samples.size()) + "/" +
             std::to_string(count) + " samples";
  }
  return samples;
}

struct SuiteEval {
  double ap = 0.0;
  int evaluated = 0;
};

SuiteEval evaluate_suite(const std::vector<ChangePairSample>& samples,
                         const std::function<RegistrationStrategy(const ChangePairSample&)>& pick,
                         const PipelineConfig& cfg) {
  std::vector<ImagePredictions> preds;
  std::vector<ImageGroundTruth> gts;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    const PipelineResult res =
        detect_changes(s.rgb1, s.rgb2, &s.depth1, &s.depth2, pick(s), cfg);
    auto to_boxes = [](const std::vector<GtBox>& in) {
      std::vector<Box> out;
      for (const auto& b : in) out.push_back({b.x_min, b.y_min, b.x_max, b.y_max});
      return out;
    };
    const std::string id = "s" + std::to_string(i);
    preds.push_back({id + "#1", res.boxes1});
    preds.push_back({id + "#2", res.boxes2});
    gts.push_back({id + "#1", to_boxes(s.gt_boxes_1)});
    gts.push_back({id + "#2", to_boxes(s.gt_boxes_2)});
  }
  SuiteEval out;
  out.ap = average_precision(preds, gts, 0.5).ap;
  out.evaluated = static_cast<int>(samples.size());
  return out;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

int main(int argc, char** argv) {
  const std::string cli = argc > 1 ? argv[1] : "";
  Runner runner;

  runner.run(1, "transform recovery: 200 noiseless trials, rel error < 1e-8, < 1s", [&] {
    const auto t0 = std::chrono::steady_clock::now();
    Rng rng(20240);
    int ok = 0;
    double worst = 0.0;
    for (int trial = 0; trial < 200; ++trial) {
      Eigen::Matrix4d a;
      do {
        for (int r = 0; r < 4; ++r)
          for (int c = 0; c < 4; ++c) a(r, c) = (r == c ? 1.0 : 0.0) + 0.3 * rng.next_normal();
      } while (std::abs(a.determinant()) < 0.1);
      const auto src = random_rank4_points(rng, 20);
      const Eigen::Matrix<double, Eigen::Dynamic, 4> dst = src * a.transpose();
      const double rel = (estimate_transform_lsq(src, dst).transform.m - a).norm() / a.norm();
      worst = std::max(worst, rel);
      if (rel < 1e-8) ++ok;
    }
    const double secs = elapsed_since(t0);
    std::ostringstream os;
    os << ok << "/200 trials, worst rel err " << worst << ", " << secs << "s";
    return Outcome{ok == 200 && secs < 1.0, os.str()};
  });

  runner.run(2, "RANSAC: 30% outliers, threshold 0.01, >= 99/100 within 1e-6 of clean fit, < 5s", [&] {
    const auto t0 = std::chrono::steady_clock::now();
    int ok = 0;
    for (int trial = 0; trial < 100; ++trial) {
      Rng rng(5000 + static_cast<std::uint64_t>(trial));
      const PlanePair scene(rng);
      CorrespondenceSet corr = scene.sample(70);
      if (corr.size() < 70) continue;
      corr.r.resize(70);
      corr.q.resize(70);

      Eigen::Matrix<double, Eigen::Dynamic, 4> src(70, 4), dst(70, 4);
      bool usable = true;
      for (int i = 0; i < 70; ++i) {
        const auto dr = sample_depth_bilinear(scene.d1, corr.r[static_cast<std::size_t>(i)]);
        const auto dq = sample_depth_bilinear(scene.d2, corr.q[static_cast<std::size_t>(i)]);
        if (!dr || !dq) {
          usable = false;
          break;
        }
        src.row(i) = back_project(corr.r[static_cast<std::size_t>(i)], *dr);
        dst.row(i) = back_project(corr.q[static_cast<std::size_t>(i)], *dq);
      }
      if (!usable) continue;
      const Eigen::Matrix4d clean = estimate_transform_lsq(src, dst).transform.m;

      for (int i = 0; i < 30; ++i) {
        corr.r.push_back({rng.uniform(-0.8, 0.8), rng.uniform(-0.8, 0.8)});
        corr.q.push_back({rng.uniform(-0.8, 0.8), rng.uniform(-0.8, 0.8)});
      }
      RansacConfig cfg;
      cfg.inlier_threshold = 0.01;
      cfg.seed = 77000 + static_cast<std::uint64_t>(trial);
      try {
        const RansacResult res = estimate_transform_ransac(corr, scene.d1, scene.d2, cfg);
        if ((res.transform.m - clean).norm() / clean.norm() < 1e-6) ++ok;
      } catch (const Error&) {
      }
    }
    const double secs = elapsed_since(t0);
    std::ostringstream os;
    os << ok << "/100 trials recovered, " << secs << "s";
    return Outcome{ok >= 99 && secs < 5.0, os.str()};
  });

  runner.run(3, "renderer equals brute-force oracle on 100 random clouds, max err < 1e-5, < 5s", [&] {
    const auto t0 = std::chrono::steady_clock::now();
    Rng rng(31415);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
      const int h = 4 + static_cast<int>(rng.next_index(13));
      const int w = 4 + static_cast<int>(rng.next_index(13));
      const FeaturePointCloud cloud = random_cloud(rng, 1 + static_cast<int>(rng.next_index(256)),
                                                   1 + static_cast<int>(rng.next_index(4)));
      RenderConfig cfg;
      cfg.splat_radius = rng.uniform(0.5, 2.5);
      cfg.k_nearest = 1 + static_cast<int>(rng.next_index(6));
      cfg.depth_sigma = rng.uniform(0.02, 0.2);
      const auto [grid, mask] = splat_render(cloud, h, w, cfg);
      const auto oracle = oracles::brute_force_render(cloud, h, w, cfg);
      for (std::size_t i = 0; i < grid.data.size(); ++i) {
        worst = std::max(worst, std::abs(grid.data[i] - oracle.features[i]));
      }
      for (std::size_t i = 0; i < mask.values.size(); ++i) {
        worst = std::max(worst, std::abs(mask.values[i] - oracle.mask[i]));
      }
    }
    const double secs = elapsed_since(t0);
    std::ostringstream os;
    os << "max abs err " << worst << ", " << secs << "s";
    return Outcome{worst < 1e-5 && secs < 5.0, os.str()};
  });

  runner.run(4, "renderer linearity in features on 50 random cases, < 1e-5", [&] {
    Rng rng(2718);
    double worst = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
      FeaturePointCloud f = random_cloud(rng, 100, 3);
      FeaturePointCloud g = f;
      for (auto& v : g.features) v = static_cast<float>(rng.next_normal());
      const double alpha = rng.uniform(-2.0, 2.0);
      const double beta = rng.uniform(-2.0, 2.0);
      worst = std::max(worst, render_linearity_check(f, g, alpha, beta, 12, 12, RenderConfig{}));
    }
    std::ostringstream os;
    os << "max discrepancy " << worst;
    return Outcome{worst < 1e-5, os.str()};
  });

  runner.run(5, "masking law: 20 out-of-view changes produce no confident box in the dis-occluded area", [&] {
    const GeneratorConfig gen = easy_suite_config();
    int produced = 0, violations = 0;
    std::uint64_t seed = 9000;
    while (produced < 20 && seed < 9100) {
      ChangePairSample s;
      try {
        s = make_disocclusion_pair(gen, seed++);
      } catch (const GenerationFailureError&) {
        continue;
      }
      ++produced;
      const PipelineResult res = detect_changes(s.rgb1, s.rgb2, &s.depth1, &s.depth2,
                                                GroundTruthPose{s.cam1, s.cam2}, PipelineConfig{});
      for (const auto& b : res.boxes2) {
        if (b.score < 0.05) continue;
        int inside = 0, total = 0;
        for (int y = static_cast<int>(b.y_min); y < static_cast<int>(b.y_max); ++y) {
          for (int x = static_cast<int>(b.x_min); x < static_cast<int>(b.x_max); ++x) {
            ++total;
            if (res.vis2.at(y, x) < 0.05f) ++inside;
          }
        }
        if (total > 0 && inside * 2 >= total) ++violations;
      }
    }
    std::ostringstream os;
    os << produced << " pairs, " << violations << " boxes in dis-occluded areas";
    return Outcome{produced == 20 && violations == 0, os.str()};
  });

  runner.run(6, "geometry consistency: GT correspondences reproject < 1e-6 on 50 samples", [&] {
    GeneratorConfig cfg;  // default mixed-shape generator
    std::string err;
    const auto samples = generate_suite(cfg, 50, 40000, &err);
    if (!err.empty()) return Outcome{false, err};
    double worst = 0.0;
    long checked = 0;
    for (const auto& s : samples) {
      const PoseWarp warp = relative_pose_transform(s.cam1, s.cam2, s.width, s.height);
      for (std::size_t i = 0; i < s.gt_correspondences.size(); ++i) {
        const auto& pr = s.gt_correspondences.r[i];
        const auto [u, v] = denormalize_point(pr, s.width, s.height);
        const auto warped = warp(pr.x, pr.y, s.depth1.at(v, u));
        if (!warped) return Outcome{false, "correspondence dropped by the warp"};
        const auto& pq = s.gt_correspondences.q[i];
        worst = std::max(worst, std::hypot((*warped)(0) - pq.x, (*warped)(1) - pq.y));
        ++checked;
      }
    }
    std::ostringstream os;
    os << checked << " correspondences, worst reprojection " << worst;
    return Outcome{worst < 1e-6, os.str()};
  });

  GeneratorConfig easy = easy_suite_config();
  std::vector<ChangePairSample> easy_suite;

  runner.run(7, "easy suite: AP@0.5 >= 0.90 (GT pose) and >= 0.80 (estimated transform), < 10 min", [&] {
    const auto t0 = std::chrono::steady_clock::now();
    std::string err;
    easy_suite = generate_suite(easy, 100, 100000, &err);
    if (!err.empty()) return Outcome{false, err};

    const PipelineConfig cfg;
    const SuiteEval gt_pose = evaluate_suite(
        easy_suite,
        [](const ChangePairSample& s) -> RegistrationStrategy {
          return GroundTruthPose{s.cam1, s.cam2};
        },
        cfg);

    RansacConfig ransac;
    ransac.seed = 4242;
    const SuiteEval estimated = evaluate_suite(
        easy_suite,
        [&](const ChangePairSample& s) -> RegistrationStrategy {
          return Transform3DEstimated{s.gt_correspondences, ransac};
        },
        cfg);

    const double secs = elapsed_since(t0);
    std::ostringstream os;
    os << "AP@0.5 gt-pose " << gt_pose.ap << ", estimated " << estimated.ap << ", " << secs << "s";
    return Outcome{gt_pose.ap >= 0.90 && estimated.ap >= 0.80 && secs < 600.0, os.str()};
  });

  runner.run(8, "homography path: recovery < 1e-6 on 20 planar pairs, planar AP@0.5 >= 0.85", [&] {
    const GeneratorConfig planar = planar_suite_config();
    std::string err;
    const auto samples = generate_suite(planar, 20, 200000, &err);
    if (!err.empty()) return Outcome{false, err};

    double worst = 0.0;
    for (const auto& s : samples) {
      const Homography2D gt = plane_induced_homography(s.cam1, s.cam2, s.width, s.height);
      const Homography2D est = estimate_homography_dlt(s.gt_correspondences);
      worst = std::max(worst, (est.m - gt.m).norm() / gt.m.norm());
    }

    const SuiteEval detection = evaluate_suite(
        samples,
        [](const ChangePairSample& s) -> RegistrationStrategy {
          return HomographyEstimated{s.gt_correspondences};
        },
        PipelineConfig{});

    std::ostringstream os;
    os << "worst homography rel err " << worst << ", AP@0.5 " << detection.ap;
    return Outcome{worst < 1e-6 && detection.ap >= 0.85, os.str()};
  });

  runner.run(9, "AP evaluator equals the exhaustive oracle on 100 random cases (1e-12)", [&] {
    Rng rng(616);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
      std::vector<ImagePredictions> preds;
      std::vector<ImageGroundTruth> gts;
      const int images = 1 + static_cast<int>(rng.next_index(3));
      for (int i = 0; i < images; ++i) {
        const std::string id = "img" + std::to_string(i);
        ImagePredictions p{id, {}};
        ImageGroundTruth g{id, {}};
        const int np = static_cast<int>(rng.next_index(6));
        const int ng = static_cast<int>(rng.next_index(6));
        for (int b = 0; b < np; ++b) {
          const double x = rng.uniform(0, 50), y = rng.uniform(0, 50);
          p.boxes.push_back({x, y, x + rng.uniform(2, 20), y + rng.uniform(2, 20),
                             rng.uniform(0.05, 1.0)});
        }
        for (int b = 0; b < ng; ++b) {
          const double x = rng.uniform(0, 50), y = rng.uniform(0, 50);
          g.boxes.push_back({x, y, x + rng.uniform(2, 20), y + rng.uniform(2, 20)});
        }
        preds.push_back(std::move(p));
        gts.push_back(std::move(g));
      }
      worst = std::max(worst, std::abs(average_precision(preds, gts, 0.5).ap -
                                       oracles::ap_oracle(preds, gts, 0.5)));
    }
    std::ostringstream os;
    os << "max |diff| " << worst;
    return Outcome{worst <= 1e-12, os.str()};
  });

  runner.run(10, "determinism: two CLI runs produce byte-identical prediction JSON", [&] {
    if (cli.empty() || !fs::exists(cli)) {
      return Outcome{false, "CLI path not supplied (pass the regdiff binary as argv[1])"};
    }
    const fs::path root = fs::temp_directory_path() / "regdiff_acceptance_c10";
    fs::remove_all(root);
    fs::create_directories(root);

    GeneratorConfig gen = easy_suite_config();
    const ChangePairSample sample = make_change_pair(gen, 55);
    const fs::path sample_dir = save_sample(sample, gen, root / "data");

    auto run_cli = [&](const std::string& out) {
      std::ostringstream cmd;
      cmd << '"' << cli << '"' << " detect --pair \"" << sample_dir.string() << "\" --out \""
          << (root / out).string() << "\" 2>/dev/null";
      return std::system(cmd.str().c_str());
    };
    if (run_cli("run_a") != 0) return Outcome{false, "first CLI run failed"};
    if (run_cli("run_b") != 0) return Outcome{false, "second CLI run failed"};

    const std::string a = read_file(root / "run_a" / sample_dir.filename() / "predictions.json");
    const std::string b = read_file(root / "run_b" / sample_dir.filename() / "predictions.json");
    std::ostringstream os;
    os << a.size() << " bytes each";
    const bool pass = !a.empty() && a == b;
    fs::remove_all(root);
    return Outcome{pass, os.str()};
  });

  std::printf("%s\n", runner.all_pass() ? "ACCEPTANCE: all criteria passed"
                                        : "ACCEPTANCE: some criteria FAILED");
  return runner.all_pass() ? 0 : 1;
}
