#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "regdiff/eval.hpp"
#include "regdiff/synthgen.hpp"

namespace regdiff {

// --- depth maps ---------------------------------------------------------------

/// PFM, grayscale float32; a negative scale in the header means little-endian
/// (the only flavor we write). Nonpositive/nonfinite entries load as invalid.
DepthMap load_depth_pfm(const std::filesystem::path& path);
void save_depth_pfm(const DepthMap& depth, const std::filesystem::path& path);

/// 16-bit PNG with a JSON sidecar ("<file>.json") giving {"units_per_step": s};
/// zero steps load as invalid entries.
DepthMap load_depth_png16(const std::filesystem::path& path);
void save_depth_png16(const DepthMap& depth, const std::filesystem::path& path,
                      double units_per_step);

/// Dispatch by extension (.pfm / .png).
DepthMap load_depth_any(const std::filesystem::path& path);

// --- images -------------------------------------------------------------------

ImageRGB load_image_rgb(const std::filesystem::path& path);
void save_image_rgb(const ImageRGB& image, const std::filesystem::path& path);

/// Boxes drawn on a copy of the image (one RGB color per list).
void save_overlay_png(const ImageRGB& image, const std::vector<ScoredBox>& boxes,
                      const std::filesystem::path& path);

/// 8-bit grayscale PNG; when normalize is set the values are scaled by their
/// maximum first (for visualizing feature norms), otherwise clamped to [0, 1].
void save_gray_png(const std::vector<float>& values, int height, int width,
                   const std::filesystem::path& path, bool normalize);

// --- feature grids --------------------------------------------------------

/// On-disk format: 8-byte little-endian header length, JSON header
/// {"c","h","w","dtype":"f32le"}, then the raw channel-major float32 payload.
void save_feature_grid(const FeatureGrid& grid, const std::filesystem::path& path);
FeatureGrid load_feature_grid(const std::filesystem::path& path);

// --- JSON documents -------------------------------------------------------

/// {"pairs": [[xr, yr, xq, yq], ...]} in normalized coordinates.
CorrespondenceSet load_correspondences(const std::filesystem::path& path);
void save_correspondences(const CorrespondenceSet& corr, const std::filesystem::path& path);

struct CameraPairFile {
  CameraModel cam1;
  CameraModel cam2;
  int width = 0;
  int height = 0;
};

/// {"camera1": {fx,fy,cx,cy,R,t}, "camera2": {...}, "width": W, "height": H}
CameraPairFile load_camera_pair(const std::filesystem::path& path);
void save_camera_pair(const CameraPairFile& cameras, const std::filesystem::path& path);

struct GtBoxesFile {
  std::vector<GtBox> image1;
  std::vector<GtBox> image2;
};

GtBoxesFile load_gt_boxes(const std::filesystem::path& path);
void save_gt_boxes(const GtBoxesFile& boxes, const std::filesystem::path& path);

/// {"image1": [{"bbox":[x0,y0,x1,y1],"score":s}, ...], "image2": [...]}.
/// Values are rounded to 6 decimals so reruns are byte-identical.
void save_predictions(const std::vector<ScoredBox>& boxes1, const std::vector<ScoredBox>& boxes2,
                      const std::filesystem::path& path);
std::pair<std::vector<ScoredBox>, std::vector<ScoredBox>> load_predictions(
    const std::filesystem::path& path);

void save_eval_result(const EvalResult& result, const std::filesystem::path& path);

// --- sample directories -----------------------------------------------------

/// sample_<seed>/{view1.png, view2.png, depth1.pfm, depth2.pfm, cameras.json,
/// correspondences.json, gt_boxes.json, meta.json}
std::filesystem::path save_sample(const ChangePairSample& sample, const GeneratorConfig& cfg,
                                  const std::filesystem::path& root);

/// Everything a detection run may need from a pair directory; optional pieces
/// are nullopt when the corresponding file is absent.
struct PairInputs {
  std::string name;
  int width = 0;
  int height = 0;
  ImageRGB rgb1;
  ImageRGB rgb2;
  std::optional<DepthMap> depth1;
  std::optional<DepthMap> depth2;
  std::optional<CameraPairFile> cameras;
  std::optional<CorrespondenceSet> correspondences;
};

PairInputs load_pair_dir(const std::filesystem::path& dir);

/// FNV-1a over a canonical serialization; stamped into meta.json.
std::string generator_config_hash(const GeneratorConfig& cfg);

}  // namespace regdiff
