#include "regdiff/io.hpp"

#include <json.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace regdiff {

using nlohmann::json;

namespace {

std::ifstream open_in(const std::filesystem::path& path, std::ios::openmode mode = {}) {
  std::ifstream in(path, mode | std::ios::in);
  if (!in) throw IoError("cannot open for reading: " + path.string());
  return in;
}

std::ofstream open_out(const std::filesystem::path& path, std::ios::openmode mode = {}) {
  std::ofstream out(path, mode | std::ios::out);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  return out;
}

json load_json(const std::filesystem::path& path) {
  auto in = open_in(path);
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw IoError("malformed JSON in " + path.string() + ": " + e.what());
  }
  return doc;
}

void write_json(const json& doc, const std::filesystem::path& path) {
  auto out = open_out(path);
  out << doc.dump(2) << "\n";
}

double round6(double v) { return std::round(v * 1e6) / 1e6; }

bool host_is_little_endian() {
  const std::uint16_t one = 1;
  return *reinterpret_cast<const std::uint8_t*>(&one) == 1;
}

}  // namespace

// --- PFM -----------------------------------------------------------------

DepthMap load_depth_pfm(const std::filesystem::path& path) {
  auto in = open_in(path, std::ios::binary);
  std::string magic;
  in >> magic;
  if (magic != "Pf") throw IoError("PFM: expected grayscale 'Pf' header in " + path.string());
  int width = 0, height = 0;
  double scale = 0.0;
  in >> width >> height >> scale;
  if (width <= 0 || height <= 0 || scale == 0.0) {
    throw IoError("PFM: bad dimensions/scale in " + path.string());
  }
  in.get();  // single whitespace after the scale

  const bool file_little = scale < 0.0;
  std::vector<float> raw(static_cast<std::size_t>(width) * height);
  in.read(reinterpret_cast<char*>(raw.data()),
          static_cast<std::streamsize>(raw.size() * sizeof(float)));
  if (!in) throw IoError("PFM: truncated payload in " + path.string());

  if (file_little != host_is_little_endian()) {
    for (float& v : raw) {
      std::uint32_t bits;
      std::memcpy(&bits, &v, 4);
      bits = __builtin_bswap32(bits);
      std::memcpy(&v, &bits, 4);
    }
  }

  // PFM rows run bottom-to-top
  std::vector<float> values(raw.size());
  const double magnitude = std::abs(scale);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      values[static_cast<std::size_t>(y) * width + x] =
          static_cast<float>(raw[static_cast<std::size_t>(height - 1 - y) * width + x] * magnitude);
    }
  }
  return DepthMap::from_values(height, width, std::move(values));
}

void save_depth_pfm(const DepthMap& depth, const std::filesystem::path& path) {
  auto out = open_out(path, std::ios::binary);
  out << "Pf\n" << depth.width << " " << depth.height << "\n" << -1.0 << "\n";
  for (int y = depth.height - 1; y >= 0; --y) {
    std::vector<float> row(static_cast<std::size_t>(depth.width));
    for (int x = 0; x < depth.width; ++x) row[static_cast<std::size_t>(x)] = depth.at(y, x);
    if (!host_is_little_endian()) {
      for (float& v : row) {
        std::uint32_t bits;
        std::memcpy(&bits, &v, 4);
        bits = __builtin_bswap32(bits);
        std::memcpy(&v, &bits, 4);
      }
    }
    out.write(reinterpret_cast<const char*>(row.data()),
              static_cast<std::streamsize>(row.size() * sizeof(float)));
  }
  if (!out) throw IoError("PFM: write failed: " + path.string());
}

// --- PNG16 depth ------------------------------------------------------------

DepthMap load_depth_png16(const std::filesystem::path& path) {
  const json sidecar = load_json(path.string() + ".json");
  if (!sidecar.contains("units_per_step")) {
    throw IoError("PNG16 depth: sidecar missing units_per_step: " + path.string() + ".json");
  }
  const double units = sidecar["units_per_step"].get<double>();
  if (!(units > 0.0)) throw IoError("PNG16 depth: units_per_step must be positive");

  cv::Mat img = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
  if (img.empty()) throw IoError("PNG16 depth: cannot read " + path.string());
  if (img.type() != CV_16U) throw IoError("PNG16 depth: expected a 16-bit single-channel PNG");

  std::vector<float> values(static_cast<std::size_t>(img.rows) * img.cols);
  for (int y = 0; y < img.rows; ++y) {
    for (int x = 0; x < img.cols; ++x) {
      const std::uint16_t step = img.at<std::uint16_t>(y, x);
      // zero steps encode "no measurement"; from_values flags them invalid
      values[static_cast<std::size_t>(y) * img.cols + x] =
          step == 0 ? 0.0f : static_cast<float>(step * units);
    }
  }
  return DepthMap::from_values(img.rows, img.cols, std::move(values));
}

void save_depth_png16(const DepthMap& depth, const std::filesystem::path& path,
                      double units_per_step) {
  if (!(units_per_step > 0.0)) throw InputDomainError("save_depth_png16: units_per_step <= 0");
  cv::Mat img(depth.height, depth.width, CV_16U, cv::Scalar(0));
  for (int y = 0; y < depth.height; ++y) {
    for (int x = 0; x < depth.width; ++x) {
      if (!depth.is_valid(y, x)) continue;
      const double step = std::round(depth.at(y, x) / units_per_step);
      img.at<std::uint16_t>(y, x) =
          static_cast<std::uint16_t>(std::clamp(step, 1.0, 65535.0));
    }
  }
  if (!cv::imwrite(path.string(), img)) throw IoError("PNG16 depth: write failed " + path.string());
  write_json(json{{"units_per_step", units_per_step}}, path.string() + ".json");
}

DepthMap load_depth_any(const std::filesystem::path& path) {
  const auto ext = path.extension().string();
  if (ext == ".pfm") return load_depth_pfm(path);
  if (ext == ".png") return load_depth_png16(path);
  throw IoError("unsupported depth format (want .pfm or .png): " + path.string());
}

// --- RGB images ------------------------------------------------------------

ImageRGB load_image_rgb(const std::filesystem::path& path) {
  cv::Mat bgr = cv::imread(path.string(), cv::IMREAD_COLOR);
  if (bgr.empty()) throw IoError("cannot read image: " + path.string());
  ImageRGB out(3, bgr.rows, bgr.cols);
  for (int y = 0; y < bgr.rows; ++y) {
    for (int x = 0; x < bgr.cols; ++x) {
      const cv::Vec3b& px = bgr.at<cv::Vec3b>(y, x);
      out.at(0, y, x) = px[2] / 255.0f;
      out.at(1, y, x) = px[1] / 255.0f;
      out.at(2, y, x) = px[0] / 255.0f;
    }
  }
  return out;
}

namespace {

cv::Mat to_bgr8(const ImageRGB& image) {
  if (image.channels != 3) throw InputDomainError("expected a 3-channel image");
  cv::Mat bgr(image.height, image.width, CV_8UC3);
  for (int y = 0; y < image.height; ++y) {
    for (int x = 0; x < image.width; ++x) {
      auto q = [&](int c) {
        return static_cast<std::uint8_t>(
            std::clamp(std::lround(image.at(c, y, x) * 255.0f), 0L, 255L));
      };
      bgr.at<cv::Vec3b>(y, x) = cv::Vec3b(q(2), q(1), q(0));
    }
  }
  return bgr;
}

}  // namespace

void save_image_rgb(const ImageRGB& image, const std::filesystem::path& path) {
  if (!cv::imwrite(path.string(), to_bgr8(image))) {
    throw IoError("cannot write image: " + path.string());
  }
}

void save_overlay_png(const ImageRGB& image, const std::vector<ScoredBox>& boxes,
                      const std::filesystem::path& path) {
  cv::Mat bgr = to_bgr8(image);
  for (const auto& b : boxes) {
    const cv::Point p0(static_cast<int>(std::lround(b.x_min)), static_cast<int>(std::lround(b.y_min)));
    const cv::Point p1(static_cast<int>(std::lround(b.x_max)) - 1,
                       static_cast<int>(std::lround(b.y_max)) - 1);
    cv::rectangle(bgr, p0, p1, cv::Scalar(0, 200, 255), 1);  // BGR: amber
  }
  if (!cv::imwrite(path.string(), bgr)) throw IoError("cannot write overlay: " + path.string());
}

void save_gray_png(const std::vector<float>& values, int height, int width,
                   const std::filesystem::path& path, bool normalize) {
  if (values.size() != static_cast<std::size_t>(height) * width) {
    throw InputDomainError("save_gray_png: value count does not match dimensions");
  }
  float scale = 1.0f;
  if (normalize) {
    float peak = 0.0f;
    for (float v : values) peak = std::max(peak, v);
    if (peak > 0.0f) scale = 1.0f / peak;
  }
  cv::Mat img(height, width, CV_8U);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const float v = values[static_cast<std::size_t>(y) * width + x] * scale;
      img.at<std::uint8_t>(y, x) =
          static_cast<std::uint8_t>(std::clamp(std::lround(v * 255.0f), 0L, 255L));
    }
  }
  if (!cv::imwrite(path.string(), img)) throw IoError("cannot write " + path.string());
}

// --- feature grid container ----------------------------------------------

void save_feature_grid(const FeatureGrid& grid, const std::filesystem::path& path) {
  grid.validate();
  const std::string header =
      json{{"c", grid.channels}, {"h", grid.height}, {"w", grid.width}, {"dtype", "f32le"}}.dump();
  auto out = open_out(path, std::ios::binary);
  const std::uint64_t header_len = header.size();
  std::uint8_t len_bytes[8];
  for (int i = 0; i < 8; ++i) len_bytes[i] = static_cast<std::uint8_t>((header_len >> (8 * i)) & 0xFF);
  out.write(reinterpret_cast<const char*>(len_bytes), 8);
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  if (host_is_little_endian()) {
    out.write(reinterpret_cast<const char*>(grid.data.data()),
              static_cast<std::streamsize>(grid.data.size() * sizeof(float)));
  } else {
    for (float v : grid.data) {
      std::uint32_t bits;
      std::memcpy(&bits, &v, 4);
      bits = __builtin_bswap32(bits);
      out.write(reinterpret_cast<const char*>(&bits), 4);
    }
  }
  if (!out) throw IoError("feature grid: write failed: " + path.string());
}

FeatureGrid load_feature_grid(const std::filesystem::path& path) {
  auto in = open_in(path, std::ios::binary);
  std::uint8_t len_bytes[8];
  in.read(reinterpret_cast<char*>(len_bytes), 8);
  if (!in) throw IoError("feature grid: truncated header length: " + path.string());
  std::uint64_t header_len = 0;
  for (int i = 7; i >= 0; --i) header_len = (header_len << 8) | len_bytes[i];
  if (header_len == 0 || header_len > 1 << 20) {
    throw IoError("feature grid: implausible header length: " + path.string());
  }
  std::string header(header_len, '\0');
  in.read(header.data(), static_cast<std::streamsize>(header_len));
  if (!in) throw IoError("feature grid: truncated header: " + path.string());

  json doc;
  try {
    doc = json::parse(header);
  } catch (const json::exception& e) {
    throw IoError("feature grid: bad header JSON: " + std::string(e.what()));
  }
  if (doc.value("dtype", "") != "f32le") throw IoError("feature grid: unsupported dtype");
  FeatureGrid grid(doc.at("c").get<int>(), doc.at("h").get<int>(), doc.at("w").get<int>());
  in.read(reinterpret_cast<char*>(grid.data.data()),
          static_cast<std::streamsize>(grid.data.size() * sizeof(float)));
  if (!in) throw IoError("feature grid: truncated payload: " + path.string());
  if (!host_is_little_endian()) {
    for (float& v : grid.data) {
      std::uint32_t bits;
      std::memcpy(&bits, &v, 4);
      bits = __builtin_bswap32(bits);
      std::memcpy(&v, &bits, 4);
    }
  }
  return grid;
}

// --- JSON documents ----------------------------------------------------------

CorrespondenceSet load_correspondences(const std::filesystem::path& path) {
  const json doc = load_json(path);
  if (!doc.contains("pairs") || !doc["pairs"].is_array()) {
    throw IoError("correspondences: missing 'pairs' array in " + path.string());
  }
  CorrespondenceSet corr;
  for (const auto& row : doc["pairs"]) {
    if (!row.is_array() || row.size() != 4) {
      throw IoError("correspondences: each pair must be [xr, yr, xq, yq]");
    }
    corr.r.push_back({row[0].get<double>(), row[1].get<double>()});
    corr.q.push_back({row[2].get<double>(), row[3].get<double>()});
  }
  corr.validate();
  return corr;
}

void save_correspondences(const CorrespondenceSet& corr, const std::filesystem::path& path) {
  json pairs = json::array();
  for (std::size_t i = 0; i < corr.size(); ++i) {
    pairs.push_back({corr.r[i].x, corr.r[i].y, corr.q[i].x, corr.q[i].y});
  }
  write_json(json{{"pairs", pairs}}, path);
}

namespace {

json camera_to_json(const CameraModel& cam) {
  json r = json::array();
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) r.push_back(cam.R(i, j));
  return json{{"fx", cam.fx}, {"fy", cam.fy}, {"cx", cam.cx}, {"cy", cam.cy},
              {"R", r},       {"t", {cam.t.x(), cam.t.y(), cam.t.z()}}};
}

CameraModel camera_from_json(const json& doc) {
  CameraModel cam;
  cam.fx = doc.at("fx").get<double>();
  cam.fy = doc.at("fy").get<double>();
  cam.cx = doc.at("cx").get<double>();
  cam.cy = doc.at("cy").get<double>();
  const auto& r = doc.at("R");
  const auto& t = doc.at("t");
  if (r.size() != 9 || t.size() != 3) throw IoError("camera: R must have 9 entries, t 3");
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) cam.R(i, j) = r[static_cast<std::size_t>(3 * i + j)].get<double>();
  for (int i = 0; i < 3; ++i) cam.t(i) = t[static_cast<std::size_t>(i)].get<double>();
  cam.validate();
  return cam;
}

}  // namespace

CameraPairFile load_camera_pair(const std::filesystem::path& path) {
  const json doc = load_json(path);
  CameraPairFile out;
  out.cam1 = camera_from_json(doc.at("camera1"));
  out.cam2 = camera_from_json(doc.at("camera2"));
  out.width = doc.value("width", 0);
  out.height = doc.value("height", 0);
  return out;
}

void save_camera_pair(const CameraPairFile& cameras, const std::filesystem::path& path) {
  write_json(json{{"camera1", camera_to_json(cameras.cam1)},
                  {"camera2", camera_to_json(cameras.cam2)},
                  {"width", cameras.width},
                  {"height", cameras.height}},
             path);
}

GtBoxesFile load_gt_boxes(const std::filesystem::path& path) {
  const json doc = load_json(path);
  GtBoxesFile out;
  auto parse = [](const json& arr) {
    std::vector<GtBox> boxes;
    for (const auto& item : arr) {
      const auto& b = item.at("bbox");
      if (b.size() != 4) throw IoError("gt box: bbox must have 4 entries");
      boxes.push_back({b[0].get<double>(), b[1].get<double>(), b[2].get<double>(),
                       b[3].get<double>(), item.value("visibility", 1.0)});
    }
    return boxes;
  };
  out.image1 = parse(doc.at("image1"));
  out.image2 = parse(doc.at("image2"));
  return out;
}

void save_gt_boxes(const GtBoxesFile& boxes, const std::filesystem::path& path) {
  auto dump = [](const std::vector<GtBox>& list) {
    json arr = json::array();
    for (const auto& b : list) {
      arr.push_back({{"bbox", {round6(b.x_min), round6(b.y_min), round6(b.x_max), round6(b.y_max)}},
                     {"visibility", round6(b.visibility)}});
    }
    return arr;
  };
  write_json(json{{"image1", dump(boxes.image1)}, {"image2", dump(boxes.image2)}}, path);
}

void save_predictions(const std::vector<ScoredBox>& boxes1, const std::vector<ScoredBox>& boxes2,
                      const std::filesystem::path& path) {
  auto dump = [](const std::vector<ScoredBox>& list) {
    json arr = json::array();
    for (const auto& b : list) {
      arr.push_back({{"bbox", {round6(b.x_min), round6(b.y_min), round6(b.x_max), round6(b.y_max)}},
                     {"score", round6(b.score)}});
    }
    return arr;
  };
  write_json(json{{"image1", dump(boxes1)}, {"image2", dump(boxes2)}}, path);
}

std::pair<std::vector<ScoredBox>, std::vector<ScoredBox>> load_predictions(
    const std::filesystem::path& path) {
  const json doc = load_json(path);
  auto parse = [](const json& arr) {
    std::vector<ScoredBox> boxes;
    for (const auto& item : arr) {
      const auto& b = item.at("bbox");
      boxes.push_back({b[0].get<double>(), b[1].get<double>(), b[2].get<double>(),
                       b[3].get<double>(), item.at("score").get<double>()});
    }
    return boxes;
  };
  return {parse(doc.at("image1")), parse(doc.at("image2"))};
}

void save_eval_result(const EvalResult& result, const std::filesystem::path& path) {
  json pr = json::array();
  for (const auto& [p, r] : result.pr_curve) pr.push_back({round6(p), round6(r)});
  json doc{{"ap", round6(result.ap)},
           {"per_iou", result.per_iou},
           {"pr_curve", pr},
           {"counts", {{"tp", result.counts.tp}, {"fp", result.counts.fp}, {"fn", result.counts.fn}}}};
  if (!result.per_view.empty()) doc["per_view"] = result.per_view;
  write_json(doc, path);
}

// --- sample directories -----------------------------------------------------

std::string generator_config_hash(const GeneratorConfig& cfg) {
  std::ostringstream os;
  os << cfg.image_height << '|' << cfg.image_width << '|' << cfg.object_count_min << '|'
     << cfg.object_count_max << '|' << cfg.removal_count_min << '|' << cfg.removal_count_max << '|'
     << cfg.camera_radius_min << '|' << cfg.camera_radius_max << '|' << cfg.camera_height_min << '|'
     << cfg.camera_height_max << '|' << cfg.camera_azimuth_sep_min << '|'
     << cfg.camera_azimuth_sep_max << '|' << cfg.lookat_jitter << '|' << cfg.focal_px << '|'
     << cfg.texture_contrast << '|' << cfg.placement_radius << '|' << cfg.min_separation << '|'
     << cfg.allow_boxes << '|' << cfg.allow_spheres << '|' << cfg.box_size_min << '|'
     << cfg.box_size_max << '|' << cfg.sphere_radius_min << '|' << cfg.sphere_radius_max << '|'
     << cfg.object_albedo_min << '|' << cfg.object_albedo_max << '|' << cfg.plane_tone_a << '|'
     << cfg.plane_tone_b << '|' << cfg.min_visibility << '|' << cfg.min_box_px << '|' << cfg.planar
     << '|' << cfg.correspondence_target;
  const std::string s = os.str();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<std::uint8_t>(c);
    h *= 0x100000001b3ULL;
  }
  std::ostringstream hex;
  hex << std::hex << h;
  return hex.str();
}

std::filesystem::path save_sample(const ChangePairSample& sample, const GeneratorConfig& cfg,
                                  const std::filesystem::path& root) {
  const std::filesystem::path dir = root / ("sample_" + std::to_string(sample.seed));
  std::filesystem::create_directories(dir);
  save_image_rgb(sample.rgb1, dir / "view1.png");
  save_image_rgb(sample.rgb2, dir / "view2.png");
  save_depth_pfm(sample.depth1, dir / "depth1.pfm");
  save_depth_pfm(sample.depth2, dir / "depth2.pfm");
  save_camera_pair({sample.cam1, sample.cam2, sample.width, sample.height}, dir / "cameras.json");
  save_correspondences(sample.gt_correspondences, dir / "correspondences.json");
  save_gt_boxes({sample.gt_boxes_1, sample.gt_boxes_2}, dir / "gt_boxes.json");
  write_json(json{{"seed", sample.seed}, {"config_hash", generator_config_hash(cfg)}},
             dir / "meta.json");
  return dir;
}

PairInputs load_pair_dir(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) {
    throw IoError("pair directory does not exist: " + dir.string());
  }
  PairInputs out;
  out.name = dir.filename().string();
  out.rgb1 = load_image_rgb(dir / "view1.png");
  out.rgb2 = load_image_rgb(dir / "view2.png");
  out.width = out.rgb1.width;
  out.height = out.rgb1.height;
  if (std::filesystem::exists(dir / "depth1.pfm")) out.depth1 = load_depth_pfm(dir / "depth1.pfm");
  if (std::filesystem::exists(dir / "depth2.pfm")) out.depth2 = load_depth_pfm(dir / "depth2.pfm");
  if (std::filesystem::exists(dir / "cameras.json")) {
    out.cameras = load_camera_pair(dir / "cameras.json");
  }
  if (std::filesystem::exists(dir / "correspondences.json")) {
    out.correspondences = load_correspondences(dir / "correspondences.json");
  }
  return out;
}

}  // namespace regdiff
