#include "regdiff/eval.hpp"

#include <algorithm>
#include <cmath>

namespace regdiff {

double iou(const Box& a, const Box& b) {
  const double area_a = (a.x_max - a.x_min) * (a.y_max - a.y_min);
  const double area_b = (b.x_max - b.x_min) * (b.y_max - b.y_min);
  if (!(area_a > 0.0) || !(area_b > 0.0)) {
    throw InputDomainError("iou: zero-area box");
  }
  const double ix = std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min);
  const double iy = std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min);
  if (ix <= 0.0 || iy <= 0.0) return 0.0;
  const double inter = ix * iy;
  return inter / (area_a + area_b - inter);
}

namespace {

struct RankedPrediction {
  double score;
  std::size_t image;
  Box box;
};

// the sort key must not depend on input order, so AP is invariant to
// shuffling the prediction lists
bool ranking_less(const RankedPrediction& a, const RankedPrediction& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.image != b.image) return a.image < b.image;
  if (a.box.x_min != b.box.x_min) return a.box.x_min < b.box.x_min;
  if (a.box.y_min != b.box.y_min) return a.box.y_min < b.box.y_min;
  if (a.box.x_max != b.box.x_max) return a.box.x_max < b.box.x_max;
  return a.box.y_max < b.box.y_max;
}

struct SweepResult {
  std::vector<std::pair<double, double>> pr_curve;
  double ap = 0.0;
  EvalCounts counts;
};

SweepResult sweep(const std::vector<RankedPrediction>& ranked,
                  const std::vector<std::vector<Box>>& gts, double iou_threshold) {
  std::size_t total_gt = 0;
  for (const auto& g : gts) total_gt += g.size();

  std::vector<std::vector<bool>> matched(gts.size());
  for (std::size_t i = 0; i < gts.size(); ++i) matched[i].assign(gts[i].size(), false);

  SweepResult out;
  std::vector<bool> is_tp(ranked.size(), false);
  int tp = 0, fp = 0;
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    const auto& pred = ranked[i];
    const auto& g = gts[pred.image];
    double best = 0.0;
    int best_j = -1;
    for (std::size_t j = 0; j < g.size(); ++j) {
      if (matched[pred.image][j]) continue;
      const double v = iou(pred.box, g[j]);
      if (v > best) {
        best = v;
        best_j = static_cast<int>(j);
      }
    }
    if (best_j >= 0 && best >= iou_threshold) {
      matched[pred.image][static_cast<std::size_t>(best_j)] = true;
      is_tp[i] = true;
      ++tp;
    } else {
      ++fp;
    }
    const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    const double recall = total_gt == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(total_gt);
    out.pr_curve.emplace_back(precision, recall);
  }
  out.counts = {tp, fp, static_cast<int>(total_gt) - tp};

  if (total_gt == 0) {
    out.ap = ranked.empty() ? 1.0 : 0.0;  // no GT: perfect iff nothing predicted
    return out;
  }

  // all-point interpolation: integrate the precision envelope over recall
  double envelope = 0.0;
  double ap = 0.0;
  int tps_seen = 0;
  for (std::size_t i = ranked.size(); i-- > 0;) {
    envelope = std::max(envelope, out.pr_curve[i].first);
    if (is_tp[i]) {
      ap += envelope / static_cast<double>(total_gt);
      ++tps_seen;
    }
  }
  (void)tps_seen;
  out.ap = ap;
  return out;
}

}  // namespace

EvalResult average_precision(const std::vector<ImagePredictions>& predictions,
                             const std::vector<ImageGroundTruth>& ground_truth,
                             double iou_threshold) {
  if (predictions.size() != ground_truth.size()) {
    throw InputDomainError("average_precision: prediction/ground-truth image counts differ");
  }
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    if (predictions[i].image_id != ground_truth[i].image_id) {
      throw InputDomainError("average_precision: image sets are misaligned at '" +
                             predictions[i].image_id + "'");
    }
  }
  if (!(iou_threshold > 0.0) || iou_threshold > 1.0) {
    throw InputDomainError("average_precision: iou_threshold must be in (0, 1]");
  }

  std::vector<RankedPrediction> ranked;
  std::vector<std::vector<Box>> gts(ground_truth.size());
  for (std::size_t i = 0; i < ground_truth.size(); ++i) gts[i] = ground_truth[i].boxes;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    for (const auto& b : predictions[i].boxes) {
      ranked.push_back({b.score, i, Box{b.x_min, b.y_min, b.x_max, b.y_max}});
    }
  }
  std::sort(ranked.begin(), ranked.end(), ranking_less);

  EvalResult result;
  const SweepResult main = sweep(ranked, gts, iou_threshold);
  result.ap = main.ap;
  result.pr_curve = main.pr_curve;
  result.counts = main.counts;
  result.per_iou["0.50"] = iou_threshold == 0.5 ? main.ap : sweep(ranked, gts, 0.5).ap;
  result.per_iou["0.75"] = iou_threshold == 0.75 ? main.ap : sweep(ranked, gts, 0.75).ap;
  return result;
}

}  // namespace regdiff
