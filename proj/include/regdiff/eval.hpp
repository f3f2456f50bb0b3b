#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "regdiff/detect.hpp"

namespace regdiff {

struct Box {
  double x_min = 0, y_min = 0, x_max = 0, y_max = 0;
};

/// Intersection over union of two boxes; 0 when disjoint. Throws
/// InputDomainError on zero-area boxes.
double iou(const Box& a, const Box& b);

struct EvalCounts {
  int tp = 0;
  int fp = 0;
  int fn = 0;
};

struct EvalResult {
  double ap = 0.0;
  std::map<std::string, double> per_iou;                // thresholds 0.5 and 0.75
  std::vector<std::pair<double, double>> pr_curve;      // (precision, recall) per rank
  EvalCounts counts;
  std::map<std::string, double> per_view;               // filled by the dataset harness
};

/// Predictions / ground truth for one evaluation image. The two views of a
/// pair count as separate images pooled into one ranking.
struct ImagePredictions {
  std::string image_id;
  std::vector<ScoredBox> boxes;
};

struct ImageGroundTruth {
  std::string image_id;
  std::vector<Box> boxes;
};

/// All-point-interpolation AP with greedy per-image matching in descending
/// score order (each GT matched at most once). Inputs must be aligned by
/// image_id. per_iou carries thresholds {0.5, 0.75}.
EvalResult average_precision(const std::vector<ImagePredictions>& predictions,
                             const std::vector<ImageGroundTruth>& ground_truth,
                             double iou_threshold = 0.5);

}  // namespace regdiff
