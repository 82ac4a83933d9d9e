#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "wcf/fusion.hpp"

namespace wcf {

/// Unscored reference circles for one image.
struct GroundTruth {
  std::string image_id;
  std::vector<Circle> circles;
};

/// One detection's outcome after greedy matching at a fixed cIoU threshold.
struct MatchResult {
  Detection detection;
  std::optional<std::size_t> matched_gt;  // index into GroundTruth::circles
};

/// Greedy one-image matching: detections are visited in descending score
/// order (stable for ties) and each claims the still-unmatched ground-truth
/// circle with the highest cIoU at or above the threshold, or none. Results
/// come back in the visiting order.
std::vector<MatchResult> match_detections(const std::vector<Detection>& dets,
                                          const GroundTruth& gt,
                                          double ciou_threshold);

/// 101-point interpolated average precision at one cIoU threshold, with
/// detections pooled across images and matched greedily per image. Detections
/// whose image has no ground truth count as false positives; ground truth
/// with no detections counts against recall.
double average_precision(const std::vector<Detection>& dets,
                         const std::vector<GroundTruth>& gts,
                         double ciou_threshold);

struct EvalReport {
  double map_50_95 = 0.0;
  double map_50 = 0.0;
  double map_75 = 0.0;
  double ar_50_95 = 0.0;
  std::vector<std::pair<double, double>> per_threshold_ap;  // (threshold, AP)
  // Match counts at cIoU 0.5 over all detections.
  std::int64_t tp = 0;
  std::int64_t fp = 0;
  std::int64_t fn = 0;
};

/// Full report: AP at each cIoU threshold in {0.50, 0.55, ..., 0.95},
/// map_50_95 as their mean, and average recall over the same thresholds with
/// at most 100 highest-score detections per image.
EvalReport evaluate(const std::vector<Detection>& dets,
                    const std::vector<GroundTruth>& gts);

}  // namespace wcf
