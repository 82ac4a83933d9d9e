#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "wcf/evaluation.hpp"
#include "wcf/fusion.hpp"

namespace wcf {

/// Load or parse failure; what() carries the file, the 1-based line number,
/// and the offending field where one is known.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// One image's detections in file line order. Each Detection carries its own
/// model_id, so per-model views are slices of this list.
struct ImageDetections {
  std::string image_id;
  std::vector<Detection> detections;
};

/// Detections grouped per image (first-appearance order), preserving line
/// order within each image and model.
struct DetectionSet {
  std::vector<ImageDetections> images;

  std::size_t total() const;
  std::vector<Detection> flattened() const;
  /// nullptr when the image is absent.
  const std::vector<Detection>* detections_for(std::string_view image_id) const;
  /// Distinct model ids of one image, in first-appearance order.
  std::vector<std::string> model_ids(std::string_view image_id) const;
  /// One (image, model) group, in line order.
  std::vector<Detection> detections_for(std::string_view image_id,
                                        std::string_view model_id) const;
};

/// One line of a fused-results file.
struct FusedRecord {
  std::string image_id;
  double cx = 0.0;
  double cy = 0.0;
  double r = 0.0;
  double mean_score = 0.0;
  int count = 0;
  std::vector<std::string> source_models;
};

FusedRecord to_fused_record(const std::string& image_id, const FusedCircle& f);

/// Detection files are UTF-8 JSON Lines, one object per line with keys
/// image_id, model_id, cx, cy, r, score. Parsing enforces finite numbers,
/// r > 0 and score in (0, 1]; duplicate records are kept.
DetectionSet load_detections(const std::filesystem::path& path);

/// Ground-truth files carry keys image_id, cx, cy, r; circles are grouped by
/// image in first-appearance order.
std::vector<GroundTruth> load_ground_truth(const std::filesystem::path& path);

/// Accepts detection-schema lines as-is and fused-schema lines (mean_score
/// becomes the score, model_id becomes "fusion"), so fused outputs can be
/// evaluated directly.
DetectionSet load_scored_circles(const std::filesystem::path& path);

std::vector<FusedRecord> load_fused(const std::filesystem::path& path);

void write_detections(const std::filesystem::path& path,
                      const std::vector<Detection>& dets);
void write_ground_truth(const std::filesystem::path& path,
                        const std::vector<GroundTruth>& gts);
void write_fused(const std::filesystem::path& path,
                 const std::vector<FusedRecord>& records);

/// Single JSON document with keys map_50_95, map_50, map_75, ar_50_95,
/// per_threshold_ap, tp, fp, fn.
void write_report(const std::filesystem::path& path, const EvalReport& report);
EvalReport load_report(const std::filesystem::path& path);

}  // namespace wcf
