#pragma once

#include <string>
#include <vector>

#include "wcf/geometry.hpp"

namespace wcf {

/// A scored circle proposed by one model on one image. Scores live in (0, 1];
/// the file loaders and fusion entry points enforce the lower bound.
struct Detection {
  Circle circle;
  double score = 0.0;
  std::string model_id;
  std::string image_id;
};

/// Score-weighted aggregate of one or more detections of the same object.
/// Geometry is kept as running score-weighted sums, so the fused circle is
/// always the weighted mean over all constituents regardless of the order in
/// which they were absorbed.
struct FusedCircle {
  Circle circle;
  double mean_score = 0.0;
  int count = 0;
  std::vector<Detection> constituents;  // insertion order
  double weight_sum = 0.0;              // running sum of constituent scores
  double wx_sum = 0.0;                  // running sum of cx * score
  double wy_sum = 0.0;                  // running sum of cy * score
  double wr_sum = 0.0;                  // running sum of r * score
};

/// How the dual score/count thresholds combine when filtering fused circles.
/// kOr keeps a circle that clears either threshold; kAnd requires both.
enum class ThresholdRule { kOr, kAnd };

struct WcfConfig {
  double ciou_threshold = 0.5;
  double t_score = 0.9;
  int t_count = 2;
  ThresholdRule rule = ThresholdRule::kOr;
};

/// One model's detections per entry, in the order the models are fused.
using ModelSets = std::vector<std::vector<Detection>>;

/// Seed a fused entry from a single detection. Throws std::domain_error on a
/// non-positive score.
FusedCircle make_singleton(const Detection& d);

/// Absorb d into f: d joins the constituents, the weighted sums and count are
/// updated, the circle is recomputed from the sums, and mean_score becomes the
/// arithmetic mean of all constituent scores.
FusedCircle fuse_pair(FusedCircle f, const Detection& d);

/// Sequential running-list merge over the model sets (all for one image).
/// The list is seeded with model_sets[0] as singletons; each later set is
/// scanned in descending score order, and every incoming detection either
/// fuses into the best-overlapping eligible entry (cIoU strictly above
/// cfg.ciou_threshold, entry not yet matched during this set's pass) or is
/// appended as a new singleton. Returns all entries, unfiltered, in insertion
/// order. Throws std::domain_error when detections span multiple image ids.
std::vector<FusedCircle> merge(const ModelSets& model_sets, const WcfConfig& cfg);

/// merge() followed by the dual-threshold filter: an entry survives per
/// cfg.rule applied to (mean_score >= t_score, count >= t_count).
std::vector<FusedCircle> fuse(const ModelSets& model_sets, const WcfConfig& cfg);

/// Greedy non-maximum suppression for one image's detections: repeatedly emit
/// the highest-score survivor and discard everything overlapping it with cIoU
/// strictly above the threshold. Ties break by descending radius, then input
/// order.
std::vector<Detection> nms(const std::vector<Detection>& dets,
                           double ciou_threshold = 0.5);

enum class SoftNmsMode { kLinear, kGaussian };

/// Soft suppression for one image: repeatedly emit the highest-score remaining
/// detection and decay the scores of those overlapping it with cIoU o above
/// the threshold (linear: s *= 1 - o; gaussian: s *= exp(-o^2 / sigma)).
/// Emitted detections whose decayed score fell below final_score_cut are
/// dropped from the result.
std::vector<Detection> soft_nms(const std::vector<Detection>& dets,
                                double ciou_threshold = 0.3,
                                SoftNmsMode mode = SoftNmsMode::kLinear,
                                double sigma = 0.5,
                                double final_score_cut = 1e-3);

/// Result of replaying a fusion through a 90-degree rotation: fuse the inputs
/// as-is, fuse the rotated inputs, map the latter back, and compare entries
/// pairwise.
struct RotationCheck {
  bool structure_matches = false;  // same entry count and per-entry count
  double max_center_px = 0.0;
  double max_radius_px = 0.0;
  double max_score = 0.0;
  std::size_t entries = 0;

  bool passed(double tol_px = 1e-6) const {
    return structure_matches && max_center_px <= tol_px &&
           max_radius_px <= tol_px && max_score <= tol_px;
  }
};

/// Fusion equivariance harness for one image: compares fuse(model_sets, cfg)
/// against the inverse-rotated fusion of the rotated inputs. All circle
/// centers must lie inside the frame.
RotationCheck check_rotation_consistency(const ModelSets& model_sets,
                                         const Frame& frame,
                                         const WcfConfig& cfg);

}  // namespace wcf
