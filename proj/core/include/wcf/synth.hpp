#pragma once

#include <cstdint>
#include <vector>

#include "wcf/evaluation.hpp"
#include "wcf/fusion.hpp"

namespace wcf {

struct Range {
  double lo = 0.0;
  double hi = 0.0;
};

/// Knobs for the seeded synthetic ensemble generator. Ground-truth circles
/// are placed without mutual overlap; each model detects each circle with
/// detect_prob, jittered in position (gaussian, pos_jitter_sigma pixels) and
/// radius (multiplicative, radius_jitter_frac). False positives are drawn per
/// image at fp_per_image_rate, each landing in exactly one model's output and
/// kept near-disjoint (cIoU < 0.1) from all ground truth and from each other.
struct SynthConfig {
  int n_images = 20;
  int gt_per_image = 10;
  int n_models = 5;
  double pos_jitter_sigma = 2.0;
  double radius_jitter_frac = 0.05;
  double detect_prob = 0.9;
  double fp_per_image_rate = 2.0;
  Range fp_score_range{0.3, 0.8};
  Range tp_score_range{0.55, 0.99};
  Range gt_radius_range{12.0, 32.0};
  std::uint64_t seed = 1;
  Frame frame{512.0, 512.0};
};

struct SynthResult {
  std::vector<GroundTruth> ground_truth;                  // one entry per image
  std::vector<std::vector<Detection>> model_detections;   // [model][image-major]
};

/// Fully determined by cfg (including the seed). Throws std::invalid_argument
/// on out-of-range config values and std::runtime_error when circle placement
/// keeps colliding (the message suggests lowering the density).
SynthResult generate(const SynthConfig& cfg);

/// Name of the generator behind generate() and mc_ciou_oracle, recorded in
/// metadata sidecars.
const char* synth_rng_name();

/// Monte-Carlo cIoU estimate: uniform samples over the joint bounding box of
/// the two discs, cIoU as hits-in-both over hits-in-either. Deliberately
/// avoids the closed-form intersection so it can serve as an independent
/// check of the geometry path.
struct McEstimate {
  double ciou = 0.0;
  double ciou_stderr = 0.0;
  double intersection_area = 0.0;
  double intersection_stderr = 0.0;
  std::int64_t samples = 0;
};

/// Requires samples >= 100000.
McEstimate mc_ciou_oracle(const Circle& a, const Circle& b, std::int64_t samples,
                          std::uint64_t seed);

}  // namespace wcf
