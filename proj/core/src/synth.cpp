#include "wcf/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>
#include <stdexcept>
#include <string>

#include "wcf/geometry.hpp"

namespace wcf {

namespace {

constexpr int kMaxPlacementAttempts = 1000;
constexpr double kSeparationCiou = 0.1;  // "near-disjoint" bound for placement

std::string image_name(int index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "img_%04d", index);
  return buf;
}

std::string model_name(int index) {
  return "model_" + std::to_string(index + 1);
}

void check_range(const Range& r, double lo_min, double hi_max, const char* what) {
  if (!(r.lo >= lo_min) || !(r.hi <= hi_max) || !(r.lo <= r.hi)) {
    throw std::invalid_argument(std::string(what) + " must satisfy " +
                                std::to_string(lo_min) + " <= lo <= hi <= " +
                                std::to_string(hi_max));
  }
}

void validate(const SynthConfig& cfg) {
  if (cfg.n_images < 0) throw std::invalid_argument("n_images must be >= 0");
  if (cfg.gt_per_image < 0) throw std::invalid_argument("gt_per_image must be >= 0");
  if (cfg.n_models < 1) throw std::invalid_argument("n_models must be >= 1");
  if (!(cfg.pos_jitter_sigma >= 0.0)) {
    throw std::invalid_argument("pos_jitter_sigma must be >= 0");
  }
  if (!(cfg.radius_jitter_frac >= 0.0) || !(cfg.radius_jitter_frac < 1.0)) {
    throw std::invalid_argument("radius_jitter_frac must be in [0, 1)");
  }
  if (!(cfg.detect_prob >= 0.0) || !(cfg.detect_prob <= 1.0)) {
    throw std::invalid_argument("detect_prob must be in [0, 1]");
  }
  if (!(cfg.fp_per_image_rate >= 0.0)) {
    throw std::invalid_argument("fp_per_image_rate must be >= 0");
  }
  check_range(cfg.fp_score_range, 1e-12, 1.0, "fp_score_range");
  check_range(cfg.tp_score_range, 1e-12, 1.0, "tp_score_range");
  if (!(cfg.gt_radius_range.lo > 0.0) ||
      !(cfg.gt_radius_range.lo <= cfg.gt_radius_range.hi)) {
    throw std::invalid_argument("gt_radius_range must satisfy 0 < lo <= hi");
  }
  const double min_dim = std::min(cfg.frame.width, cfg.frame.height);
  if (2.0 * cfg.gt_radius_range.hi > min_dim) {
    throw std::invalid_argument(
        "gt_radius_range.hi too large: a circle of that radius cannot fit "
        "inside the frame");
  }
}

// Draws one circle whose center keeps the full disc inside the frame and
// whose cIoU against every circle in `existing` stays below kSeparationCiou.
Circle place_separated(std::mt19937_64& rng, const SynthConfig& cfg,
                       const std::vector<Circle>& existing, const char* what) {
  std::uniform_real_distribution<double> radius_dist(cfg.gt_radius_range.lo,
                                                     cfg.gt_radius_range.hi);
  for (int attempt = 0; attempt < kMaxPlacementAttempts; ++attempt) {
    const double r = radius_dist(rng);
    std::uniform_real_distribution<double> x_dist(r, cfg.frame.width - r);
    std::uniform_real_distribution<double> y_dist(r, cfg.frame.height - r);
    Circle candidate(x_dist(rng), y_dist(rng), r);
    const bool clear = std::none_of(
        existing.begin(), existing.end(), [&](const Circle& c) {
          return ciou(candidate, c) >= kSeparationCiou;
        });
    if (clear) return candidate;
  }
  throw std::runtime_error(
      std::string("could not place a ") + what + " circle after " +
      std::to_string(kMaxPlacementAttempts) +
      " attempts; lower gt_per_image / fp_per_image_rate or the radius range "
      "(scene density too high)");
}

}  // namespace

const char* synth_rng_name() { return "std::mt19937_64"; }

SynthResult generate(const SynthConfig& cfg) {
  validate(cfg);

  SynthResult out;
  out.ground_truth.reserve(static_cast<std::size_t>(cfg.n_images));
  out.model_detections.resize(static_cast<std::size_t>(cfg.n_models));

  std::mt19937_64 rng(cfg.seed);
  std::bernoulli_distribution detect(cfg.detect_prob);
  std::uniform_real_distribution<double> tp_score(cfg.tp_score_range.lo,
                                                  cfg.tp_score_range.hi);
  std::uniform_real_distribution<double> fp_score(cfg.fp_score_range.lo,
                                                  cfg.fp_score_range.hi);
  std::uniform_int_distribution<int> fp_model(0, cfg.n_models - 1);

  // One sequential draw stream per run: for each image, ground-truth
  // placement, then per model/per circle the detection coin plus jitters,
  // then the image's false positives. Zero-valued knobs skip their draws so
  // e.g. sigma = 0 and sigma -> 0 runs stay on the same stream otherwise.
  for (int img = 0; img < cfg.n_images; ++img) {
    GroundTruth gt;
    gt.image_id = image_name(img);
    gt.circles.reserve(static_cast<std::size_t>(cfg.gt_per_image));
    for (int g = 0; g < cfg.gt_per_image; ++g) {
      gt.circles.push_back(place_separated(rng, cfg, gt.circles, "ground-truth"));
    }

    for (int m = 0; m < cfg.n_models; ++m) {
      for (const Circle& c : gt.circles) {
        if (!detect(rng)) continue;
        double cx = c.cx;
        double cy = c.cy;
        double r = c.r;
        if (cfg.pos_jitter_sigma > 0.0) {
          std::normal_distribution<double> jitter(0.0, cfg.pos_jitter_sigma);
          cx += jitter(rng);
          cy += jitter(rng);
        }
        if (cfg.radius_jitter_frac > 0.0) {
          std::uniform_real_distribution<double> scale(
              1.0 - cfg.radius_jitter_frac, 1.0 + cfg.radius_jitter_frac);
          r *= scale(rng);
        }
        cx = std::clamp(cx, 0.0, cfg.frame.width);
        cy = std::clamp(cy, 0.0, cfg.frame.height);
        Detection d;
        d.circle = Circle(cx, cy, r);
        d.score = tp_score(rng);
        d.model_id = model_name(m);
        d.image_id = gt.image_id;
        out.model_detections[static_cast<std::size_t>(m)].push_back(std::move(d));
      }
    }

    int fp_count = 0;
    if (cfg.fp_per_image_rate > 0.0) {
      std::poisson_distribution<int> fp_draw(cfg.fp_per_image_rate);
      fp_count = fp_draw(rng);
    }
    std::vector<Circle> blockers = gt.circles;  // FPs also avoid each other
    for (int f = 0; f < fp_count; ++f) {
      const int m = fp_model(rng);
      Circle c = place_separated(rng, cfg, blockers, "false-positive");
      blockers.push_back(c);
      Detection d;
      d.circle = c;
      d.score = fp_score(rng);
      d.model_id = model_name(m);
      d.image_id = gt.image_id;
      out.model_detections[static_cast<std::size_t>(m)].push_back(std::move(d));
    }

    out.ground_truth.push_back(std::move(gt));
  }

  return out;
}

McEstimate mc_ciou_oracle(const Circle& a, const Circle& b, std::int64_t samples,
                          std::uint64_t seed) {
  if (samples < 100000) {
    throw std::invalid_argument("mc_ciou_oracle needs at least 100000 samples");
  }

  McEstimate est;
  est.samples = samples;

  const double d = std::hypot(b.cx - a.cx, b.cy - a.cy);
  if (d == 0.0 && a.r == b.r) {  // identical discs: exact by definition
    est.ciou = 1.0;
    est.intersection_area = circle_area(a);
    return est;
  }
  if (d >= a.r + b.r) {  // disjoint: nothing to sample
    return est;
  }

  const double x_lo = std::min(a.cx - a.r, b.cx - b.r);
  const double x_hi = std::max(a.cx + a.r, b.cx + b.r);
  const double y_lo = std::min(a.cy - a.r, b.cy - b.r);
  const double y_hi = std::max(a.cy + a.r, b.cy + b.r);
  const double box_area = (x_hi - x_lo) * (y_hi - y_lo);

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> x_dist(x_lo, x_hi);
  std::uniform_real_distribution<double> y_dist(y_lo, y_hi);

  std::int64_t n_both = 0;
  std::int64_t n_either = 0;
  const double ra2 = a.r * a.r;
  const double rb2 = b.r * b.r;
  for (std::int64_t i = 0; i < samples; ++i) {
    const double x = x_dist(rng);
    const double y = y_dist(rng);
    const double dax = x - a.cx;
    const double day = y - a.cy;
    const double dbx = x - b.cx;
    const double dby = y - b.cy;
    const bool in_a = dax * dax + day * day <= ra2;
    const bool in_b = dbx * dbx + dby * dby <= rb2;
    n_both += static_cast<std::int64_t>(in_a && in_b);
    n_either += static_cast<std::int64_t>(in_a || in_b);
  }

  const double n = static_cast<double>(samples);
  const double p_both = static_cast<double>(n_both) / n;
  const double p_either = static_cast<double>(n_either) / n;

  est.intersection_area = box_area * p_both;
  est.intersection_stderr = box_area * std::sqrt(p_both * (1.0 - p_both) / n);

  if (n_both == 0 || n_either == 0) {
    return est;  // ciou 0 with no spread information
  }

  // Ratio estimator R = n_both / n_either with a delta-method standard
  // error; the covariance term collapses because "both" implies "either":
  // Var(R) ~= R^2 * [ (1-p_both)/(n*p_both) - (1-p_either)/(n*p_either) ].
  est.ciou = static_cast<double>(n_both) / static_cast<double>(n_either);
  const double var_term = (1.0 - p_both) / (n * p_both) -
                          (1.0 - p_either) / (n * p_either);
  est.ciou_stderr = est.ciou * std::sqrt(std::max(var_term, 0.0));
  return est;
}

}  // namespace wcf
