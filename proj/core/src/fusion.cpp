#include "wcf/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace wcf {

namespace {

void validate_config(const WcfConfig& cfg) {
  if (!(cfg.ciou_threshold > 0.0) || !(cfg.ciou_threshold < 1.0)) {
    throw std::invalid_argument("WcfConfig: ciou_threshold must be in (0, 1)");
  }
  if (cfg.t_count < 1) {
    throw std::invalid_argument("WcfConfig: t_count must be >= 1");
  }
  if (!(cfg.t_score >= 0.0) || !(cfg.t_score <= 1.0)) {
    throw std::invalid_argument("WcfConfig: t_score must be in [0, 1]");
  }
}

void require_single_image(const ModelSets& model_sets) {
  const std::string* image_id = nullptr;
  for (const auto& set : model_sets) {
    for (const auto& d : set) {
      if (image_id == nullptr) {
        image_id = &d.image_id;
      } else if (d.image_id != *image_id) {
        throw std::domain_error("merge: detections span multiple image ids ('" +
                                *image_id + "' vs '" + d.image_id + "')");
      }
    }
  }
}

// Processing order for suppression and fusion passes: descending score, ties
// by descending radius, then input order.
std::vector<std::size_t> score_order(const std::vector<Detection>& dets) {
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&dets](std::size_t a, std::size_t b) {
                     if (dets[a].score != dets[b].score) {
                       return dets[a].score > dets[b].score;
                     }
                     return dets[a].circle.r > dets[b].circle.r;
                   });
  return order;
}

}  // namespace

FusedCircle make_singleton(const Detection& d) {
  if (!(d.score > 0.0)) {
    throw std::domain_error("make_singleton: detection score must be positive");
  }
  FusedCircle f;
  f.circle = d.circle;
  f.mean_score = d.score;
  f.count = 1;
  f.constituents = {d};
  f.weight_sum = d.score;
  f.wx_sum = d.circle.cx * d.score;
  f.wy_sum = d.circle.cy * d.score;
  f.wr_sum = d.circle.r * d.score;
  return f;
}

FusedCircle fuse_pair(FusedCircle f, const Detection& d) {
  if (!(d.score > 0.0)) {
    throw std::domain_error("fuse_pair: detection score must be positive");
  }
  f.constituents.push_back(d);
  f.count += 1;
  f.weight_sum += d.score;
  f.wx_sum += d.circle.cx * d.score;
  f.wy_sum += d.circle.cy * d.score;
  f.wr_sum += d.circle.r * d.score;
  f.circle = Circle(f.wx_sum / f.weight_sum, f.wy_sum / f.weight_sum,
                    f.wr_sum / f.weight_sum);
  double score_total = 0.0;
  for (const auto& c : f.constituents) {
    score_total += c.score;
  }
  f.mean_score = score_total / static_cast<double>(f.count);
  return f;
}

std::vector<FusedCircle> merge(const ModelSets& model_sets, const WcfConfig& cfg) {
  validate_config(cfg);
  require_single_image(model_sets);

  std::vector<FusedCircle> fused;
  if (model_sets.empty()) {
    return fused;
  }

  for (const auto& d : model_sets.front()) {
    fused.push_back(make_singleton(d));
  }

  for (std::size_t pass = 1; pass < model_sets.size(); ++pass) {
    const auto& incoming = model_sets[pass];
    // Entries appended during this pass already hold a detection from the
    // incoming model and may not absorb another one; only pre-pass entries
    // are candidates, each at most once per pass.
    const std::size_t candidates = fused.size();
    std::vector<char> matched(candidates, 0);
    for (std::size_t idx : score_order(incoming)) {
      const Detection& d = incoming[idx];
      double best_overlap = cfg.ciou_threshold;
      std::ptrdiff_t best = -1;
      for (std::size_t j = 0; j < candidates; ++j) {
        if (matched[j]) {
          continue;
        }
        const double o = ciou(fused[j].circle, d.circle);
        if (o > best_overlap) {  // strict: ties keep the earliest entry
          best_overlap = o;
          best = static_cast<std::ptrdiff_t>(j);
        }
      }
      if (best >= 0) {
        fused[best] = fuse_pair(std::move(fused[best]), d);
        matched[best] = 1;
      } else {
        fused.push_back(make_singleton(d));
      }
    }
  }
  return fused;
}

std::vector<FusedCircle> fuse(const ModelSets& model_sets, const WcfConfig& cfg) {
  std::vector<FusedCircle> all = merge(model_sets, cfg);
  std::vector<FusedCircle> kept;
  kept.reserve(all.size());
  for (auto& f : all) {
    const bool by_score = f.mean_score >= cfg.t_score;
    const bool by_count = f.count >= cfg.t_count;
    const bool keep = cfg.rule == ThresholdRule::kOr ? (by_score || by_count)
                                                     : (by_score && by_count);
    if (keep) {
      kept.push_back(std::move(f));
    }
  }
  return kept;
}

std::vector<Detection> nms(const std::vector<Detection>& dets,
                           double ciou_threshold) {
  std::vector<char> alive(dets.size(), 1);
  std::vector<Detection> kept;
  const auto order = score_order(dets);
  for (std::size_t i : order) {
    if (!alive[i]) {
      continue;
    }
    kept.push_back(dets[i]);
    alive[i] = 0;
    for (std::size_t j : order) {
      if (alive[j] && ciou(dets[i].circle, dets[j].circle) > ciou_threshold) {
        alive[j] = 0;
      }
    }
  }
  return kept;
}

std::vector<Detection> soft_nms(const std::vector<Detection>& dets,
                                double ciou_threshold, SoftNmsMode mode,
                                double sigma, double final_score_cut) {
  if (!(sigma > 0.0)) {
    throw std::invalid_argument("soft_nms: sigma must be positive");
  }
  std::vector<Detection> pool = dets;
  std::vector<char> alive(pool.size(), 1);
  std::vector<Detection> emitted;
  emitted.reserve(pool.size());

  for (std::size_t n = 0; n < pool.size(); ++n) {
    // Highest current score among survivors; ties by radius, then input order.
    std::ptrdiff_t best = -1;
    for (std::size_t i = 0; i < pool.size(); ++i) {
      if (!alive[i]) {
        continue;
      }
      if (best < 0 || pool[i].score > pool[best].score ||
          (pool[i].score == pool[best].score &&
           pool[i].circle.r > pool[best].circle.r)) {
        best = static_cast<std::ptrdiff_t>(i);
      }
    }
    if (best < 0) {
      break;
    }
    alive[best] = 0;
    emitted.push_back(pool[best]);
    for (std::size_t j = 0; j < pool.size(); ++j) {
      if (!alive[j]) {
        continue;
      }
      const double o = ciou(pool[best].circle, pool[j].circle);
      if (o > ciou_threshold) {
        pool[j].score *= mode == SoftNmsMode::kLinear
                             ? (1.0 - o)
                             : std::exp(-(o * o) / sigma);
      }
    }
  }

  std::vector<Detection> kept;
  kept.reserve(emitted.size());
  for (auto& d : emitted) {
    if (d.score >= final_score_cut) {
      kept.push_back(std::move(d));
    }
  }
  return kept;
}

RotationCheck check_rotation_consistency(const ModelSets& model_sets,
                                         const Frame& frame,
                                         const WcfConfig& cfg) {
  ModelSets rotated(model_sets.size());
  Frame rotated_frame = Frame(frame.height, frame.width);
  for (std::size_t s = 0; s < model_sets.size(); ++s) {
    rotated[s] = model_sets[s];
    for (auto& d : rotated[s]) {
      d.circle = rotate90_cw(d.circle, frame).first;
    }
  }

  const std::vector<FusedCircle> base = fuse(model_sets, cfg);
  std::vector<FusedCircle> turned = fuse(rotated, cfg);

  RotationCheck check;
  check.entries = base.size();
  if (base.size() != turned.size()) {
    return check;
  }
  check.structure_matches = true;
  for (std::size_t i = 0; i < base.size(); ++i) {
    if (base[i].count != turned[i].count) {
      check.structure_matches = false;
      return check;
    }
    const Circle back = rotate90_ccw(turned[i].circle, rotated_frame).first;
    check.max_center_px =
        std::max(check.max_center_px,
                 std::hypot(back.cx - base[i].circle.cx, back.cy - base[i].circle.cy));
    check.max_radius_px =
        std::max(check.max_radius_px, std::abs(back.r - base[i].circle.r));
    check.max_score =
        std::max(check.max_score, std::abs(turned[i].mean_score - base[i].mean_score));
  }
  return check;
}

}  // namespace wcf
