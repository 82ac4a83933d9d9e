#include "wcf/evaluation.hpp"

#include <algorithm>
#include <map>
#include <numeric>

namespace wcf {

namespace {

constexpr int kRecallSamples = 101;  // recall grid 0.00, 0.01, ..., 1.00
constexpr std::size_t kMaxDetsPerImage = 100;

std::vector<std::size_t> stable_score_order(const std::vector<Detection>& dets) {
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&dets](std::size_t a, std::size_t b) {
                     return dets[a].score > dets[b].score;
                   });
  return order;
}

// Per-image work unit: detections in input order plus the image's ground
// truth (empty for images that only appear on the detection side). Image
// order follows the ground-truth list, then first appearance in dets.
struct ImageCase {
  std::vector<Detection> dets;
  const GroundTruth* gt = nullptr;
};

std::vector<ImageCase> group_by_image(const std::vector<Detection>& dets,
                                      const std::vector<GroundTruth>& gts) {
  std::vector<ImageCase> cases;
  std::map<std::string, std::size_t> index;
  for (const auto& gt : gts) {
    index.emplace(gt.image_id, cases.size());
    cases.push_back(ImageCase{{}, &gt});
  }
  for (const auto& d : dets) {
    auto [it, inserted] = index.emplace(d.image_id, cases.size());
    if (inserted) {
      cases.push_back(ImageCase{{}, nullptr});
    }
    cases[it->second].dets.push_back(d);
  }
  return cases;
}

std::size_t total_gt(const std::vector<GroundTruth>& gts) {
  std::size_t n = 0;
  for (const auto& gt : gts) {
    n += gt.circles.size();
  }
  return n;
}

// Pooled (score, is_tp) pairs sorted by descending score, stable across the
// per-image pooling order.
std::vector<std::pair<double, bool>> pooled_matches(
    const std::vector<ImageCase>& cases, double threshold, bool cap_dets) {
  std::vector<std::pair<double, bool>> pooled;
  static const GroundTruth kNoGt{};
  for (const auto& c : cases) {
    std::vector<Detection> dets = c.dets;
    if (cap_dets && dets.size() > kMaxDetsPerImage) {
      const auto order = stable_score_order(dets);
      std::vector<Detection> top;
      top.reserve(kMaxDetsPerImage);
      for (std::size_t k = 0; k < kMaxDetsPerImage; ++k) {
        top.push_back(dets[order[k]]);
      }
      dets = std::move(top);
    }
    const GroundTruth& gt = c.gt != nullptr ? *c.gt : kNoGt;
    for (const auto& m : match_detections(dets, gt, threshold)) {
      pooled.emplace_back(m.detection.score, m.matched_gt.has_value());
    }
  }
  std::stable_sort(pooled.begin(), pooled.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  return pooled;
}

double interpolated_ap(const std::vector<std::pair<double, bool>>& pooled,
                       std::size_t n_gt) {
  if (n_gt == 0 || pooled.empty()) {
    return 0.0;
  }
  std::vector<double> recall(pooled.size());
  std::vector<double> precision(pooled.size());
  std::size_t tp = 0;
  for (std::size_t i = 0; i < pooled.size(); ++i) {
    if (pooled[i].second) {
      ++tp;
    }
    recall[i] = static_cast<double>(tp) / static_cast<double>(n_gt);
    precision[i] = static_cast<double>(tp) / static_cast<double>(i + 1);
  }
  // Precision envelope: make precision non-increasing in recall.
  for (std::size_t i = precision.size() - 1; i-- > 0;) {
    precision[i] = std::max(precision[i], precision[i + 1]);
  }
  double sum = 0.0;
  for (int s = 0; s < kRecallSamples; ++s) {
    const double r = static_cast<double>(s) / 100.0;
    const auto it = std::lower_bound(recall.begin(), recall.end(), r);
    if (it != recall.end()) {
      sum += precision[static_cast<std::size_t>(it - recall.begin())];
    }
  }
  return sum / kRecallSamples;
}

std::size_t matched_count(const std::vector<ImageCase>& cases, double threshold,
                          bool cap_dets) {
  std::size_t tp = 0;
  for (const auto& p : pooled_matches(cases, threshold, cap_dets)) {
    if (p.second) {
      ++tp;
    }
  }
  return tp;
}

}  // namespace

std::vector<MatchResult> match_detections(const std::vector<Detection>& dets,
                                          const GroundTruth& gt,
                                          double ciou_threshold) {
  std::vector<MatchResult> results;
  results.reserve(dets.size());
  std::vector<char> taken(gt.circles.size(), 0);
  for (std::size_t i : stable_score_order(dets)) {
    const Detection& d = dets[i];
    double best_overlap = -1.0;
    std::ptrdiff_t best = -1;
    for (std::size_t g = 0; g < gt.circles.size(); ++g) {
      if (taken[g]) {
        continue;
      }
      const double o = ciou(d.circle, gt.circles[g]);
      if (o > best_overlap) {
        best_overlap = o;
        best = static_cast<std::ptrdiff_t>(g);
      }
    }
    if (best >= 0 && best_overlap >= ciou_threshold) {
      taken[best] = 1;
      results.push_back({d, static_cast<std::size_t>(best)});
    } else {
      results.push_back({d, std::nullopt});
    }
  }
  return results;
}

double average_precision(const std::vector<Detection>& dets,
                         const std::vector<GroundTruth>& gts,
                         double ciou_threshold) {
  const auto cases = group_by_image(dets, gts);
  return interpolated_ap(pooled_matches(cases, ciou_threshold, false),
                         total_gt(gts));
}

EvalReport evaluate(const std::vector<Detection>& dets,
                    const std::vector<GroundTruth>& gts) {
  const auto cases = group_by_image(dets, gts);
  const std::size_t n_gt = total_gt(gts);

  EvalReport report;
  double ap_sum = 0.0;
  double recall_sum = 0.0;
  for (int i = 0; i < 10; ++i) {
    const double t = static_cast<double>(50 + 5 * i) / 100.0;
    const double ap = interpolated_ap(pooled_matches(cases, t, false), n_gt);
    report.per_threshold_ap.emplace_back(t, ap);
    ap_sum += ap;
    const std::size_t tp = matched_count(cases, t, true);
    recall_sum += n_gt == 0 ? 0.0
                            : static_cast<double>(tp) / static_cast<double>(n_gt);
  }
  report.map_50_95 = ap_sum / 10.0;
  report.map_50 = report.per_threshold_ap[0].second;
  report.map_75 = report.per_threshold_ap[5].second;
  report.ar_50_95 = recall_sum / 10.0;

  const std::size_t tp50 = matched_count(cases, 0.5, false);
  report.tp = static_cast<std::int64_t>(tp50);
  report.fp = static_cast<std::int64_t>(dets.size() - tp50);
  report.fn = static_cast<std::int64_t>(n_gt - tp50);
  return report;
}

}  // namespace wcf
