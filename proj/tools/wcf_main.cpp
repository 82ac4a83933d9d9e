#include <algorithm>
#include <atomic>
#include <cctype>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "manifest.hpp"
#include "wcf/dataio.hpp"
#include "wcf/evaluation.hpp"
#include "wcf/fusion.hpp"
#include "wcf/geometry.hpp"
#include "wcf/synth.hpp"
#include "wcf/version.hpp"

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace {

constexpr double kRotcheckTolerancePx = 1e-6;

// Every flag can also come from the environment: --ciou-thresh maps to
// WCF_CIOU_THRESH and so on (an explicit flag wins over the variable).
CLI::Option* envify(CLI::Option* opt) {
  std::string name = opt->get_single_name();
  for (char& c : name) {
    c = c == '-' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  }
  opt->envname("WCF_" + name);
  return opt;
}

bool try_parse_frame(const std::string& text, double* width, double* height) {
  const auto pos = text.find_first_of("xX");
  if (pos == std::string::npos || pos == 0 || pos + 1 >= text.size()) {
    return false;
  }
  try {
    std::size_t used = 0;
    const std::string w_part = text.substr(0, pos);
    const double w = std::stod(w_part, &used);
    if (used != w_part.size()) return false;
    const std::string h_part = text.substr(pos + 1);
    const double h = std::stod(h_part, &used);
    if (used != h_part.size()) return false;
    if (!(w > 0.0) || !(h > 0.0)) return false;
    *width = w;
    *height = h;
    return true;
  } catch (const std::exception&) {
    return false;
  }
}

std::string check_frame(const std::string& text) {
  double w = 0.0;
  double h = 0.0;
  if (!try_parse_frame(text, &w, &h)) {
    return "expected WIDTHxHEIGHT with positive dimensions, got '" + text + "'";
  }
  return {};
}

wcf::Frame parse_frame(const std::string& text) {
  double w = 0.0;
  double h = 0.0;
  if (!try_parse_frame(text, &w, &h)) {
    throw std::invalid_argument("bad frame spec '" + text + "'");
  }
  return wcf::Frame(w, h);
}

wcf::ThresholdRule parse_rule(const std::string& rule) {
  return rule == "and" ? wcf::ThresholdRule::kAnd : wcf::ThresholdRule::kOr;
}

// Index-based worker pool: items are claimed through an atomic counter so the
// assignment of items to threads is irrelevant to the (per-item) results.
template <typename Fn>
void run_parallel(std::size_t n, unsigned workers, Fn&& fn) {
  const std::size_t use = std::min<std::size_t>(std::max(1u, workers), n);
  if (use <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(use);
  for (std::size_t t = 0; t < use; ++t) {
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= n) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
          return;
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

std::vector<wcf::DetectionSet> load_all(const std::vector<std::string>& paths) {
  std::vector<wcf::DetectionSet> sets;
  sets.reserve(paths.size());
  for (const auto& p : paths) {
    sets.push_back(wcf::load_detections(p));
  }
  return sets;
}

// Output records are canonicalized by image_id (then per-image emission
// order), so worker count never changes output bytes.
std::vector<std::string> sorted_image_union(const std::vector<wcf::DetectionSet>& sets) {
  std::set<std::string> ids;
  for (const auto& s : sets) {
    for (const auto& img : s.images) ids.insert(img.image_id);
  }
  return {ids.begin(), ids.end()};
}

wcf::ModelSets model_sets_for(const std::vector<wcf::DetectionSet>& sets,
                              const std::string& image_id) {
  wcf::ModelSets ms(sets.size());
  for (std::size_t f = 0; f < sets.size(); ++f) {
    if (const auto* dets = sets[f].detections_for(image_id)) ms[f] = *dets;
  }
  return ms;
}

std::vector<wcf::Detection> pooled_for(const std::vector<wcf::DetectionSet>& sets,
                                       const std::string& image_id) {
  std::vector<wcf::Detection> pooled;
  for (const auto& s : sets) {
    if (const auto* dets = s.detections_for(image_id)) {
      pooled.insert(pooled.end(), dets->begin(), dets->end());
    }
  }
  return pooled;
}

struct FuseOpts {
  std::vector<std::string> inputs;
  std::string out;
  double ciou_thresh = 0.5;
  double t_score = 0.9;
  int t_count = 2;
  std::string rule = "or";
  unsigned workers = 1;
};

void add_fusion_flags(CLI::App* cmd, FuseOpts* o) {
  envify(cmd->add_option("--ciou-thresh", o->ciou_thresh,
                         "Minimum cIoU (exclusive) to merge a detection into an entry")
             ->capture_default_str());
  envify(cmd->add_option("--t-score", o->t_score, "Mean-score survival threshold")
             ->capture_default_str());
  envify(cmd->add_option("--t-count", o->t_count, "Constituent-count survival threshold")
             ->capture_default_str());
  envify(cmd->add_option("--rule", o->rule, "How the two thresholds combine")
             ->check(CLI::IsMember({"or", "and"}))
             ->capture_default_str());
}

int run_fuse(const FuseOpts& o) {
  const auto sets = load_all(o.inputs);
  const auto images = sorted_image_union(sets);
  const wcf::WcfConfig cfg{o.ciou_thresh, o.t_score, o.t_count, parse_rule(o.rule)};

  std::vector<std::vector<wcf::FusedCircle>> per_image(images.size());
  run_parallel(images.size(), o.workers, [&](std::size_t i) {
    per_image[i] = wcf::fuse(model_sets_for(sets, images[i]), cfg);
  });

  std::vector<wcf::FusedRecord> records;
  for (std::size_t i = 0; i < images.size(); ++i) {
    for (const auto& f : per_image[i]) {
      records.push_back(wcf::to_fused_record(images[i], f));
    }
  }
  wcf::write_fused(o.out, records);

  wcf::cli::RunManifest manifest;
  manifest.command = "fuse";
  manifest.config = {{"ciou_thresh", o.ciou_thresh},
                     {"t_score", o.t_score},
                     {"t_count", o.t_count},
                     {"rule", o.rule},
                     {"workers", o.workers}};
  manifest.inputs.assign(o.inputs.begin(), o.inputs.end());
  manifest.model_order = o.inputs;
  manifest.outputs = {o.out};
  manifest.write(o.out + ".manifest.json");
  return 0;
}

struct NmsOpts {
  std::vector<std::string> inputs;
  std::string out;
  double ciou_thresh = 0.5;
  unsigned workers = 1;
};

int run_nms(const NmsOpts& o) {
  const auto sets = load_all(o.inputs);
  const auto images = sorted_image_union(sets);

  std::vector<std::vector<wcf::Detection>> per_image(images.size());
  run_parallel(images.size(), o.workers, [&](std::size_t i) {
    per_image[i] = wcf::nms(pooled_for(sets, images[i]), o.ciou_thresh);
  });

  std::vector<wcf::Detection> kept;
  for (auto& dets : per_image) {
    kept.insert(kept.end(), dets.begin(), dets.end());
  }
  wcf::write_detections(o.out, kept);

  wcf::cli::RunManifest manifest;
  manifest.command = "nms";
  manifest.config = {{"ciou_thresh", o.ciou_thresh}, {"workers", o.workers}};
  manifest.inputs.assign(o.inputs.begin(), o.inputs.end());
  manifest.model_order = o.inputs;
  manifest.outputs = {o.out};
  manifest.write(o.out + ".manifest.json");
  return 0;
}

struct SoftNmsOpts {
  std::vector<std::string> inputs;
  std::string out;
  double ciou_thresh = 0.3;
  std::string mode = "linear";
  double sigma = 0.5;
  double score_cut = 1e-3;
  unsigned workers = 1;
};

int run_softnms(const SoftNmsOpts& o) {
  const auto sets = load_all(o.inputs);
  const auto images = sorted_image_union(sets);
  const wcf::SoftNmsMode mode =
      o.mode == "gaussian" ? wcf::SoftNmsMode::kGaussian : wcf::SoftNmsMode::kLinear;

  std::vector<std::vector<wcf::Detection>> per_image(images.size());
  run_parallel(images.size(), o.workers, [&](std::size_t i) {
    per_image[i] = wcf::soft_nms(pooled_for(sets, images[i]), o.ciou_thresh, mode,
                                 o.sigma, o.score_cut);
  });

  std::vector<wcf::Detection> kept;
  for (auto& dets : per_image) {
    kept.insert(kept.end(), dets.begin(), dets.end());
  }
  wcf::write_detections(o.out, kept);

  wcf::cli::RunManifest manifest;
  manifest.command = "softnms";
  manifest.config = {{"ciou_thresh", o.ciou_thresh},
                     {"mode", o.mode},
                     {"sigma", o.sigma},
                     {"score_cut", o.score_cut},
                     {"workers", o.workers}};
  manifest.inputs.assign(o.inputs.begin(), o.inputs.end());
  manifest.model_order = o.inputs;
  manifest.outputs = {o.out};
  manifest.write(o.out + ".manifest.json");
  return 0;
}

struct EvalOpts {
  std::string detections;
  std::string ground_truth;
  std::string out;
};

int run_eval(const EvalOpts& o) {
  const auto dets = wcf::load_scored_circles(o.detections).flattened();
  const auto gts = wcf::load_ground_truth(o.ground_truth);
  const wcf::EvalReport report = wcf::evaluate(dets, gts);
  wcf::write_report(o.out, report);

  std::printf(
      "map_50_95=%.6f map_50=%.6f map_75=%.6f ar_50_95=%.6f tp=%lld fp=%lld fn=%lld\n",
      report.map_50_95, report.map_50, report.map_75, report.ar_50_95,
      static_cast<long long>(report.tp), static_cast<long long>(report.fp),
      static_cast<long long>(report.fn));

  wcf::cli::RunManifest manifest;
  manifest.command = "eval";
  manifest.config = ordered_json::object();
  manifest.inputs = {o.detections, o.ground_truth};
  manifest.outputs = {o.out};
  manifest.write(o.out + ".manifest.json");
  return 0;
}

struct RotcheckOpts {
  std::vector<std::string> inputs;
  std::string out;
  std::string frame;
  FuseOpts fuse;  // shares the fusion flag block
  unsigned workers = 1;
};

int run_rotcheck(const RotcheckOpts& o) {
  const auto sets = load_all(o.inputs);
  const auto images = sorted_image_union(sets);
  const wcf::Frame frame = parse_frame(o.frame);
  const wcf::WcfConfig cfg{o.fuse.ciou_thresh, o.fuse.t_score, o.fuse.t_count,
                           parse_rule(o.fuse.rule)};

  std::vector<wcf::RotationCheck> checks(images.size());
  run_parallel(images.size(), o.workers, [&](std::size_t i) {
    checks[i] = wcf::check_rotation_consistency(model_sets_for(sets, images[i]),
                                                frame, cfg);
  });

  wcf::RotationCheck total;
  total.structure_matches = true;
  for (const auto& c : checks) {
    total.structure_matches = total.structure_matches && c.structure_matches;
    total.max_center_px = std::max(total.max_center_px, c.max_center_px);
    total.max_radius_px = std::max(total.max_radius_px, c.max_radius_px);
    total.max_score = std::max(total.max_score, c.max_score);
    total.entries += c.entries;
  }
  const bool passed = total.passed(kRotcheckTolerancePx);

  ordered_json report;
  report["passed"] = passed;
  report["tolerance_px"] = kRotcheckTolerancePx;
  report["images"] = images.size();
  report["entries"] = total.entries;
  report["structure_matches"] = total.structure_matches;
  report["max_center_px"] = total.max_center_px;
  report["max_radius_px"] = total.max_radius_px;
  report["max_score_delta"] = total.max_score;
  {
    std::ofstream out_file(o.out, std::ios::binary);
    if (!out_file) {
      throw std::runtime_error("cannot open '" + o.out + "' for writing");
    }
    out_file << report.dump(2) << '\n';
  }

  std::printf("rotcheck %s: images=%zu entries=%zu max_center_px=%.3e "
              "max_radius_px=%.3e max_score_delta=%.3e\n",
              passed ? "PASS" : "FAIL", images.size(), total.entries,
              total.max_center_px, total.max_radius_px, total.max_score);

  wcf::cli::RunManifest manifest;
  manifest.command = "rotcheck";
  manifest.config = {{"frame", o.frame},
                     {"ciou_thresh", o.fuse.ciou_thresh},
                     {"t_score", o.fuse.t_score},
                     {"t_count", o.fuse.t_count},
                     {"rule", o.fuse.rule},
                     {"tolerance_px", kRotcheckTolerancePx},
                     {"workers", o.workers}};
  manifest.inputs.assign(o.inputs.begin(), o.inputs.end());
  manifest.model_order = o.inputs;
  manifest.outputs = {o.out};
  manifest.write(o.out + ".manifest.json");
  return passed ? 0 : 1;
}

struct SynthOpts {
  std::string out;
  std::uint64_t seed = 1;
  int images = 20;
  int gt_per_image = 10;
  int models = 5;
  double pos_jitter = 2.0;
  double radius_jitter = 0.05;
  double detect_prob = 0.9;
  double fp_rate = 2.0;
  double fp_score_lo = 0.3;
  double fp_score_hi = 0.8;
  double tp_score_lo = 0.55;
  double tp_score_hi = 0.99;
  double gt_radius_lo = 12.0;
  double gt_radius_hi = 32.0;
  std::string frame = "512x512";
};

int run_synth(const SynthOpts& o) {
  wcf::SynthConfig cfg;
  cfg.n_images = o.images;
  cfg.gt_per_image = o.gt_per_image;
  cfg.n_models = o.models;
  cfg.pos_jitter_sigma = o.pos_jitter;
  cfg.radius_jitter_frac = o.radius_jitter;
  cfg.detect_prob = o.detect_prob;
  cfg.fp_per_image_rate = o.fp_rate;
  cfg.fp_score_range = {o.fp_score_lo, o.fp_score_hi};
  cfg.tp_score_range = {o.tp_score_lo, o.tp_score_hi};
  cfg.gt_radius_range = {o.gt_radius_lo, o.gt_radius_hi};
  cfg.seed = o.seed;
  cfg.frame = parse_frame(o.frame);

  const wcf::SynthResult result = wcf::generate(cfg);

  const fs::path dir = o.out;
  fs::create_directories(dir);
  std::vector<std::string> outputs;

  wcf::write_ground_truth(dir / "gt.jsonl", result.ground_truth);
  outputs.push_back("gt.jsonl");
  for (int m = 0; m < cfg.n_models; ++m) {
    const std::string name = "model_" + std::to_string(m + 1) + ".jsonl";
    wcf::write_detections(dir / name,
                          result.model_detections[static_cast<std::size_t>(m)]);
    outputs.push_back(name);
  }

  ordered_json config_json = {{"n_images", cfg.n_images},
                              {"gt_per_image", cfg.gt_per_image},
                              {"n_models", cfg.n_models},
                              {"pos_jitter_sigma", cfg.pos_jitter_sigma},
                              {"radius_jitter_frac", cfg.radius_jitter_frac},
                              {"detect_prob", cfg.detect_prob},
                              {"fp_per_image_rate", cfg.fp_per_image_rate},
                              {"fp_score_range", {cfg.fp_score_range.lo, cfg.fp_score_range.hi}},
                              {"tp_score_range", {cfg.tp_score_range.lo, cfg.tp_score_range.hi}},
                              {"gt_radius_range", {cfg.gt_radius_range.lo, cfg.gt_radius_range.hi}},
                              {"seed", cfg.seed},
                              {"frame", o.frame}};

  ordered_json meta;
  meta["tool_version"] = wcf::kVersion;
  meta["prng"] = wcf::synth_rng_name();
  meta["config"] = config_json;
  {
    std::ofstream meta_file(dir / "synth_meta.json", std::ios::binary);
    if (!meta_file) {
      throw std::runtime_error("cannot open '" + (dir / "synth_meta.json").string() +
                               "' for writing");
    }
    meta_file << meta.dump(2) << '\n';
  }
  outputs.push_back("synth_meta.json");

  wcf::cli::RunManifest manifest;
  manifest.command = "synth";
  manifest.config = config_json;
  manifest.config["prng"] = wcf::synth_rng_name();
  manifest.outputs = outputs;
  manifest.write(dir / "manifest.json");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Weighted Circle Fusion toolkit: fuse, suppress, and evaluate "
               "circle detections stored as JSON Lines."};
  app.set_version_flag("--version", std::string(wcf::kVersion));
  app.require_subcommand(1);
  int rc = 0;

  FuseOpts fuse_opts;
  auto* fuse_cmd =
      app.add_subcommand("fuse", "Score-weighted fusion of per-model detection files");
  fuse_cmd->add_option("inputs", fuse_opts.inputs,
                       "Detection files, one per model, in fusion order")
      ->required();
  envify(fuse_cmd->add_option("--out", fuse_opts.out, "Fused JSONL output path")
             ->required());
  add_fusion_flags(fuse_cmd, &fuse_opts);
  envify(fuse_cmd->add_option("--workers", fuse_opts.workers, "Worker threads across images")
             ->check(CLI::Range(1u, 256u))
             ->capture_default_str());
  fuse_cmd->callback([&] { rc = run_fuse(fuse_opts); });

  NmsOpts nms_opts;
  auto* nms_cmd = app.add_subcommand(
      "nms", "Greedy non-maximum suppression over pooled detections");
  nms_cmd->add_option("inputs", nms_opts.inputs, "Detection files (pooled per image)")
      ->required();
  envify(nms_cmd->add_option("--out", nms_opts.out, "Suppressed JSONL output path")
             ->required());
  envify(nms_cmd->add_option("--ciou-thresh", nms_opts.ciou_thresh,
                             "Suppress overlaps strictly above this cIoU")
             ->capture_default_str());
  envify(nms_cmd->add_option("--workers", nms_opts.workers, "Worker threads across images")
             ->check(CLI::Range(1u, 256u))
             ->capture_default_str());
  nms_cmd->callback([&] { rc = run_nms(nms_opts); });

  SoftNmsOpts soft_opts;
  auto* soft_cmd = app.add_subcommand(
      "softnms", "Soft score-decay suppression over pooled detections");
  soft_cmd->add_option("inputs", soft_opts.inputs, "Detection files (pooled per image)")
      ->required();
  envify(soft_cmd->add_option("--out", soft_opts.out, "Suppressed JSONL output path")
             ->required());
  envify(soft_cmd->add_option("--ciou-thresh", soft_opts.ciou_thresh,
                              "Decay overlaps strictly above this cIoU")
             ->capture_default_str());
  envify(soft_cmd->add_option("--mode", soft_opts.mode, "Decay shape")
             ->check(CLI::IsMember({"linear", "gaussian"}))
             ->capture_default_str());
  envify(soft_cmd->add_option("--sigma", soft_opts.sigma, "Gaussian decay width")
             ->capture_default_str());
  envify(soft_cmd->add_option("--score-cut", soft_opts.score_cut,
                              "Drop results whose decayed score falls below this")
             ->capture_default_str());
  envify(soft_cmd->add_option("--workers", soft_opts.workers, "Worker threads across images")
             ->check(CLI::Range(1u, 256u))
             ->capture_default_str());
  soft_cmd->callback([&] { rc = run_softnms(soft_opts); });

  EvalOpts eval_opts;
  auto* eval_cmd = app.add_subcommand(
      "eval", "COCO-style cIoU evaluation of detections or fused results");
  eval_cmd->add_option("detections", eval_opts.detections,
                       "Detection or fused JSONL file")
      ->required();
  eval_cmd->add_option("ground_truth", eval_opts.ground_truth, "Ground-truth JSONL file")
      ->required();
  envify(eval_cmd->add_option("--out", eval_opts.out, "Report JSON output path")
             ->required());
  eval_cmd->callback([&] { rc = run_eval(eval_opts); });

  RotcheckOpts rot_opts;
  auto* rot_cmd = app.add_subcommand(
      "rotcheck", "Verify fusion commutes with a 90-degree frame rotation");
  rot_cmd->add_option("inputs", rot_opts.inputs,
                      "Detection files, one per model, in fusion order")
      ->required();
  envify(rot_cmd->add_option("--frame", rot_opts.frame, "Frame dimensions as WIDTHxHEIGHT")
             ->required()
             ->check(check_frame));
  envify(rot_cmd->add_option("--out", rot_opts.out, "Report JSON output path")
             ->required());
  add_fusion_flags(rot_cmd, &rot_opts.fuse);
  envify(rot_cmd->add_option("--workers", rot_opts.workers, "Worker threads across images")
             ->check(CLI::Range(1u, 256u))
             ->capture_default_str());
  rot_cmd->callback([&] { rc = run_rotcheck(rot_opts); });

  SynthOpts synth_opts;
  auto* synth_cmd = app.add_subcommand(
      "synth", "Generate a seeded synthetic ground truth + model ensemble");
  envify(synth_cmd->add_option("--out", synth_opts.out, "Output directory")
             ->required());
  envify(synth_cmd->add_option("--seed", synth_opts.seed, "PRNG seed")
             ->capture_default_str());
  envify(synth_cmd->add_option("--images", synth_opts.images, "Number of images")
             ->check(CLI::Range(0, 1000000))
             ->capture_default_str());
  envify(synth_cmd->add_option("--gt-per-image", synth_opts.gt_per_image,
                               "Ground-truth circles per image")
             ->check(CLI::Range(0, 1000000))
             ->capture_default_str());
  envify(synth_cmd->add_option("--models", synth_opts.models, "Number of models")
             ->check(CLI::Range(1, 10000))
             ->capture_default_str());
  envify(synth_cmd->add_option("--pos-jitter", synth_opts.pos_jitter,
                               "Gaussian center jitter sigma in pixels")
             ->capture_default_str());
  envify(synth_cmd->add_option("--radius-jitter", synth_opts.radius_jitter,
                               "Multiplicative radius jitter fraction")
             ->capture_default_str());
  envify(synth_cmd->add_option("--detect-prob", synth_opts.detect_prob,
                               "Per-model probability of detecting each circle")
             ->capture_default_str());
  envify(synth_cmd->add_option("--fp-rate", synth_opts.fp_rate,
                               "Expected false positives per image (Poisson)")
             ->capture_default_str());
  envify(synth_cmd->add_option("--fp-score-lo", synth_opts.fp_score_lo,
                               "False-positive score range low end")
             ->capture_default_str());
  envify(synth_cmd->add_option("--fp-score-hi", synth_opts.fp_score_hi,
                               "False-positive score range high end")
             ->capture_default_str());
  envify(synth_cmd->add_option("--tp-score-lo", synth_opts.tp_score_lo,
                               "True-positive score range low end")
             ->capture_default_str());
  envify(synth_cmd->add_option("--tp-score-hi", synth_opts.tp_score_hi,
                               "True-positive score range high end")
             ->capture_default_str());
  envify(synth_cmd->add_option("--gt-radius-lo", synth_opts.gt_radius_lo,
                               "Ground-truth radius range low end (pixels)")
             ->capture_default_str());
  envify(synth_cmd->add_option("--gt-radius-hi", synth_opts.gt_radius_hi,
                               "Ground-truth radius range high end (pixels)")
             ->capture_default_str());
  envify(synth_cmd->add_option("--frame", synth_opts.frame,
                               "Frame dimensions as WIDTHxHEIGHT")
             ->check(check_frame)
             ->capture_default_str());
  synth_cmd->callback([&] { rc = run_synth(synth_opts); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;  // help/version exit clean; bad usage exits 2
  } catch (const wcf::ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return rc;
}
