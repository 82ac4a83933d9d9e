#include "wcf/dataio.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

namespace wcf {

namespace {

using ordered_json = nlohmann::ordered_json;

std::string at_line(const std::filesystem::path& path, long line) {
  return path.string() + ":" + std::to_string(line);
}

[[noreturn]] void fail_field(const std::filesystem::path& path, long line,
                             const std::string& field, const std::string& why) {
  throw ParseError(at_line(path, line) + ": field '" + field + "': " + why);
}

double require_number(const ordered_json& obj, const char* field,
                      const std::filesystem::path& path, long line) {
  if (!obj.contains(field)) {
    fail_field(path, line, field, "missing");
  }
  if (!obj[field].is_number()) {
    fail_field(path, line, field, "expected a number");
  }
  const double v = obj[field].get<double>();
  if (!std::isfinite(v)) {
    fail_field(path, line, field, "must be finite");
  }
  return v;
}

std::string require_string(const ordered_json& obj, const char* field,
                           const std::filesystem::path& path, long line) {
  if (!obj.contains(field)) {
    fail_field(path, line, field, "missing");
  }
  if (!obj[field].is_string()) {
    fail_field(path, line, field, "expected a string");
  }
  return obj[field].get<std::string>();
}

double require_radius(const ordered_json& obj, const std::filesystem::path& path,
                      long line) {
  const double r = require_number(obj, "r", path, line);
  if (r <= 0.0) {
    fail_field(path, line, "r", "must be positive");
  }
  return r;
}

double require_score(const ordered_json& obj, const char* field,
                     const std::filesystem::path& path, long line) {
  const double s = require_number(obj, field, path, line);
  if (!(s > 0.0) || !(s <= 1.0)) {
    std::ostringstream why;
    why << "must be in (0, 1] (got " << s << ")";
    fail_field(path, line, field, why.str());
  }
  return s;
}

ordered_json parse_line(const std::string& text, const std::filesystem::path& path,
                        long line) {
  ordered_json obj;
  try {
    obj = ordered_json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(at_line(path, line) + ": " + e.what());
  }
  if (!obj.is_object()) {
    throw ParseError(at_line(path, line) + ": expected a JSON object");
  }
  return obj;
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw ParseError("cannot open '" + path.string() + "' for reading");
  }
  return in;
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  }
  return out;
}

void finish_output(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) {
    throw std::runtime_error("write failed for '" + path.string() + "'");
  }
}

// Applies fn to each non-empty line.
template <typename Fn>
void for_each_line(const std::filesystem::path& path, Fn&& fn) {
  std::ifstream in = open_input(path);
  std::string text;
  long line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.empty()) {
      continue;
    }
    fn(text, line);
  }
}

// Grouping index so loads stay linear in the number of lines.
class DetectionSetBuilder {
 public:
  void append(Detection d) {
    auto [it, inserted] = index_.emplace(d.image_id, set_.images.size());
    if (inserted) {
      set_.images.push_back(ImageDetections{d.image_id, {}});
    }
    set_.images[it->second].detections.push_back(std::move(d));
  }

  DetectionSet take() { return std::move(set_); }

 private:
  DetectionSet set_;
  std::unordered_map<std::string, std::size_t> index_;
};

Detection detection_from(const ordered_json& obj, const std::filesystem::path& path,
                         long line) {
  Detection d;
  d.image_id = require_string(obj, "image_id", path, line);
  d.model_id = require_string(obj, "model_id", path, line);
  const double cx = require_number(obj, "cx", path, line);
  const double cy = require_number(obj, "cy", path, line);
  const double r = require_radius(obj, path, line);
  d.circle = Circle(cx, cy, r);
  d.score = require_score(obj, "score", path, line);
  return d;
}

Detection detection_from_fused(const ordered_json& obj,
                               const std::filesystem::path& path, long line) {
  Detection d;
  d.image_id = require_string(obj, "image_id", path, line);
  d.model_id = "fusion";
  const double cx = require_number(obj, "cx", path, line);
  const double cy = require_number(obj, "cy", path, line);
  const double r = require_radius(obj, path, line);
  d.circle = Circle(cx, cy, r);
  d.score = require_score(obj, "mean_score", path, line);
  return d;
}

ordered_json detection_to_json(const Detection& d) {
  ordered_json obj;
  obj["image_id"] = d.image_id;
  obj["model_id"] = d.model_id;
  obj["cx"] = d.circle.cx;
  obj["cy"] = d.circle.cy;
  obj["r"] = d.circle.r;
  obj["score"] = d.score;
  return obj;
}

}  // namespace

std::size_t DetectionSet::total() const {
  std::size_t n = 0;
  for (const auto& img : images) {
    n += img.detections.size();
  }
  return n;
}

std::vector<Detection> DetectionSet::flattened() const {
  std::vector<Detection> all;
  all.reserve(total());
  for (const auto& img : images) {
    all.insert(all.end(), img.detections.begin(), img.detections.end());
  }
  return all;
}

const std::vector<Detection>* DetectionSet::detections_for(
    std::string_view image_id) const {
  for (const auto& img : images) {
    if (img.image_id == image_id) {
      return &img.detections;
    }
  }
  return nullptr;
}

std::vector<std::string> DetectionSet::model_ids(std::string_view image_id) const {
  std::vector<std::string> ids;
  const auto* dets = detections_for(image_id);
  if (dets == nullptr) {
    return ids;
  }
  for (const auto& d : *dets) {
    if (std::find(ids.begin(), ids.end(), d.model_id) == ids.end()) {
      ids.push_back(d.model_id);
    }
  }
  return ids;
}

std::vector<Detection> DetectionSet::detections_for(
    std::string_view image_id, std::string_view model_id) const {
  std::vector<Detection> out;
  const auto* dets = detections_for(image_id);
  if (dets == nullptr) {
    return out;
  }
  for (const auto& d : *dets) {
    if (d.model_id == model_id) {
      out.push_back(d);
    }
  }
  return out;
}

FusedRecord to_fused_record(const std::string& image_id, const FusedCircle& f) {
  FusedRecord rec;
  rec.image_id = image_id;
  rec.cx = f.circle.cx;
  rec.cy = f.circle.cy;
  rec.r = f.circle.r;
  rec.mean_score = f.mean_score;
  rec.count = f.count;
  rec.source_models.reserve(f.constituents.size());
  for (const auto& d : f.constituents) {
    rec.source_models.push_back(d.model_id);
  }
  return rec;
}

DetectionSet load_detections(const std::filesystem::path& path) {
  DetectionSetBuilder builder;
  for_each_line(path, [&](const std::string& text, long line) {
    builder.append(detection_from(parse_line(text, path, line), path, line));
  });
  return builder.take();
}

std::vector<GroundTruth> load_ground_truth(const std::filesystem::path& path) {
  std::vector<GroundTruth> gts;
  std::unordered_map<std::string, std::size_t> index;
  for_each_line(path, [&](const std::string& text, long line) {
    const ordered_json obj = parse_line(text, path, line);
    const std::string image_id = require_string(obj, "image_id", path, line);
    const double cx = require_number(obj, "cx", path, line);
    const double cy = require_number(obj, "cy", path, line);
    const double r = require_radius(obj, path, line);
    auto [it, inserted] = index.emplace(image_id, gts.size());
    if (inserted) {
      gts.push_back(GroundTruth{image_id, {}});
    }
    gts[it->second].circles.emplace_back(cx, cy, r);
  });
  return gts;
}

DetectionSet load_scored_circles(const std::filesystem::path& path) {
  DetectionSetBuilder builder;
  for_each_line(path, [&](const std::string& text, long line) {
    const ordered_json obj = parse_line(text, path, line);
    Detection d = obj.contains("mean_score")
                      ? detection_from_fused(obj, path, line)
                      : detection_from(obj, path, line);
    builder.append(std::move(d));
  });
  return builder.take();
}

std::vector<FusedRecord> load_fused(const std::filesystem::path& path) {
  std::vector<FusedRecord> records;
  for_each_line(path, [&](const std::string& text, long line) {
    const ordered_json obj = parse_line(text, path, line);
    FusedRecord rec;
    rec.image_id = require_string(obj, "image_id", path, line);
    rec.cx = require_number(obj, "cx", path, line);
    rec.cy = require_number(obj, "cy", path, line);
    rec.r = require_radius(obj, path, line);
    rec.mean_score = require_score(obj, "mean_score", path, line);
    if (!obj.contains("count") || !obj["count"].is_number_integer()) {
      fail_field(path, line, "count", "expected an integer");
    }
    rec.count = obj["count"].get<int>();
    if (rec.count < 1) {
      fail_field(path, line, "count", "must be >= 1");
    }
    if (obj.contains("source_models")) {
      if (!obj["source_models"].is_array()) {
        fail_field(path, line, "source_models", "expected an array of strings");
      }
      for (const auto& m : obj["source_models"]) {
        if (!m.is_string()) {
          fail_field(path, line, "source_models", "expected an array of strings");
        }
        rec.source_models.push_back(m.get<std::string>());
      }
    }
    records.push_back(std::move(rec));
  });
  return records;
}

void write_detections(const std::filesystem::path& path,
                      const std::vector<Detection>& dets) {
  std::ofstream out = open_output(path);
  for (const auto& d : dets) {
    out << detection_to_json(d).dump() << '\n';
  }
  finish_output(out, path);
}

void write_ground_truth(const std::filesystem::path& path,
                        const std::vector<GroundTruth>& gts) {
  std::ofstream out = open_output(path);
  for (const auto& gt : gts) {
    for (const auto& c : gt.circles) {
      ordered_json obj;
      obj["image_id"] = gt.image_id;
      obj["cx"] = c.cx;
      obj["cy"] = c.cy;
      obj["r"] = c.r;
      out << obj.dump() << '\n';
    }
  }
  finish_output(out, path);
}

void write_fused(const std::filesystem::path& path,
                 const std::vector<FusedRecord>& records) {
  std::ofstream out = open_output(path);
  for (const auto& rec : records) {
    ordered_json obj;
    obj["image_id"] = rec.image_id;
    obj["cx"] = rec.cx;
    obj["cy"] = rec.cy;
    obj["r"] = rec.r;
    obj["mean_score"] = rec.mean_score;
    obj["count"] = rec.count;
    obj["source_models"] = rec.source_models;
    out << obj.dump() << '\n';
  }
  finish_output(out, path);
}

void write_report(const std::filesystem::path& path, const EvalReport& report) {
  ordered_json obj;
  obj["map_50_95"] = report.map_50_95;
  obj["map_50"] = report.map_50;
  obj["map_75"] = report.map_75;
  obj["ar_50_95"] = report.ar_50_95;
  ordered_json aps = ordered_json::array();
  for (const auto& [t, ap] : report.per_threshold_ap) {
    aps.push_back({t, ap});
  }
  obj["per_threshold_ap"] = std::move(aps);
  obj["tp"] = report.tp;
  obj["fp"] = report.fp;
  obj["fn"] = report.fn;
  std::ofstream out = open_output(path);
  out << obj.dump(2) << '\n';
  finish_output(out, path);
}

EvalReport load_report(const std::filesystem::path& path) {
  std::ifstream in = open_input(path);
  ordered_json obj;
  try {
    obj = ordered_json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  EvalReport report;
  report.map_50_95 = require_number(obj, "map_50_95", path, 1);
  report.map_50 = require_number(obj, "map_50", path, 1);
  report.map_75 = require_number(obj, "map_75", path, 1);
  report.ar_50_95 = require_number(obj, "ar_50_95", path, 1);
  if (!obj.contains("per_threshold_ap") || !obj["per_threshold_ap"].is_array()) {
    fail_field(path, 1, "per_threshold_ap", "expected an array");
  }
  for (const auto& pair : obj["per_threshold_ap"]) {
    if (!pair.is_array() || pair.size() != 2) {
      fail_field(path, 1, "per_threshold_ap", "expected [threshold, ap] pairs");
    }
    report.per_threshold_ap.emplace_back(pair[0].get<double>(),
                                         pair[1].get<double>());
  }
  report.tp = obj.value("tp", std::int64_t{0});
  report.fp = obj.value("fp", std::int64_t{0});
  report.fn = obj.value("fn", std::int64_t{0});
  return report;
}

}  // namespace wcf
