#include "wcf/dataio.hpp"

#include <gtest/gtest.h>

#include <random>
#include <string>
#include <vector>

#include "test_util.hpp"

namespace {

using testutil::det;
using testutil::TempDir;
using wcf::Circle;
using wcf::Detection;
using wcf::DetectionSet;
using wcf::FusedRecord;
using wcf::GroundTruth;
using wcf::ParseError;

std::string detection_line(const std::string& image, const std::string& model,
                           double cx, double cy, double r, double score) {
  return "{\"image_id\":\"" + image + "\",\"model_id\":\"" + model +
         "\",\"cx\":" + std::to_string(cx) + ",\"cy\":" + std::to_string(cy) +
         ",\"r\":" + std::to_string(r) + ",\"score\":" + std::to_string(score) +
         "}\n";
}

TEST(LoadDetections, GroupsModelsWithinOneImage) {
  TempDir tmp;
  const auto path = tmp.file("dets.jsonl");
  testutil::write_file(path, detection_line("img_0", "A", 1, 2, 3, 0.5) +
                                 detection_line("img_0", "B", 4, 5, 6, 0.7));
  const DetectionSet set = wcf::load_detections(path);
  ASSERT_EQ(set.images.size(), 1u);
  EXPECT_EQ(set.total(), 2u);
  EXPECT_EQ(set.model_ids("img_0"), (std::vector<std::string>{"A", "B"}));
  EXPECT_EQ(set.detections_for("img_0", "A").size(), 1u);
  EXPECT_EQ(set.detections_for("img_0", "B").size(), 1u);
  EXPECT_EQ(set.detections_for("missing"), nullptr);
}

TEST(LoadDetections, EmptyFileIsEmptySet) {
  TempDir tmp;
  const auto path = tmp.file("empty.jsonl");
  testutil::write_file(path, "");
  const DetectionSet set = wcf::load_detections(path);
  EXPECT_TRUE(set.images.empty());
  EXPECT_EQ(set.total(), 0u);
}

TEST(LoadDetections, BlankLinesAreSkipped) {
  TempDir tmp;
  const auto path = tmp.file("dets.jsonl");
  testutil::write_file(path, "\n" + detection_line("img_0", "A", 1, 2, 3, 0.5) +
                                 "\n\n");
  EXPECT_EQ(wcf::load_detections(path).total(), 1u);
}

TEST(LoadDetections, ScoreAboveOneFailsWithLineAndField) {
  TempDir tmp;
  const auto path = tmp.file("bad.jsonl");
  testutil::write_file(path, detection_line("img_0", "A", 1, 2, 3, 0.5) +
                                 detection_line("img_0", "A", 1, 2, 3, 1.5));
  try {
    wcf::load_detections(path);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    const std::string what = e.what();
    EXPECT_NE(what.find(":2"), std::string::npos) << what;
    EXPECT_NE(what.find("score"), std::string::npos) << what;
    EXPECT_NE(what.find("1.5"), std::string::npos) << what;
  }
}

TEST(LoadDetections, ZeroScoreRejected) {
  TempDir tmp;
  const auto path = tmp.file("bad.jsonl");
  testutil::write_file(path, detection_line("img_0", "A", 1, 2, 3, 0.0));
  EXPECT_THROW(wcf::load_detections(path), ParseError);
}

TEST(LoadDetections, NonPositiveRadiusRejected) {
  TempDir tmp;
  const auto path = tmp.file("bad.jsonl");
  testutil::write_file(path, detection_line("img_0", "A", 1, 2, -3, 0.5));
  try {
    wcf::load_detections(path);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("'r'"), std::string::npos) << e.what();
  }
}

TEST(LoadDetections, MalformedJsonNamesLine) {
  TempDir tmp;
  const auto path = tmp.file("bad.jsonl");
  testutil::write_file(path, "{not json\n");
  try {
    wcf::load_detections(path);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find(":1"), std::string::npos) << e.what();
  }
}

TEST(LoadDetections, MissingFileNamesPath) {
  try {
    wcf::load_detections("/nonexistent/wcf_missing.jsonl");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("wcf_missing.jsonl"), std::string::npos);
  }
}

TEST(LoadDetections, DuplicateRecordsAreKept) {
  TempDir tmp;
  const auto path = tmp.file("dets.jsonl");
  const std::string line = detection_line("img_0", "A", 1, 2, 3, 0.5);
  testutil::write_file(path, line + line);
  EXPECT_EQ(wcf::load_detections(path).total(), 2u);
}

TEST(LoadGroundTruth, SingleLine) {
  TempDir tmp;
  const auto path = tmp.file("gt.jsonl");
  testutil::write_file(path, "{\"image_id\":\"img_0\",\"cx\":1,\"cy\":2,\"r\":3}\n");
  const auto gts = wcf::load_ground_truth(path);
  ASSERT_EQ(gts.size(), 1u);
  EXPECT_EQ(gts[0].image_id, "img_0");
  ASSERT_EQ(gts[0].circles.size(), 1u);
  EXPECT_DOUBLE_EQ(gts[0].circles[0].cx, 1.0);
}

TEST(LoadGroundTruth, MissingRadiusFails) {
  TempDir tmp;
  const auto path = tmp.file("gt.jsonl");
  testutil::write_file(path, "{\"image_id\":\"img_0\",\"cx\":1,\"cy\":2}\n");
  try {
    wcf::load_ground_truth(path);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    const std::string what = e.what();
    EXPECT_NE(what.find("'r'"), std::string::npos) << what;
    EXPECT_NE(what.find("missing"), std::string::npos) << what;
  }
}

TEST(LoadGroundTruth, InterleavedImagesGroupCorrectly) {
  TempDir tmp;
  const auto path = tmp.file("gt.jsonl");
  testutil::write_file(path,
                       "{\"image_id\":\"a\",\"cx\":1,\"cy\":1,\"r\":1}\n"
                       "{\"image_id\":\"b\",\"cx\":2,\"cy\":2,\"r\":2}\n"
                       "{\"image_id\":\"a\",\"cx\":3,\"cy\":3,\"r\":3}\n");
  const auto gts = wcf::load_ground_truth(path);
  ASSERT_EQ(gts.size(), 2u);
  EXPECT_EQ(gts[0].image_id, "a");
  ASSERT_EQ(gts[0].circles.size(), 2u);
  EXPECT_DOUBLE_EQ(gts[0].circles[1].cx, 3.0);
  EXPECT_EQ(gts[1].image_id, "b");
  ASSERT_EQ(gts[1].circles.size(), 1u);
}

TEST(RoundTrip, DetectionsAreExact) {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> score(0.01, 1.0);
  TempDir tmp;
  const auto path = tmp.file("dets.jsonl");
  std::vector<Detection> dets;
  for (int img = 0; img < 5; ++img) {
    for (int i = 0; i < 20; ++i) {
      Detection d = det(0, 0, 1, 0.5, "model_" + std::to_string(i % 3),
                        "img_" + std::to_string(img));
      d.circle = testutil::random_circle(rng, -1000.0, 1000.0, 1e-3, 500.0);
      d.score = score(rng);
      dets.push_back(d);
    }
  }
  wcf::write_detections(path, dets);
  const auto loaded = wcf::load_detections(path).flattened();
  ASSERT_EQ(loaded.size(), dets.size());
  for (std::size_t i = 0; i < dets.size(); ++i) {
    EXPECT_EQ(loaded[i].image_id, dets[i].image_id);
    EXPECT_EQ(loaded[i].model_id, dets[i].model_id);
    EXPECT_DOUBLE_EQ(loaded[i].circle.cx, dets[i].circle.cx);
    EXPECT_DOUBLE_EQ(loaded[i].circle.cy, dets[i].circle.cy);
    EXPECT_DOUBLE_EQ(loaded[i].circle.r, dets[i].circle.r);
    EXPECT_DOUBLE_EQ(loaded[i].score, dets[i].score);
  }
}

TEST(RoundTrip, GroundTruthIsExact) {
  std::mt19937_64 rng(37);
  TempDir tmp;
  const auto path = tmp.file("gt.jsonl");
  std::vector<GroundTruth> gts;
  for (int img = 0; img < 4; ++img) {
    GroundTruth gt{"img_" + std::to_string(img), {}};
    for (int i = 0; i < 7; ++i) {
      gt.circles.push_back(testutil::random_circle(rng, -50.0, 50.0, 0.1, 30.0));
    }
    gts.push_back(gt);
  }
  wcf::write_ground_truth(path, gts);
  const auto loaded = wcf::load_ground_truth(path);
  ASSERT_EQ(loaded.size(), gts.size());
  for (std::size_t i = 0; i < gts.size(); ++i) {
    ASSERT_EQ(loaded[i].circles.size(), gts[i].circles.size());
    for (std::size_t c = 0; c < gts[i].circles.size(); ++c) {
      EXPECT_DOUBLE_EQ(loaded[i].circles[c].cx, gts[i].circles[c].cx);
      EXPECT_DOUBLE_EQ(loaded[i].circles[c].cy, gts[i].circles[c].cy);
      EXPECT_DOUBLE_EQ(loaded[i].circles[c].r, gts[i].circles[c].r);
    }
  }
}

TEST(RoundTrip, FusedRecordsAreExact) {
  TempDir tmp;
  const auto path = tmp.file("fused.jsonl");
  std::vector<FusedRecord> records;
  FusedRecord rec;
  rec.image_id = "img_0";
  rec.cx = 10.123456789012345;
  rec.cy = -7.000000001;
  rec.r = 3.5;
  rec.mean_score = 0.6789;
  rec.count = 3;
  rec.source_models = {"m1", "m2", "m3"};
  records.push_back(rec);
  rec.image_id = "img_1";
  rec.count = 1;
  rec.source_models = {"m2"};
  records.push_back(rec);
  wcf::write_fused(path, records);
  const auto loaded = wcf::load_fused(path);
  ASSERT_EQ(loaded.size(), 2u);
  EXPECT_EQ(loaded[0].image_id, "img_0");
  EXPECT_DOUBLE_EQ(loaded[0].cx, records[0].cx);
  EXPECT_DOUBLE_EQ(loaded[0].cy, records[0].cy);
  EXPECT_DOUBLE_EQ(loaded[0].r, records[0].r);
  EXPECT_DOUBLE_EQ(loaded[0].mean_score, records[0].mean_score);
  EXPECT_EQ(loaded[0].count, 3);
  EXPECT_EQ(loaded[0].source_models, records[0].source_models);
  EXPECT_EQ(loaded[1].count, 1);
}

TEST(RoundTrip, EmptyFusedListWritesEmptyFile) {
  TempDir tmp;
  const auto path = tmp.file("fused.jsonl");
  wcf::write_fused(path, {});
  EXPECT_EQ(testutil::read_file(path), "");
  EXPECT_TRUE(wcf::load_fused(path).empty());
}

TEST(RoundTrip, ReportIsExact) {
  TempDir tmp;
  const auto path = tmp.file("report.json");
  wcf::EvalReport report;
  report.map_50_95 = 0.77612345;
  report.map_50 = 0.9123;
  report.map_75 = 0.8456;
  report.ar_50_95 = 0.7001;
  for (int i = 0; i < 10; ++i) {
    report.per_threshold_ap.emplace_back((50.0 + 5.0 * i) / 100.0,
                                         0.9 - 0.03 * i);
  }
  report.tp = 120;
  report.fp = 7;
  report.fn = 13;
  wcf::write_report(path, report);
  const wcf::EvalReport loaded = wcf::load_report(path);
  EXPECT_DOUBLE_EQ(loaded.map_50_95, report.map_50_95);
  EXPECT_DOUBLE_EQ(loaded.map_50, report.map_50);
  EXPECT_DOUBLE_EQ(loaded.map_75, report.map_75);
  EXPECT_DOUBLE_EQ(loaded.ar_50_95, report.ar_50_95);
  ASSERT_EQ(loaded.per_threshold_ap.size(), 10u);
  for (int i = 0; i < 10; ++i) {
    EXPECT_DOUBLE_EQ(loaded.per_threshold_ap[i].second,
                     report.per_threshold_ap[i].second);
  }
  EXPECT_EQ(loaded.tp, 120);
  EXPECT_EQ(loaded.fp, 7);
  EXPECT_EQ(loaded.fn, 13);
}

TEST(WriteReport, ContainsStableKeys) {
  TempDir tmp;
  const auto path = tmp.file("report.json");
  wcf::EvalReport report;
  report.map_50_95 = 1.0;
  report.map_50 = 1.0;
  report.map_75 = 1.0;
  report.ar_50_95 = 1.0;
  wcf::write_report(path, report);
  const std::string text = testutil::read_file(path);
  for (const char* key : {"map_50_95", "map_50", "map_75", "ar_50_95",
                          "per_threshold_ap", "tp", "fp", "fn"}) {
    EXPECT_NE(text.find(std::string("\"") + key + "\""), std::string::npos)
        << key;
  }
  EXPECT_NE(text.find("\"map_50_95\": 1.0"), std::string::npos);
  EXPECT_EQ(text.back(), '\n');
}

TEST(WriteDetections, ByteDeterministic) {
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> score(0.01, 1.0);
  std::vector<Detection> dets;
  for (int i = 0; i < 50; ++i) {
    Detection d = det(0, 0, 1, 0.5, "m", "img_0");
    d.circle = testutil::random_circle(rng);
    d.score = score(rng);
    dets.push_back(d);
  }
  TempDir tmp;
  wcf::write_detections(tmp.file("a.jsonl"), dets);
  wcf::write_detections(tmp.file("b.jsonl"), dets);
  EXPECT_EQ(testutil::read_file(tmp.file("a.jsonl")),
            testutil::read_file(tmp.file("b.jsonl")));
}

TEST(LoadScoredCircles, AcceptsFusedSchema) {
  TempDir tmp;
  const auto path = tmp.file("fused.jsonl");
  std::vector<FusedRecord> records;
  FusedRecord rec;
  rec.image_id = "img_0";
  rec.cx = 5;
  rec.cy = 6;
  rec.r = 7;
  rec.mean_score = 0.85;
  rec.count = 2;
  rec.source_models = {"m1", "m2"};
  records.push_back(rec);
  wcf::write_fused(path, records);
  const auto set = wcf::load_scored_circles(path);
  ASSERT_EQ(set.total(), 1u);
  const auto dets = set.flattened();
  EXPECT_EQ(dets[0].model_id, "fusion");
  EXPECT_DOUBLE_EQ(dets[0].score, 0.85);
  EXPECT_DOUBLE_EQ(dets[0].circle.cx, 5.0);
}

TEST(LoadScoredCircles, AcceptsDetectionSchema) {
  TempDir tmp;
  const auto path = tmp.file("dets.jsonl");
  testutil::write_file(path, detection_line("img_0", "A", 1, 2, 3, 0.5));
  const auto set = wcf::load_scored_circles(path);
  ASSERT_EQ(set.total(), 1u);
  EXPECT_EQ(set.flattened()[0].model_id, "A");
}

TEST(RoundTrip, ManyRandomCasesStayExact) {
  std::mt19937_64 rng(43);
  std::uniform_real_distribution<double> score(0.01, 1.0);
  TempDir tmp;
  const auto path = tmp.file("case.jsonl");
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<Detection> dets;
    const int n = 1 + static_cast<int>(rng() % 8);
    for (int i = 0; i < n; ++i) {
      Detection d = det(0, 0, 1, 0.5, "m" + std::to_string(i % 4),
                        "img_" + std::to_string(static_cast<int>(rng() % 3)));
      d.circle = testutil::random_circle(rng, -1e6, 1e6, 1e-6, 1e5);
      d.score = score(rng);
      dets.push_back(d);
    }
    wcf::write_detections(path, dets);
    const auto loaded = wcf::load_detections(path);
    ASSERT_EQ(loaded.total(), dets.size());
    // A second load/write cycle reproduces identical values: shortest
    // round-trip float formatting loses nothing.
    wcf::write_detections(path, loaded.flattened());
    const auto reloaded = wcf::load_detections(path);
    ASSERT_EQ(reloaded.total(), dets.size());
    const auto a = loaded.flattened();
    const auto b = reloaded.flattened();
    for (std::size_t i = 0; i < a.size(); ++i) {
      ASSERT_DOUBLE_EQ(a[i].circle.cx, b[i].circle.cx);
      ASSERT_DOUBLE_EQ(a[i].circle.cy, b[i].circle.cy);
      ASSERT_DOUBLE_EQ(a[i].circle.r, b[i].circle.r);
      ASSERT_DOUBLE_EQ(a[i].score, b[i].score);
    }
  }
}

}  // namespace
