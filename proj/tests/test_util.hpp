#pragma once

#include <sys/wait.h>

#include <array>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "wcf/fusion.hpp"
#include "wcf/geometry.hpp"

namespace testutil {

inline wcf::Detection det(double cx, double cy, double r, double score,
                          std::string model = "m1", std::string image = "img_0") {
  wcf::Detection d;
  d.circle = wcf::Circle(cx, cy, r);
  d.score = score;
  d.model_id = std::move(model);
  d.image_id = std::move(image);
  return d;
}

inline wcf::Circle random_circle(std::mt19937_64& rng, double pos_lo = 0.0,
                                 double pos_hi = 100.0, double r_lo = 0.5,
                                 double r_hi = 5.0) {
  std::uniform_real_distribution<double> pos(pos_lo, pos_hi);
  std::uniform_real_distribution<double> rad(r_lo, r_hi);
  return wcf::Circle(pos(rng), pos(rng), rad(rng));
}

/// Second circle placed at a random angle, at most frac_max of the sum of
/// radii away from the first, so the pair always overlaps.
inline std::pair<wcf::Circle, wcf::Circle> overlapping_pair(
    std::mt19937_64& rng, double frac_max = 0.9) {
  std::uniform_real_distribution<double> rad(0.5, 3.0);
  std::uniform_real_distribution<double> frac(0.0, frac_max);
  std::uniform_real_distribution<double> angle(0.0, 6.283185307179586);
  const wcf::Circle a(0.0, 0.0, rad(rng));
  const double rb = rad(rng);
  const double d = frac(rng) * (a.r + rb);
  const double t = angle(rng);
  return {a, wcf::Circle(d * std::cos(t), d * std::sin(t), rb)};
}

/// Center distance at which two circles of radius r have cIoU equal to the
/// target, found by bisection (cIoU is strictly decreasing in distance).
inline double distance_for_ciou(double r, double target) {
  double lo = 0.0;
  double hi = 2.0 * r;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    const double v = wcf::ciou(wcf::Circle(0.0, 0.0, r), wcf::Circle(mid, 0.0, r));
    if (v > target) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

/// Self-cleaning unique directory under the system temp root.
struct TempDir {
  std::filesystem::path path;

  TempDir() {
    static std::atomic<unsigned> counter{0};
    const auto base = std::filesystem::temp_directory_path();
    std::random_device rd;
    for (int attempt = 0; attempt < 100; ++attempt) {
      const auto candidate =
          base / ("wcf_test_" + std::to_string(rd()) + "_" +
                  std::to_string(counter.fetch_add(1)));
      std::error_code ec;
      if (std::filesystem::create_directory(candidate, ec)) {
        path = candidate;
        return;
      }
    }
    throw std::runtime_error("could not create a temp directory");
  }

  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }

  std::string file(const std::string& name) const { return (path / name).string(); }
};

inline void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw std::runtime_error("cannot write " + path.string());
  }
  out << text;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("cannot read " + path.string());
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

struct CommandResult {
  int exit_code = -1;
  std::string output;  // stdout and stderr combined
};

inline CommandResult run_command(const std::string& command) {
  FILE* pipe = ::popen((command + " 2>&1").c_str(), "r");
  if (pipe == nullptr) {
    throw std::runtime_error("popen failed for: " + command);
  }
  CommandResult result;
  std::array<char, 4096> buf;
  for (;;) {
    const std::size_t n = std::fread(buf.data(), 1, buf.size(), pipe);
    if (n == 0) {
      break;
    }
    result.output.append(buf.data(), n);
  }
  const int status = ::pclose(pipe);
  if (WIFEXITED(status)) {
    result.exit_code = WEXITSTATUS(status);
  }
  return result;
}

}  // namespace testutil
