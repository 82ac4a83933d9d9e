#include "wcf/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace wcf {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Area of the circular segment of a disc with radius r cut off by a chord at
// signed distance x from the center (x < 0 selects the major segment).
double segment_area(double r, double x) {
  const double t = std::clamp(x / r, -1.0, 1.0);
  return r * r * std::acos(t) - x * std::sqrt(std::max(0.0, r * r - x * x));
}

}  // namespace

Circle::Circle(double cx_, double cy_, double r_) : cx(cx_), cy(cy_), r(r_) {
  if (!std::isfinite(cx) || !std::isfinite(cy) || !std::isfinite(r)) {
    throw std::invalid_argument("Circle: center and radius must be finite");
  }
  if (r <= 0.0) {
    throw std::invalid_argument("Circle: radius must be positive");
  }
}

Frame::Frame(double width_, double height_) : width(width_), height(height_) {
  if (!std::isfinite(width) || !std::isfinite(height) || width <= 0.0 ||
      height <= 0.0) {
    throw std::invalid_argument("Frame: dimensions must be positive and finite");
  }
}

double circle_area(const Circle& c) { return kPi * c.r * c.r; }

double circle_intersection_area(const Circle& a, const Circle& b) {
  const double d = std::hypot(b.cx - a.cx, b.cy - a.cy);
  if (d >= a.r + b.r) {
    return 0.0;
  }
  if (d <= std::abs(a.r - b.r)) {
    const double rmin = std::min(a.r, b.r);
    return kPi * rmin * rmin;
  }
  // Circular lens: split along the radical line at signed distance da from
  // a's center (db from b's) and sum the two segments.
  const double da = (a.r * a.r - b.r * b.r + d * d) / (2.0 * d);
  const double db = d - da;
  return segment_area(a.r, da) + segment_area(b.r, db);
}

double ciou(const Circle& a, const Circle& b) {
  const double inter = circle_intersection_area(a, b);
  if (inter <= 0.0) {
    return 0.0;
  }
  const double uni = circle_area(a) + circle_area(b) - inter;
  return inter / uni;
}

std::pair<Circle, Frame> rotate90_cw(const Circle& c, const Frame& f) {
  if (c.cx < 0.0 || c.cx > f.width || c.cy < 0.0 || c.cy > f.height) {
    throw std::domain_error("rotate90_cw: circle center outside frame");
  }
  return {Circle(f.height - c.cy, c.cx, c.r), Frame(f.height, f.width)};
}

std::pair<Circle, Frame> rotate90_ccw(const Circle& c, const Frame& f) {
  if (c.cx < 0.0 || c.cx > f.width || c.cy < 0.0 || c.cy > f.height) {
    throw std::domain_error("rotate90_ccw: circle center outside frame");
  }
  return {Circle(c.cy, f.width - c.cx, c.r), Frame(f.height, f.width)};
}

}  // namespace wcf
