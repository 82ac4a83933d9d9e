#pragma once

#include <utility>

namespace wcf {

/// A disc in continuous pixel coordinates: center (cx, cy), radius r.
/// Construction rejects non-finite coordinates and r <= 0.
struct Circle {
  double cx = 0.0;
  double cy = 0.0;
  double r = 1.0;

  Circle() = default;
  Circle(double cx, double cy, double r);
};

/// Image bounds in pixels, width x height. Both dimensions must be positive.
struct Frame {
  double width = 0.0;
  double height = 0.0;

  Frame() = default;
  Frame(double width, double height);
};

double circle_area(const Circle& c);

/// Exact overlap area of two discs. Zero when the center distance reaches
/// r_a + r_b, the full smaller-disc area when one disc contains the other,
/// and the closed-form circular-lens area in between.
double circle_intersection_area(const Circle& a, const Circle& b);

/// Intersection over union of two discs, in [0, 1]. Symmetric, and invariant
/// under any rigid motion applied to both circles.
double ciou(const Circle& a, const Circle& b);

/// Clockwise quarter turn in continuous coordinates:
/// (cx, cy) -> (height - cy, cx), frame (w, h) -> (h, w). Radius unchanged.
/// Throws std::domain_error if the center lies outside the frame.
std::pair<Circle, Frame> rotate90_cw(const Circle& c, const Frame& f);

/// Inverse of rotate90_cw: (cx, cy) -> (cy, width - cx), frame (w, h) -> (h, w).
std::pair<Circle, Frame> rotate90_ccw(const Circle& c, const Frame& f);

}  // namespace wcf
