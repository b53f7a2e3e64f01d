// Copyright 2026 The VDRP Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>

namespace vdrp {

// Axis-aligned box in image coordinates, x2 >= x1 and y2 >= y1.
struct Box {
  double x1 = 0, y1 = 0, x2 = 0, y2 = 0;

  double width() const noexcept { return x2 - x1; }
  double height() const noexcept { return y2 - y1; }
  double area() const noexcept { return width() * height(); }
  double cx() const noexcept { return 0.5 * (x1 + x2); }
  double cy() const noexcept { return 0.5 * (y1 + y2); }
  bool valid() const noexcept;
  std::array<double, 4> as_array() const noexcept { return {x1, y1, x2, y2}; }

  friend bool operator==(const Box&, const Box&) = default;
};

// Throws ValidationError for inverted or non-finite coordinates.
Box make_box(double x1, double y1, double x2, double y2);

// Intersection over union; 0 when the union has zero area.
double iou(const Box& a, const Box& b);

// Tight enclosing box.
Box union_box(const Box& a, const Box& b);

}  // namespace vdrp
