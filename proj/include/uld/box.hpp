#pragma once

#include <compare>

namespace uld {

/// Axis-aligned box in pixel coordinates. Valid boxes have x2 > x1 and y2 > y1.
struct Box {
  double x1 = 0.0;
  double y1 = 0.0;
  double x2 = 0.0;
  double y2 = 0.0;

  double width() const noexcept { return x2 - x1; }
  double height() const noexcept { return y2 - y1; }
  double area() const noexcept { return width() * height(); }
  bool valid() const noexcept { return x2 > x1 && y2 > y1; }

  auto operator<=>(const Box&) const = default;
};

}  // namespace uld
