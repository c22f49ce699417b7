#pragma once

#include <array>
#include <istream>
#include <span>
#include <string>
#include <vector>

#include "uld/image.hpp"

namespace uld::windowing {

/// Hounsfield window given as (level, width); displays [level - width/2, level + width/2].
struct HuWindow {
  double level = 0.0;
  double width = 1.0;

  double low() const noexcept { return level - width / 2.0; }
  double high() const noexcept { return level + width / 2.0; }

  bool operator==(const HuWindow&) const = default;
};

/// Ordered windows; order fixes the view order of a multi-intensity stack.
using WindowSet = std::vector<HuWindow>;

/// Maps one HU value into [0, 255]. Requires width > 0 (unchecked).
double window_value(double hu, const HuWindow& w) noexcept;

/// clamp((hu - low) / width, 0, 1) * 255 per pixel. Throws kNonPositiveWidth.
Image apply_window(const Image& slice, const HuWindow& w);

/// Bone, lung, mediastinum, abdomen and soft-tissue windows in that order.
WindowSet default_window_set();

/// Common single wide window (level 1024, width 4096), spanning [-1024, 3072] HU.
inline constexpr HuWindow kWideWindow{1024.0, 4096.0};

/// Multi-intensity block of shape (views, channels, rows, cols).
struct IntensityStack {
  std::size_t views = 0;
  std::size_t channels = 0;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  double operator()(std::size_t v, std::size_t c, std::size_t r, std::size_t x) const {
    return data[((v * channels + c) * rows + r) * cols + x];
  }
  Image view_channel(std::size_t v, std::size_t c) const;
};

/// View v, channel c = apply_window(slices[c], windows[v]). Throws kShapeMismatch
/// when slices disagree in shape, kEmptyConfig when windows is empty.
IntensityStack multi_intensity_stack(std::span<const Image> slices, const WindowSet& windows);

/// One "level,width" pair per line; blank lines and lines starting with '#' ignored.
WindowSet parse_window_set(std::istream& in);
WindowSet load_window_set(const std::string& path);
HuWindow parse_window(const std::string& level_comma_width);

}  // namespace uld::windowing
