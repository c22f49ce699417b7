#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <utility>

#include "uld/image.hpp"

namespace uld::preprocess {

/// Pixels at or below this HU count as black border. Air is about -1024.
inline constexpr double kBlackThreshold = -1000.0;

/// Common target resolution in mm (x, y, inter-slice).
inline constexpr Spacing kDefaultTargetSpacing{0.8, 0.8, 2.0};

/// Half-open pixel rectangle [x0, x1) x [y0, y1).
struct CropRect {
  std::size_t x0 = 0;
  std::size_t y0 = 0;
  std::size_t x1 = 0;
  std::size_t y1 = 0;

  std::size_t width() const noexcept { return x1 - x0; }
  std::size_t height() const noexcept { return y1 - y0; }

  bool operator==(const CropRect&) const = default;
};

struct CropResult {
  Image image;
  CropRect rect;
};

/// Tight bounding box of pixels with HU > threshold; the full frame when none qualify.
CropResult crop_black_border(const Image& slice, double threshold = kBlackThreshold);

Image crop(const Image& image, const CropRect& rect);

/// Crops every slice with one rect: the tight box over all slices.
std::pair<Volume, CropRect> crop_volume(const Volume& volume, double threshold = kBlackThreshold);

/// Trilinear resampling. Output index i sits at source coordinate
/// i * target / source along each axis (voxel 0 centers coincide); coordinates
/// past the last voxel clamp to the edge. Throws kNonPositiveSpacing.
Volume resample(const Volume& volume, const Spacing& target = kDefaultTargetSpacing);

/// Filled convex quadrilateral spanned by the two RECIST axes. A pixel is set
/// when its center lies inside or on the boundary. Throws kDegenerateMeasurement
/// for zero-length axes or four colinear endpoints.
Mask recist_to_mask(std::span<const double, 8> endpoints, std::size_t rows, std::size_t cols);

struct AugmentParams {
  bool hflip = false;
  bool vflip = false;
  double scale = 1.0;                 // [0.8, 1.2]
  std::array<double, 2> translate{};  // x, y in [-8, 8] pixels

  bool operator==(const AugmentParams&) const = default;
};

inline constexpr double kMinScale = 0.8;
inline constexpr double kMaxScale = 1.2;
inline constexpr double kMaxTranslate = 8.0;

/// Horizontal flip, vertical flip, bilinear scale about the image center, then
/// integer-rounded translation, in that order. Uncovered pixels become 0.
/// Throws kParamOutOfRange.
Image augment(const Image& image, const AugmentParams& params);

/// Each field drawn uniformly from its range; deterministic per seed.
AugmentParams sample_augment(std::uint64_t seed);

}  // namespace uld::preprocess
