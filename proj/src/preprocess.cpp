#include "uld/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "uld/errors.hpp"
#include "uld/rng.hpp"

namespace uld::preprocess {

namespace {

struct Point {
  double x;
  double y;
};

double cross(const Point& o, const Point& a, const Point& b) {
  return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

// Andrew's monotone chain; returns the hull counter-clockwise (in x-right, y-up terms).
std::vector<Point> convex_hull(std::vector<Point> pts) {
  std::sort(pts.begin(), pts.end(),
            [](const Point& a, const Point& b) { return a.x < b.x || (a.x == b.x && a.y < b.y); });
  std::vector<Point> hull(2 * pts.size());
  std::size_t k = 0;
  for (const auto& p : pts) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], p) <= 0) --k;
    hull[k++] = p;
  }
  for (std::size_t i = pts.size() - 1, t = k + 1; i-- > 0;) {
    while (k >= t && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k > 1 ? k - 1 : k);
  return hull;
}

// 1-D linear sample positions: index i0, neighbour i1, fraction f.
struct Tap {
  std::size_t i0;
  std::size_t i1;
  double f;
};

std::vector<Tap> linear_taps(std::size_t out_dim, std::size_t src_dim, double step) {
  std::vector<Tap> taps(out_dim);
  const double last = static_cast<double>(src_dim - 1);
  for (std::size_t i = 0; i < out_dim; ++i) {
    const double coord = std::min(static_cast<double>(i) * step, last);
    const auto i0 = static_cast<std::size_t>(std::floor(coord));
    const auto i1 = std::min(i0 + 1, src_dim - 1);
    taps[i] = {i0, i1, coord - static_cast<double>(i0)};
  }
  return taps;
}

// v0 + f * (v1 - v0) keeps constant signals exact.
double lerp(double v0, double v1, double f) { return v0 + f * (v1 - v0); }

std::size_t resampled_dim(std::size_t dim, double src, double dst) {
  const auto n = static_cast<long long>(std::llround(static_cast<double>(dim) * src / dst));
  return static_cast<std::size_t>(std::max<long long>(n, 1));
}

double bilinear_or_zero(const Image& img, double x, double y) {
  constexpr double kEps = 1e-9;
  const double max_x = static_cast<double>(img.cols() - 1);
  const double max_y = static_cast<double>(img.rows() - 1);
  if (x < -kEps || y < -kEps || x > max_x + kEps || y > max_y + kEps) return 0.0;
  x = std::clamp(x, 0.0, max_x);
  y = std::clamp(y, 0.0, max_y);
  const auto x0 = static_cast<std::size_t>(std::floor(x));
  const auto y0 = static_cast<std::size_t>(std::floor(y));
  const auto x1 = std::min(x0 + 1, img.cols() - 1);
  const auto y1 = std::min(y0 + 1, img.rows() - 1);
  const double fx = x - static_cast<double>(x0);
  const double fy = y - static_cast<double>(y0);
  const double top = lerp(img(y0, x0), img(y0, x1), fx);
  const double bottom = lerp(img(y1, x0), img(y1, x1), fx);
  return lerp(top, bottom, fy);
}

void check_params(const AugmentParams& p) {
  if (!(p.scale >= kMinScale && p.scale <= kMaxScale)) {
    throw Error(ErrorCode::kParamOutOfRange, "scale outside [0.8, 1.2]");
  }
  for (double t : p.translate) {
    if (!(std::abs(t) <= kMaxTranslate)) {
      throw Error(ErrorCode::kParamOutOfRange, "translation outside [-8, 8] pixels");
    }
  }
}

}  // namespace

CropResult crop_black_border(const Image& slice, double threshold) {
  std::size_t x0 = slice.cols(), y0 = slice.rows(), x1 = 0, y1 = 0;
  for (std::size_t r = 0; r < slice.rows(); ++r) {
    for (std::size_t c = 0; c < slice.cols(); ++c) {
      if (slice(r, c) > threshold) {
        x0 = std::min(x0, c);
        y0 = std::min(y0, r);
        x1 = std::max(x1, c + 1);
        y1 = std::max(y1, r + 1);
      }
    }
  }
  if (x1 == 0) return {slice, CropRect{0, 0, slice.cols(), slice.rows()}};
  CropRect rect{x0, y0, x1, y1};
  return {crop(slice, rect), rect};
}

Image crop(const Image& image, const CropRect& rect) {
  if (rect.x1 > image.cols() || rect.y1 > image.rows() || rect.x0 >= rect.x1 || rect.y0 >= rect.y1) {
    throw Error(ErrorCode::kInvalidArgument, "crop rect outside image");
  }
  Image out(rect.height(), rect.width());
  for (std::size_t r = 0; r < rect.height(); ++r) {
    for (std::size_t c = 0; c < rect.width(); ++c) out(r, c) = image(rect.y0 + r, rect.x0 + c);
  }
  return out;
}

std::pair<Volume, CropRect> crop_volume(const Volume& volume, double threshold) {
  Image projection(volume.rows(), volume.cols(), -std::numeric_limits<double>::infinity());
  for (std::size_t s = 0; s < volume.slices(); ++s) {
    for (std::size_t r = 0; r < volume.rows(); ++r) {
      for (std::size_t c = 0; c < volume.cols(); ++c) {
        projection(r, c) = std::max(projection(r, c), volume(s, r, c));
      }
    }
  }
  const auto rect = crop_black_border(projection, threshold).rect;
  Volume out(volume.slices(), rect.height(), rect.width(), volume.spacing());
  for (std::size_t s = 0; s < volume.slices(); ++s) out.set_slice(s, crop(volume.slice(s), rect));
  return {std::move(out), rect};
}

Volume resample(const Volume& volume, const Spacing& target) {
  if (!(target.x > 0.0 && target.y > 0.0 && target.z > 0.0)) {
    throw Error(ErrorCode::kNonPositiveSpacing, "target spacing must be positive");
  }
  const auto& src = volume.spacing();
  if (!(src.x > 0.0 && src.y > 0.0 && src.z > 0.0)) {
    throw Error(ErrorCode::kNonPositiveSpacing, "source spacing must be positive");
  }
  if (volume.slices() == 0 || volume.rows() == 0 || volume.cols() == 0) {
    throw Error(ErrorCode::kInvalidArgument, "empty volume");
  }
  const auto out_s = resampled_dim(volume.slices(), src.z, target.z);
  const auto out_r = resampled_dim(volume.rows(), src.y, target.y);
  const auto out_c = resampled_dim(volume.cols(), src.x, target.x);
  const auto zs = linear_taps(out_s, volume.slices(), target.z / src.z);
  const auto ys = linear_taps(out_r, volume.rows(), target.y / src.y);
  const auto xs = linear_taps(out_c, volume.cols(), target.x / src.x);

  Volume out(out_s, out_r, out_c, target);
  for (std::size_t s = 0; s < out_s; ++s) {
    const auto& z = zs[s];
    for (std::size_t r = 0; r < out_r; ++r) {
      const auto& y = ys[r];
      for (std::size_t c = 0; c < out_c; ++c) {
        const auto& x = xs[c];
        auto plane = [&](std::size_t k) {
          const double a = lerp(volume(k, y.i0, x.i0), volume(k, y.i0, x.i1), x.f);
          const double b = lerp(volume(k, y.i1, x.i0), volume(k, y.i1, x.i1), x.f);
          return lerp(a, b, y.f);
        };
        out(s, r, c) = lerp(plane(z.i0), plane(z.i1), z.f);
      }
    }
  }
  return out;
}

Mask recist_to_mask(std::span<const double, 8> e, std::size_t rows, std::size_t cols) {
  const std::vector<Point> pts = {{e[0], e[1]}, {e[2], e[3]}, {e[4], e[5]}, {e[6], e[7]}};
  if ((pts[0].x == pts[1].x && pts[0].y == pts[1].y) || (pts[2].x == pts[3].x && pts[2].y == pts[3].y)) {
    throw Error(ErrorCode::kDegenerateMeasurement, "RECIST axis has zero length");
  }
  const auto hull = convex_hull(pts);
  double area2 = 0.0;
  for (std::size_t i = 0; i < hull.size(); ++i) {
    const auto& a = hull[i];
    const auto& b = hull[(i + 1) % hull.size()];
    area2 += a.x * b.y - b.x * a.y;
  }
  double scale = 0.0;
  for (const auto& p : pts) scale = std::max({scale, std::abs(p.x), std::abs(p.y)});
  if (hull.size() < 3 || std::abs(area2) <= 1e-12 * std::max(1.0, scale * scale)) {
    throw Error(ErrorCode::kDegenerateMeasurement, "RECIST endpoints are colinear");
  }

  Mask mask(rows, cols);
  double min_x = hull[0].x, max_x = hull[0].x, min_y = hull[0].y, max_y = hull[0].y;
  for (const auto& p : hull) {
    min_x = std::min(min_x, p.x);
    max_x = std::max(max_x, p.x);
    min_y = std::min(min_y, p.y);
    max_y = std::max(max_y, p.y);
  }
  // Clip the scan window to the frame before converting to indices.
  const double c_lo = std::max(0.0, std::ceil(min_x));
  const double c_hi = std::min(static_cast<double>(cols) - 1.0, std::floor(max_x));
  const double r_lo = std::max(0.0, std::ceil(min_y));
  const double r_hi = std::min(static_cast<double>(rows) - 1.0, std::floor(max_y));
  if (c_lo > c_hi || r_lo > r_hi) return mask;

  const double tol = 1e-9 * std::max(1.0, scale);
  for (auto r = static_cast<std::size_t>(r_lo); r <= static_cast<std::size_t>(r_hi); ++r) {
    for (auto c = static_cast<std::size_t>(c_lo); c <= static_cast<std::size_t>(c_hi); ++c) {
      const Point p{static_cast<double>(c), static_cast<double>(r)};
      bool inside = true;
      for (std::size_t i = 0; i < hull.size() && inside; ++i) {
        const auto& a = hull[i];
        const auto& b = hull[(i + 1) % hull.size()];
        const double len = std::hypot(b.x - a.x, b.y - a.y);
        inside = cross(a, b, p) >= -tol * len;
      }
      if (inside) mask(r, c) = 1;
    }
  }
  return mask;
}

Image augment(const Image& image, const AugmentParams& p) {
  check_params(p);
  const auto rows = image.rows();
  const auto cols = image.cols();
  if (image.empty()) return image;

  Image flipped(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      const auto sr = p.vflip ? rows - 1 - r : r;
      const auto sc = p.hflip ? cols - 1 - c : c;
      flipped(r, c) = image(sr, sc);
    }
  }

  Image scaled = flipped;
  if (p.scale != 1.0) {
    const double cx = (static_cast<double>(cols) - 1.0) / 2.0;
    const double cy = (static_cast<double>(rows) - 1.0) / 2.0;
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < cols; ++c) {
        const double sx = cx + (static_cast<double>(c) - cx) / p.scale;
        const double sy = cy + (static_cast<double>(r) - cy) / p.scale;
        scaled(r, c) = bilinear_or_zero(flipped, sx, sy);
      }
    }
  }

  const auto tx = std::lround(p.translate[0]);
  const auto ty = std::lround(p.translate[1]);
  if (tx == 0 && ty == 0) return scaled;
  Image out(rows, cols, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    const long long sr = static_cast<long long>(r) - ty;
    if (sr < 0 || sr >= static_cast<long long>(rows)) continue;
    for (std::size_t c = 0; c < cols; ++c) {
      const long long sc = static_cast<long long>(c) - tx;
      if (sc < 0 || sc >= static_cast<long long>(cols)) continue;
      out(r, c) = scaled(static_cast<std::size_t>(sr), static_cast<std::size_t>(sc));
    }
  }
  return out;
}

AugmentParams sample_augment(std::uint64_t seed) {
  Rng rng(seed);
  AugmentParams p;
  p.hflip = rng.coin();
  p.vflip = rng.coin();
  p.scale = rng.uniform(kMinScale, kMaxScale);
  p.translate[0] = rng.uniform(-kMaxTranslate, kMaxTranslate);
  p.translate[1] = rng.uniform(-kMaxTranslate, kMaxTranslate);
  return p;
}

}  // namespace uld::preprocess
