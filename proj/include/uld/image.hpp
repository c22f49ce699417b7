#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

namespace uld {

/// Row-major 2-D grid of doubles. Pixel (r, c) has its center at x = c, y = r.
class Image {
 public:
  Image() = default;
  Image(std::size_t rows, std::size_t cols, double fill = 0.0);
  Image(std::size_t rows, std::size_t cols, std::vector<double> data);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }

  bool operator==(const Image&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// Binary mask, one byte per pixel (0 or 1).
struct Mask {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<unsigned char> data;

  Mask() = default;
  Mask(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0) {}

  unsigned char& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  unsigned char operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  std::size_t count() const;

  bool operator==(const Mask&) const = default;
};

/// Voxel spacing in millimetres: in-plane x, in-plane y, inter-slice.
struct Spacing {
  double x = 1.0;
  double y = 1.0;
  double z = 1.0;

  bool operator==(const Spacing&) const = default;
};

/// CT volume of HU values, laid out (slices, rows, cols).
class Volume {
 public:
  Volume() = default;
  Volume(std::size_t slices, std::size_t rows, std::size_t cols, Spacing spacing,
         double fill = 0.0);
  Volume(std::size_t slices, std::size_t rows, std::size_t cols, Spacing spacing,
         std::vector<double> voxels);

  std::size_t slices() const noexcept { return slices_; }
  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  const Spacing& spacing() const noexcept { return spacing_; }

  double& operator()(std::size_t s, std::size_t r, std::size_t c) {
    return voxels_[(s * rows_ + r) * cols_ + c];
  }
  double operator()(std::size_t s, std::size_t r, std::size_t c) const {
    return voxels_[(s * rows_ + r) * cols_ + c];
  }

  std::span<const double> voxels() const noexcept { return voxels_; }
  std::span<double> voxels() noexcept { return voxels_; }

  Image slice(std::size_t s) const;
  void set_slice(std::size_t s, const Image& image);

  bool operator==(const Volume&) const = default;

 private:
  std::size_t slices_ = 0;
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  Spacing spacing_;
  std::vector<double> voxels_;
};

}  // namespace uld
