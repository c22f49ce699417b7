#include "uld/tensor.hpp"

#include <algorithm>
#include <functional>
#include <numeric>
#include <utility>

#include "uld/errors.hpp"
#include "uld/image.hpp"

namespace uld {

std::size_t shape_product(std::span<const std::size_t> shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(std::span<const std::size_t> shape) {
  std::string out = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i > 0) out += ", ";
    out += std::to_string(shape[i]);
  }
  return out + ")";
}

Tensor::Tensor(std::vector<std::size_t> shape, double fill)
    : shape_(std::move(shape)), data_(shape_product(shape_), fill) {}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (data_.size() != shape_product(shape_)) {
    throw Error(ErrorCode::kShapeMismatch, "tensor data length " + std::to_string(data_.size()) +
                                               " does not match shape " + shape_string(shape_));
  }
}

Image::Image(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Image::Image(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows * cols) {
    throw Error(ErrorCode::kShapeMismatch, "image data length does not match rows*cols");
  }
}

std::size_t Mask::count() const {
  return static_cast<std::size_t>(std::count(data.begin(), data.end(), static_cast<unsigned char>(1)));
}

Volume::Volume(std::size_t slices, std::size_t rows, std::size_t cols, Spacing spacing,
               double fill)
    : slices_(slices), rows_(rows), cols_(cols), spacing_(spacing),
      voxels_(slices * rows * cols, fill) {}

Volume::Volume(std::size_t slices, std::size_t rows, std::size_t cols, Spacing spacing,
               std::vector<double> voxels)
    : slices_(slices), rows_(rows), cols_(cols), spacing_(spacing), voxels_(std::move(voxels)) {
  if (voxels_.size() != slices * rows * cols) {
    throw Error(ErrorCode::kShapeMismatch, "volume data length does not match dims");
  }
}

Image Volume::slice(std::size_t s) const {
  const auto begin = voxels_.begin() + static_cast<std::ptrdiff_t>(s * rows_ * cols_);
  return Image(rows_, cols_, std::vector<double>(begin, begin + static_cast<std::ptrdiff_t>(rows_ * cols_)));
}

void Volume::set_slice(std::size_t s, const Image& image) {
  if (image.rows() != rows_ || image.cols() != cols_) {
    throw Error(ErrorCode::kShapeMismatch, "slice shape does not match volume");
  }
  std::copy(image.data().begin(), image.data().end(),
            voxels_.begin() + static_cast<std::ptrdiff_t>(s * rows_ * cols_));
}

}  // namespace uld
