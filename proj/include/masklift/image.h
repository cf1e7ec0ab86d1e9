#pragma once

#include <cstdint>
#include <limits>
#include <vector>

#include "masklift/error.h"

namespace masklift {

// Row-major raster: element (row, col) lives at row * width + col.
template <typename T>
struct Image {
  int width = 0;
  int height = 0;
  std::vector<T> data;

  Image() = default;
  Image(int w, int h, T fill = T{})
      : width(w), height(h), data(static_cast<std::size_t>(w) * h, fill) {}

  T& at(int row, int col) { return data[static_cast<std::size_t>(row) * width + col]; }
  const T& at(int row, int col) const {
    return data[static_cast<std::size_t>(row) * width + col];
  }
  bool contains(int row, int col) const {
    return row >= 0 && row < height && col >= 0 && col < width;
  }
  std::size_t size() const { return data.size(); }
  template <typename U>
  bool same_shape(const Image<U>& o) const {
    return width == o.width && height == o.height;
  }

  bool operator==(const Image&) const = default;
};

using Label = std::uint32_t;
using LabelImage = Image<Label>;
using DepthImage = Image<float>;

inline constexpr float kNoDepth = std::numeric_limits<float>::infinity();

}  // namespace masklift
