#pragma once

#include <cstdint>
#include <vector>

#include "clrep/common/error.hpp"
#include "clrep/common/matrix.hpp"

namespace clrep::data {

// One dataset split held in memory as uint8 CHW images with global labels.
struct ImageSet {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> pixels;  // count * channels*height*width
  std::vector<int> labels;

  int count() const { return static_cast<int>(labels.size()); }
  int sample_size() const { return channels * height * width; }

  const std::uint8_t* sample(int i) const {
    return pixels.data() + static_cast<std::size_t>(i) * static_cast<std::size_t>(sample_size());
  }
};

// A float batch ready for the network: one column per image, CHW within the
// column (index (c*H + y)*W + x).
template <typename S>
struct ImageBatch {
  Mat<S> data;
  int channels = 0;
  int height = 0;
  int width = 0;

  Eigen::Index size() const { return data.cols(); }
};

using ImageBatchF = ImageBatch<float>;

}  // namespace clrep::data
