#pragma once

#include "dsva/types.hpp"
#include "dsva/vam.hpp"

namespace dsva {

// Binary concentration grid: cell (a, b) is on iff the mean attention
// there reaches the grid-average threshold. The grid argmax always passes
// its own mean, so at least one cell is on.
struct ConcentrationMask {
  int k = 0;
  Mat mean_attention;            // k x k
  double threshold = 0.0;        // grid mean
  Eigen::MatrixXi mask;          // k x k, entries 0/1
};

// Inclusive patch-index bounds of the crop region.
struct CropBox {
  int row_min = 0;
  int row_max = 0;
  int col_min = 0;
  int col_max = 0;

  bool operator==(const CropBox&) const = default;
};

// Element-wise mean of the N_a attention maps, reshaped to k x k.
Mat mean_attention(const AttentionMapStack& stack);

// Thresholds at the grid mean with >= at equality, so a uniform map
// yields an all-ones mask.
ConcentrationMask concentration_mask(const Mat& mean_attn);

// Tightest axis-aligned box over the nonzero mask cells.
CropBox crop_box(const ConcentrationMask& mask);

// Extracts the pixel rectangle spanned by the box's patches and resizes
// it back to the input size. A full-cover box reproduces the input
// bit-exactly.
ImageTensor crop_and_resize(const ImageTensor& image, const CropBox& box, int k);

}  // namespace dsva
