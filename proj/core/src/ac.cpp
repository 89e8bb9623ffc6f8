#include "dsva/ac.hpp"

#include <cassert>

#include "dsva/errors.hpp"
#include "dsva/image_io.hpp"

namespace dsva {

Mat mean_attention(const AttentionMapStack& stack) {
  if (stack.maps.rows() < 1) throw InputError("mean_attention: no attention maps");
  const int k = stack.k;
  const Vec flat = stack.maps.colwise().mean().transpose();
  Mat mean(k, k);
  for (int r = 0; r < k; ++r)
    for (int c = 0; c < k; ++c) mean(r, c) = flat(r * k + c);
  return mean;
}

ConcentrationMask concentration_mask(const Mat& mean_attn) {
  ConcentrationMask cm;
  cm.k = static_cast<int>(mean_attn.rows());
  if (mean_attn.rows() != mean_attn.cols() || cm.k < 1)
    throw ShapeError("mean attention must be a square k x k grid");
  cm.mean_attention = mean_attn;
  cm.threshold = mean_attn.mean();
  cm.mask.resize(cm.k, cm.k);
  for (int r = 0; r < cm.k; ++r)
    for (int c = 0; c < cm.k; ++c) cm.mask(r, c) = mean_attn(r, c) >= cm.threshold ? 1 : 0;
  return cm;
}

CropBox crop_box(const ConcentrationMask& mask) {
  int row_min = mask.k, row_max = -1, col_min = mask.k, col_max = -1;
  for (int r = 0; r < mask.k; ++r) {
    for (int c = 0; c < mask.k; ++c) {
      if (mask.mask(r, c) != 0) {
        if (r < row_min) row_min = r;
        if (r > row_max) row_max = r;
        if (c < col_min) col_min = c;
        if (c > col_max) col_max = c;
      }
    }
  }
  // the mask invariant guarantees at least one nonzero entry
  assert(row_max >= 0 && "crop_box called on an all-zero mask");
  if (row_max < 0) throw InputError("crop_box: all-zero concentration mask");
  return CropBox{row_min, row_max, col_min, col_max};
}

ImageTensor crop_and_resize(const ImageTensor& image, const CropBox& box, int k) {
  image.validate(k);
  if (box.row_min < 0 || box.col_min < 0 || box.row_max >= k || box.col_max >= k ||
      box.row_min > box.row_max || box.col_min > box.col_max)
    throw InputError("crop box out of range for the patch grid");
  const int ph = image.height / k;
  const int pw = image.width / k;
  const int y0 = box.row_min * ph;
  const int y1 = (box.row_max + 1) * ph;  // exclusive
  const int x0 = box.col_min * pw;
  const int x1 = (box.col_max + 1) * pw;

  ImageTensor region = ImageTensor::zeros(y1 - y0, x1 - x0, image.channels);
  for (int y = y0; y < y1; ++y)
    for (int x = x0; x < x1; ++x)
      for (int c = 0; c < image.channels; ++c)
        region.at(y - y0, x - x0, c) = image.at(y, x, c);

  return resize_bilinear(region, image.height, image.width);
}

}  // namespace dsva
