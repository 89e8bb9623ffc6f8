#pragma once

// Test-only oracles: straight scalar loops over std::vector, written
// independently of the Eigen-based implementation paths they check.

#include <cmath>
#include <cstddef>
#include <functional>
#include <utility>
#include <vector>

#include "dsva/encoder.hpp"
#include "dsva/rng.hpp"
#include "dsva/types.hpp"

namespace oracle {

using Grid = std::vector<std::vector<double>>;  // row-major

inline Grid from_eigen(const dsva::Mat& m) {
  Grid g(static_cast<std::size_t>(m.rows()), std::vector<double>(static_cast<std::size_t>(m.cols())));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      g[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)] = m(r, c);
  return g;
}

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline Grid matmul(const Grid& a, const Grid& b) {
  Grid out(a.size(), std::vector<double>(b[0].size(), 0.0));
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t k = 0; k < b.size(); ++k)
      for (std::size_t j = 0; j < b[0].size(); ++j) out[i][j] += a[i][k] * b[k][j];
  return out;
}

inline std::vector<double> softmax(const std::vector<double>& logits) {
  double m = logits[0];
  for (double v : logits) m = std::max(m, v);
  std::vector<double> out(logits.size());
  double sum = 0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - m);
    sum += out[i];
  }
  for (auto& v : out) v /= sum;
  return out;
}

// softmax(Q K^T / sqrt(d)) V, one scalar at a time
inline Grid self_attention(const Grid& q, const Grid& k, const Grid& v) {
  const std::size_t n = q.size(), d = q[0].size(), dv = v[0].size();
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));
  Grid out(n, std::vector<double>(dv, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> logits(n);
    for (std::size_t j = 0; j < n; ++j) logits[j] = dot(q[i], k[j]) * scale;
    const auto weights = softmax(logits);
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t c = 0; c < dv; ++c) out[i][c] += weights[j] * v[j][c];
  }
  return out;
}

// maps[i][n] = <p_i, z_n>
inline Grid attention_maps(const Grid& prototypes, const Grid& embeddings) {
  Grid out(prototypes.size(), std::vector<double>(embeddings.size(), 0.0));
  for (std::size_t i = 0; i < prototypes.size(); ++i)
    for (std::size_t n = 0; n < embeddings.size(); ++n)
      out[i][n] = dot(prototypes[i], embeddings[n]);
  return out;
}

struct MaxResult {
  double value;
  int index;
};

inline MaxResult max_with_lowest_index(const std::vector<double>& values) {
  MaxResult best{values[0], 0};
  for (std::size_t i = 1; i < values.size(); ++i)
    if (values[i] > best.value) best = {values[i], static_cast<int>(i)};
  return best;
}

inline std::vector<double> mean_of_maps(const Grid& maps) {
  std::vector<double> mean(maps[0].size(), 0.0);
  for (const auto& map : maps)
    for (std::size_t n = 0; n < map.size(); ++n) mean[n] += map[n];
  for (auto& v : mean) v /= static_cast<double>(maps.size());
  return mean;
}

struct Box {
  int row_min, row_max, col_min, col_max;
};

inline Box crop_box(const std::vector<int>& mask, int k) {
  Box box{k, -1, k, -1};
  for (int r = 0; r < k; ++r)
    for (int c = 0; c < k; ++c)
      if (mask[static_cast<std::size_t>(r * k + c)]) {
        box.row_min = std::min(box.row_min, r);
        box.row_max = std::max(box.row_max, r);
        box.col_min = std::min(box.col_min, c);
        box.col_max = std::max(box.col_max, c);
      }
  return box;
}

inline int argmax_with_penalty(const std::vector<double>& scores, const std::vector<char>& seen,
                               double gamma) {
  int best = 0;
  double best_v = scores[0] - (seen[0] ? gamma : 0.0);
  for (std::size_t i = 1; i < scores.size(); ++i) {
    const double v = scores[i] - (seen[i] ? gamma : 0.0);
    if (v > best_v) {
      best_v = v;
      best = static_cast<int>(i);
    }
  }
  return best;
}

}  // namespace oracle

namespace fd {

// Central finite differences over an external parameter buffer.
inline std::vector<double> gradient(const std::function<double()>& f, double* x, std::size_t n,
                                    double h = 1e-5) {
  std::vector<double> g(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double saved = x[i];
    x[i] = saved + h;
    const double fp = f();
    x[i] = saved - h;
    const double fm = f();
    x[i] = saved;
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

inline double relative_error(const std::vector<double>& analytic,
                             const std::vector<double>& numeric) {
  double diff = 0, ref = 0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    diff += (analytic[i] - numeric[i]) * (analytic[i] - numeric[i]);
    ref += numeric[i] * numeric[i];
  }
  return std::sqrt(diff) / std::max(std::sqrt(ref), 1e-12);
}

}  // namespace fd

namespace helpers {

// Raw spans over every tensor of EncoderParams (or EncoderGrads), in a
// fixed traversal order, so FD and analytic gradients align coordinate
// by coordinate.
template <typename Params>
std::vector<std::pair<double*, std::size_t>> tensor_spans(Params& p) {
  std::vector<std::pair<double*, std::size_t>> spans;
  auto push = [&](auto& tensor) {
    spans.emplace_back(tensor.data(), static_cast<std::size_t>(tensor.size()));
  };
  push(p.patch_weight);
  push(p.patch_bias);
  push(p.pos_embed);
  for (auto& layer : p.layers) {
    push(layer.ln1_gain);
    push(layer.ln1_bias);
    push(layer.w_qkv);
    push(layer.b_qkv);
    push(layer.w_msa);
    push(layer.b_msa);
    push(layer.ln2_gain);
    push(layer.ln2_bias);
    push(layer.w_mlp1);
    push(layer.b_mlp1);
    push(layer.w_mlp2);
    push(layer.b_mlp2);
  }
  return spans;
}

inline dsva::ImageTensor random_image(int size, dsva::Rng& rng, int channels = 3) {
  dsva::ImageTensor img = dsva::ImageTensor::zeros(size, size, channels);
  for (auto& v : img.values) v = rng.uniform();
  return img;
}

inline dsva::Mat random_matrix(Eigen::Index rows, Eigen::Index cols, dsva::Rng& rng,
                               double scale = 1.0) {
  dsva::Mat m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = scale * rng.normal();
  return m;
}

}  // namespace helpers
