#include "dsva/vam.hpp"

#include <cmath>

#include "dsva/errors.hpp"

namespace dsva {

PrototypeBank PrototypeBank::init(int num_attributes, int dim, Rng& rng) {
  if (num_attributes < 1 || dim < 1)
    throw ShapeError("prototype bank needs positive attribute count and dimension");
  PrototypeBank bank;
  bank.prototypes.resize(num_attributes, dim);
  const double stddev = 1.0 / std::sqrt(static_cast<double>(dim));
  for (int i = 0; i < num_attributes; ++i)
    for (int j = 0; j < dim; ++j) bank.prototypes(i, j) = rng.normal(0.0, stddev);
  return bank;
}

AttentionMapStack attention_maps(const PatchGrid& grid, const PrototypeBank& bank) {
  if (grid.dim != bank.dim())
    throw ShapeError("patch embedding dim " + std::to_string(grid.dim) +
                     " does not match prototype dim " + std::to_string(bank.dim()));
  AttentionMapStack stack;
  stack.k = grid.k;
  stack.maps = bank.prototypes * grid.embeddings.transpose();  // N_a x N
  return stack;
}

AttributePrediction predict_attributes(const AttentionMapStack& stack) {
  if (stack.maps.rows() == 0 || stack.maps.cols() == 0)
    throw InputError("predict_attributes: empty attention map stack");
  AttributePrediction pred;
  const Eigen::Index na = stack.maps.rows();
  const Eigen::Index n = stack.maps.cols();
  pred.values.resize(na);
  pred.argmax_patch.resize(static_cast<std::size_t>(na));
  for (Eigen::Index i = 0; i < na; ++i) {
    double best = stack.maps(i, 0);
    Eigen::Index best_n = 0;
    for (Eigen::Index j = 1; j < n; ++j) {
      if (stack.maps(i, j) > best) {  // strict: first of a tie wins
        best = stack.maps(i, j);
        best_n = j;
      }
    }
    pred.values(i) = best;
    pred.argmax_patch[static_cast<std::size_t>(i)] = static_cast<int>(best_n);
  }
  return pred;
}

Vec compatibility_scores(const AttributePrediction& prediction,
                         const ClassAttributeMatrix& classes,
                         const std::vector<std::string>& subset) {
  if (subset.empty()) throw InputError("compatibility_scores: empty class subset");
  if (prediction.values.size() != classes.num_attributes())
    throw ShapeError("prediction length " + std::to_string(prediction.values.size()) +
                     " does not match matrix attribute count " +
                     std::to_string(classes.num_attributes()));
  Vec scores(static_cast<Eigen::Index>(subset.size()));
  for (std::size_t i = 0; i < subset.size(); ++i) {
    const int row = classes.index_of(subset[i]);  // throws InputError when unknown
    scores(static_cast<Eigen::Index>(i)) = classes.values.row(row).dot(prediction.values);
  }
  return scores;
}

Vec compatibility_scores_all(const Vec& attribute_values, const Mat& class_rows) {
  if (class_rows.cols() != attribute_values.size())
    throw ShapeError("class rows and attribute values disagree on N_a");
  return class_rows * attribute_values;
}

ClassAttributeMatrix normalize_class_matrix(const ClassAttributeMatrix& matrix, ClassNorm norm) {
  ClassAttributeMatrix out = matrix;
  switch (norm) {
    case ClassNorm::None:
      break;
    case ClassNorm::L2:
      for (Eigen::Index r = 0; r < out.values.rows(); ++r) {
        const double n = out.values.row(r).norm();
        if (n > 0) out.values.row(r) /= n;
      }
      break;
    case ClassNorm::ZScore:
      for (Eigen::Index c = 0; c < out.values.cols(); ++c) {
        const double mean = out.values.col(c).mean();
        const double var = (out.values.col(c).array() - mean).square().mean();
        const double sd = std::sqrt(var);
        if (sd > 0)
          out.values.col(c) = (out.values.col(c).array() - mean) / sd;
        else
          out.values.col(c).setZero();
      }
      break;
  }
  return out;
}

}  // namespace dsva
