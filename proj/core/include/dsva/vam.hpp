#pragma once

#include <string>
#include <vector>

#include "dsva/config.hpp"
#include "dsva/rng.hpp"
#include "dsva/types.hpp"

namespace dsva {

// Trainable attribute prototypes, one row per attribute. A prototype's dot
// product with a patch embedding scores the attribute's presence there.
struct PrototypeBank {
  Mat prototypes;  // N_a x D

  int num_attributes() const { return static_cast<int>(prototypes.rows()); }
  int dim() const { return static_cast<int>(prototypes.cols()); }

  // N(0, 1/sqrt(D)) keeps initial patch similarities O(1).
  static PrototypeBank init(int num_attributes, int dim, Rng& rng);
};

// N_a attention maps over the k x k patch grid; row i holds map M_i
// flattened in row-major patch order.
struct AttentionMapStack {
  int k = 0;
  Mat maps;  // N_a x N

  int num_attributes() const { return static_cast<int>(maps.rows()); }
  double at(int attribute, int row, int col) const { return maps(attribute, row * k + col); }
};

struct AttributePrediction {
  Vec values;                   // f_A(x), one entry per attribute
  std::vector<int> argmax_patch;  // maximizing patch per attribute, lowest index on ties
};

// maps[i][n] = <p_i, z_n>.
AttentionMapStack attention_maps(const PatchGrid& grid, const PrototypeBank& bank);

// values[i] = max_n maps[i][n]; ties resolved to the lowest patch index.
AttributePrediction predict_attributes(const AttentionMapStack& stack);

// score[c] = <f_A(x), r_A(c)> over the requested class subset. Rows are
// used as stored; apply normalize_class_matrix beforehand if desired.
Vec compatibility_scores(const AttributePrediction& prediction,
                         const ClassAttributeMatrix& classes,
                         const std::vector<std::string>& subset);

// Row dot products against every class, in matrix row order.
Vec compatibility_scores_all(const Vec& attribute_values, const Mat& class_rows);

// l2: unit-normalize each class row (rows of all zeros stay zero).
// zscore: standardize each attribute column across classes.
// none: pass through.
ClassAttributeMatrix normalize_class_matrix(const ClassAttributeMatrix& matrix, ClassNorm norm);

}  // namespace dsva
