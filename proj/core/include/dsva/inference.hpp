#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "dsva/config.hpp"
#include "dsva/data.hpp"
#include "dsva/types.hpp"
#include "dsva/vam.hpp"

namespace dsva {

// Compatibility scores of test images against every candidate class.
struct ScoreMatrix {
  Mat scores;                            // images x classes
  std::vector<std::string> class_names;  // column order
  std::vector<char> seen_flags;          // per column

  int class_index(const std::string& name) const;  // throws InputError
  void validate() const;
};

// Argmax over unseen-class candidates; ties go to the lowest index.
int zsl_predict(const Vec& unseen_scores);

// Argmax over score[c] - gamma * [c is seen]; ties go to the lowest index.
int gzsl_predict(const Vec& scores, const std::vector<char>& seen_flags, double gamma);

// 2SU/(S+U), 0 when both are 0.
double harmonic_mean(double seen_acc, double unseen_acc);

struct EvalReport {
  double zsl_top1 = 0.0;
  double gzsl_seen = 0.0;
  double gzsl_unseen = 0.0;
  double harmonic = 0.0;
  double gamma = 0.0;
  AccuracyMode zsl_mode = AccuracyMode::Overall;
  AccuracyMode gzsl_mode = AccuracyMode::PerClassMean;
  std::map<std::string, double> per_class;  // GZSL per-class accuracy

  std::string to_json() const;
};

// ZSL Top-1 over unseen-label rows (candidates restricted to unseen
// classes) plus calibrated-stacking GZSL over all candidates.
EvalReport evaluate(const ScoreMatrix& scores, const std::vector<std::string>& true_labels,
                    double gamma, AccuracyMode zsl_mode = AccuracyMode::Overall,
                    AccuracyMode gzsl_mode = AccuracyMode::PerClassMean);

struct SweepResult {
  std::vector<EvalReport> reports;  // one per gamma, grid order
  std::size_t best_index = 0;       // maximizes H; earliest on ties
};

SweepResult calibration_sweep(const ScoreMatrix& scores,
                              const std::vector<std::string>& true_labels,
                              const std::vector<double>& gamma_grid,
                              AccuracyMode zsl_mode = AccuracyMode::Overall,
                              AccuracyMode gzsl_mode = AccuracyMode::PerClassMean);

// Runs encoder + attribute mapping over the split's test images and
// scores them against every class row (rows used as given). Also returns
// the labels aligned with the score rows.
struct ScoredDataset {
  ScoreMatrix scores;
  std::vector<std::string> labels;
  std::vector<std::string> image_ids;
  Mat attribute_values;  // f_A(x) per row, for export
};

ScoredDataset score_test_images(const DatasetIndex& index, const SplitSpec& split,
                                const ClassAttributeMatrix& classes,
                                const EncoderParams& encoder, const PrototypeBank& bank);

}  // namespace dsva
