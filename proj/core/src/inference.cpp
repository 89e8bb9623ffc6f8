#include "dsva/inference.hpp"

#include <algorithm>

#include <nlohmann/json.hpp>

#include "dsva/encoder.hpp"
#include "dsva/errors.hpp"

namespace dsva {

int ScoreMatrix::class_index(const std::string& name) const {
  for (std::size_t i = 0; i < class_names.size(); ++i)
    if (class_names[i] == name) return static_cast<int>(i);
  throw InputError("label '" + name + "' is not among the candidate classes");
}

void ScoreMatrix::validate() const {
  if (scores.cols() != static_cast<Eigen::Index>(class_names.size()) ||
      class_names.size() != seen_flags.size())
    throw ShapeError("score matrix columns, class names and flags disagree");
  if (!scores.allFinite()) throw ValidationError("score matrix has non-finite entries");
}

int zsl_predict(const Vec& unseen_scores) {
  if (unseen_scores.size() == 0) throw InputError("zsl_predict: empty candidate set");
  int best = 0;
  for (int i = 1; i < unseen_scores.size(); ++i)
    if (unseen_scores(i) > unseen_scores(best)) best = i;
  return best;
}

int gzsl_predict(const Vec& scores, const std::vector<char>& seen_flags, double gamma) {
  if (scores.size() == 0) throw InputError("gzsl_predict: empty candidate set");
  if (static_cast<std::size_t>(scores.size()) != seen_flags.size())
    throw ShapeError("gzsl_predict: scores and flags disagree");
  if (gamma < 0) throw InputError("gzsl_predict: gamma must be >= 0");
  int best = 0;
  double best_value = scores(0) - (seen_flags[0] ? gamma : 0.0);
  for (int i = 1; i < scores.size(); ++i) {
    const double value = scores(i) - (seen_flags[static_cast<std::size_t>(i)] ? gamma : 0.0);
    if (value > best_value) {
      best_value = value;
      best = i;
    }
  }
  return best;
}

double harmonic_mean(double seen_acc, double unseen_acc) {
  if (seen_acc == 0.0 && unseen_acc == 0.0) return 0.0;
  return 2.0 * seen_acc * unseen_acc / (seen_acc + unseen_acc);
}

std::string EvalReport::to_json() const {
  nlohmann::json doc;
  doc["zsl_top1"] = zsl_top1;
  doc["gzsl_seen"] = gzsl_seen;
  doc["gzsl_unseen"] = gzsl_unseen;
  doc["harmonic"] = harmonic;
  doc["gamma"] = gamma;
  doc["zsl_accuracy_mode"] = to_string(zsl_mode);
  doc["gzsl_accuracy_mode"] = to_string(gzsl_mode);
  doc["per_class"] = per_class;
  return doc.dump(2) + "\n";
}

EvalReport evaluate(const ScoreMatrix& scores, const std::vector<std::string>& true_labels,
                    double gamma, AccuracyMode zsl_mode, AccuracyMode gzsl_mode) {
  scores.validate();
  if (static_cast<Eigen::Index>(true_labels.size()) != scores.scores.rows())
    throw ShapeError("one label per score row required");
  if (gamma < 0) throw InputError("evaluate: gamma must be >= 0");

  // column indices of unseen candidates, in matrix order
  std::vector<int> unseen_columns;
  for (std::size_t c = 0; c < scores.seen_flags.size(); ++c)
    if (!scores.seen_flags[c]) unseen_columns.push_back(static_cast<int>(c));

  struct Tally {
    long correct = 0;
    long total = 0;
  };
  std::map<std::string, Tally> zsl_tally;   // unseen-label rows only
  std::map<std::string, Tally> gzsl_tally;  // every row

  for (Eigen::Index r = 0; r < scores.scores.rows(); ++r) {
    const std::string& label = true_labels[static_cast<std::size_t>(r)];
    const int label_col = scores.class_index(label);  // throws when unknown
    const bool label_seen = scores.seen_flags[static_cast<std::size_t>(label_col)] != 0;

    // GZSL: calibrated argmax over every candidate
    const int gzsl_col =
        gzsl_predict(scores.scores.row(r).transpose(), scores.seen_flags, gamma);
    auto& gt = gzsl_tally[label];
    gt.total += 1;
    if (gzsl_col == label_col) gt.correct += 1;

    // ZSL: only unseen-label images, candidates restricted to unseen classes
    if (!label_seen && !unseen_columns.empty()) {
      Vec row(static_cast<Eigen::Index>(unseen_columns.size()));
      for (std::size_t i = 0; i < unseen_columns.size(); ++i)
        row(static_cast<Eigen::Index>(i)) = scores.scores(r, unseen_columns[i]);
      const int pick = unseen_columns[static_cast<std::size_t>(zsl_predict(row))];
      auto& zt = zsl_tally[label];
      zt.total += 1;
      if (pick == label_col) zt.correct += 1;
    }
  }

  auto accuracy = [](const std::map<std::string, Tally>& tally, AccuracyMode mode) {
    long correct = 0, total = 0;
    double class_sum = 0.0;
    int class_count = 0;
    for (const auto& [cls, t] : tally) {
      (void)cls;
      if (t.total == 0) continue;
      correct += t.correct;
      total += t.total;
      class_sum += static_cast<double>(t.correct) / static_cast<double>(t.total);
      class_count += 1;
    }
    if (total == 0) return 0.0;
    return mode == AccuracyMode::Overall ? static_cast<double>(correct) / total
                                         : class_sum / class_count;
  };

  EvalReport report;
  report.gamma = gamma;
  report.zsl_mode = zsl_mode;
  report.gzsl_mode = gzsl_mode;
  report.zsl_top1 = accuracy(zsl_tally, zsl_mode);

  std::map<std::string, Tally> seen_rows, unseen_rows;
  for (const auto& [cls, t] : gzsl_tally) {
    const bool label_seen = scores.seen_flags[static_cast<std::size_t>(scores.class_index(cls))];
    (label_seen ? seen_rows : unseen_rows)[cls] = t;
    report.per_class[cls] = t.total ? static_cast<double>(t.correct) / t.total : 0.0;
  }
  report.gzsl_seen = accuracy(seen_rows, gzsl_mode);
  report.gzsl_unseen = accuracy(unseen_rows, gzsl_mode);
  report.harmonic = harmonic_mean(report.gzsl_seen, report.gzsl_unseen);
  return report;
}

SweepResult calibration_sweep(const ScoreMatrix& scores,
                              const std::vector<std::string>& true_labels,
                              const std::vector<double>& gamma_grid, AccuracyMode zsl_mode,
                              AccuracyMode gzsl_mode) {
  if (gamma_grid.empty()) throw InputError("calibration_sweep: empty gamma grid");
  for (std::size_t i = 0; i < gamma_grid.size(); ++i) {
    if (gamma_grid[i] < 0) throw InputError("calibration_sweep: gamma must be >= 0");
    if (i > 0 && gamma_grid[i] < gamma_grid[i - 1])
      throw InputError("calibration_sweep: gamma grid must be sorted ascending");
  }
  SweepResult result;
  for (double gamma : gamma_grid)
    result.reports.push_back(evaluate(scores, true_labels, gamma, zsl_mode, gzsl_mode));
  for (std::size_t i = 1; i < result.reports.size(); ++i)
    if (result.reports[i].harmonic > result.reports[result.best_index].harmonic)
      result.best_index = i;
  return result;
}

ScoredDataset score_test_images(const DatasetIndex& index, const SplitSpec& split,
                                const ClassAttributeMatrix& classes,
                                const EncoderParams& encoder, const PrototypeBank& bank) {
  ScoredDataset out;
  out.scores.class_names = classes.class_names;
  out.scores.seen_flags.resize(classes.class_names.size());
  for (std::size_t c = 0; c < classes.class_names.size(); ++c) {
    const auto& name = classes.class_names[c];
    if (!split.is_seen(name) && !split.is_unseen(name))
      throw ValidationError("class '" + name + "' in the matrix is absent from the split");
    out.scores.seen_flags[c] = split.is_seen(name) ? 1 : 0;
  }

  for (const auto& [cls, ids] : split.test_images)
    for (const auto& id : ids) {
      out.image_ids.push_back(id);
      out.labels.push_back(cls);
    }

  const Eigen::Index rows = static_cast<Eigen::Index>(out.image_ids.size());
  out.scores.scores.resize(rows, static_cast<Eigen::Index>(classes.class_names.size()));
  out.attribute_values.resize(rows, classes.num_attributes());
  for (Eigen::Index r = 0; r < rows; ++r) {
    const ImageTensor image = load_image(index, out.image_ids[static_cast<std::size_t>(r)]);
    const PatchGrid grid = encode(image, encoder);
    const AttributePrediction pred = predict_attributes(attention_maps(grid, bank));
    out.attribute_values.row(r) = pred.values.transpose();
    out.scores.scores.row(r) =
        compatibility_scores_all(pred.values, classes.values).transpose();
  }
  return out;
}

}  // namespace dsva
