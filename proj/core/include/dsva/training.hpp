#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "dsva/ac.hpp"
#include "dsva/config.hpp"
#include "dsva/data.hpp"
#include "dsva/encoder.hpp"
#include "dsva/inference.hpp"
#include "dsva/types.hpp"
#include "dsva/vam.hpp"

namespace dsva {

// Cross-entropy over compatibility scores: -log softmax(scores)[true].
double semantic_compatibility_loss(const Vec& scores, int true_index);
// d loss / d scores = softmax(scores) - onehot(true).
Vec semantic_compatibility_grad(const Vec& scores, int true_index);

// Euclidean distance ||f - r||_2 (the printed form, not its square).
double semantic_regression_loss(const Vec& predicted, const Vec& target);
// Subgradient (f - r)/||f - r||; zero at f == r.
Vec semantic_regression_grad(const Vec& predicted, const Vec& target);

// One combined objective evaluation: forward the image, build the
// attention-concentrated crop, forward the crop, and sum
//   L_SC(x) + lambda L_MSE(x) + L_SC(x^) + lambda L_MSE(x^).
// The crop is a stop-gradient image transformation; gradients flow
// through both forward passes but not through the box selection.
struct TotalLossResult {
  double loss = 0.0;
  double sc_image = 0.0;
  double mse_image = 0.0;
  double sc_crop = 0.0;
  double mse_crop = 0.0;
  CropBox box;
  EncoderGrads encoder_grads;
  Mat prototype_grads;
};

// seen_rows: one (already normalized) class row per seen class;
// label_index selects the true row. backbone_grads=false skips the
// encoder backward pass (warm-up trains prototypes only).
TotalLossResult total_loss(const ImageTensor& image, int label_index,
                           const EncoderParams& params, const PrototypeBank& bank,
                           const Mat& seen_rows, double lambda, bool backbone_grads = true);

// Adam with bias correction. Moments live in structures shaped like the
// parameters; a fresh state starts at step 0 and a zero-gradient step is
// an exact no-op.
struct AdamState {
  EncoderGrads encoder_m, encoder_v;
  Mat proto_m, proto_v;
  long step = 0;

  static AdamState zeros_like(const EncoderParams& params, const PrototypeBank& bank);
};

struct AdamConfig {
  double beta1 = 0.5;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

void adam_step_prototypes(PrototypeBank& bank, const Mat& grad, AdamState& state, double lr,
                          const AdamConfig& adam);
void adam_step_all(EncoderParams& params, PrototypeBank& bank, const EncoderGrads& enc_grad,
                   const Mat& proto_grad, AdamState& state, double lr, const AdamConfig& adam);

enum class TrainPhase { Warmup, Main };

struct TrainState {
  EncoderParams encoder;
  PrototypeBank prototypes;
  int epoch = 0;
  TrainPhase phase = TrainPhase::Warmup;
};

struct EpochMetrics {
  int epoch = 0;
  TrainPhase phase = TrainPhase::Warmup;
  double mean_loss = 0.0;
  EvalReport eval;

  std::string to_json_line() const;
};

// Two-phase schedule: warmup_epochs optimizing only the prototype bank at
// warmup_lr with the backbone fixed, then main_epochs optimizing
// everything at main_lr (or prototypes only under freeze_backbone). Each
// epoch appends metrics and writes a checkpoint under out_dir.
TrainState train(const DatasetIndex& index, const SplitSpec& split,
                 const ClassAttributeMatrix& matrix, const Config& config,
                 const std::filesystem::path& out_dir,
                 std::vector<EpochMetrics>* metrics_log = nullptr,
                 std::ostream* progress = nullptr,
                 const EncoderParams* init_encoder = nullptr);

}  // namespace dsva
