#include "dsva/training.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "dsva/errors.hpp"
#include "dsva/ioutil.hpp"
#include "dsva/rng.hpp"

namespace dsva {
namespace {

constexpr double kNormFloor = 1e-12;

// Applies f to every (param, grad, m, v) tensor quadruple.
template <typename F>
void for_each_encoder_tensor(EncoderParams& p, const EncoderGrads& g, EncoderGrads& m,
                             EncoderGrads& v, F&& f) {
  f(p.patch_weight, g.patch_weight, m.patch_weight, v.patch_weight);
  f(p.patch_bias, g.patch_bias, m.patch_bias, v.patch_bias);
  f(p.pos_embed, g.pos_embed, m.pos_embed, v.pos_embed);
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    auto& pl = p.layers[l];
    const auto& gl = g.layers[l];
    auto& ml = m.layers[l];
    auto& vl = v.layers[l];
    f(pl.ln1_gain, gl.ln1_gain, ml.ln1_gain, vl.ln1_gain);
    f(pl.ln1_bias, gl.ln1_bias, ml.ln1_bias, vl.ln1_bias);
    f(pl.w_qkv, gl.w_qkv, ml.w_qkv, vl.w_qkv);
    f(pl.b_qkv, gl.b_qkv, ml.b_qkv, vl.b_qkv);
    f(pl.w_msa, gl.w_msa, ml.w_msa, vl.w_msa);
    f(pl.b_msa, gl.b_msa, ml.b_msa, vl.b_msa);
    f(pl.ln2_gain, gl.ln2_gain, ml.ln2_gain, vl.ln2_gain);
    f(pl.ln2_bias, gl.ln2_bias, ml.ln2_bias, vl.ln2_bias);
    f(pl.w_mlp1, gl.w_mlp1, ml.w_mlp1, vl.w_mlp1);
    f(pl.b_mlp1, gl.b_mlp1, ml.b_mlp1, vl.b_mlp1);
    f(pl.w_mlp2, gl.w_mlp2, ml.w_mlp2, vl.w_mlp2);
    f(pl.b_mlp2, gl.b_mlp2, ml.b_mlp2, vl.b_mlp2);
  }
}

template <typename T>
void adam_update(T& param, const T& grad, T& m, T& v, double lr, const AdamConfig& adam,
                 long step) {
  m = adam.beta1 * m + (1.0 - adam.beta1) * grad;
  v = (adam.beta2 * v.array() + (1.0 - adam.beta2) * grad.array().square()).matrix();
  const double bc1 = 1.0 - std::pow(adam.beta1, static_cast<double>(step));
  const double bc2 = 1.0 - std::pow(adam.beta2, static_cast<double>(step));
  param.array() -= lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + adam.epsilon);
}

struct ForwardPass {
  EncodeTape tape;
  PatchGrid grid;
  AttentionMapStack maps;
  AttributePrediction pred;
  Vec scores;
  double sc = 0.0;
  double mse = 0.0;
};

ForwardPass forward_one(const ImageTensor& image, const EncoderParams& params,
                        const PrototypeBank& bank, const Mat& seen_rows, int label_index) {
  ForwardPass pass;
  pass.grid = encode_with_tape(image, params, pass.tape);
  pass.maps = attention_maps(pass.grid, bank);
  pass.pred = predict_attributes(pass.maps);
  pass.scores = seen_rows * pass.pred.values;
  pass.sc = semantic_compatibility_loss(pass.scores, label_index);
  pass.mse = semantic_regression_loss(pass.pred.values, seen_rows.row(label_index).transpose());
  return pass;
}

void backward_one(const ForwardPass& pass, const EncoderParams& params,
                  const PrototypeBank& bank, const Mat& seen_rows, int label_index,
                  double lambda, bool backbone_grads, EncoderGrads& enc_grads,
                  Mat& proto_grads) {
  const Vec d_scores = semantic_compatibility_grad(pass.scores, label_index);
  Vec d_values = seen_rows.transpose() * d_scores;
  d_values += lambda *
              semantic_regression_grad(pass.pred.values, seen_rows.row(label_index).transpose());

  Mat d_embeddings = Mat::Zero(pass.grid.embeddings.rows(), pass.grid.embeddings.cols());
  for (int i = 0; i < pass.pred.values.size(); ++i) {
    const int n = pass.pred.argmax_patch[static_cast<std::size_t>(i)];
    proto_grads.row(i) += d_values(i) * pass.grid.embeddings.row(n);
    if (backbone_grads) d_embeddings.row(n) += d_values(i) * bank.prototypes.row(i);
  }
  if (backbone_grads) encode_backward(pass.tape, params, d_embeddings, enc_grads);
}

std::string phase_name(TrainPhase phase) {
  return phase == TrainPhase::Warmup ? "warmup" : "main";
}

}  // namespace

double semantic_compatibility_loss(const Vec& scores, int true_index) {
  if (scores.size() == 0) throw InputError("semantic_compatibility_loss: empty scores");
  if (true_index < 0 || true_index >= scores.size())
    throw InputError("semantic_compatibility_loss: label index out of range");
  const double m = scores.maxCoeff();
  const double lse = m + std::log((scores.array() - m).exp().sum());
  return lse - scores(true_index);
}

Vec semantic_compatibility_grad(const Vec& scores, int true_index) {
  if (scores.size() == 0) throw InputError("semantic_compatibility_grad: empty scores");
  if (true_index < 0 || true_index >= scores.size())
    throw InputError("semantic_compatibility_grad: label index out of range");
  const double m = scores.maxCoeff();
  Vec soft = (scores.array() - m).exp();
  soft /= soft.sum();
  soft(true_index) -= 1.0;
  return soft;
}

double semantic_regression_loss(const Vec& predicted, const Vec& target) {
  if (predicted.size() != target.size())
    throw ShapeError("semantic_regression_loss: length mismatch");
  return (predicted - target).norm();
}

Vec semantic_regression_grad(const Vec& predicted, const Vec& target) {
  if (predicted.size() != target.size())
    throw ShapeError("semantic_regression_grad: length mismatch");
  const Vec diff = predicted - target;
  const double n = diff.norm();
  if (n < kNormFloor) return Vec::Zero(predicted.size());
  return diff / n;
}

TotalLossResult total_loss(const ImageTensor& image, int label_index,
                           const EncoderParams& params, const PrototypeBank& bank,
                           const Mat& seen_rows, double lambda, bool backbone_grads) {
  if (lambda < 0) throw InputError("total_loss: lambda must be >= 0");
  if (seen_rows.cols() != bank.num_attributes())
    throw ShapeError("total_loss: class rows and prototype bank disagree on N_a");

  TotalLossResult result;
  result.encoder_grads = EncoderGrads::zeros_like(params);
  result.prototype_grads = Mat::Zero(bank.prototypes.rows(), bank.prototypes.cols());

  const ForwardPass pass_x = forward_one(image, params, bank, seen_rows, label_index);
  result.sc_image = pass_x.sc;
  result.mse_image = pass_x.mse;

  // attention concentration on the first pass picks the crop
  const Mat mean_attn = mean_attention(pass_x.maps);
  const ConcentrationMask mask = concentration_mask(mean_attn);
  result.box = crop_box(mask);
  const ImageTensor crop = crop_and_resize(image, result.box, params.grid_side);

  const ForwardPass pass_c = forward_one(crop, params, bank, seen_rows, label_index);
  result.sc_crop = pass_c.sc;
  result.mse_crop = pass_c.mse;

  result.loss = pass_x.sc + lambda * pass_x.mse + pass_c.sc + lambda * pass_c.mse;

  backward_one(pass_x, params, bank, seen_rows, label_index, lambda, backbone_grads,
               result.encoder_grads, result.prototype_grads);
  backward_one(pass_c, params, bank, seen_rows, label_index, lambda, backbone_grads,
               result.encoder_grads, result.prototype_grads);
  return result;
}

AdamState AdamState::zeros_like(const EncoderParams& params, const PrototypeBank& bank) {
  AdamState state;
  state.encoder_m = EncoderGrads::zeros_like(params);
  state.encoder_v = EncoderGrads::zeros_like(params);
  state.proto_m = Mat::Zero(bank.prototypes.rows(), bank.prototypes.cols());
  state.proto_v = Mat::Zero(bank.prototypes.rows(), bank.prototypes.cols());
  return state;
}

void adam_step_prototypes(PrototypeBank& bank, const Mat& grad, AdamState& state, double lr,
                          const AdamConfig& adam) {
  state.step += 1;
  adam_update(bank.prototypes, grad, state.proto_m, state.proto_v, lr, adam, state.step);
}

void adam_step_all(EncoderParams& params, PrototypeBank& bank, const EncoderGrads& enc_grad,
                   const Mat& proto_grad, AdamState& state, double lr, const AdamConfig& adam) {
  state.step += 1;
  for_each_encoder_tensor(params, enc_grad, state.encoder_m, state.encoder_v,
                          [&](auto& p, const auto& g, auto& m, auto& v) {
                            adam_update(p, g, m, v, lr, adam, state.step);
                          });
  adam_update(bank.prototypes, proto_grad, state.proto_m, state.proto_v, lr, adam, state.step);
}

std::string EpochMetrics::to_json_line() const {
  nlohmann::json doc;
  doc["epoch"] = epoch;
  doc["phase"] = phase_name(phase);
  doc["mean_loss"] = mean_loss;
  doc["zsl_top1"] = eval.zsl_top1;
  doc["gzsl_seen"] = eval.gzsl_seen;
  doc["gzsl_unseen"] = eval.gzsl_unseen;
  doc["harmonic"] = eval.harmonic;
  return doc.dump();
}

TrainState train(const DatasetIndex& index, const SplitSpec& split,
                 const ClassAttributeMatrix& matrix, const Config& config,
                 const std::filesystem::path& out_dir, std::vector<EpochMetrics>* metrics_log,
                 std::ostream* progress, const EncoderParams* init_encoder) {
  config.validate();
  split.validate();

  // every training image must come from a seen class
  for (const auto& [cls, ids] : split.train_images) {
    (void)ids;
    if (!split.is_seen(cls))
      throw ValidationError("training images from non-seen class '" + cls + "'");
  }

  const ClassAttributeMatrix normalized = normalize_class_matrix(matrix, config.class_norm);

  // seen-class score rows, softmax axis for the compatibility loss
  std::vector<std::string> seen = split.seen_classes;
  Mat seen_rows(static_cast<Eigen::Index>(seen.size()), normalized.num_attributes());
  for (std::size_t c = 0; c < seen.size(); ++c)
    seen_rows.row(static_cast<Eigen::Index>(c)) =
        normalized.values.row(normalized.index_of(seen[c]));

  Rng rng(config.seed);
  Rng init_rng = rng.child(0);
  TrainState state;
  state.encoder = EncoderParams::init(config, init_rng);
  state.prototypes = PrototypeBank::init(normalized.num_attributes(), config.dim, init_rng);
  if (init_encoder) {
    init_encoder->validate();
    state.encoder = *init_encoder;
  }

  // flat training list, deterministic base order
  struct Sample {
    std::string id;
    int label;
  };
  std::vector<Sample> samples;
  for (std::size_t c = 0; c < seen.size(); ++c) {
    const auto it = split.train_images.find(seen[c]);
    if (it == split.train_images.end()) continue;
    for (const auto& id : it->second) samples.push_back({id, static_cast<int>(c)});
  }

  std::filesystem::create_directories(out_dir);
  const int total_epochs = config.warmup_epochs + config.main_epochs;
  std::string metrics_text;

  AdamState opt = AdamState::zeros_like(state.encoder, state.prototypes);
  const AdamConfig adam{config.beta1, config.beta2, 1e-8};
  TrainPhase current_phase = TrainPhase::Warmup;

  for (int epoch = 0; epoch < total_epochs; ++epoch) {
    const TrainPhase phase =
        epoch < config.warmup_epochs ? TrainPhase::Warmup : TrainPhase::Main;
    if (epoch == config.warmup_epochs && config.warmup_epochs > 0) {
      // fresh moments when the schedule switches phases
      opt = AdamState::zeros_like(state.encoder, state.prototypes);
    }
    current_phase = phase;
    const double lr = phase == TrainPhase::Warmup ? config.warmup_lr : config.main_lr;
    const bool train_backbone = phase == TrainPhase::Main && !config.freeze_backbone;

    std::vector<Sample> order = samples;
    Rng epoch_rng = rng.child(100 + static_cast<std::uint64_t>(epoch));
    epoch_rng.shuffle(order);

    double loss_sum = 0.0;
    std::size_t batch_start = 0;
    while (batch_start < order.size()) {
      const std::size_t batch_end =
          std::min(order.size(), batch_start + static_cast<std::size_t>(config.batch_size));
      EncoderGrads enc_grads = EncoderGrads::zeros_like(state.encoder);
      Mat proto_grads =
          Mat::Zero(state.prototypes.prototypes.rows(), state.prototypes.prototypes.cols());
      const double inv = 1.0 / static_cast<double>(batch_end - batch_start);

      for (std::size_t i = batch_start; i < batch_end; ++i) {
        const ImageTensor image = load_image(index, order[i].id);
        TotalLossResult r = total_loss(image, order[i].label, state.encoder, state.prototypes,
                                       seen_rows, config.lambda_scale, train_backbone);
        loss_sum += r.loss;
        proto_grads += inv * r.prototype_grads;
        if (train_backbone) enc_grads.add(r.encoder_grads, inv);
      }

      if (train_backbone)
        adam_step_all(state.encoder, state.prototypes, enc_grads, proto_grads, opt, lr, adam);
      else
        adam_step_prototypes(state.prototypes, proto_grads, opt, lr, adam);
      batch_start = batch_end;
    }

    EpochMetrics metrics;
    metrics.epoch = epoch;
    metrics.phase = phase;
    metrics.mean_loss = samples.empty() ? 0.0 : loss_sum / static_cast<double>(samples.size());
    const ScoredDataset scored =
        score_test_images(index, split, normalized, state.encoder, state.prototypes);
    metrics.eval = evaluate(scored.scores, scored.labels, config.gamma_calibration,
                            config.zsl_accuracy, config.gzsl_accuracy);
    if (metrics_log) metrics_log->push_back(metrics);
    metrics_text += metrics.to_json_line() + "\n";
    write_file_atomic(out_dir / "metrics.jsonl", metrics_text);
    if (progress) (*progress) << metrics.to_json_line() << std::endl;

    char name[32];
    std::snprintf(name, sizeof name, "ckpt_epoch_%03d.dsva", epoch);
    save_checkpoint(out_dir / name, state.encoder, state.prototypes, config.image_size);
    state.epoch = epoch + 1;
  }

  state.phase = current_phase;
  save_checkpoint(out_dir / "final.dsva", state.encoder, state.prototypes, config.image_size);
  return state;
}

}  // namespace dsva
