#pragma once

#include <vector>

#include "dsva/config.hpp"
#include "dsva/rng.hpp"
#include "dsva/types.hpp"

namespace dsva {

// Patch-grid vision transformer. No class token: the grid feeds the
// attribute mapping directly, so exactly N = k*k tokens flow through.
// No dropout anywhere; encode is a pure function of (image, params).
struct EncoderParams {
  struct Layer {
    Vec ln1_gain, ln1_bias;  // D
    Mat w_qkv;               // D x 3*s*d, column blocks [Q heads | K heads | V heads]
    Vec b_qkv;
    Mat w_msa;               // s*d x D
    Vec b_msa;
    Vec ln2_gain, ln2_bias;  // D
    Mat w_mlp1;              // D x 4D
    Vec b_mlp1;
    Mat w_mlp2;              // 4D x D
    Vec b_mlp2;
  };

  Mat patch_weight;  // patch_dim x D (the linear embedding f_0)
  Vec patch_bias;    // D
  Mat pos_embed;     // N x D, learned additive positions
  std::vector<Layer> layers;

  int heads = 1;
  int head_dim = 1;  // D_qkv per head
  int grid_side = 1;

  int dim() const { return static_cast<int>(patch_weight.cols()); }
  int patch_dim() const { return static_cast<int>(patch_weight.rows()); }
  int num_patches() const { return grid_side * grid_side; }

  void validate() const;

  // Truncated normal (std 0.02) for projections and positions, zero biases,
  // unit layer-norm gains.
  static EncoderParams init(const Config& config, Rng& rng);
};

// Splits the image into a k x k grid, each patch flattened in row-major
// pixel order with the channel index fastest. Patch n covers grid row n/k,
// column n%k.
std::vector<Vec> patchify(const ImageTensor& image, int k);

// Z0 rows: f_0(patch_n) + pos_embed row n.
PatchGrid embed_patches(const std::vector<Vec>& patches, const EncoderParams& params);

// softmax(Q K^T / sqrt(D_qkv)) V. Optionally yields the attention rows.
Mat self_attention(const Mat& query, const Mat& key, const Mat& value,
                   Mat* attention_out = nullptr);

// Per-head self-attention, concatenated and projected by w_msa.
Mat mhsa(const Mat& input, const EncoderParams::Layer& layer, int heads, int head_dim,
         std::vector<Mat>* attention_out = nullptr);

// Everything the backward pass needs from one forward run.
struct EncodeTape {
  Mat patches;  // N x patch_dim
  Mat z0;
  struct LayerTape {
    Mat input;             // Z^{l-1}
    Mat ln1_xhat;          // normalized input before gain/bias
    Vec ln1_inv_std;       // per row
    Mat qkv;               // N x 3*s*d
    std::vector<Mat> attention;  // per head, N x N rows summing to 1
    Mat sa_concat;         // N x s*d
    Mat after_residual1;   // Z'
    Mat ln2_xhat;
    Vec ln2_inv_std;
    Mat mlp_pre;           // N x 4D, before GELU
    Mat mlp_hidden;        // N x 4D, after GELU
    Mat output;            // Z^l
  };
  std::vector<LayerTape> layers;
};

// Applies L pre-norm blocks: Z' = MHSA(LN(Z)) + Z; Z = MLP(LN(Z')) + Z'.
PatchGrid encode(const ImageTensor& image, const EncoderParams& params);
PatchGrid encode_with_tape(const ImageTensor& image, const EncoderParams& params,
                           EncodeTape& tape);

// Gradients shaped like EncoderParams.
struct EncoderGrads {
  Mat patch_weight;
  Vec patch_bias;
  Mat pos_embed;
  std::vector<EncoderParams::Layer> layers;

  static EncoderGrads zeros_like(const EncoderParams& params);
  void add(const EncoderGrads& other, double scale = 1.0);
  void scale(double factor);
};

// Accumulates d(loss)/d(params) into grads given d(loss)/d(Z^L).
void encode_backward(const EncodeTape& tape, const EncoderParams& params,
                     const Mat& d_output, EncoderGrads& grads);

double gelu(double x);
double gelu_grad(double x);

inline constexpr double kLayerNormEpsilon = 1e-5;

}  // namespace dsva
