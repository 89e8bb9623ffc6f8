#include "dsva/encoder.hpp"

#include <cmath>

#include "dsva/errors.hpp"

namespace dsva {
namespace {

constexpr double kInitStd = 0.02;

Mat truncated_normal_matrix(Eigen::Index rows, Eigen::Index cols, double stddev, Rng& rng) {
  Mat m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = rng.truncated_normal(stddev);
  return m;
}

// Row-wise layer norm. Returns y; fills xhat and inv_std for the tape.
Mat layer_norm(const Mat& x, const Vec& gain, const Vec& bias, Mat& xhat, Vec& inv_std) {
  const Eigen::Index n = x.rows(), d = x.cols();
  xhat.resize(n, d);
  inv_std.resize(n);
  Mat y(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double mean = x.row(i).mean();
    const double var = (x.row(i).array() - mean).square().mean();
    const double inv = 1.0 / std::sqrt(var + kLayerNormEpsilon);
    inv_std(i) = inv;
    xhat.row(i) = ((x.row(i).array() - mean) * inv).matrix();
    y.row(i) = xhat.row(i).cwiseProduct(gain.transpose()) + bias.transpose();
  }
  return y;
}

// d(loss)/dx for layer_norm given d(loss)/dy.
Mat layer_norm_backward(const Mat& dy, const Mat& xhat, const Vec& inv_std, const Vec& gain,
                        Vec& d_gain, Vec& d_bias) {
  const Eigen::Index n = dy.rows(), d = dy.cols();
  Mat dx(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::RowVectorXd dxhat = dy.row(i).cwiseProduct(gain.transpose());
    const double mean_dxhat = dxhat.mean();
    const double mean_dxhat_xhat = dxhat.cwiseProduct(xhat.row(i)).mean();
    dx.row(i) = (inv_std(i) *
                 (dxhat.array() - mean_dxhat - xhat.row(i).array() * mean_dxhat_xhat))
                    .matrix();
    d_gain += dy.row(i).cwiseProduct(xhat.row(i)).transpose();
    d_bias += dy.row(i).transpose();
  }
  return dx;
}

Mat softmax_rows(const Mat& logits) {
  Mat out(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double m = logits.row(i).maxCoeff();
    out.row(i) = (logits.row(i).array() - m).exp().matrix();
    out.row(i) /= out.row(i).sum();
  }
  return out;
}

}  // namespace

double gelu(double x) {
  return 0.5 * x * (1.0 + std::erf(x / std::sqrt(2.0)));
}

double gelu_grad(double x) {
  const double phi = std::exp(-0.5 * x * x) / std::sqrt(2.0 * 3.14159265358979323846);
  const double cdf = 0.5 * (1.0 + std::erf(x / std::sqrt(2.0)));
  return cdf + x * phi;
}

void EncoderParams::validate() const {
  const int d = dim();
  if (patch_bias.size() != d) throw ShapeError("patch_bias size mismatch");
  if (pos_embed.rows() != num_patches() || pos_embed.cols() != d)
    throw ShapeError("pos_embed must be N x D");
  const Eigen::Index qkv_cols = static_cast<Eigen::Index>(3) * heads * head_dim;
  for (const auto& layer : layers) {
    if (layer.w_qkv.rows() != d || layer.w_qkv.cols() != qkv_cols)
      throw ShapeError("w_qkv must be D x 3*s*d");
    if (layer.b_qkv.size() != qkv_cols) throw ShapeError("b_qkv size mismatch");
    if (layer.w_msa.rows() != static_cast<Eigen::Index>(heads) * head_dim ||
        layer.w_msa.cols() != d)
      throw ShapeError("w_msa must be s*d x D");
    if (layer.b_msa.size() != d) throw ShapeError("b_msa size mismatch");
    if (layer.w_mlp1.rows() != d || layer.w_mlp1.cols() != 4 * d)
      throw ShapeError("w_mlp1 must be D x 4D");
    if (layer.b_mlp1.size() != 4 * d) throw ShapeError("b_mlp1 size mismatch");
    if (layer.w_mlp2.rows() != 4 * d || layer.w_mlp2.cols() != d)
      throw ShapeError("w_mlp2 must be 4D x D");
    if (layer.b_mlp2.size() != d) throw ShapeError("b_mlp2 size mismatch");
    if (layer.ln1_gain.size() != d || layer.ln1_bias.size() != d ||
        layer.ln2_gain.size() != d || layer.ln2_bias.size() != d)
      throw ShapeError("layer norm parameter size mismatch");
  }
  if (!patch_weight.allFinite() || !pos_embed.allFinite())
    throw ValidationError("encoder parameters contain non-finite values");
}

EncoderParams EncoderParams::init(const Config& config, Rng& rng) {
  config.validate();
  EncoderParams params;
  params.heads = config.heads;
  params.head_dim = config.qkv_dim();
  params.grid_side = config.grid_side;

  const int d = config.dim;
  const int pd = config.patch_dim();
  const int n = config.num_patches();
  const int sd = params.heads * params.head_dim;

  params.patch_weight = truncated_normal_matrix(pd, d, kInitStd, rng);
  params.patch_bias = Vec::Zero(d);
  params.pos_embed = truncated_normal_matrix(n, d, kInitStd, rng);
  params.layers.resize(config.layers);
  for (auto& layer : params.layers) {
    layer.ln1_gain = Vec::Ones(d);
    layer.ln1_bias = Vec::Zero(d);
    layer.w_qkv = truncated_normal_matrix(d, 3 * sd, kInitStd, rng);
    layer.b_qkv = Vec::Zero(3 * sd);
    layer.w_msa = truncated_normal_matrix(sd, d, kInitStd, rng);
    layer.b_msa = Vec::Zero(d);
    layer.ln2_gain = Vec::Ones(d);
    layer.ln2_bias = Vec::Zero(d);
    layer.w_mlp1 = truncated_normal_matrix(d, 4 * d, kInitStd, rng);
    layer.b_mlp1 = Vec::Zero(4 * d);
    layer.w_mlp2 = truncated_normal_matrix(4 * d, d, kInitStd, rng);
    layer.b_mlp2 = Vec::Zero(d);
  }
  return params;
}

std::vector<Vec> patchify(const ImageTensor& image, int k) {
  if (k < 1) throw ShapeError("grid side must be >= 1");
  if (image.height % k != 0 || image.width % k != 0)
    throw ShapeError("image " + std::to_string(image.height) + "x" + std::to_string(image.width) +
                     " not divisible into a " + std::to_string(k) + "x" + std::to_string(k) +
                     " grid");
  const int ph = image.height / k;
  const int pw = image.width / k;
  const int c = image.channels;
  std::vector<Vec> patches;
  patches.reserve(static_cast<std::size_t>(k) * k);
  for (int gr = 0; gr < k; ++gr) {
    for (int gc = 0; gc < k; ++gc) {
      Vec patch(static_cast<Eigen::Index>(ph) * pw * c);
      Eigen::Index idx = 0;
      for (int y = 0; y < ph; ++y)
        for (int x = 0; x < pw; ++x)
          for (int ch = 0; ch < c; ++ch)
            patch(idx++) = image.at(gr * ph + y, gc * pw + x, ch);
      patches.push_back(std::move(patch));
    }
  }
  return patches;
}

PatchGrid embed_patches(const std::vector<Vec>& patches, const EncoderParams& params) {
  const int n = params.num_patches();
  if (static_cast<int>(patches.size()) != n)
    throw ShapeError("expected " + std::to_string(n) + " patches, got " +
                     std::to_string(patches.size()));
  PatchGrid grid;
  grid.k = params.grid_side;
  grid.dim = params.dim();
  grid.embeddings.resize(n, grid.dim);
  for (int i = 0; i < n; ++i) {
    if (patches[i].size() != params.patch_dim())
      throw ShapeError("patch " + std::to_string(i) + " has dimension " +
                       std::to_string(patches[i].size()) + ", expected " +
                       std::to_string(params.patch_dim()));
    grid.embeddings.row(i) = (params.patch_weight.transpose() * patches[i] + params.patch_bias)
                                 .transpose() +
                             params.pos_embed.row(i);
  }
  return grid;
}

Mat self_attention(const Mat& query, const Mat& key, const Mat& value, Mat* attention_out) {
  if (query.cols() != key.cols() || key.rows() != value.rows())
    throw ShapeError("self_attention operand shapes disagree");
  const double scale = 1.0 / std::sqrt(static_cast<double>(query.cols()));
  const Mat attn = softmax_rows(query * key.transpose() * scale);
  if (attention_out) *attention_out = attn;
  return attn * value;
}

Mat mhsa(const Mat& input, const EncoderParams::Layer& layer, int heads, int head_dim,
         std::vector<Mat>* attention_out) {
  const Eigen::Index n = input.rows();
  const Eigen::Index sd = static_cast<Eigen::Index>(heads) * head_dim;
  if (input.cols() != layer.w_qkv.rows()) throw ShapeError("mhsa input dim mismatch");
  const Mat qkv = (input * layer.w_qkv).rowwise() + layer.b_qkv.transpose();
  Mat concat(n, sd);
  if (attention_out) attention_out->clear();
  for (int h = 0; h < heads; ++h) {
    const Mat q = qkv.middleCols(static_cast<Eigen::Index>(h) * head_dim, head_dim);
    const Mat k = qkv.middleCols(sd + static_cast<Eigen::Index>(h) * head_dim, head_dim);
    const Mat v = qkv.middleCols(2 * sd + static_cast<Eigen::Index>(h) * head_dim, head_dim);
    Mat attn;
    concat.middleCols(static_cast<Eigen::Index>(h) * head_dim, head_dim) =
        self_attention(q, k, v, attention_out ? &attn : nullptr);
    if (attention_out) attention_out->push_back(std::move(attn));
  }
  return (concat * layer.w_msa).rowwise() + layer.b_msa.transpose();
}

PatchGrid encode(const ImageTensor& image, const EncoderParams& params) {
  EncodeTape tape;
  return encode_with_tape(image, params, tape);
}

PatchGrid encode_with_tape(const ImageTensor& image, const EncoderParams& params,
                           EncodeTape& tape) {
  const auto patch_list = patchify(image, params.grid_side);
  tape.patches.resize(static_cast<Eigen::Index>(patch_list.size()), params.patch_dim());
  for (std::size_t i = 0; i < patch_list.size(); ++i)
    tape.patches.row(static_cast<Eigen::Index>(i)) = patch_list[i].transpose();

  PatchGrid grid = embed_patches(patch_list, params);
  tape.z0 = grid.embeddings;
  tape.layers.clear();
  tape.layers.reserve(params.layers.size());

  const int heads = params.heads;
  const int hd = params.head_dim;
  const Eigen::Index sd = static_cast<Eigen::Index>(heads) * hd;
  const double scale = 1.0 / std::sqrt(static_cast<double>(hd));

  Mat z = grid.embeddings;
  for (const auto& layer : params.layers) {
    EncodeTape::LayerTape lt;
    lt.input = z;

    const Mat normed1 = layer_norm(z, layer.ln1_gain, layer.ln1_bias, lt.ln1_xhat, lt.ln1_inv_std);
    lt.qkv = (normed1 * layer.w_qkv).rowwise() + layer.b_qkv.transpose();
    lt.sa_concat.resize(z.rows(), sd);
    lt.attention.resize(heads);
    for (int h = 0; h < heads; ++h) {
      const auto q = lt.qkv.middleCols(static_cast<Eigen::Index>(h) * hd, hd);
      const auto k = lt.qkv.middleCols(sd + static_cast<Eigen::Index>(h) * hd, hd);
      const auto v = lt.qkv.middleCols(2 * sd + static_cast<Eigen::Index>(h) * hd, hd);
      lt.attention[h] = softmax_rows(q * k.transpose() * scale);
      lt.sa_concat.middleCols(static_cast<Eigen::Index>(h) * hd, hd) = lt.attention[h] * v;
    }
    const Mat msa_out = (lt.sa_concat * layer.w_msa).rowwise() + layer.b_msa.transpose();
    lt.after_residual1 = msa_out + z;

    const Mat normed2 = layer_norm(lt.after_residual1, layer.ln2_gain, layer.ln2_bias,
                                   lt.ln2_xhat, lt.ln2_inv_std);
    lt.mlp_pre = (normed2 * layer.w_mlp1).rowwise() + layer.b_mlp1.transpose();
    lt.mlp_hidden = lt.mlp_pre.unaryExpr([](double x) { return gelu(x); });
    const Mat mlp_out = (lt.mlp_hidden * layer.w_mlp2).rowwise() + layer.b_mlp2.transpose();
    lt.output = mlp_out + lt.after_residual1;

    z = lt.output;
    tape.layers.push_back(std::move(lt));
  }
  grid.embeddings = z;
  return grid;
}

EncoderGrads EncoderGrads::zeros_like(const EncoderParams& params) {
  EncoderGrads grads;
  grads.patch_weight = Mat::Zero(params.patch_weight.rows(), params.patch_weight.cols());
  grads.patch_bias = Vec::Zero(params.patch_bias.size());
  grads.pos_embed = Mat::Zero(params.pos_embed.rows(), params.pos_embed.cols());
  grads.layers.resize(params.layers.size());
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    const auto& p = params.layers[l];
    auto& g = grads.layers[l];
    g.ln1_gain = Vec::Zero(p.ln1_gain.size());
    g.ln1_bias = Vec::Zero(p.ln1_bias.size());
    g.w_qkv = Mat::Zero(p.w_qkv.rows(), p.w_qkv.cols());
    g.b_qkv = Vec::Zero(p.b_qkv.size());
    g.w_msa = Mat::Zero(p.w_msa.rows(), p.w_msa.cols());
    g.b_msa = Vec::Zero(p.b_msa.size());
    g.ln2_gain = Vec::Zero(p.ln2_gain.size());
    g.ln2_bias = Vec::Zero(p.ln2_bias.size());
    g.w_mlp1 = Mat::Zero(p.w_mlp1.rows(), p.w_mlp1.cols());
    g.b_mlp1 = Vec::Zero(p.b_mlp1.size());
    g.w_mlp2 = Mat::Zero(p.w_mlp2.rows(), p.w_mlp2.cols());
    g.b_mlp2 = Vec::Zero(p.b_mlp2.size());
  }
  return grads;
}

void EncoderGrads::add(const EncoderGrads& other, double s) {
  patch_weight += s * other.patch_weight;
  patch_bias += s * other.patch_bias;
  pos_embed += s * other.pos_embed;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    layers[l].ln1_gain += s * other.layers[l].ln1_gain;
    layers[l].ln1_bias += s * other.layers[l].ln1_bias;
    layers[l].w_qkv += s * other.layers[l].w_qkv;
    layers[l].b_qkv += s * other.layers[l].b_qkv;
    layers[l].w_msa += s * other.layers[l].w_msa;
    layers[l].b_msa += s * other.layers[l].b_msa;
    layers[l].ln2_gain += s * other.layers[l].ln2_gain;
    layers[l].ln2_bias += s * other.layers[l].ln2_bias;
    layers[l].w_mlp1 += s * other.layers[l].w_mlp1;
    layers[l].b_mlp1 += s * other.layers[l].b_mlp1;
    layers[l].w_mlp2 += s * other.layers[l].w_mlp2;
    layers[l].b_mlp2 += s * other.layers[l].b_mlp2;
  }
}

void EncoderGrads::scale(double factor) {
  patch_weight *= factor;
  patch_bias *= factor;
  pos_embed *= factor;
  for (auto& layer : layers) {
    layer.ln1_gain *= factor;
    layer.ln1_bias *= factor;
    layer.w_qkv *= factor;
    layer.b_qkv *= factor;
    layer.w_msa *= factor;
    layer.b_msa *= factor;
    layer.ln2_gain *= factor;
    layer.ln2_bias *= factor;
    layer.w_mlp1 *= factor;
    layer.b_mlp1 *= factor;
    layer.w_mlp2 *= factor;
    layer.b_mlp2 *= factor;
  }
}

void encode_backward(const EncodeTape& tape, const EncoderParams& params, const Mat& d_output,
                     EncoderGrads& grads) {
  const int heads = params.heads;
  const int hd = params.head_dim;
  const Eigen::Index sd = static_cast<Eigen::Index>(heads) * hd;
  const double scale = 1.0 / std::sqrt(static_cast<double>(hd));

  Mat dz = d_output;
  for (int l = static_cast<int>(params.layers.size()) - 1; l >= 0; --l) {
    const auto& layer = params.layers[l];
    const auto& lt = tape.layers[l];
    auto& g = grads.layers[l];

    // Z^l = MLP(LN2(Z')) + Z'
    const Mat d_mlp_out = dz;
    Mat d_res1 = dz;

    g.w_mlp2 += lt.mlp_hidden.transpose() * d_mlp_out;
    g.b_mlp2 += d_mlp_out.colwise().sum().transpose();
    const Mat d_hidden = d_mlp_out * layer.w_mlp2.transpose();
    const Mat d_pre =
        d_hidden.cwiseProduct(lt.mlp_pre.unaryExpr([](double x) { return gelu_grad(x); }));
    // reconstruct LN2 output from the tape instead of storing it
    const Mat normed2 =
        (lt.ln2_xhat.array().rowwise() * layer.ln2_gain.transpose().array()).matrix().rowwise() +
        layer.ln2_bias.transpose();
    g.w_mlp1 += normed2.transpose() * d_pre;
    g.b_mlp1 += d_pre.colwise().sum().transpose();
    const Mat d_normed2 = d_pre * layer.w_mlp1.transpose();
    d_res1 += layer_norm_backward(d_normed2, lt.ln2_xhat, lt.ln2_inv_std, layer.ln2_gain,
                                  g.ln2_gain, g.ln2_bias);

    // Z' = MHSA(LN1(Z)) + Z
    const Mat d_msa_out = d_res1;
    Mat d_input = d_res1;

    g.w_msa += lt.sa_concat.transpose() * d_msa_out;
    g.b_msa += d_msa_out.colwise().sum().transpose();
    const Mat d_concat = d_msa_out * layer.w_msa.transpose();

    Mat d_qkv = Mat::Zero(lt.qkv.rows(), lt.qkv.cols());
    for (int h = 0; h < heads; ++h) {
      const auto q = lt.qkv.middleCols(static_cast<Eigen::Index>(h) * hd, hd);
      const auto k = lt.qkv.middleCols(sd + static_cast<Eigen::Index>(h) * hd, hd);
      const auto v = lt.qkv.middleCols(2 * sd + static_cast<Eigen::Index>(h) * hd, hd);
      const Mat& attn = lt.attention[h];
      const auto d_out_h = d_concat.middleCols(static_cast<Eigen::Index>(h) * hd, hd);

      const Mat d_attn = d_out_h * v.transpose();
      const Mat d_v = attn.transpose() * d_out_h;
      // softmax rows: dS = A .* (dA - rowsum(dA .* A))
      Mat d_logits(attn.rows(), attn.cols());
      for (Eigen::Index i = 0; i < attn.rows(); ++i) {
        const double dot = d_attn.row(i).dot(attn.row(i));
        d_logits.row(i) = (attn.row(i).array() * (d_attn.row(i).array() - dot)).matrix();
      }
      const Mat d_q = d_logits * k * scale;
      const Mat d_k = d_logits.transpose() * q * scale;

      d_qkv.middleCols(static_cast<Eigen::Index>(h) * hd, hd) = d_q;
      d_qkv.middleCols(sd + static_cast<Eigen::Index>(h) * hd, hd) = d_k;
      d_qkv.middleCols(2 * sd + static_cast<Eigen::Index>(h) * hd, hd) = d_v;
    }

    const Mat normed1 =
        (lt.ln1_xhat.array().rowwise() * layer.ln1_gain.transpose().array()).matrix().rowwise() +
        layer.ln1_bias.transpose();
    g.w_qkv += normed1.transpose() * d_qkv;
    g.b_qkv += d_qkv.colwise().sum().transpose();
    const Mat d_normed1 = d_qkv * layer.w_qkv.transpose();
    d_input += layer_norm_backward(d_normed1, lt.ln1_xhat, lt.ln1_inv_std, layer.ln1_gain,
                                   g.ln1_gain, g.ln1_bias);

    dz = d_input;
  }

  // Z0 = patches * W0 + b0 + pos
  grads.pos_embed += dz;
  grads.patch_weight += tape.patches.transpose() * dz;
  grads.patch_bias += dz.colwise().sum().transpose();
}

}  // namespace dsva
