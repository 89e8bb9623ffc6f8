#include "dsva/annotator.hpp"

#include <cmath>

#include "dsva/errors.hpp"
#include "dsva/rng.hpp"

namespace dsva {
namespace {

std::uint64_t fnv1a(const std::string& text, std::uint64_t seed) {
  std::uint64_t h = 0xCBF29CE484222325ULL ^ seed;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

class MockEmbedder final : public Embedder {
 public:
  MockEmbedder(std::uint64_t seed, int dim) : seed_(seed), dim_(dim) {}

  int dim() const override { return dim_; }

  Vec text_embed(const std::string& text) const override {
    Rng rng(fnv1a(text, seed_));
    Vec v(dim_);
    for (int i = 0; i < dim_; ++i) v(i) = rng.normal();
    return v / v.norm();
  }

  Vec visual_embed(const ImageTensor& image) const override {
    // Summary: per-channel means over a 4x4 region grid, then a seeded
    // random projection to the embedding dimension.
    constexpr int kRegions = 4;
    const int features = kRegions * kRegions * image.channels;
    Vec summary = Vec::Zero(features);
    Eigen::VectorXi counts = Eigen::VectorXi::Zero(features);
    for (int y = 0; y < image.height; ++y) {
      const int ry = y * kRegions / image.height;
      for (int x = 0; x < image.width; ++x) {
        const int rx = x * kRegions / image.width;
        for (int c = 0; c < image.channels; ++c) {
          const int f = (ry * kRegions + rx) * image.channels + c;
          summary(f) += image.at(y, x, c);
          counts(f) += 1;
        }
      }
    }
    for (int f = 0; f < features; ++f)
      if (counts(f) > 0) summary(f) /= counts(f);

    Rng rng(fnv1a("visual-projection:" + std::to_string(features), seed_));
    Vec v = Vec::Zero(dim_);
    for (int f = 0; f < features; ++f)
      for (int i = 0; i < dim_; ++i) v(i) += rng.normal() * summary(f);
    const double n = v.norm();
    if (n > 0) v /= n;
    else v(0) = 1.0;  // blank image; any fixed unit vector will do
    return v;
  }

 private:
  std::uint64_t seed_;
  int dim_;
};

}  // namespace

std::string PromptTemplate::apply(const std::string& attribute) const {
  const std::string slot = "{attribute}";
  const std::size_t first = pattern.find(slot);
  if (first == std::string::npos)
    throw ValidationError("prompt template has no {attribute} slot: " + pattern);
  if (pattern.find(slot, first + 1) != std::string::npos)
    throw ValidationError("prompt template has more than one {attribute} slot: " + pattern);
  std::string out = pattern;
  out.replace(first, slot.size(), attribute);
  return out;
}

void ProbeSet::validate() const {
  if (m < 1) throw ValidationError("probe count m must be >= 1");
  for (const auto& [cls, list] : ids)
    if (static_cast<int>(list.size()) != m)
      throw ValidationError("class '" + cls + "' has " + std::to_string(list.size()) +
                            " probes, expected " + std::to_string(m));
}

std::unique_ptr<Embedder> make_mock_embedder(std::uint64_t seed, int dim) {
  return std::make_unique<MockEmbedder>(seed, dim);
}

double annotate_from_embeddings(const Vec& text_embedding,
                                const std::vector<Vec>& probe_embeddings) {
  if (probe_embeddings.empty()) throw InputError("annotate: empty probe set");
  double sum = 0.0;
  for (const auto& v : probe_embeddings) {
    if (v.size() != text_embedding.size())
      throw ShapeError("embedding dimensions disagree");
    sum += text_embedding.dot(v);
  }
  return sum;
}

double annotate_attribute(const std::vector<ImageTensor>& probes, const std::string& attribute,
                          const Embedder& embedder, const PromptTemplate& prompt) {
  if (probes.empty()) throw InputError("annotate_attribute: empty probe set");
  const Vec text = embedder.text_embed(prompt.apply(attribute));
  std::vector<Vec> embeddings;
  embeddings.reserve(probes.size());
  for (const auto& image : probes) embeddings.push_back(embedder.visual_embed(image));
  return annotate_from_embeddings(text, embeddings);
}

ClassAttributeMatrix build_class_matrix(
    const AttributeVocabulary& vocabulary, const std::vector<std::string>& class_names,
    const std::function<std::vector<ImageTensor>(const std::string&)>& probe_loader,
    const Embedder& embedder, const PromptTemplate& prompt) {
  std::vector<Vec> text_embeddings;
  text_embeddings.reserve(vocabulary.attributes.size());
  for (const auto& attr : vocabulary.attributes)
    text_embeddings.push_back(embedder.text_embed(prompt.apply(attr.name)));

  return build_class_matrix_from_embeddings(
      vocabulary, class_names,
      [&](const std::string& cls) {
        const auto probes = probe_loader(cls);
        std::vector<Vec> embeddings;
        embeddings.reserve(probes.size());
        for (const auto& image : probes) embeddings.push_back(embedder.visual_embed(image));
        return embeddings;
      },
      text_embeddings);
}

ClassAttributeMatrix build_class_matrix_from_embeddings(
    const AttributeVocabulary& vocabulary, const std::vector<std::string>& class_names,
    const std::function<std::vector<Vec>(const std::string&)>& probe_embedding_loader,
    const std::vector<Vec>& attribute_text_embeddings) {
  vocabulary.validate();
  if (attribute_text_embeddings.size() != vocabulary.attributes.size())
    throw ShapeError("one text embedding per vocabulary attribute required");

  ClassAttributeMatrix matrix;
  matrix.class_names = class_names;
  for (const auto& attr : vocabulary.attributes) matrix.attribute_names.push_back(attr.name);
  matrix.values.resize(static_cast<Eigen::Index>(class_names.size()), vocabulary.size());

  for (std::size_t c = 0; c < class_names.size(); ++c) {
    const auto probes = probe_embedding_loader(class_names[c]);
    if (probes.empty())
      throw InputError("no probe images for class '" + class_names[c] + "'");
    for (int a = 0; a < vocabulary.size(); ++a)
      matrix.values(static_cast<Eigen::Index>(c), a) =
          annotate_from_embeddings(attribute_text_embeddings[static_cast<std::size_t>(a)], probes);
  }
  matrix.validate();
  return matrix;
}

ContrastiveResult contrastive_loss(const Mat& visual, const Mat& text, double tau) {
  if (tau <= 0) throw DomainError("contrastive_loss: tau must be > 0");
  if (visual.rows() != text.rows() || visual.cols() != text.cols())
    throw ShapeError("contrastive_loss: batch shapes disagree");
  const Eigen::Index batch = visual.rows();
  if (batch < 1) throw InputError("contrastive_loss: empty batch");

  const Mat sim = visual * text.transpose();  // sim(i, j) = v_i . t_j
  const Mat logits_vt = sim / tau;
  const Mat logits_tv = sim.transpose() / tau;

  auto softmax_rows = [](const Mat& logits) {
    Mat out(logits.rows(), logits.cols());
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
      const double m = logits.row(i).maxCoeff();
      out.row(i) = (logits.row(i).array() - m).exp().matrix();
      out.row(i) /= out.row(i).sum();
    }
    return out;
  };

  const Mat p_vt = softmax_rows(logits_vt);  // image i over texts
  const Mat p_tv = softmax_rows(logits_tv);  // text i over images

  ContrastiveResult result;
  for (Eigen::Index i = 0; i < batch; ++i)
    result.loss -= std::log(p_vt(i, i)) + std::log(p_tv(i, i));

  // d loss / d logits = softmax - identity, per direction
  Mat d_logits_vt = p_vt;
  Mat d_logits_tv = p_tv;
  for (Eigen::Index i = 0; i < batch; ++i) {
    d_logits_vt(i, i) -= 1.0;
    d_logits_tv(i, i) -= 1.0;
  }

  // sim enters as logits_vt = sim/tau and logits_tv = sim^T/tau
  const Mat d_sim = (d_logits_vt + d_logits_tv.transpose()) / tau;
  result.d_visual = d_sim * text;
  result.d_text = d_sim.transpose() * visual;
  // logits = sim / tau, d logits / d log(tau) = -logits
  result.d_log_tau = -(d_logits_vt.cwiseProduct(logits_vt).sum() +
                       d_logits_tv.cwiseProduct(logits_tv).sum());
  return result;
}

}  // namespace dsva
