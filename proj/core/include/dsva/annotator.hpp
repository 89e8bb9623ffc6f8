#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "dsva/types.hpp"

namespace dsva {

// Joint semantic-visual embedding backend. Both outputs are L2-normalized
// so the downstream dot product behaves like a cosine similarity.
// Implementations must be deterministic for fixed inputs and safe for
// concurrent embed calls (annotation parallelizes over class/attribute
// pairs); both built-in embedders satisfy this.
class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual int dim() const = 0;
  virtual Vec text_embed(const std::string& text) const = 0;
  virtual Vec visual_embed(const ImageTensor& image) const = 0;
};

// Turns a bare attribute name into a sentence for the text encoder.
struct PromptTemplate {
  std::string pattern = "This photo contains {attribute}";

  // Throws ValidationError unless the pattern has exactly one slot.
  std::string apply(const std::string& attribute) const;
};

// Per-class probe image ids used for annotation; each class contributes
// exactly m ids.
struct ProbeSet {
  int m = 0;
  std::map<std::string, std::vector<std::string>> ids;  // class -> image ids

  void validate() const;
};

// Deterministic stand-in for a pretrained joint embedder. Text maps
// through a seeded string hash to a unit vector; images map through a
// seeded projection of per-channel region means.
std::unique_ptr<Embedder> make_mock_embedder(std::uint64_t seed, int dim = 64);

// r_a(y) = sum_i <E_t(template(a)), E_v(x_i)> over the m probe images.
double annotate_attribute(const std::vector<ImageTensor>& probes, const std::string& attribute,
                          const Embedder& embedder, const PromptTemplate& prompt);

// Same sum of dot products, on precomputed embeddings.
double annotate_from_embeddings(const Vec& text_embedding,
                                const std::vector<Vec>& probe_embeddings);

// Full class-attribute matrix; text embeddings are computed once per
// attribute and reused across classes. The loader returns the probe
// images for one class; an empty result raises InputError naming it.
ClassAttributeMatrix build_class_matrix(
    const AttributeVocabulary& vocabulary, const std::vector<std::string>& class_names,
    const std::function<std::vector<ImageTensor>(const std::string&)>& probe_loader,
    const Embedder& embedder, const PromptTemplate& prompt);

// Embedding-level variant used by the bridge path.
ClassAttributeMatrix build_class_matrix_from_embeddings(
    const AttributeVocabulary& vocabulary, const std::vector<std::string>& class_names,
    const std::function<std::vector<Vec>(const std::string&)>& probe_embedding_loader,
    const std::vector<Vec>& attribute_text_embeddings);

// Bidirectional InfoNCE over a batch of paired embeddings. The temperature
// divides every logit in both directions; tau <= 0 raises DomainError.
struct ContrastiveResult {
  double loss = 0.0;
  Mat d_visual;      // d loss / d visual rows
  Mat d_text;        // d loss / d text rows
  double d_log_tau = 0.0;  // d loss / d log(tau)
};

ContrastiveResult contrastive_loss(const Mat& visual, const Mat& text, double tau);

}  // namespace dsva
