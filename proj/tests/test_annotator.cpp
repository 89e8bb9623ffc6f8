#include <doctest.h>

#include <cmath>
#include <map>

#include "dsva/annotator.hpp"
#include "dsva/errors.hpp"
#include "dsva/rng.hpp"
#include "test_helpers.hpp"

using namespace dsva;

namespace {

// Test embedder with stated outputs: texts from a lookup, visuals keyed
// by the image's first pixel (key/8).
class LookupEmbedder final : public Embedder {
 public:
  LookupEmbedder(std::map<std::string, Vec> texts, std::vector<Vec> visuals, int dim)
      : texts_(std::move(texts)), visuals_(std::move(visuals)), dim_(dim) {}

  int dim() const override { return dim_; }
  Vec text_embed(const std::string& text) const override {
    const auto it = texts_.find(text);
    REQUIRE(it != texts_.end());
    return it->second;
  }
  Vec visual_embed(const ImageTensor& image) const override {
    const auto idx = static_cast<std::size_t>(std::llround(image.values[0] * 8.0));
    REQUIRE(idx < visuals_.size());
    return visuals_[idx];
  }

 private:
  std::map<std::string, Vec> texts_;
  std::vector<Vec> visuals_;
  int dim_;
};

ImageTensor keyed_image(int key) {
  ImageTensor img = ImageTensor::zeros(2, 2, 1);
  img.values[0] = key / 8.0;
  return img;
}

Vec unit(std::initializer_list<double> values) {
  Vec v(static_cast<Eigen::Index>(values.size()));
  Eigen::Index i = 0;
  for (double x : values) v(i++) = x;
  return v / v.norm();
}

}  // namespace

TEST_CASE("prompt template: exactly one slot required") {
  PromptTemplate prompt;
  CHECK(prompt.apply("narrow-road") == "This photo contains narrow-road");
  CHECK_THROWS_AS((PromptTemplate{"no slot here"}.apply("x")), ValidationError);
  CHECK_THROWS_AS((PromptTemplate{"{attribute} and {attribute}"}.apply("x")), ValidationError);
}

TEST_CASE("annotate_attribute: identical unit vectors with m=10 sum to 10") {
  const Vec u = unit({1, 0, 0});
  const std::string prompt_text = PromptTemplate{}.apply("water");
  LookupEmbedder embedder({{prompt_text, u}}, std::vector<Vec>(1, u), 3);
  std::vector<ImageTensor> probes(10, keyed_image(0));
  const double r = annotate_attribute(probes, "water", embedder, PromptTemplate{});
  CHECK(r == doctest::Approx(10.0).epsilon(1e-12));
}

TEST_CASE("annotate_attribute: orthogonal embeddings sum to zero") {
  const std::string prompt_text = PromptTemplate{}.apply("road");
  LookupEmbedder embedder({{prompt_text, unit({1, 0})}}, {unit({0, 1}), unit({0, 1})}, 2);
  std::vector<ImageTensor> probes{keyed_image(0), keyed_image(1)};
  CHECK(annotate_attribute(probes, "road", embedder, PromptTemplate{}) == 0.0);
}

TEST_CASE("annotate_attribute: m=3 hand-picked vectors match the scalar oracle") {
  const Vec t = unit({0.6, 0.8});
  const std::vector<Vec> visuals{unit({1.0, 0.5}), unit({-0.3, 0.9}), unit({0.2, -0.7})};
  const std::string prompt_text = PromptTemplate{}.apply("green");
  LookupEmbedder embedder({{prompt_text, t}}, visuals, 2);
  std::vector<ImageTensor> probes{keyed_image(0), keyed_image(1), keyed_image(2)};
  const double r = annotate_attribute(probes, "green", embedder, PromptTemplate{});
  double expect = 0;
  for (const auto& v : visuals) expect += t(0) * v(0) + t(1) * v(1);
  CHECK(r == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("annotate_attribute: empty probe set raises InputError") {
  LookupEmbedder embedder({}, {}, 2);
  CHECK_THROWS_AS(annotate_attribute({}, "x", embedder, PromptTemplate{}), InputError);
}

TEST_CASE("annotate is linear in m: duplicating probes doubles the value") {
  const auto embedder = make_mock_embedder(3);
  Rng rng(4);
  std::vector<ImageTensor> probes;
  for (int i = 0; i < 5; ++i) probes.push_back(helpers::random_image(8, rng));
  const double once = annotate_attribute(probes, "flat", *embedder, PromptTemplate{});
  std::vector<ImageTensor> doubled = probes;
  doubled.insert(doubled.end(), probes.begin(), probes.end());
  const double twice = annotate_attribute(doubled, "flat", *embedder, PromptTemplate{});
  CHECK(twice == 2.0 * once);  // exact: the same summands, same order
}

TEST_CASE("build_class_matrix: one class, one attribute composes annotate_attribute") {
  const auto embedder = make_mock_embedder(5);
  Rng rng(6);
  const std::vector<ImageTensor> probes{helpers::random_image(8, rng),
                                        helpers::random_image(8, rng)};
  AttributeVocabulary vocab;
  vocab.attributes = {{"round", AttributeGroup::Shape}};
  const auto matrix = build_class_matrix(
      vocab, {"only"}, [&](const std::string&) { return probes; }, *embedder, PromptTemplate{});
  CHECK(matrix.values.rows() == 1);
  CHECK(matrix.values.cols() == 1);
  CHECK(matrix.values(0, 0) ==
        annotate_attribute(probes, "round", *embedder, PromptTemplate{}));
}

TEST_CASE("build_class_matrix: identical probe sets give identical rows") {
  const auto embedder = make_mock_embedder(7);
  Rng rng(8);
  const std::vector<ImageTensor> probes{helpers::random_image(8, rng)};
  AttributeVocabulary vocab;
  vocab.attributes = {{"red", AttributeGroup::Color}, {"flat", AttributeGroup::Texture}};
  const auto matrix = build_class_matrix(
      vocab, {"a", "b"}, [&](const std::string&) { return probes; }, *embedder,
      PromptTemplate{});
  CHECK((matrix.values.row(0) - matrix.values.row(1)).norm() == 0.0);
}

TEST_CASE("build_class_matrix: bit-identical across runs with a fixed seed") {
  Rng rng(7);
  std::vector<std::vector<ImageTensor>> probes;
  for (int c = 0; c < 3; ++c) {
    probes.emplace_back();
    for (int i = 0; i < 2; ++i) probes.back().push_back(helpers::random_image(8, rng));
  }
  AttributeVocabulary vocab;
  vocab.attributes = {{"red", AttributeGroup::Color},
                      {"tree", AttributeGroup::ObjectPresence},
                      {"metal", AttributeGroup::Material},
                      {"round", AttributeGroup::Shape}};
  auto loader = [&](const std::string& cls) {
    return probes[static_cast<std::size_t>(cls[0] - 'a')];
  };
  const auto embedder1 = make_mock_embedder(7);
  const auto m1 = build_class_matrix(vocab, {"a", "b", "c"}, loader, *embedder1, PromptTemplate{});
  const auto embedder2 = make_mock_embedder(7);
  const auto m2 = build_class_matrix(vocab, {"a", "b", "c"}, loader, *embedder2, PromptTemplate{});
  CHECK((m1.values - m2.values).norm() == 0.0);
}

TEST_CASE("build_class_matrix: permuting the vocabulary permutes the columns") {
  const auto embedder = make_mock_embedder(9);
  Rng rng(10);
  const std::vector<ImageTensor> probes{helpers::random_image(8, rng),
                                        helpers::random_image(8, rng)};
  AttributeVocabulary vocab;
  vocab.attributes = {{"red", AttributeGroup::Color},
                      {"round", AttributeGroup::Shape},
                      {"flat", AttributeGroup::Texture}};
  auto loader = [&](const std::string&) { return probes; };
  const auto base = build_class_matrix(vocab, {"a"}, loader, *embedder, PromptTemplate{});

  AttributeVocabulary shuffled;
  shuffled.attributes = {vocab.attributes[2], vocab.attributes[0], vocab.attributes[1]};
  const auto moved = build_class_matrix(shuffled, {"a"}, loader, *embedder, PromptTemplate{});
  CHECK(moved.values(0, 0) == base.values(0, 2));
  CHECK(moved.values(0, 1) == base.values(0, 0));
  CHECK(moved.values(0, 2) == base.values(0, 1));
}

TEST_CASE("build_class_matrix: missing probes raise InputError naming the class") {
  const auto embedder = make_mock_embedder(11);
  AttributeVocabulary vocab;
  vocab.attributes = {{"red", AttributeGroup::Color}};
  try {
    build_class_matrix(
        vocab, {"ghost"}, [](const std::string&) { return std::vector<ImageTensor>{}; },
        *embedder, PromptTemplate{});
    FAIL("expected InputError");
  } catch (const InputError& e) {
    CHECK(std::string(e.what()).find("ghost") != std::string::npos);
  }
}

TEST_CASE("mock embedder: deterministic, unit norm, distinct strings") {
  const auto a = make_mock_embedder(1);
  const auto b = make_mock_embedder(1);
  CHECK((a->text_embed("water") - b->text_embed("water")).norm() == 0.0);
  CHECK(std::fabs(a->text_embed("water").norm() - 1.0) < 1e-12);

  Rng rng(12);
  const ImageTensor img = helpers::random_image(8, rng);
  CHECK((a->visual_embed(img) - b->visual_embed(img)).norm() == 0.0);
  CHECK(std::fabs(a->visual_embed(img).norm() - 1.0) < 1e-12);

  // sample 100 string pairs; no near-collisions
  double max_cos = -1.0;
  for (int i = 0; i < 100; ++i) {
    const Vec u = a->text_embed("attr-" + std::to_string(i));
    const Vec v = a->text_embed("attr-" + std::to_string(i + 100));
    max_cos = std::max(max_cos, u.dot(v));
  }
  CHECK(max_cos < 0.999);
}

TEST_CASE("mock embedder: different seeds give different embeddings") {
  const auto a = make_mock_embedder(1);
  const auto b = make_mock_embedder(2);
  CHECK((a->text_embed("water") - b->text_embed("water")).norm() > 1e-6);
}

TEST_CASE("contrastive_loss: singleton batch is exactly zero") {
  Rng rng(13);
  const Mat v = helpers::random_matrix(1, 4, rng);
  const Mat t = helpers::random_matrix(1, 4, rng);
  const auto result = contrastive_loss(v, t, 0.07);
  CHECK(result.loss == 0.0);
  CHECK(result.d_visual.cwiseAbs().maxCoeff() == 0.0);
  CHECK(result.d_text.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("contrastive_loss: uniform similarities at B=2 give 4 ln 2") {
  Mat v(2, 3), t(2, 3);
  v.setZero();
  t.setZero();
  v(0, 0) = v(1, 0) = 1.0;  // all rows the same unit vector
  t(0, 0) = t(1, 0) = 1.0;
  const auto result = contrastive_loss(v, t, 0.07);
  CHECK(std::fabs(result.loss - 4.0 * std::log(2.0)) < 1e-9);
}

TEST_CASE("contrastive_loss: tau <= 0 raises DomainError") {
  Mat v = Mat::Zero(2, 2), t = Mat::Zero(2, 2);
  CHECK_THROWS_AS(contrastive_loss(v, t, 0.0), DomainError);
  CHECK_THROWS_AS(contrastive_loss(v, t, -1.0), DomainError);
}

TEST_CASE("contrastive_loss: positive for any finite logits at B >= 2") {
  Rng rng(14);
  for (int trial = 0; trial < 20; ++trial) {
    const int b = 2 + static_cast<int>(rng.uniform_int(4));
    const Mat v = helpers::random_matrix(b, 4, rng);
    const Mat t = helpers::random_matrix(b, 4, rng);
    CHECK(contrastive_loss(v, t, 0.2).loss > 0.0);
  }
}

TEST_CASE("contrastive_loss: invariant under a shared row permutation") {
  Rng rng(15);
  const Mat v = helpers::random_matrix(4, 3, rng);
  const Mat t = helpers::random_matrix(4, 3, rng);
  const double base = contrastive_loss(v, t, 0.1).loss;
  const std::vector<int> perm{2, 0, 3, 1};
  Mat vp(4, 3), tp(4, 3);
  for (int i = 0; i < 4; ++i) {
    vp.row(i) = v.row(perm[static_cast<std::size_t>(i)]);
    tp.row(i) = t.row(perm[static_cast<std::size_t>(i)]);
  }
  CHECK(contrastive_loss(vp, tp, 0.1).loss == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("contrastive_loss: analytic gradients match finite differences") {
  Rng rng(16);
  for (int trial = 0; trial < 5; ++trial) {
    Mat v = helpers::random_matrix(3, 4, rng);
    Mat t = helpers::random_matrix(3, 4, rng);
    double log_tau = std::log(0.07 + 0.4 * rng.uniform());

    const auto result = contrastive_loss(v, t, std::exp(log_tau));
    auto loss = [&] { return contrastive_loss(v, t, std::exp(log_tau)).loss; };

    std::vector<double> analytic, numeric;
    const auto fd_v = fd::gradient(loss, v.data(), static_cast<std::size_t>(v.size()));
    const auto fd_t = fd::gradient(loss, t.data(), static_cast<std::size_t>(t.size()));
    const auto fd_tau = fd::gradient(loss, &log_tau, 1);
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      analytic.push_back(result.d_visual.data()[i]);
      numeric.push_back(fd_v[static_cast<std::size_t>(i)]);
    }
    for (Eigen::Index i = 0; i < t.size(); ++i) {
      analytic.push_back(result.d_text.data()[i]);
      numeric.push_back(fd_t[static_cast<std::size_t>(i)]);
    }
    analytic.push_back(result.d_log_tau);
    numeric.push_back(fd_tau[0]);
    CHECK(fd::relative_error(analytic, numeric) < 1e-4);
  }
}
