#include <doctest.h>

#include <cmath>

#include "dsva/errors.hpp"
#include "dsva/inference.hpp"
#include "dsva/rng.hpp"
#include "test_helpers.hpp"

using namespace dsva;

namespace {

ScoreMatrix random_score_matrix(int rows, int n_seen, int n_unseen, Rng& rng,
                                std::vector<std::string>* labels = nullptr) {
  ScoreMatrix m;
  for (int i = 0; i < n_seen; ++i) {
    m.class_names.push_back("s" + std::to_string(i));
    m.seen_flags.push_back(1);
  }
  for (int i = 0; i < n_unseen; ++i) {
    m.class_names.push_back("u" + std::to_string(i));
    m.seen_flags.push_back(0);
  }
  m.scores = helpers::random_matrix(rows, n_seen + n_unseen, rng);
  if (labels) {
    labels->clear();
    for (int r = 0; r < rows; ++r)
      labels->push_back(
          m.class_names[static_cast<std::size_t>(rng.uniform_int(m.class_names.size()))]);
  }
  return m;
}

long count_predicted_seen(const ScoreMatrix& m, double gamma) {
  long count = 0;
  for (Eigen::Index r = 0; r < m.scores.rows(); ++r) {
    const int pick = gzsl_predict(m.scores.row(r).transpose(), m.seen_flags, gamma);
    if (m.seen_flags[static_cast<std::size_t>(pick)]) ++count;
  }
  return count;
}

}  // namespace

TEST_CASE("zsl_predict: singleton and direct argmax") {
  Vec one(1);
  one << 0.3;
  CHECK(zsl_predict(one) == 0);
  Vec three(3);
  three << 0.1, 0.9, 0.3;
  CHECK(zsl_predict(three) == 1);
  CHECK_THROWS_AS(zsl_predict(Vec()), InputError);
}

TEST_CASE("zsl_predict: matches a linear-scan oracle on random rows") {
  Rng rng(1);
  for (int trial = 0; trial < 200; ++trial) {
    const Vec row = helpers::random_matrix(10, 1, rng);
    const auto expect =
        oracle::max_with_lowest_index(std::vector<double>(row.data(), row.data() + 10));
    CHECK(zsl_predict(row) == expect.index);
  }
}

TEST_CASE("gzsl_predict: zero calibration is a plain argmax") {
  Rng rng(2);
  for (int trial = 0; trial < 100; ++trial) {
    const Vec row = helpers::random_matrix(8, 1, rng);
    std::vector<char> seen{1, 0, 1, 0, 1, 0, 1, 0};
    const auto expect =
        oracle::max_with_lowest_index(std::vector<double>(row.data(), row.data() + 8));
    CHECK(gzsl_predict(row, seen, 0.0) == expect.index);
  }
}

TEST_CASE("gzsl_predict: the worked calibration example flips to unseen") {
  Vec row(2);
  row << 0.60, 0.59;  // seen, unseen
  std::vector<char> seen{1, 0};
  CHECK(gzsl_predict(row, seen, 0.0) == 0);
  CHECK(gzsl_predict(row, seen, 0.02) == 1);  // 0.58 < 0.59
}

TEST_CASE("gzsl_predict: gamma above the score spread forces unseen predictions") {
  Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    ScoreMatrix m = random_score_matrix(5, 3, 2, rng);
    const double spread = m.scores.maxCoeff() - m.scores.minCoeff();
    for (Eigen::Index r = 0; r < m.scores.rows(); ++r) {
      const int pick = gzsl_predict(m.scores.row(r).transpose(), m.seen_flags, spread + 1.0);
      CHECK(m.seen_flags[static_cast<std::size_t>(pick)] == 0);
    }
  }
}

TEST_CASE("gzsl_predict: with every class unseen it equals zsl_predict for any gamma") {
  Rng rng(4);
  for (double gamma : {0.0, 0.5, 100.0}) {
    const Vec row = helpers::random_matrix(6, 1, rng);
    std::vector<char> seen(6, 0);
    CHECK(gzsl_predict(row, seen, gamma) == zsl_predict(row));
  }
}

TEST_CASE("predictions are invariant to a constant shift of the row") {
  Rng rng(5);
  const Vec row = helpers::random_matrix(7, 1, rng);
  const Vec shifted = row.array() + 123.25;
  std::vector<char> seen{1, 1, 0, 0, 1, 0, 1};
  CHECK(zsl_predict(shifted) == zsl_predict(row));
  CHECK(gzsl_predict(shifted, seen, 0.3) == gzsl_predict(row, seen, 0.3));
}

TEST_CASE("harmonic mean: reference operating points") {
  // published operating points, percentages
  CHECK(std::fabs(harmonic_mean(79.9, 40.9) - 54.1) < 0.05);
  CHECK(std::fabs(harmonic_mean(67.1, 68.4) - 67.7) < 0.05);
  CHECK(harmonic_mean(0.42, 0.42) == doctest::Approx(0.42));
  CHECK(harmonic_mean(0.0, 0.0) == 0.0);
}

TEST_CASE("harmonic mean: min <= H <= GM <= AM <= max, ties only at S == U") {
  Rng rng(6);
  for (int trial = 0; trial < 100; ++trial) {
    const double s = rng.uniform(0.01, 1.0);
    const double u = rng.uniform(0.01, 1.0);
    const double h = harmonic_mean(s, u);
    const double gm = std::sqrt(s * u);
    const double am = 0.5 * (s + u);
    CHECK(h >= std::min(s, u) - 1e-12);
    CHECK(h <= gm + 1e-12);
    CHECK(gm <= am + 1e-12);
    CHECK(am <= std::max(s, u) + 1e-12);
    if (std::fabs(s - u) > 1e-9) {
      CHECK(h > std::min(s, u));
      CHECK(h < gm);
    }
  }
}

TEST_CASE("evaluate: hand-built score matrix with known accuracies") {
  // 2 seen classes (s0, s1), 1 unseen (u0); 6 rows
  ScoreMatrix m;
  m.class_names = {"s0", "s1", "u0"};
  m.seen_flags = {1, 1, 0};
  m.scores.resize(6, 3);
  //               s0   s1   u0
  m.scores << 0.9, 0.1, 0.0,   // s0 right
              0.8, 0.2, 0.1,   // s0 right
              0.1, 0.9, 0.0,   // s1 right
              0.9, 0.1, 0.0,   // s1 wrong
              0.0, 0.1, 0.9,   // u0 right
              0.9, 0.05, 0.1;  // u0 wrong in GZSL, right in ZSL (only u0 candidate)
  const std::vector<std::string> labels{"s0", "s0", "s1", "s1", "u0", "u0"};

  const EvalReport report = evaluate(m, labels, 0.0);
  CHECK(report.zsl_top1 == doctest::Approx(1.0));  // single unseen candidate
  CHECK(report.gzsl_seen == doctest::Approx((1.0 + 0.5) / 2));  // per-class mean
  CHECK(report.gzsl_unseen == doctest::Approx(0.5));
  CHECK(report.harmonic ==
        doctest::Approx(harmonic_mean(report.gzsl_seen, report.gzsl_unseen)));
  CHECK(report.per_class.at("s0") == doctest::Approx(1.0));
  CHECK(report.per_class.at("s1") == doctest::Approx(0.5));

  // overall mode counts rows, not classes
  const EvalReport overall =
      evaluate(m, labels, 0.0, AccuracyMode::Overall, AccuracyMode::Overall);
  CHECK(overall.gzsl_seen == doctest::Approx(3.0 / 4));
}

TEST_CASE("evaluate: unknown label raises InputError") {
  Rng rng(7);
  ScoreMatrix m = random_score_matrix(2, 1, 1, rng);
  CHECK_THROWS_AS(evaluate(m, {"s0", "ghost"}, 0.0), InputError);
}

TEST_CASE("evaluate: invariant under test-image order permutation") {
  Rng rng(8);
  std::vector<std::string> labels;
  ScoreMatrix m = random_score_matrix(20, 3, 2, rng, &labels);
  const EvalReport base = evaluate(m, labels, 1e-3);

  std::vector<int> perm(20);
  for (int i = 0; i < 20; ++i) perm[static_cast<std::size_t>(i)] = i;
  Rng shuffle_rng(9);
  shuffle_rng.shuffle(perm);
  ScoreMatrix shuffled = m;
  std::vector<std::string> shuffled_labels(20);
  for (int i = 0; i < 20; ++i) {
    shuffled.scores.row(i) = m.scores.row(perm[static_cast<std::size_t>(i)]);
    shuffled_labels[static_cast<std::size_t>(i)] =
        labels[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])];
  }
  const EvalReport moved = evaluate(shuffled, shuffled_labels, 1e-3);
  CHECK(moved.zsl_top1 == doctest::Approx(base.zsl_top1).epsilon(1e-12));
  CHECK(moved.gzsl_seen == doctest::Approx(base.gzsl_seen).epsilon(1e-12));
  CHECK(moved.gzsl_unseen == doctest::Approx(base.gzsl_unseen).epsilon(1e-12));
  CHECK(moved.harmonic == doctest::Approx(base.harmonic).epsilon(1e-12));
}

TEST_CASE("calibration_sweep: degenerate grid reproduces evaluate at gamma=0") {
  Rng rng(10);
  std::vector<std::string> labels;
  ScoreMatrix m = random_score_matrix(15, 3, 2, rng, &labels);
  const auto sweep = calibration_sweep(m, labels, {0.0});
  const EvalReport direct = evaluate(m, labels, 0.0);
  CHECK(sweep.reports.size() == 1);
  CHECK(sweep.reports[0].harmonic == doctest::Approx(direct.harmonic).epsilon(1e-12));
  CHECK(sweep.reports[0].zsl_top1 == doctest::Approx(direct.zsl_top1).epsilon(1e-12));
}

TEST_CASE("calibration_sweep: seen-prediction count non-increasing in gamma") {
  Rng rng(11);
  for (int trial = 0; trial < 25; ++trial) {
    ScoreMatrix m = random_score_matrix(12, 3, 2, rng);
    long prev = m.scores.rows() + 1;
    for (int g = 0; g < 20; ++g) {
      const double gamma = 0.25 * g;
      const long now = count_predicted_seen(m, gamma);
      CHECK(now <= prev);
      prev = now;
    }
  }
}

TEST_CASE("calibration_sweep: saturation at gamma=1e6 zeroes S and H") {
  Rng rng(12);
  std::vector<std::string> labels;
  ScoreMatrix m = random_score_matrix(20, 3, 2, rng, &labels);
  const auto sweep = calibration_sweep(m, labels, {0.0, 1e6});
  CHECK(sweep.reports[1].gzsl_seen == 0.0);
  CHECK(sweep.reports[1].harmonic == 0.0);
}

TEST_CASE("calibration_sweep: rejects empty or unsorted grids") {
  Rng rng(13);
  std::vector<std::string> labels;
  ScoreMatrix m = random_score_matrix(4, 2, 1, rng, &labels);
  CHECK_THROWS_AS(calibration_sweep(m, labels, {}), InputError);
  CHECK_THROWS_AS(calibration_sweep(m, labels, {0.5, 0.1}), InputError);
  CHECK_THROWS_AS(calibration_sweep(m, labels, {-0.1, 0.5}), InputError);
}
