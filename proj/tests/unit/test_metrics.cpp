#include <doctest.h>

#include <nlohmann/json.hpp>
#include <vector>

#include "histo/error.hpp"
#include "histo/metrics.hpp"
#include "histo/rng.hpp"

using namespace histo;

namespace {

const ConfusionMatrix::Cells kFixture = {{{10, 0, 0, 0}, {2, 8, 0, 0}, {0, 0, 10, 0}, {0, 0, 1, 9}}};

struct Pairs {
  std::vector<ClassLabel> truth, pred;
};

Pairs random_pairs(Rng& rng, int n, int classes = kNumClasses) {
  Pairs p;
  for (int i = 0; i < n; ++i) {
    const auto t = label_from_index(static_cast<int>(rng.below(classes)));
    // Biased towards the diagonal so most classes have nonzero support.
    const auto q = rng.bernoulli(0.6) ? t : label_from_index(static_cast<int>(rng.below(classes)));
    p.truth.push_back(t);
    p.pred.push_back(q);
  }
  return p;
}

// Computed straight from the pairs, without a matrix.
PrfScores brute_force(const Pairs& p, ClassLabel c) {
  int tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < p.truth.size(); ++i) {
    const bool t = p.truth[i] == c, q = p.pred[i] == c;
    tp += t && q;
    fp += !t && q;
    fn += t && !q;
  }
  PrfScores s;
  s.precision = tp + fp ? static_cast<double>(tp) / (tp + fp) : 0.0;
  s.recall = tp + fn ? static_cast<double>(tp) / (tp + fn) : 0.0;
  s.f1 = 2 * tp + fp + fn ? 2.0 * tp / (2 * tp + fp + fn) : 0.0;
  s.degenerate = tp + fp == 0 || tp + fn == 0 || tp == 0;
  return s;
}

}  // namespace

TEST_CASE("per-class metrics of the reference matrix") {
  const ClassMetrics m = class_metrics(ConfusionMatrix(kFixture));
  const double want[4][3] = {{0.83, 1.00, 0.91}, {1.00, 0.80, 0.89}, {0.91, 1.00, 0.95}, {1.00, 0.90, 0.95}};
  for (int c = 0; c < 4; ++c) {
    CHECK(std::abs(m.per_class[c].precision - want[c][0]) <= 0.005);
    CHECK(std::abs(m.per_class[c].recall - want[c][1]) <= 0.005);
    CHECK(std::abs(m.per_class[c].f1 - want[c][2]) <= 0.005);
    CHECK_FALSE(m.per_class[c].degenerate);
  }
  CHECK(m.accuracy == 0.925);
  CHECK(m.per_class[0].precision == 10.0 / 12.0);
  CHECK(m.per_class[2].f1 == doctest::Approx(20.0 / 21.0));
}

TEST_CASE("confusion matrix matches a brute-force tally") {
  Rng rng(1);
  const Pairs p = random_pairs(rng, 200);
  const ConfusionMatrix cm = confusion_matrix(p.truth, p.pred);
  CHECK(cm.total() == 200);
  for (ClassLabel t : kAllLabels) {
    for (ClassLabel q : kAllLabels) {
      std::int64_t n = 0;
      for (std::size_t i = 0; i < p.truth.size(); ++i) n += p.truth[i] == t && p.pred[i] == q;
      CHECK(cm.at(t, q) == n);
    }
  }
  for (ClassLabel c : kAllLabels) CHECK(cm.tp(c) + cm.fp(c) + cm.fn(c) + cm.tn(c) == 200);
}

TEST_CASE("metrics agree with the pairwise oracle") {
  Rng rng(2);
  for (int trial = 0; trial < 300; ++trial) {
    const int classes = 1 + static_cast<int>(rng.below(4));
    const Pairs p = random_pairs(rng, 1 + static_cast<int>(rng.below(60)), classes);
    const ConfusionMatrix cm = confusion_matrix(p.truth, p.pred);
    const ClassMetrics m = class_metrics(cm);
    const NormalizedMatrix norm = normalize_rows(cm);
    double macro_f1 = 0.0;
    for (ClassLabel c : kAllLabels) {
      const PrfScores want = brute_force(p, c);
      const PrfScores& got = m.per_class[index_of(c)];
      CHECK(got.precision == doctest::Approx(want.precision));
      CHECK(got.recall == doctest::Approx(want.recall));
      CHECK(got.f1 == doctest::Approx(want.f1));
      CHECK(got.degenerate == want.degenerate);
      if (!norm.zero_row[index_of(c)]) {
        CHECK(got.recall == doctest::Approx(norm.rows[index_of(c)][index_of(c)]));
      }
      if (!got.degenerate) {
        CHECK(got.f1 >= std::min(got.precision, got.recall) - 1e-12);
        CHECK(got.f1 <= std::max(got.precision, got.recall) + 1e-12);
      }
      macro_f1 += got.f1 / 4;
    }
    CHECK(m.macro.f1 == doctest::Approx(macro_f1));
    CHECK(m.micro_precision == doctest::Approx(m.accuracy));
    CHECK(m.micro_recall == doctest::Approx(m.accuracy));
  }
}

TEST_CASE("zero division and single-class inputs") {
  std::vector<ClassLabel> t(5, ClassLabel::Benign), q(5, ClassLabel::Benign);
  const ClassMetrics m = class_metrics(confusion_matrix(t, q));
  CHECK(m.accuracy == 1.0);
  CHECK(m.per_class[1].f1 == 1.0);
  CHECK_FALSE(m.per_class[1].degenerate);
  CHECK(m.per_class[0].precision == 0.0);
  CHECK(m.per_class[0].degenerate);
  CHECK(m.macro.degenerate);
  CHECK(m.macro.f1 == 0.25);

  const NormalizedMatrix n = normalize_rows(ConfusionMatrix{});
  for (int r = 0; r < 4; ++r) CHECK(n.zero_row[r]);
  CHECK(accuracy(ConfusionMatrix{}) == 0.0);
}

TEST_CASE("normalize_rows") {
  const NormalizedMatrix n = normalize_rows(ConfusionMatrix(kFixture));
  CHECK(n.rows[1][0] == 0.2);
  CHECK(n.rows[1][1] == 0.8);
  CHECK(n.rows[3][2] == doctest::Approx(0.1));
  for (const auto& row : n.rows) {
    double s = 0;
    for (double v : row) s += v;
    CHECK(s == doctest::Approx(1.0));
  }
  ConfusionMatrix::Cells cells{};
  cells[0] = {1, 1, 2, 0};
  const NormalizedMatrix partial = normalize_rows(ConfusionMatrix(cells));
  CHECK(partial.rows[0][2] == 0.5);
  CHECK(partial.zero_row[1]);
  CHECK_FALSE(partial.zero_row[0]);
}

TEST_CASE("input errors") {
  std::vector<ClassLabel> a(3, ClassLabel::Normal), b(2, ClassLabel::Normal), none;
  CHECK_THROWS_AS(confusion_matrix(a, b), Error);
  try {
    confusion_matrix(a, b);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::LengthMismatch);
  }
  try {
    confusion_matrix(none, none);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::EmptyInput);
  }
  ConfusionMatrix::Cells neg{};
  neg[0][0] = -1;
  CHECK_THROWS_AS(ConfusionMatrix{neg}, Error);
}

TEST_CASE("reports") {
  const ConfusionMatrix cm(kFixture);
  const auto j = nlohmann::json::parse(metrics_report_json(cm));
  CHECK(j["accuracy"] == 0.925);
  CHECK(j["total"] == 40);
  CHECK(j["matrix"][1][0] == 2);
  CHECK(j["per_class"]["Benign"]["recall"] == 0.8);
  CHECK(j["labels"][2] == "InSitu");

  const std::string text = metrics_report_text(cm);
  CHECK(text.find("Normal          0.83    1.00      0.91") != std::string::npos);
  CHECK(text.find("Invasive        1.00    0.90      0.95") != std::string::npos);
  CHECK(text.find("accuracy 0.9250 (40 images)") != std::string::npos);
}
