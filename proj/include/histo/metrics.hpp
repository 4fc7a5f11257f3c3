#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>

#include "histo/labels.hpp"

namespace histo {

/// Rows are true classes, columns predicted classes.
class ConfusionMatrix {
 public:
  using Cells = std::array<std::array<std::int64_t, kNumClasses>, kNumClasses>;

  ConfusionMatrix() = default;
  explicit ConfusionMatrix(const Cells& cells);

  std::int64_t at(ClassLabel truth, ClassLabel predicted) const {
    return cells_[index_of(truth)][index_of(predicted)];
  }
  const Cells& cells() const noexcept { return cells_; }
  void add(ClassLabel truth, ClassLabel predicted) {
    ++cells_[index_of(truth)][index_of(predicted)];
  }

  std::int64_t total() const;
  std::int64_t tp(ClassLabel c) const;
  std::int64_t fp(ClassLabel c) const;
  std::int64_t fn(ClassLabel c) const;
  std::int64_t tn(ClassLabel c) const;

 private:
  Cells cells_{};
};

ConfusionMatrix confusion_matrix(std::span<const ClassLabel> y_true,
                                 std::span<const ClassLabel> y_pred);

struct PrfScores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  /// Set when any of the three involved a 0/0 and was reported as 0.
  bool degenerate = false;
};

struct ClassMetrics {
  std::array<PrfScores, kNumClasses> per_class;
  PrfScores macro;
  double micro_precision = 0.0;
  double micro_recall = 0.0;
  double accuracy = 0.0;
};

ClassMetrics class_metrics(const ConfusionMatrix& cm);

struct NormalizedMatrix {
  std::array<std::array<double, kNumClasses>, kNumClasses> rows{};
  std::array<bool, kNumClasses> zero_row{};
};

NormalizedMatrix normalize_rows(const ConfusionMatrix& cm);

/// trace / total; 0 for an empty matrix.
double accuracy(const ConfusionMatrix& cm);

/// {matrix, normalized, per_class, macro, accuracy} at full precision.
std::string metrics_report_json(const ConfusionMatrix& cm);

/// Precision / recall / F1 per class to two decimals, plus accuracy.
std::string metrics_report_text(const ConfusionMatrix& cm);

}  // namespace histo
