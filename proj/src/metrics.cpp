#include "histo/metrics.hpp"

#include <cstdio>
#include <nlohmann/json.hpp>

#include "histo/error.hpp"

namespace histo {

ConfusionMatrix::ConfusionMatrix(const Cells& cells) : cells_(cells) {
  for (const auto& row : cells_)
    for (auto v : row)
      if (v < 0) throw Error(ErrorCode::InvalidArgument, "negative confusion count");
}

std::int64_t ConfusionMatrix::total() const {
  std::int64_t n = 0;
  for (const auto& row : cells_)
    for (auto v : row) n += v;
  return n;
}

std::int64_t ConfusionMatrix::tp(ClassLabel c) const { return at(c, c); }

std::int64_t ConfusionMatrix::fp(ClassLabel c) const {
  std::int64_t col = 0;
  for (const auto& row : cells_) col += row[index_of(c)];
  return col - tp(c);
}

std::int64_t ConfusionMatrix::fn(ClassLabel c) const {
  std::int64_t row = 0;
  for (auto v : cells_[index_of(c)]) row += v;
  return row - tp(c);
}

std::int64_t ConfusionMatrix::tn(ClassLabel c) const { return total() - tp(c) - fp(c) - fn(c); }

ConfusionMatrix confusion_matrix(std::span<const ClassLabel> y_true,
                                 std::span<const ClassLabel> y_pred) {
  if (y_true.size() != y_pred.size()) {
    throw Error(ErrorCode::LengthMismatch, std::to_string(y_true.size()) + " truths vs " +
                                               std::to_string(y_pred.size()) + " predictions");
  }
  if (y_true.empty()) throw Error(ErrorCode::EmptyInput, "no predictions to evaluate");
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < y_true.size(); ++i) cm.add(y_true[i], y_pred[i]);
  return cm;
}

namespace {

double ratio(std::int64_t num, std::int64_t den, bool& degenerate) {
  if (den == 0) {
    degenerate = true;
    return 0.0;
  }
  return static_cast<double>(num) / static_cast<double>(den);
}

double harmonic(double p, double r, bool& degenerate) {
  if (p + r == 0.0) {
    degenerate = true;
    return 0.0;
  }
  return 2.0 * p * r / (p + r);
}

}  // namespace

ClassMetrics class_metrics(const ConfusionMatrix& cm) {
  ClassMetrics m;
  std::int64_t tp_sum = 0, fp_sum = 0, fn_sum = 0;
  for (ClassLabel c : kAllLabels) {
    PrfScores& s = m.per_class[index_of(c)];
    const auto tp = cm.tp(c), fp = cm.fp(c), fn = cm.fn(c);
    s.precision = ratio(tp, tp + fp, s.degenerate);
    s.recall = ratio(tp, tp + fn, s.degenerate);
    s.f1 = harmonic(s.precision, s.recall, s.degenerate);
    m.macro.precision += s.precision / kNumClasses;
    m.macro.recall += s.recall / kNumClasses;
    m.macro.f1 += s.f1 / kNumClasses;
    m.macro.degenerate = m.macro.degenerate || s.degenerate;
    tp_sum += tp;
    fp_sum += fp;
    fn_sum += fn;
  }
  bool ignored = false;
  m.micro_precision = ratio(tp_sum, tp_sum + fp_sum, ignored);
  m.micro_recall = ratio(tp_sum, tp_sum + fn_sum, ignored);
  m.accuracy = accuracy(cm);
  return m;
}

NormalizedMatrix normalize_rows(const ConfusionMatrix& cm) {
  NormalizedMatrix out;
  for (int r = 0; r < kNumClasses; ++r) {
    std::int64_t sum = 0;
    for (auto v : cm.cells()[r]) sum += v;
    out.zero_row[r] = sum == 0;
    for (int c = 0; c < kNumClasses; ++c) {
      out.rows[r][c] = sum == 0 ? 0.0 : static_cast<double>(cm.cells()[r][c]) / sum;
    }
  }
  return out;
}

double accuracy(const ConfusionMatrix& cm) {
  const auto total = cm.total();
  if (total == 0) return 0.0;
  std::int64_t trace = 0;
  for (ClassLabel c : kAllLabels) trace += cm.tp(c);
  return static_cast<double>(trace) / total;
}

std::string metrics_report_json(const ConfusionMatrix& cm) {
  const ClassMetrics m = class_metrics(cm);
  const NormalizedMatrix norm = normalize_rows(cm);
  nlohmann::json j;
  j["labels"] = nlohmann::json::array();
  for (ClassLabel c : kAllLabels) j["labels"].push_back(std::string(label_name(c)));
  j["matrix"] = cm.cells();
  j["normalized"] = norm.rows;
  j["zero_rows"] = norm.zero_row;
  for (ClassLabel c : kAllLabels) {
    const auto& s = m.per_class[index_of(c)];
    j["per_class"][std::string(label_name(c))] = {{"precision", s.precision},
                                                  {"recall", s.recall},
                                                  {"f1", s.f1},
                                                  {"degenerate", s.degenerate}};
  }
  j["macro"] = {{"precision", m.macro.precision},
                {"recall", m.macro.recall},
                {"f1", m.macro.f1},
                {"degenerate", m.macro.degenerate}};
  j["accuracy"] = m.accuracy;
  j["total"] = cm.total();
  return j.dump(2);
}

std::string metrics_report_text(const ConfusionMatrix& cm) {
  const ClassMetrics m = class_metrics(cm);
  std::string out;
  char line[128];
  std::snprintf(line, sizeof line, "%-10s %9s %7s %9s\n", "", "Precision", "Recall", "F1-score");
  out += line;
  for (ClassLabel c : kAllLabels) {
    const auto& s = m.per_class[index_of(c)];
    std::snprintf(line, sizeof line, "%-10s %9.2f %7.2f %9.2f%s\n",
                  std::string(label_name(c)).c_str(), s.precision, s.recall, s.f1,
                  s.degenerate ? "  (degenerate)" : "");
    out += line;
  }
  std::snprintf(line, sizeof line, "%-10s %9.2f %7.2f %9.2f\n", "macro", m.macro.precision,
                m.macro.recall, m.macro.f1);
  out += line;
  std::snprintf(line, sizeof line, "accuracy %.4f (%lld images)\n", m.accuracy,
                static_cast<long long>(cm.total()));
  out += line;
  return out;
}

}  // namespace histo
