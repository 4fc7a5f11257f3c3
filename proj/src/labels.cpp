#include "histo/labels.hpp"

#include <algorithm>
#include <cctype>

#include "histo/error.hpp"

namespace histo {

ClassLabel label_from_index(int index) {
  if (index < 0 || index >= kNumClasses) {
    throw Error(ErrorCode::UnknownLabel, "class index " + std::to_string(index));
  }
  return static_cast<ClassLabel>(index);
}

std::string_view label_name(ClassLabel label) {
  switch (label) {
    case ClassLabel::Normal: return "Normal";
    case ClassLabel::Benign: return "Benign";
    case ClassLabel::InSitu: return "InSitu";
    case ClassLabel::Invasive: return "Invasive";
  }
  return "Unknown";
}

std::optional<ClassLabel> parse_label(std::string_view text) {
  std::string lower(text);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "normal" || lower == "n") return ClassLabel::Normal;
  if (lower == "benign" || lower == "b") return ClassLabel::Benign;
  if (lower == "insitu" || lower == "in_situ" || lower == "is") return ClassLabel::InSitu;
  if (lower == "invasive" || lower == "iv") return ClassLabel::Invasive;
  return std::nullopt;
}

}  // namespace histo
