#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>

namespace histo {

/// Tissue classes. The numeric order is fixed: it is the axis order of every
/// confusion matrix and the last-resort tie-break order of the vote.
enum class ClassLabel : int { Normal = 0, Benign = 1, InSitu = 2, Invasive = 3 };

inline constexpr int kNumClasses = 4;

inline constexpr std::array<ClassLabel, kNumClasses> kAllLabels = {
    ClassLabel::Normal, ClassLabel::Benign, ClassLabel::InSitu, ClassLabel::Invasive};

constexpr int index_of(ClassLabel label) { return static_cast<int>(label); }

ClassLabel label_from_index(int index);

std::string_view label_name(ClassLabel label);

/// Case-insensitive; accepts the canonical names and the short codes N/B/IS/IV.
std::optional<ClassLabel> parse_label(std::string_view text);

}  // namespace histo
