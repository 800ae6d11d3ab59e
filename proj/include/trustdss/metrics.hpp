#pragma once

#include <cstdint>
#include <span>

namespace trustdss {

// Mann-Whitney form: P(score_pos > score_neg) + 0.5 * P(tie), over all
// positive/negative pairs. Throws std::invalid_argument unless both classes
// are present.
double auc_roc(std::span<const double> scores, std::span<const std::uint8_t> labels);

// Step-wise average precision: sum over thresholds that admit positives of
// precision * recall increment. Tied scores form one threshold. Throws
// std::invalid_argument without positives.
double auc_pr(std::span<const double> scores, std::span<const std::uint8_t> labels);

// Fraction of labels matched by [score >= threshold].
double accuracy(std::span<const double> scores, std::span<const std::uint8_t> labels,
                double threshold = 0.5);

}  // namespace trustdss
