#include "trustdss/metrics.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace trustdss {

namespace {

void check_sizes(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  if (scores.size() != labels.size()) throw std::invalid_argument("scores and labels differ in length");
}

std::vector<std::size_t> order_by_score_desc(std::span<const double> scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return order;
}

}  // namespace

double auc_roc(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  check_sizes(scores, labels);
  const auto order = order_by_score_desc(scores);
  double pos = 0;
  double neg = 0;
  for (auto l : labels) (l ? pos : neg) += 1;
  if (pos == 0 || neg == 0) throw std::invalid_argument("auc_roc needs both classes");

  // Walk tie groups from the top; every negative in a group beats the
  // positives below it and ties with the positives in the group.
  double positives_above = 0;
  double credit = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    double gp = 0;
    double gn = 0;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      (labels[order[j]] ? gp : gn) += 1;
      ++j;
    }
    credit += gn * (positives_above + 0.5 * gp);
    positives_above += gp;
    i = j;
  }
  return credit / (pos * neg);
}

double auc_pr(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  check_sizes(scores, labels);
  const auto order = order_by_score_desc(scores);
  const double total_pos = static_cast<double>(std::count(labels.begin(), labels.end(), 1));
  if (total_pos == 0) throw std::invalid_argument("auc_pr needs at least one positive");

  double tp = 0;
  double fp = 0;
  double ap = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    double gp = 0;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      (labels[order[j]] ? tp : fp) += 1;
      gp += labels[order[j]] ? 1 : 0;
      ++j;
    }
    if (gp > 0) ap += (tp / (tp + fp)) * (gp / total_pos);
    i = j;
  }
  return ap;
}

double accuracy(std::span<const double> scores, std::span<const std::uint8_t> labels, double threshold) {
  check_sizes(scores, labels);
  if (scores.empty()) throw std::invalid_argument("accuracy of an empty set");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    hits += (scores[i] >= threshold) == (labels[i] != 0) ? 1 : 0;
  }
  return static_cast<double>(hits) / static_cast<double>(scores.size());
}

}  // namespace trustdss
