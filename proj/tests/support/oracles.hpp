#pragma once

// Brute-force reference implementations used only by the tests. They are
// written straight from the definitions and share no code with the library.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <vector>

namespace oracle {

// Pairwise counting over every positive/negative pair; ties count half.
inline double auc_pairs(const std::vector<double>& s, const std::vector<std::uint8_t>& y) {
  double wins = 0.0;
  double pairs = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!y[i]) continue;
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (y[j]) continue;
      pairs += 1.0;
      if (s[i] > s[j]) wins += 1.0;
      else if (s[i] == s[j]) wins += 0.5;
    }
  }
  return wins / pairs;
}

// Walks every distinct threshold from the top of the ranked list and sums
// precision times the recall gained at that threshold.
inline double average_precision(const std::vector<double>& s, const std::vector<std::uint8_t>& y) {
  std::vector<double> thresholds(s);
  std::sort(thresholds.begin(), thresholds.end(), std::greater<>());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
  const double positives = static_cast<double>(std::count(y.begin(), y.end(), 1));
  double ap = 0.0;
  double prev_recall = 0.0;
  for (double t : thresholds) {
    double tp = 0.0;
    double admitted = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (s[i] >= t) {
        admitted += 1.0;
        tp += y[i];
      }
    }
    const double recall = tp / positives;
    ap += (tp / admitted) * (recall - prev_recall);
    prev_recall = recall;
  }
  return ap;
}

// Step-by-step UCB1 over a scripted reward table rewards[t][arm]: every arm
// once in order, then the first arm maximizing mean + sqrt(2 ln n / n_j).
inline std::vector<std::size_t> ucb1_trace(const std::vector<std::vector<double>>& rewards, std::size_t n_arms) {
  std::vector<double> sum(n_arms, 0.0);
  std::vector<double> pulls(n_arms, 0.0);
  std::vector<std::size_t> trace;
  for (std::size_t t = 0; t < rewards.size(); ++t) {
    std::size_t pick = n_arms;
    for (std::size_t j = 0; j < n_arms && pick == n_arms; ++j) {
      if (pulls[j] == 0.0) pick = j;
    }
    if (pick == n_arms) {
      double best = -std::numeric_limits<double>::infinity();
      const double n = static_cast<double>(t);
      for (std::size_t j = 0; j < n_arms; ++j) {
        const double v = sum[j] / pulls[j] + std::sqrt(2.0 * std::log(n) / pulls[j]);
        if (v > best) {
          best = v;
          pick = j;
        }
      }
    }
    sum[pick] += rewards[t][pick];
    pulls[pick] += 1.0;
    trace.push_back(pick);
  }
  return trace;
}

// Expected value of clip(round(1 + 4 * (mu + sd * Z)), 1, 5): Simpson's rule
// on each interval of z where the rounded rating is constant.
inline double expected_clipped_rating(double mu, double sd) {
  const double pi = std::acos(-1.0);
  const auto density = [&](double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * pi); };
  const auto rating_at = [&](double z) { return std::clamp(std::floor(1.0 + 4.0 * (mu + sd * z) + 0.5), 1.0, 5.0); };
  std::vector<double> cuts{-12.0};
  for (double edge : {1.5, 2.5, 3.5, 4.5}) {
    const double z = ((edge - 1.0) / 4.0 - mu) / sd;
    if (z > -12.0 && z < 12.0) cuts.push_back(z);
  }
  cuts.push_back(12.0);
  double e = 0.0;
  for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
    const double a = cuts[k];
    const double b = cuts[k + 1];
    const int steps = 4000;
    const double h = (b - a) / steps;
    double s = density(a) + density(b);
    for (int i = 1; i < steps; ++i) s += density(a + i * h) * (i % 2 == 1 ? 4.0 : 2.0);
    e += rating_at(0.5 * (a + b)) * s * h / 3.0;
  }
  return e;
}

}  // namespace oracle
