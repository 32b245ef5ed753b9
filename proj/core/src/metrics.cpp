#include "linprobit/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "linprobit/errors.hpp"

namespace linprobit {

namespace {

void check_labels(std::size_t n_scores, const std::vector<int>& labels) {
  if (n_scores != labels.size()) throw DimensionError("predictions and labels differ in length");
  if (labels.empty()) throw DimensionError("metrics need at least one prediction");
  for (int l : labels)
    if (l != 1 && l != -1) throw DomainError("labels must be +1 or -1");
}

}  // namespace

double accuracy(const std::vector<double>& probabilities, const std::vector<int>& labels) {
  check_labels(probabilities.size(), labels);
  std::size_t correct = 0;
  for (std::size_t k = 0; k < labels.size(); ++k) {
    const double p = probabilities[k];
    if (!(p >= 0.0 && p <= 1.0)) throw DomainError("probabilities must lie in [0, 1]");
    if ((p >= 0.5) == (labels[k] == 1)) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(labels.size());
}

double auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  check_labels(scores.size(), labels);
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Sum of midranks of the positives.
  double positive_rank_sum = 0.0;
  std::size_t positives = 0;
  for (std::size_t start = 0; start < n;) {
    std::size_t end = start;
    while (end < n && scores[order[end]] == scores[order[start]]) ++end;
    const double midrank = 0.5 * static_cast<double>(start + 1 + end);
    for (std::size_t k = start; k < end; ++k)
      if (labels[order[k]] == 1) {
        positive_rank_sum += midrank;
        ++positives;
      }
    start = end;
  }
  const std::size_t negatives = n - positives;
  if (positives == 0 || negatives == 0) throw DomainError("AUC needs both positive and negative labels");
  const double np = static_cast<double>(positives);
  return (positive_rank_sum - np * (np + 1.0) / 2.0) / (np * static_cast<double>(negatives));
}

MeanStd mean_std(const std::vector<double>& values) {
  MeanStd out;
  if (values.empty()) return out;
  const double n = static_cast<double>(values.size());
  out.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - out.mean) * (v - out.mean);
    out.stddev = std::sqrt(ss / (n - 1.0));
  }
  return out;
}

}  // namespace linprobit
