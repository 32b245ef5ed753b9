#pragma once

#include <vector>

namespace linprobit {

/// Fraction of predictions with (p >= 0.5) == (label == +1).
/// Throws DimensionError on length mismatch or empty input.
double accuracy(const std::vector<double>& probabilities, const std::vector<int>& labels);

/// Area under the ROC curve as the Mann-Whitney statistic, ties counted 1/2.
/// Throws DomainError unless both classes are present.
double auc(const std::vector<double>& scores, const std::vector<int>& labels);

struct MeanStd {
  double mean = 0.0;
  double stddev = 0.0;  ///< sample standard deviation (n - 1); 0 for n < 2
};

MeanStd mean_std(const std::vector<double>& values);

}  // namespace linprobit
