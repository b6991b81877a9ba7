#pragma once

#include <array>
#include <span>
#include <vector>

namespace navlab {

struct Correlation {
  double r = 0.0;
  double p = 1.0;  // two-sided, t-distribution with n-2 degrees of freedom
  std::size_t n = 0;
};

/// Product-moment correlation. Throws ValidationError on length mismatch,
/// fewer than 3 points, or a constant input (r is undefined there).
Correlation pearson(std::span<const double> xs, std::span<const double> ys);

/// Pearson on average ranks.
Correlation spearman(std::span<const double> xs, std::span<const double> ys);

/// Average ranks (1-based), ties share the mean of their positions.
std::vector<double> ranks(std::span<const double> xs);

/// Throws ValidationError on an empty input.
double median(std::vector<double> xs);
double mean(std::span<const double> xs);

/// Projects rows onto their two leading principal components (centered).
std::vector<std::array<double, 2>> pca_2d(const std::vector<std::vector<float>>& rows);

}  // namespace navlab
