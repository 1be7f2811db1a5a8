#pragma once

#include <span>
#include <vector>

namespace squadplan {

double mean(std::span<const double> x);
/// Sample standard deviation (n - 1 denominator); 0 for fewer than two values.
double sample_std(std::span<const double> x);
double standard_error(std::span<const double> x);

struct WelchResult {
  double t = 0.0;
  double df = 0.0;
  double p_two_sided = 1.0;
  double p_less = 0.5;  // alternative: mean(a) < mean(b)
};

/// Unequal-variance two-sample t test. Needs at least two values per sample.
WelchResult welch_t_test(std::span<const double> a, std::span<const double> b);

double pearson(std::span<const double> x, std::span<const double> y);

/// Trailing mean over up to `window` values ending at each position.
std::vector<double> rolling_mean(std::span<const double> x, std::size_t window);

/// (reference - candidate) / reference * 100.
double reduction_percent(double reference, double candidate);

}  // namespace squadplan
