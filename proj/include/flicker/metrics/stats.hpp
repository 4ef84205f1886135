#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace flicker {

struct Summary {
  std::size_t count = 0;
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation, 0 for a single value
  double iqm = 0.0;
  double min = 0.0;
  double q1 = 0.0;
  double median = 0.0;
  double q3 = 0.0;
  double max = 0.0;
};

// Quantile p in [0, 1] of sorted values, linear between order statistics
// (position p * (n - 1)).
double quantile(std::span<const double> sorted, double p);

// Interquartile mean: drops floor(n / 4) values from each end of the sorted
// list and averages the rest.
double interquartile_mean(std::span<const double> values);

// Throws std::invalid_argument on an empty list or a non-finite value.
Summary summarize(std::span<const double> values);

}  // namespace flicker
