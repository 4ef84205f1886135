#include "flicker/metrics/stats.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace flicker {

double quantile(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw std::invalid_argument("quantile of an empty list");
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("quantile level must lie in [0, 1]");
  const double pos = p * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

double interquartile_mean(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("interquartile mean of an empty list");
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  const std::size_t trim = v.size() / 4;
  double sum = 0.0;
  for (std::size_t i = trim; i < v.size() - trim; ++i) sum += v[i];
  return sum / static_cast<double>(v.size() - 2 * trim);
}

Summary summarize(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("cannot aggregate an empty list of results");
  for (double x : values) {
    if (!std::isfinite(x)) throw std::invalid_argument("cannot aggregate a non-finite result");
  }
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  Summary s;
  s.count = v.size();
  double sum = 0.0;
  for (double x : v) sum += x;
  s.mean = sum / static_cast<double>(v.size());
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - s.mean) * (x - s.mean);
    s.std = std::sqrt(ss / static_cast<double>(v.size() - 1));
  }
  s.iqm = interquartile_mean(v);
  s.min = v.front();
  s.q1 = quantile(v, 0.25);
  s.median = quantile(v, 0.5);
  s.q3 = quantile(v, 0.75);
  s.max = v.back();
  return s;
}

}  // namespace flicker
