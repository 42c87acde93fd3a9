#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "nlsgibbs/error.hpp"

namespace nlsgibbs {

struct MeanEstimate {
  double mean = 0.0;
  double std_error = 0.0;
};

inline MeanEstimate sample_mean(std::span<const double> xs) {
  if (xs.empty()) throw InvalidArgument("sample_mean: empty sample");
  double m = 0.0;
  for (double x : xs) m += x;
  m /= static_cast<double>(xs.size());
  double v = 0.0;
  for (double x : xs) v += (x - m) * (x - m);
  const double n = static_cast<double>(xs.size());
  const double se = xs.size() > 1 ? std::sqrt(v / (n - 1.0) / n) : 0.0;
  return {m, se};
}

/// Ordinary least squares y = intercept + slope x.
struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_stderr = 0.0;
};

inline LinearFit fit_line(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw InvalidArgument("fit_line: need >= 2 paired points");
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) mx += x[i], my += y[i];
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx == 0.0) throw InvalidArgument("fit_line: degenerate abscissae");
  LinearFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  if (x.size() > 2) {
    double rss = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double r = y[i] - f.intercept - f.slope * x[i];
      rss += r * r;
    }
    f.slope_stderr = std::sqrt(rss / (n - 2.0) / sxx);
  }
  return f;
}

/// Slope of log(y) against log(x).
inline LinearFit fit_power_law(std::span<const double> x, std::span<const double> y) {
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0)) throw InvalidArgument("fit_power_law: nonpositive data");
    lx.push_back(std::log(x[i]));
    ly.push_back(std::log(y[i]));
  }
  return fit_line(lx, ly);
}

inline double median(std::vector<double> xs) {
  if (xs.empty()) throw InvalidArgument("median: empty sample");
  const auto mid = xs.begin() + static_cast<std::ptrdiff_t>(xs.size() / 2);
  std::nth_element(xs.begin(), mid, xs.end());
  double m = *mid;
  if (xs.size() % 2 == 0) m = 0.5 * (m + *std::max_element(xs.begin(), mid));
  return m;
}

/// Bootstrap standard error of the median.
inline double bootstrap_median_stderr(std::span<const double> xs, int resamples, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, xs.size() - 1);
  std::vector<double> meds;
  meds.reserve(static_cast<std::size_t>(resamples));
  std::vector<double> buf(xs.size());
  for (int r = 0; r < resamples; ++r) {
    for (auto& b : buf) b = xs[pick(rng)];
    meds.push_back(median(buf));
  }
  return sample_mean(meds).std_error * std::sqrt(static_cast<double>(meds.size()));
}

}  // namespace nlsgibbs
