#pragma once

#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "postop/error.hpp"
#include "postop/metrics.hpp"
#include "postop/random.hpp"

namespace postop::stats {

enum class CiMethod { Bootstrap, T };

inline constexpr std::uint64_t kDefaultSeed = 20240917;
inline constexpr std::size_t kBootstrapResamples = 10000;

struct MeanCi {
  double mean = 0, lo = 0, hi = 0;
  std::size_t n = 0;
  /// n == 1: the interval collapses onto the value.
  bool degenerate = false;
};

struct CiOptions {
  CiMethod method = CiMethod::Bootstrap;
  double confidence = 0.95;
  std::size_t resamples = kBootstrapResamples;
  std::uint64_t seed = kDefaultSeed;
};

/// Sum in input order; callers rely on this for reproducible aggregates.
inline double ordered_sum(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s;
}

inline double mean(std::span<const double> v) {
  if (v.empty()) throw Error(ErrorCode::EmptyInput, "mean of empty list");
  return ordered_sum(v) / static_cast<double>(v.size());
}

/// Population standard deviation (divides by n), two-pass.
inline double population_sd(std::span<const double> v) {
  const double m = mean(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size()));
}

/// Mean and two-sided confidence interval.
///
/// Bootstrap: percentile method over `resamples` resampled means, indices
/// drawn from CounterRng(seed), interval ends by linear-interpolation
/// percentiles. t: mean +/- t(n-1, (1+c)/2) * sd / sqrt(n) with sd the
/// population standard deviation.
inline MeanCi mean_ci(std::span<const double> values, const CiOptions& opt = {}) {
  if (values.empty()) throw Error(ErrorCode::EmptyInput, "mean_ci of empty list");
  MeanCi r;
  r.n = values.size();
  r.mean = mean(values);
  if (r.n == 1) {
    r.lo = r.hi = r.mean;
    r.degenerate = true;
    return r;
  }
  const double alpha = 1.0 - opt.confidence;
  if (opt.method == CiMethod::T) {
    const boost::math::students_t dist(static_cast<double>(r.n - 1));
    const double tq = boost::math::quantile(dist, 1.0 - alpha / 2.0);
    const double half = tq * population_sd(values) / std::sqrt(static_cast<double>(r.n));
    r.lo = r.mean - half;
    r.hi = r.mean + half;
    return r;
  }
  const CounterRng rng(opt.seed);
  std::vector<double> means(opt.resamples);
  const std::uint64_t n = r.n;
  for (std::size_t b = 0; b < opt.resamples; ++b) {
    double s = 0.0;
    for (std::uint64_t i = 0; i < n; ++i) s += values[rng.below(b * n + i, n)];
    means[b] = s / static_cast<double>(n);
  }
  std::sort(means.begin(), means.end());
  r.lo = percentile_sorted(means, alpha / 2.0);
  r.hi = percentile_sorted(means, 1.0 - alpha / 2.0);
  return r;
}

struct MedianIqr {
  double median = 0, q1 = 0, q3 = 0;
  std::size_t n = 0;
};

inline MedianIqr median_iqr(std::span<const double> values) {
  if (values.empty()) throw Error(ErrorCode::EmptyInput, "median_iqr of empty list");
  std::vector<double> s(values.begin(), values.end());
  std::sort(s.begin(), s.end());
  return {percentile_sorted(s, 0.5), percentile_sorted(s, 0.25), percentile_sorted(s, 0.75), s.size()};
}

/// Mean, sample SD, median and quartiles; the layout of BraTS-style summaries.
struct Describe {
  double mean = 0, sd = 0, median = 0, q1 = 0, q3 = 0;
  std::size_t n = 0;
};

inline Describe describe(std::span<const double> values) {
  if (values.empty()) throw Error(ErrorCode::EmptyInput, "describe of empty list");
  Describe d;
  d.n = values.size();
  d.mean = mean(values);
  double ss = 0.0;
  for (double x : values) ss += (x - d.mean) * (x - d.mean);
  d.sd = d.n > 1 ? std::sqrt(ss / static_cast<double>(d.n - 1)) : 0.0;
  const auto mi = median_iqr(values);
  d.median = mi.median;
  d.q1 = mi.q1;
  d.q3 = mi.q3;
  return d;
}

}  // namespace postop::stats
