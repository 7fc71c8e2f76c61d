#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "krcps/core.hpp"

namespace krcps {

// m i.i.d. draws of a stochastic sampler F(y), one per row.
struct SampleBatch {
  std::size_t rows = 0;
  std::size_t cols = 0;
  Vec data;  // row-major, rows * cols

  std::span<const double> row(std::size_t i) const {
    return std::span<const double>(data).subspan(i * cols, cols);
  }

  void validate() const {
    detail::require(rows >= 1 && cols >= 1, "SampleBatch: empty");
    detail::require(data.size() == rows * cols, "SampleBatch: bad shape");
    detail::require(detail::all_finite(data), "SampleBatch: non-finite entry");
  }
};

namespace detail {

// Smallest m for which floor((m+1) * alpha / 2) >= 1.
inline std::size_t min_samples_for_alpha(double alpha) {
  std::size_t m = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::ceil(2.0 / alpha)) - 1);
  while (std::floor(static_cast<double>(m + 1) * alpha / 2.0) < 1.0) ++m;
  return m;
}

// kth order statistic (1-indexed) of each column.
inline Vec column_order_stats(const SampleBatch& batch, std::size_t k_lo,
                              std::size_t k_hi, Vec& out_hi) {
  Vec lo(batch.cols);
  out_hi.resize(batch.cols);
  Vec column(batch.rows);
  for (std::size_t j = 0; j < batch.cols; ++j) {
    for (std::size_t i = 0; i < batch.rows; ++i)
      column[i] = batch.data[i * batch.cols + j];
    std::sort(column.begin(), column.end());
    lo[j] = column[k_lo - 1];
    out_hi[j] = column[k_hi - 1];
  }
  return lo;
}

}  // namespace detail

// Entrywise calibrated quantiles: per coordinate, the order statistics at
// ranks floor((m+1) alpha/2) and ceil((m+1)(1 - alpha/2)).  No
// interpolation anywhere; the coverage argument needs exact order stats.
inline IntervalBundle calibrated_quantiles(const SampleBatch& batch,
                                           double alpha) {
  batch.validate();
  detail::require(alpha > 0.0 && alpha < 1.0,
                  "calibrated_quantiles: alpha must be in (0,1)");
  const double m = static_cast<double>(batch.rows);
  const auto r_lo = static_cast<std::size_t>(std::floor((m + 1.0) * alpha / 2.0));
  const auto r_hi =
      static_cast<std::size_t>(std::ceil((m + 1.0) * (1.0 - alpha / 2.0)));
  if (r_lo < 1 || r_hi > batch.rows)
    throw std::invalid_argument(
        "calibrated_quantiles: insufficient samples for alpha=" +
        std::to_string(alpha) + "; need m >= " +
        std::to_string(detail::min_samples_for_alpha(alpha)) + ", got m = " +
        std::to_string(batch.rows));
  IntervalBundle b;
  b.lower = detail::column_order_stats(batch, r_lo, r_hi, b.upper);
  return b;
}

// Naive (uncalibrated) empirical quantiles at levels alpha/2 and
// 1 - alpha/2, nearest-rank rule ceil(m * level).
inline IntervalBundle naive_quantiles(const SampleBatch& batch, double alpha) {
  batch.validate();
  detail::require(alpha > 0.0 && alpha < 1.0,
                  "naive_quantiles: alpha must be in (0,1)");
  const double m = static_cast<double>(batch.rows);
  auto rank = [&](double level) {
    const auto r = static_cast<std::size_t>(std::ceil(m * level));
    return std::clamp<std::size_t>(r, 1, batch.rows);
  };
  IntervalBundle b;
  b.lower =
      detail::column_order_stats(batch, rank(alpha / 2.0),
                                 rank(1.0 - alpha / 2.0), b.upper);
  return b;
}

}  // namespace krcps
