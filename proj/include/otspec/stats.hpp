#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace otspec {

// Pairwise (cascade) summation in index order; deterministic for a given input.
double pairwise_sum(std::span<const double> values);

double mean(std::span<const double> values);
// Two-pass population variance (divides by n).
double variance(std::span<const double> values);

struct Estimate {
  double value = 0.0;
  double standard_error = 0.0;
};

struct IndexRange {
  std::size_t begin;
  std::size_t end;
};

// Contiguous partition of [0, n) into `blocks` nearly equal ranges.
std::vector<IndexRange> block_partition(std::size_t n, int blocks);

// Sum of values over the given ranges, in range order.
double sum_over(std::span<const double> values, std::span<const IndexRange> ranges);

using RangeStatistic = std::function<double(std::span<const IndexRange>)>;

// Delete-one-block jackknife: value is the full-sample statistic, the
// standard error is sqrt((B-1)/B * sum_b (stat_{-b} - mean)^2).
Estimate jackknife(std::size_t n, int blocks, const RangeStatistic& statistic);

}  // namespace otspec
