#include "otspec/stats.hpp"

#include "otspec/errors.hpp"

#include <cmath>

namespace otspec {

double pairwise_sum(std::span<const double> values) {
  constexpr std::size_t kLeaf = 32;
  if (values.size() <= kLeaf) {
    double s = 0.0;
    for (double v : values) s += v;
    return s;
  }
  const std::size_t half = values.size() / 2;
  return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

double mean(std::span<const double> values) {
  if (values.empty()) throw DomainError("mean: empty sample");
  return pairwise_sum(values) / static_cast<double>(values.size());
}

double variance(std::span<const double> values) {
  const double m = mean(values);
  std::vector<double> sq(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) sq[i] = (values[i] - m) * (values[i] - m);
  return pairwise_sum(sq) / static_cast<double>(values.size());
}

std::vector<IndexRange> block_partition(std::size_t n, int blocks) {
  if (blocks < 1) throw DomainError("block_partition: blocks must be positive");
  std::vector<IndexRange> out;
  out.reserve(blocks);
  const std::size_t b = static_cast<std::size_t>(blocks);
  for (std::size_t k = 0; k < b; ++k) out.push_back({k * n / b, (k + 1) * n / b});
  return out;
}

double sum_over(std::span<const double> values, std::span<const IndexRange> ranges) {
  std::vector<double> partial;
  partial.reserve(ranges.size());
  for (const auto& r : ranges) partial.push_back(pairwise_sum(values.subspan(r.begin, r.end - r.begin)));
  return pairwise_sum(partial);
}

Estimate jackknife(std::size_t n, int blocks, const RangeStatistic& statistic) {
  const auto parts = block_partition(n, blocks);
  Estimate est;
  est.value = statistic(parts);
  if (blocks < 2) return est;
  std::vector<double> loo(parts.size());
  std::vector<IndexRange> kept;
  for (std::size_t b = 0; b < parts.size(); ++b) {
    kept.clear();
    for (std::size_t k = 0; k < parts.size(); ++k)
      if (k != b) kept.push_back(parts[k]);
    loo[b] = statistic(kept);
  }
  const double m = mean(loo);
  double ss = 0.0;
  for (double v : loo) ss += (v - m) * (v - m);
  const double bb = static_cast<double>(parts.size());
  est.standard_error = std::sqrt((bb - 1.0) / bb * ss);
  return est;
}

}  // namespace otspec
