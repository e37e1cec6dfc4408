#include "otspec/random.hpp"

#include <cmath>

namespace otspec {

Rng make_stream(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32),
                    0x9e3779b9u};
  return Rng(seq);
}

double open_uniform(Rng& rng) {
  // 53 random bits, shifted by half an ulp away from both endpoints.
  return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

SpdMatrix random_spd(int n, Rng& rng, double log_range) {
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> exponent(-log_range, log_range);
  Mat g(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) g(i, j) = normal(rng);
  const Mat q = Eigen::HouseholderQR<Mat>(g).householderQ();
  Vec d(n);
  for (int i = 0; i < n; ++i) d(i) = std::exp(exponent(rng));
  return SpdMatrix(q.transpose() * d.asDiagonal() * q);
}

Mat random_invertible(int n, Rng& rng, double max_condition) {
  std::normal_distribution<double> normal;
  for (;;) {
    Mat t(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) t(i, j) = normal(rng);
    Eigen::JacobiSVD<Mat> svd(t);
    const Vec& s = svd.singularValues();
    if (s(n - 1) > 0.0 && s(0) / s(n - 1) < max_condition) return t;
  }
}

Vec random_unit_vector(int n, Rng& rng) {
  std::normal_distribution<double> normal;
  Vec v(n);
  do {
    for (int i = 0; i < n; ++i) v(i) = normal(rng);
  } while (v.norm() == 0.0);
  return v / v.norm();
}

}  // namespace otspec
