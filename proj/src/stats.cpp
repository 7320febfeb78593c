#include "fvkit/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include <boost/math/distributions/chi_squared.hpp>

namespace fvkit {

EmpiricalPmf empirical_pmf(std::span<const std::uint64_t> counts, std::size_t reps) {
  EmpiricalPmf out;
  out.reps = reps;
  out.probs.resize(counts.size());
  out.std_errors.resize(counts.size());
  const double n = static_cast<double>(reps);
  for (std::size_t k = 0; k < counts.size(); ++k) {
    const double p = static_cast<double>(counts[k]) / n;
    out.probs[k] = p;
    out.std_errors[k] = std::sqrt(p * (1 - p) / n);
  }
  return out;
}

MomentEstimate estimate_moments(std::span<const double> xs) {
  if (xs.size() < 2) throw std::invalid_argument("need at least two samples");
  MomentEstimate est;
  est.count = xs.size();
  const double n = static_cast<double>(xs.size());
  const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  double m2 = 0, m4 = 0, raw2 = 0, raw4 = 0;
  for (double x : xs) {
    const double d = x - mean;
    m2 += d * d;
    m4 += d * d * d * d;
    raw2 += x * x;
    raw4 += x * x * x * x;
  }
  m2 /= n;
  m4 /= n;
  raw2 /= n;
  raw4 /= n;
  est.mean = mean;
  est.mean_se = std::sqrt(m2 / n);
  est.variance = m2 * n / (n - 1);
  est.variance_se = std::sqrt(std::max(0.0, m4 - m2 * m2) / n);
  est.second_moment = raw2;
  est.second_moment_se = std::sqrt(std::max(0.0, raw4 - raw2 * raw2) / n);
  return est;
}

double kolmogorov_survival(double x) {
  if (x <= 0) return 1.0;
  if (x < 0.3) {
    // Small-x form converges where the alternating series does not.
    const double pi = 3.14159265358979323846;
    double cdf = 0;
    for (int k = 1; k <= 50; ++k) {
      const double a = (2 * k - 1) * pi / x;
      cdf += std::exp(-a * a / 8);
    }
    return 1.0 - std::sqrt(2 * pi) / x * cdf;
  }
  double sum = 0;
  for (int k = 1; k <= 200; ++k) {
    const double term = std::exp(-2.0 * k * k * x * x);
    sum += (k % 2 == 1 ? term : -term);
    if (term < 1e-300) break;
  }
  return std::clamp(2 * sum, 0.0, 1.0);
}

KsResult ks_two_sample(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("KS test needs nonempty samples");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  KsResult out;
  out.statistic = d;
  const double en = std::sqrt(na * nb / (na + nb));
  // Stephens' small-sample correction.
  out.p_value = kolmogorov_survival((en + 0.12 + 0.11 / en) * d);
  return out;
}

ChiSquareResult chi_square_gof(std::span<const std::uint64_t> counts, std::span<const double> probs) {
  if (counts.size() != probs.size() || counts.size() < 2)
    throw std::invalid_argument("chi-square needs matching counts and probabilities");
  const double total = static_cast<double>(std::accumulate(counts.begin(), counts.end(), std::uint64_t{0}));
  ChiSquareResult out;
  for (std::size_t k = 0; k < counts.size(); ++k) {
    const double expected = total * probs[k];
    if (expected <= 0) throw std::invalid_argument("chi-square expected count must be positive");
    const double diff = static_cast<double>(counts[k]) - expected;
    out.statistic += diff * diff / expected;
  }
  out.dof = counts.size() - 1;
  boost::math::chi_squared dist(static_cast<double>(out.dof));
  out.p_value = boost::math::cdf(boost::math::complement(dist, out.statistic));
  return out;
}

double z_score(double observed, double expected, double se) {
  const double gap = std::abs(observed - expected);
  if (gap == 0) return 0;
  if (se == 0) return std::numeric_limits<double>::infinity();
  return gap / se;
}

}  // namespace fvkit
