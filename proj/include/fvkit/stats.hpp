// Small statistical toolbox for the Monte Carlo oracles.
#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace fvkit {

/// Frequencies of a nonnegative integer variable with binomial standard errors.
struct EmpiricalPmf {
  std::vector<double> probs;
  std::vector<double> std_errors;
  std::size_t reps = 0;

  double prob(std::size_t k) const { return k < probs.size() ? probs[k] : 0.0; }
  double std_error(std::size_t k) const { return k < std_errors.size() ? std_errors[k] : 0.0; }
};

EmpiricalPmf empirical_pmf(std::span<const std::uint64_t> counts, std::size_t reps);

/// Sample mean and variance with large-sample standard errors; the variance
/// error uses sqrt((m4 - s^4) / N).
struct MomentEstimate {
  double mean = 0;
  double mean_se = 0;
  double variance = 0;
  double variance_se = 0;
  double second_moment = 0;
  double second_moment_se = 0;
  std::size_t count = 0;
};

MomentEstimate estimate_moments(std::span<const double> xs);

struct KsResult {
  double statistic = 0;
  double p_value = 1;
};

/// Two-sample Kolmogorov-Smirnov test with the asymptotic Kolmogorov p-value.
KsResult ks_two_sample(std::vector<double> a, std::vector<double> b);

/// Survival function of the Kolmogorov distribution, P(K > x).
double kolmogorov_survival(double x);

struct ChiSquareResult {
  double statistic = 0;
  std::size_t dof = 0;
  double p_value = 1;
};

/// Goodness of fit of observed counts against expected probabilities.
ChiSquareResult chi_square_gof(std::span<const std::uint64_t> counts, std::span<const double> probs);

/// |observed - expected| / se, or 0 when both the gap and se vanish.
double z_score(double observed, double expected, double se);

}  // namespace fvkit
