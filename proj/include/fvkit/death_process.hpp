// The pure death process with rates lambda_n = n(n-1+theta)/2 started from
// infinity: its marginal pmf d_n(t), its transition probabilities, and
// numerical checks of the identities that tie it to the Polya-urn overlap
// distribution.
//
// The series for d_n(t) alternates and cancels badly for small t, so it is
// summed in MPFR at PrecisionConfig::working_digits. Each value carries a
// bound made of the first neglected term (the terms are eventually monotone,
// so the alternating-series bound applies) plus a rounding bound.
#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "fvkit/rng.hpp"
#include "fvkit/stats.hpp"

namespace fvkit {

struct DeathParams {
  double theta = 1.0;  ///< theta >= 0; theta == 0 is the coalescent regime
  void validate() const;
};

struct PrecisionConfig {
  unsigned working_digits = 60;
  double tail_tol = 1e-12;
  std::size_t max_terms = 400;
  void validate() const;
};

/// Thrown when a series cannot meet its tolerance with the configured digits
/// or term budget.
class PrecisionExhausted : public std::runtime_error {
 public:
  PrecisionExhausted(const std::string& what, double achievable_tolerance);
  /// Smallest tolerance the current configuration could have honoured.
  double achievable_tolerance() const { return achievable_; }

 private:
  double achievable_;
};

struct DeathPmf {
  double t = 0;
  DeathParams params;
  PrecisionConfig prec;
  std::vector<double> probs;       ///< probs[n] = d_n(t), clamped to [0, 1]
  std::vector<double> term_bound;  ///< per-n error bound of the series value
  std::vector<std::size_t> clamped;  ///< indices whose raw value left [0, 1]
  std::size_t n_max = 0;           ///< last index kept
  double residual = 0;             ///< mass attributed to n > n_max

  double prob(std::size_t n) const { return n < probs.size() ? probs[n] : 0.0; }
  double mass() const;
};

struct SeriesValue {
  double value = 0;
  double term_bound = 0;      ///< first neglected term plus rounding bound
  double rounding_bound = 0;
  std::size_t terms = 0;
};

double death_rate(std::size_t n, const DeathParams& params);

/// Single d_n(t) from its series, unclamped.
SeriesValue death_prob_series(std::size_t n, double t, const DeathParams& params,
                              const PrecisionConfig& prec = {});

/// 1 - d_0(t) summed directly, so the value keeps relative accuracy when it is
/// tiny.
SeriesValue survival_series(double t, const DeathParams& params, const PrecisionConfig& prec = {});

DeathPmf death_pmf(double t, const DeathParams& params, const PrecisionConfig& prec = {});

/// Monte Carlo pmf of the death chain run for time t from a finite start n0
/// (standing in for the infinite start). Deterministic for a given rng state
/// regardless of `workers`.
EmpiricalPmf mc_death_pmf(double t, const DeathParams& params, std::size_t n0, std::size_t reps,
                          const Rng& rng, std::size_t workers = 1);

struct McSensitivityReport {
  EmpiricalPmf base;     ///< start n0
  EmpiricalPmf doubled;  ///< start 2 n0, independent stream
  std::size_t n0 = 0;
  double max_shift = 0;    ///< max_n |base - doubled|
  double max_shift_z = 0;  ///< max_n |base - doubled| / joint standard error
};

McSensitivityReport mc_death_pmf_sensitivity(double t, const DeathParams& params, std::size_t n0,
                                             std::size_t reps, const Rng& rng,
                                             std::size_t workers = 1);

/// P(D_{t+s} = r | D_t = n) for r = 0..n obtained by inverting the urn
/// identity sum_m C(m,r) theta_(m)/theta_(n+m) d_m(s). Requires theta > 0.
std::vector<double> transition_given_n(std::size_t n, double s, const DeathParams& params,
                                       const PrecisionConfig& prec = {});

/// Textbook pure-death transition with distinct rates (independent oracle).
/// Throws std::invalid_argument when lambda_r..lambda_n contain a repeat.
double transition_closed_form(std::size_t n, std::size_t r, double s, const DeathParams& params,
                              unsigned working_digits = 60);

/// |sum_{m>=n} m_[n]/(theta+m)_(n) d_m(s) - exp(-lambda_n s)|.
double check_result_a(std::size_t n, double s, const DeathParams& params,
                      const PrecisionConfig& prec = {});

struct ResultBReport {
  double series = 0;       ///< H(s) from the pmf
  double closed_form = 0;  ///< (exp(-lambda_{n-1}s) - exp(-lambda_n s)) / (2(lambda_n - lambda_{n-1}))
  double residual = 0;
  double probe_s = 0;      ///< smallest s at which H could be evaluated
  double h_probe = 0;
  double h_at_one = 0;
  bool vanishes_at_zero = false;  ///< 0 <= H(probe) <= probe/2, i.e. H(0+) = 0
};

ResultBReport result_b_report(std::size_t n, double s, const DeathParams& params,
                              const PrecisionConfig& prec = {});
/// |H(s) series - closed form|.
double check_result_b(std::size_t n, double s, const DeathParams& params,
                      const PrecisionConfig& prec = {});

/// |d_r(t+s) - sum_{n,m>=r} P(r|m,n) d_m(s) d_n(t)|.
double check_chapman_kolmogorov(std::size_t r, double t, double s, const DeathParams& params,
                                const PrecisionConfig& prec = {});

struct InequalityReport {
  double lower = 0;  ///< exp(-lambda_1 t)
  double value = 0;  ///< 1 - d_0(t)
  double upper = 0;  ///< (1 + theta) exp(-lambda_1 t)
  double margin = 0;
  bool holds = false;
};

InequalityReport inequality_report(double t, const DeathParams& params, const PrecisionConfig& prec = {});
bool check_inequality(double t, const DeathParams& params, const PrecisionConfig& prec = {});

/// Draws n with probability probs[n] / (1 - residual). Throws
/// std::invalid_argument when residual > 0.01.
std::size_t sample_death_count(const DeathPmf& pmf, Rng& rng);

}  // namespace fvkit
