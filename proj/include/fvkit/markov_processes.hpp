// Stationary Markov processes built from the Dirichlet process: the DAR(1)
// chain on S, the discrete-time measure-valued chain, and the Fleming-Viot
// transition obtained by randomising the sample size with the death process.
#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "fvkit/death_process.hpp"
#include "fvkit/random_measures.hpp"
#include "fvkit/rng.hpp"
#include "fvkit/stats.hpp"

namespace fvkit {

struct Dar1Config {
  double theta = 1;
  BaseMeasure base;
  void validate() const;
};

/// Fresh nu_0 draw with probability theta/(1+theta), else x.
Location dar1_step(const Location& x, const Dar1Config& cfg, Rng& rng);

/// Row-major k x k transition matrix over the atoms of a finite base.
std::vector<std::vector<double>> dar1_transition_matrix(const Dar1Config& cfg);
/// max_{x,y} |nu_0(x) P(x,y) - nu_0(y) P(y,x)|.
double dar1_detailed_balance(const Dar1Config& cfg);

struct RetentionReport {
  double rate = 0;      ///< fraction of steps that kept the current state
  double expected = 0;  ///< 1 / (1 + theta)
  double std_error = 0;
};

/// Retention counted by location identity, so `cfg.base` should be nonatomic.
RetentionReport dar1_retention(const Dar1Config& cfg, std::size_t steps, Rng& rng);

/// Chi-square test of the long-run marginal against nu_0 on a finite base,
/// recording every `thin`-th state of one chain started from nu_0.
ChiSquareResult dar1_marginal_test(const Dar1Config& cfg, std::size_t samples, std::size_t thin, Rng& rng);

struct MeasureChainConfig {
  double theta = 1;
  BaseMeasure base;
  std::size_t n = 1;
  Truncation truncation;
  double max_residual = 0.01;  ///< largest input residual accepted when sampling from mu
  void validate() const;
};

/// X_1..X_n iid from mu, then a draw from Pi(theta nu_0 + sum delta_{X_i}).
DiscreteMeasure measure_chain_step(const DiscreteMeasure& mu, const MeasureChainConfig& cfg, Rng& rng);

struct FvConfig {
  double theta = 1;
  BaseMeasure base;
  double t = 1;
  PrecisionConfig prec;
  Truncation truncation;
  double max_residual = 0.01;
  void validate() const;
};

/// Fleming-Viot transition over a fixed time step. The death pmf is computed
/// once at construction and shared read-only by every step.
class FlemingViotKernel {
 public:
  explicit FlemingViotKernel(FvConfig cfg);

  const FvConfig& config() const { return cfg_; }
  const DeathPmf& death_pmf() const { return pmf_; }

  /// n ~ d_n(t), then the measure-chain step with that n (n = 0 gives a fresh
  /// prior draw).
  DiscreteMeasure step(const DiscreteMeasure& mu, Rng& rng) const;
  /// The step with n forced instead of sampled.
  DiscreteMeasure step_with_count(const DiscreteMeasure& mu, std::size_t n, Rng& rng) const;

 private:
  FvConfig cfg_;
  DeathPmf pmf_;
};

/// One-off convenience wrapper; builds a kernel per call.
DiscreteMeasure fv_step(const DiscreteMeasure& mu, const FvConfig& cfg, Rng& rng);

/// A draw from the stationary law Pi(theta nu_0).
DiscreteMeasure stationary_draw(double theta, const BaseMeasure& base, const Truncation& truncation, Rng& rng);

struct TwoSampleReport {
  KsResult ks;
  MomentEstimate first;   ///< arm one
  MomentEstimate second;  ///< arm two
  double mean_diff = 0;
  double mean_diff_se = 0;
  double var_diff = 0;
  double var_diff_se = 0;
  bool rejected(double level) const { return ks.p_value < level; }
};

TwoSampleReport compare_samples(const std::vector<double>& a, const std::vector<double>& b);

/// From one common draw mu_0 ~ Pi, compares mu(A) after a single step of
/// length t+s with mu(A) after steps of t then s, over independent replicates.
TwoSampleReport fv_chapman_kolmogorov_process_test(const FvConfig& cfg, double t, double s, const TestSet& set,
                                                   std::size_t reps, const Rng& rng, std::size_t workers = 1);

/// Moments of mu_k(A) for k = 0..steps along replicate chains started from the
/// stationary law.
struct StationarityReport {
  std::vector<MomentEstimate> per_step;  ///< index 0 is the starting draw
  double expected_mean = 0;
  double expected_variance = 0;
  /// Largest |estimate - expected| / se over steps for mean and variance.
  double max_mean_z = 0;
  double max_variance_z = 0;
};

StationarityReport measure_chain_stationarity(const MeasureChainConfig& cfg, const TestSet& set, std::size_t steps,
                                              std::size_t reps, const Rng& rng, std::size_t workers = 1);
StationarityReport fv_stationarity(const FvConfig& cfg, const TestSet& set, std::size_t steps, std::size_t reps,
                                   const Rng& rng, std::size_t workers = 1);

/// Observable-level reversibility of the measure chain from a stationary
/// start: (mu_0(A), mu_1(A)) pairs should be exchangeable. Reports the mean
/// of u^2 v - u v^2 (zero under reversibility) and a KS test of u - v on one
/// half of the replicates against v - u on the other half.
struct ReversibilityReport {
  double antisymmetric_mean = 0;
  double antisymmetric_se = 0;
  KsResult ks;
};

ReversibilityReport measure_chain_reversibility(const MeasureChainConfig& cfg, const TestSet& set, std::size_t reps,
                                                const Rng& rng, std::size_t workers = 1);

enum class ChainKind { Dar1, MeasureChain, FlemingViot };
ChainKind parse_chain_kind(const std::string& name);
std::string chain_kind_name(ChainKind kind);

struct ChainSpec {
  ChainKind kind = ChainKind::Dar1;
  double theta = 1;
  BaseMeasure base;
  std::size_t n = 1;  ///< measure chain only
  double t = 1;       ///< Fleming-Viot only
  PrecisionConfig prec;
  Truncation truncation;
};

/// rows[step][k] = observable k after step+1 steps (mu(A_k), or 1{x in A_k}
/// for DAR(1)). The chain starts from a stationary draw.
std::vector<std::vector<double>> run_chain(const ChainSpec& spec, std::size_t steps,
                                           const std::vector<TestSet>& observables, Rng& rng);

}  // namespace fvkit
