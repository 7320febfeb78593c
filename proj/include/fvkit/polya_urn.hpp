// The general Polya-urn scheme conditioned on n distinct atoms X_1..X_n, and
// the distribution of r, the number of distinct X_i hit by m urn draws.
#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "fvkit/combinatorics.hpp"
#include "fvkit/rng.hpp"
#include "fvkit/stats.hpp"
#include "fvkit/wide_float.hpp"

namespace fvkit {

struct UrnParams {
  double theta = 1.0;
  std::size_t n = 0;  ///< conditioning atoms, distinct because the base is nonatomic
  void validate() const;
};

/// Which part of the predictive mass a draw came from. Indices are 1-based to
/// match X_1..X_n and Y_1..Y_m.
struct DrawLabel {
  enum class Kind : std::uint8_t { HitX, RepeatY, Fresh };
  Kind kind = Kind::Fresh;
  std::size_t index = 0;

  static DrawLabel hit_x(std::size_t i) { return {Kind::HitX, i}; }
  static DrawLabel repeat_y(std::size_t j) { return {Kind::RepeatY, j}; }
  static DrawLabel fresh() { return {Kind::Fresh, 0}; }
  friend bool operator==(const DrawLabel&, const DrawLabel&) = default;
};

struct UrnTrace {
  UrnParams params;
  std::vector<DrawLabel> labels;
  /// Throws std::invalid_argument if an index is out of range or a repeat
  /// refers to itself or a later draw.
  void validate() const;
};

UrnTrace sample_urn(const UrnParams& params, std::size_t m, Rng& rng);

/// Resolves every draw to its root and returns the root labels (HitX or Fresh).
std::vector<DrawLabel> resolve_roots(const UrnTrace& trace);
/// Number of distinct X_i among the resolved roots.
std::size_t overlap_count(const UrnTrace& trace);

struct OverlapPmf {
  std::size_t m = 0;
  std::size_t n = 0;
  Rational theta;
  std::vector<Rational> probs;  ///< indexed r = 0..min(m, n)

  Rational prob(std::size_t r) const { return r < probs.size() ? probs[r] : Rational(0); }
  std::vector<double> to_doubles() const;
};

/// n_[r] (theta+r)_(m-r) C(m,r) / (theta+n)_(m).
Rational overlap_prob_primary(std::size_t r, std::size_t m, std::size_t n, const Rational& theta);
/// r! C(n,r) C(m,r) theta_(n) theta_(m) / (theta_(n+m) theta_(r)).
Rational overlap_prob_extended(std::size_t r, std::size_t m, std::size_t n, const Rational& theta);
Wide overlap_prob_primary(std::size_t r, std::size_t m, std::size_t n, const Wide& theta);
Wide overlap_prob_extended(std::size_t r, std::size_t m, std::size_t n, const Wide& theta);

/// How overlap_pmf_exact obtains (theta+r)_(m-r).
enum class RisingRoute {
  Direct,    ///< the product itself
  LemmaSum,  ///< sum_k k! C(k+r-1,k) C(m-r,k) theta_(m-r-k)
};

/// Exact pmf from both closed forms; throws std::logic_error if they differ.
OverlapPmf overlap_pmf_exact(std::size_t m, std::size_t n, const Rational& theta,
                             RisingRoute route = RisingRoute::Direct);

/// Closed forms evaluated in Wide for a real theta; the two forms must agree to
/// a relative 1e-30.
std::vector<double> overlap_pmf_real(std::size_t m, std::size_t n, double theta,
                                     unsigned working_digits = 60);

/// The theta = 0 case: n_[r] r_(m-r) C(m,r) / n_(m).
Rational overlap_prob_theta0_primary(std::size_t r, std::size_t m, std::size_t n);
/// The theta = 0 case rewritten: r C(m,r) C(n,r) (n-1)! (m-1)! / (n+m-1)!.
Rational overlap_prob_theta0_rewritten(std::size_t r, std::size_t m, std::size_t n);
/// Both theta = 0 forms, checked against each other. Requires m, n >= 1.
OverlapPmf overlap_pmf_theta0(std::size_t m, std::size_t n);

/// Upper limit on enumerated label sequences.
inline constexpr std::uint64_t kEnumerationBudget = 10'000'000;
/// prod_{j=1}^{m} (n + j), saturating at UINT64_MAX.
std::uint64_t enumeration_paths(std::size_t m, std::size_t n);

/// Sums exact probabilities of every label sequence, grouped by overlap count.
/// Throws std::length_error above kEnumerationBudget paths.
OverlapPmf overlap_pmf_bruteforce(std::size_t m, std::size_t n, const Rational& theta);

EmpiricalPmf overlap_pmf_montecarlo(std::size_t m, std::size_t n, double theta, std::size_t reps,
                                    const Rng& rng, std::size_t workers = 1);

}  // namespace fvkit
