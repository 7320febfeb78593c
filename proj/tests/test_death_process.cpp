#include <doctest.h>

#include <boost/multiprecision/cpp_bin_float.hpp>
#include <cmath>
#include <vector>

#include "fvkit/death_process.hpp"
#include "fvkit/polya_urn.hpp"

using namespace fvkit;
using Big = boost::multiprecision::cpp_bin_float_100;

namespace {

// Oracle: the series summed term by term with every coefficient rebuilt from
// scratch, on a different multiprecision backend.
double naive_death_prob(std::size_t n, double t, double theta) {
  Big sum = (n == 0) ? Big(1) : Big(0);
  const std::size_t start = n == 0 ? 1 : n;
  for (std::size_t m = start; m < start + 400; ++m) {
    Big c = 1;
    for (std::size_t i = 0; i < n; ++i) c = c * Big(m - i) / Big(i + 1);  // C(m, n)
    const Big base = n == 0 ? Big(theta) : Big(theta) + Big(n);
    for (std::size_t i = 0; i + 1 < m; ++i) c *= base + Big(i);
    for (std::size_t i = 2; i <= m; ++i) c /= Big(i);
    const Big lambda = Big(m) * (Big(m) - 1 + Big(theta)) / 2;
    const Big term = c * (Big(2 * m) - 1 + Big(theta)) * exp(-lambda * Big(t));
    const bool negative = n == 0 ? (m % 2 == 1) : ((m - n) % 2 == 1);
    sum += negative ? Big(-term) : term;
    if (m > start + 10 && term < Big("1e-60")) break;
  }
  return sum.convert_to<double>();
}

// Oracle: the finite-start chain simulated directly.
std::vector<double> simulate_from(std::size_t n0, double t, double theta, std::size_t reps, std::uint64_t seed,
                                  std::vector<double>& se) {
  Rng rng(seed);
  std::vector<double> counts(n0 + 1, 0);
  for (std::size_t i = 0; i < reps; ++i) {
    std::size_t k = n0;
    double clock = 0;
    while (k > 0) {
      const double rate = 0.5 * static_cast<double>(k) * (static_cast<double>(k) - 1 + theta);
      if (rate == 0) break;
      clock += rng.exponential(rate);
      if (clock > t) break;
      --k;
    }
    counts[k] += 1;
  }
  se.assign(n0 + 1, 0);
  for (std::size_t k = 0; k <= n0; ++k) {
    counts[k] /= static_cast<double>(reps);
    se[k] = std::sqrt(std::max(counts[k] * (1 - counts[k]), 1e-12) / static_cast<double>(reps));
  }
  return counts;
}

}  // namespace

TEST_CASE("death rates") {
  CHECK(death_rate(0, {1.0}) == 0);
  CHECK(death_rate(1, {1.0}) == 0.5);
  CHECK(death_rate(4, {0.5}) == doctest::Approx(0.5 * 4 * 3.5));
  CHECK(death_rate(1, {0.0}) == 0);
}

TEST_CASE("series values match the independent naive sum") {
  for (const double theta : {0.5, 1.0, 4.0})
    for (const double t : {0.2, 0.5, 1.0, 3.0})
      for (std::size_t n = 0; n <= 8; ++n) {
        const auto sv = death_prob_series(n, t, {theta});
        const double oracle = naive_death_prob(n, t, theta);
        CHECK_MESSAGE(std::abs(sv.value - oracle) <= sv.term_bound + 1e-15,
                      "theta=" << theta << " t=" << t << " n=" << n);
        CHECK(std::abs(sv.value - oracle) < 1e-12);
      }
}

TEST_CASE("pmf is a probability distribution") {
  for (const double theta : {0.5, 1.0, 4.0})
    for (const double t : {0.05, 0.2, 1.0, 5.0, 20.0}) {
      const auto pmf = death_pmf(t, {theta});
      CHECK(pmf.mass() == doctest::Approx(1.0).epsilon(1e-10));
      CHECK(pmf.residual < 1e-10);
      for (const double p : pmf.probs) {
        CHECK(p >= 0);
        CHECK(p <= 1);
      }
      CHECK(pmf.term_bound.size() == pmf.probs.size());
      CHECK(pmf.n_max + 1 == pmf.probs.size());
    }
}

TEST_CASE("survival series equals 1 - d_0") {
  for (const double theta : {0.5, 1.0, 4.0})
    for (const double t : {0.3, 1.0, 4.0, 10.0}) {
      const auto surv = survival_series(t, {theta});
      const auto d0 = death_prob_series(0, t, {theta});
      CHECK(std::abs(surv.value - (1 - d0.value)) < 1e-12);
    }
}

TEST_CASE("theta = 0: d_0 vanishes and d_1 follows the coalescent form") {
  for (const double t : {0.2, 1.0, 3.0}) {
    CHECK(death_prob_series(0, t, {0.0}).value == 0);
    // d_1(t) = 1 - sum_{m>=2} (-1)^m (2m-1) exp(-m(m-1)t/2)
    Big sum = 0;
    for (int m = 2; m < 200; ++m) {
      const Big term = Big(2 * m - 1) * exp(-Big(m) * Big(m - 1) * Big(t) / 2);
      sum += (m % 2 == 0) ? term : Big(-term);
    }
    const double expected = (Big(1) - sum).convert_to<double>();
    CHECK(death_prob_series(1, t, {0.0}).value == doctest::Approx(expected).epsilon(1e-12));
    const auto pmf = death_pmf(t, {0.0});
    CHECK(pmf.prob(0) == 0);
  }
}

TEST_CASE("large t concentrates on the absorbing end") {
  const auto pmf = death_pmf(50.0, {1.0});
  CHECK(pmf.prob(0) > 1 - 1e-10);
  const auto coalescent = death_pmf(50.0, {0.0});
  CHECK(coalescent.prob(1) > 1 - 1e-10);
}

TEST_CASE("small t exhausts the precision budget") {
  PrecisionConfig tight;
  tight.working_digits = 30;
  CHECK_THROWS_AS(death_pmf(0.01, {1.0}, tight), PrecisionExhausted);
  try {
    death_pmf(0.01, {1.0}, tight);
  } catch (const PrecisionExhausted& e) {
    CHECK(e.achievable_tolerance() > tight.tail_tol);
  }
  PrecisionConfig wide;
  wide.working_digits = 200;
  wide.max_terms = 2000;
  const auto pmf = death_pmf(0.01, {1.0}, wide);
  CHECK(pmf.mass() == doctest::Approx(1.0).epsilon(1e-10));
  PrecisionConfig few_terms;
  few_terms.max_terms = 3;
  CHECK_THROWS_AS(death_prob_series(2, 0.5, {1.0}, few_terms), PrecisionExhausted);
}

TEST_CASE("invalid parameters are rejected") {
  CHECK_THROWS_AS(death_pmf(0.0, {1.0}), std::invalid_argument);
  CHECK_THROWS_AS(death_pmf(1.0, {-1.0}), std::invalid_argument);
  PrecisionConfig bad;
  bad.tail_tol = 0;
  CHECK_THROWS_AS(death_pmf(1.0, {1.0}, bad), std::invalid_argument);
  CHECK_THROWS_AS(transition_given_n(3, 1.0, {0.0}), std::invalid_argument);
  CHECK_THROWS_AS(check_result_a(0, 1.0, {1.0}), std::invalid_argument);
}

TEST_CASE("falling-factorial moments of d_n equal exp(-lambda_n s) on the acceptance grid") {
  for (const double theta : {0.5, 1.0, 4.0})
    for (const double s : {0.2, 1.0, 5.0})
      for (std::size_t n = 1; n <= 8; ++n) CHECK(check_result_a(n, s, {theta}) < 1e-11);
}

TEST_CASE("H(s) series matches its closed form on the acceptance grid") {
  for (const double theta : {0.5, 1.0, 4.0})
    for (const double s : {0.2, 1.0, 5.0})
      for (std::size_t n = 1; n <= 8; ++n) {
        const auto rep = result_b_report(n, s, {theta});
        CHECK(rep.residual < 1e-11);
        CHECK(rep.residual == doctest::Approx(check_result_b(n, s, {theta})));
        CHECK(rep.vanishes_at_zero);
        CHECK(rep.h_probe >= 0);
      }
}

TEST_CASE("transition inversion matches the closed form and the chain itself") {
  for (const double theta : {0.5, 1.0, 4.0})
    for (const double s : {0.2, 1.0, 5.0})
      for (std::size_t n = 1; n <= 8; ++n) {
        const auto row = transition_given_n(n, s, {theta});
        REQUIRE(row.size() == n + 1);
        double total = 0;
        for (std::size_t r = 0; r <= n; ++r) {
          CHECK(std::abs(row[r] - transition_closed_form(n, r, s, {theta})) < 1e-11);
          total += row[r];
        }
        CHECK(total == doctest::Approx(1.0).epsilon(1e-11));
        // Staying put has probability exp(-lambda_n s).
        CHECK(row[n] == doctest::Approx(std::exp(-death_rate(n, {theta}) * s)).epsilon(1e-10));
      }
  // (n=3, r=1, theta=1, s=0.7) against 10^6 simulated chains.
  std::vector<double> se;
  const auto sim = simulate_from(3, 0.7, 1.0, 1'000'000, 31, se);
  const double exact = transition_closed_form(3, 1, 0.7, {1.0});
  const double model_se = std::sqrt(exact * (1 - exact) / 1e6);
  CHECK(std::abs(sim[1] - exact) < 4 * model_se);
  CHECK_THROWS_AS(transition_closed_form(2, 0, 1.0, {0.0}), std::invalid_argument);
}

TEST_CASE("Chapman-Kolmogorov through the urn kernel") {
  for (const double theta : {0.5, 1.0, 4.0})
    for (const auto& [t, s] : std::vector<std::pair<double, double>>{{0.5, 0.5}, {1, 2}, {2, 1}})
      for (std::size_t r = 0; r <= 3; ++r) CHECK(check_chapman_kolmogorov(r, t, s, {theta}) < 1e-10);
}

TEST_CASE("survival bounds") {
  for (const double theta : {0.5, 1.0, 4.0})
    for (const double t : {0.1, 0.5, 1.0, 3.0, 10.0}) {
      const auto rep = inequality_report(t, {theta});
      CHECK(rep.holds);
      CHECK(check_inequality(t, {theta}));
      CHECK(rep.lower == doctest::Approx(std::exp(-death_rate(1, {theta}) * t)));
      CHECK(rep.upper == doctest::Approx((1 + theta) * rep.lower));
    }
}

TEST_CASE("Monte Carlo oracle matches the exact finite-start transition") {
  const std::size_t n0 = 8;
  const auto mc = mc_death_pmf(0.4, {1.0}, n0, 200'000, Rng(77), 1);
  for (std::size_t r = 0; r <= n0; ++r) {
    const double exact = transition_closed_form(n0, r, 0.4, {1.0});
    const double se = std::sqrt(std::max(exact * (1 - exact), 1e-12) / 200'000);
    CHECK_MESSAGE(std::abs(mc.prob(r) - exact) < 4 * se, "r=" << r);
  }
  CHECK(mc.reps == 200'000);
}

TEST_CASE("Monte Carlo oracle is deterministic across worker counts") {
  const auto a = mc_death_pmf(1.0, {1.0}, 50, 5000, Rng(3), 1);
  const auto b = mc_death_pmf(1.0, {1.0}, 50, 5000, Rng(3), 4);
  CHECK(a.probs == b.probs);
}

TEST_CASE("Monte Carlo oracle at theta = 0 never reaches 0") {
  const auto mc = mc_death_pmf(2.0, {0.0}, 40, 20000, Rng(8), 1);
  CHECK(mc.prob(0) == 0);
  CHECK(mc.prob(1) > 0);
}

TEST_CASE("n0 doubling sensitivity report") {
  const auto rep = mc_death_pmf_sensitivity(1.0, {1.0}, 100, 20000, Rng(5), 1);
  CHECK(rep.n0 == 100);
  CHECK(rep.base.reps == 20000);
  CHECK(rep.doubled.reps == 20000);
  double shift = 0;
  for (std::size_t n = 0; n < 20; ++n) shift = std::max(shift, std::abs(rep.base.prob(n) - rep.doubled.prob(n)));
  CHECK(rep.max_shift == doctest::Approx(shift));
  CHECK(rep.max_shift_z < 4);
}

TEST_CASE("finite-start oracle converges to the exact pmf at the entrance-shifted time") {
  // Started at n0 the chain is the infinite-start chain delayed by the
  // entrance time T_{n0}, whose mean is sum_{k>n0} 1/lambda_k.
  const std::size_t n0 = 200;
  double tau = 0;
  for (std::size_t k = n0 + 1; k < 2'000'000; ++k) tau += 1 / death_rate(k, {1.0});
  const auto mc = mc_death_pmf(1.0, {1.0}, n0, 200'000, Rng(9), 1);
  const auto shifted = death_pmf(1.0 + tau, {1.0});
  for (std::size_t n = 0; n < 6; ++n) {
    const double p = shifted.prob(n);
    const double se = std::sqrt(std::max(p * (1 - p), 1e-12) / 200'000);
    CHECK_MESSAGE(std::abs(mc.prob(n) - p) < 4 * se, "n=" << n);
  }
}

TEST_CASE("sampling death counts follows the pmf") {
  const auto pmf = death_pmf(0.5, {1.0});
  Rng rng(4);
  std::vector<double> freq(pmf.probs.size(), 0);
  const int draws = 200000;
  for (int i = 0; i < draws; ++i) freq[sample_death_count(pmf, rng)] += 1;
  for (std::size_t n = 0; n < pmf.probs.size(); ++n) {
    const double p = pmf.probs[n];
    CHECK(std::abs(freq[n] / draws - p) < 5 * std::sqrt(std::max(p * (1 - p), 1e-12) / draws) + 1e-9);
  }
  DeathPmf broken = pmf;
  broken.residual = 0.5;
  CHECK_THROWS_AS(sample_death_count(broken, rng), std::invalid_argument);
}
