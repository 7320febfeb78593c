#include <doctest.h>

#include <stdexcept>
#include <vector>

#include "fvkit/combinatorics.hpp"

using namespace fvkit;

namespace {

// Oracle: coefficients of x(x+1)...(x+n-1), expanded one factor at a time.
std::vector<Integer> rising_coefficients(std::size_t n) {
  std::vector<Integer> c = {1};
  for (std::size_t j = 0; j < n; ++j) {
    std::vector<Integer> next(c.size() + 1, 0);
    for (std::size_t i = 0; i < c.size(); ++i) {
      next[i + 1] += c[i];
      next[i] += c[i] * Integer(j);
    }
    c = std::move(next);
  }
  return c;
}

// Oracle: Pascal's triangle.
std::vector<std::vector<Integer>> pascal(std::size_t rows) {
  std::vector<std::vector<Integer>> p(rows + 1);
  for (std::size_t i = 0; i <= rows; ++i) {
    p[i].assign(i + 1, 1);
    for (std::size_t j = 1; j < i; ++j) p[i][j] = p[i - 1][j - 1] + p[i - 1][j];
  }
  return p;
}

Rational rising(Rational a, std::size_t m) {
  Rational out = 1;
  for (std::size_t i = 0; i < m; ++i) out *= a + Rational(static_cast<long>(i));
  return out;
}

Integer fact(std::size_t n) {
  Integer f = 1;
  for (std::size_t i = 2; i <= n; ++i) f *= Integer(i);
  return f;
}

}  // namespace

TEST_CASE("parse_rational accepts fractions, decimals and exponents") {
  CHECK(parse_rational("1/3") == Rational(1, 3));
  CHECK(parse_rational("-4/6") == Rational(-2, 3));
  CHECK(parse_rational("2.5") == Rational(5, 2));
  CHECK(parse_rational("7") == Rational(7));
  CHECK(parse_rational("1e-3") == Rational(1, 1000));
  CHECK(parse_rational("0.125") == Rational(1, 8));
  CHECK_THROWS_AS(parse_rational("1/0"), std::invalid_argument);
  CHECK_THROWS_AS(parse_rational("abc"), std::invalid_argument);
  CHECK_THROWS_AS(parse_rational(""), std::invalid_argument);
  CHECK(to_string(Rational(2, 4)) == "1/2");
  CHECK(to_string(Rational(3)) == "3");
}

TEST_CASE("factorials and binomials") {
  CHECK(rising_factorial(Rational(1), 5) == 120);
  CHECK(rising_factorial(Rational(1, 2), 0) == 1);
  CHECK(rising_factorial(Rational(1, 2), 3) == Rational(15, 8));
  CHECK(falling_factorial(Rational(5), 3) == 60);
  CHECK(falling_factorial(Rational(2), 3) == 0);
  CHECK(factorial(20) == fact(20));
  const auto p = pascal(40);
  for (std::size_t m = 0; m <= 40; ++m) {
    for (std::size_t n = 0; n <= m; ++n) CHECK(binomial(m, n) == p[m][n]);
    CHECK(binomial(m, m + 1) == 0);
  }
}

TEST_CASE("Stirling numbers match the expansion of the rising factorial") {
  for (std::size_t n = 0; n <= 40; ++n) {
    const auto c = rising_coefficients(n);
    for (std::size_t k = 0; k <= n; ++k) CHECK(stirling1_unsigned(n, k) == c[k]);
    CHECK(stirling1_unsigned(n, n + 1) == 0);
  }
  CHECK(stirling1_unsigned(5, 2) == 50);
  CHECK(stirling1_unsigned(0, 0) == 1);
  CHECK(stirling1_unsigned(7, 0) == 0);
}

TEST_CASE("Stirling row sums are n!") {
  for (std::size_t n = 0; n <= 30; ++n) {
    Integer sum = 0;
    for (std::size_t k = 0; k <= n; ++k) sum += stirling1_unsigned(n, k);
    CHECK(sum == fact(n));
  }
}

TEST_CASE("Stirling table honours its cap") {
  const std::size_t cap = stirling_cap();
  CHECK_THROWS_AS(stirling1_unsigned(cap + 1, 1), std::length_error);
  set_stirling_cap(cap + 2);
  CHECK(stirling1_unsigned(cap + 1, cap + 1) == 1);
  set_stirling_cap(cap);
}

TEST_CASE("ThetaPolynomial arithmetic") {
  const auto t = ThetaPolynomial::theta();
  const auto one = ThetaPolynomial::constant(1);
  const auto sq = (t + one) * (t + one);
  CHECK(sq.degree() == 2);
  CHECK(sq.evaluate(Rational(3)) == 16);
  CHECK((sq - sq).is_zero());
  CHECK((sq - sq).degree() == -1);
  CHECK(rising_factorial_poly(Rational(0), 3) == t * (t + one) * (t + ThetaPolynomial::constant(2)));
  for (std::size_t m = 0; m <= 8; ++m)
    for (int num = -3; num <= 3; ++num) {
      const Rational x(num, 2);
      CHECK(rising_factorial_poly(Rational(1, 3), m).evaluate(x) == rising(x + Rational(1, 3), m));
    }
}

TEST_CASE("alternating rising-factorial sums vanish") {
  for (const char* phi_text : {"1/3", "1", "5/2", "10", "-7/4"}) {
    const Rational phi = parse_rational(phi_text);
    for (std::size_t k = 1; k <= 12; ++k)
      for (std::size_t r = 1; r <= k; ++r) {
        CHECK(check_lemma_41(k, r, phi));
        // Independent evaluation with the test's own rising factorial and Pascal row.
        const auto row = pascal(k)[k];
        Rational sum = 0;
        for (std::size_t l = 0; l <= k; ++l) {
          const Rational term = Rational(row[l]) * rising(phi + Rational(static_cast<long>(l)), k - r);
          sum += ((k - l) % 2 == 0) ? term : Rational(-term);
        }
        CHECK(sum == 0);
      }
  }
  CHECK_THROWS_AS(lemma_41_sum(3, 0, Rational(1)), std::invalid_argument);
  CHECK_THROWS_AS(lemma_41_sum(3, 4, Rational(1)), std::invalid_argument);
  // r = 0 lies outside the lemma: the k-th difference of a degree-k polynomial is k!.
  Rational sum = 0;
  for (std::size_t l = 0; l <= 4; ++l) {
    const Rational term = Rational(binomial(4, l)) * rising(Rational(l), 4);
    sum += ((4 - l) % 2 == 0) ? term : Rational(-term);
  }
  CHECK(sum == 24);
}

TEST_CASE("rising-factorial convolution holds as a polynomial identity") {
  for (std::size_t m = 1; m <= 15; ++m)
    for (std::size_t r = 1; r <= m; ++r) {
      CHECK(check_lemma_42(m, r));
      const auto sides = lemma_42_sides(m, r);
      CHECK(sides.lhs.degree() == static_cast<long>(m - r));
    }
  for (std::size_t m = 1; m <= 10; ++m)
    for (std::size_t r = 1; r <= m; ++r) CHECK(check_lemma_42_pointwise(m, r));
}

TEST_CASE("rising-factorial convolution agrees with direct evaluation at many theta") {
  const auto p = pascal(30);
  for (std::size_t m = 1; m <= 12; ++m)
    for (std::size_t r = 1; r <= m; ++r) {
      const auto sides = lemma_42_sides(m, r);
      const std::size_t d = m - r;
      for (const Rational theta : {Rational(1, 7), Rational(2), Rational(-5, 3), Rational(11, 2)}) {
        Rational lhs = 0;
        for (std::size_t k = 0; k <= d; ++k)
          lhs += Rational(fact(k) * p[k + r - 1][k] * p[d][k]) * rising(theta, d - k);
        CHECK(lhs == rising(theta + Rational(static_cast<long>(r)), d));
        CHECK(sides.lhs.evaluate(theta) == lhs);
      }
    }
}

TEST_CASE("Stirling convolution identity for a <= b <= c <= 12") {
  std::vector<std::vector<Integer>> s(13);
  for (std::size_t n = 0; n <= 12; ++n) s[n] = rising_coefficients(n);
  auto st = [&](std::size_t n, std::size_t k) { return k <= n ? s[n][k] : Integer(0); };
  const auto p = pascal(12);
  for (std::size_t c = 1; c <= 12; ++c)
    for (std::size_t b = 1; b <= c; ++b)
      for (std::size_t a = 1; a <= b; ++a) {
        CHECK(check_stirling_convolution(a, b, c));
        Integer rhs = 0;
        for (std::size_t j = b - a; j <= c - a; ++j) rhs += p[c][j] * st(c - j, a) * st(j, b - a);
        CHECK(p[b][a] * st(c, b) == rhs);
      }
  CHECK_THROWS_AS(check_stirling_convolution(0, 1, 2), std::invalid_argument);
  CHECK_THROWS_AS(check_stirling_convolution(3, 2, 4), std::invalid_argument);
}
