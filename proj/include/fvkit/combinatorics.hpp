// Exact combinatorial primitives over arbitrary-precision integers and
// rationals, plus exact checkers for the identities that underpin the
// Polya-urn overlap distribution.
#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include <boost/multiprecision/gmp.hpp>

namespace fvkit {

using Integer = boost::multiprecision::mpz_int;
// mpq_rational keeps itself canonical: lowest terms, positive denominator.
using Rational = boost::multiprecision::mpq_rational;

/// Parses "p", "p/q" or a finite decimal such as "2.5" into an exact rational.
/// Throws std::invalid_argument on malformed input or a zero denominator.
Rational parse_rational(std::string_view text);

std::string to_string(const Rational& q);
double to_double(const Rational& q);

/// a_(m) = a(a+1)...(a+m-1), with a_(0) = 1.
Rational rising_factorial(const Rational& a, std::size_t m);
/// a_[m] = a(a-1)...(a-m+1), with a_[0] = 1.
Rational falling_factorial(const Rational& a, std::size_t m);

Integer factorial(std::size_t n);
/// C(m, n); zero when n > m.
Integer binomial(std::size_t m, std::size_t n);

/// |s(n, k)|, the unsigned Stirling numbers of the first kind, served from a
/// shared triangular table that grows on demand up to stirling_cap().
Integer stirling1_unsigned(std::size_t n, std::size_t k);
std::size_t stirling_cap();
/// Rows above the cap throw std::length_error. Lowering the cap never
/// discards rows already built.
void set_stirling_cap(std::size_t cap);

/// Univariate polynomial in theta with rational coefficients; coefficient i
/// multiplies theta^i. Trailing zeros are always trimmed.
class ThetaPolynomial {
 public:
  ThetaPolynomial() = default;
  explicit ThetaPolynomial(std::vector<Rational> coefficients);
  static ThetaPolynomial constant(const Rational& c);
  static ThetaPolynomial theta();

  const std::vector<Rational>& coefficients() const { return coeffs_; }
  bool is_zero() const { return coeffs_.empty(); }
  /// -1 for the zero polynomial.
  long degree() const { return static_cast<long>(coeffs_.size()) - 1; }
  Rational coefficient(std::size_t i) const;
  Rational evaluate(const Rational& x) const;

  ThetaPolynomial& operator+=(const ThetaPolynomial& rhs);
  ThetaPolynomial& operator-=(const ThetaPolynomial& rhs);
  ThetaPolynomial& operator*=(const ThetaPolynomial& rhs);
  ThetaPolynomial& operator*=(const Rational& scalar);

  friend ThetaPolynomial operator+(ThetaPolynomial a, const ThetaPolynomial& b) { return a += b; }
  friend ThetaPolynomial operator-(ThetaPolynomial a, const ThetaPolynomial& b) { return a -= b; }
  friend ThetaPolynomial operator*(ThetaPolynomial a, const ThetaPolynomial& b) { return a *= b; }
  friend ThetaPolynomial operator*(ThetaPolynomial a, const Rational& s) { return a *= s; }
  friend bool operator==(const ThetaPolynomial& a, const ThetaPolynomial& b) {
    return a.coeffs_ == b.coeffs_;
  }

  std::string to_string() const;

 private:
  void trim();
  std::vector<Rational> coeffs_;
};

/// (theta + offset)_(m) expanded in powers of theta.
ThetaPolynomial rising_factorial_poly(const Rational& offset, std::size_t m);

/// sum_{l=0}^{k} (-1)^{k-l} C(k,l) (phi+l)_(k-r), evaluated exactly.
Rational lemma_41_sum(std::size_t k, std::size_t r, const Rational& phi);
/// True iff the alternating sum above vanishes. Requires 1 <= r <= k.
bool check_lemma_41(std::size_t k, std::size_t r, const Rational& phi);

struct Lemma42Sides {
  ThetaPolynomial lhs;  ///< sum_k k! C(k+r-1,k) C(m-r,k) theta_(m-r-k)
  ThetaPolynomial rhs;  ///< (theta + r)_(m-r)
};
Lemma42Sides lemma_42_sides(std::size_t m, std::size_t r);
/// Coefficient-by-coefficient equality of both sides. Requires m >= r >= 1.
bool check_lemma_42(std::size_t m, std::size_t r);
/// Cross-validation route: compares both sides at deg+1 distinct rationals.
bool check_lemma_42_pointwise(std::size_t m, std::size_t r);

/// C(b,a)|s(c,b)| == sum_{j=b-a}^{c-a} C(c,j)|s(c-j,a)||s(j,b-a)|.
/// Throws std::invalid_argument unless 1 <= a <= b <= c.
bool check_stirling_convolution(std::size_t a, std::size_t b, std::size_t c);

}  // namespace fvkit
