#include "fvkit/combinatorics.hpp"

#include <algorithm>
#include <cctype>
#include <mutex>
#include <shared_mutex>
#include <stdexcept>

namespace fvkit {

namespace {

bool all_digits(std::string_view s) {
  return !s.empty() &&
         std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isdigit(c) != 0; });
}

Integer pow10(long e) {
  Integer p = 1;
  for (long i = 0; i < e; ++i) p *= 10;
  return p;
}

// Decimal with optional fraction and exponent, e.g. "-2.50e-3".
Rational parse_decimal(std::string_view s) {
  bool negative = false;
  if (!s.empty() && (s.front() == '+' || s.front() == '-')) {
    negative = s.front() == '-';
    s.remove_prefix(1);
  }
  long exponent = 0;
  if (auto e = s.find_first_of("eE"); e != std::string_view::npos) {
    std::string_view exp_part = s.substr(e + 1);
    s = s.substr(0, e);
    bool exp_negative = false;
    if (!exp_part.empty() && (exp_part.front() == '+' || exp_part.front() == '-')) {
      exp_negative = exp_part.front() == '-';
      exp_part.remove_prefix(1);
    }
    if (!all_digits(exp_part) || exp_part.size() > 6) throw std::invalid_argument("bad exponent");
    exponent = std::stol(std::string(exp_part));
    if (exp_negative) exponent = -exponent;
  }
  std::string digits;
  if (auto dot = s.find('.'); dot != std::string_view::npos) {
    std::string_view whole = s.substr(0, dot);
    std::string_view frac = s.substr(dot + 1);
    if (whole.empty() && frac.empty()) throw std::invalid_argument("empty number");
    if ((!whole.empty() && !all_digits(whole)) || (!frac.empty() && !all_digits(frac)))
      throw std::invalid_argument("bad decimal");
    digits = std::string(whole) + std::string(frac);
    exponent -= static_cast<long>(frac.size());
  } else {
    if (!all_digits(s)) throw std::invalid_argument("bad integer");
    digits = std::string(s);
  }
  const auto first = digits.find_first_not_of('0');
  digits = first == std::string::npos ? "0" : digits.substr(first);
  Rational value{Integer(digits)};
  if (exponent >= 0) {
    value *= Rational(pow10(exponent));
  } else {
    value /= Rational(pow10(-exponent));
  }
  return negative ? Rational(-value) : value;
}

class StirlingTable {
 public:
  Integer get(std::size_t n, std::size_t k) {
    if (k > n) return 0;
    {
      std::shared_lock lock(mutex_);
      if (n < rows_.size()) return rows_[n][k];
    }
    std::unique_lock lock(mutex_);
    if (n >= cap_) {
      throw std::length_error("Stirling table row " + std::to_string(n) + " exceeds cap " +
                              std::to_string(cap_));
    }
    while (rows_.size() <= n) {
      const std::size_t row = rows_.size();
      std::vector<Integer> next(row + 1, Integer(0));
      if (row == 0) {
        next[0] = 1;
      } else {
        const auto& prev = rows_[row - 1];
        // |s(n,k)| = |s(n-1,k-1)| + (n-1)|s(n-1,k)|
        for (std::size_t j = 1; j <= row; ++j) {
          next[j] = prev[j - 1];
          if (j < row) next[j] += Integer(row - 1) * prev[j];
        }
      }
      rows_.push_back(std::move(next));
    }
    return rows_[n][k];
  }

  std::size_t cap() const {
    std::shared_lock lock(mutex_);
    return cap_;
  }

  void set_cap(std::size_t cap) {
    std::unique_lock lock(mutex_);
    cap_ = std::max(cap, rows_.size());
  }

 private:
  mutable std::shared_mutex mutex_;
  std::vector<std::vector<Integer>> rows_;
  std::size_t cap_ = 513;
};

StirlingTable& stirling_table() {
  static StirlingTable table;
  return table;
}

}  // namespace

Rational parse_rational(std::string_view text) {
  while (!text.empty() && std::isspace(static_cast<unsigned char>(text.front()))) text.remove_prefix(1);
  while (!text.empty() && std::isspace(static_cast<unsigned char>(text.back()))) text.remove_suffix(1);
  if (text.empty()) throw std::invalid_argument("empty rational");
  try {
    if (auto slash = text.find('/'); slash != std::string_view::npos) {
      Rational num = parse_decimal(text.substr(0, slash));
      Rational den = parse_decimal(text.substr(slash + 1));
      if (den == 0) throw std::invalid_argument("zero denominator");
      return num / den;
    }
    return parse_decimal(text);
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument("cannot parse '" + std::string(text) + "' as a rational: " + e.what());
  }
}

std::string to_string(const Rational& q) {
  if (boost::multiprecision::denominator(q) == 1) return boost::multiprecision::numerator(q).str();
  return q.str();
}

double to_double(const Rational& q) { return q.convert_to<double>(); }

Rational rising_factorial(const Rational& a, std::size_t m) {
  Rational out = 1;
  for (std::size_t i = 0; i < m; ++i) out *= a + Rational(i);
  return out;
}

Rational falling_factorial(const Rational& a, std::size_t m) {
  Rational out = 1;
  for (std::size_t i = 0; i < m; ++i) out *= a - Rational(i);
  return out;
}

Integer factorial(std::size_t n) {
  Integer out = 1;
  for (std::size_t i = 2; i <= n; ++i) out *= i;
  return out;
}

Integer binomial(std::size_t m, std::size_t n) {
  if (n > m) return 0;
  n = std::min(n, m - n);
  Integer out = 1;
  for (std::size_t i = 1; i <= n; ++i) {
    out *= m - n + i;
    out /= i;
  }
  return out;
}

Integer stirling1_unsigned(std::size_t n, std::size_t k) { return stirling_table().get(n, k); }

std::size_t stirling_cap() { return stirling_table().cap() - 1; }

void set_stirling_cap(std::size_t cap) { stirling_table().set_cap(cap + 1); }

// ThetaPolynomial

ThetaPolynomial::ThetaPolynomial(std::vector<Rational> coefficients) : coeffs_(std::move(coefficients)) {
  trim();
}

ThetaPolynomial ThetaPolynomial::constant(const Rational& c) { return ThetaPolynomial({c}); }

ThetaPolynomial ThetaPolynomial::theta() { return ThetaPolynomial({Rational(0), Rational(1)}); }

Rational ThetaPolynomial::coefficient(std::size_t i) const {
  return i < coeffs_.size() ? coeffs_[i] : Rational(0);
}

Rational ThetaPolynomial::evaluate(const Rational& x) const {
  Rational acc = 0;
  for (auto it = coeffs_.rbegin(); it != coeffs_.rend(); ++it) acc = acc * x + *it;
  return acc;
}

ThetaPolynomial& ThetaPolynomial::operator+=(const ThetaPolynomial& rhs) {
  if (rhs.coeffs_.size() > coeffs_.size()) coeffs_.resize(rhs.coeffs_.size());
  for (std::size_t i = 0; i < rhs.coeffs_.size(); ++i) coeffs_[i] += rhs.coeffs_[i];
  trim();
  return *this;
}

ThetaPolynomial& ThetaPolynomial::operator-=(const ThetaPolynomial& rhs) {
  if (rhs.coeffs_.size() > coeffs_.size()) coeffs_.resize(rhs.coeffs_.size());
  for (std::size_t i = 0; i < rhs.coeffs_.size(); ++i) coeffs_[i] -= rhs.coeffs_[i];
  trim();
  return *this;
}

ThetaPolynomial& ThetaPolynomial::operator*=(const ThetaPolynomial& rhs) {
  if (is_zero() || rhs.is_zero()) {
    coeffs_.clear();
    return *this;
  }
  std::vector<Rational> out(coeffs_.size() + rhs.coeffs_.size() - 1);
  for (std::size_t i = 0; i < coeffs_.size(); ++i)
    for (std::size_t j = 0; j < rhs.coeffs_.size(); ++j) out[i + j] += coeffs_[i] * rhs.coeffs_[j];
  coeffs_ = std::move(out);
  trim();
  return *this;
}

ThetaPolynomial& ThetaPolynomial::operator*=(const Rational& scalar) {
  for (auto& c : coeffs_) c *= scalar;
  trim();
  return *this;
}

std::string ThetaPolynomial::to_string() const {
  if (coeffs_.empty()) return "0";
  std::string out;
  for (std::size_t i = coeffs_.size(); i-- > 0;) {
    if (coeffs_[i] == 0) continue;
    if (!out.empty()) out += " + ";
    out += "(" + fvkit::to_string(coeffs_[i]) + ")";
    if (i > 0) out += i == 1 ? "*theta" : "*theta^" + std::to_string(i);
  }
  return out;
}

void ThetaPolynomial::trim() {
  while (!coeffs_.empty() && coeffs_.back() == 0) coeffs_.pop_back();
}

ThetaPolynomial rising_factorial_poly(const Rational& offset, std::size_t m) {
  ThetaPolynomial out = ThetaPolynomial::constant(1);
  for (std::size_t i = 0; i < m; ++i)
    out *= ThetaPolynomial({offset + Rational(i), Rational(1)});
  return out;
}

// Identity checks

Rational lemma_41_sum(std::size_t k, std::size_t r, const Rational& phi) {
  if (r < 1 || r > k) throw std::invalid_argument("alternating rising-factorial sum requires 1 <= r <= k");
  Rational sum = 0;
  for (std::size_t l = 0; l <= k; ++l) {
    Rational term = Rational(binomial(k, l)) * rising_factorial(phi + Rational(l), k - r);
    if ((k - l) % 2 == 0) {
      sum += term;
    } else {
      sum -= term;
    }
  }
  return sum;
}

bool check_lemma_41(std::size_t k, std::size_t r, const Rational& phi) {
  return lemma_41_sum(k, r, phi) == 0;
}

Lemma42Sides lemma_42_sides(std::size_t m, std::size_t r) {
  if (r < 1 || r > m) throw std::invalid_argument("rising-factorial convolution requires m >= r >= 1");
  const std::size_t d = m - r;
  Lemma42Sides sides;
  for (std::size_t k = 0; k <= d; ++k) {
    Integer weight = factorial(k) * binomial(k + r - 1, k) * binomial(d, k);
    sides.lhs += rising_factorial_poly(0, d - k) * Rational(weight);
  }
  sides.rhs = rising_factorial_poly(Rational(r), d);
  return sides;
}

bool check_lemma_42(std::size_t m, std::size_t r) {
  const auto sides = lemma_42_sides(m, r);
  return sides.lhs == sides.rhs;
}

bool check_lemma_42_pointwise(std::size_t m, std::size_t r) {
  if (r < 1 || r > m) throw std::invalid_argument("rising-factorial convolution requires m >= r >= 1");
  const std::size_t d = m - r;
  // Evaluate the defining sums directly at d+1 distinct rationals; a degree-d
  // polynomial identity is then forced.
  for (std::size_t i = 0; i <= d; ++i) {
    const Rational theta = Rational(2 * i + 1, 3);
    Rational lhs = 0;
    for (std::size_t k = 0; k <= d; ++k)
      lhs += Rational(factorial(k) * binomial(k + r - 1, k) * binomial(d, k)) *
             rising_factorial(theta, d - k);
    if (lhs != rising_factorial(theta + Rational(r), d)) return false;
  }
  return true;
}

bool check_stirling_convolution(std::size_t a, std::size_t b, std::size_t c) {
  if (a < 1 || a > b || b > c)
    throw std::invalid_argument("Stirling convolution requires 1 <= a <= b <= c");
  const Integer lhs = binomial(b, a) * stirling1_unsigned(c, b);
  Integer rhs = 0;
  for (std::size_t j = b - a; j <= c - a; ++j)
    rhs += binomial(c, j) * stirling1_unsigned(c - j, a) * stirling1_unsigned(j, b - a);
  return lhs == rhs;
}

}  // namespace fvkit
