#include "fvkit/death_process.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <optional>

#include "fvkit/polya_urn.hpp"
#include "fvkit/wide_float.hpp"

namespace fvkit {

namespace {

constexpr std::size_t kMcChunks = 64;
constexpr std::size_t kMaxSupport = 20000;

// Evaluates the d_n(t) series at one t, caching exp(-lambda_m t).
class SeriesEvaluator {
 public:
  SeriesEvaluator(double t, const DeathParams& params, const PrecisionConfig& prec)
      : guard_(prec.working_digits),
        prec_(prec),
        theta_(params.theta),
        t_(t),
        t_double_(t),
        eps_(boost::multiprecision::pow(Wide(10), 1 - static_cast<int>(prec.working_digits))) {}

  // kind == Pmf: d_n(t). kind == Survival: 1 - d_0(t) (n ignored).
  enum class Kind { Pmf, Survival };

  SeriesValue evaluate(std::size_t n, Kind kind = Kind::Pmf) {
    SeriesValue out;
    const bool survival = kind == Kind::Survival;
    if (survival) n = 0;
    if (theta_ == 0 && n == 0) {
      out.value = survival ? 1.0 : 0.0;
      return out;
    }
    const std::size_t m0 = std::max<std::size_t>(n, 1);
    // c_m = C(m,n) (theta+n)_(m-1) / m!, with c_{m+1}/c_m = (theta+n+m-1)/(m+1-n).
    // For n = 0 the series starts at m = 1 with c_1 = 1.
    Wide coeff = 1;
    if (n >= 1) {
      for (std::size_t i = 0; i + 1 < n; ++i) coeff *= theta_ + Wide(n + i);
      for (std::size_t i = 2; i <= n; ++i) coeff /= Wide(i);
    }
    // Sign of the m-th term: (-1)^{m-n} for d_n; d_0 = 1 + sum (-1)^m ...;
    // 1 - d_0 = sum (-1)^{m-1} ...
    auto signed_term = [&](std::size_t m, const Wide& c) {
      Wide term = c * (Wide(2 * m) - 1 + theta_) * exp_neg(m);
      bool negative = n >= 1 ? ((m - n) % 2 == 1) : (survival ? (m % 2 == 0) : (m % 2 == 1));
      return negative ? Wide(-term) : term;
    };
    auto next_coeff = [&](std::size_t m, const Wide& c) {
      return Wide(c * (theta_ + Wide(n + m) - 1) / Wide(m + 1 - n));
    };

    Wide acc = (n == 0 && !survival) ? Wide(1) : Wide(0);
    Wide max_abs = boost::multiprecision::abs(acc);
    std::size_t m = m0;
    Wide cur = signed_term(m, coeff);
    const Wide tol = prec_.tail_tol;
    std::size_t terms = 0;
    for (;;) {
      Wide next_c = next_coeff(m, coeff);
      Wide next = signed_term(m + 1, next_c);
      const Wide cur_abs = boost::multiprecision::abs(cur);
      if (cur_abs > max_abs) max_abs = cur_abs;
      // Term magnitude ratios decrease in m, so one decreasing step below tol
      // certifies the alternating tail.
      if (cur_abs < tol && boost::multiprecision::abs(next) <= cur_abs) {
        out.term_bound = cur_abs.convert_to<double>();
        break;
      }
      acc += cur;
      ++terms;
      if (terms >= prec_.max_terms) {
        const Wide next_abs = boost::multiprecision::abs(next);
        const double achievable = (next_abs < cur_abs ? next_abs : cur_abs).convert_to<double>();
        throw PrecisionExhausted("death series for n=" + std::to_string(n) + " at t=" +
                                     std::to_string(t_double_) + " did not reach its alternating tail within " +
                                     std::to_string(prec_.max_terms) + " terms",
                                 achievable);
      }
      coeff = std::move(next_c);
      cur = std::move(next);
      ++m;
    }
    const Wide rounding = max_abs * eps_ * Wide(4 * terms + 8);
    out.rounding_bound = rounding.convert_to<double>();
    if (out.rounding_bound > prec_.tail_tol) {
      throw PrecisionExhausted("death series for n=" + std::to_string(n) + " at t=" + std::to_string(t_double_) +
                                   " lost its tolerance to cancellation at " +
                                   std::to_string(prec_.working_digits) + " digits",
                               out.rounding_bound);
    }
    out.term_bound += out.rounding_bound;
    out.value = acc.convert_to<double>();
    out.terms = terms;
    wide_value_ = std::move(acc);
    return out;
  }

  const Wide& last_wide_value() const { return wide_value_; }

 private:
  const Wide& exp_neg(std::size_t m) {
    while (exps_.size() <= m) {
      const std::size_t k = exps_.size();
      Wide rate = Wide(k) * (Wide(k) - 1 + theta_) / 2;
      exps_.push_back(boost::multiprecision::exp(-rate * t_));
    }
    return exps_[m];
  }

  WorkingPrecision guard_;
  PrecisionConfig prec_;
  Wide theta_;
  Wide t_;
  double t_double_;
  Wide eps_;
  std::vector<Wide> exps_;
  Wide wide_value_;
};

PrecisionConfig tightened(const PrecisionConfig& prec, double factor) {
  PrecisionConfig out = prec;
  out.tail_tol = prec.tail_tol / factor;
  return out;
}

void require_positive_theta(const DeathParams& params, const char* what) {
  params.validate();
  if (!(params.theta > 0)) throw std::invalid_argument(std::string(what) + " requires theta > 0");
}

void require_positive_time(double t, const char* what) {
  if (!(t > 0) || !std::isfinite(t)) throw std::invalid_argument(std::string(what) + " requires t > 0");
}

double factorial_double(std::size_t n) {
  double f = 1;
  for (std::size_t i = 2; i <= n; ++i) f *= static_cast<double>(i);
  return f;
}

// prod_{i<n} (m - i) / (theta + m + i) = m_[n] / (theta+m)_(n)
double falling_over_rising(std::size_t m, std::size_t n, std::size_t falling_len, double theta) {
  double w = 1;
  for (std::size_t i = 0; i < n; ++i) {
    if (i < falling_len) w *= static_cast<double>(m) - static_cast<double>(i);
    w /= theta + static_cast<double>(m + i);
  }
  return w;
}

}  // namespace

void DeathParams::validate() const {
  if (!(theta >= 0) || !std::isfinite(theta)) throw std::invalid_argument("theta must be finite and >= 0");
}

void PrecisionConfig::validate() const {
  if (working_digits < 16) throw std::invalid_argument("working_digits must be >= 16");
  if (!(tail_tol > 0)) throw std::invalid_argument("tail_tol must be > 0");
  if (max_terms < 1) throw std::invalid_argument("max_terms must be >= 1");
}

namespace {
std::string short_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", x);
  return buf;
}
}  // namespace

PrecisionExhausted::PrecisionExhausted(const std::string& what, double achievable_tolerance)
    : std::runtime_error(what + " (smallest achievable tolerance " + short_double(achievable_tolerance) + ")"),
      achievable_(achievable_tolerance) {}

double DeathPmf::mass() const { return std::accumulate(probs.begin(), probs.end(), 0.0); }

double death_rate(std::size_t n, const DeathParams& params) {
  const double nd = static_cast<double>(n);
  return 0.5 * nd * (nd - 1 + params.theta);
}

SeriesValue death_prob_series(std::size_t n, double t, const DeathParams& params,
                              const PrecisionConfig& prec) {
  params.validate();
  prec.validate();
  require_positive_time(t, "death_prob_series");
  SeriesEvaluator eval(t, params, prec);
  return eval.evaluate(n);
}

SeriesValue survival_series(double t, const DeathParams& params, const PrecisionConfig& prec) {
  params.validate();
  prec.validate();
  require_positive_time(t, "survival_series");
  SeriesEvaluator eval(t, params, prec);
  return eval.evaluate(0, SeriesEvaluator::Kind::Survival);
}

DeathPmf death_pmf(double t, const DeathParams& params, const PrecisionConfig& prec) {
  params.validate();
  prec.validate();
  require_positive_time(t, "death_pmf");
  DeathPmf pmf;
  pmf.t = t;
  pmf.params = params;
  pmf.prec = prec;

  SeriesEvaluator eval(t, params, prec);
  WorkingPrecision guard(prec.working_digits);
  Wide cumulative = 0;
  double bound_sum = 0;
  const Wide target = Wide(1) - Wide(prec.tail_tol);
  for (std::size_t n = 0;; ++n) {
    if (n >= kMaxSupport)
      throw PrecisionExhausted("death pmf support exceeded " + std::to_string(kMaxSupport), 1.0);
    const SeriesValue sv = eval.evaluate(n);
    double p = sv.value;
    if (p < 0 || p > 1) {
      if (p < -sv.term_bound || p > 1 + sv.term_bound) {
        throw PrecisionExhausted("d_" + std::to_string(n) + "(" + std::to_string(t) +
                                     ") = " + std::to_string(p) + " is outside [0,1] beyond its error bound",
                                 std::abs(p));
      }
      pmf.clamped.push_back(n);
      p = std::clamp(p, 0.0, 1.0);
    }
    pmf.probs.push_back(p);
    pmf.term_bound.push_back(sv.term_bound);
    cumulative += Wide(p);
    bound_sum += sv.term_bound;
    if (cumulative >= target) break;
    // Past the mode the pmf falls off faster than geometrically, so once a
    // value drops below tol the remaining gap is rounding in the earlier terms.
    const bool falling = n > 0 && p < pmf.probs[n - 1] && cumulative > Wide(0.5);
    if (falling && p < prec.tail_tol &&
        (Wide(1) - cumulative).convert_to<double>() <= prec.tail_tol + bound_sum)
      break;
    if (falling && p < prec.tail_tol * 1e-6) break;
  }
  pmf.n_max = pmf.probs.size() - 1;
  pmf.residual = std::max(0.0, (Wide(1) - cumulative).convert_to<double>());
  return pmf;
}

EmpiricalPmf mc_death_pmf(double t, const DeathParams& params, std::size_t n0, std::size_t reps,
                          const Rng& rng, std::size_t workers) {
  params.validate();
  require_positive_time(t, "mc_death_pmf");
  if (n0 < 2) throw std::invalid_argument("mc_death_pmf requires n0 >= 2");
  if (reps < 1) throw std::invalid_argument("mc_death_pmf requires reps >= 1");
  std::vector<double> rates(n0 + 1);
  for (std::size_t k = 0; k <= n0; ++k) rates[k] = death_rate(k, params);

  std::vector<std::vector<std::uint64_t>> chunk_counts(kMcChunks);
  parallel_chunks(rng, kMcChunks, workers, [&](std::size_t chunk, Rng& stream) {
    const std::size_t begin = reps * chunk / kMcChunks;
    const std::size_t end = reps * (chunk + 1) / kMcChunks;
    auto& counts = chunk_counts[chunk];
    counts.assign(n0 + 1, 0);
    for (std::size_t rep = begin; rep < end; ++rep) {
      std::size_t k = n0;
      double clock = 0;
      while (k > 0 && rates[k] > 0) {
        clock += stream.exponential(rates[k]);
        if (clock > t) break;
        --k;
      }
      ++counts[k];
    }
  });
  std::vector<std::uint64_t> counts(n0 + 1, 0);
  for (const auto& c : chunk_counts)
    for (std::size_t k = 0; k <= n0; ++k) counts[k] += c[k];
  // Trim the empty upper tail for readability.
  while (counts.size() > 1 && counts.back() == 0) counts.pop_back();
  return empirical_pmf(counts, reps);
}

McSensitivityReport mc_death_pmf_sensitivity(double t, const DeathParams& params, std::size_t n0,
                                             std::size_t reps, const Rng& rng, std::size_t workers) {
  McSensitivityReport report;
  report.n0 = n0;
  report.base = mc_death_pmf(t, params, n0, reps, rng.substream(0), workers);
  report.doubled = mc_death_pmf(t, params, 2 * n0, reps, rng.substream(1), workers);
  const std::size_t len = std::max(report.base.probs.size(), report.doubled.probs.size());
  for (std::size_t k = 0; k < len; ++k) {
    const double shift = std::abs(report.base.prob(k) - report.doubled.prob(k));
    const double se = std::hypot(report.base.std_error(k), report.doubled.std_error(k));
    report.max_shift = std::max(report.max_shift, shift);
    if (shift > 0) report.max_shift_z = std::max(report.max_shift_z, z_score(report.base.prob(k), report.doubled.prob(k), se));
  }
  return report;
}

std::vector<double> transition_given_n(std::size_t n, double s, const DeathParams& params,
                                       const PrecisionConfig& prec) {
  require_positive_theta(params, "transition_given_n");
  require_positive_time(s, "transition_given_n");
  if (n < 1) throw std::invalid_argument("transition_given_n requires n >= 1");
  // The prefactor theta_(n) n! / (theta_(r) (n-r)!) amplifies pmf errors by
  // up to n!, so the pmf is computed that much tighter.
  const DeathPmf pmf = death_pmf(s, params, tightened(prec, 10 * factorial_double(n)));
  WorkingPrecision guard(prec.working_digits);
  const Wide theta = params.theta;
  std::vector<double> out(n + 1, 0.0);
  for (std::size_t r = 0; r <= n; ++r) {
    Wide pref = 1;
    for (std::size_t i = r; i < n; ++i) pref *= theta + Wide(i);
    for (std::size_t i = n - r + 1; i <= n; ++i) pref *= Wide(i);
    Wide sum = 0;
    Wide binom = 1;  // C(m, r), starting at m = r
    for (std::size_t m = r; m <= pmf.n_max; ++m) {
      if (m > r) binom = binom * Wide(m) / Wide(m - r);
      Wide rising = 1;
      for (std::size_t i = 0; i < n; ++i) rising *= theta + Wide(m + i);
      sum += binom / rising * Wide(pmf.probs[m]);
    }
    out[r] = Wide(pref * sum).convert_to<double>();
  }
  return out;
}

double transition_closed_form(std::size_t n, std::size_t r, double s, const DeathParams& params,
                              unsigned working_digits) {
  params.validate();
  if (r > n) throw std::invalid_argument("transition_closed_form requires r <= n");
  if (!(s >= 0)) throw std::invalid_argument("transition_closed_form requires s >= 0");
  WorkingPrecision guard(working_digits);
  const Wide theta = params.theta;
  std::vector<Wide> rates;
  for (std::size_t k = r; k <= n; ++k) rates.push_back(Wide(k) * (Wide(k) - 1 + theta) / 2);
  for (std::size_t i = 0; i < rates.size(); ++i)
    for (std::size_t j = i + 1; j < rates.size(); ++j)
      if (rates[i] == rates[j])
        throw std::invalid_argument("transition_closed_form requires distinct death rates");
  const Wide sw = s;
  if (r == n) return Wide(boost::multiprecision::exp(-rates[0] * sw)).convert_to<double>();
  Wide product = 1;
  for (std::size_t i = 1; i < rates.size(); ++i) product *= rates[i];
  Wide sum = 0;
  for (std::size_t k = 0; k < rates.size(); ++k) {
    Wide denom = 1;
    for (std::size_t j = 0; j < rates.size(); ++j)
      if (j != k) denom *= rates[j] - rates[k];
    sum += boost::multiprecision::exp(-rates[k] * sw) / denom;
  }
  return Wide(product * sum).convert_to<double>();
}

double check_result_a(std::size_t n, double s, const DeathParams& params, const PrecisionConfig& prec) {
  require_positive_theta(params, "check_result_a");
  if (n < 1) throw std::invalid_argument("check_result_a requires n >= 1");
  const DeathPmf pmf = death_pmf(s, params, tightened(prec, 100));
  double lhs = 0;
  for (std::size_t m = n; m <= pmf.n_max; ++m) lhs += falling_over_rising(m, n, n, params.theta) * pmf.probs[m];
  return std::abs(lhs - std::exp(-death_rate(n, params) * s));
}

ResultBReport result_b_report(std::size_t n, double s, const DeathParams& params, const PrecisionConfig& prec) {
  require_positive_theta(params, "check_result_b");
  if (n < 1) throw std::invalid_argument("check_result_b requires n >= 1");
  auto series_h = [&](double at, const PrecisionConfig& p) {
    const DeathPmf pmf = death_pmf(at, params, p);
    double h = 0;
    for (std::size_t m = n - 1; m <= pmf.n_max; ++m)
      h += falling_over_rising(m, n, n - 1, params.theta) * pmf.probs[m];
    return h;
  };
  auto closed_h = [&](double at) {
    const double lo = death_rate(n - 1, params);
    const double hi = death_rate(n, params);
    return 0.5 * (std::exp(-lo * at) - std::exp(-hi * at)) / (hi - lo);
  };
  ResultBReport rep;
  const PrecisionConfig tight = tightened(prec, 100);
  rep.series = series_h(s, tight);
  rep.closed_form = closed_h(s);
  rep.residual = std::abs(rep.series - rep.closed_form);
  rep.h_at_one = series_h(1.0, tight);
  // H(0) = 0: probe the smallest s reachable at this precision and check
  // 0 <= H(s) <= s/2, which follows from H' <= 1/2.
  for (double probe = 1e-3; probe <= 0.5; probe *= 2) {
    try {
      rep.h_probe = series_h(probe, prec);
      rep.probe_s = probe;
      break;
    } catch (const PrecisionExhausted&) {
    }
  }
  if (rep.probe_s > 0) {
    const double slack = 10 * prec.tail_tol;
    rep.vanishes_at_zero = rep.h_probe >= -slack && rep.h_probe <= rep.probe_s / 2 + slack;
  }
  return rep;
}

double check_result_b(std::size_t n, double s, const DeathParams& params, const PrecisionConfig& prec) {
  require_positive_theta(params, "check_result_b");
  if (n < 1) throw std::invalid_argument("check_result_b requires n >= 1");
  const DeathPmf pmf = death_pmf(s, params, tightened(prec, 100));
  double h = 0;
  for (std::size_t m = n - 1; m <= pmf.n_max; ++m) h += falling_over_rising(m, n, n - 1, params.theta) * pmf.probs[m];
  const double lo = death_rate(n - 1, params);
  const double hi = death_rate(n, params);
  return std::abs(h - 0.5 * (std::exp(-lo * s) - std::exp(-hi * s)) / (hi - lo));
}

double check_chapman_kolmogorov(std::size_t r, double t, double s, const DeathParams& params,
                                const PrecisionConfig& prec) {
  require_positive_theta(params, "check_chapman_kolmogorov");
  require_positive_time(t, "check_chapman_kolmogorov");
  require_positive_time(s, "check_chapman_kolmogorov");
  const PrecisionConfig tight = tightened(prec, 100);
  const DeathPmf pmf_t = death_pmf(t, params, tight);
  const DeathPmf pmf_s = death_pmf(s, params, tight);
  const DeathPmf pmf_ts = death_pmf(t + s, params, tight);
  WorkingPrecision guard(prec.working_digits);
  const Wide theta = params.theta;
  Wide rhs = 0;
  for (std::size_t n = r; n <= pmf_t.n_max; ++n) {
    if (pmf_t.probs[n] == 0) continue;
    Wide inner = 0;
    for (std::size_t m = r; m <= pmf_s.n_max; ++m) {
      if (pmf_s.probs[m] == 0) continue;
      inner += overlap_prob_extended(r, m, n, theta) * Wide(pmf_s.probs[m]);
    }
    rhs += inner * Wide(pmf_t.probs[n]);
  }
  return std::abs(pmf_ts.prob(r) - rhs.convert_to<double>());
}

InequalityReport inequality_report(double t, const DeathParams& params, const PrecisionConfig& prec) {
  require_positive_theta(params, "check_inequality");
  InequalityReport rep;
  const SeriesValue survival = survival_series(t, params, prec);
  rep.value = survival.value;
  rep.lower = std::exp(-death_rate(1, params) * t);
  rep.upper = (1 + params.theta) * rep.lower;
  rep.margin = 10 * prec.tail_tol;
  rep.holds = rep.value > rep.lower - rep.margin && rep.value < rep.upper + rep.margin;
  return rep;
}

bool check_inequality(double t, const DeathParams& params, const PrecisionConfig& prec) {
  return inequality_report(t, params, prec).holds;
}

std::size_t sample_death_count(const DeathPmf& pmf, Rng& rng) {
  if (pmf.residual > 0.01) throw std::invalid_argument("death pmf residual too large to sample");
  const double total = pmf.mass();
  const double u = rng.uniform() * total;
  double acc = 0;
  for (std::size_t n = 0; n < pmf.probs.size(); ++n) {
    acc += pmf.probs[n];
    if (u < acc) return n;
  }
  // u landed in the rounding gap at the top; return the last supported index.
  for (std::size_t n = pmf.probs.size(); n-- > 0;)
    if (pmf.probs[n] > 0) return n;
  return 0;
}

}  // namespace fvkit
