#include "fvkit/polya_urn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace fvkit {

namespace {

constexpr std::size_t kMcChunks = 64;

Rational lemma_rising(const Rational& theta, std::size_t r, std::size_t m) {
  // (theta + r)_(m-r) as the left-hand sum of the rising-factorial convolution.
  const std::size_t d = m - r;
  Rational sum = 0;
  for (std::size_t k = 0; k <= d; ++k)
    sum += Rational(factorial(k) * binomial(k + r - 1, k) * binomial(d, k)) * rising_factorial(theta, d - k);
  return sum;
}

Rational primary_with_route(std::size_t r, std::size_t m, std::size_t n, const Rational& theta,
                            RisingRoute route) {
  if (r > std::min(m, n)) return 0;
  Rational rising = (route == RisingRoute::LemmaSum && r >= 1) ? lemma_rising(theta, r, m)
                                                                : rising_factorial(theta + Rational(r), m - r);
  return falling_factorial(Rational(n), r) * rising * Rational(binomial(m, r)) /
         rising_factorial(theta + Rational(n), m);
}

Wide wide_rising(const Wide& a, std::size_t m) {
  Wide out = 1;
  for (std::size_t i = 0; i < m; ++i) out *= a + Wide(i);
  return out;
}

Wide wide_binomial(std::size_t m, std::size_t r) {
  if (r > m) return Wide(0);
  Wide out = 1;
  for (std::size_t i = 1; i <= r; ++i) out = out * Wide(m - r + i) / Wide(i);
  return out;
}

struct Enumerator {
  std::size_t m;
  std::size_t n;
  Rational theta;
  std::vector<Rational> totals;
  // root[j] = 0 for Fresh, else the X index hit.
  std::vector<std::size_t> root;
  std::vector<std::size_t> hits;  // multiplicity per X index
  std::size_t distinct = 0;

  void visit(std::size_t j, const Rational& prob) {
    if (j > m) {
      totals[distinct] += prob;
      return;
    }
    const Rational step = Rational(1) / (theta + Rational(n + j - 1));
    const Rational unit = prob * step;
    for (std::size_t i = 1; i <= n; ++i) descend(j, i, unit);
    for (std::size_t l = 1; l < j; ++l) descend(j, root[l], unit);
    if (theta != 0) descend(j, 0, unit * theta);
  }

  void descend(std::size_t j, std::size_t x, const Rational& prob) {
    root[j] = x;
    if (x != 0 && hits[x]++ == 0) ++distinct;
    visit(j + 1, prob);
    if (x != 0 && --hits[x] == 0) --distinct;
  }
};

}  // namespace

void UrnParams::validate() const {
  if (!(theta >= 0) || !std::isfinite(theta)) throw std::invalid_argument("urn theta must be >= 0");
  if (theta + static_cast<double>(n) <= 0) throw std::invalid_argument("urn needs theta + n > 0");
}

void UrnTrace::validate() const {
  params.validate();
  for (std::size_t j = 0; j < labels.size(); ++j) {
    const auto& label = labels[j];
    switch (label.kind) {
      case DrawLabel::Kind::HitX:
        if (label.index < 1 || label.index > params.n) throw std::invalid_argument("HitX index out of range");
        break;
      case DrawLabel::Kind::RepeatY:
        if (label.index < 1 || label.index > j)
          throw std::invalid_argument("RepeatY must reference a strictly earlier draw");
        break;
      case DrawLabel::Kind::Fresh:
        break;
    }
  }
}

UrnTrace sample_urn(const UrnParams& params, std::size_t m, Rng& rng) {
  params.validate();
  UrnTrace trace{params, {}};
  trace.labels.reserve(m);
  const double n = static_cast<double>(params.n);
  for (std::size_t j = 1; j <= m; ++j) {
    const double earlier = static_cast<double>(j - 1);
    const double u = rng.uniform() * (params.theta + n + earlier);
    if (u < n) {
      trace.labels.push_back(DrawLabel::hit_x(std::min(params.n, static_cast<std::size_t>(u) + 1)));
    } else if (u < n + earlier) {
      trace.labels.push_back(DrawLabel::repeat_y(std::min(j - 1, static_cast<std::size_t>(u - n) + 1)));
    } else {
      trace.labels.push_back(DrawLabel::fresh());
    }
  }
  return trace;
}

std::vector<DrawLabel> resolve_roots(const UrnTrace& trace) {
  trace.validate();
  std::vector<DrawLabel> roots;
  roots.reserve(trace.labels.size());
  for (const auto& label : trace.labels)
    roots.push_back(label.kind == DrawLabel::Kind::RepeatY ? roots[label.index - 1] : label);
  return roots;
}

std::size_t overlap_count(const UrnTrace& trace) {
  std::vector<std::size_t> hit;
  for (const auto& root : resolve_roots(trace))
    if (root.kind == DrawLabel::Kind::HitX) hit.push_back(root.index);
  std::sort(hit.begin(), hit.end());
  return static_cast<std::size_t>(std::unique(hit.begin(), hit.end()) - hit.begin());
}

std::vector<double> OverlapPmf::to_doubles() const {
  std::vector<double> out;
  out.reserve(probs.size());
  for (const auto& p : probs) out.push_back(to_double(p));
  return out;
}

Rational overlap_prob_primary(std::size_t r, std::size_t m, std::size_t n, const Rational& theta) {
  return primary_with_route(r, m, n, theta, RisingRoute::Direct);
}

Rational overlap_prob_extended(std::size_t r, std::size_t m, std::size_t n, const Rational& theta) {
  if (r > std::min(m, n)) return 0;
  return Rational(factorial(r) * binomial(n, r) * binomial(m, r)) * rising_factorial(theta, n) *
         rising_factorial(theta, m) / (rising_factorial(theta, n + m) * rising_factorial(theta, r));
}

Wide overlap_prob_primary(std::size_t r, std::size_t m, std::size_t n, const Wide& theta) {
  if (r > std::min(m, n)) return Wide(0);
  Wide falling = 1;
  for (std::size_t i = 0; i < r; ++i) falling *= Wide(n - i);
  return falling * wide_rising(theta + Wide(r), m - r) * wide_binomial(m, r) / wide_rising(theta + Wide(n), m);
}

Wide overlap_prob_extended(std::size_t r, std::size_t m, std::size_t n, const Wide& theta) {
  if (r > std::min(m, n)) return Wide(0);
  // theta_(n)/theta_(r) = (theta+r)_(n-r) and theta_(m)/theta_(n+m) = 1/(theta+m)_(n).
  Wide rf = 1;
  for (std::size_t i = 2; i <= r; ++i) rf *= Wide(i);
  return rf * wide_binomial(n, r) * wide_binomial(m, r) * wide_rising(theta + Wide(r), n - r) /
         wide_rising(theta + Wide(m), n);
}

OverlapPmf overlap_pmf_exact(std::size_t m, std::size_t n, const Rational& theta, RisingRoute route) {
  if (theta <= 0) throw std::invalid_argument("overlap_pmf_exact requires theta > 0");
  OverlapPmf pmf{m, n, theta, {}};
  Rational total = 0;
  for (std::size_t r = 0; r <= std::min(m, n); ++r) {
    const Rational primary = primary_with_route(r, m, n, theta, route);
    const Rational extended = overlap_prob_extended(r, m, n, theta);
    if (primary != extended) {
      throw std::logic_error("overlap forms disagree at r=" + std::to_string(r) + ": " + to_string(primary) +
                             " vs " + to_string(extended));
    }
    total += primary;
    pmf.probs.push_back(primary);
  }
  if (total != 1) throw std::logic_error("overlap pmf does not sum to 1: " + to_string(total));
  return pmf;
}

std::vector<double> overlap_pmf_real(std::size_t m, std::size_t n, double theta, unsigned working_digits) {
  if (!(theta > 0)) throw std::invalid_argument("overlap_pmf_real requires theta > 0");
  WorkingPrecision guard(std::max(working_digits, 40u));
  const Wide th = theta;
  const Wide budget("1e-30");
  std::vector<double> out;
  for (std::size_t r = 0; r <= std::min(m, n); ++r) {
    const Wide a = overlap_prob_primary(r, m, n, th);
    const Wide b = overlap_prob_extended(r, m, n, th);
    if (boost::multiprecision::abs(a - b) > budget * boost::multiprecision::abs(a))
      throw std::logic_error("overlap forms disagree beyond the relative budget at r=" + std::to_string(r));
    out.push_back(a.convert_to<double>());
  }
  return out;
}

Rational overlap_prob_theta0_primary(std::size_t r, std::size_t m, std::size_t n) {
  if (r > std::min(m, n)) return 0;
  return falling_factorial(Rational(n), r) * rising_factorial(Rational(r), m - r) * Rational(binomial(m, r)) /
         rising_factorial(Rational(n), m);
}

Rational overlap_prob_theta0_rewritten(std::size_t r, std::size_t m, std::size_t n) {
  if (r > std::min(m, n)) return 0;
  return Rational(Integer(r) * binomial(m, r) * binomial(n, r) * factorial(n - 1) * factorial(m - 1)) /
         Rational(factorial(n + m - 1));
}

OverlapPmf overlap_pmf_theta0(std::size_t m, std::size_t n) {
  if (m < 1 || n < 1) throw std::invalid_argument("overlap_pmf_theta0 requires m, n >= 1");
  OverlapPmf pmf{m, n, Rational(0), {}};
  Rational total = 0;
  for (std::size_t r = 0; r <= std::min(m, n); ++r) {
    const Rational a = overlap_prob_theta0_primary(r, m, n);
    const Rational b = overlap_prob_theta0_rewritten(r, m, n);
    if (a != b)
      throw std::logic_error("theta=0 overlap forms disagree at r=" + std::to_string(r));
    total += a;
    pmf.probs.push_back(a);
  }
  if (total != 1) throw std::logic_error("theta=0 overlap pmf does not sum to 1");
  return pmf;
}

std::uint64_t enumeration_paths(std::size_t m, std::size_t n) {
  std::uint64_t paths = 1;
  for (std::size_t j = 1; j <= m; ++j) {
    const std::uint64_t factor = n + j;
    if (paths > std::numeric_limits<std::uint64_t>::max() / factor) return std::numeric_limits<std::uint64_t>::max();
    paths *= factor;
  }
  return paths;
}

OverlapPmf overlap_pmf_bruteforce(std::size_t m, std::size_t n, const Rational& theta) {
  if (theta < 0) throw std::invalid_argument("overlap_pmf_bruteforce requires theta >= 0");
  if (theta == 0 && n == 0 && m > 0) throw std::invalid_argument("urn needs theta + n > 0");
  if (enumeration_paths(m, n) > kEnumerationBudget)
    throw std::length_error("urn enumeration exceeds the budget of " + std::to_string(kEnumerationBudget) +
                            " paths");
  Enumerator e{m, n, theta, std::vector<Rational>(std::min(m, n) + 1), std::vector<std::size_t>(m + 1, 0),
               std::vector<std::size_t>(n + 1, 0)};
  e.visit(1, Rational(1));
  return OverlapPmf{m, n, theta, std::move(e.totals)};
}

EmpiricalPmf overlap_pmf_montecarlo(std::size_t m, std::size_t n, double theta, std::size_t reps,
                                    const Rng& rng, std::size_t workers) {
  if (reps < 1) throw std::invalid_argument("overlap_pmf_montecarlo requires reps >= 1");
  const UrnParams params{theta, n};
  params.validate();
  std::vector<std::vector<std::uint64_t>> chunk_counts(kMcChunks);
  parallel_chunks(rng, kMcChunks, workers, [&](std::size_t chunk, Rng& stream) {
    auto& counts = chunk_counts[chunk];
    counts.assign(std::min(m, n) + 1, 0);
    const std::size_t begin = reps * chunk / kMcChunks;
    const std::size_t end = reps * (chunk + 1) / kMcChunks;
    for (std::size_t rep = begin; rep < end; ++rep) ++counts[overlap_count(sample_urn(params, m, stream))];
  });
  std::vector<std::uint64_t> counts(std::min(m, n) + 1, 0);
  for (const auto& c : chunk_counts)
    for (std::size_t k = 0; k < counts.size(); ++k) counts[k] += c[k];
  return empirical_pmf(counts, reps);
}

}  // namespace fvkit
