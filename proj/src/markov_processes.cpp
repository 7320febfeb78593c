#include "fvkit/markov_processes.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace fvkit {

namespace {

constexpr std::size_t kChunks = 64;

// out[i] = fn(rng) for replicate i; chunk c owns a contiguous index range and
// drives it from master.substream(c).
template <typename T, typename Fn>
std::vector<T> replicate(std::size_t reps, const Rng& master, std::size_t workers, Fn&& fn) {
  std::vector<T> out(reps);
  parallel_chunks(master, kChunks, workers, [&](std::size_t chunk, Rng& rng) {
    const std::size_t lo = chunk * reps / kChunks;
    const std::size_t hi = (chunk + 1) * reps / kChunks;
    for (std::size_t i = lo; i < hi; ++i) out[i] = fn(rng);
  });
  return out;
}

DiscreteMeasure chain_step(const DiscreteMeasure& mu, double theta, const BaseMeasure& base, std::size_t n,
                           const Truncation& truncation, double max_residual, Rng& rng) {
  auto xs = sample_from_measure(mu, n, rng, max_residual);
  return sample_posterior(posterior(theta, base, std::move(xs)), truncation, rng);
}

StationarityReport summarise(const std::vector<std::vector<double>>& paths, double nu, double theta) {
  StationarityReport rep;
  rep.expected_mean = nu;
  rep.expected_variance = dirichlet_variance(theta, nu);
  const std::size_t steps = paths.empty() ? 0 : paths.front().size();
  std::vector<double> column(paths.size());
  for (std::size_t k = 0; k < steps; ++k) {
    for (std::size_t i = 0; i < paths.size(); ++i) column[i] = paths[i][k];
    const MomentEstimate est = estimate_moments(column);
    rep.max_mean_z = std::max(rep.max_mean_z, z_score(est.mean, rep.expected_mean, est.mean_se));
    rep.max_variance_z = std::max(rep.max_variance_z, z_score(est.variance, rep.expected_variance, est.variance_se));
    rep.per_step.push_back(est);
  }
  return rep;
}

}  // namespace

void Dar1Config::validate() const {
  if (!(theta > 0) || !std::isfinite(theta)) throw std::invalid_argument("DAR(1) requires theta > 0");
}

Location dar1_step(const Location& x, const Dar1Config& cfg, Rng& rng) {
  if (rng.uniform() * (1 + cfg.theta) < cfg.theta) return cfg.base.draw(rng);
  return x;
}

std::vector<std::vector<double>> dar1_transition_matrix(const Dar1Config& cfg) {
  cfg.validate();
  if (cfg.base.is_nonatomic()) throw std::invalid_argument("transition matrix needs a finite-discrete base");
  const auto& nu = cfg.base.weights();
  const std::size_t k = nu.size();
  std::vector<std::vector<double>> p(k, std::vector<double>(k));
  for (std::size_t x = 0; x < k; ++x)
    for (std::size_t y = 0; y < k; ++y) p[x][y] = (cfg.theta * nu[y] + (x == y ? 1.0 : 0.0)) / (1 + cfg.theta);
  return p;
}

double dar1_detailed_balance(const Dar1Config& cfg) {
  const auto p = dar1_transition_matrix(cfg);
  const auto& nu = cfg.base.weights();
  double worst = 0;
  for (std::size_t x = 0; x < nu.size(); ++x)
    for (std::size_t y = 0; y < nu.size(); ++y) worst = std::max(worst, std::abs(nu[x] * p[x][y] - nu[y] * p[y][x]));
  return worst;
}

RetentionReport dar1_retention(const Dar1Config& cfg, std::size_t steps, Rng& rng) {
  cfg.validate();
  if (steps < 1) throw std::invalid_argument("dar1_retention requires steps >= 1");
  Location x = cfg.base.draw(rng);
  std::size_t kept = 0;
  for (std::size_t k = 0; k < steps; ++k) {
    const Location next = dar1_step(x, cfg, rng);
    if (next.same_point(x)) ++kept;
    x = next;
  }
  RetentionReport rep;
  rep.rate = static_cast<double>(kept) / static_cast<double>(steps);
  rep.expected = 1 / (1 + cfg.theta);
  rep.std_error = std::sqrt(rep.expected * (1 - rep.expected) / static_cast<double>(steps));
  return rep;
}

ChiSquareResult dar1_marginal_test(const Dar1Config& cfg, std::size_t samples, std::size_t thin, Rng& rng) {
  cfg.validate();
  if (cfg.base.is_nonatomic()) throw std::invalid_argument("marginal test needs a finite-discrete base");
  if (samples < 1 || thin < 1) throw std::invalid_argument("marginal test needs samples, thin >= 1");
  std::vector<std::uint64_t> counts(cfg.base.size());
  Location x = cfg.base.draw(rng);
  for (std::size_t i = 0; i < samples; ++i) {
    for (std::size_t k = 0; k < thin; ++k) x = dar1_step(x, cfg, rng);
    ++counts[x.counter];
  }
  return chi_square_gof(counts, cfg.base.weights());
}

void MeasureChainConfig::validate() const {
  if (!(theta > 0) || !std::isfinite(theta)) throw std::invalid_argument("measure chain requires theta > 0");
  if (n < 1) throw std::invalid_argument("measure chain requires n >= 1");
  truncation.validate();
}

DiscreteMeasure measure_chain_step(const DiscreteMeasure& mu, const MeasureChainConfig& cfg, Rng& rng) {
  cfg.validate();
  return chain_step(mu, cfg.theta, cfg.base, cfg.n, cfg.truncation, cfg.max_residual, rng);
}

void FvConfig::validate() const {
  if (!(theta > 0) || !std::isfinite(theta)) throw std::invalid_argument("Fleming-Viot requires theta > 0");
  if (!(t > 0) || !std::isfinite(t)) throw std::invalid_argument("Fleming-Viot requires t > 0");
  prec.validate();
  truncation.validate();
}

FlemingViotKernel::FlemingViotKernel(FvConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  pmf_ = fvkit::death_pmf(cfg_.t, DeathParams{cfg_.theta}, cfg_.prec);
  if (pmf_.residual >= 1e-6)
    throw std::invalid_argument("death pmf residual " + std::to_string(pmf_.residual) + " exceeds 1e-6");
}

DiscreteMeasure FlemingViotKernel::step(const DiscreteMeasure& mu, Rng& rng) const {
  const std::size_t n = sample_death_count(pmf_, rng);
  return step_with_count(mu, n, rng);
}

DiscreteMeasure FlemingViotKernel::step_with_count(const DiscreteMeasure& mu, std::size_t n, Rng& rng) const {
  return chain_step(mu, cfg_.theta, cfg_.base, n, cfg_.truncation, cfg_.max_residual, rng);
}

DiscreteMeasure fv_step(const DiscreteMeasure& mu, const FvConfig& cfg, Rng& rng) {
  return FlemingViotKernel(cfg).step(mu, rng);
}

DiscreteMeasure stationary_draw(double theta, const BaseMeasure& base, const Truncation& truncation, Rng& rng) {
  return stick_break(StickBreakingParams::dirichlet(theta), base, truncation, rng);
}

TwoSampleReport compare_samples(const std::vector<double>& a, const std::vector<double>& b) {
  TwoSampleReport rep;
  rep.ks = ks_two_sample(a, b);
  rep.first = estimate_moments(a);
  rep.second = estimate_moments(b);
  rep.mean_diff = rep.first.mean - rep.second.mean;
  rep.mean_diff_se = std::hypot(rep.first.mean_se, rep.second.mean_se);
  rep.var_diff = rep.first.variance - rep.second.variance;
  rep.var_diff_se = std::hypot(rep.first.variance_se, rep.second.variance_se);
  return rep;
}

TwoSampleReport fv_chapman_kolmogorov_process_test(const FvConfig& cfg, double t, double s, const TestSet& set,
                                                   std::size_t reps, const Rng& rng, std::size_t workers) {
  if (reps < 2) throw std::invalid_argument("process Chapman-Kolmogorov test needs reps >= 2");
  auto with_time = [&](double dt) {
    FvConfig c = cfg;
    c.t = dt;
    return FlemingViotKernel(c);
  };
  const FlemingViotKernel direct = with_time(t + s);
  const FlemingViotKernel first = with_time(t);
  const FlemingViotKernel second = with_time(s);

  Rng start_rng = rng.substream(0);
  const DiscreteMeasure mu0 = stationary_draw(cfg.theta, cfg.base, cfg.truncation, start_rng);

  const auto one = replicate<double>(reps, rng.substream(1), workers,
                                     [&](Rng& r) { return direct.step(mu0, r).mass(set); });
  const auto two = replicate<double>(reps, rng.substream(2), workers,
                                     [&](Rng& r) { return second.step(first.step(mu0, r), r).mass(set); });
  return compare_samples(one, two);
}

StationarityReport measure_chain_stationarity(const MeasureChainConfig& cfg, const TestSet& set, std::size_t steps,
                                              std::size_t reps, const Rng& rng, std::size_t workers) {
  cfg.validate();
  if (reps < 2) throw std::invalid_argument("stationarity check needs reps >= 2");
  const auto paths = replicate<std::vector<double>>(reps, rng, workers, [&](Rng& r) {
    std::vector<double> path;
    DiscreteMeasure mu = stationary_draw(cfg.theta, cfg.base, cfg.truncation, r);
    path.push_back(mu.mass(set));
    for (std::size_t k = 0; k < steps; ++k) {
      mu = measure_chain_step(mu, cfg, r);
      path.push_back(mu.mass(set));
    }
    return path;
  });
  return summarise(paths, cfg.base.measure(set), cfg.theta);
}

StationarityReport fv_stationarity(const FvConfig& cfg, const TestSet& set, std::size_t steps, std::size_t reps,
                                   const Rng& rng, std::size_t workers) {
  if (reps < 2) throw std::invalid_argument("stationarity check needs reps >= 2");
  const FlemingViotKernel kernel(cfg);
  const auto paths = replicate<std::vector<double>>(reps, rng, workers, [&](Rng& r) {
    std::vector<double> path;
    DiscreteMeasure mu = stationary_draw(cfg.theta, cfg.base, cfg.truncation, r);
    path.push_back(mu.mass(set));
    for (std::size_t k = 0; k < steps; ++k) {
      mu = kernel.step(mu, r);
      path.push_back(mu.mass(set));
    }
    return path;
  });
  return summarise(paths, cfg.base.measure(set), cfg.theta);
}

ReversibilityReport measure_chain_reversibility(const MeasureChainConfig& cfg, const TestSet& set, std::size_t reps,
                                                const Rng& rng, std::size_t workers) {
  cfg.validate();
  if (reps < 4) throw std::invalid_argument("reversibility check needs reps >= 4");
  const auto pairs = replicate<std::pair<double, double>>(reps, rng, workers, [&](Rng& r) {
    const DiscreteMeasure mu0 = stationary_draw(cfg.theta, cfg.base, cfg.truncation, r);
    const DiscreteMeasure mu1 = measure_chain_step(mu0, cfg, r);
    return std::pair{mu0.mass(set), mu1.mass(set)};
  });
  std::vector<double> antisym, forward, backward;
  antisym.reserve(reps);
  for (std::size_t i = 0; i < reps; ++i) {
    const auto [u, v] = pairs[i];
    antisym.push_back(u * u * v - u * v * v);
    (i % 2 == 0 ? forward : backward).push_back(i % 2 == 0 ? u - v : v - u);
  }
  ReversibilityReport rep;
  const MomentEstimate est = estimate_moments(antisym);
  rep.antisymmetric_mean = est.mean;
  rep.antisymmetric_se = est.mean_se;
  rep.ks = ks_two_sample(std::move(forward), std::move(backward));
  return rep;
}

ChainKind parse_chain_kind(const std::string& name) {
  if (name == "dar1") return ChainKind::Dar1;
  if (name == "measure-chain") return ChainKind::MeasureChain;
  if (name == "fv") return ChainKind::FlemingViot;
  throw std::invalid_argument("unknown chain kind '" + name + "'");
}

std::string chain_kind_name(ChainKind kind) {
  switch (kind) {
    case ChainKind::Dar1: return "dar1";
    case ChainKind::MeasureChain: return "measure-chain";
    case ChainKind::FlemingViot: return "fv";
  }
  return "?";
}

std::vector<std::vector<double>> run_chain(const ChainSpec& spec, std::size_t steps,
                                           const std::vector<TestSet>& observables, Rng& rng) {
  if (steps < 1) throw std::invalid_argument("run_chain requires steps >= 1");
  std::vector<std::vector<double>> rows;
  rows.reserve(steps);
  auto record = [&](auto&& value_of) {
    std::vector<double> row;
    row.reserve(observables.size());
    for (const auto& a : observables) row.push_back(value_of(a));
    rows.push_back(std::move(row));
  };

  switch (spec.kind) {
    case ChainKind::Dar1: {
      const Dar1Config cfg{spec.theta, spec.base};
      cfg.validate();
      Location x = spec.base.draw(rng);
      for (std::size_t k = 0; k < steps; ++k) {
        x = dar1_step(x, cfg, rng);
        record([&](const TestSet& a) { return a.is_everything() || a.contains(x) ? 1.0 : 0.0; });
      }
      break;
    }
    case ChainKind::MeasureChain: {
      MeasureChainConfig cfg;
      cfg.theta = spec.theta;
      cfg.base = spec.base;
      cfg.n = spec.n;
      cfg.truncation = spec.truncation;
      cfg.validate();
      DiscreteMeasure mu = stationary_draw(cfg.theta, cfg.base, cfg.truncation, rng);
      for (std::size_t k = 0; k < steps; ++k) {
        mu = measure_chain_step(mu, cfg, rng);
        record([&](const TestSet& a) { return mu.mass(a); });
      }
      break;
    }
    case ChainKind::FlemingViot: {
      FvConfig cfg;
      cfg.theta = spec.theta;
      cfg.base = spec.base;
      cfg.t = spec.t;
      cfg.prec = spec.prec;
      cfg.truncation = spec.truncation;
      const FlemingViotKernel kernel(cfg);
      DiscreteMeasure mu = stationary_draw(cfg.theta, cfg.base, cfg.truncation, rng);
      for (std::size_t k = 0; k < steps; ++k) {
        mu = kernel.step(mu, rng);
        record([&](const TestSet& a) { return mu.mass(a); });
      }
      break;
    }
  }
  return rows;
}

}  // namespace fvkit
