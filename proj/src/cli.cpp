#include "fvkit/cli.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "fvkit/combinatorics.hpp"
#include "fvkit/death_process.hpp"
#include "fvkit/markov_processes.hpp"
#include "fvkit/polya_urn.hpp"
#include "fvkit/random_measures.hpp"
#include "fvkit/report.hpp"

namespace fvkit::cli {

namespace {

struct Options {
  std::string command;
  std::string target;  // suite, pmf kind or chain kind

  std::optional<std::string> theta, sigma, t, s;
  std::optional<std::size_t> m, n, r, reps, m_max;
  std::size_t k_max = 12, c_max = 12;
  std::size_t steps = 100;
  std::optional<std::uint64_t> seed;
  unsigned digits = 60;
  std::string tail_tol = "1e-12";
  std::size_t max_terms = 400;
  std::string format = "csv";
  std::string out;
  std::size_t workers = 1;
  std::string grid = "default";
  std::vector<std::string> observables;
  std::string base = "uniform";
  std::string epsilon = "1e-8";
  std::size_t sticks = 0;
  bool bruteforce = false;
};

struct BadArguments : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

double number(const std::string& text, const char* flag) {
  try {
    return to_double(parse_rational(text));
  } catch (const std::exception&) {
    throw BadArguments(std::string("invalid value for ") + flag + ": '" + text + "'");
  }
}

std::vector<double> theta_grid(const Options& o, std::vector<double> fallback) {
  if (o.theta) return {number(*o.theta, "--theta")};
  return fallback;
}

std::uint64_t resolve_seed(const Options& o) {
  if (o.seed) return *o.seed;
  if (const char* env = std::getenv("FVKIT_SEED"); env && *env) {
    try {
      std::size_t used = 0;
      const auto v = std::stoull(env, &used, 10);
      if (used == std::string(env).size()) return v;
    } catch (const std::exception&) {
    }
    throw BadArguments(std::string("FVKIT_SEED is not an unsigned integer: '") + env + "'");
  }
  return 1;
}

PrecisionConfig precision(const Options& o) {
  PrecisionConfig p;
  p.working_digits = o.digits;
  p.tail_tol = number(o.tail_tol, "--tail-tol");
  p.max_terms = o.max_terms;
  try {
    p.validate();
  } catch (const std::invalid_argument& e) {
    throw BadArguments(e.what());
  }
  return p;
}

Truncation truncation(const Options& o) {
  Truncation tr = o.sticks > 0 ? Truncation::fixed(o.sticks) : Truncation::residual(number(o.epsilon, "--epsilon"));
  try {
    tr.validate();
  } catch (const std::invalid_argument& e) {
    throw BadArguments(e.what());
  }
  return tr;
}

// "uniform", "discrete:k" (k equal atoms at 0..k-1) or "discrete:w1,w2,...".
BaseMeasure parse_base(const std::string& text) {
  if (text == "uniform") return BaseMeasure::uniform();
  const std::string prefix = "discrete:";
  if (text.rfind(prefix, 0) != 0) throw BadArguments("invalid --base '" + text + "'");
  std::vector<double> weights;
  std::stringstream ss(text.substr(prefix.size()));
  for (std::string item; std::getline(ss, item, ',');) weights.push_back(number(item, "--base"));
  if (weights.size() == 1) {
    const double k = weights.front();
    if (!(k >= 1) || k != std::floor(k)) throw BadArguments("invalid --base '" + text + "'");
    weights.assign(static_cast<std::size_t>(k), 1.0 / k);
  }
  std::vector<double> locations(weights.size());
  for (std::size_t i = 0; i < locations.size(); ++i) locations[i] = static_cast<double>(i);
  try {
    return BaseMeasure::discrete(std::move(locations), std::move(weights));
  } catch (const std::invalid_argument& e) {
    throw BadArguments(e.what());
  }
}

void common_metadata(Table& table, const Options& o, std::uint64_t seed) {
  table.meta("command", o.command + " " + o.target);
  table.meta("seed", std::to_string(seed));
}

void precision_metadata(Table& table, const PrecisionConfig& p) {
  table.meta("working_digits", std::to_string(p.working_digits));
  table.meta("tail_tol", format_double(p.tail_tol));
  table.meta("max_terms", std::to_string(p.max_terms));
}

// Verification records

struct Recorder {
  Table table;
  bool all_passed = true;

  Recorder() { table.columns = {"suite", "check", "instance", "residual", "tolerance", "status"}; }

  void add(const std::string& suite, const std::string& check, const std::string& instance,
           const std::string& residual, const std::string& tolerance, bool pass) {
    all_passed = all_passed && pass;
    table.rows.push_back({suite, check, instance, residual, tolerance, pass ? "pass" : "FAIL"});
  }
  void numeric(const std::string& suite, const std::string& check, const std::string& instance, double residual,
               double tolerance) {
    add(suite, check, instance, format_double(residual), format_double(tolerance), residual < tolerance);
  }
  // Statistical check passing when the z-score stays below the bound.
  void z(const std::string& suite, const std::string& check, const std::string& instance, double z, double bound = 4) {
    add(suite, check, instance, "z=" + format_double(z), "z<" + format_double(bound), z < bound);
  }
  void p_value(const std::string& suite, const std::string& check, const std::string& instance, double p,
               double level = 1e-3) {
    add(suite, check, instance, "p=" + format_double(p), "p>=" + format_double(level), p >= level);
  }
};

std::string kv(std::initializer_list<std::pair<const char*, std::string>> items) {
  std::string s;
  for (const auto& [k, v] : items) s += (s.empty() ? "" : " ") + std::string(k) + "=" + v;
  return s;
}

std::string num(double x) { return format_double(x); }

void verify_combinatorics(const Options& o, Recorder& rec) {
  const std::size_t m_max = o.m_max.value_or(15);
  for (std::size_t m = 1; m <= m_max; ++m)
    for (std::size_t r = 1; r <= m; ++r) {
      const bool ok = check_lemma_42(m, r);
      rec.add("combinatorics", "lemma_4.2", kv({{"m", std::to_string(m)}, {"r", std::to_string(r)}}),
              ok ? "0" : "nonzero", "exact", ok);
    }
  for (const char* phi_text : {"1/3", "1", "5/2", "10"}) {
    const Rational phi = parse_rational(phi_text);
    for (std::size_t k = 1; k <= o.k_max; ++k)
      for (std::size_t r = 1; r <= k; ++r) {
        const Rational sum = lemma_41_sum(k, r, phi);
        rec.add("combinatorics", "lemma_4.1",
                kv({{"k", std::to_string(k)}, {"r", std::to_string(r)}, {"phi", phi_text}}), to_string(sum),
                "exact", sum == 0);
      }
  }
  for (std::size_t c = 1; c <= o.c_max; ++c)
    for (std::size_t b = 1; b <= c; ++b)
      for (std::size_t a = 1; a <= b; ++a) {
        const bool ok = check_stirling_convolution(a, b, c);
        rec.add("combinatorics", "stirling_convolution",
                kv({{"a", std::to_string(a)}, {"b", std::to_string(b)}, {"c", std::to_string(c)}}),
                ok ? "0" : "nonzero", "exact", ok);
      }
}

void verify_urn(const Options& o, Recorder& rec) {
  std::vector<std::string> thetas = {"1/3", "1", "7/2"};
  if (o.theta) thetas = {*o.theta};
  const std::size_t forms_max = o.m_max.value_or(20);
  const std::size_t bm = o.m.value_or(5), bn = o.n.value_or(5);
  for (const auto& theta_text : thetas) {
    Rational theta;
    try {
      theta = parse_rational(theta_text);
    } catch (const std::exception&) {
      throw BadArguments("invalid value for --theta: '" + theta_text + "'");
    }
    if (theta <= 0) throw BadArguments("verify urn needs theta > 0");
    for (std::size_t m = 1; m <= forms_max; ++m)
      for (std::size_t n = 1; n <= forms_max; ++n) {
        const std::string inst = kv({{"m", std::to_string(m)}, {"n", std::to_string(n)}, {"theta", theta_text}});
        bool ok = true;
        try {
          overlap_pmf_exact(m, n, theta);
        } catch (const std::logic_error&) {
          ok = false;
        }
        rec.add("urn", "forms_agree", inst, ok ? "0" : "nonzero", "exact", ok);
      }
    for (std::size_t m = 1; m <= bm; ++m)
      for (std::size_t n = 1; n <= bn; ++n) {
        const std::string inst = kv({{"m", std::to_string(m)}, {"n", std::to_string(n)}, {"theta", theta_text}});
        if (enumeration_paths(m, n) > kEnumerationBudget) {
          rec.add("urn", "bruteforce", inst, "skipped", "budget", true);
          continue;
        }
        const auto exact = overlap_pmf_exact(m, n, theta);
        const auto brute = overlap_pmf_bruteforce(m, n, theta);
        const bool ok = exact.probs == brute.probs;
        rec.add("urn", "bruteforce", inst, ok ? "0" : "nonzero", "exact", ok);
      }
  }
  const std::size_t theta0_max = std::min<std::size_t>(forms_max, 15);
  for (std::size_t m = 1; m <= theta0_max; ++m)
    for (std::size_t n = 1; n <= theta0_max; ++n) {
      bool ok = true;
      try {
        ok = overlap_pmf_theta0(m, n).prob(0) == 0;
      } catch (const std::logic_error&) {
        ok = false;
      }
      rec.add("urn", "theta0_forms", kv({{"m", std::to_string(m)}, {"n", std::to_string(n)}}), ok ? "0" : "nonzero",
              "exact", ok);
    }
}

void verify_death(const Options& o, Recorder& rec) {
  const PrecisionConfig prec = precision(o);
  const bool quick = o.grid == "quick";
  const auto thetas = theta_grid(o, quick ? std::vector<double>{1} : std::vector<double>{0.5, 1, 4});
  std::vector<double> s_grid = quick ? std::vector<double>{1} : std::vector<double>{0.2, 1, 5};
  std::size_t n_max = quick ? 3 : 8;
  std::vector<std::pair<double, double>> ts_grid =
      quick ? std::vector<std::pair<double, double>>{{1, 2}}
            : std::vector<std::pair<double, double>>{{0.5, 0.5}, {1, 2}, {2, 1}};
  std::size_t r_max = quick ? 1 : 3;
  std::vector<double> t_grid = quick ? std::vector<double>{1} : std::vector<double>{0.1, 0.5, 1, 3, 10};
  if (o.s) s_grid = {number(*o.s, "--s")};
  if (o.t) t_grid = {number(*o.t, "--t")};
  if (o.t && o.s) ts_grid = {{t_grid[0], s_grid[0]}};
  if (o.n) n_max = *o.n;
  if (o.r) r_max = *o.r;
  for (const double x : s_grid)
    if (!(x > 0)) throw BadArguments("verify death needs s > 0");
  for (const double x : t_grid)
    if (!(x > 0)) throw BadArguments("verify death needs t > 0");
  if (n_max < 1) throw BadArguments("verify death needs n >= 1");
  const double tol = prec.tail_tol;

  for (const double theta : thetas) {
    if (!(theta > 0)) throw BadArguments("verify death needs theta > 0");
    const DeathParams params{theta};
    for (const double s : s_grid)
      for (std::size_t n = 1; n <= n_max; ++n) {
        const std::string inst = kv({{"n", std::to_string(n)}, {"theta", num(theta)}, {"s", num(s)}});
        rec.numeric("death", "result_a", inst, check_result_a(n, s, params, prec), 10 * tol);
        rec.numeric("death", "result_b", inst, check_result_b(n, s, params, prec), 10 * tol);
        const auto inverted = transition_given_n(n, s, params, prec);
        double worst = 0;
        for (std::size_t r = 0; r <= n; ++r)
          worst = std::max(worst, std::abs(inverted[r] - transition_closed_form(n, r, s, params, prec.working_digits)));
        rec.numeric("death", "transition_inversion", inst, worst, 10 * tol);
      }
    for (const auto& [t, s] : ts_grid)
      for (std::size_t r = 0; r <= r_max; ++r)
        rec.numeric("death", "chapman_kolmogorov",
                    kv({{"r", std::to_string(r)}, {"theta", num(theta)}, {"t", num(t)}, {"s", num(s)}}),
                    check_chapman_kolmogorov(r, t, s, params, prec), 100 * tol);
    for (const double t : t_grid) {
      const auto ineq = inequality_report(t, params, prec);
      rec.add("death", "survival_bounds", kv({{"theta", num(theta)}, {"t", num(t)}}),
              num(ineq.lower) + "<" + num(ineq.value) + "<" + num(ineq.upper), "margin=" + num(ineq.margin),
              ineq.holds);
    }
  }
}

void verify_measures(const Options& o, Recorder& rec, const Rng& master) {
  const std::size_t reps = o.reps.value_or(10000);
  const auto thetas = theta_grid(o, {0.5, 1, 4});
  const Truncation tr = truncation(o);
  const BaseMeasure base = BaseMeasure::uniform();
  const std::vector<TestSet> sets = {TestSet::interval(0, 0.5), TestSet::interval(0.1, 0.35)};
  std::uint64_t stream = 0;
  for (const double theta : thetas) {
    if (!(theta > 0)) throw BadArguments("verify measures needs theta > 0");
    const auto params = StickBreakingParams::dirichlet(theta);
    for (const auto& a : sets) {
      const std::string inst = kv({{"theta", num(theta)}, {"A", a.describe()}, {"reps", std::to_string(reps)}});
      const double nu = base.measure(a);
      Rng rng = master.substream(stream++);
      std::vector<double> values(reps);
      for (auto& v : values) v = stick_break(params, base, tr, rng).mass(a);
      const MomentEstimate est = estimate_moments(values);
      rec.z("measures", "prior_mean", inst, z_score(est.mean, nu, est.mean_se));
      rec.z("measures", "prior_variance", inst, z_score(est.variance, dirichlet_variance(theta, nu), est.variance_se));

      Rng mix_rng = master.substream(stream++);
      const auto mix = check_mixture_identity(theta, base, a, reps, tr, mix_rng);
      rec.z("measures", "mixture_first_moment", inst, z_score(mix.first_residual, 0, mix.first_se));
      rec.z("measures", "mixture_second_moment", inst, z_score(mix.second_residual, 0, mix.second_se));

      Rng post_rng = master.substream(stream++);
      std::vector<Location> atoms;
      for (int i = 0; i < 3; ++i) atoms.push_back(base.draw(post_rng));
      const auto post = posterior(theta, base, atoms);
      std::vector<double> pv(reps);
      for (auto& v : pv) v = sample_posterior(post, tr, post_rng).mass(a);
      const MomentEstimate pe = estimate_moments(pv);
      rec.z("measures", "posterior_mean", inst, z_score(pe.mean, post.mean_measure(a), pe.mean_se));
    }

    // E[sum rho_i^2] = (1 - sigma) / (1 + theta) under PD(sigma, theta).
    const double sigma = o.sigma ? number(*o.sigma, "--sigma") : 0.0;
    if (!(sigma >= 0 && sigma < 1)) throw BadArguments("--sigma must lie in [0, 1)");
    const auto pd = StickBreakingParams::poisson_dirichlet(sigma, theta);
    const Truncation pd_tr = sigma > 0 && tr.mode == Truncation::Mode::Residual && tr.epsilon < 1e-3
                                 ? Truncation::residual(1e-3)
                                 : tr;
    Rng pd_rng = master.substream(stream++);
    std::vector<double> squares(reps);
    for (auto& v : squares) {
      const auto mu = stick_break(pd, base, pd_tr, pd_rng);
      v = 0;
      for (const auto& atom : mu.atoms) v += atom.weight * atom.weight;
    }
    const MomentEstimate se = estimate_moments(squares);
    rec.z("measures", "pd_square_sum",
          kv({{"theta", num(theta)}, {"sigma", num(sigma)}, {"reps", std::to_string(reps)}}),
          z_score(se.mean, (1 - sigma) / (1 + theta), se.mean_se));
  }
}

void verify_processes(const Options& o, Recorder& rec, const Rng& master) {
  const std::size_t reps = o.reps.value_or(10000);
  const auto thetas = theta_grid(o, {0.5, 1, 4});
  const Truncation tr = truncation(o);
  const PrecisionConfig prec = precision(o);
  const BaseMeasure uniform = BaseMeasure::uniform();
  const BaseMeasure finite = BaseMeasure::discrete({0, 1, 2, 3}, {0.1, 0.2, 0.3, 0.4});
  const TestSet a = TestSet::interval(0, 0.5);
  const std::string reps_text = std::to_string(reps);
  std::uint64_t stream = 0;

  for (const double theta : thetas) {
    if (!(theta > 0)) throw BadArguments("verify processes needs theta > 0");
    const std::string th = num(theta);
    rec.numeric("processes", "dar1_detailed_balance", kv({{"theta", th}}),
                dar1_detailed_balance(Dar1Config{theta, finite}), 1e-15);
    Rng ret_rng = master.substream(stream++);
    const auto ret = dar1_retention(Dar1Config{theta, uniform}, 1'000'000, ret_rng);
    rec.z("processes", "dar1_retention", kv({{"theta", th}, {"steps", "1000000"}}),
          z_score(ret.rate, ret.expected, ret.std_error));
    Rng chi_rng = master.substream(stream++);
    const auto chi = dar1_marginal_test(Dar1Config{theta, finite}, 100'000, 20, chi_rng);
    rec.p_value("processes", "dar1_marginal", kv({{"theta", th}, {"samples", "100000"}, {"thin", "20"}}), chi.p_value);

    for (const std::size_t n : {std::size_t{1}, std::size_t{5}}) {
      MeasureChainConfig cfg;
      cfg.theta = theta;
      cfg.base = uniform;
      cfg.n = n;
      cfg.truncation = tr;
      const std::string inst = kv({{"theta", th}, {"n", std::to_string(n)}, {"steps", "5"}, {"reps", reps_text}});
      const auto st = measure_chain_stationarity(cfg, a, 5, reps, master.substream(stream++), o.workers);
      rec.z("processes", "measure_chain_mean", inst, st.max_mean_z);
      rec.z("processes", "measure_chain_variance", inst, st.max_variance_z);
      const auto rev = measure_chain_reversibility(cfg, a, reps, master.substream(stream++), o.workers);
      rec.z("processes", "measure_chain_swap_moment", inst,
            z_score(rev.antisymmetric_mean, 0, rev.antisymmetric_se));
      rec.p_value("processes", "measure_chain_swap_ks", inst, rev.ks.p_value);
    }
    for (const double t : {0.2, 1.0, 5.0}) {
      FvConfig cfg;
      cfg.theta = theta;
      cfg.base = uniform;
      cfg.t = t;
      cfg.prec = prec;
      cfg.truncation = tr;
      const std::string inst = kv({{"theta", th}, {"t", num(t)}, {"steps", "5"}, {"reps", reps_text}});
      const auto st = fv_stationarity(cfg, a, 5, reps, master.substream(stream++), o.workers);
      rec.z("processes", "fv_mean", inst, st.max_mean_z);
      rec.z("processes", "fv_variance", inst, st.max_variance_z);
    }
    for (const auto& [t, s] : std::vector<std::pair<double, double>>{{0.5, 0.5}, {1, 2}, {2, 1}}) {
      FvConfig cfg;
      cfg.theta = theta;
      cfg.base = uniform;
      cfg.t = t;
      cfg.prec = prec;
      cfg.truncation = tr;
      const auto ck = fv_chapman_kolmogorov_process_test(cfg, t, s, a, reps, master.substream(stream++), o.workers);
      rec.p_value("processes", "fv_chapman_kolmogorov_ks",
                  kv({{"theta", th}, {"t", num(t)}, {"s", num(s)}, {"reps", reps_text}}), ck.ks.p_value);
    }
  }
}

void emit(const Table& table, const Options& o, std::ostream& out) {
  std::ostringstream buf;
  if (o.format == "json")
    write_json(table, buf);
  else
    write_csv(table, buf);
  if (o.out.empty()) {
    out << buf.str();
    return;
  }
  std::ofstream file(o.out, std::ios::binary | std::ios::trunc);
  if (!file) throw BadArguments("cannot open output file '" + o.out + "'");
  file << buf.str();
  if (!file) throw std::runtime_error("failed writing '" + o.out + "'");
}

int cmd_verify(const Options& o, std::ostream& out, std::ostream& err) {
  const std::uint64_t seed = resolve_seed(o);
  const Rng master(seed);
  Recorder rec;
  const std::string& suite = o.target;
  const bool all = suite == "all";
  if (all || suite == "combinatorics") verify_combinatorics(o, rec);
  if (all || suite == "urn") verify_urn(o, rec);
  if (all || suite == "death") verify_death(o, rec);
  if (all || suite == "measures") verify_measures(o, rec, master.substream(1));
  if (all || suite == "processes") verify_processes(o, rec, master.substream(2));

  Table& table = rec.table;
  common_metadata(table, o, seed);
  precision_metadata(table, precision(o));
  table.meta("truncation", truncation(o).describe());
  table.meta("grid", o.grid);
  table.seal();
  std::size_t failed = 0;
  for (const auto& row : table.rows) failed += row.back() == "FAIL";
  table.foot("checks", std::to_string(table.rows.size()));
  table.foot("failed", std::to_string(failed));
  emit(table, o, out);
  if (!rec.all_passed) err << "verify " << suite << ": " << failed << " of " << table.rows.size() << " checks failed\n";
  return rec.all_passed ? kOk : kVerificationFailed;
}

int cmd_pmf(const Options& o, std::ostream& out) {
  const std::uint64_t seed = resolve_seed(o);
  Table table;
  common_metadata(table, o, seed);
  if (o.target == "death") {
    const double theta = number(o.theta.value_or("1"), "--theta");
    const double t = number(o.t.value_or("1"), "--t");
    const PrecisionConfig prec = precision(o);
    DeathParams params{theta};
    try {
      params.validate();
    } catch (const std::invalid_argument& e) {
      throw BadArguments(e.what());
    }
    if (!(t > 0)) throw BadArguments("pmf death needs t > 0");
    const DeathPmf pmf = death_pmf(t, params, prec);
    table.meta("theta", num(theta));
    table.meta("t", num(t));
    precision_metadata(table, prec);
    table.seal();
    table.columns = {"n", "d_n", "term_bound"};
    double sum = 0;
    for (std::size_t n = 0; n < pmf.probs.size(); ++n) {
      sum += pmf.probs[n];
      table.rows.push_back({std::to_string(n), num(pmf.probs[n]), num(pmf.term_bound[n])});
    }
    table.foot("sum_d_n", num(sum));
    table.foot("residual", num(pmf.residual));
    table.foot("n_max", std::to_string(pmf.n_max));
    table.foot("clamped", std::to_string(pmf.clamped.size()));
    emit(table, o, out);
    return kOk;
  }

  const std::size_t m = o.m.value_or(2), n = o.n.value_or(2);
  const std::string theta_text = o.theta.value_or("1");
  Rational theta;
  try {
    theta = parse_rational(theta_text);
  } catch (const std::exception&) {
    throw BadArguments("invalid value for --theta: '" + theta_text + "'");
  }
  if (theta < 0) throw BadArguments("pmf overlap needs theta >= 0");
  OverlapPmf pmf;
  if (theta == 0) {
    if (m < 1 || n < 1) throw BadArguments("pmf overlap at theta = 0 needs m, n >= 1");
    pmf = overlap_pmf_theta0(m, n);
  } else {
    pmf = overlap_pmf_exact(m, n, theta);
  }
  table.meta("theta", to_string(theta));
  table.meta("m", std::to_string(m));
  table.meta("n", std::to_string(n));
  table.columns = {"r", "p_exact", "p"};
  std::optional<OverlapPmf> brute;
  if (o.bruteforce) {
    if (enumeration_paths(m, n) > kEnumerationBudget) throw BadArguments("--bruteforce exceeds the enumeration budget");
    brute = overlap_pmf_bruteforce(m, n, theta);
    table.columns.push_back("p_bruteforce");
  }
  std::optional<EmpiricalPmf> mc;
  const std::size_t reps = o.reps.value_or(0);
  if (reps > 0) {
    if (theta == 0) throw BadArguments("Monte Carlo overlap needs theta > 0");
    mc = overlap_pmf_montecarlo(m, n, to_double(theta), reps, Rng(seed), o.workers);
    table.meta("reps", std::to_string(reps));
    table.columns.push_back("p_mc");
    table.columns.push_back("stderr");
  }
  std::size_t r_lo = 0, r_hi = pmf.probs.size();
  if (o.r) {
    if (*o.r >= pmf.probs.size()) throw BadArguments("--r exceeds min(m, n)");
    r_lo = *o.r;
    r_hi = r_lo + 1;
    table.meta("r", std::to_string(r_lo));
  }
  table.seal();
  for (std::size_t r = r_lo; r < r_hi; ++r) {
    std::vector<std::string> row = {std::to_string(r), to_string(pmf.probs[r]), num(to_double(pmf.probs[r]))};
    if (brute) row.push_back(to_string(brute->prob(r)));
    if (mc) {
      row.push_back(num(mc->prob(r)));
      row.push_back(num(mc->std_error(r)));
    }
    table.rows.push_back(std::move(row));
  }
  emit(table, o, out);
  return kOk;
}

int cmd_simulate(const Options& o, std::ostream& out) {
  const std::uint64_t seed = resolve_seed(o);
  ChainSpec spec;
  spec.kind = parse_chain_kind(o.target);
  spec.theta = number(o.theta.value_or("1"), "--theta");
  spec.base = parse_base(o.base);
  spec.n = o.n.value_or(1);
  spec.t = number(o.t.value_or("1"), "--t");
  spec.prec = precision(o);
  spec.truncation = truncation(o);
  if (!(spec.theta > 0)) throw BadArguments("simulate needs theta > 0");
  if (o.steps < 1) throw BadArguments("simulate needs --steps >= 1");
  if (spec.kind == ChainKind::MeasureChain && spec.n < 1) throw BadArguments("simulate measure-chain needs --n >= 1");
  if (spec.kind == ChainKind::FlemingViot && !(spec.t > 0)) throw BadArguments("simulate fv needs t > 0");

  std::vector<TestSet> observables;
  std::vector<std::string> texts = o.observables;
  if (texts.empty()) texts = {spec.base.is_nonatomic() ? "0:0.5" : "atoms:0"};
  for (const auto& text : texts) {
    try {
      observables.push_back(TestSet::parse(text));
    } catch (const std::invalid_argument& e) {
      throw BadArguments(e.what());
    }
  }

  Table table;
  common_metadata(table, o, seed);
  table.meta("theta", num(spec.theta));
  table.meta("base", spec.base.describe());
  if (spec.kind == ChainKind::MeasureChain) table.meta("n", std::to_string(spec.n));
  if (spec.kind == ChainKind::FlemingViot) {
    table.meta("t", num(spec.t));
    precision_metadata(table, spec.prec);
  }
  if (spec.kind != ChainKind::Dar1) table.meta("truncation", spec.truncation.describe());
  table.meta("steps", std::to_string(o.steps));
  table.columns = {"step"};
  for (std::size_t k = 0; k < observables.size(); ++k) {
    const std::string name = "obs" + std::to_string(k + 1);
    table.meta(name, observables[k].describe());
    table.columns.push_back(name);
  }
  table.seal();

  Rng rng(seed);
  const auto rows = run_chain(spec, o.steps, observables, rng);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::vector<std::string> row = {std::to_string(i + 1)};
    for (const double v : rows[i]) row.push_back(num(v));
    table.rows.push_back(std::move(row));
  }
  emit(table, o, out);
  return kOk;
}

void add_common(CLI::App* sc, Options& o) {
  sc->add_option("--theta", o.theta, "Mutation parameter (accepts p/q)");
  sc->add_option("--seed", o.seed, "Master seed (falls back to FVKIT_SEED, then 1)");
  sc->add_option("--digits", o.digits, "Working decimal digits")->capture_default_str();
  sc->add_option("--tail-tol", o.tail_tol, "Series tail tolerance")->capture_default_str();
  sc->add_option("--max-terms", o.max_terms, "Series term budget")->capture_default_str();
  sc->add_option("--format", o.format, "Output format")->check(CLI::IsMember({"csv", "json"}))->capture_default_str();
  sc->add_option("--out", o.out, "Output path (default stdout)");
  sc->add_option("--workers", o.workers, "Worker threads; 0 means all cores")->capture_default_str();
  sc->add_option("--reps", o.reps, "Monte Carlo replicates");
  sc->add_option("--epsilon", o.epsilon, "Stick-breaking residual tolerance")->capture_default_str();
  sc->add_option("--sticks", o.sticks, "Fixed stick count (overrides --epsilon)");
  sc->add_option("--m", o.m, "Urn draws");
  sc->add_option("--n", o.n, "Conditioning atoms / samples per step");
  sc->add_option("--r", o.r, "Overlap count: single pmf row, or largest r checked by verify death");
  sc->add_option("--t", o.t, "Time (accepts p/q)");
  sc->add_option("--s", o.s, "Second time increment (accepts p/q)");
  sc->add_option("--sigma", o.sigma, "Poisson-Dirichlet discount for verify measures (accepts p/q)");
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"fvkit: Fleming-Viot, death-process and Polya-urn toolkit", "fvkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", FVKIT_VERSION);
  Options o;

  auto* verify = app.add_subcommand("verify", "Run a verification suite");
  verify->add_option("suite", o.target, "Suite")
      ->check(CLI::IsMember({"combinatorics", "death", "urn", "measures", "processes", "all"}))
      ->required();
  verify->add_option("--m-max", o.m_max, "Largest m for the exact identities");
  verify->add_option("--k-max", o.k_max, "Largest k for the alternating-sum lemma")->capture_default_str();
  verify->add_option("--c-max", o.c_max, "Largest c for the Stirling convolution")->capture_default_str();
  verify->add_option("--grid", o.grid, "Parameter grid")->check(CLI::IsMember({"default", "quick"}))->capture_default_str();
  add_common(verify, o);

  auto* pmf = app.add_subcommand("pmf", "Write a probability mass function table");
  pmf->add_option("which", o.target, "death or overlap")->check(CLI::IsMember({"death", "overlap"}))->required();
  pmf->add_flag("--bruteforce", o.bruteforce, "Add the enumeration column (overlap)");
  add_common(pmf, o);

  auto* simulate = app.add_subcommand("simulate", "Simulate a stationary chain");
  simulate->add_option("kind", o.target, "dar1, measure-chain or fv")
      ->check(CLI::IsMember({"dar1", "measure-chain", "fv"}))
      ->required();
  simulate->add_option("--steps", o.steps, "Number of steps")->capture_default_str();
  simulate->add_option("--observable", o.observables, "Test set: lo:hi, all, none or atoms:i,j (repeatable)");
  simulate->add_option("--base", o.base, "uniform, discrete:k or discrete:w1,w2,...")->capture_default_str();
  add_common(simulate, o);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kBadArguments;
  }

  for (auto* sc : {verify, pmf, simulate})
    if (sc->parsed()) o.command = sc->get_name();

  try {
    if (o.command == "verify") return cmd_verify(o, out, err);
    if (o.command == "pmf") return cmd_pmf(o, out);
    return cmd_simulate(o, out);
  } catch (const PrecisionExhausted& e) {
    err << "error: " << e.what() << "\n";
    return kPrecisionExhausted;
  } catch (const BadArguments& e) {
    err << "error: " << e.what() << "\n";
    return kBadArguments;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return kBadArguments;
  } catch (const std::length_error& e) {
    err << "error: " << e.what() << "\n";
    return kBadArguments;
  }
}

}  // namespace fvkit::cli
