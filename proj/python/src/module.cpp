#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>
#include <string>
#include <vector>

#include "fvkit/cli.hpp"
#include "fvkit/combinatorics.hpp"
#include "fvkit/death_process.hpp"
#include "fvkit/markov_processes.hpp"
#include "fvkit/polya_urn.hpp"
#include "fvkit/random_measures.hpp"

namespace py = pybind11;
using namespace fvkit;

namespace {

PrecisionConfig make_precision(unsigned digits, double tail_tol, std::size_t max_terms) {
  PrecisionConfig p;
  p.working_digits = digits;
  p.tail_tol = tail_tol;
  p.max_terms = max_terms;
  return p;
}

// Exact probabilities cross the boundary as "p/q" strings.
std::vector<std::string> rational_strings(const OverlapPmf& pmf) {
  std::vector<std::string> out;
  for (const auto& q : pmf.probs) out.push_back(to_string(q));
  return out;
}

Truncation make_truncation(double epsilon, std::size_t sticks) {
  return sticks > 0 ? Truncation::fixed(sticks) : Truncation::residual(epsilon);
}

}  // namespace

PYBIND11_MODULE(_fvkit, m) {
  m.doc() = "Dirichlet-process, Polya-urn and Fleming-Viot transition toolkit.";

  py::register_exception<PrecisionExhausted>(m, "PrecisionExhausted", PyExc_ArithmeticError);

  m.def("check_lemma_41", [](std::size_t k, std::size_t r, const std::string& phi) {
    return check_lemma_41(k, r, parse_rational(phi));
  });
  m.def("check_lemma_42", [](std::size_t m_, std::size_t r) { return check_lemma_42(m_, r); });
  m.def("check_stirling_convolution", &check_stirling_convolution);
  m.def("stirling1_unsigned", [](std::size_t n, std::size_t k) { return stirling1_unsigned(n, k).str(); });

  m.def(
      "overlap_pmf",
      [](std::size_t m_, std::size_t n, const std::string& theta) {
        const Rational th = parse_rational(theta);
        return rational_strings(th == 0 ? overlap_pmf_theta0(m_, n) : overlap_pmf_exact(m_, n, th));
      },
      py::arg("m"), py::arg("n"), py::arg("theta") = "1");
  m.def(
      "overlap_pmf_bruteforce",
      [](std::size_t m_, std::size_t n, const std::string& theta) {
        return rational_strings(overlap_pmf_bruteforce(m_, n, parse_rational(theta)));
      },
      py::arg("m"), py::arg("n"), py::arg("theta") = "1");
  m.def(
      "overlap_pmf_montecarlo",
      [](std::size_t m_, std::size_t n, double theta, std::size_t reps, std::uint64_t seed, std::size_t workers) {
        const auto pmf = overlap_pmf_montecarlo(m_, n, theta, reps, Rng(seed), workers);
        return py::make_tuple(pmf.probs, pmf.std_errors);
      },
      py::arg("m"), py::arg("n"), py::arg("theta"), py::arg("reps"), py::arg("seed") = 1, py::arg("workers") = 1);

  m.def("death_rate", [](std::size_t n, double theta) { return death_rate(n, {theta}); });
  m.def(
      "death_pmf",
      [](double t, double theta, unsigned digits, double tail_tol, std::size_t max_terms) {
        DeathPmf pmf;
        {
          py::gil_scoped_release release;
          pmf = death_pmf(t, {theta}, make_precision(digits, tail_tol, max_terms));
        }
        py::dict d;
        d["probs"] = pmf.probs;
        d["term_bound"] = pmf.term_bound;
        d["residual"] = pmf.residual;
        d["n_max"] = pmf.n_max;
        return d;
      },
      py::arg("t"), py::arg("theta") = 1.0, py::arg("digits") = 60, py::arg("tail_tol") = 1e-12,
      py::arg("max_terms") = 400);
  m.def(
      "mc_death_pmf",
      [](double t, double theta, std::size_t n0, std::size_t reps, std::uint64_t seed, std::size_t workers) {
        EmpiricalPmf pmf;
        {
          py::gil_scoped_release release;
          pmf = mc_death_pmf(t, {theta}, n0, reps, Rng(seed), workers);
        }
        return py::make_tuple(pmf.probs, pmf.std_errors);
      },
      py::arg("t"), py::arg("theta") = 1.0, py::arg("n0") = 500, py::arg("reps") = 100000, py::arg("seed") = 1,
      py::arg("workers") = 1);
  m.def(
      "transition_given_n",
      [](std::size_t n, double s, double theta) { return transition_given_n(n, s, {theta}); }, py::arg("n"),
      py::arg("s"), py::arg("theta") = 1.0);
  m.def(
      "transition_closed_form",
      [](std::size_t n, std::size_t r, double s, double theta) { return transition_closed_form(n, r, s, {theta}); },
      py::arg("n"), py::arg("r"), py::arg("s"), py::arg("theta") = 1.0);
  m.def("check_result_a", [](std::size_t n, double s, double theta) { return check_result_a(n, s, {theta}); });
  m.def("check_result_b", [](std::size_t n, double s, double theta) { return check_result_b(n, s, {theta}); });
  m.def("check_chapman_kolmogorov", [](std::size_t r, double t, double s, double theta) {
    return check_chapman_kolmogorov(r, t, s, {theta});
  });

  m.def(
      "stick_break",
      [](double theta, double sigma, std::uint64_t seed, double epsilon, std::size_t sticks) {
        Rng rng(seed);
        const auto mu = stick_break(StickBreakingParams::poisson_dirichlet(sigma, theta), BaseMeasure::uniform(),
                                    make_truncation(epsilon, sticks), rng);
        std::vector<double> values, weights;
        for (const auto& a : mu.atoms) {
          values.push_back(a.location.value);
          weights.push_back(a.weight);
        }
        return py::make_tuple(values, weights, mu.residual);
      },
      "Poisson-Dirichlet stick-breaking over a uniform base; returns (locations, weights, residual).",
      py::arg("theta"), py::arg("sigma") = 0.0, py::arg("seed") = 1, py::arg("epsilon") = 1e-8,
      py::arg("sticks") = 0);

  m.def(
      "run_chain",
      [](const std::string& kind, double theta, std::size_t steps, const std::vector<std::string>& observables,
         std::uint64_t seed, std::size_t n, double t, double epsilon) {
        ChainSpec spec;
        spec.kind = parse_chain_kind(kind);
        spec.theta = theta;
        spec.base = BaseMeasure::uniform();
        spec.n = n;
        spec.t = t;
        spec.truncation = Truncation::residual(epsilon);
        std::vector<TestSet> sets;
        for (const auto& text : observables) sets.push_back(TestSet::parse(text));
        Rng rng(seed);
        py::gil_scoped_release release;
        return run_chain(spec, steps, sets, rng);
      },
      py::arg("kind"), py::arg("theta") = 1.0, py::arg("steps") = 100,
      py::arg("observables") = std::vector<std::string>{"0:0.5"}, py::arg("seed") = 1, py::arg("n") = 1,
      py::arg("t") = 1.0, py::arg("epsilon") = 1e-8);

  m.def(
      "cli",
      [](const std::vector<std::string>& args) {
        std::vector<std::string> full = {"fvkit"};
        full.insert(full.end(), args.begin(), args.end());
        std::vector<const char*> argv;
        for (const auto& a : full) argv.push_back(a.c_str());
        std::ostringstream out, err;
        int code = 0;
        {
          py::gil_scoped_release release;
          code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
        }
        return py::make_tuple(code, out.str(), err.str());
      },
      "Runs one fvkit command in-process; returns (exit_code, stdout, stderr).");

  m.attr("__version__") = FVKIT_VERSION;
}
