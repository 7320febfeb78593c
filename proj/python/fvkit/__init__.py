"""Dirichlet-process, Polya-urn and Fleming-Viot transition toolkit."""

from fractions import Fraction

from . import _fvkit
from ._fvkit import (
    PrecisionExhausted,
    check_chapman_kolmogorov,
    check_lemma_41,
    check_lemma_42,
    check_result_a,
    check_result_b,
    check_stirling_convolution,
    cli,
    death_pmf,
    death_rate,
    mc_death_pmf,
    overlap_pmf_montecarlo,
    run_chain,
    stick_break,
    transition_closed_form,
    transition_given_n,
)

__version__ = _fvkit.__version__


def _theta_text(theta):
    return str(Fraction(theta)) if not isinstance(theta, str) else theta


def overlap_pmf(m, n, theta=1):
    """Exact P(r | m, n) for r = 0..min(m, n) as Fractions. theta may be an int, Fraction or "p/q"."""
    return [Fraction(p) for p in _fvkit.overlap_pmf(m, n, _theta_text(theta))]


def overlap_pmf_bruteforce(m, n, theta=1):
    return [Fraction(p) for p in _fvkit.overlap_pmf_bruteforce(m, n, _theta_text(theta))]


def stirling1_unsigned(n, k):
    return int(_fvkit.stirling1_unsigned(n, k))
