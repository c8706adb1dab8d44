import math

import numpy as np
import pytest

from slbkit.bounds import (bernoulli_source, binary_entropy, gaussian_source, lagrangian_bound,
                           one_to_one_objective, ordering_check, refinement_term, slb_classical,
                           slb_one_to_one, uniform_source)
from slbkit.model import DomainError


def grid_one_to_one(base, n, allow_empty=True):
    """Oracle: dense log grid over alpha - 1, evaluated with numpy."""
    t = np.exp(np.linspace(-25.0, 3.0, 2_000_001))
    alpha = 1 + t
    log_term = np.log2(-np.expm1(-t * math.log(2))) if allow_empty else np.log2(np.expm1(t * math.log(2)))
    vals = base / alpha + log_term / (alpha * n)
    i = int(np.argmax(vals))
    return float(vals[i]), float(alpha[i])


@pytest.mark.parametrize("base,n", [(1.0, 1000), (0.3, 50), (2.5, 10_000), (1.0, 2)])
@pytest.mark.parametrize("allow_empty", [True, False])
def test_one_to_one_against_grid(base, n, allow_empty):
    val, alpha = slb_one_to_one(base, n, allow_empty)
    ref, ref_alpha = grid_one_to_one(base, n, allow_empty)
    assert val >= ref - 1e-12
    assert val - ref < 1e-9
    assert abs(one_to_one_objective(alpha, base, n, allow_empty) - val) < 1e-9


def test_empty_word_term_costs_more():
    for n in (10, 100, 1000):
        assert slb_one_to_one(1.0, n, True)[0] < slb_one_to_one(1.0, n, False)[0]
        assert slb_one_to_one(1.0, n, True)[0] < 1.0


def test_one_to_one_needs_two_letters():
    with pytest.raises(DomainError):
        slb_one_to_one(1.0, 1)


def test_classical_closed_forms():
    assert abs(slb_classical(gaussian_source(1.0, 0.1)).value - 0.5 * math.log2(10)) < 1e-6
    assert abs(slb_classical(bernoulli_source(0.3, 0.1)).value - (binary_entropy(0.3) - binary_entropy(0.1))) < 1e-9
    # uniform on [0, 1]: log2(1) - 1/2 log2(2 pi e D)
    D = 0.01
    assert abs(slb_classical(uniform_source(0.0, 1.0, D)).value + 0.5 * math.log2(2 * math.pi * math.e * D)) < 1e-6


def test_lagrangian_at_optimal_tilt():
    inputs = bernoulli_source(0.3, 0.1)
    res = inputs.phi()
    beta = res.beta_star[0]
    assert abs(lagrangian_bound(inputs, beta) - beta * 0.1 - slb_classical(inputs, res).value) < 1e-9
    # any other tilt gives a weaker bound on R(D)
    assert lagrangian_bound(inputs, 0.5 * beta) - 0.5 * beta * 0.1 < slb_classical(inputs, res).value


def test_refinement_term():
    assert abs(refinement_term(1, 100) - 0.033219) < 5e-7
    assert refinement_term(2, 1000) == 2 * math.log2(1000) / 2000


def test_degenerate_level_clamps():
    rep = ordering_check(bernoulli_source(0.11, 0.2, 100))
    assert rep.ordering_ok
    assert all(e.clamped == 0.0 for e in rep.entries)


@pytest.mark.parametrize("make", [
    lambda n: gaussian_source(1.0, 0.25, n),
    lambda n: bernoulli_source(0.3, 0.1, n),
    lambda n: uniform_source(0.0, 1.0, 0.01, n),
])
@pytest.mark.parametrize("n", [10, 100, 1000])
def test_ordering(make, n):
    rep = ordering_check(make(n))
    assert rep.ordering_ok, rep.violation
    dsf = rep.entry("d-semifaithful")
    assert dsf.extra["refinement_term"] == refinement_term(dsf.extra["k_eff"], n)
