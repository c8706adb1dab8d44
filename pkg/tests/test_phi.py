import math

import numpy as np
import pytest
from scipy.optimize import minimize

from slbkit.model import Alphabet, DistortionSpec, abs_error, hamming, make_iwf, square_error
from slbkit.phi import (UnboundedBelowError, distortion_rate_bound, log_partition, maxent_check, phi,
                        phi_real_line)


def hb(p):
    return -p * math.log2(p) - (1 - p) * math.log2(1 - p)


def grid_phi(alphabet, spec, D, hi=30.0, steps=300_001):
    """Oracle: minimize beta*D + G(beta) over a dense beta grid (single constraint)."""
    beta = np.linspace(0.0, hi, steps)
    rho = spec.letter_values(alphabet.nodes)[0]
    w = alphabet.weights
    expo = -np.outer(beta, rho) * math.log(2) + np.log(w)[None, :]
    mx = expo.max(axis=1, keepdims=True)
    G = (mx[:, 0] + np.log(np.exp(expo - mx).sum(axis=1))) / math.log(2)
    return float(np.min(beta * D + G))


@pytest.mark.parametrize("D", [0.1, 0.5, 1.0, 2.0])
def test_gaussian_closed_form(D):
    res, _ = phi_real_line(DistortionSpec.single(square_error()), D)
    assert abs(res.phi - 0.5 * math.log2(2 * math.pi * math.e * D)) <= 1e-6
    assert abs(res.beta_star[0] - 1 / (2 * D * math.log(2))) <= 1e-6


@pytest.mark.parametrize("D", [0.1, 0.5, 1.0, 2.0])
def test_laplace_closed_form(D):
    res, _ = phi_real_line(DistortionSpec.single(abs_error()), D)
    assert abs(res.phi - math.log2(2 * math.e * D)) <= 1e-6


@pytest.mark.parametrize("D", [0.01, 0.11, 0.3, 0.49])
def test_binary_hamming(D):
    res = phi(Alphabet.modular(2), DistortionSpec.single(hamming()), D)
    assert abs(res.phi - hb(D)) <= 1e-9


@pytest.mark.parametrize("D", [0.2, 0.7, 1.3])
def test_discrete_abs_against_grid(D):
    alphabet = Alphabet.discrete([-2, -1, 0, 1, 2])
    spec = DistortionSpec.single(abs_error())
    assert abs(phi(alphabet, spec, D).phi - grid_phi(alphabet, spec, D)) < 1e-8


def test_two_constraints_against_primal():
    """Primal oracle: maximize entropy of p subject to both moment constraints."""
    alphabet = Alphabet.discrete([-2, -1, 0, 1, 2, 3])
    spec = DistortionSpec((abs_error(), square_error()))
    D = np.array([0.9, 1.4])
    rho = spec.letter_values(alphabet.nodes)
    cons = [{"type": "eq", "fun": lambda p: p.sum() - 1}]
    cons += [{"type": "ineq", "fun": lambda p, j=j: D[j] - rho[j] @ p} for j in range(2)]

    def negent(p):
        p = np.clip(p, 1e-300, None)
        return float(np.sum(p * np.log2(p)))

    sol = minimize(negent, np.full(6, 1 / 6), constraints=cons, bounds=[(0, 1)] * 6, method="SLSQP",
                   options={"ftol": 1e-14, "maxiter": 1000})
    res = phi(alphabet, spec, D)
    assert abs(res.phi + sol.fun) < 1e-6
    assert res.kkt < 1e-8


def test_degenerate_and_boundary_levels():
    a, s = Alphabet.modular(2), DistortionSpec.single(hamming())
    deg = phi(a, s, 0.5)
    assert deg.degenerate and deg.phi == 1.0 and deg.beta_star == (0.0,)
    bnd = phi(a, s, 0.0)
    assert bnd.boundary and bnd.phi == 0.0 and math.isinf(bnd.beta_star[0])
    with pytest.raises(UnboundedBelowError):
        phi(a, s, -0.1)


def test_inactive_constraint_has_zero_tilt():
    alphabet = Alphabet.discrete([-1, 0, 1])
    spec = DistortionSpec((abs_error(), square_error()))
    res = phi(alphabet, spec, [0.5, 5.0])
    assert res.active_mask == (True, False)
    assert res.beta_star[1] == 0.0
    assert abs(res.phi - phi(alphabet, spec.subset([0]), 0.5).phi) < 1e-10


def test_dependent_constraints_flagged():
    res = phi(Alphabet.discrete([-2, -1, 0, 1, 2]), DistortionSpec((square_error(), square_error())), [0.5, 0.5])
    assert res.dependent


def test_log_partition_derivatives():
    alphabet = Alphabet.discrete([-1.5, 0, 0.5, 2])
    spec = DistortionSpec((abs_error(), square_error()))
    b = np.array([0.7, 0.3])
    lp = log_partition(alphabet, spec, b)
    h = 1e-6
    for j in range(2):
        e = np.zeros(2)
        e[j] = h
        fd = (log_partition(alphabet, spec, b + e).value - log_partition(alphabet, spec, b - e).value) / (2 * h)
        # value is in bits per unit beta, gradient is the (negated) tilted mean
        assert abs(fd - lp.gradient[j]) < 1e-7
        gd = (log_partition(alphabet, spec, b + e).gradient - log_partition(alphabet, spec, b - e).gradient) / (2 * h)
        np.testing.assert_allclose(gd / math.log(2), lp.covariance[:, j], atol=1e-6)


def test_maxent_check_certifies():
    spec = DistortionSpec.single(square_error())
    res, alphabet = phi_real_line(spec, 0.5)
    me = maxent_check(res, alphabet, spec, 0.5)
    assert me.applicable and me.certified
    deg = phi(Alphabet.modular(2), DistortionSpec.single(hamming()), 0.5)
    assert not maxent_check(deg, Alphabet.modular(2), DistortionSpec.single(hamming()), 0.5).applicable


def test_peak_limited_large_level_is_uniform():
    spec = DistortionSpec((square_error(), make_iwf(1.0)))
    res, _ = phi_real_line(spec, [0.5, 0.0])
    assert abs(res.phi - 1.0) < 1e-9
    assert res.active_mask[0] is False


def test_distortion_rate_inverts_phi():
    D = distortion_rate_bound(Alphabet.modular(2), DistortionSpec.single(hamming()), 1 - hb(0.11), 1.0)
    assert abs(D - 0.11) < 1e-8
