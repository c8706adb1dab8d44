import itertools
import math

import numpy as np
import pytest

from slbkit.model import Alphabet, DistortionSpec, hamming, square_error, table_function
from slbkit.phi import phi
from slbkit.sliding import (ReducibleError, TransferOperator, build_operator, gaussian_example_check,
                            log2_lambda_gradient, sliding_slb, spectral_radius)


def raw_operator(M):
    S = M.shape[0]
    with np.errstate(divide="ignore"):
        L = np.log(M)
    return TransferOperator(L, np.zeros((1, S, S)), (0.0,), 2, False, np.arange(S, dtype=float), np.ones(S))


def test_power_iteration_against_dense_solver():
    rng = np.random.default_rng(4)
    for _ in range(20):
        M = rng.random((8, 8)) * (rng.random((8, 8)) < 0.7) + np.eye(8)[rng.permutation(8)] + np.roll(np.eye(8), 1, 1)
        lam = max(abs(np.linalg.eigvals(M)))
        assert abs(spectral_radius(raw_operator(M)).lam - lam) < 1e-9 * lam


def test_periodic_operator_converges():
    sr = spectral_radius(raw_operator(np.array([[0.0, 2.0], [0.5, 0.0]])))
    assert abs(sr.lam - 1.0) < 1e-9


def test_reducible_operator_rejected():
    with pytest.raises(ReducibleError) as exc:
        spectral_radius(raw_operator(np.array([[1.0, 1.0], [0.0, 1.0]])))
    assert exc.value.unreachable is not None


def test_symmetric_kernel_gets_rayleigh_cross_check():
    z2 = Alphabet.modular(3)
    spec = DistortionSpec.single(table_function(z2, [[0, 1, 2], [1, 0, 1], [2, 1, 0]]))
    sr = spectral_radius(build_operator(z2, spec, [0.7]))
    assert sr.rayleigh is not None and abs(sr.rayleigh - sr.log_lambda) < 1e-9


def test_window3_trace_matches_cyclic_enumeration():
    """trace(K^n) is the cyclic sum over all length-n sequences."""
    a = Alphabet.discrete([-1.0, 0.5, 2.0])
    rng = np.random.default_rng(0)
    tab = rng.random((3, 3, 3))
    spec = DistortionSpec.single(table_function(a, tab))
    beta, n = 0.8, 6
    K = build_operator(a, spec, [beta]).matrix()
    brute = 0.0
    for z in itertools.product(range(3), repeat=n):
        total = sum(tab[z[t - 2], z[t - 1], z[t]] for t in range(n))
        brute += 2.0 ** (-beta * total)
    assert abs(np.trace(np.linalg.matrix_power(K, n)) - brute) < 1e-10 * brute


def test_gradient_matches_finite_difference():
    a = Alphabet.discrete([-1.0, 0.0, 1.0])
    spec = DistortionSpec((table_function(a, np.arange(9.0).reshape(3, 3) % 4), square_error()))
    b = np.array([0.4, 0.9])
    op = build_operator(a, spec, b)
    g = log2_lambda_gradient(op, spectral_radius(op))
    h = 1e-6
    for j in range(2):
        e = np.zeros(2)
        e[j] = h
        fd = (spectral_radius(build_operator(a, spec, b + e)).log_lambda_bits
              - spectral_radius(build_operator(a, spec, b - e)).log_lambda_bits) / (2 * h)
        assert abs(fd - g[j]) < 1e-7


def test_transition_count_closed_form():
    """rho(a, b) = [a != b] on Z_2: lambda = 1 + 2^-beta, so the infimum is h_b(D)."""
    z2 = Alphabet.modular(2)
    spec = DistortionSpec.single(table_function(z2, [[0, 1], [1, 0]]))
    D = 0.2
    res = sliding_slb(z2, spec, D, h_rate=1.0)
    hb = -D * math.log2(D) - (1 - D) * math.log2(1 - D)
    assert abs(res.inf_value - hb) < 1e-9
    assert abs(res.bound - (1 - hb)) < 1e-9


def test_single_letter_reduces_to_phi():
    z3 = Alphabet.modular(3)
    spec = DistortionSpec.single(hamming())
    res = sliding_slb(z3, spec, 0.3)
    assert abs(res.inf_value - phi(z3, spec, 0.3).phi) <= 1e-12
    assert abs(res.log2_lambda + res.beta_star[0] * 0.3 - res.inf_value) < 1e-9


def test_gaussian_example_small_theta():
    chk = gaussian_example_check(1.0, 0.3)
    assert abs(chk.penalty - 0.5 * math.log2(1 / (1 - 0.09))) <= 1e-2
    assert not chk.result.under_resolved
