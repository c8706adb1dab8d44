"""Log-partition function, the max-entropy function Phi(D) and its dual forms.

Unit convention: tilts ``beta`` act on base-2 exponents, ``2^{-beta rho}``.
The natural-log saddle variable used in :mod:`slbkit.saddle` is
``s = beta * ln 2``.  Every public value is in bits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq
from scipy.special import logsumexp

from ._optim import bracket_sign_change, golden_section, kkt_residual, projected_newton
from .model import (
    LN2,
    Alphabet,
    DistortionSpec,
    DivergenceError,
    DomainError,
    SLBError,
    log_weights,
    real_line_alphabet,
    tilted_density,
)

EPS_ACTIVE = 1e-8
KKT_TOL = 1e-8
_EDGE_TOL = 1e-8


class UnboundedBelowError(SLBError, ValueError):
    """Requested distortion lies below what any error distribution achieves."""


@dataclass(frozen=True)
class LogPartition:
    """``G(beta) = log2 sum_i w_i 2^{-beta . rho(z_i)}`` and its derivatives.

    ``gradient`` is ``dG/dbeta = -E[rho]`` under the tilted density;
    ``covariance`` is ``Cov[rho]`` (the Hessian of the natural-log form).
    """

    value: float
    gradient: np.ndarray
    covariance: np.ndarray

    @property
    def hessian_bits(self) -> np.ndarray:
        return LN2 * self.covariance


def _moments(logw: np.ndarray, rho: np.ndarray):
    lse = logsumexp(logw)
    if not np.isfinite(lse):
        raise DivergenceError("partition sum is zero: the support is empty")
    p = np.exp(logw - lse)
    pos = p > 0
    r = rho[:, pos]
    pp = p[pos]
    mean = r @ pp
    cen = r - mean[:, None]
    cov = (cen * pp) @ cen.T
    return lse / LN2, mean, cov, p


def _check_tail(alphabet: Alphabet, p: np.ndarray, beta: np.ndarray) -> None:
    if not alphabet.real_line:
        return
    w = alphabet.weights
    dens_edge = max(p[0] / w[0], p[-1] / w[-1])
    if dens_edge * (alphabet.upper - alphabet.lower) > _EDGE_TOL:
        flat = [j for j, b in enumerate(beta) if b == 0.0]
        j = flat[0] if flat else int(np.argmin(beta))
        raise DivergenceError(
            f"partition integral not resolved on [{alphabet.lower:g}, {alphabet.upper:g}]: "
            f"constraint {j} does not confine the tilted density", constraint=j)


def log_partition(alphabet: Alphabet, spec: DistortionSpec, beta, check_tail: bool = True) -> LogPartition:
    """Log-partition value, gradient and covariance at tilt ``beta``."""
    beta = np.atleast_1d(np.asarray(beta, dtype=float))
    if beta.shape != (spec.k,):
        raise DomainError(f"expected {spec.k} tilts, got shape {beta.shape}")
    logw, rho = log_weights(alphabet, spec, beta)
    G, mean, cov, p = _moments(logw, rho)
    if check_tail:
        _check_tail(alphabet, p, beta)
    return LogPartition(float(G), -mean, cov)


@dataclass(frozen=True)
class PhiResult:
    phi: float
    beta_star: tuple[float, ...]
    active_mask: tuple[bool, ...]
    converged: bool
    iterations: int
    degenerate: bool = False
    boundary: bool = False
    dependent: bool = False
    kkt: float = 0.0
    levels: tuple[float, ...] = field(default=())

    @property
    def k(self) -> int:
        return len(self.beta_star)


def _support_stats(alphabet, spec):
    logw, rho = log_weights(alphabet, spec, np.zeros(spec.k))
    support = np.isfinite(logw)
    if not support.any():
        raise DivergenceError("hard constraints leave an empty support")
    r = rho[:, support]
    return r.min(axis=1), r.max(axis=1)


def _scalar_phi(alphabet, spec, D: float) -> tuple[float, float, int, bool]:
    def F(b):
        logw, rho = log_weights(alphabet, spec, np.array([b]))
        return b * D + logsumexp(logw) / LN2

    def dF(b):
        logw, rho = log_weights(alphabet, spec, np.array([b]))
        _, mean, _, _ = _moments(logw, rho)
        return D - mean[0]

    lo, hi = bracket_sign_change(dF, start=1.0)
    res = golden_section(F, dF, lo, hi)
    return res.x, res.fx, res.iterations, res.converged


def phi(alphabet: Alphabet, spec: DistortionSpec, D=None) -> PhiResult:
    """``Phi(D) = inf_{beta >= 0} [beta . D + G(beta)]`` with its minimizer.

    Raises :class:`UnboundedBelowError` when some ``D_j`` lies below the
    essential infimum of ``rho_j``.  A level at or above the zero-tilt mean
    gives ``beta* = 0`` with ``degenerate=True``.
    """
    if spec.window != 1:
        raise DomainError("phi needs single-letter functions; use slbkit.sliding for windows")
    D = spec.resolve_levels(D)
    k = spec.k
    lo_vals, hi_vals = _support_stats(alphabet, spec)
    below = np.flatnonzero(D < lo_vals - 1e-15)
    if below.size:
        j = int(below[0])
        raise UnboundedBelowError(
            f"level D[{j}] = {D[j]:g} is below the essential infimum {lo_vals[j]:g} of {spec.functions[j].label}")

    lp0 = log_partition(alphabet, spec, np.zeros(k), check_tail=False)
    g0 = D + lp0.gradient
    if np.all(g0 >= 0):
        return PhiResult(lp0.value, (0.0,) * k, (False,) * k, True, 0,
                         degenerate=True, levels=tuple(D.tolist()))

    # components constant on the support never bite; fix their tilt at zero
    const = hi_vals - lo_vals <= 1e-300
    free = np.flatnonzero(~const)
    beta = np.zeros(k)
    if free.size == 1:
        j = int(free[0])
        sub = spec.subset([j])
        if D[j] <= lo_vals[j]:
            if not alphabet.is_discrete:
                raise UnboundedBelowError("zero distortion has Phi = -inf on a continuous alphabet")
            logw, rho = log_weights(alphabet, sub, np.zeros(1))
            at_min = np.isclose(rho[0], lo_vals[j], rtol=0, atol=1e-15) & np.isfinite(logw)
            value = float(logsumexp(logw[at_min]) / LN2)
            beta[j] = math.inf
            return PhiResult(value, tuple(beta.tolist()), tuple((np.arange(k) == j).tolist()), True, 0,
                             boundary=True, levels=tuple(D.tolist()))
        bj, value, iters, ok = _scalar_phi(alphabet, sub, float(D[j]))
        beta[j] = bj
        kkt = 0.0
    else:
        if np.any(D[free] <= lo_vals[free]):
            raise UnboundedBelowError("a level sits on the essential infimum; Phi is attained only at infinite tilt")
        sub = spec.subset(free)
        Dsub = D[free]

        def fun(b):
            lp = log_partition(alphabet, sub, b, check_tail=False)
            return float(b @ Dsub + lp.value), Dsub + lp.gradient, lp.hessian_bits

        start = np.zeros(free.size)
        for i, j in enumerate(free):
            one = spec.subset([int(j)])
            lp1 = log_partition(alphabet, one, np.zeros(1), check_tail=False)
            if D[j] + lp1.gradient[0] < 0:
                start[i] = _scalar_phi(alphabet, one, float(D[j]))[0] / free.size
        try:
            res = projected_newton(fun, start, tol=KKT_TOL)
        except ArithmeticError as exc:
            raise UnboundedBelowError(str(exc)) from exc
        beta[free] = res.x
        value, iters, ok, kkt = res.fx, res.iterations, res.converged, res.kkt

    lp = log_partition(alphabet, spec, beta)
    active = beta > EPS_ACTIVE
    dependent = False
    if active.sum() >= 2:
        ev = np.linalg.eigvalsh(lp.covariance[np.ix_(active, active)])
        dependent = bool(ev[0] < 1e-10 * ev[-1])
    if free.size == 1:
        kkt = kkt_residual(beta, D + lp.gradient) if np.all(np.isfinite(beta)) else 0.0
    return PhiResult(float(value), tuple(beta.tolist()), tuple(active.tolist()), bool(ok), int(iters),
                     dependent=dependent, kkt=float(kkt), levels=tuple(D.tolist()))


def phi_real_line(spec: DistortionSpec, D=None, node_count: int = 4001, rule: str = "simpson",
                  max_rounds: int = 6) -> tuple[PhiResult, Alphabet]:
    """Phi on the real line, re-truncating until the interval fits the optimum.

    The truncation is chosen for half the optimal tilt (the smallest tilt
    the result depends on) and refined until it stops changing.
    """
    D = spec.resolve_levels(D)
    guess = np.array([0.25 / (d * LN2) if d > 0 and np.isfinite(d) else 1.0 for d in D])
    alphabet = real_line_alphabet(spec, guess, node_count, rule)
    res = None
    for _ in range(max_rounds):
        res = phi(alphabet, spec, D)
        b = np.array(res.beta_star)
        probe = np.where(b > EPS_ACTIVE, 0.5 * b, 0.0)
        if not np.any(probe > 0):
            break
        nxt = real_line_alphabet(spec, probe, node_count, rule)
        if nxt == alphabet:
            break
        alphabet = nxt
    return res, alphabet


@dataclass(frozen=True)
class MaxEntResidual:
    applicable: bool
    entropy_bits: float = math.nan
    entropy_residual: float = math.nan
    moment_residuals: tuple[float, ...] = ()
    tol: float = 1e-6

    @property
    def worst(self) -> float:
        if not self.applicable:
            return math.nan
        return max((self.entropy_residual, *self.moment_residuals))

    @property
    def certified(self) -> bool:
        return self.applicable and self.worst <= self.tol


def maxent_check(result: PhiResult, alphabet: Alphabet, spec: DistortionSpec, D=None,
                 tol: float = 1e-6) -> MaxEntResidual:
    """Compare Phi with the entropy of the tilted density at ``beta*``.

    Returns ``|h(g) - Phi|`` and ``|E_g[rho_j] - D_j|`` for active j; not
    applicable when no constraint is active or the tilt is infinite.
    """
    D = spec.resolve_levels(D if D is not None else (result.levels or None))
    beta = np.array(result.beta_star)
    if result.degenerate or not any(result.active_mask) or not np.all(np.isfinite(beta)):
        return MaxEntResidual(False, tol=tol)
    g = tilted_density(alphabet, spec, beta)
    h = g.entropy_bits()
    mean = g.mean()
    moments = tuple(float(abs(mean[j] - D[j])) for j in range(spec.k) if result.active_mask[j])
    return MaxEntResidual(True, h, abs(h - result.phi), moments, tol)


def distortion_rate_bound(alphabet: Alphabet, spec: DistortionSpec, R: float, h_rate: float) -> float:
    """Lower bound on per-letter distortion at rate ``R`` (bits/symbol).

    ``sup_{gamma >= 0} gamma (h - log2 int 2^{-rho/gamma} - R)``, evaluated
    through ``beta = 1/gamma``; at the stationary point the value equals the
    tilted mean of ``rho``.
    """
    if spec.k != 1 or spec.window != 1:
        raise DomainError("distortion-rate bound needs one single-letter function")
    if R < 0:
        raise DomainError("rate must be nonnegative")

    def G(b):
        return log_partition(alphabet, spec, [b], check_tail=False)

    def psi(b):
        return (h_rate - G(b).value - R) / b

    def q(logb):
        b = math.exp(logb)
        lp = G(b)
        return h_rate - lp.value - R + b * lp.gradient[0]

    lo, hi = -40.0, 40.0
    qlo, qhi = q(lo), q(hi)
    if qlo >= 0:
        # psi is decreasing: the sup sits at gamma -> inf, i.e. the zero-tilt mean
        value = -G(0.0).gradient[0] if h_rate - G(0.0).value - R >= 0 else psi(math.exp(lo))
    elif qhi <= 0:
        value = psi(math.exp(hi))
    else:
        logb = brentq(q, lo, hi, xtol=1e-14, rtol=1e-14, maxiter=500)
        b = math.exp(logb)
        log_partition(alphabet, spec, [b])  # tail check at the optimum
        value = psi(b)
    return max(0.0, float(value))
