"""Saddle-point volume of distortion balls and independent volume oracles.

The natural-log saddle function is ``f(s) = s . D + ln sum_i w_i e^{-s . rho(z_i)}``
with ``s = beta * ln 2``.  The second-order approximation of the log-volume
of ``{z^n : rho(z^n) <= nD}`` is

    n Phi(D) - log2( sqrt((2 pi n)^k' det H) / prod_j g_j(s_j) )

where H is the Hessian of f on the active coordinates and ``g_j`` the
inverse-Laplace kernel: ``1/s`` on continuous alphabets and the lattice
step kernel ``delta / (1 - e^{-s delta})`` when the distortion values of
coordinate j live on the lattice ``delta Z``.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from functools import reduce

import numpy as np
from scipy.special import gammaln

from .model import LN2, Alphabet, DistortionSpec, DomainError, SLBError, log_weights
from .phi import EPS_ACTIVE, PhiResult, log_partition, phi

_MC_CHUNK = 4096


class SaddleError(SLBError, ValueError):
    pass


class DegenerateSaddleError(SaddleError):
    """No constraint bites: every coordinate of the saddle point was pruned."""


class LinearDependenceError(SaddleError):
    """The active Hessian is singular; some constraint is a combination of others."""


def q_function(t: float) -> float:
    """Upper tail of the standard normal distribution."""
    return 0.5 * math.erfc(t / math.sqrt(2.0))


def f_eval(alphabet: Alphabet, spec: DistortionSpec, s, D=None):
    """Value (nats), gradient ``D - E[rho]`` and Hessian ``Cov[rho]`` of f at ``s``."""
    D = spec.resolve_levels(D)
    s = np.atleast_1d(np.asarray(s, dtype=float))
    lp = log_partition(alphabet, spec, s / LN2)
    value = float(s @ D + LN2 * lp.value)
    return value, D + lp.gradient, lp.covariance


@dataclass(frozen=True)
class SaddleResult:
    s_star: tuple[float, ...]
    active: tuple[bool, ...]
    pruned: dict = field(compare=False)
    f_value: float
    hess_det: float
    effective_dim: int
    phi_bits: float
    kernels: tuple[float | None, ...]
    dependent: bool = False
    hessian: np.ndarray | None = field(default=None, compare=False, repr=False)
    gradient: tuple[float, ...] = ()


@dataclass(frozen=True)
class VolumeEstimate:
    log_volume_bits: float
    method: str
    ci95: float | None = None
    n: int = 0
    prefactor_bits: float | None = None
    hits: int | None = None
    samples: int | None = None
    upper95_bits: float | None = None

    @property
    def zero_hits(self) -> bool:
        return self.method == "monte-carlo" and self.hits == 0


def _lattice_span(values: np.ndarray) -> float | None:
    vals = np.unique(values[np.isfinite(values)])
    vals = vals[vals != 0]
    if vals.size == 0:
        return None
    fr = []
    for v in vals:
        f = Fraction(float(v)).limit_denominator(10**6)
        if abs(float(f) - v) > 1e-12 * max(1.0, abs(v)):
            return None
        fr.append(abs(f))
    num = reduce(math.gcd, (f.numerator for f in fr))
    den = reduce(lambda a, b: a * b // math.gcd(a, b), (f.denominator for f in fr))
    return num / den


def find_saddle(alphabet: Alphabet, spec: DistortionSpec, D=None) -> SaddleResult:
    """Minimize f over the nonnegative orthant and prune coordinates that do not bite.

    A coordinate is pruned when its saddle value is at most ``EPS_ACTIVE``
    (inactive constraint) or when f does not depend on it at all (a hard
    well, or a function constant on the support).  The remaining problem is
    re-solved before the Hessian is formed.
    """
    D = spec.resolve_levels(D)
    res = phi(alphabet, spec, D)
    if res.degenerate:
        raise DegenerateSaddleError("no constraint is active at this distortion level")
    if res.boundary:
        raise SaddleError("distortion level on the boundary: saddle point at infinite tilt")
    beta = np.array(res.beta_star)
    lp = log_partition(alphabet, spec, beta)
    flat = np.diag(lp.covariance) <= 0.0
    pruned = {}
    for j in range(spec.k):
        if flat[j] or spec.functions[j].is_well:
            pruned[j] = "flat"
        elif beta[j] * LN2 <= EPS_ACTIVE:
            pruned[j] = "inactive"
    keep = [j for j in range(spec.k) if pruned.get(j) != "inactive"]
    active = np.array([j not in pruned for j in range(spec.k)])
    if not active.any():
        raise DegenerateSaddleError("all saddle coordinates were pruned")
    if len(keep) < spec.k:
        sub = spec.subset(keep)
        res_sub = phi(alphabet, sub, D[keep])
        beta = np.zeros(spec.k)
        beta[keep] = res_sub.beta_star
        res = res_sub
    beta[~active] = 0.0
    s = beta * LN2
    value, grad, hess = f_eval(alphabet, spec, s, D)
    Ha = hess[np.ix_(active, active)]
    ev = np.linalg.eigvalsh(Ha)
    dependent = bool(ev[0] < 1e-10 * ev[-1])
    rank = int(np.sum(ev >= 1e-10 * ev[-1]))
    kernels = []
    if alphabet.is_discrete:
        _, rho = log_weights(alphabet, spec, np.zeros(spec.k))
        for j in range(spec.k):
            kernels.append(_lattice_span(rho[j]) if active[j] else None)
    else:
        kernels = [None] * spec.k
    return SaddleResult(tuple(s.tolist()), tuple(active.tolist()), pruned, value,
                        float(np.prod(ev)), rank, res.phi, tuple(kernels),
                        dependent=dependent, hessian=hess, gradient=tuple(grad.tolist()))


def _log2_kernel(s: float, span: float | None) -> float:
    if span is None:
        return -math.log2(s)
    # log2( span / (1 - e^{-s span}) )
    return math.log2(span) - math.log2(-math.expm1(-s * span))


def log_volume_saddle(n: int, saddle: SaddleResult, alphabet: Alphabet | None = None) -> VolumeEstimate:
    """Second-order saddle-point estimate of the ball log-volume in bits."""
    if n < 1:
        raise DomainError("n must be positive")
    if saddle.effective_dim < 1:
        raise DegenerateSaddleError("no active coordinates")
    if saddle.dependent:
        raise LinearDependenceError(
            "active Hessian is singular: remove the linearly dependent or redundant constraint")
    k_eff = saddle.effective_dim
    log2_kernels = sum(_log2_kernel(s, span) for s, a, span in
                       zip(saddle.s_star, saddle.active, saddle.kernels) if a)
    prefactor = 0.5 * (k_eff * math.log2(2 * math.pi * n) + math.log2(saddle.hess_det)) - log2_kernels
    return VolumeEstimate(n * saddle.phi_bits - prefactor, "saddlepoint", n=n, prefactor_bits=prefactor)


def chernoff_log_volume(n: int, phi_result: PhiResult) -> VolumeEstimate:
    """Chernoff upper bound ``n Phi(D)`` on the ball log-volume."""
    return VolumeEstimate(n * phi_result.phi, "chernoff", n=n, prefactor_bits=0.0)


def exact_volume(n: int, spec: DistortionSpec | str, D: float, r: int = 2) -> VolumeEstimate:
    """Closed-form log2 volume for the L1 ball, the L2 ball, or the Hamming ball over Z_r."""
    label = spec if isinstance(spec, str) else (spec.functions[0].label if spec.k == 1 else "")
    D = float(np.atleast_1d(D)[0])
    if n < 1 or D < 0:
        raise DomainError("need n >= 1 and D >= 0")
    if label == "abs":
        if D == 0:
            return VolumeEstimate(-math.inf, "exact-l1", n=n)
        val = n * math.log2(2 * n * D) - gammaln(n + 1) / LN2
        return VolumeEstimate(float(val), "exact-l1", n=n)
    if label == "square":
        if D == 0:
            return VolumeEstimate(-math.inf, "exact-l2", n=n)
        val = 0.5 * n * math.log2(math.pi * n * D) - gammaln(0.5 * n + 1) / LN2
        return VolumeEstimate(float(val), "exact-l2", n=n)
    if label == "hamming":
        radius = math.floor(n * D + 1e-9)
        count = sum(math.comb(n, i) * (r - 1) ** i for i in range(min(radius, n) + 1))
        return VolumeEstimate(math.log2(count), "exact-hamming", n=n)
    raise DomainError(f"no closed-form volume for {label!r}")


def _cell_sampler(alphabet: Alphabet, spec: DistortionSpec, beta: np.ndarray):
    """A proposal with an exactly known density close to the tilted density."""
    if alphabet.is_discrete:
        logw, _ = log_weights(alphabet, spec, beta)
        p = np.exp(logw - np.max(logw))
        p /= p.sum()
        values = alphabet.nodes

        def draw(rng, size):
            idx = rng.choice(p.size, size=size, p=p)
            return values[idx], np.log2(p[idx])

        return draw
    # piecewise-constant density on uniform cells covering the interval
    edges = np.linspace(alphabet.lower, alphabet.upper, alphabet.node_count + 1)
    mids = 0.5 * (edges[:-1] + edges[1:])
    width = np.diff(edges)
    grid = Alphabet.discrete(np.concatenate([edges, mids]))
    logw, _ = log_weights(grid, spec, beta)
    dens = np.exp(logw - np.max(logw))
    de, dm = dens[: edges.size], dens[edges.size:]
    cell = width * (de[:-1] + 4 * dm + de[1:]) / 6
    mass = cell / cell.sum()
    logdens = np.log2(np.where(mass > 0, mass / width, 1.0))

    def draw(rng, size):
        idx = rng.choice(mass.size, size=size, p=mass)
        z = edges[idx] + width[idx] * rng.random(size)
        return z, logdens[idx]

    return draw


def monte_carlo_volume(n: int, alphabet: Alphabet, spec: DistortionSpec, D=None,
                       samples: int = 200_000, seed: int = 0, jobs: int = 1) -> VolumeEstimate:
    """Importance-sampling estimate of the ball log-volume with a 95% interval.

    Samples are drawn i.i.d. per coordinate from (a cell approximation of)
    the tilted density at the optimal tilt.  Chunks of fixed size get their
    own seeded substream, so the estimate does not depend on ``jobs``.
    """
    D = spec.resolve_levels(D)
    res = phi(alphabet, spec, D)
    beta = np.where(np.isfinite(res.beta_star), res.beta_star, 0.0)
    draw = _cell_sampler(alphabet, spec, beta)
    ref = n * res.phi  # log2 of the largest possible importance weight, up to the cell approximation
    n_chunks = -(-samples // _MC_CHUNK)
    children = np.random.SeedSequence(seed).spawn(n_chunks)

    def run(i):
        size = min(_MC_CHUNK, samples - i * _MC_CHUNK)
        rng = np.random.default_rng(children[i])
        z, logq = draw(rng, size * n)
        z = z.reshape(size, n)
        logq = logq.reshape(size, n).sum(axis=1)
        vals = spec.letter_values(z)
        with np.errstate(invalid="ignore"):
            totals = vals.sum(axis=2)
        inside = np.all(totals <= n * D[:, None] + 1e-9, axis=0)
        y = np.where(inside, np.exp2(np.minimum(-logq - ref, 1000.0)), 0.0)
        return float(y.sum()), float((y * y).sum()), int(inside.sum())

    if jobs > 1:
        with ThreadPoolExecutor(jobs) as ex:
            parts = list(ex.map(run, range(n_chunks)))
    else:
        parts = [run(i) for i in range(n_chunks)]
    s1 = sum(p[0] for p in parts)
    s2 = sum(p[1] for p in parts)
    hits = sum(p[2] for p in parts)
    box = n * math.log2(alphabet.upper - alphabet.lower) if not alphabet.is_discrete else n * math.log2(alphabet.size)
    if hits == 0:
        return VolumeEstimate(-math.inf, "monte-carlo", None, n, hits=0, samples=samples,
                              upper95_bits=min(box, ref + math.log2(3.0 / samples)))
    mean = s1 / samples
    var = max(s2 / samples - mean * mean, 0.0)
    se = math.sqrt(var / samples)
    ci = 1.96 * se / (mean * LN2)
    return VolumeEstimate(ref + math.log2(mean), "monte-carlo", ci, n, hits=hits, samples=samples)
