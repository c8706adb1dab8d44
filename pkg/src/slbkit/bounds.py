"""Shannon-type lower bounds and their finite-block refinements, in bits per symbol."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from .model import LN2, Alphabet, DistortionSpec, DomainError, hamming, square_error
from .phi import PhiResult, log_partition, phi, phi_real_line
from .saddle import VolumeEstimate, find_saddle, log_volume_saddle


@dataclass(frozen=True)
class BoundInputs:
    """Entropy rate, block length and distortion setup shared by every bound."""

    h_rate: float
    n: int
    alphabet: Alphabet
    spec: DistortionSpec
    D: tuple[float, ...]
    source: str = "user"

    def __post_init__(self):
        if self.n < 1:
            raise DomainError("block length must be at least 1")
        if not math.isfinite(self.h_rate):
            raise DomainError("entropy rate must be finite")
        object.__setattr__(self, "D", tuple(float(d) for d in np.atleast_1d(self.D)))

    def phi(self) -> PhiResult:
        return phi(self.alphabet, self.spec, self.D)


def binary_entropy(p: float) -> float:
    if p <= 0 or p >= 1:
        return 0.0
    return -p * math.log2(p) - (1 - p) * math.log2(1 - p)


def gaussian_source(sigma2: float, D, n: int = 1, spec: DistortionSpec | None = None) -> BoundInputs:
    """i.i.d. N(0, sigma2); the error alphabet is the (truncated) real line."""
    spec = spec or DistortionSpec.single(square_error())
    _, alphabet = phi_real_line(spec, D)
    return BoundInputs(0.5 * math.log2(2 * math.pi * math.e * sigma2), n, alphabet, spec, D, f"gaussian({sigma2:g})")


def uniform_source(lower: float, upper: float, D, n: int = 1, spec: DistortionSpec | None = None) -> BoundInputs:
    spec = spec or DistortionSpec.single(square_error())
    _, alphabet = phi_real_line(spec, D)
    return BoundInputs(math.log2(upper - lower), n, alphabet, spec, D, f"uniform({lower:g},{upper:g})")


def bernoulli_source(p: float, D, n: int = 1) -> BoundInputs:
    return BoundInputs(binary_entropy(p), n, Alphabet.modular(2), DistortionSpec.single(hamming()), D,
                       f"bernoulli({p:g})")


SOURCES = {"gaussian": gaussian_source, "uniform": uniform_source, "bernoulli": bernoulli_source}


@dataclass(frozen=True)
class BoundEntry:
    name: str
    value: float
    redundancy: float
    refs: str
    extra: dict = field(default_factory=dict)

    @property
    def clamped(self) -> float:
        """Display value: a rate bound below zero says nothing beyond ``R >= 0``."""
        return max(self.value, 0.0)

    @property
    def was_clamped(self) -> bool:
        return self.value < 0


def slb_classical(inputs: BoundInputs, phi_result: PhiResult | None = None) -> BoundEntry:
    res = phi_result or inputs.phi()
    return BoundEntry("classical", inputs.h_rate - res.phi, 0.0, "slb-classical",
                      {"phi_bits": res.phi, "beta_star": res.beta_star, "degenerate": res.degenerate})


def lagrangian_bound(inputs: BoundInputs, beta) -> float:
    """Lower bound on rate plus ``beta . distortion`` per symbol."""
    beta = np.atleast_1d(np.asarray(beta, dtype=float))
    return inputs.h_rate - log_partition(inputs.alphabet, inputs.spec, beta).value


def one_to_one_objective(alpha: float, base: float, n: int, allow_empty: bool = True,
                         excess: float | None = None) -> float:
    """``base/alpha + log2(2^{alpha-1} - 1)/(alpha n)``, less ``(alpha-1)/(alpha n)`` when empty codewords count.

    ``excess`` may carry ``alpha - 1`` exactly when alpha is too close to 1
    to be represented.
    """
    t = alpha - 1.0 if excess is None else excess
    alpha = 1.0 + t
    log_term = math.log2(-math.expm1(-t * LN2)) if allow_empty else math.log2(math.expm1(t * LN2))
    return base / alpha + log_term / (alpha * n)


def slb_one_to_one(base: float, n: int, allow_empty: bool = True) -> tuple[float, float]:
    """Maximize the one-to-one bound over ``alpha > 1``; returns ``(value, alpha*)``.

    The objective is scanned on a log grid of ``alpha - 1`` and refined with
    a bounded scalar search around the best grid point.
    """
    if n < 2:
        raise DomainError("one-to-one bound needs n >= 2")
    logt = np.linspace(-40.0, 5.0, 901)
    vals = np.array([one_to_one_objective(1.0, base, n, allow_empty, math.exp(x)) for x in logt])
    i = int(np.argmax(vals))
    lo, hi = logt[max(i - 1, 0)], logt[min(i + 1, logt.size - 1)]
    res = minimize_scalar(lambda x: -one_to_one_objective(1.0, base, n, allow_empty, math.exp(x)),
                          bounds=(lo, hi), method="bounded", options={"xatol": 1e-12})
    best = max((-res.fun, res.x), (vals[i], logt[i]))
    return float(best[0]), 1.0 + math.exp(best[1])


def one_to_one_entry(inputs: BoundInputs, base_entry: BoundEntry | None = None,
                     allow_empty: bool = True) -> BoundEntry:
    base_entry = base_entry or slb_classical(inputs)
    value, alpha = slb_one_to_one(base_entry.value, inputs.n, allow_empty)
    return BoundEntry("one-to-one", value, value - base_entry.value, "slb-one-to-one",
                      {"alpha_star": alpha, "gap": base_entry.value - value})


def refinement_term(k_eff: int, n: int) -> float:
    """Leading saddle-point redundancy ``k' log2(n) / (2n)``."""
    return k_eff * math.log2(n) / (2 * n)


def slb_dsf(inputs: BoundInputs, volume: VolumeEstimate, k_eff: int | None = None,
            base_entry: BoundEntry | None = None) -> BoundEntry:
    """``h - log2 Vol / n`` for pointwise-constrained codes."""
    if volume.n != inputs.n:
        raise DomainError("volume estimate is for a different block length")
    base_entry = base_entry or slb_classical(inputs)
    value = inputs.h_rate - volume.log_volume_bits / inputs.n
    extra = {"volume_method": volume.method}
    if k_eff is not None:
        extra["k_eff"] = k_eff
        extra["refinement_term"] = refinement_term(k_eff, inputs.n)
    return BoundEntry("d-semifaithful", value, value - base_entry.value, "slb-d-semifaithful", extra)


@dataclass(frozen=True)
class BoundReport:
    inputs: BoundInputs
    entries: tuple[BoundEntry, ...]
    ordering_ok: bool
    violation: str | None = None

    def entry(self, name: str) -> BoundEntry:
        for e in self.entries:
            if e.name == name:
                return e
        raise KeyError(name)


def ordering_check(inputs: BoundInputs) -> BoundReport:
    """Evaluate all variants and certify one-to-one <= classical <= d-semifaithful.

    Comparisons use clamped values, so a degenerate level (every bound at or
    below zero) passes with all three at zero.
    """
    res = inputs.phi()
    classical = slb_classical(inputs, res)
    one = one_to_one_entry(inputs, classical)
    if res.degenerate or res.boundary:
        vol = VolumeEstimate(inputs.n * res.phi, "chernoff", n=inputs.n, prefactor_bits=0.0)
        dsf = slb_dsf(inputs, vol, base_entry=classical)
    else:
        sad = find_saddle(inputs.alphabet, inputs.spec, inputs.D)
        vol = log_volume_saddle(inputs.n, sad, inputs.alphabet)
        dsf = slb_dsf(inputs, vol, sad.effective_dim, classical)
    tol = 1e-12
    violation = None
    if one.clamped > classical.clamped + tol:
        violation = f"one-to-one {one.value:.12g} > classical {classical.value:.12g}"
    elif classical.clamped > dsf.clamped + tol:
        violation = f"classical {classical.value:.12g} > d-semifaithful {dsf.value:.12g}"
    return BoundReport(inputs, (one, classical, dsf), violation is None, violation)
