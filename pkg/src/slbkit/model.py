"""Alphabets, window distortion functions and tilted densities.

Every other module consumes the types defined here.  Discrete alphabets are
the integers modulo ``r``: element ``i`` carries the real value
``symbols[i]`` and differences are taken modulo ``r``.  Continuous alphabets
are a closed interval with a fixed composite quadrature rule; an interval
flagged ``real_line`` stands in for the whole real line and is subject to
tail checks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.special import logsumexp

LN2 = math.log(2.0)

#: Distortion value of a hard constraint violation.  Any positive tilt turns it
#: into zero partition weight; see :func:`log_weights`.
WELL = math.inf


class SLBError(Exception):
    """Base class for errors raised by this package."""


class DomainError(SLBError, ValueError):
    pass


class LengthError(SLBError, ValueError):
    pass


class DivergenceError(SLBError, ArithmeticError):
    """A partition sum or integral is infinite (or not resolved by truncation)."""

    def __init__(self, message: str, constraint: int | None = None):
        super().__init__(message)
        self.constraint = constraint


# ---------------------------------------------------------------------------
# Alphabets
# ---------------------------------------------------------------------------

_GL_ORDER = 8


@dataclass(frozen=True)
class Alphabet:
    """A discrete symbol set or a truncated interval with a quadrature rule."""

    kind: str
    symbols: tuple[float, ...] = ()
    lower: float = 0.0
    upper: float = 0.0
    node_count: int = 0
    rule: str = "simpson"
    real_line: bool = False

    def __post_init__(self):
        if self.kind == "discrete":
            if len(self.symbols) < 2:
                raise DomainError("a discrete alphabet needs at least 2 symbols")
            if len(set(self.symbols)) != len(self.symbols):
                raise DomainError("discrete symbols must be distinct")
        elif self.kind == "interval":
            if not self.lower < self.upper:
                raise DomainError("interval needs lower < upper")
            if self.node_count < 16:
                raise DomainError("interval needs at least 16 quadrature nodes")
            if self.rule == "simpson":
                if self.node_count % 2 == 0:
                    raise DomainError("composite Simpson needs an odd node count")
            elif self.rule == "gauss":
                if self.node_count % _GL_ORDER:
                    raise DomainError(f"Gauss-Legendre node count must be a multiple of {_GL_ORDER}")
            else:
                raise DomainError(f"unknown quadrature rule {self.rule!r}")
        else:
            raise DomainError(f"unknown alphabet kind {self.kind!r}")

    @classmethod
    def discrete(cls, symbols: Sequence[float]) -> "Alphabet":
        return cls("discrete", symbols=tuple(float(s) for s in symbols))

    @classmethod
    def modular(cls, r: int) -> "Alphabet":
        """The group Z_r with symbol values 0, 1, ..., r-1."""
        return cls.discrete(range(r))

    @classmethod
    def interval(cls, lower: float, upper: float, node_count: int = 2001,
                 rule: str = "simpson", real_line: bool = False) -> "Alphabet":
        return cls("interval", lower=float(lower), upper=float(upper),
                   node_count=int(node_count), rule=rule, real_line=real_line)

    @property
    def is_discrete(self) -> bool:
        return self.kind == "discrete"

    @property
    def size(self) -> int:
        """Alphabet size ``r`` (discrete) or the number of quadrature nodes."""
        return len(self.symbols) if self.is_discrete else self.node_count

    @cached_property
    def nodes(self) -> np.ndarray:
        if self.is_discrete:
            out = np.array(self.symbols)
        else:
            out = self._quadrature()[0]
        out.setflags(write=False)
        return out

    @cached_property
    def weights(self) -> np.ndarray:
        if self.is_discrete:
            out = np.ones(len(self.symbols))
        else:
            out = self._quadrature()[1]
        out.setflags(write=False)
        return out

    def _quadrature(self):
        a, b, n = self.lower, self.upper, self.node_count
        if self.rule == "simpson":
            x = np.linspace(a, b, n)
            h = (b - a) / (n - 1)
            w = np.full(n, 2.0)
            w[1:-1:2] = 4.0
            w[0] = w[-1] = 1.0
            return x, w * h / 3.0
        t, tw = np.polynomial.legendre.leggauss(_GL_ORDER)
        panels = n // _GL_ORDER
        edges = np.linspace(a, b, panels + 1)
        half = 0.5 * np.diff(edges)
        mid = 0.5 * (edges[:-1] + edges[1:])
        x = (mid[:, None] + half[:, None] * t[None, :]).ravel()
        w = (half[:, None] * tw[None, :]).ravel()
        return x, w

    def index_difference(self, u: np.ndarray, v: np.ndarray) -> np.ndarray:
        """Group difference of symbol indices, ``(u - v) mod r``."""
        if not self.is_discrete:
            raise DomainError("index arithmetic needs a discrete alphabet")
        return np.mod(np.asarray(u) - np.asarray(v), len(self.symbols))

    def values(self, idx: np.ndarray) -> np.ndarray:
        return self.nodes[np.asarray(idx)]


# ---------------------------------------------------------------------------
# Window functions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class WindowFunction:
    """A distortion function acting on ``window`` consecutive error symbols.

    ``evaluator`` maps an array of shape ``(..., window)`` to shape ``(...)``.
    Values may be :data:`WELL` for hard constraints.
    """

    window: int
    evaluator: Callable[[np.ndarray], np.ndarray] = field(compare=False)
    label: str
    well_width: float | None = None
    sign_definite: bool = True

    def __post_init__(self):
        if self.window < 1:
            raise DomainError("window size must be positive")

    @property
    def is_well(self) -> bool:
        return self.well_width is not None

    def __call__(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        if z.shape[-1:] != (self.window,):
            if self.window == 1:
                z = z[..., None]
            else:
                raise LengthError(f"{self.label} expects trailing axis of size {self.window}")
        return np.asarray(self.evaluator(z), dtype=float)


def abs_error() -> WindowFunction:
    return WindowFunction(1, lambda z: np.abs(z[..., 0]), "abs")


def square_error() -> WindowFunction:
    return WindowFunction(1, lambda z: z[..., 0] ** 2, "square")


def hamming() -> WindowFunction:
    return WindowFunction(1, lambda z: (z[..., 0] != 0).astype(float), "hamming")


def make_iwf(A: float) -> WindowFunction:
    """Peak limiter ``W(|z| - A)``: zero inside the well, :data:`WELL` outside."""
    if not A > 0:
        raise DomainError("well half-width A must be positive")
    A = float(A)
    return WindowFunction(1, lambda z: np.where(np.abs(z[..., 0]) <= A, 0.0, WELL),
                          f"iwf({A:g})", well_width=A)


def negcorr() -> WindowFunction:
    """Lag-one product ``-z * z'`` on a window of two symbols."""
    return WindowFunction(2, lambda z: -z[..., 0] * z[..., 1], "negcorr",
                          sign_definite=False)


def table_function(alphabet: Alphabet, values, label: str = "table") -> WindowFunction:
    """Tabulated window function over a discrete alphabet.

    ``values`` has shape ``(r,) * m`` and is indexed by symbol indices.
    """
    if not alphabet.is_discrete:
        raise DomainError("table distortion needs a discrete alphabet")
    tab = np.asarray(values, dtype=float)
    r = alphabet.size
    if tab.ndim < 1 or any(s != r for s in tab.shape):
        raise DomainError(f"table shape {tab.shape} does not match alphabet size {r}")
    order = np.argsort(alphabet.nodes)
    sorted_vals = alphabet.nodes[order]

    def lookup(z):
        pos = np.searchsorted(sorted_vals, z)
        pos = np.clip(pos, 0, r - 1)
        if not np.all(sorted_vals[pos] == z):
            raise DomainError("table distortion evaluated off the alphabet")
        idx = order[pos]
        return tab[tuple(np.moveaxis(idx, -1, 0))]

    return WindowFunction(tab.ndim, lookup, label,
                          sign_definite=bool(np.all(tab[np.isfinite(tab)] >= 0)))


BUILTINS = {
    "abs": abs_error,
    "square": square_error,
    "hamming": hamming,
    "negcorr": negcorr,
}


def validate_single_letter(fn: WindowFunction, alphabet: Alphabet) -> None:
    """Check ``rho >= 0`` and ``rho(z) = 0`` iff ``z = 0`` on the alphabet nodes."""
    if fn.window != 1:
        return
    z = alphabet.nodes
    vals = fn(z)
    if np.any(vals < 0):
        raise DomainError(f"{fn.label} takes negative values")
    zero = np.isclose(z, 0.0, atol=0.0)
    if np.any(zero) and np.any(vals[zero] != 0):
        raise DomainError(f"{fn.label} does not vanish at z = 0")
    if not fn.is_well and np.any(vals[~zero] == 0):
        raise DomainError(f"{fn.label} vanishes away from z = 0")


# ---------------------------------------------------------------------------
# Distortion specs
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DistortionSpec:
    """k window functions with per-letter target levels.

    Functions with a window shorter than the common window see only the last
    ``window`` symbols of each common window.
    """

    functions: tuple[WindowFunction, ...]
    levels: tuple[float, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "functions", tuple(self.functions))
        if not self.functions:
            raise DomainError("a distortion spec needs at least one function")
        if self.levels is not None:
            object.__setattr__(self, "levels", tuple(float(x) for x in self.levels))
            if len(self.levels) != len(self.functions):
                raise DomainError("functions and levels differ in length")

    @classmethod
    def single(cls, fn: WindowFunction, level: float | None = None) -> "DistortionSpec":
        return cls((fn,), None if level is None else (level,))

    @property
    def k(self) -> int:
        return len(self.functions)

    @property
    def window(self) -> int:
        return max(f.window for f in self.functions)

    @property
    def padded(self) -> bool:
        return len({f.window for f in self.functions}) > 1

    def with_levels(self, levels) -> "DistortionSpec":
        return DistortionSpec(self.functions, tuple(np.atleast_1d(levels)))

    def subset(self, idx) -> "DistortionSpec":
        idx = list(idx)
        lv = None if self.levels is None else tuple(self.levels[i] for i in idx)
        return DistortionSpec(tuple(self.functions[i] for i in idx), lv)

    def resolve_levels(self, D=None) -> np.ndarray:
        if D is None:
            if self.levels is None:
                raise DomainError("no distortion levels given")
            D = self.levels
        D = np.atleast_1d(np.asarray(D, dtype=float))
        if D.shape != (self.k,):
            raise DomainError(f"expected {self.k} distortion levels, got {D.shape}")
        return D

    def letter_values(self, z) -> np.ndarray:
        """``rho_j(z_i)`` as a ``(k, N)`` array; single-letter specs only."""
        if self.window != 1:
            raise DomainError("letter_values needs a single-letter (m = 1) spec")
        z = np.asarray(z, dtype=float)
        return np.stack([f(z[..., None]) for f in self.functions])

    def window_values(self, windows: np.ndarray) -> np.ndarray:
        """Evaluate every function on windows of shape ``(..., m)``; returns ``(k, ...)``."""
        windows = np.asarray(windows, dtype=float)
        m = self.window
        if windows.shape[-1] != m:
            raise LengthError(f"windows must have trailing size {m}")
        return np.stack([f(windows[..., m - f.window:]) for f in self.functions])


def eval_distortion(z, spec: DistortionSpec) -> np.ndarray:
    """Total (not per-letter) distortion of the error sequence ``z``.

    Returns ``sum_{t=m}^{n} rho_j(z_{t-m+1..t})`` for every function j.
    """
    z = np.asarray(z, dtype=float)
    if z.ndim != 1:
        raise LengthError("z must be one-dimensional")
    m = spec.window
    if z.size < m:
        raise LengthError(f"sequence of length {z.size} is shorter than window {m}")
    windows = sliding_window_view(z, m)
    vals = spec.window_values(windows)
    return vals.sum(axis=1)


# ---------------------------------------------------------------------------
# Tilted weights
# ---------------------------------------------------------------------------

def log_weights(alphabet: Alphabet, spec: DistortionSpec, beta) -> tuple[np.ndarray, np.ndarray]:
    """Natural-log integrand ``ln w_i - ln2 * beta . rho(z_i)`` and the rho table.

    Nodes where any function equals :data:`WELL` get weight zero (``-inf``)
    whatever the tilt: the well is a hard support restriction.
    """
    beta = np.asarray(beta, dtype=float)
    if np.any(beta < 0):
        raise DomainError("tilts must be nonnegative")
    rho = spec.letter_values(alphabet.nodes)
    well = np.isinf(rho).any(axis=0)
    finite_rho = np.where(np.isinf(rho), 0.0, rho)
    with np.errstate(divide="ignore"):
        logw = np.log(alphabet.weights) - LN2 * (beta @ finite_rho)
    logw = np.where(well, -np.inf, logw)
    return logw, rho


@dataclass(frozen=True)
class TiltedDensity:
    """``g(z) = 2^{-beta . rho(z)} / normalizer`` on the alphabet's nodes."""

    alphabet: Alphabet
    spec: DistortionSpec
    beta: tuple[float, ...]
    normalizer: float
    log2_normalizer: float

    @cached_property
    def _table(self):
        logw, rho = log_weights(self.alphabet, self.spec, self.beta)
        lse = logsumexp(logw)
        p = np.exp(logw - lse)  # quadrature mass at each node
        return p, rho

    @property
    def masses(self) -> np.ndarray:
        """Quadrature mass ``w_i g(z_i)`` at each node; sums to one."""
        return self._table[0]

    def density(self) -> np.ndarray:
        """Density values ``g(z_i)`` at the nodes."""
        p = self.masses
        return p / self.alphabet.weights

    def total_mass(self) -> float:
        return float(np.sum(self.alphabet.weights * self.density()))

    def mean(self) -> np.ndarray:
        p, rho = self._table
        return np.array([np.sum(p[p > 0] * r[p > 0]) for r in rho])

    def entropy_bits(self) -> float:
        """Entropy (differential for intervals) by direct quadrature of ``-g log2 g``."""
        p = self.masses
        g = self.density()
        pos = p > 0
        return float(-np.sum(p[pos] * np.log2(g[pos])))


def tilted_density(alphabet: Alphabet, spec: DistortionSpec, beta) -> TiltedDensity:
    beta = np.atleast_1d(np.asarray(beta, dtype=float))
    logw, _ = log_weights(alphabet, spec, beta)
    lse = logsumexp(logw)
    return TiltedDensity(alphabet, spec, tuple(beta.tolist()), float(np.exp(lse)), float(lse / LN2))


def real_line_alphabet(spec: DistortionSpec, beta, node_count: int = 4001,
                       rule: str = "simpson", tail_tol: float = 1e-12) -> Alphabet:
    """Truncate the real line for a single-letter spec probed at tilt ``beta``.

    The half-width B is doubled until the mass of ``2^{-beta . rho}`` outside
    ``[-B, B]`` is below ``tail_tol`` of the mass inside.  A peak limiter in
    ``spec`` fixes the interval to the well itself, where the integrand is
    smooth.
    """
    from scipy.integrate import quad

    beta = np.atleast_1d(np.asarray(beta, dtype=float))
    wells = [f.well_width for f in spec.functions if f.is_well]
    if wells:
        A = min(wells)
        # the well is the true support, so this is not a truncation
        return Alphabet.interval(-A, A, node_count, rule)

    def integrand(x):
        vals = spec.letter_values(np.array([x]))[:, 0]
        return 2.0 ** (-float(beta @ vals))

    B = 1.0
    while B < 1e6:
        inner = quad(integrand, -B, B, points=[0.0], limit=200)[0]
        tail = quad(integrand, B, np.inf, limit=200)[0] + quad(integrand, -np.inf, -B, limit=200)[0]
        if inner > 0 and tail <= tail_tol * inner:
            return Alphabet.interval(-B, B, node_count, rule, real_line=True)
        B *= 2.0
    flat = [j for j, b in enumerate(beta) if b == 0]
    raise DivergenceError("partition integral does not converge on the real line",
                          constraint=flat[0] if flat else None)
