"""Transfer operators for sliding-window distortion and their Perron eigenvalue.

For a window of size m the state is the last ``m - 1`` symbols and the
operator maps a state ``p`` to ``p[1:] + (x,)`` with weight
``2^{-beta . rho(p + (x,))}`` times the quadrature weight of x.  The
per-symbol growth of the partition integral is the spectral radius, so the
sliding-window bound uses ``log2 lambda(beta)`` where the single-letter
bound uses the log-partition function.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize
from scipy.sparse.csgraph import connected_components
from scipy.sparse.linalg import eigsh
from scipy.special import logsumexp

from .model import LN2, Alphabet, DistortionSpec, DomainError, SLBError, square_error, negcorr
from .phi import phi, phi_real_line

STATE_BUDGET = 4096
RESIDUAL_TOL = 1e-10


class SpectralError(SLBError, ArithmeticError):
    pass


class ReducibleError(SpectralError):
    def __init__(self, message: str, unreachable=None):
        super().__init__(message)
        self.unreachable = unreachable


def _state_vectors(N: int, length: int) -> np.ndarray:
    if length == 0:
        return np.zeros((1, 0), dtype=np.int64)
    ranks = np.arange(N**length, dtype=np.int64)
    powers = N ** np.arange(length - 1, -1, -1, dtype=np.int64)
    return (ranks[:, None] // powers) % N


@dataclass(frozen=True, eq=False)
class TransferOperator:
    """Log-entries of the operator plus the per-entry distortion vectors.

    ``log_entries[p, q]`` is ``-inf`` where no transition exists.  ``rho``
    has shape ``(k, S, S)`` (``(k, 1, N)`` letter values when m = 1).
    """

    log_entries: np.ndarray
    rho: np.ndarray
    beta: tuple[float, ...]
    window: int
    continuous: bool
    nodes: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)

    @property
    def state_dim(self) -> int:
        return self.log_entries.shape[0]

    @property
    def scale(self) -> float:
        return float(np.max(self.log_entries))

    def scaled(self) -> np.ndarray:
        """``exp(log_entries - scale)``; the true operator is this times ``e^scale``."""
        return np.exp(self.log_entries - self.scale)

    def matrix(self) -> np.ndarray:
        return np.exp(self.log_entries)

    def balanced(self, tol: float = 1e-10) -> tuple[np.ndarray, np.ndarray] | None:
        """A diagonal similarity ``d M d^-1`` that is symmetric, or None.

        ``d`` comes from the ratios of the first row and column; for a
        symmetric kernel under Nystrom this is the square root of the
        quadrature weights.
        """
        A = self.scaled()
        if self.state_dim == 1:
            return A, np.ones(1)
        if np.any(A[0] <= 0) or np.any(A[:, 0] <= 0):
            return None
        logd = 0.5 * (self.log_entries[0] - self.log_entries[:, 0])
        logd -= logd.max()
        B = np.exp(logd[:, None] + self.log_entries - logd[None, :] - self.scale)
        if np.max(np.abs(B - B.T)) > tol * np.max(np.abs(B)):
            return None
        return 0.5 * (B + B.T), np.exp(logd)


def window_table(alphabet: Alphabet, spec: DistortionSpec, budget: int = STATE_BUDGET) -> np.ndarray:
    """Distortion vectors of every (state, next symbol) window, shape ``(k, S, N)``."""
    m = spec.window
    vals = alphabet.nodes
    N = vals.size
    S = N ** (m - 1)
    if S > budget:
        raise DomainError(f"state dimension {S} exceeds the budget {budget}")
    states = _state_vectors(N, m - 1)
    windows = np.concatenate([np.broadcast_to(vals[states][:, None, :], (S, N, m - 1)),
                              np.broadcast_to(vals[None, :, None], (S, N, 1))], axis=2)
    return spec.window_values(windows)


def build_operator(alphabet: Alphabet, spec: DistortionSpec, beta, budget: int = STATE_BUDGET,
                   table: np.ndarray | None = None) -> TransferOperator:
    """Nystrom (or exact, for discrete alphabets) discretization of the window kernel.

    ``table`` may carry a precomputed :func:`window_table` when the same
    spec is evaluated at many tilts.
    """
    beta = np.atleast_1d(np.asarray(beta, dtype=float))
    if beta.shape != (spec.k,):
        raise DomainError(f"expected {spec.k} tilts")
    if np.any(beta < 0):
        raise DomainError("tilts must be nonnegative")
    m = spec.window
    vals, w = alphabet.nodes, alphabet.weights
    N = vals.size
    rho = window_table(alphabet, spec, budget) if table is None else table
    S = rho.shape[1]
    well = np.isinf(rho).any(axis=0)
    finite = np.where(np.isinf(rho), 0.0, rho)
    logK = -LN2 * np.tensordot(beta, finite, axes=1) + np.log(w)[None, :]
    logK = np.where(well, -np.inf, logK)
    args = (tuple(beta.tolist()), m, not alphabet.is_discrete, vals, w)
    if m == 1:
        return TransferOperator(np.array([[logsumexp(logK[0])]]), rho, *args)
    if m == 2:
        return TransferOperator(logK, rho, *args)
    target = (np.arange(S) % (N ** (m - 2)))[:, None] * N + np.arange(N)[None, :]
    L = np.full((S, S), -np.inf)
    R = np.full((spec.k, S, S), np.nan)
    rows = np.repeat(np.arange(S), N)
    L[rows, target.ravel()] = logK.ravel()
    R[:, rows, target.ravel()] = rho.reshape(spec.k, -1)
    return TransferOperator(L, R, *args)


@dataclass(frozen=True)
class SpectralResult:
    log_lambda: float  # natural log
    right: np.ndarray = field(repr=False)
    left: np.ndarray = field(repr=False)
    iterations: int
    residual: float
    rayleigh: float | None = None
    positive: bool = True

    @property
    def lam(self) -> float:
        return math.exp(self.log_lambda)

    @property
    def log_lambda_bits(self) -> float:
        return self.log_lambda / LN2


def check_irreducible(op: TransferOperator) -> None:
    support = np.isfinite(op.log_entries)
    n, labels = connected_components(support, directed=True, connection="strong")
    if n > 1:
        sizes = np.bincount(labels)
        main = int(np.argmax(sizes))
        bad = np.nonzero(labels != main)[0]
        raise ReducibleError(
            f"operator is reducible: {bad.size} states (first {bad[:5].tolist()}) are not strongly "
            f"connected to the main block", bad)


def _power(A: np.ndarray, v0: np.ndarray | None, tol: float, max_iter: int):
    v = np.ones(A.shape[0]) if v0 is None else np.array(v0, dtype=float)
    v /= np.max(v)
    res = math.inf
    shift = 0.0
    for it in range(1, max_iter + 1):
        Av = A @ v
        lam = float(np.max(Av))
        if lam <= 0:
            raise SpectralError("power iteration collapsed to zero")
        res = float(np.max(np.abs(Av - lam * v)) / lam)
        if res <= tol:
            return lam, v, it, res
        if it == max_iter // 2:
            shift = lam  # damps a periodic oscillation
        y = Av + shift * v
        v = y / np.max(y)
    raise SpectralError(f"power iteration did not converge: residual {res:.3g} after {max_iter} steps")


def spectral_radius(op: TransferOperator, tol: float = RESIDUAL_TOL, max_iter: int = 100_000,
                    v0=None, w0=None, cross_check: bool = True) -> SpectralResult:
    """Perron eigenvalue and right/left eigenvectors by power iteration.

    Symmetrizable operators are cross-checked against the largest Rayleigh
    quotient from a Lanczos solve.
    """
    check_irreducible(op)
    A = op.scaled()
    _, v, it_r, res = _power(A, v0, tol, max_iter)
    _, u, it_l, _ = _power(A.T, w0, tol, max_iter)
    # two-sided quotient: error quadratic in the eigenvector errors
    lam = float(u @ (A @ v)) / float(u @ v)
    rayleigh = None
    if cross_check and op.state_dim > 1:
        bal = op.balanced()
        if bal is not None:
            B = bal[0]
            if B.shape[0] > 2:
                ev = eigsh(B, k=1, which="LA", v0=v * bal[1], tol=1e-13)[0][0]
            else:
                ev = np.linalg.eigvalsh(B)[-1]
            rayleigh = float(math.log(ev) + op.scale)
            if abs(ev - lam) > 1e-9 * lam:
                raise SpectralError(f"Rayleigh cross-check failed: {ev!r} vs power iteration {lam!r}")
    return SpectralResult(math.log(lam) + op.scale, v, u, it_r + it_l, res, rayleigh,
                          bool(np.all(v > 0)))


def log2_lambda_gradient(op: TransferOperator, sr: SpectralResult) -> np.ndarray:
    """``d log2 lambda / d beta_j = -E[rho_j]`` under the Perron transition weights."""
    A = op.scaled()
    if op.window == 1:
        rho = op.rho[:, 0, :]
        finite = np.where(np.isinf(rho), 0.0, rho)
        logK = -LN2 * (np.array(op.beta) @ finite) + np.log(op.weights)
        logK = np.where(np.isinf(rho).any(axis=0), -np.inf, logK)
        return -(finite @ np.exp(logK - logsumexp(logK)))
    P = sr.left[:, None] * A * sr.right[None, :]
    P /= P.sum()
    rho = np.where(np.isfinite(op.log_entries)[None], op.rho, 0.0)
    return -np.tensordot(rho, P, axes=([1, 2], [0, 1]))


@dataclass(frozen=True)
class SlidingResult:
    bound: float | None
    inf_value: float
    beta_star: tuple[float, ...]
    log2_lambda: float
    converged: bool
    convexity_fallback: bool = False
    under_resolved: bool = False
    resolution_delta: float | None = None
    edge_mass: float = 0.0
    evaluations: int = 0


def _edge_mass(op: TransferOperator, sr: SpectralResult, frac: float = 0.02) -> float:
    """Perron marginal mass near the ends of a continuous interval (truncation check)."""
    if not op.continuous or op.window == 1:
        return 0.0
    pi = sr.left * sr.right
    pi = pi / pi.sum()
    z = op.nodes
    span = z.max() - z.min()
    near = (z <= z.min() + frac * span) | (z >= z.max() - frac * span)
    return float(pi[near].sum())


def _midpoint_convex(F, a, b, fa, fb, slack=1e-9) -> bool:
    fm = F(0.5 * (a + b))
    return fm <= 0.5 * (fa + fb) + slack * max(1.0, abs(fa), abs(fb))


def sliding_slb(alphabet: Alphabet, spec: DistortionSpec, D=None, h_rate: float | None = None,
                beta0=None, resolution_check: bool = True) -> SlidingResult:
    """``h - inf_{beta >= 0} [log2 lambda(beta) + beta . D]``.

    Single-letter specs reduce to the log-partition function and are
    delegated to :func:`slbkit.phi.phi`.  Otherwise a bounded quasi-Newton
    search (L-BFGS-B) runs on the convex objective, with a midpoint
    convexity test on successive iterates; a failed test switches to a
    dense grid scan.  Truncated continuous alphabets are re-checked with a
    doubled node count.
    """
    D = spec.resolve_levels(D)
    if spec.window == 1:
        res = phi(alphabet, spec, D)
        op = build_operator(alphabet, spec, np.where(np.isfinite(res.beta_star), res.beta_star, 0.0))
        bound = None if h_rate is None else h_rate - res.phi
        return SlidingResult(bound, res.phi, res.beta_star,
                             spectral_radius(op).log_lambda_bits, res.converged)

    cache: dict = {}
    warm = {"v": None, "w": None}
    table = window_table(alphabet, spec)

    def evaluate(b):
        key = tuple(np.round(b, 15))
        if key not in cache:
            op = build_operator(alphabet, spec, b, table=table)
            sr = spectral_radius(op, v0=warm["v"], w0=warm["w"], cross_check=False)
            warm["v"], warm["w"] = sr.right, sr.left
            g = log2_lambda_gradient(op, sr)
            cache[key] = (sr.log_lambda_bits + float(b @ D), g + D)
        return cache[key]

    def F(b):
        return evaluate(np.maximum(b, 0.0))[0]

    x0 = np.full(spec.k, 1.0) if beta0 is None else np.asarray(beta0, dtype=float)
    path = [x0.copy()]
    opt = minimize(lambda b: evaluate(np.maximum(b, 0.0))[:2], x0, jac=True, method="L-BFGS-B",
                   bounds=[(0.0, None)] * spec.k, callback=lambda xk: path.append(np.array(xk)),
                   options={"ftol": 1e-15, "gtol": 1e-10, "maxiter": 500})
    x = np.maximum(opt.x, 0.0)
    fallback = False
    for a, b in zip(path[:-1], path[1:]):
        if not _midpoint_convex(F, a, b, F(a), F(b)):
            fallback = True
            break
    if fallback:
        hi = 2.0 * np.maximum(x, 1.0)
        axes = [np.linspace(0.0, h, 41 if spec.k <= 2 else 9) for h in hi]
        grid = np.array(np.meshgrid(*axes, indexing="ij")).reshape(spec.k, -1).T
        x = min(grid, key=F)
        opt = minimize(lambda b: evaluate(np.maximum(b, 0.0))[:2], x, jac=True, method="L-BFGS-B",
                       bounds=[(0.0, None)] * spec.k, options={"ftol": 1e-15, "gtol": 1e-10})
        x = np.maximum(opt.x, 0.0)
    value = evaluate(x)[0]
    op = build_operator(alphabet, spec, x, table=table)
    sr = spectral_radius(op, v0=warm["v"], w0=warm["w"])
    edge = _edge_mass(op, sr)
    delta = None
    under = edge > 1e-10
    if resolution_check and not alphabet.is_discrete:
        finer = Alphabet.interval(alphabet.lower, alphabet.upper, 2 * alphabet.node_count - 1,
                                  alphabet.rule if alphabet.rule == "simpson" else "gauss",
                                  alphabet.real_line)
        if alphabet.rule == "gauss":
            finer = Alphabet.interval(alphabet.lower, alphabet.upper, 2 * alphabet.node_count, "gauss",
                                      alphabet.real_line)
        if finer.node_count ** (spec.window - 1) <= STATE_BUDGET:
            fine = spectral_radius(build_operator(finer, spec, x), cross_check=False)
            delta = abs(fine.log_lambda_bits - sr.log_lambda_bits)
            under = under or delta > 1e-4
    bound = None if h_rate is None else h_rate - value
    return SlidingResult(bound, value, tuple(x.tolist()), sr.log_lambda_bits, bool(opt.success),
                         fallback, under, delta, edge, len(cache))


@dataclass(frozen=True)
class GaussianCheck:
    residual: float
    inf_value: float
    closed_form: float
    penalty: float
    closed_penalty: float
    result: SlidingResult


def gaussian_lag1_spec(D: float, theta: float) -> DistortionSpec:
    """Mean-square level D plus lag-one correlation at least ``theta * D``."""
    return DistortionSpec((square_error(), negcorr()), (D, -theta * D))


def gaussian_example_check(D: float = 1.0, theta: float = 0.5, node_count: int | None = None,
                           half_width: float = 10.0) -> GaussianCheck:
    """Compare the numeric sliding-window value with ``1/2 log2[2 pi e D (1 - theta^2)]``.

    The correlation level is ``-theta * D`` so that theta is the lag-one
    correlation coefficient; at D = 1 this is the level ``-theta``.
    """
    if D <= 0 or not 0 <= theta < 1:
        raise DomainError("need D > 0 and 0 <= theta < 1")
    if node_count is None:
        node_count = 1601 if theta >= 0.8 else 801
    B = half_width * math.sqrt(D)
    alphabet = Alphabet.interval(-B, B, node_count, real_line=True)
    spec = gaussian_lag1_spec(D, theta)
    s1 = (1 + theta**2) / (2 * D * (1 - theta**2))
    beta0 = np.array([0.5 * s1, 0.5 * theta / (D * (1 - theta**2))]) / LN2
    res = sliding_slb(alphabet, spec, h_rate=None, beta0=beta0)
    closed = 0.5 * math.log2(2 * math.pi * math.e * D * (1 - theta**2))
    plain, _ = phi_real_line(DistortionSpec.single(square_error()), [D])
    return GaussianCheck(abs(res.inf_value - closed), res.inf_value, closed,
                         plain.phi - res.inf_value, 0.5 * math.log2(1 / (1 - theta**2)), res)
