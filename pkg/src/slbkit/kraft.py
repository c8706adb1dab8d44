"""Explicit codes and exhaustive certification of the extended Kraft inequalities.

Codes live on the group Z_r (symbols ``0..r-1``), so the error ``u - v`` is
taken modulo r and stays in the alphabet.  All vectors are stored as
symbol indices.  Exact sums enumerate every source vector; a seeded
sampling estimator exists for larger problems but never certifies.

The lemma identifiers are ``"ud"``, ``"one-to-one"``, ``"semifaithful"``,
``"fixed-rate"`` and ``"fs-encoder"``.
"""

from __future__ import annotations

import heapq
import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .model import Alphabet, DistortionSpec, DomainError, SLBError
from .phi import log_partition

BUDGET = 2**20
_CHUNK = 2**14

LEMMAS = ("ud", "one-to-one", "semifaithful", "fixed-rate", "fs-encoder")
REF_LABELS = {name: f"kraft-{name}" for name in LEMMAS}


class KraftError(SLBError):
    pass


class BudgetExceededError(KraftError, ValueError):
    """Exhaustive enumeration is too large; use the sampling estimator instead."""


class ConstraintViolationError(KraftError, ValueError):
    def __init__(self, message: str, witness=None):
        super().__init__(message)
        self.witness = witness


class NotLosslessError(KraftError, ValueError):
    """The finite-state encoder is not information lossless."""

    def __init__(self, message: str, witness=None):
        super().__init__(message)
        self.witness = witness


class CoverError(KraftError, RuntimeError):
    pass


# ---------------------------------------------------------------------------
# Codes
# ---------------------------------------------------------------------------

def _require_group(alphabet: Alphabet) -> int:
    if not alphabet.is_discrete or alphabet.symbols != tuple(float(i) for i in range(alphabet.size)):
        raise DomainError("block codes need the modular alphabet Z_r with symbols 0..r-1")
    return alphabet.size


def all_vectors(r: int, n: int, start: int = 0, stop: int | None = None) -> np.ndarray:
    """Rows ``start..stop`` of the lexicographic listing of ``Z_r^n``."""
    stop = r**n if stop is None else stop
    ranks = np.arange(start, stop, dtype=np.int64)
    powers = r ** np.arange(n - 1, -1, -1, dtype=np.int64)
    return (ranks[:, None] // powers) % r


def vector_rank(v: np.ndarray, r: int) -> np.ndarray:
    v = np.asarray(v, dtype=np.int64)
    powers = r ** np.arange(v.shape[-1] - 1, -1, -1, dtype=np.int64)
    return v @ powers


@dataclass(frozen=True, eq=False)
class BlockCode:
    """A block quantizer followed by a lossless code for its reproductions.

    ``assignment[rank(u)]`` is the codeword index used for source vector u;
    when it is None the encoder picks the nearest codeword under
    ``encode_spec`` (lowest index on ties).
    """

    n: int
    alphabet: Alphabet
    codebook: np.ndarray
    lengths: np.ndarray
    kind: str
    assignment: np.ndarray | None = None
    encode_spec: DistortionSpec | None = None
    rate: float | None = None

    def __post_init__(self):
        r = _require_group(self.alphabet)
        cb = np.atleast_2d(np.asarray(self.codebook, dtype=np.int64))
        object.__setattr__(self, "codebook", cb)
        object.__setattr__(self, "lengths", np.asarray(self.lengths, dtype=np.int64))
        if cb.shape[1] != self.n or cb.min() < 0 or cb.max() >= r:
            raise DomainError("codebook vectors must lie in Z_r^n")
        if self.lengths.shape != (cb.shape[0],) or np.any(self.lengths < 0):
            raise DomainError("need one nonnegative length per codeword")
        if self.kind not in ("ud", "one-to-one", "fixed-rate"):
            raise DomainError(f"unknown code class {self.kind!r}")
        if self.assignment is None and self.encode_spec is None:
            raise DomainError("give an assignment table or an encode_spec")
        if self.assignment is not None:
            a = np.asarray(self.assignment, dtype=np.int64)
            if a.shape != (r**self.n,) or a.min() < 0 or a.max() >= cb.shape[0]:
                raise DomainError("assignment must map every source vector to a codeword")
            object.__setattr__(self, "assignment", a)

    @property
    def size(self) -> int:
        return self.codebook.shape[0]

    def kraft_sum(self) -> float:
        return math.fsum(2.0 ** -float(L) for L in self.lengths)

    def class_certificate(self) -> tuple[bool, str]:
        """Check that the length function is feasible for the declared class."""
        if self.kind == "ud":
            s = self.kraft_sum()
            return s <= 1.0, f"Kraft sum {s:.12g}"
        counts = np.bincount(self.lengths)
        if self.kind == "one-to-one":
            bad = [ell for ell, c in enumerate(counts) if c > 2**ell]
            return not bad, "feasible" if not bad else f"more than 2^{bad[0]} codewords of length {bad[0]}"
        L = math.ceil(self.n * self.rate - 1e-12)
        ok = bool(np.all(self.lengths == L)) and self.size <= 2**L
        return ok, f"fixed length {L}"

    def encode(self, u: np.ndarray) -> np.ndarray:
        """Codeword indices for the source vectors in the rows of ``u``."""
        r = self.alphabet.size
        if self.assignment is not None:
            return self.assignment[vector_rank(u, r)]
        table = self.encode_spec.letter_values(self.alphabet.nodes)
        diff = np.mod(u[:, None, :] - self.codebook[None, :, :], r)
        d = table[:, diff].sum(axis=-1).sum(axis=0)
        return np.argmin(d, axis=1)

    def encode_all(self) -> np.ndarray:
        if self.assignment is not None:
            return self.assignment
        return self.encode(all_vectors(self.alphabet.size, self.n))


def huffman_lengths(probs) -> np.ndarray:
    """Binary Huffman code lengths (a single symbol gets length 1)."""
    p = np.asarray(probs, dtype=float)
    if p.size == 1:
        return np.ones(1, dtype=np.int64)
    heap = [(float(w), i, (i,)) for i, w in enumerate(p)]
    heapq.heapify(heap)
    lengths = np.zeros(p.size, dtype=np.int64)
    tag = p.size
    while len(heap) > 1:
        w1, _, a = heapq.heappop(heap)
        w2, _, b = heapq.heappop(heap)
        for i in a + b:
            lengths[i] += 1
        heapq.heappush(heap, (w1 + w2, tag, a + b))
        tag += 1
    return lengths


def enumerative_lengths(count: int) -> np.ndarray:
    """Lengths ``floor(log2(i + 1))`` of the i-th shortest binary string, from the empty one."""
    return np.array([(i + 1).bit_length() - 1 for i in range(count)], dtype=np.int64)


def greedy_cover(alphabet: Alphabet, n: int, spec: DistortionSpec, D: float,
                 budget: int = 2**12, max_rounds: int | None = None) -> np.ndarray:
    """Greedy set cover of ``Z_r^n`` by distortion balls of radius ``nD``."""
    r = _require_group(alphabet)
    N = r**n
    if N > budget:
        raise BudgetExceededError(f"cover needs {N} points, budget {budget}")
    pts = all_vectors(r, n)
    table = spec.letter_values(alphabet.nodes)
    covers = np.zeros((N, N), dtype=bool)
    for i in range(N):
        covers[i] = np.all(table[:, np.mod(pts - pts[i], r)].sum(axis=-1) <= n * D + 1e-9, axis=0)
    uncovered = np.ones(N, dtype=bool)
    chosen = []
    rounds = max_rounds or N
    while uncovered.any():
        if len(chosen) >= rounds:
            raise CoverError(f"cover not complete after {rounds} balls")
        gain = covers[:, uncovered].sum(axis=1)
        best = int(np.argmax(gain))
        if gain[best] == 0:
            raise CoverError("no ball covers the remaining points")
        chosen.append(best)
        uncovered &= ~covers[best]
    return pts[chosen]


def build_code(kind: str, *, alphabet: Alphabet, n: int, codebook=None, probabilities=None,
               assignment=None, encode_spec: DistortionSpec | None = None, rate: float | None = None,
               spec: DistortionSpec | None = None, D: float | None = None,
               cover_budget: int = 2**12) -> BlockCode:
    """Construct one of the standard test codes.

    ``kind`` is one of ``shannon-lengths``, ``one-to-one-enumerative``,
    ``fixed-rate`` or ``d-semifaithful-cover``.
    """
    r = _require_group(alphabet)
    if kind == "d-semifaithful-cover":
        if spec is None or D is None:
            raise DomainError("a cover needs a distortion spec and a level D")
        cb = greedy_cover(alphabet, n, spec, D, budget=cover_budget)
        lengths = np.full(len(cb), max(1, math.ceil(math.log2(len(cb)))))
        code = BlockCode(n, alphabet, cb, lengths, "ud", encode_spec=spec)
        u = all_vectors(r, n)
        code = BlockCode(n, alphabet, cb, lengths, "ud", assignment=code.encode(u))
        check_semifaithful(code, spec, D)
        return code
    if codebook is None:
        raise DomainError(f"{kind} needs a codebook")
    cb = np.atleast_2d(np.asarray(codebook, dtype=np.int64))
    if kind == "shannon-lengths":
        p = np.asarray(probabilities, dtype=float)
        if p.shape != (len(cb),) or np.any(p <= 0):
            raise DomainError("need one positive probability per codeword")
        p = p / p.sum()
        lengths = np.ceil(-np.log2(p) - 1e-12).astype(np.int64)
        return BlockCode(n, alphabet, cb, lengths, "ud", assignment, encode_spec)
    if kind == "one-to-one-enumerative":
        return BlockCode(n, alphabet, cb, enumerative_lengths(len(cb)), "one-to-one", assignment, encode_spec)
    if kind == "fixed-rate":
        if rate is None or rate <= 0:
            raise DomainError("fixed-rate code needs a positive rate")
        L = math.ceil(n * rate - 1e-12)
        if len(cb) > 2**L:
            raise DomainError(f"{len(cb)} codewords do not fit in {L} bits")
        return BlockCode(n, alphabet, cb, np.full(len(cb), L), "fixed-rate", assignment, encode_spec, rate)
    raise DomainError(f"unknown code kind {kind!r}")


# ---------------------------------------------------------------------------
# Kraft sums
# ---------------------------------------------------------------------------

def _error_distortion(code: BlockCode, spec: DistortionSpec, u: np.ndarray, idx: np.ndarray) -> np.ndarray:
    """Total distortion per function, shape (k, N)."""
    if spec.window != 1:
        raise DomainError("block Kraft sums need single-letter distortion functions")
    table = spec.letter_values(code.alphabet.nodes)
    diff = np.mod(u - code.codebook[idx], code.alphabet.size)
    return table[:, diff].sum(axis=-1)


def _enumerate(total: int, work, jobs: int) -> list:
    starts = range(0, total, _CHUNK)
    if jobs > 1:
        with ThreadPoolExecutor(jobs) as ex:
            return list(ex.map(work, starts))
    return [work(s) for s in starts]


def kraft_z(code: BlockCode, alpha: float, beta, spec: DistortionSpec, *, D: float | None = None,
            budget: int = BUDGET, jobs: int = 1) -> float:
    """Exact extended Kraft sum by enumeration of every source vector.

    With ``D`` given, the sum is the semifaithful one: only vectors with
    total distortion at most ``nD`` contribute, and the exponent has no
    distortion term.  Chunks are fixed-size, so the result does not depend
    on ``jobs``.
    """
    r = code.alphabet.size
    total = r**code.n
    if total > budget:
        raise BudgetExceededError(
            f"{total} source vectors exceed the enumeration budget {budget}; use kraft_z_sampled")
    beta = np.atleast_1d(np.asarray(beta, dtype=float))
    lengths = code.lengths.astype(float)

    def work(start):
        u = all_vectors(r, code.n, start, min(start + _CHUNK, total))
        idx = code.encode(u)
        rho = _error_distortion(code, spec, u, idx)
        if D is None:
            expo = -alpha * lengths[idx] - beta @ rho
        else:
            inside = np.all(rho <= code.n * D + 1e-9, axis=0)
            expo = np.where(inside, -alpha * lengths[idx], -np.inf)
        return math.fsum(np.exp2(expo))

    return math.fsum(_enumerate(total, work, jobs))


def kraft_z_sampled(code: BlockCode, alpha: float, beta, spec: DistortionSpec, *,
                    samples: int = 100_000, seed: int = 0) -> tuple[float, float]:
    """Uniform-sampling estimate of the Kraft sum and its 95% half-width. Not a certificate."""
    r = code.alphabet.size
    rng = np.random.default_rng(seed)
    beta = np.atleast_1d(np.asarray(beta, dtype=float))
    u = rng.integers(0, r, size=(samples, code.n))
    idx = code.encode(u)
    rho = _error_distortion(code, spec, u, idx)
    vals = np.exp2(-alpha * code.lengths[idx] - beta @ rho) * float(r) ** code.n
    return float(vals.mean()), float(1.96 * vals.std(ddof=1) / math.sqrt(samples))


def check_semifaithful(code: BlockCode, spec: DistortionSpec, D: float) -> None:
    """Raise with a witness if some source vector is reproduced with distortion above ``nD``."""
    r = code.alphabet.size
    total = r**code.n
    for start in range(0, total, _CHUNK):
        u = all_vectors(r, code.n, start, min(start + _CHUNK, total))
        idx = code.encode(u)
        rho = _error_distortion(code, spec, u, idx)
        bad = np.nonzero(np.any(rho > code.n * D + 1e-9, axis=0))[0]
        if bad.size:
            i = bad[0]
            witness = (tuple(u[i].tolist()), tuple(code.codebook[idx[i]].tolist()), rho[:, i].tolist())
            raise ConstraintViolationError(
                f"source {witness[0]} reproduced as {witness[1]} with distortion {witness[2]} > {code.n * D:g}",
                witness)


@dataclass(frozen=True)
class KraftReport:
    """Kraft sum against its bound.

    ``uncorrected_bound`` omits the ``2^(alpha-1)`` factor that a zero-length
    output forces; it is kept for comparison and is not a certificate.
    """

    lemma: str
    z_value: float
    bound: float
    params: dict = field(default_factory=dict)
    uncorrected_bound: float | None = None
    empty_output: bool = False
    certified: bool = True

    @property
    def slack(self) -> float:
        return self.bound - self.z_value

    @property
    def uncorrected_slack(self) -> float | None:
        return None if self.uncorrected_bound is None else self.uncorrected_bound - self.z_value

    @property
    def passed(self) -> bool:
        return self.slack >= 0

    @property
    def ref(self) -> str:
        return REF_LABELS[self.lemma]


def _log2_letter_sum(alphabet: Alphabet, spec: DistortionSpec, beta) -> float:
    return log_partition(alphabet, spec, beta).value


def _one_to_one_bound(base: float, alpha: float, has_empty: bool) -> tuple[float, float]:
    """(bound actually valid, bound without the zero-length term)."""
    denom = 2.0 ** (alpha - 1) - 1.0
    plain = base / denom
    return (plain * 2.0 ** (alpha - 1) if has_empty else plain), plain


def verify_lemma(code: BlockCode, alpha: float, beta, spec: DistortionSpec, *, D: float | None = None,
                 lemma: str | None = None, budget: int = BUDGET, jobs: int = 1) -> KraftReport:
    """Compute the Kraft sum for ``code`` and compare it with the matching lemma bound.

    ``lemma`` defaults to the code class; pass ``"semifaithful"`` (with
    ``D``) to check the ball-volume bound of a pointwise-constrained UD code.
    """
    lemma = lemma or code.kind
    if lemma not in LEMMAS[:4]:
        raise DomainError(f"unknown block-code lemma {lemma!r}")
    ok, why = code.class_certificate()
    if not ok:
        raise KraftError(f"code fails its {code.kind} certificate: {why}")
    beta = np.atleast_1d(np.asarray(beta, dtype=float))
    n = code.n
    params = {"alpha": alpha, "beta": tuple(beta.tolist()), "n": n}
    if lemma == "fixed-rate":
        if code.kind != "fixed-rate" or alpha < 0:
            raise DomainError("fixed-rate lemma needs a fixed-rate code and alpha >= 0")
    elif alpha <= 1:
        raise DomainError("alpha must exceed 1")
    if lemma == "semifaithful":
        if D is None:
            raise DomainError("semifaithful lemma needs a distortion level D")
        check_semifaithful(code, spec, D)
        z = kraft_z(code, alpha, beta, spec, D=D, budget=budget, jobs=jobs)
        ball = _ball_count(code.alphabet, spec, n, D)
        params["D"] = D
        return KraftReport("semifaithful", z, ball, params, ball)
    log2P = _log2_letter_sum(code.alphabet, spec, beta)
    z = kraft_z(code, alpha, beta, spec, budget=budget, jobs=jobs)
    base = 2.0 ** (n * log2P)
    if lemma == "ud":
        return KraftReport("ud", z, base, params, base)
    if lemma == "one-to-one":
        has_empty = bool(np.any(code.lengths[np.unique(code.encode_all())] == 0))
        bound, plain = _one_to_one_bound(base, alpha, has_empty)
        return KraftReport("one-to-one", z, bound, params, plain, empty_output=has_empty)
    L = int(code.lengths[0])
    params["R"] = L / n
    bound = 2.0 ** ((1 - alpha) * L) * base
    return KraftReport("fixed-rate", z, bound, params, bound)


def _ball_count(alphabet: Alphabet, spec: DistortionSpec, n: int, D: float) -> float:
    """Number of error vectors in Z_r^n with total distortion at most ``nD`` (per function)."""
    table = spec.letter_values(alphabet.nodes)
    # distribution of the distortion vector over n letters by convolution on exact values
    counts = {(0.0,) * spec.k: 1}
    for _ in range(n):
        nxt: dict = {}
        for key, c in counts.items():
            for z in range(alphabet.size):
                new = tuple(round(a + b, 9) for a, b in zip(key, table[:, z]))
                if all(x <= n * D + 1e-9 for x in new):
                    nxt[new] = nxt.get(new, 0) + c
        counts = nxt
    return float(sum(counts.values()))


# ---------------------------------------------------------------------------
# Finite-state encoders
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FSEncoder:
    """A finite-state encoder: ``output[s][v]`` is a bit string, ``next_state[s][v]`` a state."""

    output: tuple[tuple[str, ...], ...]
    next_state: tuple[tuple[int, ...], ...]
    initial: int = 0

    def __post_init__(self):
        out = tuple(tuple(row) for row in self.output)
        nxt = tuple(tuple(int(x) for x in row) for row in self.next_state)
        object.__setattr__(self, "output", out)
        object.__setattr__(self, "next_state", nxt)
        s = len(out)
        if s == 0 or len(nxt) != s:
            raise DomainError("output and next-state tables need one row per state")
        r = len(out[0])
        for row_o, row_n in zip(out, nxt):
            if len(row_o) != r or len(row_n) != r:
                raise DomainError("every state needs an entry for every input symbol")
            if any(set(w) - {"0", "1"} for w in row_o):
                raise DomainError("outputs must be binary strings")
            if any(not 0 <= x < s for x in row_n):
                raise DomainError("next state out of range")
        if not 0 <= self.initial < s:
            raise DomainError("initial state out of range")

    @property
    def states(self) -> int:
        return len(self.output)

    @property
    def alphabet_size(self) -> int:
        return len(self.output[0])

    def run(self, v, state: int | None = None) -> tuple[str, list[int]]:
        """Output string and the state sequence ``sigma_1..sigma_{n+1}``."""
        sigma = self.initial if state is None else state
        states = [sigma]
        out = []
        for x in v:
            out.append(self.output[sigma][x])
            sigma = self.next_state[sigma][x]
            states.append(sigma)
        return "".join(out), states

    def single_step_witness(self):
        """A pair of inputs with equal (output, next state) from one state, or None."""
        for s in range(self.states):
            seen = {}
            for v in range(self.alphabet_size):
                key = (self.output[s][v], self.next_state[s][v])
                if key in seen:
                    return s, (seen[key],), (v,)
                seen[key] = v
        return None

    def block_witness(self, ell: int):
        """Two inputs of length ``ell`` from one state with equal output and final state, or None.

        Breadth-first search over pairs of runs that split at their first
        symbol.  A node is (state, state, pending output, which run is
        ahead); a collision is a node with equal states and nothing pending.
        Any collision shorter than ``ell`` extends to length ``ell`` by
        feeding both runs the same symbols.
        """
        r = self.alphabet_size
        level = {}
        for sigma in range(self.states):
            for a in range(r):
                for b in range(a + 1, r):
                    node = self._advance((sigma, sigma, "", 0), a, b)
                    if node is not None and node not in level:
                        level[node] = (sigma, (a,), (b,))
        for depth in range(1, ell + 1):
            for node, (sigma, x, y) in level.items():
                if node[0] == node[1] and node[2] == "":
                    pad = tuple([0] * (ell - depth))
                    return sigma, x + pad, y + pad
            if depth == ell:
                break
            nxt = {}
            for node, (sigma, x, y) in level.items():
                for a in range(r):
                    for b in range(r):
                        child = self._advance(node, a, b)
                        if child is not None and child not in nxt:
                            nxt[child] = (sigma, x + (a,), y + (b,))
            level = nxt
        return None

    def _advance(self, node, a, b):
        p, q, lag, side = node
        o1, o2 = self.output[p][a], self.output[q][b]
        s1, s2 = (lag + o1, o2) if side == 0 else (o1, lag + o2)
        if s1.startswith(s2):
            return self.next_state[p][a], self.next_state[q][b], s1[len(s2):], 0
        if s2.startswith(s1):
            return self.next_state[p][a], self.next_state[q][b], s2[len(s1):], 1 if len(s2) > len(s1) else 0
        return None

    def check_lossless(self, ell: int) -> None:
        w = self.single_step_witness()
        if w is None:
            w = self.block_witness(ell)
        if w is not None:
            raise NotLosslessError(
                f"from state {w[0]} the inputs {w[1]} and {w[2]} give the same output and final state", w)


@dataclass(frozen=True, eq=False)
class BlockQuantizer:
    """Maps each block ``w^m`` to ``codebook[assignment[rank(w)]]``."""

    m: int
    r: int
    codebook: np.ndarray
    assignment: np.ndarray

    def __post_init__(self):
        cb = np.atleast_2d(np.asarray(self.codebook, dtype=np.int64))
        a = np.asarray(self.assignment, dtype=np.int64)
        if cb.shape[1] != self.m or a.shape != (self.r**self.m,) or a.max() >= len(cb):
            raise DomainError("quantizer tables have inconsistent shapes")
        object.__setattr__(self, "codebook", cb)
        object.__setattr__(self, "assignment", a)

    @classmethod
    def identity(cls, r: int, m: int = 1) -> "BlockQuantizer":
        return cls(m, r, all_vectors(r, m), np.arange(r**m))

    def __call__(self, w: np.ndarray) -> np.ndarray:
        w = np.asarray(w, dtype=np.int64)
        blocks = w.reshape(*w.shape[:-1], -1, self.m)
        q = self.codebook[self.assignment[vector_rank(blocks, self.r)]]
        return q.reshape(w.shape)


def verify_lemma5(enc: FSEncoder, quantizer: BlockQuantizer, ell: int, alpha: float, beta,
                  spec: DistortionSpec, alphabet: Alphabet, budget: int = BUDGET) -> KraftReport:
    """Exhaustive Kraft sum over start states and ``ell``-blocks for an FS encoder."""
    r = _require_group(alphabet)
    if enc.alphabet_size != r or quantizer.r != r:
        raise DomainError("encoder, quantizer and alphabet sizes differ")
    if ell < 1 or ell % quantizer.m:
        raise DomainError("ell must be a positive multiple of the quantizer block")
    if alpha <= 1:
        raise DomainError("alpha must exceed 1")
    s = enc.states
    if s * r**ell > budget:
        raise BudgetExceededError(f"{s * r**ell} terms exceed the enumeration budget {budget}")
    enc.check_lossless(ell)
    beta = np.atleast_1d(np.asarray(beta, dtype=float))
    w = all_vectors(r, ell)
    v = quantizer(w)
    table = spec.letter_values(alphabet.nodes)
    rho = table[:, np.mod(w - v, r)].sum(axis=-1)
    dist_term = beta @ rho
    out_len = np.array([[len(o) for o in row] for row in enc.output])
    nxt = np.array(enc.next_state)
    terms = []
    has_empty = False
    for sigma in range(s):
        state = np.full(len(w), sigma)
        length = np.zeros(len(w), dtype=np.int64)
        for t in range(ell):
            length += out_len[state, v[:, t]]
            state = nxt[state, v[:, t]]
        has_empty |= bool(np.any(length == 0))
        terms.append(math.fsum(np.exp2(-alpha * length - dist_term)))
    z = math.fsum(terms)
    base = s * s * 2.0 ** (ell * _log2_letter_sum(alphabet, spec, beta))
    bound, plain = _one_to_one_bound(base, alpha, has_empty)
    params = {"alpha": alpha, "beta": tuple(beta.tolist()), "ell": ell, "s": s, "m": quantizer.m}
    return KraftReport("fs-encoder", z, bound, params, plain, empty_output=has_empty)


# ---------------------------------------------------------------------------
# Seeded certification campaigns
# ---------------------------------------------------------------------------

ALPHAS = (1.1, 1.5, 2.0)
BETAS = (0.0, 0.25, 0.5, 1.0, 2.0, 4.0)


def _random_partition_code(rng, r, n):
    N = r**n
    M = int(rng.integers(1, min(N, 64) + 1))
    cb = all_vectors(r, n)[rng.choice(N, size=M, replace=False)]
    assignment = rng.integers(0, M, size=N)
    assignment[rng.permutation(N)[:M]] = np.arange(M)  # every codeword used
    return cb, assignment


def random_fs_encoder(rng, r: int, states: int, ell: int, max_tries: int = 200) -> FSEncoder:
    """Draw a random information-lossless encoder (rejection sampling on the IL check)."""
    words = ["", "0", "1", "00", "01", "10", "11", "000", "111"]
    for _ in range(max_tries):
        out, nxt = [], []
        for _ in range(states):
            out.append(tuple(words[i] for i in rng.integers(0, len(words), size=r)))
            nxt.append(tuple(int(x) for x in rng.integers(0, states, size=r)))
        enc = FSEncoder(tuple(out), tuple(nxt))
        if enc.single_step_witness() is None and enc.block_witness(ell) is None:
            return enc
    raise KraftError("could not draw a lossless encoder")


def _trial(lemma: str, rng, r: int, alphabet: Alphabet, spec: DistortionSpec, max_n: int) -> KraftReport:
    alpha = float(rng.choice(ALPHAS))
    beta = float(rng.choice(BETAS))
    if lemma == "ud":
        n = int(rng.integers(1, max_n + 1))
        cb, a = _random_partition_code(rng, r, n)
        p = np.bincount(a, minlength=len(cb)) / len(a)
        code = BlockCode(n, alphabet, cb, huffman_lengths(p), "ud", a)
        return verify_lemma(code, alpha, beta, spec)
    if lemma == "one-to-one":
        n = int(rng.integers(1, max_n + 1))
        cb, a = _random_partition_code(rng, r, n)
        code = build_code("one-to-one-enumerative", alphabet=alphabet, n=n, codebook=cb, assignment=a)
        return verify_lemma(code, alpha, beta, spec)
    if lemma == "semifaithful":
        n = int(rng.integers(1, min(max_n, 10) + 1))
        D = int(rng.integers(0, n)) / n
        code = build_code("d-semifaithful-cover", alphabet=alphabet, n=n, spec=spec, D=D, cover_budget=2**10)
        if rng.random() < 0.5:
            p = np.bincount(code.assignment, minlength=code.size) / len(code.assignment)
            code = BlockCode(n, alphabet, code.codebook, huffman_lengths(p), "ud", code.assignment)
        return verify_lemma(code, alpha, beta, spec, D=D, lemma="semifaithful")
    if lemma == "fixed-rate":
        n = int(rng.integers(1, max_n + 1))
        R = float(rng.integers(1, n + 1)) / n * float(rng.choice((0.5, 1.0)))
        L = math.ceil(n * R - 1e-12)
        M = int(rng.integers(1, min(2**L, r**n, 64) + 1))
        cb = all_vectors(r, n)[rng.choice(r**n, size=M, replace=False)]
        code = build_code("fixed-rate", alphabet=alphabet, n=n, codebook=cb, rate=R, encode_spec=spec)
        return verify_lemma(code, float(rng.choice((0.0, 0.5) + ALPHAS)), beta, spec)
    if lemma == "fs-encoder":
        m = int(rng.choice((1, 2)))
        ell = m * int(rng.integers(1, max_n // m + 1))
        enc = random_fs_encoder(rng, r, int(rng.integers(2, 5)), ell)
        M = int(rng.integers(1, r**m + 1))
        q = BlockQuantizer(m, r, all_vectors(r, m)[rng.choice(r**m, size=M, replace=False)],
                           rng.integers(0, M, size=r**m))
        return verify_lemma5(enc, q, ell, alpha, beta, spec, alphabet)
    raise DomainError(f"unknown lemma {lemma!r}")


@dataclass(frozen=True)
class CampaignRow:
    trial: int
    seed: int
    report: KraftReport | None
    error: str | None = None


def run_campaign(lemma: str, trials: int, seed: int = 0, r: int = 2, max_n: int = 10,
                 jobs: int = 1) -> list[CampaignRow]:
    """Seeded randomized certification of one lemma on Z_r with Hamming distortion.

    Trial i draws from its own child of ``SeedSequence(seed)``, so results
    are the same for any ``jobs``.  Errors are captured per trial.
    """
    from .model import hamming

    alphabet = Alphabet.modular(r)
    spec = DistortionSpec.single(hamming())
    children = np.random.SeedSequence(seed).spawn(trials)

    def one(i):
        try:
            rep = _trial(lemma, np.random.default_rng(children[i]), r, alphabet, spec, max_n)
            return CampaignRow(i, seed, rep)
        except SLBError as exc:
            return CampaignRow(i, seed, None, f"{type(exc).__name__}: {exc}")

    if jobs > 1:
        with ThreadPoolExecutor(jobs) as ex:
            return list(ex.map(one, range(trials)))
    return [one(i) for i in range(trials)]
