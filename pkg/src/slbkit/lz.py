"""LZ78 parsing and coding, finite-state encoder runs, and the individual-sequence bound."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .kraft import BlockQuantizer, FSEncoder
from .model import Alphabet, DistortionSpec, DomainError, LengthError, hamming
from .phi import phi


# ---------------------------------------------------------------------------
# LZ78
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LZParse:
    phrases: tuple[tuple[int, ...], ...]
    # phrase i (1-based) = phrase pointers[i-1] followed by symbol; pointer 0 is the empty phrase
    pointers: tuple[int, ...] = field(repr=False)
    symbols: tuple[int, ...] = field(repr=False)
    last_is_repeat: bool = False

    @property
    def c(self) -> int:
        return len(self.phrases)

    def joined(self) -> tuple[int, ...]:
        return tuple(x for p in self.phrases for x in p)


def lz78_parse(u) -> LZParse:
    """Incremental parsing; a trailing phrase already in the dictionary still counts."""
    trie: dict[tuple[int, int], int] = {}
    phrases, pointers, symbols = [], [], []
    node, start = 0, 0
    u = [int(x) for x in u]
    for i, x in enumerate(u):
        nxt = trie.get((node, x))
        if nxt is None:
            trie[(node, x)] = len(phrases) + 1
            phrases.append(tuple(u[start:i + 1]))
            pointers.append(node)
            symbols.append(x)
            node, start = 0, i + 1
        else:
            node = nxt
    repeat = start < len(u)
    if repeat:
        # the tail equals a dictionary phrase; code it as its parent plus its last symbol
        tail = tuple(u[start:])
        parent = 0
        for x in tail[:-1]:
            parent = trie[(parent, x)]
        phrases.append(tail)
        pointers.append(parent)
        symbols.append(tail[-1])
    return LZParse(tuple(phrases), tuple(pointers), tuple(symbols), repeat)


def lz78_length_bound(c: int, r: int) -> float:
    """Upper bound ``(c + 1) log2(2 r (c + 1))`` on the LZ78 code length in bits."""
    return (c + 1) * math.log2(2 * r * (c + 1))


def normalized_complexity(c: int, n: int) -> float:
    """``c log2(c) / n``."""
    if n == 0 or c <= 1:
        return 0.0
    return c * math.log2(c) / n


def lz78_code_length(c: int, r: int) -> int:
    """Exact length of :func:`lz78_encode` output: phrase i costs ``ceil(log2(i r))`` bits."""
    return sum((i * r - 1).bit_length() for i in range(1, c + 1))


def lz78_encode(u, r: int) -> str:
    parse = lz78_parse(u)
    out = []
    for i, (p, x) in enumerate(zip(parse.pointers, parse.symbols), start=1):
        width = (i * r - 1).bit_length()
        out.append(format(p * r + x, f"0{width}b") if width else "")
    return "".join(out)


def lz78_decode(bits: str, r: int) -> list[int]:
    phrases: list[tuple[int, ...]] = [()]
    out: list[int] = []
    pos, i = 0, 1
    while pos < len(bits):
        width = (i * r - 1).bit_length()
        value = int(bits[pos:pos + width], 2)
        pos += width
        p, x = divmod(value, r)
        phrase = phrases[p] + (x,)
        phrases.append(phrase)
        out.extend(phrase)
        i += 1
    return out


# ---------------------------------------------------------------------------
# Finite-state runs and empirical statistics
# ---------------------------------------------------------------------------

def fs_simulate(enc: FSEncoder, v) -> tuple[int, list[int], str]:
    """Total emitted bits, the state trajectory (length n + 1) and the output string."""
    out, states = enc.run([int(x) for x in v])
    return len(out), states, out


def _entropy(counts) -> float:
    total = sum(counts)
    return -sum(c / total * math.log2(c / total) for c in counts if c)


@dataclass(frozen=True)
class EmpiricalJoint:
    table: dict
    joint_entropy: float
    block_entropy: float
    ell: int

    @property
    def total(self) -> float:
        return math.fsum(self.table.values())


def empirical_joint(states, u, ell: int) -> EmpiricalJoint:
    """Joint frequencies of (state at block start, block) over the ``n / ell`` blocks of u."""
    u = [int(x) for x in u]
    n = len(u)
    if ell < 1 or n % ell:
        raise LengthError(f"block length {ell} does not divide n = {n}")
    if len(states) < n:
        raise LengthError("state trajectory shorter than the sequence")
    blocks = n // ell
    joint = Counter((states[i * ell], tuple(u[i * ell:(i + 1) * ell])) for i in range(blocks))
    marg = Counter(w for _, w in joint.elements())
    table = {key: c / blocks for key, c in sorted(joint.items())}
    return EmpiricalJoint(table, _entropy(joint.values()), _entropy(marg.values()), ell)


# ---------------------------------------------------------------------------
# Individual-sequence bound
# ---------------------------------------------------------------------------

def default_delta(n: int, ell: int, r: int) -> float:
    """Heuristic slack ``1/ell + ell log2(4 ell r) / (n log2 e)``; tends to ``1/ell``."""
    return 1.0 / ell + ell * math.log2(4 * ell * r) / (n * math.log2(math.e))


@dataclass(frozen=True)
class IndivBoundInputs:
    u: tuple[int, ...]
    v: tuple[int, ...]
    ell: int
    states: int
    l_max: float
    zeta: float | None = None
    delta: float | None = None
    r: int = 2

    def __post_init__(self):
        object.__setattr__(self, "u", tuple(int(x) for x in self.u))
        object.__setattr__(self, "v", tuple(int(x) for x in self.v))
        if len(self.u) != len(self.v):
            raise LengthError("source and reproduction lengths differ")
        if self.ell < 1 or len(self.u) % self.ell:
            raise LengthError(f"ell = {self.ell} must divide n = {len(self.u)}")
        if self.states < 1:
            raise DomainError("state budget must be positive")
        if self.zeta is not None and self.zeta <= 0:
            raise DomainError("zeta must be positive")

    @property
    def n(self) -> int:
        return len(self.u)


@dataclass(frozen=True)
class IndivBound:
    bound: float
    lz_term: float
    phi_term: float
    delta_term: float
    state_term: float
    zeta_term: float
    empty_term: float
    lmax_term: float
    distortion: float
    c: int
    delta_certified: bool = False


def indiv_slb(inputs: IndivBoundInputs, spec: DistortionSpec | None = None,
              allow_empty: bool = True, delta_certified: bool = False) -> IndivBound:
    """Lower bound on the per-symbol output length of any s-state IL encoder for v.

    With ``allow_empty`` the zero-length output term of the Kraft sum is
    kept, which costs an extra ``zeta / ell``.
    """
    spec = spec or DistortionSpec.single(hamming())
    r, n, ell = inputs.r, inputs.n, inputs.ell
    alphabet = Alphabet.modular(r)
    table = spec.letter_values(alphabet.nodes)
    if spec.k != 1 or spec.window != 1:
        raise DomainError("the individual-sequence bound needs one single-letter function")
    diff = np.mod(np.array(inputs.u) - np.array(inputs.v), r)
    dbar = float(table[0, diff].mean())
    res = phi(alphabet, spec, [dbar])
    c = lz78_parse(inputs.u).c
    zeta = 1.0 / ell if inputs.zeta is None else inputs.zeta
    delta = default_delta(n, ell, r) if inputs.delta is None else inputs.delta
    lz_term = normalized_complexity(c, n)
    state_term = 2 * math.log2(inputs.states) / ell
    zeta_term = math.log2(math.expm1(zeta * math.log(2))) / ell
    empty_term = -zeta / ell if allow_empty else 0.0
    lmax_term = zeta * inputs.l_max
    bound = lz_term - res.phi - delta - state_term + zeta_term + empty_term - lmax_term
    return IndivBound(bound, lz_term, res.phi, delta, state_term, zeta_term, empty_term, lmax_term,
                      dbar, c, delta_certified)


# ---------------------------------------------------------------------------
# Harness
# ---------------------------------------------------------------------------

def pair_encoder() -> FSEncoder:
    """Three-state encoder coding symbol pairs with the prefix code 00:0, 11:10, 01:110, 10:111."""
    return FSEncoder(
        output=(("", ""), ("0", "110"), ("111", "10")),
        next_state=((1, 2), (0, 0), (0, 0)),
    )


def pair_quantizer() -> BlockQuantizer:
    """Block-2 quantizer onto {00, 11}; mixed pairs go to 00 or 11 by their first symbol."""
    return BlockQuantizer(2, 2, np.array([[0, 0], [1, 1]]), np.array([0, 0, 1, 1]))


def markov_source(rng, n: int, flip: float) -> np.ndarray:
    """Binary symmetric Markov chain with the given flip probability."""
    flips = rng.random(n) < flip
    flips[0] = rng.random() < 0.5
    return np.cumsum(flips) % 2


@dataclass(frozen=True)
class HarnessRow:
    trial: int
    n: int
    c: int
    complexity: float
    distortion: float
    bound: float
    lz_rate: float
    fs_rate: float
    margin: float
    terms: IndivBound = field(repr=False)


def run_harness(trials: int = 100, seed: int = 0, n: int = 8192, ell: int = 64) -> list[HarnessRow]:
    """Quantize seeded Markov sequences, code them, and compare with the bound.

    ``margin`` is the measured LZ78 rate of v minus the bound.
    """
    enc, q = pair_encoder(), pair_quantizer()
    enc.check_lossless(ell)
    l_max = max(len(w) for row in enc.output for w in row)
    rows = []
    for i, child in enumerate(np.random.SeedSequence(seed).spawn(trials)):
        rng = np.random.default_rng(child)
        u = markov_source(rng, n, float(rng.uniform(0.02, 0.5)))
        v = q(u)
        bits, _, _ = fs_simulate(enc, v)
        c_v = lz78_parse(v).c
        terms = indiv_slb(IndivBoundInputs(u, v, ell, enc.states, l_max))
        lz_rate = lz78_code_length(c_v, 2) / n
        rows.append(HarnessRow(i, n, terms.c, terms.lz_term, terms.distortion, terms.bound,
                               lz_rate, bits / n, lz_rate - terms.bound, terms))
    return rows


# ---------------------------------------------------------------------------
# Sequence files
# ---------------------------------------------------------------------------

def read_sequence(path: str | Path) -> tuple[list[int], list[str]]:
    """Read ``alphabet=a,b,...`` on the first line, then symbols (separators optional)."""
    text = Path(path).read_text().splitlines()
    if not text or not text[0].startswith("alphabet="):
        raise DomainError("sequence file must start with an 'alphabet=' header")
    return parse_sequence(text[0][len("alphabet="):].split(","), "\n".join(text[1:]))


def parse_sequence(symbols, body: str) -> tuple[list[int], list[str]]:
    symbols = [s.strip() for s in symbols]
    if len(symbols) < 2 or len(set(symbols)) != len(symbols):
        raise DomainError("alphabet needs at least two distinct symbols")
    index = {s: i for i, s in enumerate(symbols)}
    tokens = body.replace(",", " ").split()
    if all(len(s) == 1 for s in symbols):
        tokens = [ch for tok in tokens for ch in tok]
    try:
        return [index[t] for t in tokens], symbols
    except KeyError as exc:
        raise DomainError(f"symbol {exc.args[0]!r} is not in the alphabet") from None
