import itertools

import numpy as np
import pytest

from slbkit.kraft import (BlockCode, BlockQuantizer, BudgetExceededError, ConstraintViolationError, FSEncoder,
                          KraftError, NotLosslessError, all_vectors, build_code, enumerative_lengths, huffman_lengths,
                          kraft_z, kraft_z_sampled, random_fs_encoder, run_campaign, verify_lemma,
                          verify_lemma5)
from slbkit.model import Alphabet, DistortionSpec, DomainError, hamming

Z2 = Alphabet.modular(2)
HAM = DistortionSpec.single(hamming())


def brute_z(code, alpha, beta):
    total = 0.0
    for i, u in enumerate(itertools.product(range(code.alphabet.size), repeat=code.n)):
        j = code.assignment[i]
        d = sum(a != b for a, b in zip(u, code.codebook[j]))
        total += 2.0 ** (-alpha * code.lengths[j] - beta * d)
    return total


def test_all_vectors_is_lexicographic():
    assert all_vectors(3, 2).tolist() == [list(p) for p in itertools.product(range(3), repeat=2)]


def test_kraft_sum_matches_loop():
    rng = np.random.default_rng(0)
    n = 5
    cb = all_vectors(2, n)[rng.choice(32, 6, replace=False)]
    a = rng.integers(0, 6, 32)
    code = BlockCode(n, Z2, cb, [1, 2, 3, 4, 5, 5], "ud", a)
    for alpha, beta in [(1.1, 0.0), (2.0, 0.5), (1.5, 3.0)]:
        assert abs(kraft_z(code, alpha, beta, HAM) - brute_z(code, alpha, beta)) < 1e-13


def test_ud_bound_is_letter_sum_power():
    n = 4
    code = BlockCode(n, Z2, all_vectors(2, n), np.full(16, 4), "ud", np.arange(16))
    rep = verify_lemma(code, 1.5, 1.0, HAM)
    assert abs(rep.bound - (1 + 2**-1.0) ** n) < 1e-12
    assert rep.passed and rep.ref == "kraft-ud"


def test_one_to_one_empty_codeword_needs_correction():
    """Lengths (0,1,1,2) at a large tilt break the bound without the 2^(alpha-1) factor."""
    code = BlockCode(2, Z2, all_vectors(2, 2), [0, 1, 1, 2], "one-to-one", np.arange(4))
    rep = verify_lemma(code, 2.0, 30.0, HAM)
    assert abs(rep.z_value - 1.5625) < 1e-8
    assert rep.empty_output
    assert rep.uncorrected_slack < 0 <= rep.slack
    assert abs(rep.bound - 2 * (1 + 2**-30) ** 2) < 1e-12


def test_enumerative_lengths():
    code = build_code("one-to-one-enumerative", alphabet=Z2, n=3, codebook=all_vectors(2, 3)[1:],
                      assignment=np.r_[0, np.arange(7)])
    assert code.lengths.min() == 0  # enumerative lengths start at the empty word
    assert enumerative_lengths(7).tolist() == [0, 1, 1, 2, 2, 2, 2]


def test_class_certificates():
    with pytest.raises(KraftError):
        verify_lemma(BlockCode(2, Z2, all_vectors(2, 2), [1, 1, 1, 1], "ud", np.arange(4)), 2.0, 0.0, HAM)
    bad = BlockCode(2, Z2, all_vectors(2, 2), [0, 0, 1, 1], "one-to-one", np.arange(4))
    assert not bad.class_certificate()[0]


def test_huffman_lengths():
    p = np.array([0.5, 0.25, 0.125, 0.125])
    assert huffman_lengths(p).tolist() == [1, 2, 3, 3]
    assert huffman_lengths([1.0]).tolist() == [1]


def test_fixed_rate_bound():
    n = 4
    code = build_code("fixed-rate", alphabet=Z2, n=n, codebook=all_vectors(2, n)[:4], rate=0.5, encode_spec=HAM)
    for alpha in (0.0, 0.5, 2.0):
        rep = verify_lemma(code, alpha, 1.0, HAM)
        assert abs(rep.bound - 2.0 ** ((1 - alpha) * 2) * 1.5**n) < 1e-12
        assert rep.passed


def test_cover_is_semifaithful_and_ball_count():
    n, D = 6, 1 / 6
    code = build_code("d-semifaithful-cover", alphabet=Z2, n=n, spec=HAM, D=D)
    rep = verify_lemma(code, 2.0, 0.0, HAM, D=D, lemma="semifaithful")
    assert rep.bound == 7  # 1 + n vectors within Hamming distance 1
    assert rep.passed


def test_semifaithful_violation_has_witness():
    code = BlockCode(3, Z2, [[0, 0, 0]], [0], "ud", np.zeros(8, dtype=int))
    with pytest.raises(ConstraintViolationError) as exc:
        verify_lemma(code, 2.0, 0.0, HAM, D=1 / 3, lemma="semifaithful")
    assert exc.value.witness is not None


def test_budget():
    code = BlockCode(21, Z2, [[0] * 21], [1], "ud", encode_spec=HAM)
    with pytest.raises(BudgetExceededError):
        kraft_z(code, 2.0, 0.0, HAM)


def test_sampled_estimate_near_exact():
    rng = np.random.default_rng(3)
    cb = all_vectors(2, 8)[rng.choice(256, 10, replace=False)]
    code = BlockCode(8, Z2, cb, huffman_lengths(np.full(10, 0.1)), "ud", encode_spec=HAM)
    exact = kraft_z(code, 1.5, 0.5, HAM)
    est, half = kraft_z_sampled(code, 1.5, 0.5, HAM, samples=50_000)
    assert abs(est - exact) < 2 * half


# ---------------------------------------------------------------------------
# Finite-state encoders
# ---------------------------------------------------------------------------

def brute_lossless(enc, ell):
    """Oracle: no two distinct same-length inputs (length <= ell) from one state share output and end state."""
    r = enc.alphabet_size
    for s in range(enc.states):
        for length in range(1, ell + 1):
            seen = {}
            for v in itertools.product(range(r), repeat=length):
                out, st = enc.run(v, s)
                key = (out, st[-1])
                if key in seen:
                    return False
                seen[key] = v
    return True


def test_block_check_agrees_with_brute_force():
    rng = np.random.default_rng(11)
    words = ["", "0", "1", "00", "01", "10", "11"]
    disagreements = 0
    for _ in range(400):
        s = int(rng.integers(1, 4))
        enc = FSEncoder(tuple(tuple(words[i] for i in rng.integers(0, 7, 2)) for _ in range(s)),
                        tuple(tuple(int(x) for x in rng.integers(0, s, 2)) for _ in range(s)))
        ell = int(rng.integers(1, 6))
        ours = enc.single_step_witness() is None and enc.block_witness(ell) is None
        disagreements += ours != brute_lossless(enc, ell)
    assert disagreements == 0


def test_single_step_is_not_enough():
    enc = FSEncoder((("0", "00"),), ((0, 0),))
    assert enc.single_step_witness() is None
    sigma, x, y = enc.block_witness(2)
    assert enc.run(x, sigma)[0] == enc.run(y, sigma)[0] and x != y
    with pytest.raises(NotLosslessError):
        enc.check_lossless(2)


def test_lemma5_pair_encoder():
    enc = FSEncoder((("", ""), ("0", "110"), ("111", "10")), ((1, 2), (0, 0), (0, 0)))
    rep = verify_lemma5(enc, BlockQuantizer.identity(2), 4, 2.0, 0.0, HAM, Z2)
    # brute-force the Kraft sum over start states and 4-blocks
    z = sum(2.0 ** (-2.0 * len(enc.run(v, s)[0])) for s in range(3) for v in itertools.product(range(2), repeat=4))
    assert abs(rep.z_value - z) < 1e-12 and rep.passed


def test_fs_encoder_validation():
    with pytest.raises(DomainError):
        FSEncoder((("0", "2"),), ((0, 0),))
    with pytest.raises(DomainError):
        FSEncoder((("0", "1"),), ((0, 1),))


def test_random_encoder_is_lossless():
    enc = random_fs_encoder(np.random.default_rng(2), 2, 3, 6)
    assert brute_lossless(enc, 6)


@pytest.mark.parametrize("lemma", ["ud", "one-to-one", "semifaithful", "fixed-rate", "fs-encoder"])
def test_small_campaigns(lemma):
    rows = run_campaign(lemma, 15, seed=1, max_n=6)
    assert all(r.error is None and r.report.slack >= 0 for r in rows)
    again = run_campaign(lemma, 15, seed=1, max_n=6, jobs=3)
    assert [r.report.z_value for r in rows] == [r.report.z_value for r in again]
