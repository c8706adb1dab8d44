import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from slbkit.model import DomainError, LengthError
from slbkit.lz import (IndivBoundInputs, empirical_joint, fs_simulate, indiv_slb, lz78_code_length,
                       lz78_decode, lz78_encode, lz78_length_bound, lz78_parse, normalized_complexity,
                       pair_encoder, parse_sequence, read_sequence, run_harness)

EXAMPLE = [int(ch) for ch in "011010011000100"]


def naive_parse(u):
    seen, phrases, cur = set(), [], ()
    for x in u:
        cur = cur + (x,)
        if cur not in seen:
            seen.add(cur)
            phrases.append(cur)
            cur = ()
    if cur:
        phrases.append(cur)
    return phrases


def test_example_parse():
    p = lz78_parse(EXAMPLE)
    assert ["".join(map(str, ph)) for ph in p.phrases] == ["0", "1", "10", "100", "11", "00", "01", "00"]
    assert p.c == 8 and p.last_is_repeat


def test_length_bound_value():
    assert abs(lz78_length_bound(8, 2) - 46.5293) < 1e-4


@settings(max_examples=200, deadline=None)
@given(st.integers(2, 4).flatmap(lambda r: st.tuples(st.just(r), st.lists(st.integers(0, r - 1), max_size=300))))
def test_round_trip_and_lengths(case):
    r, u = case
    p = lz78_parse(u)
    assert list(p.phrases) == naive_parse(u)
    assert list(p.joined()) == u
    bits = lz78_encode(u, r)
    assert lz78_decode(bits, r) == u
    assert len(bits) == lz78_code_length(p.c, r) <= lz78_length_bound(p.c, r)


def test_normalized_complexity():
    assert normalized_complexity(8, 15) == 8 * 3 / 15
    assert normalized_complexity(1, 5) == 0.0


def test_empirical_joint():
    enc = pair_encoder()
    v = [0, 0, 1, 1, 0, 1, 1, 0]
    bits, states, out = fs_simulate(enc, v)
    assert bits == len(out) == len(enc.run(v)[0])
    ej = empirical_joint(states, v, 2)
    assert abs(ej.total - 1.0) < 1e-12
    assert ej.joint_entropy >= ej.block_entropy - 1e-12
    with pytest.raises(LengthError):
        empirical_joint(states, v, 3)


def test_indiv_terms_add_up():
    rng = np.random.default_rng(0)
    u = rng.integers(0, 2, 512)
    v = u.copy()
    v[::7] ^= 1
    b = indiv_slb(IndivBoundInputs(u, v, 16, 3, 3.0))
    total = (b.lz_term - b.phi_term - b.delta_term - b.state_term + b.zeta_term + b.empty_term - b.lmax_term)
    assert abs(total - b.bound) < 1e-12
    assert abs(b.empty_term + 1 / 16 / 16) < 1e-15
    assert abs(b.distortion - np.mean(u != v)) < 1e-15
    plain = indiv_slb(IndivBoundInputs(u, v, 16, 3, 3.0), allow_empty=False)
    assert plain.bound > b.bound


def test_indiv_input_checks():
    with pytest.raises(LengthError):
        IndivBoundInputs([0, 1], [0], 1, 1, 1.0)
    with pytest.raises(LengthError):
        IndivBoundInputs([0, 1, 0], [0, 1, 0], 2, 1, 1.0)
    with pytest.raises(DomainError):
        IndivBoundInputs([0, 1], [0, 1], 1, 1, 1.0, zeta=0.0)


def test_sequence_files(tmp_path):
    f = tmp_path / "u.txt"
    f.write_text("alphabet=a,b\nabba\nba\n")
    assert read_sequence(f) == ([0, 1, 1, 0, 1, 0], ["a", "b"])
    assert parse_sequence(["10", "20"], "10, 20 20")[0] == [0, 1, 1]
    with pytest.raises(DomainError):
        parse_sequence(["a", "b"], "abc")
    g = tmp_path / "v.txt"
    g.write_text("abba\n")
    with pytest.raises(DomainError):
        read_sequence(g)


def test_small_harness_is_sound_and_seeded():
    rows = run_harness(trials=8, seed=2, n=2048, ell=32)
    assert all(r.margin >= 0 for r in rows)
    assert [r.bound for r in rows] == [r.bound for r in run_harness(trials=8, seed=2, n=2048, ell=32)]
    assert all(math.isclose(r.lz_rate - r.bound, r.margin) for r in rows)
