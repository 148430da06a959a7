import os
import sys
import tempfile

import numpy as np

sys.path.insert(0, os.path.join(os.path.dirname(os.path.abspath(__file__)), "..", ".."))

from kan.cw import (FIXTURES, IdentitySequence, IdentityTerm, InvalidAttachingError, ReducedCWComplex,
                    complex_from_dict, complex_to_dict, cp2, determinant, dump_complex, expand_gamma_word,
                    four_complex, gamma_rank, gamma_symbols, identity_attaching_word, intersection_form,
                    is_nondegenerate, kan_group, load_complex, parse_gamma_symbol, rp3_like, s2_times_s2,
                    sphere_attaching_map, spine3, surface, validate_identity)
from kan.words import BaseGen, GenRef, Word, commutator, exponent_vector, parse_word, power, reduce

FIXTURE_DIR = os.path.join(os.path.dirname(os.path.abspath(__file__)), "..", "..", "fixtures")


def test_surface_builder():
    for ell in range(4):
        Y = surface(ell)
        assert len(Y.cells_of(1)) == 2 * ell
        assert Y.cells_of(2) == ("r",)
        r = Y.relators()["r"]
        assert len(r) == 4 * ell
        assert exponent_vector(r) == {}
        K = kan_group(Y)
        assert K.attach[Y.base_generators()["r"]] == r


def test_identity_validation():
    Y = rp3_like()
    assert validate_identity(Y.relators(), Y.attach3["sigma"])
    x = BaseGen("x", 0)
    bad = IdentitySequence((IdentityTerm(Word.generator(x), "r1", 1),))
    assert not validate_identity(Y.relators(), bad)
    try:
        kan_group(spine3({"r1": power(Word.generator(x), 2)}, bad, generators=["x"]))
    except InvalidAttachingError:
        pass
    else:
        assert False, "an identity that does not reduce to e must be rejected"
    try:
        IdentityTerm(Word.generator(x), "r1", 2)
    except InvalidAttachingError:
        pass
    else:
        assert False


def test_identity_attaching_word():
    Y = rp3_like()
    gens = Y.base_generators()
    word = identity_attaching_word(Y.attach3["sigma"], {"r1": gens["r1"]})
    assert word.degree == 1
    assert sphere_attaching_map(Y, "sigma") == word
    s0x = Word.generator(GenRef(gens["x"], (0,)))
    r1 = Word.generator(gens["r1"])
    assert word == s0x * r1 * ~s0x * ~r1


def test_gamma_symbols():
    assert sorted(gamma_symbols(3)) == ["v1", "v2", "v3", "w1_2", "w1_3", "w2_3"]
    assert parse_gamma_symbol("v2") == (2, 2)
    assert parse_gamma_symbol("w1_3") == (1, 3)
    for bad in ("w2_1", "u1", "w1_1"):
        try:
            parse_gamma_symbol(bad)
        except InvalidAttachingError:
            pass
        else:
            assert False, f"{bad} is not a symbol"


def test_gamma_rank():
    for ell in range(1, 5):
        assert gamma_rank(ell) == ell * (ell + 1) // 2
    assert gamma_rank(4) == 10


def test_expand_gamma_word():
    x1 = BaseGen("x1", 1)
    w = expand_gamma_word(parse_word("v1", gamma_symbols(1), degree=2), [x1])
    s0, s1 = Word.generator(GenRef(x1, (0,))), Word.generator(GenRef(x1, (1,)))
    assert w == commutator(s0, s1)
    try:
        expand_gamma_word(parse_word("v2", gamma_symbols(2), degree=2), [x1])
    except InvalidAttachingError:
        pass
    else:
        assert False, "v2 refers to a missing 2-cell"


def test_intersection_forms():
    np.testing.assert_array_equal(intersection_form(cp2().attach4["c"], 1), [[1]])
    np.testing.assert_array_equal(intersection_form(s2_times_s2().attach4["c"], 2), [[0, 1], [1, 0]])
    assert determinant(intersection_form(cp2().attach4["c"], 1)) == 1
    assert determinant(intersection_form(s2_times_s2().attach4["c"], 2)) == -1
    r = parse_word("v1^2*w1_2*v2^-1", gamma_symbols(2), degree=2)
    Q = intersection_form(r, 2)
    np.testing.assert_array_equal(Q, [[2, 1], [1, -1]])
    assert determinant(Q) == -3
    assert not is_nondegenerate(intersection_form(parse_word("v1*v2", gamma_symbols(2), degree=2), 3))
    assert determinant(np.zeros((0, 0), dtype=np.int64)) == 1


def test_intersection_form_matches_symmetrization():
    rng = np.random.default_rng(3)
    for _ in range(50):
        ell = int(rng.integers(1, 5))
        symbols = gamma_symbols(ell)
        names = sorted(symbols)
        letters = []
        oracle = np.zeros((ell, ell), dtype=np.int64)
        for _ in range(int(rng.integers(0, 12))):
            name = names[rng.integers(len(names))]
            sign = int(rng.choice((-1, 1)))
            letters.append((GenRef(symbols[name]), sign))
            i, j = parse_gamma_symbol(name)
            a, b = np.eye(ell, dtype=np.int64)[i - 1], np.eye(ell, dtype=np.int64)[j - 1]
            # gamma(a) -> a (x) a, [a_i, a_j] -> a_i (x) a_j + a_j (x) a_i
            oracle += sign * (np.outer(a, a) if i == j else np.outer(a, b) + np.outer(b, a))
        Q = intersection_form(reduce(letters, 2), ell)
        np.testing.assert_array_equal(Q, oracle)
        assert (Q == Q.T).all()
        assert is_nondegenerate(Q) == (round(np.linalg.det(oracle)) != 0)
    assert not is_nondegenerate(intersection_form(Word.identity(2), 2))


def test_four_complex_requires_wedge_of_spheres():
    Y = four_complex(2, "v1*w1_2")
    K = kan_group(Y)
    assert [len(K.basis(q)) for q in range(4)] == [0, 2, 0, 1]
    bad = ReducedCWComplex({1: ("y",), 2: ("x1",), 4: ("c",)},
                           attach4={"c": parse_word("v1", gamma_symbols(1), degree=2)})
    try:
        kan_group(bad)
    except InvalidAttachingError:
        pass
    else:
        assert False, "symbolic 4-cells need a wedge of 2-spheres"


def test_general_attaching_word():
    data = {"cells": {"1": ["a"], "2": ["r"]}, "general_attach": {"r": "a^3"}}
    Y = complex_from_dict(data)
    K = kan_group(Y)
    assert K.attach[Y.base_generators()["r"]] == Word.generator(Y.base_generators()["a"], 3)
    bad = {"cells": {"1": ["a"], "2": ["r"]}, "attach2": {"s": "a"}}
    try:
        complex_from_dict(bad)
    except InvalidAttachingError:
        pass
    else:
        assert False, "attaching data for an unknown cell"
    try:
        ReducedCWComplex({1: ("a",), 2: ("a",)})
    except InvalidAttachingError:
        pass
    else:
        assert False, "cell names must be distinct"


def test_json_round_trip_and_fixture_files():
    with tempfile.TemporaryDirectory() as tmp:
        for name, build in FIXTURES.items():
            Y = build()
            assert complex_from_dict(complex_to_dict(Y)) == Y
            path = os.path.join(tmp, f"{name}.json")
            dump_complex(Y, path)
            assert load_complex(path) == Y
            assert load_complex(os.path.join(FIXTURE_DIR, f"{name}.json")) == Y


if __name__ == "__main__":
    test_surface_builder()
    test_identity_validation()
    test_identity_attaching_word()
    test_gamma_symbols()
    test_gamma_rank()
    test_expand_gamma_word()
    test_intersection_forms()
    test_intersection_form_matches_symmetrization()
    test_four_complex_requires_wedge_of_spheres()
    test_general_attaching_word()
    test_json_round_trip_and_fixture_files()
    print("[*] cw: all tests passed")
