"""
Reduced CW-complexes and Kan's construction.

A (q+1)-cell becomes a generator of degree q. 2-cells carry relator words in
the 1-cell generators, 3-cells identities among relations, 4-cells words in
the symbols v_j, w_{i,j} of the universal quadratic group of pi_2, and any
cell may instead carry a raw attaching word (`general_attach`).
"""
from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from pydantic import BaseModel, Field
from sympy import Matrix

from kan.homology import chain_homology
from kan.simplicial import FreeSimplicialGroup, degeneracy
from kan.words import (BaseGen, GenRef, Word, commutator, conjugate, exponent_vector, format_word,
                       magnus_coefficients, parse_word, power, product, substitute_words)


class InvalidAttachingError(ValueError):
    pass


@dataclass(frozen=True)
class IdentityTerm:
    z: Word
    relator: str
    sign: int

    def __post_init__(self) -> None:
        if self.sign not in (1, -1):
            raise InvalidAttachingError(f"Identity term sign must be +1 or -1, got {self.sign}")
        if self.z.degree != 0:
            raise InvalidAttachingError(f"Identity term conjugator {self.z} must live in degree 0")


@dataclass(frozen=True)
class IdentitySequence:
    """i = z_1 r_{j_1}^{e_1} z_1^-1 ... z_m r_{j_m}^{e_m} z_m^-1."""
    terms: tuple[IdentityTerm, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "terms", tuple(self.terms))

    def relator_counts(self) -> dict[str, int]:
        counts: dict[str, int] = {}
        for term in self.terms:
            counts[term.relator] = counts.get(term.relator, 0) + term.sign
        return counts


@dataclass(frozen=True)
class ReducedCWComplex:
    """A CW-complex with a single (implicit) 0-cell."""
    cells: Mapping[int, tuple[str, ...]]
    attach2: Mapping[str, Word] = field(default_factory=dict)
    attach3: Mapping[str, IdentitySequence] = field(default_factory=dict)
    attach4: Mapping[str, Word] = field(default_factory=dict)
    general_attach: Mapping[str, Word] = field(default_factory=dict)
    name: str = ""

    def __post_init__(self) -> None:
        object.__setattr__(self, "cells", {int(d): tuple(cs) for d, cs in self.cells.items() if cs})
        if 0 in self.cells:
            raise InvalidAttachingError("A reduced complex has a single implicit 0-cell")
        names = [c for cs in self.cells.values() for c in cs]
        if len(set(names)) != len(names):
            raise InvalidAttachingError(f"Cell names must be distinct: {names}")

    @property
    def dimension(self) -> int:
        return max(self.cells, default=0)

    def cells_of(self, d: int) -> tuple[str, ...]:
        return self.cells.get(d, ())

    def base_generators(self) -> dict[str, BaseGen]:
        return {c: BaseGen(c, d - 1) for d, cs in self.cells.items() for c in cs}

    def relators(self) -> dict[str, Word]:
        out = {}
        for c in self.cells_of(2):
            if c in self.attach2:
                out[c] = self.attach2[c]
            elif c in self.general_attach:
                out[c] = self.general_attach[c]
            else:
                out[c] = Word.identity(0)
        return out


# -- universal quadratic group symbols ---------------------------------------

_GAMMA = re.compile(r"^(?:v(\d+)|w(\d+)_(\d+))$")


def gamma_symbols(ell: int) -> dict[str, BaseGen]:
    names = [f"v{j}" for j in range(1, ell + 1)]
    names += [f"w{i}_{j}" for i in range(1, ell + 1) for j in range(i + 1, ell + 1)]
    return {n: BaseGen(n, 2) for n in names}


def parse_gamma_symbol(name: str) -> tuple[int, int]:
    """v_j -> (j, j); w_{i,j} -> (i, j)."""
    match = _GAMMA.match(name)
    if match is None:
        raise InvalidAttachingError(f"Malformed symbol {name!r}: expected v<j> or w<i>_<j>")
    if match.group(1) is not None:
        j = int(match.group(1))
        return j, j
    i, j = int(match.group(2)), int(match.group(3))
    if not i < j:
        raise InvalidAttachingError(f"Malformed symbol {name!r}: w_(i,j) needs i < j")
    return i, j


def gamma_images(spheres: Sequence[BaseGen]) -> dict[GenRef, Word]:
    """v_j -> [s0 x_j, s1 x_j] and w_{i,j} -> s0 x_i v_j (s0 x_i)^-1 in K_2."""
    ell = len(spheres)
    images = {}
    s0 = [degeneracy(0, Word.generator(x)) for x in spheres]
    s1 = [degeneracy(1, Word.generator(x)) for x in spheres]
    v = [commutator(a, b) for a, b in zip(s0, s1)]
    for name, sym in gamma_symbols(ell).items():
        i, j = parse_gamma_symbol(name)
        images[GenRef(sym)] = v[j - 1] if i == j else conjugate(v[j - 1], s0[i - 1])
    return images


def gamma_basis(ell: int) -> list[Word]:
    spheres = [BaseGen(f"x{j}", 1) for j in range(1, ell + 1)]
    images = gamma_images(spheres)
    return [images[GenRef(sym)] for sym in gamma_symbols(ell).values()]


def gamma_rank(ell: int) -> int:
    """Rank of the v_j, w_{i,j} list measured by their degree <= 3 Magnus coefficients."""
    words = gamma_basis(ell)
    coefficients = [magnus_coefficients(w, 3) for w in words]
    monomials = sorted({m for c in coefficients for m in c})
    if not monomials:
        return 0
    mat = Matrix([[c.get(m, 0) for m in monomials] for c in coefficients])
    return int(mat.rank())


def expand_gamma_word(r: Word, spheres: Sequence[BaseGen]) -> Word:
    for gen in r.generators():
        i, j = parse_gamma_symbol(gen.base.name)
        if j > len(spheres):
            raise InvalidAttachingError(f"Symbol {gen} refers to 2-cell {j} of {len(spheres)}")
    return substitute_words(r, gamma_images(spheres), 2)


def intersection_form(r: Word, ell: int) -> np.ndarray:
    """Q_jj = exponent sum of v_j, Q_ij = Q_ji = exponent sum of w_{i,j}."""
    Q = np.zeros((ell, ell), dtype=np.int64)
    for gen, count in exponent_vector(r).items():
        i, j = parse_gamma_symbol(gen.base.name)
        if j > ell:
            raise InvalidAttachingError(f"Symbol {gen} refers to 2-cell {j} of {ell}")
        Q[i - 1, j - 1] += count
        if i != j:
            Q[j - 1, i - 1] += count
    return Q


def determinant(Q: np.ndarray) -> int:
    """Exact integer determinant (1 for the empty form)."""
    if Q.size == 0:
        return 1
    return int(Matrix(Q.tolist()).det())


def is_nondegenerate(Q: np.ndarray) -> bool:
    return determinant(Q) != 0


# -- identities among relations ----------------------------------------------

def substitute_identity(relators: Mapping[str, Word], identity: IdentitySequence) -> Word:
    words = []
    for term in identity.terms:
        if term.relator not in relators:
            raise InvalidAttachingError(f"Identity refers to unknown relator {term.relator!r}")
        words.append(conjugate(power(relators[term.relator], term.sign), term.z))
    return product(words, 0)


def validate_identity(relators: Mapping[str, Word], identity: IdentitySequence) -> bool:
    return substitute_identity(relators, identity).is_identity()


def identity_attaching_word(identity: IdentitySequence, relator_gens: Mapping[str, BaseGen]) -> Word:
    """d_2 sigma = prod (s0 z_k) r_{j_k}^{e_k} (s0 z_k)^-1 in K_1."""
    words = []
    for term in identity.terms:
        r = Word.generator(relator_gens[term.relator], term.sign)
        words.append(conjugate(r, degeneracy(0, term.z)))
    return product(words, 1)


# -- Kan's construction ------------------------------------------------------

def kan_group(Y: ReducedCWComplex, max_degree: int | None = None) -> FreeSimplicialGroup:
    if max_degree is None:
        max_degree = max(Y.dimension, 1) + 1
    gens = Y.base_generators()
    nondegen: dict[int, list[BaseGen]] = {}
    for d, cs in Y.cells.items():
        nondegen.setdefault(d - 1, []).extend(gens[c] for c in cs)

    attach: dict[BaseGen, Word] = {}
    for d, cs in sorted(Y.cells.items()):
        if d == 1:
            continue
        for c in cs:
            attach[gens[c]] = _attaching_word(Y, c, d, gens)

    K = FreeSimplicialGroup(nondegen, attach, max_degree)
    for q in range(1, K.top_degree + 1):
        for x in K.basis(q):
            if not K.validate_attaching(x):
                raise InvalidAttachingError(f"Attaching word {format_word(attach[x])} of cell {x} has a nontrivial face")
    logging.debug(f"Kan group of {Y.name or 'complex'}: {[len(K.basis(q)) for q in range(K.top_degree + 1)]} basis generators")
    return K


def _attaching_word(Y: ReducedCWComplex, c: str, d: int, gens: Mapping[str, BaseGen]) -> Word:
    if c in Y.general_attach:
        word = Y.general_attach[c]
    elif d == 2:
        word = Y.attach2.get(c, Word.identity(0))
    elif d == 3:
        identity = Y.attach3.get(c, IdentitySequence())
        relator_gens = {r: gens[r] for r in Y.cells_of(2)}
        if not validate_identity(Y.relators(), identity):
            raise InvalidAttachingError(f"Identity attached to {c} does not reduce to e after substituting relators")
        word = identity_attaching_word(identity, relator_gens)
    elif d == 4:
        r = Y.attach4.get(c, Word.identity(2))
        spheres = [gens[s] for s in Y.cells_of(2)]
        if Y.cells_of(1) or Y.cells_of(3) or any(not Y.relators()[s].is_identity() for s in Y.cells_of(2)):
            raise InvalidAttachingError(f"Cell {c}: symbolic 4-cell attaching needs a wedge of 2-spheres below it")
        word = expand_gamma_word(r, spheres)
    else:
        word = Word.identity(d - 2)
    if word.degree != d - 2:
        raise InvalidAttachingError(f"Attaching word of {d}-cell {c} lives in degree {word.degree}, expected {d - 2}")
    missing = {g.base for g in word.generators()} - set(gens.values())
    if missing:
        raise InvalidAttachingError(f"Attaching word of {c} uses unknown generators {sorted(m.name for m in missing)}")
    return word


def sphere_attaching_map(Y: ReducedCWComplex, cell: str) -> Word:
    """Image in K_1 of the generator of K_1(S^2) under the map K S^2 -> K Y^2 of a 3-cell."""
    K = kan_group(Y)
    return K.attach[Y.base_generators()[cell]]


def cellular_chain_complex(Y: ReducedCWComplex) -> tuple[list[int], dict[int, np.ndarray]]:
    """Reduced cellular chains of Y (degree 0 dropped), read off the attaching data."""
    dims = [len(Y.cells_of(d)) for d in range(1, Y.dimension + 1)]
    boundaries: dict[int, np.ndarray] = {}
    index = {d: {c: i for i, c in enumerate(Y.cells_of(d))} for d in range(1, Y.dimension + 1)}
    for d in range(2, Y.dimension + 1):
        mat = np.zeros((len(Y.cells_of(d - 1)), len(Y.cells_of(d))), dtype=np.int64)
        for col, c in enumerate(Y.cells_of(d)):
            if c in Y.general_attach:
                counts = {g.base.name: n for g, n in exponent_vector(Y.general_attach[c]).items() if not g.is_degenerate}
            elif d == 2:
                counts = {g.base.name: n for g, n in exponent_vector(Y.relators()[c]).items()}
            elif d == 3:
                counts = Y.attach3.get(c, IdentitySequence()).relator_counts()
            else:
                counts = {}
            for name, n in counts.items():
                mat[index[d - 1][name], col] += n
        boundaries[d - 1] = mat
    return dims, boundaries


def cellular_homology(Y: ReducedCWComplex) -> list[tuple[int, list[int]]]:
    """Reduced H_1 ... H_dim of Y, indexed from 0 (so entry n is H_{n+1})."""
    dims, boundaries = cellular_chain_complex(Y)
    return chain_homology(dims, boundaries)


# -- builders ----------------------------------------------------------------

def surface(ell: int) -> ReducedCWComplex:
    ones = [n for j in range(1, ell + 1) for n in (f"x{j}", f"y{j}")]
    gens = {n: BaseGen(n, 0) for n in ones}
    relator = product((commutator(Word.generator(gens[f"x{j}"]), Word.generator(gens[f"y{j}"]))
                       for j in range(1, ell + 1)), 0)
    return ReducedCWComplex({1: tuple(ones), 2: ("r",)}, attach2={"r": relator}, name=f"surface{ell}")


def sphere(q: int) -> ReducedCWComplex:
    if q < 1:
        raise ValueError(f"Sphere dimension must be at least 1, got {q}")
    return ReducedCWComplex({q: ("x",)}, name=f"sphere{q}")


def spine3(relators: Mapping[str, Word], identity: IdentitySequence, generators: Sequence[str] | None = None,
           cell: str = "sigma") -> ReducedCWComplex:
    if generators is None:
        generators = sorted({g.base.name for w in relators.values() for g in w.generators()})
    return ReducedCWComplex({1: tuple(generators), 2: tuple(relators), 3: (cell,)},
                            attach2=dict(relators), attach3={cell: identity}, name="spine")


def four_complex(ell: int, r: Word | str, cell: str = "c") -> ReducedCWComplex:
    if isinstance(r, str):
        r = parse_word(r, gamma_symbols(ell), degree=2)
    spheres = tuple(f"x{j}" for j in range(1, ell + 1))
    return ReducedCWComplex({2: spheres, 4: (cell,)}, attach4={cell: r}, name="four_complex")


def rp3_like() -> ReducedCWComplex:
    x = BaseGen("x", 0)
    X = Word.generator(x)
    identity = IdentitySequence((IdentityTerm(X, "r1", 1), IdentityTerm(Word.identity(0), "r1", -1)))
    Y = spine3({"r1": power(X, 2)}, identity, generators=["x"])
    return ReducedCWComplex(Y.cells, Y.attach2, Y.attach3, name="rp3like")


def cp2() -> ReducedCWComplex:
    Y = four_complex(1, "v1")
    return ReducedCWComplex(Y.cells, attach4=Y.attach4, name="cp2")


def s2_times_s2() -> ReducedCWComplex:
    Y = four_complex(2, "w1_2")
    return ReducedCWComplex(Y.cells, attach4=Y.attach4, name="s2xs2")


# -- JSON schema -------------------------------------------------------------

class IdentityTermModel(BaseModel):
    z: str = "e"
    relator: str
    sign: int = Field(1)


class ComplexModel(BaseModel):
    name: str = ""
    cells: dict[str, list[str]]
    attach2: dict[str, str] = {}
    attach3: dict[str, list[IdentityTermModel]] = {}
    attach4: dict[str, str] = {}
    general_attach: dict[str, str] = {}


def complex_from_dict(data: Mapping) -> ReducedCWComplex:
    model = ComplexModel.model_validate(data)
    cells = {int(d): tuple(cs) for d, cs in model.cells.items()}
    Y0 = ReducedCWComplex(cells)
    gens = Y0.base_generators()
    ones = {c: gens[c] for c in Y0.cells_of(1)}
    for c in list(model.attach2) + list(model.attach3) + list(model.attach4):
        if c not in gens:
            raise InvalidAttachingError(f"Attaching data given for unknown cell {c!r}")
    attach2 = {c: parse_word(w, ones, degree=0) for c, w in model.attach2.items()}
    attach3 = {
        c: IdentitySequence(tuple(IdentityTerm(parse_word(t.z, ones, degree=0), t.relator, t.sign) for t in terms))
        for c, terms in model.attach3.items()
    }
    ell = len(Y0.cells_of(2))
    attach4 = {c: parse_word(w, gamma_symbols(ell), degree=2) for c, w in model.attach4.items()}
    general = {}
    for c, w in model.general_attach.items():
        if c not in gens:
            raise InvalidAttachingError(f"Attaching data given for unknown cell {c!r}")
        general[c] = parse_word(w, gens, degree=gens[c].degree - 1)
    return ReducedCWComplex(cells, attach2, attach3, attach4, general, name=model.name)


def complex_to_dict(Y: ReducedCWComplex) -> dict:
    return {
        "name": Y.name,
        "cells": {str(d): list(cs) for d, cs in sorted(Y.cells.items())},
        "attach2": {c: format_word(w) for c, w in Y.attach2.items()},
        "attach3": {c: [{"z": format_word(t.z), "relator": t.relator, "sign": t.sign} for t in i.terms]
                    for c, i in Y.attach3.items()},
        "attach4": {c: format_word(w) for c, w in Y.attach4.items()},
        "general_attach": {c: format_word(w) for c, w in Y.general_attach.items()},
    }


def load_complex(path: str) -> ReducedCWComplex:
    with open(path, "r") as file:
        return complex_from_dict(json.load(file))


def dump_complex(Y: ReducedCWComplex, path: str) -> None:
    with open(path, "w") as file:
        json.dump(complex_to_dict(Y), file, indent=2)
        file.write("\n")


FIXTURES = {
    **{f"surface{g}": (lambda g=g: surface(g)) for g in range(4)},
    **{f"sphere{q}": (lambda q=q: sphere(q)) for q in range(1, 5)},
    "rp3like": rp3_like,
    "cp2": cp2,
    "s2xs2": s2_times_s2,
}

