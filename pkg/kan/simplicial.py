"""
Free simplicial groups given by a CW-basis.

Faces and degeneracies act letterwise: degeneracies only rewrite the canonical
prefix, faces are pushed through the prefix with the simplicial identities
until they either disappear or reach the base generator, where condition (1)
of a CW-basis (d_j x = e for j below the top) and the attaching word d_q x
take over.
"""
from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass
from math import comb
from types import MappingProxyType
from typing import Mapping, Sequence

from kan.words import BaseGen, GenRef, Word, insert_degeneracy, reduce


class FaceIndexError(IndexError):
    pass


class MooreMembershipError(ValueError):
    pass


class MonotoneMapError(ValueError):
    pass


def degenerate_letter(i: int, gen: GenRef) -> GenRef:
    if not 0 <= i <= gen.degree:
        raise FaceIndexError(f"s{i} is undefined in degree {gen.degree}")
    return GenRef(gen.base, insert_degeneracy(i, gen.prefix))


def degeneracy(i: int, w: Word) -> Word:
    """s_i on a word of degree q; the result lives in degree q + 1."""
    if not 0 <= i <= w.degree:
        raise FaceIndexError(f"s{i} is undefined in degree {w.degree}")
    return Word(tuple((degenerate_letter(i, g), e) for g, e in w.letters), w.degree + 1)


def apply_prefix(prefix: Sequence[int], w: Word) -> Word:
    """Apply s_{prefix[0]} ... s_{prefix[-1]} (innermost last) to w."""
    for j in reversed(prefix):
        w = degeneracy(j, w)
    return w


@dataclass(frozen=True)
class MonotoneMap:
    """A weakly increasing map [source] -> [target] given by its values."""
    source: int
    target: int
    values: tuple[int, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "values", tuple(self.values))
        if len(self.values) != self.source + 1:
            raise MonotoneMapError(f"A map out of [{self.source}] needs {self.source + 1} values, got {self.values}")
        if any(not 0 <= v <= self.target for v in self.values):
            raise MonotoneMapError(f"Values {self.values} leave [{self.target}]")
        if any(a > b for a, b in zip(self.values, self.values[1:])):
            raise MonotoneMapError(f"Values {self.values} are not weakly increasing")

    @classmethod
    def identity(cls, q: int) -> "MonotoneMap":
        return cls(q, q, tuple(range(q + 1)))

    @classmethod
    def coface(cls, j: int, q: int) -> "MonotoneMap":
        """epsilon^j: [q-1] -> [q], skipping j."""
        if not 0 <= j <= q:
            raise MonotoneMapError(f"Coface epsilon^{j} is undefined into [{q}]")
        return cls(q - 1, q, tuple(v if v < j else v + 1 for v in range(q)))

    @classmethod
    def codegeneracy(cls, j: int, q: int) -> "MonotoneMap":
        """eta^j: [q+1] -> [q], hitting j twice."""
        if not 0 <= j <= q:
            raise MonotoneMapError(f"Codegeneracy eta^{j} is undefined onto [{q}]")
        return cls(q + 1, q, tuple(v if v <= j else v - 1 for v in range(q + 2)))

    @classmethod
    def from_degeneracy(cls, prefix: Sequence[int], degree: int) -> "MonotoneMap":
        """The surjection [degree] -> [degree - len(prefix)] whose simplicial operator is s_{prefix}."""
        repeated = set(prefix)
        values, v = [0], 0
        for p in range(degree):
            if p not in repeated:
                v += 1
            values.append(v)
        return cls(degree, degree - len(prefix), tuple(values))

    def compose(self, other: "MonotoneMap") -> "MonotoneMap":
        """self after other."""
        if other.target != self.source:
            raise MonotoneMapError(f"Cannot compose [{other.source}]->[{other.target}] with [{self.source}]->[{self.target}]")
        return MonotoneMap(other.source, self.target, tuple(self.values[v] for v in other.values))

    def factor(self) -> tuple[tuple[int, ...], tuple[int, ...]]:
        """
        Epi-mono factorization: (indices of [target] missed by the map,
        positions p with values[p] == values[p+1]).
        """
        image = set(self.values)
        missing = tuple(v for v in range(self.target + 1) if v not in image)
        repeated = tuple(p for p in range(self.source) if self.values[p] == self.values[p + 1])
        return missing, repeated

    def act(self, point: Sequence) -> tuple:
        """Affine action on barycentric coordinates of Delta_source."""
        if len(point) != self.source + 1:
            raise MonotoneMapError(f"Point {tuple(point)} is not in Delta_{self.source}")
        out = [0] * (self.target + 1)
        for p, t in enumerate(point):
            out[self.values[p]] += t
        return tuple(out)


@dataclass(frozen=True)
class FreeSimplicialGroup:
    """
    A free simplicial group with CW-basis X_q (`nondegen[q]`) and attaching
    words d_q x (`attach[x]`, a word of degree q - 1). Generators are
    enumerated up to `max_degree`.
    """
    nondegen: Mapping[int, tuple[BaseGen, ...]]
    attach: Mapping[BaseGen, Word]
    max_degree: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "nondegen", MappingProxyType({q: tuple(xs) for q, xs in self.nondegen.items()}))
        object.__setattr__(self, "attach", MappingProxyType(dict(self.attach)))
        for q, xs in self.nondegen.items():
            for x in xs:
                if x.degree != q:
                    raise ValueError(f"Generator {x} of degree {x.degree} listed in X_{q}")
                if q >= 1 and x not in self.attach:
                    raise ValueError(f"Generator {x} of degree {q} has no attaching word")
                if q >= 1 and self.attach[x].degree != q - 1:
                    raise ValueError(f"Attaching word of {x} lives in degree {self.attach[x].degree}, expected {q - 1}")

    @property
    def top_degree(self) -> int:
        return max((q for q, xs in self.nondegen.items() if xs), default=0)

    def basis(self, q: int) -> tuple[BaseGen, ...]:
        return self.nondegen.get(q, ())

    def generators_by_name(self) -> dict[str, BaseGen]:
        return {x.name: x for xs in self.nondegen.values() for x in xs}

    # -- faces ---------------------------------------------------------------

    def face_letter(self, i: int, gen: GenRef) -> Word:
        q = gen.degree
        if q < 1 or not 0 <= i <= q:
            raise FaceIndexError(f"d{i} is undefined in degree {q}")
        kept: list[int] = []
        for k, j in enumerate(gen.prefix):
            if i < j:
                kept.append(j - 1)
            elif i in (j, j + 1):
                return Word(((GenRef(gen.base, tuple(kept) + gen.prefix[k + 1:]), 1),), q - 1)
            else:
                kept.append(j)
                i -= 1
        r = gen.base.degree
        if i < r:
            return Word.identity(q - 1)
        return apply_prefix(kept, self.attach[gen.base])

    def face(self, i: int, w: Word) -> Word:
        if w.degree < 1 or not 0 <= i <= w.degree:
            raise FaceIndexError(f"d{i} is undefined in degree {w.degree}")
        letters = []
        for gen, exp in w.letters:
            image = self.face_letter(i, gen)
            letters.extend(image.letters if exp == 1 else (~image).letters)
        return reduce(letters, w.degree - 1)

    def degeneracy(self, i: int, w: Word) -> Word:
        return degeneracy(i, w)

    # -- generators ----------------------------------------------------------

    def enumerate_generators(self, q: int) -> list[GenRef]:
        """All free generators of K_q: each x in X_r with every canonical (q - r)-prefix."""
        if q > self.max_degree:
            raise ValueError(f"Degree {q} exceeds the enumeration bound {self.max_degree}")
        gens = []
        for r in range(q + 1):
            prefixes = [tuple(sorted(c, reverse=True)) for c in itertools.combinations(range(q), q - r)]
            prefixes.sort(reverse=True)
            for x in self.basis(r):
                gens.extend(GenRef(x, p) for p in prefixes)
        return gens

    def generator_count(self, q: int) -> int:
        return sum(comb(q, r) * len(self.basis(r)) for r in range(q + 1))

    # -- monotone maps -------------------------------------------------------

    def apply_monotone(self, theta: MonotoneMap, w: Word) -> Word:
        """K(theta): K_target -> K_source."""
        if w.degree != theta.target:
            raise MonotoneMapError(f"A word of degree {w.degree} cannot be pulled back along a map into [{theta.target}]")
        missing, repeated = theta.factor()
        for m in reversed(missing):
            w = self.face(m, w)
        for p in repeated:
            w = degeneracy(p, w)
        return w

    # -- Moore complex -------------------------------------------------------

    def moore_member(self, w: Word) -> bool:
        if w.degree < 1:
            raise FaceIndexError("The Moore condition needs degree at least 1")
        return all(self.face(j, w).is_identity() for j in range(w.degree))

    def moore_boundary(self, w: Word) -> Word:
        if not self.moore_member(w):
            raise MooreMembershipError(f"{w} is not in M_{w.degree}: some d_j with j < {w.degree} is nontrivial")
        return self.face(w.degree, w)

    def validate_attaching(self, x: BaseGen) -> bool:
        """All faces of d_q x vanish, as forced by d_j x = e for j < q."""
        word = self.attach[x]
        if word.degree == 0:
            return True
        return all(self.face(j, word).is_identity() for j in range(word.degree + 1))

    def check(self) -> None:
        for q in range(1, self.top_degree + 1):
            for x in self.basis(q):
                if not self.validate_attaching(x):
                    raise ValueError(f"Attaching word of {x} has a nontrivial face")
        logging.debug(f"Checked attaching words up to degree {self.top_degree}")
