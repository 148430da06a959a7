"""
Free-group words over degeneracy-indexed generators.

A letter is a pair (GenRef, exponent) with exponent in {+1, -1}; a Word is a
reduced tuple of letters living in a single simplicial degree. Words are
immutable and always stored reduced, so equality is structural.
"""
from __future__ import annotations

import operator
import re
from collections import Counter
from dataclasses import dataclass, field
from functools import reduce as fold
from typing import Any, Callable, Iterable, Mapping, Sequence


class DegreeMismatchError(ValueError):
    pass


class UnboundGeneratorError(KeyError):
    pass


class WordSyntaxError(ValueError):
    pass


@dataclass(frozen=True, order=True)
class BaseGen:
    """A nondegenerate generator; `degree` is its simplicial degree (cell dimension - 1)."""
    name: str
    degree: int

    def __post_init__(self) -> None:
        if self.degree < 0:
            raise ValueError(f"Generator {self.name} has negative degree {self.degree}")

    def __str__(self) -> str:
        return self.name


def insert_degeneracy(i: int, prefix: Sequence[int]) -> tuple[int, ...]:
    """Return the canonical prefix of s_i s_{prefix}, using s_i s_j = s_{j+1} s_i (i <= j)."""
    out = []
    for k, j in enumerate(prefix):
        if i <= j:
            out.append(j + 1)
        else:
            return tuple(out) + (i,) + tuple(prefix[k:])
    return tuple(out) + (i,)


def normalize_prefix(raw: Sequence[int]) -> tuple[int, ...]:
    """Canonical form of an arbitrary chain s_{raw[0]} s_{raw[1]} ... (outermost first)."""
    prefix: tuple[int, ...] = ()
    for i in reversed(raw):
        prefix = insert_degeneracy(i, prefix)
    return prefix


@dataclass(frozen=True, order=True)
class GenRef:
    """The free generator s_{j_q} ... s_{j_1} base, prefix listed outermost first."""
    base: BaseGen
    prefix: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "prefix", tuple(self.prefix))
        if any(a <= b for a, b in zip(self.prefix, self.prefix[1:])):
            raise ValueError(f"Degeneracy prefix {self.prefix} of {self.base} is not strictly decreasing")
        # s_j applied in degree d needs 0 <= j <= d
        for k, j in enumerate(reversed(self.prefix)):
            if not 0 <= j <= self.base.degree + k:
                raise ValueError(f"Degeneracy s{j} cannot act in degree {self.base.degree + k}")

    @property
    def degree(self) -> int:
        return self.base.degree + len(self.prefix)

    @property
    def is_degenerate(self) -> bool:
        return bool(self.prefix)

    def __str__(self) -> str:
        return ".".join([f"s{j}" for j in self.prefix] + [self.base.name])


Letter = tuple[GenRef, int]


def _check_letter(letter: Letter) -> None:
    gen, exp = letter
    if not isinstance(gen, GenRef):
        raise TypeError(f"Expected a GenRef, got {gen!r}")
    if exp not in (1, -1):
        raise ValueError(f"Letter exponent must be +1 or -1, got {exp}")


@dataclass(frozen=True)
class Word:
    """A reduced word in degree `degree`. Use `reduce` to build one from raw letters."""
    letters: tuple[Letter, ...]
    degree: int
    _hash: int = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "letters", tuple(self.letters))
        for letter in self.letters:
            _check_letter(letter)
            if letter[0].degree != self.degree:
                raise DegreeMismatchError(
                    f"Letter {letter[0]} has degree {letter[0].degree}, word has degree {self.degree}")
        for (g, a), (h, b) in zip(self.letters, self.letters[1:]):
            if g == h and a == -b:
                raise ValueError(f"Word is not reduced: {g}^{a} {h}^{b} cancel")
        object.__setattr__(self, "_hash", hash((self.letters, self.degree)))

    def __hash__(self) -> int:
        return self._hash

    @classmethod
    def identity(cls, degree: int) -> "Word":
        return cls((), degree)

    @classmethod
    def generator(cls, gen: GenRef | BaseGen, exponent: int = 1) -> "Word":
        if isinstance(gen, BaseGen):
            gen = GenRef(gen)
        return power(cls(((gen, 1),), gen.degree), exponent)

    def is_identity(self) -> bool:
        return not self.letters

    def generators(self) -> set[GenRef]:
        return {g for g, _ in self.letters}

    def __len__(self) -> int:
        return len(self.letters)

    def __iter__(self):
        return iter(self.letters)

    def __mul__(self, other: "Word") -> "Word":
        return multiply(self, other)

    def __invert__(self) -> "Word":
        return invert(self)

    def __pow__(self, k: int) -> "Word":
        return power(self, k)

    def __str__(self) -> str:
        return format_word(self)


def reduce(letters: Iterable[Letter], degree: int | None = None) -> Word:
    """Free reduction by a single left-to-right stack pass."""
    stack: list[Letter] = []
    for letter in letters:
        _check_letter(letter)
        gen, exp = letter
        if degree is None:
            degree = gen.degree
        elif gen.degree != degree:
            raise DegreeMismatchError(f"Letter {gen} of degree {gen.degree} in a word of degree {degree}")
        if stack and stack[-1][0] == gen and stack[-1][1] == -exp:
            stack.pop()
        else:
            stack.append(letter)
    if degree is None:
        raise DegreeMismatchError("The degree of an empty letter sequence must be given")
    return Word(tuple(stack), degree)


def _same_degree(a: Word, b: Word) -> None:
    if a.degree != b.degree:
        raise DegreeMismatchError(f"Cannot combine words of degrees {a.degree} and {b.degree}")


def multiply(a: Word, b: Word) -> Word:
    _same_degree(a, b)
    left = list(a.letters)
    right = list(b.letters)
    # only the seam can cancel
    while left and right and left[-1][0] == right[0][0] and left[-1][1] == -right[0][1]:
        left.pop()
        right.pop(0)
    return Word(tuple(left + right), a.degree)


def invert(a: Word) -> Word:
    return Word(tuple((g, -e) for g, e in reversed(a.letters)), a.degree)


def power(a: Word, k: int) -> Word:
    if k < 0:
        return power(invert(a), -k)
    result = Word.identity(a.degree)
    for _ in range(k):
        result = multiply(result, a)
    return result


def commutator(a: Word, b: Word) -> Word:
    """[a, b] = a b a^-1 b^-1."""
    return multiply(multiply(a, b), multiply(invert(a), invert(b)))


def conjugate(w: Word, g: Word) -> Word:
    """g w g^-1."""
    return multiply(multiply(g, w), invert(g))


def product(words: Iterable[Word], degree: int) -> Word:
    return fold(multiply, words, Word.identity(degree))


def substitute(
    w: Word,
    images: Mapping[GenRef, Any] | Callable[[GenRef], Any],
    *,
    one: Any = None,
    mul: Callable[[Any, Any], Any] = operator.mul,
    inv: Callable[[Any], Any] | None = None,
) -> Any:
    """
    Apply the homomorphism of the free group determined by `images`.

    With Word images (the default) the result is a reduced Word. For any other
    target pass the neutral element `one`, the product `mul` and the inverse
    `inv` of the target group.
    """
    lookup = images if callable(images) else images.__getitem__
    target_is_word = one is None
    if target_is_word:
        inv = invert
    elif inv is None:
        raise ValueError("A non-word target needs an inverse")

    values = []
    for gen, exp in w.letters:
        try:
            value = lookup(gen)
        except KeyError:
            raise UnboundGeneratorError(f"No image for generator {gen}") from None
        values.append(value if exp == 1 else inv(value))

    if target_is_word:
        if not values:
            raise ValueError("Substituting into the identity word needs the target identity (`one`)")
        return fold(multiply, values)
    return fold(mul, values, one)


def substitute_words(w: Word, images: Mapping[GenRef, Word], degree: int) -> Word:
    """Word-valued substitution with an explicit target degree (covers the empty word)."""
    if w.is_identity():
        return Word.identity(degree)
    return substitute(w, images)


def exponent_vector(w: Word) -> dict[GenRef, int]:
    counts: Counter = Counter()
    for gen, exp in w.letters:
        counts[gen] += exp
    return {g: c for g, c in sorted(counts.items()) if c != 0}


def magnus_coefficients(w: Word, depth: int) -> dict[tuple[GenRef, ...], int]:
    """
    Coefficients of the Magnus expansion of w truncated above `depth`.

    x maps to 1 + X and x^-1 to 1 - X + X^2 - ...; the constant term is omitted.
    """
    series: dict[tuple[GenRef, ...], int] = {(): 1}
    for gen, exp in w.letters:
        factor = {(): 1}
        for n in range(1, depth + 1):
            coeff = 1 if exp == 1 else (-1) ** n
            if exp == 1 and n > 1:
                break
            factor[(gen,) * n] = coeff
        new: dict[tuple[GenRef, ...], int] = {}
        for mono, c in series.items():
            for fmono, f in factor.items():
                if len(mono) + len(fmono) > depth:
                    continue
                key = mono + fmono
                new[key] = new.get(key, 0) + c * f
        series = {k: v for k, v in new.items() if v != 0}
    series.pop((), None)
    return series


_TOKEN = re.compile(r"^((?:s\d+\.)*)([A-Za-z_][A-Za-z0-9_]*)(?:\^(-?\d+))?$")


def parse_word(
    text: str,
    generators: Mapping[str, BaseGen],
    degree: int | None = None,
) -> Word:
    """
    Parse `x1*y1*x1^-1*y1^-1`; `s1.s0.x1` denotes a degenerate letter and `e`
    the identity. `degree` is required for the identity and checked otherwise.
    """
    letters: list[Letter] = []
    body = text.replace(" ", "")
    tokens = [] if body in ("", "e", "1") else body.split("*")
    for token in tokens:
        match = _TOKEN.match(token)
        if match is None:
            raise WordSyntaxError(f"Cannot parse token {token!r} in {text!r}")
        chain, name, exp = match.groups()
        if name not in generators:
            raise UnboundGeneratorError(f"Unknown generator {name!r} in {text!r}")
        raw = [int(s[1:]) for s in chain.split(".") if s]
        try:
            gen = GenRef(generators[name], normalize_prefix(raw))
        except ValueError as e:
            raise WordSyntaxError(f"Invalid degeneracy chain in {token!r}: {e}") from None
        k = int(exp) if exp is not None else 1
        letters.extend([(gen, 1 if k > 0 else -1)] * abs(k))
    if degree is None and not letters:
        raise WordSyntaxError(f"The degree of {text!r} is ambiguous")
    return reduce(letters, degree)


def format_word(w: Word) -> str:
    if w.is_identity():
        return "e"
    parts = []
    runs: list[list] = []
    for gen, exp in w.letters:
        if runs and runs[-1][0] == gen:
            runs[-1][1] += exp
        else:
            runs.append([gen, exp])
    for gen, k in runs:
        parts.append(str(gen) if k == 1 else f"{gen}^{k}")
    return "*".join(parts)
