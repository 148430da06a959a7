"""
Sampled points of the cut-down realization of Hom(K, G).

A point stores, for each degree q up to the top basis degree, the values
psi_q of the basis generators X_q on the lattice of Delta_q with spacing 1/m.
Values on the remaining free generators s_J x of K_q are recovered through
the codegeneracies (primitivity): phi_q(t)(s_J x) = psi_k(alpha_* t)(x) for
the surjection alpha: [q] -> [k] of the prefix J. A point is valid when psi_q
is e on the faces 0 .. q-1 of Delta_q and agrees with the attaching words
evaluated under phi_{q-1} on the last face.

Grid points are integer barycentric vectors (k_0, ..., k_q) summing to m and
are listed by the independent coordinates (k_1, ..., k_q) in lexicographic
order.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Mapping

import numpy as np

from kan.cw import expand_gamma_word
from kan.lie import GroupSpec, PATH_STRATEGIES, eval_word, loop_class
from kan.simplicial import FreeSimplicialGroup, MonotoneMap
from kan.words import BaseGen, GenRef, Word, commutator, product, substitute_words
from utils.utils import matrix_from_json, matrix_to_json


class EndpointMismatchError(ValueError):
    pass


def _compositions(q: int, budget: int):
    if q == 0:
        yield ()
        return
    for k in range(budget + 1):
        for rest in _compositions(q - 1, budget - k):
            yield (k,) + rest


class SimplexGrid:
    """Lattice points of Delta_q at resolution m."""

    def __init__(self, degree: int, resolution: int):
        if degree < 0 or resolution < 1:
            raise ValueError(f"Invalid grid Delta_{degree} at resolution {resolution}")
        self.degree = degree
        self.resolution = resolution
        rows = list(_compositions(degree, resolution))
        coords = np.array(rows, dtype=np.int64).reshape(len(rows), degree)
        self.barycentric = np.concatenate([resolution - coords.sum(axis=1, keepdims=True), coords], axis=1)
        self._index = {tuple(row): i for i, row in enumerate(coords.tolist())}

    def __len__(self) -> int:
        return len(self.barycentric)

    def locate(self, bary) -> int:
        return self._index[tuple(int(k) for k in bary[1:])]

    def locate_many(self, bary: np.ndarray) -> np.ndarray:
        return np.fromiter((self._index[tuple(row)] for row in bary[:, 1:].tolist()), dtype=np.int64, count=len(bary))

    def on_face(self, j: int) -> np.ndarray:
        """Indices of the points on the j-th face (k_j = 0)."""
        return np.flatnonzero(self.barycentric[:, j] == 0)

    def push(self, theta: MonotoneMap, target: "SimplexGrid") -> np.ndarray:
        """Index in `target` of theta_* p for every point p of this grid."""
        if theta.source != self.degree or theta.target != target.degree:
            raise ValueError(f"Map [{theta.source}]->[{theta.target}] does not fit Delta_{self.degree} -> Delta_{target.degree}")
        image = np.zeros((len(self), target.degree + 1), dtype=np.int64)
        for p, v in enumerate(theta.values):
            image[:, v] += self.barycentric[:, p]
        return target.locate_many(image)


@lru_cache(maxsize=32)
def simplex_grid(degree: int, resolution: int) -> SimplexGrid:
    return SimplexGrid(degree, resolution)


@dataclass(frozen=True)
class RealizationPoint:
    """psi[q] has shape (len(grid(q)), |X_q|, d, d)."""
    spec: GroupSpec
    resolution: int
    psi: tuple[np.ndarray, ...]

    def __post_init__(self) -> None:
        arrays = []
        for q, values in enumerate(self.psi):
            values = np.array(values, dtype=complex)
            n = len(simplex_grid(q, self.resolution))
            if values.ndim != 4 or values.shape[0] != n or values.shape[2:] != (self.spec.size, self.spec.size):
                raise ValueError(f"psi_{q} has shape {values.shape}, expected ({n}, |X_{q}|, {self.spec.size}, {self.spec.size})")
            values.setflags(write=False)
            arrays.append(values)
        object.__setattr__(self, "psi", tuple(arrays))

    @property
    def top_degree(self) -> int:
        return len(self.psi) - 1

    def grid(self, q: int) -> SimplexGrid:
        return simplex_grid(q, self.resolution)

    def replace(self, q: int, values: np.ndarray) -> "RealizationPoint":
        psi = list(self.psi)
        psi[q] = values
        return RealizationPoint(self.spec, self.resolution, tuple(psi))


@dataclass
class ValidationReport:
    boundary: float = 0.0
    coface: float = 0.0
    membership: float = 0.0
    tol: float = 1e-9
    worst: dict = field(default_factory=dict)

    @property
    def max_violation(self) -> float:
        return max(self.boundary, self.coface, self.membership)

    @property
    def passed(self) -> bool:
        return self.max_violation <= self.tol

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "boundary_violation": self.boundary,
            "coface_violation": self.coface,
            "membership_violation": self.membership,
            "max_violation": self.max_violation,
            "tol": self.tol,
            "worst": self.worst,
        }


# -- hom data from primitive coordinates -------------------------------------

class HomTable:
    """Values of phi_q on every free generator of K_q over the whole grid, built lazily."""

    def __init__(self, point: RealizationPoint, K: FreeSimplicialGroup, q: int):
        self.point, self.K, self.q = point, K, q
        self._cache: dict[GenRef, np.ndarray] = {}
        self._columns = {k: {x: i for i, x in enumerate(K.basis(k))} for k in range(q + 1)}

    def __call__(self, gen: GenRef) -> np.ndarray:
        if gen not in self._cache:
            if gen.degree != self.q:
                raise ValueError(f"Generator {gen} does not live in degree {self.q}")
            k = gen.base.degree
            alpha = MonotoneMap.from_degeneracy(gen.prefix, self.q)
            idx = self.point.grid(self.q).push(alpha, self.point.grid(k))
            self._cache[gen] = self.point.psi[k][idx, self._columns[k][gen.base]]
        return self._cache[gen]


def hom_values(point: RealizationPoint, K: FreeSimplicialGroup, q: int, index: int) -> dict[GenRef, np.ndarray]:
    """Hom(K_q, G) datum at one grid point, on all free generators of K_q."""
    table = HomTable(point, K, q)
    return {g: table(g)[index] for g in K.enumerate_generators(q)}


def coface_last(K: FreeSimplicialGroup, point: RealizationPoint, q: int) -> np.ndarray:
    """Attaching words of X_q evaluated under phi_{q-1}: shape (len(grid(q-1)), |X_q|, d, d)."""
    spec = point.spec
    n = len(point.grid(q - 1))
    table = HomTable(point, K, q - 1)
    columns = []
    for x in K.basis(q):
        value = eval_word(K.attach[x], table, spec)
        columns.append(np.broadcast_to(value, (n, spec.size, spec.size)))
    if not columns:
        return np.zeros((n, 0, spec.size, spec.size), dtype=complex)
    return np.stack(columns, axis=1)


def validate_point(point: RealizationPoint, K: FreeSimplicialGroup, tol: float | None = None) -> ValidationReport:
    spec = point.spec
    report = ValidationReport(tol=spec.tol if tol is None else tol)
    for q, values in enumerate(point.psi):
        if len(K.basis(q)) != values.shape[1]:
            raise ValueError(f"psi_{q} carries {values.shape[1]} generators, X_{q} has {len(K.basis(q))}")
        if values.size:
            report.membership = max(report.membership, spec.drift(values))
        if q == 0 or not values.shape[1]:
            continue
        grid = point.grid(q)
        e = spec.identity()
        for j in range(q):
            idx = grid.on_face(j)
            dist = spec.distance(values[idx], e)
            if dist.size and dist.max() > report.boundary:
                report.boundary = float(dist.max())
                report.worst["boundary"] = {"degree": q, "face": j, "point": grid.barycentric[idx[np.unravel_index(dist.argmax(), dist.shape)[0]]].tolist()}
        expected = coface_last(K, point, q)
        idx = point.grid(q - 1).push(MonotoneMap.coface(q, q), grid)
        dist = spec.distance(values[idx], expected)
        if dist.size and dist.max() > report.coface:
            report.coface = float(dist.max())
            report.worst["coface"] = {"degree": q, "point": grid.barycentric[idx[np.unravel_index(dist.argmax(), dist.shape)[0]]].tolist()}
    logging.debug(f"Validation: boundary {report.boundary:.3e}, coface {report.coface:.3e}")
    return report


# -- constructors ------------------------------------------------------------

def _largest_remainder(scaled: np.ndarray, total: np.ndarray) -> np.ndarray:
    """Round rows of nonnegative reals to integers with the given row sums; zeros stay zero."""
    floor = np.floor(scaled).astype(np.int64)
    need = total - floor.sum(axis=1)
    order = np.argsort(-(scaled - floor), axis=1, kind="stable")
    ranks = np.argsort(order, axis=1, kind="stable")
    return floor + (ranks < need[:, None])


def cone_extension(spec: GroupSpec, grid: SimplexGrid, last_grid: SimplexGrid, last: np.ndarray) -> np.ndarray:
    """
    Extend last-face values (e on the boundary of the last face) over Delta_q:
    the value at t is exp((1 - t_q) log L(pi t)), pi the radial projection from
    the last vertex onto the last face.
    """
    q, m = grid.degree, grid.resolution
    bary = grid.barycentric
    s = m - bary[:, q]
    inside = s > 0
    proj = np.zeros((len(grid), q), dtype=np.int64)
    scaled = bary[inside, :q] * (m / s[inside])[:, None]
    proj[inside] = _largest_remainder(scaled, np.full(int(inside.sum()), m))
    out = spec.identity((len(grid), last.shape[1]))
    if inside.any():
        idx = last_grid.locate_many(proj[inside])
        weight = (s[inside] / m)[:, None, None]
        out[inside] = spec.exp(weight * spec.log(last[idx]))
        on_last = bary[:, q] == 0
        # the last face carries the prescribed values exactly
        out[on_last] = last[last_grid.locate_many(bary[on_last, :q])]
    return out


def complete_point(
    K: FreeSimplicialGroup,
    spec: GroupSpec,
    m: int,
    data: Mapping[int, np.ndarray] | None = None,
    top_degree: int | None = None,
) -> RealizationPoint:
    """
    Build a point from free data: data[q] (shape (len(grid(q)), |X_q|, d, d))
    is used as given, every other degree is filled in by the cone extension of
    its last-face values. psi_0 defaults to the identity.
    """
    data = dict(data or {})
    if top_degree is None:
        top_degree = K.top_degree
    psi: list[np.ndarray] = []
    for q in range(top_degree + 1):
        grid = simplex_grid(q, m)
        if q in data:
            psi.append(np.asarray(data[q], dtype=complex))
        elif q == 0 or not K.basis(q):
            psi.append(spec.identity((len(grid), len(K.basis(q)))))
        else:
            partial = RealizationPoint(spec, m, tuple(psi) + (spec.identity((len(grid), len(K.basis(q)))),))
            last = coface_last(K, partial, q)
            psi.append(cone_extension(spec, grid, simplex_grid(q - 1, m), last))
    return RealizationPoint(spec, m, tuple(psi))


def surface_relator_value(w: np.ndarray, spec: GroupSpec) -> np.ndarray:
    """Prod [w_1, w_2] ... [w_{2l-1}, w_{2l}] evaluated on a (2l, d, d) array."""
    if len(w) % 2:
        raise ValueError(f"A surface point needs an even number of holonomies, got {len(w)}")
    gens = [GenRef(BaseGen(f"g{i}", 0)) for i in range(len(w))]
    relator = product((commutator(Word.generator(gens[2 * j]), Word.generator(gens[2 * j + 1]))
                       for j in range(len(w) // 2)), 0)
    return eval_word(relator, dict(zip(gens, w)), spec)


def surface_point(K: FreeSimplicialGroup, spec: GroupSpec, w: np.ndarray, path: np.ndarray) -> RealizationPoint:
    """
    The point (w, phi) of the surface fibre: psi_0 = w and psi_1(k_1) = path(1 - k_1 / m),
    so the face k_1 = m is e and the last face k_1 = 0 is r(w). `path` runs from e to r(w)
    in m + 1 samples.
    """
    w = np.asarray(w, dtype=complex)
    path = np.asarray(path, dtype=complex)
    m = len(path) - 1
    if w.shape[0] != len(K.basis(0)):
        raise ValueError(f"Expected {len(K.basis(0))} holonomies, got {w.shape[0]}")
    psi0 = w[None]
    psi1 = path[::-1][:, None]
    return RealizationPoint(spec, m, (psi0, psi1))


def four_complex_point(K: FreeSimplicialGroup, spec: GroupSpec, phi1: np.ndarray) -> RealizationPoint:
    """Point of the four-dimensional model from phi_1 of shape (m + 1, l, d, d), indexed by k_1."""
    phi1 = np.asarray(phi1, dtype=complex)
    m = len(phi1) - 1
    ell = len(K.basis(1))
    if phi1.shape[1] != ell:
        raise ValueError(f"phi_1 carries {phi1.shape[1]} loops, the complex has {ell} 2-cells")
    return complete_point(K, spec, m, {0: spec.identity((1, 0)), 1: phi1})


# -- cosimplicial action and primitivity --------------------------------------

def pushforward(
    K: FreeSimplicialGroup,
    theta: MonotoneMap,
    hom: Mapping[GenRef, object],
    spec: GroupSpec | None = None,
) -> dict[GenRef, object]:
    """
    H(theta): Hom(K_source, G) -> Hom(K_target, G), alpha -> alpha o K(theta).
    Without a group spec the values of `hom` are Words and the result is exact.
    """
    out = {}
    for g in K.enumerate_generators(theta.target):
        word = K.apply_monotone(theta, Word.generator(g))
        if spec is None:
            out[g] = substitute_words(word, hom, next(iter(hom.values())).degree if hom else 0)
        else:
            out[g] = eval_word(word, hom, spec)
    return out


def primitive_decompose(hom: Mapping[GenRef, object]) -> dict[int, dict[tuple[int, ...], dict[BaseGen, object]]]:
    """Regroup a hom on K_q as one block G^{X_k} per surjection [q] -> [k] (a degeneracy prefix)."""
    blocks: dict[int, dict[tuple[int, ...], dict[BaseGen, object]]] = {}
    for gen, value in hom.items():
        blocks.setdefault(gen.base.degree, {}).setdefault(gen.prefix, {})[gen.base] = value
    return {k: dict(sorted(v.items(), reverse=True)) for k, v in sorted(blocks.items())}


def primitive_recompose(blocks: Mapping[int, Mapping[tuple[int, ...], Mapping[BaseGen, object]]]) -> dict[GenRef, object]:
    return {GenRef(x, prefix): value for by_prefix in blocks.values() for prefix, values in by_prefix.items()
            for x, value in values.items()}


# -- surface classification ---------------------------------------------------

def classify_component(w: np.ndarray, phi: np.ndarray, spec: GroupSpec, strategy: str = "geodesic") -> int:
    """
    pi_1(G)-class of the surface point (w, phi): the loop phi followed by the
    reverse of psi(t) = prod [u_{2j-1}(t), u_{2j}(t)], u_j paths from e to w_j.
    """
    w = np.asarray(w, dtype=complex)
    phi = np.asarray(phi, dtype=complex)
    m = len(phi) - 1
    e = spec.identity()
    target = surface_relator_value(w, spec)
    closure = 10 * spec.tol
    if not spec.equal(phi[0], e, closure):
        raise EndpointMismatchError(f"Path starts {float(spec.distance(phi[0], e)):.3e} away from e")
    if not spec.equal(phi[-1], target, closure):
        raise EndpointMismatchError(f"Path ends {float(spec.distance(phi[-1], target)):.3e} away from r(w)")
    try:
        make_path = PATH_STRATEGIES[strategy]
    except KeyError:
        raise ValueError(f"Unknown path strategy {strategy!r}, expected one of {sorted(PATH_STRATEGIES)}") from None
    u = np.stack([make_path(g, spec, m) for g in w], axis=1) if len(w) else np.zeros((m + 1, 0, spec.size, spec.size))
    psi = surface_relator_value(np.moveaxis(u, 1, 0), spec) if len(w) else spec.identity((m + 1,))
    loop = np.concatenate([phi, psi[::-1][1:]])
    return loop_class(loop, spec)


# -- the tau map ---------------------------------------------------------------

def eta_maps(point) -> tuple[tuple, tuple]:
    """Barycentric (t0, t1, t2) -> ((t0 + t1, t2), (t0, t1 + t2))."""
    return MonotoneMap.codegeneracy(0, 1).act(point), MonotoneMap.codegeneracy(1, 1).act(point)


def tau(phi1: np.ndarray, r: Word, spec: GroupSpec) -> np.ndarray:
    """
    r evaluated at (phi_1 o eta^0, phi_1 o eta^1) over the grid of Delta_2;
    phi1 has shape (m + 1, l, d, d) and is indexed by the t_1 coordinate.
    """
    phi1 = np.asarray(phi1, dtype=complex)
    m, ell = phi1.shape[0] - 1, phi1.shape[1]
    grid1, grid2 = simplex_grid(1, m), simplex_grid(2, m)
    spheres = [BaseGen(f"x{j}", 1) for j in range(1, ell + 1)]
    word = expand_gamma_word(r, spheres)
    maps = {0: grid2.push(MonotoneMap.codegeneracy(0, 1), grid1), 1: grid2.push(MonotoneMap.codegeneracy(1, 1), grid1)}
    column = {x: j for j, x in enumerate(spheres)}

    def lookup(gen: GenRef) -> np.ndarray:
        (i,) = gen.prefix
        return phi1[maps[i], column[gen.base]]

    value = eval_word(word, lookup, spec)
    return np.broadcast_to(value, (len(grid2), spec.size, spec.size)).copy()


def spine_loop(K: FreeSimplicialGroup, point: RealizationPoint, cell: BaseGen) -> np.ndarray:
    """The loop d_2 sigma evaluated on the degree-1 grid: the fibre map to Omega G of a 3-cell."""
    if cell.degree != 2:
        raise ValueError(f"{cell} is not a 3-cell generator")
    table = HomTable(point, K, 1)
    value = eval_word(K.attach[cell], table, point.spec)
    return np.broadcast_to(value, (len(point.grid(1)), point.spec.size, point.spec.size)).copy()


# -- JSON ----------------------------------------------------------------------

def point_to_json(point: RealizationPoint, K: FreeSimplicialGroup) -> dict:
    return {
        "group": point.spec.variant,
        "tol": point.spec.tol,
        "resolution": point.resolution,
        "degrees": [
            {"degree": q, "generators": [x.name for x in K.basis(q)], "values": matrix_to_json(values)}
            for q, values in enumerate(point.psi)
        ],
    }


def point_from_json(data: Mapping, K: FreeSimplicialGroup, spec: GroupSpec | None = None) -> RealizationPoint:
    if spec is None:
        spec = GroupSpec(data["group"], data.get("tol", 1e-9))
    m = int(data["resolution"])
    psi = []
    for q, entry in enumerate(sorted(data["degrees"], key=lambda d: d["degree"])):
        if entry["degree"] != q:
            raise ValueError(f"Realization degrees must be consecutive from 0, got {entry['degree']} at position {q}")
        names = [x.name for x in K.basis(q)]
        if list(entry["generators"]) != names:
            raise ValueError(f"Degree {q} lists generators {entry['generators']}, the complex has {names}")
        n = len(simplex_grid(q, m))
        values = matrix_from_json(entry["values"]) if names else np.zeros((n, 0, spec.size, spec.size))
        psi.append(values.reshape(n, len(names), spec.size, spec.size))
    return RealizationPoint(spec, m, tuple(psi))

