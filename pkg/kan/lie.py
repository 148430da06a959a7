"""
Matrix Lie groups U(1), SU(2) and SO(3).

Elements are numpy arrays of shape (..., d, d) with d = 1 for U(1) and d = 2
otherwise; SO(3) is carried by its SU(2) lift and every SO(3) comparison is
taken up to sign. Algebra coordinates are the angle for U(1) and the
coefficients in the quaternion basis i, j, k for SU(2), scaled so that the
Euclidean norm of the coordinates is the bi-invariant norm (Frobenius / sqrt 2).
All kernels broadcast over leading axes.
"""
from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass
from typing import Callable, Mapping

import numpy as np
from scipy.linalg import polar

from kan.words import GenRef, UnboundGeneratorError, Word, substitute


class RenormalizationError(ArithmeticError):
    pass


class LoopNotClosedError(ValueError):
    pass


class StepTooCoarseError(ValueError):
    pass


VARIANTS = ("U1", "SU2", "SO3")

# adjacent samples further apart than this cannot be lifted unambiguously
MAX_STEP = np.pi / 2


def quaternion_units() -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """(1, i, j, k) as 2x2 complex matrices with ij = k."""
    one = np.eye(2, dtype=complex)
    qi = np.array([[1j, 0], [0, -1j]])
    qj = np.array([[0, 1], [-1, 0]], dtype=complex)
    qk = np.array([[0, 1j], [1j, 0]])
    return one, qi, qj, qk


_ONE, _QI, _QJ, _QK = quaternion_units()
_BASIS = np.stack([_QI, _QJ, _QK])


def _su2_params(g: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """g = a0 + a i + b j + c k; returns (a0, (a, b, c))."""
    a0 = 0.5 * (g[..., 0, 0].real + g[..., 1, 1].real)
    vec = np.stack([0.5 * (g[..., 0, 0].imag - g[..., 1, 1].imag),
                    0.5 * (g[..., 0, 1].real - g[..., 1, 0].real),
                    0.5 * (g[..., 0, 1].imag + g[..., 1, 0].imag)], axis=-1)
    return a0, vec


@dataclass(frozen=True)
class GroupSpec:
    variant: str
    tol: float = 1e-9
    renorm_every: int = 64

    def __post_init__(self) -> None:
        variant = self.variant.upper()
        if variant not in VARIANTS:
            raise ValueError(f"Unknown group {self.variant!r}, expected one of {VARIANTS}")
        object.__setattr__(self, "variant", variant)
        if self.tol <= 0:
            raise ValueError(f"Tolerance must be positive, got {self.tol}")

    @property
    def size(self) -> int:
        return 1 if self.variant == "U1" else 2

    @property
    def algebra_dim(self) -> int:
        return 1 if self.variant == "U1" else 3

    @property
    def abelian(self) -> bool:
        return self.variant == "U1"

    # -- group operations ----------------------------------------------------

    def identity(self, shape: tuple[int, ...] = ()) -> np.ndarray:
        return np.broadcast_to(np.eye(self.size, dtype=complex), shape + (self.size, self.size)).copy()

    def inverse(self, g: np.ndarray) -> np.ndarray:
        return np.conj(np.swapaxes(g, -1, -2))

    def multiply(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        return a @ b

    def exp(self, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        if self.variant == "U1":
            return np.exp(1j * v[..., 0])[..., None, None]
        theta = np.linalg.norm(v, axis=-1)
        scale = np.sinc(theta / np.pi)
        algebra = np.einsum("...a,aij->...ij", v * scale[..., None], _BASIS)
        return np.cos(theta)[..., None, None] * _ONE + algebra

    def log(self, g: np.ndarray) -> np.ndarray:
        """Principal logarithm; at -1 in SU(2) the k axis is taken."""
        g = np.asarray(g)
        if self.variant == "U1":
            return np.angle(g[..., 0, 0])[..., None]
        a0, vec = _su2_params(g)
        if self.variant == "SO3":
            # the lift closest to the identity
            sign = np.where(a0 < 0, -1.0, 1.0)
            a0, vec = a0 * sign, vec * sign[..., None]
        s = np.linalg.norm(vec, axis=-1)
        theta = np.arctan2(s, a0)
        with np.errstate(divide="ignore", invalid="ignore"):
            factor = np.where(s > 0, theta / np.where(s > 0, s, 1.0), 1.0)
        out = vec * factor[..., None]
        cut = (s <= 1e-15) & (a0 < 0)
        if np.any(cut):
            out = np.where(cut[..., None], np.array([0.0, 0.0, np.pi]), out)
        return out

    def norm(self, v: np.ndarray) -> np.ndarray:
        return np.linalg.norm(v, axis=-1)

    def distance(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        if self.variant == "U1":
            return np.abs(a[..., 0, 0] - b[..., 0, 0])
        d = np.linalg.norm(a - b, axis=(-2, -1)) / np.sqrt(2)
        if self.variant == "SO3":
            d = np.minimum(d, np.linalg.norm(a + b, axis=(-2, -1)) / np.sqrt(2))
        return d

    def equal(self, a: np.ndarray, b: np.ndarray, tol: float | None = None) -> bool:
        return bool(np.all(self.distance(a, b) <= (self.tol if tol is None else tol)))

    # -- invariants ----------------------------------------------------------

    def drift(self, g: np.ndarray) -> float:
        g = np.asarray(g)
        gram = g @ self.inverse(g) - np.eye(self.size)
        drift = float(np.max(np.abs(gram), initial=0.0))
        if self.size == 2:
            drift = max(drift, float(np.max(np.abs(np.linalg.det(g) - 1), initial=0.0)))
        return drift

    def is_element(self, g: np.ndarray) -> bool:
        return self.drift(g) <= self.tol

    def renormalize(self, g: np.ndarray, check: bool = True) -> np.ndarray:
        """Polar projection back onto the group."""
        g = np.asarray(g, dtype=complex)
        if check:
            drift = self.drift(g)
            if drift > 10 * self.tol:
                raise RenormalizationError(f"Group invariant drifted by {drift:.3e} (limit {10 * self.tol:.1e})")
        if self.variant == "U1":
            return g / np.abs(g)
        flat = g.reshape(-1, 2, 2)
        unitary = np.stack([polar(m)[0] for m in flat])
        unitary = unitary / np.sqrt(np.linalg.det(unitary))[:, None, None]
        return unitary.reshape(g.shape)

    def random_element(self, rng: np.random.Generator, shape: tuple[int, ...] = ()) -> np.ndarray:
        """Haar-distributed sample."""
        if self.variant == "U1":
            return np.exp(1j * rng.uniform(0, 2 * np.pi, size=shape))[..., None, None]
        a = rng.normal(size=shape + (4,))
        a /= np.linalg.norm(a, axis=-1, keepdims=True)
        return a[..., 0, None, None] * _ONE + np.einsum("...a,aij->...ij", a[..., 1:], _BASIS)

    def project_so3(self, g: np.ndarray) -> np.ndarray:
        """The 2:1 map SU(2) -> SO(3), rotation matrix of v -> g v g^-1 on pure quaternions."""
        if self.variant == "U1":
            raise ValueError("project_so3 needs an SU(2) lift")
        conj = np.einsum("...ij,bjk,...lk->...bil", g, _BASIS, np.conj(g))
        return -0.5 * np.einsum("aij,...bji->...ab", _BASIS, conj).real


def group_spec(name: str, tol: float = 1e-9) -> GroupSpec:
    return GroupSpec(name, tol)


# -- words and paths ---------------------------------------------------------

def eval_word(
    w: Word,
    assignment: Mapping[GenRef, np.ndarray] | Callable[[GenRef], np.ndarray],
    spec: GroupSpec,
) -> np.ndarray:
    """Evaluate w homomorphically; assigned values may carry leading batch axes."""
    counter = itertools.count(1)

    def mul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
        out = a @ b
        if next(counter) % spec.renorm_every == 0:
            out = spec.renormalize(out)
        return out

    lookup = assignment if callable(assignment) else assignment.__getitem__
    result = substitute(w, lambda g: np.asarray(lookup(g), dtype=complex), one=spec.identity(), mul=mul,
                        inv=spec.inverse)
    drift = spec.drift(result)
    if drift > 10 * spec.tol:
        raise RenormalizationError(f"Value of {w} drifted off the group by {drift:.3e}")
    return result


def assignment_by_name(values: Mapping[str, np.ndarray]) -> Callable[[GenRef], np.ndarray]:
    """Assignment on base generator names; degenerate letters are rejected."""
    def lookup(gen: GenRef) -> np.ndarray:
        if gen.is_degenerate or gen.base.name not in values:
            raise UnboundGeneratorError(f"No value assigned to {gen}")
        return values[gen.base.name]
    return lookup


def geodesic_path(g: np.ndarray, spec: GroupSpec, samples: int) -> np.ndarray:
    """exp(t log g) at t = k / samples, k = 0 .. samples."""
    t = np.linspace(0.0, 1.0, samples + 1)
    # for SO(3) the path may end at the other lift -g
    return spec.exp(t[:, None] * spec.log(g)[None, :])


def eager_path(g: np.ndarray, spec: GroupSpec, samples: int) -> np.ndarray:
    """Geodesic over the first half of the interval, constant afterwards."""
    half = samples // 2
    path = np.empty((samples + 1, spec.size, spec.size), dtype=complex)
    path[:half + 1] = geodesic_path(g, spec, half)
    path[half + 1:] = path[half]
    return path


PATH_STRATEGIES: dict[str, Callable[[np.ndarray, GroupSpec, int], np.ndarray]] = {
    "geodesic": geodesic_path,
    "eager": eager_path,
}


def interpolate(samples: np.ndarray, t: float | np.ndarray, spec: GroupSpec) -> np.ndarray:
    """Piecewise-geodesic interpolation of a path sampled at k / m."""
    m = len(samples) - 1
    t = np.clip(np.asarray(t, dtype=float), 0.0, 1.0)
    k = np.minimum(np.floor(t * m).astype(int), m - 1)
    s = t * m - k
    step = spec.log(spec.inverse(samples[k]) @ samples[k + 1])
    return samples[k] @ spec.exp(s[..., None] * step)


def step_sizes(samples: np.ndarray, spec: GroupSpec) -> np.ndarray:
    return spec.norm(spec.log(spec.inverse(samples[:-1]) @ samples[1:]))


def check_steps(samples: np.ndarray, spec: GroupSpec) -> None:
    steps = step_sizes(samples, spec)
    if steps.size and steps.max() >= MAX_STEP:
        k = int(np.argmax(steps))
        raise StepTooCoarseError(f"Samples {k} and {k + 1} are {steps[k]:.3f} apart (limit {MAX_STEP:.3f})")


def loop_class(samples: np.ndarray, spec: GroupSpec) -> int:
    """
    Class in pi_1(G): winding number for U(1), 0 for SU(2), 0 or 1 for SO(3)
    (sign of the endpoint of the continuous lift through SU(2)).
    """
    samples = np.asarray(samples)
    e = spec.identity()
    closure = 10 * spec.tol
    if not (spec.equal(samples[0], e, closure) and spec.equal(samples[-1], e, closure)):
        raise LoopNotClosedError(f"Loop endpoints are {float(spec.distance(samples[0], e)):.3e} and "
                                 f"{float(spec.distance(samples[-1], e)):.3e} away from the identity")
    if spec.variant == "U1":
        z = samples[:, 0, 0]
        increments = np.angle(z[1:] / z[:-1])
        if increments.size and np.abs(increments).max() >= MAX_STEP:
            raise StepTooCoarseError(f"Angular step {np.abs(increments).max():.3f} exceeds {MAX_STEP:.3f}")
        return int(np.rint(increments.sum() / (2 * np.pi)))
    if spec.variant == "SU2":
        check_steps(samples, spec)
        return 0

    lift = GroupSpec("SU2", spec.tol)
    current = samples[0] if np.real(np.trace(samples[0])) >= 0 else -samples[0]
    for h in samples[1:]:
        plus, minus = lift.distance(current, h), lift.distance(current, -h)
        nxt = h if plus <= minus else -h
        if lift.norm(lift.log(lift.inverse(current) @ nxt)) >= MAX_STEP:
            raise StepTooCoarseError("Adjacent SO(3) samples are too far apart to lift")
        current = nxt
    cls = 0 if np.real(np.trace(current)) > 0 else 1
    logging.debug(f"SO(3) lift ends at {'+' if cls == 0 else '-'}1")
    return cls


def winding_loop(spec: GroupSpec, n: int, samples: int) -> np.ndarray:
    """A loop at e in the class n: exp(2 pi n t i) in U(1); n turns about the k axis otherwise."""
    t = np.linspace(0.0, 1.0, samples + 1)
    if spec.variant == "U1":
        return spec.exp(2 * np.pi * n * t[:, None])
    # a full rotation is half a turn of the SU(2) lift
    turn = np.pi if spec.variant == "SO3" else 2 * np.pi
    return spec.exp(np.outer(turn * n * t, [0.0, 0.0, 1.0]))


def random_loop(spec: GroupSpec, rng: np.random.Generator, samples: int, modes: int = 3,
                scale: float = 0.5) -> np.ndarray:
    """exp of a random sine series in the algebra; both endpoints are exactly e."""
    t = np.linspace(0.0, 1.0, samples + 1)
    coeffs = rng.normal(scale=scale, size=(modes, spec.algebra_dim)) / np.arange(1, modes + 1)[:, None]
    v = np.sin(np.pi * np.outer(t, np.arange(1, modes + 1))) @ coeffs
    loop = spec.exp(v)
    loop[0] = loop[-1] = spec.identity()
    return loop
