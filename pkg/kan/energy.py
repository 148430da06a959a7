"""
Discrete path energy on G and its descent on the surface fibre.

For a path sampled at k / m the energy is m * sum_k |log(phi_k^-1 phi_{k+1})|^2,
the Riemann sum of the integral of |phi^-1 phi'|^2. Descent moves the interior
samples by right translation phi_k -> phi_k exp(-h v_k) in body coordinates;
the endpoints stay pinned (phi_0 = e, phi_m = r(w)).
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Literal

import numpy as np
from pydantic import BaseModel, Field
from scipy.linalg import solve_banded
from tqdm import tqdm

from kan.lie import MAX_STEP, PATH_STRATEGIES, GroupSpec, StepTooCoarseError, interpolate, loop_class
from kan.realization import EndpointMismatchError, classify_component, surface_relator_value

# relative round-off allowed when comparing energies near a critical point
ENERGY_SLACK = 1e-12


class FlowConfig(BaseModel):
    steps: int = Field(5000, ge=0)
    step_size: float = Field(1.0, gt=0)
    grid: int = Field(256, ge=8)
    mode: Literal["fix-holonomies", "joint"] = "fix-holonomies"
    stop_grad_norm: float = Field(1e-8, gt=0)
    preconditioner: Literal["sobolev", "none"] = "sobolev"
    max_halvings: int = Field(40, ge=1)
    progress: bool = False


@dataclass
class FlowResult:
    path: np.ndarray
    w: np.ndarray
    trace: list[tuple[int, float, float]] = field(default_factory=list)
    grad_norm: float = float("inf")
    converged: bool = False
    initial_class: int = 0
    final_class: int = 0

    @property
    def energy(self) -> float:
        return self.trace[-1][1] if self.trace else float("nan")

    @property
    def classes_conserved(self) -> bool:
        return self.initial_class == self.final_class

    def summary(self) -> dict:
        return {
            "energy": self.energy,
            "grad_norm": self.grad_norm,
            "converged": self.converged,
            "steps": self.trace[-1][0] if self.trace else 0,
            "initial_class": self.initial_class,
            "final_class": self.final_class,
            "classes_conserved": self.classes_conserved,
        }


def _increments(path: np.ndarray, spec: GroupSpec) -> np.ndarray:
    """Body increments log(phi_k^-1 phi_{k+1}), shape (m, algebra_dim)."""
    return spec.log(spec.inverse(path[:-1]) @ path[1:])


def _check_increments(inc: np.ndarray, spec: GroupSpec) -> np.ndarray:
    norms = spec.norm(inc)
    if norms.size and norms.max() >= MAX_STEP:
        k = int(np.argmax(norms))
        raise StepTooCoarseError(f"Samples {k} and {k + 1} are {norms[k]:.3f} apart (limit {MAX_STEP:.3f})")
    return norms


def energy(path: np.ndarray, spec: GroupSpec) -> float:
    path = np.asarray(path, dtype=complex)
    m = len(path) - 1
    norms = _check_increments(_increments(path, spec), spec)
    return float(m * np.sum(norms ** 2))


def energy_gradient(path: np.ndarray, spec: GroupSpec) -> np.ndarray:
    """Gradient at the interior samples 1 .. m-1: 2m (log(phi_{k-1}^-1 phi_k) - log(phi_k^-1 phi_{k+1}))."""
    path = np.asarray(path, dtype=complex)
    m = len(path) - 1
    inc = _increments(path, spec)
    return 2 * m * (inc[:-1] - inc[1:])


def precondition(grad: np.ndarray, m: int, kind: str = "sobolev") -> np.ndarray:
    """Apply the inverse of 2m * tridiag(-1, 2, -1) (Dirichlet) to an interior gradient."""
    if kind == "none" or len(grad) == 0:
        return grad
    if kind != "sobolev":
        raise ValueError(f"Unknown preconditioner {kind!r}")
    n = len(grad)
    ab = np.zeros((3, n))
    ab[0, 1:] = -2.0 * m
    ab[1, :] = 4.0 * m
    ab[2, :-1] = -2.0 * m
    return solve_banded((1, 1), ab, grad)


def _retract(path: np.ndarray, direction: np.ndarray, h: float, spec: GroupSpec) -> np.ndarray:
    out = path.copy()
    out[1:-1] = path[1:-1] @ spec.exp(-h * direction)
    return out


def write_trace(trace: list[tuple[int, float, float]], path: str) -> None:
    np.savetxt(path, np.asarray(trace, dtype=float).reshape(-1, 3), delimiter=",", header="step,energy,grad_norm",
               comments="", fmt=["%d", "%.12e", "%.12e"])
    logging.info(f"Energy trace written to {path}")


class _Classifier:
    """pi_1 class of (w, phi) with the reference loop psi cached for fixed w."""

    def __init__(self, spec: GroupSpec, strategy: str = "geodesic"):
        self.spec, self.strategy = spec, strategy
        self._key: bytes | None = None
        self._psi_rev: np.ndarray | None = None

    def __call__(self, w: np.ndarray, phi: np.ndarray) -> int:
        if self.spec.variant == "SU2":
            return 0
        key = w.tobytes()
        if key != self._key:
            m = len(phi) - 1
            if len(w):
                u = np.stack([PATH_STRATEGIES[self.strategy](g, self.spec, m) for g in w])
                psi = surface_relator_value(u, self.spec)
            else:
                psi = self.spec.identity((m + 1,))
            self._key, self._psi_rev = key, psi[::-1][1:]
        return loop_class(np.concatenate([phi, self._psi_rev]), self.spec)


def _joint_w_gradient(w: np.ndarray, path: np.ndarray, spec: GroupSpec, eps: float = 1e-6) -> np.ndarray:
    """Central finite differences of the energy in the body coordinates of each w_j (endpoint follows r(w))."""
    grad = np.zeros((len(w), spec.algebra_dim))
    for j in range(len(w)):
        for a in range(spec.algebra_dim):
            step = np.zeros(spec.algebra_dim)
            step[a] = eps
            values = []
            for sign in (1, -1):
                trial = w.copy()
                trial[j] = w[j] @ spec.exp(sign * step)
                moved = path.copy()
                moved[-1] = surface_relator_value(trial, spec)
                values.append(energy(moved, spec))
            grad[j, a] = (values[0] - values[1]) / (2 * eps)
    return grad


def descend(w: np.ndarray, phi0: np.ndarray, cfg: FlowConfig, spec: GroupSpec) -> FlowResult:
    w = np.asarray(w, dtype=complex)
    phi = np.array(phi0, dtype=complex)
    e = spec.identity()
    target = surface_relator_value(w, spec) if len(w) else e
    closure = 10 * spec.tol
    if not spec.equal(phi[0], e, closure) or not spec.equal(phi[-1], target, closure):
        raise EndpointMismatchError("The initial path must run from e to r(w)")
    if len(phi) != cfg.grid + 1:
        logging.info(f"Resampling the initial path from {len(phi) - 1} to {cfg.grid} intervals")
        phi = interpolate(phi, np.linspace(0.0, 1.0, cfg.grid + 1), spec)
    phi[0], phi[-1] = e, target
    m = cfg.grid

    classify = _Classifier(spec)
    initial_class = classify_component(w, phi, spec)
    result = FlowResult(path=phi, w=w, initial_class=initial_class, final_class=initial_class)

    current = energy(phi, spec)
    h = cfg.step_size
    step = 0
    for step in tqdm(range(cfg.steps + 1), disable=not cfg.progress, desc="descent"):
        grad = energy_gradient(phi, spec)
        w_grad = _joint_w_gradient(w, phi, spec) if cfg.mode == "joint" and len(w) else np.zeros((0,))
        grad_norm = float(np.sqrt(np.sum(grad ** 2) + np.sum(w_grad ** 2)))
        result.trace.append((step, current, grad_norm))
        result.grad_norm = grad_norm
        if grad_norm < cfg.stop_grad_norm:
            result.converged = True
            break
        if step == cfg.steps:
            break

        direction = precondition(grad, m, cfg.preconditioner)
        h = min(cfg.step_size, 2 * h)
        accepted = False
        for _ in range(cfg.max_halvings):
            candidate = _retract(phi, direction, h, spec)
            w_candidate = w
            if w_grad.size:
                w_candidate = w @ spec.exp(-h * w_grad)
                candidate[-1] = surface_relator_value(w_candidate, spec)
            try:
                trial = energy(candidate, spec)
            except StepTooCoarseError:
                h *= 0.5
                continue
            if trial <= current + ENERGY_SLACK * max(1.0, current) and classify(w_candidate, candidate) == initial_class:
                phi, w, current, accepted = candidate, w_candidate, trial, True
                break
            h *= 0.5
        if not accepted:
            logging.info(f"Line search stalled at step {step} (energy {current:.6e}, grad norm {grad_norm:.2e})")
            break

    result.path, result.w = phi, w
    result.final_class = classify(w, phi)
    logging.info(f"Descent stopped after {step} steps: energy {current:.6e}, grad norm {result.grad_norm:.2e}, "
                 f"converged {result.converged}")
    return result
