"""
Command dispatch for main.py.

`execute(cfg)` validates the composed hydra config, runs one command and
returns (exit code, JSON payload); `run(cfg)` also prints or writes the
payload. Exit codes: 0 success, 1 invalid input, 2 validation failure,
3 numeric non-convergence.
"""
from __future__ import annotations

import logging
import os
import re
from typing import Any, Literal

import numpy as np
from hydra.utils import to_absolute_path
from omegaconf import DictConfig, OmegaConf
from pydantic import BaseModel, Field, ValidationError

from kan.cw import (FIXTURES, InvalidAttachingError, ReducedCWComplex, cellular_homology, determinant, gamma_symbols,
                    intersection_form, kan_group, load_complex, substitute_identity, surface)
from kan.energy import FlowConfig, descend, write_trace
from kan.homology import homology, normalized_complex, write_boundaries
from kan.lie import (GroupSpec, LoopNotClosedError, RenormalizationError, StepTooCoarseError, eval_word,
                     assignment_by_name, geodesic_path, random_loop, winding_loop)
from kan.realization import (EndpointMismatchError, classify_component, complete_point, four_complex_point,
                             point_from_json, point_to_json, simplex_grid, surface_point, surface_relator_value,
                             tau, validate_point)
from kan.words import BaseGen, DegreeMismatchError, Word, UnboundGeneratorError, WordSyntaxError, format_word, parse_word
from utils.utils import dump_json, format_table, load_json, matrix_from_json, matrix_to_json

COMMANDS = ("build-kan", "homology", "check-identity", "eval-word", "classify", "validate-point", "tau", "flow",
            "intersection-form")

EXIT_OK, EXIT_INVALID, EXIT_VALIDATION, EXIT_NONCONVERGENCE = 0, 1, 2, 3

INPUT_ERRORS = (ValidationError, InvalidAttachingError, WordSyntaxError, UnboundGeneratorError, DegreeMismatchError,
                EndpointMismatchError, LoopNotClosedError, StepTooCoarseError, RenormalizationError,
                FileNotFoundError, ValueError, KeyError)


class CommandConfig(BaseModel):
    command: Literal[COMMANDS]
    complex: str | None = None
    group: Literal["U1", "SU2", "SO3"] = "U1"
    max_degree: int | None = Field(None, ge=0)
    grid: int = Field(128, ge=1)
    tol: float = Field(1e-9, gt=0)
    seed: int = 0
    out: str | None = None
    pretty: bool = False
    genus: int = Field(1, ge=0)
    winding: int = 0
    word: str | None = None
    ell: int | None = Field(None, ge=1)
    assign: dict[str, Any] | None = None
    point: str | None = None
    trace: str | None = None
    csv: str | None = None
    strategy: Literal["geodesic", "eager"] = "geodesic"
    flow: FlowConfig = FlowConfig()

    @property
    def spec(self) -> GroupSpec:
        return GroupSpec(self.group, self.tol)


def command_config(cfg: DictConfig) -> CommandConfig:
    data = OmegaConf.to_container(cfg, resolve=True)
    data.pop("hydra", None)
    group = data.pop("group", None)
    if isinstance(group, dict):
        data["group"] = str(group.get("name", "U1")).upper()
    elif group is not None:
        data["group"] = str(group).upper()
    flow = dict(data.get("flow") or {})
    if data.get("command") == "flow":
        flow.setdefault("grid", data.get("grid", 128))
    data["flow"] = flow
    return CommandConfig.model_validate(data)


# -- inputs ------------------------------------------------------------------

def resolve_complex(ref: str | None, default: str | None = None) -> ReducedCWComplex:
    """A named fixture (`surface2`) or a JSON file; missing fixture files are regenerated."""
    ref = ref or default
    if ref is None:
        raise ValueError("This command needs complex=<fixture name or JSON file>")
    if ref in FIXTURES:
        return FIXTURES[ref]()
    path = to_absolute_path(ref)
    if not os.path.exists(path):
        stem = os.path.splitext(os.path.basename(path))[0]
        if stem not in FIXTURES:
            raise FileNotFoundError(f"Complex file {path} not found")
        from fixtures.gen_fixtures import generate_fixtures
        logging.info(f"Fixture {path} missing, regenerating fixtures in {os.path.dirname(path)}")
        generate_fixtures(os.path.dirname(path))
    return load_complex(path)


def assignment_value(value: Any, spec: GroupSpec, rng: np.random.Generator) -> np.ndarray:
    """`random`, an algebra vector (a bare angle for U(1)) or a [re, im] matrix."""
    if isinstance(value, str):
        if value != "random":
            raise ValueError(f"Unknown assignment {value!r}")
        return spec.random_element(rng)
    arr = np.asarray(value, dtype=float)
    if arr.ndim <= 1 and arr.size == spec.algebra_dim:
        return spec.exp(arr.reshape(spec.algebra_dim))
    g = matrix_from_json(value)
    if g.shape != (spec.size, spec.size) or not spec.is_element(g):
        raise ValueError(f"Assigned value {value} is not an element of {spec.variant}")
    return g


def surface_fixture(c: CommandConfig, rng: np.random.Generator, wiggle: float = 0.0) -> tuple[np.ndarray, np.ndarray]:
    """Holonomies w and a path e -> r(w) in the class `winding` (for U(1) and SO(3))."""
    spec = c.spec
    w = spec.random_element(rng, (2 * c.genus,))
    target = surface_relator_value(w, spec) if c.genus else spec.identity()
    path = winding_loop(spec, c.winding, c.grid) @ geodesic_path(target, spec, c.grid)
    if wiggle:
        path = path @ random_loop(spec, rng, c.grid, scale=wiggle)
    path[0], path[-1] = spec.identity(), target
    return w, path


def _complex_name(Y: ReducedCWComplex, ref: str | None) -> str:
    return Y.name or os.path.splitext(os.path.basename(ref or ""))[0]


# -- commands ----------------------------------------------------------------

def cmd_build_kan(c: CommandConfig) -> tuple[int, dict]:
    Y = resolve_complex(c.complex)
    K = kan_group(Y, c.max_degree)
    degrees = []
    for q in range(K.max_degree + 1):
        basis = []
        for x in K.basis(q):
            entry = {"name": x.name}
            if q >= 1:
                entry["attach"] = format_word(K.attach[x])
                entry["faces"] = [format_word(K.face(j, Word.generator(x))) for j in range(q + 1)]
            basis.append(entry)
        degrees.append({"degree": q, "basis": basis, "generator_count": K.generator_count(q)})
    return EXIT_OK, {"complex": _complex_name(Y, c.complex), "degrees": degrees}


def cmd_homology(c: CommandConfig) -> tuple[int, dict]:
    Y = resolve_complex(c.complex)
    K = kan_group(Y, c.max_degree)
    records = homology(K, c.max_degree)
    cellular = cellular_homology(Y)
    shifted = [{"degree": n, "betti": b, "torsion": t} for n, (b, t) in enumerate(cellular)]
    payload = {
        "complex": _complex_name(Y, c.complex),
        "homology": {str(r["degree"]): {"betti": r["betti"], "torsion": r["torsion"]} for r in records},
        "cellular_shifted": {str(r["degree"]): {"betti": r["betti"], "torsion": r["torsion"]} for r in shifted},
    }
    if c.csv is not None:
        payload["csv"] = write_boundaries(normalized_complex(K, K.top_degree), to_absolute_path(c.csv))
    return EXIT_OK, payload


def cmd_check_identity(c: CommandConfig) -> tuple[int, dict]:
    Y = resolve_complex(c.complex)
    relators = Y.relators()
    cells = {}
    for cell in Y.cells_of(3):
        if cell not in Y.attach3:
            continue
        reduced = substitute_identity(relators, Y.attach3[cell])
        cells[cell] = {"valid": reduced.is_identity(), "reduced": format_word(reduced)}
    passed = all(v["valid"] for v in cells.values())
    if not passed:
        logging.error(f"Identity among relations does not reduce to e: {cells}")
    return (EXIT_OK if passed else EXIT_VALIDATION), {"complex": _complex_name(Y, c.complex), "cells": cells,
                                                      "passed": passed}


def cmd_eval_word(c: CommandConfig) -> tuple[int, dict]:
    if c.word is None:
        raise ValueError("eval-word needs word=<word>")
    spec = c.spec
    rng = np.random.default_rng(c.seed)
    assign = c.assign or {}
    if c.complex is not None:
        generators = resolve_complex(c.complex).base_generators()
    else:
        names = set(assign) | set(re.findall(r"[A-Za-z_][A-Za-z0-9_]*", c.word)) - {"e"}
        generators = {n: BaseGen(n, 0) for n in names}
    w = parse_word(c.word, generators, degree=None if c.word.strip() not in ("", "e", "1") else 0)
    values = {name: assignment_value(assign[name], spec, rng) for name in sorted(assign)}
    value = eval_word(w, assignment_by_name(values), spec)
    return EXIT_OK, {
        "word": format_word(w),
        "group": spec.variant,
        "value": matrix_to_json(value),
        "distance_to_identity": float(spec.distance(value, spec.identity())),
    }


def cmd_classify(c: CommandConfig) -> tuple[int, dict]:
    spec = c.spec
    if c.point is not None:
        Y = resolve_complex(c.complex, default=f"surface{c.genus}")
        K = kan_group(Y)
        point = point_from_json(load_json(to_absolute_path(c.point)), K, spec)
        w, path = point.psi[0][0], point.psi[1][::-1, 0]
        genus = len(w) // 2
    else:
        w, path = surface_fixture(c, np.random.default_rng(c.seed))
        genus = c.genus
    cls = classify_component(w, path, spec, c.strategy)
    return EXIT_OK, {"class": cls, "group": spec.variant, "genus": genus, "strategy": c.strategy}


def _fixture_point(c: CommandConfig, Y: ReducedCWComplex, K, rng: np.random.Generator):
    spec = c.spec
    if Y.cells_of(4) and Y.attach4:
        loops = np.stack([random_loop(spec, rng, c.grid) for _ in K.basis(1)], axis=1)
        return four_complex_point(K, spec, loops)
    genus = len(Y.cells_of(1)) // 2
    if Y.dimension == 2 and Y.relators() == surface(genus).relators():
        w, path = surface_fixture(c.model_copy(update={"genus": genus}), rng)
        return surface_point(K, spec, w, path)
    psi0 = spec.random_element(rng, (1, len(K.basis(0))))
    return complete_point(K, spec, c.grid, {0: psi0})


def cmd_validate_point(c: CommandConfig) -> tuple[int, dict]:
    spec = c.spec
    Y = resolve_complex(c.complex)
    K = kan_group(Y)
    if c.point is not None:
        point = point_from_json(load_json(to_absolute_path(c.point)), K, spec)
    else:
        point = _fixture_point(c, Y, K, np.random.default_rng(c.seed))
    report = validate_point(point, K)
    payload = {"complex": _complex_name(Y, c.complex), "report": report.to_dict()}
    if c.point is None and c.out is not None:
        payload["point"] = point_to_json(point, K)
    if not report.passed:
        logging.error(f"Realization conditions violated by {report.max_violation:.3e} (tol {report.tol:.1e})")
    return (EXIT_OK if report.passed else EXIT_VALIDATION), payload


def cmd_tau(c: CommandConfig) -> tuple[int, dict]:
    spec = c.spec
    Y = resolve_complex(c.complex, default="cp2")
    if not Y.attach4:
        raise InvalidAttachingError(f"tau needs a complex with a symbolic 4-cell, {_complex_name(Y, c.complex)} has none")
    cell, r = next(iter(Y.attach4.items()))
    K = kan_group(Y)
    if c.point is not None:
        phi1 = point_from_json(load_json(to_absolute_path(c.point)), K, spec).psi[1]
    else:
        rng = np.random.default_rng(c.seed)
        phi1 = np.stack([random_loop(spec, rng, c.grid) for _ in K.basis(1)], axis=1)
    values = tau(phi1, r, spec)
    m = len(phi1) - 1
    bary = simplex_grid(2, m).barycentric
    boundary = (bary == 0).any(axis=1)
    boundary_max = float(spec.distance(values[boundary], spec.identity()).max())
    passed = boundary_max <= spec.tol
    payload = {
        "complex": _complex_name(Y, c.complex),
        "cell": cell,
        "word": format_word(r),
        "resolution": m,
        "boundary_max": boundary_max,
        "passed": passed,
        "points": bary[:, 1:].tolist(),
        "values": matrix_to_json(values),
    }
    return (EXIT_OK if passed else EXIT_VALIDATION), payload


def cmd_flow(c: CommandConfig) -> tuple[int, dict]:
    spec = c.spec
    rng = np.random.default_rng(c.seed)
    w, path = surface_fixture(c.model_copy(update={"grid": c.flow.grid}), rng, wiggle=0.3)
    result = descend(w, path, c.flow, spec)
    if c.trace is not None:
        write_trace(result.trace, to_absolute_path(c.trace))
    payload = {"group": spec.variant, "genus": c.genus, "winding": c.winding, "mode": c.flow.mode,
               **result.summary()}
    if not result.converged:
        logging.error(f"Descent did not reach grad norm {c.flow.stop_grad_norm:.1e} (at {result.grad_norm:.2e})")
        return EXIT_NONCONVERGENCE, payload
    return EXIT_OK, payload


def cmd_intersection_form(c: CommandConfig) -> tuple[int, dict]:
    if c.word is not None:
        indices = [int(k) for pair in re.findall(r"[vw](\d+)(?:_(\d+))?", c.word) for k in pair if k]
        largest = max(indices, default=0)
        if c.ell is not None:
            ell = c.ell
        elif c.complex is not None:
            ell = len(resolve_complex(c.complex).cells_of(2))
        else:
            ell = max(largest, 1)
        if ell < 1:
            raise InvalidAttachingError("intersection-form needs at least one 2-sphere")
        if largest > ell:
            raise InvalidAttachingError(f"Word {c.word} refers to 2-cell {largest} of a wedge of {ell} spheres")
        r = parse_word(c.word, gamma_symbols(ell), degree=2)
        source = c.word
    else:
        Y = resolve_complex(c.complex, default="cp2")
        if not Y.attach4:
            raise InvalidAttachingError("intersection-form needs a complex with a symbolic 4-cell or word=<word>")
        ell = len(Y.cells_of(2))
        r = next(iter(Y.attach4.values()))
        source = _complex_name(Y, c.complex)
    Q = intersection_form(r, ell)
    det = determinant(Q)
    return EXIT_OK, {"source": source, "word": format_word(r), "form": Q.tolist(), "determinant": det,
                     "nondegenerate": det != 0}


HANDLERS = {
    "build-kan": cmd_build_kan,
    "homology": cmd_homology,
    "check-identity": cmd_check_identity,
    "eval-word": cmd_eval_word,
    "classify": cmd_classify,
    "validate-point": cmd_validate_point,
    "tau": cmd_tau,
    "flow": cmd_flow,
    "intersection-form": cmd_intersection_form,
}


def execute(cfg: DictConfig) -> tuple[int, dict]:
    try:
        c = command_config(cfg)
        logging.info(f"Running {c.command} (group {c.group}, seed {c.seed})")
        return HANDLERS[c.command](c)
    except INPUT_ERRORS as e:
        logging.error(f"Invalid input: {type(e).__name__}: {e}")
        return EXIT_INVALID, {"error": type(e).__name__, "message": str(e)}


def _pretty(payload: dict) -> str:
    if "homology" in payload:
        rows = [{"degree": k, **v} for k, v in payload["homology"].items()]
        return format_table(rows, ["degree", "betti", "torsion"])
    if "degrees" in payload:
        rows = [{"degree": d["degree"], "basis": " ".join(b["name"] for b in d["basis"]),
                 "generators": d["generator_count"]} for d in payload["degrees"]]
        return format_table(rows)
    if "form" in payload:
        return "\n".join(" ".join(f"{v:3d}" for v in row) for row in payload["form"])
    return format_table([{k: v for k, v in payload.items() if not isinstance(v, (list, dict))}])


def run(cfg: DictConfig) -> int:
    code, payload = execute(cfg)
    pretty = bool(cfg.get("pretty", False))
    out = cfg.get("out")
    text = dump_json(payload, to_absolute_path(out) if out and code != EXIT_INVALID else None)
    print(_pretty(payload) if pretty and code != EXIT_INVALID else text)
    return code
