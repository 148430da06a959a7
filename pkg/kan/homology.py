"""
Abelianized Moore complex and integer homology.

The normalized chain complex of K^ab is free abelian on X_k in degree k; a
generator x has boundary (-1)^k times the exponent vector of its attaching
word with degenerate letters projected out (its other faces are e).
"""
from __future__ import annotations

import io
import logging
import os
from typing import Mapping, Sequence

import numpy as np
from sympy import Matrix, ZZ
from sympy.matrices.normalforms import smith_normal_form

from kan.simplicial import FreeSimplicialGroup
from kan.words import exponent_vector


def normalized_complex(K: FreeSimplicialGroup, max_degree: int) -> dict[int, np.ndarray]:
    """Boundary matrices d_k: C_k -> C_{k-1} for 1 <= k <= max_degree (rows X_{k-1}, columns X_k)."""
    boundaries = {}
    for k in range(1, max_degree + 1):
        rows = {x: i for i, x in enumerate(K.basis(k - 1))}
        cols = K.basis(k)
        mat = np.zeros((len(rows), len(cols)), dtype=np.int64)
        for c, x in enumerate(cols):
            for gen, count in exponent_vector(K.attach[x]).items():
                if not gen.is_degenerate:
                    mat[rows[gen.base], c] += (-1) ** k * count
        boundaries[k] = mat
    return boundaries


def smith_invariants(mat: np.ndarray) -> list[int]:
    """Nonzero diagonal entries of the Smith normal form (absolute values)."""
    if 0 in mat.shape or not mat.any():
        return []
    snf = smith_normal_form(Matrix(mat.tolist()), domain=ZZ)
    diag = [abs(int(snf[i, i])) for i in range(min(snf.shape))]
    return [d for d in diag if d != 0]


def chain_homology(dims: Sequence[int], boundaries: Mapping[int, np.ndarray]) -> list[tuple[int, list[int]]]:
    """
    (betti, torsion) of a chain complex with C_n of rank dims[n] and
    d_n = boundaries[n]: C_n -> C_{n-1}; missing boundaries are zero.
    """
    ranks, torsion = {}, {}
    for n in range(len(dims) + 1):
        mat = boundaries.get(n)
        if mat is None:
            ranks[n], torsion[n] = 0, []
            continue
        invariants = smith_invariants(np.asarray(mat))
        ranks[n] = len(invariants)
        torsion[n] = [d for d in invariants if d > 1]
    result = []
    for n, dim in enumerate(dims):
        betti = dim - ranks[n] - ranks[n + 1]
        result.append((betti, torsion[n + 1]))
    return result


def homology(K: FreeSimplicialGroup, max_degree: int | None = None) -> list[dict]:
    """H_n of the normalized complex for 0 <= n <= max_degree, as JSON-ready records."""
    if max_degree is None:
        max_degree = K.top_degree
    top = min(max_degree, K.top_degree) + 1
    boundaries = normalized_complex(K, top)
    dims = [len(K.basis(n)) for n in range(max_degree + 1)]
    records = []
    for n, (betti, torsion) in enumerate(chain_homology(dims, boundaries)):
        records.append({"degree": n, "betti": betti, "torsion": torsion})
        logging.debug(f"H_{n}: betti {betti}, torsion {torsion}")
    return records


def boundary_csv(mat: np.ndarray) -> str:
    buffer = io.StringIO()
    np.savetxt(buffer, mat, fmt="%d", delimiter=",")
    return buffer.getvalue()


def write_boundaries(boundaries: Mapping[int, np.ndarray], directory: str) -> list[str]:
    """Write d_k as d<k>.csv under directory; returns the file names."""
    os.makedirs(directory, exist_ok=True)
    names = []
    for k, mat in sorted(boundaries.items()):
        name = f"d{k}.csv"
        with open(os.path.join(directory, name), "w") as file:
            file.write(boundary_csv(mat))
        names.append(name)
    logging.info(f"Wrote {len(names)} boundary matrices to {directory}")
    return names


def is_chain_complex(boundaries: Mapping[int, np.ndarray]) -> bool:
    for k, mat in boundaries.items():
        nxt = boundaries.get(k + 1)
        if nxt is not None and mat.size and nxt.size and (mat @ nxt).any():
            return False
    return True
