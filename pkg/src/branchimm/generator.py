"""Finite truncations of the rate matrices of the process and their jump chains."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .model import ModelSpec, upward_mean

__all__ = ["KINDS", "BOUNDARIES", "GeneratorMatrix", "EmbeddedChain", "build", "embedded"]

KINDS = ("R", "rho", "Q", "Q_absorbed", "Q_birthdeath")
BOUNDARIES = ("reflect_to_N", "absorb_at_N")


@dataclass(frozen=True, eq=False)
class GeneratorMatrix:
    """Truncated rate matrix on states ``0..N-1``.

    With ``absorb_at_N`` an extra cemetery state with index ``N`` collects
    every jump that would leave the truncation; its row is zero.
    """

    kind: str
    N: int
    boundary: str
    matrix: sp.csr_matrix
    spec: ModelSpec

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    @property
    def diagonal(self) -> np.ndarray:
        return self.matrix.diagonal()

    @property
    def uniformization_rate(self) -> float:
        return float(np.max(np.abs(self.diagonal)))

    def entry(self, i: int, j: int) -> float:
        return float(self.matrix[i, j])

    def row(self, i: int) -> dict[int, float]:
        start, stop = self.matrix.indptr[i], self.matrix.indptr[i + 1]
        return dict(zip(self.matrix.indices[start:stop].tolist(), self.matrix.data[start:stop].tolist()))

    def to_triplets(self) -> str:
        """Plain-text ``i j rate`` lines, ascending in i then j."""
        coo = self.matrix.tocoo()
        order = np.lexsort((coo.col, coo.row))
        return "".join(f"{int(coo.row[k])} {int(coo.col[k])} {float(coo.data[k])!r}\n" for k in order)

    def write_triplets(self, path) -> None:
        Path(path).write_text(self.to_triplets())


@dataclass(frozen=True, eq=False)
class EmbeddedChain:
    """Jump chain pi_ij = q_ij / (-q_ii); rows with no outflow are identity rows."""

    matrix: sp.csr_matrix
    kind: str
    N: int
    boundary: str

    def row(self, i: int) -> dict[int, float]:
        start, stop = self.matrix.indptr[i], self.matrix.indptr[i + 1]
        return dict(zip(self.matrix.indices[start:stop].tolist(), self.matrix.data[start:stop].tolist()))


def _row_jumps(spec: ModelSpec, kind: str, i: int, r_i: float, d: tuple[float, float] | None):
    """Off-diagonal (target, rate) pairs and the diagonal entry for row ``i``."""
    b = spec.offspring.probs
    a = spec.immigration.probs
    gamma = spec.gamma
    jumps: dict[int, float] = {}
    if kind == "Q_birthdeath":
        birth, death = d
        if birth > 0:
            jumps[i + 1] = birth
        if i >= 1 and death > 0:
            jumps[i - 1] = death
        return jumps, -(birth + death) if i >= 1 else -birth
    if kind == "Q_absorbed" and i == 0:
        return jumps, 0.0
    branching = i >= 1
    immigrating = kind in ("Q", "Q_absorbed") or (kind == "rho" and i == 0)
    if branching and b[0] > 0:
        jumps[i - 1] = r_i * b[0]
    hi = max(len(b) - 2, len(a) - 1 if immigrating else 0)
    for k in range(1, hi + 1):
        jb = r_i * b[k + 1] if (branching and k + 1 < len(b)) else 0.0
        ja = gamma * a[k] if (immigrating and k < len(a)) else 0.0
        if branching and immigrating:
            val = jb + ja
        else:
            val = jb if branching else ja
        if val > 0:
            jumps[i + k] = val
    if kind == "R":
        diag = -r_i
    elif kind == "rho":
        diag = -r_i if i >= 1 else -gamma
    else:
        diag = -r_i - gamma
    return jumps, diag


def build(spec: ModelSpec, kind: str = "Q", N: int = 128, boundary: str = "reflect_to_N") -> GeneratorMatrix:
    """Build the truncated rate matrix of the given kind.

    Parameters
    ----------
    spec : ModelSpec
    kind : {"R", "rho", "Q", "Q_absorbed", "Q_birthdeath"}
        ``R`` is pure branching, ``rho`` branching with resurrection from 0,
        ``Q`` branching with immigration, ``Q_absorbed`` the same with state 0
        made absorbing, and ``Q_birthdeath`` the comparison birth-death chain
        with birth rate ``r_i L + gamma m`` and death rate ``r_i b_0``.
    N : int
        Number of retained states, at least 2.
    boundary : {"reflect_to_N", "absorb_at_N"}
        Jumps past ``N-1`` are redirected onto ``N-1`` or into a cemetery.

    Returns
    -------
    GeneratorMatrix
    """
    if kind not in KINDS:
        raise ValueError(f"unsupported generator kind {kind!r}; expected one of {KINDS}")
    if boundary not in BOUNDARIES:
        raise ValueError(f"unsupported boundary {boundary!r}; expected one of {BOUNDARIES}")
    N = int(N)
    if N < 2:
        raise ValueError("truncation N must be at least 2")
    absorb = boundary == "absorb_at_N"
    size = N + 1 if absorb else N
    rates = np.asarray(spec.rate(np.arange(N)), dtype=np.float64)
    if kind == "Q_birthdeath":
        L = upward_mean(spec)
        gm = spec.gamma * spec.m
        b0 = spec.offspring[0]
    rows, cols, vals = [], [], []
    for i in range(N):
        r_i = float(rates[i])
        d = (r_i * L + gm, r_i * b0) if kind == "Q_birthdeath" else None
        jumps, diag = _row_jumps(spec, kind, i, r_i, d)
        spill = 0.0
        for j, v in jumps.items():
            if j < N:
                continue
            spill += v
        kept = {j: v for j, v in jumps.items() if j < N}
        if spill > 0:
            if absorb:
                kept[N] = spill
            elif i == N - 1:
                diag += spill
            else:
                kept[N - 1] = kept.get(N - 1, 0.0) + spill
        kept[i] = diag
        for j in sorted(kept):
            if kept[j] != 0.0:
                rows.append(i)
                cols.append(j)
                vals.append(kept[j])
    mat = sp.csr_matrix((vals, (rows, cols)), shape=(size, size))
    mat.sum_duplicates()
    mat.sort_indices()
    return GeneratorMatrix(kind=kind, N=N, boundary=boundary, matrix=mat, spec=spec)


def embedded(gen: GeneratorMatrix) -> EmbeddedChain:
    """Jump chain of ``gen``."""
    Q = gen.matrix.tocsr()
    diag = Q.diagonal()
    out = -diag
    absorbing = out <= 0.0
    scale = np.where(absorbing, 0.0, 1.0 / np.where(absorbing, 1.0, out))
    off = Q - sp.diags(diag)
    P = sp.diags(scale) @ off + sp.diags(absorbing.astype(np.float64))
    P = sp.csr_matrix(P)
    P.eliminate_zeros()
    P.sort_indices()
    return EmbeddedChain(matrix=P, kind=gen.kind, N=gen.N, boundary=gen.boundary)
