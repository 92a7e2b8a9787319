"""Moment and localizing matrices as structural linear maps.

A :class:`LinearMatrixMap` records, for every moment key, the upper-triangle
positions it feeds and with which coefficient. ``M_d(z) = sum_a z_a B_a`` is
then :func:`instantiate`, and a single ``B_a`` is :meth:`coefficient_matrix`.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Hashable, Mapping

import numpy as np

from .measures import IncompleteMomentsError
from .polybasis import Polynomial, add_indices, enumerate_indices, index_rank

Position = tuple[int, int, float]


@dataclass(frozen=True)
class LinearMatrixMap:
    """Affine-free linear map ``z -> sum_key z[key] * C_key`` into symmetric matrices.

    Only positions with ``row <= col`` are stored; materialisation mirrors them.
    ``weight``/``order`` record the polynomial and matrix order for maps built
    by :func:`moment_map` and :func:`localizing_map` (solvers use them to pick a
    better-conditioned basis). Keys need not be multi-indices.
    """

    size: int
    entries: Mapping[Hashable, tuple[Position, ...]]
    nvars: int | None = None
    weight: Polynomial | None = field(default=None, compare=False)
    order: int | None = None

    @property
    def shift_degree(self) -> int:
        if self.nvars is None:
            raise AttributeError("shift degree is only defined for moment-keyed maps")
        return max((sum(k) for k in self.entries), default=0)

    def keys(self) -> list[Hashable]:
        return list(self.entries)

    def coefficient_matrix(self, key: Hashable) -> np.ndarray:
        out = np.zeros((self.size, self.size))
        for r, c, coef in self.entries.get(key, ()):
            out[r, c] += coef
            if r != c:
                out[c, r] += coef
        return out

    def to_json(self) -> dict:
        return {
            "size": self.size,
            "nvars": self.nvars,
            "order": self.order,
            "weight": None if self.weight is None else self.weight.to_json(),
            "entries": [
                {"key": list(k) if isinstance(k, tuple) else k,
                 "positions": [[r, c, coef] for r, c, coef in pos]}
                for k, pos in self.entries.items()
            ],
        }


def _build(nvars: int, d: int, weight: Polynomial) -> LinearMatrixMap:
    basis = enumerate_indices(nvars, d)
    entries: dict[tuple, list[Position]] = {}
    for i, a in enumerate(basis):
        for j in range(i, len(basis)):
            ab = add_indices(a, basis[j])
            for g_exp, g_coef in weight.sorted_terms():
                entries.setdefault(add_indices(ab, g_exp), []).append((i, j, g_coef))
    ordered = sorted(entries, key=lambda k: (sum(k), index_rank(k)))
    return LinearMatrixMap(
        len(basis), {k: tuple(entries[k]) for k in ordered}, nvars, weight, d
    )


def moment_map(nvars: int, d: int) -> LinearMatrixMap:
    """``M_d(z)``: entry (i, j) is ``z[idx_i + idx_j]``."""
    if d < 0:
        raise ValueError("moment matrix order must be non-negative")
    return _build(nvars, d, Polynomial.constant(nvars))


def localizing_map(g: Polynomial, d: int) -> LinearMatrixMap:
    """``M_d(g z)``: entry (i, j) is ``sum_gamma g_gamma z[idx_i + idx_j + gamma]``."""
    if d < 0:
        raise ValueError("localizing matrix order must be non-negative")
    if g.is_zero():
        raise ValueError("localizing polynomial is identically zero")
    return _build(g.nvars, d, g)


def instantiate(lmap: LinearMatrixMap, z: Mapping[Hashable, float]) -> np.ndarray:
    """Dense symmetric matrix ``sum_key z[key] * C_key``."""
    missing = [k for k in lmap.entries if k not in z]
    if missing:
        raise IncompleteMomentsError(missing, "moment assignment")
    out = np.zeros((lmap.size, lmap.size))
    for key, positions in lmap.entries.items():
        val = z[key]
        for r, c, coef in positions:
            out[r, c] += coef * val
    upper = np.triu(out, 1)
    return np.triu(out) + upper.T
