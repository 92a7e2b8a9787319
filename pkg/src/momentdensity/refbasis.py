"""Orthonormal working basis for moment SDPs on a box.

Monomial moment matrices are Hilbert-like: at order 7 the matrix of the
uniform measure on [0,1] has condition number around 1e10, so a margin
``M + t I`` measured in monomial coordinates says more about conditioning
than about feasibility. Here every block is rewritten in tensor products of
shifted Legendre polynomials, orthonormal for a reference probability
measure (uniform on the box). The moment matrix of the reference measure
becomes the identity and the phase-1 margin reads "how far from PSD,
relative to the reference".

The change of variables is ``w_c = L_z(U_c)`` for the orthonormal tensor
basis ``U_c``. It is triangular in the multi-index order, so fixing every
``z_k`` with last exponent <= tau is the same as fixing every ``w_c`` with
last exponent <= tau. The fixed ``w_c`` are evaluated in mpmath from exact
data when available, because the Legendre coefficients are large and of
alternating sign.
"""
from __future__ import annotations

from fractions import Fraction
from functools import lru_cache
from typing import Hashable, Mapping, Sequence

import mpmath
import numpy as np

from .polybasis import enumerate_indices
from .sdp.problem import CompiledSdp, SdpProblem

_DPS = 60


@lru_cache(maxsize=64)
def _legendre_coeffs(lo: float, hi: float, degree: int) -> tuple[tuple, ...]:
    """Monomial coefficients (mpf) of the orthonormal polynomials on [lo, hi]."""
    with mpmath.workdps(_DPS):
        lo_m, hi_m = mpmath.mpf(lo), mpmath.mpf(hi)
        a = 2 / (hi_m - lo_m)
        b = -(lo_m + hi_m) / (hi_m - lo_m)
        # P_k(a x + b) via the three-term recurrence, as coefficient lists in x
        prev = [mpmath.mpf(1)]
        polys = [prev]
        if degree >= 1:
            cur = [b, a]
            polys.append(cur)
            for k in range(1, degree):
                shifted = [mpmath.mpf(0)] * (len(cur) + 1)
                for j, c in enumerate(cur):
                    shifted[j] += b * c
                    shifted[j + 1] += a * c
                nxt = [
                    ((2 * k + 1) * shifted[j] - (k * prev[j] if j < len(prev) else 0)) / (k + 1)
                    for j in range(len(shifted))
                ]
                prev, cur = cur, nxt
                polys.append(cur)
        return tuple(
            tuple(mpmath.sqrt(2 * k + 1) * c for c in p) for k, p in enumerate(polys)
        )


@lru_cache(maxsize=64)
def _uniform_moments(lo: float, hi: float, top: int) -> tuple:
    with mpmath.workdps(_DPS):
        lo_m, hi_m = mpmath.mpf(lo), mpmath.mpf(hi)
        return tuple(
            (hi_m ** (j + 1) - lo_m ** (j + 1)) / ((j + 1) * (hi_m - lo_m)) for j in range(top + 1)
        )


@lru_cache(maxsize=64)
def _monomial_projections(lo: float, hi: float, degree: int) -> np.ndarray:
    """``out[k, c] = <x^k, p_c>`` under the uniform measure; zero for k < c."""
    coeffs = _legendre_coeffs(lo, hi, degree)
    mom = _uniform_moments(lo, hi, 2 * degree)
    out = np.zeros((degree + 1, degree + 1))
    with mpmath.workdps(_DPS):
        for c, poly in enumerate(coeffs):
            for k in range(c, degree + 1):
                out[k, c] = float(mpmath.fsum(cj * mom[k + j] for j, cj in enumerate(poly)))
    return out


def _orthonormal_values(lo: float, hi: float, degree: int, x: np.ndarray) -> np.ndarray:
    """``out[k, i] = p_k(x_i)`` by the recurrence, in double precision."""
    xi = (2 * x - lo - hi) / (hi - lo)
    out = np.zeros((degree + 1, len(x)))
    out[0] = 1.0
    if degree >= 1:
        out[1] = xi
    for k in range(1, degree):
        out[k + 1] = ((2 * k + 1) * xi * out[k] - k * out[k - 1]) / (k + 1)
    return out * np.sqrt(2 * np.arange(degree + 1) + 1)[:, None]


def _triple_tensor(lo: float, hi: float, row: int, gmax: int, top: int) -> np.ndarray:
    """``T[a, b, g, c] = E[p_a p_b x^g p_c]`` under the uniform measure on [lo, hi]."""
    npts = (2 * row + gmax + top) // 2 + 2
    nodes, weights = np.polynomial.legendre.leggauss(npts)
    x = 0.5 * (hi - lo) * nodes + 0.5 * (hi + lo)
    w = 0.5 * weights
    vals = _orthonormal_values(lo, hi, max(row, top), x)
    powers = x[None, :] ** np.arange(gmax + 1)[:, None]
    return np.einsum("ai,bi,gi,ci,i->abgc", vals[: row + 1], vals[: row + 1], powers,
                     vals[: top + 1], w, optimize=True)


def _fixed_working_values(
    universe: Sequence[tuple], fixed_idx: Sequence[int], box: Sequence[tuple[float, float]],
    degree: int, fixed: Mapping[Hashable, float], exact: Mapping[Hashable, Fraction] | None,
) -> np.ndarray:
    coeffs = [_legendre_coeffs(lo, hi, degree) for lo, hi in box]
    out = np.zeros(len(fixed_idx))
    with mpmath.workdps(_DPS):
        values = {}
        for k, v in fixed.items():
            if exact is not None and k in exact:
                q = exact[k]
                values[k] = mpmath.mpf(q.numerator) / q.denominator
            else:
                values[k] = mpmath.mpf(v)
        for pos, ci in enumerate(fixed_idx):
            c = universe[ci]
            # U_c = prod_i p_{c_i}(x_i): expand and apply L_z term by term
            terms = [((), mpmath.mpf(1))]
            for i, ci_deg in enumerate(c):
                terms = [(e + (j,), coef * cj) for e, coef in terms
                         for j, cj in enumerate(coeffs[i][ci_deg]) if cj != 0]
            out[pos] = float(mpmath.fsum(coef * values[e] for e, coef in terms))
    return out


class ReferenceBasis:
    """Orthonormal tensor basis of degree <= ``degree`` on ``box``.

    ``universe`` lists the basis multi-indices in graded-lex order; the same
    list indexes monomials, since the change of basis is triangular.
    """

    def __init__(self, box: Sequence[tuple[float, float]], degree: int):
        self.box = tuple((float(lo), float(hi)) for lo, hi in box)
        self.degree = degree
        self.nvars = len(self.box)
        self.universe = enumerate_indices(self.nvars, degree)
        self.pos = {k: i for i, k in enumerate(self.universe)}
        self._cidx = np.array(self.universe)
        self._tensors: dict[tuple, list[np.ndarray]] = {}
        proj = [_monomial_projections(lo, hi, degree) for lo, hi in self.box]
        # transform[k, c] = <x^k, U_c>, so z = transform @ w and x^k = sum_c transform[k, c] U_c
        self.transform = np.ones((len(self.universe), len(self.universe)))
        for i in range(self.nvars):
            self.transform *= proj[i][self._cidx[:, i][:, None], self._cidx[:, i][None, :]]

    def _triples(self, rows: int, gmax: tuple[int, ...]) -> list[np.ndarray]:
        key = (rows, gmax)
        if key not in self._tensors:
            self._tensors[key] = [_triple_tensor(lo, hi, rows, gmax[i], self.degree)
                                  for i, (lo, hi) in enumerate(self.box)]
        return self._tensors[key]

    def products(self, order: int, weight) -> np.ndarray:
        """``out[c, a, b]`` = coefficient of ``U_c`` in ``weight * U_a * U_b`` for ``a, b`` of degree <= order."""
        gmax = tuple(max((e[i] for e in weight.terms), default=0) for i in range(self.nvars))
        tensors = self._triples(order, gmax)
        basis = np.array(enumerate_indices(self.nvars, order))
        s = len(basis)
        full = np.zeros((len(self.universe), s, s))
        for g_exp, g_coef in weight.terms.items():
            prod = np.full((len(self.universe), s, s), float(g_coef))
            for i in range(self.nvars):
                a = basis[:, i]
                prod *= tensors[i][a[None, :, None], a[None, None, :], g_exp[i],
                                   self._cidx[:, i][:, None, None]]
            full += prod
        return full

    def working_values(self, indices: Sequence[int], fixed: Mapping[Hashable, float],
                       exact: Mapping[Hashable, Fraction] | None = None) -> np.ndarray:
        """``L_z(U_c)`` for the listed basis positions, from moments in ``fixed``."""
        return _fixed_working_values(self.universe, indices, self.box, self.degree, fixed, exact)


def reference_compiler(
    box: Sequence[tuple[float, float]],
    exact_fixed: Mapping[Hashable, Fraction] | None = None,
):
    """Return a ``problem -> CompiledSdp`` function for moment-keyed problems on ``box``.

    ``box`` covers every coordinate, including the last one. The compiler
    raises ``ValueError`` for problems it cannot rewrite (the caller then
    falls back to monomial coordinates).
    """
    box = tuple((float(lo), float(hi)) for lo, hi in box)

    def compile_reference(problem: SdpProblem) -> CompiledSdp:
        nv = len(box)
        keys = list(problem.variables) + list(problem.fixed)
        if not keys or any(not isinstance(k, tuple) or len(k) != nv for k in keys):
            raise ValueError("keys are not multi-indices of the box dimension")
        degree = max(sum(k) for k in keys)
        if set(keys) != set(enumerate_indices(nv, degree)):
            raise ValueError("keys do not form a full degree-bounded index set")
        fixed_t = max((k[-1] for k in problem.fixed), default=-1)
        if any((k[-1] <= fixed_t) != (k in problem.fixed) for k in keys):
            raise ValueError("fixed keys are not all indices up to one last exponent")
        for lmap in problem.blocks:
            if lmap.weight is None or lmap.order is None or lmap.nvars != nv:
                raise ValueError("block lacks weight/order metadata")
        ref = ReferenceBasis(box, degree)
        universe, pos = ref.universe, ref.pos
        fixed_idx = [i for i, k in enumerate(universe) if k[-1] <= fixed_t]
        free_idx = [i for i, k in enumerate(universe) if k[-1] > fixed_t]
        w_fixed = ref.working_values(fixed_idx, problem.fixed, exact_fixed)

        constants, coefficients = [], []
        for lmap in problem.blocks:
            full = ref.products(lmap.order, lmap.weight)
            constants.append(np.tensordot(w_fixed, full[fixed_idx], axes=1))
            coefficients.append(full[free_idx])

        transform = ref.transform
        z_from_fixed = transform[:, fixed_idx] @ w_fixed
        z_from_free = transform[:, free_idx]

        def affine(key: Hashable) -> tuple[float, np.ndarray]:
            if key in problem.fixed:
                return float(problem.fixed[key]), np.zeros(len(free_idx))
            i = pos[key]
            return float(z_from_fixed[i]), z_from_free[i]

        obj = np.zeros(len(free_idx))
        offset = 0.0
        for key, coef in problem.objective.items():
            c0, c1 = affine(key)
            offset += coef * c0
            obj += coef * c1
        for key, bound in problem.upper_bounds.items():
            c0, c1 = affine(key)
            constants.append(np.array([[bound - c0]]))
            coefficients.append(-c1[:, None, None])

        var_rows = [pos[k] for k in problem.variables]
        names = problem.variables

        def to_assignment(w: np.ndarray) -> dict:
            z = z_from_fixed[var_rows] + z_from_free[var_rows] @ w
            return {k: float(v) for k, v in zip(names, z)}

        return CompiledSdp(constants, coefficients, obj, offset, to_assignment,
                           np.zeros(len(free_idx)), basis="orthonormal reference")

    return compile_reference
