"""Level-by-level SDP hierarchy for absolute continuity of a measure.

Given moments ``y`` of a measure mu on K and moments ``gamma`` of the
(normalised) Lebesgue measure on K, level ``d`` looks for joint moments
``z_{alpha k}`` of a measure on ``K x R`` whose t-marginal plays the role of
the density: ``z_{alpha 0} = gamma_alpha`` and ``z_{alpha 1} = y_alpha``.
Infeasibility at level d rules out a density in L_p(K) for every p >= 2d.

Joint multi-indices are ``alpha + (k,)``: the last coordinate is t.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .measures import IncompleteMomentsError, MomentVector
from .momentmatrix import LinearMatrixMap, localizing_map, moment_map
from .polybasis import Polynomial, SemialgebraicSet, enumerate_indices, preordering
from .refbasis import ReferenceBasis, reference_compiler
from .sdp import Feasible, Indeterminate, Infeasible, SdpProblem, SolverConfig, solve

LOCALIZING_CONVENTION = "M_{d - ceil(deg(g^beta)/2)}(g^beta z), blocks with negative order omitted"

DEFAULT_T_REFERENCE = (0.0, 2.0)


@dataclass(frozen=True)
class HierarchyLevel:
    d: int
    primal: SdpProblem
    # (selector, matrix order) for every block, moment matrix first
    inventory: tuple[tuple[tuple[int, ...], int], ...]
    skipped: tuple[tuple[int, ...], ...]


def _check_coverage(gamma: MomentVector, y: MomentVector, nvars: int, d: int) -> None:
    if gamma.nvars != nvars or y.nvars != nvars:
        raise ValueError(
            f"moment vectors have nvars {gamma.nvars}/{y.nvars}, the set has {nvars}"
        )
    missing = [a for a in enumerate_indices(nvars, 2 * d) if a not in gamma]
    if missing:
        raise IncompleteMomentsError(missing, f"Lebesgue moments for level {d}")
    if d >= 1:
        missing = [a for a in enumerate_indices(nvars, 2 * d - 1) if a not in y]
        if missing:
            raise IncompleteMomentsError(missing, f"input moments for level {d}")
    zero = (0,) * nvars
    if abs(gamma[zero] - 1.0) > 1e-12:
        raise ValueError(f"Lebesgue moments must be normalised, gamma_0 = {gamma[zero]}")
    if zero in y and abs(y[zero] - 1.0) > 1e-12:
        raise ValueError(f"input moments must be normalised, y_0 = {y[zero]}")


def _fixed_values(gamma: MomentVector, y: MomentVector, n: int, d: int):
    fixed, exact = {}, {}
    for alpha in enumerate_indices(n, 2 * d):
        fixed[alpha + (0,)] = gamma[alpha]
        if gamma.exact is not None:
            exact[alpha + (0,)] = gamma.exact[alpha]
    if d >= 1:
        for alpha in enumerate_indices(n, 2 * d - 1):
            fixed[alpha + (1,)] = y[alpha]
            if y.exact is not None:
                exact[alpha + (1,)] = y.exact[alpha]
    return fixed, (exact if len(exact) == len(fixed) else None)


def assemble_level(
    kset: SemialgebraicSet,
    gamma: MomentVector,
    y: MomentVector,
    d: int,
    linf_bound: float | None = None,
    t_reference: tuple[float, float] = DEFAULT_T_REFERENCE,
) -> HierarchyLevel:
    if d < 0:
        raise ValueError("level d must be non-negative")
    n = kset.nvars
    _check_coverage(gamma, y, n, d)
    fixed, exact = _fixed_values(gamma, y, n, d)
    variables = tuple(k for k in enumerate_indices(n + 1, 2 * d) if k[-1] >= 2)

    blocks: list[LinearMatrixMap] = []
    labels, inventory, skipped = [], [], []
    for term in preordering(kset):
        order = d - term.halfdeg
        if order < 0:
            skipped.append(term.selector)
            continue
        if not any(term.selector):
            blocks.append(moment_map(n + 1, d))
            labels.append("moment")
        else:
            blocks.append(localizing_map(term.product.lift(), order))
            labels.append("loc" + "".join(str(b) for b in term.selector))
        inventory.append((term.selector, order))

    objective = {tuple(2 * e for e in k): 1.0 for k in enumerate_indices(n + 1, d)}
    bounds = {}
    if linf_bound is not None:
        bounds = {(0,) * n + (k,): float(linf_bound) for k in range(2, 2 * d + 1)}

    problem = SdpProblem(
        variables,
        tuple(blocks),
        fixed,
        objective,
        bounds,
        tuple(labels),
        compiler=reference_compiler(tuple(kset.box) + (tuple(t_reference),), exact),
    )
    return HierarchyLevel(d, problem, tuple(inventory), tuple(skipped))


def assemble_primal(
    kset: SemialgebraicSet,
    gamma: MomentVector,
    y: MomentVector,
    d: int,
    linf_bound: float | None = None,
) -> SdpProblem:
    """Minimise trace M_d(z) over joint moments consistent with gamma and y."""
    return assemble_level(kset, gamma, y, d, linf_bound).primal


# Dual assembly.
#
# The certificate  sum_u (x,t)^{2u} - p(x) - t q(x) = sigma_0 + sum_j sigma_j g_j
# is matched coefficient by coefficient, with sigma_0 = b^T G_0 b and
# sigma_j = b_j^T G_j b_j for Gram matrices G >= 0. Monomials of t-degree 0 and
# 1 just define p and q. Every monomial m of t-degree >= 2 is an equality; it
# is solved for one "pivot" entry of G_0 (the first position (i, j), i <= j,
# with b_i + b_j = m), which then becomes an affine expression in the other
# Gram entries and the constant key ``ONE``. What remains is an SdpProblem in
# the non-pivot Gram entries, maximising sum p_a gamma_a + sum q_a y_a
# (encoded as minimising its negative).

ONE = "one"


def _gram_positions(size: int) -> list[tuple[int, int]]:
    return [(i, j) for i in range(size) for j in range(i, size)]


def _balanced_split(c: tuple[int, ...]) -> tuple[tuple[int, ...], tuple[int, ...]]:
    """``c = a + b`` with total degrees of ``a`` and ``b`` differing by at most one."""
    a = [e // 2 for e in c]
    extra = 0
    for i, e in enumerate(c):
        if e % 2:
            a[i] += extra
            extra ^= 1
    a = tuple(a)
    return a, tuple(e - f for e, f in zip(c, a))


def assemble_dual(
    kset: SemialgebraicSet,
    gamma: MomentVector,
    y: MomentVector,
    d: int,
    t_reference: tuple[float, float] = DEFAULT_T_REFERENCE,
) -> SdpProblem:
    """Sum-of-squares dual of level ``d``, as a minimisation of minus its value.

    Maximise ``sum p_alpha gamma_alpha + sum q_alpha y_alpha`` subject to
    ``h - (p + t q) = s_0 + sum_j s_j g_j``, where ``h`` is the sum of the
    squared monomials of degree <= d (so that ``L_z(h)`` is the primal trace)
    and each ``s_j`` is a Gram form ``v^T G_j v``.

    Change of variables: the Gram matrices are written over the orthonormal
    reference basis ``U`` of the primal. The identity is matched coefficient
    by coefficient on ``U_c``. Coefficients with t-exponent <= 1 define
    ``p + t q`` and are eliminated into the objective, which becomes
    ``sum_{c_t <= 1} L_z(U_c) (h_c - rhs_c)``. Each remaining coefficient ``c``
    fixes one pivot entry ``G_0[a, b]`` with ``a + b = c``; the pivot system is
    triangular (``U_a U_b`` only reaches ``U_c`` with ``c <= a + b``), and the
    pivots are substituted as affine functions of the other Gram entries.
    The key ``ONE`` is fixed to 1 and carries every constant.
    """
    n = kset.nvars
    _check_coverage(gamma, y, n, d)
    fixed, exact = _fixed_values(gamma, y, n, d)
    ref = ReferenceBasis(tuple(kset.box) + (tuple(t_reference),), 2 * d)
    universe = ref.universe

    grams = [("s0", d, Polynomial.constant(n + 1))]
    for j, g in enumerate(kset.inequalities, start=1):
        order = d - (-(-g.degree // 2))
        if order >= 0:
            grams.append((f"s{j}", order, g.lift()))

    # columns: every upper-triangle Gram entry; rows: coefficient on U_c
    keys, columns = [], []
    sizes = []
    for name, order, weight in grams:
        prod = ref.products(order, weight)
        size = prod.shape[1]
        sizes.append(size)
        for i, j in _gram_positions(size):
            keys.append((name, i, j))
            columns.append(prod[:, i, j] * (1.0 if i == j else 2.0))
    coef = np.array(columns).T

    h = np.zeros(len(universe))
    for u in enumerate_indices(n + 1, d):
        h += ref.transform[ref.pos[tuple(2 * e for e in u)]]

    matched = [ci for ci, c in enumerate(universe) if c[-1] >= 2]
    absorbed = [ci for ci, c in enumerate(universe) if c[-1] <= 1]
    basis0 = {u: i for i, u in enumerate(enumerate_indices(n + 1, d))}
    key_col = {k: i for i, k in enumerate(keys)}
    pivot_cols = []
    for ci in matched:
        a, b = _balanced_split(universe[ci])
        i, j = sorted((basis0[a], basis0[b]))
        pivot_cols.append(key_col[("s0", i, j)])
    free_cols = [i for i in range(len(keys)) if i not in set(pivot_cols)]

    # pivots = base + slope @ free
    if matched:
        piv = coef[np.ix_(matched, pivot_cols)]
        base = np.linalg.solve(piv, h[matched])
        slope = -np.linalg.solve(piv, coef[np.ix_(matched, free_cols)])
    else:
        base, slope = np.zeros(0), np.zeros((0, len(free_cols)))
    free_keys = [keys[i] for i in free_cols]
    # every Gram entry as (constant, coefficients over free keys)
    affine = {keys[i]: (0.0, np.eye(len(free_cols))[k]) for k, i in enumerate(free_cols)}
    for k, i in enumerate(pivot_cols):
        affine[keys[i]] = (float(base[k]), slope[k])

    def linear_entries(expr: tuple[float, np.ndarray]) -> dict:
        const, lin = expr
        out = {fk: float(v) for fk, v in zip(free_keys, lin) if v != 0.0}
        if const != 0.0:
            out[ONE] = const
        return out

    blocks, labels = [], []
    for (name, _, _), size in zip(grams, sizes):
        entries: dict = {}
        for i, j in _gram_positions(size):
            for key, value in linear_entries(affine[(name, i, j)]).items():
                entries.setdefault(key, []).append((i, j, value))
        blocks.append(LinearMatrixMap(size, {k: tuple(v) for k, v in entries.items()}))
        labels.append(name)

    w_fixed = ref.working_values(absorbed, fixed, exact)
    # value = sum_c w_c (h_c - coef[c] . G); minimise its negative
    objective = {ONE: -float(w_fixed @ h[absorbed])}
    weights = w_fixed @ coef[absorbed]
    total = np.zeros(len(free_cols))
    for key, wk in zip(keys, weights):
        const, lin = affine[key]
        objective[ONE] += wk * const
        total += wk * lin
    for fk, v in zip(free_keys, total):
        if v != 0.0:
            objective[fk] = float(v)
    return SdpProblem(tuple(free_keys), tuple(blocks), {ONE: 1.0}, objective, {}, tuple(labels))


@dataclass(frozen=True)
class HierarchyConfig:
    dmax: int
    solver: SolverConfig = field(default_factory=SolverConfig)
    linf_bound: float | None = None
    # evaluate every level instead of stopping at the first infeasible one
    run_all: bool = False
    dmin: int = 1
    # False: decide feasibility only and leave rho_d empty
    compute_rho: bool = True
    t_reference: tuple[float, float] = DEFAULT_T_REFERENCE

    def __post_init__(self) -> None:
        if self.dmax < self.dmin or self.dmin < 0:
            raise ValueError(f"need 0 <= dmin <= dmax, got dmin={self.dmin}, dmax={self.dmax}")
        lo, hi = self.t_reference
        if not lo < hi:
            raise ValueError("t_reference must be a non-degenerate interval")


@dataclass(frozen=True)
class LevelRecord:
    d: int
    status: str
    rho: float | None
    margin: float | None
    seconds: float
    reason: str = ""
    iterations: int = 0
    rho_converged: bool | None = None

    def to_json(self) -> dict:
        return {
            "d": self.d,
            "moment_order": 2 * self.d,
            "status": self.status,
            "rho_d": self.rho,
            "rho_converged": self.rho_converged,
            "margin": self.margin,
            "seconds": round(self.seconds, 4),
            "reason": self.reason,
            "newton_iterations": self.iterations,
        }


@dataclass(frozen=True)
class Conclusion:
    kind: str  # NoDensityFrom, ConsistentUpTo or Inconclusive
    d: int | None = None

    @property
    def p(self) -> int | None:
        return 2 * self.d if self.kind == "NoDensityFrom" else None

    def to_json(self) -> dict:
        out: dict = {"kind": self.kind}
        if self.kind == "NoDensityFrom":
            out.update(d=self.d, p=self.p)
        elif self.kind == "ConsistentUpTo":
            out.update(dmax=self.d)
        return out


@dataclass(frozen=True)
class DetectionReport:
    inputs: dict
    levels: tuple[LevelRecord, ...]
    conclusion: Conclusion
    config: HierarchyConfig
    monotonicity_violation: bool = False

    def status_of(self, d: int) -> str | None:
        return next((lv.status for lv in self.levels if lv.d == d), None)

    def to_json(self) -> dict:
        return {
            "inputs": self.inputs,
            "levels": [lv.to_json() for lv in self.levels],
            "conclusion": self.conclusion.to_json(),
            "tolerances": self.config.solver.to_json(),
            "linf_bound": self.config.linf_bound,
            "t_reference": list(self.config.t_reference),
            "localizing_order_convention": LOCALIZING_CONVENTION,
            "monotonicity_violation": self.monotonicity_violation,
            "summary": interpret(self),
        }


def conclude(levels: tuple[LevelRecord, ...], dmax: int) -> tuple[Conclusion, bool]:
    first_bad = next((lv.d for lv in levels if lv.status == "Infeasible"), None)
    violation = first_bad is not None and any(
        lv.status == "Feasible" and lv.d > first_bad for lv in levels
    )
    if first_bad is not None:
        return Conclusion("NoDensityFrom", first_bad), violation
    if any(lv.status == "Indeterminate" for lv in levels):
        return Conclusion("Inconclusive"), violation
    return Conclusion("ConsistentUpTo", dmax), violation


def solve_level(kset, gamma, y, d: int, config: HierarchyConfig) -> LevelRecord:
    start = time.perf_counter()
    level = assemble_level(kset, gamma, y, d, config.linf_bound, config.t_reference)
    outcome = solve(level.primal, config.solver, optimize=config.compute_rho)
    seconds = time.perf_counter() - start
    if isinstance(outcome, Feasible) and not config.compute_rho:
        return LevelRecord(d, "Feasible", None, outcome.phase1_margin, seconds,
                           iterations=outcome.iterations)
    if isinstance(outcome, Feasible):
        note = "" if outcome.rho_converged else f"rho_d not converged (gap {outcome.gap:.3g})"
        return LevelRecord(d, "Feasible", outcome.objective, outcome.phase1_margin, seconds, note,
                           outcome.iterations, outcome.rho_converged)
    if isinstance(outcome, Infeasible):
        return LevelRecord(d, "Infeasible", None, outcome.phase1_margin, seconds,
                           iterations=outcome.iterations)
    assert isinstance(outcome, Indeterminate)
    return LevelRecord(d, "Indeterminate", None, outcome.phase1_margin, seconds, outcome.reason,
                       outcome.iterations)


def run_detection(
    kset: SemialgebraicSet,
    gamma: MomentVector,
    y: MomentVector,
    config: HierarchyConfig,
    inputs: Mapping | None = None,
) -> DetectionReport:
    # fail fast on missing data rather than after the cheap levels
    _check_coverage(gamma, y, kset.nvars, config.dmax)
    levels: list[LevelRecord] = []
    for d in range(config.dmin, config.dmax + 1):
        record = solve_level(kset, gamma, y, d, config)
        levels.append(record)
        if record.status == "Infeasible" and not config.run_all:
            break
    conclusion, violation = conclude(tuple(levels), config.dmax)
    echo = dict(inputs) if inputs is not None else {
        "set": kset.to_json(),
        "moments": {"nvars": y.nvars, "max_order": y.max_order},
    }
    return DetectionReport(echo, tuple(levels), conclusion, config, violation)


def interpret(report: DetectionReport) -> str:
    c = report.conclusion
    bound = report.config.linf_bound
    if c.kind == "NoDensityFrom":
        if bound is not None:
            return (
                f"Infeasible at d={c.d} with the bound z_0k <= c, c={bound:g}: no density "
                f"with essential sup <= c={bound:g} at this level (moments up to order {c.p})."
            )
        return (
            f"Infeasible at d={c.d}: no density in L_p(K) for any p ≥ {c.p}, "
            f"hence none in the intersection of all L_p nor in L_inf."
        )
    if c.kind == "ConsistentUpTo":
        return (
            f"Feasible at every level through d={c.d}: the necessary conditions hold "
            f"through moment order {2 * c.d}; existence of a density is not certified."
        )
    bad = [lv for lv in report.levels if lv.status == "Indeterminate"]
    detail = "; ".join(f"d={lv.d}: {lv.reason}" for lv in bad)
    return f"Inconclusive: the solver could not decide some levels ({detail}); existence not certified."


def free_variable_count(n: int, d: int) -> int:
    """Closed form for the number of free joint moments at level d."""
    return math.comb(n + 1 + 2 * d, 2 * d) - math.comb(n + 2 * d, 2 * d) - math.comb(
        n + 2 * d - 1, 2 * d - 1
    )
