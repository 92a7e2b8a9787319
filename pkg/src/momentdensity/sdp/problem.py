"""SDP problem model, solver configuration and outcomes."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Hashable, Mapping, Sequence

import numpy as np

from ..momentmatrix import LinearMatrixMap


@dataclass(frozen=True)
class SolverConfig:
    feas_tol: float = 1e-8
    infeas_threshold: float = 1e-6
    reduction: float = 0.2
    max_newton: int = 200
    step_fraction: float = 0.98
    # relative duality gap at which phase 2 stops
    gap_tol: float = 1e-6
    # absolute gap at which the phase-1 margin is considered converged
    phase1_gap_tol: float = 1e-9
    # cap on the summed block traces in phase 1; keeps the margin program compact
    phase1_trace_budget: float = 1e10
    reg_start: float = 1e-12
    reg_max: float = 1e-6
    unbounded_limit: float = 1e6

    def __post_init__(self) -> None:
        if not self.infeas_threshold > 0:
            raise ValueError("infeas_threshold must be positive")
        if not 0 < self.reduction < 1:
            raise ValueError("barrier reduction factor must lie in (0, 1)")
        if not 0 < self.step_fraction < 1:
            raise ValueError("step fraction must lie in (0, 1)")
        if self.max_newton < 1:
            raise ValueError("max_newton must be positive")

    def to_json(self) -> dict:
        return dict(self.__dict__)


@dataclass(frozen=True)
class CompiledSdp:
    """Dense working form ``F_b(w) = F_b0 + sum_i w_i A_bi``.

    ``to_assignment`` maps working variables back to values of the problem's
    free keys; the objective in working coordinates already includes the
    constant contributed by fixed keys via ``objective_offset``.
    """

    constants: list[np.ndarray]
    coefficients: list[np.ndarray]
    objective: np.ndarray
    objective_offset: float
    to_assignment: Callable[[np.ndarray], dict]
    start: np.ndarray
    basis: str = "monomial"

    @property
    def nvars(self) -> int:
        return len(self.objective)

    def blocks_at(self, w: np.ndarray) -> list[np.ndarray]:
        return [
            c + np.tensordot(w, a, axes=1) if len(w) else c.copy()
            for c, a in zip(self.constants, self.coefficients)
        ]


@dataclass(frozen=True)
class SdpProblem:
    """Minimise ``sum objective[k] * z[k]`` subject to every block being PSD.

    Fixed keys are substituted into the blocks, never solved for. Upper bounds
    ``z[k] <= u`` become 1x1 blocks ``[u - z[k]]``. ``compiler`` optionally
    supplies a better-conditioned working basis; it may raise ``ValueError``
    to fall back to the direct form.
    """

    variables: tuple[Hashable, ...]
    blocks: tuple[LinearMatrixMap, ...]
    fixed: Mapping[Hashable, float]
    objective: Mapping[Hashable, float]
    upper_bounds: Mapping[Hashable, float] = field(default_factory=dict)
    block_labels: tuple[str, ...] = ()
    compiler: Callable[[SdpProblem], CompiledSdp] | None = field(default=None, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "variables", tuple(self.variables))
        object.__setattr__(self, "blocks", tuple(self.blocks))
        if not self.block_labels:
            object.__setattr__(
                self, "block_labels", tuple(f"block{i}" for i in range(len(self.blocks)))
            )
        overlap = set(self.variables) & set(self.fixed)
        if overlap:
            raise ValueError(f"keys both free and fixed: {sorted(overlap, key=str)[:5]}")
        known = set(self.variables) | set(self.fixed)
        for lmap in self.blocks:
            if lmap.size < 1:
                raise ValueError("blocks must have size >= 1")
            unknown = [k for k in lmap.entries if k not in known]
            if unknown:
                raise ValueError(f"block references undeclared keys {unknown[:5]}")
        for where in (self.objective, self.upper_bounds):
            unknown = [k for k in where if k not in known]
            if unknown:
                raise ValueError(f"undeclared keys {unknown[:5]}")

    def objective_value(self, assignment: Mapping[Hashable, float]) -> float:
        total = 0.0
        for key, coef in self.objective.items():
            total += coef * (self.fixed[key] if key in self.fixed else assignment[key])
        return total

    def compile(self) -> CompiledSdp:
        if self.compiler is not None:
            try:
                return self.compiler(self)
            except ValueError:
                pass
        return compile_direct(self)


def compile_direct(problem: SdpProblem) -> CompiledSdp:
    """Working variables are the free keys themselves."""
    index = {k: i for i, k in enumerate(problem.variables)}
    n = len(index)
    constants: list[np.ndarray] = []
    coefficients: list[np.ndarray] = []
    for lmap in problem.blocks:
        s = lmap.size
        const = np.zeros((s, s))
        coef = np.zeros((n, s, s))
        for key, positions in lmap.entries.items():
            for r, c, v in positions:
                if key in problem.fixed:
                    const[r, c] += v * problem.fixed[key]
                    if r != c:
                        const[c, r] += v * problem.fixed[key]
                else:
                    i = index[key]
                    coef[i, r, c] += v
                    if r != c:
                        coef[i, c, r] += v
        constants.append(const)
        coefficients.append(coef)
    for key, bound in problem.upper_bounds.items():
        coef = np.zeros((n, 1, 1))
        if key in problem.fixed:
            const = np.array([[bound - problem.fixed[key]]])
        else:
            const = np.array([[bound]])
            coef[index[key], 0, 0] = -1.0
        constants.append(const)
        coefficients.append(coef)
    obj = np.zeros(n)
    offset = 0.0
    for key, c in problem.objective.items():
        if key in problem.fixed:
            offset += c * problem.fixed[key]
        else:
            obj[index[key]] += c
    keys = problem.variables

    def to_assignment(w: np.ndarray) -> dict:
        return {k: float(v) for k, v in zip(keys, w)}

    return CompiledSdp(constants, coefficients, obj, offset, to_assignment, np.zeros(n))


@dataclass(frozen=True)
class Feasible:
    assignment: dict
    objective: float
    min_block_eigenvalue: float
    phase1_margin: float
    gap: float
    iterations: int
    # False when phase 2 stalled: the point is verified feasible but the
    # objective may be above the optimum by more than the gap tolerance
    rho_converged: bool = True
    status: str = field(default="Feasible", init=False)


@dataclass(frozen=True)
class Infeasible:
    phase1_margin: float
    phase1_assignment: dict
    iterations: int
    status: str = field(default="Infeasible", init=False)


@dataclass(frozen=True)
class Indeterminate:
    reason: str
    phase1_margin: float | None
    iterations: int = 0
    status: str = field(default="Indeterminate", init=False)


SolveOutcome = Feasible | Infeasible | Indeterminate


@dataclass(frozen=True)
class ResidualReport:
    block_min_eigenvalues: tuple[float, ...]
    objective: float

    @property
    def min_eigenvalue(self) -> float:
        return min(self.block_min_eigenvalues, default=float("inf"))


def describe(outcome: SolveOutcome) -> str:
    if isinstance(outcome, Feasible):
        return f"Feasible(objective={outcome.objective:.9g}, margin={outcome.phase1_margin:.3g})"
    if isinstance(outcome, Infeasible):
        return f"Infeasible(margin={outcome.phase1_margin:.3g})"
    return f"Indeterminate({outcome.reason})"


def block_sizes(problem: SdpProblem) -> Sequence[int]:
    return [b.size for b in problem.blocks] + [1] * len(problem.upper_bounds)
