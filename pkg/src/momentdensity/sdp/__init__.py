"""Dense semidefinite programming with a phase-1 feasibility margin."""
from .problem import (
    CompiledSdp,
    Feasible,
    Indeterminate,
    Infeasible,
    ResidualReport,
    SdpProblem,
    SolveOutcome,
    SolverConfig,
    compile_direct,
    describe,
)
from .solver import Phase1Result, phase1, phase1_detailed, residuals, solve
from .dump import dump_problem

__all__ = [
    "CompiledSdp", "Feasible", "Indeterminate", "Infeasible", "ResidualReport",
    "SdpProblem", "SolveOutcome", "SolverConfig", "compile_direct", "describe",
    "Phase1Result", "phase1", "phase1_detailed", "residuals", "solve", "dump_problem",
]
