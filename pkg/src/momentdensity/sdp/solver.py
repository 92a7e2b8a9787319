"""Primal-dual interior-point solver for dense block SDPs.

Everything works on a :class:`CompiledSdp`: minimise ``c.w`` subject to
``S_b = F_b0 + sum_i w_i A_bi >= 0`` for every block. The dual is
``max -sum_b <F_b0, X_b>`` subject to ``sum_b <A_bi, X_b> = c_i``, ``X_b >= 0``.
Iterates keep ``S`` exactly feasible and drive the dual residual to zero
along HKM search directions with a Mehrotra predictor-corrector.

Feasibility is decided by the margin program
``min t  s.t.  F_b(w) + t I >= 0`` which is strictly feasible from a known
start. Free moments can grow without bound while the margin keeps
improving, so phase 1 adds one scalar budget block ``B - sum_b tr F_b(w)``;
a positive margin reached with the budget active is not trusted.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Hashable, Mapping

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from ..momentmatrix import instantiate
from .problem import (
    CompiledSdp,
    Feasible,
    Indeterminate,
    Infeasible,
    ResidualReport,
    SdpProblem,
    SolveOutcome,
    SolverConfig,
)

log = logging.getLogger(__name__)

# relative dual residual below which the dual iterate counts as feasible
DUAL_RESIDUAL_TOL = 1e-7
# iterations without progress in the gap (10%) or the objective before giving up
STALL_WINDOW = 15


class NumericalBreakdown(RuntimeError):
    pass


def _sym(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m + m.T)


def _max_step(chol: np.ndarray, direction: np.ndarray) -> float:
    """Largest alpha with ``L L^T + alpha D >= 0``."""
    linv_d = np.linalg.solve(chol, direction)
    whitened = np.linalg.solve(chol, linv_d.T)
    lam = np.linalg.eigvalsh(_sym(whitened))[0]
    return np.inf if lam >= 0 else -1.0 / lam


def _all_pd(mats: list[np.ndarray]) -> bool:
    try:
        for m in mats:
            np.linalg.cholesky(m)
    except np.linalg.LinAlgError:
        return False
    return True


@dataclass
class _Result:
    w: np.ndarray
    primal: float
    lower: float
    gap: float
    iterations: int
    converged: bool
    reason: str = ""


class _PrimalDual:
    def __init__(self, constants: list[np.ndarray], coefficients: list[np.ndarray],
                 c: np.ndarray, config: SolverConfig):
        self.constants = constants
        self.coefficients = coefficients
        self.c = c
        self.cfg = config
        self.m = sum(f.shape[0] for f in constants)

    def _slacks(self, w: np.ndarray) -> list[np.ndarray]:
        return [f + np.tensordot(w, a, axes=1) for f, a in zip(self.constants, self.coefficients)]

    def _solve_schur(self, schur: np.ndarray, rhs: np.ndarray) -> np.ndarray:
        scale = np.sqrt(np.abs(np.diag(schur)))
        scale[scale == 0] = 1.0
        scaled = _sym(schur) / np.outer(scale, scale)
        delta = self.cfg.reg_start
        while delta <= self.cfg.reg_max:
            try:
                factor = cho_factor(scaled + delta * np.eye(len(rhs)), lower=True)
                step = cho_solve(factor, rhs / scale)
                if np.all(np.isfinite(step)):
                    return step / scale
            except LinAlgError:
                pass
            delta *= 2.0
        raise NumericalBreakdown("Newton system not positive definite after regularisation")

    def _dual_start(self, c: np.ndarray, g: np.ndarray, s_invs: list[np.ndarray],
                    kind: str) -> list[np.ndarray]:
        """Best-fitting multiple of ``S^-1`` ("central") or of the identity ("identity")."""
        if kind == "central":
            direction, mats = g, s_invs
        else:
            direction = sum(np.trace(a, axis1=1, axis2=2) for a in self.coefficients)
            mats = [np.eye(f.shape[0]) for f in self.constants]
        dd = float(direction @ direction)
        scale = float(c @ direction) / dd if dd > 0 else 1.0
        scale = scale if scale > 0 else 1.0
        return [scale * m for m in mats]

    def run(self, w: np.ndarray, stop: Callable[[float, float], bool],
            abort: Callable[[float], str | None] = lambda value: None,
            path: list | None = None, dual_start: str = "central") -> _Result:
        c = self.c
        n = len(c)
        cnorm = 1.0 + np.linalg.norm(c)
        tau = self.cfg.step_fraction
        xs: list[np.ndarray] | None = None
        primal = lower = gap = np.nan
        best_gap, best_primal, best_at = np.inf, np.inf, 0
        for it in range(self.cfg.max_newton + 1):
            if path is not None:
                path.append(w)
            slacks = self._slacks(w)
            try:
                s_chols = [np.linalg.cholesky(s) for s in slacks]
            except np.linalg.LinAlgError:
                return _Result(w, primal, lower, gap, it, False, "primal iterate left the cone")
            s_invs = [cho_solve((l, True), np.eye(l.shape[0])) for l in s_chols]
            g = sum(np.einsum("iab,ba->i", a, si) for a, si in zip(self.coefficients, s_invs))
            if xs is None:
                xs = self._dual_start(c, g, s_invs, dual_start)
            try:
                x_chols = [np.linalg.cholesky(x) for x in xs]
            except np.linalg.LinAlgError:
                return _Result(w, primal, lower, gap, it, False, "dual iterate left the cone")
            ax = sum(np.einsum("iab,ba->i", a, x) for a, x in zip(self.coefficients, xs))
            resid = c - ax
            sx = sum(float(np.sum(s * x)) for s, x in zip(slacks, xs))
            mu = sx / self.m
            primal = float(c @ w)
            lower = -sum(float(np.sum(f * x)) for f, x in zip(self.constants, xs))
            # c.w - (-<F0, X>) = <S, X> + w.r; the residual term matters when r != 0
            gap = sx + abs(float(w @ resid))
            dual_ok = np.linalg.norm(resid) / cnorm <= DUAL_RESIDUAL_TOL
            if dual_ok and stop(primal, gap):
                return _Result(w, primal, lower, gap, it, True)
            reason = abort(primal)
            if reason:
                return _Result(w, primal, lower, gap, it, False, reason)
            if it == self.cfg.max_newton:
                break
            if gap < best_gap * 0.9 or primal < best_primal - 1e-9 * (1 + abs(primal)):
                best_at = it
            best_gap, best_primal = min(best_gap, gap), min(best_primal, primal)
            if it - best_at >= STALL_WINDOW:
                return _Result(w, primal, lower, gap, it, False, "stalled: gap stopped shrinking")
            if n == 0:
                # nothing to move; only the dual can improve and it has no equations
                return _Result(w, primal, lower, gap, it, True)

            schur = np.zeros((n, n))
            for a, x, si in zip(self.coefficients, xs, s_invs):
                r_flat = (a @ x).reshape(n, -1)
                q_flat = (si @ a).reshape(n, -1)
                schur += r_flat @ q_flat.T
            try:
                # predictor: pure affine-scaling direction
                dw = self._solve_schur(schur, -c)
                ds = [np.tensordot(dw, a, axes=1) for a in self.coefficients]
                dx = [-x - _sym(x @ d @ si) for x, d, si in zip(xs, ds, s_invs)]
                ap = min(1.0, min(_max_step(l, d) for l, d in zip(s_chols, ds)))
                ad = min(1.0, min(_max_step(l, d) for l, d in zip(x_chols, dx)))
                mu_aff = sum(
                    float(np.sum((s + ap * d) * (x + ad * e)))
                    for s, d, x, e in zip(slacks, ds, xs, dx)
                ) / self.m
                sigma = min(1.0, max(0.0, mu_aff / mu) ** 3)
                # corrector with the second-order term
                corr = [e @ d @ si for e, d, si in zip(dx, ds, s_invs)]
                rhs = sigma * mu * g - c - sum(
                    np.einsum("iab,ba->i", a, k) for a, k in zip(self.coefficients, corr)
                )
                dw = self._solve_schur(schur, rhs)
            except NumericalBreakdown as exc:
                return _Result(w, primal, lower, gap, it, False, str(exc))
            ds = [np.tensordot(dw, a, axes=1) for a in self.coefficients]
            dx = [
                sigma * mu * si - x - _sym(x @ d @ si) - _sym(k)
                for x, d, si, k in zip(xs, ds, s_invs, corr)
            ]
            ap = min(1.0, tau * min(_max_step(l, d) for l, d in zip(s_chols, ds)))
            ad = min(1.0, tau * min(_max_step(l, d) for l, d in zip(x_chols, dx)))
            # the boundary distance is computed in floating point; confirm by Cholesky
            while ap > 1e-12 and not _all_pd(self._slacks(w + ap * dw)):
                ap *= 0.5
            while ad > 1e-12 and not _all_pd([x + ad * d for x, d in zip(xs, dx)]):
                ad *= 0.5
            if max(ap, ad) < 1e-10:
                return _Result(w, primal, lower, gap, it, False, "step length collapsed")
            log.debug("it=%d primal=%.10g gap=%.3e resid=%.3e sigma=%.3f ap=%.3g ad=%.3g",
                      it, primal, gap, np.linalg.norm(resid) / cnorm, sigma, ap, ad)
            w = w + ap * dw
            xs = [x + ad * d for x, d in zip(xs, dx)]
        return _Result(w, primal, lower, gap, self.cfg.max_newton, False, "iteration cap reached")


@dataclass(frozen=True)
class Phase1Result:
    margin: float
    # certified lower bound on the optimal margin (margin minus the gap estimate)
    lower: float
    assignment: dict
    # strictly feasible working point used to start phase 2
    working: np.ndarray
    converged: bool
    budget_active: bool
    iterations: int
    reason: str = ""


def _phase1_compiled(compiled: CompiledSdp, config: SolverConfig) -> Phase1Result:
    n = compiled.nvars
    consts, coefs = [], []
    for c, a in zip(compiled.constants, compiled.coefficients):
        s = c.shape[0]
        lifted = np.concatenate([a, np.eye(s)[None]], axis=0)
        consts.append(c)
        coefs.append(lifted)
    budget = config.phase1_trace_budget
    trace_const = sum(np.trace(c) for c in compiled.constants)
    trace_coef = sum(np.trace(a, axis1=1, axis2=2) for a in compiled.coefficients)
    if n == 0:
        trace_coef = np.zeros(0)
    consts.append(np.array([[budget - trace_const]]))
    coefs.append(np.concatenate([-np.asarray(trace_coef, float), [0.0]])[:, None, None])
    w0 = np.asarray(compiled.start, float)
    worst = max(np.linalg.eigvalsh(-f)[-1] for f in compiled.blocks_at(w0))
    t0 = max(1.0, 1.1 * worst)
    x0 = np.concatenate([w0, [t0]])
    if trace_const - (float(np.dot(trace_coef, w0)) if n else 0.0) >= budget:
        return Phase1Result(t0, -np.inf, compiled.to_assignment(w0), w0, False, True, 0,
                            "start point violates the phase-1 trace budget")
    objective = np.zeros(n + 1)
    objective[-1] = 1.0
    engine = _PrimalDual(consts, coefs, objective, config)
    for start in ("central", "identity"):
        path: list[np.ndarray] = []
        res = engine.run(x0, lambda primal, gap: gap <= config.phase1_gap_tol, path=path,
                         dual_start=start)
        if res.converged:
            break
    w = res.w[:n]
    # The margin is often approached only as free moments grow without bound,
    # so late iterates are huge. Phase 2 starts from the first iterate that
    # already has half the final margin.
    start = w
    if res.w[-1] < 0:
        start = next(p[:n] for p in path + [res.w] if p[-1] <= 0.5 * res.w[-1])
    slack = budget - trace_const - (float(np.dot(trace_coef, w)) if n else 0.0)
    return Phase1Result(
        float(res.w[-1]),
        float(res.lower) if res.converged else -np.inf,
        compiled.to_assignment(w),
        start,
        res.converged,
        slack < 1e-2 * budget,
        res.iterations,
        res.reason,
    )


def phase1(problem: SdpProblem, config: SolverConfig | None = None) -> tuple[float, dict]:
    """Smallest ``t`` making every block plus ``t I`` PSD, and the minimising assignment."""
    res = _phase1_compiled(problem.compile(), config or SolverConfig())
    return res.margin, res.assignment


def phase1_detailed(problem: SdpProblem, config: SolverConfig | None = None) -> Phase1Result:
    return _phase1_compiled(problem.compile(), config or SolverConfig())


def solve(problem: SdpProblem, config: SolverConfig | None = None,
          optimize: bool = True) -> SolveOutcome:
    """Phase 1 for the verdict, then phase 2 for the objective.

    With ``optimize=False`` a strictly feasible problem returns the phase-1
    point unoptimised (``rho_converged`` is False).
    """
    cfg = config or SolverConfig()
    compiled = problem.compile()
    p1 = _phase1_compiled(compiled, cfg)
    eps = cfg.infeas_threshold
    if p1.margin > eps:
        if p1.budget_active:
            return Indeterminate(
                "positive margin only under an active trace budget", p1.margin, p1.iterations
            )
        if p1.lower <= eps:
            return Indeterminate(f"phase 1 stopped early: {p1.reason}", p1.margin, p1.iterations)
        return Infeasible(p1.margin, p1.assignment, p1.iterations)
    if p1.margin >= -eps:
        return Indeterminate("marginal: |t*| within the infeasibility threshold", p1.margin,
                             p1.iterations)
    return _phase2(problem, compiled, p1, cfg, optimize)


def _phase2(problem: SdpProblem, compiled: CompiledSdp, p1: Phase1Result,
            cfg: SolverConfig, optimize: bool = True) -> SolveOutcome:
    c = compiled.objective
    w = p1.working.copy()
    iterations = p1.iterations
    gap = 0.0
    converged = optimize
    if optimize and compiled.nvars and np.any(c):
        engine = _PrimalDual(list(compiled.constants), list(compiled.coefficients), c, cfg)
        scale0 = max(1.0, abs(float(c @ w) + compiled.objective_offset))
        limit = -cfg.unbounded_limit * scale0

        def stop(primal: float, gap: float) -> bool:
            return gap <= cfg.gap_tol * max(1.0, abs(primal + compiled.objective_offset))

        def abort(primal: float) -> str | None:
            value = primal + compiled.objective_offset
            if value < limit:
                return f"objective unbounded below (reached {value:.3g})"
            return None

        # The scaled S^-1 start is centred but can sit far from dual feasibility;
        # the scaled identity is the reference-basis moment matrix of the
        # reference measure. Try the first, fall back to the second.
        best = None
        for start in ("central", "identity"):
            res = engine.run(w, stop, abort, dual_start=start)
            iterations += res.iterations
            if res.reason.startswith("objective unbounded"):
                return Indeterminate(res.reason, p1.margin, iterations)
            usable = res.reason != "primal iterate left the cone" and np.all(np.isfinite(res.w))
            if usable and (best is None or (res.converged, -res.primal) > (best.converged, -best.primal)):
                best = res
            if res.converged:
                break
        if best is None:
            # keep the certified phase-1 point
            converged = False
        else:
            converged = best.converged
            w = best.w
            gap = best.gap
    assignment = compiled.to_assignment(w)
    report = residuals(problem, assignment)
    if report.min_eigenvalue < -cfg.feas_tol:
        return Indeterminate(
            f"recovered point has block eigenvalue {report.min_eigenvalue:.3g}", p1.margin,
            iterations,
        )
    return Feasible(assignment, report.objective, report.min_eigenvalue, p1.margin, gap, iterations,
                    converged)


def residuals(problem: SdpProblem, assignment: Mapping[Hashable, float]) -> ResidualReport:
    """Independent check: instantiate every block and take its smallest eigenvalue."""
    missing = [k for k in problem.variables if k not in assignment]
    if missing:
        raise KeyError(f"assignment lacks free variables {missing[:5]}")
    values = dict(problem.fixed)
    values.update({k: assignment[k] for k in problem.variables})
    mins = []
    for lmap in problem.blocks:
        mins.append(float(np.linalg.eigvalsh(instantiate(lmap, values))[0]))
    for key, bound in problem.upper_bounds.items():
        mins.append(float(bound - values[key]))
    return ResidualReport(tuple(mins), problem.objective_value(values))
