"""Threshold sweeps over Dirac-mixture scenarios on [0, 1].

A cell is one (atom location, atom weight, level) triple. For each row
(location) and column (level) the table reports which atom weights the
level declares infeasible.
"""
from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Sequence

from .hierarchy import HierarchyConfig, solve_level
from .measures import MixtureScenario, box_lebesgue_moments, mixture_moments
from .polybasis import SemialgebraicSet
from .sdp import SolverConfig

WORKERS_ENV = "MOMENTDENSITY_WORKERS"

DEFAULT_WEIGHTS = tuple(round(0.1 * i, 1) for i in range(1, 11))
TABLE_LEVELS = {1: (4, 5, 6, 7), 2: (5, 6)}


def table_rows(which: int) -> list[tuple[float, ...]]:
    if which == 1:
        return [(round(0.1 * i, 1),) for i in range(11)]
    if which == 2:
        return [(round(0.1 * i, 1), round(0.1 * i + 0.1, 1)) for i in range(1, 10)]
    raise ValueError(f"unknown table {which}; expected 1 or 2")


def scenario_for(atoms: Sequence[float], weight: float) -> MixtureScenario:
    if len(atoms) == 1:
        return MixtureScenario.one_dirac(atoms[0], weight)
    share = 1.0 / len(atoms)
    return MixtureScenario(round(1.0 - weight, 12), tuple(((s,), share) for s in atoms))


@dataclass(frozen=True)
class Cell:
    atoms: tuple[float, ...]
    weight: float
    d: int
    status: str
    margin: float | None
    seconds: float


def _run_cell(args: tuple) -> list[Cell]:
    atoms, weight, levels, solver = args
    kset = SemialgebraicSet.interval(0.0, 1.0)
    top = 2 * max(levels)
    gamma = box_lebesgue_moments(kset.box, top)
    y = mixture_moments(scenario_for(atoms, weight), kset.box, top)
    config = HierarchyConfig(dmax=max(levels), solver=solver, compute_rho=False)
    out = []
    for d in levels:
        rec = solve_level(kset, gamma, y, d, config)
        out.append(Cell(tuple(atoms), weight, d, rec.status, rec.margin, rec.seconds))
    return out


def worker_count() -> int:
    raw = os.environ.get(WORKERS_ENV)
    if raw:
        return max(1, int(raw))
    return max(1, len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else 1)


def sweep(
    rows: Iterable[tuple[float, ...]],
    weights: Sequence[float],
    levels: Sequence[int],
    solver: SolverConfig | None = None,
    workers: int | None = None,
) -> list[Cell]:
    """Evaluate every (row, weight) at every level; results in grid order."""
    solver = solver or SolverConfig()
    jobs = [(tuple(r), w, tuple(levels), solver) for r in rows for w in weights]
    workers = worker_count() if workers is None else workers
    if workers <= 1:
        results = [_run_cell(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_cell, jobs))
    return [cell for group in results for cell in group]


def threshold_text(cells: Sequence[Cell]) -> str:
    """Summarise which weights were declared infeasible in one (row, level) column."""
    bad = sorted(c.weight for c in cells if c.status == "Infeasible")
    unsure = sorted(c.weight for c in cells if c.status == "Indeterminate")
    weights = sorted(c.weight for c in cells)
    if not bad:
        text = "-"
    elif bad == [w for w in weights if w >= bad[0]]:
        text = f"≥ {bad[0]:g}"
    else:
        text = ", ".join(f"{w:g}" for w in bad)
    if unsure:
        text += " (? " + ", ".join(f"{w:g}" for w in unsure) + ")"
    return text


def row_label(atoms: tuple[float, ...]) -> str:
    return f"{atoms[0]:.1f}" if len(atoms) == 1 else "(" + ",".join(f"{a:.1f}" for a in atoms) + ")"


def summarise(cells: Sequence[Cell], levels: Sequence[int]) -> list[dict]:
    rows: dict[tuple, dict[int, list[Cell]]] = {}
    for c in cells:
        rows.setdefault(c.atoms, {}).setdefault(c.d, []).append(c)
    out = []
    for atoms, by_level in rows.items():
        entry = {"row": row_label(atoms)}
        for d in levels:
            entry[str(2 * d)] = threshold_text(by_level.get(d, []))
        out.append(entry)
    return out


def to_markdown(summary: Sequence[dict], levels: Sequence[int], title: str) -> str:
    head = ["s"] + [str(2 * d) for d in levels]
    lines = [f"**{title}** (columns: moment order 2d; cells: atom weights 1-a declared infeasible)",
             "", "| " + " | ".join(head) + " |", "|" + "---|" * len(head)]
    for row in summary:
        lines.append("| " + " | ".join([row["row"]] + [row[h] for h in head[1:]]) + " |")
    return "\n".join(lines) + "\n"


def to_csv_rows(summary: Sequence[dict], levels: Sequence[int]) -> list[list[str]]:
    head = ["s"] + [str(2 * d) for d in levels]
    return [head] + [[row["row"]] + [row[h] for h in head[1:]] for row in summary]
