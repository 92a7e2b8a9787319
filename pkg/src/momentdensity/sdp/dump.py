"""Plain-text dump of an :class:`SdpProblem` for cross-checking elsewhere.

Format (one record per line, keys serialised as compact JSON)::

    momentdensity-conic 1
    variables <n>
    <key>                          (n lines, in order)
    fixed <n>
    <key> <value>
    objective <n>
    <key> <coef>
    bounds <n>
    <key> <upper>                  (meaning key <= upper)
    blocks <n>
    block <label> <size> <npositions>
    <key> <row> <col> <coef>       (row <= col; the block is sum key*C_key, symmetrised)

Numbers use ``repr`` so reading the file back is lossless.
"""
from __future__ import annotations

import json
from typing import Hashable, Iterator, TextIO

from ..momentmatrix import LinearMatrixMap
from .problem import SdpProblem

HEADER = "momentdensity-conic 1"


def _key(k: Hashable) -> str:
    return json.dumps(list(k) if isinstance(k, tuple) else k, separators=(",", ":"))


def _unkey(text: str) -> Hashable:
    val = json.loads(text)
    return tuple(val) if isinstance(val, list) else val


def dump_lines(problem: SdpProblem) -> Iterator[str]:
    yield HEADER
    yield f"variables {len(problem.variables)}"
    for k in problem.variables:
        yield _key(k)
    for name, table in (("fixed", problem.fixed), ("objective", problem.objective),
                        ("bounds", problem.upper_bounds)):
        yield f"{name} {len(table)}"
        for k, v in table.items():
            yield f"{_key(k)} {float(v)!r}"
    yield f"blocks {len(problem.blocks)}"
    for label, lmap in zip(problem.block_labels, problem.blocks):
        count = sum(len(p) for p in lmap.entries.values())
        yield f"block {label.replace(' ', '_')} {lmap.size} {count}"
        for k, positions in lmap.entries.items():
            for r, c, coef in positions:
                yield f"{_key(k)} {r} {c} {float(coef)!r}"


def dump_problem(problem: SdpProblem, out: TextIO) -> None:
    for line in dump_lines(problem):
        out.write(line + "\n")


def load_problem(stream: TextIO) -> SdpProblem:
    lines = iter(line.rstrip("\n") for line in stream)
    header = next(lines, "")
    if header != HEADER:
        raise ValueError(f"unrecognised header {header!r}, expected {HEADER!r}")

    def section(name: str) -> int:
        tag, count = next(lines).split()
        if tag != name:
            raise ValueError(f"expected section {name!r}, found {tag!r}")
        return int(count)

    variables = [_unkey(next(lines)) for _ in range(section("variables"))]
    tables = []
    for name in ("fixed", "objective", "bounds"):
        table = {}
        for _ in range(section(name)):
            k, v = next(lines).rsplit(" ", 1)
            table[_unkey(k)] = float(v)
        tables.append(table)
    blocks, labels = [], []
    for _ in range(section("blocks")):
        _, label, size, count = next(lines).split()
        entries: dict = {}
        for _ in range(int(count)):
            k, r, c, coef = next(lines).rsplit(" ", 3)
            entries.setdefault(_unkey(k), []).append((int(r), int(c), float(coef)))
        blocks.append(LinearMatrixMap(int(size), {k: tuple(v) for k, v in entries.items()}))
        labels.append(label)
    fixed, objective, bounds = tables
    return SdpProblem(tuple(variables), tuple(blocks), fixed, objective, bounds, tuple(labels))
