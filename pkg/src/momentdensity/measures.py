"""Analytic moment sequences.

Lebesgue measure on a box is always normalised to a probability measure, so
every density in this package is relative to the *uniform* distribution on
the box. This shifts moments by the box volume compared to the raw Lebesgue
measure; e.g. the density of ``2x dx`` on [0, 2] is ``x``, not ``2x``.

All generators compute in exact rational arithmetic (floats enter through
``Fraction(float)``, which is exact) and round once at the end. The exact
values travel with the vector because the finite-difference checks in
:mod:`momentdensity.hausdorff` are hopelessly ill-conditioned in floating point.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

from .polybasis import MultiIndex, Polynomial, check_index, enumerate_indices

Box = Sequence[tuple[float, float]]


class IncompleteMomentsError(KeyError):
    """A computation needed moments that the vector does not carry."""

    def __init__(self, missing: Sequence[MultiIndex], what: str = "moment vector"):
        self.missing = sorted(missing, key=lambda e: (sum(e), e))
        shown = ", ".join(str(m) for m in self.missing[:12])
        more = "" if len(self.missing) <= 12 else f" (+{len(self.missing) - 12} more)"
        super().__init__(f"{what} lacks {len(self.missing)} entries: {shown}{more}")

    def __str__(self) -> str:
        return self.args[0]


@dataclass(frozen=True)
class MomentVector:
    """Moments ``y_alpha`` for every multi-index of degree <= ``max_order``."""

    nvars: int
    max_order: int
    entries: Mapping[MultiIndex, float]
    probability: bool = False
    exact: Mapping[MultiIndex, Fraction] | None = field(default=None, compare=False)

    def __post_init__(self) -> None:
        entries = {check_index(k, self.nvars): float(v) for k, v in self.entries.items()}
        object.__setattr__(self, "entries", entries)
        missing = [k for k in enumerate_indices(self.nvars, self.max_order) if k not in entries]
        if missing:
            raise IncompleteMomentsError(missing)
        if self.probability and abs(entries[(0,) * self.nvars] - 1.0) > 1e-12:
            raise ValueError("probability moment vector must have y_0 = 1")

    def __getitem__(self, key: MultiIndex) -> float:
        return self.entries[key]

    def __contains__(self, key: object) -> bool:
        return key in self.entries

    def truncate(self, order: int) -> MomentVector:
        keep = {k: v for k, v in self.entries.items() if sum(k) <= order}
        ex = None if self.exact is None else {k: self.exact[k] for k in keep}
        return MomentVector(self.nvars, min(order, self.max_order), keep, self.probability, ex)

    def univariate(self) -> list[float]:
        if self.nvars != 1:
            raise ValueError(f"expected a univariate moment vector, got nvars={self.nvars}")
        return [self.entries[(k,)] for k in range(self.max_order + 1)]

    def univariate_exact(self) -> list[Fraction] | None:
        if self.nvars != 1:
            raise ValueError(f"expected a univariate moment vector, got nvars={self.nvars}")
        if self.exact is None:
            return None
        return [self.exact[(k,)] for k in range(self.max_order + 1)]

    def to_json(self) -> dict:
        rows = []
        for k in enumerate_indices(self.nvars, self.max_order):
            row: dict = {"exp": list(k), "value": self.entries[k]}
            if self.exact is not None:
                q = self.exact[k]
                row["exact"] = f"{q.numerator}/{q.denominator}"
            rows.append(row)
        return {
            "nvars": self.nvars,
            "max_order": self.max_order,
            "probability": self.probability,
            "entries": rows,
        }

    @classmethod
    def from_json(cls, data: Mapping) -> MomentVector:
        nvars = int(data["nvars"])
        entries: dict[MultiIndex, float] = {}
        exact: dict[MultiIndex, Fraction] = {}
        for row in data["entries"]:
            k = check_index(row["exp"], nvars)
            entries[k] = float(row["value"])
            if "exact" in row:
                exact[k] = Fraction(row["exact"])
        return cls(
            nvars,
            int(data["max_order"]),
            entries,
            bool(data.get("probability", False)),
            exact if len(exact) == len(entries) else None,
        )


class JointMomentVector(MomentVector):
    """Moments ``z_{alpha k}`` in ``(x, t)``; the last coordinate is ``t``."""


def _exact_box(box: Box) -> list[tuple[Fraction, Fraction]]:
    out = []
    for lo, hi in box:
        lo_q, hi_q = Fraction(lo), Fraction(hi)
        if not lo_q < hi_q:
            raise ValueError(f"degenerate box interval [{lo}, {hi}]")
        out.append((lo_q, hi_q))
    return out


def _uniform_moment(lo: Fraction, hi: Fraction, k: int) -> Fraction:
    return (hi ** (k + 1) - lo ** (k + 1)) / ((k + 1) * (hi - lo))


def _box_moments_exact(box: Box, max_order: int) -> dict[MultiIndex, Fraction]:
    ebox = _exact_box(box)
    tables = [[_uniform_moment(lo, hi, k) for k in range(max_order + 1)] for lo, hi in ebox]
    out = {}
    for idx in enumerate_indices(len(ebox), max_order):
        val = Fraction(1)
        for table, e in zip(tables, idx):
            val *= table[e]
        out[idx] = val
    return out


def _rounded(exact: Mapping[MultiIndex, Fraction]) -> dict[MultiIndex, float]:
    return {k: float(v) for k, v in exact.items()}


def box_lebesgue_moments(box: Box, max_order: int) -> MomentVector:
    """Moments of the uniform probability measure on ``box``."""
    if max_order < 0:
        raise ValueError("max_order must be non-negative")
    exact = _box_moments_exact(box, max_order)
    return MomentVector(len(box), max_order, _rounded(exact), True, exact)


@dataclass(frozen=True)
class MixtureScenario:
    """``a * uniform(box) + (1 - a) * sum_i w_i * delta(s_i)``."""

    a: float
    atoms: tuple[tuple[tuple[float, ...], float], ...] = ()

    def __post_init__(self) -> None:
        atoms = tuple((tuple(float(c) for c in loc), float(w)) for loc, w in self.atoms)
        object.__setattr__(self, "atoms", atoms)
        if not 0.0 <= self.a <= 1.0:
            raise ValueError(f"box weight a={self.a} outside [0, 1]")
        if any(w < 0 for _, w in atoms):
            raise ValueError("atom weights must be non-negative")
        if self.a < 1.0:
            total = sum(w for _, w in atoms)
            if abs(total - 1.0) > 1e-12:
                raise ValueError(f"atom weights sum to {total}, expected 1")

    @classmethod
    def one_dirac(cls, s: float, weight: float) -> MixtureScenario:
        """Uniform on [0,1] mixed with one Dirac of mass ``weight`` at ``s``."""
        return cls(_complement(weight), (((s,), 1.0),))

    @classmethod
    def two_dirac(cls, s: float, weight: float, gap: float = 0.1) -> MixtureScenario:
        """Equal-mass Diracs at ``s`` and ``s + gap`` with total mass ``weight``."""
        return cls(_complement(weight), (((s,), 0.5), ((round(s + gap, 12),), 0.5)))

    @property
    def atom_weight(self) -> float:
        return 1.0 - self.a

    def to_json(self) -> dict:
        return {"a": self.a, "atoms": [{"s": list(loc), "w": w} for loc, w in self.atoms]}

    @classmethod
    def from_json(cls, data: Mapping) -> MixtureScenario:
        atoms = tuple((tuple(at["s"]), float(at["w"])) for at in data.get("atoms", []))
        return cls(float(data["a"]), atoms)


def _complement(weight: float) -> float:
    # 1 - 0.3 is not 0.7 in binary; round to the decimal grid the tables use
    return float(round(1.0 - weight, 12))


def mixture_moments(scenario: MixtureScenario, box: Box, max_order: int) -> MomentVector:
    nvars = len(box)
    for loc, _ in scenario.atoms:
        if len(loc) != nvars:
            raise ValueError(f"atom {loc} has wrong dimension for a {nvars}-d box")
        for c, (lo, hi) in zip(loc, box):
            if not lo <= c <= hi:
                raise ValueError(f"atom {loc} lies outside the box {list(box)}")
    a = Fraction(scenario.a)
    lebesgue = _box_moments_exact(box, max_order)
    exact: dict[MultiIndex, Fraction] = {}
    for idx, g in lebesgue.items():
        atomic = Fraction(0)
        for loc, w in scenario.atoms:
            val = Fraction(w)
            for c, e in zip(loc, idx):
                val *= Fraction(c) ** e
            atomic += val
        exact[idx] = a * g + (1 - a) * atomic
    # the atomic weights are exact binary fractions that may not sum to 1
    # exactly; renormalise so y_0 = 1 holds to the last bit
    y0 = exact[(0,) * nvars]
    if y0 != 1:
        exact = {k: v / y0 for k, v in exact.items()}
    return MomentVector(nvars, max_order, _rounded(exact), True, exact)


def density_moments(density: Polynomial, box: Box, max_order: int) -> MomentVector:
    """Moments ``y_alpha = integral of x^alpha f`` against the uniform measure on ``box``."""
    joint = witness_joint_moments(density, box, max_order + 1)
    exact = {k[:-1]: v for k, v in joint.exact.items() if k[-1] == 1 and sum(k) <= max_order + 1}
    y0 = exact[(0,) * density.nvars]
    return MomentVector(density.nvars, max_order, _rounded(exact), y0 == 1, exact)


def witness_joint_moments(density: Polynomial, box: Box, max_order: int) -> JointMomentVector:
    """``z_{alpha k} = integral of x^alpha f(x)^k`` over the uniform measure on ``box``.

    These are the moments of the image of the uniform measure under
    ``x -> (x, f(x))``; for ``f >= 0`` with unit mass they witness feasibility
    of every level of the hierarchy. Nonnegativity of ``f`` is not checked.
    """
    n = density.nvars
    if len(box) != n:
        raise ValueError(f"box has {len(box)} intervals for a {n}-variate density")
    gamma = _box_moments_exact(box, max_order + density.degree * max_order)
    fq = {e: Fraction(c) for e, c in density.terms.items()}
    power: dict[MultiIndex, Fraction] = {(0,) * n: Fraction(1)}
    exact: dict[MultiIndex, Fraction] = {}
    for k in range(max_order + 1):
        for alpha in enumerate_indices(n, max_order - k):
            total = Fraction(0)
            for e, c in power.items():
                total += c * gamma[tuple(a + b for a, b in zip(alpha, e))]
            exact[alpha + (k,)] = total
        nxt: dict[MultiIndex, Fraction] = {}
        for e1, c1 in power.items():
            for e2, c2 in fq.items():
                e = tuple(a + b for a, b in zip(e1, e2))
                nxt[e] = nxt.get(e, Fraction(0)) + c1 * c2
        power = {e: c for e, c in nxt.items() if c}
    return JointMomentVector(n + 1, max_order, _rounded(exact), False, exact)
