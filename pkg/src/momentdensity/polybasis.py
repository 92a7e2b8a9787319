"""Multi-indices, sparse polynomials, semi-algebraic sets and preorderings.

Multi-indices are plain tuples of non-negative ints. All index lists are in
graded-lexicographic order: ascending total degree, and within one degree the
first exponent descends, so ``(2,0) < (1,1) < (0,2)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Mapping, Sequence

MultiIndex = tuple[int, ...]

MAX_PREORDERING_GENERATORS = 20


class CapacityError(ValueError):
    """Raised when an enumeration would blow up combinatorially."""


def degree(idx: Sequence[int]) -> int:
    return sum(idx)


def check_index(idx: Sequence[int], nvars: int | None = None) -> MultiIndex:
    idx = tuple(int(e) for e in idx)
    if any(e < 0 for e in idx):
        raise ValueError(f"negative exponent in multi-index {idx}")
    if nvars is not None and len(idx) != nvars:
        raise ValueError(f"multi-index {idx} has length {len(idx)}, expected {nvars}")
    return idx


def add_indices(a: MultiIndex, b: MultiIndex) -> MultiIndex:
    if len(a) != len(b):
        raise ValueError(f"cannot add multi-indices of lengths {len(a)} and {len(b)}")
    return tuple(x + y for x, y in zip(a, b))


def _compositions(nvars: int, total: int) -> Iterable[MultiIndex]:
    # exponent tuples summing to ``total``, first exponent descending
    if nvars == 1:
        yield (total,)
        return
    for first in range(total, -1, -1):
        for rest in _compositions(nvars - 1, total - first):
            yield (first,) + rest


@lru_cache(maxsize=None)
def _enumerate_cached(nvars: int, d: int) -> tuple[MultiIndex, ...]:
    out: list[MultiIndex] = []
    for total in range(d + 1):
        out.extend(_compositions(nvars, total))
    return tuple(out)


def enumerate_indices(nvars: int, d: int) -> list[MultiIndex]:
    """All multi-indices in ``nvars`` variables of degree <= d, graded-lex.

    The list has ``comb(nvars + d, d)`` entries.
    """
    if nvars < 1:
        raise ValueError("nvars must be positive")
    if d < 0:
        raise ValueError("d must be non-negative")
    return list(_enumerate_cached(nvars, d))


def count_indices(nvars: int, d: int) -> int:
    if d < 0:
        return 0
    return math.comb(nvars + d, d)


def index_rank(idx: Sequence[int]) -> int:
    """Position of ``idx`` in ``enumerate_indices(len(idx), degree(idx))``."""
    idx = check_index(idx)
    n = len(idx)
    total = sum(idx)
    rank = count_indices(n, total - 1)
    remaining = total
    for i, e in enumerate(idx[:-1]):
        free = n - i - 1  # variables after position i
        # tuples that agree so far but put more weight on position i come first
        for bigger in range(e + 1, remaining + 1):
            rank += math.comb(remaining - bigger + free - 1, free - 1)
        remaining -= e
    return rank


@dataclass(frozen=True)
class Polynomial:
    """Sparse real polynomial: a map from exponent tuples to coefficients."""

    nvars: int
    terms: Mapping[MultiIndex, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.nvars < 1:
            raise ValueError("nvars must be positive")
        clean: dict[MultiIndex, float] = {}
        for exp, coef in self.terms.items():
            exp = check_index(exp, self.nvars)
            if coef != 0:
                clean[exp] = clean.get(exp, 0) + coef
        clean = {k: v for k, v in clean.items() if v != 0}
        object.__setattr__(self, "terms", clean)

    @classmethod
    def constant(cls, nvars: int, value: float = 1.0) -> Polynomial:
        return cls(nvars, {(0,) * nvars: value})

    @classmethod
    def monomial(cls, exp: Sequence[int], coef: float = 1.0) -> Polynomial:
        exp = check_index(exp)
        return cls(len(exp), {exp: coef})

    @classmethod
    def univariate(cls, coeffs: Sequence[float]) -> Polynomial:
        """``coeffs[k]`` multiplies ``x**k``."""
        return cls(1, {(k,): c for k, c in enumerate(coeffs)})

    @property
    def degree(self) -> int:
        return max((sum(e) for e in self.terms), default=0)

    def is_zero(self) -> bool:
        return not self.terms

    def __add__(self, other: Polynomial) -> Polynomial:
        _check_same_nvars(self, other)
        out = dict(self.terms)
        for exp, coef in other.terms.items():
            out[exp] = out.get(exp, 0) + coef
        return Polynomial(self.nvars, out)

    def __neg__(self) -> Polynomial:
        return Polynomial(self.nvars, {e: -c for e, c in self.terms.items()})

    def __sub__(self, other: Polynomial) -> Polynomial:
        return self + (-other)

    def __mul__(self, other: Polynomial | float) -> Polynomial:
        if isinstance(other, Polynomial):
            return poly_mul(self, other)
        return Polynomial(self.nvars, {e: c * other for e, c in self.terms.items()})

    __rmul__ = __mul__

    def __pow__(self, k: int) -> Polynomial:
        if k < 0:
            raise ValueError("negative powers are not polynomials")
        out = Polynomial.constant(self.nvars)
        base = self
        while k:
            if k & 1:
                out = poly_mul(out, base)
            base = poly_mul(base, base)
            k >>= 1
        return out

    def __call__(self, point: Sequence[float]) -> float:
        return evaluate(self, point)

    def lift(self, extra: int = 1) -> Polynomial:
        """Same polynomial seen in ``nvars + extra`` variables (new exponents 0)."""
        pad = (0,) * extra
        return Polynomial(self.nvars + extra, {e + pad: c for e, c in self.terms.items()})

    def sorted_terms(self) -> list[tuple[MultiIndex, float]]:
        return sorted(self.terms.items(), key=lambda kv: (sum(kv[0]), index_rank(kv[0])))

    def to_json(self) -> dict:
        return {
            "nvars": self.nvars,
            "terms": [{"exp": list(e), "coef": c} for e, c in self.sorted_terms()],
        }

    @classmethod
    def from_json(cls, data: Mapping) -> Polynomial:
        nvars = int(data["nvars"])
        terms: dict[MultiIndex, float] = {}
        for term in data.get("terms", []):
            exp = check_index(term["exp"], nvars)
            terms[exp] = terms.get(exp, 0.0) + float(term["coef"])
        return cls(nvars, terms)

    def __repr__(self) -> str:
        if not self.terms:
            return f"Polynomial({self.nvars}, 0)"
        names = ["x", "y", "z", "t"] if self.nvars <= 4 else [f"x{i}" for i in range(self.nvars)]
        parts = []
        for exp, coef in self.sorted_terms():
            mono = "*".join(
                names[i] if e == 1 else f"{names[i]}^{e}" for i, e in enumerate(exp) if e
            )
            parts.append(f"{coef:g}" + (f"*{mono}" if mono else ""))
        return f"Polynomial({self.nvars}, " + " + ".join(parts) + ")"


def _check_same_nvars(p: Polynomial, q: Polynomial) -> None:
    if p.nvars != q.nvars:
        raise ValueError(f"polynomials live in different rings: nvars {p.nvars} vs {q.nvars}")


def poly_mul(p: Polynomial, q: Polynomial) -> Polynomial:
    """Exact sparse product; coefficients cancelling to zero are dropped."""
    _check_same_nvars(p, q)
    out: dict[MultiIndex, float] = {}
    for e1, c1 in p.terms.items():
        for e2, c2 in q.terms.items():
            e = add_indices(e1, e2)
            out[e] = out.get(e, 0) + c1 * c2
    return Polynomial(p.nvars, out)


def evaluate(p: Polynomial, point: Sequence[float]) -> float:
    if len(point) != p.nvars:
        raise ValueError(f"point has {len(point)} coordinates, polynomial has {p.nvars} variables")
    total = 0.0
    for exp, coef in p.terms.items():
        term = coef
        for xi, e in zip(point, exp):
            if e:
                term *= xi**e
        total += term
    return total


@dataclass(frozen=True)
class SemialgebraicSet:
    """``K = {x : g_j(x) >= 0}`` together with a user-asserted bounding box.

    The box is trusted, not verified. With no inequalities K is the box.
    """

    nvars: int
    inequalities: tuple[Polynomial, ...]
    box: tuple[tuple[float, float], ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "inequalities", tuple(self.inequalities))
        object.__setattr__(self, "box", tuple((float(lo), float(hi)) for lo, hi in self.box))
        if self.nvars < 1:
            raise ValueError("nvars must be positive")
        if len(self.box) != self.nvars:
            raise ValueError(f"box has {len(self.box)} intervals for {self.nvars} variables")
        for lo, hi in self.box:
            if not lo < hi:
                raise ValueError(f"degenerate box interval [{lo}, {hi}]")
        for g in self.inequalities:
            if g.nvars != self.nvars:
                raise ValueError(f"inequality {g} has nvars {g.nvars}, set has {self.nvars}")

    @property
    def m(self) -> int:
        return len(self.inequalities)

    @classmethod
    def interval(cls, lo: float = 0.0, hi: float = 1.0) -> SemialgebraicSet:
        """``[lo, hi]`` described by the single quadratic ``(x - lo)(hi - x)``."""
        g = poly_mul(
            Polynomial.univariate([-lo, 1.0]), Polynomial.univariate([hi, -1.0])
        )
        return cls(1, (g,), ((lo, hi),))

    def to_json(self) -> dict:
        return {
            "nvars": self.nvars,
            "inequalities": [g.to_json() for g in self.inequalities],
            "box": [list(iv) for iv in self.box],
        }

    @classmethod
    def from_json(cls, data: Mapping) -> SemialgebraicSet:
        return cls(
            int(data["nvars"]),
            tuple(Polynomial.from_json(g) for g in data.get("inequalities", [])),
            tuple(tuple(iv) for iv in data["box"]),
        )


@dataclass(frozen=True)
class PreorderingTerm:
    selector: tuple[int, ...]
    product: Polynomial

    @property
    def halfdeg(self) -> int:
        return -(-self.product.degree // 2)


def preordering(kset: SemialgebraicSet) -> list[PreorderingTerm]:
    """All products ``g^beta`` for ``beta`` in {0,1}^m, in binary counting order."""
    m = kset.m
    if m > MAX_PREORDERING_GENERATORS:
        raise CapacityError(
            f"{m} inequalities would need 2^{m} = {2**m} preordering products "
            f"(limit is 2^{MAX_PREORDERING_GENERATORS})"
        )
    terms = []
    for count in range(2**m):
        # binary counting with g_1 as the least significant bit
        beta = tuple((count >> j) & 1 for j in range(m))
        product = Polynomial.constant(kset.nvars)
        for bit, g in zip(beta, kset.inequalities):
            if bit:
                product = poly_mul(product, g)
        terms.append(PreorderingTerm(beta, product))
    return terms

