"""Coefficient table of the anharmonic imaginary-time amplitude.

The amplitude correction factor is expanded as

    A(x_b, x_a, tau) = sum_n g^n sum_{k=0}^{2n} sum_{l=0}^{2k}
                       c[n, k, l](tau) / sinh(omega tau)^l * x_a^(2k-l) x_b^l

Only the diagonal entries l = 2k are integrated.  Everything else follows
from the mirror symmetry c[n,k,l]/sinh^l = c[n,k,2k-l]/sinh^(2k-l) and an
algebraic relation obtained by differentiating that symmetry.  Each built
order is checked against the master ODE by exact symbolic differentiation.
"""

from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import NamedTuple

from . import hypalg
from .errors import ConstraintViolation, SymmetryViolation
from .hypalg import HypExpr

log = logging.getLogger(__name__)

N_MAX = 7


class CoeffKey(NamedTuple):
    """Index (n, k, l) of c_{2k|l}^{(n)}; ``k`` is the half power."""

    n: int
    k: int
    l: int

    @classmethod
    def checked(cls, n: int, k: int, l: int) -> "CoeffKey":
        if not is_valid(n, k, l):
            raise ValueError(f"invalid coefficient index (n={n}, k={k}, l={l})")
        return cls(n, k, l)


def is_valid(n: int, k: int, l: int) -> bool:
    """Index rules: no negative indices, 2k <= 4n, l <= 2k."""
    return n >= 0 and k >= 0 and l >= 0 and k <= 2 * n and l <= 2 * k


@dataclass
class CoeffTable:
    entries: dict = field(default_factory=dict)
    max_order: int = -1
    integrations: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)

    def __getitem__(self, key) -> HypExpr:
        return self.entries[CoeffKey(*key)]

    def get(self, n: int, k: int, l: int) -> HypExpr:
        """Entry or zero when the index rules drop it."""
        if not is_valid(n, k, l) or n > self.max_order and (n, k, l) not in self.entries:
            return HypExpr.zero(1)
        return self.entries.get(CoeffKey(n, k, l), HypExpr.zero(1))

    def keys_of_order(self, n: int) -> list:
        return sorted(k for k in self.entries if k.n == n)

    def to_json(self, order: int | None = None) -> dict:
        keys = sorted(self.entries)
        if order is not None:
            # a single order must not depend on how far the shared table was built
            keys = [k for k in keys if k.n == order]
        entries = [{"n": k.n, "k": k.k, "l": k.l, "expr": hypalg.expr_to_json(self.entries[k])}
                   for k in keys]
        if order is not None:
            return {"order": order, "entries": entries}
        return {"maxOrder": self.max_order, "entries": entries}

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_json(cls, data: dict) -> "CoeffTable":
        table = cls(max_order=int(data["maxOrder"]))
        for e in data["entries"]:
            table.entries[CoeffKey(e["n"], e["k"], e["l"])] = hypalg.expr_from_json(e["expr"])
        return table


def initial_table() -> CoeffTable:
    table = CoeffTable()
    table.entries[CoeffKey(0, 0, 0)] = HypExpr.const(1)
    table.max_order = 0
    table.integrations[0] = 1
    return table


# hbar/(2M) and friends as parameter monomials (hbar, M, omega)
def _hbar_2m(e: HypExpr, factor=1) -> HypExpr:
    return e.scale(Fraction(factor, 2), hbar=1, M=-1)


def fix_constant(candidate: HypExpr, l: int) -> Fraction:
    """Integration constant that makes ``(candidate + d)/sinh^l`` vanish at tau = 0.

    ``d`` is read off the leading Laurent coefficient (x^-l, or x^0 for l = 0).
    Every remaining coefficient of x^-(l+m) .. x^0 must then vanish, otherwise
    no constant can regularize the candidate.

    Returns the rational part of ``d``; its parameter monomial is the one of
    the candidate (available as ``candidate.monomials()``).
    """
    reduced = candidate.times_sinh(-l)
    if reduced.is_zero():
        return Fraction(0)
    coeffs = hypalg.laurent_expansion(reduced, 0)
    lead = -reduced.m
    # coefficient of x^j sits at index j - lead
    d = -coeffs[-l - lead] if -l >= lead else Fraction(0)
    mono = _single_monomial(candidate)
    fixed = reduced + HypExpr.inv_sinh(l).scale(d, *mono) if d else reduced
    check = hypalg.laurent_by_monomial(fixed, 0)
    for row in check.values():
        if any(row):
            bad = next(i - fixed.m for i, v in enumerate(row) if v)
            raise ConstraintViolation(
                f"coefficient of x^{bad} cannot be removed by an integration constant")
    return d


def _single_monomial(expr: HypExpr):
    monos = expr.monomials()
    if len(monos) != 1:
        raise ConstraintViolation(f"entry is not homogeneous in the parameters: {monos}")
    return next(iter(monos))


def _master_rhs(table: CoeffTable, n: int, k: int, l: int) -> HypExpr:
    """Right side of the master ODE for d c[n,k,l] / d tau."""
    out = HypExpr.zero(1)
    up = table.get(n, k + 1, l + 2)
    if not up.is_zero():
        out = out + _hbar_2m(up.times_sinh(-2), (l + 2) * (l + 1))
    side = table.get(n, k, l + 1)
    if not side.is_zero():
        out = out + side.times_sinh(-2).scale(l + 1, omega=1)
    if n >= 1:
        prev = table.get(n - 1, k - 2, l - 4)
        if not prev.is_zero():
            out = out - prev.times_sinh(4).scale(1, hbar=-1)
    return out


def _diagonal(table: CoeffTable, n: int, k: int) -> HypExpr:
    integrand = HypExpr.zero(1)
    up = table.get(n, k + 1, 2 * k + 2)
    if not up.is_zero():
        integrand = integrand + _hbar_2m(up.times_sinh(-2), (2 * k + 2) * (2 * k + 1))
    prev = table.get(n - 1, k - 2, 2 * k - 4)
    if not prev.is_zero():
        integrand = integrand - prev.times_sinh(4).scale(1, hbar=-1)
    raw = hypalg.antiderivative(integrand)
    if raw.has_log:
        raise SymmetryViolation(f"log generator survives in c[{n},{k},{2 * k}]")
    d = fix_constant(raw, 2 * k)
    if d:
        raw = raw + HypExpr.const(d, mono=_single_monomial(raw))
    return raw


def _off_diagonal(table: CoeffTable, n: int, k: int, l: int) -> HypExpr:
    """Algebraic relation for 0 < l <= k."""
    t = table.get
    out = HypExpr.zero(1)
    e = t(n, k + 1, l + 1)
    if not e.is_zero():
        out = out + e.scale(Fraction(-(l + 1), 2), hbar=1, M=-1, omega=-1)
    e = t(n - 1, k - 2, l - 5)
    if not e.is_zero():
        out = out + e.times_sinh(6).scale(Fraction(1, l), hbar=-1, omega=-1)
    p = 2 * k - 2 * l
    e = t(n, k + 1, 2 * k - l + 3)
    if not e.is_zero():
        f = Fraction((2 * k - l + 3) * (2 * k - l + 2), 2 * l)
        out = out + e.times_sinh(-(p + 2)).scale(f, hbar=1, M=-1, omega=-1)
    e = t(n, k, 2 * k - l + 2)
    if not e.is_zero():
        out = out + e.times_sinh(-(p + 2)).scale(Fraction(2 * k - l + 2, l))
    e = t(n - 1, k - 2, 2 * k - l - 3)
    if not e.is_zero():
        out = out - e.times_sinh(-(p - 4)).scale(Fraction(1, l), hbar=-1, omega=-1)
    e = t(n, k, 2 * k - l + 1)
    if not e.is_zero():
        out = out - e.times_cosh().times_sinh(-(p + 1)).scale(Fraction(p + 2, l))
    return out


def _mirror(expr: HypExpr, k: int, l: int) -> HypExpr:
    """c[n,k,2k-l] from c[n,k,l]."""
    return expr.times_sinh(2 * k - 2 * l)


def compute_order(table: CoeffTable, n: int, *, verify: bool = True) -> CoeffTable:
    """Extend ``table`` (complete through n-1) to order n in place and return it."""
    if n < 1:
        raise ValueError("order must be >= 1")
    if table.max_order != n - 1:
        raise ValueError(f"table is complete through {table.max_order}, cannot build order {n}")
    start = time.perf_counter()
    ent = table.entries
    table.max_order = n  # lets get() see the entries of order n while building
    try:
        integrations = 0
        for k in range(2 * n, -1, -1):
            ent[CoeffKey(n, k, 2 * k)] = _diagonal(table, n, k)
            integrations += 1
        for k in range(2 * n, -1, -1):
            if k:
                ent[CoeffKey(n, k, 0)] = ent[CoeffKey(n, k, 2 * k)].times_sinh(-2 * k)
            for l in range(1, k + 1):
                c = _off_diagonal(table, n, k, l)
                ent[CoeffKey(n, k, l)] = c
                if l != k:
                    ent[CoeffKey(n, k, 2 * k - l)] = _mirror(c, k, l)
        table.integrations[n] = integrations
        if verify:
            verify_order(table, n)
    except Exception:
        for key in [key for key in ent if key.n == n]:
            del ent[key]
        table.max_order = n - 1
        raise
    table.timings[n] = time.perf_counter() - start
    log.info("order %d: %d entries in %.2fs", n, len(table.keys_of_order(n)), table.timings[n])
    return table


def verify_order(table: CoeffTable, n: int) -> None:
    keys = table.keys_of_order(n)
    expected = 4 * n * n + 4 * n + 1
    if len(keys) != expected:
        raise SymmetryViolation(f"order {n} has {len(keys)} entries, expected {expected}")
    for key in keys:
        c = table.entries[key]
        if c.has_log:
            raise SymmetryViolation(f"log generator survives in {key}")
        mirror = table.entries[CoeffKey(n, key.k, 2 * key.k - key.l)]
        if c.times_sinh(-key.l) != mirror.times_sinh(-(2 * key.k - key.l)):
            raise SymmetryViolation(f"mirror symmetry fails for {key}")
        if hypalg.differentiate(c) != _master_rhs(table, n, key.k, key.l):
            raise SymmetryViolation(f"master ODE fails for {key}")


def build_table(n_max: int, *, verify: bool = True, table: CoeffTable | None = None) -> CoeffTable:
    if n_max > N_MAX:
        raise ValueError(f"order {n_max} exceeds the supported maximum {N_MAX}")
    table = table or initial_table()
    for n in range(table.max_order + 1, n_max + 1):
        compute_order(table, n, verify=verify)
    return table


_CACHE: dict = {}


def cached_table(n_max: int) -> CoeffTable:
    """Process-wide memoized table (tables are never mutated after completion)."""
    best = _CACHE.get("table")
    if best is None:
        best = initial_table()
    if best.max_order < n_max:
        best = build_table(n_max, table=best)
        _CACHE["table"] = best
    return best


def coefficient_stats(n: int) -> dict:
    if n < 0:
        raise ValueError("order must be non-negative")
    return {
        "total": 4 * n * n + 4 * n + 1,
        "afterSymmetry": 2 * n * n + 3 * n + 1,
        "integrations": 2 * n + 1,
    }


def master_rhs(table: CoeffTable, key) -> HypExpr:
    key = CoeffKey(*key)
    return _master_rhs(table, key.n, key.k, key.l)
