"""Exact calculus over the hyperbolic-exponential function algebra.

Every closed form handled by the package is an element

    sum_i  q_i * x^a_i * exp(b_i x) * hbar^eh_i * M^em_i * omega^ew_i * L^el_i
    -----------------------------------------------------------------------
                               sinh(x)^m

with rational ``q_i`` and ``x = nu * tau``.  The base frequency ``nu`` is
either ``omega`` (``nu_div == 1``, amplitude coefficients in ``omega tau``) or
``omega / 2`` (``nu_div == 2``, thermal quantities in ``hbar beta omega / 2``).
``L = ln sinh(x)`` only appears transiently in antiderivatives.

Powers ``a`` are powers of the dimensionless variable ``x``; the
factor ``omega tau`` is therefore ``x**1`` and carries no explicit omega.

Canonical form: terms sorted by key, zero coefficients dropped, and the
numerator not divisible by ``sinh(x)`` (exact division in the exponential
basis).  Two values are equal iff their canonical forms are identical.
"""

from __future__ import annotations

import json
import math
from collections import defaultdict
from fractions import Fraction
from functools import cached_property, lru_cache
from math import comb
from typing import Iterable, Mapping

import mpmath
import numpy as np

from .errors import DivergesAtZero, NonElementaryIntegral
from .params import ModelParams, NATURAL

BigRational = Fraction

# key = (a, b, eh, em, ew, el)
Key = tuple
Num = dict

SMALL_X = 1e-3
LAURENT_ORDER = 8
_CANCEL_LIMIT = 1e3


def _add_into(acc: dict, key, value) -> None:
    v = acc.get(key)
    if v is None:
        acc[key] = value
    else:
        v = v + value
        if v:
            acc[key] = v
        else:
            del acc[key]


def _clean(num: Mapping) -> dict:
    return {k: v for k, v in num.items() if v}


def _mul_num(n1: Mapping, n2: Mapping) -> dict:
    out: dict = {}
    for (a1, b1, h1, m1, w1, l1), c1 in n1.items():
        for (a2, b2, h2, m2, w2, l2), c2 in n2.items():
            el = l1 + l2
            if el > 1:
                raise ValueError("product of two log generators is outside the algebra")
            _add_into(out, (a1 + a2, b1 + b2, h1 + h2, m1 + m2, w1 + w2, el), c1 * c2)
    return out


_HALF = Fraction(1, 2)


def _mul_s(num: Mapping) -> dict:
    """Multiply by sinh(x) = (e^x - e^-x)/2."""
    out: dict = {}
    for (a, b, h, m, w, l), c in num.items():
        hc = c * _HALF
        _add_into(out, (a, b + 1, h, m, w, l), hc)
        _add_into(out, (a, b - 1, h, m, w, l), -hc)
    return out


def _mul_c(num: Mapping) -> dict:
    """Multiply by cosh(x) = (e^x + e^-x)/2."""
    out: dict = {}
    for (a, b, h, m, w, l), c in num.items():
        hc = c * _HALF
        _add_into(out, (a, b + 1, h, m, w, l), hc)
        _add_into(out, (a, b - 1, h, m, w, l), hc)
    return out


@lru_cache(maxsize=None)
def _sc_to_exp(j: int, eps: int) -> tuple:
    """cosh^eps * sinh^j as ((b, coeff), ...) in the exponential basis."""
    out: dict = {}
    scale = Fraction(1, 2 ** j)
    for i in range(j + 1):
        c = scale * comb(j, i) * (-1) ** i
        _add_into(out, j - 2 * i, c)
    if eps:
        shifted: dict = {}
        for b, c in out.items():
            _add_into(shifted, b + 1, c * _HALF)
            _add_into(shifted, b - 1, c * _HALF)
        out = shifted
    return tuple(sorted(out.items()))


@lru_cache(maxsize=None)
def _exp_to_sc(b: int) -> tuple:
    """exp(b x) as ((j, eps, coeff), ...) meaning coeff * sinh^j * cosh^eps."""
    n = abs(b)
    sign = 1 if b >= 0 else -1
    out: dict = {}
    # (cosh + sign*sinh)^n, then cosh^2 -> 1 + sinh^2
    for i in range(n + 1):
        base = comb(n, i) * sign ** i
        r, eps = divmod(n - i, 2)
        for t in range(r + 1):
            _add_into(out, (i + 2 * t, eps), Fraction(base * comb(r, t)))
    return tuple((j, e, c) for (j, e), c in sorted(out.items()))


def _sinh_power_num(j: int) -> dict:
    return {(0, b, 0, 0, 0, 0): c for b, c in _sc_to_exp(j, 0)}


def _mul_s_pow(num: Mapping, j: int) -> dict:
    if j == 0:
        return dict(num)
    return _mul_num(num, _sinh_power_num(j))


def _divide_exact(num: Mapping, sign: int):
    """Divide by sinh (sign=-1) or cosh (sign=+1); None if not exact."""
    groups: dict = defaultdict(dict)
    for (a, b, h, m, w, l), c in num.items():
        groups[(a, h, m, w, l)][b] = c
    out: dict = {}
    for (a, h, m, w, l), poly in groups.items():
        bmax = max(poly)
        bmin = min(poly)
        p: dict = {}
        for b in range(bmax, bmin, -1):
            p[b - 1] = 2 * poly.get(b, 0) - sign * p.get(b + 1, 0)
        if p.get(bmin, 0) != 0:
            return None
        if 2 * poly.get(bmin, 0) - sign * p.get(bmin + 1, 0) != 0:
            return None
        for b, c in p.items():
            if c:
                out[(a, b, h, m, w, l)] = Fraction(c)
    return out


def _divisible_by_sinh(num: Mapping) -> bool:
    # roots of q^2 - 1 in q = e^x
    at_plus: dict = defaultdict(Fraction)
    at_minus: dict = defaultdict(Fraction)
    for (a, b, h, m, w, l), c in num.items():
        g = (a, h, m, w, l)
        at_plus[g] += c
        at_minus[g] += c if b % 2 == 0 else -c
    return all(v == 0 for v in at_plus.values()) and all(v == 0 for v in at_minus.values())


def _reduce(num: dict, m: int):
    while m > 0 and num and _divisible_by_sinh(num):
        q = _divide_exact(num, -1)
        if q is None:  # pragma: no cover - guarded by the root test
            break
        num, m = q, m - 1
    if not num:
        m = 0
    return num, m


class HypExpr:
    """Immutable canonical element of the hyperbolic algebra."""

    def __init__(self, nu_div: int, m: int, terms: Mapping | Iterable, *, _canonical: bool = False):
        if nu_div not in (1, 2):
            raise ValueError("nu_div must be 1 (nu = omega) or 2 (nu = omega/2)")
        num = dict(terms) if not isinstance(terms, dict) else terms
        if not _canonical:
            num = {tuple(int(v) for v in k): Fraction(c) for k, c in num.items()}
            num = _clean(num)
            for k in num:
                if len(k) != 6:
                    raise ValueError(f"term key must have 6 entries, got {k}")
                if k[0] < 0:
                    raise ValueError("negative power of x in term")
                if k[5] not in (0, 1):
                    raise ValueError("log generator exponent must be 0 or 1")
            if m < 0:
                num = _mul_s_pow(num, -m)
                m = 0
            num, m = _reduce(num, m)
        self.nu_div = nu_div
        self.m = m
        self.terms = tuple(sorted(num.items()))
        self._hash = hash((nu_div, m, self.terms))

    # -- construction -------------------------------------------------
    @classmethod
    def zero(cls, nu_div: int = 1) -> "HypExpr":
        return cls(nu_div, 0, {}, _canonical=True)

    @classmethod
    def const(cls, value, nu_div: int = 1, mono=(0, 0, 0)) -> "HypExpr":
        return cls(nu_div, 0, {(0, 0, *mono, 0): Fraction(value)})

    @classmethod
    def sinh(cls, k: int = 1, nu_div: int = 1) -> "HypExpr":
        """sinh(k x)."""
        return cls(nu_div, 0, {(0, k, 0, 0, 0, 0): _HALF, (0, -k, 0, 0, 0, 0): -_HALF})

    @classmethod
    def cosh(cls, k: int = 1, nu_div: int = 1) -> "HypExpr":
        """cosh(k x)."""
        if k == 0:
            return cls.const(1, nu_div)
        return cls(nu_div, 0, {(0, k, 0, 0, 0, 0): _HALF, (0, -k, 0, 0, 0, 0): _HALF})

    @classmethod
    def x(cls, power: int = 1, nu_div: int = 1) -> "HypExpr":
        return cls(nu_div, 0, {(power, 0, 0, 0, 0, 0): Fraction(1)})

    @classmethod
    def log_sinh(cls, nu_div: int = 1) -> "HypExpr":
        return cls(nu_div, 0, {(0, 0, 0, 0, 0, 1): Fraction(1)})

    @classmethod
    def inv_sinh(cls, power: int = 1, nu_div: int = 1) -> "HypExpr":
        return cls(nu_div, power, {(0, 0, 0, 0, 0, 0): Fraction(1)})

    @classmethod
    def multiangle(cls, parts, *, m: int = 0, nu_div: int = 1, mono=(0, 0, 0), scale=1) -> "HypExpr":
        """Build ``scale * mono * sum(coef * x^a * f(k x)) / sinh^m`` with f in {sinh, cosh, 1}.

        ``parts`` holds tuples ``(coef, a, kind, k)``; ``kind`` is ``"sinh"``,
        ``"cosh"`` or ``"1"``.
        """
        num: dict = {}
        scale = Fraction(scale)
        for coef, a, kind, k in parts:
            coef = Fraction(coef) * scale
            if kind == "1":
                _add_into(num, (a, 0, *mono, 0), coef)
            elif kind in ("sinh", "cosh"):
                sgn = -1 if kind == "sinh" else 1
                _add_into(num, (a, k, *mono, 0), coef * _HALF)
                _add_into(num, (a, -k, *mono, 0), sgn * coef * _HALF)
            else:
                raise ValueError(f"unknown kind {kind!r}")
        return cls(nu_div, m, num)

    # -- basic protocol -----------------------------------------------
    def __eq__(self, other):
        if not isinstance(other, HypExpr):
            return NotImplemented
        return self.nu_div == other.nu_div and self.m == other.m and self.terms == other.terms

    def __hash__(self):
        return self._hash

    def __repr__(self):
        return f"HypExpr(nu_div={self.nu_div}, m={self.m}, {len(self.terms)} terms)"

    def __str__(self):
        return to_text(self)

    def is_zero(self) -> bool:
        return not self.terms

    @property
    def num(self) -> dict:
        return dict(self.terms)

    @property
    def has_log(self) -> bool:
        return any(k[5] for k, _ in self.terms)

    def log_part(self) -> "HypExpr":
        return HypExpr(self.nu_div, self.m, {k: c for k, c in self.terms if k[5]})

    def monomials(self) -> set:
        return {k[2:5] for k, _ in self.terms}

    def canonicalize(self) -> "HypExpr":
        return HypExpr(self.nu_div, self.m, self.num)

    # -- arithmetic ---------------------------------------------------
    def _aligned(self, other: "HypExpr"):
        if self.nu_div != other.nu_div:
            raise ValueError("base frequencies differ; rebase first")
        m = max(self.m, other.m)
        n1 = _mul_s_pow(self.num, m - self.m)
        n2 = _mul_s_pow(other.num, m - other.m)
        return m, n1, n2

    def __add__(self, other):
        if not isinstance(other, HypExpr):
            if other == 0:
                return self
            other = HypExpr.const(other, self.nu_div)
        if other.is_zero():
            return self
        if self.is_zero():
            return other
        m, n1, n2 = self._aligned(other)
        for k, c in n2.items():
            _add_into(n1, k, c)
        return HypExpr(self.nu_div, m, n1)

    __radd__ = __add__

    def __neg__(self):
        return HypExpr(self.nu_div, self.m, {k: -c for k, c in self.terms}, _canonical=True)

    def __sub__(self, other):
        if not isinstance(other, HypExpr):
            other = HypExpr.const(other, self.nu_div)
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, HypExpr):
            return mul(self, other)
        other = Fraction(other)
        if other == 0:
            return HypExpr.zero(self.nu_div)
        return HypExpr(self.nu_div, self.m, {k: c * other for k, c in self.terms}, _canonical=True)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return self * (1 / Fraction(other))

    def scale(self, coeff=1, hbar: int = 0, M: int = 0, omega: int = 0, xpow: int = 0) -> "HypExpr":
        """Multiply by ``coeff * hbar^hbar * M^M * omega^omega * x^xpow``."""
        coeff = Fraction(coeff)
        if coeff == 0:
            return HypExpr.zero(self.nu_div)
        num = {}
        for (a, b, h, mm, w, l), c in self.terms:
            if a + xpow < 0:
                raise ValueError("division by x leaves the algebra")
            num[(a + xpow, b, h + hbar, mm + M, w + omega, l)] = c * coeff
        return HypExpr(self.nu_div, self.m, num, _canonical=(xpow == 0))

    def times_sinh(self, p: int) -> "HypExpr":
        """Multiply by sinh(x)^p for any integer p."""
        return HypExpr(self.nu_div, self.m - p, self.num)

    def times_cosh(self) -> "HypExpr":
        return HypExpr(self.nu_div, self.m, _mul_c(self.num))

    def divide_x(self) -> "HypExpr":
        """Exact division by x; raises ValueError if some term has no x factor."""
        return self.scale(xpow=-1)

    def to_json(self) -> dict:
        return expr_to_json(self)

    # -- numerics (cached per instance) -------------------------------
    @cached_property
    def _compiled(self):
        keys = [k for k, _ in self.terms]
        coef = np.array([float(c) for _, c in self.terms], dtype=float)
        arr = np.array(keys, dtype=float).reshape(-1, 6)
        return coef, arr

    @cached_property
    def _laurent_cache(self):
        return {}


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------

def mul(lhs: HypExpr, rhs: HypExpr) -> HypExpr:
    """Canonical product; denominators add, numerators convolve."""
    if lhs.nu_div != rhs.nu_div:
        raise ValueError("base frequencies differ; rebase first")
    if lhs.is_zero() or rhs.is_zero():
        return HypExpr.zero(lhs.nu_div)
    return HypExpr(lhs.nu_div, lhs.m + rhs.m, _mul_num(lhs.num, rhs.num))


def canonicalize(expr: HypExpr) -> HypExpr:
    return expr.canonicalize()


def _s_times_dx(num: Mapping) -> dict:
    """sinh(x) * d/dx of a numerator (d/dx L = cosh/sinh)."""
    out: dict = {}
    for (a, b, h, m, w, l), c in num.items():
        part: dict = {}
        if a:
            _add_into(part, (a - 1, b, h, m, w, l), c * a)
        if b:
            _add_into(part, (a, b, h, m, w, l), c * b)
        for k, v in _mul_s(part).items():
            _add_into(out, k, v)
        if l:
            for k, v in _mul_c({(a, b, h, m, w, 0): c}).items():
                _add_into(out, k, v)
    return out


def d_dx(expr: HypExpr) -> HypExpr:
    """Derivative with respect to the dimensionless variable x."""
    if expr.is_zero():
        return expr
    num = _s_times_dx(expr.num)
    if expr.m:
        for k, v in _mul_c(expr.num).items():
            _add_into(num, k, -expr.m * v)
    return HypExpr(expr.nu_div, expr.m + 1, num)


def differentiate(expr: HypExpr) -> HypExpr:
    """Exact d/dtau; the chain factor is nu = omega / nu_div."""
    return d_dx(expr).scale(Fraction(1, expr.nu_div), omega=1)


def d_domega(expr: HypExpr) -> HypExpr:
    """Partial derivative in omega with tau held fixed (x = nu tau scales with omega)."""
    if expr.is_zero():
        return expr
    explicit = HypExpr(expr.nu_div, expr.m, {k: c * k[4] for k, c in expr.terms})
    return (explicit + d_dx(expr).scale(xpow=1)).scale(omega=-1)


# -- antiderivative ---------------------------------------------------------

def _acc(target: dict, items, w) -> None:
    for k, v in items:
        _add_into(target, k, v * w)


@lru_cache(maxsize=None)
def _int_s(a: int, p: int) -> tuple:
    """Basis expansion of the integral of x^a sinh^p dx."""
    if p == 0:
        return ((("E", a + 1, 0, 0), Fraction(1, a + 1)),)
    if p == -1:
        return ((("T1", a), Fraction(1)),)
    out: dict = {}
    if p >= 1:
        # d(cosh sinh^(p-1)) = p sinh^p + (p-1) sinh^(p-2)
        _add_into(out, ("E", a, 1, p - 1), Fraction(1))
        if a:
            _acc(out, _int_c(a - 1, p - 1), -a)
        if p != 1:
            _acc(out, _int_s(a, p - 2), -(p - 1))
        return tuple((k, v / p) for k, v in out.items())
    # p <= -2: d(cosh sinh^(p+1)) = (p+2) sinh^(p+2) + (p+1) sinh^p
    _add_into(out, ("E", a, 1, p + 1), Fraction(1))
    if a:
        _acc(out, _int_c(a - 1, p + 1), -a)
    if p != -2:
        _acc(out, _int_s(a, p + 2), -(p + 2))
    return tuple((k, v / (p + 1)) for k, v in out.items())


@lru_cache(maxsize=None)
def _int_c(a: int, p: int) -> tuple:
    """Basis expansion of the integral of x^a cosh sinh^p dx."""
    if p == -1:
        if a == 0:
            return ((("L",), Fraction(1)),)
        return ((("T2", a), Fraction(1)),)
    out: dict = {}
    _add_into(out, ("E", a, 0, p + 1), Fraction(1))
    if a:
        _acc(out, _int_s(a - 1, p + 1), -a)
    return tuple((k, v / (p + 1)) for k, v in out.items())


def antiderivative_x(expr: HypExpr) -> HypExpr:
    """Antiderivative in x with the recursion's natural (zero) constant."""
    if expr.is_zero():
        return expr
    if expr.has_log:
        raise NonElementaryIntegral("integrand contains the log generator")
    m = expr.m
    sc: dict = {}
    for (a, b, h, mm, w, _), c in expr.terms:
        for j, eps, wt in _exp_to_sc(b):
            _add_into(sc, (a, (h, mm, w), j - m, eps), c * wt)
    acc: dict = {}
    for (a, mono, p, eps), c in sc.items():
        items = _int_c(a, p) if eps else _int_s(a, p)
        for basis, wt in items:
            _add_into(acc, (mono, basis), c * wt)
    bad = [(mono, basis) for (mono, basis) in acc if basis[0] in ("T1", "T2")]
    if bad:
        mono, basis = bad[0]
        kind = "x^a/sinh" if basis[0] == "T1" else "x^a cosh/sinh"
        raise NonElementaryIntegral(
            f"terminal integral {kind} with a={basis[1]} survives (monomial {mono})")
    pmin = min((basis[3] for (_, basis) in acc if basis[0] == "E"), default=0)
    shift = max(0, -pmin)
    num: dict = {}
    for (mono, basis), c in acc.items():
        if basis[0] == "E":
            _, a, eps, p = basis
            for b, wt in _sc_to_exp(p + shift, eps):
                _add_into(num, (a, b, *mono, 0), c * wt)
        else:
            for b, wt in _sc_to_exp(shift, 0):
                _add_into(num, (0, b, *mono, 1), c * wt)
    return HypExpr(expr.nu_div, shift, num)


def antiderivative(expr: HypExpr) -> HypExpr:
    """Antiderivative in tau (integration constant from the recursion, not adjusted)."""
    return antiderivative_x(expr).scale(expr.nu_div, omega=-1)


# -- series ------------------------------------------------------------------

@lru_cache(maxsize=None)
def _x_over_sinh_series(order: int) -> tuple:
    """Coefficients of x/sinh(x) up to x^order."""
    s = [Fraction(0)] * (order + 1)
    for k in range(0, order + 1, 2):
        s[k] = Fraction(1, math.factorial(k + 1))
    inv = [Fraction(0)] * (order + 1)
    inv[0] = Fraction(1)
    for n in range(1, order + 1):
        inv[n] = -sum(s[i] * inv[n - i] for i in range(1, n + 1))
    return tuple(inv)


@lru_cache(maxsize=None)
def _x_over_sinh_power(m: int, order: int) -> tuple:
    base = _x_over_sinh_series(order)
    out = [Fraction(0)] * (order + 1)
    out[0] = Fraction(1)
    for _ in range(m):
        out = [sum(out[i] * base[n - i] for i in range(n + 1)) for n in range(order + 1)]
    return tuple(out)


def _laurent_groups(expr: HypExpr, order: int) -> dict:
    """mono -> coefficients of x^j for j = -m..order."""
    if expr.has_log:
        raise ValueError("Laurent expansion of the log generator is not available")
    key = order
    cache = expr._laurent_cache
    if key in cache:
        return cache[key]
    m = expr.m
    top = order + m
    groups: dict = defaultdict(lambda: [Fraction(0)] * (top + 1))
    facts = [math.factorial(i) for i in range(top + 1)]
    for (a, b, h, mm, w, _), c in expr.terms:
        row = groups[(h, mm, w)]
        for j in range(a, top + 1):
            row[j] += c * Fraction(b ** (j - a), facts[j - a])
    den = _x_over_sinh_power(m, top)
    out = {}
    for mono, row in groups.items():
        # numerator / sinh^m = x^-m * numerator * (x/sinh)^m
        prod = [sum(row[i] * den[n - i] for i in range(n + 1)) for n in range(top + 1)]
        out[mono] = prod
    cache[key] = out
    return out


def laurent_expansion(expr: HypExpr, order: int) -> list:
    """Coefficients of x^j for j = -m..order (x = nu tau).

    The expression must be homogeneous in the parameters; the common
    monomial is dropped from the returned rationals.
    """
    if order < -expr.m:
        raise ValueError("order must be at least -m")
    groups = _laurent_groups(expr, order)
    if not groups:
        return [Fraction(0)] * (order + expr.m + 1)
    if len(groups) > 1:
        raise ValueError("expression mixes parameter monomials; use laurent_by_monomial")
    return list(next(iter(groups.values())))


def laurent_by_monomial(expr: HypExpr, order: int) -> dict:
    return {mono: list(v) for mono, v in _laurent_groups(expr, order).items()}


# -- numeric evaluation -----------------------------------------------------

def _mono_value(mono, params: ModelParams, mp=False):
    h, m, w = mono
    if mp:
        return mpmath.mpf(params.hbar) ** h * mpmath.mpf(params.M) ** m * mpmath.mpf(params.omega) ** w
    return params.hbar ** h * params.M ** m * params.omega ** w


def _eval_laurent(expr: HypExpr, x, params: ModelParams, mp=False):
    groups = _laurent_groups(expr, LAURENT_ORDER)
    total = mpmath.mpf(0) if mp else 0.0
    for mono, coeffs in groups.items():
        mv = _mono_value(mono, params, mp)
        acc = mpmath.mpf(0) if mp else 0.0
        for i, c in enumerate(coeffs):
            if c:
                j = i - expr.m
                acc += (mpmath.mpf(c.numerator) / c.denominator if mp else float(c)) * x ** j
        total += mv * acc
    return total


def _eval_mp(expr: HypExpr, x, params: ModelParams, dps: int):
    with mpmath.workdps(dps):
        x = mpmath.mpf(x)
        total = mpmath.mpf(0)
        em2 = mpmath.exp(-2 * x)
        logs = mpmath.log(mpmath.sinh(x)) if expr.has_log else None
        for (a, b, h, mm, w, l), c in expr.terms:
            t = mpmath.mpf(c.numerator) / c.denominator
            t *= _mono_value((h, mm, w), params, mp=True) * x ** a * mpmath.exp((b - expr.m) * x)
            if l:
                t *= logs
            total += t
        total /= ((1 - em2) / 2) ** expr.m
        return +total


def evaluate(expr: HypExpr, tau: float, params: ModelParams = NATURAL):
    """Numeric value at ``tau``.

    Below x = 1e-3 the truncated Laurent series is used.  In double mode a
    sum with heavy cancellation is recomputed with mpmath at a working
    precision matched to the observed loss.
    """
    x = params.omega / expr.nu_div * tau
    if expr.is_zero():
        return 0.0
    extended = params.precision == "extended"
    if x < 0:
        raise ValueError("tau must be non-negative")
    if x == 0:
        groups = _laurent_groups(expr, 0)
        for coeffs in groups.values():
            if any(coeffs[: expr.m]):
                raise DivergesAtZero("negative Laurent powers at tau = 0")
        total = sum(_mono_value(mono, params) * float(c[expr.m]) for mono, c in groups.items())
        return mpmath.mpf(total) if extended else total
    if x < SMALL_X and not expr.has_log:
        if extended:
            with mpmath.workdps(50):
                return _eval_laurent(expr, mpmath.mpf(x), params, mp=True)
        return float(_eval_laurent(expr, x, params))
    if extended:
        return _eval_mp(expr, x, params, 50)
    coef, arr = expr._compiled
    a, b, h, mm, w, l = arr.T
    mono = params.hbar ** h * params.M ** mm * params.omega ** w
    with np.errstate(over="ignore", invalid="ignore"):
        terms = coef * mono * x ** a * np.exp((b - expr.m) * x)
        if expr.has_log:
            terms = np.where(l > 0, terms * math.log(math.sinh(x)), terms)
    total = math.fsum(terms)
    mag = float(np.sum(np.abs(terms)))
    if not np.isfinite(mag) or (mag > 0 and (total == 0 or mag > _CANCEL_LIMIT * abs(total))):
        lost = 16 if total == 0 or not np.isfinite(mag) else math.log10(mag / abs(total))
        dps = 30 + int(lost)
        for _ in range(6):
            val = _eval_mp(expr, x, params, dps)
            check = _eval_mp(expr, x, params, dps + 20)
            if val == check or abs(check) > 0 and abs((val - check) / check) < 1e-17:
                break
            dps += 30
        return float(check)
    denom = (0.5 * (1.0 - math.exp(-2.0 * x))) ** expr.m
    return total / denom


# -- base frequency --------------------------------------------------------

def rebase_half(expr: HypExpr) -> HypExpr:
    """Rewrite an expression in x = omega tau as one in y = omega tau / 2.

    sinh(x)^m = (2 sinh y cosh y)^m; the cosh factors must cancel exactly.
    """
    if expr.nu_div != 1:
        raise ValueError("expression is already in the half-angle basis")
    num = {}
    for (a, b, h, mm, w, l), c in expr.terms:
        if l:
            raise ValueError("cannot rebase the log generator")
        num[(a, 2 * b, h, mm, w, 0)] = c * 2 ** a / 2 ** expr.m
    for _ in range(expr.m):
        num = _divide_exact(num, +1)
        if num is None:
            raise ValueError("cosh denominators do not cancel; expression not representable")
    return HypExpr(2, expr.m, num)


# -- display ------------------------------------------------------------------

_PARAM_NAMES = (("\\hbar", "hbar"), ("M", "M"), ("\\omega", "omega"))


def _multiangle_groups(expr: HypExpr):
    groups: dict = defaultdict(dict)
    for (a, b, h, mm, w, l), c in expr.terms:
        groups[(h, mm, w, l, a)][b] = c
    out = []
    for (h, mm, w, l, a), poly in sorted(groups.items()):
        seen = set()
        for b in sorted(poly, key=lambda v: (abs(v), -v)):
            k = abs(b)
            if k in seen:
                continue
            seen.add(k)
            if k == 0:
                out.append(((h, mm, w, l), a, "1", 0, poly[0]))
                continue
            cp, cm = poly.get(k, Fraction(0)), poly.get(-k, Fraction(0))
            if cp + cm:
                out.append(((h, mm, w, l), a, "cosh", k, cp + cm))
            if cp - cm:
                out.append(((h, mm, w, l), a, "sinh", k, cp - cm))
    return out


def _fmt_frac(c: Fraction, latex: bool) -> str:
    if c.denominator == 1:
        return str(abs(c.numerator))
    if latex:
        return f"\\frac{{{abs(c.numerator)}}}{{{c.denominator}}}"
    return f"{abs(c.numerator)}/{c.denominator}"


def _arg(nu_div: int, latex: bool) -> str:
    if nu_div == 1:
        return "\\omega\\tau" if latex else "wt"
    return "\\frac{\\omega\\tau}{2}" if latex else "(wt/2)"


def _fmt_mono(mono, latex: bool) -> str:
    """Parameter monomial as a prefactor; empty for (0, 0, 0)."""
    if latex:
        num, den = [], []
        for (tex, _), e in zip(_PARAM_NAMES, mono):
            if e:
                part = tex if abs(e) == 1 else f"{tex}^{{{abs(e)}}}"
                (num if e > 0 else den).append(part)
        if not den:
            return " ".join(num)
        return f"\\frac{{{' '.join(num) or '1'}}}{{{' '.join(den)}}}"
    parts = []
    for (_, txt), e in zip(_PARAM_NAMES, mono):
        if e == 1:
            parts.append(txt)
        elif e:
            parts.append(f"{txt}^{e}")
    return "*".join(parts)


def _render(expr: HypExpr, latex: bool) -> str:
    if expr.is_zero():
        return "0"
    arg = _arg(expr.nu_div, latex)
    groups = _multiangle_groups(expr)
    monos = {g[0] for g in groups}
    factored = len(monos) == 1
    if factored:
        groups.sort(key=lambda g: (-g[3], -g[1], g[2]))
    pieces = []
    for (h, mm, w, l), a, kind, k, c in groups:
        factors = []
        mag = _fmt_frac(c, latex)
        if not factored:
            for (tex, txt), e in zip(_PARAM_NAMES, (h, mm, w)):
                name = tex if latex else txt
                if e == 1:
                    factors.append(name)
                elif e:
                    factors.append(f"{name}^{{{e}}}" if latex else f"{name}^{e}")
        if a == 1:
            factors.append(f"({arg})" if not latex else arg)
        elif a:
            factors.append(f"({arg})^{{{a}}}" if latex else f"({arg})^{a}")
        if kind != "1":
            kk = "" if k == 1 else str(k)
            factors.append(f"\\{kind} {kk}{arg}" if latex else f"{kind}({kk}{arg})")
        if l:
            factors.append(f"\\ln\\sinh {arg}" if latex else f"ln sinh({arg})")
        body = (" " if latex else "*").join(factors)
        if mag != "1" or not body:
            body = f"{mag} {body}".strip() if latex else (f"{mag}*{body}" if body else mag)
        pieces.append(("-" if c < 0 else "+", body))
    lead = ""
    if factored and pieces[0][0] == "-":
        lead = "-"
        pieces = [("+" if sg == "-" else "-", b) for sg, b in pieces]
    text = ""
    for i, (sgn, body) in enumerate(pieces):
        if i == 0:
            text = ("-" if sgn == "-" else "") + body
        else:
            text += f" {sgn} {body}"
    mono = _fmt_mono(next(iter(monos)), latex) if factored else ""
    if expr.m:
        if latex:
            den = f"\\sinh {arg}" if expr.m == 1 else f"\\sinh^{{{expr.m}}} {arg}"
            text = f"\\frac{{{text}}}{{{den}}}"
        else:
            den = f"sinh({arg})" if expr.m == 1 else f"sinh({arg})^{expr.m}"
            text = f"({text}) / {den}"
    if factored and (mono or lead):
        if latex:
            inner = text if expr.m else f"\\left[{text}\\right]"
            text = f"{lead}{mono} {inner}" if mono else f"{lead}{inner}"
        else:
            inner = text if expr.m else f"({text})"
            text = f"{lead}{mono}*{inner}" if mono else f"{lead}{inner}"
    return text


def to_text(expr: HypExpr) -> str:
    return _render(expr, latex=False)


def to_latex(expr: HypExpr) -> str:
    """Multi-angle sinh/cosh rendering in the usual closed-form layout."""
    return _render(expr, latex=True)


# -- serialization ------------------------------------------------------------

_NU_NAMES = {1: "omega", 2: "omega/2"}
_NU_CODES = {v: k for k, v in _NU_NAMES.items()}


def expr_to_json(expr: HypExpr) -> dict:
    terms = []
    for (a, b, h, mm, w, l), c in expr.terms:
        t = {"num": c.numerator, "den": c.denominator, "a": a, "b": b, "eh": h, "em": mm, "ew": w}
        if l:
            t["el"] = l
        terms.append(t)
    return {"nu": _NU_NAMES[expr.nu_div], "m": expr.m, "terms": terms}


def expr_from_json(data: Mapping) -> HypExpr:
    nu = data["nu"]
    nu_div = _NU_CODES[nu] if isinstance(nu, str) else int(nu)
    num = {}
    for t in data["terms"]:
        key = (t["a"], t["b"], t["eh"], t["em"], t["ew"], t.get("el", 0))
        num[key] = Fraction(int(t["num"]), int(t["den"]))
    expr = HypExpr(nu_div, int(data["m"]), num)
    if expr.m != int(data["m"]):
        raise ValueError("serialized expression is not in reduced canonical form")
    return expr


def dumps(expr: HypExpr) -> str:
    return json.dumps(expr_to_json(expr), sort_keys=True, separators=(",", ":"))


def loads(text: str) -> HypExpr:
    return expr_from_json(json.loads(text))
