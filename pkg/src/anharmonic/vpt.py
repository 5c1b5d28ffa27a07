"""Variational resummation of the free-energy series.

The trial frequency Omega enters through omega = Omega sqrt(1 + g r) with
g r = omega^2/Omega^2 - 1.  Each coefficient F_n is re-expanded around Omega
and the series is truncated at total order N.  Omega is then fixed by the
lowest derivative order that has a root in the scan window.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import numpy as np

from . import hypalg, thermo
from .bwrec import cached_table
from .errors import NoCriterionRoot
from .hypalg import HypExpr
from .params import ModelParams, NATURAL

SCAN_DEFAULT = (0.2, 5.0, 200)


@lru_cache(maxsize=None)
def sqrt_shift_coefficients(j: int, order: int) -> tuple:
    """[y^i] of (sqrt(1+y) - 1)^j for i = 0..order, exact."""
    base = [Fraction(0)] * (order + 1)
    for i in range(1, order + 1):
        # binomial(1/2, i)
        c = Fraction(1)
        for t in range(i):
            c *= Fraction(1, 2) - t
        base[i] = c / math.factorial(i)
    out = [Fraction(0)] * (order + 1)
    out[0] = Fraction(1)
    for _ in range(j):
        nxt = [Fraction(0)] * (order + 1)
        for a, ca in enumerate(out):
            if ca:
                for b in range(1, order + 1 - a):
                    nxt[a + b] += ca * base[b]
        out = nxt
    return tuple(out)


def _harmonic_derivative() -> HypExpr:
    """d F_0 / d omega = (hbar/2) coth(hbar beta omega / 2), half-angle basis."""
    return HypExpr.cosh(1, nu_div=2).times_sinh(-1).scale(Fraction(1, 2), hbar=1)


class VptSeries:
    """Free-energy series with a lazily filled cache of symbolic omega-derivatives."""

    def __init__(self, source: thermo.ThermalSeries, N: int | None = None):
        self.source = source
        self.N = source.order if N is None else N
        if self.N > source.order:
            raise ValueError(f"series has order {source.order}, requested {self.N}")
        self._cache: dict = {}
        for n in range(self.N + 1):
            for j in range(self.N - n + 1):
                self.derivative(n, j)

    @classmethod
    def build(cls, N: int) -> "VptSeries":
        return cls(thermo.z_series(cached_table(N), N), N)

    def derivative(self, n: int, j: int) -> HypExpr | None:
        """d^j F_n / d omega^j; None stands for F_0 itself (not an algebra element)."""
        key = (n, j)
        if key in self._cache:
            return self._cache[key]
        if n == 0 and j == 0:
            expr = None
        elif n == 0 and j == 1:
            expr = _harmonic_derivative()
        elif j == 0:
            expr = self.source.f(n)
        else:
            expr = hypalg.d_domega(self.derivative(n, j - 1))
        self._cache[key] = expr
        return expr

    def value(self, n: int, j: int, beta: float, Omega: float, params: ModelParams = NATURAL):
        p = params.replace(omega=Omega)
        if n == 0 and j == 0:
            return thermo.harmonic_free_energy(beta, p)
        return float(hypalg.evaluate(self.derivative(n, j), p.hbar * beta, p))

    def taylor(self, n: int, j: int, beta: float, Omega: float, depth: int, params=NATURAL) -> np.ndarray:
        """Taylor coefficients of d^j F_n around Omega in powers of h, up to h^depth."""
        return np.array([self.value(n, j + b, beta, Omega, params) / math.factorial(b)
                         for b in range(depth + 1)])


def symbolic_terms(series: VptSeries, N: int | None = None) -> dict:
    """Resummed series as {(n, i): coefficient of g^n rho^i}, rho = omega^2/Omega^2 - 1.

    Coefficients are HypExpr in the trial frequency (written as omega).  The
    bare harmonic free energy F_0(Omega) is left out of the (0, 0) entry.
    """
    N = series.N if N is None else N
    out: dict = {}
    for n in range(N + 1):
        for j in range(N - n + 1):
            if n == 0 and j == 0:
                continue
            e = sqrt_shift_coefficients(j, N - n)
            base = series.derivative(n, j).scale(Fraction(1, math.factorial(j)), omega=j)
            for i in range(j, N - n + 1):
                if e[i]:
                    prev = out.get((n, i), HypExpr.zero(2))
                    out[(n, i)] = prev + base.scale(e[i])
    return {k: v for k, v in out.items() if not v.is_zero()}


def _trunc_mul(a: np.ndarray, b: np.ndarray, depth: int) -> np.ndarray:
    return np.convolve(a, b)[: depth + 1]


def _resummed_taylor(series: VptSeries, beta: float, Omega: float, g: float, N: int,
                     depth: int, params: ModelParams) -> np.ndarray:
    """Taylor coefficients in h of F^(N)(beta, Omega + h), through h^depth."""
    w = params.omega
    # rho(Omega+h) = omega^2/(Omega+h)^2 - 1
    rho = np.array([(w / Omega) ** 2 * (-1) ** b * (b + 1) / Omega ** b for b in range(depth + 1)])
    rho[0] -= 1.0
    rho_pow = [np.eye(1, depth + 1)[0]]
    for _ in range(N):
        rho_pow.append(_trunc_mul(rho_pow[-1], rho, depth))
    # (Omega + h)^j
    om = np.zeros(depth + 1)
    om[0] = Omega
    if depth:
        om[1] = 1.0
    om_pow = [np.eye(1, depth + 1)[0]]
    for _ in range(N):
        om_pow.append(_trunc_mul(om_pow[-1], om, depth))
    total = np.zeros(depth + 1)
    for n in range(N + 1):
        gn = g ** n
        if gn == 0:
            continue
        for j in range(N - n + 1):
            e = sqrt_shift_coefficients(j, N - n)
            shift = sum(float(e[i]) * rho_pow[i] for i in range(j, N - n + 1))
            if not np.any(shift):
                continue
            h = series.taylor(n, j, beta, Omega, depth, params)
            term = _trunc_mul(_trunc_mul(h, om_pow[j], depth), shift, depth)
            total += gn / math.factorial(j) * term
    return total


def resum_eval(series: VptSeries, beta: float, Omega: float, g: float, N: int | None = None,
               params: ModelParams = NATURAL) -> float:
    N = series.N if N is None else N
    if not (Omega > 0 and beta > 0):
        raise ValueError("beta and Omega must be positive")
    return float(_resummed_taylor(series, beta, Omega, g, N, 0, params)[0])


def resum_derivative(series: VptSeries, beta: float, Omega: float, g: float, k: int,
                     N: int | None = None, params: ModelParams = NATURAL) -> float:
    """k-th Omega-derivative of the resummed truncated free energy."""
    N = series.N if N is None else N
    return float(_resummed_taylor(series, beta, Omega, g, N, k, params)[k]) * math.factorial(k)


@dataclass(frozen=True)
class VptSolution:
    beta: float
    g: float
    N: int
    omegaStar: float
    criterionOrder: int
    value: float
    bracket: tuple
    residual: float
    branch: int
    roots: tuple = field(default=())

    def to_json(self) -> dict:
        return {
            "beta": self.beta, "g": self.g, "N": self.N, "omegaStar": self.omegaStar,
            "criterionOrder": self.criterionOrder, "value": self.value,
            "diagnostics": {"bracket": list(self.bracket), "residual": self.residual,
                            "branch": self.branch, "roots": list(self.roots)},
        }


def _bisect(f, lo: float, hi: float, flo: float, tol: float) -> float:
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if fm == 0:
            return mid
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def criterion_roots(series: VptSeries, beta: float, g: float, k: int, *, N: int | None = None,
                    scan=SCAN_DEFAULT, tol: float = 1e-10, params: ModelParams = NATURAL) -> list:
    """All roots of d^k F^(N)/d Omega^k found by sign changes on the scan grid."""
    lo, hi, steps = scan
    w = params.omega
    grid = np.linspace(lo * w, hi * w, int(steps))
    f = lambda om: resum_derivative(series, beta, om, g, k, N, params)  # noqa: E731
    vals = [f(om) for om in grid]
    roots = []
    for i in range(len(grid) - 1):
        a, b = vals[i], vals[i + 1]
        if a == 0:
            roots.append((grid[i], (grid[i], grid[i])))
        elif a * b < 0:
            roots.append((_bisect(f, grid[i], grid[i + 1], a, tol), (grid[i], grid[i + 1])))
    if vals and vals[-1] == 0:
        roots.append((grid[-1], (grid[-1], grid[-1])))
    return roots


def optimize_omega(series: VptSeries, beta: float, g: float, *, N: int | None = None,
                   scan=SCAN_DEFAULT, tol: float = 1e-10, previous: float | None = None,
                   params: ModelParams = NATURAL) -> VptSolution:
    N = series.N if N is None else N
    if tol <= 0:
        raise ValueError("tol must be positive")
    for k in range(1, max(N, 1) + 1):
        roots = criterion_roots(series, beta, g, k, N=N, scan=scan, tol=tol, params=params)
        finite = []
        for idx, (om, br) in enumerate(roots):
            val = resum_eval(series, beta, om, g, N, params)
            if math.isfinite(val):
                finite.append((idx, om, br, val))
        if not finite:
            continue
        if previous is not None:
            idx, om, br, val = min(finite, key=lambda r: abs(r[1] - previous))
        else:
            idx, om, br, val = finite[0]
        res = resum_derivative(series, beta, om, g, k, N, params)
        return VptSolution(beta=beta, g=g, N=N, omegaStar=om, criterionOrder=k, value=val,
                           bracket=tuple(br), residual=res, branch=idx,
                           roots=tuple(r[1] for r in finite))
    raise NoCriterionRoot(f"no derivative of order <= {max(N, 1)} vanishes for Omega in "
                          f"[{scan[0]}, {scan[1]}] omega (beta={beta}, g={g}, N={N})")


def sweep(series: VptSeries, betas, g: float, *, N: int | None = None, scan=SCAN_DEFAULT,
          tol: float = 1e-10, params: ModelParams = NATURAL) -> list:
    """Optimize along a beta grid, following the branch by continuation."""
    out = []
    prev = None
    for b in betas:
        sol = optimize_omega(series, b, g, N=N, scan=scan, tol=tol, previous=prev, params=params)
        out.append(sol)
        prev = sol.omegaStar
    return out


def _fit(rows: list) -> dict | None:
    pts = [(r["N"], r["error"]) for r in rows]
    if len(pts) < 2:
        return None
    if any(e == 0 for _, e in pts):
        return {"degenerate": True, "rate": None, "intercept": None}
    n, e = np.array(pts, dtype=float).T
    slope, icpt = np.polyfit(n, np.log(e), 1)
    return {"degenerate": False, "rate": float(-slope), "intercept": float(icpt)}


def convergence_report(series: VptSeries, beta: float, g: float, Nmax: int, reference: float,
                       *, scan=SCAN_DEFAULT, tol: float = 1e-10, params: ModelParams = NATURAL) -> dict:
    if Nmax > series.N:
        raise ValueError(f"series has order {series.N}, requested {Nmax}")
    rows = []
    for N in range(1, Nmax + 1):
        sol = optimize_omega(series, beta, g, N=N, scan=scan, tol=tol, params=params)
        rows.append({"N": N, "omegaStar": sol.omegaStar, "criterionOrder": sol.criterionOrder,
                     "F": sol.value, "error": abs(sol.value - reference)})
    return {
        "perOrder": rows,
        "oddFit": _fit([r for r in rows if r["N"] % 2]),
        "evenFit": _fit([r for r in rows if not r["N"] % 2]),
        "degenerate": any(r["error"] == 0 for r in rows),
    }
