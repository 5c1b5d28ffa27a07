"""Partition function and free energy series from the diagonal amplitude.

Relative corrections ``z_n`` (Z = Z0 (1 + sum g^n z_n)) and free-energy
coefficients ``F_n`` (F = sum g^n F_n) are exact HypExpr values in the
half-angle variable y = hbar beta omega / 2.  The harmonic term F_0 contains a
logarithm and is handled in closed form by :func:`harmonic_free_energy`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy import integrate

from . import hypalg
from .bwrec import CoeffTable
from .errors import NoFiniteLimit
from .hypalg import HypExpr
from .params import ModelParams, NATURAL


def _double_factorial(n: int) -> int:
    return math.prod(range(n, 0, -2)) if n > 0 else 1


def gaussian_moment(m: int, alpha: float = 1.0) -> float:
    """Integral of x^(2m) exp(-alpha x^2) over the real line."""
    return _double_factorial(2 * m - 1) * math.sqrt(math.pi / alpha) / (2 * alpha) ** m


@dataclass
class ThermalSeries:
    order: int
    z_rel: list = field(default_factory=list)   # z_0 .. z_N, z_0 = 1
    f_rel: list = field(default_factory=list)   # F_0 placeholder (None), F_1 .. F_N

    def z(self, n: int) -> HypExpr:
        return self.z_rel[n]

    def f(self, n: int) -> HypExpr:
        if n == 0:
            raise ValueError("F_0 is the harmonic free energy; use harmonic_free_energy")
        return self.f_rel[n]


def harmonic_free_energy(beta: float, params: ModelParams = NATURAL) -> float:
    """F_0 = (1/beta) log(2 sinh(hbar beta omega / 2)), stable for large beta."""
    u = params.hbar * beta * params.omega
    # log(2 sinh(u/2)) = u/2 + log(1 - exp(-u))
    return (0.5 * u + math.log(-math.expm1(-u))) / beta


def diagonal_polynomial(table: CoeffTable, n: int) -> list:
    """D[k] = sum_l c[n,k,l]/sinh^l, the x^{2k} coefficient of A_n(x, x)."""
    out = []
    for k in range(2 * n + 1):
        acc = HypExpr.zero(1)
        for l in range(2 * k + 1):
            acc = acc + table.get(n, k, l).times_sinh(-l)
        out.append(acc)
    return out


def _z_full_angle(table: CoeffTable, n: int) -> HypExpr:
    # coth(u/2) = (1 + cosh u)/sinh u ; 1/(2 alpha) = hbar/(2 M omega) coth(u/2)
    coth_half = (HypExpr.const(1) + HypExpr.cosh(1)).times_sinh(-1)
    acc = HypExpr.zero(1)
    power = HypExpr.const(1)
    for k, dk in enumerate(diagonal_polynomial(table, n)):
        if k:
            power = hypalg.mul(power, coth_half)
        if dk.is_zero():
            continue
        term = hypalg.mul(dk, power).scale(
            Fraction(_double_factorial(2 * k - 1), 2 ** k), hbar=k, M=-k, omega=-k)
        acc = acc + term
    return acc


def log_coefficients(z: list) -> list:
    """Coefficients of log(1 + sum_{n>=1} z_n g^n) via n l_n = sum_j j l_j z_{n-j}."""
    logs = [None]
    for n in range(1, len(z)):
        acc = z[n]
        for j in range(1, n):
            acc = acc - hypalg.mul(logs[j], z[n - j]).scale(Fraction(j, n))
        logs.append(acc)
    return logs


def z_series(table: CoeffTable, N: int) -> ThermalSeries:
    if table.max_order < N:
        raise ValueError(f"table complete through {table.max_order}, need {N}")
    z = [HypExpr.const(1, nu_div=2)]
    for n in range(1, N + 1):
        z.append(hypalg.rebase_half(_z_full_angle(table, n)))
    logs = log_coefficients(z)
    f = [None]
    for n in range(1, N + 1):
        # F_n = -l_n / beta,  1/beta = hbar omega / (2 y)
        f.append(logs[n].divide_x().scale(Fraction(-1, 2), hbar=1, omega=1))
    return ThermalSeries(order=N, z_rel=z, f_rel=f)


def f_series_eval(series: ThermalSeries, beta: float, omega: float, g: float, N: int,
                  params: ModelParams = NATURAL) -> dict:
    if N > series.order:
        raise ValueError(f"series has order {series.order}, requested {N}")
    p = params.replace(omega=omega)
    per = [harmonic_free_energy(beta, p)]
    for n in range(1, N + 1):
        per.append(float(hypalg.evaluate(series.f(n), p.hbar * beta, p)) * g ** n)
    return {"perOrder": per, "truncatedSum": math.fsum(per)}


def z_relative_eval(series: ThermalSeries, beta: float, g: float, N: int,
                    params: ModelParams = NATURAL) -> float:
    """1 + sum_{n<=N} g^n z_n at beta."""
    total = 1.0
    for n in range(1, N + 1):
        total += g ** n * float(hypalg.evaluate(series.z(n), params.hbar * beta, params))
    return total


def partition_function(series: ThermalSeries, beta: float, g: float, N: int,
                       params: ModelParams = NATURAL) -> float:
    z0 = 1.0 / (2.0 * math.sinh(params.hbar * beta * params.omega / 2))
    return z0 * z_relative_eval(series, beta, g, N, params)


def ground_state_limit(series: ThermalSeries, n: int):
    """beta -> infinity limit of F_n as (Fraction, (e_hbar, e_M, e_omega))."""
    if n == 0:
        return Fraction(1, 2), (1, 0, 1)
    if n > series.order:
        raise ValueError(f"series has order {series.order}")
    expr = series.f(n)
    m = expr.m
    value: dict = {}
    for (a, b, h, mm, w, l), c in expr.terms:
        if b > m or (b == m and a > 0):
            raise NoFiniteLimit(f"F_{n} grows like y^{a} exp({b - m} y)")
        if b == m:
            value[(h, mm, w)] = value.get((h, mm, w), Fraction(0)) + c * 2 ** m
    value = {k: v for k, v in value.items() if v}
    if len(value) > 1:
        raise NoFiniteLimit(f"limit of F_{n} mixes monomials {sorted(value)}")
    if not value:
        return Fraction(0), (0, 0, 0)
    (mono, coef), = value.items()
    return coef, mono


# -- diagrammatic references ------------------------------------------------

def green_periodic(tau1, tau2, beta: float, params: ModelParams = NATURAL):
    hb = params.hbar * beta
    w = params.omega
    d = np.abs(np.asarray(tau1) - np.asarray(tau2))
    return params.hbar / (2 * params.M * w) * np.cosh(hb * w / 2 - d * w) / math.sinh(hb * w / 2)


def _d1(beta, p):
    u = p.hbar * beta * p.omega
    return p.hbar ** 3 * beta / (4 * p.M ** 2 * p.omega ** 2) / math.tanh(u / 2) ** 2


def _d21(beta, p):
    u = p.hbar * beta * p.omega
    return (p.hbar ** 5 * beta / math.tanh(u / 2) ** 2 * (u + math.sinh(u))
            / (32 * p.M ** 4 * p.omega ** 5 * math.sinh(u / 2) ** 2))


def _d22(beta, p):
    u = p.hbar * beta * p.omega
    return (p.hbar ** 5 * beta * (math.sinh(2 * u) + 8 * math.sinh(u) + 6 * u)
            / (256 * p.M ** 4 * p.omega ** 5 * math.sinh(u / 2) ** 4))


_DIAGRAMS = {"D1": _d1, "D21": _d21, "D22": _d22}


def diagram_reference(name: str, beta: float, omega: float = 1.0,
                      params: ModelParams = NATURAL) -> float:
    """Closed-form value of a connected vacuum diagram built from the periodic Green's function.

    D1  = int G(t,t)^2 dt
    D21 = int int G(t1,t1) G(t1,t2)^2 G(t2,t2)
    D22 = int int G(t1,t2)^4
    Gp  = G(0, hbar beta / 2)
    """
    p = params.replace(omega=omega)
    if name == "Gp":
        return float(green_periodic(0.0, p.hbar * beta / 2, beta, p))
    try:
        return _DIAGRAMS[name](beta, p)
    except KeyError:
        raise ValueError(f"unknown diagram {name!r}; expected one of D1, D21, D22, Gp") from None


def diagram_quadrature(name: str, beta: float, omega: float = 1.0,
                       params: ModelParams = NATURAL) -> float:
    """Direct numerical integration of the diagram over [0, hbar beta]^d."""
    p = params.replace(omega=omega)
    hb = p.hbar * beta
    G = lambda t1, t2: float(green_periodic(t1, t2, beta, p))  # noqa: E731
    opts = dict(epsabs=0.0, epsrel=1e-12, limit=200)
    if name == "D1":
        return integrate.quad(lambda t: G(t, t) ** 2, 0, hb, **opts)[0]
    # translation invariance: the double integral is hbar beta times a single one
    if name == "D21":
        g0 = G(0.0, 0.0)
        return hb * integrate.quad(lambda s: g0 * G(0.0, s) ** 2 * g0, 0, hb, **opts)[0]
    if name == "D22":
        return hb * integrate.quad(lambda s: G(0.0, s) ** 4, 0, hb, **opts)[0]
    raise ValueError(f"no quadrature for diagram {name!r}")


def diagram_quadrature_2d(name: str, beta: float, omega: float = 1.0,
                          params: ModelParams = NATURAL) -> float:
    """Full two-dimensional quadrature (no translation shortcut)."""
    p = params.replace(omega=omega)
    hb = p.hbar * beta
    G = lambda t1, t2: float(green_periodic(t1, t2, beta, p))  # noqa: E731
    if name == "D21":
        f = lambda t2, t1: G(t1, t1) * G(t1, t2) ** 2 * G(t2, t2)  # noqa: E731
    elif name == "D22":
        f = lambda t2, t1: G(t1, t2) ** 4  # noqa: E731
    else:
        raise ValueError(f"no 2d quadrature for diagram {name!r}")
    # split along the kink at t1 = t2
    lo = integrate.dblquad(f, 0, hb, 0, lambda t1: t1, epsabs=0, epsrel=1e-11)[0]
    hi = integrate.dblquad(f, 0, hb, lambda t1: t1, hb, epsabs=0, epsrel=1e-11)[0]
    return lo + hi


def diagram_free_energy(beta: float, g: float, omega: float = 1.0, *, quadrature: bool = False,
                        params: ModelParams = NATURAL) -> list:
    """[F_0, g F_1, g^2 F_2] from the connected diagrams."""
    p = params.replace(omega=omega)
    val = diagram_quadrature if quadrature else diagram_reference
    d1 = val("D1", beta, omega, p)
    d21 = val("D21", beta, omega, p)
    d22 = val("D22", beta, omega, p)
    f1 = 3 * g / (p.hbar * beta) * d1
    f2 = -(g ** 2) / (2 * p.hbar ** 2 * beta) * (72 * d21 + 24 * d22)
    return [harmonic_free_energy(beta, p), f1, f2]


def diagram_partition_function(beta: float, g: float, N: int, omega: float = 1.0,
                               params: ModelParams = NATURAL) -> float:
    """Z truncated at order N <= 2 from the (disconnected + connected) diagram expansion."""
    if N > 2:
        raise ValueError("diagram expansion is only available through second order")
    p = params.replace(omega=omega)
    h = p.hbar
    d1 = diagram_reference("D1", beta, omega, p)
    d21 = diagram_reference("D21", beta, omega, p)
    d22 = diagram_reference("D22", beta, omega, p)
    z0 = 1.0 / (2.0 * math.sinh(h * beta * p.omega / 2))
    rel = 1.0
    if N >= 1:
        rel -= 3 * g / h * d1
    if N >= 2:
        rel += g ** 2 / (2 * h ** 2) * (9 * d1 ** 2 + 72 * d21 + 24 * d22)
    return z0 * rel


def closed_form_f2() -> HypExpr:
    """Second-order free-energy coefficient in multi-angle form.

    -(hbar^3 / 64 M^4 omega^5) (54 u + 36 u cosh u + 60 sinh u + 21 sinh 2u) / sinh^4(u/2),
    u = hbar beta omega = 2y.
    """
    return HypExpr.multiangle(
        [(54 * 2, 1, "1", 0), (36 * 2, 1, "cosh", 2), (60, 0, "sinh", 2), (21, 0, "sinh", 4)],
        m=4, nu_div=2, mono=(3, -4, -5), scale=Fraction(-1, 64))


def closed_form_f1() -> HypExpr:
    """(3 hbar^2 / 4 M^2 omega^2) coth^2(u/2)."""
    return HypExpr.multiangle([(1, 0, "cosh", 1)], nu_div=2).times_cosh().times_sinh(-2).scale(
        Fraction(3, 4), hbar=2, M=-2, omega=-2)
