"""Imaginary-time amplitude of the quartic oscillator and its harmonic building blocks."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

from . import hypalg
from .bwrec import CoeffTable, cached_table
from .params import ModelParams, NATURAL

__all__ = [
    "ModelParams", "AmplitudeSeries", "harmonic_amplitude", "classical_path",
    "green_dirichlet", "wick_expectation", "evaluate_amplitude", "amplitude_breakdown",
    "first_order_closed_form",
]


@dataclass(frozen=True)
class AmplitudeSeries:
    order: int
    table: CoeffTable
    params: ModelParams = NATURAL

    def __post_init__(self):
        if self.table.max_order < self.order:
            raise ValueError(f"table complete through {self.table.max_order}, need {self.order}")

    @classmethod
    def build(cls, order: int, params: ModelParams = NATURAL) -> "AmplitudeSeries":
        return cls(order, cached_table(order), params)


def harmonic_amplitude(xb: float, xa: float, beta: float, params: ModelParams = NATURAL) -> float:
    if not beta > 0:
        raise ValueError("beta must be positive")
    M, w, h = params.M, params.omega, params.hbar
    u = h * beta * w
    s = math.sinh(u)
    pref = math.sqrt(M * w / (2 * math.pi * h * s))
    return pref * math.exp(-M * w / (2 * h * s) * ((xa * xa + xb * xb) * math.cosh(u) - 2 * xa * xb))


def classical_path(tau: float, xa: float, xb: float, beta: float, params: ModelParams = NATURAL) -> float:
    w = params.omega
    hb = params.hbar * beta
    return (xa * math.sinh((hb - tau) * w) + xb * math.sinh(w * tau)) / math.sinh(hb * w)


def green_dirichlet(tau1: float, tau2: float, beta: float, params: ModelParams = NATURAL) -> float:
    """Dirichlet Green's function; theta(0) = 1/2 on the diagonal."""
    w = params.omega
    hb = params.hbar * beta
    a = math.sinh((hb - tau1) * w) * math.sinh(w * tau2)
    b = math.sinh((hb - tau2) * w) * math.sinh(w * tau1)
    if tau1 > tau2:
        br = a
    elif tau2 > tau1:
        br = b
    else:
        br = 0.5 * (a + b)
    return params.hbar / (params.M * w) * br / math.sinh(hb * w)


def wick_expectation(powers, beta: float, xa: float, xb: float, params: ModelParams = NATURAL) -> float:
    """Harmonic expectation <prod_i x(tau_i)^{n_i}> with Dirichlet endpoints xa, xb.

    ``powers`` is a sequence of (exponent, tau).  One factor is split into its
    classical part and a fluctuation contracted with every remaining factor;
    the recursion is memoized on the exponent vector.
    """
    powers = [(int(n), float(t)) for n, t in powers]
    if any(n < 0 for n, _ in powers):
        raise ValueError("exponents must be non-negative")
    times = [t for _, t in powers]
    xcl = [classical_path(t, xa, xb, beta, params) for t in times]
    G = [[green_dirichlet(ti, tj, beta, params) for tj in times] for ti in times]
    count = len(times)

    @lru_cache(maxsize=None)
    def rec(exps: tuple) -> float:
        i = next((j for j, e in enumerate(exps) if e), None)
        if i is None:
            return 1.0
        lower = list(exps)
        lower[i] -= 1
        total = xcl[i] * rec(tuple(lower))
        for j in range(count):
            mult = lower[j]
            if mult:
                nxt = list(lower)
                nxt[j] -= 1
                total += mult * G[i][j] * rec(tuple(nxt))
        return total

    return rec(tuple(n for n, _ in powers))


def _correction_terms(series: AmplitudeSeries, xb: float, xa: float, beta: float) -> list:
    p = series.params
    tau = p.hbar * beta
    s = math.sinh(p.omega * tau)
    out = []
    for n in range(1, series.order + 1):
        acc = 0.0
        for k in range(2 * n + 1):
            for l in range(2 * k + 1):
                c = series.table.get(n, k, l)
                if c.is_zero():
                    continue
                acc += float(hypalg.evaluate(c, tau, p)) / s ** l * xa ** (2 * k - l) * xb ** l
        out.append(acc * p.g ** n)
    return out


def amplitude_breakdown(series: AmplitudeSeries, xb: float, xa: float, beta: float) -> dict:
    """Harmonic factor, correction factor A and the per-order terms g^n A_n."""
    h0 = harmonic_amplitude(xb, xa, beta, series.params)
    per = [1.0] + (_correction_terms(series, xb, xa, beta) if series.params.g else
                   [0.0] * series.order)
    a = math.fsum(per)
    return {"value": h0 * a, "harmonicFactor": h0, "AFactor": a, "perOrderContributions": per}


def evaluate_amplitude(series: AmplitudeSeries, xb: float, xa: float, beta: float) -> float:
    return amplitude_breakdown(series, xb, xa, beta)["value"]


def first_order_closed_form(xb: float, xa: float, beta: float, params: ModelParams = NATURAL) -> float:
    """Harmonic amplitude times the first-order correction written out term by term."""
    M, w, h, g = params.M, params.omega, params.hbar, params.g
    u = h * beta * w
    s = math.sinh(u)
    bubble2 = h ** 2 / (M ** 2 * w ** 3 * s ** 2) * (
        -9 / 16 * math.sinh(2 * u) + 3 / 4 * u + 3 / 8 * u * math.cosh(2 * u))
    bubble1 = h / (M * w ** 2 * s ** 3) * (
        (xa ** 2 + xb ** 2) * (3 / 16 * math.sinh(3 * u) + 27 / 16 * s - 9 / 4 * u * math.cosh(u))
        + xa * xb * (-9 / 4 * math.sinh(2 * u) + 3 * u + 3 / 2 * u * math.cosh(2 * u)))
    cross = 1 / (w * s ** 4) * (
        (xa ** 4 + xb ** 4) * (1 / 32 * math.sinh(4 * u) - 1 / 4 * math.sinh(2 * u) + 3 / 8 * u)
        + (xa ** 3 * xb + xa * xb ** 3) * (1 / 8 * math.sinh(3 * u) + 9 / 8 * s - 3 / 2 * u * math.cosh(u))
        + xa ** 2 * xb ** 2 * (-9 / 8 * math.sinh(2 * u) + 3 / 2 * u + 3 / 4 * u * math.cosh(2 * u)))
    return harmonic_amplitude(xb, xa, beta, params) * (1 - g / h * (bubble2 + bubble1 + cross))
