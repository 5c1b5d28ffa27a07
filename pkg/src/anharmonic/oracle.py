"""Independent numerical references for the symbolic pipeline."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numba
import numpy as np
from scipy import integrate
from scipy.special import logsumexp

from . import hypalg
from .amplitude import AmplitudeSeries, harmonic_amplitude
from .bwrec import CoeffKey, CoeffTable, is_valid
from .errors import NoBracket
from .params import ModelParams, NATURAL

X_MAX = 8.0
STEP = 1e-4
TOL = 1e-9


# -- shooting ---------------------------------------------------------------

@numba.njit(cache=True)
def _nodes(E, g, x_max, h, odd, kin, mw2):
    """Nodes on (0, x_max] of the parity solution at energy E.

    psi'' = kin (V - E) psi with V = mw2 x^2/2 + g x^4, classic RK4.
    """
    n = int(round(x_max / h))
    if odd:
        y, dy = 0.0, 1.0
    else:
        y, dy = 1.0, 0.0
    x = 0.0
    count = 0
    for _ in range(n):
        f1 = kin * (0.5 * mw2 * x * x + g * x ** 4 - E)
        k1y = dy
        k1d = f1 * y
        xm = x + 0.5 * h
        fm = kin * (0.5 * mw2 * xm * xm + g * xm ** 4 - E)
        k2y = dy + 0.5 * h * k1d
        k2d = fm * (y + 0.5 * h * k1y)
        k3y = dy + 0.5 * h * k2d
        k3d = fm * (y + 0.5 * h * k2y)
        xe = x + h
        fe = kin * (0.5 * mw2 * xe * xe + g * xe ** 4 - E)
        k4y = dy + h * k3d
        k4d = fe * (y + h * k3y)
        ny = y + h / 6.0 * (k1y + 2 * k2y + 2 * k3y + k4y)
        dy = dy + h / 6.0 * (k1d + 2 * k2d + 2 * k3d + k4d)
        if ny == 0.0 or (ny > 0.0) != (y > 0.0) and y != 0.0:
            count += 1
        y = ny
        x = xe
        a = abs(y)
        if a > 1e150:
            y /= a * 1e-50
            dy /= a * 1e-50
    return count


@dataclass(frozen=True)
class Spectrum:
    g: float
    energies: tuple
    method: dict = field(default_factory=dict)

    def __post_init__(self):
        e = self.energies
        if any(b <= a for a, b in zip(e, e[1:])):
            raise ValueError("spectrum must be strictly increasing")


def _level(j: int, odd: bool, g: float, params: ModelParams, x_max: float, h: float, tol: float):
    kin = 2 * params.M / params.hbar ** 2
    mw2 = params.M * params.omega ** 2
    v_max = 0.5 * mw2 * x_max ** 2 + g * x_max ** 4
    lo, hi = 0.0, params.hbar * params.omega
    while _nodes(hi, g, x_max, h, odd, kin, mw2) < j + 1:
        lo, hi = hi, 2 * hi
        if hi > v_max:
            raise NoBracket(f"level {2 * j + odd} not bracketed below V(x_max) = {v_max:.4g}; "
                            "enlarge x_max")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if _nodes(mid, g, x_max, h, odd, kin, mw2) >= j + 1:
            hi = mid
        else:
            lo = mid
    E = 0.5 * (lo + hi)
    # the wave function must have decayed by the wall: WKB exponent beyond the turning point
    xs = np.linspace(0.0, x_max, 4001)
    gap = kin * (0.5 * mw2 * xs ** 2 + g * xs ** 4 - E)
    decay = np.trapezoid(np.sqrt(np.clip(gap, 0.0, None)), xs)
    if decay < 15.0:
        raise NoBracket(f"level {2 * j + odd} at E={E:.6g} is not confined by x_max={x_max}; "
                        "enlarge x_max")
    return E


def shoot_eigenvalues(g: float, count: int, tol: float = TOL, *, x_max: float = X_MAX,
                      step: float = STEP, params: ModelParams = NATURAL) -> Spectrum:
    """Lowest ``count`` levels by parity shooting from x = 0 and node counting."""
    if g < 0:
        raise ValueError("g must be non-negative")
    if count < 1:
        raise ValueError("count must be >= 1")
    energies = tuple(_level(n // 2, bool(n % 2), g, params, x_max, step, tol) for n in range(count))
    return Spectrum(g=g, energies=energies,
                    method={"method": "shooting", "integrator": "rk4", "xMax": x_max,
                            "step": step, "tol": tol})


def spectral_free_energy(spectrum: Spectrum, beta: float) -> float:
    if not beta > 0:
        raise ValueError("beta must be positive")
    e = np.asarray(spectrum.energies, dtype=float)
    if e.size == 0:
        raise ValueError("empty spectrum")
    return float(-logsumexp(-beta * e) / beta)


# -- classical partition function --------------------------------------------

def _k_series(nu: float, z: float) -> float:
    """K_nu from the ascending series of I_{-nu} and I_nu (small z)."""
    half = 0.5 * z
    q = half * half

    def ival(mu):
        term = half ** mu / math.gamma(mu + 1)
        total = term
        k = 0
        while abs(term) > 1e-18 * abs(total):
            k += 1
            term *= q / (k * (k + mu))
            total += term
        return total

    return 0.5 * math.pi * (ival(-nu) - ival(nu)) / math.sin(nu * math.pi)


def _k_integral_scaled(nu: float, z: float) -> float:
    """e^z K_nu(z) = int_0^inf exp(-z (cosh t - 1)) cosh(nu t) dt by the trapezoidal rule.

    The integrand is analytic and decays double exponentially, so the rule
    converges geometrically in the step.
    """
    h = 0.05
    t_max = math.acosh(1 + 40.0 / z) + 1.0
    t = np.arange(0.0, t_max, h)
    f = np.exp(-z * (np.cosh(t) - 1.0)) * np.cosh(nu * t)
    return float(h * (f.sum() - 0.5 * f[0]))


def _k_asymptotic_scaled(nu: float, z: float) -> float:
    """e^z K_nu(z) from the large-z expansion, summed to the smallest term."""
    mu = 4 * nu * nu
    term = 1.0
    total = 1.0
    k = 0
    while True:
        k += 1
        nxt = term * (mu - (2 * k - 1) ** 2) / (k * 8 * z)
        if abs(nxt) >= abs(term) or abs(nxt) < 1e-17 * abs(total):
            break
        term = nxt
        total += term
    return math.sqrt(math.pi / (2 * z)) * total


def bessel_k_scaled(nu: float, z: float) -> float:
    """e^z K_nu(z) for z > 0."""
    if not z > 0:
        raise ValueError("z must be positive")
    if z < 2.0:
        return math.exp(z) * _k_series(nu, z)
    if z < 25.0:
        return _k_integral_scaled(nu, z)
    return _k_asymptotic_scaled(nu, z)


def bessel_k(nu: float, z: float) -> float:
    return bessel_k_scaled(nu, z) * math.exp(-z)


def classical_partition(beta: float, g: float, params: ModelParams = NATURAL) -> dict:
    if not (beta > 0 and g > 0):
        raise ValueError("beta and g must be positive")
    M, w, h = params.M, params.omega, params.hbar
    lam = math.sqrt(2 * math.pi * h * h * beta / M)
    z = beta * M * M * w ** 4 / (32 * g)
    closed = math.sqrt(M * w * w / (2 * g)) / (2 * lam) * bessel_k_scaled(0.25, z)
    f = lambda x: math.exp(-beta * (0.5 * M * w * w * x * x + g * x ** 4))  # noqa: E731
    half, _ = integrate.quad(f, 0, np.inf, epsabs=0, epsrel=1e-13, limit=200)
    return {"closedForm": closed, "quadrature": 2 * half / lam}


def classical_free_energy(beta: float, g: float, params: ModelParams = NATURAL) -> float:
    return -math.log(classical_partition(beta, g, params)["closedForm"]) / beta


# -- ODE cross-check of the coefficient table ---------------------------------

def _dependencies(key: CoeffKey) -> list:
    n, k, l = key
    deps = [(n, k + 1, l + 2), (n, k, l + 1)]
    if n >= 1:
        deps.append((n - 1, k - 2, l - 4))
    return [CoeffKey(*d) for d in deps if is_valid(*d)]


def _closure(key: CoeffKey) -> list:
    seen = {key}
    stack = [key]
    while stack:
        for d in _dependencies(stack.pop()):
            if d not in seen:
                seen.add(d)
                stack.append(d)
    return sorted(seen)


def _laurent_value(expr: hypalg.HypExpr, tau: float, params: ModelParams) -> float:
    x = params.omega / expr.nu_div * tau
    total = 0.0
    for mono, coeffs in hypalg.laurent_by_monomial(expr, hypalg.LAURENT_ORDER).items():
        mv = params.hbar ** mono[0] * params.M ** mono[1] * params.omega ** mono[2]
        total += mv * sum(float(c) * x ** (i - expr.m) for i, c in enumerate(coeffs) if c)
    return total


def ode_coefficient_check(table: CoeffTable, key, taus, *, tau0: float = 1e-3,
                          params: ModelParams = NATURAL, rtol: float = 1e-12) -> float:
    """Integrate the coupled equations for c/sinh^l numerically and compare with the table.

    Returns the largest relative deviation over ``taus``.
    """
    key = CoeffKey(*key)
    if key not in table.entries:
        raise KeyError(f"{key} not in table")
    taus = sorted(float(t) for t in taus)
    if not taus or taus[0] <= tau0 or taus[-1] > 5.0:
        raise ValueError("taus must lie in (tau0, 5]")
    keys = _closure(key)
    index = {k: i for i, k in enumerate(keys)}
    h, M, w = params.hbar, params.M, params.omega
    deps = []
    for n, k, l in keys:
        up = index.get(CoeffKey(n, k + 1, l + 2))
        side = index.get(CoeffKey(n, k, l + 1))
        prev = index.get(CoeffKey(n - 1, k - 2, l - 4))
        deps.append((l, up, side, prev))

    def rhs(tau, y):
        s = math.sinh(w * tau)
        coth = math.cosh(w * tau) / s
        out = np.empty_like(y)
        for i, (l, up, side, prev) in enumerate(deps):
            v = -l * w * coth * y[i]
            if up is not None:
                v += (l + 2) * (l + 1) * h / (2 * M) * y[up]
            if side is not None:
                v += (l + 1) * w * y[side] / s
            if prev is not None:
                v -= y[prev] / h
            out[i] = v
        return out

    reduced = [table.get(*k).times_sinh(-k.l) for k in keys]
    y0 = np.array([_laurent_value(r, tau0, params) for r in reduced])
    sol = integrate.solve_ivp(rhs, (tau0, taus[-1]), y0, method="DOP853", t_eval=taus,
                              rtol=rtol, atol=1e-14)
    if not sol.success:
        raise RuntimeError(sol.message)
    i = index[key]
    worst = 0.0
    for tau, yhat in zip(sol.t, sol.y[i]):
        ref = float(hypalg.evaluate(table[key], tau, params))
        got = yhat * math.sinh(w * tau) ** key.l
        worst = max(worst, abs(got - ref) / abs(ref) if ref else abs(got))
    return worst


# -- x-quadrature of the diagonal amplitude ------------------------------------

def quadrature_partition(series: AmplitudeSeries, beta: float, N: int | None = None) -> float:
    """Z = int dx A_N(x, x; beta) over a window that holds the Gaussian weight to 1e-12."""
    N = series.order if N is None else N
    if N > series.order:
        raise ValueError(f"series has order {series.order}, requested {N}")
    p = series.params
    tau = p.hbar * beta
    s = math.sinh(p.omega * tau)
    # polynomial in x of the diagonal correction factor
    poly = np.zeros(4 * N + 1)
    poly[0] = 1.0
    for n in range(1, N + 1):
        for k in range(2 * n + 1):
            for l in range(2 * k + 1):
                c = series.table.get(n, k, l)
                if not c.is_zero():
                    poly[2 * k] += p.g ** n * float(hypalg.evaluate(c, tau, p)) / s ** l
    alpha = p.M * p.omega / p.hbar * math.tanh(tau * p.omega / 2)
    L = math.sqrt((28 * math.log(10) + 4 * N * 4) / alpha) + 1.0
    f = lambda x: harmonic_amplitude(x, x, beta, p) * np.polynomial.polynomial.polyval(x, poly)  # noqa: E731
    half, _ = integrate.quad(f, 0, L, epsabs=0, epsrel=1e-13, limit=400)
    return 2 * half
