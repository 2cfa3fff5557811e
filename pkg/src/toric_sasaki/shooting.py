"""Shooting solver for the one-dimensional path equation.

For ``m = 1`` the equation is the ODE

    phi'' = exp(-4 (u0 + t phi + c)) - u0''   on [-L, L],   phi'(-L) = phi'(L) = 0,

with ``c = 0`` for ``t > 0``. At ``t = 0`` the constant ``c`` is whatever
makes the Neumann problem solvable and ``phi`` is only defined up to a
constant. This module integrates it with an adaptive high-order Runge-Kutta
method and shoots on ``phi(-L)``. It shares nothing with the grid solver
except ``u0``, so it serves as an independent check of the discretization.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad, solve_ivp

from .errors import NoConvergence
from .potential import KahlerPotential

EPS = float(np.finfo(float).eps)


class IntervalPotential:
    """Fast scalar evaluation of ``u0``, ``u0'`` and ``u0''`` for an interval."""

    def __init__(self, K: KahlerPotential):
        if K.m != 1:
            raise ValueError("interval potential needs m = 1")
        self.n = [float(x[0]) for x in K.vpoly.hpoly.normals]
        self.c = [float(c) for c in K.vpoly.hpoly.offsets]
        self.c0 = K.c0
        lo, hi = sorted(float(v[0]) for v in K.vpoly.vertices)
        self.lo, self.hi = lo, hi

    def _chart(self, x):
        # facet whose slack vanishes as x -> +inf has n < 0
        right = x >= 0
        a = next(i for i, n in enumerate(self.n) if (n < 0) == right)
        return a, 1 - a

    def dual(self, x: float) -> tuple[float, float, float]:
        """``(v, log l_a, log l_b)`` at ``x`` with ``a`` the chart facet."""
        a, b = self._chart(x)
        na, nb, ca, cb = self.n[a], self.n[b], self.c[a], self.c[b]
        width = self.hi - self.lo
        y_max = math.log(abs(na) * width)
        lb_vertex = nb * ((-ca) / na) + cb
        y = min(2 * (x - 0.5 * nb * (1 + math.log(lb_vertex))) / na - 1, y_max - 1e-3)
        for _ in range(100):
            z = math.exp(y)
            v = (z - ca) / na
            lb = nb * v + cb
            r = 0.5 * (na * (1 + y) + nb * (1 + math.log(lb))) - x
            if abs(r) <= 4 * EPS * max(1.0, abs(x), abs(na * y)):
                break       # at rounding level; further steps only cycle
            dr = 0.5 * (na + nb * nb * z / (na * lb))
            step = -r / dr
            y_new = y + step
            while y_new >= y_max or nb * ((math.exp(y_new) - ca) / na) + cb <= 0:
                step *= 0.5
                y_new = y + step
            y = y_new
            if abs(step) < 1e-15 * max(1.0, abs(y)):
                break
        else:
            raise NoConvergence("scalar Legendre dual did not converge", x=x)
        z = math.exp(y)
        v = (z - ca) / na
        return v, y, math.log(nb * v + cb)

    def values(self, x: float) -> tuple[float, float, float]:
        """``(u0, u0', u0'')``."""
        a, b = self._chart(x)
        v, ya, yb = self.dual(x)
        za, zb = math.exp(ya), math.exp(yb)
        G = 0.5 * (za * ya + zb * yb)
        Gpp = 0.5 * (self.n[a] ** 2 / za + self.n[b] ** 2 / zb)
        return x * v - G + self.c0, v, 1.0 / Gpp


@dataclass
class ShootingResult:
    t: float
    L: float
    phi_left: float
    compat_constant: float
    end_slope: float
    solution: object   # OdeSolution: y[0] = phi, y[1] = phi'

    def __call__(self, x) -> np.ndarray:
        return self.solution(np.asarray(x, dtype=float))[0]


def _integrate(P: IntervalPotential, L: float, t: float, c: float, s: float,
               rtol: float, dense: bool = False):
    def rhs(x, y):
        u0, _, upp = P.values(x)
        # capped so an overshooting trial stage is rejected by step control, not raised
        rho = math.exp(min(-4 * (u0 + t * y[0] + c), 700.0))
        return [y[1], rho - upp, y[3], -4 * t * rho * y[2]]

    with np.errstate(over="ignore", invalid="ignore"):
        return solve_ivp(rhs, (-L, L), [s, 0.0, 1.0, 0.0], method="DOP853",
                         rtol=rtol, atol=rtol * 1e-2, dense_output=dense)


def _end_state(P, L, t, s, rtol):
    """``(phi'(L), d phi'(L) / d phi(-L))``, or None if the trajectory overflows."""
    try:
        sol = _integrate(P, L, t, 0.0, s, rtol)
    except OverflowError:
        return None
    if sol.status != 0 or not np.all(np.isfinite(sol.y[:, -1])):
        return None
    return float(sol.y[1, -1]), float(sol.y[3, -1])


def shoot(K: KahlerPotential, L: float, t: float, guess: float = 0.0,
          rtol: float = 1e-12, max_iter: int = 30) -> ShootingResult:
    """Solve the Neumann problem on ``[-L, L]`` by Newton shooting on ``phi(-L)``.

    The sensitivity of ``phi'(L)`` to ``phi(-L)`` is integrated alongside.
    """
    P = IntervalPotential(K)
    c = 0.0
    if t == 0:
        mass, _ = quad(lambda x: math.exp(-4 * P.values(x)[0]), -L, L,
                       points=[0.0], epsabs=0, epsrel=1e-13, limit=500)
        flux = P.values(L)[1] - P.values(-L)[1]
        c = -0.25 * math.log(flux / mass)
        sol = _integrate(P, L, 0.0, c, 0.0, rtol, dense=True)
        return ShootingResult(0.0, L, 0.0, c, float(sol.y[1, -1]), sol.sol)
    s = guess
    end = _end_state(P, L, t, s, rtol)
    if end is None:
        raise NoConvergence("shooting trajectory blows up at the initial guess", t=t, guess=s)
    for _ in range(max_iter):
        slope, sens = end
        if sens == 0 or not np.isfinite(sens):
            break
        step = -slope / sens
        # halve steps whose trajectory overflows or that do not reduce |phi'(L)|
        for _ in range(60):
            trial = _end_state(P, L, t, s + step, rtol)
            if trial is not None and abs(trial[0]) < abs(slope) or abs(step) <= 1e-15 * max(1.0, abs(s)):
                break
            step *= 0.5
        if trial is None:
            break
        s += step
        end = trial
        if abs(step) <= 1e-13 * max(1.0, abs(s)):
            sol = _integrate(P, L, t, 0.0, s, rtol, dense=True)
            return ShootingResult(t, L, s, 0.0, float(sol.y[1, -1]), sol.sol)
    raise NoConvergence("shooting did not converge", t=t, phi_left=s)


def compare_with_grid(grid, state, guess: float = 0.0,
                      rtol: float = 1e-12) -> tuple[float, ShootingResult]:
    """Sup-norm distance between the grid solution and the shooting solution.

    At ``t = 0`` both are put in the grid's gauge ``sum w exp(-4 u0) phi = 0``.
    """
    if grid.m != 1:
        raise ValueError("shooting comparison is for m = 1")
    x = grid.points[:, 0]
    L = float(x[-1])
    res = shoot(grid.K, L, state.t, guess, rtol)
    ode = res(x)
    if state.t == 0:
        w = grid.weights * np.exp(-4 * grid.u0)
        ode = ode - (w @ ode - w @ state.phi) / w.sum()
    return float(np.abs(ode - state.phi).max()), res
