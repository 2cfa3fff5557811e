"""Guillemin symplectic potential on the polytope and its Legendre-dual Kahler potential.

``G(v) = 1/2 sum_a l_a(v) log l_a(v)`` on the interior of the polytope, and
``u0(x) = <x, v> - G(v) + c0`` with ``v = Du0(x)`` solving ``DG(v) = x``.

Far from the origin ``v`` approaches the boundary exponentially fast in ``|x|``
and the small slacks ``l_a(v)`` are not representable as differences of
coordinates. The dual problem is therefore solved in a *vertex chart*: for a
vertex ``p`` with ``m`` active facets, the chart slacks ``z_j = l_{a_j}(v)`` are
used as coordinates and Newton runs on ``y = log z``. In these variables the
gradient map is affine up to terms from the remaining facets, and the Hessian
of ``u0`` has the closed form ``2 A^-1 (I + Z K)^-1 Z A^-T``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import exact
from .errors import BoundaryEvaluation, NoConvergence
from .polytope import HPolytope, VPolytope

DUAL_TOL = 1e-12
FRACTION_TO_BOUNDARY = 0.9
MASS_TAIL_REL = 1e-14


@dataclass(frozen=True)
class _Chart:
    vertex: np.ndarray        # (m,)
    facets: np.ndarray        # chart facet indices, (m,)
    others: np.ndarray        # remaining facet indices, (d-m,)
    A: np.ndarray             # rows are chart normals, (m, m)
    A_inv: np.ndarray
    A_inv_T: np.ndarray
    log_abs_det_A: float
    base: np.ndarray          # slacks of the other facets at the vertex, (d-m,)
    M: np.ndarray             # other normals in chart coordinates, (d-m, m)
    center_y: np.ndarray      # log of chart slacks at the origin, (m,)


@dataclass
class DualState:
    """Everything known about ``u0`` at a batch of points ``x`` (leading axis n)."""

    x: np.ndarray             # (n, m)
    v: np.ndarray             # (n, m) = Du0(x)
    log_slack: np.ndarray     # (n, d) log l_a(v); finite even when l_a underflows
    u0: np.ndarray            # (n,)
    hess: np.ndarray          # (n, m, m) = D^2 u0(x)
    log_det_hess: np.ndarray  # (n,)
    chart: np.ndarray         # (n,) chart index
    iterations: int

    @property
    def slack(self) -> np.ndarray:
        return np.exp(self.log_slack)


class SymplecticPotential:
    """``G(v) = 1/2 sum l_a log l_a`` and its derivatives on the polytope interior."""

    def __init__(self, hpoly: HPolytope):
        self.hpoly = hpoly
        self.m = hpoly.dim
        self.normals = np.array([[float(x) for x in n] for n in hpoly.normals])
        self.offsets = np.array([float(c) for c in hpoly.offsets])

    def slacks(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        ell = v @ self.normals.T + self.offsets
        if np.any(ell <= 0):
            raise BoundaryEvaluation("point is not in the open polytope")
        return ell

    def eval_G(self, v):
        ell = self.slacks(v)
        return 0.5 * np.sum(ell * np.log(ell), axis=-1)

    def grad_G(self, v):
        ell = self.slacks(v)
        return 0.5 * (1.0 + np.log(ell)) @ self.normals

    def hess_G(self, v):
        ell = self.slacks(v)
        return 0.5 * np.einsum("...a,ai,aj->...ij", 1.0 / ell, self.normals, self.normals)


class KahlerPotential:
    """Legendre dual of the Guillemin potential, normalized so that
    ``int exp(-(2m+2) u0) dx = Vol``.
    """

    def __init__(self, vpoly: VPolytope, volume: Fraction | float | None = None,
                 tol: float = DUAL_TOL, max_iter: int = 200):
        self.vpoly = vpoly
        self.G = SymplecticPotential(vpoly.hpoly)
        self.m = self.G.m
        self.d = len(vpoly.hpoly.normals)
        self.tol = tol
        self.max_iter = max_iter
        self.charts = [self._make_chart(p, act) for p, act in zip(vpoly.vertices, vpoly.active)]
        self._vertices = np.array([c.vertex for c in self.charts])
        self.c0 = 0.0
        if volume is not None:
            self.volume = float(volume)
            self.c0 = self._normalization()

    # charts -------------------------------------------------------------
    def _make_chart(self, p, active) -> _Chart:
        h = self.vpoly.hpoly
        chosen: list[int] = []
        for a in sorted(active):
            if exact.rank([h.normals[b] for b in chosen + [a]]) == len(chosen) + 1:
                chosen.append(a)
            if len(chosen) == self.m:
                break
        others = [a for a in range(self.d) if a not in chosen]
        A = [h.normals[a] for a in chosen]
        A_inv = exact.inverse(A)
        A_inv_T = exact.transpose(A_inv)
        M = [exact.matvec(A_inv_T, h.normals[b]) for b in others]
        base = [h.slack(b, p) for b in others]
        f = lambda rows: np.array([[float(x) for x in r] for r in rows], dtype=float)
        return _Chart(
            vertex=np.array([float(x) for x in p]),
            facets=np.array(chosen, dtype=int),
            others=np.array(others, dtype=int),
            A=f(A), A_inv=f(A_inv), A_inv_T=f(A_inv_T),
            log_abs_det_A=math.log(abs(float(exact.det(A)))),
            base=np.array([float(b) for b in base]),
            M=f(M).reshape(len(others), self.m),
            center_y=np.log(np.array([float(h.offsets[a]) for a in chosen])),
        )

    def _chart_for(self, x: np.ndarray) -> np.ndarray:
        return np.argmax(x @ self._vertices.T, axis=1)

    # dual solve ---------------------------------------------------------
    def dual_state(self, x) -> DualState:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        n = x.shape[0]
        m, d = self.m, self.d
        out = DualState(
            x=x, v=np.empty((n, m)), log_slack=np.empty((n, d)), u0=np.empty(n),
            hess=np.empty((n, m, m)), log_det_hess=np.empty(n),
            chart=self._chart_for(x), iterations=0)
        for k in np.unique(out.chart):
            idx = np.nonzero(out.chart == k)[0]
            self._solve_chart(self.charts[k], x[idx], out, idx)
        return out

    def _solve_chart(self, ch: _Chart, x, out: DualState, idx):
        m = self.m
        n = x.shape[0]
        eye = np.eye(m)
        # Asymptotic guess: ignore variation of the non-chart slacks.
        rest = 0.5 * ((1.0 + np.log(ch.base)) @ self.G.normals[ch.others]) if len(ch.others) else 0.0
        y_asym = 2.0 * (x - rest) @ ch.A_inv - 1.0
        y = np.minimum(y_asym, ch.center_y)
        if len(ch.others):
            bad = np.any(ch.base + np.exp(y) @ ch.M.T <= 0, axis=1)
            y[bad] = ch.center_y

        def residual(y, xs):
            z = np.exp(y)
            ell = ch.base + z @ ch.M.T
            r = 0.5 * (1.0 + y) @ ch.A
            if len(ch.others):
                r = r + 0.5 * (1.0 + np.log(np.where(ell > 0, ell, 1.0))) @ self.G.normals[ch.others]
            return r - xs, z, ell

        r, z, ell = residual(y, x)
        scale = np.maximum(1.0, np.abs(x).max(axis=1))
        it = 0
        for it in range(1, self.max_iter + 1):
            err = np.abs(r).max(axis=1) / scale
            active = err > self.tol
            if not active.any():
                break
            a = np.nonzero(active)[0]
            K = np.einsum("nb,bi,bj->nij", 1.0 / ell[a], ch.M, ch.M)
            J = 0.5 * np.einsum("ki,nkj->nij", ch.A, eye + K * z[a][:, None, :])
            step = -np.linalg.solve(J, r[a][..., None])[..., 0]
            alpha = np.ones(len(a))
            f0 = np.sum(r[a] ** 2, axis=1)
            pending = np.ones(len(a), dtype=bool)
            y_new = y[a].copy()
            for _ in range(60):
                if not pending.any():
                    break
                p = np.nonzero(pending)[0]
                trial = y[a][p] + alpha[p, None] * step[p]
                rt, _, lt = residual(trial, x[a][p])
                ok = np.all(lt >= (1 - FRACTION_TO_BOUNDARY) * ell[a][p], axis=1)
                ok &= np.sum(rt ** 2, axis=1) <= (1 - 1e-4 * alpha[p]) * f0[p] + 1e-30
                y_new[p[ok]] = trial[ok]
                pending[p[ok]] = False
                alpha[p[~ok]] *= 0.5
            y[a] = y_new
            r[a], z[a], ell[a] = residual(y[a], x[a])
        else:
            err = np.abs(r).max(axis=1) / scale
            if np.any(err > self.tol):
                raise NoConvergence("Legendre dual did not converge",
                                    residual=float(err.max()))
        out.iterations = max(out.iterations, it)
        self._fill(ch, x, y, z, ell, out, idx)

    def _fill(self, ch: _Chart, x, y, z, ell, out: DualState, idx):
        m = self.m
        v = ch.vertex + z @ ch.A_inv.T
        log_slack = np.empty((len(x), self.d))
        log_slack[:, ch.facets] = y
        if len(ch.others):
            log_slack[:, ch.others] = np.log(ell)
        G = 0.5 * (np.sum(z * y, axis=1) + np.sum(ell * np.log(ell), axis=1))
        K = np.einsum("nb,bi,bj->nij", 1.0 / ell, ch.M, ch.M)
        ZK = z[:, :, None] * K
        inner = np.linalg.inv(np.eye(m) + ZK)                 # (I + Z K)^-1
        core = inner * z[:, None, :]                          # (I + Z K)^-1 Z
        hess = 2.0 * np.einsum("ij,njk,lk->nil", ch.A_inv, core, ch.A_inv)
        hess = 0.5 * (hess + np.swapaxes(hess, 1, 2))
        _, logdet_inner = np.linalg.slogdet(np.eye(m) + ZK)
        out.v[idx] = v
        out.log_slack[idx] = log_slack
        out.u0[idx] = np.sum(x * v, axis=1) - G + self.c0
        out.hess[idx] = hess
        out.log_det_hess[idx] = m * math.log(2.0) - 2 * ch.log_abs_det_A + y.sum(axis=1) - logdet_inner

    # public evaluators --------------------------------------------------
    def legendre_dual(self, x) -> np.ndarray:
        return self._squeeze(x, self.dual_state(x).v)

    def eval_u0(self, x):
        return self._squeeze(x, self.dual_state(x).u0)

    def grad_u0(self, x):
        return self.legendre_dual(x)

    def hess_u0(self, x):
        return self._squeeze(x, self.dual_state(x).hess)

    def _squeeze(self, x, arr):
        return arr[0] if np.ndim(x) == 1 else arr

    def log_density(self, x) -> np.ndarray:
        """``-(2m+2) u0(x)``."""
        return -(2 * self.m + 2) * self.dual_state(x).u0

    # normalization ------------------------------------------------------
    def support(self, x) -> np.ndarray:
        """Support function ``max_p <x, p>`` over the vertices."""
        return np.max(np.atleast_2d(x) @ self._vertices.T, axis=1)

    def tail_radius(self, rel: float, c0: float | None = None) -> float:
        """Half-width L with ``exp(-(2m+2) u0) <= rel`` on the boundary of ``[-L, L]^m``."""
        c0 = self.c0 if c0 is None else c0
        L = 1.0
        while True:
            pts = box_boundary(self.m, L, 41)
            u = self.dual_state(pts).u0 - self.c0 + c0
            if np.max(-(2 * self.m + 2) * u) <= math.log(rel):
                return L
            L *= 1.1
            if L > 1e4:
                raise NoConvergence("tail radius search diverged")

    def _normalization(self) -> float:
        m = self.m
        k = 2 * m + 2
        L = self.tail_radius(MASS_TAIL_REL, c0=0.0)
        h = 0.05 if m == 1 else 0.1
        n = int(math.ceil(2 * L / h))
        axis = np.linspace(-L, L, n + 1)
        pts = np.stack(np.meshgrid(*([axis] * m), indexing="ij"), axis=-1).reshape(-1, m)
        u = self.dual_state(pts).u0 - self.c0
        w = np.full(n + 1, axis[1] - axis[0])
        w[0] = w[-1] = 0.5 * w[0]
        weights = w
        for _ in range(m - 1):
            weights = np.multiply.outer(weights, w)
        shift = u.min()
        integral = np.sum(weights.reshape(-1) * np.exp(-k * (u - shift)))
        # int exp(-k (u + c0)) = exp(-k (shift + c0)) * integral = Vol
        return (math.log(integral) - math.log(self.volume)) / k - shift

    # boundary-degeneracy check ----------------------------------------------
    def log_slope(self, x, a: int) -> np.ndarray:
        """``D log l_a(Du0(x)) = D^2u0(x) lambda_a / l_a(Du0(x))`` (shape (n, m))."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        st = self.dual_state(x)
        out = np.empty_like(x)
        for k in np.unique(st.chart):
            idx = np.nonzero(st.chart == k)[0]
            ch = self.charts[k]
            ls = st.log_slack[idx]
            z = np.exp(ls[:, ch.facets])
            ell = np.exp(ls[:, ch.others])
            K = np.einsum("nb,bi,bj->nij", 1.0 / ell, ch.M, ch.M)
            inner = np.linalg.inv(np.eye(self.m) + z[:, :, None] * K)
            if a in ch.facets:
                w = np.zeros((len(idx), self.m))
                w[:, list(ch.facets).index(a)] = 1.0
            else:
                b = list(ch.others).index(a)
                w = z * ch.M[b] / ell[:, b:b + 1]
            out[idx] = 2.0 * np.einsum("ij,njk,nk->ni", ch.A_inv, inner, w)
        return out


@dataclass(frozen=True)
class ClaimReport:
    facet: int
    radii: tuple[float, ...]
    sup_by_radius: tuple[float, ...]
    relative_change: float
    boundary_sup: float
    boundary_trend: tuple[float, ...]   # sup at each boundary distance, farthest first

    @property
    def finite(self) -> bool:
        return bool(np.all(np.isfinite(self.sup_by_radius)) and math.isfinite(self.boundary_sup))


BOUNDARY_DISTANCES = (1e-2, 1e-3, 1e-4, 1e-5, 1e-6)


def claim_bound_check(K: KahlerPotential, a: int, radii=(50.0, 100.0), n_radial: int = 401,
                      n_angular: int = 256,
                      distances=BOUNDARY_DISTANCES) -> ClaimReport:
    """Sup of ``|D s_a|`` with ``s_a(x) = log l_a(Du0(x))`` over nested balls.

    The x-samples cover ``|x| <= R`` for each radius (a segment when m = 1, a
    polar grid when m = 2). The v-samples sit at the given distances from
    every facet, above points of that facet, and use the dual formula
    ``(D^2G(v))^-1 lambda_a / l_a(v)`` directly.
    """
    if not 0 <= a < K.d:
        raise IndexError(f"facet index {a} out of range")
    sups = []
    for R in radii:
        pts = _ball_samples(K.m, R, n_radial, n_angular)
        sups.append(float(np.max(np.linalg.norm(K.log_slope(pts, a), axis=1))))
    trend = []
    hp = K.vpoly.hpoly
    lam = K.G.normals[a]
    for delta in distances:
        worst = 0.0
        for b in range(K.d):
            verts = [np.array([float(x) for x in v])
                     for v, act in zip(K.vpoly.vertices, K.vpoly.active) if b in act]
            nb = K.G.normals[b]
            inward = nb / (nb @ nb)       # moves l_b up by one unit per unit step
            for s in np.linspace(0.05, 0.95, 7):
                base = verts[0] + s * (verts[-1] - verts[0]) if len(verts) > 1 else verts[0]
                v = base + delta * inward
                ell = v @ K.G.normals.T + K.G.offsets
                if np.any(ell <= 0):
                    continue
                ds = np.linalg.solve(K.G.hess_G(v), lam) / ell[a]
                worst = max(worst, float(np.linalg.norm(ds)))
        trend.append(worst)
    change = abs(sups[-1] - sups[0]) / max(sups[0], 1e-300)
    return ClaimReport(a, tuple(float(r) for r in radii), tuple(sups), float(change),
                       float(max(trend)), tuple(trend))


def _ball_samples(m: int, R: float, n_radial: int, n_angular: int) -> np.ndarray:
    if m == 1:
        return np.linspace(-R, R, 2 * n_radial - 1)[:, None]
    if m != 2:
        raise ValueError("sampling is implemented for m = 1 and m = 2")
    r = np.linspace(0.0, R, n_radial)
    th = np.linspace(0.0, 2 * np.pi, n_angular, endpoint=False)
    rr, tt = np.meshgrid(r, th, indexing="ij")
    return np.stack([rr * np.cos(tt), rr * np.sin(tt)], -1).reshape(-1, 2)


def box_boundary(m: int, L: float, n: int) -> np.ndarray:
    if m == 1:
        return np.array([[-L], [L]])
    axis = np.linspace(-L, L, n)
    pts = []
    for i in range(m):
        for sgn in (-1.0, 1.0):
            grids = np.meshgrid(*([axis] * (m - 1)), indexing="ij")
            face = np.stack([g.reshape(-1) for g in grids], axis=1)
            pts.append(np.insert(face, i, sgn * L, axis=1))
    return np.concatenate(pts)
