"""Continuity path for the toric Monge-Ampere equation.

Along the path we solve, for ``phi = u - u0`` on a truncated lattice,

    det D^2(u0 + phi) = exp(-(2m+2)(u0 + t phi)),

starting at ``t = 0`` and continuing in ``t`` until Newton fails, the
solution blows up, or the minimum point of ``u0 + t phi`` runs off the grid.
The failure bracket estimates the threshold ``R``.

Discretization
--------------
The grid is a lattice polytope ``{z : <d, z> <= B_d}`` whose walls are
perpendicular to the outward rays ``d`` of the moment polytope's facets.
Ghost values come from reflecting across violated walls (a Neumann
condition). For ``m = 1`` the second derivative uses the five-point
fourth-order stencil. For ``m = 2`` a rational change of coordinates first
sends every facet normal to one of the lattice directions ``e1``, ``e2`` or
``(1, 1)``; the Hessian then uses second differences along those three
directions. This keeps the discrete tails exactly aligned with the strips in
which ``u0`` degenerates, which the plain five-point cross stencil does not.

The residual is ``log(det + g) - log(rho + g)`` where ``g`` is a floor at the
roundoff level of the stencil. Nodes where both eigenvalues of the Hessian are
below ``freeze_tol`` carry no resolvable information; there we impose a
discrete harmonic extension instead of the equation.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import exact
from .errors import GridTooSmall, NewtonDiverged, NonConvexIterate, ToricSasakiError
from .polytope import HPolytope, VPolytope, enumerate_vertices
from .potential import KahlerPotential

EPS = float(np.finfo(float).eps)
MIN_NODES = 64


NEWTON = "Newton divergence"
SUP_CAP = "sup_phi cap"
ESCAPE = "gradient-image escape"
IDENTITY = "identity residual"
T_CAP = "reached t cap"
T_MAX = "reached t_max"


class UnsupportedGeometry(ToricSasakiError):
    code = "UnsupportedGeometry"


@dataclass(frozen=True)
class SolverConfig:
    tail_rel: float = 1e-10
    newton_tol: float = 1e-9
    max_newton: int = 100
    min_alpha: float = 1e-8
    floor: float = 1e-12
    freeze_tol: float = 1e-12
    t_step: float = 0.05
    bracket_tol: float = 1e-2
    t_cap: float = 1 - 1e-2
    sup_phi_cap: float = 1e3
    escape_margin: float = 0.1
    mass_tol: float | None = None     # default 1e-6 for m = 1, 1e-3 for m = 2
    moment_tol: float | None = None

    def identity_tols(self, m: int) -> tuple[float, float]:
        default = 1e-6 if m == 1 else 1e-3
        return (self.mass_tol if self.mass_tol is not None else default,
                self.moment_tol if self.moment_tol is not None else default)


# ---------------------------------------------------------------------------
# coordinates

def lattice_alignment(h: HPolytope) -> list[list[Fraction]]:
    """Rational ``A`` such that the normals of ``h.transformed(A)`` lie on the
    lines spanned by ``e1``, ``e2`` and ``(1, 1)``.

    Only defined for ``m = 2`` with at most three distinct normal lines.
    """
    if h.dim != 2:
        raise UnsupportedGeometry("lattice alignment is only needed for m = 2")
    lines: list[tuple[Fraction, ...]] = []
    for n in h.normals:
        p = exact.primitive(n)
        key = p if next(x for x in p if x != 0) > 0 else exact.scale(-1, p)
        if key not in lines:
            lines.append(key)
    allowed = {(1, 0), (0, 1), (1, 1)}
    if all(tuple(int(x) for x in k) in allowed for k in lines):
        return [[Fraction(1), Fraction(0)], [Fraction(0), Fraction(1)]]
    if len(lines) > 3:
        raise UnsupportedGeometry(
            "the m = 2 solver needs facet normals on at most three lines",
            lines=len(lines))
    n1, n2 = lines[0], lines[1]
    if len(lines) == 3:
        al, be = exact.solve(exact.transpose([n1, n2]), lines[2])
    else:
        al = be = Fraction(1)
    n_inv = exact.inverse(exact.transpose([n1, n2]))
    M = [[be * x for x in n_inv[0]], [al * x for x in n_inv[1]]]
    # normals transform by A^{-T} = M
    return exact.transpose(exact.inverse(M))


# ---------------------------------------------------------------------------
# grid

class Grid:
    """Lattice discretization of ``R^m`` with reflecting walls.

    Nodes sit at ``origin + h * z`` for integer ``z`` in the aligned coordinates
    ``x' = A^{-T} x``. Reported points, gradients and minima are mapped back to
    the original coordinates.
    """

    def __init__(self, potential: KahlerPotential, volume: float, barycenter: np.ndarray,
                 transform, h: float, origin: np.ndarray, walls: list[tuple[tuple[int, ...], int]],
                 nominal_n: int, tail_rel: float):
        self.K = potential
        self.m = potential.m
        self.k = 2 * self.m + 2
        self.volume = volume                  # aligned volume
        self.barycenter = barycenter          # aligned P_c
        self.transform = transform
        A = np.array([[float(x) for x in row] for row in transform])
        self.A = A
        self.A_inv = np.linalg.inv(A)
        self.log_det_A = math.log(abs(float(exact.det(transform))))
        self.h = h
        self.origin = np.asarray(origin, dtype=float)
        self.walls = walls
        self.nominal_n = nominal_n
        self.L = nominal_n * h / 2
        self.tail_rel = tail_rel
        self._build_nodes()
        self.wall_nodes = [np.nonzero(self.Z @ np.array(d) == B)[0] for d, B in walls]
        self.state = potential.dual_state(self.points)
        self.u0 = self.state.u0
        self.hess0 = self.state.hess
        self.v = self.state.v
        self._build_operators()
        self.weights = self._weights()

    # construction ------------------------------------------------------
    @classmethod
    def build(cls, vpoly: VPolytope, volume: Fraction, N: int | None = None,
              L: float | None = None, tail_rel: float = 1e-10) -> "Grid":
        m = vpoly.hpoly.dim
        if N is None:
            N = 2048 if m == 1 else 64
        if N < MIN_NODES:
            raise ValueError(f"need at least {MIN_NODES} nodes per axis, got {N}")
        if m == 1:
            return cls._build_1d(vpoly, volume, N, L, tail_rel)
        if m == 2:
            return cls._build_2d(vpoly, volume, N, L, tail_rel)
        raise UnsupportedGeometry("the solver handles m = 1 and m = 2", m=m)

    @classmethod
    def _build_1d(cls, vpoly, volume, N, L, tail_rel):
        K = KahlerPotential(vpoly, volume)
        user_L = L is not None
        if L is None:
            L = K.tail_radius(tail_rel)
        ident = [[Fraction(1)]]
        bary = _barycenter(vpoly)
        grid = cls(K, float(volume), bary, ident, 2 * L / N, np.array([-L]),
                   [((-1,), 0), ((1,), N)], N, tail_rel)
        if user_L:
            grid._check_tails()
        return grid

    @classmethod
    def _build_2d(cls, vpoly, volume, N, L, tail_rel):
        A = lattice_alignment(vpoly.hpoly)
        hp = vpoly.hpoly.transformed(A)
        vp = enumerate_vertices(hp)
        vol = abs(exact.det(A)) * Fraction(volume)
        K = KahlerPotential(vp, vol)
        walls, h = _place_walls(K, hp, N, tail_rel, L)
        grid = cls(K, float(vol), _barycenter(vp), A, h, np.zeros(2), walls, N, tail_rel)
        if L is not None:
            grid._check_tails()
        return grid

    def _check_tails(self):
        rho = np.exp(-self.k * self.u0)
        worst = max(rho[idx].max() for idx in self.wall_nodes)
        if worst > self.tail_rel * (1 + 1e-9):
            raise GridTooSmall("density on the grid boundary exceeds the tail tolerance; "
                               "use a larger box", boundary_density=worst, tol=self.tail_rel)

    def _build_nodes(self):
        span = max(abs(B) for _, B in self.walls) + 2
        if self.m == 1:
            z = np.arange(-span, span + 1)[:, None]
        else:
            ax = np.arange(-2 * span, 2 * span + 1)
            z = np.stack(np.meshgrid(ax, ax, indexing="ij"), -1).reshape(-1, 2)
        inside = np.ones(len(z), dtype=bool)
        for d, B in self.walls:
            inside &= z @ np.array(d) <= B
        self.Z = z[inside]
        self.n = len(self.Z)
        self.lo = self.Z.min(axis=0)
        shape = self.Z.max(axis=0) - self.lo + 1
        self._index = -np.ones(shape, dtype=np.int64)
        self._index[tuple((self.Z - self.lo).T)] = np.arange(self.n)
        self.points = self.origin + self.h * self.Z

    def neighbor(self, offset: Sequence[int]) -> np.ndarray:
        """Index of the (reflected) node at ``z + offset`` for every node ``z``."""
        z = self.Z + np.asarray(offset)
        for _ in range(16):
            out = np.zeros(len(z), dtype=bool)
            for d, B in self.walls:
                d = np.array(d)
                e = z @ d - B
                bad = e > 0
                if bad.any():
                    out |= bad
                    z[bad] -= (2 * e[bad] // (d @ d))[:, None] * d
            if not out.any():
                break
        else:
            raise RuntimeError("reflection did not land inside the grid")
        return self._index[tuple((z - self.lo).T)]

    def _second(self, direction, coeffs: Sequence[float]) -> sp.csr_matrix:
        # coeffs[j] multiplies phi(z + j*direction) for j in -r..r
        r = (len(coeffs) - 1) // 2
        rows, cols, vals = [], [], []
        idx = np.arange(self.n)
        for j, cf in zip(range(-r, r + 1), coeffs):
            if cf == 0:
                continue
            nb = idx if j == 0 else self.neighbor(j * np.asarray(direction))
            rows.append(idx)
            cols.append(nb)
            vals.append(np.full(self.n, cf))
        mat = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                            shape=(self.n, self.n))
        return mat / self.h ** 2

    def _build_operators(self):
        if self.m == 1:
            self.D = self._second((1,), [-1 / 12, 16 / 12, -30 / 12, 16 / 12, -1 / 12])
            self.Lap = self.D
            self.stencil_sum = 64 / 12
        else:
            dxx = self._second((1, 0), [1, -2, 1])
            dyy = self._second((0, 1), [1, -2, 1])
            ddd = self._second((1, 1), [1, -2, 1])
            self.Dxx, self.Dyy = dxx, dyy
            self.Dxy = ((ddd - dxx - dyy) * 0.5).tocsr()
            self.Lap = (dxx + dyy).tocsr()
            self.stencil_sum = 8.0

    def _weights(self) -> np.ndarray:
        w = np.full(self.n, self.h ** self.m)
        if self.m == 1:
            for idx in self.wall_nodes:
                w[idx] *= 0.5
            return w
        corners = np.array([[-.5, -.5], [.5, -.5], [.5, .5], [-.5, .5]])
        boundary = np.zeros(self.n, dtype=bool)
        for d, B in self.walls:
            reach = 0.5 * (abs(d[0]) + abs(d[1]))
            boundary |= self.Z @ np.array(d) + reach > B
        for i in np.nonzero(boundary)[0]:
            w[i] = self.h ** 2 * _clipped_area(self.Z[i] + corners, self.walls)
        return w

    # discrete Hessian --------------------------------------------------
    def hessian(self, phi: np.ndarray) -> tuple[np.ndarray, ...]:
        """Entries of ``D^2(u0 + phi)``: ``(a,)`` for m = 1, ``(a, b, c)`` for m = 2."""
        if self.m == 1:
            return (self.hess0[:, 0, 0] + self.D @ phi,)
        return (self.hess0[:, 0, 0] + self.Dxx @ phi,
                self.hess0[:, 0, 1] + self.Dxy @ phi,
                self.hess0[:, 1, 1] + self.Dyy @ phi)

    @staticmethod
    def eig_bounds(H) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """``(det, lambda_min, lambda_max)`` of the discrete Hessian."""
        if len(H) == 1:
            return H[0], H[0], H[0]
        a, b, c = H
        mid = 0.5 * (a + c)
        rad = np.sqrt(0.25 * (a - c) ** 2 + b * b)
        return a * c - b * b, mid - rad, mid + rad

    def det_jacobian(self, H) -> sp.csr_matrix:
        if self.m == 1:
            return self.D
        a, b, c = H
        return (sp.diags(c) @ self.Dxx + sp.diags(a) @ self.Dyy
                - sp.diags(2 * b) @ self.Dxy).tocsr()

    # coordinates -------------------------------------------------------
    def to_original(self, x_aligned: np.ndarray) -> np.ndarray:
        """``x = A^T x'``."""
        return np.asarray(x_aligned) @ self.A

    def vector_to_original(self, v_aligned: np.ndarray) -> np.ndarray:
        """Polytope-side vectors map by ``A^{-1}``."""
        return np.asarray(v_aligned) @ self.A_inv.T

    @property
    def m_shift(self) -> float:
        return self.log_det_A / (self.m + 1)

    def wall_fractions(self, x_aligned: np.ndarray) -> np.ndarray:
        """``<d, x'> / b`` for every wall; 1 means on the wall."""
        out = []
        for d, B in self.walls:
            d = np.array(d, dtype=float)
            b = self.h * B + d @ self.origin
            out.append((d @ x_aligned) / b)
        return np.array(out)

    def describe(self) -> dict:
        return {
            "m": self.m,
            "nodes": int(self.n),
            "nominal_n": int(self.nominal_n),
            "L": self.L,
            "h": self.h,
            "walls": [{"direction": list(d), "bound": int(B)} for d, B in self.walls],
            "transform": [[exact.fmt(x) for x in row] for row in self.transform],
            "tail_rel": self.tail_rel,
        }


def _barycenter(vp: VPolytope) -> np.ndarray:
    from .polytope import volume_barycenter
    return np.array([float(x) for x in volume_barycenter(vp).barycenter])


def _clipped_area(poly: np.ndarray, walls) -> float:
    pts = [tuple(p) for p in poly]
    for d, B in walls:
        out = []
        for a, b in zip(pts, pts[1:] + pts[:1]):
            fa = d[0] * a[0] + d[1] * a[1] - B
            fb = d[0] * b[0] + d[1] * b[1] - B
            if fa <= 0:
                out.append(a)
            if fa * fb < 0:
                s = fa / (fa - fb)
                out.append((a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])))
        pts = out
        if not pts:
            return 0.0
    return 0.5 * abs(sum(a[0] * b[1] - b[0] * a[1] for a, b in zip(pts, pts[1:] + pts[:1])))


WALL_CLEARANCE = 4.0


def _place_walls(K: KahlerPotential, hp: HPolytope, N: int, tail_rel: float,
                 L: float | None):
    """Walls ``<d_a, x> <= beta_a`` perpendicular to the outward facet rays.

    ``u0`` grows like the support function of the polytope, whose sublevel
    set ``{h <= T}`` is ``T`` times the polar polygon with vertices
    ``-n_b / c_b``. Each wall clears its own polar vertex by ``W`` and every
    other one by ``2W``, so the strip along each ray ends on its own wall
    instead of in a corner. ``T`` grows until the density on the walls is
    below ``tail_rel``; with ``L`` given the widest wall sits at ``L`` instead.
    """
    normals = [np.array([float(x) for x in n]) for n in hp.normals]
    offsets = [float(c) for c in hp.offsets]
    dirs = [tuple(int(x) for x in exact.primitive(exact.scale(-1, n))) for n in hp.normals]
    W = WALL_CLEARANCE

    def betas(T):
        out = {}
        for a, (n, d) in enumerate(zip(normals, dirs)):
            nh = n / np.linalg.norm(n)
            beta = max(T * (nh @ nb) / cb + (W if b == a else 2 * W)
                       for b, (nb, cb) in enumerate(zip(normals, offsets)))
            out[d] = max(out.get(d, -np.inf), beta)
        return out

    def lattice(T, scale=None):
        bt = betas(T)
        h = 2 * (scale or max(bt.values())) / N
        return [(d, int(math.ceil(b * math.hypot(*d) / h))) for d, b in bt.items()], h

    if L is not None:
        T = 1.0
        for _ in range(200):
            if max(betas(T).values()) >= L:
                break
            T *= 1.05
        return lattice(T, L)
    T = math.log(1 / tail_rel) / 6
    for _ in range(200):
        walls, h = lattice(T)
        worst = max(float(np.max(-6 * K.dual_state(h * _wall_points(walls, d, B)).u0))
                    for d, B in walls)
        if worst <= math.log(tail_rel):
            return walls, h
        T *= 1.05
    raise GridTooSmall("wall placement did not converge")


def _wall_points(walls, d, B):
    # lattice points on the line <d, z> = B, inside the other walls
    d = np.array(d)
    step = np.array([-d[1], d[0]])
    base = np.array([B * d[0], 0]) if d[0] else np.array([0, B * d[1]])
    span = 4 * max(abs(b) for _, b in walls) + 4
    s = np.arange(-span, span + 1)
    pts = base + s[:, None] * step
    ok = np.ones(len(pts), dtype=bool)
    for dd, bb in walls:
        ok &= pts @ np.array(dd) <= bb
    return pts[ok]


# ---------------------------------------------------------------------------
# states

@dataclass
class PathState:
    t: float
    phi: np.ndarray = field(repr=False)
    compat_constant: float
    x_t: tuple[float, ...]
    m_t: float
    sup_phi: float
    gradient_image_point: tuple[float, ...]
    facet_distances: tuple[float, ...]
    min_facet_distance: float
    argmin_facet: int
    mass_residual: float
    moment_residual: float
    tail_bound: float
    newton_iterations: int
    escaped: bool
    flat_minimum: bool


@dataclass(frozen=True)
class ThresholdBracket:
    t_lo: float
    t_hi: float | None
    R_numeric: float | None
    reason: str
    detail: str = ""


@dataclass
class TraceRow:
    t: float
    accepted: bool
    reason: str
    state: PathState | None


@dataclass
class PathResult:
    grid: Grid
    states: list[PathState]
    trace: list[TraceRow]
    bracket: ThresholdBracket


# ---------------------------------------------------------------------------
# Newton

@dataclass
class _Eval:
    H: tuple
    det: np.ndarray
    lmin: np.ndarray
    lmax: np.ndarray
    rho: np.ndarray
    g: float
    F: np.ndarray
    tau: np.ndarray


def _evaluate(grid: Grid, t: float, phi: np.ndarray, c: float, cfg: SolverConfig) -> _Eval:
    H = grid.hessian(phi)
    det, lmin, lmax = grid.eig_bounds(H)
    scale = 1.0 if grid.m == 1 else max(1.0, float(np.max(H[0] + H[2])))
    g_round = 8 * EPS * max(1.0, float(np.abs(phi).max())) * grid.stencil_sum / grid.h ** 2 * scale
    g = max(g_round, cfg.floor)
    rho = np.exp(-grid.k * (grid.u0 + t * phi + c))
    F = np.log(np.maximum(det + g, 1e-300)) - np.log(rho + g)
    tau = g_round / (np.maximum(det, 0.0) + g)
    return _Eval(H, det, lmin, lmax, rho, g, F, tau)


def _newton(grid: Grid, t: float, phi: np.ndarray, c: float, cfg: SolverConfig):
    n = grid.n
    ev = _evaluate(grid, t, phi, c, cfg)
    frozen = ev.lmax < cfg.freeze_tol
    active = ~frozen
    if np.any(ev.lmin[active] <= -ev.g):
        raise NonConvexIterate("initial iterate is not convex", t=t)

    def merit(e):
        excess = np.maximum(np.abs(e.F) - np.maximum(cfg.newton_tol, e.tau), 0.0)
        return float(np.sum(excess[active] ** 2))

    for it in range(cfg.max_newton + 1):
        f0 = merit(ev)
        if f0 == 0.0:
            return phi, c, it
        if it == cfg.max_newton:
            break
        J = sp.diags(1 / (ev.det + ev.g)) @ grid.det_jacobian(ev.H)
        J = J + sp.diags(grid.k * t * ev.rho / (ev.rho + ev.g))
        if frozen.any():
            J = sp.diags(active.astype(float)) @ J + sp.diags(frozen.astype(float)) @ grid.Lap
        rhs = -np.where(active, ev.F, 0.0)
        J = J.tocsr()
        if t == 0:
            col = np.where(active, grid.k * ev.rho / (ev.rho + ev.g), 0.0)
            row = grid.weights * ev.rho
            J = sp.bmat([[J, sp.csr_matrix(col[:, None])],
                         [sp.csr_matrix(row[None, :]), None]]).tocsr()
            rhs = np.concatenate([rhs, [-(row @ phi)]])
        scale = 1.0 / abs(J).max(axis=1).toarray().ravel()
        with np.errstate(all="ignore"):
            step = spla.spsolve((sp.diags(scale) @ J).tocsc(), rhs * scale)
        if not np.all(np.isfinite(step)):
            raise NewtonDiverged("singular Newton system", t=t, iteration=it)
        dphi = step[:n]
        dc = step[n] if t == 0 else 0.0
        alpha = 1.0
        saw_convex = False
        while alpha >= cfg.min_alpha:
            p2, c2 = phi + alpha * dphi, c + alpha * dc
            e2 = _evaluate(grid, t, p2, c2, cfg)
            convex = (np.all(e2.lmin[active] > -e2.g) and np.all(e2.det[active] > -e2.g))
            if convex:
                saw_convex = True
                if merit(e2) <= (1 - 1e-4 * alpha) * f0:
                    break
            alpha *= 0.5
        else:
            cls = NewtonDiverged if saw_convex else NonConvexIterate
            raise cls("line search stalled", t=t, iteration=it,
                      max_residual=float(np.abs(ev.F[active]).max()))
        phi, c, ev = p2, c2, e2
    raise NewtonDiverged("Newton iteration limit reached", t=t,
                         max_residual=float(np.abs(ev.F[active]).max()))


def solve_step(grid: Grid, t: float, phi_init: np.ndarray | None = None,
               config: SolverConfig | None = None) -> PathState:
    """Solve the equation at ``t`` by damped Newton from ``phi_init``.

    At ``t = 0`` the equation only fixes ``phi`` up to a constant and the
    discrete problem is only compatible up to a small constant ``c``. Both are
    handled by a bordered system: ``c`` is an extra unknown added to ``u0`` in
    the density, and ``phi`` is normalized by ``sum w rho phi = 0``.
    """
    cfg = config or SolverConfig()
    if not 0 <= t < 1:
        raise ValueError("t must lie in [0, 1)")
    phi = np.zeros(grid.n) if phi_init is None else np.array(phi_init, dtype=float)
    phi, c, iters = _newton(grid, float(t), phi, 0.0, cfg)
    return _make_state(grid, float(t), phi, c, iters, cfg)


def _make_state(grid: Grid, t, phi, c, iters, cfg: SolverConfig) -> PathState:
    w = grid.u0 + t * phi
    i = int(np.argmin(w))
    x_al = grid.points[i].astype(float).copy()
    m_t = float(w[i])
    H = tuple(hh[i] for hh in grid.hessian(phi))
    flat = False
    grad = _central_gradient(grid, w, i)
    if grid.m == 1:
        hw = np.array([[grid.hess0[i, 0, 0] + t * (H[0] - grid.hess0[i, 0, 0])]])
    else:
        h0 = grid.hess0[i]
        hw = h0 + t * (np.array([[H[0], H[1]], [H[1], H[2]]]) - h0)
    lam = np.linalg.eigvalsh(hw)
    if lam[0] > 0:
        delta = -np.linalg.solve(hw, grad)
        if np.max(np.abs(delta)) <= grid.h:
            x_al = x_al + delta
            m_t = float(w[i] + 0.5 * grad @ delta)
    flat = bool(lam[0] < 1e-8)
    st = grid.K.dual_state(x_al[None, :])
    dist = np.exp(st.log_slack[0])
    v = grid.vector_to_original(st.v[0])
    x = grid.to_original(x_al)
    mass, moment, tail = _identities(grid, t, phi)
    escaped = bool(np.any(grid.wall_fractions(grid.points[i]) > 1 - cfg.escape_margin))
    return PathState(
        t=t, phi=phi, compat_constant=float(c),
        x_t=tuple(float(a) for a in x), m_t=m_t + grid.m_shift,
        sup_phi=float(np.abs(phi).max()),
        gradient_image_point=tuple(float(a) for a in v),
        facet_distances=tuple(float(a) for a in dist),
        min_facet_distance=float(dist.min()), argmin_facet=int(np.argmin(dist)),
        mass_residual=mass, moment_residual=moment, tail_bound=tail,
        newton_iterations=iters, escaped=escaped, flat_minimum=flat)


def _central_gradient(grid: Grid, w, i):
    g = np.zeros(grid.m)
    for j in range(grid.m):
        e = np.zeros(grid.m, dtype=int)
        e[j] = 1
        plus = grid.neighbor(e)[i]
        minus = grid.neighbor(-e)[i]
        g[j] = (w[plus] - w[minus]) / (2 * grid.h)
    return g


def _identities(grid: Grid, t: float, phi: np.ndarray) -> tuple[float, float, float]:
    rho = np.exp(-grid.k * (grid.u0 + t * phi))
    mass = grid.weights @ rho
    moment = (grid.weights * rho) @ grid.v
    # Beyond each wall the density decays like exp(-k s <v, n>) in the normal
    # distance s, since phi has zero normal derivative there.
    tail_mass = 0.0
    tail_moment = np.zeros(grid.m)
    for (d, _), idx in zip(grid.walls, grid.wall_nodes):
        dn = np.array(d, dtype=float) / np.linalg.norm(d)
        slope = grid.v[idx] @ dn
        spacing = 1.0 if grid.m == 1 else grid.h * np.linalg.norm(d)
        ok = slope > 0
        contrib = np.where(ok, rho[idx] * spacing / (grid.k * np.where(ok, slope, 1.0)), 0.0)
        tail_mass += contrib.sum()
        tail_moment += contrib @ grid.v[idx]
    mass_res = abs((mass + tail_mass) / grid.volume - 1)
    mom = (moment + tail_moment) / grid.volume + t / (1 - t) * grid.barycenter
    mom_res = float(np.abs(grid.vector_to_original(mom)).max())
    return float(mass_res), mom_res, float(tail_mass / grid.volume)


def identities_check(grid: Grid, state: PathState) -> dict:
    """Mass and moment identities of ``rho_t = exp(-(2m+2)(u0 + t phi))``:

    ``int rho_t = Vol`` and ``int Du0 rho_t = -t/(1-t) Vol P_c``.
    """
    mass, moment, tail = _identities(grid, state.t, state.phi)
    return {"t": state.t, "mass_residual": mass, "moment_residual": moment, "tail_bound": tail}


# ---------------------------------------------------------------------------
# path

def _attempt(grid: Grid, t: float, phi: np.ndarray, cfg: SolverConfig):
    try:
        state = solve_step(grid, t, phi, cfg)
    except NonConvexIterate as err:
        return None, NEWTON, f"non-convex iterate: {err}"
    except NewtonDiverged as err:
        return None, NEWTON, str(err)
    mass_tol, mom_tol = cfg.identity_tols(grid.m)
    if state.sup_phi > cfg.sup_phi_cap:
        return state, SUP_CAP, f"sup |phi| = {state.sup_phi:.3e}"
    if state.escaped:
        return state, ESCAPE, "minimum point left the resolved region"
    if state.mass_residual > mass_tol or state.moment_residual > mom_tol:
        return state, IDENTITY, (
            f"mass {state.mass_residual:.2e}, moment {state.moment_residual:.2e}")
    return state, "", ""


def continuity_path(grid: Grid, config: SolverConfig | None = None,
                    t_max: float | None = None) -> PathResult:
    """Follow the path from ``t = 0`` and bracket the first failure.

    Steps of ``t_step`` are taken until one fails; the failing interval is then
    bisected down to ``bracket_tol`` and ``R_numeric`` is its midpoint. If the
    cap ``t_cap`` is reached the bracket is open and ``R_numeric = 1``. A
    shorter run stopped by ``t_max`` makes no claim about ``R``.
    """
    cfg = config or SolverConfig()
    cap = cfg.t_cap if t_max is None else min(cfg.t_cap, t_max)
    state, reason, detail = _attempt(grid, 0.0, np.zeros(grid.n), cfg)
    if state is None or reason:
        raise GridTooSmall(f"no admissible state at t = 0 ({reason}: {detail}); "
                           "enlarge or refine the grid", reason=reason)
    states = [state]
    trace = [TraceRow(0.0, True, "", state)]
    t = 0.0
    while True:
        if t >= cap - 1e-12:
            if cap < cfg.t_cap:
                bracket = ThresholdBracket(t, None, None, T_MAX)
            else:
                bracket = ThresholdBracket(t, None, 1.0, T_CAP)
            break
        t_try = min(round(t + cfg.t_step, 12), cap)
        new, reason, detail = _attempt(grid, t_try, states[-1].phi, cfg)
        if not reason:
            states.append(new)
            trace.append(TraceRow(t_try, True, "", new))
            t = t_try
            continue
        trace.append(TraceRow(t_try, False, reason, new))
        lo, hi = t, t_try
        while hi - lo > cfg.bracket_tol:
            mid = round(0.5 * (lo + hi), 12)
            new, r, dtl = _attempt(grid, mid, states[-1].phi, cfg)
            if r:
                trace.append(TraceRow(mid, False, r, new))
                hi, reason, detail = mid, r, dtl
            else:
                states.append(new)
                trace.append(TraceRow(mid, True, "", new))
                lo = mid
        bracket = ThresholdBracket(lo, hi, 0.5 * (lo + hi), reason, detail)
        break
    return PathResult(grid, states, trace, bracket)


# ---------------------------------------------------------------------------
# diagnostics

def blowup_diagnostics(result: PathResult, binding_facets: Sequence[int] = ()) -> dict:
    """Summaries of how the path ends.

    Covers the range of ``m_t``, growth of ``|x_t|`` and ``sup |phi|`` with the
    step at which each first exceeds its cap, the facet distances of the last
    gradient image point, and a fit ``u0 + t phi - m_t ~ kappa |x - x_t| - C``.
    """
    states = result.states
    if len(states) < 2:
        raise ValueError("need at least two accepted states")
    s0, last = states[0], states[-1]
    m_vals = np.array([s.m_t for s in states])
    xs = np.array([np.linalg.norm(s.x_t) for s in states])
    sups = np.array([s.sup_phi for s in states])
    x_cap = xs[0] + 1.0
    phi_cap = sups[0] + 1.0
    first_x = _first_above(xs, x_cap)
    first_phi = _first_above(sups, phi_cap)
    gap = None if first_x is None or first_phi is None else abs(first_x - first_phi)
    dists = np.array(last.facet_distances)
    low = dists.min()
    argmin = tuple(int(a) for a in np.nonzero(dists <= low * (1 + 1e-6))[0])
    kappa, offset = _kappa_fit(result.grid, last)
    mins = [s.min_facet_distance for s in states]
    return {
        "m_t": {"t0": float(m_vals[0]), "max_abs": float(np.abs(m_vals).max()),
                "ratio_to_t0": float(np.abs(m_vals).max() / abs(m_vals[0]))
                if m_vals[0] != 0 else math.inf},
        "growth": {
            "t": [s.t for s in states],
            "abs_x_t": xs.tolist(),
            "sup_phi": sups.tolist(),
            "x_cap": float(x_cap),
            "phi_cap": float(phi_cap),
            "first_step_x_above_cap": first_x,
            "first_step_phi_above_cap": first_phi,
            "co_blowup_gap": gap,
        },
        "final": {
            "t": last.t,
            "gradient_image_point": list(last.gradient_image_point),
            "facet_distances": dists.tolist(),
            "min_facet_distance": float(low),
            "argmin_facets": list(argmin),
            "binding_facets": list(binding_facets),
            "matches_binding": set(argmin) <= set(binding_facets) if binding_facets else None,
            "min_distance_decreasing": bool(all(b <= a for a, b in zip(mins[-4:], mins[-3:]))),
        },
        "linear_growth": {"kappa": kappa, "offset": offset},
        "flat_minimum": any(s.flat_minimum for s in states),
    }


def _first_above(values: np.ndarray, cap: float):
    hits = np.nonzero(values > cap)[0]
    return int(hits[0]) if len(hits) else None


def _kappa_fit(grid: Grid, state: PathState) -> tuple[float, float]:
    w = grid.u0 + state.t * state.phi + grid.m_shift
    r = np.linalg.norm(grid.to_original(grid.points) - np.array(state.x_t), axis=1)
    far = r >= 0.5 * r.max()
    slope, intercept = np.polyfit(r[far], w[far] - state.m_t, 1)
    return float(slope), float(-intercept)


# ---------------------------------------------------------------------------
# trace output

def trace_columns(m: int) -> list[str]:
    return (["t", "accepted", "reason", "newton_iterations", "sup_phi", "m_t"]
            + [f"x_t_{j + 1}" for j in range(m)]
            + [f"v_t_{j + 1}" for j in range(m)]
            + ["min_facet_distance", "argmin_facet", "mass_residual", "moment_residual"])


def trace_records(result: PathResult) -> list[list[str]]:
    m = result.grid.m
    out = []
    for row in result.trace:
        s = row.state
        rec = [_num(row.t), "1" if row.accepted else "0", row.reason or "ok"]
        if s is None:
            rec += [""] * (len(trace_columns(m)) - 3)
        else:
            rec += [str(s.newton_iterations), _num(s.sup_phi), _num(s.m_t)]
            rec += [_num(a) for a in s.x_t] + [_num(a) for a in s.gradient_image_point]
            rec += [_num(s.min_facet_distance), str(s.argmin_facet),
                    _num(s.mass_residual), _num(s.moment_residual)]
        out.append(rec)
    return out


def _num(x: float) -> str:
    return f"{x:.12e}"


def trace_csv(result: PathResult) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(trace_columns(result.grid.m))
    wr.writerows(trace_records(result))
    return buf.getvalue()


def trace_dat(result: PathResult) -> str:
    """Whitespace-separated table with a ``#`` header, accepted rows only."""
    cols = trace_columns(result.grid.m)
    keep = [i for i, c in enumerate(cols) if c not in ("accepted", "reason")]
    lines = ["# " + " ".join(cols[i] for i in keep)]
    for row, rec in zip(result.trace, trace_records(result)):
        if row.accepted:
            lines.append(" ".join(rec[i] for i in keep))
    return "\n".join(lines) + "\n"
