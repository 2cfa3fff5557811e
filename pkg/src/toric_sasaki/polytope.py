"""Exact convex geometry of the transverse moment polytope.

Polytopes are given by facets ``l_a(v) = <v, n_a> + c_a >= 0`` with rational data.
Vertex enumeration and triangulation are brute force, which is fine for the
dimensions used here (m <= 3, a handful of facets).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from itertools import combinations
from math import factorial
from typing import Sequence

from . import exact
from .errors import (
    DegenerateTriangulation,
    EmptyPolytope,
    InteriorityViolation,
    NoBindingFacet,
    NotCollinear,
    Unbounded,
)
from .exact import Vector


@dataclass(frozen=True)
class HPolytope:
    dim: int
    normals: tuple[Vector, ...]
    offsets: tuple[Fraction, ...]

    @classmethod
    def from_facets(cls, facets: Sequence[tuple[Sequence, object]]) -> "HPolytope":
        """Build from ``(normal, offset)`` pairs, dropping exact duplicates with a warning."""
        seen: list[tuple[Vector, Fraction]] = []
        for normal, offset in facets:
            key = (exact.vec(normal), Fraction(offset))
            if key in seen:
                warnings.warn(f"duplicate facet {exact.fmt_vec(key[0])} dropped", stacklevel=2)
                continue
            seen.append(key)
        dim = len(seen[0][0])
        return cls(dim, tuple(n for n, _ in seen), tuple(c for _, c in seen))

    def slack(self, a: int, v: Sequence[Fraction]) -> Fraction:
        return exact.dot(self.normals[a], v) + self.offsets[a]

    def slacks(self, v: Sequence[Fraction]) -> tuple[Fraction, ...]:
        return tuple(self.slack(a, v) for a in range(len(self.normals)))

    def contains(self, v: Sequence[Fraction], strict: bool = False) -> bool:
        s = self.slacks(v)
        return all(x > 0 for x in s) if strict else all(x >= 0 for x in s)

    def transformed(self, a: Sequence[Sequence[Fraction]]) -> "HPolytope":
        """Image under ``v -> A v``; normals transform by the inverse transpose."""
        inv_t = exact.transpose(exact.inverse(a))
        return HPolytope(self.dim, tuple(exact.matvec(inv_t, n) for n in self.normals),
                         self.offsets)


@dataclass(frozen=True)
class VPolytope:
    hpoly: HPolytope
    vertices: tuple[Vector, ...]
    active: tuple[frozenset[int], ...]


@dataclass(frozen=True)
class PolytopeSummary:
    volume: Fraction
    barycenter: Vector
    futaki_direction: Vector


@dataclass(frozen=True)
class RReport:
    R: Fraction
    s_star: Fraction | None  # None encodes s* = infinity
    Q: Vector | None
    binding_facets: tuple[int, ...]


def _recession_rays(h: HPolytope) -> list[Vector]:
    m = h.dim
    if exact.rank(h.normals) < m:
        return [exact.nullspace(h.normals, m)[0]]
    rays = []
    for subset in combinations(h.normals, m - 1):
        kernel = exact.nullspace(list(subset), m)
        if len(kernel) != 1:
            continue
        for cand in (kernel[0], exact.scale(-1, kernel[0])):
            if all(exact.dot(cand, n) >= 0 for n in h.normals):
                rays.append(cand)
    return rays


def enumerate_vertices(h: HPolytope) -> VPolytope:
    rays = _recession_rays(h)
    if rays:
        raise Unbounded("polytope is unbounded", direction=exact.fmt_vec(rays[0]))
    found: dict[Vector, frozenset[int]] = {}
    for subset in combinations(range(len(h.normals)), h.dim):
        rows = [h.normals[a] for a in subset]
        if exact.rank(rows) < h.dim:
            continue
        v = exact.solve(rows, [-h.offsets[a] for a in subset])
        if v is None or v in found or not h.contains(v):
            continue
        found[v] = frozenset(a for a in range(len(h.normals)) if h.slack(a, v) == 0)
    if not found:
        raise EmptyPolytope("no feasible point")
    verts = sorted(found)
    if _affine_rank(verts) < h.dim:
        raise EmptyPolytope("polytope is not full-dimensional")
    return VPolytope(h, tuple(verts), tuple(found[v] for v in verts))


def _affine_rank(points: Sequence[Vector]) -> int:
    if len(points) <= 1:
        return 0
    return exact.rank([exact.sub(p, points[0]) for p in points[1:]])


def triangulate(vp: VPolytope) -> list[tuple[int, ...]]:
    """Pulling triangulation: cone each face from its smallest vertex index."""
    n_facets = len(vp.hpoly.normals)
    facet_verts = [frozenset(i for i, act in enumerate(vp.active) if a in act)
                   for a in range(n_facets)]

    @lru_cache(maxsize=None)
    def tri(face: frozenset[int], k: int) -> tuple[tuple[int, ...], ...]:
        if k == 0:
            return ((next(iter(face)),),)
        apex = min(face)
        subfaces = set()
        for fv in facet_verts:
            sub = face & fv
            if sub != face and apex not in sub and sub:
                if _affine_rank([vp.vertices[i] for i in sorted(sub)]) == k - 1:
                    subfaces.add(sub)
        out = []
        for sub in sorted(subfaces, key=sorted):
            out.extend(s + (apex,) for s in tri(sub, k - 1))
        return tuple(out)

    return list(tri(frozenset(range(len(vp.vertices))), vp.hpoly.dim))


def volume_barycenter(vp: VPolytope) -> PolytopeSummary:
    m = vp.hpoly.dim
    total = Fraction(0)
    moment = [Fraction(0)] * m
    for simplex in triangulate(vp):
        pts = [vp.vertices[i] for i in simplex]
        vol = abs(exact.det([exact.sub(p, pts[0]) for p in pts[1:]])) / factorial(m)
        if vol == 0:
            raise DegenerateTriangulation("zero-volume simplex", simplex=simplex)
        total += vol
        for k in range(m):
            moment[k] += vol * sum(p[k] for p in pts) / (m + 1)
    if total <= 0:
        raise DegenerateTriangulation("polytope has zero volume")
    bary = tuple(x / total for x in moment)
    return PolytopeSummary(total, bary, exact.scale(-1, bary))


def compute_R(h: HPolytope, barycenter: Sequence[Fraction]) -> RReport:
    """Greatest t with ``-t/(1-t) P_c`` in the polytope, and the boundary point it hits."""
    pc = exact.vec(barycenter)
    if not all(c > 0 for c in h.offsets):
        raise InteriorityViolation("origin is not interior")
    if not h.contains(pc, strict=True):
        raise InteriorityViolation("barycenter is not interior", barycenter=exact.fmt_vec(pc))
    if exact.is_zero(pc):
        return RReport(Fraction(1), None, None, ())
    ratios = {}
    for a, n in enumerate(h.normals):
        p = exact.dot(pc, n)
        if p > 0:
            ratios[a] = h.offsets[a] / p
    if not ratios:
        raise NoBindingFacet("no facet faces the ray from the barycenter through O")
    s_star = min(ratios.values())
    binding = tuple(sorted(a for a, s in ratios.items() if s == s_star))
    return RReport(s_star / (1 + s_star), s_star, exact.scale(-s_star, pc), binding)


def ray_ratio_crosscheck(barycenter: Sequence[Fraction], q: Sequence[Fraction]) -> Fraction:
    """``|OQ| / |P_c Q|`` from the affine parameter of ``Q`` along the ray ``P_c -> O``.

    On the ray ``P_c + tau (O - P_c)``, ``O`` sits at ``tau = 1``, so the ratio of
    collinear lengths is ``(tau - 1) / tau``.
    """
    pc, q = exact.vec(barycenter), exact.vec(q)
    if exact.is_zero(pc):
        raise ValueError("barycenter coincides with O; the ray is undefined")
    one_minus_tau = None
    for p, x in zip(pc, q, strict=True):
        if p == 0:
            if x != 0:
                raise NotCollinear("Q is off the line through P_c and O")
            continue
        r = x / p
        if one_minus_tau is None:
            one_minus_tau = r
        elif r != one_minus_tau:
            raise NotCollinear("Q is off the line through P_c and O")
    tau = 1 - one_minus_tau
    if tau < 1:
        raise NotCollinear("Q is not beyond O on the ray", tau=tau)
    if tau == 1:
        raise ValueError("Q coincides with O")
    return (tau - 1) / tau


def futaki_vector(summary: PolytopeSummary) -> Vector:
    """``-Vol * P_c``: the Futaki pairing vector up to a positive constant."""
    return exact.scale(-summary.volume, summary.barycenter)
