"""Moment-cone data of a toric Sasaki manifold and its transverse reduction.

Everything in this module is exact rational arithmetic.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations
from math import gcd
from typing import Sequence

from . import exact
from .errors import (
    DegenerateCone,
    EmptyCone,
    InconsistentChernCondition,
    InputError,
    InternalNormalizationError,
    ReebNotPositive,
    ReebSignError,
)
from .exact import Vector


@dataclass(frozen=True)
class MomentCone:
    """Facet normals ``lambda_a`` of the moment cone plus the Reeb vector ``xi``.

    The cone is ``{y : <y, lambda_a> >= 0 for all a}`` in ``R^(m+1)``.
    """

    m: int
    normals: tuple[Vector, ...]
    reeb: Vector

    def __post_init__(self):
        normals = tuple(exact.vec(n) for n in self.normals)
        reeb = exact.vec(self.reeb)
        object.__setattr__(self, "normals", normals)
        object.__setattr__(self, "reeb", reeb)
        if self.m < 1:
            raise InputError("m must be >= 1", m=self.m)
        n = self.m + 1
        if len(reeb) != n:
            raise InputError(f"reeb vector must have length {n}", reeb=reeb)
        if len(normals) < n:
            raise InputError(f"need at least m+1={n} facet normals, got {len(normals)}")
        for a, lam in enumerate(normals):
            if len(lam) != n:
                raise InputError(f"normal {a} must have length {n}", normal=lam)
            if any(x.denominator != 1 for x in lam):
                raise InputError(f"normal {a} is not an integer vector", normal=lam)
            if exact.is_zero(lam):
                raise InputError(f"normal {a} is zero")
            g = gcd(*(int(x) for x in lam))
            if g != 1:
                warnings.warn(f"facet normal {a} = {exact.fmt_vec(lam)} is not primitive",
                              stacklevel=3)

    @property
    def d(self) -> int:
        return len(self.normals)

    def with_reeb(self, reeb: Sequence) -> "MomentCone":
        return MomentCone(self.m, self.normals, exact.vec(reeb))


@dataclass(frozen=True)
class TransverseBasis:
    """A basis of ``h = ker(gamma)`` and coordinates with respect to it."""

    basis: tuple[Vector, ...]

    def coords(self, x: Sequence[Fraction]) -> Vector:
        """Coordinates of ``x`` (which must lie in the span) in this basis."""
        cols = exact.transpose(self.basis)
        sol = exact.solve(cols, exact.vec(x))
        if sol is None:
            raise InternalNormalizationError("vector does not lie in h", vector=x)
        return sol

    def embed(self, c: Sequence[Fraction]) -> Vector:
        out = [Fraction(0)] * len(self.basis[0])
        for ci, b in zip(c, self.basis, strict=True):
            out = [o + ci * bi for o, bi in zip(out, b)]
        return tuple(out)


@dataclass(frozen=True)
class ReebReport:
    passed: bool
    min_pairing: Fraction
    argmin_ray: Vector
    pairings: tuple[tuple[Vector, Fraction], ...] = field(repr=False)


def solve_gamma(cone: MomentCone) -> Vector:
    """The unique rational ``gamma`` with ``<gamma, lambda_a> = -1`` for every facet."""
    n = cone.m + 1
    if exact.rank(cone.normals) < n:
        raise DegenerateCone("facet normals do not span R^(m+1); gamma is not unique")
    gamma = exact.solve(cone.normals, [Fraction(-1)] * cone.d)
    if gamma is None:
        raise InconsistentChernCondition(
            "no gamma with <gamma, lambda_a> = -1 for all a (c_1(D) != 0)")
    return gamma


def normalize_reeb(cone: MomentCone, gamma: Sequence[Fraction]) -> MomentCone:
    """Rescale the Reeb vector so that ``<gamma, xi> = -(m+1)``."""
    pairing = exact.dot(gamma, cone.reeb)
    if pairing >= 0:
        raise ReebSignError("<gamma, xi> must be negative", pairing=pairing)
    c = Fraction(-(cone.m + 1)) / pairing
    return cone.with_reeb(exact.scale(c, cone.reeb))


def extreme_rays(cone: MomentCone) -> list[Vector]:
    """Generators of the 1-dimensional faces, by brute force over facet subsets.

    Rays are returned as primitive integer vectors in lexicographic order.
    """
    n = cone.m + 1
    rays: set[Vector] = set()
    for subset in combinations(cone.normals, cone.m):
        kernel = exact.nullspace(subset, n)
        if len(kernel) != 1:
            continue
        r = exact.primitive(kernel[0])
        for cand in (r, exact.scale(-1, r)):
            if all(exact.dot(cand, lam) >= 0 for lam in cone.normals):
                rays.add(cand)
    rays_sorted = sorted(rays)
    if not rays_sorted:
        raise EmptyCone("cone has no extreme rays")
    witness = tuple(sum(col, Fraction(0)) for col in zip(*rays_sorted))
    if not all(exact.dot(witness, lam) > 0 for lam in cone.normals):
        raise EmptyCone("cone has empty interior")
    return rays_sorted


def check_reeb(cone: MomentCone) -> ReebReport:
    """Require ``<r, xi> > 0`` on every extreme ray ``r``."""
    rays = extreme_rays(cone)
    pairings = tuple((r, exact.dot(r, cone.reeb)) for r in rays)
    ray, low = min(pairings, key=lambda p: p[1])
    report = ReebReport(low > 0, low, ray, pairings)
    if not report.passed:
        bad = [r for r, p in pairings if p <= 0]
        raise ReebNotPositive(
            f"Reeb vector is not positive on ray {exact.fmt_vec(bad[0])}",
            violating_rays=[exact.fmt_vec(r) for r in bad], min_pairing=low)
    return report


def basis_of_h(gamma: Sequence[Fraction]) -> TransverseBasis:
    """Deterministic integral basis of ``{x : <gamma, x> = 0}``.

    Zero coordinates of ``gamma`` contribute unit vectors; consecutive nonzero
    coordinates ``i < j`` contribute the primitive multiple of
    ``gamma_j e_i - gamma_i e_j``. Each vector has positive leading entry.
    """
    gamma = exact.vec(gamma)
    if exact.is_zero(gamma):
        raise ValueError("gamma must be nonzero")
    n = len(gamma)
    basis = []
    prev = None
    for i, g in enumerate(gamma):
        if g == 0:
            basis.append(tuple(Fraction(int(k == i)) for k in range(n)))
            continue
        if prev is not None:
            v = [Fraction(0)] * n
            v[prev] = g
            v[i] = -gamma[prev]
            v = exact.primitive(v)
            if next(x for x in v if x != 0) < 0:
                v = exact.scale(-1, v)
            basis.append(v)
        prev = i
    return TransverseBasis(tuple(basis))


def transverse_facets(cone: MomentCone, gamma: Sequence[Fraction],
                      basis: TransverseBasis) -> list[tuple[Vector, Fraction]]:
    """Facets ``(lambda_a', 1/(m+1))`` of the transverse polytope in basis coordinates.

    Uses ``lambda_a = lambda_a' + xi/(m+1)``; requires a normalized Reeb vector.
    """
    n = cone.m + 1
    if exact.dot(gamma, cone.reeb) != -n:
        raise InternalNormalizationError("Reeb vector is not normalized",
                                         pairing=exact.dot(gamma, cone.reeb))
    offset = Fraction(1, n)
    facets = []
    for lam in cone.normals:
        prime = exact.sub(lam, exact.scale(offset, cone.reeb))
        if exact.dot(gamma, prime) != 0:
            raise InternalNormalizationError("lambda_a - xi/(m+1) is not in h", vector=prime)
        facets.append((basis.coords(prime), offset))
    return facets
