"""The exact pipeline from a moment cone to ``R``, bundled in one object."""

from __future__ import annotations

from dataclasses import dataclass, field
from decimal import Decimal, localcontext
from fractions import Fraction

from . import exact
from .cone_geometry import (
    MomentCone,
    ReebReport,
    TransverseBasis,
    basis_of_h,
    check_reeb,
    normalize_reeb,
    solve_gamma,
    transverse_facets,
)
from .exact import Vector
from .polytope import (
    HPolytope,
    PolytopeSummary,
    RReport,
    VPolytope,
    compute_R,
    enumerate_vertices,
    futaki_vector,
    ray_ratio_crosscheck,
    volume_barycenter,
)


@dataclass(frozen=True)
class Geometry:
    input_cone: MomentCone
    cone: MomentCone            # Reeb vector normalized to <gamma, xi> = -(m+1)
    gamma: Vector
    reeb_report: ReebReport
    basis: TransverseBasis
    hpoly: HPolytope
    vpoly: VPolytope
    summary: PolytopeSummary
    rreport: RReport
    _cache: dict = field(default_factory=dict, compare=False, repr=False)

    @property
    def m(self) -> int:
        return self.cone.m

    @property
    def futaki(self) -> Vector:
        return futaki_vector(self.summary)

    def crosscheck(self) -> Fraction | None:
        """``|OQ| / |P_c Q|`` computed along the ray, or None when ``P_c = O``."""
        if self.rreport.Q is None:
            return None
        return ray_ratio_crosscheck(self.summary.barycenter, self.rreport.Q)

    def potential(self):
        from .potential import KahlerPotential
        if "potential" not in self._cache:
            self._cache["potential"] = KahlerPotential(self.vpoly, self.summary.volume)
        return self._cache["potential"]

    def grid(self, N: int | None = None, L: float | None = None, tail_rel: float = 1e-10):
        from .ma_solver import Grid
        return Grid.build(self.vpoly, self.summary.volume, N=N, L=L, tail_rel=tail_rel)


def validate(cone: MomentCone) -> tuple[Vector, ReebReport, MomentCone]:
    """Cone-level checks in dependency order; returns ``(gamma, report, normalized cone)``."""
    gamma = solve_gamma(cone)
    report = check_reeb(cone)
    return gamma, report, normalize_reeb(cone, gamma)


def analyze(cone: MomentCone) -> Geometry:
    gamma, report, normalized = validate(cone)
    basis = basis_of_h(gamma)
    hpoly = HPolytope.from_facets(transverse_facets(normalized, gamma, basis))
    vpoly = enumerate_vertices(hpoly)
    summary = volume_barycenter(vpoly)
    rreport = compute_R(hpoly, summary.barycenter)
    return Geometry(cone, normalized, gamma, report, basis, hpoly, vpoly, summary, rreport)


def describe(geo: Geometry) -> dict:
    """Exact data of the geometry as rational strings."""
    rr = geo.rreport
    return {
        "validation": validation_block(geo.gamma, geo.reeb_report, geo.cone),
        "polytope": {
            "basis_of_h": [exact.fmt_vec(b) for b in geo.basis.basis],
            "facets": [{"normal": exact.fmt_vec(n), "offset": exact.fmt(c)}
                       for n, c in zip(geo.hpoly.normals, geo.hpoly.offsets)],
            "vertices": [exact.fmt_vec(v) for v in geo.vpoly.vertices],
            "volume": exact.fmt(geo.summary.volume),
            "barycenter": exact.fmt_vec(geo.summary.barycenter),
            "futaki_vector": exact.fmt_vec(geo.futaki),
        },
        "R": {
            "exact": exact.fmt(rr.R),
            "decimal": display_decimal(rr.R),
            "decimal_note": "display only",
            "s_star": None if rr.s_star is None else exact.fmt(rr.s_star),
            "Q": None if rr.Q is None else exact.fmt_vec(rr.Q),
            "binding_facets": list(rr.binding_facets),
            "ray_ratio": None if rr.Q is None else exact.fmt(geo.crosscheck()),
        },
    }


def validation_block(gamma: Vector, report: ReebReport, cone: MomentCone) -> dict:
    return {
        "passed": report.passed,
        "gamma": exact.fmt_vec(gamma),
        "xi_normalized": exact.fmt_vec(cone.reeb),
        "ray_pairings": [{"ray": exact.fmt_vec(r), "pairing": exact.fmt(p)}
                         for r, p in report.pairings],
        "min_pairing": exact.fmt(report.min_pairing),
    }


def display_decimal(q: Fraction, digits: int = 12) -> str:
    """Correctly rounded decimal with ``digits`` significant digits."""
    if q == 0:
        return "0." + "0" * (digits - 1)
    with localcontext() as ctx:
        ctx.prec = digits
        d = Decimal(q.numerator) / Decimal(q.denominator)
        d = d.quantize(Decimal(1).scaleb(d.adjusted() - digits + 1))
    return format(d, "f") if -7 < d.adjusted() < digits else format(d, "E")
