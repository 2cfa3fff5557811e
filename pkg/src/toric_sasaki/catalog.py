"""Built-in example cones with their known exact invariants.

Expected values carry a provenance tag:

* ``symmetry``: forced by a symmetry of the data (``P_c = O`` gives ``R = 1``).
* ``closed-form``: from the interval formulas of the weighted S^3 family.
* ``toric-fano``: the known value for the underlying toric Fano surface,
  reproduced independently in the test suite before use.
* ``regression``: first output of the exact pipeline, frozen to catch changes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

from .cone_geometry import MomentCone
from .exact import vec


@dataclass(frozen=True)
class CatalogEntry:
    name: str
    cone: MomentCone
    expected: dict[str, object] = field(default_factory=dict)   # "R", "P_c", "Vol"
    provenance: dict[str, str] = field(default_factory=dict)
    notes: str = ""

    @property
    def m(self) -> int:
        return self.cone.m


def weighted_s3(a) -> CatalogEntry:
    """``xi = (a, 2 - a)`` on the cone over the standard quadrant, ``0 < a < 2``.

    The transverse interval is ``[-1/xi_2, 1/xi_1]``, so the barycenter is
    ``(xi_2 - xi_1) / (2 xi_1 xi_2)`` and ``R = min(a, 2 - a)``.
    """
    a = Fraction(a)
    if not 0 < a < 2:
        raise ValueError("need 0 < a < 2")
    x1, x2 = a, 2 - a
    cone = MomentCone(1, [(1, 0), (0, 1)], (x1, x2))
    expected = {
        "R": min(a, 2 - a),
        "P_c": vec([(x2 - x1) / (2 * x1 * x2)]),
        "Vol": 1 / x1 + 1 / x2,
    }
    kind = "regular" if a == 1 else "quasi-regular"
    return CatalogEntry(f"weighted-S3-{a}", cone, expected,
                        {k: "closed-form" for k in expected}, kind)


def weighted_s5(xi) -> CatalogEntry:
    """``xi`` positive rational with ``sum xi = 3`` on the cone over the octant."""
    xi = vec(xi)
    if any(x <= 0 for x in xi) or sum(xi) != 3:
        raise ValueError("need positive entries summing to 3")
    name = "weighted-S5-" + ",".join(str(x) for x in xi)
    return CatalogEntry(name, MomentCone(2, [(1, 0, 0), (0, 1, 0), (0, 0, 1)], xi),
                        notes="quasi-regular")


def y_pq(p: int, q: int) -> CatalogEntry:
    """``Y^{p,q}`` with its toric data ``(1,0,0), (1,p-q-1,p-q), (1,p,p), (1,1,0)``
    and the Reeb vector ``3/4`` times the sum of the normals.
    """
    normals = [(1, 0, 0), (1, p - q - 1, p - q), (1, p, p), (1, 1, 0)]
    reeb = tuple(Fraction(3, 4) * sum(n[i] for n in normals) for i in range(3))
    return CatalogEntry(f"Y{p},{q}", MomentCone(2, normals, reeb),
                        notes="quasi-regular; canonical Reeb vector, not volume-minimizing")


def builtin_entries() -> list[CatalogEntry]:
    zero1, zero2 = vec([0]), vec([0, 0])
    out = [
        CatalogEntry("round-S3", MomentCone(1, [(1, 0), (0, 1)], (1, 1)),
                     {"R": Fraction(1), "P_c": zero1, "Vol": Fraction(2)},
                     {"R": "symmetry", "P_c": "symmetry", "Vol": "closed-form"}, "regular"),
    ]
    out += [weighted_s3(Fraction(a)) for a in ("5/4", "4/3", "3/2", "7/4")]
    out.append(CatalogEntry(
        "round-S5", MomentCone(2, [(1, 0, 0), (0, 1, 0), (0, 0, 1)], (1, 1, 1)),
        {"R": Fraction(1), "P_c": zero2}, {"R": "symmetry", "P_c": "symmetry"}, "regular"))
    s5 = weighted_s5((Fraction(6, 5), Fraction(9, 10), Fraction(9, 10)))
    out.append(CatalogEntry(s5.name, s5.cone, {"R": Fraction(9, 10)}, {"R": "regression"},
                            s5.notes))
    out.append(CatalogEntry(
        "BlpCP2", MomentCone(2, [(1, 0, 1), (0, 1, 1), (-1, -1, 1), (1, 1, 1)], (0, 0, 3)),
        {"R": Fraction(6, 7)}, {"R": "toric-fano"},
        "regular; cone over the one-point blow-up of the projective plane"))
    for (p, q), R in (((2, 1), Fraction(63, 76)), ((3, 1), Fraction(85, 96))):
        e = y_pq(p, q)
        out.append(CatalogEntry(e.name, e.cone, {"R": R}, {"R": "regression"}, e.notes))
    return out


def get_entry(name: str) -> CatalogEntry:
    for e in builtin_entries():
        if e.name == name:
            return e
    raise KeyError(name)


def expected_strings(entry: CatalogEntry) -> dict[str, object]:
    def fmt(v):
        return [str(x) for x in v] if isinstance(v, tuple) else str(v)
    return {k: {"value": fmt(v), "provenance": entry.provenance.get(k, "")}
            for k, v in entry.expected.items()}

