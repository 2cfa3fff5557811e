import random
from fractions import Fraction as F

import pytest
from hypothesis import given
from hypothesis import strategies as st

from toric_sasaki import exact
from toric_sasaki.cone_geometry import (
    MomentCone,
    TransverseBasis,
    basis_of_h,
    check_reeb,
    extreme_rays,
    normalize_reeb,
    solve_gamma,
    transverse_facets,
)
from toric_sasaki.errors import (
    DegenerateCone,
    InconsistentChernCondition,
    InputError,
    InternalNormalizationError,
    ReebNotPositive,
    ReebSignError,
)
from toric_sasaki.polytope import HPolytope, compute_R, enumerate_vertices, volume_barycenter

QUAD = [(1, 0), (0, 1)]
OCTANT = [(1, 0, 0), (0, 1, 0), (0, 0, 1)]


def V(*xs):
    return tuple(F(x) for x in xs)


class TestSolveGamma:
    def test_quadrant(self):
        assert solve_gamma(MomentCone(1, QUAD, (1, 1))) == V(-1, -1)

    def test_octant(self):
        assert solve_gamma(MomentCone(2, OCTANT, (1, 1, 1))) == V(-1, -1, -1)

    def test_slanted(self):
        assert solve_gamma(MomentCone(1, [(1, 0), (1, 2)], (1, 1))) == V(-1, 0)

    def test_inconsistent(self):
        # gamma = (-1, -1) from the first two normals gives +3 on the third
        with pytest.raises(InconsistentChernCondition):
            solve_gamma(MomentCone(1, [(1, 0), (0, 1), (-1, -2)], (1, 1)))

    def test_degenerate(self):
        with pytest.raises(DegenerateCone):
            solve_gamma(MomentCone(1, [(1, 0), (-1, 0)], (1, 1)))

    def test_unimodular_equivariance(self):
        rng = random.Random(3)
        cone = MomentCone(2, [(1, 0, 0), (1, 1, 2), (1, 3, 3), (1, 1, 0)], (4, 3, 3))
        gamma = solve_gamma(cone)
        for _ in range(10):
            U = _random_unimodular(rng, 3)
            moved = MomentCone(2, [exact.matvec(U, n) for n in cone.normals],
                               exact.matvec(U, cone.reeb))
            expected = exact.matvec(exact.transpose(exact.inverse(U)), gamma)
            assert solve_gamma(moved) == expected


def _random_unimodular(rng, n):
    U = [[F(int(i == j)) for j in range(n)] for i in range(n)]
    for _ in range(6):
        i, j = rng.sample(range(n), 2)
        k = rng.choice([-2, -1, 1, 2])
        U[i] = [a + k * b for a, b in zip(U[i], U[j])]
    assert abs(exact.det(U)) == 1
    return U


class TestNormalize:
    @pytest.mark.parametrize("m,normals,xi,out", [
        (1, QUAD, (1, 1), (1, 1)),
        (1, QUAD, (2, 2), (1, 1)),
        (2, OCTANT, (3, 3, 3), (1, 1, 1)),
    ])
    def test_examples(self, m, normals, xi, out):
        cone = MomentCone(m, normals, xi)
        assert normalize_reeb(cone, solve_gamma(cone)).reeb == V(*out)

    def test_sign_error(self):
        cone = MomentCone(1, QUAD, (1, -1))
        with pytest.raises(ReebSignError):
            normalize_reeb(cone, solve_gamma(cone))


class TestRays:
    def test_quadrant(self):
        assert extreme_rays(MomentCone(1, QUAD, (1, 1))) == [V(0, 1), V(1, 0)]

    def test_octant(self):
        assert set(extreme_rays(MomentCone(2, OCTANT, (1, 1, 1)))) == {
            V(1, 0, 0), V(0, 1, 0), V(0, 0, 1)}

    def test_slanted(self):
        assert set(extreme_rays(MomentCone(1, [(1, 0), (-1, 3)], (1, 1)))) == {V(0, 1), V(3, 1)}

    def test_permutation_invariance(self):
        normals = [(1, 0, 0), (1, 1, 2), (1, 3, 3), (1, 1, 0)]
        base = set(extreme_rays(MomentCone(2, normals, (4, 3, 3))))
        rng = random.Random(0)
        for _ in range(5):
            rng.shuffle(normals)
            assert set(extreme_rays(MomentCone(2, normals, (4, 3, 3)))) == base


class TestCheckReeb:
    def test_pass(self):
        rep = check_reeb(MomentCone(1, QUAD, (1, 1)))
        assert rep.passed and rep.min_pairing == 1

    def test_fail(self):
        with pytest.raises(ReebNotPositive) as info:
            check_reeb(MomentCone(1, QUAD, (1, -1)))
        assert info.value.details["violating_rays"] == [["0", "1"]]

    def test_pairings(self):
        rep = check_reeb(MomentCone(1, [(1, 0), (-1, 3)], (1, 1)))
        assert rep.min_pairing == 1 and rep.argmin_ray == V(0, 1)
        assert dict(rep.pairings)[V(3, 1)] == 4

    def test_zero_pairing_rejected(self):
        with pytest.raises(ReebNotPositive):
            check_reeb(MomentCone(1, QUAD, (1, 0)))


class TestBasis:
    @pytest.mark.parametrize("gamma,basis", [
        ((-1, -1), [(1, -1)]),
        ((-1, -1, -1), [(1, -1, 0), (0, 1, -1)]),
        ((-1, 0), [(0, 1)]),
    ])
    def test_examples(self, gamma, basis):
        assert basis_of_h(V(*gamma)).basis == tuple(V(*b) for b in basis)

    @given(st.lists(st.integers(-5, 5), min_size=2, max_size=4).filter(any))
    def test_kernel_and_rank(self, g):
        gamma = V(*g)
        b = basis_of_h(gamma).basis
        assert len(b) == len(g) - 1
        assert all(exact.dot(gamma, x) == 0 for x in b)
        assert exact.rank(b) == len(b)
        assert all(x.denominator == 1 for v in b for x in v)


class TestTransverseFacets:
    def _facets(self, xi):
        cone = MomentCone(1, QUAD, xi)
        g = solve_gamma(cone)
        return transverse_facets(normalize_reeb(cone, g), g, basis_of_h(g))

    def test_round(self):
        assert self._facets((1, 1)) == [(V(F(1, 2)), F(1, 2)), (V(F(-1, 2)), F(1, 2))]

    def test_weighted(self):
        assert [n for n, _ in self._facets((F(3, 2), F(1, 2)))] == [V(F(1, 4)), V(F(-3, 4))]

    def test_octant_offsets(self):
        cone = MomentCone(2, OCTANT, (1, 1, 1))
        g = solve_gamma(cone)
        facets = transverse_facets(cone, g, basis_of_h(g))
        assert all(c == F(1, 3) for _, c in facets)
        vp = enumerate_vertices(HPolytope.from_facets(facets))
        assert len(vp.vertices) == 3

    def test_requires_normalized_reeb(self):
        cone = MomentCone(1, QUAD, (2, 2))
        g = solve_gamma(cone)
        with pytest.raises(InternalNormalizationError):
            transverse_facets(cone, g, basis_of_h(g))

    def test_basis_independence(self):
        cone = MomentCone(2, [(1, 0, 0), (1, 1, 2), (1, 3, 3), (1, 1, 0)], (4, 3, 3))
        g = solve_gamma(cone)
        cone = normalize_reeb(cone, g)
        b0 = basis_of_h(g)
        rng = random.Random(7)
        results = set()
        for _ in range(4):
            U = _random_unimodular(rng, 2)
            other = TransverseBasis(tuple(
                tuple(sum(U[i][k] * b0.basis[k][j] for k in range(2)) for j in range(3))
                for i in range(2)))
            hp = HPolytope.from_facets(transverse_facets(cone, g, other))
            s = volume_barycenter(enumerate_vertices(hp))
            results.add((compute_R(hp, s.barycenter).R, s.volume))
        assert len(results) == 1


class TestInputChecks:
    def test_short_reeb(self):
        with pytest.raises(InputError):
            MomentCone(1, QUAD, (1,))

    def test_too_few_normals(self):
        with pytest.raises(InputError):
            MomentCone(2, [(1, 0, 0), (0, 1, 0)], (1, 1, 1))

    def test_non_integer_normal(self):
        with pytest.raises(InputError):
            MomentCone(1, [(F(1, 2), 0), (0, 1)], (1, 1))

    def test_non_primitive_warns(self):
        with pytest.warns(UserWarning, match="not primitive"):
            MomentCone(1, [(2, 0), (0, 1)], (1, 1))

    def test_exact_and_repeatable(self):
        cone = MomentCone(2, OCTANT, (F(6, 5), F(9, 10), F(9, 10)))
        assert solve_gamma(cone) == solve_gamma(cone)
        assert all(isinstance(x, F) for x in normalize_reeb(cone, solve_gamma(cone)).reeb)
