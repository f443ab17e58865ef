import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from hypfield import geometry as geo

radius = st.floats(0.0, 0.95)
angle = st.floats(0.0, 2 * math.pi)


@st.composite
def disk_points(draw):
    return draw(radius) * cmath.exp(1j * draw(angle))


@st.composite
def group_elements(draw):
    phi = draw(st.floats(-6.0, 6.0))
    r = draw(st.floats(-2.0, 2.0))
    s = draw(st.floats(-2.0, 2.0))
    return geo.iwasawa_compose(geo.IwasawaFactors(phi, r, s))


class TestPoints:
    def test_rejects_outside_disk(self):
        with pytest.raises(geo.GeometryError):
            geo.DiskPoint(0.8, 0.6)

    def test_rejects_nan(self):
        with pytest.raises(geo.GeometryError):
            geo.DiskPoint(float("nan"), 0.0)

    def test_complex_roundtrip(self):
        p = geo.DiskPoint.from_complex(0.3 - 0.2j)
        assert p.z == 0.3 - 0.2j
        assert_allclose(p.abs2, 0.13)

    def test_structure_tensor_needs_spd(self):
        with pytest.raises(geo.GeometryError):
            geo.StructureTensor(1.0, 1.0, 2.0)
        with pytest.raises(geo.GeometryError):
            geo.StructureTensor.from_matrix([[1.0, 0.2], [0.3, 1.0]])


class TestDistance:
    def test_origin_distance_is_arctanh(self):
        assert_allclose(geo.dist_disk(0j, 0.5), math.atanh(0.5))

    def test_zero_on_diagonal(self):
        assert geo.dist_disk(0.3 + 0.1j, 0.3 + 0.1j) == 0.0

    @given(disk_points(), disk_points())
    def test_symmetric(self, z, w):
        assert_allclose(geo.dist_disk(z, w), geo.dist_disk(w, z), rtol=1e-12, atol=1e-14)

    @given(disk_points(), disk_points(), disk_points())
    def test_triangle_inequality(self, z, w, u):
        assert geo.dist_disk(z, u) <= geo.dist_disk(z, w) + geo.dist_disk(w, u) + 1e-9

    @given(group_elements(), disk_points(), disk_points())
    def test_isometry_invariance(self, g, z, w):
        d = geo.dist_disk(z, w)
        dg = geo.dist_disk(geo.mobius_apply(g, z), geo.mobius_apply(g, w))
        # images may approach the boundary, where arctanh amplifies rounding
        assert_allclose(dg, d, rtol=1e-6, atol=1e-9)

    @given(st.floats(0.0, 2.0), st.floats(0.0, 2.0), angle)
    def test_polar_formula_matches_mobius(self, r1, r2, th):
        d = geo.dist_disk(math.tanh(r1), math.tanh(r2) * cmath.exp(1j * th))
        assert_allclose(geo.dist_polar(r1, r2, th), d, rtol=1e-8, atol=1e-8)

    def test_polar_law_of_cosines(self):
        r1, r2, th = 0.4, 0.9, 1.1
        d = float(geo.dist_polar(r1, r2, th))
        lhs = math.cosh(2 * d)
        rhs = math.cosh(2 * r1) * math.cosh(2 * r2) - math.sinh(2 * r1) * math.sinh(2 * r2) * math.cos(th)
        assert_allclose(lhs, rhs, rtol=1e-12)

    def test_array_version_broadcasts(self):
        z = np.array([0.0, 0.5j, -0.3])
        out = geo.dist_disk_array(z[:, None], z[None, :])
        assert out.shape == (3, 3)
        assert_allclose(np.diag(out), 0.0, atol=1e-15)
        assert_allclose(out[0, 1], math.atanh(0.5))

    def test_boundary_clamp_warns(self):
        with pytest.warns(geo.NearBoundaryWarning):
            geo.dist_disk_array(np.array([1 - 1e-17 + 0j]), np.array([-(1 - 1e-17) + 0j]))


class TestTensorCoordinates:
    @given(disk_points(), st.floats(0.1, 10.0))
    def test_roundtrip(self, z, delta):
        T = geo.spd_from_coords(geo.DiskPoint.from_complex(z), delta)
        p, d = geo.coords_from_spd(T)
        assert_allclose(p.z, z, atol=1e-10)
        assert_allclose(d, delta, rtol=1e-10)

    def test_identity_maps_to_origin(self):
        p, d = geo.coords_from_spd(geo.StructureTensor(1.0, 1.0, 0.0))
        assert_allclose([p.z1, p.z2, d], [0.0, 0.0, 1.0], atol=1e-15)

    def test_tensor_distance_on_equal_determinants(self):
        a = geo.spd_from_coords(geo.DiskPoint(0.2, 0.1), 2.0)
        b = geo.spd_from_coords(geo.DiskPoint(-0.3, 0.4), 2.0)
        assert_allclose(geo.dist_tensor(a, b), geo.dist_disk(0.2 + 0.1j, -0.3 + 0.4j), rtol=1e-12)

    def test_tensor_distance_log_determinant(self):
        a = geo.spd_from_coords(geo.ORIGIN, 1.0)
        b = geo.spd_from_coords(geo.ORIGIN, math.e)
        assert_allclose(geo.dist_tensor(a, b), math.sqrt(2.0), rtol=1e-12)

    def test_volume_density(self):
        assert_allclose(geo.volume_density(0j, 1.0), 8 * math.sqrt(2))
        assert_allclose(geo.volume_density(0.5, 2.0), 8 * math.sqrt(2) / (2 * 0.75**2))


class TestGroup:
    def test_rejects_non_unimodular(self):
        with pytest.raises(geo.GeometryError):
            geo.SU11Element(1.0, 0.5)

    @given(group_elements(), group_elements())
    def test_action_is_homomorphism(self, g, h):
        z = 0.3 - 0.2j
        lhs = geo.mobius_apply(g @ h, z)
        rhs = geo.mobius_apply(g, geo.mobius_apply(h, z))
        assert_allclose(lhs, rhs, atol=1e-8)

    @given(group_elements())
    def test_inverse(self, g):
        e = g @ g.inverse()
        assert_allclose([e.alpha, e.beta], [1.0, 0.0], atol=1e-9 * abs(g.alpha) ** 2)

    @pytest.mark.parametrize("kind", ["K", "A", "N"])
    def test_subgroups_are_one_parameter(self, kind):
        g = geo.subgroup_element(kind, 0.3) @ geo.subgroup_element(kind, 0.5)
        h = geo.subgroup_element(kind, 0.8)
        assert_allclose(g.matrix, h.matrix, atol=1e-14)

    def test_unknown_subgroup(self):
        with pytest.raises(ValueError):
            geo.subgroup_element("Q", 1.0)

    def test_translation_moves_origin(self):
        assert_allclose(geo.mobius_apply(geo.subgroup_element("A", 0.7), 0j), math.tanh(0.7))

    @given(group_elements())
    @settings(max_examples=200)
    def test_iwasawa_roundtrip(self, g):
        f = geo.iwasawa_decompose(g)
        assert 0.0 <= f.phi < 4 * math.pi
        h = geo.iwasawa_compose(f)
        assert_allclose(h.matrix, g.matrix, atol=1e-9 * max(1.0, abs(g.alpha)))

    def test_iwasawa_minus_identity(self):
        f = geo.iwasawa_decompose(geo.SU11Element(-1.0, 0.0))
        assert_allclose([f.phi, f.r, f.s], [2 * math.pi, 0.0, 0.0], atol=1e-14)


class TestCoordinates:
    @given(st.floats(0.0, 3.0), angle)
    def test_polar_roundtrip(self, r, th):
        p = geo.from_polar(r, th)
        r2, th2 = geo.to_polar(p)
        assert_allclose(r2, r, atol=1e-9)
        if r > 1e-6:
            assert_allclose(cmath.exp(1j * th2), cmath.exp(1j * th), atol=1e-9)

    def test_polar_origin(self):
        assert geo.to_polar(geo.ORIGIN) == (0.0, 0.0)

    @given(st.floats(-2.0, 2.0), st.floats(-1.5, 1.5))
    def test_horocyclic_roundtrip(self, s, r):
        p = geo.from_horocyclic(s, r)
        s2, r2 = geo.to_horocyclic(p)
        assert_allclose([s2, r2], [s, r], atol=1e-7)

    def test_horocyclic_inner_at_origin(self):
        assert geo.horocyclic_inner(0j, 1.0) == 0.0

    def test_horocyclic_inner_needs_boundary_point(self):
        with pytest.raises(geo.GeometryError):
            geo.horocyclic_inner(0j, 0.5)

    def test_horocycle_level_set(self):
        # n_s . O stays on the horocycle <z, 1> = 0
        for s in (-1.0, 0.3, 2.0):
            assert_allclose(geo.horocyclic_inner(geo.from_horocyclic(s, 0.0), 1.0), 0.0, atol=1e-12)
