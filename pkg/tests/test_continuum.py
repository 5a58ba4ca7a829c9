import math
import warnings

import numpy as np
import pytest
from scipy.integrate import quad

from semigroup_hls import continuum as cm
from semigroup_hls import subordination as sub


@pytest.fixture(scope="module")
def grid33():
    return cm.Grid(3, 33, 8.0)


@pytest.fixture(scope="module")
def gauss33(grid33):
    return cm.gaussian_field(grid33, 1.0)


class TestGridField:
    def test_rejects_even_node_count(self):
        with pytest.raises(ValueError, match="odd"):
            cm.Grid(3, 48, 8.0)

    def test_axis_symmetric_with_origin(self, grid33):
        ax = grid33.axis
        np.testing.assert_allclose(ax + ax[::-1], 0.0, atol=1e-13)
        assert ax[(grid33.n - 1) // 2] == 0.0

    def test_io_round_trip(self, tmp_path, gauss33):
        path = tmp_path / "field.bin"
        cm.save_field(gauss33, path)
        again = cm.load_field(path)
        assert again.grid == gauss33.grid
        np.testing.assert_array_equal(again.values, gauss33.values)
        # sidecar records geometry
        import json
        meta = json.loads((tmp_path / "field.bin.json").read_text())
        assert meta["shape"] == [33, 33, 33]
        assert meta["d"] == 3

    def test_norms_match_closed_form(self, gauss33):
        # ||e^{-|x|^2/2}||_p = (2 pi / p)^{3/2p}; the Riemann sum aliases
        # like exp(-2 pi^2 sigma^2 / (p h^2)), noticeable only at large p
        for p, tol in ((1.0, 1e-12), (2.0, 1e-12), (6.0, 1e-5)):
            want = (2.0 * math.pi / p) ** (3.0 / (2.0 * p))
            assert abs(cm.lp_norm_grid(gauss33, p) - want) / want < tol


class TestHeatApply:
    def test_t_zero_identity(self, gauss33):
        out = cm.heat_apply(gauss33, 0.0)
        np.testing.assert_array_equal(out.values, gauss33.values)

    def test_gaussian_variance_law(self, gauss33):
        # e^{-|x|^2/2} -> (1/(1+2t))^{3/2} e^{-|x|^2/2(1+2t)}
        t = 0.75
        out = cm.heat_apply(gauss33, t)
        want = cm.gaussian_heat_value(1.0, 1.0, 3, t, gauss33.grid.radius_squared())
        assert np.max(np.abs(out.values - want)) < 1e-10
        sigma, amp = out.gaussian
        assert abs(sigma - math.sqrt(1 + 2 * t)) < 1e-14
        assert abs(amp - (1 / (1 + 2 * t)) ** 1.5) < 1e-14

    def test_small_time_cell_average_branch(self, gauss33):
        # below the mesh scale the cell-average operator cannot resolve the
        # diffusion; it stays within O(t |lap f|) of both f and T_t f
        t = 1e-4
        out = cm.heat_apply(gauss33, t)
        want = cm.gaussian_heat_value(1.0, 1.0, 3, t, gauss33.grid.radius_squared())
        assert np.max(np.abs(out.values - want)) < 5e-4
        assert np.max(np.abs(out.values - gauss33.values)) < 5e-4

    def test_mass_conservation(self, gauss33):
        vol = gauss33.grid.cell_volume()
        m0 = gauss33.values.sum() * vol
        # valid while the heat kernel mass stays inside the box; at larger
        # t mass genuinely leaves through the boundary
        for t in (0.05, 0.2, 0.4):
            m = cm.heat_apply(gauss33, t).values.sum() * vol
            assert abs(m - m0) < 1e-8 * m0

    def test_semigroup_law(self, gauss33):
        # the intermediate field has sigma ~ 1.26, whose boundary tail is
        # above the decay threshold; the warning is correct and expected
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", cm.TruncationWarning)
            a = cm.heat_apply(cm.heat_apply(gauss33, 0.3), 0.7)
        b = cm.heat_apply(gauss33, 1.0)
        assert np.max(np.abs(a.values - b.values)) < 1e-6

    def test_lp_contraction(self, grid33):
        rng = np.random.default_rng(0)
        vals = np.zeros(grid33.shape)
        vals[4:-4, 4:-4, 4:-4] = rng.standard_normal((25, 25, 25))
        vals *= cm.gaussian_field(grid33, 2.0).values
        f = cm.GridField(grid33, vals)
        for p in (1.0, 2.0, math.inf):
            n0 = cm.lp_norm_grid(f, p)
            for t in (0.1, 1.0):
                assert cm.lp_norm_grid(cm.heat_apply(f, t), p) <= n0 * (1 + 1e-10)

    def test_boundary_truncation_warning(self, grid33):
        wide = cm.gaussian_field(grid33, 6.0)
        with pytest.warns(cm.TruncationWarning):
            cm.heat_apply(wide, 0.5)


class TestRieszConstant:
    def test_d3_alpha1(self):
        assert abs(cm.riesz_constant(3, 1.0) - 1.0 / (2 * math.pi ** 2)) < 1e-15
        assert abs(cm.riesz_constant(3, 1.0) - 0.050660) < 1e-6

    def test_d4_alpha2(self):
        assert abs(cm.riesz_constant(4, 2.0) - 1.0 / (4 * math.pi ** 2)) < 1e-15
        assert abs(cm.riesz_constant(4, 2.0) - 0.025330) < 1e-6

    def test_domain_edges(self):
        with pytest.raises(ValueError):
            cm.riesz_constant(3, 3.0)
        with pytest.raises(ValueError):
            cm.riesz_constant(3, 1e-4)


@pytest.fixture(scope="module")
def grid47():
    return cm.Grid(3, 47, 8.0)


@pytest.fixture(scope="module")
def gauss47(grid47):
    return cm.gaussian_field(grid47, 1.0)


def sample_points(grid, cells):
    h = grid.h
    return np.array([[i * h, j * h, k * h] for (i, j, k) in cells])


SAMPLE_CELLS = [(0, 0, 0), (1, 0, 0), (2, 1, 0), (3, 3, 3), (5, 0, 2)]


class TestRieszApply:
    @pytest.mark.parametrize("alpha", [0.5, 1.0, 1.5])
    def test_against_radial_oracle(self, gauss47, alpha):
        pts = sample_points(gauss47.grid, SAMPLE_CELLS)
        got = cm.riesz_apply(gauss47, alpha, pts)
        prof = lambda r: math.exp(-r * r / 2.0)
        for v, x in zip(got, pts):
            want = cm.riesz_radial_oracle(prof, alpha, float(np.linalg.norm(x)))
            assert abs(v - want) / want < 1e-3

    def test_origin_value_alpha_one(self, gauss47):
        # radial oracle: c(3,1) * 4 pi * int_0^inf e^{-r^2/2} dr = sqrt(2/pi)
        oracle, err = quad(lambda r: math.exp(-r * r / 2), 0, np.inf)
        want = cm.riesz_constant(3, 1.0) * 4.0 * math.pi * oracle
        assert err < 1e-7
        assert abs(want - math.sqrt(2.0 / math.pi)) < 1e-12
        got = cm.riesz_apply(gauss47, 1.0, [[0.0, 0.0, 0.0]])[0]
        assert abs(got - want) / want < 1e-3

    def test_zero_field(self, grid33):
        f = cm.GridField(grid33, np.zeros(grid33.shape))
        got = cm.riesz_apply(f, 1.0, [[0.0, 0.0, 0.0]])
        np.testing.assert_array_equal(got, 0.0)

    def test_rejects_off_node_points(self, gauss33):
        with pytest.raises(ValueError, match="grid nodes"):
            cm.riesz_apply(gauss33, 1.0, [[0.1234, 0.0, 0.0]])

    def test_rejects_boundary_points(self, gauss33):
        h = gauss33.grid.h
        edge = gauss33.grid.extent
        with pytest.raises(ValueError, match="boundary"):
            cm.riesz_apply(gauss33, 1.0, [[edge - h, 0.0, 0.0]])


class TestSemigroupQuadratureRoute:
    def exact_sampler(self, pts_r2):
        def sampler(t_nodes):
            return np.stack([cm.gaussian_heat_value(1.0, 1.0, 3, t, pts_r2)
                             for t in t_nodes])
        return sampler

    @pytest.mark.parametrize("alpha", [0.5, 1.0, 1.5])
    def test_matches_radial_oracle(self, gauss47, alpha):
        pts = sample_points(gauss47.grid, SAMPLE_CELLS)
        r2 = np.sum(pts * pts, axis=1)
        moments = cm.field_moments_at_points(gauss47, pts).T
        got = cm.fractional_integral_time_quadrature(
            self.exact_sampler(r2), alpha, 3, t_lo=1e-10, t_hi=5e4,
            tail_moments=moments)
        prof = lambda r: math.exp(-r * r / 2.0)
        for v, x in zip(got, pts):
            want = cm.riesz_radial_oracle(prof, alpha, float(np.linalg.norm(x)))
            assert abs(v - want) / want < 1e-5

    def test_riesz_equivalence_on_grid(self, gauss47):
        # the two routes of the kernel identity agree at the sample points
        pts = sample_points(gauss47.grid, SAMPLE_CELLS)
        r2 = np.sum(pts * pts, axis=1)
        moments = cm.field_moments_at_points(gauss47, pts).T
        semi = cm.fractional_integral_time_quadrature(
            self.exact_sampler(r2), 1.0, 3, t_lo=1e-10, t_hi=5e4,
            tail_moments=moments)
        kern = cm.riesz_apply(gauss47, 1.0, pts)
        assert np.max(np.abs(kern - semi) / np.abs(semi)) < 1e-3


class TestVaropoulosSlope:
    def test_family_p2(self):
        fam = cm.GaussianFamily(d=3)
        rep = cm.varopoulos_slope(fam, 2.0, np.geomspace(0.5, 50.0, 9))
        assert rep.passed
        assert abs(rep.value + 0.75) < 0.75 * 0.05
        assert rep.details["r2"] >= 0.99

    def test_family_p1(self):
        fam = cm.GaussianFamily(d=3)
        rep = cm.varopoulos_slope(fam, 1.0, np.geomspace(0.5, 50.0, 9))
        assert rep.passed
        assert abs(rep.value + 1.5) < 1.5 * 0.05

    def test_grid_field_p1(self, grid33):
        f = cm.gaussian_field(grid33, 0.3)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", cm.TruncationWarning)
            rep = cm.varopoulos_slope(f, 1.0, np.geomspace(1.0, 4.0, 7))
        assert rep.passed

    def test_zero_field_skipped(self, grid33):
        f = cm.GridField(grid33, np.zeros(grid33.shape))
        rep = cm.varopoulos_slope(f, 1.0, np.geomspace(1.0, 4.0, 5))
        assert rep.status == "skipped"


class TestPoissonDimension:
    @pytest.mark.parametrize("p,slope", [(1.0, -3.0), (2.0, -1.5)])
    def test_family_slopes(self, p, slope):
        fam = cm.GaussianFamily(d=3)
        rep = sub.poisson_dimension_check(fam, p, np.geomspace(1.0, 30.0, 7))
        assert rep.passed
        assert abs(rep.value - slope) < abs(slope) * 0.05
        assert rep.details["r2"] >= 0.99


class TestHlsRatio:
    def test_zero_fields(self, grid33):
        z = cm.GridField(grid33, np.zeros(grid33.shape), gaussian=(1.0, 0.0))
        assert cm.hls_ratio(z, z, 1.0, 2.0) == 0.0

    def test_exponent_validation(self, gauss33):
        with pytest.raises(ValueError):
            cm.hls_ratio(gauss33, gauss33, 2.9, 2.0)

    def test_refinement_stability(self):
        ratios = []
        for n in (33, 47):
            g = cm.Grid(3, n, 8.0)
            f = cm.gaussian_field(g, 1.0)
            ratios.append(cm.hls_ratio(f, f, 1.0, 2.0))
        drift = abs(ratios[1] - ratios[0]) / ratios[1]
        assert drift < 0.02

    def test_dilation_sweep(self, grid47):
        vals = []
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", cm.TruncationWarning)
            for r in (0.5, 1.0, 2.0):
                f = cm.gaussian_field(grid47, 1.0 / r)
                vals.append(cm.hls_ratio(f, f, 1.0, 2.0))
        spread = (max(vals) - min(vals)) / min(vals)
        assert spread < 0.03


class TestGridPoissonBackend:
    def test_gfunction_ratio_finite_and_stable(self):
        backend = cm.GridPoissonBackend(n=33)
        r1 = backend.gfunction_ratio(1.0, 1.0, 2.0, 6.0)
        assert math.isfinite(r1) and r1 > 0
        r2 = backend.refined().gfunction_ratio(1.0, 1.0, 2.0, 6.0)
        assert abs(r2 - r1) / r1 < 0.05

    def test_full_check_passes(self):
        from semigroup_hls import lp_functionals as lp
        backend = cm.GridPoissonBackend(n=33)
        rep = lp.hls_gfunction_check(backend, alpha=1.0, p=2.0)
        assert rep.passed
