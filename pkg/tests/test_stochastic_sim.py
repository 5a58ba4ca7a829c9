import math

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.special import gamma as gamma_fn

from semigroup_hls import spectral_core as sc
from semigroup_hls import stochastic_sim as ss


@pytest.fixture(scope="module")
def two_state():
    model = sc.two_state()
    return model, sc.decompose(model)


def make_cfg(model, dec, **kw):
    base = dict(model=model, dec=dec, s=1.0, dt=0.005, seed=42)
    base.update(kw)
    return ss.ProcessConfig(**base)


class TestSamplePaths:
    def test_mean_hitting_occupation(self, two_state):
        # E[int_0^tau 1_{Y <= s} dt] = s^2 * total mass = 2.0 on this chain
        model, dec = two_state
        cfg = make_cfg(model, dec, seed=1)
        rep = ss.green_formula_check(cfg, ss.height_indicator(1.0), 30_000)
        assert rep.passed
        assert abs(rep.oracle - 2.0) < 1e-10

    def test_degenerate_small_start(self, two_state):
        model, dec = two_state
        cfg = make_cfg(model, dec, s=1e-3, dt=1e-5, seed=2)
        A = ss.du_dy_multiplier(dec, np.array([1.0, -1.0]), 1.0, 1e3)
        bundle = ss.sample_paths(cfg, 2000, dy_integrands=[A],
                                 dt_integrands=[ss.height_indicator(1.0)])
        assert float(np.mean(bundle.tau)) < 1e-3
        assert float(np.mean(np.abs(bundle.dy_integrals))) < 1e-3
        assert float(np.mean(bundle.dt_integrals)) < 1e-3

    def test_seed_determinism(self, two_state):
        model, dec = two_state
        cfg = make_cfg(model, dec, seed=7, horizon=500.0)
        A = ss.du_dy_multiplier(dec, np.array([1.0, -1.0]), 1.0, 1e3)
        b1 = ss.sample_paths(cfg, 30_000, dy_integrands=[A])
        b2 = ss.sample_paths(cfg, 30_000, dy_integrands=[A])
        np.testing.assert_array_equal(b1.dy_integrals, b2.dy_integrals)
        np.testing.assert_array_equal(b1.tau, b2.tau)
        np.testing.assert_array_equal(b1.x_tau, b2.x_tau)

    def test_threaded_equals_sequential(self, two_state):
        model, dec = two_state
        cfg = make_cfg(model, dec, seed=8, horizon=500.0, chunk_size=8192)
        A = ss.du_dy_multiplier(dec, np.array([1.0, -1.0]), 1.0, 1e3)
        b1 = ss.sample_paths(cfg, 30_000, dy_integrands=[A], threads=1)
        b4 = ss.sample_paths(cfg, 30_000, dy_integrands=[A], threads=4)
        np.testing.assert_array_equal(b1.dy_integrals, b4.dy_integrals)
        np.testing.assert_array_equal(b1.x_tau, b4.x_tau)
        np.testing.assert_array_equal(b1.censored, b4.censored)

    def test_terminal_height_zero_for_killed(self, two_state):
        model, dec = two_state
        cfg = make_cfg(model, dec, seed=9, horizon=200.0)
        bundle = ss.sample_paths(cfg, 5000)
        killed = ~bundle.censored
        np.testing.assert_array_equal(bundle.y_end[killed], 0.0)
        assert np.all(bundle.tau[killed] < 200.0)

    def test_csv_stream(self, two_state, tmp_path):
        model, dec = two_state
        cfg = make_cfg(model, dec, seed=10, horizon=100.0)
        bundle = ss.sample_paths(cfg, 500,
                                 dt_integrands=[ss.height_indicator(1.0)])
        path = tmp_path / "paths.csv"
        bundle.to_csv(path)
        lines = path.read_text().splitlines()
        assert len(lines) == 501
        assert lines[0].startswith("path,tau,x_tau,censored")


class TestExitIdentity:
    def test_indicator_state(self, two_state):
        model, dec = two_state
        cfg = make_cfg(model, dec, seed=11)
        rep = ss.exit_identity_check(cfg, np.array([1.0, 0.0]), 30_000)
        assert rep.passed
        assert rep.oracle == 1.0
        assert rep.details["censored_fraction"] <= 0.01

    def test_constant_h(self, two_state):
        model, dec = two_state
        cfg = make_cfg(model, dec, seed=12)
        rep = ss.exit_identity_check(cfg, np.ones(2), 10_000)
        assert rep.passed
        assert rep.oracle == 2.0
        # P_s 1 = 1: every path contributes exactly the total mass
        assert abs(rep.value - 2.0) < 1e-9

    def test_zero_h(self, two_state):
        model, dec = two_state
        cfg = make_cfg(model, dec, seed=13)
        rep = ss.exit_identity_check(cfg, np.zeros(2), 5_000)
        assert rep.passed
        assert rep.value == 0.0


class TestGreenFormula:
    def test_weighted_decaying_integrand(self, two_state):
        # F = y e^{-y}: truth 2 * mass * int (y ^ 1) y e^{-y} dy
        model, dec = two_state
        cfg = make_cfg(model, dec, seed=14)

        def F(x_idx, y):
            return y * np.exp(-y)

        truth, _ = quad(lambda y: min(y, 1.0) * y * math.exp(-y), 0, 50.0)
        truth *= 2.0 * model.total_mass
        rep = ss.green_formula_check(cfg, F, 20_000)
        assert rep.passed
        assert abs(rep.oracle - truth) < 1e-7

    def test_zero_integrand(self, two_state):
        model, dec = two_state
        cfg = make_cfg(model, dec, seed=15)
        rep = ss.green_formula_check(cfg, lambda x, y: np.zeros_like(y), 2_000)
        assert rep.passed
        assert rep.value == 0.0 and rep.oracle == 0.0

    def test_slow_decay_rejected(self, two_state):
        model, dec = two_state
        cfg = make_cfg(model, dec, seed=16)
        with pytest.raises(ValueError, match="slow-decay"):
            ss.green_formula_check(cfg, lambda x, y: 1.0 / (1.0 + y), 100)

    def test_dt_halving_bias_control(self, two_state):
        model, dec = two_state
        reps = []
        for dt in (0.008, 0.004):
            cfg = make_cfg(model, dec, dt=dt, seed=17)
            reps.append(ss.green_formula_check(cfg, ss.height_indicator(1.0),
                                               40_000))
        gap = abs(reps[0].value - reps[1].value)
        noise = math.hypot(reps[0].standard_error, reps[1].standard_error)
        assert gap <= 3.0 * noise


class TestMartingaleTransform:
    def test_zero_function(self, two_state):
        model, dec = two_state
        cfg = make_cfg(model, dec, seed=18)
        ests, _ = ss.martingale_transform(cfg, np.zeros(2), 1.0, 2_000)
        assert all(e.mean == 0.0 for e in ests)

    def test_constant_gives_zero_vector(self, two_state):
        # constants are annihilated by the vertical derivative
        model, dec = two_state
        cfg = make_cfg(model, dec, seed=19)
        ests, _ = ss.martingale_transform(cfg, np.ones(2), 1.0, 2_000)
        assert all(e.mean == 0.0 for e in ests)

    def test_antisymmetry_on_two_state(self, two_state):
        model, dec = two_state
        cfg = make_cfg(model, dec, s=5.0, dt=0.01, seed=20)
        ests, bundle = ss.martingale_transform(cfg, np.array([1.0, -1.0]),
                                               1.0, 60_000)
        assert all(e.count >= 100 for e in ests)
        combined_se = math.hypot(ests[0].standard_error, ests[1].standard_error)
        assert abs(ests[0].mean + ests[1].mean) <= 3.0 * combined_se
        # conditional means against the inner-product route
        inner = sum(m * e.mean * hv for m, e, hv in
                    zip(model.m, ests, [1.0, -1.0]))
        assert inner > 0


class TestPairingIdentity:
    def test_constant_f_gives_zeros(self, two_state):
        model, dec = two_state
        cfg = make_cfg(model, dec, seed=21)
        rep = ss.pairing_mc_check(cfg, np.ones(2), np.array([1.0, -1.0]),
                                  1.0, 2_000)
        assert rep.passed
        assert rep.value == 0.0 and rep.oracle == 0.0

    def test_two_state_identity(self, two_state):
        model, dec = two_state
        cfg = make_cfg(model, dec, s=5.0, dt=0.01, truncation=1e3, seed=22)
        rep = ss.pairing_mc_check(cfg, np.array([1.0, -1.0]),
                                  np.array([1.0, -1.0]), 1.0, 60_000)
        assert rep.passed
        for key, z in rep.details["z_scores"].items():
            assert z <= 3.0, key


class TestItoIsometry:
    def test_second_moment(self, two_state):
        model, dec = two_state
        cfg = make_cfg(model, dec, s=2.0, dt=0.01, seed=23)
        rep = ss.ito_isometry_check(cfg, np.array([1.0, -1.0]), 1.0, 30_000)
        assert rep.passed


class TestOccupation:
    def test_chi_square_sanity(self, two_state):
        model, dec = two_state
        cfg = make_cfg(model, dec, seed=101)
        rep = ss.occupation_check(cfg, 30_000)
        assert rep.passed
        assert rep.value > 0.01


class TestClockCalibration:
    def test_selects_half(self, two_state):
        model, dec = two_state
        cfg = make_cfg(model, dec, s=1.0, dt=0.01, seed=25)
        rep = ss.clock_calibration(cfg, np.array([1.0, -1.0]), 24_000)
        assert rep.passed
        assert rep.details["passing"] == [0.5]
        # wrong clocks drift by many standard errors
        assert rep.details["max_drift_z"][1.0] > ss.DRIFT_Z
        assert rep.details["max_drift_z"][0.25] > ss.DRIFT_Z

    def test_constant_function_degenerate(self, two_state):
        model, dec = two_state
        cfg = make_cfg(model, dec, s=1.0, dt=0.01, seed=26)
        rep = ss.clock_calibration(cfg, np.ones(2), 4_000)
        # zero drift for every kappa: no unique selection is possible
        assert rep.details["passing"] == [0.25, 0.5, 1.0, 2.0]
        assert rep.status == "fail"


class TestLimitConstant:
    @pytest.mark.parametrize("alpha", [0.5, 1.0])
    def test_quadrature_ratio_sweep(self, two_state, alpha):
        model, dec = two_state
        phi = np.array([1.0, -1.0]) / math.sqrt(2.0)
        rep = ss.limit_constant_estimate(dec, phi, phi, alpha)
        assert rep.passed
        want = gamma_fn(alpha + 2.0) / 2.0 ** (alpha + 1.0)
        assert abs(rep.oracle - want) < 1e-12
        assert rep.details["selected"] == "Gamma(a+2)/2^(a+1)"
        ratios = rep.details["ratios"]
        assert all(a <= b + 1e-12 for a, b in zip(ratios, ratios[1:]))
        assert ratios[0] < rep.value  # finite-s deficit

    def test_alpha_one_value(self, two_state):
        model, dec = two_state
        phi = np.array([1.0, -1.0]) / math.sqrt(2.0)
        rep = ss.limit_constant_estimate(dec, phi, phi, 1.0)
        assert abs(rep.value - 0.5) < 5e-4
        denom = sc.inner(dec.m, sc.fractional_integral_spectral(dec, 1.0, phi), phi)
        assert abs(denom - 0.70711) < 1e-5
