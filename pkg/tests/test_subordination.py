import math

import numpy as np
import pytest
from scipy.integrate import quad

from semigroup_hls import spectral_core as sc
from semigroup_hls import subordination as sub


class TestDensity:
    def test_total_mass_one(self):
        # adaptive quadrature oracle for int_0^inf eta_1(s) ds
        mass, err = quad(lambda s: sub.density(1.0, s), 0, np.inf)
        assert err < 1e-8
        assert abs(mass - 1.0) < 1e-8

    def test_laplace_transform_closed_form(self):
        # int e^{-4s} eta_1(s) ds = e^{-2}
        val, err = quad(lambda s: math.exp(-4.0 * s) * sub.density(1.0, s),
                        0, np.inf)
        assert err < 1e-8
        assert abs(val - math.exp(-2.0)) < 1e-8
        assert abs(val - 0.13534) < 1e-5

    @pytest.mark.parametrize("lam", [0.5, 1.0, 2.0, 4.0, 10.0])
    @pytest.mark.parametrize("t", [0.1, 1.0, 5.0])
    def test_laplace_transform_sweep(self, lam, t):
        val, _ = quad(lambda s: math.exp(-lam * s) * sub.density(t, s),
                      0, np.inf, epsabs=1e-13, epsrel=1e-12, limit=200)
        truth = math.exp(-t * math.sqrt(lam))
        assert abs(val - truth) / truth < 1e-7

    def test_endpoint_limits_vanish(self):
        assert sub.density(1.0, 1e-8) < 1e-200
        assert sub.density(1.0, 1e12) < 1e-17

    def test_rejects_nonpositive_arguments(self):
        with pytest.raises(ValueError):
            sub.density(0.0, 1.0)
        with pytest.raises(ValueError):
            sub.density(1.0, -1.0)
        with pytest.raises(ValueError):
            sub.density_dheight(-2.0, 1.0)


class TestPoissonViaSubordination:
    def setup_method(self):
        self.dec = sc.decompose(sc.two_state())

    def test_single_mode_against_spectral_oracle(self):
        f = np.array([1.0, -1.0])
        got = sub.poisson_subordinated(self.dec, 1.0, f)
        want = sc.apply_poisson(self.dec, 1.0, f)
        np.testing.assert_allclose(got, want, atol=1e-6)
        np.testing.assert_allclose(want, math.exp(-math.sqrt(2)) * f, rtol=1e-12)

    def test_small_height_reproduces_f(self):
        f = np.array([0.4, -1.1])
        got = sub.poisson_subordinated(self.dec, 1e-4, f)
        assert np.max(np.abs(got - f)) < 1e-3

    def test_constant_maps_to_itself(self):
        got = sub.poisson_subordinated(self.dec, 2.0, np.ones(2))
        np.testing.assert_allclose(got, 1.0, atol=1e-10)

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_random_chain_agreement(self, seed):
        rng = np.random.default_rng(seed)
        dec = sc.decompose(sc.random_reversible(16, rng))
        f = rng.standard_normal(16)
        for y in (0.1, 0.7, 2.5):
            got = sub.poisson_subordinated(dec, y, f, tol=1e-8)
            want = sc.apply_poisson(dec, y, f)
            assert np.max(np.abs(got - want)) < 1e-6

    def test_blackbox_heavy_tail_completion(self):
        # non-decaying sampler limit handled through the exact tail mass
        dec = self.dec
        f = np.array([2.0, 0.0])
        mean = np.sum(f * dec.m) / dec.total_mass

        def sampler(s_nodes):
            damp = np.exp(-np.outer(s_nodes, dec.lambdas))
            return (damp * dec.coefficients(f)) @ dec.vectors.T

        got = sub.poisson_via_subordination(sampler, 0.8, tol=1e-7,
                                            tail_value=np.full(2, mean))
        want = sc.apply_poisson(dec, 0.8, f)
        np.testing.assert_allclose(got, want, atol=1e-5)

    def test_explicit_rule(self):
        from semigroup_hls.quadrature import log_trapezoid_rule
        f = np.array([1.0, -1.0])
        rule = log_trapezoid_rule(1e-6, 40.0, 4097)
        got = sub.poisson_via_subordination(
            lambda s: np.exp(-2.0 * s)[:, None] * f, 1.0, rule=rule)
        np.testing.assert_allclose(got, math.exp(-math.sqrt(2)) * f, atol=1e-7)


class TestDyViaSubordination:
    def setup_method(self):
        self.dec = sc.decompose(sc.two_state())

    def test_single_mode_against_spectral_oracle(self):
        f = np.array([1.0, -1.0])
        got = sub.dy_poisson_subordinated(self.dec, 1.0, f)
        want = -math.sqrt(2) * math.exp(-math.sqrt(2)) * f
        np.testing.assert_allclose(got, want, atol=1e-6)

    def test_constant_derivative_vanishes(self):
        got = sub.dy_poisson_subordinated(self.dec, 1.0, np.ones(2))
        np.testing.assert_allclose(got, 0.0, atol=1e-12)

    def test_central_difference_oracle(self):
        rng = np.random.default_rng(42)
        dec = sc.decompose(sc.random_reversible(8, rng))
        f = rng.standard_normal(8)
        y = 0.6
        got = sub.dy_poisson_subordinated(dec, y, f)
        for h in (1e-3, 1e-4):
            central = (sub.poisson_subordinated(dec, y + h, f)
                       - sub.poisson_subordinated(dec, y - h, f)) / (2 * h)
            assert np.max(np.abs(got - central)) < 5.0 * h * h / 1e-3 + 1e-6
        want = sc.dy_harmonic(dec, y, f, 1)
        np.testing.assert_allclose(got, want, atol=1e-6)


class TestDerivativeBound:
    def test_constant_value_and_argmax(self):
        # closed form: the sup of |1 - z/2| e^{-z/8} is 4 e^{-5/4} at z = 10
        c1 = sub.derivative_bound_constant()
        assert abs(c1 - 4.0 * math.exp(-1.25)) < 1e-10
        assert abs(c1 - 1.1460) < 1e-4

    def test_objective_endpoints(self):
        g = lambda z: abs(1.0 - z / 2.0) * math.exp(-z / 8.0)
        assert g(0.0) == 1.0
        assert g(2.0) == 0.0
        assert sub.derivative_bound_constant() >= 1.0

    def test_constant_function_ratio_zero(self):
        dec = sc.decompose(sc.two_state())
        rep = sub.derivative_bound_check(dec, np.ones(2))
        assert rep.passed
        assert rep.value == 0.0

    @pytest.mark.parametrize("seed", [0, 1, 2, 3])
    def test_random_nonnegative_suite(self, seed):
        rng = np.random.default_rng(seed)
        dec = sc.decompose(sc.random_reversible(16, rng))
        c1 = sub.derivative_bound_constant()
        for _ in range(10):
            f = rng.uniform(0.05, 1.0, 16)
            rep = sub.derivative_bound_check(dec, f)
            assert rep.passed
            assert rep.value <= c1 + 1e-3

    def test_signed_input_uses_absolute_value_on_right(self):
        # single mode is not nonnegative; bound is against u_{|f|}
        dec = sc.decompose(sc.two_state())
        rep = sub.derivative_bound_check(dec, np.array([1.0, -1.0]))
        assert rep.passed

    def test_vanishing_entry_stays_below_provable_constant(self):
        # a state where f = 0 drives the ratio toward sqrt(2) (above c1);
        # the subordination proof guarantees sqrt(2) * c1 as a hard bound
        dec = sc.decompose(sc.two_state())
        c1 = sub.derivative_bound_constant()
        rep = sub.derivative_bound_check(dec, np.array([1.0, 0.0]))
        assert rep.value > c1           # sharper than c1 near vanishing states
        assert rep.value <= math.sqrt(2.0) * c1 + 1e-9


class TestPoissonContraction:
    @pytest.mark.parametrize("p", [1, 1.5, 2, 3, math.inf])
    def test_lp_contraction(self, p):
        rng = np.random.default_rng(17)
        dec = sc.decompose(sc.random_reversible(12, rng))
        for _ in range(10):
            f = rng.standard_normal(12)
            y = rng.uniform(0.01, 4.0)
            assert (sc.lp_norm(dec.m, sc.apply_poisson(dec, y, f), p)
                    <= sc.lp_norm(dec.m, f, p) * (1 + 1e-9))


class _PowerLawBackend:
    d = 3

    def __init__(self, exponent, noise=0.0, seed=0):
        self.exponent = exponent
        self.noise = noise
        self.rng = np.random.default_rng(seed)

    def poisson_sup_ratio(self, y, p):
        return y ** self.exponent * math.exp(self.rng.normal(0, self.noise))


class _ZeroBackend:
    d = 3

    def poisson_sup_ratio(self, y, p):
        return 0.0


class TestPoissonDimensionCheckFitting:
    def test_exact_power_law_passes(self):
        rep = sub.poisson_dimension_check(_PowerLawBackend(-1.5), 2,
                                          np.geomspace(1, 100, 12))
        assert rep.passed
        assert abs(rep.value + 1.5) < 1e-12

    def test_noisy_fit_is_inconclusive(self):
        rep = sub.poisson_dimension_check(_PowerLawBackend(-1.5, noise=0.5), 2,
                                          np.geomspace(1, 3, 10))
        assert rep.status == "inconclusive"

    def test_zero_family_skipped(self):
        rep = sub.poisson_dimension_check(_ZeroBackend(), 2,
                                          np.geomspace(1, 10, 5))
        assert rep.status == "skipped"
