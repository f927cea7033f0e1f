import math

import numpy as np
import pytest
from scipy.integrate import quad

from hardrods.analytics import (
    AnalyticProfile,
    DiffusionParams,
    ProfileKind,
    drift_for_mass,
    forward_y_model_a,
    forward_y_model_c,
    green_function,
    invert_y_model_a,
    invert_y_model_c,
    model_c_total_mass,
    predicted_density_model_a,
    predicted_density_model_c,
    predicted_gap,
    solve_v0,
    stationary_density,
)

HALF = DiffusionParams(a=0.5, sigma2=1.0)


def random_params(rng, count):
    for _ in range(count):
        yield DiffusionParams(a=rng.uniform(0.05, 5.0), sigma2=rng.uniform(0.05, 5.0))


class TestDiffusionParams:
    def test_mass_budget_filled_in(self):
        p = DiffusionParams.barrier(c=30.0, sigma2=1.0, n=1000, b=1.0)
        assert p.epsilon == pytest.approx(1e-3)
        assert abs(p.n * p.epsilon - p.b) <= 1e-12

    def test_b_from_n_and_epsilon(self):
        p = DiffusionParams(a=1.0, sigma2=1.0, epsilon=0.01, n=50)
        assert p.b == pytest.approx(0.5)

    @pytest.mark.parametrize("kwargs", [
        dict(a=0.0, sigma2=1.0),
        dict(a=1.0, sigma2=-1.0),
        dict(a=1.0, sigma2=1.0, epsilon=-0.1),
        dict(a=1.0, sigma2=1.0, c=2.0),
        dict(a=1.0, sigma2=1.0, epsilon=0.1, n=10, b=2.0),
    ])
    def test_rejects_invalid(self, kwargs):
        with pytest.raises(ValueError):
            DiffusionParams(**kwargs)


class TestStationaryDensity:
    def test_rate_twice_drift_unit_noise(self):
        assert stationary_density(DiffusionParams(a=1.0, sigma2=1.0), 0.0) == 2.0

    def test_half_at_ln2(self):
        assert stationary_density(HALF, math.log(2)) == pytest.approx(0.5, abs=1e-15)

    def test_negative_z(self):
        with pytest.raises(ValueError):
            stationary_density(HALF, -1e-9)

    def test_normalised(self):
        rng = np.random.default_rng(11)
        for p in random_params(rng, 100):
            # tail beyond 60/rate is exp(-60)
            total, err = quad(lambda z: stationary_density(p, z), 0, 60 / p.rate, epsabs=1e-14, limit=200)
            assert abs(total - 1.0) <= 1e-10


class TestGreenFunction:
    def test_zero_at_killing_level(self):
        assert green_function(HALF, 0.5, 0.5) == 0.0

    def test_direct_value(self):
        assert green_function(HALF, math.log(2), 0.0) == pytest.approx(2.0, rel=1e-14)

    @pytest.mark.parametrize("v", [-0.1, 0.6])
    def test_domain(self, v):
        with pytest.raises(ValueError):
            green_function(HALF, 0.5, v)

    def test_positive_and_decreasing(self):
        rng = np.random.default_rng(3)
        for p in random_params(rng, 50):
            v1 = rng.uniform(0.05, 3.0)
            grid = np.linspace(0, v1, 2001)
            g = green_function(p, v1, grid)
            assert np.all(g >= 0)
            assert g[-1] == 0.0
            assert np.all(np.diff(g) < 0)

    def test_solves_adjoint_equation(self):
        # unit flux to the kill level: -a G - (sigma2/2) G' = 1
        p = DiffusionParams(a=0.7, sigma2=1.3)
        v, dv = 0.3, 1e-6
        g = green_function(p, 1.0, v)
        dg = (green_function(p, 1.0, v + dv) - green_function(p, 1.0, v - dv)) / (2 * dv)
        assert -p.a * g - 0.5 * p.sigma2 * dg == pytest.approx(1.0, rel=1e-7)


class TestSolveV0:
    def test_half_drift(self):
        assert solve_v0(HALF) == pytest.approx(math.log(2), abs=1e-15)

    @pytest.mark.parametrize("sigma2", [0.1, 1.0, 7.0])
    def test_a_equals_half_sigma2(self, sigma2):
        assert solve_v0(DiffusionParams(a=sigma2 / 2, sigma2=sigma2)) == pytest.approx(math.log(2), rel=1e-14)

    def test_residual(self):
        rng = np.random.default_rng(5)
        for p in random_params(rng, 100):
            v0 = solve_v0(p)
            k = p.sigma2 / (2 * p.a)
            assert abs(k * math.expm1(v0 / k) - 1.0) <= 1e-12

    def test_defining_integral(self):
        # 1 = int_0^v0 (exp(2a(v0-v)/sigma2) - 1) dv + v0
        p = DiffusionParams(a=1.3, sigma2=0.4)
        v0 = solve_v0(p)
        integral, _ = quad(lambda v: math.expm1(2 * p.a * (v0 - v) / p.sigma2), 0, v0)
        assert integral + v0 == pytest.approx(1.0, abs=1e-12)


class TestPredictedDensityModelC:
    def test_vanishes_at_one(self):
        assert predicted_density_model_c(1.0, HALF) == 0.0

    def test_values(self):
        assert predicted_density_model_c(0.0, HALF) == pytest.approx(0.5)
        assert predicted_density_model_c(0.25, HALF) == pytest.approx(0.75 / 1.75, abs=1e-15)
        assert 0.75 / 1.75 == pytest.approx(0.4285714, abs=1e-7)

    def test_domain(self):
        with pytest.raises(ValueError):
            predicted_density_model_c(1.01, HALF)

    def test_endpoint_and_monotone(self):
        rng = np.random.default_rng(9)
        grid = np.linspace(0, 1, 10_000)
        for p in random_params(rng, 20):
            f = predicted_density_model_c(grid, p)
            assert f[0] == pytest.approx(1 / (1 + p.sigma2 / (2 * p.a)))
            assert f[-1] == 0.0
            assert np.all(np.diff(f) <= 0)
            assert np.all((0 <= f) & (f <= 1))

    def test_matches_density_of_y_map(self):
        # mass density at x is phi(y)/(1 + phi(y)) with phi = exp(2a(v0-y)/sigma2) - 1
        rng = np.random.default_rng(2)
        for p in random_params(rng, 20):
            v0 = solve_v0(p)
            for x in rng.uniform(0, 1, 10):
                y = invert_y_model_c(x, p)
                phi = math.expm1(2 * p.a * (v0 - y) / p.sigma2)
                assert phi / (1 + phi) == pytest.approx(predicted_density_model_c(x, p), abs=1e-9)

    def test_total_mass(self):
        total, _ = quad(lambda x: predicted_density_model_c(x, HALF), 0, 1)
        assert total == pytest.approx(model_c_total_mass(1.0), abs=1e-12)
        assert total == pytest.approx(1 - math.log(2), abs=1e-12)


class TestInvertYModelA:
    def test_origin(self):
        assert invert_y_model_a(0.0, 1.0, 2.0) == 0.0

    def test_round_trip_value(self):
        x = forward_y_model_a(1.0, 1.0, 2.0)
        assert x == pytest.approx(1.8646647, abs=1e-7)
        assert invert_y_model_a(x, 1.0, 2.0) == pytest.approx(1.0, abs=1e-8)

    def test_asymptote(self):
        assert abs(invert_y_model_a(50.0, 1.0, 2.0) - 49.0) <= 1e-6

    def test_round_trip_random(self):
        rng = np.random.default_rng(7)
        for _ in range(1000):
            b, lam = rng.uniform(0.01, 5), rng.uniform(0.1, 100)
            x = rng.uniform(0, 10)
            y = invert_y_model_a(x, b, lam)
            assert abs(forward_y_model_a(y, b, lam) - x) <= 1e-8 * max(1, x)

    def test_monotone(self):
        xs = np.linspace(0, 5, 500)
        ys = [invert_y_model_a(x, 1.0, 60.0) for x in xs]
        assert np.all(np.diff(ys) > 0)

    def test_negative(self):
        with pytest.raises(ValueError):
            invert_y_model_a(-1.0, 1.0, 2.0)


class TestInvertYModelC:
    def test_endpoints(self):
        assert invert_y_model_c(0.0, HALF) == 0.0
        assert invert_y_model_c(1.0, HALF) == pytest.approx(solve_v0(HALF))
        assert forward_y_model_c(solve_v0(HALF), HALF) == pytest.approx(1.0, abs=1e-14)

    def test_midpoint_residual(self):
        y = invert_y_model_c(0.5, HALF)
        assert abs(forward_y_model_c(y, HALF) - 0.5) <= 1e-10
        assert 0 <= y <= solve_v0(HALF)

    def test_against_closed_form(self):
        # x = k(1 + 1/k)(1 - exp(-y/k))  =>  y = -k log(1 - x/(1 + k))
        rng = np.random.default_rng(1)
        for p in random_params(rng, 200):
            k = p.sigma2 / (2 * p.a)
            x = rng.uniform(0, 1)
            assert invert_y_model_c(x, p) == pytest.approx(-k * math.log1p(-x / (1 + k)), abs=1e-8)

    def test_round_trip_random(self):
        rng = np.random.default_rng(8)
        for p in random_params(rng, 1000):
            x = rng.uniform(0, 1)
            y = invert_y_model_c(x, p)
            assert abs(forward_y_model_c(y, p) - x) <= 1e-8

    def test_domain(self):
        with pytest.raises(ValueError):
            invert_y_model_c(1.5, HALF)


class TestPredictedGap:
    def test_values(self):
        p = DiffusionParams(a=0.5, sigma2=1.0, epsilon=0.01)
        assert predicted_gap(0.0, p) == pytest.approx(0.01)
        assert predicted_gap(0.5, p) == pytest.approx(0.02)

    def test_point_particles(self):
        assert np.all(predicted_gap(np.linspace(0, 0.99, 20), HALF) == 0)

    def test_pole(self):
        with pytest.raises(ValueError):
            predicted_gap(1.0, HALF)


def test_drift_for_mass_inverts_total_mass():
    a = drift_for_mass(1 - math.log(2), 1.0)
    assert a == pytest.approx(0.5, rel=1e-10)


def test_model_a_profile_limits():
    p = DiffusionParams.barrier(c=30.0, sigma2=1.0, n=1000, b=1.0)
    prof = AnalyticProfile(ProfileKind.MODEL_A_PSEUDO_STATIONARY, p)
    assert prof(0.0) == pytest.approx(60 / 61)
    assert prof(3.0) < 1e-12
    # mass conservation: integral over the comoving frame is b
    total, _ = quad(lambda x: predicted_density_model_a(x, 1.0, 60.0), 0, 5, limit=200, points=[1.0])
    assert total == pytest.approx(1.0, abs=1e-8)
