import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from metacal.errors import ConfigurationError, DegenerateConfigurationError, InvalidInputError
from metacal.estuary import (ParameterBounds, ParameterVector, StationConfig, TideConstituent, BoundaryConfig,
                             TimeGrid, TimeSeries, boundary_level, damping_exponent, propagate_to_station,
                             simulate, synthesize_observations)
from metacal.scenario import DEFAULT_TRUE_PARAMS, default_scenario

P = DEFAULT_TRUE_PARAMS


def one_wave(amplitude=2.0, z_f=-20.0, **kw):
    return BoundaryConfig(z_f, 0.0, (TideConstituent(amplitude, 44714.0, **kw),), (1.0,))


def params(alpha=1.0, beta=1.0, gamma=0.0, ks=(50.0,) * 6):
    return ParameterVector(alpha, beta, gamma, tuple(ks))


class TestBounds:
    def test_default_ranges(self):
        b = ParameterBounds.default()
        assert b.lower == (0.8, 0.8, 0.35, 30, 64, 80, 20, 64, 36)
        assert b.upper == (1.2, 1.2, 0.54, 46, 96, 100, 30, 96, 54)
        assert b.names[0] == "alpha" and b.names[-1] == "ks6"

    def test_inverted_bounds_rejected(self):
        with pytest.raises(InvalidInputError):
            ParameterBounds((1.0,), (0.0,))

    def test_check_names_offending_parameter(self):
        x = ParameterBounds.default().center()
        x[2] = 0.9
        with pytest.raises(InvalidInputError, match="gamma"):
            ParameterBounds.default().check(x)

    def test_unit_roundtrip(self, rng):
        b = ParameterBounds.default()
        x = b.from_unit(rng.random((20, 9)))
        assert np.allclose(b.from_unit(b.to_unit(x)), x)


def test_parameter_vector_requires_finite():
    with pytest.raises(InvalidInputError):
        params(alpha=float("nan"))


class TestBoundaryLevel:
    def test_single_wave_at_origin(self):
        assert boundary_level(params(), one_wave(), 0.0) == pytest.approx(2.0, abs=1e-15)

    def test_zero_tide_leaves_only_the_correction(self):
        # an empty constituent sum is represented by a zero-amplitude wave
        b = one_wave(amplitude=0.0)
        assert boundary_level(params(gamma=0.4), b, 123.0) == pytest.approx(0.4, abs=1e-15)

    def test_requires_a_constituent(self):
        with pytest.raises(ConfigurationError):
            BoundaryConfig(-10.0, 0.0, (), ())

    def test_dry_boundary_names_the_time(self):
        b = one_wave(amplitude=2.0, z_f=-1.0)
        t = np.array([0.0, 44714.0 / 2])
        with pytest.raises(DegenerateConfigurationError) as err:
            boundary_level(params(), b, t)
        assert err.value.time == pytest.approx(44714.0 / 2)
        assert "22357" in str(err.value)

    @settings(max_examples=50, deadline=None)
    @given(st.floats(0.8, 1.2), st.floats(0.35, 0.54), st.floats(0, 2e5))
    def test_linear_in_alpha_additive_in_gamma(self, alpha, gamma, t):
        b = default_scenario().boundary
        base = boundary_level(params(alpha=alpha, gamma=gamma), b, t) - b.z_mean - gamma
        doubled = boundary_level(params(alpha=2 * alpha, gamma=gamma), b, t) - b.z_mean - gamma
        assert doubled == pytest.approx(2 * base, abs=1e-12)
        shifted = boundary_level(params(alpha=alpha, gamma=gamma + 0.1), b, t)
        assert shifted - boundary_level(params(alpha=alpha, gamma=gamma), b, t) == pytest.approx(0.1, abs=1e-12)


class TestPropagation:
    def test_damping_oracle(self):
        # independent arithmetic: mu = c * L * beta * U / (K^2 h^(4/3))
        mu_ref = 1e4 / (50.0**2 * 10.0 ** (4.0 / 3.0))
        assert mu_ref == pytest.approx(0.1857, abs=5e-5)
        station = StationConfig(1, "s", 1e4, 10.0, 1)
        mu = damping_exponent(params(), one_wave(), station, c_damp=1.0)
        assert mu[0] == pytest.approx(mu_ref, rel=1e-14)
        assert math.exp(-mu[0]) == pytest.approx(0.8305, abs=1e-4)

    def test_zero_distance_equals_boundary(self):
        sc = default_scenario()
        grid = TimeGrid(0.0, 600.0, 200)
        station = StationConfig(9, "mouth", 0.0, 12.0, 3)
        series = propagate_to_station(P, sc.boundary, station, grid, sc.c_damp)
        assert np.array_equal(series.values, boundary_level(P, sc.boundary, grid.times))

    def test_grid_size(self):
        sc = default_scenario()
        out = simulate(P, sc.boundary, sc.stations, sc.grid, sc.c_damp)
        assert len(out) == 6
        assert all(len(s) == 2 * 86400 // 60 + 1 == 2881 for s in out)

    def test_permuting_stations_permutes_output(self):
        sc = default_scenario()
        grid = TimeGrid(0.0, 300.0, 100)
        order = [3, 0, 5, 1, 4, 2]
        a = simulate(P, sc.boundary, sc.stations, grid, sc.c_damp)
        b = simulate(P, sc.boundary, [sc.stations[i] for i in order], grid, sc.c_damp)
        for k, i in enumerate(order):
            assert np.array_equal(b[k].values, a[i].values)

    def test_deterministic(self):
        sc = default_scenario()
        a, b = sc.simulate(P), sc.simulate(P)
        assert all(np.array_equal(x.values, y.values) for x, y in zip(a, b))

    @settings(max_examples=40, deadline=None)
    @given(st.floats(20, 90), st.floats(1.0, 50.0), st.floats(1e3, 2e5), st.floats(0.8, 1.2))
    def test_amplitude_monotone(self, ks, dks, dist, beta):
        b = default_scenario().boundary
        st_near = StationConfig(1, "a", dist, 8.0, 2)
        st_far = StationConfig(1, "a", dist * 1.5, 8.0, 2)
        lo = damping_exponent(params(beta=beta, ks=(ks,) * 6), b, st_near, 0.1)
        smoother = damping_exponent(params(beta=beta, ks=(ks + dks,) * 6), b, st_near, 0.1)
        farther = damping_exponent(params(beta=beta, ks=(ks,) * 6), b, st_far, 0.1)
        faster = damping_exponent(params(beta=beta * 1.1, ks=(ks,) * 6), b, st_near, 0.1)
        pos = np.asarray(b.u_amplitudes) > 0
        assert np.all(np.exp(-smoother[pos]) > np.exp(-lo[pos]))
        assert np.all(np.exp(-farther[pos]) < np.exp(-lo[pos]))
        assert np.all(np.exp(-faster[pos]) < np.exp(-lo[pos]))


class TestObservations:
    def test_zero_noise_equals_simulation(self):
        sc = default_scenario(noise_sigma=0.0, discrepancy=False)
        obs = sc.observations()
        sim = sc.simulate(sc.true_params)
        assert all(np.array_equal(o.values, s.values) for o, s in zip(obs, sim))

    def test_same_seed_bit_identical(self):
        sc = default_scenario()
        a, b = sc.observations(), sc.observations()
        assert all(np.array_equal(x.values, y.values) for x, y in zip(a, b))

    def test_noise_level(self):
        sc = default_scenario(noise_sigma=0.02, discrepancy=False)
        obs = synthesize_observations(sc.true_params, sc.boundary, sc.stations, sc.grid, 0.02, 7, sc.c_damp)
        sim = sc.simulate(sc.true_params)
        for o, s in zip(obs, sim):
            assert 0.015 <= np.std(o.values - s.values) <= 0.025

    def test_negative_noise_rejected(self):
        sc = default_scenario()
        with pytest.raises((ConfigurationError, InvalidInputError)):
            synthesize_observations(sc.true_params, sc.boundary, sc.stations, sc.grid, -1.0, 0, sc.c_damp)


def test_time_series_validation():
    with pytest.raises((ConfigurationError, InvalidInputError)):
        TimeSeries(0.0, 0.0, np.zeros(3))
    with pytest.raises((ConfigurationError, InvalidInputError)):
        TimeSeries(0.0, 1.0, np.array([0.0, np.inf]))
