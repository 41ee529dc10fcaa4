import json

import numpy as np
from scipy import integrate
import pytest
from hypothesis import given, strategies as st

from reverbphase.profiles import (ArProfileSpec, FrequencyProfile, ar_power, constant_profile,
                                  draw_poles, rt60_to_alpha, sample_ar_profile, tabulated_profile)


def test_rt60_conversion():
    assert abs(rt60_to_alpha(0.5) - 6 * np.log(10) / 0.5) < 1e-12
    assert abs(rt60_to_alpha(0.5) - 27.631) < 1e-3
    with pytest.raises(ValueError):
        rt60_to_alpha(0.0)


def test_constant_profile_evaluation():
    p = constant_profile(20.0, 1.5, 4000.0)
    assert p.alpha(123.0) == 20.0 and p.b(-3999.0) == 1.5
    assert p.alpha(np.array([0.0, 1.0])).shape == (2,)
    with pytest.raises(ValueError):
        p.alpha(4000.5)
    with pytest.raises(ValueError):
        constant_profile(0.0, 1.0, 4000.0)


def test_tabulated_interpolates_and_clamps():
    p = tabulated_profile([100.0, 200.0], [10.0, 30.0], [1.0, 3.0], 1000.0)
    assert p.alpha(150.0) == pytest.approx(20.0)
    assert p.alpha(50.0) == 10.0 and p.b(900.0) == 3.0
    with pytest.raises(ValueError):
        tabulated_profile([200.0, 100.0], [1.0, 1.0], [1.0, 1.0], 1000.0)


def test_poles_stable_and_conjugate_closed():
    for order in (1, 2, 7, 8):
        poles = draw_poles(order, 0.95, 3)
        assert poles.size == order
        assert np.all(np.abs(poles) < 0.95)
        assert np.allclose(np.sort_complex(poles), np.sort_complex(poles.conj()))


def test_ar_power_matches_polynomial():
    poles = draw_poles(8, 0.95, 11)
    coeffs = np.poly(poles)
    x = np.linspace(0, 1, 33)
    z = np.exp(1j * np.pi * x)
    # A(z) = prod (1 - p z^-1) = z^-N poly(z)
    direct = 1 / np.abs(np.polyval(coeffs, z) * z ** -8.0) ** 2
    np.testing.assert_allclose(ar_power(poles, x), direct, rtol=1e-9)


def test_ar_profile_hits_target_means():
    spec = ArProfileSpec(seed=4, target_mean_alpha=50.0, target_mean_b=0.003)
    p = sample_ar_profile(spec, 8000.0)
    f = np.linspace(0, 8000, 200001)
    assert integrate.trapezoid(p.alpha(f), f) / 8000 == pytest.approx(50.0, rel=1e-4)
    assert integrate.trapezoid(p.b(f), f) / 8000 == pytest.approx(0.003, rel=1e-4)
    assert np.all(p.alpha(f) > 0)


@given(st.integers(0, 2 ** 64 - 1), st.floats(0, 8000))
def test_profiles_even_bitwise(seed, f):
    p = sample_ar_profile(ArProfileSpec(seed=seed), 8000.0)
    assert p.alpha(f) == p.alpha(-f) and p.b(f) == p.b(-f)


@pytest.mark.parametrize("make", [
    lambda: constant_profile(20.0, 1.0, 8000.0),
    lambda: tabulated_profile([0.0, 5.0, 8000.0], [5.0, 9.0, 2.0], [1.0, 0.5, 0.1], 8000.0),
    lambda: sample_ar_profile(ArProfileSpec(seed=9), 8000.0),
])
def test_json_roundtrip(make):
    p = make()
    q = FrequencyProfile.from_json(p.to_json())
    f = np.linspace(-8000, 8000, 97)
    assert np.array_equal(p.alpha(f), q.alpha(f)) and np.array_equal(p.b(f), q.b(f))
    assert p.digest() == q.digest()
    json.loads(p.to_json())


def test_ar_spec_validation():
    with pytest.raises(ValueError):
        ArProfileSpec(pole_radius_max=1.0)
    with pytest.raises(ValueError):
        ArProfileSpec(seed=-1)
