import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cribsim.broadening import (DetuningProfile, PhysicalShiftModel, band_mask, broadening_warning, flip,
                                line_grid, make_profile, remove_then_reestablish, spectral_grid)


def test_gaussian_peak_value():
    p = make_profile("gaussian", 1.0)
    assert p.density(0.0) == pytest.approx(1 / math.sqrt(2 * math.pi))


def test_uniform_box():
    p = make_profile("uniform", 1.0)
    assert p.density(0.5) == 0.5 and p.density(-1.0) == 0.5 and p.density(1.5) == 0.0


def test_gradient_flip():
    p = make_profile("linear_gradient", slope=2.0)
    z = np.array([0.0, 0.25, 1.0])
    assert np.allclose(flip(p).gradient_detunings(z, 1.0), -2.0 * (z - 0.5))


@pytest.mark.parametrize("kind,width", [("gaussian", 0.0), ("uniform", -1.0), ("linear_gradient", None)])
def test_invalid_profiles(kind, width):
    with pytest.raises(ValueError):
        make_profile(kind, width)


def test_flip_sign_and_involution():
    p = make_profile("lorentzian", 2.0)
    assert flip(p).sign == -1
    assert flip(flip(p)) == p


def test_flip_negates_nodes():
    lines = line_grid(make_profile("gaussian", 3.0), 32)
    assert np.allclose(lines.detunings(-1), -lines.detunings(1))


def test_flip_removed_profile_errors():
    removed, _ = remove_then_reestablish(make_profile("gaussian", 1.0), -1)
    with pytest.raises(ValueError):
        flip(removed)


def test_remove_then_reestablish():
    p = make_profile("gaussian", 1.0)
    removed, final = remove_then_reestablish(p, -1)
    assert removed.sign == 0
    assert final == flip(p)
    assert remove_then_reestablish(p, 1)[1] == p
    with pytest.raises(ValueError):
        remove_then_reestablish(p, 0)


@settings(max_examples=40, deadline=None)
@given(st.sampled_from(["gaussian", "lorentzian", "uniform"]), st.floats(0.1, 50), st.integers(1, 600),
       st.lists(st.floats(-30, 30), min_size=1, max_size=3))
def test_density_integrates_to_one(kind, width, n, centers):
    p = DetuningProfile(kind, width, centers=tuple(centers))
    if n == 1 and len(centers) > 1:
        return
    g = spectral_grid(p, n)
    assert abs(np.sum(g.weights * g.density) - 1) < 1e-10


@settings(max_examples=30, deadline=None)
@given(st.sampled_from(["gaussian", "lorentzian", "uniform"]), st.floats(0.1, 10), st.sampled_from([-1, 1]))
def test_flip_involution_property(kind, width, sign):
    p = make_profile(kind, width, sign=sign)
    assert flip(flip(p)) == p


def test_gauss_rule():
    g = spectral_grid(make_profile("gaussian", 2.0), 16, rule="gauss")
    assert abs(np.sum(g.probabilities * g.nodes ** 2) - 4.0) < 1e-10
    g = spectral_grid(make_profile("uniform", 2.0), 8, rule="gauss")
    assert abs(np.sum(g.probabilities) - 1) < 1e-12


def test_band_mask():
    g = spectral_grid(make_profile("gaussian", 1.0), 64)
    full = band_mask(g, -100, 100)
    assert full.mask.all() and full.warning is None
    empty = band_mask(g, 50, 60)
    assert not empty.mask.any() and "no detuning" in empty.warning
    with pytest.raises(ValueError):
        band_mask(g, 1, 1)


def test_two_lines_tracked():
    lines = line_grid(make_profile("gaussian", 1.0, centers=(0.0, 20.0)), 64)
    assert set(lines.line_index.tolist()) == {0, 1}
    # Flipping reverses each line about its own center.
    assert np.allclose(np.sort(lines.detunings(-1)), np.sort(lines.detunings(1)))


def test_broadening_warning():
    p = make_profile("gaussian", 5.0)
    assert broadening_warning(p, 10.0) is None
    assert "exceeds" in broadening_warning(p, 1.0)


def test_shift_coefficients():
    assert PhysicalShiftModel("zeeman").shift_from_field(1.0) == 13e6
    assert PhysicalShiftModel("dc_stark").shift_from_field(1.0) == 100e3
    assert PhysicalShiftModel("ac_stark").shift_from_field(1e9) == pytest.approx(200e6)
    assert PhysicalShiftModel("ac_stark", laser_detuning_nm=-10).shift_from_field(1e9) == pytest.approx(-200e6)


@settings(max_examples=50)
@given(st.sampled_from(["zeeman", "dc_stark", "ac_stark"]), st.floats(-1e6, 1e6, allow_subnormal=False))
def test_shift_linear(mech, x):
    m = PhysicalShiftModel(mech)
    assert m.shift_from_field(2 * x) == pytest.approx(2 * m.shift_from_field(x), rel=1e-12)


def test_shift_model_validation():
    with pytest.raises(ValueError):
        PhysicalShiftModel("zeeman", coefficient=-1.0)
    with pytest.raises(ValueError):
        PhysicalShiftModel("ac_stark", laser_detuning_nm=0.0)
