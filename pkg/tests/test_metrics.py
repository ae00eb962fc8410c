import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cribsim.metrics import (UnresolvableError, echo_overlap, efficiency, energy_balance, evaluate,
                             mode_overlap, ordering_check, richardson, timebin_fidelity)
from cribsim.model import PulseShape

from conftest import echo_run, medium


def test_overlap_identical_and_negated():
    x = np.exp(-np.linspace(-3, 3, 101) ** 2).astype(complex)
    f, p = mode_overlap(x, x)
    assert f == pytest.approx(1.0) and p == pytest.approx(0.0)
    f, p = mode_overlap(-x, x)
    assert f == pytest.approx(1.0) and p == pytest.approx(math.pi)


def test_overlap_orthogonal():
    t = np.linspace(0, 2 * np.pi, 200, endpoint=False)
    f, _ = mode_overlap(np.sin(t), np.cos(t))
    assert f < 1e-20


def test_overlap_shape_mismatch():
    with pytest.raises(ValueError):
        mode_overlap(np.ones(3), np.ones(4))


@settings(max_examples=30)
@given(st.floats(0.1, 100), st.floats(-math.pi, math.pi))
def test_overlap_scale_invariant(scale, phase):
    x = np.exp(-np.linspace(-3, 3, 51) ** 2) * (1 + 0.3j)
    f, p = mode_overlap(scale * np.exp(1j * phase) * x, x)
    assert f == pytest.approx(1.0, abs=1e-12)
    assert abs((p - phase + math.pi) % (2 * math.pi) - math.pi) < 1e-9


def test_zero_depth_gives_no_echo():
    assert efficiency(echo_run(0.0)) == 0.0


def test_zero_input_raises():
    rec = medium(1.0).run(lambda t: np.zeros_like(t, dtype=complex), t_end=3.0)
    with pytest.raises(ValueError, match="zero"):
        efficiency(rec)


def test_efficiency_monotone_in_depth():
    etas = [efficiency(echo_run(d)) for d in (1.0, 3.0, 6.0, 12.0)]
    assert all(a < b for a, b in zip(etas, etas[1:]))


def test_efficiency_invariant_under_energy_rescaling():
    a = efficiency(echo_run(5.0))
    b = efficiency(echo_run(5.0, shape=PulseShape.gaussian(0.0, 1.0, energy=7.0)))
    assert b == pytest.approx(a, rel=1e-12)


def test_echo_is_mirror_image():
    f, phase = echo_overlap(echo_run(8.0))
    assert f > 0.99
    assert abs(abs(phase) - math.pi) < 0.05


def test_single_pulse_ordering():
    rep = ordering_check(echo_run(5.0))
    assert rep.source_order == (0,) and rep.reversed
    assert rep.efficiency_spread == 0.0


def test_overlapping_pulses_unresolvable():
    shape = PulseShape.train([0.0, 0.5], 1.0)
    with pytest.raises(UnresolvableError):
        ordering_check(echo_run(5.0, shape=shape))


def test_qubit_fidelity_drops_with_decay():
    r = 1 / math.sqrt(2)
    shape = PulseShape.time_bin(r, r, 0.0, first_center=0.0, separation=5.0, width=0.7)
    ideal = timebin_fidelity(echo_run(20.0, t0=12.0, shape=shape), r, r)
    lossy = timebin_fidelity(echo_run(20.0, t0=12.0, shape=shape, decay=0.1), r, r)
    assert lossy.leakage > ideal.leakage
    assert lossy.fidelity <= ideal.fidelity + 1e-12


def test_qubit_needs_time_bin_input():
    with pytest.raises(ValueError):
        timebin_fidelity(echo_run(5.0), 1.0, 0.0)


def test_vacuum_balance():
    rec = medium(0.0).run(PulseShape.gaussian(0.0, 1.0))
    assert energy_balance(rec).residual < 1e-12


def test_richardson_exact_for_quadratic_error():
    exact = 3.0
    coarse, fine = exact + 0.4, exact + 0.1
    assert richardson(np.array(coarse), np.array(fine)) == pytest.approx(exact)


def test_evaluate_fields():
    rep = evaluate(echo_run(5.0))
    d = rep.as_dict()
    assert d["efficiency"] == rep.efficiency
    assert rep.qubit_fidelity is None
    assert rep.mode_overlap_fidelity > 0.99
