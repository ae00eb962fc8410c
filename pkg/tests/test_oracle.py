import numpy as np
import pytest

from cribsim.model import PulseShape
from cribsim.oracle import (ConfigurationMismatch, OracleState, absorption_scan, apply_crib_control,
                            build_oracle, compare_to_semiclassical, evolve, evolve_many,
                            matched_configuration, single_atom_decay)


@pytest.fixture(scope="module")
def small():
    rng = np.random.default_rng(3)
    return build_oracle(rng.uniform(0, 0.1, 6), rng.normal(size=6), 0.05, 32, 10.0)


@pytest.fixture(scope="module")
def matched():
    return matched_configuration()


def test_hamiltonian_hermitian(small):
    h = small.hamiltonian
    assert np.array_equal(h, h.conj().T)
    assert h.shape == (small.dimension, small.dimension)


def test_uncoupled_stays_diagonal():
    system = build_oracle([0.0], [1.5], 0.0, 2, 10.0)
    amps = np.zeros(3, complex)
    amps[0] = 1
    out = evolve(OracleState(amps), system, 3.0).amplitudes
    assert abs(out[0]) == pytest.approx(1.0, abs=1e-12)
    assert np.allclose(out[1:], 0)


def test_zero_time_is_identity(small):
    amps = np.random.default_rng(0).normal(size=small.dimension).astype(complex)
    state = OracleState(amps / np.linalg.norm(amps))
    assert np.array_equal(evolve(state, small, 0.0).amplitudes, state.amplitudes)


def test_eigenvector_is_stationary(small):
    lam, vec = small.eigen
    out = evolve(OracleState(vec[:, 3]), small, 7.0).amplitudes
    assert np.allclose(out, np.exp(-1j * lam[3] * 7.0) * vec[:, 3], atol=1e-10)


def test_norm_conserved(small):
    amps = np.zeros(small.dimension, complex)
    amps[0] = 1
    out = evolve_many(OracleState(amps), small, np.linspace(0, 50, 11))
    assert np.allclose(np.linalg.norm(out, axis=0), 1.0, atol=1e-12)


def test_golden_rule_decay():
    fit = single_atom_decay(0.02)
    assert fit.rate == pytest.approx(fit.predicted, rel=0.05)


def test_control_twice_doubles_phase(small):
    amps = np.ones(small.dimension, complex) / np.sqrt(small.dimension)
    state = OracleState(amps)
    once, sys1 = apply_crib_control(state, small)
    twice, sys2 = apply_crib_control(once, sys1)
    n = small.n_atoms
    expected = amps[:n] * np.exp(-4j * small.k0 * small.positions)
    assert np.allclose(twice.amplitudes[:n], expected)
    assert np.array_equal(sys2.detunings, small.detunings)
    assert np.array_equal(twice.amplitudes[n:], amps[n:])


def test_control_at_origin_only_flips():
    system = build_oracle(np.zeros(3), [1.0, -1.0, 2.0], 0.1, 8, 10.0)
    amps = np.arange(system.dimension, dtype=complex)
    out, flipped = apply_crib_control(OracleState(amps), system)
    assert np.array_equal(out.amplitudes, amps)
    assert np.array_equal(flipped.detunings, -system.detunings)


def test_absorption_of_matched_ensemble(matched):
    scan = absorption_scan(matched.system, matched.shape, 12.0)
    assert scan.best[1] > 0.9


def test_oracle_protocol_recalls_backward(matched):
    rec = matched.oracle_record()
    assert rec.backward_fraction >= 0.9
    assert rec.norm_drift < 1e-9


def test_identical_records_have_zero_distance(matched):
    srec = matched.solver_record()
    orec = matched.oracle_record()
    fake = type(orec)(srec.times, srec.forward_in, srec.backward_out, orec.retrieval_time,
                      orec.atomic_population_t0, orec.backward_fraction, orec.efficiency,
                      orec.norm_drift, orec.dt, orec.pulse)
    assert compare_to_semiclassical(fake, srec).relative_l2 == 0


def test_mismatch_detected(matched):
    srec = matched.solver_record()
    orec = matched.oracle_record()
    other = type(orec)(orec.times, orec.forward_in, orec.backward_out, 9.0, 0, 0, 0, 0, orec.dt)
    with pytest.raises(ConfigurationMismatch):
        compare_to_semiclassical(other, srec)
    short = type(orec)(orec.times[:-5], orec.forward_in[:-5], orec.backward_out[:-5],
                       orec.retrieval_time, 0, 0, 0, 0, orec.dt)
    with pytest.raises(ConfigurationMismatch):
        compare_to_semiclassical(short, srec)


def test_invalid_systems():
    with pytest.raises(ValueError):
        build_oracle([0.0], [0.0], 0.1, 3, 10.0)
    with pytest.raises(ValueError):
        build_oracle([0.0, 1.0], [0.0], 0.1, 4, 10.0)
    with pytest.raises(ValueError):
        matched_configuration(n_atoms=5)
