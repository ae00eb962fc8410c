"""Acceptance criteria 1-13, one test each, each printing a PASS/FAIL line.

Expected values are closed-form results of the linear equations (Beer-Lambert
attenuation, (1 - e^-d)^2 backward and d^2 e^-d forward efficiency) or
independent computations (the exact single-excitation model, a Richardson
reference from two solver resolutions).
"""

import math
import time

import numpy as np
import pytest

from conftest import echo_run, medium, phase_distance
from cribsim.broadening import PhysicalShiftModel, flip, make_profile
from cribsim.cli import resolve_config
from cribsim.config import parse_config, serialize_config
from cribsim.io import write_outputs
from cribsim.metrics import (band_energy, echo_overlap, echo_peak_time, efficiency, energy_balance,
                             evaluate, ordering_check, richardson, timebin_fidelity)
from cribsim.model import ControlEvent, ControlSchedule, PulseShape, SpatialGrid
from cribsim.oracle import (compare_to_semiclassical, matched_configuration, mirror_configuration,
                            mirror_symmetry)
from cribsim.solver import MaxwellBlochSolver, run_protocol, transmission


def test_criterion_01_vacuum_transport(acceptance):
    start = time.perf_counter()
    shape = PulseShape.gaussian(0.0, 1.0)
    rec = medium(0.0, n_z=51, length=1.0).run(shape)
    expected = shape(rec.times - rec.length)
    err = float(np.max(np.abs(rec.forward_out - expected)))
    elapsed = time.perf_counter() - start
    acceptance(1, err < 1e-12 and elapsed < 1.0, f"max amplitude error {err:.2e}, {elapsed:.2f} s")


@pytest.mark.parametrize("d", [1.0, 2.0, 5.0])
def test_criterion_02_beer_lambert(acceptance, d):
    start = time.perf_counter()
    probe = PulseShape.gaussian(0.0, 2.0)
    solver = MaxwellBlochSolver(SpatialGrid(0.1, 31, lead_in=12.0), make_profile("gaussian", 10.0), d,
                                n_delta=512, cutoff=5.0)
    t = transmission(solver, probe)
    rel = t / math.exp(-d) - 1.0
    elapsed = time.perf_counter() - start
    acceptance(2, abs(rel) < 0.01 and elapsed < 10.0,
               f"d={d:g}: T={t:.6g} vs e^-d={math.exp(-d):.6g} (rel {rel:+.2e}), {elapsed:.2f} s")


def test_criterion_03_backward_efficiency(acceptance):
    start = time.perf_counter()
    etas = {d: efficiency(echo_run(d)) for d in (1.0, 2.0, 5.0, 10.0, 20.0)}
    errs = {d: abs(etas[d] - (1 - math.exp(-d)) ** 2) for d in (1.0, 2.0, 5.0, 10.0)}
    # Independent reference: Richardson extrapolation of two grids at d = 5.
    coarse = efficiency(echo_run(5.0, n_z=6))
    fine = efficiency(echo_run(5.0, n_z=11))
    ref = float(richardson(np.array(coarse), np.array(fine)))
    ordered = [etas[d] for d in sorted(etas)]
    monotone = all(b >= a for a, b in zip(ordered, ordered[1:]))
    elapsed = time.perf_counter() - start
    ok = max(errs.values()) <= 0.02 and monotone and abs(ref - (1 - math.exp(-5)) ** 2) <= 0.02 and elapsed < 120
    acceptance(3, ok, "eta " + ", ".join(f"d={d:g}:{e:.5f}" for d, e in etas.items())
               + f"; max |err| {max(errs.values()):.2e}; Richardson d=5 {ref:.5f}; {elapsed:.1f} s")


def test_criterion_04_forward_efficiency(acceptance):
    start = time.perf_counter()
    rows = []
    ok = True
    for d in (1.0, 2.0, 4.0):
        fwd = efficiency(echo_run(d, imprint=False))
        bwd = efficiency(echo_run(d))
        target = d * d * math.exp(-d)
        ok &= abs(fwd - target) <= 0.02 and fwd < bwd
        rows.append(f"d={d:g}: {fwd:.4f} vs {target:.4f} (backward {bwd:.4f})")
    elapsed = time.perf_counter() - start
    acceptance(4, ok and elapsed < 60, "; ".join(rows) + f"; {elapsed:.1f} s")


def test_criterion_05_time_reversal_phase(acceptance):
    start = time.perf_counter()
    rec = echo_run(20.0)
    fid, phase = echo_overlap(rec)
    elapsed = time.perf_counter() - start
    acceptance(5, fid >= 0.99 and phase_distance(phase) <= 0.05 and elapsed < 60,
               f"F={fid:.8f}, phase={phase:.5f}, {elapsed:.2f} s")


def test_criterion_06_oracle_equivalence(acceptance):
    start = time.perf_counter()
    setup = matched_configuration(n_atoms=20, n_modes=128, optical_depth=3.0)
    rep = compare_to_semiclassical(setup.oracle_record(), setup.solver_record())
    elapsed = time.perf_counter() - start
    fid_gap = abs(rep.oracle_fidelity - rep.solver_fidelity)
    ok = (rep.efficiency_relative_difference <= 0.05 and rep.relative_l2 <= 0.05 and fid_gap <= 0.02
          and elapsed < 300)
    acceptance(6, ok, f"eta oracle {rep.oracle_efficiency:.4f} vs solver {rep.solver_efficiency:.4f} "
               f"(rel {rep.efficiency_relative_difference:.3f}), rel L2 {rep.relative_l2:.4f}, "
               f"fidelity gap {fid_gap:.2e}, {elapsed:.1f} s")


def test_criterion_07_exact_symmetry(acceptance):
    start = time.perf_counter()
    system = mirror_configuration()
    rep = mirror_symmetry(system, PulseShape.gaussian(5.0, 1.0), 10.0)
    elapsed = time.perf_counter() - start
    ok = (rep.atomic_population >= 1 - 1e-3 and rep.mismatch <= 2e-2
          and phase_distance(rep.phase) <= 0.05 and elapsed < 300)
    acceptance(7, ok, f"atomic population {rep.atomic_population:.5f}, mismatch {rep.mismatch:.4f}, "
               f"phase {rep.phase:.4f}, backward fraction {rep.backward_fraction:.4f}, {elapsed:.1f} s")


def test_criterion_08_time_bin_qubit(acceptance):
    start = time.perf_counter()
    r = 1 / math.sqrt(2)
    states = [(1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (r, r, 0.0), (r, r, math.pi),
              (r, r, math.pi / 2), (r, r, -math.pi / 2)]
    eta20 = efficiency(echo_run(20.0))
    worst_f, worst_leak = 1.0, 0.0
    for a, b, phi in states:
        shape = PulseShape.time_bin(a, b, phi, first_center=0.0, separation=5.0, width=0.7)
        rec = echo_run(20.0, t0=12.0, shape=shape)
        q = timebin_fidelity(rec, a, b, phi)
        worst_f = min(worst_f, q.fidelity)
        worst_leak = max(worst_leak, q.leakage)
    elapsed = time.perf_counter() - start
    bound = 1 - eta20 + 0.01
    acceptance(8, worst_f >= 0.99 and worst_leak <= bound and elapsed < 180,
               f"min fidelity {worst_f:.8f}, max leakage {worst_leak:.2e} (bound {bound:.3f}), {elapsed:.1f} s")


def test_criterion_09_inverse_order(acceptance):
    start = time.perf_counter()
    shape = PulseShape.train([2.0, 5.0, 9.0], width=0.7)
    rec = echo_run(20.0, t0=12.0, shape=shape)
    rep = ordering_check(rec)
    elapsed = time.perf_counter() - start
    ok = rep.reversed and rep.efficiency_spread <= 0.02 and elapsed < 60
    acceptance(9, ok, f"echo peaks {[round(t, 3) for t in rep.output_peaks]} from pulses {rep.source_order}, "
               f"efficiencies {[round(e, 6) for e in rep.efficiencies]}, {elapsed:.2f} s")


def test_criterion_10_shelving(acceptance):
    start = time.perf_counter()
    tau = 5.0
    solver = medium(5.0)
    shape = PulseShape.gaussian(0.0, 1.0)
    base = solver.run(shape, ControlSchedule.crib(8.0))
    events = ControlSchedule.crib(8.0).events + (ControlEvent(8.0, "shelve", duration=tau),)
    paused = solver.run(shape, ControlSchedule(events))
    delay = echo_peak_time(paused) - echo_peak_time(base)
    n = int(round(tau / base.dt))
    a = base.backward_out
    b = paused.backward_out[n:n + a.size]
    change = float(np.max(np.abs(b - a)) / np.max(np.abs(a)))
    elapsed = time.perf_counter() - start
    acceptance(10, abs(delay - tau) <= base.dt and change < 1e-6 and elapsed < 60,
               f"delay {delay:.6f} (tau {tau}), shape change {change:.2e}, {elapsed:.2f} s")


def test_criterion_11_frequency_multiplexing(acceptance):
    start = time.perf_counter()
    config = resolve_config("two-line-multiplexing")
    rec = run_protocol(config)
    window1 = (8.0, 20.0)
    line1 = band_energy(rec, -10.0, 10.0, window1)
    leak2 = band_energy(rec, 10.0, 30.0, window1)
    late2 = band_energy(rec, 10.0, 30.0, (20.0, float(rec.times[-1])))
    e_in2 = 0.5  # two equal, nearly orthogonal pulses share unit energy
    elapsed = time.perf_counter() - start
    ratio = leak2 / line1
    ok = ratio < 1e-3 and late2 / e_in2 > 0.5 and elapsed < 120
    acceptance(11, ok, f"line-2/line-1 echo energy {ratio:.2e}; line-2 recalled later with "
               f"efficiency {late2 / e_in2:.4f}; {elapsed:.1f} s")


def _convergence_ratios():
    shape = PulseShape.gaussian(0.0, 1.0)
    sched = ControlSchedule.crib(6.0)

    def series(n_z):
        s = MaxwellBlochSolver(SpatialGrid(0.2, n_z), make_profile("gaussian", 5.0), 5.0, n_delta=256)
        return s.run(shape, sched, t_end=14.0)

    runs = {n: series(n) for n in (6, 11, 21, 41, 81)}
    coarse_t = runs[6].times

    def on_coarse(rec):
        stride = int(round(runs[6].dt / rec.dt))
        out = rec.backward_out[::stride]
        assert np.allclose(rec.times[::stride], coarse_t)
        return out

    ref = richardson(on_coarse(runs[41]), on_coarse(runs[81]))
    errs = [float(np.linalg.norm(on_coarse(runs[n]) - ref)) for n in (6, 11, 21)]
    return [a / b for a, b in zip(errs, errs[1:])]


def test_criterion_12_property_suites(acceptance, tmp_path):
    start = time.perf_counter()
    shape = PulseShape.gaussian(0.0, 1.0)
    sched = ControlSchedule.crib(8.0)
    solver = medium(5.0, n_delta=128)
    # Linearity and superposition.
    c = 0.7 - 1.3j
    base = solver.run(shape, sched)
    t_end = float(base.times[-1])
    scaled = solver.run(lambda t: c * shape(t), sched, t_end=t_end)
    lin = np.max(np.abs(scaled.backward_out - c * base.backward_out)) / np.max(np.abs(c * base.backward_out))
    other = PulseShape.gaussian(1.5, 0.6, detuning=2.0)
    both = solver.run(lambda t: shape(t) + other(t), sched, t_end=t_end)
    single = solver.run(other, sched, t_end=t_end)
    sup = (np.max(np.abs(both.backward_out - base.backward_out - single.backward_out))
           / np.max(np.abs(both.backward_out)))
    # Energy balance.
    bal = energy_balance(base).residual
    # Flip involution at trajectory level.
    twice = solver.run(shape, ControlSchedule((ControlEvent(4.0, "flip"), ControlEvent(4.0, "flip"))),
                       t_end=t_end)
    none = solver.run(shape, ControlSchedule(), t_end=t_end)
    inv = float(np.max(np.abs(twice.forward_out - none.forward_out)))
    prof = make_profile("gaussian", 3.0)
    involution = flip(flip(prof)) == prof and inv < 1e-10
    # Convergence order.
    ratios = _convergence_ratios()
    # Config round trip and output determinism.
    cfg = resolve_config("basic-echo")
    rt = parse_config(serialize_config(parse_config(serialize_config(cfg)))) == cfg
    rec = run_protocol(cfg)
    p1 = write_outputs(rec, evaluate(rec), cfg, tmp_path / "a")
    rec2 = run_protocol(cfg)
    p2 = write_outputs(rec2, evaluate(rec2), cfg, tmp_path / "b")
    det = all(x.read_bytes() == y.read_bytes() for x, y in zip(p1, p2))
    elapsed = time.perf_counter() - start
    ok = (lin < 1e-10 and sup < 1e-10 and bal < 1e-6 and involution and all(3.5 <= r <= 4.5 for r in ratios)
          and rt and det and elapsed < 600)
    acceptance(12, ok, f"linearity {lin:.1e}, superposition {sup:.1e}, balance {bal:.1e}, "
               f"flip involution {involution}, convergence ratios {[round(r, 3) for r in ratios]}, "
               f"round trip {rt}, deterministic {det}, {elapsed:.1f} s")


def test_criterion_13_physical_shifts(acceptance):
    zeeman = PhysicalShiftModel("zeeman").shift_from_field(1.0)
    stark = PhysicalShiftModel("dc_stark").shift_from_field(1.0)
    light = PhysicalShiftModel("ac_stark", laser_detuning_nm=10.0).shift_from_field(1e9)
    light_inv = PhysicalShiftModel("ac_stark", laser_detuning_nm=-10.0).shift_from_field(1e9)
    models = [PhysicalShiftModel(m) for m in ("zeeman", "dc_stark", "ac_stark")]
    linear = all(m.shift_from_field(2 * 3.7) == 2 * m.shift_from_field(3.7) for m in models)
    ok = (zeeman == 13e6 and stark == 100e3 and light == pytest.approx(200e6, rel=1e-15)
          and light_inv == -light and linear)
    acceptance(13, ok, f"Zeeman {zeeman:.6g} Hz/mT, dc Stark {stark:.6g} Hz per V/cm, "
               f"light shift {light:.6g} Hz / {light_inv:.6g} Hz at +-10 nm, linear {linear}")
