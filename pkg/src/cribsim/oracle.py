"""Exact single-excitation model of atoms coupled to a band of 1-D field modes.

The basis is ``{atom n excited} + {one photon in mode k}``, dimension
``N + M``. In the frame rotating at the carrier frequency the atomic energies
are ``-Delta_n`` (with ``Delta = omega_0 - omega_atom``) and a mode with
wavenumber ``k = +-(k0 + q)`` has energy ``q`` (linear dispersion, c = 1).
Atom ``n`` couples to every mode with ``-i c_n exp(i k z_n)`` in the
rotating-wave approximation. The box is periodic with length ``L_box``.

Atoms are placed in pairs a quarter carrier wavelength apart. The two
members of a pair then form one combination coupled only to the forward
band and one coupled only to the backward band, which is the discrete
version of the delta-correlation condition on the mode sums.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .broadening import make_profile
from .metrics import mode_overlap
from .model import ControlSchedule, PulseShape, SpatialGrid
from .solver import MaxwellBlochSolver, NumericalError

DEFAULT_CARRIER_INDEX = 20000
PROBE_DISTANCE = 2.0
NORM_TOLERANCE = 1e-9
# Grid used to project an initial wave packet on the box modes.
PROJECTION_POINTS = 8192


class ConfigurationMismatch(ValueError):
    """Oracle and solver records do not describe the same experiment."""


@dataclass(frozen=True, eq=False)
class OracleSystem:
    """Atoms plus a two-sided band of ``M`` modes (``M/2`` per direction).

    ``positions`` and ``detunings`` are per atom; ``coupling`` is a scalar or a
    per-atom array. ``carrier_index`` fixes ``k0 = 2 pi K / L_box``.
    """

    positions: np.ndarray
    detunings: np.ndarray
    coupling: np.ndarray
    n_modes: int
    box: float
    carrier_index: int = DEFAULT_CARRIER_INDEX

    def __post_init__(self) -> None:
        z = np.atleast_1d(np.asarray(self.positions, dtype=float))
        d = np.atleast_1d(np.asarray(self.detunings, dtype=float))
        if z.size < 1:
            raise ValueError("oracle needs at least one atom")
        if d.shape != z.shape:
            raise ValueError("one detuning per atom required")
        c = np.broadcast_to(np.asarray(self.coupling, dtype=float), z.shape).copy()
        if not np.all(np.isfinite(c)) or not np.all(np.isfinite(z)) or not np.all(np.isfinite(d)):
            raise ValueError("oracle parameters must be finite")
        if self.n_modes < 2 or self.n_modes % 2:
            raise ValueError("mode count must be even and >= 2")
        if not self.box > 0:
            raise ValueError("box length must be positive")
        object.__setattr__(self, "positions", z)
        object.__setattr__(self, "detunings", d)
        object.__setattr__(self, "coupling", c)
        h = self.hamiltonian
        if not np.array_equal(h, h.conj().T):
            raise RuntimeError("constructed Hamiltonian is not self-adjoint")

    @property
    def n_atoms(self) -> int:
        return self.positions.size

    @property
    def dimension(self) -> int:
        return self.n_atoms + self.n_modes

    @property
    def k0(self) -> float:
        return 2 * math.pi * self.carrier_index / self.box

    @cached_property
    def band_offsets(self) -> np.ndarray:
        """Offsets ``q`` of the ``M/2`` modes in each direction."""
        half = self.n_modes // 2
        return 2 * math.pi * (np.arange(half) - half // 2) / self.box

    @cached_property
    def wavenumbers(self) -> np.ndarray:
        q = self.band_offsets
        return np.concatenate([self.k0 + q, -(self.k0 + q)])

    @property
    def forward_slice(self) -> slice:
        return slice(self.n_atoms, self.n_atoms + self.n_modes // 2)

    @property
    def backward_slice(self) -> slice:
        return slice(self.n_atoms + self.n_modes // 2, self.dimension)

    @cached_property
    def hamiltonian(self) -> np.ndarray:
        n, m = self.n_atoms, self.n_modes
        h = np.zeros((n + m, n + m), dtype=complex)
        h[np.arange(n), np.arange(n)] = -self.detunings
        q = self.band_offsets
        h[n + np.arange(m), n + np.arange(m)] = np.concatenate([q, q])
        block = -1j * self.coupling[:, None] * np.exp(1j * np.outer(self.positions, self.wavenumbers))
        h[:n, n:] = block
        h[n:, :n] = block.conj().T
        return h

    @cached_property
    def eigen(self) -> tuple[np.ndarray, np.ndarray]:
        return np.linalg.eigh(self.hamiltonian)

    def with_detunings(self, detunings) -> "OracleSystem":
        return OracleSystem(self.positions, detunings, self.coupling, self.n_modes, self.box,
                            self.carrier_index)


@dataclass(frozen=True, eq=False)
class OracleState:
    amplitudes: np.ndarray
    t: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "amplitudes", np.asarray(self.amplitudes, dtype=complex))

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))


def build_oracle(positions, detunings, coupling, n_modes: int, box: float,
                 carrier_index: int = DEFAULT_CARRIER_INDEX) -> OracleSystem:
    return OracleSystem(positions, detunings, coupling, n_modes, box, carrier_index)


def _check_norm(before: float, after, duration: float) -> None:
    drift = np.max(np.abs(np.atleast_1d(after) - before))
    if drift > NORM_TOLERANCE * max(1.0, abs(duration)):
        raise NumericalError(f"norm drift {drift:.3g} exceeds tolerance")


def evolve_many(state: OracleState, system: OracleSystem, taus) -> np.ndarray:
    """Amplitudes after each duration in ``taus``, shape ``(dimension, len(taus))``."""
    taus = np.atleast_1d(np.asarray(taus, dtype=float))
    lam, vec = system.eigen
    coeff = vec.conj().T @ state.amplitudes
    out = vec @ (np.exp(-1j * np.outer(lam, taus)) * coeff[:, None])
    if taus.size:
        _check_norm(state.norm, np.linalg.norm(out, axis=0), float(np.max(np.abs(taus))))
    return out


def evolve(state: OracleState, system: OracleSystem, tau: float) -> OracleState:
    if tau == 0:
        return OracleState(state.amplitudes.copy(), state.t)
    amps = evolve_many(state, system, [tau])[:, 0]
    return OracleState(amps, state.t + tau)


def apply_crib_control(state: OracleState, system: OracleSystem) -> tuple[OracleState, OracleSystem]:
    """Flip every detuning and imprint the phase ``exp(-2i k0 z_n)`` on the excited amplitudes.

    The imprint is the same as multiplying each atom's ground state by
    ``exp(2i k0 z_n)``; it moves the forward phase-matched excitation onto
    the backward phase-matched one.
    """
    amps = state.amplitudes.copy()
    n = system.n_atoms
    amps[:n] *= np.exp(-2j * system.k0 * system.positions)
    return OracleState(amps, state.t), system.with_detunings(-system.detunings)


def envelope(amplitudes: np.ndarray, system: OracleSystem, z, direction: str = "forward") -> np.ndarray:
    """Slowly varying field envelope at ``z`` from the mode amplitudes.

    ``amplitudes`` may hold one state per column.
    """
    q = system.band_offsets
    z = np.atleast_1d(np.asarray(z, dtype=float))
    if direction == "forward":
        c = amplitudes[system.forward_slice]
        phase = np.exp(1j * np.outer(z, q))
    elif direction == "backward":
        c = amplitudes[system.backward_slice]
        phase = np.exp(-1j * np.outer(z, q))
    else:
        raise ValueError("direction must be 'forward' or 'backward'")
    return (phase @ c) / math.sqrt(system.box)


def incident_photon(system: OracleSystem, shape: PulseShape) -> OracleState:
    """Single photon in the forward band whose field at ``z = 0`` is ``shape(t)``."""
    zz = np.linspace(-system.box / 2, system.box / 2, PROJECTION_POINTS, endpoint=False)
    dz = zz[1] - zz[0]
    psi = shape(-zz)
    q = system.band_offsets
    coeff = (np.exp(-1j * np.outer(q, zz)) @ psi) * dz / math.sqrt(system.box)
    amps = np.zeros(system.dimension, dtype=complex)
    amps[system.forward_slice] = coeff
    norm = np.linalg.norm(amps)
    if norm == 0:
        raise ValueError("pulse has no overlap with the mode band")
    return OracleState(amps / norm, 0.0)


@dataclass(frozen=True, eq=False)
class OracleRecord:
    """Boundary fields reconstructed from the mode sums.

    ``backward_out`` is the backward envelope at ``z = 0``; ``forward_in`` the
    incoming forward envelope at ``z = 0``. Both are read at a probe point
    outside the medium and shifted by the free propagation time, because the
    band-limited field is smeared near the atoms.
    """

    times: np.ndarray
    forward_in: np.ndarray
    backward_out: np.ndarray
    retrieval_time: float
    atomic_population_t0: float
    backward_fraction: float
    efficiency: float
    norm_drift: float
    dt: float
    pulse: PulseShape | None = None


def run_oracle_protocol(system: OracleSystem, shape: PulseShape, t0: float, t_end: float,
                        dt: float = 0.01, probe: float = PROBE_DISTANCE) -> OracleRecord:
    """Absorb ``shape``, apply the control at ``t0`` and follow the echo until ``t_end``."""
    if not 0 < t0 < t_end:
        raise ValueError("need 0 < t0 < t_end")
    n_steps = int(round(t_end / dt))
    times = dt * np.arange(n_steps + 1)
    state0 = incident_photon(system, shape)
    # Incoming field as it would reach z = 0, read at z = -probe.
    pre = evolve_many(state0, system, times - probe)
    f_in = envelope(pre, system, -probe, "forward")[0]
    at_t0 = evolve(state0, system, t0)
    atom_pop = float(np.sum(np.abs(at_t0.amplitudes[:system.n_atoms]) ** 2))
    ctrl_state, ctrl_system = apply_crib_control(at_t0, system)
    post_mask = times >= t0 - 1e-9
    post = evolve_many(ctrl_state, ctrl_system, times[post_mask] - t0 + probe)
    b_out = np.zeros(times.size, dtype=complex)
    b_out[post_mask] = envelope(post, ctrl_system, -probe, "backward")[0]
    final = evolve(ctrl_state, ctrl_system, t_end - t0).amplitudes
    bwd = float(np.sum(np.abs(final[system.backward_slice]) ** 2))
    photons = float(np.sum(np.abs(final[system.n_atoms:]) ** 2))
    drift = abs(float(np.linalg.norm(final)) - 1.0)
    return OracleRecord(times, f_in, b_out, t0, atom_pop, bwd / photons if photons > 0 else 0.0,
                        bwd, drift, dt, shape)


@dataclass(frozen=True)
class MatchedSetup:
    """Oracle and solver describing the same point-like ensemble."""

    system: OracleSystem
    solver: MaxwellBlochSolver
    shape: PulseShape
    t0: float
    t_end: float

    def solver_record(self):
        return self.solver.run(self.shape, ControlSchedule.crib(self.t0), t_start=0.0, t_end=self.t_end)

    def oracle_record(self):
        return run_oracle_protocol(self.system, self.shape, self.t0, self.t_end, self.solver.spatial.dt)


def matched_configuration(n_atoms: int = 20, n_modes: int = 128, optical_depth: float = 3.0,
                          half_width: float = 3.0, box: float = 20.0, cell: float = 0.01,
                          pulse_center: float = 5.0, pulse_width: float = 1.0, t0: float = 10.0,
                          t_end: float = 20.0, carrier_index: int = DEFAULT_CARRIER_INDEX) -> MatchedSetup:
    """Matched oracle and solver for a medium much thinner than the pulse.

    The solver uses one cell of length ``cell`` with ``n_atoms / 2`` detuning
    classes spread uniformly over ``[-half_width, half_width]``. The oracle puts
    one atom pair per class at the cell center, with the per-atom coupling
    chosen so that each pair radiates into each band at the rate of the
    solver's class.
    """
    if n_atoms % 2:
        raise ValueError("atoms come in pairs: n_atoms must be even")
    classes = n_atoms // 2
    spatial = SpatialGrid(cell, 2, lead_in=0.0, lead_out=0.0)
    profile = make_profile("uniform", half_width)
    solver = MaxwellBlochSolver(spatial, profile, optical_depth, n_delta=classes)
    # Emission rate of one class into one direction.
    rate = solver.g2 * cell * solver.spectral.probabilities
    coupling = np.sqrt(rate / (2 * box))
    k0 = 2 * math.pi * carrier_index / box
    shift = math.pi / (4 * k0)
    center = 0.5 * cell
    positions = np.concatenate([np.full(classes, center - shift), np.full(classes, center + shift)])
    detunings = np.concatenate([solver.spectral.nodes, solver.spectral.nodes])
    system = OracleSystem(positions, detunings, np.concatenate([coupling, coupling]), n_modes, box,
                          carrier_index)
    shape = PulseShape.gaussian(pulse_center, pulse_width)
    return MatchedSetup(system, solver, shape, t0, t_end)


@dataclass(frozen=True)
class DiscrepancyReport:
    relative_l2: float
    oracle_efficiency: float
    solver_efficiency: float
    oracle_fidelity: float | None
    solver_fidelity: float | None
    oracle_phase: float | None
    solver_phase: float | None

    @property
    def efficiency_relative_difference(self) -> float:
        ref = self.solver_efficiency
        if ref == 0:
            return abs(self.oracle_efficiency)
        return abs(self.oracle_efficiency - ref) / ref

    def as_dict(self) -> dict:
        return {"relative_l2": self.relative_l2, "oracle_efficiency": self.oracle_efficiency,
                "solver_efficiency": self.solver_efficiency,
                "efficiency_relative_difference": self.efficiency_relative_difference,
                "oracle_fidelity": self.oracle_fidelity, "solver_fidelity": self.solver_fidelity,
                "oracle_phase": self.oracle_phase, "solver_phase": self.solver_phase}


def _mirror_fidelity(times, series, shape, t0):
    if shape is None or not np.any(np.abs(series) > 0):
        return None, None
    mask = times >= t0 - 1e-9
    ref = shape(2 * t0 - times[mask])
    try:
        return mode_overlap(series[mask], ref)
    except ValueError:
        return None, None


def compare_to_semiclassical(oracle_record: OracleRecord, solver_record) -> DiscrepancyReport:
    """Distance between the oracle and solver backward outputs at ``z = 0``.

    Both records must share the retrieval time and the sample times of the
    echo window ``[t0, t_end]``.
    """
    t0 = oracle_record.retrieval_time
    if solver_record.retrieval_time is None or abs(solver_record.retrieval_time - t0) > 1e-9:
        raise ConfigurationMismatch("oracle and solver use different retrieval times")
    mo = oracle_record.times >= t0 - 1e-9
    ms = solver_record.times >= t0 - 1e-9
    to, ts = oracle_record.times[mo], solver_record.times[ms]
    if to.shape != ts.shape or not np.allclose(to, ts, atol=1e-9):
        raise ConfigurationMismatch("oracle and solver echo windows are sampled on different grids")
    o = oracle_record.backward_out[mo]
    s = solver_record.backward_out[ms]
    ns = float(np.linalg.norm(s))
    diff = float(np.linalg.norm(o - s))
    rel = diff / ns if ns > 0 else diff
    h = solver_record.dt
    e_in = float(np.sum(np.abs(solver_record.forward_in) ** 2)) * h
    eta_s = float(np.sum(np.abs(s) ** 2)) * h / e_in if e_in > 0 else 0.0
    fo, po = _mirror_fidelity(to, o, oracle_record.pulse, t0)
    fs, ps = _mirror_fidelity(ts, s, solver_record.pulse, t0)
    return DiscrepancyReport(rel, oracle_record.efficiency, eta_s, fo, fs, po, ps)


@dataclass(frozen=True)
class MirrorReport:
    """Post-control evolution against the time-mirrored pre-control evolution."""

    atomic_population: float
    mismatch: float
    phase: float
    backward_fraction: float
    efficiency: float


def mirror_symmetry(system: OracleSystem, shape: PulseShape, t0: float, dt: float = 0.01,
                    probe: float = PROBE_DISTANCE) -> MirrorReport:
    """Compare ``eps_b(0, t0 + tau)`` with ``-eps_f(0, t0 - tau)`` for ``0 <= tau <= t0``."""
    tau = dt * np.arange(int(round(t0 / dt)) + 1)
    state0 = incident_photon(system, shape)
    pre = evolve_many(state0, system, t0 - tau - probe)
    fwd = envelope(pre, system, -probe, "forward")[0]
    at_t0 = evolve(state0, system, t0)
    atom_pop = float(np.sum(np.abs(at_t0.amplitudes[:system.n_atoms]) ** 2))
    ctrl_state, ctrl_system = apply_crib_control(at_t0, system)
    post = evolve_many(ctrl_state, ctrl_system, tau + probe)
    bwd = envelope(post, ctrl_system, -probe, "backward")[0]
    mismatch = float(np.linalg.norm(bwd + fwd) / np.linalg.norm(fwd))
    phase = float(np.angle(np.vdot(fwd, bwd)))
    final = evolve(ctrl_state, ctrl_system, t0).amplitudes
    b = float(np.sum(np.abs(final[system.backward_slice]) ** 2))
    photons = float(np.sum(np.abs(final[system.n_atoms:]) ** 2))
    return MirrorReport(atom_pop, mismatch, phase, b / photons if photons else 0.0, b)


def mirror_configuration(classes: int = 24, half_width: float = 5.0, optical_depth: float = 4.0,
                         n_modes: int = 128, box: float = 20.0, cell: float = 0.01,
                         carrier_index: int = DEFAULT_CARRIER_INDEX) -> OracleSystem:
    """Strongly absorbing point-like ensemble with band-symmetric couplings."""
    setup = matched_configuration(2 * classes, n_modes, optical_depth, half_width, box, cell,
                                  carrier_index=carrier_index)
    return setup.system


@dataclass(frozen=True)
class DecayFit:
    rate: float
    predicted: float


def single_atom_decay(coupling: float, n_modes: int = 512, box: float = 40.0, t_max: float | None = None,
                      samples: int = 50) -> DecayFit:
    """Fit the early decay of one excited atom and compare with the golden-rule rate.

    The golden-rule rate is ``2 pi c^2 rho`` with mode density
    ``rho = 2 L_box / (2 pi)`` summed over both bands.
    """
    system = OracleSystem(np.array([0.0]), np.array([0.0]), coupling, n_modes, box)
    predicted = 2 * math.pi * coupling ** 2 * (2 * box / (2 * math.pi))
    if t_max is None:
        t_max = 1.0 / predicted
    amps = np.zeros(system.dimension, dtype=complex)
    amps[0] = 1.0
    t = np.linspace(0.0, t_max, samples)
    pop = np.abs(evolve_many(OracleState(amps), system, t)[0]) ** 2
    rate = -float(np.polyfit(t, np.log(pop), 1)[0])
    return DecayFit(rate, predicted)


@dataclass(frozen=True)
class AbsorptionScan:
    times: np.ndarray
    atomic_population: np.ndarray

    @property
    def best(self) -> tuple[float, float]:
        i = int(np.argmax(self.atomic_population))
        return float(self.times[i]), float(self.atomic_population[i])


def absorption_scan(system: OracleSystem, shape: PulseShape, t_max: float, dt: float = 0.05) -> AbsorptionScan:
    times = dt * np.arange(int(round(t_max / dt)) + 1)
    amps = evolve_many(incident_photon(system, shape), system, times)
    return AbsorptionScan(times, np.sum(np.abs(amps[:system.n_atoms]) ** 2, axis=0))
