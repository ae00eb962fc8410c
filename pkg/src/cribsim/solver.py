"""Linearized Maxwell-Bloch integrator for the CRIB protocol.

Equations (c = 1, ground-state population frozen)::

    d/dt s(z, D)          = i D s + i kappa eps
    (d/dz + d/dt) eps_f   = i beta <s>_D          (forward coupling)
    (-d/dz + d/dt) eps_b  = i beta <s>_D          (after the phase imprint)

The coherence is stored rescaled, ``v = sqrt(rho p_m) s``, so that the
coupling becomes symmetric with strength ``G = sqrt(kappa beta)`` and the
total excitation is ``dz * sum |v|^2``. The optical depth fixes
``G^2 = d / (2 pi g0 L)``, where ``g0`` is the line density at the reference
line center; a narrowband resonant probe is then transmitted with intensity
``exp(-d)``.

The field is advanced along characteristics with ``dt = dz``, which is exact
in vacuum. Within each step a cell's coherences interact only with the
single light packet crossing that cell, through their bright mode
``b = sum_m sqrt(p_m) v_m``. That interaction is integrated exactly (a
rotation by ``G dt``) between two half-step detuning rotations, so the
scheme is second order and conserves the photon number exactly when there
is no decay.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from .broadening import (DetuningProfile, LineGrid, band_mask, flip, line_grid, remove,
                         reestablish)
from .model import (RETRIEVAL_KINDS, ControlEvent, ControlSchedule, Direction, EventKind, PulseShape,
                    RunRecord, SpatialGrid)

SOLVER_NAME = "cribsim-characteristics-strang"
WEAK_FIELD_LIMIT = 0.1
VALIDATION_THRESHOLD = 0.1


class NumericalError(RuntimeError):
    """Non-finite values or an invalid step size."""


class ScheduleError(ValueError):
    """A control event that cannot be applied to the current state."""


def coupling_squared(profile: DetuningProfile, lines: LineGrid, optical_depth: float,
                     length: float) -> float:
    """``G^2`` giving intensity transmission ``exp(-d)`` for a resonant narrowband probe."""
    if optical_depth < 0:
        raise ValueError("optical depth must be non-negative")
    if profile.is_gradient:
        return optical_depth * profile.slope / (2 * math.pi)
    return optical_depth / (2 * math.pi * lines.grid.resonant_density * length)


@dataclass
class SolverState:
    """Mutable integration state of a single run. Never shared between runs."""

    t: float
    forward: np.ndarray
    backward: np.ndarray
    coherence: np.ndarray
    signs: np.ndarray
    profile: DetuningProfile
    direction: Direction = Direction.FORWARD
    shelved_steps: int = 0
    cursor: int = 0

    def copy(self) -> "SolverState":
        return SolverState(self.t, self.forward.copy(), self.backward.copy(), self.coherence.copy(),
                           self.signs.copy(), self.profile, self.direction, self.shelved_steps,
                           self.cursor)


class MaxwellBlochSolver:
    """Integrator bound to one medium (grids, profile, optical depth, decay).

    Parameters
    ----------
    spatial : SpatialGrid
    profile : DetuningProfile
        Initial profile; its ``sign`` sets the initial broadening orientation.
    optical_depth : float
    n_delta : int
        Detuning classes per line (ignored for a gradient profile).
    decay : float
        Phenomenological coherence decay rate ``gamma``.
    atom_number : float
        Atoms in the medium; only used by the weak-field monitor.
    """

    def __init__(self, spatial: SpatialGrid, profile: DetuningProfile, optical_depth: float,
                 n_delta: int = 512, decay: float = 0.0, atom_number: float = 1e6,
                 quadrature: str = "uniform", cutoff: float | None = None):
        if decay < 0:
            raise ValueError("decay rate must be non-negative")
        if not atom_number > 0:
            raise ValueError("atom number must be positive")
        self.spatial = spatial
        self.profile = profile
        self.optical_depth = float(optical_depth)
        self.decay = float(decay)
        self.atom_number = float(atom_number)
        self.lines = line_grid(profile, n_delta, quadrature, cutoff)
        self.spectral = self.lines.grid
        self.g2 = coupling_squared(profile, self.lines, self.optical_depth, spatial.length)
        self.theta = math.sqrt(self.g2) * spatial.dt
        self.cos_t = math.cos(self.theta)
        self.sin_t = math.sin(self.theta)
        p = self.spectral.probabilities
        self.sqrt_p = np.sqrt(p)
        n_cells = spatial.n_cells
        # Offsets are stored for sign +1; a per-node sign carries the orientation.
        if profile.is_gradient:
            self.centers = np.full((n_cells, 1), profile.centers[0])
            self.offsets = (profile.slope * (spatial.cell_centers - 0.5 * spatial.length))[:, None]
        else:
            self.centers = np.tile(self.lines.centers[self.lines.line_index], (n_cells, 1))
            self.offsets = np.tile(self.lines.offsets, (n_cells, 1))
        per_atom = self.atom_number / spatial.length
        self._inv_atom_scale = 1.0 / np.sqrt(per_atom * p)
        self._h = spatial.dt

    @property
    def revival_time(self) -> float:
        """Time after excitation at which the discrete detuning classes rephase spuriously."""
        if self.profile.is_gradient or self.spectral.size < 2:
            return math.inf
        gaps = np.diff(np.unique(np.round(self.lines.offsets, 12)))
        return 2 * math.pi / float(np.median(gaps)) if gaps.size else math.inf

    # -- state ---------------------------------------------------------------
    def initial_state(self, t: float, first_input: complex = 0.0) -> SolverState:
        n_z, n_cells = self.spatial.n_z, self.spatial.n_cells
        f = np.zeros(n_z, dtype=complex)
        f[0] = first_input
        signs = np.full((n_cells, self.spectral.size), float(self.profile.sign))
        return SolverState(t, f, np.zeros(n_z, dtype=complex),
                           np.zeros((n_cells, self.spectral.size), dtype=complex), signs, self.profile)

    def detunings(self, state: SolverState) -> np.ndarray:
        return self.centers + state.signs * self.offsets

    def _half_rotation(self, state: SolverState) -> np.ndarray:
        return np.exp((1j * self.detunings(state) - self.decay) * (0.5 * self._h))

    def stored_excitation(self, state: SolverState) -> float:
        return self._h * float(np.sum(np.abs(state.coherence) ** 2))

    def field_in_flight(self, state: SolverState) -> float:
        return self._h * float(np.sum(np.abs(state.forward[:-1]) ** 2)
                               + np.sum(np.abs(state.backward[1:]) ** 2))

    def max_coherence(self, state: SolverState) -> float:
        """Largest per-atom coherence ``|s|`` in the medium."""
        if state.coherence.size == 0:
            return 0.0
        return float(np.max(np.abs(state.coherence) * self._inv_atom_scale))

    # -- stepping -------------------------------------------------------------
    def step(self, state: SolverState, dt: float | None = None, next_input: complex = 0.0,
             rotation: np.ndarray | None = None) -> SolverState:
        """Advance ``state`` in place by one characteristic step and return it."""
        h = self._h
        if dt is not None and abs(dt - h) > 1e-12 * max(1.0, h):
            raise NumericalError(f"step {dt!r} violates the characteristics condition dt = dz = {h!r}")
        v = state.coherence
        if state.shelved_steps > 0:
            state.shelved_steps -= 1
        elif v.size:
            half = self._half_rotation(state) if rotation is None else rotation
            v *= half
            if self.theta != 0.0:
                backward = state.direction is Direction.BACKWARD
                e = state.backward[1:] if backward else state.forward[:-1]
                bright = v @ self.sqrt_p
                e_new = self.cos_t * e + 1j * self.sin_t * bright
                bright_new = self.cos_t * bright + 1j * self.sin_t * e
                v += np.outer(bright_new - bright, self.sqrt_p)
                if backward:
                    state.backward[1:] = e_new
                else:
                    state.forward[:-1] = e_new
            v *= half
        f, b = state.forward, state.backward
        f[1:] = f[:-1].copy()
        f[0] = next_input
        b[:-1] = b[1:].copy()
        b[-1] = 0.0
        state.t += h
        return state

    def apply_event(self, state: SolverState, event: ControlEvent) -> SolverState:
        if abs(event.time - state.t) > 0.5 * self._h + 1e-12:
            raise ScheduleError(f"event {event.kind.value} at t={event.time} applied at t={state.t}")
        kind = event.kind
        if kind is EventKind.FLIP:
            if state.profile.sign == 0:
                raise ScheduleError("flip requested while the broadening is removed")
            state.profile = flip(state.profile)
            state.signs = -state.signs
        elif kind is EventKind.IMPRINT:
            if state.direction is Direction.BACKWARD:
                raise ScheduleError("phase imprint applied twice: coherence is already backward-coupled")
            state.direction = Direction.BACKWARD
        elif kind is EventKind.REMOVE:
            state.profile = remove(state.profile)
            state.signs = np.zeros_like(state.signs)
        elif kind is EventKind.REESTABLISH:
            state.profile = reestablish(state.profile, event.sign)
            state.signs = np.full_like(state.signs, float(event.sign))
        elif kind is EventKind.SHELVE:
            state.shelved_steps += int(round(event.duration / self._h))
        elif kind is EventKind.BAND_REPHASE:
            sel = band_mask(self.detunings(state), *event.band)
            if sel.warning:
                raise ScheduleError(sel.warning)
            state.signs = np.where(sel.mask, -state.signs, state.signs)
        return state

    def _dephasing_clock(self, shape, schedule, t_start, t_end) -> float:
        """Longest free dephasing in the run, padded by the pulse half support."""
        center = shape.centers[0] if shape is not None else t_start
        pad = 0.5 * (shape.support[1] - shape.support[0]) if shape is not None else 0.0
        t0, mirror = schedule.retrieval_time, schedule.mirror_time()
        if t0 is None or mirror is None:
            return t_end - center + pad
        return max(t0 - center, t_end - mirror) + pad

    # -- full runs -------------------------------------------------------------
    def run(self, source: Callable | PulseShape, schedule: ControlSchedule | None = None,
            t_start: float | None = None, t_end: float | None = None,
            monitor_stride: int = 1) -> RunRecord:
        """Integrate from ``t_start`` to ``t_end`` and record the boundary series.

        ``source`` gives the forward input at ``z = 0``; it is called once with
        the array of all step times.
        """
        schedule = schedule or ControlSchedule()
        h = self._h
        shape = source if isinstance(source, PulseShape) else None
        if t_start is None:
            t_start = -self.spatial.lead_in
        if t_end is None:
            t_end = default_end_time(shape, schedule, self.spatial)
        n_steps = int(math.ceil((t_end - t_start) / h - 1e-9))
        if n_steps < 1:
            raise ValueError("run window shorter than one step")
        times = t_start + h * np.arange(n_steps + 1)
        inputs = np.asarray(source(times), dtype=complex)
        if inputs.shape != times.shape:
            raise ValueError("source must return one amplitude per time")

        state = self.initial_state(float(times[0]), inputs[0])
        events = list(schedule.events)
        for e in events:
            if e.time < t_start - 0.5 * h or e.time > t_end + 0.5 * h:
                raise ScheduleError(f"event {e.kind.value} at t={e.time} lies outside the run window")
        log: list[dict] = []
        n_cells = self.spatial.n_cells
        f_l = np.empty(n_steps + 1, dtype=complex)
        b_0 = np.empty(n_steps + 1, dtype=complex)
        stored = np.empty(n_steps + 1)
        flight = np.empty(n_steps + 1)
        max_s = 0.0
        rotation = self._half_rotation(state)
        for k in range(n_steps + 1):
            state.t = float(times[k])
            changed = False
            while state.cursor < len(events) and events[state.cursor].time <= state.t + 0.5 * h:
                ev = events[state.cursor]
                self.apply_event(state, ev)
                entry = ev.as_dict()
                entry["applied_at"] = state.t
                log.append(entry)
                state.cursor += 1
                changed = True
            if changed:
                rotation = self._half_rotation(state)
            f_l[k] = state.forward[-1]
            b_0[k] = state.backward[0]
            stored[k] = self.stored_excitation(state)
            flight[k] = self.field_in_flight(state)
            if k % monitor_stride == 0 and n_cells:
                max_s = max(max_s, self.max_coherence(state))
            if k == n_steps:
                break
            self.step(state, None, inputs[k + 1], rotation)
            if not (np.isfinite(state.forward[0]) and np.isfinite(f_l[k])):
                raise NumericalError(f"non-finite field at t={state.t}")
            if k % 256 == 0 and not np.all(np.isfinite(state.coherence)):
                raise NumericalError(f"non-finite coherence at t={state.t}")
        if not (np.all(np.isfinite(f_l)) and np.all(np.isfinite(b_0))
                and np.all(np.isfinite(state.coherence))):
            raise NumericalError("non-finite values in the run")
        warnings = []
        clock = self._dephasing_clock(shape, schedule, float(times[0]), float(times[-1]))
        if clock > self.revival_time:
            warnings.append(f"dephasing time {clock:.3g} reaches the detuning-grid revival time "
                            f"{self.revival_time:.3g}; raise N_delta")
        violation = max_s > WEAK_FIELD_LIMIT
        if violation:
            warnings.append(f"weak-field limit exceeded: max |s| = {max_s:.3g} > {WEAK_FIELD_LIMIT}")
        t0 = schedule.retrieval_time
        return RunRecord(
            times=times, forward_in=inputs, forward_out=f_l, backward_out=b_0,
            backward_in=np.zeros(n_steps + 1, dtype=complex), stored=stored, in_flight=flight,
            dt=h, length=self.spatial.length, retrieval_time=t0,
            mirror_time=schedule.mirror_time(), channel="backward" if schedule.backward else "forward",
            decay=self.decay, max_coherence=max_s, weak_field_violation=violation,
            events=tuple(log), warnings=tuple(warnings), pulse=shape)


def default_end_time(shape: PulseShape | None, schedule: ControlSchedule, spatial: SpatialGrid) -> float:
    """End of the run: every echo has left the medium, plus the lead-out."""
    lo, hi = shape.support if shape is not None else (0.0, 0.0)
    mirrors = [schedule.mirror_time(e.time) for e in schedule.events if e.kind in RETRIEVAL_KINDS]
    if not mirrors:
        return hi + spatial.length + spatial.lead_out
    return max(max(mirrors) - lo, hi) + spatial.length + spatial.lead_out


def solver_from_config(config) -> MaxwellBlochSolver:
    from .broadening import profile_from_config

    g = config.grid
    spatial = SpatialGrid(g.L, g.N_z, g.lead_in, g.lead_out)
    s = config.spectrum
    return MaxwellBlochSolver(spatial, profile_from_config(config), config.medium.d,
                              n_delta=s.N_delta, decay=config.medium.gamma,
                              atom_number=config.medium.atoms, quadrature=s.quadrature,
                              cutoff=s.cutoff)


def run_protocol(config, shape: PulseShape | None = None,
                 schedule: ControlSchedule | None = None) -> RunRecord:
    """Run the protocol described by a :class:`cribsim.config.SimulationConfig`."""
    from .config import pulse_from_config, schedule_from_config

    shape = shape if shape is not None else pulse_from_config(config)
    schedule = schedule if schedule is not None else schedule_from_config(config)
    solver = solver_from_config(config)
    report = validate_schedule(schedule, shape, config.medium.T_decoh)
    rec = solver.run(shape, schedule, t_end=config.grid.t_end)
    extra = tuple(f"schedule: {c.name} ratio {c.ratio:.3g}" for c in report.checks if c.status == "warn")
    if extra:
        rec = replace(rec, warnings=rec.warnings + extra)
    return rec


@dataclass(frozen=True)
class ScheduleCheck:
    name: str
    ratio: float | None
    status: str  # "pass", "warn" or "skip"


@dataclass(frozen=True)
class ScheduleReport:
    checks: tuple[ScheduleCheck, ...]

    @property
    def ok(self) -> bool:
        return all(c.status != "warn" for c in self.checks)

    def as_dict(self) -> dict:
        return {c.name: {"ratio": c.ratio, "status": c.status} for c in self.checks}


def validate_schedule(schedule: ControlSchedule, shape: PulseShape, t_decoh: float | None,
                      switch_time: float | None = None) -> ScheduleReport:
    """Check the two timing conditions of the protocol.

    The switching time must be much shorter than the light pulse and the
    storage time much shorter than the coherence time. A ratio at or above
    0.1 is a warning.
    """
    dt_switch = schedule.switch_time if switch_time is None else switch_time
    r1 = dt_switch / shape.duration
    checks = [ScheduleCheck("switch_time/pulse_duration", r1,
                            "warn" if r1 >= VALIDATION_THRESHOLD else "pass")]
    t0 = schedule.retrieval_time
    if t_decoh is None or t0 is None:
        checks.append(ScheduleCheck("storage_time/T_decoh", None, "skip"))
    else:
        storage = t0 - shape.centers[0]
        r2 = storage / t_decoh
        checks.append(ScheduleCheck("storage_time/T_decoh", r2,
                                    "warn" if r2 >= VALIDATION_THRESHOLD else "pass"))
    return ScheduleReport(tuple(checks))


def transmission(solver: MaxwellBlochSolver, shape: PulseShape) -> float:
    """Energy transmission of ``shape`` through the medium with no control."""
    rec = solver.run(shape)
    return float(np.sum(np.abs(rec.forward_out) ** 2) / np.sum(np.abs(rec.forward_in) ** 2))
