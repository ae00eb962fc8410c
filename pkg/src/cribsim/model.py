"""Shared domain types: units, grids, pulse shapes, control schedules and run records.

Everything inside the solver is dimensionless. The speed of light is 1, the
time unit is the input-pulse duration ``T_p`` and the length unit is
``c * T_p``. Physical units only appear in :class:`UnitsContract` and in the
shift calculators of :mod:`cribsim.broadening`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Callable

import numpy as np

SPEED_OF_LIGHT = 1.0

# Gaussian sub-pulses are treated as zero beyond this many widths from their center.
SUPPORT_WIDTHS = 5.0


@dataclass(frozen=True)
class UnitsContract:
    """Bridge between dimensionless solver quantities and laboratory units.

    ``pulse_duration`` is the physical value of ``T_p`` in seconds.
    """

    pulse_duration: float = 1e-6

    def __post_init__(self) -> None:
        if not self.pulse_duration > 0:
            raise ValueError("pulse_duration must be positive")

    @property
    def length_unit(self) -> float:
        """Physical length of one dimensionless unit, in metres."""
        return 299_792_458.0 * self.pulse_duration

    def detuning_from_hz(self, shift_hz: float) -> float:
        """Dimensionless angular detuning for a shift given in Hz."""
        return 2.0 * math.pi * shift_hz * self.pulse_duration

    def hz_from_detuning(self, detuning: float) -> float:
        return detuning / (2.0 * math.pi * self.pulse_duration)

    def seconds(self, t: float) -> float:
        return t * self.pulse_duration


@dataclass(frozen=True)
class SpatialGrid:
    """Uniform grid over the medium ``[0, L]``.

    The field lives on the ``n_z`` nodes; atoms live in the ``n_z - 1`` cells
    between them and are lumped at the cell centers. The vacuum lead-in and
    lead-out segments are not stored: vacuum transport along characteristics
    is exact, so they only shift the run clock (the run starts at
    ``t = -lead_in``) and pad its end.
    """

    length: float
    n_z: int
    lead_in: float = 8.0
    lead_out: float = 2.0

    def __post_init__(self) -> None:
        if not self.length > 0:
            raise ValueError("grid length must be positive")
        if self.n_z < 2:
            raise ValueError("grid needs at least two points (n_z >= 2)")
        if self.lead_in < 0 or self.lead_out < 0:
            raise ValueError("lead-in/lead-out lengths must be non-negative")

    @property
    def dz(self) -> float:
        return self.length / (self.n_z - 1)

    @property
    def dt(self) -> float:
        """Characteristics-aligned time step, ``dz / c``."""
        return self.dz / SPEED_OF_LIGHT

    @property
    def n_cells(self) -> int:
        return self.n_z - 1

    @property
    def z(self) -> np.ndarray:
        return np.arange(self.n_z) * self.dz

    @property
    def cell_centers(self) -> np.ndarray:
        return (np.arange(self.n_cells) + 0.5) * self.dz


@dataclass(frozen=True, eq=False)
class SpectralGrid:
    """Detuning classes with quadrature weights.

    ``weights`` are normalized so that ``sum(weights * density) == 1``; the
    product is the fraction of atoms in each class. ``resonant_density`` is the
    continuum line density at the reference line center and fixes the
    optical-depth calibration.
    """

    nodes: np.ndarray
    weights: np.ndarray
    density: np.ndarray
    resonant_density: float

    def __post_init__(self) -> None:
        nodes = np.asarray(self.nodes, dtype=float)
        weights = np.asarray(self.weights, dtype=float)
        density = np.asarray(self.density, dtype=float)
        if nodes.ndim != 1 or nodes.size == 0:
            raise ValueError("spectral grid needs at least one node")
        if weights.shape != nodes.shape or density.shape != nodes.shape:
            raise ValueError("nodes, weights and density must have the same shape")
        if np.any(weights <= 0) or np.any(density <= 0):
            raise ValueError("quadrature weights and densities must be positive")
        total = float(np.sum(weights * density))
        if abs(total - 1.0) > 1e-10:
            raise ValueError(f"spectral normalization failed: sum(w*g) = {total!r}")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "density", density)

    @property
    def size(self) -> int:
        return self.nodes.size

    @property
    def probabilities(self) -> np.ndarray:
        return self.weights * self.density


class Direction(str, Enum):
    FORWARD = "forward"
    BACKWARD = "backward"


@dataclass
class FieldEnvelope:
    """Slowly varying field amplitude on the spatial nodes at one instant."""

    direction: Direction
    amplitude: np.ndarray
    carrier_frequency: float = 0.0

    @property
    def carrier_wavenumber(self) -> float:
        return self.carrier_frequency / SPEED_OF_LIGHT


@dataclass
class CoherenceField:
    """Weak-excitation coherence over (cell, detuning class).

    ``values`` holds energy-normalized amplitudes: the stored excitation is
    ``dz * sum(|values|**2)``. The per-atom coherence follows by dividing by
    ``sqrt(atom density * class fraction)``.
    """

    values: np.ndarray
    direction: Direction = Direction.FORWARD

    def per_atom(self, atoms_per_length: float, probabilities: np.ndarray) -> np.ndarray:
        return self.values / np.sqrt(atoms_per_length * probabilities)

    def excited_population(self, atoms_per_length: float, probabilities: np.ndarray) -> np.ndarray:
        return np.abs(self.per_atom(atoms_per_length, probabilities)) ** 2


class PulseKind(str, Enum):
    GAUSSIAN = "gaussian"
    SECH = "sech"
    TIME_BIN = "time_bin"
    TRAIN = "train"


@dataclass(frozen=True)
class PulseShape:
    """Input field at the medium entrance, ``eps_in(t)``.

    Every kind is a sum of sub-pulses that share one envelope width. A
    sub-pulse ``j`` is ``amplitudes[j] * env((t - c_j) / width) *
    exp(-1j * detunings[j] * (t - c_j))``; a carrier offset ``delta`` is
    resonant with atoms whose detuning is ``-delta``. With ``normalize`` the
    total energy ``int |eps_in|^2 dt`` equals ``energy``.
    """

    kind: PulseKind
    centers: tuple[float, ...]
    width: float
    amplitudes: tuple[complex, ...]
    detunings: tuple[float, ...]
    energy: float = 1.0
    normalize: bool = True
    scale: complex = field(init=False, default=1.0)

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", PulseKind(self.kind))
        n = len(self.centers)
        if n == 0:
            raise ValueError("pulse needs at least one sub-pulse")
        if len(self.amplitudes) != n or len(self.detunings) != n:
            raise ValueError("centers, amplitudes and detunings must have equal length")
        if not self.width > 0:
            raise ValueError("pulse width must be positive")
        if not self.energy > 0:
            raise ValueError("pulse energy must be positive")
        if self.kind is PulseKind.SECH and n != 1:
            raise ValueError("sech pulses have a single component")
        if self.kind is PulseKind.TIME_BIN:
            if n != 2:
                raise ValueError("a time-bin qubit has exactly two bins")
            if abs(sum(abs(a) ** 2 for a in self.amplitudes) - 1.0) > 1e-9:
                raise ValueError("time-bin amplitudes must satisfy |alpha|^2 + |beta|^2 = 1")
            if abs(self.centers[1] - self.centers[0]) < 4.0 * self.width:
                raise ValueError("time bins overlap: separation must be >= 4 x bin width")
        if any(b <= a for a, b in zip(self.centers, self.centers[1:])):
            raise ValueError("sub-pulse centers must be strictly increasing")
        raw = self._raw_energy()
        if not raw > 0:
            raise ValueError("pulse has zero energy")
        scale = math.sqrt(self.energy / raw) if self.normalize else 1.0
        object.__setattr__(self, "scale", scale)

    # -- constructors -------------------------------------------------------
    @classmethod
    def gaussian(cls, center: float = 0.0, width: float = 1.0, detuning: float = 0.0,
                 energy: float = 1.0, normalize: bool = True) -> "PulseShape":
        return cls(PulseKind.GAUSSIAN, (float(center),), float(width), (1.0,),
                   (float(detuning),), energy, normalize)

    @classmethod
    def sech(cls, center: float = 0.0, width: float = 1.0, detuning: float = 0.0,
             energy: float = 1.0, normalize: bool = True) -> "PulseShape":
        return cls(PulseKind.SECH, (float(center),), float(width), (1.0,),
                   (float(detuning),), energy, normalize)

    @classmethod
    def time_bin(cls, alpha: float, beta: float, phase: float = 0.0, first_center: float = 0.0,
                 separation: float = 5.0, width: float = 0.7, detuning: float = 0.0,
                 energy: float = 1.0) -> "PulseShape":
        """Two-bin qubit ``alpha |early> + beta exp(i phase) |late>``."""
        amps = (complex(alpha), complex(beta) * complex(math.cos(phase), math.sin(phase)))
        centers = (float(first_center), float(first_center + separation))
        return cls(PulseKind.TIME_BIN, centers, float(width), amps,
                   (float(detuning), float(detuning)), energy, True)

    @classmethod
    def train(cls, centers, width: float = 1.0, amplitudes=None, detunings=None,
              energy: float = 1.0, normalize: bool = True) -> "PulseShape":
        centers = tuple(float(c) for c in centers)
        amps = tuple(complex(a) for a in amplitudes) if amplitudes is not None else (1.0,) * len(centers)
        dets = tuple(float(d) for d in detunings) if detunings is not None else (0.0,) * len(centers)
        return cls(PulseKind.TRAIN, centers, float(width), amps, dets, energy, normalize)

    # -- evaluation ---------------------------------------------------------
    def _envelope(self, x: np.ndarray) -> np.ndarray:
        if self.kind is PulseKind.SECH:
            return 1.0 / np.cosh(x)
        return np.exp(-0.5 * x * x)

    def component(self, j: int, t) -> np.ndarray:
        """Unscaled sub-pulse ``j`` with unit amplitude."""
        t = np.asarray(t, dtype=float)
        c = self.centers[j]
        return self._envelope((t - c) / self.width) * np.exp(-1j * self.detunings[j] * (t - c))

    def __call__(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        out = np.zeros(t.shape, dtype=complex)
        for j, a in enumerate(self.amplitudes):
            out += a * self.component(j, t)
        return self.scale * out

    def _raw_energy(self) -> float:
        w = self.width
        if self.kind is PulseKind.SECH:
            return abs(self.amplitudes[0]) ** 2 * 2.0 * w
        # Gram matrix of Gaussian sub-pulses with carrier offsets, in closed form.
        c = np.asarray(self.centers)
        d = np.asarray(self.detunings)
        a = np.asarray(self.amplitudes, dtype=complex)
        ca, cb = np.meshgrid(c, c, indexing="ij")
        da, db = np.meshgrid(d, d, indexing="ij")
        dd = da - db
        mid = 0.5 * (ca + cb)
        gram = (math.sqrt(math.pi) * w * np.exp(-((ca - cb) ** 2) / (4 * w * w))
                * np.exp(-(dd ** 2) * w * w / 4) * np.exp(1j * dd * mid)
                * np.exp(-1j * da * ca + 1j * db * cb))
        return float(np.real(np.conj(a) @ gram @ a))

    @property
    def support(self) -> tuple[float, float]:
        """Interval outside of which the pulse is negligible."""
        half = SUPPORT_WIDTHS * self.width * (2.0 if self.kind is PulseKind.SECH else 1.0)
        return self.centers[0] - half, self.centers[-1] + half

    @property
    def duration(self) -> float:
        """Intensity FWHM of one sub-pulse (the light-pulse duration)."""
        if self.kind is PulseKind.SECH:
            return 2.0 * math.acosh(math.sqrt(2.0)) * self.width
        return 2.0 * math.sqrt(math.log(2.0)) * self.width

    def with_energy(self, energy: float) -> "PulseShape":
        return replace(self, energy=energy)


def sample_pulse(shape: PulseShape, t) -> np.ndarray:
    """Complex input amplitude of ``shape`` at time(s) ``t``."""
    return shape(t)


class EventKind(str, Enum):
    FLIP = "flip"
    IMPRINT = "imprint"
    REMOVE = "remove"
    REESTABLISH = "reestablish"
    SHELVE = "shelve"
    BAND_REPHASE = "band_rephase"


RETRIEVAL_KINDS = (EventKind.FLIP, EventKind.BAND_REPHASE, EventKind.REESTABLISH)


@dataclass(frozen=True)
class ControlEvent:
    time: float
    kind: EventKind
    sign: int | None = None
    duration: float | None = None
    band: tuple[float, float] | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", EventKind(self.kind))
        if not math.isfinite(self.time):
            raise ValueError("event time must be finite")
        if self.kind is EventKind.REESTABLISH and self.sign not in (1, -1):
            raise ValueError("reestablish needs sign +1 or -1")
        if self.kind is EventKind.SHELVE and not (self.duration is not None and self.duration >= 0):
            raise ValueError("shelve needs a non-negative duration")
        if self.kind is EventKind.BAND_REPHASE:
            if self.band is None or len(self.band) != 2 or not self.band[0] < self.band[1]:
                raise ValueError("band_rephase needs a band (lo, hi) with lo < hi")
            object.__setattr__(self, "band", (float(self.band[0]), float(self.band[1])))

    def as_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {"time": self.time, "kind": self.kind.value}
        if self.sign is not None:
            out["sign"] = self.sign
        if self.duration is not None:
            out["duration"] = self.duration
        if self.band is not None:
            out["band"] = list(self.band)
        return out


@dataclass(frozen=True)
class ControlSchedule:
    """Time-ordered control events plus the switching duration ``switch_time``.

    ``switch_time`` is metadata: events act instantaneously in the solver and
    the finite switching time is only checked by ``validate_schedule``.
    """

    events: tuple[ControlEvent, ...] = ()
    switch_time: float = 0.0

    def __post_init__(self) -> None:
        events = tuple(self.events)
        object.__setattr__(self, "events", events)
        for a, b in zip(events, events[1:]):
            if b.time < a.time:
                raise ValueError(f"events out of order: {b.kind.value} at {b.time} after {a.kind.value} at {a.time}")
        if self.switch_time < 0:
            raise ValueError("switch_time must be non-negative")

    @classmethod
    def crib(cls, t0: float, imprint: bool = True, switch_time: float = 0.0) -> "ControlSchedule":
        """Detuning flip (plus phase imprint for backward retrieval) at ``t0``."""
        events = [ControlEvent(t0, EventKind.FLIP)]
        if imprint:
            events.append(ControlEvent(t0, EventKind.IMPRINT))
        return cls(tuple(events), switch_time)

    @property
    def retrieval_time(self) -> float | None:
        for e in self.events:
            if e.kind in RETRIEVAL_KINDS:
                return e.time
        return None

    @property
    def backward(self) -> bool:
        return any(e.kind is EventKind.IMPRINT for e in self.events)

    def mirror_time(self, reference: float | None = None) -> float | None:
        """Center of the time mirror for the echo.

        A shelving pause after the retrieval trigger delays the echo by its
        duration; a pause during the dephasing stage shortens the dephasing
        and advances the echo by the same amount.
        """
        t0 = self.retrieval_time if reference is None else reference
        if t0 is None:
            return None
        shift = 0.0
        for e in self.events:
            if e.kind is EventKind.SHELVE:
                shift += e.duration if e.time >= t0 else -e.duration
        return 2.0 * t0 + shift


@dataclass(frozen=True, eq=False)
class RunRecord:
    """Boundary time series and bookkeeping of one protocol run.

    Series are sampled at every solver step, ``times[k] = times[0] + k * dt``.
    ``forward_in``/``forward_out`` are the forward field at ``z = 0`` and
    ``z = L``; ``backward_out``/``backward_in`` the backward field at ``z = 0``
    and ``z = L``. ``stored`` is the atomic excitation and ``in_flight`` the
    field energy inside the medium, both in photon units.
    """

    times: np.ndarray
    forward_in: np.ndarray
    forward_out: np.ndarray
    backward_out: np.ndarray
    backward_in: np.ndarray
    stored: np.ndarray
    in_flight: np.ndarray
    dt: float
    length: float
    retrieval_time: float | None = None
    mirror_time: float | None = None
    channel: str = "backward"
    decay: float = 0.0
    max_coherence: float = 0.0
    weak_field_violation: bool = False
    events: tuple[dict, ...] = ()
    warnings: tuple[str, ...] = ()
    pulse: PulseShape | None = None

    def __post_init__(self) -> None:
        n = len(self.times)
        if n < 1:
            raise ValueError("empty run record")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("sample times must be strictly increasing")
        for name in ("forward_in", "forward_out", "backward_out", "backward_in", "stored", "in_flight"):
            if len(getattr(self, name)) != n:
                raise ValueError(f"series {name} has inconsistent length")
        if self.channel not in ("backward", "forward"):
            raise ValueError("channel must be 'backward' or 'forward'")

    @property
    def n_steps(self) -> int:
        return len(self.times) - 1

    @property
    def output(self) -> np.ndarray:
        """Series of the designated echo channel."""
        return self.backward_out if self.channel == "backward" else self.forward_out

    def echo_mask(self) -> np.ndarray:
        """Samples in the echo window ``[t0, t_end]``."""
        if self.retrieval_time is None:
            return np.zeros(len(self.times), dtype=bool)
        return self.times >= self.retrieval_time - 0.5 * self.dt


def build_grids(config) -> tuple[SpatialGrid, SpectralGrid]:
    """Spatial and spectral grids for a :class:`cribsim.config.SimulationConfig`."""
    from .broadening import profile_from_config, spectral_grid

    grid = config.grid
    spatial = SpatialGrid(grid.L, grid.N_z, grid.lead_in, grid.lead_out)
    profile = profile_from_config(config)
    spectrum = config.spectrum
    spectral = spectral_grid(profile, spectrum.N_delta, rule=spectrum.quadrature,
                             cutoff=spectrum.cutoff)
    return spatial, spectral


Source = Callable[[np.ndarray], np.ndarray]
