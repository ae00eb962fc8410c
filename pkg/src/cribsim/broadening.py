"""Inhomogeneous detuning profiles, their control transforms and physical shift models.

A profile describes one or more absorption lines. Each atom keeps the line it
belongs to, and its detuning is ``center + sign * offset`` where ``offset`` is
its displacement inside the artificially broadened line. Flipping the sign
reverses the broadening about each line center, which is what an inverted
field gradient does in the laboratory. For a single line centered at zero
this is plain ``Delta -> -Delta``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from .model import SpectralGrid

# Truncation of unbounded line shapes, in units of the width parameter.
DEFAULT_CUTOFF = {"gaussian": 6.0, "lorentzian": 20.0, "uniform": 1.0}


class ProfileKind(str, Enum):
    GAUSSIAN = "gaussian"
    LORENTZIAN = "lorentzian"
    UNIFORM = "uniform"
    LINEAR_GRADIENT = "linear_gradient"


@dataclass(frozen=True)
class DetuningProfile:
    """Line shape of the broadened transition(s).

    Parameters
    ----------
    kind : ProfileKind
        Spectral kinds use ``width`` (Gaussian standard deviation, Lorentzian
        half width, or half width of the box). ``linear_gradient`` assigns one
        detuning per position, ``sign * slope * (z - L/2)``.
    sign : int
        +1 or -1 for the two broadening orientations, 0 when removed.
    centers : tuple of float
        Line centers; a mixture of equally weighted lines when several.
    """

    kind: ProfileKind
    width: float = 1.0
    slope: float = 0.0
    sign: int = 1
    centers: tuple[float, ...] = (0.0,)

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", ProfileKind(self.kind))
        object.__setattr__(self, "centers", tuple(float(c) for c in self.centers))
        if self.sign not in (1, -1, 0):
            raise ValueError("profile sign must be +1, -1 or 0")
        if not self.centers:
            raise ValueError("profile needs at least one line center")
        if self.kind is ProfileKind.LINEAR_GRADIENT:
            if not self.slope > 0:
                raise ValueError("gradient slope must be positive")
        elif not self.width > 0:
            raise ValueError("line width must be positive")

    @property
    def is_gradient(self) -> bool:
        return self.kind is ProfileKind.LINEAR_GRADIENT

    def line_density(self, x) -> np.ndarray:
        """Normalized shape of a single line as a function of the offset ``x``."""
        x = np.asarray(x, dtype=float)
        w = self.width
        if self.kind is ProfileKind.GAUSSIAN:
            return np.exp(-0.5 * (x / w) ** 2) / (math.sqrt(2 * math.pi) * w)
        if self.kind is ProfileKind.LORENTZIAN:
            return w / (math.pi * (x * x + w * w))
        if self.kind is ProfileKind.UNIFORM:
            return np.where(np.abs(x) <= w, 0.5 / w, 0.0)
        raise ValueError("a gradient profile has no spectral density")

    def density(self, delta) -> np.ndarray:
        """Continuum spectral density ``g(Delta)`` of the unflipped profile."""
        delta = np.asarray(delta, dtype=float)
        out = np.zeros(delta.shape)
        for c in self.centers:
            out = out + self.line_density(delta - c)
        return out / len(self.centers)

    def gradient_detunings(self, z, length: float) -> np.ndarray:
        """Detuning assigned to positions ``z`` by a linear gradient."""
        if not self.is_gradient:
            raise ValueError("not a gradient profile")
        return self.centers[0] + self.sign * self.slope * (np.asarray(z, dtype=float) - 0.5 * length)


def make_profile(kind, width: float | None = None, slope: float | None = None, sign: int = 1,
                 centers=(0.0,)) -> DetuningProfile:
    kind = ProfileKind(kind)
    if kind is ProfileKind.LINEAR_GRADIENT:
        if slope is None and width is not None:
            slope = width
        return DetuningProfile(kind, width=1.0, slope=float(slope if slope is not None else 0.0),
                               sign=sign, centers=tuple(centers))
    return DetuningProfile(kind, width=float(width if width is not None else 0.0), sign=sign,
                           centers=tuple(centers))


def flip(profile: DetuningProfile) -> DetuningProfile:
    """Reverse the broadening orientation."""
    if profile.sign == 0:
        raise ValueError("cannot flip a removed broadening (sign 0); reestablish it instead")
    return replace(profile, sign=-profile.sign)


def remove(profile: DetuningProfile) -> DetuningProfile:
    return replace(profile, sign=0)


def reestablish(profile: DetuningProfile, new_sign: int) -> DetuningProfile:
    if new_sign not in (1, -1):
        raise ValueError("new sign must be +1 or -1")
    return replace(profile, sign=new_sign)


def remove_then_reestablish(profile: DetuningProfile, new_sign: int) -> tuple[DetuningProfile, DetuningProfile]:
    """Intermediate (removed) and final profiles of the two-step transition."""
    if new_sign not in (1, -1):
        raise ValueError("new sign must be +1 or -1")
    removed = remove(profile)
    return removed, reestablish(removed, new_sign)


@dataclass(frozen=True, eq=False)
class LineGrid:
    """Spectral grid plus the line each node belongs to."""

    grid: SpectralGrid
    line_index: np.ndarray
    centers: np.ndarray

    @property
    def offsets(self) -> np.ndarray:
        return self.grid.nodes - self.centers[self.line_index]

    def detunings(self, sign: int) -> np.ndarray:
        return self.centers[self.line_index] + sign * self.offsets


def _merged_supports(profile: DetuningProfile, half: float) -> list[tuple[float, float, list[int]]]:
    spans = sorted((c - half, c + half, i) for i, c in enumerate(profile.centers))
    merged: list[tuple[float, float, list[int]]] = []
    for lo, hi, i in spans:
        if merged and lo <= merged[-1][1]:
            a, b, idx = merged[-1]
            merged[-1] = (a, max(b, hi), idx + [i])
        else:
            merged.append((lo, hi, [i]))
    return merged


def line_grid(profile: DetuningProfile, n_delta: int, rule: str = "uniform",
              cutoff: float | None = None) -> LineGrid:
    """Quadrature over the detuning classes of ``profile``.

    ``rule="uniform"`` (default) is a midpoint rule on the truncated support
    with ``n_delta`` nodes per line; its equal spacing ``s`` makes every
    spurious revival of the dephased polarization occur no earlier than
    ``2 pi / s``. ``rule="gauss"`` uses Gauss-Hermite nodes for Gaussian lines
    and Gauss-Legendre nodes otherwise; it integrates smooth quantities with
    few nodes but revives early, so it suits short runs only.
    """
    if n_delta < 1:
        raise ValueError("N_delta must be >= 1")
    centers = np.asarray(profile.centers, dtype=float)
    if profile.is_gradient:
        grid = SpectralGrid(np.array([0.0]), np.array([1.0]), np.array([1.0]), 1.0)
        return LineGrid(grid, np.zeros(1, dtype=int), np.array([0.0]))
    if n_delta == 1:
        if len(centers) != 1:
            raise ValueError("a single detuning class cannot represent several lines")
        ref = float(profile.density(centers[0]))
        grid = SpectralGrid(centers.copy(), np.array([1.0]), np.array([1.0]), ref)
        return LineGrid(grid, np.zeros(1, dtype=int), centers)

    kind = profile.kind.value
    cut = DEFAULT_CUTOFF[kind] if cutoff is None else float(cutoff)
    if profile.kind is ProfileKind.UNIFORM:
        cut = min(cut, 1.0)
    if not cut > 0:
        raise ValueError("cutoff must be positive")
    half = cut * profile.width

    nodes_l, weights_l, lines_l = [], [], []
    if rule == "uniform":
        spacing = 2 * half / n_delta
        for lo, hi, idx in _merged_supports(profile, half):
            n = max(1, int(round((hi - lo) / spacing)))
            step = (hi - lo) / n
            x = lo + (np.arange(n) + 0.5) * step
            nodes_l.append(x)
            weights_l.append(np.full(n, step))
            near = np.argmin(np.abs(x[:, None] - centers[idx][None, :]), axis=1)
            lines_l.append(np.asarray(idx)[near])
    elif rule == "gauss":
        for i, c in enumerate(centers):
            if profile.kind is ProfileKind.GAUSSIAN:
                x, w = np.polynomial.hermite.hermgauss(n_delta)
                s = math.sqrt(2.0) * profile.width
                nodes_l.append(c + s * x)
                weights_l.append(w * s * np.exp(x * x))
            else:
                x, w = np.polynomial.legendre.leggauss(n_delta)
                nodes_l.append(c + half * x)
                weights_l.append(w * half)
            lines_l.append(np.full(n_delta, i))
    else:
        raise ValueError(f"unknown quadrature rule {rule!r}")

    nodes = np.concatenate(nodes_l)
    weights = np.concatenate(weights_l)
    lines = np.concatenate(lines_l).astype(int)
    order = np.argsort(nodes, kind="stable")
    nodes, weights, lines = nodes[order], weights[order], lines[order]
    dens = profile.density(nodes)
    keep = dens > 0
    nodes, weights, lines, dens = nodes[keep], weights[keep], lines[keep], dens[keep]
    z = float(np.sum(weights * dens))
    if not z > 0:
        raise ValueError("spectral normalization failed: empty quadrature")
    weights = weights / z
    # Renormalize against rounding so the invariant holds to machine precision.
    weights = weights / float(np.sum(weights * dens))
    resonant = float(profile.density(centers[0])) / z
    grid = SpectralGrid(nodes, weights, dens, resonant)
    return LineGrid(grid, lines, centers)


def spectral_grid(profile: DetuningProfile, n_delta: int, rule: str = "uniform",
                  cutoff: float | None = None) -> SpectralGrid:
    return line_grid(profile, n_delta, rule, cutoff).grid


def profile_from_config(config) -> DetuningProfile:
    s = config.spectrum
    return make_profile(s.kind, width=s.width, slope=s.slope, sign=s.sign, centers=tuple(s.centers))


@dataclass(frozen=True)
class BandSelection:
    mask: np.ndarray
    warning: str | None = None

    @property
    def empty(self) -> bool:
        return not bool(np.any(self.mask))


def band_mask(detunings, lo: float, hi: float) -> BandSelection:
    """Select detuning classes with ``lo <= Delta <= hi``.

    ``detunings`` may be a :class:`SpectralGrid` or an array of current
    detunings. An empty selection carries a warning instead of failing.
    """
    if not lo < hi:
        raise ValueError("band needs lo < hi")
    values = detunings.nodes if isinstance(detunings, SpectralGrid) else np.asarray(detunings, dtype=float)
    mask = (values >= lo) & (values <= hi)
    warning = None
    if not np.any(mask):
        warning = f"band [{lo:g}, {hi:g}] selects no detuning class"
    return BandSelection(mask, warning)


def broadening_warning(profile: DetuningProfile, bound: float | None) -> str | None:
    """Warn when the broadened line exceeds a material-specific bound.

    The bound stands for the hyperfine or fine structure splitting; a wider
    broadening would mix in other transitions.
    """
    if bound is None or profile.is_gradient:
        return None
    if profile.width > bound:
        return (f"inhomogeneous width {profile.width:g} exceeds the maximum broadening {bound:g} "
                "(hyperfine/fine structure splitting)")
    return None


class ShiftMechanism(str, Enum):
    ZEEMAN = "zeeman"
    DC_STARK = "dc_stark"
    AC_STARK = "ac_stark"


# Hz per unit field: mT for Zeeman, V/cm for dc Stark, W/m^2 for the light shift.
ZEEMAN_HZ_PER_MT = 13e6
DC_STARK_HZ_PER_V_PER_CM = 100e3
AC_STARK_HZ_PER_W_PER_M2 = 200e6 / 1e9
AC_STARK_REFERENCE_DETUNING_NM = 10.0


@dataclass(frozen=True)
class PhysicalShiftModel:
    """Linear map from an applied field to a transition shift in Hz.

    For the light shift the coefficient holds at ``laser_detuning_nm = 10``
    and scales as ``10 / laser_detuning_nm``, so inverting the laser detuning
    inverts the shift.
    """

    mechanism: ShiftMechanism
    coefficient: float | None = None
    laser_detuning_nm: float = AC_STARK_REFERENCE_DETUNING_NM

    def __post_init__(self) -> None:
        mech = ShiftMechanism(self.mechanism)
        object.__setattr__(self, "mechanism", mech)
        if self.coefficient is None:
            default = {ShiftMechanism.ZEEMAN: ZEEMAN_HZ_PER_MT,
                       ShiftMechanism.DC_STARK: DC_STARK_HZ_PER_V_PER_CM,
                       ShiftMechanism.AC_STARK: AC_STARK_HZ_PER_W_PER_M2}[mech]
            object.__setattr__(self, "coefficient", default)
        if not self.coefficient > 0:
            raise ValueError("shift coefficient must be positive")
        if mech is ShiftMechanism.AC_STARK and not (math.isfinite(self.laser_detuning_nm)
                                                    and self.laser_detuning_nm != 0):
            raise ValueError("light shift needs a finite non-zero laser detuning")

    def shift_from_field(self, strength: float) -> float:
        """Shift in Hz for a field in mT, V/cm or W/m^2 depending on the mechanism."""
        if self.mechanism is ShiftMechanism.AC_STARK:
            return self.coefficient * strength * (AC_STARK_REFERENCE_DETUNING_NM / self.laser_detuning_nm)
        return self.coefficient * strength


def shift_from_field(model: PhysicalShiftModel, strength: float) -> float:
    return model.shift_from_field(strength)
