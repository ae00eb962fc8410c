"""Figures of merit computed from run records.

Energies are rectangle-rule sums over the solver samples, which is the
quadrature under which the solver's photon ledger is exact. The echo window
is ``[t0, t_end]`` and the transmitted window ``[t_start, t0)``, with ``t0``
the retrieval trigger stored in the record.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .model import PulseKind, RunRecord


def _energy(series: np.ndarray, dt: float) -> float:
    return float(np.sum(np.abs(series) ** 2)) * dt


def input_energy(record: RunRecord) -> float:
    return _energy(record.forward_in, record.dt)


def efficiency(record: RunRecord, channel: str | None = None) -> float:
    """Energy in the output channel over the echo window divided by the input energy.

    Without a retrieval event the window is the whole run, so the result is
    the transmission of the chosen channel.
    """
    e_in = input_energy(record)
    if not e_in > 0:
        raise ValueError("input energy is zero")
    channel = channel or record.channel
    series = record.backward_out if channel == "backward" else record.forward_out
    if record.retrieval_time is None:
        return _energy(series, record.dt) / e_in
    return _energy(series[record.echo_mask()], record.dt) / e_in


def transmitted_fraction(record: RunRecord) -> float:
    e_in = input_energy(record)
    if not e_in > 0:
        raise ValueError("input energy is zero")
    mask = ~record.echo_mask() if record.retrieval_time is not None else np.ones(len(record.times), bool)
    return _energy(record.forward_out[mask], record.dt) / e_in


def mode_overlap(output, reference) -> tuple[float, float]:
    """Fidelity ``|<ref, out>|^2 / (|ref|^2 |out|^2)`` and phase ``arg <ref, out>``.

    Both series must be sampled on the same uniform grid.
    """
    out = np.asarray(output, dtype=complex)
    ref = np.asarray(reference, dtype=complex)
    if out.shape != ref.shape:
        raise ValueError("output and reference have different lengths")
    n_out = float(np.vdot(out, out).real)
    n_ref = float(np.vdot(ref, ref).real)
    if not (n_out > 0 and n_ref > 0):
        raise ValueError("mode overlap of a zero-energy series")
    ov = np.vdot(ref, out)
    fid = min(1.0, abs(ov) ** 2 / (n_out * n_ref))
    phase = float(np.angle(ov))
    if phase <= -math.pi + 1e-12:
        phase = math.pi  # keep the phase in (-pi, pi]
    return float(fid), phase


def mirrored_input(record: RunRecord, conjugate: bool = False) -> np.ndarray:
    """Input reflected about the echo mirror time, on the echo-window samples."""
    if record.mirror_time is None:
        raise ValueError("record has no retrieval event")
    t = record.times[record.echo_mask()]
    src = record.mirror_time - t
    if record.pulse is not None:
        ref = record.pulse(src)
    else:
        ref = (np.interp(src, record.times, record.forward_in.real, left=0.0, right=0.0)
               + 1j * np.interp(src, record.times, record.forward_in.imag, left=0.0, right=0.0))
    return np.conj(ref) if conjugate else ref


def echo_overlap(record: RunRecord, conjugate: bool = False) -> tuple[float, float]:
    """Mode overlap of the echo with the time-mirrored input (optionally conjugated)."""
    return mode_overlap(record.output[record.echo_mask()], mirrored_input(record, conjugate))


def _refine_peak(t: np.ndarray, y: np.ndarray, i: int) -> float:
    if 0 < i < len(y) - 1:
        a, b, c = y[i - 1], y[i], y[i + 1]
        den = a - 2 * b + c
        if den != 0:
            return float(t[i] + 0.5 * (a - c) / den * (t[1] - t[0]))
    return float(t[i])


def echo_peak_time(record: RunRecord) -> float:
    """Peak time of the echo intensity with sub-sample quadratic interpolation."""
    mask = record.echo_mask()
    if not np.any(mask):
        raise ValueError("record has no echo window")
    t = record.times[mask]
    y = np.abs(record.output[mask]) ** 2
    if not np.any(y > 0):
        raise ValueError("echo window carries no energy")
    return _refine_peak(t, y, int(np.argmax(y)))


def find_peaks(t: np.ndarray, y: np.ndarray, rel_height: float = 0.05) -> list[float]:
    """Local maxima above ``rel_height * max(y)``, refined by quadratic interpolation."""
    if y.size < 3 or not np.any(y > 0):
        return []
    thr = rel_height * float(np.max(y))
    idx = np.nonzero((y[1:-1] > y[:-2]) & (y[1:-1] >= y[2:]) & (y[1:-1] > thr))[0] + 1
    return [_refine_peak(t, y, int(i)) for i in idx]


@dataclass(frozen=True)
class QubitResult:
    fidelity: float
    leakage: float
    amplitudes: tuple[complex, complex]


def timebin_fidelity(record: RunRecord, alpha: complex, beta: complex, phase: float = 0.0) -> QubitResult:
    """Conditional fidelity of a retrieved time-bin qubit.

    The echo is projected on the two input bin modes mirrored in time; the
    projection is renormalized and compared with ``(alpha, beta e^{i phase})``
    up to a global phase. The leakage is the input energy not captured by the
    two mirrored modes.
    """
    shape = record.pulse
    if shape is None or shape.kind is not PulseKind.TIME_BIN:
        raise ValueError("record input is not a time-bin qubit")
    if record.mirror_time is None:
        raise ValueError("record has no retrieval event")
    mask = record.echo_mask()
    t = record.times[mask]
    h = record.dt
    out = record.output[mask]
    src = record.mirror_time - t
    modes = [shape.component(j, src) for j in range(2)]
    norms = [math.sqrt(_energy(m, h)) for m in modes]
    if min(norms) == 0:
        raise ValueError("time bins fall outside the echo window")
    modes = [m / n for m, n in zip(modes, norms)]
    cross = abs(np.vdot(modes[0], modes[1])) * h
    if cross > 1e-3:
        raise ValueError(f"time bins unresolvable in the output (mode overlap {cross:.2g})")
    # Project on the span of the two (nearly orthogonal) modes.
    gram = np.array([[np.vdot(a, b) * h for b in modes] for a in modes])
    proj = np.array([np.vdot(m, out) * h for m in modes])
    coef = np.linalg.solve(gram, proj)
    captured = float(np.real(np.vdot(coef, gram @ coef)))
    c = coef
    e_in = input_energy(record)
    leakage = 1.0 - captured / e_in
    if captured == 0:
        return QubitResult(0.0, leakage, (0j, 0j))
    psi_out = c / np.linalg.norm(c)
    psi_in = np.array([alpha, beta * complex(math.cos(phase), math.sin(phase))], dtype=complex)
    psi_in = psi_in / np.linalg.norm(psi_in)
    fid = abs(np.vdot(psi_in, psi_out)) ** 2
    return QubitResult(float(fid), float(leakage), (complex(psi_out[0]), complex(psi_out[1])))


class UnresolvableError(ValueError):
    """Pulses or echoes that cannot be told apart."""


@dataclass(frozen=True)
class OrderingReport:
    input_peaks: tuple[float, ...]
    output_peaks: tuple[float, ...]
    source_order: tuple[int, ...]
    reversed: bool
    efficiencies: tuple[float, ...]

    @property
    def efficiency_spread(self) -> float:
        """Largest relative deviation of a per-pulse efficiency from their mean."""
        e = np.asarray(self.efficiencies)
        return float(np.max(np.abs(e - e.mean())) / e.mean()) if e.size and e.mean() > 0 else 0.0


def _split_energies(t, series, peaks, h):
    edges = [-np.inf] + [0.5 * (a + b) for a, b in zip(peaks, peaks[1:])] + [np.inf]
    return [_energy(series[(t >= lo) & (t < hi)], h) for lo, hi in zip(edges, edges[1:])]


def ordering_check(record: RunRecord, centers=None) -> OrderingReport:
    """Detect input and echo peaks and check last-in first-out recall.

    Each echo peak is attributed to the input pulse whose mirror image is
    closest; recall is reversed when the attributions, read in time order,
    run from the last input pulse to the first.
    """
    if record.mirror_time is None:
        raise ValueError("record has no retrieval event")
    h = record.dt
    t = record.times
    if centers is None:
        if record.pulse is None:
            raise ValueError("pulse centers unknown")
        centers = record.pulse.centers
    centers = sorted(float(c) for c in centers)
    pre = ~record.echo_mask()
    in_peaks = find_peaks(t[pre], np.abs(record.forward_in[pre]) ** 2)
    if len(in_peaks) != len(centers):
        raise UnresolvableError(f"found {len(in_peaks)} input peaks for {len(centers)} pulses")
    post = record.echo_mask()
    out_peaks = find_peaks(t[post], np.abs(record.output[post]) ** 2)
    if len(out_peaks) != len(centers):
        raise UnresolvableError(f"found {len(out_peaks)} echo peaks for {len(centers)} pulses")
    mirrored = [record.mirror_time - p for p in in_peaks]
    source = tuple(int(np.argmin([abs(o - m) for m in mirrored])) for o in out_peaks)
    n = len(centers)
    rev = source == tuple(range(n - 1, -1, -1))
    e_in = _split_energies(t[pre], record.forward_in[pre], in_peaks, h)
    e_out = _split_energies(t[post], record.output[post], out_peaks, h)
    effs = tuple(e_out[k] / e_in[source[k]] for k in range(n)) if len(set(source)) == n else ()
    # Report per input pulse, in input order.
    if effs:
        by_input = [0.0] * n
        for k, j in enumerate(source):
            by_input[j] = effs[k]
        effs = tuple(by_input)
    return OrderingReport(tuple(in_peaks), tuple(out_peaks), source, rev, effs)


@dataclass(frozen=True)
class BalanceResult:
    residual: float
    decay_fraction: float


def energy_balance(record: RunRecord) -> BalanceResult:
    """Largest violation of ``E_in = E_trans + E_back + E_stored`` over the run.

    ``E_stored`` is the atomic excitation plus the field energy still inside
    the medium. With decay the ledger does not close; the final deficit is
    returned as the fraction absorbed by decay.
    """
    h = record.dt
    e_total = input_energy(record)
    if not e_total > 0:
        return BalanceResult(0.0, 0.0)
    e_in = np.cumsum(np.abs(record.forward_in) ** 2) * h
    e_tr = np.cumsum(np.abs(record.forward_out) ** 2) * h
    e_bk = np.cumsum(np.abs(record.backward_out) ** 2) * h
    gap = e_in - e_tr - e_bk - record.stored - record.in_flight
    residual = float(np.max(np.abs(gap))) / e_total
    decay = float(gap[-1]) / e_total if record.decay > 0 else 0.0
    return BalanceResult(residual, decay)


def band_energy(record: RunRecord, lo: float, hi: float, window: tuple[float, float] | None = None,
                channel: str | None = None) -> float:
    """Output energy carried by detunings ``lo <= Delta <= hi``.

    A component ``exp(-1j * delta * t)`` of the envelope is resonant with
    atoms at ``Delta = -delta``, which is how frequencies are labelled here.
    """
    channel = channel or record.channel
    series = record.backward_out if channel == "backward" else record.forward_out
    t = record.times
    mask = np.ones(t.size, dtype=bool) if window is None else (t >= window[0]) & (t <= window[1])
    x = series[mask]
    if x.size == 0:
        return 0.0
    spec = np.abs(np.fft.fft(x)) ** 2
    total = float(np.sum(spec))
    if total == 0:
        return 0.0
    omega = 2 * math.pi * np.fft.fftfreq(x.size, record.dt)
    # fft picks exp(+i omega t) components, i.e. Delta = omega.
    sel = (omega >= lo) & (omega <= hi)
    return _energy(x, record.dt) * float(np.sum(spec[sel])) / total


def richardson(coarse: np.ndarray, fine: np.ndarray, order: int = 2, ratio: float = 2.0) -> np.ndarray:
    """Richardson extrapolation from two resolutions differing by ``ratio``."""
    return fine + (fine - coarse) / (ratio ** order - 1.0)


@dataclass(frozen=True)
class MetricsReport:
    efficiency: float
    transmitted: float
    mode_overlap_fidelity: float | None = None
    global_phase: float | None = None
    conjugate_fidelity: float | None = None
    echo_peak_time: float | None = None
    qubit_fidelity: float | None = None
    qubit_leakage: float | None = None
    ordering_reversed: bool | None = None
    ordering_efficiencies: tuple[float, ...] | None = None
    energy_balance_residual: float | None = None
    decay_fraction: float | None = None
    max_coherence: float = 0.0
    weak_field_violation: bool = False

    def as_dict(self) -> dict:
        d = asdict(self)
        if d["ordering_efficiencies"] is not None:
            d["ordering_efficiencies"] = list(d["ordering_efficiencies"])
        return d


def evaluate(record: RunRecord) -> MetricsReport:
    """All metrics that apply to ``record``; inapplicable ones are ``None``."""
    eta = efficiency(record)
    fid = phase = conj = peak = None
    qf = ql = None
    rev = effs = None
    if record.retrieval_time is not None:
        try:
            fid, phase = echo_overlap(record)
            conj, _ = echo_overlap(record, conjugate=True)
            peak = echo_peak_time(record)
        except ValueError:
            pass
        shape = record.pulse
        if shape is not None and shape.kind is PulseKind.TIME_BIN:
            a, b = shape.amplitudes
            try:
                q = timebin_fidelity(record, abs(a), abs(b), float(np.angle(b) - np.angle(a)))
                qf, ql = q.fidelity, q.leakage
            except ValueError:
                pass
        if shape is not None and len(shape.centers) > 1:
            try:
                o = ordering_check(record)
                rev, effs = o.reversed, o.efficiencies
            except ValueError:
                pass
    bal = energy_balance(record)
    return MetricsReport(
        efficiency=eta, transmitted=transmitted_fraction(record), mode_overlap_fidelity=fid,
        global_phase=phase, conjugate_fidelity=conj, echo_peak_time=peak, qubit_fidelity=qf,
        qubit_leakage=ql, ordering_reversed=rev, ordering_efficiencies=effs,
        energy_balance_residual=bal.residual if record.decay == 0 else None,
        decay_fraction=bal.decay_fraction if record.decay > 0 else None,
        max_coherence=record.max_coherence, weak_field_violation=record.weak_field_violation)
