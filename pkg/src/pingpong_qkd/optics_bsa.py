"""Bell-state analyzer: lossy asymmetric beam splitter, detour delay and
time-tag classification.

Two photons meeting at the beam splitter either leave through the same port
(the polarizing splitter then sends them to D1 and D2 simultaneously) or
through different ports, in which case the photon in the detour arm arrives
``detour_delay`` later. psi+ bunches and gives the simultaneous signature,
psi- antibunches and gives the delayed one.
"""
from __future__ import annotations

import csv
import enum
import io
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy import integrate, optimize, stats

from .photon_source import PulseEmission, SourceParams
from .quantum_state import HV, VH, BellSign, StateError, TwoQubitState, encode

SPEED_OF_LIGHT_UM_PER_FS = 0.299792458
SUM_TOL = 1e-9


@dataclass(frozen=True)
class BsaParams:
    """Analyzer parameters. Times are in ns.

    ``detour_alignment`` scales the two-photon overlap of the antisymmetric
    (detour-signature) part of the state; 1 means a perfectly aligned detour.
    ``arrival_offset`` places the undelayed photons inside the pulse slot so
    time tags stay positive under jitter.
    """

    T: float = 0.37
    R: float = 0.57
    bs_loss: float = 0.06
    detour_delay: float = 5.7
    window_half_width: float = 1.5
    detour_alignment: float = 1.0
    sync_error_prob: float = 0.02
    arrival_offset: float = 5.0
    kernel: str = "triangular"

    def __post_init__(self) -> None:
        for name in ("T", "R", "bs_loss", "detour_alignment", "sync_error_prob"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {value}")
        if abs(self.T + self.R + self.bs_loss - 1.0) > SUM_TOL:
            raise ValueError("T + R + bs_loss must equal 1")
        if self.window_half_width <= 0:
            raise ValueError("window_half_width must be positive")
        if self.detour_delay <= 2 * self.window_half_width:
            raise ValueError("detour_delay must exceed the full coincidence window")
        if self.kernel not in ("triangular", "gaussian"):
            raise ValueError(f"unknown overlap kernel {self.kernel!r}")

    @property
    def jitter_sigma(self) -> float:
        """Per-click timing jitter; the click difference then has sd = window/3."""
        return self.window_half_width / (3.0 * math.sqrt(2.0))

    @property
    def pass_prob(self) -> float:
        return (self.T + self.R) ** 2


class Detector(enum.Enum):
    D1 = 1
    D2 = 2


class Signature(enum.Enum):
    PSI_PLUS = "psi+"
    PSI_MINUS = "psi-"
    NO_COINCIDENCE = "none"
    AMBIGUOUS = "ambiguous"


@dataclass(frozen=True)
class ClickEvent:
    detector: Detector
    time_tag: float
    pulse_index: int = 0

    def __post_init__(self) -> None:
        if self.time_tag < 0:
            raise ValueError("time_tag must be nonnegative")


@dataclass(frozen=True)
class HomCurvePoint:
    stage_position: float
    p_equal: float
    p_delayed: float


def overlap_half_width(coherence_time: float) -> float:
    """Half-base of the overlap triangle in um: c * tau / 2."""
    return SPEED_OF_LIGHT_UM_PER_FS * coherence_time / 2.0


def temporal_overlap(delta_path: float, coherence_time: float, kernel: str = "triangular") -> float:
    """Two-photon overlap for a path mismatch ``delta_path`` (um)."""
    if coherence_time <= 0:
        raise ValueError("coherence_time must be positive")
    w = overlap_half_width(coherence_time)
    if kernel == "triangular":
        return max(0.0, 1.0 - abs(delta_path) / w)
    if kernel == "gaussian":
        # same FWHM as the triangle
        return math.exp(-4.0 * math.log(2.0) * (delta_path / w) ** 2)
    raise ValueError(f"unknown overlap kernel {kernel!r}")


def interference_weights(state: TwoQubitState) -> tuple[float, float, float, float]:
    """Split the HV/VH block into symmetric, antisymmetric and incoherent parts.

    Returns ``(w_sym, w_anti, w_inc, population)``; the weights are
    normalised to the block population.
    """
    pop = state.rho[HV, HV].real + state.rho[VH, VH].real
    if pop <= 1e-15:
        raise StateError("state has no weight in the HV/VH subspace")
    coh = 2.0 * state.rho[HV, VH].real / pop
    coh = min(1.0, max(-1.0, coh))
    return max(coh, 0.0), max(-coh, 0.0), 1.0 - abs(coh), pop


def coincidence_probs(state: TwoQubitState, chi: float, bsa: BsaParams) -> tuple[float, float]:
    """Probabilities of the same-port and split-port two-photon outcomes."""
    if not 0.0 <= chi <= 1.0:
        raise ValueError(f"overlap must lie in [0, 1], got {chi}")
    w_sym, w_anti, w_inc, pop = interference_weights(state)
    t, r = bsa.T, bsa.R
    tr, flat = t * r, t * t + r * r
    chi_anti = bsa.detour_alignment * chi
    p_same = w_sym * 2 * tr * (1 + chi) + w_anti * 2 * tr * (1 - chi_anti) + w_inc * 2 * tr
    p_split = w_sym * (flat - 2 * tr * chi) + w_anti * (flat + 2 * tr * chi_anti) + w_inc * flat
    return pop * p_same, pop * p_split


def hom_curve(
    state: TwoQubitState,
    positions: Sequence[float],
    bsa: BsaParams,
    source: SourceParams,
) -> list[HomCurvePoint]:
    if len(positions) == 0:
        raise ValueError("positions must not be empty")
    curve = []
    for x in positions:
        chi = temporal_overlap(x, source.coherence_time, bsa.kernel)
        p_same, p_split = coincidence_probs(state, chi, bsa)
        curve.append(HomCurvePoint(float(x), p_same, p_split))
    return curve


def contrast(curve: Sequence[HomCurvePoint], channel: str = "equal") -> float:
    """(max - min)/(max + min) between the two coincidence signals.

    ``channel`` names the signal expected to dominate; the contrast is taken
    at the stage position where that signal peaks, against the other signal
    at the same position.
    """
    if not curve:
        raise ValueError("curve must not be empty")
    if channel not in ("equal", "delayed"):
        raise ValueError(f"channel must be 'equal' or 'delayed', got {channel!r}")
    sel = np.array([p.p_equal if channel == "equal" else p.p_delayed for p in curve])
    other = np.array([p.p_delayed if channel == "equal" else p.p_equal for p in curve])
    k = int(np.argmax(sel))
    hi, lo = sel[k], other[k]
    if hi + lo == 0:
        raise ZeroDivisionError("both coincidence signals vanish")
    return float((hi - lo) / (hi + lo))


def dip_half_width(curve: Sequence[HomCurvePoint], channel: str = "equal", tol: float = 1e-12) -> float:
    """Distance from the curve centre at which ``channel`` reaches its flat baseline."""
    xs = np.array([p.stage_position for p in curve])
    ys = np.array([p.p_equal if channel == "equal" else p.p_delayed for p in curve])
    base = ys[np.argmax(np.abs(xs))]
    inside = np.abs(ys - base) > tol
    if not inside.any():
        return 0.0
    # first flat sample beyond the outermost structured one
    edge = np.abs(xs[inside]).max()
    beyond = np.abs(xs)[np.abs(xs) > edge]
    return float(beyond.min()) if beyond.size else float(edge)


def hom_csv_text(curve: Iterable[HomCurvePoint]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["stage_um", "p_equal", "p_delayed"])
    for p in curve:
        writer.writerow([f"{p.stage_position:.6g}", f"{p.p_equal:.6g}", f"{p.p_delayed:.6g}"])
    return buf.getvalue()


def write_hom_csv(curve: Iterable[HomCurvePoint], path: str | Path) -> Path:
    path = Path(path)
    path.write_text(hom_csv_text(curve), encoding="ascii")
    return path


def read_hom_csv(path: str | Path) -> list[HomCurvePoint]:
    with open(path, newline="", encoding="ascii") as fh:
        rows = list(csv.DictReader(fh))
    return [HomCurvePoint(float(r["stage_um"]), float(r["p_equal"]), float(r["p_delayed"])) for r in rows]


def generate_clicks(
    emission: PulseEmission,
    encoded: BellSign,
    chi: float,
    bsa: BsaParams,
    source: SourceParams,
    rng: np.random.Generator,
    pulse_index: int = 0,
    probs: tuple[float, float] | None = None,
) -> list[ClickEvent]:
    """Detector clicks produced by one pulse.

    Each pair is detected as a whole with probability eta1*eta2, then routed
    to the same-port or split-port outcome (the remainder is beam-splitter
    loss). A sync error shifts one click of the pair by U[2w, 10w].
    ``probs`` may carry precomputed ``coincidence_probs`` for the encoded state.
    """
    if emission.n_pairs == 0:
        return []
    detected = rng.random(emission.n_pairs) < source.eta1 * source.eta2
    if not detected.any():
        return []
    if probs is None:
        probs = coincidence_probs(encode(emission.state, encoded), chi, bsa)
    p_same, p_split = probs
    w = bsa.window_half_width
    clicks: list[ClickEvent] = []
    for _ in range(int(detected.sum())):
        u = rng.random()
        if u >= p_same + p_split:
            continue
        times = bsa.arrival_offset + rng.normal(0.0, bsa.jitter_sigma, size=2)
        if u >= p_same:
            times[rng.integers(2)] += bsa.detour_delay
        if rng.random() < bsa.sync_error_prob:
            times[rng.integers(2)] += rng.uniform(2 * w, 10 * w)
        times = np.maximum(times, 0.0)
        clicks.append(ClickEvent(Detector.D1, float(times[0]), pulse_index))
        clicks.append(ClickEvent(Detector.D2, float(times[1]), pulse_index))
    return clicks


def classify_signature(clicks: Sequence[ClickEvent], bsa: BsaParams | None = None) -> Signature:
    bsa = bsa or BsaParams()
    d1 = [c.time_tag for c in clicks if c.detector is Detector.D1]
    d2 = [c.time_tag for c in clicks if c.detector is Detector.D2]
    if not d1 or not d2:
        return Signature.NO_COINCIDENCE
    if len(d1) > 1 or len(d2) > 1:
        return Signature.AMBIGUOUS
    dt = abs(d2[0] - d1[0])
    w = bsa.window_half_width
    if dt <= w:
        return Signature.PSI_PLUS
    if abs(dt - bsa.detour_delay) <= w:
        return Signature.PSI_MINUS
    return Signature.AMBIGUOUS


def _abs_in_range(x0: float, sigma: float, lo: float, hi: float) -> float:
    # P(lo <= |x0 + N(0, sigma)| <= hi) for 0 <= lo < hi
    cdf = stats.norm.cdf
    return float(
        cdf((hi - x0) / sigma) - cdf((lo - x0) / sigma) + cdf((-lo - x0) / sigma) - cdf((-hi - x0) / sigma)
    )


def signature_probabilities(
    encoded: BellSign, chi: float, bsa: BsaParams, source: SourceParams
) -> dict[Signature, float]:
    """Signature distribution of a single pair that reaches both detectors.

    Closed-form counterpart of ``generate_clicks`` + ``classify_signature``:
    Gaussian click-difference jitter of sd window/3, plus the uniform
    sync-error shift integrated numerically.
    """
    p_same, p_split = coincidence_probs(encode(source.pair_state, encoded), chi, bsa)
    f_same = p_same / (p_same + p_split)
    f_split = 1.0 - f_same
    w, d = bsa.window_half_width, bsa.detour_delay
    sd = bsa.jitter_sigma * math.sqrt(2.0)

    def windows(x0: float) -> np.ndarray:
        return np.array([_abs_in_range(x0, sd, 0.0, w), _abs_in_range(x0, sd, d - w, d + w)])

    def shifted(x_of_s) -> np.ndarray:
        lo, hi = 2 * w, 10 * w
        out = [
            integrate.quad(lambda s, k=k: windows(x_of_s(s))[k], lo, hi, limit=200, points=[d - w, d, d + w])[0]
            / (hi - lo)
            for k in (0, 1)
        ]
        return np.array(out)

    q = bsa.sync_error_prob
    same = (1 - q) * windows(0.0)
    split = (1 - q) * windows(d)
    if q > 0:
        same = same + q * shifted(lambda s: s)
        split = split + q * 0.5 * (shifted(lambda s: d + s) + shifted(lambda s: d - s))
    plus, minus = f_same * same + f_split * split
    return {
        Signature.PSI_PLUS: float(plus),
        Signature.PSI_MINUS: float(minus),
        Signature.AMBIGUOUS: float(max(0.0, 1.0 - plus - minus)),
    }


def psi_minus_contrast(bsa: BsaParams, source: SourceParams) -> float:
    state = encode(source.pair_state, BellSign.MINUS)
    p_same, p_split = coincidence_probs(state, 1.0, bsa)
    return (p_split - p_same) / (p_split + p_same)


def psi_plus_contrast(bsa: BsaParams, source: SourceParams) -> float:
    p_same, p_split = coincidence_probs(source.pair_state, 1.0, bsa)
    return (p_same - p_split) / (p_same + p_split)


def calibrate_detour_alignment(target_contrast: float, bsa: BsaParams, source: SourceParams) -> float:
    """Detour alignment at which the psi- delayed/equal contrast hits the target."""

    def resid(mu: float) -> float:
        return psi_minus_contrast(replace(bsa, detour_alignment=mu), source) - target_contrast

    lo, hi = resid(0.0), resid(1.0)
    if lo > 0 or hi < 0:
        raise ValueError(
            f"psi- contrast {target_contrast} outside reachable range "
            f"[{lo + target_contrast:.4f}, {hi + target_contrast:.4f}]"
        )
    return float(optimize.brentq(resid, 0.0, 1.0, xtol=1e-12))
