"""Eavesdropper models and how visible they are to Alice and Bob."""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import asdict, dataclass
from typing import NamedTuple, Sequence, Union

import numpy as np

from . import _rng
from .protocol import ControlRecord, ControlVerdict, ProtocolConfig, control_runs
from .quantum_state import (
    BellSign,
    Polarization,
    TwoQubitState,
    encode,
    partial_trace,
)

LOSS_HIDING_THRESHOLD = 0.6

_PLUS = np.array([1.0, 1.0], dtype=complex) / math.sqrt(2.0)
_MINUS = np.array([1.0, -1.0], dtype=complex) / math.sqrt(2.0)
_BASES = {
    "z": (np.array([1.0, 0.0], dtype=complex), np.array([0.0, 1.0], dtype=complex)),
    "x": (_PLUS, _MINUS),
}
_POCKELS = np.diag([1.0, -1.0]).astype(complex)


@dataclass(frozen=True)
class NoAttack:
    kind = "none"
    travel_transmission = 1.0

    def travel_channel(self, state: TwoQubitState) -> TwoQubitState:
        return state

    def probe_photons(self, rng: np.random.Generator) -> list[Polarization]:
        return []


@dataclass(frozen=True)
class InterceptResend:
    """Eve measures the travel photon in ``basis`` and resends the eigenstate."""

    basis: str = "x"
    kind = "intercept_resend"
    travel_transmission = 1.0

    def __post_init__(self) -> None:
        if self.basis not in _BASES:
            raise ValueError(f"basis must be 'z' or 'x', got {self.basis!r}")

    def travel_channel(self, state: TwoQubitState) -> TwoQubitState:
        rho = np.zeros((4, 4), dtype=complex)
        for vec in _BASES[self.basis]:
            proj = np.outer(vec, vec.conj())
            rho += _project(state, proj)
        return TwoQubitState(0.5 * (rho + rho.conj().T))

    def probe_photons(self, rng: np.random.Generator) -> list[Polarization]:
        return []


def _project(state: TwoQubitState, proj: np.ndarray) -> np.ndarray:
    op = np.kron(np.eye(2), proj)
    return op @ state.rho @ op.conj().T


@dataclass(frozen=True)
class TrojanHorse:
    """Eve sends x-polarized probe light through Alice's Pockels cell.

    ``probe_pass_prob`` lumps Alice's spatial and spectral filters: the
    chance that a probe survives them and comes back out.
    """

    probe_pass_prob: float = 1.0
    photons_per_probe: int = 1
    kind = "trojan_horse"
    travel_transmission = 1.0

    def __post_init__(self) -> None:
        if not 0.0 <= self.probe_pass_prob <= 1.0:
            raise ValueError("probe_pass_prob must lie in [0, 1]")
        if self.photons_per_probe < 1:
            raise ValueError("photons_per_probe must be at least 1")

    def travel_channel(self, state: TwoQubitState) -> TwoQubitState:
        return state

    def probe_photons(self, rng: np.random.Generator) -> list[Polarization]:
        # an x-polarized probe photon reaching Alice's z analyzer lands H or V at random
        if rng.random() >= self.probe_pass_prob:
            return []
        return [Polarization(int(b)) for b in rng.integers(2, size=self.photons_per_probe)]


@dataclass(frozen=True)
class LossHiding:
    """Click-level stand-in for loss hiding: Eve owns the channel loss."""

    channel_transmission: float = 1.0
    kind = "loss_hiding"

    def __post_init__(self) -> None:
        if not 0.0 <= self.channel_transmission <= 1.0:
            raise ValueError("channel_transmission must lie in [0, 1]")

    @property
    def travel_transmission(self) -> float:
        return self.channel_transmission

    def travel_channel(self, state: TwoQubitState) -> TwoQubitState:
        return state

    def probe_photons(self, rng: np.random.Generator) -> list[Polarization]:
        return []


AttackModel = Union[NoAttack, InterceptResend, TrojanHorse, LossHiding]


@dataclass(frozen=True)
class AttackReport:
    info_per_message_bit: float
    detection_prob_per_control_run: float
    double_click_excess: float
    double_click_zscore: float = 0.0
    n_message_runs: int = 0
    n_control_runs: int = 0

    def to_dict(self) -> dict:
        return asdict(self)


class OneClickVerdict(NamedTuple):
    n_runs: int
    flagged: int
    flag_rate: float
    baseline: float
    zscore: float
    alarm: bool
    double_rate: float = 0.0
    double_baseline: float = 0.0
    double_zscore: float = 0.0


class LossHidingVerdict(NamedTuple):
    feasible: bool
    margin: float


def mutual_information(x: Sequence[int], y: Sequence[int]) -> float:
    """Plug-in estimate of I(X;Y) in bits (biased upward by ~(|X|-1)(|Y|-1)/(2N ln 2))."""
    n = len(x)
    if n == 0 or n != len(y):
        raise ValueError("need two equally long, nonempty samples")
    joint = Counter(zip(x, y))
    px, py = Counter(x), Counter(y)
    return max(
        0.0,
        sum(c / n * math.log2(c * n / (px[a] * py[b])) for (a, b), c in joint.items()),
    )


def travel_trace_distance(state: TwoQubitState) -> float:
    """Distinguishability of bit 0 and bit 1 from the travel photon alone."""
    r0 = partial_trace(encode(state, BellSign.PLUS), "travel").rho
    r1 = partial_trace(encode(state, BellSign.MINUS), "travel").rho
    return float(0.5 * np.abs(np.linalg.eigvalsh(r0 - r1)).sum())


def single_and_double_weights(config: ProtocolConfig) -> tuple[float, float]:
    r = config.source.double_pair_ratio
    return 1.0 / (1.0 + r), r / (1.0 + r)


def baseline_flag_rate(config: ProtocolConfig) -> float:
    """No-attack probability that a control run lacks exactly one click per side."""
    e1, e2 = config.source.eta1, config.source.eta2
    w1, w2 = single_and_double_weights(config)
    ok = w1 * e1 * e2 + w2 * (2 * e1 * (1 - e1)) * (2 * e2 * (1 - e2))
    return 1.0 - ok


def baseline_double_click_rate(config: ProtocolConfig) -> float:
    """No-attack probability of two detections on at least one side."""
    e1, e2 = config.source.eta1, config.source.eta2
    _, w2 = single_and_double_weights(config)
    return w2 * (1.0 - (1.0 - e1 * e1) * (1.0 - e2 * e2))


def _zscore(observed: float, expected: float, n: int) -> float:
    var = expected * (1.0 - expected) / n
    if var <= 0:
        return math.inf if observed > expected else 0.0
    return (observed - expected) / math.sqrt(var)


def one_click_check(records: Sequence[ControlRecord], config: ProtocolConfig, n_sigma: float = 5.0) -> OneClickVerdict:
    """Flag runs without exactly one detection per side.

    The alarm fires when either the flag rate or the rate of double clicks
    exceeds its no-attack baseline by ``n_sigma``. With lossy detectors extra
    photons also fill in missing clicks, so the flag rate alone can stay flat
    under a multi-photon probe while double clicks rise.
    """
    n = len(records)
    if n == 0:
        raise ValueError("no control records")
    flagged = sum(r.verdict is ControlVerdict.MULTI_CLICK for r in records)
    rate = flagged / n
    base = baseline_flag_rate(config)
    z = _zscore(rate, base, n)
    doubles = sum(max(r.alice_clicks, r.bob_clicks) >= 2 for r in records) / n
    dbase = baseline_double_click_rate(config)
    dz = _zscore(doubles, dbase, n)
    return OneClickVerdict(n, flagged, rate, base, z, bool(z > n_sigma or dz > n_sigma), doubles, dbase, dz)


def _control_summary(records: Sequence[ControlRecord], config: ProtocolConfig) -> tuple[float, float, float]:
    single = [r for r in records if r.verdict is not ControlVerdict.MULTI_CLICK]
    mismatch = sum(r.verdict is ControlVerdict.MISMATCH for r in single)
    detection = mismatch / len(single) if single else 0.0
    doubles = sum(max(r.alice_clicks, r.bob_clicks) >= 2 for r in records) / len(records)
    base = baseline_double_click_rate(config)
    return detection, doubles - base, _zscore(doubles, base, len(records))


def _message_bits(config: ProtocolConfig, n_runs: int) -> tuple[np.random.Generator, np.ndarray]:
    rng = _rng.stream(config.seed, _rng.EVE, 0)
    return rng, rng.integers(2, size=n_runs)


def intercept_resend(
    basis: str, config: ProtocolConfig, n_runs: int = 10_000, n_control_runs: int | None = None
) -> AttackReport:
    """Eve measures every returning travel photon in ``basis``.

    Her outcome statistics come from the travel photon's reduced state after
    encoding; control runs give the anticorrelation mismatch rate.
    """
    attack = InterceptResend(basis)
    rng, bits = _message_bits(config, n_runs)
    first = _BASES[basis][0]
    p_first = {
        sign: float((first.conj() @ partial_trace(encode(config.source.pair_state, sign), "travel").rho @ first).real)
        for sign in BellSign
    }
    probs = np.where(bits == 0, p_first[BellSign.PLUS], p_first[BellSign.MINUS])
    outcomes = (rng.random(n_runs) >= probs).astype(int)
    info = mutual_information(bits.tolist(), outcomes.tolist())
    n_ctrl = n_runs if n_control_runs is None else n_control_runs
    detection, excess, z = _control_summary(control_runs(config, attack, n_ctrl), config)
    return AttackReport(info, detection, excess, z, n_runs, n_ctrl)


def trojan_horse(
    attack: TrojanHorse, config: ProtocolConfig, n_runs: int = 10_000, n_control_runs: int | None = None
) -> AttackReport:
    """Eve reads Alice's Pockels setting with an x-polarized probe.

    A passing probe is evolved through the cell (identity for bit 0, pi phase
    for bit 1) and measured in x; filtered probes leave Eve with an erasure.
    """
    rng, bits = _message_bits(config, n_runs)
    passed = rng.random(n_runs) < attack.probe_pass_prob
    u = rng.random(n_runs)
    p_plus = {}
    for bit in (0, 1):
        out = _POCKELS @ _PLUS if bit else _PLUS
        p_plus[bit] = float(abs(_PLUS.conj() @ out) ** 2)
    eve = np.where(u < np.where(bits == 0, p_plus[0], p_plus[1]), 0, 1)
    eve = np.where(passed, eve, 2)
    info = mutual_information(bits.tolist(), eve.tolist())
    n_ctrl = n_runs if n_control_runs is None else n_control_runs
    detection, excess, z = _control_summary(control_runs(config, attack, n_ctrl), config)
    return AttackReport(info, detection, excess, z, n_runs, n_ctrl)


def assess(attack: AttackModel, config: ProtocolConfig, n_runs: int = 10_000) -> AttackReport:
    if isinstance(attack, NoAttack):
        return AttackReport(0.0, 0.0, 0.0, 0.0, 0, 0)
    if isinstance(attack, InterceptResend):
        return intercept_resend(attack.basis, config, n_runs)
    if isinstance(attack, TrojanHorse):
        return trojan_horse(attack, config, n_runs)
    if isinstance(attack, LossHiding):
        # travel photon is never read, so Eve gains nothing at click level
        records = control_runs(config, attack, n_runs)
        detection, excess, z = _control_summary(records, config)
        return AttackReport(0.0, detection, excess, z, 0, n_runs)
    raise TypeError(f"unknown attack model {attack!r}")


def loss_hiding_feasible(channel_transmission: float) -> LossHidingVerdict:
    """Loss can hide Eve only below 60 % channel transmission (strict)."""
    if not 0.0 <= channel_transmission <= 1.0:
        raise ValueError("channel transmission must lie in [0, 1]")
    return LossHidingVerdict(
        channel_transmission < LOSS_HIDING_THRESHOLD, LOSS_HIDING_THRESHOLD - channel_transmission
    )
