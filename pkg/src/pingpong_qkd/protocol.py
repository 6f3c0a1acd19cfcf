"""Ping-pong protocol: block encoding, majority decoding and key statistics.

A bit is sent as a block of ``pulses_per_bit`` pump pulses. Every pulse whose
pair reaches Bob's analyzer yields a time-tag signature; Bob decodes the block
by majority of psi+ against psi- signatures.
"""
from __future__ import annotations

import enum
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Protocol, Sequence, Union

import numpy as np
from scipy import stats as sps

from . import _rng
from .optics_bsa import (
    BsaParams,
    Signature,
    classify_signature,
    coincidence_probs,
    generate_clicks,
    signature_probabilities,
)
from .photon_source import (
    PulseEmission,
    SourceParams,
    coincidences_per_pulse,
    sample_block_emissions,
)
from .quantum_state import BellSign, Polarization, TwoQubitState, encode


@dataclass(frozen=True)
class ProtocolConfig:
    """Protocol settings.

    ``r_control`` is the probability that Alice's mirror routes a travel
    photon into message mode. ``chi`` is the two-photon overlap at the
    working point (stage at zero path difference).
    """

    pulses_per_bit: int = 2500
    r_control: float = 1.0
    seed: int = 0
    source: SourceParams = field(default_factory=SourceParams)
    bsa: BsaParams = field(default_factory=BsaParams)
    chi: float = 1.0

    def __post_init__(self) -> None:
        if self.pulses_per_bit < 1:
            raise ValueError("pulses_per_bit must be at least 1")
        if not 0.0 <= self.r_control <= 1.0:
            raise ValueError("r_control must lie in [0, 1]")
        if not 0.0 <= self.chi <= 1.0:
            raise ValueError("chi must lie in [0, 1]")

    @property
    def sync_error_prob(self) -> float:
        return self.bsa.sync_error_prob

    @property
    def key_rate(self) -> float:
        return self.source.pulse_rate / self.pulses_per_bit

    @property
    def mean_coincidences(self) -> float:
        return self.pulses_per_bit * self.r_control * coincidences_per_pulse(self.source, self.bsa)


class Category(enum.Enum):
    I = 1
    II = 2
    III = 3
    IV = 4


class Decision(enum.Enum):
    BIT = "bit"
    TIE = "tie"
    NO_CLICK = "noclick"


@dataclass(frozen=True)
class BlockResult:
    """Outcome of one bit block. ``bob_bit`` is the random guess for a tie."""

    encoded_bit: int
    n_psi_plus: int
    n_psi_minus: int
    n_ambiguous: int
    decision: Decision
    bob_bit: int | None
    category: Category
    pulses_used: int = 0

    @property
    def n_coincidences(self) -> int:
        return self.n_psi_plus + self.n_psi_minus + self.n_ambiguous

    @property
    def decoded(self) -> int | None:
        """Bit kept after post-processing; ``None`` marks an erasure."""
        return self.bob_bit if self.decision is Decision.BIT else None


def decide(
    encoded_bit: int,
    n_psi_plus: int,
    n_psi_minus: int,
    n_ambiguous: int,
    rng: np.random.Generator,
    pulses_used: int = 0,
) -> BlockResult:
    """Majority decoding of one block's signature tally."""
    if n_psi_plus != n_psi_minus:
        bit = BellSign.PLUS.bit if n_psi_plus > n_psi_minus else BellSign.MINUS.bit
        decision = Decision.BIT
        category = Category.I if bit == encoded_bit else Category.IV
    elif n_psi_plus + n_ambiguous > 0:
        bit = int(rng.integers(2))
        decision, category = Decision.TIE, Category.III
    else:
        bit, decision, category = None, Decision.NO_CLICK, Category.II
    return BlockResult(
        encoded_bit, n_psi_plus, n_psi_minus, n_ambiguous, decision, bit, category, pulses_used
    )


@lru_cache(maxsize=64)
def _probs(source: SourceParams, bsa: BsaParams, chi: float, sign: BellSign) -> tuple[float, float]:
    return coincidence_probs(encode(source.pair_state, sign), chi, bsa)


def _tally(signatures: Sequence[Signature]) -> tuple[int, int, int]:
    n_plus = sum(s is Signature.PSI_PLUS for s in signatures)
    n_minus = sum(s is Signature.PSI_MINUS for s in signatures)
    n_amb = sum(s is Signature.AMBIGUOUS for s in signatures)
    return n_plus, n_minus, n_amb


def _pulse_signature(
    emission: PulseEmission, sign: BellSign, config: ProtocolConfig, rng: np.random.Generator, index: int
) -> Signature:
    probs = _probs(config.source, config.bsa, config.chi, sign)
    clicks = generate_clicks(emission, sign, config.chi, config.bsa, config.source, rng, index, probs)
    return classify_signature(clicks, config.bsa)


def transmit_bit(bit: int, config: ProtocolConfig, rng: np.random.Generator) -> BlockResult:
    sign = BellSign.from_bit(bit)
    emissions = sample_block_emissions(config.source, config.pulses_per_bit, rng)
    if config.r_control < 1.0 and emissions:
        # control-mode pulses never reach the Bell-state analyzer
        keep = rng.random(len(emissions)) < config.r_control
        emissions = [e for e, k in zip(emissions, keep) if k]
    signatures = [_pulse_signature(em, sign, config, rng, i) for i, em in emissions]
    n_plus, n_minus, n_amb = _tally(signatures)
    return decide(bit, n_plus, n_minus, n_amb, rng, config.pulses_per_bit)


@dataclass(frozen=True)
class TransmissionStats:
    """Aggregate outcome of a key transmission (fractions of all blocks)."""

    n_bits: int
    fractions: dict
    tie_wrong_fraction: float
    key_rate: float
    coincidence_histogram: tuple[int, ...] = ()
    mean_pulses_per_bit: float | None = None

    @classmethod
    def from_results(
        cls, results: Sequence[BlockResult], key_rate: float, mean_pulses_per_bit: float | None = None
    ) -> "TransmissionStats":
        n = len(results)
        counts = {c: 0 for c in Category}
        tie_wrong = 0
        hist: list[int] = []
        for r in results:
            counts[r.category] += 1
            if r.decision is Decision.TIE and r.bob_bit != r.encoded_bit:
                tie_wrong += 1
            while len(hist) <= r.n_coincidences:
                hist.append(0)
            hist[r.n_coincidences] += 1
        fractions = {c: (counts[c] / n if n else 0.0) for c in Category}
        return cls(n, fractions, tie_wrong / n if n else 0.0, key_rate, tuple(hist), mean_pulses_per_bit)

    @classmethod
    def from_fractions(
        cls, i: float, ii: float, iii: float, iv: float, tie_wrong: float | None = None, key_rate: float = 0.0
    ) -> "TransmissionStats":
        """Stats from category shares (percent or fractions); ties default to half wrong."""
        i, ii, iii, iv = (float(v) for v in (i, ii, iii, iv))
        total = i + ii + iii + iv
        if total <= 0:
            raise ValueError("category shares must sum to a positive value")
        f = {Category.I: i / total, Category.II: ii / total, Category.III: iii / total, Category.IV: iv / total}
        tw = f[Category.III] / 2 if tie_wrong is None else float(tie_wrong) / total
        return cls(0, f, tw, key_rate)

    @property
    def is_empty(self) -> bool:
        return sum(self.fractions.values()) == 0

    @property
    def qber(self) -> float:
        return qber(self, "raw")

    @property
    def qber_post(self) -> float:
        return qber(self, "post_processed")

    def histogram_fractions(self, n_max: int = 5) -> list[float]:
        total = sum(self.coincidence_histogram)
        h = list(self.coincidence_histogram) + [0] * (n_max + 1)
        return [h[k] / total if total else 0.0 for k in range(n_max + 1)]


def qber(source: Union[TransmissionStats, Sequence[BlockResult]], mode: str = "post_processed") -> float:
    """Bit error rate among bits used for the key.

    ``post_processed`` keeps only decided blocks: IV/(I+IV). ``raw`` keeps
    ties with Bob's recorded coin flip: (IV + wrong ties)/(I+III+IV).
    """
    stats = source if isinstance(source, TransmissionStats) else TransmissionStats.from_results(source, 0.0)
    f = stats.fractions
    if mode == "post_processed":
        denom = f[Category.I] + f[Category.IV]
        num = f[Category.IV]
    elif mode == "raw":
        denom = f[Category.I] + f[Category.III] + f[Category.IV]
        num = f[Category.IV] + stats.tie_wrong_fraction
    else:
        raise ValueError(f"mode must be 'post_processed' or 'raw', got {mode!r}")
    if denom <= 0:
        raise ValueError("no decided bits: QBER undefined")
    return num / denom


def _transmit_chunk(args: tuple[Sequence[int], int, ProtocolConfig]) -> list[BlockResult]:
    bits, start, config = args
    return [
        transmit_bit(int(b), config, _rng.stream(config.seed, _rng.MESSAGE, start + k))
        for k, b in enumerate(bits)
    ]


def _run_chunked(worker, key: Sequence[int], config: ProtocolConfig, workers: int, *extra) -> list:
    key = [int(b) for b in key]
    if workers <= 1 or len(key) < 2 * workers:
        return worker((key, 0, config, *extra))
    size = math.ceil(len(key) / workers)
    jobs = [(key[s : s + size], s, config, *extra) for s in range(0, len(key), size)]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        parts = list(pool.map(worker, jobs))
    return [r for part in parts for r in part]


def transmit_key(
    key: Sequence[int], config: ProtocolConfig, workers: int = 1
) -> tuple[TransmissionStats, list[BlockResult]]:
    """Send every key bit as one block.

    Block ``i`` draws from the stream ``(config.seed, i)``, so the result is
    identical for any worker count.
    """
    if len(key) == 0:
        raise ValueError("key must not be empty")
    results = _run_chunked(_transmit_chunk, key, config, workers)
    return TransmissionStats.from_results(results, config.key_rate), results


def key_string(results: Sequence[BlockResult], resolve_ties: bool = False) -> str:
    """ASCII rendering of Bob's key: '0'/'1', 'e' for erasures."""
    out = []
    for r in results:
        if r.decision is Decision.BIT or (resolve_ties and r.decision is Decision.TIE):
            out.append(str(r.bob_bit))
        else:
            out.append("e")
    return "".join(out)


def erasure_positions(results: Sequence[BlockResult]) -> list[int]:
    return [i for i, r in enumerate(results) if r.decision is not Decision.BIT]


def expected_fractions(config: ProtocolConfig, mean_coincidences: float | None = None, n_max: int = 200) -> TransmissionStats:
    """Category shares predicted by Poisson thinning of the block coincidences.

    Correct, wrong and ambiguous signatures form independent Poisson counts
    whose means are the block mean times the single-pair signature
    probabilities. Double pairs are treated as independent single pairs.
    """
    lam = config.mean_coincidences if mean_coincidences is None else mean_coincidences
    n = np.arange(n_max)
    acc = np.zeros(5)
    for sign in BellSign:
        probs = signature_probabilities(sign, config.chi, config.bsa, config.source)
        right = Signature.PSI_PLUS if sign is BellSign.PLUS else Signature.PSI_MINUS
        wrong = Signature.PSI_MINUS if sign is BellSign.PLUS else Signature.PSI_PLUS
        lc, lw, la = lam * probs[right], lam * probs[wrong], lam * probs[Signature.AMBIGUOUS]
        joint = np.outer(sps.poisson.pmf(n, lc), sps.poisson.pmf(n, lw))
        p_i = np.tril(joint, -1).sum()
        p_iv = np.triu(joint, 1).sum()
        p_ii = math.exp(-(lc + lw + la))
        p_iii = np.trace(joint) - p_ii
        acc += 0.5 * np.array([p_i, p_ii, p_iii, p_iv, p_iii / 2])
    return TransmissionStats.from_fractions(*acc[:4], tie_wrong=acc[4], key_rate=config.key_rate)


def otp_roundtrip(message: Sequence[int], key: Sequence[int]) -> tuple[np.ndarray, np.ndarray]:
    """XOR one-time pad: returns ``(ciphertext, message recovered with key)``."""
    msg = np.asarray(message, dtype=np.uint8)
    k = np.asarray(key, dtype=np.uint8)
    if k.size < msg.size:
        raise ValueError("key shorter than message")
    k = k[: msg.size]
    cipher = msg ^ k
    return cipher, cipher ^ k


class ControlVerdict(enum.Enum):
    PASS = "pass"
    MISMATCH = "mismatch"
    MULTI_CLICK = "multi_click"


@dataclass(frozen=True)
class ControlRecord:
    alice_clicks: int
    bob_clicks: int
    alice_outcome: Polarization | None
    bob_outcome: Polarization | None
    verdict: ControlVerdict


class TravelAttack(Protocol):
    travel_transmission: float

    def travel_channel(self, state: TwoQubitState) -> TwoQubitState: ...

    def probe_photons(self, rng: np.random.Generator) -> list[Polarization]: ...


@lru_cache(maxsize=64)
def _z_cdf(attack: TravelAttack | None, state: TwoQubitState) -> np.ndarray:
    if attack is not None:
        state = attack.travel_channel(state)
    p = np.clip(np.diag(state.rho).real, 0.0, None)
    return np.cumsum(p / p.sum())


def _sample_z_pair(cdf: np.ndarray, rng: np.random.Generator) -> tuple[Polarization, Polarization]:
    idx = min(int(np.searchsorted(cdf, rng.random(), side="right")), 3)
    return Polarization(idx // 2), Polarization(idx % 2)


def control_run(
    config: ProtocolConfig, attack: TravelAttack | None, rng: np.random.Generator
) -> ControlRecord:
    """One control-mode pulse: Alice and Bob both read their photon in z.

    The pulse is conditioned on at least one emitted pair. Detections are
    counted per photon on each side; anything other than exactly one per
    side is a multi-click event. Otherwise psi+/psi- demand opposite
    polarizations, and equal ones are a mismatch.
    """
    src = config.source
    ratio = src.double_pair_ratio
    n_pairs = 2 if rng.random() < ratio / (1.0 + ratio) else 1
    cdf = _z_cdf(attack, src.pair_state)
    alice: list[Polarization] = []
    bob: list[Polarization] = []
    for _ in range(n_pairs):
        reaches_alice = True
        if attack is not None:
            reaches_alice = rng.random() < attack.travel_transmission
        home, travel = _sample_z_pair(cdf, rng)
        if rng.random() < src.eta1:
            bob.append(home)
        if reaches_alice and rng.random() < src.eta2:
            alice.append(travel)
    if attack is not None:
        for pol in attack.probe_photons(rng):
            if rng.random() < src.eta2:
                alice.append(pol)
    if len(alice) != 1 or len(bob) != 1:
        verdict = ControlVerdict.MULTI_CLICK
        a_out = alice[0] if len(alice) == 1 else None
        b_out = bob[0] if len(bob) == 1 else None
        return ControlRecord(len(alice), len(bob), a_out, b_out, verdict)
    verdict = ControlVerdict.MISMATCH if alice[0] is bob[0] else ControlVerdict.PASS
    return ControlRecord(1, 1, alice[0], bob[0], verdict)


def control_runs(config: ProtocolConfig, attack: TravelAttack | None, n_runs: int) -> list[ControlRecord]:
    return [control_run(config, attack, _rng.stream(config.seed, _rng.CONTROL, i)) for i in range(n_runs)]


def _confirm_chunk(args) -> list[BlockResult]:
    bits, start, config, target = args
    return [
        _confirm_bit(int(b), config, target, _rng.stream(config.seed, _rng.CONFIRM, start + k))
        for k, b in enumerate(bits)
    ]


def _confirm_bit(bit: int, config: ProtocolConfig, target: int, rng: np.random.Generator) -> BlockResult:
    src = config.source
    p_event = config.r_control * coincidences_per_pulse(src, config.bsa)
    if p_event <= 0:
        raise ValueError("source never produces a coincidence")
    sign = BellSign.from_bit(bit)
    p_double = src.p2 / src.pair_prob
    probs = _probs(src, config.bsa, config.chi, sign)
    pulses = 0
    counts = {Signature.PSI_PLUS: 0, Signature.PSI_MINUS: 0, Signature.AMBIGUOUS: 0}
    while counts[Signature.PSI_PLUS] + counts[Signature.PSI_MINUS] < target:
        pulses += int(rng.geometric(p_event))
        # rejection step: an occupied pulse conditioned on producing clicks
        while True:
            emission = PulseEmission(2 if rng.random() < p_double else 1, src.pair_state)
            clicks = generate_clicks(emission, sign, config.chi, config.bsa, src, rng, pulses, probs)
            if clicks:
                break
        counts[classify_signature(clicks, config.bsa)] += 1
    return decide(
        bit, counts[Signature.PSI_PLUS], counts[Signature.PSI_MINUS], counts[Signature.AMBIGUOUS], rng, pulses
    )


def confirmation_mode_transmit(
    key: Sequence[int], config: ProtocolConfig, target: int = 1, workers: int = 1
) -> tuple[TransmissionStats, list[BlockResult]]:
    """Encode the next bit only after ``target`` decodable signatures arrived.

    Bob's confirmation over the classical channel is taken as instantaneous.
    The mean number of pulses consumed per bit is stored in the stats.
    """
    if target < 1:
        raise ValueError("target coincidences per bit must be at least 1")
    if len(key) == 0:
        raise ValueError("key must not be empty")
    results = _run_chunked(_confirm_chunk, key, config, workers, target)
    mean_pulses = float(np.mean([r.pulses_used for r in results]))
    rate = config.source.pulse_rate / mean_pulses
    return TransmissionStats.from_results(results, rate, mean_pulses), results


def with_overrides(config: ProtocolConfig, **changes) -> ProtocolConfig:
    """Copy of ``config`` with top-level, ``source.*`` or ``bsa.*`` fields replaced."""
    top, src, bsa = {}, {}, {}
    for k, v in changes.items():
        if k.startswith("source."):
            src[k[7:]] = v
        elif k.startswith("bsa."):
            bsa[k[4:]] = v
        else:
            top[k] = v
    if src:
        top["source"] = replace(config.source, **src)
    if bsa:
        top["bsa"] = replace(config.bsa, **bsa)
    return replace(config, **top)
