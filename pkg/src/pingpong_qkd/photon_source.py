"""Pulsed SPDC pair source: pair-number sampling and rate arithmetic."""
from __future__ import annotations

import math
from functools import cached_property
from dataclasses import dataclass, field, replace
from typing import TYPE_CHECKING

import numpy as np
from scipy import optimize

from .quantum_state import BellSign, TwoQubitState, bell_state, mix_colored

if TYPE_CHECKING:
    from .optics_bsa import BsaParams


@dataclass(frozen=True)
class SourceParams:
    """Source and detection parameters.

    ``pair_prob`` is the per-pulse probability of at least one pair; it is a
    calibration target rather than something derived from quoted rates.
    ``coherence_time`` is in femtoseconds, ``pulse_rate`` in Hz.
    """

    pulse_rate: float = 85e6
    pair_prob: float = 2.33e-3
    double_pair_ratio: float = 0.04
    mixture_m: float = 0.07
    eta1: float = 0.41
    eta2: float = 0.41
    coherence_time: float = 240.0

    def __post_init__(self) -> None:
        for name in ("pair_prob", "mixture_m", "eta1", "eta2"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {value}")
        if self.pulse_rate <= 0:
            raise ValueError("pulse_rate must be positive")
        if self.coherence_time <= 0:
            raise ValueError("coherence_time must be positive")
        if self.double_pair_ratio < 0:
            raise ValueError("double_pair_ratio must be nonnegative")

    @property
    def p1(self) -> float:
        return self.pair_prob / (1.0 + self.double_pair_ratio)

    @property
    def p2(self) -> float:
        return self.pair_prob - self.p1

    @cached_property
    def pair_state(self) -> TwoQubitState:
        return mix_colored(bell_state(BellSign.PLUS), self.mixture_m)


@dataclass(frozen=True, eq=False)
class PulseEmission:
    n_pairs: int
    state: TwoQubitState = field(repr=False)

    def __post_init__(self) -> None:
        if self.n_pairs not in (0, 1, 2):
            raise ValueError(f"n_pairs must be 0, 1 or 2, got {self.n_pairs}")


def sample_emission(params: SourceParams, rng: np.random.Generator) -> PulseEmission:
    u = rng.random()
    if u < params.p1:
        n = 1
    elif u < params.pair_prob:
        n = 2
    else:
        n = 0
    return PulseEmission(n, params.pair_state)


def sample_block_emissions(
    params: SourceParams, n_pulses: int, rng: np.random.Generator
) -> list[tuple[int, PulseEmission]]:
    """Non-empty emissions of a block of pulses as ``(pulse_index, emission)``.

    Equivalent in distribution to calling ``sample_emission`` once per pulse,
    but draws only the occupied pulses: their number is binomial, their
    positions uniform without replacement.
    """
    k = int(rng.binomial(n_pulses, params.pair_prob))
    if k == 0:
        return []
    idx = np.sort(rng.choice(n_pulses, size=k, replace=False))
    doubles = rng.random(k) < params.p2 / params.pair_prob
    state = params.pair_state
    return [(int(i), PulseEmission(2 if d else 1, state)) for i, d in zip(idx, doubles)]


def correlation_coefficient(rc: float, r1: float, r2: float) -> float:
    """C = R_c / sqrt(R_1 R_2)."""
    if r1 <= 0 or r2 <= 0:
        raise ValueError("singles rates must be positive")
    if rc < 0:
        raise ValueError("coincidence rate must be nonnegative")
    return rc / math.sqrt(r1 * r2)


def efficiency_from_correlation(c: float) -> float:
    """Per-channel efficiency for symmetric channels, where C = eta^2."""
    if not 0.0 <= c <= 1.0:
        raise ValueError(f"correlation coefficient must lie in [0, 1], got {c}")
    return math.sqrt(c)


def pair_detection_prob(params: SourceParams, bsa: "BsaParams") -> float:
    """Probability that one pair yields a two-detector coincidence."""
    return params.eta1 * params.eta2 * (bsa.T + bsa.R) ** 2


def coincidences_per_pulse(params: SourceParams, bsa: "BsaParams") -> float:
    """Expected number of pulses with a coincidence, per pulse.

    Clicks of a double pair are merged into one event, so a pulse counts once
    whenever at least one of its pairs is detected.
    """
    d = pair_detection_prob(params, bsa)
    return params.p1 * d + params.p2 * (1.0 - (1.0 - d) ** 2)


def calibrate_pair_prob(
    target_mean_coincidences: float,
    pulses_per_block: int,
    bsa: "BsaParams",
    params: SourceParams,
) -> float:
    """Find ``pair_prob`` giving ``target_mean_coincidences`` per block."""
    if target_mean_coincidences <= 0:
        raise ValueError("target mean coincidences must be positive")
    if pulses_per_block <= 0:
        raise ValueError("pulses_per_block must be positive")

    def excess(p: float) -> float:
        trial = replace(params, pair_prob=p)
        return pulses_per_block * coincidences_per_pulse(trial, bsa) - target_mean_coincidences

    if excess(1.0) < 0:
        raise ValueError(
            f"{target_mean_coincidences} coincidences per block unreachable "
            f"with {pulses_per_block} pulses"
        )
    return float(optimize.bisect(excess, 0.0, 1.0, xtol=1e-15, rtol=1e-12))


def block_rate_from_empty_fraction(p_empty: float) -> float:
    """Poisson mean whose zero-count probability is ``p_empty``."""
    if not 0.0 < p_empty < 1.0:
        raise ValueError("empty-block fraction must lie in (0, 1)")
    return -math.log(p_empty)

