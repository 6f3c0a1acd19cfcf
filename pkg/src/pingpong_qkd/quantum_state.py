"""Two-qubit polarization states for the home/travel photon pair.

States are stored as density matrices in the product basis
``(|HH>, |HV>, |VH>, |VV>)`` with qubit order ``(home, travel)``.
Everything here is a pure function of its inputs; the only randomness is
``measure_z``, which draws from an explicit ``numpy.random.Generator``.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
from scipy import linalg, optimize

HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-12
PSD_TOL = 1e-10

HH, HV, VH, VV = range(4)

_Z = np.diag([1.0, -1.0]).astype(complex)
_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
_I2 = np.eye(2, dtype=complex)


class StateError(ValueError):
    """Raised for matrices that are not valid density matrices."""


class Polarization(enum.Enum):
    H = 0
    V = 1


class BellSign(enum.Enum):
    """The two Bell states used as the binary alphabet (PLUS -> 0, MINUS -> 1)."""

    PLUS = 0
    MINUS = 1

    @property
    def bit(self) -> int:
        return self.value

    @classmethod
    def from_bit(cls, bit: int) -> "BellSign":
        if bit not in (0, 1):
            raise ValueError(f"bit must be 0 or 1, got {bit!r}")
        return cls(bit)


def _check_density(rho: np.ndarray, dim: int) -> np.ndarray:
    rho = np.array(rho, dtype=complex)
    if rho.shape != (dim, dim):
        raise StateError(f"expected a {dim}x{dim} matrix, got shape {rho.shape}")
    if np.max(np.abs(rho - rho.conj().T)) >= HERMITIAN_TOL:
        raise StateError("density matrix is not Hermitian")
    if abs(np.trace(rho) - 1.0) >= TRACE_TOL:
        raise StateError(f"density matrix trace is {np.trace(rho).real:.3g}, not 1")
    if np.linalg.eigvalsh(rho).min() < -PSD_TOL:
        raise StateError("density matrix is not positive semidefinite")
    rho.setflags(write=False)
    return rho


@dataclass(frozen=True, eq=False)
class TwoQubitState:
    rho: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "rho", _check_density(self.rho, 4))

    def allclose(self, other: "TwoQubitState", atol: float = 1e-12) -> bool:
        return bool(np.allclose(self.rho, other.rho, atol=atol, rtol=0.0))


@dataclass(frozen=True, eq=False)
class SingleQubitState:
    rho: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "rho", _check_density(self.rho, 2))

    @classmethod
    def pure(cls, pol: Polarization) -> "SingleQubitState":
        rho = np.zeros((2, 2), dtype=complex)
        rho[pol.value, pol.value] = 1.0
        return cls(rho)


def _hermitize(rho: np.ndarray) -> np.ndarray:
    # removes round-off asymmetry left by matrix products
    return 0.5 * (rho + rho.conj().T)


def bell_state(sign: BellSign) -> TwoQubitState:
    """Return (|H>_h|V>_t +/- |V>_h|H>_t)/sqrt(2) as a density matrix."""
    psi = np.zeros(4, dtype=complex)
    psi[HV] = 1.0
    psi[VH] = 1.0 if sign is BellSign.PLUS else -1.0
    psi /= np.sqrt(2.0)
    return TwoQubitState(np.outer(psi, psi.conj()))


def apply_travel_unitary(state: TwoQubitState, u: np.ndarray) -> TwoQubitState:
    op = np.kron(_I2, u)
    return TwoQubitState(_hermitize(op @ state.rho @ op.conj().T))


def apply_pockels(state: TwoQubitState, voltage_on: bool) -> TwoQubitState:
    """Half-wave voltage puts a pi phase between H and V of the travel photon."""
    if not voltage_on:
        return state
    return apply_travel_unitary(state, _Z)


def encode(state: TwoQubitState, sign: BellSign) -> TwoQubitState:
    """Encode a bit on a psi+ source state: MINUS switches the Pockels cell on."""
    return apply_pockels(state, sign is BellSign.MINUS)


def mix_colored(state: TwoQubitState, m: float) -> TwoQubitState:
    """Blend ``state`` with the incoherent HV/VH mixture at weight ``m``."""
    if not 0.0 <= m <= 1.0:
        raise ValueError(f"mixture fraction must lie in [0, 1], got {m}")
    noise = np.zeros((4, 4), dtype=complex)
    noise[HV, HV] = noise[VH, VH] = 0.5
    return TwoQubitState((1.0 - m) * state.rho + m * noise)


def partial_trace(state: TwoQubitState, keep: str = "travel") -> SingleQubitState:
    r = state.rho.reshape(2, 2, 2, 2)  # (home, travel, home', travel')
    if keep == "travel":
        reduced = np.einsum("ijik->jk", r)
    elif keep == "home":
        reduced = np.einsum("ijkj->ik", r)
    else:
        raise ValueError(f"keep must be 'travel' or 'home', got {keep!r}")
    return SingleQubitState(_hermitize(reduced))


def measure_z(state: SingleQubitState, rng: np.random.Generator) -> Polarization:
    p_h = float(np.clip(state.rho[0, 0].real, 0.0, 1.0))
    return Polarization.H if rng.random() < p_h else Polarization.V


def fidelity(a: TwoQubitState, b: TwoQubitState) -> float:
    """Uhlmann fidelity (Tr sqrt(sqrt(a) b sqrt(a)))^2."""
    sa = linalg.sqrtm(a.rho)
    inner = linalg.sqrtm(sa @ b.rho @ sa)
    return float(np.clip(np.trace(inner).real ** 2, 0.0, 1.0))


def visibility(state: TwoQubitState) -> float:
    """Coherence visibility 2|rho_HV,VH| / (rho_HV,HV + rho_VH,VH)."""
    pop = state.rho[HV, HV].real + state.rho[VH, VH].real
    if pop <= 0.0:
        raise StateError("state has no population in the HV/VH pair subspace")
    return float(2.0 * abs(state.rho[HV, VH]) / pop)


def _analyzer(theta: float) -> np.ndarray:
    # linear polarizer at angle theta, +1 for transmitted, -1 for reflected
    return np.cos(2 * theta) * _Z + np.sin(2 * theta) * _X


def correlation(state: TwoQubitState, a: float, b: float) -> float:
    op = np.kron(_analyzer(a), _analyzer(b))
    return float(np.trace(state.rho @ op).real)


def chsh_value(state: TwoQubitState, a: float, a2: float, b: float, b2: float) -> float:
    return (
        correlation(state, a, b)
        - correlation(state, a, b2)
        + correlation(state, a2, b)
        + correlation(state, a2, b2)
    )


def _zx_correlation_matrix(state: TwoQubitState) -> np.ndarray:
    paulis = (_Z, _X)
    return np.array(
        [[np.trace(state.rho @ np.kron(p, q)).real for q in paulis] for p in paulis]
    )


def chsh_s(state: TwoQubitState, tol: float = 1e-6) -> float:
    """Largest |S| over linear-polarization analyzer settings.

    For fixed home angles (a, a') the best travel angles are found in closed
    form, so only the home pair is searched: a 1 degree grid followed by a
    Nelder-Mead polish.
    """
    corr = _zx_correlation_matrix(state)

    def s_of(angles: np.ndarray) -> float:
        a, a2 = angles
        u = np.array([np.cos(2 * a), np.sin(2 * a)])
        u2 = np.array([np.cos(2 * a2), np.sin(2 * a2)])
        return float(np.linalg.norm(corr.T @ (u + u2)) + np.linalg.norm(corr.T @ (u - u2)))

    grid = np.deg2rad(np.arange(0.0, 180.0, 1.0))
    units = np.stack([np.cos(2 * grid), np.sin(2 * grid)], axis=1) @ corr  # rows: T^T u
    total = np.linalg.norm(units[:, None, :] + units[None, :, :], axis=2) + np.linalg.norm(
        units[:, None, :] - units[None, :, :], axis=2
    )
    i, j = np.unravel_index(np.argmax(total), total.shape)
    best = (grid[i], grid[j])
    res = optimize.minimize(
        lambda x: -s_of(x),
        np.array(best),
        method="Nelder-Mead",
        options={"xatol": 1e-10, "fatol": tol * 1e-3, "maxiter": 4000},
    )
    return max(-float(res.fun), s_of(np.array(best)))


def calibrate_mixture_for_s(target_s: float) -> float:
    """Colored-mixture weight m at which psi+ reaches CHSH value ``target_s``."""
    if not 2.0 <= target_s <= 2.0 * np.sqrt(2.0):
        raise ValueError("target S must lie between 2 and 2*sqrt(2)")
    psi = bell_state(BellSign.PLUS)
    return float(
        optimize.brentq(lambda m: chsh_s(mix_colored(psi, m)) - target_s, 0.0, 1.0, xtol=1e-8)
    )
