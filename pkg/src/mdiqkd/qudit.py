"""Exact small-dimension quantum state algebra.

Pure-state vectors are numpy complex arrays.  Single-qudit states have
length ``dim`` and two-qudit joint states length ``dim**2`` with the
flattening convention ``|a, b> -> index a*dim + b``.  Only dimensions 2
and 3 are supported; the qubit case shares every code path with the
qutrit case (the primitive root of unity becomes -1).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

SUPPORTED_DIMS = (2, 3)

NORM_TOL = 1e-12


class Basis(enum.Enum):
    ORDINARY = "ordinary"
    BAR = "bar"


def _check_dim(dim: int) -> None:
    if dim not in SUPPORTED_DIMS:
        raise ValueError(f"unsupported dimension {dim}; expected one of {SUPPORTED_DIMS}")


def omega(dim: int) -> complex:
    """Primitive dim-th root of unity (equals -1 for qubits)."""
    _check_dim(dim)
    return np.exp(2j * np.pi / dim)


def computational_basis(dim: int) -> list[np.ndarray]:
    _check_dim(dim)
    return [np.eye(dim, dtype=complex)[i] for i in range(dim)]


def mub_bar_basis(dim: int) -> list[np.ndarray]:
    """The Fourier basis, mutually unbiased with the computational one.

    State ``a`` is (1/sqrt(d)) * sum_m w^(-a*m) |m>, so every squared
    overlap with a computational basis state is 1/d.
    """
    _check_dim(dim)
    w = omega(dim)
    states = []
    for a in range(dim):
        amps = np.array([w ** (-a * m) for m in range(dim)]) / np.sqrt(dim)
        states.append(amps)
    return states


@dataclass(frozen=True)
class PhaseSet:
    """Per-index phase freedom of the entangled-state family.

    ``delta[0]`` and ``xi[0]`` are gauge-fixed to zero.
    """

    delta: tuple[float, ...]
    xi: tuple[float, ...]

    def __post_init__(self):
        if len(self.delta) != len(self.xi):
            raise ValueError("delta and xi must have equal length")
        if self.delta[0] != 0.0 or self.xi[0] != 0.0:
            raise ValueError("gauge fixing requires delta[0] = xi[0] = 0")

    @classmethod
    def zero(cls, dim: int) -> "PhaseSet":
        _check_dim(dim)
        return cls(delta=(0.0,) * dim, xi=(0.0,) * dim)

    @classmethod
    def of(cls, delta, xi) -> "PhaseSet":
        return cls(delta=tuple(delta), xi=tuple(xi))


@dataclass(frozen=True)
class BasisLabel:
    """One of the 2*dim measurement settings of a party."""

    kind: Basis
    index: int

    def validate(self, dim: int) -> None:
        if not 0 <= self.index < dim:
            raise ValueError(f"basis index {self.index} out of range for dim {dim}")


def me_state(dim: int, k: int, l: int, phases: PhaseSet | None = None) -> np.ndarray:
    """Maximally entangled two-qudit state with index (k, l) and optional phases.

    Returns (1/sqrt(d)) * sum_m w^(m*l) exp(i(delta[m+k] + xi[k])) |m+k, m>
    with indices mod dim.  All-zero phases give the plain Bell family.
    """
    _check_dim(dim)
    if not (0 <= k < dim and 0 <= l < dim):
        raise ValueError(f"Bell indices (k={k}, l={l}) out of range for dim {dim}")
    if phases is None:
        phases = PhaseSet.zero(dim)
    if len(phases.delta) != dim:
        raise ValueError("phase set length does not match dimension")
    w = omega(dim)
    amps = np.zeros(dim * dim, dtype=complex)
    for m in range(dim):
        a = (m + k) % dim
        amps[a * dim + m] = w ** (m * l) * np.exp(1j * (phases.delta[a] + phases.xi[k]))
    return amps / np.sqrt(dim)


def bell_states(dim: int, phases: PhaseSet | None = None) -> list[np.ndarray]:
    """All dim**2 generalized Bell states, ordered by index dim*k + l."""
    return [me_state(dim, k, l, phases) for k in range(dim) for l in range(dim)]


def projection_prob(joint: np.ndarray, target: np.ndarray) -> float:
    """Squared overlap |<target|joint>|^2 of two equal-dimension states."""
    if joint.shape != target.shape:
        raise ValueError(f"dimension mismatch: {joint.shape} vs {target.shape}")
    amp = np.vdot(target, joint)
    return float(abs(amp) ** 2)


def misaligned_state(mu: float, nu: float) -> np.ndarray:
    """Misaligned qutrit source state with real amplitudes
    (cos(mu)sin(nu), sin(mu)sin(nu), cos(nu))."""
    return np.array(
        [math.cos(mu) * math.sin(nu), math.sin(mu) * math.sin(nu), math.cos(nu)],
        dtype=complex,
    )


def shannon_entropy(x: float) -> float:
    """Binary entropy in bits, with the 0*log(0) = 0 convention."""
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"entropy argument {x} outside [0, 1]")
    if x == 0.0 or x == 1.0:
        return 0.0
    return -x * math.log2(x) - (1.0 - x) * math.log2(1.0 - x)


def sift_correct(bsm_index: int, basis: Basis, bob_symbol: int, dim: int = 3) -> int:
    """Bob's post-processed symbol given the announced Bell index.

    For Bell state Phi_(d*k + l) the matched-basis support pairs Alice's
    symbol a with Bob's symbol b as a = b + k (ordinary basis) and
    a = -b - l (bar basis), indices mod dim.  The correction maps Bob's
    raw symbol onto Alice's.
    """
    _check_dim(dim)
    if not 0 <= bsm_index < dim * dim:
        raise ValueError(f"BSM index {bsm_index} out of range for dim {dim}")
    if not 0 <= bob_symbol < dim:
        raise ValueError(f"symbol {bob_symbol} out of range for dim {dim}")
    k, l = divmod(bsm_index, dim)
    if basis is Basis.ORDINARY:
        return (bob_symbol + k) % dim
    return (-bob_symbol - l) % dim


def check_normalized(state: np.ndarray, tol: float = NORM_TOL) -> None:
    norm_sq = float(np.vdot(state, state).real)
    if abs(norm_sq - 1.0) > tol:
        raise ValueError(f"state not normalized: |amps|^2 = {norm_sq}")
