"""BSM success-probability tables for the three source models.

A :class:`ProbTable` holds the full (2*dim) x (2*dim) matrix of success
probabilities of the Phi_0-discriminating Bell-state measurement,
indexed by both parties' settings.  Setting order along each axis is
ordinary 0..dim-1 followed by bar 0..dim-1.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

from .qudit import (
    Basis,
    SUPPORTED_DIMS,
    check_normalized,
    computational_basis,
    me_state,
    mub_bar_basis,
    projection_prob,
)


@dataclass(frozen=True)
class SettingLabel:
    basis: Basis
    index: int

    def offset(self, dim: int) -> int:
        if not 0 <= self.index < dim:
            raise ValueError(f"setting index {self.index} out of range for dim {dim}")
        return self.index + (dim if self.basis is Basis.BAR else 0)

    def __str__(self) -> str:
        return f"{self.index}" if self.basis is Basis.ORDINARY else f"{self.index}bar"


def party_settings(dim: int) -> list[SettingLabel]:
    """All 2*dim settings of one party, in table order."""
    return [SettingLabel(Basis.ORDINARY, i) for i in range(dim)] + [
        SettingLabel(Basis.BAR, i) for i in range(dim)
    ]


@dataclass(frozen=True)
class ProbTable:
    """Complete success-probability table p(x, y), Alice rows, Bob columns."""

    dim: int
    probs: np.ndarray

    def __post_init__(self):
        if self.dim not in SUPPORTED_DIMS:
            raise ValueError(f"unsupported dimension {self.dim}")
        n = 2 * self.dim
        if self.probs.shape != (n, n):
            raise ValueError(f"expected a {n}x{n} table, got {self.probs.shape}")
        if np.any(self.probs < -1e-15) or np.any(self.probs > 1 + 1e-15):
            raise ValueError("table entries must lie in [0, 1]")
        self.probs.setflags(write=False)

    def entry(self, alice: SettingLabel, bob: SettingLabel) -> float:
        return float(self.probs[alice.offset(self.dim), bob.offset(self.dim)])

    def ordinary(self) -> np.ndarray:
        """The dim x dim matched-ordinary block p(i, j)."""
        d = self.dim
        return self.probs[:d, :d]

    def bar(self, x: int, y: int) -> float:
        """p(x-bar, y-bar)."""
        d = self.dim
        return float(self.probs[d + x, d + y])

    def alice_bar_row(self, j: int) -> np.ndarray:
        """p(j-bar, i) for ordinary i, as a length-dim vector."""
        d = self.dim
        return self.probs[d + j, :d]

    def bob_bar_col(self, k: int) -> np.ndarray:
        """p(i, k-bar) for ordinary i, as a length-dim vector."""
        d = self.dim
        return self.probs[:d, d + k]

    def to_csv(self) -> str:
        """CSV rendering: alice setting rows, bob setting columns,
        17 significant digits, LF line endings."""
        labels = [str(s) for s in party_settings(self.dim)]
        buf = io.StringIO()
        buf.write("alice\\bob," + ",".join(labels) + "\n")
        for i, row_label in enumerate(labels):
            cells = ",".join(format(v, ".17g") for v in self.probs[i])
            buf.write(f"{row_label},{cells}\n")
        return buf.getvalue()


@dataclass(frozen=True)
class ChannelParams:
    """Combined two-arm transmittance and per-pulse dark-count probability."""

    eta: float
    dark: float

    def __post_init__(self):
        if not 0.0 <= self.eta <= 1.0:
            raise ValueError(f"eta {self.eta} outside [0, 1]")
        if not 0.0 <= self.dark < 1.0:
            raise ValueError(f"dark count probability {self.dark} outside [0, 1)")


def eta_from_loss_db(loss_db: float) -> float:
    """Total transmission loss in dB to transmittance."""
    return 10.0 ** (-loss_db / 10.0)


def table_from_sources(
    alice_states: list[np.ndarray],
    bob_states: list[np.ndarray],
    target: np.ndarray,
) -> ProbTable:
    """Success probabilities |<target| x (x) y>|^2 over all setting pairs.

    ``alice_states`` and ``bob_states`` are the 2*dim source states in
    setting order (ordinary first, then bar).
    """
    n = len(alice_states)
    if len(bob_states) != n or n % 2 != 0:
        raise ValueError("both parties need the same, even number of source states")
    dim = n // 2
    for s in alice_states + bob_states:
        if s.shape != (dim,):
            raise ValueError("source state dimension does not match setting count")
        check_normalized(s)
    probs = np.empty((n, n))
    for i, a in enumerate(alice_states):
        for j, b in enumerate(bob_states):
            probs[i, j] = projection_prob(np.kron(a, b), target)
    return ProbTable(dim=dim, probs=probs)


def ideal_sources(dim: int) -> list[np.ndarray]:
    """Exact MUB source states in setting order."""
    return computational_basis(dim) + mub_bar_basis(dim)


def ideal_table(dim: int) -> ProbTable:
    """Lossless, dark-count-free table with exact MUB sources."""
    states = ideal_sources(dim)
    return table_from_sources(states, states, me_state(dim, 0, 0))


def channel_table(params: ChannelParams, dim: int) -> ProbTable:
    """Table under photon loss and detector dark counts.

    Each entry is signal + dark:  eta^2 * (1-d)^n_idle * Pi(x,y)
    + c1 * eta*(1-eta)*d*(1-d)^n_idle + c2 * (1-eta)^2 * d^2 * (1-d)^n_idle,
    where Pi is the ideal-source success probability.  The qutrit BSM
    uses six detectors (n_idle = 4, c1 = 2, c2 = 3); the qubit BSM uses
    four (n_idle = 2, c1 = 2, c2 = 2).  The dark terms are independent
    of the encoding, so every mismatched-basis entry shifts equally.
    """
    eta, d = params.eta, params.dark
    if dim == 3:
        idle = (1.0 - d) ** 4
        double_dark_coeff = 3.0
    else:
        idle = (1.0 - d) ** 2
        double_dark_coeff = 2.0
    dark_terms = (
        2.0 * eta * (1.0 - eta) * d * idle
        + double_dark_coeff * (1.0 - eta) ** 2 * d**2 * idle
    )
    signal = eta**2 * idle
    base = ideal_table(dim)
    probs = signal * np.asarray(base.probs) + dark_terms
    return ProbTable(dim=dim, probs=probs)
