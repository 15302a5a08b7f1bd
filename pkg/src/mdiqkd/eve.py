"""Brute-force eavesdropper simulation and numerical certification.

An attack is an isometry from the two-transmitted-qudit space into a
flag (fail/success) tensor environment space.  Post-selecting the
success flag yields, for every pair of source settings, an unnormalized
environment branch whose squared norm is the announced success
probability.  From those branches the module rebuilds the shared
density matrix, evaluates the phase error rate directly, and checks
every inequality used by the security bound against concrete numbers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .qudit import (
    Basis,
    PhaseSet,
    SUPPORTED_DIMS,
    bell_states,
    me_state,
    sift_correct,
)
from .tables import ChannelParams, ProbTable, ideal_sources
from .security import (
    OptimizerConfig,
    SourceCoeffs,
    a_row_labels,
    b_row_labels,
    epsilon_max,
    f_bound,
    feasible,
    objective_pairs,
    phase_error_bound,
    state_error_rate,
)

CHAIN_SLACK = 1e-9


class DegenerateAttackError(ValueError):
    """Every matched-ordinary success probability vanished."""


def _trial_rng(seed: int, *counters: int) -> np.random.Generator:
    """Counter-split generator: independent stream per (seed, counters)."""
    return np.random.default_rng(np.random.SeedSequence([seed, *counters]))


@dataclass(frozen=True)
class AttackModel:
    """Isometry from dim**2 inputs to fail/success x environment outputs.

    Output rows 0..E-1 are the failure-flag block and rows E..2E-1 the
    success-flag block, E being the environment dimension.
    """

    dim: int
    isometry: np.ndarray
    seed: int

    def __post_init__(self):
        if self.dim not in SUPPORTED_DIMS:
            raise ValueError(f"unsupported dimension {self.dim}")
        n_in = self.dim**2
        rows, cols = self.isometry.shape
        if cols != n_in or rows % 2 != 0:
            raise ValueError(f"isometry shape {self.isometry.shape} invalid for dim {self.dim}")
        gram = self.isometry.conj().T @ self.isometry
        if not np.allclose(gram, np.eye(n_in), atol=1e-10):
            raise ValueError("isometry columns are not orthonormal")
        self.isometry.setflags(write=False)

    @property
    def env_dim(self) -> int:
        return self.isometry.shape[0] // 2


def honest_isometry(dim: int, env_dim: int | None = None) -> np.ndarray:
    """The no-eavesdropper channel: project onto the target entangled
    state for success, route the orthogonal complement to failure."""
    if env_dim is None:
        env_dim = dim**2
    n = dim**2
    if env_dim < n - 1:
        raise ValueError("environment too small to absorb the failure branch")
    target = me_state(dim, 0, 0)
    # Orthonormal basis whose first column is the target state.
    stacked = np.column_stack([target, np.eye(n, dtype=complex)])
    q, _ = np.linalg.qr(stacked)
    q0 = q[:, 0] * np.vdot(q[:, 0], target) / abs(np.vdot(q[:, 0], target))
    complement = q[:, 1:n]
    iso = np.zeros((2 * env_dim, n), dtype=complex)
    iso[: n - 1, :] = complement.conj().T
    iso[env_dim, :] = q0.conj()
    return iso


def random_attack(dim: int, seed: int, strength: float,
                  env_dim: int | None = None) -> AttackModel:
    """Seeded attack interpolating the honest channel (strength 0) and a
    fully random isometry (strength 1)."""
    if not 0.0 <= strength <= 1.0:
        raise ValueError(f"strength {strength} outside [0, 1]")
    honest = honest_isometry(dim, env_dim)
    if strength == 0.0:
        return AttackModel(dim=dim, isometry=honest, seed=seed)
    rows, cols = honest.shape
    rng = _trial_rng(seed, dim, rows)
    noise = rng.standard_normal((rows, cols)) + 1j * rng.standard_normal((rows, cols))
    raw = (1.0 - strength) * honest + strength * noise / math.sqrt(2 * rows)
    q, r = np.linalg.qr(raw)
    diag = np.diag(r).copy()
    diag[diag == 0] = 1.0
    q = q * (diag / np.abs(diag))[None, :]
    return AttackModel(dim=dim, isometry=np.ascontiguousarray(q), seed=seed)


@dataclass(frozen=True)
class AttackOutcome:
    """Per-setting success branches and the reconstructed shared state."""

    table: ProbTable
    gamma: dict[tuple[int, int], np.ndarray]
    rho_ab: np.ndarray
    branches: np.ndarray = field(repr=False)

    def diag_branch(self, k: int) -> np.ndarray:
        """Unnormalized success branch of the matched-ordinary pair (k, k)."""
        return self.branches[k, k]


def attack_outcome(attack: AttackModel,
                   alice_states: list[np.ndarray] | None = None,
                   bob_states: list[np.ndarray] | None = None) -> AttackOutcome:
    """Run every setting pair through the attack isometry."""
    d = attack.dim
    if alice_states is None:
        alice_states = ideal_sources(d)
    if bob_states is None:
        bob_states = ideal_sources(d)
    a_arr = np.asarray(alice_states)
    b_arr = np.asarray(bob_states)
    joint = np.einsum("ai,bj->abij", a_arr, b_arr).reshape(len(a_arr) * len(b_arr), d * d)
    env = attack.env_dim
    out = joint @ attack.isometry.T
    succ = out[:, env:]
    probs = np.sum(np.abs(succ) ** 2, axis=1).reshape(len(a_arr), len(b_arr))
    branches = succ.reshape(len(a_arr), len(b_arr), env)

    ordinary = probs[:d, :d]
    total = float(ordinary.sum())
    if total <= 0.0:
        raise DegenerateAttackError("attack annihilates every matched-ordinary pair")

    gamma = {}
    for i in range(len(a_arr)):
        for j in range(len(b_arr)):
            if probs[i, j] > 0.0:
                gamma[(i, j)] = branches[i, j] / math.sqrt(probs[i, j])

    m = branches[:d, :d].reshape(d * d, env)
    rho = (m @ m.conj().T) / total
    return AttackOutcome(
        table=ProbTable(dim=d, probs=np.minimum(probs, 1.0)),
        gamma=gamma,
        rho_ab=rho,
        branches=branches,
    )


def direct_phase_error(outcome: AttackOutcome, phases: PhaseSet | None = None) -> float:
    """Exact phase error rate: total overlap of the shared state with the
    phased entangled states of nonzero phase index."""
    d = outcome.table.dim
    if phases is None:
        phases = PhaseSet.zero(d)
    total = 0.0
    for k in range(d):
        for l in range(1, d):
            state = me_state(d, k, l, phases)
            total += float(np.real(state.conj() @ outcome.rho_ab @ state))
    return total


def true_coeffs(dim: int,
                alice_states: list[np.ndarray] | None = None,
                bob_states: list[np.ndarray] | None = None) -> SourceCoeffs:
    """Reference coefficients as overlap magnitudes of each party's bar
    states with its own ordinary states.  Meaningful only when the
    ordinary states are orthonormal, which all oracle sources are."""
    if alice_states is None:
        alice_states = ideal_sources(dim)
    if bob_states is None:
        bob_states = ideal_sources(dim)

    def rows(states, labels):
        ordinary = states[:dim]
        return {
            j: np.array([abs(np.vdot(ordinary[l], states[dim + j])) for l in range(dim)])
            for j in labels
        }

    return SourceCoeffs(
        dim=dim,
        a_rows=rows(alice_states, a_row_labels(dim)),
        b_rows=rows(bob_states, b_row_labels(dim)),
    )


def _diag_overlap_sq(outcome: AttackOutcome, weights: np.ndarray) -> float:
    """|| sum_k weights[k] * sqrt(p(k,k)) gamma_kk ||^2 from raw branches."""
    d = outcome.table.dim
    acc = np.zeros(outcome.branches.shape[-1], dtype=complex)
    for k in range(d):
        acc += weights[k] * outcome.diag_branch(k)
    return float(np.sum(np.abs(acc) ** 2))


@dataclass(frozen=True)
class ChainReport:
    """Per-inequality verdicts for one attack, all phase trials pooled."""

    dim: int
    seed: int
    strength: float
    qs: float
    epsilon: float
    feasible_found: bool
    qp_direct: float
    qp_bound: float
    ok_identity: bool
    ok_linearity: bool
    ok_bell_split: bool
    ok_phase_envelope: bool
    ok_bar_expansion: bool
    ok_branch_bounds: bool
    ok_constraints: bool
    ok_end_to_end: bool

    @property
    def all_ok(self) -> bool:
        return all((
            self.ok_identity, self.ok_linearity, self.ok_bell_split,
            self.ok_phase_envelope, self.ok_bar_expansion,
            self.ok_branch_bounds, self.ok_constraints, self.ok_end_to_end,
        ))


def _random_phase_set(dim: int, rng: np.random.Generator) -> PhaseSet:
    delta = np.concatenate([[0.0], rng.uniform(0.0, 2 * np.pi, dim - 1)])
    xi = np.concatenate([[0.0], rng.uniform(0.0, 2 * np.pi, dim - 1)])
    return PhaseSet.of(delta, xi)


def verify_bound_chain(attack: AttackModel, strength: float = float("nan"),
                       phase_trials: int = 3,
                       config: OptimizerConfig | None = None) -> ChainReport:
    """Certify every step of the phase-error bound on a concrete attack.

    Sources are the exact mutually unbiased states, so the reference
    coefficients are all 1/sqrt(dim), the protocol's entangled-state
    phase set is zero, and the bound-factor maximization must dominate
    the bound evaluated at the reference point.  Checks that quantify
    over the entangled-family phases run on random phase sets; the
    expansion inequalities hold at the true source phase combinations
    (one fixed phase vector per objective pair) and are checked there.
    """
    d = attack.dim
    outcome = attack_outcome(attack)
    table = outcome.table
    qs = state_error_rate(table)
    sum_p = float(table.ordinary().sum())
    coeffs = true_coeffs(d)
    rng = _trial_rng(attack.seed, 0xC0FFEE)

    # (a) The off-diagonal weight of the shared state equals the state
    # error rate computed from the table alone.
    qs_rho = sum(
        float(np.real(outcome.rho_ab[i * d + j, i * d + j]))
        for i in range(d) for j in range(d) if i != j
    )
    ok_identity = abs(qs_rho - qs) <= 1e-10

    # (b) Linearity: the bar-pair success branches are the coefficient-
    # weighted sums of the ordinary-pair branches, phases included.
    ok_linearity = True
    w = math.sqrt(1.0 / d)
    omega_arg = 2.0 * np.pi / d
    for x, y in objective_pairs(d):
        recon = np.zeros(attack.env_dim, dtype=complex)
        for i in range(d):
            for j in range(d):
                phase = np.exp(-1j * omega_arg * (x * i + y * j))
                recon += w * w * phase * outcome.branches[i, j]
        direct = outcome.branches[d + x, d + y]
        if not np.allclose(recon, direct, atol=1e-10):
            ok_linearity = False

    # Upper-bound bracket of the bar-expansion inequality per pair.
    brackets = {}
    for x, y in objective_pairs(d):
        a_row = coeffs.a_rows[x]
        b_row = coeffs.b_rows[y]
        g = math.sqrt(table.bar(x, y))
        sq = np.sqrt(table.ordinary())
        for i in range(d):
            for j in range(d):
                if i != j:
                    g += a_row[i] * b_row[j] * sq[i, j]
        brackets[(x, y)] = g * g

    diag = np.sqrt(np.diag(table.ordinary()))

    ok_bell_split = True
    ok_phase_envelope = True
    ok_bar_expansion = True
    ok_branch_bounds = True

    # Checks quantified over the entangled-family phase freedom.
    trials = [PhaseSet.zero(d)] + [_random_phase_set(d, rng) for _ in range(phase_trials)]
    for ps in trials:
        qp = direct_phase_error(outcome, ps)

        # Splitting the phase error over the zero-shift phased states
        # plus the state error (the mismatched-shift terms are absorbed
        # into the off-diagonal weight).
        head = 0.0
        head_terms = []
        for l in range(1, d):
            state = me_state(d, 0, l, ps)
            term = float(np.real(state.conj() @ outcome.rho_ab @ state))
            head += term
            head_terms.append(term)
            # The same overlap written on the raw diagonal branches, one
            # phase vector per term.
            weights = np.exp(-1j * (omega_arg * l * np.arange(d) + np.asarray(ps.delta)))
            if abs(term - _diag_overlap_sq(outcome, weights) / (d * sum_p)) > 1e-10:
                ok_identity = False
        if qp > head + qs + CHAIN_SLACK:
            ok_bell_split = False

        # Each zero-shift term is one phase choice of the same envelope,
        # so their common maximum dominates the sum.
        if head > (d - 1) * max(head_terms) * (1.0 + 1e-12) + CHAIN_SLACK:
            ok_phase_envelope = False

    # Expansion inequalities at the true source phase combinations.  For
    # exact mutually unbiased sources the pair (x, y) pins the diagonal
    # phase vector exp(-i*(2pi/d)*(x+y)*k), which is also the phase
    # vector of the zero-phase-set term it bounds.
    pair_t = {}
    for x, y in objective_pairs(d):
        a_row = coeffs.a_rows[x]
        b_row = coeffs.b_rows[y]
        prods = a_row * b_row
        zeta = np.exp(-1j * omega_arg * (x + y) * np.arange(d))
        lhs = _diag_overlap_sq(outcome, prods * zeta)
        if lhs > brackets[(x, y)] + CHAIN_SLACK:
            ok_bar_expansion = False
        t_val = _diag_overlap_sq(outcome, zeta)
        pair_t[(x, y)] = t_val
        for m in range(d):
            if prods[m] <= 0.0:
                continue
            ds = [abs(prods[m] - prods[(m + k) % d]) * diag[(m + k) % d]
                  for k in range(1, d)]
            cross = 2.0 * ds[0] * ds[1] if d == 3 else 0.0
            bound = (math.sqrt(brackets[(x, y)] + cross) + sum(ds)) ** 2
            bound /= prods[m] ** 2
            if t_val > bound + CHAIN_SLACK:
                ok_branch_bounds = False

    ok_constraints = feasible(coeffs, table, tol=1e-9)

    if config is None:
        # Grid-only search: the reference-coefficient seed is always
        # evaluated, which is what the maximality witness needs, and a
        # full refinement per attack would dominate certification time.
        config = OptimizerConfig(grid_points=5, refine_iterations=0, multistarts=2)
    eps_result = epsilon_max(table, config)
    qp_bound = phase_error_bound(eps_result.epsilon, qs)
    qp_direct = direct_phase_error(outcome, PhaseSet.zero(d))
    f_true_max = max(f_bound(x, y, coeffs, table, qs) for x, y in objective_pairs(d))
    # The reported factor is capped at 1 - qs, so the maximality witness
    # compares against the cap whenever the cap is active.
    witness = min(f_true_max, 1.0 - qs) <= eps_result.epsilon + 1e-9
    ok_end_to_end = (
        qp_direct <= f_true_max + qs + 1e-6
        and (not eps_result.feasible_found or witness)
        and qp_direct <= qp_bound + 1e-6
    )

    return ChainReport(
        dim=d,
        seed=attack.seed,
        strength=strength,
        qs=qs,
        epsilon=eps_result.epsilon,
        feasible_found=eps_result.feasible_found,
        qp_direct=qp_direct,
        qp_bound=qp_bound,
        ok_identity=ok_identity,
        ok_linearity=ok_linearity,
        ok_bell_split=ok_bell_split,
        ok_phase_envelope=ok_phase_envelope,
        ok_bar_expansion=ok_bar_expansion,
        ok_branch_bounds=ok_branch_bounds,
        ok_constraints=ok_constraints,
        ok_end_to_end=ok_end_to_end,
    )


def verify_constraints(attack: AttackModel,
                       alice_states: list[np.ndarray] | None = None,
                       bob_states: list[np.ndarray] | None = None,
                       tol: float = 1e-9) -> bool:
    """Whether the attack's true coefficients pass the mismatched-basis
    constraints on its own statistics (they must; this is a theorem)."""
    outcome = attack_outcome(attack, alice_states, bob_states)
    coeffs = true_coeffs(attack.dim, alice_states, bob_states)
    return feasible(coeffs, outcome.table, tol=tol)


def certification_trials(n: int, seed: int, dim: int,
                         phase_trials: int = 2,
                         config: OptimizerConfig | None = None):
    """Yield one ChainReport per seeded random attack."""
    if n < 1:
        raise ValueError("need at least one trial")
    for i in range(n):
        rng = _trial_rng(seed, dim, i)
        strength = float(rng.uniform())
        attack_seed = int(rng.integers(2**62))
        attack = random_attack(dim, attack_seed, strength)
        yield verify_bound_chain(attack, strength=strength,
                                 phase_trials=phase_trials, config=config)


@dataclass(frozen=True)
class EdpReport:
    """Empirical disagreement rates of the entanglement-based protocol."""

    n_trials: int
    ordinary_qber: float
    bar_qber: float
    genuine_heralds: int
    false_heralds: int


def edp_roundtrip(n_trials: int, seed: int, channel: ChannelParams,
                  dim: int = 3, apply_correction: bool = True) -> EdpReport:
    """Monte Carlo of the entanglement protocol over the lossy channel.

    Both parties hold halves of target entangled states; the relay
    heralds either genuinely (both photons arrive and project onto the
    target) or falsely (dark counts).  Genuine heralds leave perfectly
    correlated symbols up to the announced-index correction; false
    heralds decorrelate them.
    """
    if n_trials < 1:
        raise ValueError("need at least one trial")
    eta, dk = channel.eta, channel.dark
    idle = (1.0 - dk) ** (4 if dim == 3 else 2)
    c2 = 3.0 if dim == 3 else 2.0
    p_genuine = eta**2 * idle / dim**2
    p_false = (2.0 * eta * (1.0 - eta) * dk + c2 * (1.0 - eta) ** 2 * dk**2) * idle
    total = p_genuine + p_false
    if total <= 0.0:
        raise ValueError("channel parameters never herald")

    rng = _trial_rng(seed, dim, n_trials)
    genuine = rng.random(n_trials) < (p_genuine / total)
    bar_basis = rng.random(n_trials) < 0.5
    alice = rng.integers(0, dim, n_trials)
    noise = rng.integers(0, dim, n_trials)

    bob_raw = np.where(bar_basis, (-alice) % dim, alice)
    bob_raw = np.where(genuine, bob_raw, noise)
    if apply_correction:
        bob = np.where(
            bar_basis,
            [sift_correct(0, Basis.BAR, int(b), dim) for b in bob_raw],
            [sift_correct(0, Basis.ORDINARY, int(b), dim) for b in bob_raw],
        )
    else:
        bob = bob_raw

    mism = bob != alice
    n_bar = int(bar_basis.sum())
    n_ord = n_trials - n_bar
    return EdpReport(
        n_trials=n_trials,
        ordinary_qber=float(mism[~bar_basis].sum() / n_ord) if n_ord else 0.0,
        bar_qber=float(mism[bar_basis].sum() / n_bar) if n_bar else 0.0,
        genuine_heralds=int(genuine.sum()),
        false_heralds=int(n_trials - genuine.sum()),
    )
