"""State/phase error rates, the constrained bound-factor maximization,
and secret key rates.

The phase error rate cannot be measured; it is bounded by ``qs`` plus a
factor obtained by maximizing, over all source expansion coefficients
consistent with the observed mismatched-basis statistics, an analytic
upper-bound function of the table entries.  The maximization runs a
deterministic coarse grid (the constraints factor per coefficient row,
so each objective pair is a 2*dim-variable problem) followed by seeded
Nelder-Mead refinement with a feasibility penalty.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .qudit import shannon_entropy
from .tables import ProbTable


class UndefinedBoundError(ValueError):
    """The per-branch upper bound does not exist (zero coefficient product)."""


def a_row_labels(dim: int) -> tuple[int, ...]:
    return (0, 2) if dim == 3 else (0, 1)


def b_row_labels(dim: int) -> tuple[int, ...]:
    return (1, 0) if dim == 3 else (1, 0)


def objective_pairs(dim: int) -> tuple[tuple[int, int], ...]:
    """The bar-setting pairs whose ideal success probability is zero."""
    return ((0, 1), (2, 0)) if dim == 3 else ((0, 1), (1, 0))


@dataclass(frozen=True)
class SourceCoeffs:
    """Non-negative expansion coefficients of the bar states over the
    ordinary states, one row per bar index entering the bound."""

    dim: int
    a_rows: dict[int, np.ndarray]
    b_rows: dict[int, np.ndarray]

    def __post_init__(self):
        for rows, labels in ((self.a_rows, a_row_labels(self.dim)),
                             (self.b_rows, b_row_labels(self.dim))):
            if set(rows) != set(labels):
                raise ValueError(f"expected coefficient rows {sorted(set(labels))}, "
                                 f"got {sorted(rows)}")
            for row in rows.values():
                if len(row) != self.dim or np.any(np.asarray(row) < 0):
                    raise ValueError("coefficient rows must be length-dim and non-negative")

    @classmethod
    def ideal(cls, dim: int) -> "SourceCoeffs":
        """The exact-MUB coefficient point: every entry 1/sqrt(dim)."""
        row = np.full(dim, 1.0 / math.sqrt(dim))
        return cls(
            dim=dim,
            a_rows={j: row.copy() for j in a_row_labels(dim)},
            b_rows={k: row.copy() for k in b_row_labels(dim)},
        )


@dataclass(frozen=True)
class ErrorReport:
    qs: float
    epsilon: float
    qp_bound: float
    feasible_found: bool


@dataclass(frozen=True)
class KeyRateReport:
    dim: int
    r_sifted: float
    r_total: float
    error_report: ErrorReport
    sift_factor: float


@dataclass(frozen=True)
class OptimizerConfig:
    grid_points: int = 9
    refine_iterations: int = 200
    multistarts: int = 8
    seed: int = 0
    constraint_tolerance: float = 1e-9
    coeff_max: float = 1.0

    def __post_init__(self):
        if self.grid_points < 2:
            raise ValueError("grid_points must be >= 2")
        if self.constraint_tolerance < 0:
            raise ValueError("constraint_tolerance must be >= 0")


def state_error_rate(table: ProbTable) -> float:
    """Fraction of matched-ordinary successes with differing symbols."""
    ordinary = table.ordinary()
    total = float(ordinary.sum())
    if total <= 0.0:
        raise ValueError("no successful matched-ordinary events; error rate undefined")
    off = total - float(np.trace(ordinary))
    return off / total


def s_bound(x: int, y: int, m: int, coeffs: SourceCoeffs, table: ProbTable) -> float:
    """Analytic upper bound on the phase-error term for branch index m."""
    d = table.dim
    A = np.asarray(coeffs.a_rows[x], dtype=float)
    B = np.asarray(coeffs.b_rows[y], dtype=float)
    prod = A * B
    if prod[m] <= 0.0:
        raise UndefinedBoundError(f"A[{x},{m}] * B[{y},{m}] = 0; bound undefined")
    ordinary = table.ordinary()
    sqrt_ord = np.sqrt(ordinary)
    g = math.sqrt(table.bar(x, y))
    for i in range(d):
        for j in range(d):
            if i != j:
                g += A[i] * B[j] * sqrt_ord[i, j]
    diag = np.sqrt(np.diag(ordinary))
    ds = [abs(prod[m] - prod[(m + k) % d]) * diag[(m + k) % d] for k in range(1, d)]
    cross = 2.0 * ds[0] * ds[1] if d == 3 else 0.0
    sum_p = float(ordinary.sum())
    inner = math.sqrt(g * g + cross) + sum(ds)
    return (d - 1) / d * inner * inner / (prod[m] ** 2 * sum_p)


def f_bound(x: int, y: int, coeffs: SourceCoeffs, table: ProbTable, qs: float) -> float:
    """Smallest valid branch bound; falls back to 1 - qs when every
    coefficient product vanishes."""
    values = []
    for m in range(table.dim):
        try:
            values.append(s_bound(x, y, m, coeffs, table))
        except UndefinedBoundError:
            continue
    if not values:
        return 1.0 - qs
    return min(values)


def _row_violations(rows: np.ndarray, ord_block: np.ndarray, bar_vec: np.ndarray) -> np.ndarray:
    """Worst constraint excess for each candidate coefficient row.

    ``ord_block[l, i]`` is the matched-ordinary probability with the
    constrained party sending l and the other party i; ``bar_vec[i]``
    the corresponding bar-setting probability.  The constraint per i is
    |bar_vec[i] - sum_l row_l^2 ord[l,i]|
        <= 2 sum_{l<l'} row_l row_l' sqrt(ord[l,i] ord[l',i]).
    """
    rows = np.atleast_2d(rows)
    d = ord_block.shape[0]
    sq = np.sqrt(ord_block)
    lhs = np.abs(bar_vec[None, :] - (rows**2) @ ord_block)
    rhs = np.zeros_like(lhs)
    for l in range(d):
        for lp in range(l + 1, d):
            rhs += 2.0 * (rows[:, l] * rows[:, lp])[:, None] * (sq[l] * sq[lp])[None, :]
    return np.max(lhs - rhs, axis=1)


def a_row_violation(row: np.ndarray, j: int, table: ProbTable) -> float:
    return float(_row_violations(np.asarray(row, dtype=float),
                                 table.ordinary(), table.alice_bar_row(j))[0])


def b_row_violation(row: np.ndarray, k: int, table: ProbTable) -> float:
    return float(_row_violations(np.asarray(row, dtype=float),
                                 table.ordinary().T, table.bob_bar_col(k))[0])


def coeffs_violation(coeffs: SourceCoeffs, table: ProbTable) -> float:
    """Worst constraint excess over every stored coefficient row."""
    worst = -math.inf
    for j, row in coeffs.a_rows.items():
        worst = max(worst, a_row_violation(row, j, table))
    for k, row in coeffs.b_rows.items():
        worst = max(worst, b_row_violation(row, k, table))
    return worst


def feasible(coeffs: SourceCoeffs, table: ProbTable, tol: float) -> bool:
    """Whether the coefficients satisfy every mismatched-basis constraint."""
    return coeffs_violation(coeffs, table) <= tol


def _f_values_pairs(x: int, y: int, a_rows: np.ndarray, b_rows: np.ndarray,
                    table: ProbTable, qs: float) -> np.ndarray:
    """Vectorized bound function over all (a_row, b_row) combinations."""
    d = table.dim
    ordinary = table.ordinary()
    sqrt_ord = np.sqrt(ordinary)
    diag = np.sqrt(np.diag(ordinary))
    sum_p = float(ordinary.sum())
    bar_amp = math.sqrt(table.bar(x, y))

    g = np.full((a_rows.shape[0], b_rows.shape[0]), bar_amp)
    for i in range(d):
        for j in range(d):
            if i != j:
                g += np.outer(a_rows[:, i], b_rows[:, j]) * sqrt_ord[i, j]

    prods = [np.outer(a_rows[:, m], b_rows[:, m]) for m in range(d)]
    best = np.full_like(g, np.inf)
    for m in range(d):
        ds = [np.abs(prods[m] - prods[(m + k) % d]) * diag[(m + k) % d]
              for k in range(1, d)]
        cross = 2.0 * ds[0] * ds[1] if d == 3 else 0.0
        inner = np.sqrt(g * g + cross) + sum(ds)
        with np.errstate(divide="ignore", invalid="ignore"):
            s = (d - 1) / d * inner * inner / (prods[m] ** 2 * sum_p)
        s = np.where(prods[m] > 0.0, s, np.inf)
        best = np.minimum(best, s)
    return np.where(np.isinf(best), 1.0 - qs, best)


def _grid_rows(grid_points: int, coeff_max: float, dim: int) -> np.ndarray:
    axis = np.linspace(0.0, coeff_max, grid_points)
    return np.array(list(itertools.product(axis, repeat=dim)))


@dataclass(frozen=True)
class EpsilonResult:
    epsilon: float
    argmax: SourceCoeffs
    feasible_found: bool


class _PairMaximizer:
    """Maximize the bound function for one objective pair (x, y) over the
    coefficient rows (A row x, B row y) subject to the row constraints."""

    def __init__(self, table: ProbTable, x: int, y: int, qs: float,
                 config: OptimizerConfig):
        self.table = table
        self.x, self.y = x, y
        self.qs = qs
        self.cfg = config
        self.d = table.dim
        self.ord_a = table.ordinary()
        self.bar_a = table.alice_bar_row(x)
        self.ord_b = table.ordinary().T
        self.bar_b = table.bob_bar_col(y)
        self.best_f = -math.inf
        self.best_v: np.ndarray | None = None

    def _violation(self, v: np.ndarray) -> float:
        a, b = v[: self.d], v[self.d:]
        va = _row_violations(a, self.ord_a, self.bar_a)[0]
        vb = _row_violations(b, self.ord_b, self.bar_b)[0]
        return float(max(va, vb))

    def _f(self, v: np.ndarray) -> float:
        a, b = v[: self.d], v[self.d:]
        return float(_f_values_pairs(self.x, self.y, np.atleast_2d(a),
                                     np.atleast_2d(b), self.table, self.qs)[0, 0])

    def _record(self, v: np.ndarray, fval: float) -> None:
        if fval > self.best_f or (
            fval == self.best_f
            and self.best_v is not None
            and tuple(v) < tuple(self.best_v)
        ):
            self.best_f = fval
            self.best_v = v.copy()

    def _penalized(self, v: np.ndarray) -> float:
        v = np.clip(v, 0.0, self.cfg.coeff_max)
        excess = self._violation(v) - self.cfg.constraint_tolerance
        fval = self._f(v)
        if excess <= 0.0:
            self._record(v, fval)
            return -fval
        # Penalty in units of the table's event scale so it dominates the
        # O(1) objective without flattening the landscape near the boundary.
        scale = max(float(self.table.ordinary().sum()), 1e-300)
        return -(fval - 1e3 * excess / scale)

    def run(self) -> tuple[float | None, np.ndarray | None]:
        cfg = self.cfg
        d = self.d
        rows = _grid_rows(cfg.grid_points, cfg.coeff_max, d)
        ideal_row = np.full(d, 1.0 / math.sqrt(d))
        rows = np.vstack([rows, ideal_row])
        viol_a = _row_violations(rows, self.ord_a, self.bar_a)
        viol_b = _row_violations(rows, self.ord_b, self.bar_b)
        tol = cfg.constraint_tolerance
        scale = max(float(self.table.ordinary().sum()), 1e-300)

        # Rank every grid row pair by the same penalized objective the
        # refinement minimizes, so near-feasible high-value cells still
        # seed the search when the feasible set is thinner than the grid
        # spacing.  Feasible cells are recorded as incumbents directly.
        n_top = max(cfg.multistarts - 1, 1)
        top: list[tuple[float, int, int]] = []
        chunk = 128
        for start in range(0, len(rows), chunk):
            block = rows[start:start + chunk]
            fmat = _f_values_pairs(self.x, self.y, block, rows, self.table, self.qs)
            excess = np.maximum(
                np.maximum(viol_a[start:start + chunk, None], viol_b[None, :]) - tol,
                0.0,
            )
            score = fmat - 1e3 * excess / scale
            flat = np.argpartition(score, max(score.size - n_top, 0), axis=None)[-n_top:]
            for idx in flat:
                ia, ib = np.unravel_index(idx, score.shape)
                if np.isfinite(score[ia, ib]):
                    top.append((float(score[ia, ib]), start + int(ia), int(ib)))
                    if excess[ia, ib] <= 0.0:
                        self._record(np.concatenate([rows[start + ia], rows[ib]]),
                                     float(fmat[ia, ib]))
        top.sort(key=lambda item: (-item[0], item[1], item[2]))

        # Greedy de-duplication over row indices keeps the starts spread
        # over distinct grid cells instead of one high-scoring cluster.
        starts: list[np.ndarray] = [np.concatenate([ideal_row, ideal_row])]
        used_a: set[int] = set()
        used_b: set[int] = set()
        deferred: list[tuple[int, int]] = []
        for _, ia, ib in top:
            if len(starts) > n_top:
                break
            if ia in used_a and ib in used_b:
                deferred.append((ia, ib))
                continue
            used_a.add(ia)
            used_b.add(ib)
            starts.append(np.concatenate([rows[ia], rows[ib]]))
        for ia, ib in deferred:
            if len(starts) > n_top:
                break
            starts.append(np.concatenate([rows[ia], rows[ib]]))

        rng = np.random.default_rng(cfg.seed)
        for _ in range(max(cfg.multistarts // 2, 1)):
            starts.append(rng.uniform(0.0, cfg.coeff_max, size=2 * d))

        if cfg.refine_iterations > 0:
            for v0 in starts:
                minimize(
                    self._penalized,
                    v0,
                    method="Nelder-Mead",
                    options={
                        "maxiter": cfg.refine_iterations,
                        "xatol": 1e-10,
                        "fatol": 1e-12,
                        "adaptive": True,
                    },
                )
        else:
            for v0 in starts:
                self._penalized(v0)

        if self.best_v is None:
            return None, None
        return self.best_f, self.best_v


def epsilon_max(table: ProbTable, config: OptimizerConfig | None = None) -> EpsilonResult:
    """Largest bound factor over coefficients consistent with the table.

    Returns the conservative value 1 - qs with ``feasible_found=False``
    when no feasible coefficients are located within tolerance.
    """
    if config is None:
        config = OptimizerConfig()
    qs = state_error_rate(table)
    d = table.dim
    pair_best: dict[tuple[int, int], tuple[float, np.ndarray]] = {}
    all_found = True
    for x, y in objective_pairs(d):
        fval, v = _PairMaximizer(table, x, y, qs, config).run()
        if fval is None:
            all_found = False
        else:
            pair_best[(x, y)] = (fval, v)

    ideal = SourceCoeffs.ideal(d)
    if not all_found or not pair_best:
        return EpsilonResult(epsilon=1.0 - qs, argmax=ideal, feasible_found=False)

    a_rows = {j: np.asarray(row, dtype=float) for j, row in ideal.a_rows.items()}
    b_rows = {k: np.asarray(row, dtype=float) for k, row in ideal.b_rows.items()}
    eps = 0.0
    for (x, y), (fval, v) in pair_best.items():
        a_rows[x] = v[:d].copy()
        b_rows[y] = v[d:].copy()
        eps = max(eps, fval)
    eps = min(max(eps, 0.0), 1.0 - qs)
    if eps < 1e-15:
        # Below double-precision resolution of any table entry; the only
        # consistent value is zero (exact for ideal statistics).
        eps = 0.0
    argmax = SourceCoeffs(dim=d, a_rows=a_rows, b_rows=b_rows)
    return EpsilonResult(epsilon=eps, argmax=argmax, feasible_found=True)


def phase_error_bound(epsilon: float, qs: float) -> float:
    """Phase-error upper bound, capped at 1."""
    if epsilon < 0.0 or not 0.0 <= qs <= 1.0:
        raise ValueError("epsilon must be >= 0 and qs a probability")
    return min(epsilon + qs, 1.0)


def key_rate_sifted(dim: int, qs: float, qp: float) -> float:
    """Secret bits per sifted symbol (may be negative)."""
    if dim == 3:
        return math.log2(3) - (qs + qp) - shannon_entropy(qs) - shannon_entropy(qp)
    if dim == 2:
        return 1.0 - shannon_entropy(qs) - shannon_entropy(qp)
    raise ValueError(f"unsupported dimension {dim}")


def sift_factor(dim: int) -> float:
    """Matched-basis probability times the BSM success multiplicity."""
    if dim == 3:
        return 1.0 / 6.0
    if dim == 2:
        return 1.0 / 4.0
    raise ValueError(f"unsupported dimension {dim}")


def key_rate_total(r_sifted: float, dim: int) -> float:
    """Secret bits per emitted pulse pair; negative sifted rates clamp to 0."""
    return max(r_sifted, 0.0) * sift_factor(dim)


def analyze(table: ProbTable, config: OptimizerConfig | None = None,
            mode: str = "uncharacterized") -> KeyRateReport:
    """Full pipeline: error rates, bound factor, and both key rates.

    ``mode="ideal"`` assumes trusted sources (symmetric disturbance, so
    the phase error equals the state error and the bound factor is 0);
    ``mode="uncharacterized"`` runs the bound maximization.
    """
    if mode not in ("ideal", "uncharacterized"):
        raise ValueError(f"unknown mode {mode!r}")
    qs = state_error_rate(table)
    if mode == "ideal":
        report = ErrorReport(qs=qs, epsilon=0.0, qp_bound=qs, feasible_found=True)
    else:
        result = epsilon_max(table, config)
        report = ErrorReport(
            qs=qs,
            epsilon=result.epsilon,
            qp_bound=phase_error_bound(result.epsilon, qs),
            feasible_found=result.feasible_found,
        )
    r = key_rate_sifted(table.dim, report.qs, report.qp_bound)
    return KeyRateReport(
        dim=table.dim,
        r_sifted=r,
        r_total=key_rate_total(r, table.dim),
        error_report=report,
        sift_factor=sift_factor(table.dim),
    )
