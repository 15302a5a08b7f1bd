"""Error rates, the bound-factor maximization, and key rates."""

import math

import numpy as np
import pytest

from mdiqkd.qudit import misaligned_state, mub_bar_basis, me_state, shannon_entropy
from mdiqkd.tables import (
    ChannelParams,
    ProbTable,
    channel_table,
    ideal_sources,
    ideal_table,
    table_from_sources,
)
from mdiqkd.security import (
    OptimizerConfig,
    SourceCoeffs,
    a_row_labels,
    analyze,
    b_row_labels,
    coeffs_violation,
    epsilon_max,
    f_bound,
    feasible,
    key_rate_sifted,
    key_rate_total,
    objective_pairs,
    phase_error_bound,
    s_bound,
    sift_factor,
    state_error_rate,
)

FAST = OptimizerConfig(grid_points=5, refine_iterations=0, multistarts=2)


def test_state_error_rate_ideal_zero():
    for dim in (2, 3):
        assert state_error_rate(ideal_table(dim)) == 0.0


def test_state_error_rate_counts_off_diagonal():
    probs = np.full((6, 6), 1.0 / 9.0)
    ordinary = np.diag([0.3, 0.3, 0.3])
    ordinary[0, 1] = 0.1
    probs[:3, :3] = ordinary
    t = ProbTable(dim=3, probs=probs)
    assert abs(state_error_rate(t) - 0.1) < 1e-15


def test_state_error_rate_undefined_on_empty_table():
    with pytest.raises(ValueError):
        state_error_rate(ProbTable(dim=3, probs=np.zeros((6, 6))))


def test_ideal_coeffs_feasible_and_zero_bound():
    for dim in (2, 3):
        t = ideal_table(dim)
        coeffs = SourceCoeffs.ideal(dim)
        assert feasible(coeffs, t, tol=1e-12)
        for x, y in objective_pairs(dim):
            assert f_bound(x, y, coeffs, t, qs=0.0) < 1e-15


def test_epsilon_ideal_exact_zero():
    for dim in (2, 3):
        result = epsilon_max(ideal_table(dim), FAST)
        assert result.epsilon == 0.0
        assert result.feasible_found


def test_epsilon_range_and_witness():
    cfg = OptimizerConfig(grid_points=9, refine_iterations=100, multistarts=4)
    for dim in (2, 3):
        for loss_db in (2.0, 10.0, 25.0):
            eta = 10 ** (-loss_db / 10.0)
            t = channel_table(ChannelParams(eta=eta, dark=1e-5), dim)
            qs = state_error_rate(t)
            result = epsilon_max(t, cfg)
            assert result.feasible_found
            assert 0.0 <= result.epsilon <= 1.0 - qs + 1e-12
            # Maximality witness at the reference coefficient point.
            ref = SourceCoeffs.ideal(dim)
            f_ref = max(f_bound(x, y, ref, t, qs) for x, y in objective_pairs(dim))
            assert min(f_ref, 1.0 - qs) <= result.epsilon + 1e-9
            # The reported argmax is itself feasible.
            assert coeffs_violation(result.argmax, t) <= 1e-9 + 1e-12


def test_s_bound_undefined_on_zero_product():
    t = channel_table(ChannelParams(eta=0.5, dark=1e-5), 3)
    rows_a = {j: np.full(3, 1 / math.sqrt(3)) for j in a_row_labels(3)}
    rows_b = {k: np.full(3, 1 / math.sqrt(3)) for k in b_row_labels(3)}
    rows_a[0] = np.array([0.0, 1.0, 0.0])
    coeffs = SourceCoeffs(dim=3, a_rows=rows_a, b_rows=rows_b)
    with pytest.raises(ValueError):
        s_bound(0, 1, 0, coeffs, t)
    # f_bound skips the undefined branch instead of failing.
    assert np.isfinite(f_bound(0, 1, coeffs, t, qs=0.0))


def test_epsilon_relabel_invariance():
    """Permuting ordinary indices on both sides leaves the bound factor
    unchanged, because objective and constraints transform covariantly."""
    nu = math.acos(1.0 / math.sqrt(3.0))
    bob = ideal_sources(3)
    bob[3] = misaligned_state(math.pi / 4 + 0.2, nu + 0.15)
    table = table_from_sources(ideal_sources(3), bob, me_state(3, 0, 0))

    perm = [2, 0, 1]
    probs = np.array(table.probs)
    permuted = probs.copy()
    permuted[:3, :3] = probs[np.ix_(perm, perm)]
    permuted[3:, :3] = probs[3:, perm]
    permuted[:3, 3:] = probs[perm, 3:]
    table_p = ProbTable(dim=3, probs=permuted)

    cfg = OptimizerConfig(grid_points=13, refine_iterations=0, multistarts=1)
    e1 = epsilon_max(table, cfg).epsilon
    e2 = epsilon_max(table_p, cfg).epsilon
    assert abs(e1 - e2) < 1e-9


def test_key_rate_matches_symmetric_form():
    for q in np.linspace(0.0, 1.0, 51):
        expected = math.log2(3) - 2 * q - 2 * shannon_entropy(q)
        assert abs(key_rate_sifted(3, q, q) - expected) < 1e-12


def test_key_rate_qubit_form():
    assert abs(key_rate_sifted(2, 0.0, 0.0) - 1.0) < 1e-15
    assert abs(key_rate_sifted(2, 0.11, 0.11) - (1 - 2 * shannon_entropy(0.11))) < 1e-12


def test_phase_error_bound_caps_at_one():
    assert phase_error_bound(0.0, 0.0) == 0.0
    assert abs(phase_error_bound(0.2, 0.05) - 0.25) < 1e-15
    assert phase_error_bound(0.9, 0.4) == 1.0
    with pytest.raises(ValueError):
        phase_error_bound(-0.1, 0.0)


def test_total_rate_clamps_negative():
    assert key_rate_total(-0.5, 3) == 0.0
    assert abs(key_rate_total(1.2, 3) - 0.2) < 1e-15
    assert sift_factor(3) == 1.0 / 6.0
    assert sift_factor(2) == 1.0 / 4.0


def test_analyze_modes():
    t = channel_table(ChannelParams(eta=0.5, dark=1e-5), 3)
    ideal = analyze(t, FAST, mode="ideal")
    unchar = analyze(t, FAST, mode="uncharacterized")
    assert ideal.error_report.epsilon == 0.0
    assert ideal.error_report.qp_bound == ideal.error_report.qs
    assert unchar.error_report.qp_bound >= unchar.error_report.qs
    assert unchar.r_sifted < ideal.r_sifted
    with pytest.raises(ValueError):
        analyze(t, FAST, mode="pessimistic")


def test_optimizer_deterministic():
    t = channel_table(ChannelParams(eta=0.25, dark=1e-5), 3)
    cfg = OptimizerConfig(grid_points=7, refine_iterations=50, multistarts=4, seed=5)
    r1 = epsilon_max(t, cfg)
    r2 = epsilon_max(t, cfg)
    assert r1.epsilon == r2.epsilon
