"""Key-rate certification and simulation for qutrit MDI-QKD with
uncharacterized sources, plus the qubit baseline."""

from .qudit import (
    Basis,
    BasisLabel,
    PhaseSet,
    bell_states,
    me_state,
    misaligned_state,
    mub_bar_basis,
    projection_prob,
    shannon_entropy,
    sift_correct,
)
from .tables import (
    ChannelParams,
    ProbTable,
    SettingLabel,
    channel_table,
    eta_from_loss_db,
    ideal_sources,
    ideal_table,
    table_from_sources,
)
from .eve import (
    AttackModel,
    AttackOutcome,
    ChainReport,
    EdpReport,
    attack_outcome,
    certification_trials,
    direct_phase_error,
    edp_roundtrip,
    honest_isometry,
    random_attack,
    true_coeffs,
    verify_bound_chain,
    verify_constraints,
)
from .security import (
    ErrorReport,
    KeyRateReport,
    OptimizerConfig,
    SourceCoeffs,
    analyze,
    epsilon_max,
    f_bound,
    feasible,
    key_rate_sifted,
    key_rate_total,
    phase_error_bound,
    s_bound,
    state_error_rate,
)

__all__ = [
    "Basis",
    "BasisLabel",
    "PhaseSet",
    "bell_states",
    "me_state",
    "misaligned_state",
    "mub_bar_basis",
    "projection_prob",
    "shannon_entropy",
    "sift_correct",
    "ChannelParams",
    "ProbTable",
    "SettingLabel",
    "channel_table",
    "eta_from_loss_db",
    "ideal_sources",
    "ideal_table",
    "table_from_sources",
    "AttackModel",
    "AttackOutcome",
    "ChainReport",
    "EdpReport",
    "attack_outcome",
    "certification_trials",
    "direct_phase_error",
    "edp_roundtrip",
    "honest_isometry",
    "random_attack",
    "true_coeffs",
    "verify_bound_chain",
    "verify_constraints",
    "ErrorReport",
    "KeyRateReport",
    "OptimizerConfig",
    "SourceCoeffs",
    "analyze",
    "epsilon_max",
    "f_bound",
    "feasible",
    "key_rate_sifted",
    "key_rate_total",
    "phase_error_bound",
    "s_bound",
    "state_error_rate",
]

__version__ = "0.1.0"
