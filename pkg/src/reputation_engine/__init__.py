"""
Reputation Engine Package
"""
__version__ = "0.1.0"

from .audit import (
    AuditReport,
    AuditSettings,
    CheckResult,
    audit_behavior,
    audit_buyer_ic,
    audit_frequencies,
    audit_frontload_bound,
    audit_kl_budget,
    audit_learning_phase,
    audit_local_ic,
    audit_martingale,
    audit_promise_keeping,
    audit_state_bounds,
    collect_states,
    frequency_targets,
    kl_period_bound,
    run_audit_suite,
)
from .config import RunConfig, load_config, parse_config
from .constants import DerivedConstants, derive_constants
from .equilibrium import EqState, EquilibriumAutomaton, HistoryClass, Prescription, fm_schedule, initial_state, prescribe, transition
from .errors import ReputationError
from .game import (
    GameSpec,
    GeneralGame,
    OutcomeDist,
    PayoffVector,
    check_assumptions,
    gamma_star,
    payoff_table,
    stackelberg_payoff,
    v_of_gamma,
    v_star,
)
from .numeric import bernoulli_kl
from .simulator import ExperimentStats, Trace, discounted_frequency, run_experiment, simulate_path
from .solver import TrustLP, grid_oracle, solve_general_lp, solve_trust_lp
