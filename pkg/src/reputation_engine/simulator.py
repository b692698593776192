"""Monte Carlo play of the constructed equilibrium."""
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .constants import DerivedConstants, derive_constants
from .equilibrium import EqState, EquilibriumAutomaton, HistoryClass
from .errors import EmptyTrace
from .game import GameSpec, OutcomeDist, outcome_payoff
from .numeric import Number, bernoulli_kl

logger = logging.getLogger(__name__)

DEFAULT_TAIL_TOL = 1e-4
ABSORBING = (HistoryClass.CLASS3, HistoryClass.PUNISH)


@dataclass(frozen=True)
class PeriodRecord:
    period: int
    outcome: str
    buyer_action: str
    eta: Number
    cls: HistoryClass
    weights: Tuple[Number, Number, Number]
    h_prob: Dict[int, Number]
    p_h: Number
    values: Tuple[Number, ...]
    waiting: bool = False


@dataclass
class Trace:
    """One realized path.

    ``outcomes`` covers every simulated period. Without recording, play
    stops at the first Class-3 state and the rest of the path is resolved
    from that state's weights, which the schedule delivers exactly.
    """

    type_index: int
    seed: int
    horizon: int
    outcomes: str
    final_state: EqState
    records: List[PeriodRecord] = field(default_factory=list)
    absorption_period: Optional[int] = None
    class2_count: int = 0
    eta_hit_one: bool = False
    reveal_prefix: Optional[str] = None
    kl_terms: List[float] = field(default_factory=list)
    payoff: float = 0.0

    @property
    def absorbed(self) -> bool:
        return self.final_state.cls in ABSORBING

    @property
    def kl_sum(self) -> float:
        return math.fsum(self.kl_terms)


@dataclass
class TypeStats:
    type_index: int
    n_paths: int
    mean_payoff: float
    se_payoff: float
    alpha: Tuple[float, float, float]
    mean_absorption: Optional[float]
    se_absorption: Optional[float]
    class2_counts: Dict[int, int]
    eta_hit_fraction: float
    truncated: int
    kl_sums: Tuple[float, ...]
    payoffs: Tuple[float, ...]
    path_alphas: Tuple[Tuple[float, float, float], ...]


@dataclass
class ExperimentStats:
    n_paths: int
    horizon: int
    seed0: int
    per_type: List[TypeStats]
    traces: Dict[int, List[Trace]] = field(default_factory=dict)


def default_horizon(delta: Number, tol: float = DEFAULT_TAIL_TOL) -> int:
    """Periods after which the discounted tail weighs at most ``tol``."""
    return int(math.ceil(math.log(tol) / math.log(float(delta))))


def path_seed(seed0: int, type_index: int, path_index: int) -> int:
    """Per-path seed derived from (seed0, type, path), independent of run order."""
    sequence = np.random.SeedSequence([seed0, type_index, path_index])
    return int(sequence.generate_state(1, np.uint64)[0])


def simulate_path(spec: GameSpec, consts: DerivedConstants, type_index: int, seed: int,
                  horizon: int, record: bool = True,
                  automaton: Optional[EquilibriumAutomaton] = None) -> Trace:
    """Play the equilibrium for the true type ``type_index``."""
    automaton = automaton or EquilibriumAutomaton(spec, consts)
    rng = np.random.default_rng(seed)
    delta = float(spec.delta)
    theta = spec.thetas[type_index]
    state = automaton.initial_state()
    outcomes: List[str] = []
    records: List[PeriodRecord] = []
    kl_terms: List[float] = []
    trace = Trace(type_index=type_index, seed=seed, horizon=horizon, outcomes="", final_state=state)
    if state.cls is HistoryClass.CLASS3:
        trace.absorption_period = 0
    if state.eta == 1:
        trace.eta_hit_one, trace.reveal_prefix = True, ""
    discount = 1.0
    payoff = 0.0
    for t in range(horizon):
        if not record and state.cls in ABSORBING:
            break
        prescription = automaton.prescribe(state)
        if prescription.buyer_action == "T":
            h = float(prescription.h_prob[type_index])
            if 0.0 < h < 1.0:
                outcome = "H" if rng.random() < h else "L"
            else:
                outcome = "H" if h >= 1.0 else "L"
            if state.cls not in ABSORBING:
                kl_terms.append(bernoulli_kl(h, prescription.p_h))
        else:
            outcome = "N"
        if record:
            records.append(PeriodRecord(
                period=t, outcome=outcome, buyer_action=prescription.buyer_action, eta=state.eta,
                cls=state.cls, weights=state.weights, h_prob=dict(prescription.h_prob), p_h=prescription.p_h,
                values=tuple(automaton.continuation_value(state, j) for j in range(spec.m)),
                waiting=prescription.waiting,
            ))
        if state.cls is HistoryClass.CLASS2 and prescription.buyer_action == "T":
            trace.class2_count += 1
        payoff += (1 - delta) * discount * float(outcome_payoff(theta, outcome))
        outcomes.append(outcome)
        state = automaton.transition(state, outcome, prescription)
        discount *= delta
        if not trace.eta_hit_one and state.eta == 1 and not state.off_path:
            trace.eta_hit_one = True
            trace.reveal_prefix = "".join(outcomes)
        if trace.absorption_period is None and state.cls is HistoryClass.CLASS3:
            trace.absorption_period = t + 1
    trace.outcomes = "".join(outcomes)
    trace.final_state = state
    trace.records = records
    trace.kl_terms = kl_terms
    trace.payoff = payoff + discount * float(automaton.continuation_value(state, type_index))
    if not trace.absorbed:
        logger.warning(f"path seed={seed} type={type_index + 1} not absorbed within {horizon} periods")
    return trace


def discounted_frequency(trace: Trace, delta: Number) -> OutcomeDist:
    """Discounted outcome frequencies of a trace.

    Mass beyond the simulated periods is assigned by the final state's
    weights; this is exact once the path is in Class 3 and otherwise off by
    at most ``tail_bound``.
    """
    if trace.horizon == 0:
        raise EmptyTrace("trace has no periods")
    delta = float(delta)
    weights = {"N": 0.0, "H": 0.0, "L": 0.0}
    discount = 1.0
    for outcome in trace.outcomes:
        weights[outcome] += (1 - delta) * discount
        discount *= delta
    final = trace.final_state
    tail = (1.0, 0.0, 0.0) if final.off_path else tuple(float(w) for w in final.weights)
    return OutcomeDist(
        n=weights["N"] + discount * tail[0],
        h=weights["H"] + discount * tail[1],
        l=weights["L"] + discount * tail[2],
    )


def tail_bound(trace: Trace, delta: Number) -> float:
    """Weight of the unresolved tail: 0 once absorbed, delta^periods otherwise."""
    if trace.absorbed:
        return 0.0
    return float(delta) ** len(trace.outcomes)


def real_model(spec: GameSpec, consts: DerivedConstants) -> Tuple[GameSpec, DerivedConstants]:
    """Float copies of an exact model; Monte Carlo always runs in real mode."""
    if not spec.exact:
        return spec, consts
    real = spec.as_real()
    return real, derive_constants(real, strict=False)


def _simulate_chunk(args) -> List[Trace]:
    spec, consts, type_index, seeds, horizon, record = args
    automaton = EquilibriumAutomaton(spec, consts)
    return [simulate_path(spec, consts, type_index, s, horizon, record, automaton) for s in seeds]


def simulate_paths(spec: GameSpec, consts: DerivedConstants, type_index: int, n_paths: int,
                   horizon: int, seed0: int, record: bool = False, workers: int = 1) -> List[Trace]:
    spec, consts = real_model(spec, consts)
    seeds = [path_seed(seed0, type_index, i) for i in range(n_paths)]
    if workers <= 1:
        return _simulate_chunk((spec, consts, type_index, seeds, horizon, record))
    size = int(math.ceil(n_paths / workers))
    chunks = [(spec, consts, type_index, seeds[i:i + size], horizon, record) for i in range(0, n_paths, size)]
    traces: List[Trace] = []
    with ProcessPoolExecutor(max_workers=workers) as pool:
        for part in pool.map(_simulate_chunk, chunks):
            traces.extend(part)
    return traces


def standard_error(values: np.ndarray) -> float:
    if len(values) < 2:
        return 0.0
    return float(values.std(ddof=1) / math.sqrt(len(values)))


def summarize(traces: Sequence[Trace], delta: Number, type_index: int) -> TypeStats:
    payoffs = np.array([t.payoff for t in traces], dtype=float)
    alphas = [discounted_frequency(t, delta).as_tuple() for t in traces]
    alpha_arr = np.array(alphas, dtype=float)
    absorbed = np.array([t.absorption_period for t in traces if t.absorption_period is not None], dtype=float)
    counts: Dict[int, int] = {}
    for t in traces:
        counts[t.class2_count] = counts.get(t.class2_count, 0) + 1
    return TypeStats(
        type_index=type_index,
        n_paths=len(traces),
        mean_payoff=float(payoffs.mean()),
        se_payoff=standard_error(payoffs),
        alpha=tuple(float(x) for x in alpha_arr.mean(axis=0)),
        mean_absorption=float(absorbed.mean()) if len(absorbed) else None,
        se_absorption=standard_error(absorbed) if len(absorbed) else None,
        class2_counts=dict(sorted(counts.items())),
        eta_hit_fraction=float(np.mean([t.eta_hit_one for t in traces])),
        truncated=sum(1 for t in traces if not t.absorbed),
        kl_sums=tuple(t.kl_sum for t in traces),
        payoffs=tuple(float(x) for x in payoffs),
        path_alphas=tuple(tuple(float(x) for x in a) for a in alphas),
    )


def run_experiment(spec: GameSpec, consts: DerivedConstants, n_paths: int, horizon: Optional[int] = None,
                   seed0: int = 0, workers: int = 1, keep_traces: bool = False,
                   types: Optional[Sequence[int]] = None) -> ExperimentStats:
    """Simulate ``n_paths`` paths per type and aggregate them."""
    if n_paths < 1:
        raise ValueError("n_paths must be at least 1")
    horizon = default_horizon(spec.delta) if horizon is None else horizon
    types = list(range(spec.m)) if types is None else list(types)
    stats = ExperimentStats(n_paths=n_paths, horizon=horizon, seed0=seed0, per_type=[])
    for j in types:
        traces = simulate_paths(spec, consts, j, n_paths, horizon, seed0, record=False, workers=workers)
        summary = summarize(traces, spec.delta, j)
        stats.per_type.append(summary)
        if keep_traces:
            stats.traces[j] = traces
        logger.info(
            f"Type {j + 1}: mean payoff {summary.mean_payoff:.6f} +/- {summary.se_payoff:.6f}, "
            f"mean absorption {summary.mean_absorption}, truncated {summary.truncated}"
        )
    return stats
