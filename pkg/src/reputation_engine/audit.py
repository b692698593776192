"""Finite checks of the constructed equilibrium.

Each audit returns an ``AuditReport`` made of named checks. A check records
how many states, paths or sequences it examined, the worst measured value,
the tolerance it was held to and up to ``MAX_WITNESSES`` failing witnesses.
State audits work on ``StateSample`` lists from ``collect_states``; every
sample carries the automaton that produced it, so exact and real samples
can be audited side by side.
"""
import logging
import math
from dataclasses import asdict, dataclass, field, replace
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .constants import DerivedConstants, derive_constants
from .equilibrium import (
    INDIFFERENT,
    STRICT_H,
    STRICT_L,
    EqState,
    EquilibriumAutomaton,
    HistoryClass,
    Prescription,
)
from .errors import LengthTooLarge
from .game import GameSpec, OutcomeDist, gamma_weights, outcome_payoff, v_of_gamma
from .numeric import Number, as_number, ceil_int, total
from .simulator import Trace, default_horizon, discounted_frequency, simulate_paths, standard_error

logger = logging.getLogger(__name__)

MAX_WITNESSES = 20
MAX_FRONTLOAD_LEN = 20
ACTIVE = (HistoryClass.CLASS1, HistoryClass.CLASS2)

# value <= tolerance
GAP = "gap"
# value > tolerance
MARGIN = "margin"
# value >= tolerance
FLOOR = "floor"

# guarantee each check stands for; mode suffixes are stripped before lookup
ANCHORS = {
    "seller-indifference": "seller one-shot deviation",
    "seller-strict-preference": "seller one-shot deviation",
    "seller-best-reply": "seller one-shot deviation",
    "class3-compliance": "schedule compliance",
    "promise-keeping-local": "promise keeping",
    "promise-keeping-mc": "promise keeping",
    "promise-keeping-recursive": "promise keeping",
    "buyer-trust": "buyer best reply",
    "buyer-indifference": "buyer best reply",
    "buyer-distrust": "buyer best reply",
    "belief-martingale": "belief martingale",
    "weight-simplex": "weight simplex",
    "belief-floor": "belief floor",
    "h-weight-floor": "H-weight floor",
    "type-ordering": "type ordering",
    "kl-budget": "merging bound",
    "kl-support": "merging bound",
    "kl-period-count": "merging bound",
    "ratio-lower": "frequency ratio bound",
    "ratio-upper": "frequency ratio bound",
    "middle-type-window": "middle-type frequency pin",
    "revealed-h-frequency": "revelation frequency",
    "frontload-bound": "frontload bound",
    "pure-prescription-witness": "non-stationary behavior",
    "varying-prescription-witness": "non-stationary behavior",
    "absorption": "finite learning phase",
    "class2-cap": "finite learning phase",
    "theta1-payoff-cap": "theta_1 payoff cap",
    "revelation-positive": "revelation frequency",
    "payoff-accounting": "promise keeping",
    "trust-before-absorption": "trust-return conditions",
}


def anchor_of(name: str) -> str:
    return ANCHORS[name.split("[", 1)[0]]


@dataclass
class CheckResult:
    """Verdict of one check.

    For ``gap`` checks the worst value is the largest measurement; for
    ``margin`` and ``floor`` checks it is the smallest.
    """

    name: str
    claim: str
    kind: str
    examined: int
    worst: Optional[Number]
    tolerance: Number
    passed: bool
    failures: int = 0
    witnesses: List[Dict[str, Any]] = field(default_factory=list)
    notes: List[str] = field(default_factory=list)
    details: Dict[str, Any] = field(default_factory=dict)
    skipped: bool = False
    anchor: str = ""

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass
class AuditReport:
    checks: List[CheckResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failing(self) -> List[CheckResult]:
        return [c for c in self.checks if not c.passed]

    def check(self, name: str) -> CheckResult:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def merge(self, other: "AuditReport") -> "AuditReport":
        return AuditReport(self.checks + other.checks)

    def to_dict(self) -> Dict[str, Any]:
        return {"passed": self.passed, "checks": [c.to_dict() for c in self.checks]}


class Check:
    """Accumulates observations of one named check."""

    def __init__(self, name: str, claim: str, tol: Number, kind: str = GAP):
        self.name = name
        self.claim = claim
        self.tol = tol
        self.kind = kind
        self.anchor = anchor_of(name)
        self.examined = 0
        self.worst: Optional[Number] = None
        self.failures = 0
        self.witnesses: List[Dict[str, Any]] = []
        self.notes: List[str] = []
        self.details: Dict[str, Any] = {}

    def ok(self, value: Number) -> bool:
        if self.kind == GAP:
            return value <= self.tol
        if self.kind == MARGIN:
            return value > self.tol
        return value >= self.tol

    def observe(self, value: Number, witness: Optional[Mapping[str, Any]] = None) -> bool:
        self.examined += 1
        if self.worst is None or (value > self.worst if self.kind == GAP else value < self.worst):
            self.worst = value
        good = self.ok(value)
        if not good:
            self.failures += 1
            if len(self.witnesses) < MAX_WITNESSES:
                self.witnesses.append({"value": value, **(witness or {})})
        return good

    def result(self) -> CheckResult:
        passed = self.failures == 0
        if not passed:
            logger.error(f"Check {self.name} failed on {self.failures} of {self.examined} items (worst {self.worst})")
        return CheckResult(
            name=self.name, claim=self.claim, kind=self.kind, examined=self.examined, worst=self.worst,
            tolerance=self.tol, passed=passed, failures=self.failures, witnesses=self.witnesses,
            notes=self.notes, details=self.details,
            anchor=self.anchor,
        )


def skipped(name: str, claim: str, note: str) -> CheckResult:
    logger.warning(f"Check {name} skipped: {note}")
    return CheckResult(name=name, claim=claim, kind=GAP, examined=0, worst=None, tolerance=0,
                       passed=True, notes=[note], skipped=True, anchor=anchor_of(name))


@dataclass
class AuditSettings:
    depth: int = 14
    n_sampled: int = 10_000
    max_depth: int = 200
    n_states: int = 100
    recursion_depth: int = 8
    tol: float = 0.01
    kl_eps: float = 0.01
    freq_eps: Optional[float] = None
    window: float = 0.05
    max_len: int = 12
    frontload_delta: Optional[float] = None
    n_paths: int = 2000
    horizon: Optional[int] = None
    seed: int = 0
    workers: int = 1


# state collection

@dataclass(frozen=True)
class StateSample:
    history: str
    state: EqState
    automaton: EquilibriumAutomaton


def describe(sample: StateSample) -> Dict[str, Any]:
    state = sample.state
    return {
        "history": sample.history,
        "class": state.cls.value,
        "eta": state.eta,
        "weights": list(state.weights),
        "support": [j + 1 for j in state.support],
        "bar_theta": state.bar_theta + 1,
        "l": state.l,
    }


def _children(automaton: EquilibriumAutomaton, state: EqState,
              prescription: Prescription) -> List[Tuple[str, EqState]]:
    probs = prescription.outcome_probabilities()
    return [(y, automaton.transition(state, y, prescription)) for y in ("N", "H", "L") if probs[y] > 0]


def collect_states(automaton: EquilibriumAutomaton, depth: int = 14, n_sampled: int = 0,
                   max_depth: int = 200, seed: int = 0,
                   sample_automaton: Optional[EquilibriumAutomaton] = None) -> List[StateSample]:
    """On-path states: every history up to ``depth`` plus sampled deeper ones.

    Sampled walks draw each period's outcome from a randomly chosen supported
    type's mixture and target depths spread evenly over (depth, max_depth]. A
    walk that absorbs early contributes its last active state and the
    absorbing one. ``sample_automaton`` lets exact runs sample in real mode.
    """
    samples: List[StateSample] = []
    frontier = [("", automaton.initial_state())]
    for level in range(depth + 1):
        next_frontier = []
        for history, state in frontier:
            samples.append(StateSample(history, state, automaton))
            if level == depth or state.off_path:
                continue
            prescription = automaton.prescribe(state)
            next_frontier.extend((history + y, nxt) for y, nxt in _children(automaton, state, prescription))
        frontier = next_frontier
    exhaustive = len(samples)
    if n_sampled > 0 and max_depth > depth:
        walker = sample_automaton or automaton
        rng = np.random.default_rng(seed)
        span = max_depth - depth
        for i in range(n_sampled):
            target = depth + 1 + (i % span)
            history, state = "", walker.initial_state()
            last_active: Optional[Tuple[str, EqState]] = None
            for _ in range(target):
                if state.cls not in ACTIVE:
                    break
                last_active = (history, state)
                prescription = walker.prescribe(state)
                j = state.support[int(rng.integers(len(state.support)))]
                if prescription.buyer_action != "T":
                    y = "N"
                else:
                    y = "H" if rng.random() < float(prescription.h_prob[j]) else "L"
                history += y
                state = walker.transition(state, y, prescription)
            if state.cls not in ACTIVE and last_active is not None:
                samples.append(StateSample(last_active[0], last_active[1], walker))
            samples.append(StateSample(history, state, walker))
    logger.info(f"Collected {exhaustive} states exhaustively to depth {depth} and {len(samples) - exhaustive} sampled")
    return samples


def _sampling_automaton(spec: GameSpec, automaton: EquilibriumAutomaton) -> EquilibriumAutomaton:
    """Real-mode twin of an exact automaton, used for deep walks."""
    if not spec.exact or type(automaton) is not EquilibriumAutomaton:
        return automaton
    real = spec.as_real()
    return EquilibriumAutomaton(real, derive_constants(real, strict=False), check_delta=False)


def _equality_tol(automaton: EquilibriumAutomaton) -> float:
    return 0.0 if automaton.exact else 1e-9


def _floor_tol(automaton: EquilibriumAutomaton) -> float:
    return 0.0 if automaton.exact else -1e-12


def _strict_tol(automaton: EquilibriumAutomaton) -> float:
    return 0.0 if automaton.exact else 1e-12


def _group(samples: Sequence[StateSample]) -> Dict[bool, List[StateSample]]:
    groups: Dict[bool, List[StateSample]] = {}
    for sample in samples:
        groups.setdefault(sample.automaton.exact, []).append(sample)
    return groups


def _mode_suffix(exact: bool, groups: Dict[bool, List[StateSample]]) -> str:
    if len(groups) < 2:
        return ""
    return "[exact]" if exact else "[real]"


# incentive audits

def audit_local_ic(spec: GameSpec, consts: DerivedConstants, depth: int = 14, n_sampled: int = 10_000,
                   max_depth: int = 200, seed: int = 0, automaton: Optional[EquilibriumAutomaton] = None,
                   samples: Optional[Sequence[StateSample]] = None) -> AuditReport:
    """One-shot deviation checks at every collected on-path state.

    Values after H and L come from the stored continuation weights, so a
    check costs one transition per outcome. Exact specs are enumerated
    exactly to ``depth`` and sampled beyond it in real mode; each group is
    held to its own mode's tolerance.
    """
    automaton = automaton or EquilibriumAutomaton(spec, consts)
    if samples is None:
        samples = collect_states(automaton, depth, n_sampled, max_depth, seed, _sampling_automaton(spec, automaton))
    report = AuditReport()
    groups = _group(samples)
    for exact, group in groups.items():
        report = report.merge(_local_ic(group, _mode_suffix(exact, groups)))
    for c in report.checks:
        c.notes.append(f"coverage: {len(samples)} states, exhaustive to depth {depth}, "
                       f"{n_sampled} sampled walks up to depth {max_depth}")
    return report


def _local_ic(samples: Sequence[StateSample], suffix: str) -> AuditReport:
    reference = samples[0].automaton
    eq_tol, strict_tol = _equality_tol(reference), _strict_tol(reference)
    indifference = Check("seller-indifference" + suffix, "types tagged indifferent are indifferent", eq_tol)
    strict = Check("seller-strict-preference" + suffix, "types tagged strict strictly prefer their action",
                   strict_tol, MARGIN)
    best_reply = Check("seller-best-reply" + suffix, "every action played with positive probability is a best reply",
                       eq_tol)
    compliance = Check("class3-compliance" + suffix, "following the schedule beats deviating into punishment",
                       strict_tol, MARGIN)
    promise = Check("promise-keeping-local" + suffix, "one-step expected value equals the promised value", eq_tol)
    for sample in samples:
        automaton, state = sample.automaton, sample.state
        if state.off_path:
            continue
        prescription = automaton.prescribe(state)
        if prescription.buyer_action != "T":
            continue
        delta = automaton.delta
        next_h = automaton.transition(state, "H", prescription)
        next_l = automaton.transition(state, "L", prescription)
        for j in state.support:
            theta = automaton.thetas[j]
            value_h = (1 - delta) * outcome_payoff(theta, "H") + delta * automaton.continuation_value(next_h, j)
            value_l = (1 - delta) * outcome_payoff(theta, "L") + delta * automaton.continuation_value(next_l, j)
            gap = value_h - value_l
            h = prescription.h_prob[j]
            tag = prescription.tags[j]
            witness = {**describe(sample), "type": j + 1, "tag": tag, "h_prob": h,
                       "value_H": value_h, "value_L": value_l}
            if state.cls is HistoryClass.CLASS3:
                compliance.observe(gap, witness)
            elif tag == INDIFFERENT:
                indifference.observe(abs(gap), witness)
            elif tag == STRICT_H:
                strict.observe(gap, witness)
            elif tag == STRICT_L:
                strict.observe(-gap, witness)
            violation = max(-gap if h > 0 else 0, gap if h < 1 else 0, 0)
            best_reply.observe(violation, witness)
            expected = h * value_h + (1 - h) * value_l
            promise.observe(abs(expected - automaton.continuation_value(state, j)), witness)
    return AuditReport([c.result() for c in (indifference, strict, best_reply, compliance, promise)])


def audit_buyer_ic(samples: Sequence[StateSample]) -> AuditReport:
    """The buyer trusts only where H is at least as likely as gamma*."""
    report = AuditReport()
    groups = _group(samples)
    for exact, group in groups.items():
        suffix = _mode_suffix(exact, groups)
        reference = group[0].automaton
        trust = Check("buyer-trust" + suffix, "P(H) >= gamma* wherever the buyer trusts", _floor_tol(reference), FLOOR)
        pinned = Check("buyer-indifference" + suffix, "P(H) = gamma* at unclamped Class-1 states",
                       0 if exact else 1e-12)
        distrust = Check("buyer-distrust" + suffix, "P(H) = 0 wherever the buyer does not trust", 0)
        for sample in group:
            automaton, state = sample.automaton, sample.state
            prescription = automaton.prescribe(state)
            aggregate = total(state.posterior[j] * prescription.h_prob[j] for j in state.support)
            witness = {**describe(sample), "p_H": aggregate}
            if prescription.buyer_action == "T":
                trust.observe(aggregate - automaton.gstar, witness)
                if state.cls is HistoryClass.CLASS1 and not prescription.clamped:
                    pinned.observe(abs(aggregate - automaton.gstar), witness)
            else:
                distrust.observe(aggregate, witness)
        report = report.merge(AuditReport([trust.result(), pinned.result(), distrust.result()]))
    return report


def audit_martingale(samples: Sequence[StateSample]) -> AuditReport:
    """Expected next-period belief equals the current belief at active states."""
    report = AuditReport()
    groups = _group(samples)
    for exact, group in groups.items():
        check = Check("belief-martingale" + _mode_suffix(exact, groups),
                      "E[eta'] = eta at Class-1 and Class-2 states", _equality_tol(group[0].automaton))
        for sample in group:
            automaton, state = sample.automaton, sample.state
            if state.cls not in ACTIVE:
                continue
            prescription = automaton.prescribe(state)
            probs = prescription.outcome_probabilities()
            expected = total(probs[y] * automaton.transition(state, y, prescription).eta
                             for y in ("N", "H", "L") if probs[y] > 0)
            check.observe(abs(expected - state.eta), {**describe(sample), "expected_eta": expected})
        report = report.merge(AuditReport([check.result()]))
    return report


def audit_state_bounds(samples: Sequence[StateSample]) -> AuditReport:
    """Simplex weights, the belief floor, the H-weight floor and the type ordering."""
    report = AuditReport()
    groups = _group(samples)
    for exact, group in groups.items():
        suffix = _mode_suffix(exact, groups)
        reference = group[0].automaton
        floor_tol = _floor_tol(reference)
        simplex = Check("weight-simplex" + suffix, "weights stay on the simplex", _equality_tol(reference))
        belief = Check("belief-floor" + suffix, "eta >= eta* at active states", floor_tol, FLOOR)
        h_floor = Check("h-weight-floor" + suffix, "p^H >= Q_floor at active states", floor_tol, FLOOR)
        ordering = Check("type-ordering" + suffix,
                         "theta_1 plays H at least as often as any other type at Class 1", floor_tol, FLOOR)
        for sample in group:
            automaton, state = sample.automaton, sample.state
            witness = describe(sample)
            simplex.observe(max(abs(total(state.weights) - 1), -min(min(state.weights), 0)), witness)
            if state.cls not in ACTIVE:
                continue
            belief.observe(state.eta - automaton.eta_star, witness)
            h_floor.observe(state.p_h - automaton.consts.Q_floor, witness)
            if state.cls is HistoryClass.CLASS1 and 0 in state.support:
                prescription = automaton.prescribe(state)
                for j in state.support[1:]:
                    ordering.observe(prescription.h_prob[0] - prescription.h_prob[j], {**witness, "type": j + 1})
        report = report.merge(AuditReport([simplex.result(), belief.result(), h_floor.result(), ordering.result()]))
    return report


# path audits

def expected_value(automaton: EquilibriumAutomaton, state: EqState, type_index: int, depth: int) -> Number:
    """Value of ``type_index`` following its prescription for ``depth`` periods, then the stored value."""
    if depth == 0 or state.off_path:
        return automaton.continuation_value(state, type_index)
    prescription = automaton.prescribe(state)
    delta, theta = automaton.delta, automaton.thetas[type_index]
    value = 0 * delta
    for y, prob in prescription.type_probabilities(type_index).items():
        if prob <= 0:
            continue
        nxt = automaton.transition(state, y, prescription)
        value += prob * ((1 - delta) * outcome_payoff(theta, y) + delta * expected_value(automaton, nxt, type_index,
                                                                                          depth - 1))
    return value


def audit_promise_keeping(spec: GameSpec, consts: DerivedConstants, n_paths: int = 2000,
                          horizon: Optional[int] = None, tol: float = 0.01, n_states: int = 100,
                          recursion_depth: int = 8, seed: int = 0,
                          automaton: Optional[EquilibriumAutomaton] = None,
                          traces: Optional[Mapping[int, Sequence[Trace]]] = None,
                          samples: Optional[Sequence[StateSample]] = None) -> AuditReport:
    """Realized payoffs average to v(gamma), and stored values match their expansion.

    The recursive part expands each state's expected value ``recursion_depth``
    periods ahead with the stored values at the leaves, so any drift between
    transitions and stored values shows up at full size.
    """
    automaton = automaton or EquilibriumAutomaton(spec, consts)
    if horizon is None:
        horizon = default_horizon(spec.delta, tol / 10)
    if traces is None:
        traces = {j: simulate_paths(spec, consts, j, n_paths, horizon, seed) for j in range(spec.m)}
    promised = v_of_gamma(spec, spec.gamma)
    monte_carlo = Check("promise-keeping-mc", "mean realized payoff within tol + 3 SE of v(gamma)", tol)
    for j, paths in sorted(traces.items()):
        payoffs = np.array([t.payoff for t in paths], dtype=float)
        mean, se = float(payoffs.mean()), standard_error(payoffs)
        monte_carlo.observe(abs(mean - float(promised[j])) - 3 * se,
                            {"type": j + 1, "mean": mean, "se": se, "promised": promised[j], "paths": len(paths)})
        monte_carlo.details[f"type_{j + 1}"] = {"mean": mean, "se": se, "promised": promised[j]}
    monte_carlo.notes.append(f"horizon {horizon}; unresolved tail weight at most {float(spec.delta) ** horizon:.3g}")

    if samples is None:
        samples = collect_states(automaton, 0, n_states, max(2, 4 * recursion_depth), seed)
    rng = np.random.default_rng(seed)
    chosen = [samples[0]]
    if len(samples) > 1:
        picks = rng.choice(np.arange(1, len(samples)), size=min(n_states, len(samples) - 1), replace=False)
        chosen += [samples[int(i)] for i in sorted(picks)]
    recursive = Check("promise-keeping-recursive", "stored values equal their expected expansion",
                      _equality_tol(automaton))
    for sample in chosen:
        for j in sample.state.support:
            stored = sample.automaton.continuation_value(sample.state, j)
            expanded = expected_value(sample.automaton, sample.state, j, recursion_depth)
            recursive.observe(abs(expanded - stored), {**describe(sample), "type": j + 1, "stored": stored,
                                                      "expanded": expanded})
    recursive.notes.append(f"{len(chosen)} states expanded {recursion_depth} periods ahead")
    return AuditReport([monte_carlo.result(), recursive.result()])


def kl_period_bound(eps: float, prior_j: Number) -> int:
    """Expected number of periods whose prediction error exceeds eps is at most this."""
    if eps <= 0:
        raise ValueError(f"eps={eps} must be positive")
    return ceil_int(-math.log(float(prior_j)) / eps)


@dataclass
class KlLedger:
    type_index: int
    budget: float
    mean_sum: float
    se_sum: float
    eps: float
    period_bound: int
    mean_count_above: float
    max_count_above: int
    n_paths: int

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def kl_ledger(type_index: int, paths: Sequence[Trace], prior_j: Number, eps: float) -> KlLedger:
    sums = np.array([t.kl_sum for t in paths], dtype=float)
    counts = np.array([sum(1 for k in t.kl_terms if k > eps) for t in paths], dtype=float)
    return KlLedger(
        type_index=type_index,
        budget=-math.log(float(prior_j)),
        mean_sum=float(sums.mean()),
        se_sum=standard_error(sums) if np.all(np.isfinite(sums)) else math.inf,
        eps=eps,
        period_bound=kl_period_bound(eps, prior_j),
        mean_count_above=float(counts.mean()),
        max_count_above=int(counts.max()) if len(counts) else 0,
        n_paths=len(paths),
    )


def audit_kl_budget(traces: Mapping[int, Sequence[Trace]], prior: Sequence[Number],
                    eps: float = 0.01) -> AuditReport:
    """Per type, the buyer's cumulative prediction error stays within -ln prior."""
    budget = Check("kl-budget", "mean path KL sum <= -ln prior + 3 SE", 0)
    support = Check("kl-support", "the true type never plays an action predicted with probability 0", 0)
    periods = Check("kl-period-count", "mean count of periods with KL > eps <= T(eps) + 3 SE", 0)
    for j, paths in sorted(traces.items()):
        ledger = kl_ledger(j, paths, prior[j], eps)
        infinite = sum(1 for t in paths if not math.isfinite(t.kl_sum))
        support.observe(infinite, {"type": j + 1})
        if infinite:
            continue
        budget.observe(ledger.mean_sum - 3 * ledger.se_sum - ledger.budget, ledger.to_dict())
        counts = np.array([sum(1 for k in t.kl_terms if k > eps) for t in paths], dtype=float)
        periods.observe(ledger.mean_count_above - 3 * standard_error(counts) - ledger.period_bound, ledger.to_dict())
        budget.details[f"type_{j + 1}"] = ledger.to_dict()
    return AuditReport([budget.result(), support.result(), periods.result()])


def frequency_targets(thetas: Sequence[Number], gstar: Number) -> OutcomeDist:
    """Discounted outcome frequencies pinned for middle types near v*."""
    return OutcomeDist(*gamma_weights(thetas[0], gstar))


def audit_frequencies(traces: Mapping[int, Sequence[Trace]], spec: GameSpec, consts: DerivedConstants,
                      eps: Optional[float] = None, window: float = 0.05) -> AuditReport:
    """H:L ratio bounds per path and outcome-frequency windows for middle types.

    The construction delivers v(gamma) with gamma above gamma*, so ratio
    bounds default to eps = 2 (gamma - gamma*) and the report states it.
    """
    names = ("ratio-lower", "ratio-upper", "middle-type-window", "revealed-h-frequency")
    if spec.m < 2:
        return AuditReport([skipped(n, "frequency bounds", "needs at least two types") for n in names])
    gstar = float(consts.gstar)
    slack = float(spec.gamma) - gstar
    eps = 2 * slack if eps is None else eps
    lower_bound = (gstar - eps) / (1 - gstar + eps)
    upper_bound = (gstar + eps) / (1 - gstar - eps) if 1 - gstar - eps > 0 else math.inf
    lower = Check("ratio-lower", "alpha(H)/alpha(L) >= (g*-eps)/(1-g*+eps) for every type below the top",
                  0, FLOOR)
    upper = Check("ratio-upper", "alpha(H)/alpha(L) <= (g*+eps)/(1-g*-eps) for every type above theta_1", 0)
    middle = Check("middle-type-window", "middle types' mean frequencies within the window of the pin", window)
    revealed = Check("revealed-h-frequency", "theta_1 paths that reveal play H more often than v(gamma) weights",
                     0, MARGIN)
    target = frequency_targets(spec.thetas, consts.gstar)
    start_h = float(gamma_weights(spec.thetas[0], spec.gamma)[1])
    for j, paths in sorted(traces.items()):
        alphas = [discounted_frequency(t, spec.delta) for t in paths]
        for trace, alpha in zip(paths, alphas):
            ratio = float(alpha.h) / float(alpha.l) if alpha.l > 0 else math.inf
            witness = {"type": j + 1, "seed": trace.seed, "alpha": list(alpha.as_tuple())}
            if j < spec.m - 1:
                lower.observe(ratio - lower_bound, witness)
            if j > 0 and math.isfinite(upper_bound):
                upper.observe(ratio - upper_bound, witness)
        if 0 < j < spec.m - 1:
            mean = np.array([a.as_tuple() for a in alphas], dtype=float).mean(axis=0)
            for label, value, pin in zip(("N", "H", "L"), mean, target.as_tuple()):
                middle.observe(abs(float(value) - float(pin)), {"type": j + 1, "outcome": label,
                                                               "mean": float(value), "pin": pin})
        if j == 0:
            hits = [float(a.h) for t, a in zip(paths, alphas) if t.eta_hit_one]
            if hits:
                revealed.observe(float(np.mean(hits)) - start_h, {"paths": len(hits), "v_gamma_h_weight": start_h})
            else:
                revealed.notes.append("no theta_1 path revealed within the sample")
    for c in (lower, upper, middle, revealed):
        c.notes.append(f"eps={eps:.6g}; the construction targets gamma={float(spec.gamma):.6g}, "
                       f"{slack:.6g} above gamma*")
    results = [lower.result(), upper.result()]
    if spec.m < 3:
        results.append(skipped("middle-type-window", middle.claim, "no middle type"))
    else:
        results.append(middle.result())
    results.append(revealed.result())
    return AuditReport(results)


def audit_frontload_bound(spec: GameSpec, consts: DerivedConstants, delta: Optional[Number] = None,
                          max_len: int = 12, automaton: Optional[EquilibriumAutomaton] = None) -> AuditReport:
    """Exhaustive check that early H play is offset by L play while in Class 1.

    Along every H/L sequence from the prior that keeps each prefix in Class 1,
    the discounted H weight may exceed gamma_tilde/(1-gamma_tilde) times the
    discounted L weight by at most 1 - delta^X, X being the number of
    consecutive H that take the prior belief to 1. The same check with T in
    place of X is reported alongside.
    """
    if max_len > MAX_FRONTLOAD_LEN:
        raise LengthTooLarge(f"max_len={max_len} exceeds {MAX_FRONTLOAD_LEN}")
    if max_len < 0:
        raise ValueError(f"max_len={max_len} must be nonnegative")
    if automaton is None:
        local = spec if delta is None else replace(spec, delta=as_number(delta, spec.exact))
        automaton = EquilibriumAutomaton(local, consts, check_delta=False)
    d = automaton.delta
    ratio = consts.gamma_tilde / (1 - consts.gamma_tilde)
    check = Check("frontload-bound", "H weight <= (1 - delta^X) + L weight * gamma_tilde/(1-gamma_tilde)",
                  0 if automaton.exact else -1e-12, FLOOR)
    with_t = 0
    clamped = 0
    left = 0
    root = automaton.initial_state()
    if root.cls is not HistoryClass.CLASS1:
        return AuditReport([skipped(check.name, check.claim, "initial state is not in Class 1")])
    slack_x, slack_t = 1 - d ** consts.X, 1 - d ** consts.T
    zero = 0 * d
    stack: List[Tuple[str, EqState, Number, Number, Number]] = [("", root, zero, zero, 1 + zero)]
    while stack:
        seq, state, h_weight, l_weight, discount = stack.pop()
        if len(seq) == max_len:
            continue
        prescription = automaton.prescribe(state)
        for y in (("N",) if prescription.waiting else ("L", "H")):
            nxt = automaton.transition(state, y, prescription)
            if nxt.cls is not HistoryClass.CLASS1:
                if y == "H" and prescription.clamped:
                    clamped += 1
                else:
                    left += 1
                continue
            h_new = h_weight + ((1 - d) * discount if y == "H" else zero)
            l_new = l_weight + ((1 - d) * discount if y == "L" else zero)
            check.observe(slack_x + l_new * ratio - h_new, {"sequence": seq + y, "H_weight": h_new,
                                                            "L_weight": l_new})
            if slack_t + l_new * ratio - h_new < check.tol:
                with_t += 1
            stack.append((seq + y, nxt, h_new, l_new, discount * d))
    check.details = {"delta": d, "max_len": max_len, "X": consts.X, "T": consts.T,
                     "excluded_by_clamp": clamped, "excluded_leaving_class1": left,
                     "violations_with_T": with_t}
    if with_t:
        check.notes.append(f"{with_t} sequences would violate the bound with slack 1 - delta^T (T={consts.T})")
    return AuditReport([check.result()])


def audit_behavior(spec: GameSpec, consts: DerivedConstants, samples: Sequence[StateSample],
                   traces: Optional[Mapping[int, Sequence[Trace]]] = None) -> AuditReport:
    """Witnesses that no type's strategy is stationary or completely mixed."""
    pure = Check("pure-prescription-witness", "each type has an on-path state with a pure prescription", 0, MARGIN)
    varying = Check("varying-prescription-witness", "each type has two on-path states with different prescriptions",
                    1, MARGIN)
    if spec.m < 2:
        return AuditReport([skipped(c.name, c.claim, "needs at least two types") for c in (pure, varying)])
    for j in range(spec.m):
        pure_active: Optional[Dict[str, Any]] = None
        pure_any: Optional[Dict[str, Any]] = None
        seen: Dict[str, Dict[str, Any]] = {}
        for sample in samples:
            state = sample.state
            if state.off_path or j not in state.support:
                continue
            prescription = sample.automaton.prescribe(state)
            if prescription.buyer_action != "T":
                continue
            h = prescription.h_prob[j]
            if h in (0, 1):
                if pure_any is None:
                    pure_any = {**describe(sample), "h_prob": h}
                if pure_active is None and state.cls in ACTIVE:
                    pure_active = {**describe(sample), "h_prob": h}
            key = f"{float(h):.12g}"
            if key not in seen and len(seen) < 2:
                seen[key] = {**describe(sample), "h_prob": h}
        found = pure_active or pure_any
        pure.observe(1 if found else 0, {"type": j + 1})
        varying.observe(len(seen), {"type": j + 1})
        pure.details[f"type_{j + 1}"] = found
        varying.details[f"type_{j + 1}"] = list(seen.values())
        if found is not None and pure_active is None:
            pure.notes.append(f"type {j + 1}: pure prescription found only after absorption")
    results = [pure.result(), varying.result()]
    if traces is not None:
        prefixes = {t.reveal_prefix for paths in traces.values() for t in paths if t.reveal_prefix is not None}
        results[0].details["revelation_events"] = len(prefixes)
        results[0].notes.append(f"{len(prefixes)} distinct histories first reveal theta_1 (N={consts.N})")
    return AuditReport(results)


def audit_learning_phase(traces: Mapping[int, Sequence[Trace]], spec: GameSpec,
                         consts: DerivedConstants) -> AuditReport:
    """Absorption, the Class-2 cap, the theta_1 payoff cap and payoff accounting."""
    absorbed = Check("absorption", "every path reaches Class 3 within the horizon", 0)
    class2 = Check("class2-cap", f"Class-2 periods per path <= M = {consts.M}", consts.M)
    cap = Check("theta1-payoff-cap", "theta_1's mean payoff <= 1 - theta_1 + 3 SE", 1e-9)
    revealed = Check("revelation-positive", "a positive fraction of theta_1 paths reveal theta_1", 0, MARGIN)
    accounting = Check("payoff-accounting", "payoff = (1-theta) alpha(H) + alpha(L) on every path", 1e-9)
    trusted = Check("trust-before-absorption", "the buyer trusts in every active period outside waiting periods", 0)
    for j, paths in sorted(traces.items()):
        theta = float(spec.thetas[j])
        for t in paths:
            witness = {"type": j + 1, "seed": t.seed}
            absorbed.observe(0 if t.absorbed else 1, witness)
            class2.observe(t.class2_count, witness)
            alpha = discounted_frequency(t, spec.delta)
            accounting.observe(abs(t.payoff - float(alpha.payoff(theta))), witness)
            for record in t.records:
                if record.cls in ACTIVE:
                    trusted.observe(0 if record.buyer_action == "T" or record.waiting else 1,
                                    {**witness, "period": record.period})
        if j == 0 and paths:
            payoffs = np.array([t.payoff for t in paths], dtype=float)
            cap.observe(float(payoffs.mean()) - 3 * standard_error(payoffs) - (1 - theta),
                        {"mean": float(payoffs.mean())})
            revealed.observe(float(np.mean([t.eta_hit_one for t in paths])), {"paths": len(paths)})
            absorbed_at = [t.absorption_period for t in paths if t.absorption_period is not None]
            if absorbed_at:
                absorbed.details["theta1_mean_absorption"] = float(np.mean(absorbed_at))
    results = [absorbed.result(), class2.result(), cap.result(), revealed.result(), accounting.result()]
    if trusted.examined:
        results.append(trusted.result())
    return AuditReport(results)


def run_audit_suite(spec: GameSpec, consts: DerivedConstants,
                    settings: Optional[AuditSettings] = None) -> AuditReport:
    """Every audit on one spec, sharing the collected states and simulated paths."""
    settings = settings or AuditSettings()
    automaton = EquilibriumAutomaton(spec, consts)
    samples = collect_states(automaton, settings.depth, settings.n_sampled, settings.max_depth, settings.seed,
                             _sampling_automaton(spec, automaton))
    report = audit_local_ic(spec, consts, settings.depth, settings.n_sampled, settings.max_depth,
                            settings.seed, automaton, samples)
    report = report.merge(audit_buyer_ic(samples))
    report = report.merge(audit_martingale(samples))
    report = report.merge(audit_state_bounds(samples))

    horizon = settings.horizon or default_horizon(spec.delta, settings.tol / 10)
    logger.info(f"Simulating {settings.n_paths} paths per type over {horizon} periods")
    traces = {j: simulate_paths(spec, consts, j, settings.n_paths, horizon, settings.seed, workers=settings.workers)
              for j in range(spec.m)}
    report = report.merge(audit_promise_keeping(
        spec, consts, settings.n_paths, horizon, settings.tol, settings.n_states, settings.recursion_depth,
        settings.seed, automaton, traces,
        [s for s in samples if s.automaton is automaton],
    ))
    report = report.merge(audit_kl_budget(traces, spec.prior, settings.kl_eps))
    report = report.merge(audit_frequencies(traces, spec, consts, settings.freq_eps, settings.window))
    report = report.merge(audit_frontload_bound(spec, consts, settings.frontload_delta, settings.max_len))
    report = report.merge(audit_behavior(spec, consts, samples, traces))
    report = report.merge(audit_learning_phase(traces, spec, consts))
    failed = report.failing()
    if failed:
        logger.error(f"Audit failed: {', '.join(c.name for c in failed)}")
    else:
        logger.info(f"Audit passed: {len(report.checks)} checks")
    return report
