"""The constructed seller-optimal equilibrium as a deterministic transition system."""
import enum
import logging
from dataclasses import dataclass, replace
from typing import Dict, Iterator, Optional, Tuple

from .constants import DerivedConstants, delta_error
from .errors import EpsilonTooSmallForDelta, StateOffPath
from .game import GameSpec, gamma_weights, value_from_weights
from .numeric import Number, tolerance, unit

logger = logging.getLogger(__name__)

INDIFFERENT = "indifferent"
STRICT_H = "strict-H"
STRICT_L = "strict-L"


class HistoryClass(str, enum.Enum):
    CLASS1 = "Class1"
    CLASS2 = "Class2"
    CLASS3 = "Class3"
    PUNISH = "Punish"


@dataclass(frozen=True)
class EqState:
    """One node of the equilibrium automaton.

    ``weights`` are (p^N, p^H, p^L). ``fm_target`` and ``fm_cursor`` are set
    from the first Class-3 entry on.
    """

    eta: Number
    posterior: Tuple[Number, ...]
    weights: Tuple[Number, Number, Number]
    cls: HistoryClass
    support: Tuple[int, ...]
    bar_theta: int
    l: int = 0
    fm_target: Optional[Number] = None
    fm_cursor: Optional[int] = None
    period: int = 0

    @property
    def off_path(self) -> bool:
        return self.cls is HistoryClass.PUNISH

    @property
    def p_n(self) -> Number:
        return self.weights[0]

    @property
    def p_h(self) -> Number:
        return self.weights[1]

    @property
    def p_l(self) -> Number:
        return self.weights[2]


@dataclass(frozen=True)
class Prescription:
    buyer_action: str
    h_prob: Dict[int, Number]
    tags: Dict[int, str]
    p_h: Number
    clamped: bool = False
    eta_h: Optional[Number] = None
    eta_l: Optional[Number] = None
    waiting: bool = False

    def outcome_probabilities(self) -> Dict[str, Number]:
        """Buyer's predicted distribution over stage outcomes."""
        if self.buyer_action == "N":
            return {"N": 1, "H": 0, "L": 0}
        return {"N": 0, "H": self.p_h, "L": 1 - self.p_h}

    def type_probabilities(self, type_index: int) -> Dict[str, Number]:
        """Outcome distribution generated by one seller type."""
        if self.buyer_action == "N":
            return {"N": 1, "H": 0, "L": 0}
        h = self.h_prob.get(type_index, 0)
        return {"N": 0, "H": h, "L": 1 - h}


def schedule_emits_h(residual: Number, target: Number, delta: Number) -> bool:
    """Class-3 emission rule.

    N is forced below 1 - delta and H above delta so the residual stays in
    [0, 1]; in between H is emitted while the residual is at or above target.
    """
    if residual < 1 - delta:
        return False
    if residual > delta:
        return True
    return residual >= target


def schedule_step(residual: Number, emitted_h: bool, delta: Number) -> Number:
    if emitted_h:
        return (residual - (1 - delta)) / delta
    return residual / delta


class FmSchedule:
    """Infinite H/N stream whose discounted H-frequency is ``target``.

    Every tail of the stream has discounted H-frequency within
    (1 - delta) / delta of the target.
    """

    def __init__(self, target: Number, delta: Number, epsilon: float):
        if not 0 <= target <= 1:
            raise ValueError(f"schedule target {target} outside [0, 1]")
        if (1 - delta) / delta > epsilon:
            raise EpsilonTooSmallForDelta(
                f"tails of a schedule at delta={float(delta)} drift up to {float((1 - delta) / delta):.3g} > epsilon={epsilon}"
            )
        self.target = target
        self.delta = delta
        self.epsilon = epsilon
        self.residual = target
        self.cursor = 0

    def __iter__(self) -> Iterator[str]:
        return self

    def __next__(self) -> str:
        emit_h = schedule_emits_h(self.residual, self.target, self.delta)
        self.residual = schedule_step(self.residual, emit_h, self.delta)
        self.cursor += 1
        return "H" if emit_h else "N"


def fm_schedule(target_q: Number, delta: Number, epsilon: float) -> FmSchedule:
    return FmSchedule(target_q, delta, epsilon)


class EquilibriumAutomaton:
    """Prescriptions and transitions of the constructed equilibrium.

    At a Class-1 or Class-2 state whose p^H is below the reserve, and where
    an H would not reveal theta_1, the buyer sits out one period (outcome N)
    paid for from p^N. A waiting period leaves the belief alone and only
    re-times N weight, so every path keeps its promised value.
    """

    def __init__(self, spec: GameSpec, consts: DerivedConstants, check_delta: bool = True):
        if check_delta and not consts.delta_ok:
            raise delta_error(consts)
        self.spec = spec
        self.consts = consts
        self.exact = spec.exact
        self.tol = tolerance(self.exact)
        self.zero, self.one = unit(self.exact)
        self.delta = spec.delta
        self.thetas = spec.thetas
        self.gstar = consts.gstar
        self.eta_star = consts.eta_star
        self.up = consts.step_up
        self.down = consts.step_down
        self.reserve = consts.h_reserve

    # state helpers

    def classify(self, weights: Tuple[Number, Number, Number]) -> HistoryClass:
        p_l = weights[2]
        if p_l >= (1 - self.delta) - self.tol:
            return HistoryClass.CLASS1
        if p_l > self.tol:
            return HistoryClass.CLASS2
        return HistoryClass.CLASS3

    def _clean(self, weights: Tuple[Number, ...]) -> Tuple[Number, Number, Number]:
        if self.exact:
            return tuple(weights)  # type: ignore[return-value]
        return tuple(0.0 if abs(w) <= self.tol else w for w in weights)  # type: ignore[return-value]

    def punish_state(self, state: EqState) -> EqState:
        return replace(
            state, weights=(self.one, self.zero, self.zero), cls=HistoryClass.PUNISH,
            fm_target=None, fm_cursor=None, period=state.period + 1,
        )

    def continuation_value(self, state: EqState, type_index: int) -> Number:
        if state.off_path:
            return self.zero
        return value_from_weights(state.weights, self.thetas[type_index])

    def initial_state(self) -> EqState:
        weights = self._clean(gamma_weights(self.thetas[0], self.spec.gamma))
        cls = self.classify(weights)
        state = EqState(
            eta=self.spec.prior[0],
            posterior=tuple(self.spec.prior),
            weights=weights,
            cls=cls,
            support=tuple(range(self.spec.m)),
            bar_theta=self.spec.m - 1,
        )
        if cls is HistoryClass.CLASS3:
            state = self._enter_schedule(state)
        return state

    def _enter_schedule(self, state: EqState) -> EqState:
        p_n, p_h, _ = state.weights
        target = p_h / (p_h + p_n)
        return replace(state, weights=(1 - target, target, self.zero), cls=HistoryClass.CLASS3,
                       fm_target=target, fm_cursor=0)

    # prescriptions

    def class1_beliefs(self, eta: Number) -> Tuple[Number, Number, bool]:
        gap = eta - self.eta_star
        raised = self.up * gap
        clamped = raised >= (1 - self.eta_star) - self.tol
        eta_h = self.one if clamped else self.eta_star + raised
        eta_l = self.eta_star + self.down * gap
        return eta_h, eta_l, clamped

    def can_wait(self, state: EqState) -> bool:
        """p^N can pay for a buyer-N period without lifting theta_1's value above 1 - theta_1."""
        p_n, _, p_l = state.weights
        spare = p_n - (1 - self.delta)
        if spare < -self.tol:
            return False
        theta1 = self.thetas[0]
        return theta1 * p_l <= (1 - theta1) * spare + self.tol

    def _short(self, state: EqState, reserve: Number, minimum: Number) -> bool:
        if state.p_h >= reserve:
            return False
        if self.can_wait(state):
            return True
        if state.p_h < minimum - self.tol:
            raise StateOffPath(f"p^H={state.p_h} cannot fund the next step and p^N={state.p_n} cannot fund a wait")
        return False

    def _wait(self, state: EqState) -> Prescription:
        return Prescription("N", {j: self.zero for j in state.support},
                            {j: STRICT_L for j in state.support}, self.zero, waiting=True)

    def prescribe(self, state: EqState) -> Prescription:
        if state.off_path:
            return Prescription("N", {j: self.zero for j in state.support},
                                {j: STRICT_L for j in state.support}, self.zero)
        if abs(sum(state.weights) - 1) > 1e-9 or min(state.weights) < -1e-9:
            raise StateOffPath(f"weights {state.weights} leave the simplex")
        if not state.support:
            raise StateOffPath("state has an empty support")
        if state.cls is HistoryClass.CLASS1:
            return self._prescribe_class1(state)
        if state.cls is HistoryClass.CLASS2:
            return self._prescribe_class2(state)
        return self._prescribe_class3(state)

    def _prescribe_class1(self, state: EqState) -> Prescription:
        eta = state.eta
        eta_h, eta_l, clamped = self.class1_beliefs(eta)
        if not clamped and self._short(state, self.reserve, 1 - self.delta):
            return self._wait(state)
        p_h = (eta - eta_l) / (eta_h - eta_l)
        h_prob: Dict[int, Number] = {}
        tags: Dict[int, str] = {}
        for j in state.support:
            if j == 0:
                h_prob[j] = p_h * eta_h / eta
                tags[j] = INDIFFERENT
            else:
                h_prob[j] = p_h * (1 - eta_h) / (1 - eta)
                tags[j] = STRICT_L if clamped else INDIFFERENT
        return Prescription("T", h_prob, tags, p_h, clamped, eta_h, eta_l)

    def _prescribe_class2(self, state: EqState) -> Prescription:
        bar = state.bar_theta
        if bar == 0:
            raise StateOffPath("Class-2 state whose only supported type is theta_1")
        if bar >= 2:
            shirk = self.one / (self.consts.kj[bar] - state.l)
        else:
            shirk = min(self.one, (1 - self.gstar) / (1 - state.eta))
        h_prob = {j: (1 - shirk if j == bar else self.one) for j in state.support}
        p_h = sum(state.posterior[j] * h_prob[j] for j in state.support)
        eta_h = state.posterior[0] / p_h
        clamped = eta_h >= 1 - self.tol
        if clamped:
            eta_h = self.one
        needed = (1 - self.delta - state.p_l) / (1 - self.thetas[bar])
        if clamped:
            short = self._short(state, needed, needed)
        else:
            short = self._short(state, max(needed, self.reserve), max(needed, 1 - self.delta))
        if short:
            return self._wait(state)
        tags = {j: STRICT_H for j in state.support}
        tags[bar] = STRICT_L if clamped else INDIFFERENT
        return Prescription("T", h_prob, tags, p_h, clamped, eta_h, self.zero)

    def _prescribe_class3(self, state: EqState) -> Prescription:
        emit_h = schedule_emits_h(state.p_h, state.fm_target, self.delta)
        if emit_h:
            return Prescription("T", {j: self.one for j in state.support},
                                {j: STRICT_H for j in state.support}, self.one)
        return Prescription("N", {j: self.zero for j in state.support},
                            {j: STRICT_L for j in state.support}, self.zero)

    # transitions

    def transition(self, state: EqState, outcome: str, prescription: Optional[Prescription] = None) -> EqState:
        """Next state after ``outcome``; an outcome the buyer predicts with probability 0 leads to Punish."""
        if state.off_path:
            return replace(state, period=state.period + 1)
        if prescription is None:
            prescription = self.prescribe(state)
        if prescription.outcome_probabilities()[outcome] <= 0:
            return self.punish_state(state)
        if prescription.waiting:
            return self._wait_step(state)
        if state.cls is HistoryClass.CLASS3:
            return self._advance_schedule(state, outcome == "H")
        if state.cls is HistoryClass.CLASS1:
            nxt = self._class1_step(state, outcome, prescription)
        else:
            nxt = self._class2_step(state, outcome, prescription)
        return nxt

    def _revealed_top(self, state: EqState) -> EqState:
        """Belief reaches 1 on theta_1: theta_1 keeps its promised value."""
        theta1 = self.thetas[0]
        v1 = self.continuation_value(state, 0)
        q = (v1 - (1 - self.delta) * (1 - theta1)) / self.delta / (1 - theta1)
        posterior = tuple(self.one if j == 0 else self.zero for j in range(self.spec.m))
        nxt = replace(state, eta=self.one, posterior=posterior, weights=self._clean((1 - q, q, self.zero)),
                      support=(0,), bar_theta=0, period=state.period + 1)
        return self._enter_schedule(nxt)

    def _finish(self, state: EqState, weights: Tuple[Number, Number, Number]) -> EqState:
        weights = self._clean(weights)
        nxt = replace(state, weights=weights, cls=self.classify(weights))
        if nxt.cls is HistoryClass.CLASS3:
            nxt = self._enter_schedule(nxt)
        return nxt

    def _wait_step(self, state: EqState) -> EqState:
        delta = self.delta
        p_n, p_h, p_l = state.weights
        nxt = replace(state, period=state.period + 1)
        return self._finish(nxt, ((p_n - (1 - delta)) / delta, p_h / delta, p_l / delta))

    def _class1_step(self, state: EqState, outcome: str, prescription: Prescription) -> EqState:
        delta = self.delta
        p_n, p_h, p_l = state.weights
        if outcome == "H":
            if prescription.clamped:
                return self._revealed_top(state)
            eta_new = prescription.eta_h
            weights = (p_n / delta, (p_h - (1 - delta)) / delta, p_l / delta)
        else:
            eta_new = prescription.eta_l
            weights = (p_n / delta, p_h / delta, (p_l - (1 - delta)) / delta)
        posterior = self._pool_posterior(state, eta_new)
        nxt = replace(state, eta=eta_new, posterior=posterior, period=state.period + 1)
        return self._finish(nxt, weights)

    def _pool_posterior(self, state: EqState, eta_new: Number) -> Tuple[Number, ...]:
        rest = 1 - state.eta
        scale = (1 - eta_new) / rest if rest > 0 else self.zero
        return tuple(eta_new if j == 0 else state.posterior[j] * scale for j in range(self.spec.m))

    def _class2_step(self, state: EqState, outcome: str, prescription: Prescription) -> EqState:
        delta = self.delta
        p_n, p_h, p_l = state.weights
        bar = state.bar_theta
        if outcome == "L":
            # only theta-bar shirks at a Class-2 state
            q = p_h - (1 - delta - p_l) / (1 - self.thetas[bar])
            posterior = tuple(self.one if j == bar else self.zero for j in range(self.spec.m))
            nxt = replace(state, eta=self.zero, posterior=posterior, support=(bar,), bar_theta=bar,
                          l=0, period=state.period + 1)
            weights = self._clean((1 - q / delta, q / delta, self.zero))
            return self._enter_schedule(replace(nxt, weights=weights))
        if prescription.clamped:
            return self._revealed_top(state)
        posterior = tuple(
            state.posterior[j] * prescription.h_prob.get(j, self.zero) / prescription.p_h
            for j in range(self.spec.m)
        )
        support = tuple(j for j in state.support if posterior[j] > 0)
        new_bar = max(support)
        l_new = state.l + 1 if new_bar == bar else 0
        nxt = replace(state, eta=posterior[0], posterior=posterior, support=support, bar_theta=new_bar,
                      l=l_new, period=state.period + 1)
        weights = (p_n / delta, (p_h - (1 - delta)) / delta, p_l / delta)
        return self._finish(nxt, weights)

    def _advance_schedule(self, state: EqState, emitted_h: bool) -> EqState:
        p_h = schedule_step(state.p_h, emitted_h, self.delta)
        if not self.exact:
            p_h = min(1.0, max(0.0, p_h))
        return replace(state, weights=(1 - p_h, p_h, self.zero), fm_cursor=state.fm_cursor + 1,
                       period=state.period + 1)


def initial_state(spec: GameSpec, consts: DerivedConstants) -> EqState:
    return EquilibriumAutomaton(spec, consts).initial_state()


def prescribe(state: EqState, spec: GameSpec, consts: DerivedConstants) -> Prescription:
    return EquilibriumAutomaton(spec, consts, check_delta=False).prescribe(state)


def transition(state: EqState, outcome: str, spec: GameSpec, consts: DerivedConstants) -> EqState:
    return EquilibriumAutomaton(spec, consts, check_delta=False).transition(state, outcome)
