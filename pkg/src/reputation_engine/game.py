"""Stage game, closed-form payoff bounds, payoff variants and assumption checks."""
import itertools
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, FrozenSet, Iterator, List, Optional, Sequence, Tuple

from .errors import (
    GammaOutOfRange,
    NonPositiveParameter,
    ParameterOutOfRange,
    TypeOrderViolation,
)
from .numeric import Number, as_number, is_exact, tolerance, total

logger = logging.getLogger(__name__)

OUTCOMES: Tuple[str, str, str] = ("N", "H", "L")


def _strictly_inside(value: Number, low: Number, high: Number) -> bool:
    return low < value < high


@dataclass(frozen=True)
class GameSpec:
    """Trust game with seller cost types and repeated-game parameters."""

    b: Number
    c: Number
    thetas: Tuple[Number, ...]
    prior: Tuple[Number, ...]
    delta: Number
    gamma: Number

    def __post_init__(self):
        object.__setattr__(self, "thetas", tuple(self.thetas))
        object.__setattr__(self, "prior", tuple(self.prior))
        if self.b <= 0 or self.c <= 0:
            raise NonPositiveParameter(f"b and c must be positive, got b={self.b}, c={self.c}")
        if not self.thetas:
            raise ParameterOutOfRange("thetas must list at least one type")
        for theta in self.thetas:
            if not _strictly_inside(theta, 0, 1):
                raise ParameterOutOfRange(f"every theta must lie in (0, 1), got {theta}")
        for lower, upper in zip(self.thetas, self.thetas[1:]):
            if not lower < upper:
                raise TypeOrderViolation(f"thetas must be strictly increasing, got {list(self.thetas)}")
        if len(self.prior) != len(self.thetas):
            raise ParameterOutOfRange("prior must have one entry per theta")
        if any(p <= 0 for p in self.prior):
            raise ParameterOutOfRange(f"prior entries must be positive, got {list(self.prior)}")
        if abs(float(total(self.prior)) - 1.0) > 1e-12:
            raise ParameterOutOfRange("prior must sum to 1")
        if not _strictly_inside(self.delta, 0, 1):
            raise ParameterOutOfRange(f"delta must lie in (0, 1), got {self.delta}")
        gstar = gamma_star(self.b, self.c)
        if not _strictly_inside(self.gamma, gstar, 1):
            raise GammaOutOfRange(
                f"gamma={self.gamma} must lie in the trust-frequency range (gamma*, 1) = ({float(gstar):.6g}, 1)"
            )

    @property
    def m(self) -> int:
        return len(self.thetas)

    @property
    def exact(self) -> bool:
        return is_exact(self.b, self.c, self.delta, self.gamma, *self.thetas, *self.prior)

    @property
    def gstar(self) -> Number:
        return as_number(gamma_star(self.b, self.c), self.exact)

    @property
    def tol(self) -> float:
        return tolerance(self.exact)

    def as_real(self) -> "GameSpec":
        """Float copy, used where exact arithmetic would grow without bound."""
        return GameSpec(
            b=float(self.b), c=float(self.c), thetas=tuple(float(t) for t in self.thetas),
            prior=tuple(float(p) for p in self.prior), delta=float(self.delta), gamma=float(self.gamma),
        )


@dataclass(frozen=True)
class OutcomeDist:
    """Weights on the stage outcomes N, H and L."""

    n: Number
    h: Number
    l: Number

    def __post_init__(self):
        for name, weight in (("N", self.n), ("H", self.h), ("L", self.l)):
            if weight < -1e-12 or weight > 1 + 1e-12:
                raise ParameterOutOfRange(f"outcome weight {name}={weight} outside [0, 1]")
        if abs(float(self.n + self.h + self.l) - 1.0) > 1e-12:
            raise ParameterOutOfRange("outcome weights must sum to 1")

    def __getitem__(self, outcome: str) -> Number:
        return {"N": self.n, "H": self.h, "L": self.l}[outcome]

    def as_tuple(self) -> Tuple[Number, Number, Number]:
        return (self.n, self.h, self.l)

    def payoff(self, theta: Number) -> Number:
        """Seller payoff (1 - theta) * alpha(H) + alpha(L)."""
        return (1 - theta) * self.h + self.l


@dataclass(frozen=True)
class PayoffVector:
    values: Tuple[Number, ...]

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(self.values))

    def __iter__(self) -> Iterator[Number]:
        return iter(self.values)

    def __getitem__(self, index: int) -> Number:
        return self.values[index]

    def __len__(self) -> int:
        return len(self.values)


def outcome_payoff(theta: Number, outcome: str) -> Number:
    """Seller stage payoff of an outcome: v^N = 0, v^H = 1 - theta, v^L = 1."""
    if outcome == "H":
        return 1 - theta
    if outcome == "L":
        return 1
    return 0


def gamma_star(b: Number, c: Number) -> Number:
    """Probability of H that makes the buyer indifferent: c / (b + c)."""
    if b <= 0 or c <= 0:
        raise NonPositiveParameter(f"b and c must be positive, got b={b}, c={c}")
    if is_exact(b, c):
        return Fraction(c) / (b + c)
    return c / (b + c)


def _check_unit(name: str, value: Number, closed_low: bool = False):
    low_ok = value >= 0 if closed_low else value > 0
    if not (low_ok and value < 1):
        raise ParameterOutOfRange(f"{name}={value} outside its allowed range")


def stackelberg_payoff(theta: Number, gstar: Number) -> Number:
    """Commitment payoff 1 - gstar * theta."""
    _check_unit("theta", theta)
    _check_unit("gstar", gstar, closed_low=True)
    return 1 - gstar * theta


def v_star(theta_j: Number, theta_1: Number, gstar: Number) -> Number:
    """Highest equilibrium payoff of type theta_j when theta_1 is the lowest cost."""
    _check_unit("theta_j", theta_j)
    _check_unit("theta_1", theta_1)
    if theta_1 > theta_j:
        raise TypeOrderViolation(f"theta_1={theta_1} exceeds theta_j={theta_j}")
    return (1 - gstar * theta_j) * (1 - theta_1) / (1 - gstar * theta_1)


def gamma_weights(theta_1: Number, gamma: Number) -> Tuple[Number, Number, Number]:
    """Convex weights (p^N, p^H, p^L) of v(gamma) on v^N, v^H, v^L."""
    denom = 1 - gamma * theta_1
    return (
        theta_1 * (1 - gamma) / denom,
        (1 - theta_1) * gamma / denom,
        (1 - theta_1) * (1 - gamma) / denom,
    )


def value_from_weights(weights: Sequence[Number], theta: Number) -> Number:
    p_n, p_h, p_l = weights
    return p_h * (1 - theta) + p_l


def v_of_gamma(spec: GameSpec, gamma: Number) -> PayoffVector:
    gstar = spec.gstar
    if gamma < gstar or gamma > 1:
        raise GammaOutOfRange(f"gamma={gamma} outside [{gstar}, 1]")
    weights = gamma_weights(spec.thetas[0], gamma)
    return PayoffVector(tuple(value_from_weights(weights, theta) for theta in spec.thetas))


def capital_taxation_vstar(theta_j: Number, theta_1: Number, gstar: Number) -> Number:
    """Highest payoff of a government whose expropriation benefit is theta_j."""
    if theta_1 <= 0:
        raise ParameterOutOfRange(f"theta_1={theta_1} must be positive")
    if theta_1 > theta_j:
        raise TypeOrderViolation(f"theta_1={theta_1} exceeds theta_j={theta_j}")
    return (1 + theta_j - gstar * theta_j) / (1 + theta_1 - gstar * theta_1)


def payoff_table(spec: GameSpec, gamma: Optional[Number] = None) -> List[Dict[str, Number]]:
    """Per-type rows of the commitment payoff, v* and v(gamma)."""
    gstar = spec.gstar
    gamma = spec.gamma if gamma is None else gamma
    at_gamma = v_of_gamma(spec, gamma)
    rows = []
    for j, theta in enumerate(spec.thetas):
        rows.append({
            "type": j + 1,
            "theta": theta,
            "v_stackelberg": stackelberg_payoff(theta, gstar),
            "v_star": v_star(theta, spec.thetas[0], gstar),
            "v_gamma": at_gamma[j],
        })
    return rows


# Generalized simultaneous-move stage games

@dataclass(frozen=True)
class GeneralGame:
    """Finite stage game with a partially ordered A1 and a two-element ordered A2.

    ``a1_order`` holds pairs ``(i, j)`` meaning ``a1[i] <= a1[j]``; its
    reflexive-transitive closure must be a lattice. ``a2`` is listed low to
    high. Types are listed from the most efficient (theta_1) down.
    """

    a1: Tuple[str, ...]
    a2: Tuple[str, str]
    thetas: Tuple[Number, ...]
    u1: Tuple[Tuple[Tuple[Number, ...], ...], ...]
    u2: Tuple[Tuple[Number, ...], ...]
    a1_order: FrozenSet[Tuple[int, int]] = field(default_factory=frozenset)
    name: str = "general"

    def __post_init__(self):
        object.__setattr__(self, "a1", tuple(self.a1))
        object.__setattr__(self, "a2", tuple(self.a2))
        object.__setattr__(self, "thetas", tuple(self.thetas))
        object.__setattr__(self, "u1", tuple(tuple(tuple(row) for row in table) for table in self.u1))
        object.__setattr__(self, "u2", tuple(tuple(row) for row in self.u2))
        if len(self.a2) != 2:
            raise ParameterOutOfRange(f"A2 must have exactly two actions, got {len(self.a2)}")
        if len(self.a1) < 1:
            raise ParameterOutOfRange("A1 must not be empty")
        if len(self.u1) != len(self.thetas):
            raise ParameterOutOfRange("u1 needs one table per type")
        for table in self.u1:
            self._check_shape(table, "u1")
        self._check_shape(self.u2, "u2")
        order = self.a1_order or frozenset((i, i + 1) for i in range(len(self.a1) - 1))
        object.__setattr__(self, "a1_order", frozenset(_transitive_closure(order, len(self.a1))))
        if not self._is_lattice():
            raise ParameterOutOfRange("A1 order is not a lattice")

    def _check_shape(self, table, name: str):
        if len(table) != len(self.a1) or any(len(row) != 2 for row in table):
            raise ParameterOutOfRange(f"{name} table must be |A1| x 2")

    def leq(self, i: int, j: int) -> bool:
        return (i, j) in self.a1_order

    def less(self, i: int, j: int) -> bool:
        return i != j and self.leq(i, j)

    def _bound(self, i: int, j: int, upper: bool) -> Optional[int]:
        n = len(self.a1)
        if upper:
            cands = [k for k in range(n) if self.leq(i, k) and self.leq(j, k)]
            best = [k for k in cands if all(self.leq(k, o) for o in cands)]
        else:
            cands = [k for k in range(n) if self.leq(k, i) and self.leq(k, j)]
            best = [k for k in cands if all(self.leq(o, k) for o in cands)]
        return best[0] if len(best) == 1 else None

    def _is_lattice(self) -> bool:
        n = len(self.a1)
        for i, j in itertools.combinations(range(n), 2):
            if self._bound(i, j, True) is None or self._bound(i, j, False) is None:
                return False
        return True

    @property
    def top(self) -> int:
        """Index of max A1."""
        n = len(self.a1)
        return next(k for k in range(n) if all(self.leq(o, k) for o in range(n)))

    @property
    def m(self) -> int:
        return len(self.thetas)

    @property
    def exact(self) -> bool:
        cells = [x for table in self.u1 for row in table for x in row]
        cells += [x for row in self.u2 for x in row]
        return is_exact(*cells)


def _transitive_closure(pairs, n: int):
    closure = set(pairs) | {(i, i) for i in range(n)}
    changed = True
    while changed:
        changed = False
        for (a, b), (c, d) in itertools.product(list(closure), repeat=2):
            if b == c and (a, d) not in closure:
                closure.add((a, d))
                changed = True
    return closure


def trust_game(thetas: Sequence[Number], b: Number, c: Number,
               d: Optional[Sequence[Number]] = None, sequential: bool = True) -> GeneralGame:
    """Trust game with A1 = (L, H) and A2 = (N, T).

    The sequential and simultaneous versions share this table: when the
    buyer plays N the seller's action is payoff irrelevant except through
    d(theta), which is zero in the sequential game.
    """
    if sequential and d is not None and any(d):
        logger.warning("d(theta) is ignored in the sequential trust game")
    d = [0] * len(thetas) if d is None or sequential else list(d)
    u1 = tuple(((0, 1), (-cost, 1 - theta)) for theta, cost in zip(thetas, d))
    u2 = ((0, -c), (0, b))
    name = "trust-sequential" if sequential else "trust-simultaneous"
    return GeneralGame(a1=("L", "H"), a2=("N", "T"), thetas=tuple(thetas), u1=u1, u2=u2, name=name)


def limit_pricing_game(thetas: Sequence[Number], b: Number, c: Number,
                       d: Optional[Sequence[Number]] = None) -> GeneralGame:
    """Incumbent prices Normal or Low; entrant chooses Enter or Out."""
    d = [0] * len(thetas) if d is None else list(d)
    u1 = tuple(((0, 1), (-cost, 1 - theta)) for theta, cost in zip(thetas, d))
    u2 = ((c, 0), (-b, 0))
    return GeneralGame(a1=("Normal", "Low"), a2=("Enter", "Out"), thetas=tuple(thetas),
                       u1=u1, u2=u2, name="limit-pricing")


def monetary_policy_game(thetas: Sequence[Number], x1: Number, x2: Number, y1: Number, y2: Number,
                         d: Optional[Sequence[Number]] = None) -> GeneralGame:
    """Central bank picks inflation; households form a binary expectation."""
    for name, value in (("x1", x1), ("x2", x2), ("y1", y1), ("y2", y2)):
        if value <= 0:
            raise NonPositiveParameter(f"{name} must be positive, got {value}")
    d = [0] * len(thetas) if d is None else list(d)
    u1 = tuple(((0, 1), (-cost, 1 - theta)) for theta, cost in zip(thetas, d))
    u2 = ((x2, -y2), (-y1, x1))
    return GeneralGame(a1=("High", "Low"), a2=("HighExp", "LowExp"), thetas=tuple(thetas),
                       u1=u1, u2=u2, name="monetary-policy")


def monetary_gamma_star(x1: Number, x2: Number, y1: Number, y2: Number) -> Number:
    return (x2 + y2) / (x1 + y1 + x2 + y2)


def capital_taxation_game(thetas: Sequence[Number], b: Number, c: Number) -> GeneralGame:
    """Government taxes high or low after investors choose whether to invest."""
    if any(theta <= 0 for theta in thetas):
        raise ParameterOutOfRange("expropriation benefits must be positive")
    u1 = tuple(((0, 1 + theta), (0, 1)) for theta in thetas)
    u2 = ((0, -c), (0, b))
    return GeneralGame(a1=("high tax", "low tax"), a2=("not invest", "invest"), thetas=tuple(thetas),
                       u1=u1, u2=u2, name="capital-taxation")


def general_gamma_star(game: GeneralGame) -> Number:
    """Probability on max A1 that leaves player 2 indifferent, for |A1| = 2."""
    low, high = [i for i in range(len(game.a1)) if i != game.top][0], game.top
    gain_high = game.u2[high][1] - game.u2[high][0]
    loss_low = game.u2[low][0] - game.u2[low][1]
    return loss_low / (gain_high + loss_low)


def best_replies(game: GeneralGame, i1: int, tol: Optional[float] = None) -> List[int]:
    tol = tolerance(game.exact) if tol is None else tol
    row = game.u2[i1]
    best = max(row)
    return [k for k in range(2) if row[k] >= best - tol]


def stackelberg_actions(game: GeneralGame, type_index: int, tol: Optional[float] = None) -> Tuple[List[int], Number]:
    """Pure commitment actions of a type (worst-case best reply) and the commitment value."""
    tol = tolerance(game.exact) if tol is None else tol
    values = []
    for i1 in range(len(game.a1)):
        values.append(min(game.u1[type_index][i1][k] for k in best_replies(game, i1, tol)))
    best = max(values)
    return [i for i, v in enumerate(values) if v >= best - tol], best


@dataclass
class AssumptionReport:
    a1_ok: bool
    a2_ok: bool
    a3_ok: bool
    witnesses: Dict[str, List[str]] = field(default_factory=dict)

    def holds(self, names: Sequence[str] = ("A1", "A2", "A3")) -> bool:
        verdicts = {"A1": self.a1_ok, "A2": self.a2_ok, "A3": self.a3_ok}
        return all(verdicts[n] for n in names)

    def to_dict(self) -> Dict:
        return {"A1": self.a1_ok, "A2": self.a2_ok, "A3": self.a3_ok, "witnesses": self.witnesses}


def check_assumptions(game: GeneralGame) -> AssumptionReport:
    """Scan the payoff tables for unique best replies, monotone supermodularity and the top-type condition.

    Monotonicity in a1 and the (theta, a1) increasing differences are strict at
    the high a2 and weak at the low a2, where the seller's action only matters
    through d(theta).
    """
    tol = tolerance(game.exact)
    n1 = len(game.a1)
    low2, high2 = 0, 1
    witnesses: Dict[str, List[str]] = {"A1": [], "A2": [], "A3": []}

    for i1 in range(n1):
        if len(best_replies(game, i1, tol)) != 1:
            witnesses["A1"].append(f"BR2({game.a1[i1]}) is not a singleton")
    for j in range(game.m):
        actions, _ = stackelberg_actions(game, j, tol)
        if len(actions) != 1:
            names = [game.a1[i] for i in actions]
            witnesses["A1"].append(f"type {j + 1} has several commitment actions {names}")

    def strict_gt(x: Number, y: Number) -> bool:
        return x > y + tol

    def weak_ge(x: Number, y: Number) -> bool:
        return x >= y - tol

    pairs = [(i, k) for i in range(n1) for k in range(n1) if game.less(i, k)]
    for j in range(game.m):
        u = game.u1[j]
        for i, k in pairs:
            if not strict_gt(u[i][high2], u[k][high2]):
                witnesses["A2"].append(f"u1 not strictly decreasing in a1: type {j + 1}, {game.a1[i]} < {game.a1[k]}, a2={game.a2[high2]}")
            if not weak_ge(u[i][low2], u[k][low2]):
                witnesses["A2"].append(f"u1 increasing in a1: type {j + 1}, {game.a1[i]} < {game.a1[k]}, a2={game.a2[low2]}")
        for i in range(n1):
            if not strict_gt(u[i][high2], u[i][low2]):
                witnesses["A2"].append(f"u1 not strictly increasing in a2: type {j + 1}, a1={game.a1[i]}")
    for j, jj in itertools.combinations(range(game.m), 2):
        # j is the more efficient type
        for i, k in pairs:
            for a2, strict in ((high2, True), (low2, False)):
                top = game.u1[j][k][a2] - game.u1[j][i][a2]
                other = game.u1[jj][k][a2] - game.u1[jj][i][a2]
                ok = strict_gt(top, other) if strict else weak_ge(top, other)
                if not ok:
                    witnesses["A2"].append(
                        f"(theta, a1) differences: types ({j + 1}, {jj + 1}), {game.a1[i]} < {game.a1[k]}, a2={game.a2[a2]}"
                    )
        for i in range(n1):
            top = game.u1[j][i][high2] - game.u1[j][i][low2]
            other = game.u1[jj][i][high2] - game.u1[jj][i][low2]
            if not weak_ge(top, other):
                witnesses["A2"].append(f"(theta, a2) differences: types ({j + 1}, {jj + 1}), a1={game.a1[i]}")
    for i, k in pairs:
        gain_k = game.u2[k][high2] - game.u2[k][low2]
        gain_i = game.u2[i][high2] - game.u2[i][low2]
        if not strict_gt(gain_k, gain_i):
            witnesses["A2"].append(f"u2 differences not strictly increasing: {game.a1[i]} < {game.a1[k]}")

    actions, _ = stackelberg_actions(game, 0, tol)
    if actions != [game.top]:
        witnesses["A3"].append(
            f"type 1 commitment actions {[game.a1[i] for i in actions]} differ from max A1 = {game.a1[game.top]}"
        )

    report = AssumptionReport(
        a1_ok=not witnesses["A1"], a2_ok=not witnesses["A2"], a3_ok=not witnesses["A3"], witnesses=witnesses
    )
    logger.debug(f"Assumptions for {game.name}: A1={report.a1_ok} A2={report.a2_ok} A3={report.a3_ok}")
    return report


def variant_game(variant: str, thetas: Sequence[Number], b: Number, c: Number,
                 d: Optional[Sequence[Number]] = None, monetary: Optional[Dict[str, Number]] = None) -> GeneralGame:
    """Build the GeneralGame encoding of a named variant."""
    if variant == "trust-sequential":
        return trust_game(thetas, b, c, d, sequential=True)
    if variant == "trust-simultaneous":
        return trust_game(thetas, b, c, d, sequential=False)
    if variant == "limit-pricing":
        return limit_pricing_game(thetas, b, c, d)
    if variant == "capital-taxation":
        return capital_taxation_game(thetas, b, c)
    if variant == "monetary-policy":
        if not monetary:
            raise ParameterOutOfRange("monetary-policy needs x1, x2, y1, y2")
        return monetary_policy_game(thetas, d=d, **monetary)
    raise ParameterOutOfRange(f"unknown variant '{variant}'")
