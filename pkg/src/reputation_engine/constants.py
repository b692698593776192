"""Constants that parameterize the constructed equilibrium.

The selection rules are deterministic: the smallest-denominator rational in
(gamma*, gamma), the midpoint belief floor, and a halving search for the
belief step size. Discount-factor conditions are evaluated in floating point
even in exact mode because their exponents can be very large.
"""
import logging
import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Callable, Dict, List, Optional, Tuple

from .errors import DeltaTooLow, GammaOutOfRange
from .game import GameSpec
from .numeric import Number, ceil_int, ln, sqrt

logger = logging.getLogger(__name__)

LEARNING_MARGIN = 1e-6
LAMBDA_CAP = Fraction(1, 10)

DISCOUNT_SANDWICH = "discount-sandwich"
RETURN_WINDOW = "return-window"
SINGLE_SHIRK = "single-shirk"
# group name of the two conditions that let the buyer return to trust
TRUST_RETURN = "trust-return conditions"

CONDITION_TEXT = {
    DISCOUNT_SANDWICH: "(d+..+d^n)/(d+..+d^k) < gamma_tilde < d^(k-n-1)(d+..+d^n)/(d+..+d^(k-1))",
    RETURN_WINDOW: "delta^(T+1)*(1+delta+...+delta^N) > N",
    SINGLE_SHIRK: "2*delta^(T+N+2) > 1",
}


@dataclass(frozen=True)
class DerivedConstants:
    gstar: Number
    n: int
    k: int
    gamma_tilde: Number
    gamma_hat: Number
    eta_star: Number
    lam: Number
    learning_rate: float
    kj: Tuple[Optional[int], ...]
    Kcap: int
    T: int
    S: int
    X: int
    N: int
    M: int
    Y: Number
    Q_floor: Number
    h_reserve: Number
    pi1: Number
    delta: Number
    gamma: Number
    delta_flags: Dict[str, bool] = field(default_factory=dict)
    delta_threshold: Optional[float] = None
    exact: bool = False

    @property
    def delta_ok(self) -> bool:
        """Construction is allowed when both trust-return conditions hold."""
        return self.delta_flags.get(RETURN_WINDOW, False) and self.delta_flags.get(SINGLE_SHIRK, False)

    @property
    def step_up(self) -> Number:
        return 1 + self.lam * (1 - self.gstar)

    @property
    def step_down(self) -> Number:
        return 1 - self.lam * self.gstar

    def to_dict(self) -> Dict:
        data = asdict(self)
        data["delta_ok"] = self.delta_ok
        return data


def simplest_between(low: Fraction, high: Fraction) -> Fraction:
    """Smallest-denominator rational strictly inside (low, high), 0 <= low < high.

    Walks the Stern-Brocot tree with whole runs of same-direction moves taken
    at once, i.e. on the continued fraction expansions of the bounds.
    """
    whole = math.floor(low)
    if whole + 1 < high:
        return Fraction(whole + 1)
    low_frac = low - whole
    high_frac = high - whole
    # (low, high) sits inside (whole, whole + 1]; recurse on reciprocals
    upper = None if low_frac == 0 else 1 / low_frac
    lower = 1 / high_frac
    if upper is None:
        inner = Fraction(math.floor(lower) + 1)
    else:
        inner = simplest_between(lower, upper)
    return whole + 1 / inner


def _exact_fraction(value: Number) -> Fraction:
    return value if isinstance(value, Fraction) else Fraction(value)


def scaled_rational(gstar: Number, gamma: Number) -> Tuple[int, int, Fraction]:
    """(n, k, n/k in lowest terms) with n j / (k j - 1) < gamma for the smallest j."""
    low, high = _exact_fraction(gstar), _exact_fraction(gamma)
    base = simplest_between(low, high)
    n_hat, k_hat = base.numerator, base.denominator
    gap = high * k_hat - n_hat
    scale = math.floor(high / gap) + 1
    while Fraction(n_hat * scale, k_hat * scale - 1) >= high:
        scale += 1
    while scale > 1 and Fraction(n_hat * (scale - 1), k_hat * (scale - 1) - 1) < high:
        scale -= 1
    return n_hat * scale, k_hat * scale, base


def revelation_counts(gstar: Number, prior: Tuple[Number, ...]) -> Tuple[Optional[int], ...]:
    """Smallest k_j per type j >= 3 capping the Class-2 shirk probability at 1 - gstar."""
    counts: List[Optional[int]] = [None] * len(prior)
    pi1 = prior[0]
    for j in range(2, len(prior)):
        below = sum(prior[1:j])
        k = 1
        while (1 - gstar * pi1) * (prior[j] / k) > (1 - gstar) * (below + prior[j] / k):
            k += 1
        counts[j] = k
    return tuple(counts)


def belief_floor(gstar: Number, prior: Tuple[Number, ...], kj: Tuple[Optional[int], ...]) -> Number:
    """Midpoint of the admissible belief-floor interval inside [gstar * pi1, pi1)."""
    pi1 = prior[0]
    lower = gstar * pi1
    if len(prior) >= 3:
        ratio = min((prior[j] / kj[j]) / sum(prior[1:j + 1]) for j in range(2, len(prior)))
        if ratio < 1:
            lower = max(lower, pi1 * (1 - ratio) / (1 - ratio * pi1))
    return (lower + pi1) / 2


def learning_log_rate(lam: Number, gstar: Number, gamma_hat: Number) -> float:
    """Log of the belief drift factor when H is played with frequency gamma_hat."""
    return (1 - float(gamma_hat)) * math.log(1 - float(lam) * float(gstar)) + \
        float(gamma_hat) * math.log(1 + float(lam) * (1 - float(gstar)))


def belief_step(gstar: Number, gamma_hat: Number, exact: bool) -> Tuple[Number, float]:
    """Halving search for the belief step size."""
    bound = (1 - sqrt(gstar)) / float(gstar)
    target = min(LEARNING_MARGIN, 0.5 * (float(gamma_hat) - float(gstar)) ** 2)
    if exact:
        lam: Number = LAMBDA_CAP if LAMBDA_CAP < bound / 2 else Fraction(bound / 2).limit_denominator(10 ** 6)
    else:
        lam = min(float(LAMBDA_CAP), bound / 2)
    for _ in range(200):
        rate = learning_log_rate(lam, gstar, gamma_hat)
        if rate >= target and rate > 0:
            return lam, rate
        lam = lam / 2
    raise GammaOutOfRange(f"no belief step size satisfies the learning condition for gamma_hat={float(gamma_hat)}")


def _geometric(delta: float, first: int, last: int) -> float:
    """delta^first + ... + delta^last."""
    if last < first:
        return 0.0
    return delta ** first * (1 - delta ** (last - first + 1)) / (1 - delta)


def discount_conditions(delta: float, n: int, k: int, gamma_tilde: float, T: int, N: int) -> Dict[str, bool]:
    lower = (1 - delta ** n) / (1 - delta ** k)
    upper = delta ** (k - n - 1) * (1 - delta ** n) / (1 - delta ** (k - 1))
    return {
        DISCOUNT_SANDWICH: lower < gamma_tilde < upper,
        RETURN_WINDOW: delta ** (T + 1) * _geometric(delta, 0, N) > N,
        SINGLE_SHIRK: 2 * delta ** (T + N + 2) > 1,
    }


def _bisect_threshold(holds: Callable[[float], bool], iterations: int = 60) -> Optional[float]:
    low, high = 0.0, 1.0 - 1e-15
    if not holds(high):
        return None
    for _ in range(iterations):
        mid = (low + high) / 2
        if holds(mid):
            high = mid
        else:
            low = mid
    return high


def derive_constants(spec: GameSpec, strict: bool = True) -> DerivedConstants:
    """Compute every constant of the construction for ``spec``.

    Raises DeltaTooLow when a trust-return condition fails, unless ``strict``
    is False, in which case the flags are returned for reporting.
    """
    exact = spec.exact
    gstar = spec.gstar
    gamma = spec.gamma
    if not gstar < gamma < 1:
        raise GammaOutOfRange(f"gamma={gamma} outside (gamma*, 1)")
    theta1, pi1, delta = spec.thetas[0], spec.prior[0], spec.delta

    n, k, base = scaled_rational(gstar, gamma)
    ratio = Fraction(n, k)
    gamma_tilde = (ratio + Fraction(n, k - 1)) / 2
    gamma_hat = (ratio + _exact_fraction(gstar)) / 2
    if not exact:
        gamma_tilde, gamma_hat = float(gamma_tilde), float(gamma_hat)

    kj = revelation_counts(gstar, spec.prior)
    Kcap = sum(x for x in kj if x is not None)
    eta_star = belief_floor(gstar, spec.prior, kj)
    lam, rate = belief_step(gstar, gamma_hat, exact)
    up = 1 + float(lam) * (1 - float(gstar))

    T = max(1, ceil_int(ln(1 / pi1) / math.log(up)))
    spread = (1 - eta_star) / (pi1 - eta_star)
    S = max(1, ceil_int(ln(spread) / rate))
    X = max(1, ceil_int(ln(spread) / math.log(up)))
    N = ceil_int(1 / (1 - float(gamma)))
    M = Kcap + ceil_int(ln(1 / pi1) / math.log(1 / sqrt(gstar))) + 1
    Y = (gamma - (1 - gamma) * gamma_tilde / (1 - gamma_tilde)) * (1 - theta1) / (1 - gamma * theta1) / 2
    Q_floor = Y / 2 ** M
    h_reserve = max(1 - delta ** X, (1 - delta) + delta * Q_floor)

    flags = discount_conditions(float(delta), n, k, float(gamma_tilde), T, N)
    threshold = _bisect_threshold(
        lambda d: all(discount_conditions(d, n, k, float(gamma_tilde), T, N)[c] for c in (RETURN_WINDOW, SINGLE_SHIRK))
    )
    consts = DerivedConstants(
        gstar=gstar, n=n, k=k, gamma_tilde=gamma_tilde, gamma_hat=gamma_hat, eta_star=eta_star,
        lam=lam, learning_rate=rate, kj=kj, Kcap=Kcap, T=T, S=S, X=X, N=N, M=M, Y=Y, Q_floor=Q_floor,
        h_reserve=h_reserve, pi1=pi1, delta=delta, gamma=gamma, delta_flags=flags, delta_threshold=threshold, exact=exact,
    )
    logger.info(
        f"Constants: n/k={n}/{k} (from {base}), eta*={float(eta_star):.6g}, lambda={float(lam):.6g}, "
        f"T={T}, S={S}, X={X}, N={N}, M={M}"
    )
    if not flags[DISCOUNT_SANDWICH]:
        logger.warning(f"delta={float(delta)} fails {DISCOUNT_SANDWICH}: {CONDITION_TEXT[DISCOUNT_SANDWICH]}")
    if strict and not consts.delta_ok:
        raise delta_error(consts)
    return consts


def delta_error(consts: DerivedConstants) -> DeltaTooLow:
    failing = [c for c in (RETURN_WINDOW, SINGLE_SHIRK) if not consts.delta_flags[c]]
    listed = "; ".join(f"{c}: {CONDITION_TEXT[c]}" for c in failing)
    estimate = "unknown" if consts.delta_threshold is None else f"{consts.delta_threshold:.6g}"
    return DeltaTooLow(
        f"delta={float(consts.delta)} violates the {TRUST_RETURN}: {listed} (T={consts.T}, N={consts.N}); "
        f"estimated feasible delta > {estimate}",
        failing=failing,
        threshold=consts.delta_threshold,
        anchor=TRUST_RETURN,
    )
