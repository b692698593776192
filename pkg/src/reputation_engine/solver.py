"""Small dense linear programs solved by vertex enumeration, plus a grid oracle."""
import abc
import itertools
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .errors import AssumptionViolation, Infeasible, MeshOutOfRange, ParameterOutOfRange, TypeOrderViolation
from .game import GeneralGame, OutcomeDist, check_assumptions
from .numeric import Number, is_exact, tolerance, unit

logger = logging.getLogger(__name__)

Row = Tuple[Number, ...]

MAX_LATTICE_POINTS = 5_000_000


@dataclass
class LinearSystem:
    """maximize c.x subject to A_ub x <= b_ub, A_eq x = b_eq, x >= 0."""

    labels: Tuple[str, ...]
    objective: Row
    a_ub: List[Row]
    b_ub: List[Number]
    a_eq: List[Row]
    b_eq: List[Number]

    @property
    def size(self) -> int:
        return len(self.objective)

    @property
    def exact(self) -> bool:
        cells = list(self.objective) + list(self.b_ub) + list(self.b_eq)
        cells += [x for row in self.a_ub + self.a_eq for x in row]
        return is_exact(*cells)


class LinearProgram(abc.ABC):
    """A program that can describe itself as a LinearSystem."""

    extra_rows: List[Tuple[Row, Number]]

    @abc.abstractmethod
    def system(self) -> LinearSystem:
        pass

    def _with_extra(self, system: LinearSystem) -> LinearSystem:
        for row, rhs in self.extra_rows:
            system.a_ub.append(tuple(row))
            system.b_ub.append(rhs)
        return system


@dataclass
class TrustLP(LinearProgram):
    """Outcome distribution program for type theta_j in the trust game."""

    theta_j: Number
    theta_1: Number
    gstar: Number
    extra_rows: List[Tuple[Row, Number]] = field(default_factory=list)

    def system(self) -> LinearSystem:
        zero, one = unit(is_exact(self.theta_j, self.theta_1, self.gstar))
        return self._with_extra(LinearSystem(
            labels=("N", "H", "L"),
            objective=(zero, 1 - self.theta_j, one),
            # theta_1's payoff cap, then the buyer's trust constraint
            a_ub=[(zero, 1 - self.theta_1, one), (zero, -(1 - self.gstar), self.gstar)],
            b_ub=[1 - self.theta_1, zero],
            a_eq=[(one, one, one)],
            b_eq=[one],
        ))


@dataclass
class GeneralProgram(LinearProgram):
    """Joint distribution program over A1 x A2 for one support of A2."""

    game: GeneralGame
    type_index: int
    support: Tuple[int, ...]
    extra_rows: List[Tuple[Row, Number]] = field(default_factory=list)

    def system(self) -> LinearSystem:
        game, j = self.game, self.type_index
        cells = [(i1, i2) for i2 in self.support for i1 in range(len(game.a1))]
        labels = tuple(f"{game.a1[i1]}/{game.a2[i2]}" for i1, i2 in cells)
        objective = tuple(game.u1[j][i1][i2] for i1, i2 in cells)
        zero, one = unit(game.exact)
        cap = game.u1[0][game.top][1]
        a_ub = [tuple(game.u1[0][i1][i2] for i1, i2 in cells)]
        b_ub = [cap]
        for target in self.support:
            other = 1 - target
            row = tuple(
                (game.u2[i1][other] - game.u2[i1][target]) if i2 == target else zero
                for i1, i2 in cells
            )
            a_ub.append(row)
            b_ub.append(zero)
        ones = tuple(one for _ in cells)
        return self._with_extra(LinearSystem(labels, objective, a_ub, b_ub, [ones], [one]))


def _solve_square(matrix: List[List[Number]], rhs: List[Number], exact: bool) -> Optional[List[Number]]:
    n = len(rhs)
    if not exact:
        a = np.array(matrix, dtype=float)
        if np.linalg.matrix_rank(a) < n:
            return None
        try:
            return [float(x) for x in np.linalg.solve(a, np.array(rhs, dtype=float))]
        except np.linalg.LinAlgError:
            return None
    a = [[Fraction(x) for x in row] + [Fraction(r)] for row, r in zip(matrix, rhs)]
    for col in range(n):
        pivot = next((r for r in range(col, n) if a[r][col] != 0), None)
        if pivot is None:
            return None
        a[col], a[pivot] = a[pivot], a[col]
        lead = a[col][col]
        a[col] = [x / lead for x in a[col]]
        for r in range(n):
            if r != col and a[r][col] != 0:
                factor = a[r][col]
                a[r] = [x - factor * y for x, y in zip(a[r], a[col])]
    return [a[r][n] for r in range(n)]


def solve_vertex_lp(system: LinearSystem, exact: Optional[bool] = None) -> Tuple[List[Number], Number]:
    """Maximize by enumerating basic solutions.

    Inequality rows are tried before the nonnegativity rows, so among
    optimal vertices the one making the structural constraints bind wins.
    """
    exact = system.exact if exact is None else exact
    tol = tolerance(exact) if exact else 1e-9
    n = system.size
    zero, one = unit(exact)
    rows: List[Tuple[Row, Number]] = list(zip(system.a_ub, system.b_ub))
    for i in range(n):
        rows.append((tuple(-one if k == i else zero for k in range(n)), zero))
    free = n - len(system.a_eq)
    best: Optional[Tuple[List[Number], Number]] = None
    for active in itertools.combinations(range(len(rows)), free):
        matrix = [list(r) for r in system.a_eq] + [list(rows[k][0]) for k in active]
        rhs = list(system.b_eq) + [rows[k][1] for k in active]
        x = _solve_square(matrix, rhs, exact)
        if x is None:
            continue
        if any(sum(a * xi for a, xi in zip(row, x)) > bound + tol for row, bound in rows):
            continue
        value = sum(c * xi for c, xi in zip(system.objective, x))
        if best is None or value > best[1] + tol:
            best = (x, value)
    if best is None:
        raise Infeasible("linear program has no feasible vertex")
    x, value = best
    if not exact:
        x = [max(0.0, xi) for xi in x]
    return x, value


def solve_trust_lp(theta_j: Number, theta_1: Number, gstar: Number) -> Tuple[OutcomeDist, Number]:
    """Maximize type theta_j's payoff over outcome distributions."""
    if not 0 < gstar < 1:
        raise ParameterOutOfRange(f"gstar={gstar} must lie in (0, 1)")
    if theta_1 > theta_j:
        raise TypeOrderViolation(f"theta_1={theta_1} exceeds theta_j={theta_j}")
    x, value = solve_vertex_lp(TrustLP(theta_j, theta_1, gstar).system())
    return OutcomeDist(n=x[0], h=x[1], l=x[2]), value


def solve_general_lp(game: GeneralGame, type_index: int,
                     require: Sequence[str] = ("A1", "A2", "A3")) -> Number:
    """Best payoff of a type in the generalized program, over supports of A2.

    The capital taxation encoding breaks the weak (theta, a2) clause of
    monotone supermodularity, so its callers pass ``require=("A1", "A3")``.
    """
    report = check_assumptions(game)
    if not report.holds(require):
        failing = {k: v for k, v in report.witnesses.items() if k in require and v}
        raise AssumptionViolation(f"{game.name} violates {sorted(failing)}", witnesses=failing)
    best: Optional[Number] = None
    for support in ((0,), (1,), (0, 1)):
        program = GeneralProgram(game, type_index, support)
        try:
            _, value = solve_vertex_lp(program.system())
        except Infeasible:
            logger.debug(f"{game.name}: support {[game.a2[k] for k in support]} infeasible")
            continue
        if best is None or value > best:
            best = value
    if best is None:
        raise Infeasible(f"{game.name}: no support of A2 admits a feasible distribution")
    return best


def _simplex_lattice(dims: int, units: int) -> np.ndarray:
    if dims == 1:
        return np.array([[units]], dtype=np.int64)
    if dims == 2:
        first = np.arange(units + 1, dtype=np.int64)
        return np.column_stack([first, units - first])
    blocks = []
    for first in range(units + 1):
        rest = _simplex_lattice(dims - 1, units - first)
        blocks.append(np.column_stack([np.full(len(rest), first, dtype=np.int64), rest]))
    return np.vstack(blocks)


def grid_oracle(program: LinearProgram, mesh: float) -> float:
    """Brute-force maximum over the simplex lattice with step ``mesh``.

    Returns ``-inf`` when no lattice point is feasible.
    """
    if not 0 < mesh <= 0.1:
        raise MeshOutOfRange(f"mesh={mesh} outside (0, 0.1]")
    system = program.system()
    units = int(round(1 / mesh))
    count = math.comb(units + system.size - 1, system.size - 1)
    if count > MAX_LATTICE_POINTS:
        raise MeshOutOfRange(f"mesh={mesh} gives {count} lattice points in {system.size} dimensions")
    points = _simplex_lattice(system.size, units) / units
    feasible = np.ones(len(points), dtype=bool)
    for row, bound in zip(system.a_ub, system.b_ub):
        feasible &= points @ np.array(row, dtype=float) <= float(bound) + 1e-12
    for row, bound in zip(system.a_eq[1:], system.b_eq[1:]):
        feasible &= np.abs(points @ np.array(row, dtype=float) - float(bound)) <= 1e-12
    if not feasible.any():
        logger.warning("grid oracle found no feasible lattice point")
        return float("-inf")
    values = points[feasible] @ np.array(system.objective, dtype=float)
    return float(values.max())
