"""Tests for the equilibrium.py module."""
import unittest
from dataclasses import replace
from fractions import Fraction

from reputation_engine.constants import derive_constants
from reputation_engine.equilibrium import (
    INDIFFERENT,
    STRICT_H,
    STRICT_L,
    EqState,
    EquilibriumAutomaton,
    HistoryClass,
    fm_schedule,
    initial_state,
    prescribe,
    schedule_emits_h,
    transition,
)
from reputation_engine.errors import DeltaTooLow, EpsilonTooSmallForDelta, StateOffPath
from reputation_engine.game import GameSpec, outcome_payoff


def canonical(**overrides):
    params = dict(b=1, c=1, thetas=(0.2, 0.5), prior=(0.9, 0.1), delta=0.99, gamma=0.6)
    params.update(overrides)
    return GameSpec(**params)


def canonical_exact():
    return GameSpec(b=Fraction(1), c=Fraction(1), thetas=(Fraction(1, 5), Fraction(1, 2)),
                    prior=(Fraction(9, 10), Fraction(1, 10)), delta=Fraction(99, 100), gamma=Fraction(3, 5))


class TestClassOne(unittest.TestCase):
    def setUp(self):
        """Set up the canonical automaton."""
        self.spec = canonical()
        self.consts = derive_constants(self.spec)
        self.automaton = EquilibriumAutomaton(self.spec, self.consts)
        self.root = self.automaton.initial_state()

    def assertWeights(self, weights, expected, places=6):
        for got, want in zip(weights, expected):
            self.assertAlmostEqual(got, want, places=places)

    def test_initial_state(self):
        """Test the root starts in Class 1 with the v(gamma) weights."""
        self.assertIs(self.root.cls, HistoryClass.CLASS1)
        self.assertEqual(self.root.eta, 0.9)
        self.assertEqual(self.root.support, (0, 1))
        self.assertEqual(self.root.bar_theta, 1)
        self.assertWeights(self.root.weights, (0.090909, 0.545455, 0.363636))

    def test_prescription(self):
        """Test the Class-1 prescription at eta = 0.9."""
        p = self.automaton.prescribe(self.root)
        self.assertEqual(p.buyer_action, "T")
        self.assertAlmostEqual(p.p_h, 0.5)
        self.assertAlmostEqual(p.eta_h, 0.91125)
        self.assertAlmostEqual(p.eta_l, 0.88875)
        self.assertAlmostEqual(p.h_prob[0], 0.50625)
        self.assertAlmostEqual(p.h_prob[1], 0.44375)
        self.assertFalse(p.clamped)
        self.assertEqual(p.tags, {0: INDIFFERENT, 1: INDIFFERENT})

    def test_transition_after_l(self):
        nxt = self.automaton.transition(self.root, "L")
        self.assertIs(nxt.cls, HistoryClass.CLASS1)
        self.assertAlmostEqual(nxt.eta, 0.88875)
        self.assertAlmostEqual(nxt.posterior[1], 0.11125)
        self.assertWeights(nxt.weights, (0.091827, 0.550964, 0.357209))
        self.assertEqual(nxt.period, 1)

    def test_transition_after_h(self):
        nxt = self.automaton.transition(self.root, "H")
        self.assertAlmostEqual(nxt.eta, 0.91125)
        self.assertWeights(nxt.weights, (0.091827, 0.540863, 0.367310))

    def test_martingale(self):
        """Test the expected next belief equals the current belief."""
        p = self.automaton.prescribe(self.root)
        self.assertAlmostEqual(p.p_h * p.eta_h + (1 - p.p_h) * p.eta_l, self.root.eta, places=12)

    def test_indifference(self):
        """Test both types are indifferent between H and L at the root."""
        delta = self.spec.delta
        after_h = self.automaton.transition(self.root, "H")
        after_l = self.automaton.transition(self.root, "L")
        for j, theta in enumerate(self.spec.thetas):
            with self.subTest(type=j + 1):
                value_h = (1 - delta) * outcome_payoff(theta, "H") + delta * self.automaton.continuation_value(after_h, j)
                value_l = (1 - delta) * outcome_payoff(theta, "L") + delta * self.automaton.continuation_value(after_l, j)
                self.assertAlmostEqual(value_h, value_l, places=12)
                self.assertAlmostEqual(value_h, self.automaton.continuation_value(self.root, j), places=12)

    def test_clamped_state(self):
        """Test the belief clamp reveals theta_1 after H."""
        state = replace(self.root, eta=0.99, posterior=(0.99, 0.01))
        p = self.automaton.prescribe(state)
        self.assertTrue(p.clamped)
        self.assertEqual(p.eta_h, 1)
        self.assertEqual(p.h_prob[1], 0)
        self.assertEqual(p.tags[1], STRICT_L)
        self.assertGreaterEqual(p.p_h, 0.5)
        nxt = self.automaton.transition(state, "H", p)
        self.assertIs(nxt.cls, HistoryClass.CLASS3)
        self.assertEqual(nxt.support, (0,))
        self.assertEqual(nxt.eta, 1)
        delta = self.spec.delta
        kept = (1 - delta) * 0.8 + delta * self.automaton.continuation_value(nxt, 0)
        self.assertAlmostEqual(kept, self.automaton.continuation_value(state, 0), places=12)

    def test_zero_probability_outcome(self):
        """Test an unpredicted outcome leads to an absorbing punishment."""
        punished = self.automaton.transition(self.root, "N")
        self.assertIs(punished.cls, HistoryClass.PUNISH)
        self.assertTrue(punished.off_path)
        self.assertEqual(self.automaton.continuation_value(punished, 0), 0)
        self.assertEqual(self.automaton.prescribe(punished).buyer_action, "N")
        again = self.automaton.transition(punished, "H")
        self.assertIs(again.cls, HistoryClass.PUNISH)
        self.assertEqual(again.period, punished.period + 1)

    def test_off_path_state(self):
        bad = replace(self.root, weights=(0.5, 0.5, 0.5))
        with self.assertRaises(StateOffPath):
            self.automaton.prescribe(bad)

    def test_module_functions(self):
        """Test the module-level functions delegate to the automaton."""
        root = initial_state(self.spec, self.consts)
        self.assertEqual(root, self.root)
        p = prescribe(root, self.spec, self.consts)
        self.assertAlmostEqual(p.p_h, 0.5)
        self.assertEqual(transition(root, "H", self.spec, self.consts), self.automaton.transition(root, "H"))


class TestClassTwo(unittest.TestCase):
    def setUp(self):
        self.spec = canonical()
        self.automaton = EquilibriumAutomaton(self.spec, derive_constants(self.spec))
        self.state = EqState(eta=0.95, posterior=(0.95, 0.05), weights=(0.495, 0.5, 0.005),
                             cls=HistoryClass.CLASS2, support=(0, 1), bar_theta=1)

    def test_prescription(self):
        """Test the top remaining type shirks while lower types play H."""
        p = self.automaton.prescribe(self.state)
        self.assertEqual(p.h_prob, {0: 1.0, 1: 0.0})
        self.assertAlmostEqual(p.p_h, 0.95)
        self.assertEqual(p.tags[0], STRICT_H)
        self.assertTrue(p.clamped)

    def test_shirk_enters_schedule(self):
        """Test L at Class 2 reveals theta-bar and starts its schedule."""
        nxt = self.automaton.transition(self.state, "L")
        self.assertIs(nxt.cls, HistoryClass.CLASS3)
        self.assertEqual(nxt.support, (1,))
        self.assertEqual(nxt.eta, 0)
        self.assertAlmostEqual(nxt.p_h, 0.494949, places=6)
        self.assertAlmostEqual(nxt.fm_target, 0.494949, places=6)
        delta = self.spec.delta
        kept = (1 - delta) * 1 + delta * self.automaton.continuation_value(nxt, 1)
        self.assertAlmostEqual(kept, self.automaton.continuation_value(self.state, 1), places=12)

    def test_h_reveals_top(self):
        nxt = self.automaton.transition(self.state, "H")
        self.assertEqual(nxt.support, (0,))
        self.assertIs(nxt.cls, HistoryClass.CLASS3)

    def test_shirk_probability_capped(self):
        """Test theta_2 shirks for sure when (1 - gamma*)/(1 - eta) exceeds 1."""
        state = replace(self.state, eta=0.6, posterior=(0.6, 0.4))
        p = self.automaton.prescribe(state)
        self.assertEqual(p.h_prob, {0: 1.0, 1: 0.0})
        self.assertAlmostEqual(p.p_h, 0.6)
        self.assertEqual(p.eta_h, 1)
        self.assertTrue(p.clamped)
        self.assertEqual(p.tags, {0: STRICT_H, 1: STRICT_L})
        nxt = self.automaton.transition(state, "L", p)
        self.assertEqual(nxt.support, (1,))
        self.assertAlmostEqual(nxt.p_h, 0.49 / 0.99)

    def test_waits_when_l_is_unfunded(self):
        """Test a Class-2 state whose p^H cannot fund the L step sits out a period."""
        state = replace(self.state, weights=(0.993, 0.003, 0.004))
        p = self.automaton.prescribe(state)
        self.assertTrue(p.waiting)
        self.assertEqual(p.buyer_action, "N")
        nxt = self.automaton.transition(state, "N", p)
        self.assertIs(nxt.cls, HistoryClass.CLASS2)
        self.assertEqual(nxt.posterior, state.posterior)
        for got, want in zip(nxt.weights, (0.983 / 0.99, 0.003 / 0.99, 0.004 / 0.99)):
            self.assertAlmostEqual(got, want, places=12)


class TestWaitingPeriods(unittest.TestCase):
    def setUp(self):
        self.spec = canonical()
        self.automaton = EquilibriumAutomaton(self.spec, derive_constants(self.spec))
        self.root = self.automaton.initial_state()

    def test_reserve_is_kept(self):
        """Test a Class-1 state below the H reserve has the buyer wait."""
        state = replace(self.root, weights=(0.4, 0.05, 0.55))
        self.assertTrue(self.automaton.can_wait(state))
        p = self.automaton.prescribe(state)
        self.assertTrue(p.waiting)
        self.assertEqual(p.outcome_probabilities(), {"N": 1, "H": 0, "L": 0})
        self.assertEqual(set(p.tags.values()), {STRICT_L})

    def test_wait_step_keeps_values(self):
        """Test a waiting period moves N weight forward and keeps every promised value."""
        state = replace(self.root, weights=(0.4, 0.05, 0.55))
        nxt = self.automaton.transition(state, "N")
        self.assertIs(nxt.cls, HistoryClass.CLASS1)
        self.assertEqual((nxt.eta, nxt.posterior, nxt.support), (state.eta, state.posterior, state.support))
        self.assertEqual(nxt.period, state.period + 1)
        for got, want in zip(nxt.weights, (0.39 / 0.99, 0.05 / 0.99, 0.55 / 0.99)):
            self.assertAlmostEqual(got, want, places=12)
        for j in range(self.spec.m):
            with self.subTest(type=j + 1):
                kept = self.spec.delta * self.automaton.continuation_value(nxt, j)
                self.assertAlmostEqual(kept, self.automaton.continuation_value(state, j), places=12)

    def test_wait_punishes_play(self):
        state = replace(self.root, weights=(0.4, 0.05, 0.55))
        self.assertIs(self.automaton.transition(state, "H").cls, HistoryClass.PUNISH)

    def test_wait_respects_theta1_cap(self):
        """Test no wait is offered when it would lift theta_1's value above 1 - theta_1."""
        state = replace(self.root, weights=(0.1, 0.05, 0.85))
        self.assertFalse(self.automaton.can_wait(state))
        p = self.automaton.prescribe(state)
        self.assertFalse(p.waiting)
        self.assertEqual(p.buyer_action, "T")

    def test_unfundable_state(self):
        """Test a state that can neither play H nor wait is off path."""
        state = replace(self.root, weights=(0.005, 0.005, 0.99))
        with self.assertRaises(StateOffPath):
            self.automaton.prescribe(state)

    def test_low_delta_paths_stay_on_path(self):
        """Test every history to depth 10 at delta = 0.95 stays on the simplex."""
        spec = canonical(delta=0.95)
        automaton = EquilibriumAutomaton(spec, derive_constants(spec))
        frontier = [automaton.initial_state()]
        for _ in range(10):
            nxt = []
            for state in frontier:
                p = automaton.prescribe(state)
                for y, prob in p.outcome_probabilities().items():
                    if prob > 0:
                        child = automaton.transition(state, y, p)
                        self.assertFalse(child.off_path)
                        self.assertAlmostEqual(sum(child.weights), 1.0, places=9)
                        self.assertGreaterEqual(min(child.weights), -1e-12)
                        nxt.append(child)
            frontier = nxt


class TestThreeTypes(unittest.TestCase):
    def setUp(self):
        """Set up the three-type automaton and a Class-2 state with theta_3 on top."""
        self.spec = GameSpec(b=1, c=1, thetas=(0.2, 0.35, 0.5), prior=(0.8, 0.1, 0.1), delta=0.995, gamma=0.52)
        self.consts = derive_constants(self.spec)
        self.automaton = EquilibriumAutomaton(self.spec, self.consts)
        self.state = EqState(eta=0.8, posterior=(0.8, 0.1, 0.1), weights=(0.5, 0.497, 0.003),
                             cls=HistoryClass.CLASS2, support=(0, 1, 2), bar_theta=2)

    def test_top_type_shirks_once(self):
        """Test with k_3 = 1 theta_3 shirks for sure at its first Class-2 state."""
        p = self.automaton.prescribe(self.state)
        self.assertEqual(p.h_prob, {0: 1.0, 1: 1.0, 2: 0.0})
        self.assertAlmostEqual(p.p_h, 0.9)
        nxt = self.automaton.transition(self.state, "L", p)
        self.assertIs(nxt.cls, HistoryClass.CLASS3)
        self.assertEqual(nxt.support, (2,))
        self.assertAlmostEqual(nxt.p_h, (0.497 - 0.002 / 0.5) / 0.995)

    def test_counter_spreads_shirking(self):
        """Test theta-bar shirks with probability 1/(k - l) and l counts its H periods."""
        automaton = EquilibriumAutomaton(self.spec, replace(self.consts, kj=(None, None, 5)))
        p = automaton.prescribe(self.state)
        self.assertAlmostEqual(p.h_prob[2], 0.8)
        self.assertAlmostEqual(p.p_h, 0.98)
        self.assertAlmostEqual(p.eta_h, 0.8 / 0.98)
        self.assertFalse(p.clamped)
        self.assertEqual(p.tags, {0: STRICT_H, 1: STRICT_H, 2: INDIFFERENT})
        nxt = automaton.transition(self.state, "H", p)
        self.assertIs(nxt.cls, HistoryClass.CLASS2)
        self.assertEqual((nxt.support, nxt.bar_theta, nxt.l), ((0, 1, 2), 2, 1))
        self.assertAlmostEqual(nxt.posterior[2], 0.08 / 0.98)
        for got, want in zip(nxt.weights, (0.5 / 0.995, 0.492 / 0.995, 0.003 / 0.995)):
            self.assertAlmostEqual(got, want, places=12)

    def test_last_chance_prunes_top(self):
        """Test at l = k - 1 theta-bar plays L for sure, so H prunes it and hands over to theta_2."""
        automaton = EquilibriumAutomaton(self.spec, replace(self.consts, kj=(None, None, 5)))
        state = replace(self.state, l=4)
        p = automaton.prescribe(state)
        self.assertEqual(p.h_prob[2], 0)
        self.assertEqual(p.tags[2], INDIFFERENT)
        nxt = automaton.transition(state, "H", p)
        self.assertEqual((nxt.support, nxt.bar_theta, nxt.l), ((0, 1), 1, 0))
        self.assertEqual(nxt.posterior[2], 0)
        self.assertAlmostEqual(nxt.eta, 0.8 / 0.9)
        handed = automaton.prescribe(nxt)
        self.assertEqual(handed.h_prob, {0: 1.0, 1: 0.0})
        self.assertTrue(handed.clamped)
        self.assertEqual(handed.tags[1], STRICT_L)

    def test_waits_below_reserve(self):
        """Test an unclamped Class-2 state below the H reserve waits."""
        self.assertGreater(self.consts.h_reserve, 0.1)
        automaton = EquilibriumAutomaton(self.spec, replace(self.consts, kj=(None, None, 5)))
        state = replace(self.state, weights=(0.897, 0.1, 0.003))
        p = automaton.prescribe(state)
        self.assertTrue(p.waiting)
        nxt = automaton.transition(state, "N", p)
        self.assertEqual((nxt.l, nxt.support, nxt.bar_theta), (0, (0, 1, 2), 2))
        self.assertAlmostEqual(nxt.p_h, 0.1 / 0.995)


class TestClassThree(unittest.TestCase):
    def setUp(self):
        self.spec = canonical()
        self.automaton = EquilibriumAutomaton(self.spec, derive_constants(self.spec))
        start = EqState(eta=0.0, posterior=(0.0, 1.0), weights=(0.4, 0.6, 0.0), cls=HistoryClass.CLASS3,
                        support=(1,), bar_theta=1)
        self.state = self.automaton._enter_schedule(start)

    def test_schedule_period(self):
        """Test an H-period asks for H and punishes L."""
        p = self.automaton.prescribe(self.state)
        self.assertEqual(p.buyer_action, "T")
        self.assertEqual(p.h_prob, {1: 1.0})
        punished = self.automaton.transition(self.state, "L", p)
        self.assertIs(punished.cls, HistoryClass.PUNISH)
        nxt = self.automaton.transition(self.state, "H", p)
        self.assertEqual(nxt.fm_cursor, 1)
        self.assertAlmostEqual(nxt.p_h, (0.6 - 0.01) / 0.99)


class TestDeltaGuard(unittest.TestCase):
    def test_rejects_low_delta(self):
        """Test the automaton refuses constants that fail the trust-return conditions."""
        spec = canonical(delta=0.5)
        consts = derive_constants(spec, strict=False)
        with self.assertRaises(DeltaTooLow):
            EquilibriumAutomaton(spec, consts)
        automaton = EquilibriumAutomaton(spec, consts, check_delta=False)
        self.assertEqual(automaton.initial_state().eta, 0.9)


class TestExactMode(unittest.TestCase):
    def test_class1_step(self):
        """Test the Class-1 numbers are exact rationals."""
        spec = canonical_exact()
        automaton = EquilibriumAutomaton(spec, derive_constants(spec))
        root = automaton.initial_state()
        p = automaton.prescribe(root)
        self.assertEqual(p.p_h, Fraction(1, 2))
        self.assertEqual(p.h_prob[0], Fraction(81, 160))
        self.assertEqual(p.h_prob[1], Fraction(71, 160))
        self.assertEqual(p.p_h * p.eta_h + (1 - p.p_h) * p.eta_l, root.eta)
        nxt = automaton.transition(root, "H", p)
        self.assertEqual(nxt.eta, Fraction(729, 800))
        self.assertEqual(sum(nxt.weights), 1)


class TestSchedule(unittest.TestCase):
    def test_emission_rule(self):
        """Test forced N below 1 - delta, forced H above delta, target rule between."""
        self.assertFalse(schedule_emits_h(0.05, 0.6, 0.9))
        self.assertTrue(schedule_emits_h(0.95, 0.99, 0.9))
        self.assertTrue(schedule_emits_h(0.6, 0.6, 0.9))
        self.assertFalse(schedule_emits_h(0.59, 0.6, 0.9))

    def test_first_emissions(self):
        stream = fm_schedule(0.6, 0.9, 0.2)
        self.assertEqual([next(stream) for _ in range(3)], ["H", "N", "H"])

    def test_exact_bounds(self):
        """Test partial sums and tail drift of the schedule in exact arithmetic."""
        q, delta = Fraction(3, 5), Fraction(9, 10)
        drift = (1 - delta) / delta
        stream = fm_schedule(q, delta, 0.2)
        partial, discount = Fraction(0), Fraction(1)
        for _ in range(200):
            emitted = next(stream)
            if emitted == "H":
                partial += (1 - delta) * discount
            discount *= delta
            self.assertTrue(q - drift <= stream.residual <= q + drift)
            self.assertEqual(partial + discount * stream.residual, q)
        self.assertLessEqual(abs(partial - q), discount)

    def test_float_partial_sum(self):
        q, delta = 0.6, 0.9
        stream = fm_schedule(q, delta, 0.2)
        partial, discount = 0.0, 1.0
        for _ in range(2000):
            if next(stream) == "H":
                partial += (1 - delta) * discount
            discount *= delta
        self.assertLessEqual(abs(partial - q), delta ** 2000 + 1e-9)

    def test_epsilon_too_small(self):
        with self.assertRaises(EpsilonTooSmallForDelta):
            fm_schedule(0.6, 0.9, 0.05)
        with self.assertRaises(ValueError):
            fm_schedule(1.5, 0.99, 0.2)


if __name__ == "__main__":
    unittest.main()
