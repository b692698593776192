"""Tests for the simulator.py module."""
import unittest
from fractions import Fraction

from reputation_engine.constants import derive_constants
from reputation_engine.equilibrium import HistoryClass
from reputation_engine.errors import EmptyTrace
from reputation_engine.game import GameSpec, v_of_gamma
from reputation_engine.simulator import (
    default_horizon,
    discounted_frequency,
    path_seed,
    real_model,
    run_experiment,
    simulate_path,
    simulate_paths,
    tail_bound,
)


def canonical(**overrides):
    params = dict(b=1, c=1, thetas=(0.2, 0.5), prior=(0.9, 0.1), delta=0.99, gamma=0.6)
    params.update(overrides)
    return GameSpec(**params)


class TestSeeds(unittest.TestCase):
    def test_path_seed(self):
        """Test per-path seeds are stable and distinct."""
        self.assertEqual(path_seed(0, 0, 0), path_seed(0, 0, 0))
        seeds = {path_seed(0, j, i) for j in range(2) for i in range(50)}
        self.assertEqual(len(seeds), 100)
        self.assertNotEqual(path_seed(0, 0, 0), path_seed(1, 0, 0))

    def test_default_horizon(self):
        self.assertEqual(default_horizon(0.99), 917)
        self.assertLessEqual(0.99 ** default_horizon(0.99), 1e-4)


class TestSimulatePath(unittest.TestCase):
    def setUp(self):
        self.spec = canonical()
        self.consts = derive_constants(self.spec)
        self.horizon = default_horizon(self.spec.delta)
        self.promised = v_of_gamma(self.spec, self.spec.gamma)

    def test_payoff_matches_promise(self):
        """Test every realized payoff equals the promised value."""
        for j in range(self.spec.m):
            for i in range(10):
                with self.subTest(type=j + 1, path=i):
                    trace = simulate_path(self.spec, self.consts, j, path_seed(0, j, i), self.horizon, record=False)
                    self.assertAlmostEqual(trace.payoff, self.promised[j], places=7)
                    self.assertTrue(trace.absorbed)

    def test_recorded_trace(self):
        """Test recording keeps one row per period and plays out the horizon."""
        trace = simulate_path(self.spec, self.consts, 0, 42, 300, record=True)
        self.assertEqual(len(trace.records), 300)
        self.assertEqual(len(trace.outcomes), 300)
        self.assertEqual(trace.records[0].cls, HistoryClass.CLASS1)
        self.assertAlmostEqual(trace.records[0].p_h, 0.5)
        self.assertEqual([r.period for r in trace.records[:3]], [0, 1, 2])
        self.assertLessEqual(trace.class2_count, self.consts.M)

    def test_reproducible(self):
        first = simulate_path(self.spec, self.consts, 1, 7, self.horizon, record=False)
        second = simulate_path(self.spec, self.consts, 1, 7, self.horizon, record=False)
        self.assertEqual(first.outcomes, second.outcomes)
        self.assertEqual(first.payoff, second.payoff)

    def test_frequency_accounting(self):
        """Test discounted frequencies sum to one and price the payoff."""
        for j in range(self.spec.m):
            trace = simulate_path(self.spec, self.consts, j, path_seed(3, j, 0), self.horizon, record=False)
            alpha = discounted_frequency(trace, self.spec.delta)
            self.assertAlmostEqual(alpha.n + alpha.h + alpha.l, 1.0, places=12)
            self.assertAlmostEqual(alpha.payoff(self.spec.thetas[j]), trace.payoff, places=9)
            self.assertEqual(tail_bound(trace, self.spec.delta), 0.0)

    def test_empty_trace(self):
        trace = simulate_path(self.spec, self.consts, 0, 1, 0)
        with self.assertRaises(EmptyTrace):
            discounted_frequency(trace, self.spec.delta)

    def test_kl_terms(self):
        """Test prediction errors are logged only while the type is unknown."""
        trace = simulate_path(self.spec, self.consts, 1, 5, self.horizon, record=True)
        active = [r for r in trace.records if r.cls in (HistoryClass.CLASS1, HistoryClass.CLASS2)]
        self.assertEqual(len(trace.kl_terms), len([r for r in active if r.buyer_action == "T"]))
        self.assertTrue(all(k >= 0 for k in trace.kl_terms))


class TestExperiments(unittest.TestCase):
    def setUp(self):
        self.spec = canonical()
        self.consts = derive_constants(self.spec)

    def test_run_experiment(self):
        """Test aggregation over a small batch of paths."""
        stats = run_experiment(self.spec, self.consts, n_paths=30, seed0=4)
        self.assertEqual(stats.horizon, 917)
        self.assertEqual(len(stats.per_type), 2)
        promised = v_of_gamma(self.spec, self.spec.gamma)
        for s in stats.per_type:
            with self.subTest(type=s.type_index + 1):
                self.assertEqual(s.n_paths, 30)
                self.assertEqual(s.truncated, 0)
                self.assertAlmostEqual(s.mean_payoff, promised[s.type_index], places=7)
                self.assertAlmostEqual(sum(s.alpha), 1.0, places=9)
                self.assertLessEqual(max(s.class2_counts), self.consts.M)
                self.assertEqual(sum(s.class2_counts.values()), 30)

    def test_worker_count_does_not_change_results(self):
        serial = simulate_paths(self.spec, self.consts, 0, 8, 400, seed0=2, workers=1)
        parallel = simulate_paths(self.spec, self.consts, 0, 8, 400, seed0=2, workers=2)
        self.assertEqual([t.outcomes for t in serial], [t.outcomes for t in parallel])
        self.assertEqual([t.payoff for t in serial], [t.payoff for t in parallel])

    def test_keep_traces(self):
        stats = run_experiment(self.spec, self.consts, n_paths=3, horizon=200, keep_traces=True, types=[1])
        self.assertEqual(list(stats.traces), [1])
        self.assertEqual(len(stats.traces[1]), 3)

    def test_rejects_empty_batch(self):
        with self.assertRaises(ValueError):
            run_experiment(self.spec, self.consts, n_paths=0)

    def test_exact_spec_runs_in_real_mode(self):
        """Test exact specs are simulated through a float copy."""
        spec = GameSpec(b=Fraction(1), c=Fraction(1), thetas=(Fraction(1, 5), Fraction(1, 2)),
                        prior=(Fraction(9, 10), Fraction(1, 10)), delta=Fraction(99, 100), gamma=Fraction(3, 5))
        real, consts = real_model(spec, derive_constants(spec))
        self.assertFalse(real.exact)
        self.assertFalse(consts.exact)
        traces = simulate_paths(spec, derive_constants(spec), 0, 2, 200, seed0=0)
        self.assertEqual(len(traces), 2)
        self.assertIsInstance(traces[0].payoff, float)


class TestHarderInstances(unittest.TestCase):
    def test_three_types(self):
        """Test every three-type path stays on path and keeps its promised payoff."""
        spec = GameSpec(b=1, c=1, thetas=(0.2, 0.35, 0.5), prior=(0.8, 0.1, 0.1), delta=0.995, gamma=0.52)
        consts = derive_constants(spec)
        promised = v_of_gamma(spec, spec.gamma)
        horizon = default_horizon(spec.delta)
        for j in range(spec.m):
            traces = simulate_paths(spec, consts, j, 100, horizon, seed0=11)
            for trace in traces:
                with self.subTest(type=j + 1, seed=trace.seed):
                    self.assertFalse(trace.final_state.off_path)
                    self.assertAlmostEqual(trace.payoff, promised[j], places=6)
                    alpha = discounted_frequency(trace, spec.delta)
                    self.assertAlmostEqual(sum(alpha.as_tuple()), 1.0, places=9)

    def test_canonical_at_lower_delta(self):
        """Test the canonical instance plays through at delta = 0.95, waiting periods included."""
        spec = canonical(delta=0.95)
        consts = derive_constants(spec)
        promised = v_of_gamma(spec, spec.gamma)
        for j in range(spec.m):
            traces = simulate_paths(spec, consts, j, 100, 1000, seed0=5, record=True)
            for trace in traces:
                with self.subTest(type=j + 1, seed=trace.seed):
                    self.assertTrue(trace.absorbed)
                    self.assertFalse(trace.final_state.off_path)
                    self.assertAlmostEqual(trace.payoff, promised[j], places=6)
                    for r in trace.records:
                        if r.buyer_action == "N" and r.cls in (HistoryClass.CLASS1, HistoryClass.CLASS2):
                            self.assertTrue(r.waiting)

    def test_absorption_grows_with_delta(self):
        """Test theta_2's mean absorption period increases with patience."""
        means = []
        for delta in (0.95, 0.97, 0.99):
            spec = canonical(delta=delta)
            stats = run_experiment(spec, derive_constants(spec), n_paths=100, horizon=3000, seed0=8, types=[1])
            self.assertEqual(stats.per_type[0].truncated, 0)
            means.append(stats.per_type[0].mean_absorption)
        self.assertLess(means[0], means[1])
        self.assertLess(means[1], means[2])


if __name__ == "__main__":
    unittest.main()
