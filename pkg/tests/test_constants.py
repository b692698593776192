"""Tests for the constants.py module."""
import math
import random
import unittest
from fractions import Fraction

from reputation_engine.constants import (
    DISCOUNT_SANDWICH,
    LAMBDA_CAP,
    RETURN_WINDOW,
    SINGLE_SHIRK,
    TRUST_RETURN,
    belief_floor,
    derive_constants,
    discount_conditions,
    learning_log_rate,
    revelation_counts,
    scaled_rational,
    simplest_between,
)
from reputation_engine.errors import DeltaTooLow
from reputation_engine.game import GameSpec


def canonical(**overrides):
    params = dict(b=1, c=1, thetas=(0.2, 0.5), prior=(0.9, 0.1), delta=0.99, gamma=0.6)
    params.update(overrides)
    return GameSpec(**params)


def canonical_exact(**overrides):
    params = dict(b=1, c=1, thetas=(Fraction(1, 5), Fraction(1, 2)), prior=(Fraction(9, 10), Fraction(1, 10)),
                  delta=Fraction(99, 100), gamma=Fraction(3, 5))
    params.update(overrides)
    return GameSpec(**params)


class TestRationalSelection(unittest.TestCase):
    def test_simplest_between(self):
        """Test the smallest-denominator rational on known intervals."""
        self.assertEqual(simplest_between(Fraction(1, 2), Fraction(3, 5)), Fraction(4, 7))
        self.assertEqual(simplest_between(Fraction(0), Fraction(1)), Fraction(1, 2))
        self.assertEqual(simplest_between(Fraction(1, 3), Fraction(1, 2)), Fraction(2, 5))
        self.assertEqual(simplest_between(Fraction(3, 2), Fraction(7, 2)), Fraction(2))

    def test_simplest_between_random(self):
        """Test no smaller denominator fits strictly inside the interval."""
        rng = random.Random(5)
        for _ in range(200):
            a, b = sorted(Fraction(rng.randint(0, 1000), rng.randint(1, 1000)) for _ in range(2))
            if a == b:
                continue
            with self.subTest(low=a, high=b):
                found = simplest_between(a, b)
                self.assertTrue(a < found < b)
                for q in range(1, found.denominator):
                    p = math.floor(a * q) + 1
                    self.assertFalse(Fraction(p, q) < b)

    def test_scaled_rational(self):
        """Test n/k = 4/7 scaled to 16/28 on the canonical instance."""
        n, k, base = scaled_rational(0.5, 0.6)
        self.assertEqual((n, k), (16, 28))
        self.assertEqual(base, Fraction(4, 7))
        self.assertLess(Fraction(n, k - 1), Fraction(3, 5))


class TestHelpers(unittest.TestCase):
    def test_revelation_counts(self):
        self.assertEqual(revelation_counts(0.5, (0.9, 0.1)), (None, None))
        self.assertEqual(revelation_counts(0.5, (0.8, 0.1, 0.1)), (None, None, 1))

    def test_belief_floor(self):
        self.assertAlmostEqual(belief_floor(0.5, (0.9, 0.1), (None, None)), 0.675)

    def test_learning_log_rate(self):
        self.assertGreater(learning_log_rate(0.1, 0.5, 15 / 28), 1e-6)
        self.assertLess(learning_log_rate(0.1, 0.5, 0.5), 0)

    def test_discount_conditions(self):
        """Test the trust-return conditions hold at 0.99 and fail at 0.5."""
        high = discount_conditions(0.99, 16, 28, 110 / 189, 3, 3)
        self.assertTrue(high[RETURN_WINDOW])
        self.assertTrue(high[SINGLE_SHIRK])
        self.assertIn(DISCOUNT_SANDWICH, high)
        low = discount_conditions(0.5, 16, 28, 110 / 189, 3, 3)
        self.assertFalse(low[RETURN_WINDOW])


class TestDeriveConstants(unittest.TestCase):
    def test_canonical(self):
        """Test the worked constants of the canonical instance."""
        consts = derive_constants(canonical())
        self.assertEqual(consts.gstar, 0.5)
        self.assertEqual((consts.n, consts.k), (16, 28))
        self.assertAlmostEqual(consts.gamma_tilde, 0.582011, places=6)
        self.assertAlmostEqual(consts.gamma_hat, 0.535714, places=6)
        self.assertAlmostEqual(consts.eta_star, 0.675)
        self.assertAlmostEqual(consts.lam, 0.1)
        self.assertEqual(consts.T, 3)
        self.assertEqual(consts.S, 159)
        self.assertEqual(consts.X, 8)
        self.assertEqual(consts.N, 3)
        self.assertEqual(consts.Kcap, 0)
        self.assertEqual(consts.M, 2)
        self.assertAlmostEqual(consts.Q_floor, consts.Y / 2 ** consts.M)
        self.assertGreater(consts.Y, 0)
        self.assertTrue(consts.delta_ok)
        self.assertAlmostEqual(consts.h_reserve, 1 - 0.99 ** 8)
        self.assertGreaterEqual(consts.h_reserve, 0.01 + 0.99 * consts.Q_floor)

    def test_exact(self):
        """Test exact specs keep the constants rational."""
        consts = derive_constants(canonical_exact())
        self.assertTrue(consts.exact)
        self.assertEqual(consts.gamma_tilde, Fraction(110, 189))
        self.assertEqual(consts.gamma_hat, Fraction(15, 28))
        self.assertEqual(consts.eta_star, Fraction(27, 40))
        self.assertEqual(consts.lam, LAMBDA_CAP)
        self.assertEqual((consts.T, consts.S, consts.X), (3, 159, 8))
        self.assertIsInstance(consts.Q_floor, Fraction)

    def test_delta_too_low(self):
        """Test delta = 0.5 fails with the return-window condition named."""
        with self.assertRaises(DeltaTooLow) as ctx:
            derive_constants(canonical(delta=0.5))
        err = ctx.exception
        self.assertIn(RETURN_WINDOW, err.failing)
        self.assertIn(RETURN_WINDOW, err.message)
        self.assertIsNotNone(err.threshold)
        self.assertTrue(0.5 < err.threshold < 0.99)
        self.assertEqual(err.to_dict()["error"], "DeltaTooLow")
        self.assertEqual(err.anchor, TRUST_RETURN)
        self.assertEqual(err.to_dict()["anchor"], TRUST_RETURN)
        self.assertIn(TRUST_RETURN, err.message)

    def test_delta_boundary(self):
        """Test the canonical instance accepts delta = 0.95 and rejects 0.9."""
        self.assertTrue(derive_constants(canonical(delta=0.95)).delta_ok)
        with self.assertRaises(DeltaTooLow) as ctx:
            derive_constants(canonical(delta=0.9))
        self.assertIn(RETURN_WINDOW, ctx.exception.failing)

    def test_non_strict(self):
        """Test non-strict derivation reports the flags instead of raising."""
        consts = derive_constants(canonical(delta=0.5), strict=False)
        self.assertFalse(consts.delta_ok)
        self.assertFalse(consts.delta_flags[RETURN_WINDOW])

    def test_three_types(self):
        """Test the three-type instance picks up a revelation count."""
        spec = GameSpec(b=1, c=1, thetas=(0.2, 0.35, 0.5), prior=(0.8, 0.1, 0.1), delta=0.995, gamma=0.52)
        consts = derive_constants(spec, strict=False)
        self.assertEqual(consts.kj, (None, None, 1))
        self.assertEqual(consts.Kcap, 1)
        self.assertTrue(0.4 <= consts.eta_star < 0.8)
        self.assertTrue(consts.delta_ok)
        self.assertAlmostEqual(consts.h_reserve, max(1 - 0.995 ** consts.X, 0.005 + 0.995 * consts.Q_floor))

    def test_to_dict(self):
        data = derive_constants(canonical()).to_dict()
        self.assertIn("delta_ok", data)
        self.assertEqual(data["S"], 159)


if __name__ == "__main__":
    unittest.main()
