"""Tests for the numeric.py module."""
import math
import unittest
from fractions import Fraction

from reputation_engine.numeric import as_number, bernoulli_kl, ceil_int, is_exact, tolerance, total, unit


class TestModes(unittest.TestCase):
    def test_is_exact(self):
        """Test that only all-Fraction inputs count as exact."""
        self.assertTrue(is_exact(Fraction(1, 3), Fraction(1, 2)))
        self.assertTrue(is_exact(Fraction(1, 3), 2))
        self.assertFalse(is_exact(Fraction(1, 3), 0.5))

    def test_as_number(self):
        """Test coercion keeps decimal literals exact."""
        self.assertEqual(as_number(0.1, True), Fraction(1, 10))
        self.assertEqual(as_number("0.99", True), Fraction(99, 100))
        self.assertIsInstance(as_number(Fraction(1, 4), False), float)

    def test_tolerance_and_unit(self):
        """Test per-mode tolerance and constants."""
        self.assertEqual(tolerance(True), 0)
        self.assertEqual(tolerance(False), 1e-12)
        self.assertEqual(unit(True), (Fraction(0), Fraction(1)))
        self.assertEqual(unit(False), (0.0, 1.0))

    def test_total(self):
        """Test exact sums stay rational and float sums are compensated."""
        self.assertEqual(total([Fraction(1, 3)] * 3), 1)
        self.assertEqual(total([0.1] * 10), 1.0)

    def test_ceil_int(self):
        """Test ceilings ignore float noise just above an integer."""
        self.assertEqual(ceil_int(3.0000000000000004), 3)
        self.assertEqual(ceil_int(2.5), 3)
        self.assertEqual(ceil_int(158.3), 159)


class TestBernoulliKl(unittest.TestCase):
    def test_values(self):
        """Test the divergence on known points."""
        self.assertEqual(bernoulli_kl(0.5, 0.5), 0.0)
        self.assertAlmostEqual(bernoulli_kl(1, 0.9), -math.log(0.9), places=12)
        self.assertAlmostEqual(bernoulli_kl(1, 0.9), 0.10536, places=5)

    def test_zero_log_zero(self):
        """Test 0 ln 0 = 0 at the boundary."""
        self.assertEqual(bernoulli_kl(0, 0), 0.0)
        self.assertEqual(bernoulli_kl(1, 1), 0.0)

    def test_unsupported_mass(self):
        """Test mass on an outcome predicted with probability 0 gives inf."""
        self.assertEqual(bernoulli_kl(0.5, 0), math.inf)
        self.assertEqual(bernoulli_kl(0.5, 1), math.inf)

    def test_nonnegative(self):
        for p in (0.1, 0.3, 0.7):
            for q in (0.2, 0.5, 0.9):
                with self.subTest(p=p, q=q):
                    self.assertGreaterEqual(bernoulli_kl(p, q), 0.0)


if __name__ == "__main__":
    unittest.main()
