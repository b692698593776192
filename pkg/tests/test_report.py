"""Tests for the report.py module."""
import json
import shutil
import tempfile
import unittest
from fractions import Fraction
from pathlib import Path

import numpy as np

from reputation_engine.constants import derive_constants
from reputation_engine.equilibrium import HistoryClass
from reputation_engine.game import GameSpec
from reputation_engine.report import ReportBundle, csv_value, dumps, write_bundle
from reputation_engine.simulator import run_experiment, simulate_paths


class TestDumps(unittest.TestCase):
    def test_float_format(self):
        """Test floats are written in their shortest round-trip form."""
        self.assertEqual(dumps(0.1), "0.1")
        self.assertEqual(float(dumps(1 / 3)), 1 / 3)
        self.assertEqual(dumps(1.0), "1.0")
        self.assertEqual(dumps(np.float64(0.5)), "0.5")

    def test_special_values(self):
        self.assertEqual(dumps(Fraction(2, 3)), '"2/3"')
        self.assertEqual(dumps(float("inf")), '"inf"')
        self.assertEqual(dumps(float("-inf")), '"-inf"')
        self.assertEqual(dumps(HistoryClass.CLASS3), '"Class3"')
        self.assertEqual(dumps(None), "null")
        self.assertEqual(dumps(True), "true")
        self.assertEqual(dumps(float("nan")), '"nan"')

    def test_valid_json(self):
        payload = {"a": [1, 2.5, Fraction(1, 3)], "b": {"c": (0.2, None)}, "d": {}, "e": []}
        decoded = json.loads(dumps(payload))
        self.assertEqual(decoded, {"a": [1, 2.5, "1/3"], "b": {"c": [0.2, None]}, "d": {}, "e": []})

    def test_stable(self):
        payload = {"x": 1 / 3, "y": [Fraction(5, 7), 2]}
        self.assertEqual(dumps(payload), dumps(payload))

    def test_csv_value(self):
        self.assertEqual(csv_value(None), "")
        self.assertEqual(csv_value(Fraction(1, 2)), "0.5")
        self.assertEqual(csv_value(HistoryClass.CLASS1), "Class1")
        self.assertEqual(csv_value(0.1), "0.10000000000000001")


class TestWriteBundle(unittest.TestCase):
    def setUp(self):
        self.test_dir = tempfile.mkdtemp()
        self.spec = GameSpec(b=1, c=1, thetas=(0.2, 0.5), prior=(0.9, 0.1), delta=0.99, gamma=0.6)
        self.consts = derive_constants(self.spec)

    def tearDown(self):
        shutil.rmtree(self.test_dir)

    def test_json_only(self):
        bundle = ReportBundle(command="constants", config={}, constants=self.consts.to_dict())
        written = write_bundle(bundle, Path(self.test_dir), "json", self.spec)
        self.assertEqual([p.name for p in written], ["report.json"])
        with open(written[0]) as f:
            data = json.load(f)
        self.assertEqual(data["command"], "constants")
        self.assertEqual(data["constants"]["S"], 159)

    def test_both_formats(self):
        """Test stats, traces and audit files land in the output directory."""
        stats = run_experiment(self.spec, self.consts, n_paths=4, horizon=300)
        traces = {j: simulate_paths(self.spec, self.consts, j, 2, 50, 0, record=True) for j in range(2)}
        bundle = ReportBundle(command="simulate", config={}, stats=stats, traces=traces,
                              audit={"passed": True, "checks": []})
        written = write_bundle(bundle, Path(self.test_dir), "both", self.spec)
        names = {p.relative_to(self.test_dir).as_posix() for p in written}
        self.assertIn("report.json", names)
        self.assertIn("audit.json", names)
        self.assertIn("stats.csv", names)
        self.assertEqual(len([n for n in names if n.startswith("traces/")]), 4)
        trace_file = next(p for p in written if p.parent.name == "1")
        with open(trace_file) as f:
            lines = f.read().splitlines()
        self.assertEqual(lines[0], "period,outcome,eta,class,pN,pH,pL,h_1,h_2")
        self.assertEqual(len(lines), 51)


if __name__ == "__main__":
    unittest.main()
