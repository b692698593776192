"""Stable JSON and CSV output."""
import csv
import enum
import json
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np

from .game import GameSpec
from .simulator import ExperimentStats, Trace

logger = logging.getLogger(__name__)

SCHEMA_VERSION = "1"
TRACE_COLUMNS = ("period", "outcome", "eta", "class", "pN", "pH", "pL")


@dataclass
class ReportBundle:
    command: str
    config: Dict[str, Any]
    schema: str = SCHEMA_VERSION
    payoff_table: Optional[List[Dict[str, Any]]] = None
    lp_check: Optional[List[Dict[str, Any]]] = None
    constants: Optional[Dict[str, Any]] = None
    stats: Optional[ExperimentStats] = None
    audit: Optional[Dict[str, Any]] = None
    traces: Dict[int, List[Trace]] = field(default_factory=dict)
    passed: bool = True

    def to_dict(self, spec: Optional[GameSpec] = None) -> Dict[str, Any]:
        data: Dict[str, Any] = {"schema": self.schema, "command": self.command, "passed": self.passed,
                                "config": self.config}
        if self.payoff_table is not None:
            data["payoff_table"] = self.payoff_table
        if self.lp_check is not None:
            data["lp_check"] = self.lp_check
        if self.constants is not None:
            data["constants"] = self.constants
        if self.stats is not None:
            data["stats"] = stats_to_dict(self.stats, spec)
        if self.audit is not None:
            data["audit"] = self.audit
        return data


def format_fraction(value: Fraction) -> str:
    return f"{value.numerator}/{value.denominator}"


def plain(obj: Any) -> Any:
    """Convert numpy scalars, enums, Fractions, tuples and sets to plain JSON-ready values.

    Fractions become "p/q" strings and non-finite floats become "nan", "inf" or "-inf".
    """
    if hasattr(obj, "to_dict"):
        return plain(obj.to_dict())
    if isinstance(obj, Fraction):
        return format_fraction(obj)
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    if isinstance(obj, enum.Enum):
        return obj.value
    if isinstance(obj, np.generic):
        return plain(obj.item())
    if isinstance(obj, dict):
        return {str(k): plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [plain(v) for v in obj]
    if isinstance(obj, (set, frozenset)):
        return sorted(plain(v) for v in obj)
    return obj


def dumps(obj: Any, indent: int = 2) -> str:
    """JSON text; floats keep their shortest round-trip repr."""
    return json.dumps(plain(obj), indent=indent)


def csv_value(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, enum.Enum):
        return value.value
    if isinstance(value, Fraction):
        return format(float(value), ".17g")
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


def stats_to_dict(stats: ExperimentStats, spec: Optional[GameSpec] = None) -> Dict[str, Any]:
    rows = []
    for s in stats.per_type:
        kl = np.array(s.kl_sums, dtype=float)
        rows.append({
            "type": s.type_index + 1,
            "theta": None if spec is None else spec.thetas[s.type_index],
            "n_paths": s.n_paths,
            "mean_payoff": s.mean_payoff,
            "se_payoff": s.se_payoff,
            "alpha": {"N": s.alpha[0], "H": s.alpha[1], "L": s.alpha[2]},
            "mean_absorption": s.mean_absorption,
            "se_absorption": s.se_absorption,
            "class2_counts": {str(k): v for k, v in s.class2_counts.items()},
            "eta_hit_fraction": s.eta_hit_fraction,
            "truncated": s.truncated,
            "mean_kl_sum": float(kl.mean()) if len(kl) else None,
        })
    return {"n_paths": stats.n_paths, "horizon": stats.horizon, "seed0": stats.seed0, "per_type": rows}


def write_json(path: Path, payload: Any):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        f.write(dumps(payload))
        f.write("\n")


def write_stats_csv(path: Path, stats: ExperimentStats, spec: Optional[GameSpec] = None):
    header = ["type", "theta", "n_paths", "mean_payoff", "se_payoff", "alpha_N", "alpha_H", "alpha_L",
              "mean_absorption", "se_absorption", "eta_hit_fraction", "truncated", "mean_kl_sum", "class2_counts"]
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(header)
        for row in stats_to_dict(stats, spec)["per_type"]:
            counts = ";".join(f"{k}:{v}" for k, v in row["class2_counts"].items())
            writer.writerow([csv_value(x) for x in (
                row["type"], row["theta"], row["n_paths"], row["mean_payoff"], row["se_payoff"],
                row["alpha"]["N"], row["alpha"]["H"], row["alpha"]["L"], row["mean_absorption"],
                row["se_absorption"], row["eta_hit_fraction"], row["truncated"], row["mean_kl_sum"],
            )] + [counts])


def write_trace_csv(path: Path, trace: Trace, m: int):
    """One row per recorded period with the fixed columns and per-type H-probabilities."""
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(list(TRACE_COLUMNS) + [f"h_{j + 1}" for j in range(m)])
        for r in trace.records:
            writer.writerow([csv_value(x) for x in (r.period, r.outcome, r.eta, r.cls, *r.weights)] +
                            [csv_value(r.h_prob.get(j)) for j in range(m)])


def write_bundle(bundle: ReportBundle, out_dir: Path, fmt: str = "json",
                 spec: Optional[GameSpec] = None) -> List[Path]:
    """Write the files a command produced; returns the paths written."""
    out_dir = Path(out_dir)
    written: List[Path] = []
    if fmt in ("json", "both"):
        write_json(out_dir / "report.json", bundle.to_dict(spec))
        written.append(out_dir / "report.json")
        if bundle.audit is not None:
            write_json(out_dir / "audit.json", bundle.audit)
            written.append(out_dir / "audit.json")
    if fmt in ("csv", "both"):
        if bundle.stats is not None:
            write_stats_csv(out_dir / "stats.csv", bundle.stats, spec)
            written.append(out_dir / "stats.csv")
        m = spec.m if spec is not None else 1 + max((t.type_index for ts in bundle.traces.values() for t in ts),
                                                   default=0)
        for j, traces in sorted(bundle.traces.items()):
            for trace in traces:
                path = out_dir / "traces" / str(j + 1) / f"{trace.seed}.csv"
                write_trace_csv(path, trace, m)
                written.append(path)
    for path in written:
        logger.info(f"Wrote {path}")
    return written
