"""Run configuration: a strict JSON document with every default filled in."""
import copy
import json
import logging
from dataclasses import asdict, dataclass, field, fields, replace
from fractions import Fraction
from pathlib import Path
from typing import Any, Dict, Optional, Sequence

from .audit import AuditSettings
from .errors import ParseError, ReputationError, ValidationError
from .game import GameSpec, GeneralGame, gamma_star, variant_game
from .numeric import Number, as_number, total

logger = logging.getLogger(__name__)

SCHEMA_VERSION = "1"
VARIANTS = ("trust-sequential", "trust-simultaneous", "capital-taxation", "limit-pricing", "monetary-policy",
            "general")
FORMATS = ("json", "csv", "both")

DEFAULT_GAME: Dict[str, Any] = {
    "b": 1, "c": 1, "thetas": [0.2, 0.5], "prior": [0.9, 0.1], "delta": 0.99, "gamma": 0.6,
    "d": None, "x1": None, "x2": None, "y1": None, "y2": None,
}
GENERAL_KEYS = ("a1", "a1_order", "a2", "u1", "u2", "thetas", "name")
AUDIT_KEYS = ("depth", "n_sampled", "max_depth", "n_states", "recursion_depth", "tol", "kl_eps", "freq_eps",
              "window", "max_len", "frontload_delta")


@dataclass
class ExperimentSettings:
    n_paths: int = 2000
    horizon: Optional[int] = None
    seed0: int = 0
    workers: int = 1


@dataclass
class OutputSettings:
    dir: str = "out"
    format: str = "json"


@dataclass
class RunConfig:
    schema: str = SCHEMA_VERSION
    variant: str = "trust-sequential"
    game: Dict[str, Any] = field(default_factory=lambda: copy.deepcopy(DEFAULT_GAME))
    general: Optional[Dict[str, Any]] = None
    experiment: ExperimentSettings = field(default_factory=ExperimentSettings)
    audit: AuditSettings = field(default_factory=AuditSettings)
    output: OutputSettings = field(default_factory=OutputSettings)
    exact: bool = False

    def spec(self) -> GameSpec:
        """Trust-game model used for constants, simulation and audits."""
        g = self.game
        try:
            return GameSpec(
                b=self._num(g["b"]), c=self._num(g["c"]),
                thetas=tuple(self._num(t) for t in g["thetas"]),
                prior=tuple(self._num(p) for p in g["prior"]),
                delta=self._num(g["delta"]), gamma=self._num(g["gamma"]),
            )
        except ReputationError as exc:
            raise ValidationError(exc.message, field="game") from exc

    def stage_game(self) -> GeneralGame:
        """GeneralGame encoding of the configured variant."""
        try:
            if self.variant == "general":
                block = self.general or {}
                return GeneralGame(
                    a1=tuple(block["a1"]), a2=tuple(block["a2"]),
                    thetas=tuple(self._num(t) for t in block["thetas"]),
                    u1=[[[self._num(x) for x in row] for row in table] for table in block["u1"]],
                    u2=[[self._num(x) for x in row] for row in block["u2"]],
                    a1_order=frozenset(tuple(pair) for pair in block.get("a1_order") or ()),
                    name=block.get("name") or "general",
                )
            g = self.game
            d = None if g.get("d") is None else [self._num(x) for x in g["d"]]
            monetary = None
            if self.variant == "monetary-policy":
                monetary = {k: self._num(g[k]) for k in ("x1", "x2", "y1", "y2")}
            return variant_game(self.variant, [self._num(t) for t in g["thetas"]], self._num(g["b"]),
                                self._num(g["c"]), d, monetary)
        except ReputationError as exc:
            raise ValidationError(exc.message, field="general" if self.variant == "general" else "game") from exc

    def audit_settings(self) -> AuditSettings:
        return replace(self.audit, n_paths=self.experiment.n_paths, horizon=self.experiment.horizon,
                       seed=self.experiment.seed0, workers=self.experiment.workers)

    def _num(self, value: Any) -> Number:
        return as_number(value, self.exact)

    def to_dict(self) -> Dict[str, Any]:
        audit = {k: getattr(self.audit, k) for k in AUDIT_KEYS}
        return {
            "schema": self.schema,
            "variant": self.variant,
            "exact": self.exact,
            "game": copy.deepcopy(self.game),
            "general": copy.deepcopy(self.general),
            # workers never changes results, so it stays out of the echo
            "experiment": {k: v for k, v in asdict(self.experiment).items() if k != "workers"},
            "audit": audit,
            "output": asdict(self.output),
        }


def _decode(text: str, exact: bool) -> Any:
    try:
        return json.loads(text, parse_float=Fraction if exact else float)
    except json.JSONDecodeError as exc:
        raise ParseError(f"malformed configuration: {exc.msg}", line=exc.lineno, column=exc.colno) from exc


def _check_keys(block: Any, allowed: Sequence[str], path: str):
    if not isinstance(block, dict):
        raise ValidationError(f"{path or 'document'} must be an object", field=path or None)
    for key in block:
        if key not in allowed:
            dotted = f"{path}.{key}" if path else key
            raise ValidationError(f"unknown key '{dotted}'", field=dotted)


def _is_number(value: Any) -> bool:
    return isinstance(value, (int, float, Fraction)) and not isinstance(value, bool)


def _number(block: Dict[str, Any], key: str, path: str, optional: bool = False):
    value = block.get(key)
    if value is None and optional:
        return
    if not _is_number(value):
        raise ValidationError(f"{path}.{key} must be a number", field=f"{path}.{key}")


def _number_list(block: Dict[str, Any], key: str, path: str, optional: bool = False):
    value = block.get(key)
    if value is None and optional:
        return
    if not isinstance(value, list) or not value or not all(_is_number(x) for x in value):
        raise ValidationError(f"{path}.{key} must be a non-empty list of numbers", field=f"{path}.{key}")


def _number_table(value: Any, dotted: str, shape: Sequence[int]):
    """Nested lists of numbers, ``shape[0]`` entries at the outer level."""
    if not shape:
        if not _is_number(value):
            raise ValidationError(f"{dotted} must be a number", field=dotted)
        return
    if not isinstance(value, list) or len(value) != shape[0]:
        raise ValidationError(f"{dotted} must be a list of {shape[0]} entries", field=dotted)
    for i, item in enumerate(value):
        _number_table(item, f"{dotted}[{i}]", shape[1:])


def _integer(value: Any, dotted: str, minimum: int, optional: bool = False):
    if value is None and optional:
        return
    if not isinstance(value, int) or isinstance(value, bool) or value < minimum:
        raise ValidationError(f"{dotted} must be an integer >= {minimum}", field=dotted)


def _validate_game(game: Dict[str, Any], variant: str):
    for key in ("b", "c", "delta", "gamma"):
        _number(game, key, "game")
    for key in ("thetas", "prior"):
        _number_list(game, key, "game")
    _number_list(game, "d", "game", optional=True)
    for key in ("x1", "x2", "y1", "y2"):
        _number(game, key, "game", optional=variant != "monetary-policy")
    if len(game["prior"]) != len(game["thetas"]):
        raise ValidationError("prior needs one entry per theta", field="game.prior")
    if any(p <= 0 for p in game["prior"]):
        raise ValidationError("prior entries must be positive", field="game.prior")
    if abs(float(total(game["prior"])) - 1.0) > 1e-12:
        raise ValidationError("prior must sum to 1", field="game.prior")
    if game["b"] <= 0 or game["c"] <= 0:
        raise ValidationError("b and c must be positive", field="game.b" if game["b"] <= 0 else "game.c")
    gstar = gamma_star(game["b"], game["c"])
    if not gstar < game["gamma"] < 1:
        raise ValidationError(
            f"gamma must lie in (gamma*, 1) = ({float(gstar):.6g}, 1) with gamma* = c/(b+c): "
            "v(gamma) is attained for patient enough players only on this open interval; "
            f"got {float(game['gamma']):.6g}",
            field="game.gamma",
        )


def _validate_general(block: Any):
    _check_keys(block, GENERAL_KEYS, "general")
    for key in ("a1", "a2", "u1", "u2", "thetas"):
        if key not in block:
            raise ValidationError(f"general.{key} is required", field=f"general.{key}")
    for key in ("a1", "a2"):
        names = block[key]
        if not isinstance(names, list) or not names or not all(isinstance(x, str) for x in names):
            raise ValidationError(f"general.{key} must be a non-empty list of action names", field=f"general.{key}")
    _number_list(block, "thetas", "general")
    rows, cols = len(block["a1"]), len(block["a2"])
    _number_table(block["u1"], "general.u1", (len(block["thetas"]), rows, cols))
    _number_table(block["u2"], "general.u2", (rows, cols))


def parse_config(text: str, exact: bool = False) -> RunConfig:
    """Validate a configuration document and fill in every default."""
    document = _decode(text, exact)
    _check_keys(document, ("schema", "variant", "game", "general", "experiment", "audit", "output"), "")
    schema = str(document.get("schema", SCHEMA_VERSION))
    if schema != SCHEMA_VERSION:
        raise ValidationError(f"unsupported schema '{schema}', expected '{SCHEMA_VERSION}'", field="schema")
    variant = document.get("variant", "trust-sequential")
    if variant not in VARIANTS:
        raise ValidationError(f"variant must be one of {', '.join(VARIANTS)}", field="variant")

    game = copy.deepcopy(DEFAULT_GAME)
    given = document.get("game", {})
    _check_keys(given, tuple(DEFAULT_GAME), "game")
    game.update(given)
    _validate_game(game, variant)

    general = document.get("general")
    if variant == "general":
        if general is None:
            raise ValidationError("variant 'general' needs a general block", field="general")
        _validate_general(general)
    elif general is not None:
        raise ValidationError("a general block is only allowed with variant 'general'", field="general")

    experiment_block = document.get("experiment", {})
    _check_keys(experiment_block, [f.name for f in fields(ExperimentSettings)], "experiment")
    experiment = ExperimentSettings(**experiment_block)
    _integer(experiment.n_paths, "experiment.n_paths", 1)
    _integer(experiment.horizon, "experiment.horizon", 0, optional=True)
    _integer(experiment.seed0, "experiment.seed0", 0)
    _integer(experiment.workers, "experiment.workers", 1)

    audit_block = document.get("audit", {})
    _check_keys(audit_block, AUDIT_KEYS, "audit")
    audit = AuditSettings(**audit_block)
    for key in ("depth", "n_sampled", "max_depth", "n_states", "recursion_depth", "max_len"):
        _integer(getattr(audit, key), f"audit.{key}", 0)
    materialized = asdict(audit)
    for key in ("tol", "kl_eps", "window", "freq_eps", "frontload_delta"):
        _number(materialized, key, "audit", optional=key in ("freq_eps", "frontload_delta"))
    # tolerances are compared against floating-point statistics
    audit = replace(audit, tol=float(audit.tol), kl_eps=float(audit.kl_eps), window=float(audit.window),
                    freq_eps=None if audit.freq_eps is None else float(audit.freq_eps))

    output_block = document.get("output", {})
    _check_keys(output_block, [f.name for f in fields(OutputSettings)], "output")
    output = OutputSettings(**output_block)
    if output.format not in FORMATS:
        raise ValidationError(f"output.format must be one of {', '.join(FORMATS)}", field="output.format")

    config = RunConfig(schema=schema, variant=variant, game=game, general=general, experiment=experiment,
                       audit=audit, output=output, exact=exact)
    config.spec()
    return config


def load_config(path: Optional[Path], exact: bool = False) -> RunConfig:
    """Read ``path``; without one, the built-in defaults are used."""
    if path is None:
        logger.info("No config given, using the built-in instance")
        return parse_config("{}", exact)
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"{path} not found", field="config")
    logger.info(f"Loading config from {path}")
    with open(path, "r") as f:
        return parse_config(f.read(), exact)


def apply_overrides(config: RunConfig, seed: Optional[int] = None, paths: Optional[int] = None,
                    horizon: Optional[int] = None, out: Optional[str] = None, fmt: Optional[str] = None,
                    depth: Optional[int] = None) -> RunConfig:
    """Command-line flags take precedence over the document."""
    experiment = replace(
        config.experiment,
        seed0=config.experiment.seed0 if seed is None else seed,
        n_paths=config.experiment.n_paths if paths is None else paths,
        horizon=config.experiment.horizon if horizon is None else horizon,
    )
    _integer(experiment.n_paths, "experiment.n_paths", 1)
    _integer(experiment.seed0, "experiment.seed0", 0)
    _integer(experiment.horizon, "experiment.horizon", 0, optional=True)
    output = replace(config.output, dir=out or config.output.dir, format=fmt or config.output.format)
    if output.format not in FORMATS:
        raise ValidationError(f"output.format must be one of {', '.join(FORMATS)}", field="output.format")
    audit = config.audit if depth is None else replace(config.audit, depth=depth)
    _integer(audit.depth, "audit.depth", 0)
    return replace(config, experiment=experiment, output=output, audit=audit)
