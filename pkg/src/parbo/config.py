"""Run-configuration files: parsing, validation and object construction.

A run config is a TOML document with a top-level ``schema_version`` and the
sections ``[problem]``, ``[gp]``, ``[partitions]``, ``[benchmark]`` and
``[algorithms.<name>]``.  Unknown keys are rejected, and every validation
error names the line it refers to when one can be found.
"""

from __future__ import annotations

import hashlib
import json
import re
import sys
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .afopt import BoxDomain
from .algorithms import ALGORITHMS, AlgoConfig, Problem
from .exceptions import ConfigurationError, ParboError
from .partition import PartitionScheme, levelset_custom, levelset_uniform

SCHEMA_VERSION = 1

_TOP = {"schema_version", "problem", "gp", "partitions", "benchmark", "algorithms"}
_PROBLEM = {"kind", "lower", "upper", "split", "experiment_cost", "reactor", "reference", "golden"}
_REFERENCE = {"samples", "pairing", "grid_resolution", "seed"}
_GOLDEN = {"global_minimum", "local_minima", "grid_points"}
_GP = {"restarts"}
_LEVELSET = {"thresholds", "count", "probe_count", "seed"}
_VARIABLE = {"blocks"}
_BENCHMARK = {"run_count", "seed_base", "algorithms", "init_points"}
_ALGO = {
    "kappa", "batch", "iterations", "s_count", "phi", "epsilon", "splits", "partition",
    "use_reference_in_af", "sample_kappa", "kappa_rate", "aggregate", "common_random_numbers",
    "fantasy_refit", "share_overlap", "anchor_rule", "af_starts",
}


def default_config_path() -> Path:
    """Path of the shipped reactor benchmark config."""
    return Path(str(resources.files("parbo") / "data" / "default.toml"))


class ConfigError(ConfigurationError):
    """Validation error carrying an optional source line number."""

    def __init__(self, message, line=None, path=None):
        self.line = line
        self.path = path
        where = f"{path}:" if path else ""
        where += f"{line}: " if line else (" " if path else "")
        super().__init__(f"{where}{message}")


def _locate(text: str, section: str, key: str | None = None):
    """1-based line of ``key`` inside ``[section]``, or of the header itself."""
    current = ""
    header_line = None
    for no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        m = re.match(r"^\[\s*([^\]]+?)\s*\]$", line)
        if m:
            current = m.group(1)
            if current == section:
                header_line = no
            continue
        if current == section and key is not None:
            if re.match(rf"^{re.escape(key)}\s*=", line) or re.match(rf'^"{re.escape(key)}"\s*=', line):
                return no
    if key is not None and section:
        # dotted keys such as ``reactor.k0`` under the parent table
        parent, _, child = section.rpartition(".")
        if parent:
            found = _locate(text, parent, f"{child}.{key}")
            if found:
                return found
    return header_line


@dataclass
class RunConfig:
    """Parsed and validated run configuration."""

    data: dict
    text: str = ""
    path: str | None = None
    _cache: dict = field(default_factory=dict, repr=False)

    # access ---------------------------------------------------------------
    @property
    def problem(self) -> dict:
        return self.data["problem"]

    @property
    def benchmark(self) -> dict:
        return self.data.get("benchmark", {})

    @property
    def algorithm_names(self) -> list:
        return list(self.benchmark.get("algorithms", list(self.data.get("algorithms", {}))))

    @property
    def domain(self) -> BoxDomain:
        return BoxDomain(self.problem["lower"], self.problem["upper"])

    @property
    def golden(self) -> dict:
        return self.problem.get("golden", {})

    def config_hash(self) -> str:
        """SHA-256 of the canonical JSON form of the parsed document."""
        blob = json.dumps(self.data, sort_keys=True, separators=(",", ":"), default=float)
        return hashlib.sha256(blob.encode()).hexdigest()

    # construction ---------------------------------------------------------
    def reactor_params(self):
        from .reactor.params import ReactorParams

        return ReactorParams.from_dict(self.problem["reactor"])

    def reference(self):
        """Reference model of the problem (cached)."""
        if "reference" not in self._cache:
            from .reactor.problem import ReactorReference

            r = self.problem.get("reference", {})
            self._cache["reference"] = ReactorReference(
                self.reactor_params(),
                samples=r.get("samples", 25),
                pairing=r.get("pairing", "mean"),
                resolution=r.get("grid_resolution", 15),
                seed=r.get("seed", 0),
            )
        return self._cache["reference"]

    def build_problem(self, with_reference=True) -> Problem:
        from .reactor.problem import reactor_problem

        return reactor_problem(
            self.reactor_params(),
            split=self.problem.get("split", "reactor"),
            reference=self.reference() if with_reference else None,
            experiment_cost=float(self.problem.get("experiment_cost", 1.0)),
            domain=self.domain,
        )

    def partition(self, name: str) -> PartitionScheme:
        """Partition scheme ``[partitions.<name>]`` (cached)."""
        key = f"partition:{name}"
        if key in self._cache:
            return self._cache[key]
        spec = self.data.get("partitions", {}).get(name)
        if spec is None:
            raise ConfigError(f"no [partitions.{name}] section", path=self.path)
        if name == "variable":
            scheme = PartitionScheme("variable", [tuple(b) for b in spec["blocks"]])
        else:
            ref = self.reference()
            unit = BoxDomain.unit(self.domain.dim)
            if "thresholds" in spec:
                thr = [(-np.inf if t == "-inf" else np.inf if t == "inf" else float(t)) for t in spec["thresholds"]]
                scheme = levelset_custom(ref.gp, unit, thr)
            else:
                scheme = levelset_uniform(ref.gp, unit, int(spec["count"]), int(spec.get("probe_count", 4096)),
                                          rng=spec.get("seed", 0))
        self._cache[key] = scheme
        return scheme

    def algo_config(self, name: str, seed: int = 0) -> AlgoConfig:
        """Driver settings of ``[algorithms.<name>]`` with the given seed."""
        table = dict(self.data.get("algorithms", {}).get(name, {}))
        if name not in ALGORITHMS:
            raise ConfigError(f"unknown algorithm {name!r}", path=self.path)
        part = table.pop("partition", None)
        gp = self.data.get("gp", {})
        cfg = AlgoConfig(algorithm=name, seed=int(seed), gp_restarts=int(gp.get("restarts", 5)), **table)
        if part is not None:
            cfg.partition = self.partition(part)
        return cfg


def _check_keys(table, allowed, section, text, path):
    if not isinstance(table, dict):
        raise ConfigError(f"[{section}] must be a table", _locate(text, section), path)
    unknown = sorted(set(table) - allowed)
    if unknown:
        raise ConfigError(f"unknown key {unknown[0]!r} in [{section}]", _locate(text, section, unknown[0]), path)


def validate(data: dict, text: str = "", path=None) -> None:
    """Raise :class:`ConfigError` on the first schema or invariant violation."""
    _check_keys(data, _TOP, "", text, path)
    version = data.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ConfigError(f"schema_version must be {SCHEMA_VERSION}, got {version!r}",
                          _locate(text, "", "schema_version"), path)
    if "problem" not in data:
        raise ConfigError("missing [problem] section", path=path)
    prob = data["problem"]
    _check_keys(prob, _PROBLEM, "problem", text, path)
    if prob.get("kind", "reactor") != "reactor":
        raise ConfigError(f"unknown problem kind {prob.get('kind')!r}", _locate(text, "problem", "kind"), path)
    try:
        BoxDomain(prob["lower"], prob["upper"])
    except KeyError as exc:
        raise ConfigError(f"[problem] needs {exc.args[0]!r}", _locate(text, "problem"), path) from None
    except ParboError as exc:
        raise ConfigError(f"invalid domain bounds: {exc}", _locate(text, "problem", "lower"), path) from None
    if prob.get("split", "reactor") not in ("reactor", "economic"):
        raise ConfigError("split must be 'reactor' or 'economic'", _locate(text, "problem", "split"), path)
    if not float(prob.get("experiment_cost", 1.0)) > 0:
        raise ConfigError("experiment_cost must be positive", _locate(text, "problem", "experiment_cost"), path)
    _check_keys(prob.get("reference", {}), _REFERENCE, "problem.reference", text, path)
    _check_keys(prob.get("golden", {}), _GOLDEN, "problem.golden", text, path)
    if "reactor" not in prob:
        raise ConfigError("missing [problem.reactor] section", path=path)
    from .reactor.params import ReactorParams

    try:
        ReactorParams.from_dict(prob["reactor"])
    except (ParboError, TypeError) as exc:
        msg = str(exc)
        m = re.search(r"'(\w+)'", msg) or re.match(r"(\w+) ", msg)
        line = _locate(text, "problem.reactor", m.group(1)) if m else _locate(text, "problem.reactor")
        raise ConfigError(f"[problem.reactor]: {msg}", line, path) from None

    gp = data.get("gp", {})
    _check_keys(gp, _GP, "gp", text, path)
    if "restarts" in gp and int(gp["restarts"]) < 1:
        raise ConfigError("gp.restarts must be at least 1", _locate(text, "gp", "restarts"), path)

    parts = data.get("partitions", {})
    _check_keys(parts, {"levelset", "variable"}, "partitions", text, path)
    d = len(prob["lower"])
    if "variable" in parts:
        _check_keys(parts["variable"], _VARIABLE, "partitions.variable", text, path)
        line = _locate(text, "partitions.variable", "blocks")
        blocks = parts["variable"].get("blocks")
        if not blocks:
            raise ConfigError("variable partition needs nonempty blocks", line, path)
        flat = [int(i) for b in blocks for i in b]
        if len(flat) != len(set(flat)):
            raise ConfigError("variable blocks must be disjoint: a variable appears in more than one block",
                              line, path)
        if any(i < 0 or i >= d for i in flat):
            raise ConfigError(f"variable blocks refer to dimensions outside 0..{d - 1}", line, path)
    if "levelset" in parts:
        ls = parts["levelset"]
        _check_keys(ls, _LEVELSET, "partitions.levelset", text, path)
        if ("thresholds" in ls) == ("count" in ls):
            raise ConfigError("level-set partition needs exactly one of 'thresholds' or 'count'",
                              _locate(text, "partitions.levelset"), path)
        if "thresholds" in ls:
            thr = [(-np.inf if t == "-inf" else np.inf if t == "inf" else float(t)) for t in ls["thresholds"]]
            if len(thr) < 2 or np.any(np.diff(thr) <= 0):
                raise ConfigError("level-set thresholds must be strictly increasing",
                                  _locate(text, "partitions.levelset", "thresholds"), path)
        elif int(ls["count"]) < 1:
            raise ConfigError("level-set count must be at least 1", _locate(text, "partitions.levelset", "count"), path)

    algos = data.get("algorithms", {})
    if not isinstance(algos, dict):
        raise ConfigError("[algorithms] must be a table of tables", _locate(text, "algorithms"), path)
    for name, table in algos.items():
        section = f"algorithms.{name}"
        if name not in ALGORITHMS:
            raise ConfigError(f"unknown algorithm {name!r}", _locate(text, section), path)
        _check_keys(table, _ALGO, section, text, path)
        part = table.get("partition")
        if part is not None and part not in parts:
            raise ConfigError(f"partition {part!r} has no [partitions.{part}] section",
                              _locate(text, section, "partition"), path)
        if float(table.get("kappa", 2.0)) < 0:
            raise ConfigError("kappa must be nonnegative", _locate(text, section, "kappa"), path)
        kwargs = {k: v for k, v in table.items() if k != "partition"}
        try:
            import warnings

            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                cfg = AlgoConfig(algorithm=name, **kwargs)
                if part is not None:
                    # placeholder of the right kind; the real scheme needs the reference model
                    cfg.partition = PartitionScheme("variable" if part == "variable" else "levelset",
                                                    [(0,)] if part == "variable" else [None])
                cfg.resolved()
        except (ParboError, TypeError) as exc:
            raise ConfigError(f"[{section}]: {exc}", _locate(text, section), path) from None

    bench = data.get("benchmark", {})
    _check_keys(bench, _BENCHMARK, "benchmark", text, path)
    if int(bench.get("run_count", 25)) < 1:
        raise ConfigError("run_count must be at least 1", _locate(text, "benchmark", "run_count"), path)
    for name in bench.get("algorithms", []):
        if name not in ALGORITHMS:
            raise ConfigError(f"unknown algorithm {name!r} in benchmark list",
                              _locate(text, "benchmark", "algorithms"), path)


def loads(text: str, path=None) -> RunConfig:
    """Parse and validate a config document."""
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        m = re.search(r"line (\d+)", str(exc))
        raise ConfigError(f"parse error: {exc}", int(m.group(1)) if m else None, path) from None
    validate(data, text, path)
    return RunConfig(data, text, None if path is None else str(path))


def load(path) -> RunConfig:
    """Read, parse and validate a config file."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", path=str(path)) from None
    return loads(text, path)
