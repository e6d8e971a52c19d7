"""Experiment configuration files and report emission."""
from __future__ import annotations

import csv
import io
import json
import os
import subprocess
import tempfile
from dataclasses import asdict, dataclass, field, fields
from importlib import metadata
from pathlib import Path
from typing import Any, Optional

SUBCOMMANDS = ("estimate", "compare", "poisson", "tail", "wishart", "lemma1", "verify-all")
FORMATS = ("json", "csv")

# keys allowed inside "params" / "params_b"
PARAM_KEYS = frozenset({
    "kind", "m", "n", "b", "bernoulli_relaxed", "t", "z", "ts", "power", "regime", "g", "G",
    "cutoff", "correct", "x", "delta", "value", "x_grid", "statistic", "op", "alpha", "y",
    "gamma", "sigma2", "scaled", "tol", "only",
})


class ConfigError(ValueError):
    """Malformed configuration; the message names the offending location."""


@dataclass
class ExperimentConfig:
    subcommand: str
    seed: int = 0
    replicas: Optional[int] = None
    threads: Optional[int] = None
    threshold: float = 3.0
    route: Optional[str] = None
    route_b: Optional[str] = None
    reference: Optional[Any] = None
    params: dict = field(default_factory=dict)
    params_b: dict = field(default_factory=dict)
    output: Optional[str] = None
    format: str = "json"

    def validate(self) -> "ExperimentConfig":
        if self.subcommand not in SUBCOMMANDS:
            raise ConfigError(f"subcommand: unknown value {self.subcommand!r}; choose from {SUBCOMMANDS}")
        if self.format not in FORMATS:
            raise ConfigError(f"format: must be one of {FORMATS}, got {self.format!r}")
        if not isinstance(self.seed, int) or not 0 <= self.seed < 2**64:
            raise ConfigError(f"seed: must be a 64-bit unsigned integer, got {self.seed!r}")
        if self.replicas is not None and (not isinstance(self.replicas, int) or self.replicas < 2):
            raise ConfigError(f"replicas: must be an integer >= 2, got {self.replicas!r}")
        if self.threads is not None and (not isinstance(self.threads, int) or self.threads < 1):
            raise ConfigError(f"threads: must be a positive integer, got {self.threads!r}")
        for name in ("params", "params_b"):
            block = getattr(self, name)
            if not isinstance(block, dict):
                raise ConfigError(f"{name}: must be an object")
            for k in block:
                if k not in PARAM_KEYS:
                    raise ConfigError(f"{name}.{k}: unknown key {k!r}")
        return self

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict, where: str = "config") -> "ExperimentConfig":
        if not isinstance(d, dict):
            raise ConfigError(f"{where}: top level must be a JSON object")
        known = {f.name for f in fields(cls)}
        for k in d:
            if k not in known:
                raise ConfigError(f"{where}: unknown key {k!r}")
        if "subcommand" not in d:
            raise ConfigError(f"{where}: missing required key 'subcommand'")
        return cls(**d).validate()


def load_config(path) -> ExperimentConfig:
    """Strict parse of a JSON config, or of a report written by :func:`emit_report`.

    Reports embed the config that produced them, so feeding a report back in
    reproduces it.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read ({exc.strerror})") from None
    if path.suffix == ".csv" or text.startswith("#"):
        for line in text.splitlines():
            if line.startswith("# config="):
                return _parse(line[len("# config="):], f"{path}")
        raise ConfigError(f"{path}: CSV report carries no '# config=' line")
    return _parse(text, str(path))


def _parse(text: str, where: str) -> ExperimentConfig:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{where}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    if isinstance(data, dict) and "config" in data and "version" in data:
        data = data["config"]
    return ExperimentConfig.from_dict(data, where)


def version_string() -> str:
    """Package version, with a git-describe suffix when run from a checkout."""
    try:
        base = metadata.version("artifact")
    except metadata.PackageNotFoundError:
        base = "0.0.0"
    try:
        out = subprocess.run(["git", "describe", "--always", "--dirty", "--tags"],
                             cwd=Path(__file__).resolve().parent, capture_output=True,
                             text=True, timeout=5)
        if out.returncode == 0 and out.stdout.strip():
            return f"{base}+{out.stdout.strip()}"
    except (OSError, subprocess.SubprocessError):
        pass
    return base


def _write_atomic(path: Path, text: str) -> None:
    directory = path.parent if str(path.parent) else Path(".")
    try:
        fd, tmp = tempfile.mkstemp(dir=directory, prefix=f".{path.name}.", suffix=".tmp")
    except OSError as exc:
        raise ConfigError(f"{path}: cannot write ({exc.strerror})") from None
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except OSError as exc:
        os.unlink(tmp)
        raise ConfigError(f"{path}: cannot write ({exc.strerror})") from None


def render_report(results, config: ExperimentConfig, format: str = "json") -> str:
    """JSON object, or CSV with '#' metadata lines before the header.

    For CSV, ``results`` is a list of row dicts (their keys give the header)
    or an already rendered CSV table.
    """
    if format == "json":
        doc = {"version": version_string(), "seed": config.seed, "config": config.to_dict(),
               "results": results}
        return json.dumps(doc, indent=2, default=_default) + "\n"
    if format != "csv":
        raise ConfigError(f"format: must be one of {FORMATS}, got {format!r}")
    head = (f"# version={version_string()}\n# seed={config.seed}\n"
            f"# config={json.dumps(config.to_dict(), default=_default)}\n")
    if isinstance(results, str):
        return head + results
    rows = list(results)
    buf = io.StringIO()
    if rows:
        w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
    return head + buf.getvalue()


def emit_report(results, path, format: str = "json", config: Optional[ExperimentConfig] = None) -> str:
    """Render and write the report atomically; returns the text written."""
    config = config or ExperimentConfig(subcommand="estimate")
    text = render_report(results, config, format)
    _write_atomic(Path(path), text)
    return text


def _default(o):
    if isinstance(o, complex):
        return [o.real, o.imag]
    if hasattr(o, "item"):
        return o.item()
    if hasattr(o, "tolist"):
        return o.tolist()
    if hasattr(o, "value"):
        return o.value
    raise TypeError(f"not JSON serialisable: {type(o).__name__}")
