"""Experiment configuration and reports.

Configs are YAML documents::

    schema: 1
    experiments:
      - experiment: green-check
        n: 2
        quadrature: {method: monte-carlo, samples: 1000000, epsilon: 1.0e-4, seed: 0}
        params: {...}        # experiment-specific, see DEFAULT_PARAMS
        thresholds: {...}    # pass/fail data, see DEFAULT_THRESHOLDS
        output: reports/green.json

Reports are written as JSON (full), CSV (one row per record) or a plain table.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from .. import __version__
from ..quadrature import QuadratureSpec

SCHEMA_VERSION = 1
EXPERIMENTS = ("green-check", "bellman", "a2-compare", "sharpness", "bound-check", "cap-measure", "lp-constant")
NEEDS_N2 = ("a2-compare", "sharpness")
FORMATS = ("json", "csv", "table")

DEFAULT_PARAMS: dict[str, dict[str, Any]] = {
    "green-check": {"n_list": [1, 2, 3, 5, 10], "ball_samples": 10 ** 6},
    "bellman": {"q_list": [1.5, 2, 10, 100, 10000], "count": 10 ** 6, "directions": 64, "fd_points": 2000},
    "a2-compare": {"alpha_fractions": [0.2, 0.5, 0.8, 0.9, 0.95], "include_zero": True},
    "sharpness": {"j_list": [1, 2, 3, 4, 5, 6], "critical_variant": True, "area_n_list": [2, 3], "area": True},
    "bound-check": {"n_list": [1, 2, 3], "apertures": [1.0, 2.0], "fubini_inner": 64},
    "cap-measure": {"deltas": [2.0 ** (-k / 2) for k in range(1, 13)], "mc_samples": 10 ** 6, "fit_max_delta": 0.5},
    "lp-constant": {"functions": ["coordinate", "re-power-2", "harmonic-poly"], "negative_control": True},
}

DEFAULT_THRESHOLDS: dict[str, dict[str, float]] = {
    "green-check": {"radial_abs": 1e-3, "ball_sigmas": 3.0},
    "bellman": {"pure_tol": 1e-6, "key_tol": 1e-12, "identity_tol": 1e-12},
    "a2-compare": {"c_max": 50.0},
    "sharpness": {"q2_slope": -1.0, "q2_tol": 0.1, "norm_slope": -0.5, "norm_tol": 0.1, "area_slope_max": -1.35},
    "bound-check": {"r2_spread_max": 3.0},
    "cap-measure": {"exponent_tol": 0.1, "circle_abs": 1e-3},
    "lp-constant": {"sigmas": 3.0},
}


DEFAULT_QUADRATURE: dict[str, dict[str, Any]] = {
    "green-check": {"method": "monte-carlo", "samples": 10 ** 6, "epsilon": 1e-4},
    "bellman": {"method": "monte-carlo"},
    "a2-compare": {"method": "zonal-2d", "samples": 200_000, "epsilon": 1e-3},
    "sharpness": {"method": "monte-carlo", "samples": 200_000, "epsilon": 1e-3, "inner_samples": 64},
    "bound-check": {"method": "monte-carlo", "samples": 100_000, "epsilon": 1e-3, "inner_samples": 64},
    "cap-measure": {"method": "monte-carlo", "samples": 10 ** 6},
    "lp-constant": {"method": "monte-carlo", "samples": 200_000, "epsilon": 1e-4, "inner_samples": 64},
}


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    experiment: str
    n: int = 2
    quadrature: QuadratureSpec | None = None
    params: dict = field(default_factory=dict)
    thresholds: dict = field(default_factory=dict)
    output: str | None = None

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}; valid: {', '.join(EXPERIMENTS)}")
        if self.quadrature is None:
            self.quadrature = QuadratureSpec(**DEFAULT_QUADRATURE[self.experiment])
        if not isinstance(self.n, int) or self.n < 1:
            raise ConfigError("n must be a positive integer")
        if self.experiment in NEEDS_N2 and self.n < 2:
            raise ConfigError(f"{self.experiment} needs n >= 2 (the zonal reduction is two-dimensional)")
        unknown = set(self.params) - set(DEFAULT_PARAMS[self.experiment])
        if unknown:
            raise ConfigError(f"unknown params for {self.experiment}: {sorted(unknown)}; "
                              f"valid: {sorted(DEFAULT_PARAMS[self.experiment])}")
        unknown = set(self.thresholds) - set(DEFAULT_THRESHOLDS[self.experiment])
        if unknown:
            raise ConfigError(f"unknown thresholds for {self.experiment}: {sorted(unknown)}")
        for a in self.params.get("apertures", []):
            if not a > 0.5:
                raise ConfigError(f"aperture {a!r} must exceed 1/2")

    def param(self, key: str):
        return self.params.get(key, DEFAULT_PARAMS[self.experiment][key])

    def threshold(self, key: str) -> float:
        return float(self.thresholds.get(key, DEFAULT_THRESHOLDS[self.experiment][key]))

    def to_dict(self) -> dict:
        d = {"experiment": self.experiment, "n": self.n, "quadrature": asdict(self.quadrature)}
        if self.params:
            d["params"] = dict(self.params)
        if self.thresholds:
            d["thresholds"] = dict(self.thresholds)
        if self.output is not None:
            d["output"] = self.output
        return d


def _quad_from(d: dict, experiment: str) -> QuadratureSpec:
    allowed = {f.name for f in fields(QuadratureSpec)}
    unknown = set(d) - allowed
    if unknown:
        raise ConfigError(f"unknown quadrature fields {sorted(unknown)}; valid: {sorted(allowed)}")
    d = {**DEFAULT_QUADRATURE.get(experiment, {}), **d}
    for k in ("samples", "seed", "workers", "inner_samples"):
        if k in d:
            d[k] = int(float(d[k]))
    if "epsilon" in d:
        d["epsilon"] = float(d["epsilon"])
    return QuadratureSpec(**d)


def config_from_dict(d: dict) -> ExperimentConfig:
    if not isinstance(d, dict):
        raise ConfigError("each experiment entry must be a mapping")
    allowed = {f.name for f in fields(ExperimentConfig)}
    unknown = set(d) - allowed
    if unknown:
        raise ConfigError(f"unknown fields {sorted(unknown)}; valid: {sorted(allowed)}")
    if "experiment" not in d:
        raise ConfigError("missing field 'experiment'")
    if d["experiment"] not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {d['experiment']!r}; valid: {', '.join(EXPERIMENTS)}")
    try:
        quad = _quad_from(d.get("quadrature") or {}, d["experiment"])
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"quadrature: {exc}") from None
    return ExperimentConfig(
        experiment=d["experiment"],
        n=d.get("n", 2),
        quadrature=quad,
        params=dict(d.get("params") or {}),
        thresholds=dict(d.get("thresholds") or {}),
        output=d.get("output"),
    )


def _line_of(node, path) -> int | None:
    """1-based line of the YAML node at ``path`` (keys and list indices)."""
    for key in path:
        if isinstance(node, yaml.MappingNode):
            match = [v for k, v in node.value if k.value == key]
            if not match:
                break
            node = match[0]
        elif isinstance(node, yaml.SequenceNode) and isinstance(key, int) and key < len(node.value):
            node = node.value[key]
        else:
            break
    return node.start_mark.line + 1


def parse_config(text: str, source: str = "<config>") -> list[ExperimentConfig]:
    try:
        data = yaml.safe_load(text)
        root = yaml.compose(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{source}: malformed YAML: {exc}") from None
    if not isinstance(data, dict) or "experiments" not in data:
        raise ConfigError(f"{source}: expected a mapping with an 'experiments' list")
    schema = data.get("schema", SCHEMA_VERSION)
    if schema != SCHEMA_VERSION:
        raise ConfigError(f"{source}: unsupported schema {schema!r} (this tool reads schema {SCHEMA_VERSION})")
    if not isinstance(data["experiments"], list):
        raise ConfigError(f"{source}:{_line_of(root, ['experiments'])}: 'experiments' must be a list")
    out = []
    for i, entry in enumerate(data["experiments"]):
        try:
            out.append(config_from_dict(entry))
        except ConfigError as exc:
            raise ConfigError(f"{source}:{_line_of(root, ['experiments', i])}: experiments[{i}]: {exc}") from None
    return out


def load_config(path) -> list[ExperimentConfig]:
    p = Path(path)
    return parse_config(p.read_text(), str(p))


def dump_config(configs: list[ExperimentConfig]) -> str:
    return yaml.safe_dump({"schema": SCHEMA_VERSION, "experiments": [c.to_dict() for c in configs]}, sort_keys=False)


# -- reports -------------------------------------------------------------------------

@dataclass
class Record:
    params: dict
    value: float
    std_error: float = 0.0
    eps_delta: float | None = None
    quad_hash: str = ""
    extra: dict = field(default_factory=dict)


@dataclass
class Fit:
    slope: float
    intercept: float
    r2: float
    half_width: float
    points: int


@dataclass
class ExperimentReport:
    experiment: str
    n: int
    records: list[Record] = field(default_factory=list)
    fits: dict = field(default_factory=dict)
    checks: dict = field(default_factory=dict)
    passed: bool = False
    thresholds: dict = field(default_factory=dict)
    seed: int = 0
    notes: list[str] = field(default_factory=list)
    tool_version: str = __version__
    schema: int = SCHEMA_VERSION
    runtime_s: float = 0.0

    def add(self, params: dict, value, std_error=0.0, eps_delta=None, quad: QuadratureSpec | None = None, **extra):
        self.records.append(Record(dict(params), float(value), float(std_error),
                                   None if eps_delta is None else float(eps_delta),
                                   quad.digest() if quad is not None else "", extra))

    def summary(self) -> str:
        bad = [k for k, v in self.checks.items() if v is False]
        status = "PASS" if self.passed else "FAIL"
        tail = f" (failed: {', '.join(bad)})" if bad and not self.passed else ""
        return f"{self.experiment} n={self.n}: {status}{tail}"


def _plain(x):
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, (np.floating, float)):
        v = float(x)
        return v if math.isfinite(v) else str(v)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    if isinstance(x, complex):
        return [x.real, x.imag]
    return x


def report_to_dict(report: ExperimentReport) -> dict:
    return _plain(asdict(report))


def _flat(d: dict, prefix: str = "") -> dict:
    out = {}
    for k, v in d.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(_flat(v, key + "."))
        else:
            out[key] = json.dumps(v) if isinstance(v, list) else v
    return out


def render_report(report: ExperimentReport, fmt: str = "json") -> str:
    if fmt not in FORMATS:
        raise ValueError(f"unknown format {fmt!r}; valid: {', '.join(FORMATS)}")
    if fmt == "json":
        return json.dumps(report_to_dict(report), indent=2) + "\n"
    rows = []
    for r in report.records:
        row = {"experiment": report.experiment, "n": report.n}
        row.update(_flat(_plain(r.params), "param."))
        row.update({"value": r.value, "std_error": r.std_error, "eps_delta": r.eps_delta, "quad_hash": r.quad_hash})
        row.update(_flat(_plain(r.extra), "extra."))
        rows.append(row)
    cols = []
    for row in rows:
        cols += [c for c in row if c not in cols]
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=cols)
        w.writeheader()
        w.writerows(rows)
        return buf.getvalue()
    lines = [report.summary(), f"tool {report.tool_version}, seed {report.seed}, {report.runtime_s:.1f} s"]
    for name, fit in report.fits.items():
        f = fit if isinstance(fit, dict) else asdict(fit)
        lines.append(f"fit {name}: slope {f['slope']:+.4f} +/- {f['half_width']:.4f} (R^2 {f['r2']:.4f}, {f['points']} points)")
    for k, v in report.checks.items():
        lines.append(f"check {k}: {v}")
    lines += [f"note: {n}" for n in report.notes]
    show = [c for c in cols if c not in ("experiment", "n", "quad_hash")]
    fmt_cell = lambda v: f"{v:.6g}" if isinstance(v, float) else ("" if v is None else str(v))
    table = [show] + [[fmt_cell(row.get(c)) for c in show] for row in rows]
    widths = [max(len(r[i]) for r in table) for i in range(len(show))]
    for r in table:
        lines.append("  ".join(c.rjust(w) for c, w in zip(r, widths)))
    return "\n".join(lines) + "\n"


def write_report(report: ExperimentReport, path, fmt: str | None = None) -> Path:
    p = Path(path)
    fmt = fmt or {".csv": "csv", ".txt": "table"}.get(p.suffix, "json")
    p.parent.mkdir(parents=True, exist_ok=True)
    p.write_text(render_report(report, fmt))
    return p


def read_report(path) -> dict:
    return json.loads(Path(path).read_text())
