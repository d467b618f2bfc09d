"""Experiment configuration: schema, loading and validation.

A config is a YAML mapping (JSON is accepted for ``.json`` files).  ``hbars``
entries may be numbers or strings ``"1/m"``.
"""

from __future__ import annotations

import difflib
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import yaml

from .errors import ConfigInvalid, FileUnreadable, HbarNotAdmissible
from .sdq import admissible_hbar


@dataclass(frozen=True)
class ExperimentSpec:
    description: str
    required: tuple
    optional: dict = field(default_factory=dict)
    columns: tuple = ()


COMMON_REQUIRED = ("experiment", "group", "dimension", "seed")
COMMON_OPTIONAL = {"output_dir": None}

EXPERIMENTS = {
    "axioms": ExperimentSpec(
        "groupoid axioms on random composable tuples, all four variants",
        ("samples",),
        {},
        ("variant", "axiom", "defect"),
    ),
    "holonomy-refine": ExperimentSpec(
        "holonomy composition under lattice refinement and midpoint-rule step doubling",
        ("band", "steps", "levels"),
        {"scale": 1.0},
        ("steps", "composition_defect", "doubling_defect"),
    ),
    "gauge-check": ExperimentSpec(
        "holonomy covariance, kernel trace invariance and q-connection gauge compatibility",
        ("grid", "band", "samples"),
        {"steps": 1024},
        ("check", "index", "value"),
    ),
    "glue-check": ExperimentSpec(
        "gluing law of exact-holonomy q-connections across hbar",
        ("connection", "hbars", "samples"),
        {"band": 1, "steps": 256},
        ("hbar", "gluing_defect", "diagonal_defect", "roundtrip_defect"),
    ),
    "product-check": ExperimentSpec(
        "hbar-derivative at 0 of a product family against the sum connection",
        ("band", "samples"),
        {},
        ("step", "defect"),
    ),
    "measure-consistency": ExperimentSpec(
        "Haar integrals of cylinder functions before and after refinement",
        ("samples",),
        {"levels": 3, "system": "lattice"},
        ("function", "level", "coarse_mean_re", "fine_mean_re", "defect", "combined_stderr"),
    ),
    "density": ExperimentSpec(
        "smooth connections hitting random holonomy targets on a lattice level",
        ("level", "trials", "threshold"),
        {"steps": 1024},
        ("trial", "distance", "refined_distance"),
    ),
    "dirac-sweep": ExperimentSpec(
        "Dirac-condition defect of the Weyl quantisation across hbar",
        ("grid", "band", "hbars"),
        {"pairs": 3, "iters": 200},
        ("pair", "kind", "hbar", "defect", "adjoint_defect"),
    ),
    "norm-continuity": ExperimentSpec(
        "operator norms of quantised symbols against their sup norms",
        ("grid", "hbars"),
        {"iters": 1000},
        ("symbol", "hbar", "norm", "sup_norm", "defect"),
    ),
    "embed-smear": ExperimentSpec(
        "Gaussian smearing of a q-connection into M x M x U(1)",
        ("grid", "group_grid", "width", "hbar"),
        {"band": 1},
        ("check", "value"),
    ),
}

QUANTIZING = ("dirac-sweep", "norm-continuity")
CONNECTIONS = ("trivial", "constant", "random")
SYSTEMS = ("lattice", "triangulation")


@dataclass(frozen=True)
class Issue:
    kind: str  # unknown-key | missing-key | bad-value | inadmissible-hbar | unknown-experiment
    key: str
    message: str
    suggestions: tuple = ()

    def to_dict(self) -> dict:
        return {"kind": self.kind, "key": self.key, "message": self.message, "suggestions": list(self.suggestions)}

    def __str__(self) -> str:
        s = f"{self.kind}: {self.key}: {self.message}"
        if self.suggestions:
            s += f" (did you mean: {', '.join(self.suggestions)})"
        return s


# ---------------------------------------------------------------------------
# value parsers; each returns the parsed value or raises ValueError


def _int(v, lo=None):
    if isinstance(v, bool) or not isinstance(v, int):
        raise ValueError(f"expected an integer, got {v!r}")
    if lo is not None and v < lo:
        raise ValueError(f"must be >= {lo}, got {v}")
    return v


def _pos_float(v):
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v) or v <= 0:
        raise ValueError(f"expected a positive number, got {v!r}")
    return float(v)


def _real(v):
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise ValueError(f"expected a number, got {v!r}")
    return float(v)


def parse_hbar(v) -> float:
    """A number or a string ``"1/m"`` / ``"0.125"``; must lie in (0, 1]."""
    if isinstance(v, bool):
        raise ValueError(f"bad hbar {v!r}")
    if isinstance(v, str):
        try:
            v = float(Fraction(v.strip()))
        except (ValueError, ZeroDivisionError):
            raise ValueError(f"bad hbar {v!r}") from None
    if not isinstance(v, (int, float)) or not 0.0 < v <= 1.0:
        raise ValueError(f"hbar must lie in (0, 1], got {v!r}")
    return float(v)


def _hbars(v):
    if not isinstance(v, list) or not v:
        raise ValueError("expected a non-empty list")
    return [parse_hbar(h) for h in v]


def _steps(v):
    if not isinstance(v, list) or not v:
        raise ValueError("expected a non-empty list of step counts")
    return [_int(s, 1) for s in v]


def _choice(options):
    def parse(v):
        if v not in options:
            raise ValueError(f"expected one of {', '.join(map(str, options))}, got {v!r}")
        return v

    return parse


def _path(v):
    if not isinstance(v, str) or not v:
        raise ValueError("expected a path string")
    return v


PARSERS = {
    "experiment": _choice(tuple(EXPERIMENTS)),
    "group": _choice(("U1", "SU2")),
    "dimension": _choice((1, 2)),
    "seed": lambda v: _int(v, 0),
    "output_dir": _path,
    "grid": lambda v: _int(v, 2),
    "band": lambda v: _int(v, 0),
    "hbars": _hbars,
    "hbar": parse_hbar,
    "samples": lambda v: _int(v, 2),
    "levels": lambda v: _int(v, 1),
    "level": lambda v: _int(v, 1),
    "steps": lambda v: _steps(v) if isinstance(v, list) else _int(v, 1),
    "connection": _choice(CONNECTIONS),
    "trials": lambda v: _int(v, 1),
    "threshold": _pos_float,
    "group_grid": lambda v: _int(v, 4),
    "width": _pos_float,
    "system": _choice(SYSTEMS),
    "scale": _real,
    "iters": lambda v: _int(v, 1),
    "pairs": lambda v: _int(v, 1),
}

# quantised operators are dense matrices on grid**dimension modes
MAX_QUANT_POINTS = 1024


# ---------------------------------------------------------------------------
# loading and validation


def load_config(path) -> dict:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise FileUnreadable(f"cannot read {path}: {exc}") from exc
    try:
        data = json.loads(text) if path.suffix == ".json" else yaml.safe_load(text)
    except (json.JSONDecodeError, yaml.YAMLError) as exc:
        raise ConfigInvalid(f"{path}: not parseable: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigInvalid(f"{path}: top level must be a mapping")
    return data


def _allowed(name: str) -> dict:
    spec = EXPERIMENTS[name]
    out = dict.fromkeys(COMMON_REQUIRED + spec.required)
    out.update(COMMON_OPTIONAL)
    out.update(spec.optional)
    return out


def validate_config(raw: dict) -> list[Issue]:
    """All schema problems of a raw config mapping; empty list when well formed."""
    issues: list[Issue] = []
    name = raw.get("experiment")
    if name is None:
        return [Issue("missing-key", "experiment", "required field is missing", tuple(EXPERIMENTS))]
    if name not in EXPERIMENTS:
        close = difflib.get_close_matches(str(name), EXPERIMENTS, n=3, cutoff=0.4)
        rest = [e for e in EXPERIMENTS if e not in close]
        return [Issue("unknown-experiment", "experiment", f"unknown experiment {name!r}", tuple(close + rest))]
    spec = EXPERIMENTS[name]
    allowed = _allowed(name)
    for key in raw:
        if key not in allowed:
            close = difflib.get_close_matches(str(key), allowed, n=3, cutoff=0.6)
            issues.append(Issue("unknown-key", str(key), f"not a field of {name}", tuple(close)))
    for key in COMMON_REQUIRED + spec.required:
        if key not in raw:
            issues.append(Issue("missing-key", key, f"required by {name}"))
    parsed = {}
    for key, v in raw.items():
        if key not in allowed:
            continue
        try:
            parsed[key] = PARSERS[key](v)
        except ValueError as exc:
            issues.append(Issue("bad-value", key, str(exc)))
    issues += _cross_checks(name, raw, parsed)
    return issues


def _cross_checks(name: str, raw: dict, c: dict) -> list[Issue]:
    out = []
    d = c.get("dimension")
    if name in QUANTIZING and "grid" in c:
        n = c["grid"]
        for h, r in zip(c.get("hbars", []), raw.get("hbars", [])):
            try:
                admissible_hbar(h, n)
            except HbarNotAdmissible as exc:
                out.append(Issue("inadmissible-hbar", "hbars", f"{r!r}: {exc}"))
        if d is not None and n**d > MAX_QUANT_POINTS:
            out.append(Issue("bad-value", "grid", f"{n}**{d} grid points exceed {MAX_QUANT_POINTS}"))
    if name == "embed-smear":
        if c.get("group") not in (None, "U1"):
            out.append(Issue("bad-value", "group", "the smeared embedding is implemented for U1"))
        if "width" in c and "group_grid" in c and c["width"] < 2 * (2 * math.pi / c["group_grid"]):
            out.append(Issue("bad-value", "width", "width must cover at least two group-grid spacings"))
    if name == "holonomy-refine" and "steps" in c and not isinstance(c["steps"], list):
        out.append(Issue("bad-value", "steps", "expected a list of step counts"))
    if name in ("gauge-check", "density") and isinstance(c.get("steps"), list):
        out.append(Issue("bad-value", "steps", "expected a single step count"))
    if name == "measure-consistency" and c.get("system") == "triangulation" and d not in (None, 2):
        out.append(Issue("bad-value", "system", "the triangulation system lives on the 2-torus"))
    if name == "measure-consistency" and c.get("levels", 3) < 3:
        out.append(Issue("bad-value", "levels", "the function suite needs at least three levels"))
    return out


def resolve(raw: dict) -> dict:
    """Parsed config with defaults filled in; raises :class:`ConfigInvalid` listing every issue."""
    issues = validate_config(raw)
    if issues:
        raise ConfigInvalid("; ".join(str(i) for i in issues))
    name = raw["experiment"]
    out = {k: v for k, v in _allowed(name).items() if v is not None}
    for key, v in raw.items():
        out[key] = PARSERS[key](v)
    return out
