"""INI scenario files: parsing, validation and the resolved configuration.

Sections and keys::

    [model]       key = <registry name>, then that family's parameters
    [grid]        lo, hi, points, t0, T, dt (number or "auto")
    [seeds]       count, base
    [run]         pipeline and pipeline options (see RUN_DEFAULTS)
    [tolerances]  overrides of TOLERANCE_DEFAULTS
    [output]      dir

Values are Python literals (numbers, lists, tuples, ``None``) or bare words.
Unknown sections or keys are rejected with their line number.
"""

from __future__ import annotations

import ast
import configparser
import inspect
import re
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidModelError, ScenarioError
from .fields.grid import SpatialGrid
from .sde_core import REGISTRY, TimeGrid, make_model

PIPELINES = ("simulate", "verify-integral", "verify-iw", "kernel", "forward", "backward",
             "duality", "compare-mc", "all")

GRID_DEFAULTS = {"lo": -8.0, "hi": 8.0, "points": 512, "t0": 0.0, "T": 1.0, "dt": "auto"}
SEED_DEFAULTS = {"count": 1, "base": 0}
RUN_DEFAULTS = {
    "pipeline": None,
    "x0": None,
    "initial": "gaussian",
    "mean": 0.0,
    "var": 0.09,
    "phi": "cos",
    "s_start": None,
    "refinements": 0,
    "levels": 2,
    "field": "identity",
    "samples": 100_000,
    "mc_samples": 10_000,
    "bins": 50,
    "realizations": 200,
    "jump_measure": "poisson",
    "points_s": 5,
}
TOLERANCE_DEFAULTS = {
    "drift": 1e-10,
    "order": 0.45,
    "residual": 1e-12,
    "jacobian": 1e-8,
    "mass": 1e-2,
    "l1": 5e-2,
    "deviation": 5e-2,
    "constant": 1e-6,
}
OUTPUT_DEFAULTS = {"dir": "out"}

SECTIONS = {
    "model": None,
    "grid": GRID_DEFAULTS,
    "seeds": SEED_DEFAULTS,
    "run": RUN_DEFAULTS,
    "tolerances": TOLERANCE_DEFAULTS,
    "output": OUTPUT_DEFAULTS,
}
CHOICES = {
    "initial": ("gaussian", "delta"),
    "phi": ("one", "x", "x2", "cos"),
    "field": ("identity", "unit-noise"),
    "jump_measure": ("poisson", "centered"),
}

_KEY_RE = re.compile(r"^\s*([^=:\s\[#;][^=:]*?)\s*[=:]")
_SECTION_RE = re.compile(r"^\s*\[([^\]]+)\]")


def _parse_value(raw):
    text = raw.strip()
    try:
        return ast.literal_eval(text)
    except (ValueError, SyntaxError):
        return text


def _line_map(text):
    """``(section, key) -> line`` and ``section -> line`` from the raw file."""
    lines = {}
    section = None
    for no, line in enumerate(text.splitlines(), start=1):
        m = _SECTION_RE.match(line)
        if m:
            section = m.group(1).strip()
            lines.setdefault((section, None), no)
            continue
        m = _KEY_RE.match(line)
        if m and section is not None and not line[:1].isspace():
            lines.setdefault((section, m.group(1).strip()), no)
    return lines


@dataclass
class Scenario:
    """Validated scenario; :meth:`resolved` is echoed into every report."""

    model: dict
    grid: dict = field(default_factory=lambda: dict(GRID_DEFAULTS))
    seeds: dict = field(default_factory=lambda: dict(SEED_DEFAULTS))
    run: dict = field(default_factory=lambda: dict(RUN_DEFAULTS))
    tolerances: dict = field(default_factory=lambda: dict(TOLERANCE_DEFAULTS))
    output: dict = field(default_factory=lambda: dict(OUTPUT_DEFAULTS))
    source: str = None

    def resolved(self) -> dict:
        return {"model": dict(self.model), "grid": dict(self.grid), "seeds": dict(self.seeds),
                "run": dict(self.run), "tolerances": dict(self.tolerances),
                "output": dict(self.output)}

    def build_model(self):
        params = {k: v for k, v in self.model.items() if k != "key"}
        return make_model(self.model["key"], **params)

    def spatial_grid(self):
        g = self.grid
        return SpatialGrid(tuple(np.atleast_1d(g["lo"])), tuple(np.atleast_1d(g["hi"])),
                           int(g["points"]))

    def seed_list(self):
        base = int(self.seeds["base"])
        return list(range(base, base + int(self.seeds["count"])))

    def time_grid(self, default_dt=1e-3):
        g = self.grid
        dt = default_dt if g["dt"] == "auto" else float(g["dt"])
        steps = max(1, int(round((g["T"] - g["t0"]) / dt)))
        return TimeGrid.uniform(g["t0"], g["T"], steps)

    @property
    def dt(self):
        return None if self.grid["dt"] == "auto" else float(self.grid["dt"])

    def x0(self, n):
        """``[run] x0`` if set, otherwise ``[run] mean``, broadcast to ``n``."""
        v = self.run["x0"] if self.run["x0"] is not None else self.run["mean"]
        v = np.atleast_1d(np.asarray(v, dtype=float))
        return np.full(n, v[0]) if v.size == 1 else v


def load_scenario(path):
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario: {exc}") from None
    return parse_scenario(text, source=str(path))


def parse_scenario(text, source=None):
    """Parse and validate scenario ``text``.

    Raises
    ------
    ScenarioError
        With the offending line and field.
    """
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    cp.optionxform = str
    try:
        cp.read_string(text, source=source or "<scenario>")
    except configparser.DuplicateOptionError as exc:
        raise ScenarioError(f"duplicate key in [{exc.section}]", exc.lineno, exc.option) from None
    except configparser.DuplicateSectionError as exc:
        raise ScenarioError("duplicate section", exc.lineno, exc.section) from None
    except configparser.MissingSectionHeaderError as exc:
        raise ScenarioError("content before the first [section]", exc.lineno) from None
    except configparser.ParsingError as exc:
        line = exc.errors[0][0] if exc.errors else None
        raise ScenarioError("malformed line", line) from None
    lines = _line_map(text)

    def err(msg, section, key=None):
        name = f"{section}.{key}" if key else section
        return ScenarioError(msg, lines.get((section, key)), name)

    for section in cp.sections():
        if section not in SECTIONS:
            raise err(f"unknown section; expected one of {sorted(SECTIONS)}", section)
    if not cp.has_section("model"):
        raise ScenarioError("missing [model] section", field="model")

    values = {}
    for section, defaults in SECTIONS.items():
        raw = dict(cp.items(section)) if cp.has_section(section) else {}
        if defaults is not None:
            for key in raw:
                if key not in defaults:
                    raise err(f"unknown key; expected one of {sorted(defaults)}", section, key)
            out = dict(defaults)
        else:
            out = {}
        for key, val in raw.items():
            out[key] = _parse_value(val)
        values[section] = out

    model = values["model"]
    key = model.get("key")
    if key not in REGISTRY:
        raise err(f"unknown model {key!r}; choose from {sorted(REGISTRY)}", "model", "key")
    allowed = set(inspect.signature(REGISTRY[key]).parameters)
    for k in model:
        if k != "key" and k not in allowed:
            raise err(f"{key} has no parameter {k!r}; expected one of {sorted(allowed)}",
                      "model", k)

    grid, seeds, run, tol = values["grid"], values["seeds"], values["run"], values["tolerances"]
    for k in ("t0", "T"):
        if not isinstance(grid[k], (int, float)):
            raise err("expected a number", "grid", k)
    if not grid["T"] > grid["t0"]:
        raise err("need T > t0", "grid", "T")
    if grid["dt"] != "auto" and not (isinstance(grid["dt"], (int, float)) and grid["dt"] > 0):
        raise err("expected a positive number or 'auto'", "grid", "dt")
    if not isinstance(grid["points"], int) or grid["points"] < 8:
        raise err("expected an integer >= 8", "grid", "points")
    for k in ("count", "base"):
        if not isinstance(seeds[k], int) or seeds[k] < (1 if k == "count" else 0):
            raise err("expected a non-negative integer" if k == "base" else
                      "expected a positive integer", "seeds", k)
    if run["pipeline"] is not None and run["pipeline"] not in PIPELINES:
        raise err(f"unknown pipeline; choose from {list(PIPELINES)}", "run", "pipeline")
    for k, choices in CHOICES.items():
        if run[k] not in choices:
            raise err(f"expected one of {list(choices)}", "run", k)
    for k in ("refinements", "levels", "samples", "mc_samples", "bins", "realizations",
              "points_s"):
        if not isinstance(run[k], int) or run[k] < 0:
            raise err("expected a non-negative integer", "run", k)
    for k, v in tol.items():
        if not isinstance(v, (int, float)) or isinstance(v, bool):
            raise err("expected a number", "tolerances", k)
    if not isinstance(values["output"]["dir"], str):
        values["output"]["dir"] = str(values["output"]["dir"])

    scen = Scenario(model=model, grid=grid, seeds=seeds, run=run, tolerances=tol,
                    output=values["output"], source=source)
    try:
        m = scen.build_model()
        g = scen.spatial_grid()
    except (InvalidModelError, ValueError, TypeError) as exc:
        raise err(f"invalid model or grid: {exc}", "model") from None
    if g.n != m.n:
        raise err(f"grid has {g.n} axes, model has n={m.n}", "grid", "lo")
    return scen
