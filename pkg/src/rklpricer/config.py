"""JSON pricing-problem configs: schema validation, defaults and overrides."""

from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass
from importlib import resources

import jsonschema

from .heston import Grid2D, HestonModel, domain_bounds
from .lcp import SchemeSelector
from .pde1d import BSModel, Grid1D, Payoff, TimeAxis, place_strike_on_grid
from .uvm import UvmModel

SCHEMA_VERSION = 1
SCHEMA_FILE = f"problem-v{SCHEMA_VERSION}.json"


class ConfigError(ValueError):
    """Invalid problem config; ``path`` locates the offending field."""

    def __init__(self, message: str, path: str = ""):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


def load_schema() -> dict:
    text = resources.files("rklpricer.schemas").joinpath(SCHEMA_FILE).read_text()
    return json.loads(text)


_SCHEME_DEFAULTS = {"tag": "RKL", "lcp": None, "eps": 0.0, "smoothing": False, "stages": None}


def _fill_defaults(doc: dict) -> dict:
    doc = copy.deepcopy(doc)
    doc.setdefault("exercise", "american")
    scheme = doc.setdefault("scheme", {})
    for key, val in _SCHEME_DEFAULTS.items():
        scheme.setdefault(key, val)
    if scheme["lcp"] is None:
        scheme["lcp"] = "projection" if scheme["tag"] == "RKL" else "brennan-schwartz"
    grid = doc["grid"]
    grid.setdefault("x_min", 0.0)
    grid.setdefault("strike_on_grid", True)
    model = doc["model"]
    if model["type"] == "heston":
        model.setdefault("q", 0.0)
        model.setdefault("eps_v", 1e-4)
        grid.setdefault("x_max", None)
        grid.setdefault("v_max", None)
        grid.setdefault("n_std", 4.0)
    else:
        model.setdefault("mu", None)
        if model["type"] == "uvm":
            model.setdefault("objective", "worst")
    payoff = doc["payoff"]
    payoff.setdefault("rebate", 1.0)
    if "spots" not in doc:
        strikes = payoff["strikes"]
        doc["spots"] = [0.5 * (strikes[0] + strikes[-1])]
    return doc


def _check_cross_fields(doc: dict) -> None:
    model, payoff, grid, scheme = doc["model"], doc["payoff"], doc["grid"], doc["scheme"]
    kind = model["type"]
    if kind == "uvm" and model["sigma_min"] > model["sigma_max"]:
        raise ConfigError("sigma_min must not exceed sigma_max", "model.sigma_min")
    nstrikes = len(payoff["strikes"])
    if (payoff["kind"] == "butterfly") != (nstrikes == 2):
        raise ConfigError("butterfly takes two strikes, other payoffs one", "payoff.strikes")
    if payoff["kind"] == "butterfly" and not payoff["strikes"][0] < payoff["strikes"][1]:
        raise ConfigError("butterfly needs K1 < K2", "payoff.strikes")
    tag, lcp = scheme["tag"], scheme["lcp"]
    if tag == "RKL" and lcp not in ("projection", "none"):
        raise ConfigError("RKL handles early exercise by projection", "scheme.lcp")
    if tag != "RKL" and lcp == "projection":
        raise ConfigError("implicit schemes need brennan-schwartz, psor or none", "scheme.lcp")
    if kind == "uvm" and tag not in ("RKL", "EULER"):
        raise ConfigError("uncertain volatility supports RKL and EULER", "scheme.tag")
    if kind == "heston":
        if tag != "RKL":
            raise ConfigError("the Heston solver is RKL only", "scheme.tag")
        if "n" not in grid:
            raise ConfigError("Heston grids need the variance step count n", "grid.n")
    else:
        if grid.get("x_max") is None:
            raise ConfigError("x_max is required for one-dimensional grids", "grid.x_max")
        if grid["x_max"] <= grid["x_min"]:
            raise ConfigError("x_max must exceed x_min", "grid.x_max")
        for K in payoff["strikes"]:
            if grid["strike_on_grid"] and not grid["x_min"] <= K <= grid["x_max"]:
                raise ConfigError(f"strike {K} outside the grid", "grid")
    if kind == "uvm" and doc["exercise"] == "american":
        raise ConfigError("uncertain volatility pricing is European only", "exercise")


def validate(doc: dict) -> dict:
    """Validate ``doc`` and return it with defaults filled in."""
    validator = jsonschema.Draft202012Validator(load_schema())
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        path = ".".join(str(p) for p in err.absolute_path)
        raise ConfigError(err.message, path)
    doc = _fill_defaults(doc)
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        raise ConfigError(err.message, ".".join(str(p) for p in err.absolute_path))
    _check_cross_fields(doc)
    return doc


def apply_overrides(doc: dict, overrides) -> dict:
    """Apply ``key.sub=value`` strings; values parse as JSON when possible."""
    doc = copy.deepcopy(doc)
    for item in overrides or ():
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value")
        key, raw = item.split("=", 1)
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        parts = key.strip().split(".")
        node = doc
        for p in parts[:-1]:
            nxt = node.get(p) if isinstance(node, dict) else None
            if nxt is None:
                nxt = node[p] = {}
            if not isinstance(nxt, dict):
                raise ConfigError("cannot descend into a non-object", key)
            node = nxt
        node[parts[-1]] = value
    return doc


def load_config(path, overrides=()) -> "PricingProblem":
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc}") from exc
    return PricingProblem.from_dict(apply_overrides(doc, overrides))


@dataclass(frozen=True)
class PricingProblem:
    doc: dict

    @classmethod
    def from_dict(cls, doc: dict) -> "PricingProblem":
        return cls(validate(doc))

    def to_dict(self) -> dict:
        return copy.deepcopy(self.doc)

    def to_json(self) -> str:
        return json.dumps(self.doc, indent=2, sort_keys=True)

    def with_overrides(self, overrides) -> "PricingProblem":
        return PricingProblem.from_dict(apply_overrides(self.doc, overrides))

    @property
    def kind(self) -> str:
        return self.doc["model"]["type"]

    @property
    def american(self) -> bool:
        return self.doc["exercise"] == "american"

    @property
    def spots(self) -> list[float]:
        return list(self.doc["spots"])

    @property
    def smoothing(self) -> bool:
        return self.doc["scheme"]["smoothing"]

    @property
    def stages(self):
        return self.doc["scheme"]["stages"]

    def payoff(self) -> Payoff:
        p = self.doc["payoff"]
        return Payoff(p["kind"], tuple(p["strikes"]), p["rebate"])

    def selector(self) -> SchemeSelector:
        s = self.doc["scheme"]
        return SchemeSelector(s["tag"], s["lcp"], s["eps"])

    def time_axis(self) -> TimeAxis:
        t = self.doc["time"]
        return TimeAxis.uniform(t["steps"], t["T"])

    def model(self):
        m = self.doc["model"]
        if m["type"] == "bs":
            return BSModel(sigma=m["sigma"], r=m["r"], mu=m["mu"])
        if m["type"] == "uvm":
            return UvmModel(m["sigma_min"], m["sigma_max"], m["r"], m["mu"], m["objective"])
        return HestonModel(m["kappa"], m["theta"], m["sigma_v"], m["rho"], m["r"], m["q"])

    def grid(self):
        g = self.doc["grid"]
        if self.kind == "heston":
            return self._heston_grid()
        grid = Grid1D.uniform(g["x_min"], g["x_max"], g["m"])
        if g["strike_on_grid"]:
            for K in self.payoff().kinks:
                grid = place_strike_on_grid(grid, K)
        return grid

    def _heston_grid(self) -> Grid2D:
        g, m = self.doc["grid"], self.doc["model"]
        K = self.payoff().strike
        T = self.doc["time"]["T"]
        x_max, v_max = g["x_max"], g["v_max"]
        if x_max is None or v_max is None:
            xb, vb = domain_bounds(self.model(), K, T, m["v0"], m["eps_v"], g["n_std"])
            x_max = xb if x_max is None else x_max
            v_max = vb if v_max is None else v_max
        return heston_uniform_grid(x_max, v_max, g["m"], g["n"], K if g["strike_on_grid"] else None)


def heston_uniform_grid(x_max: float, v_max: float, m: int, n: int, anchor: float | None = None) -> Grid2D:
    """Uniform grid from zero; with ``anchor`` the asset step is widened just
    enough for ``anchor`` to be a node (so ``x_max`` can only grow)."""
    if anchor is not None:
        if not 0.0 < anchor < x_max:
            raise ConfigError(f"anchor {anchor} outside (0, {x_max})", "grid")
        h = x_max / m
        cells = max(1, math.floor(anchor / h + 1e-9))
        x_max = anchor / cells * m
    return Grid2D.uniform(x_max, v_max, m, n)
