"""Experiment configuration.

A config is one JSON document with four blocks::

    {
      "group":   {"kind": "heisenberg", "generators": null},
      "model":   {"variant": "coloring", "palette": [0.2, 0.2, 0.2, 0.2, 0.2]},
      "run":     {"master_seed": 1, "samples": 100, "ladder": [4, 8, 16],
                  "margin": 3.0, "margin_sweep": [1.5, 2, 3, 4],
                  "budget_mb": 4096, "workers": 1, "tasks": [...]},
      "outputs": {"directory": "out", "formats": ["csv", "json"]}
    }

Unknown keys anywhere raise :class:`ConfigError` naming the dotted key.
``normalize`` fills defaults, so ``load(dump(c)) == c`` for every normalised
config.  The format is versioned by :data:`CONFIG_FORMAT`.
"""
from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Optional

from . import groups as G
from . import models as M
from .errors import ConfigError
from .finite import FiniteGroupTable, cyclic_table, product_table, sl23_table

CONFIG_FORMAT = "conegrowth-json/1"

GROUP_KEYS = {"kind", "dim", "generators", "base", "finite", "finite_generators", "style"}
FINITE_KEYS = {"builtin", "order", "m", "path"}
RUN_KEYS = {"master_seed", "samples", "ladder", "margin", "margin_sweep", "budget_mb", "workers", "tasks"}
OUTPUT_KEYS = {"directory", "formats"}
TOP_KEYS = {"group", "model", "run", "outputs"}
FORMATS = {"csv", "json"}

TASK_KEYS = {
    "phi": {"type", "x", "ladder", "samples"},
    "condition_all": {"type", "radii", "beta", "samples", "grid_points"},
    "condition_aml": {"type", "x", "ladder", "samples"},
    "innerness": {"type", "pairs", "max_radius"},
    "polygonal": {"type", "y_list", "ladder", "samples"},
    "compare": {"type", "radii", "samples"},
    "shape": {"type", "n_values", "seeds", "margin"},
    "margin_sweep": {"type", "x", "margins", "samples"},
}

MODEL_KEYS = {
    "iid": {"variant", "weight"},
    "coloring": {"variant", "palette"},
    "richardson": {"variant", "rate", "shared_rates"},
    "frog": {"variant", "walk_step_cap"},
}
DIST_KEYS = {
    "constant": {"dist", "value"},
    "bernoulli": {"dist", "p", "lo", "hi"},
    "exponential": {"dist", "rate"},
    "uniform": {"dist", "lo", "hi"},
}

RUN_DEFAULTS = dict(master_seed=0, samples=100, ladder=[4, 8, 16, 32], margin=3.0,
                    margin_sweep=[1.5, 2.0, 3.0, 4.0], budget_mb=4096, workers=1, tasks=[])
OUTPUT_DEFAULTS = dict(directory="out", formats=["csv", "json"])


def _check_keys(block: Any, allowed: set, where: str) -> dict:
    if not isinstance(block, dict):
        raise ConfigError(f"{where} must be an object")
    for k in block:
        if k not in allowed:
            name = f"{where}.{k}" if where else str(k)
            raise ConfigError(f"unknown key '{name}'")
    return block


def _need(block: dict, key: str, where: str):
    if key not in block:
        raise ConfigError(f"missing key '{where}.{key}'")
    return block[key]


# ---------------------------------------------------------------------------
# blocks


def _norm_finite(f: dict, where: str) -> dict:
    _check_keys(f, FINITE_KEYS, where)
    if "path" in f:
        return {"path": str(f["path"])}
    b = _need(f, "builtin", where)
    if b == "cyclic":
        return {"builtin": "cyclic", "order": int(_need(f, "order", where))}
    if b == "sl23":
        return {"builtin": "sl23"}
    if b == "cyclic_x_sl23":
        return {"builtin": "cyclic_x_sl23", "m": int(_need(f, "m", where))}
    raise ConfigError(f"{where}.builtin: unknown finite group {b!r}")


def _norm_group(g: dict, where: str = "group") -> dict:
    _check_keys(g, GROUP_KEYS, where)
    kind = _need(g, "kind", where)
    gens = g.get("generators")
    gens = None if gens is None else [[int(c) for c in s] for s in gens]
    if kind == G.FREE_ABELIAN:
        return {"kind": kind, "dim": int(_need(g, "dim", where)), "generators": gens}
    if kind == G.HEISENBERG:
        return {"kind": kind, "generators": gens}
    if kind == G.DIHEDRAL:
        return {"kind": kind, "dim": int(_need(g, "dim", where))}
    if kind == G.DIRECT_PRODUCT_FINITE:
        return {"kind": kind, "base": _norm_group(_need(g, "base", where), where + ".base"),
                "finite": _norm_finite(_need(g, "finite", where), where + ".finite"),
                "finite_generators": [int(i) for i in _need(g, "finite_generators", where)],
                "style": g.get("style", "union")}
    raise ConfigError(f"{where}.kind: unknown group kind {kind!r}")


def _norm_dist(d: dict, where: str) -> dict:
    name = _need(d, "dist", where)
    if name not in DIST_KEYS:
        raise ConfigError(f"{where}.dist: unknown distribution {name!r}")
    _check_keys(d, DIST_KEYS[name], where)
    try:
        return M.dist_to_dict(M.dist_from_dict(d))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def _norm_model(m: dict, where: str = "model") -> dict:
    v = _need(m, "variant", where)
    if v not in MODEL_KEYS:
        raise ConfigError(f"{where}.variant: unknown variant {v!r}")
    _check_keys(m, MODEL_KEYS[v], where)
    m = dict(m)
    for k in ("weight", "rate"):
        if k in m:
            m[k] = _norm_dist(m[k], f"{where}.{k}")
    try:
        return M.model_to_dict(M.model_from_dict(m))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def _norm_task(t: dict, where: str) -> dict:
    kind = _need(t, "type", where)
    if kind not in TASK_KEYS:
        raise ConfigError(f"{where}.type: unknown task type {kind!r}")
    _check_keys(t, TASK_KEYS[kind], where)
    return json.loads(json.dumps(t))


def _norm_run(r: dict) -> dict:
    _check_keys(r, RUN_KEYS, "run")
    out = copy.deepcopy(RUN_DEFAULTS)
    out.update(copy.deepcopy(r))
    out["master_seed"] = int(out["master_seed"])
    out["samples"] = int(out["samples"])
    out["ladder"] = [int(n) for n in out["ladder"]]
    out["margin"] = float(out["margin"])
    out["margin_sweep"] = [float(v) for v in out["margin_sweep"]]
    out["budget_mb"] = int(out["budget_mb"])
    out["workers"] = int(out["workers"])
    if out["margin"] < 1:
        raise ConfigError("run.margin must be at least 1")
    out["tasks"] = [_norm_task(t, f"run.tasks[{i}]") for i, t in enumerate(out["tasks"])]
    return out


def _norm_outputs(o: dict) -> dict:
    _check_keys(o, OUTPUT_KEYS, "outputs")
    out = dict(OUTPUT_DEFAULTS)
    out.update(o)
    out["formats"] = sorted(set(out["formats"]))
    bad = set(out["formats"]) - FORMATS
    if bad:
        raise ConfigError(f"outputs.formats: unknown format {sorted(bad)[0]!r}")
    out["directory"] = str(out["directory"])
    return out


def normalize(raw: dict) -> dict:
    """Validate a raw config and fill defaults."""
    _check_keys(raw, TOP_KEYS, "")
    return {
        "group": _norm_group(_need(raw, "group", "config")),
        "model": _norm_model(_need(raw, "model", "config")),
        "run": _norm_run(raw.get("run", {})),
        "outputs": _norm_outputs(raw.get("outputs", {})),
    }


# ---------------------------------------------------------------------------
# the config object


@dataclass
class ExperimentConfig:
    group: dict
    model: dict
    run: dict
    outputs: dict
    source_dir: Optional[str] = None  # resolves relative finite-table paths

    @classmethod
    def from_dict(cls, raw: dict, source_dir: Optional[str] = None) -> ExperimentConfig:
        n = normalize(raw)
        return cls(n["group"], n["model"], n["run"], n["outputs"], source_dir)

    @classmethod
    def load(cls, path) -> ExperimentConfig:
        p = Path(path)
        try:
            raw = json.loads(p.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{p}: not valid JSON ({exc})") from exc
        return cls.from_dict(raw, str(p.parent.resolve()))

    def to_dict(self) -> dict:
        return {"group": copy.deepcopy(self.group), "model": copy.deepcopy(self.model),
                "run": copy.deepcopy(self.run), "outputs": copy.deepcopy(self.outputs)}

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    def dump(self, path) -> None:
        Path(path).write_text(self.dumps())

    def hash(self) -> str:
        """Hash of everything that can change outputs (the worker count cannot)."""
        d = self.to_dict()
        d["run"].pop("workers", None)
        d["outputs"].pop("directory", None)
        blob = json.dumps(d, sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def group_spec(self) -> G.GroupSpec:
        return build_group(self.group, self.source_dir)

    def model_obj(self) -> M.Model:
        return M.model_from_dict(self.model)


def build_finite(f: dict, source_dir: Optional[str] = None) -> FiniteGroupTable:
    if "path" in f:
        p = Path(f["path"])
        if not p.is_absolute() and source_dir:
            p = Path(source_dir) / p
        return FiniteGroupTable.load(p)
    if f["builtin"] == "cyclic":
        return cyclic_table(f["order"])
    if f["builtin"] == "sl23":
        return sl23_table()[0]
    return product_table(cyclic_table(f["m"]), sl23_table()[0])


def build_group(g: dict, source_dir: Optional[str] = None) -> G.GroupSpec:
    try:
        kind = g["kind"]
        if kind == G.FREE_ABELIAN:
            return G.free_abelian(g["dim"], g.get("generators"))
        if kind == G.HEISENBERG:
            return G.heisenberg(g.get("generators"))
        if kind == G.DIHEDRAL:
            return G.dihedral(g["dim"])
        base = build_group(g["base"], source_dir)
        return G.direct_product_finite(base, build_finite(g["finite"], source_dir), g["finite_generators"],
                                       g.get("style", "union"))
    except ConfigError:
        raise
    except (ValueError, OSError) as exc:
        raise ConfigError(f"group: {exc}") from exc
