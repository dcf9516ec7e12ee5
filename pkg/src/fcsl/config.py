"""Run configuration: strict TOML parsing with defaults and a resolved echo.

A configuration has four tables::

    [model]       name, flux, diffusion, alpha, c, smoothing, [model.noise]
    [solver]      n, dt ("auto-cfl" or a number), t_end, tau, cfl_safety,
                  sample_stride, seed, viscous_operator
    [experiment]  check, n_paths, p, tau_ladder, gamma_ladder, zeta_range,
                  u0, u0_b, T, burn_in, stride, functional, sobolev_r,
                  sobolev_q, snapshot_every
    [output]      directory, formats

``model = "burgers_frac"`` at top level is shorthand for ``[model] name = ...``.
Unknown keys are errors.
"""

from __future__ import annotations

import copy
import difflib
import math
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover - exercised on 3.10
    import tomli as tomllib

from .errors import ConfigurationError
from .model import (BUILTIN_MODELS, ModelSpec, NoiseSpec, builtin_model, burgers_flux,
                    identity_diffusion, linear_flux, regime_check, smoothed_positive_part,
                    zero_diffusion)
from .operators import FractionalOrder
from .solver import SolverConfig
from .torus import Field, TorusGrid

CHECKS = ("contraction", "lp_bound", "mean", "viscosity", "nld")

_INITIAL = {
    "shape": "sine",
    "amplitude": 1.0,
    "mode": 1,
    "offset": 0.0,
    "kappa": 3.0,
    "perturbation_amplitude": 0.0,
    "perturbation_mode": 2,
}

DEFAULTS = {
    "model": {
        "name": "burgers_frac",
        "flux": "",
        "diffusion": "",
        "alpha": 0.3,
        "c": 1.0,
        "smoothing": 0.05,
        "noise": {
            "kind": "additive",
            "K": 8,
            "q": 2.0,
            "amplitude": 1.0,
            "family": "sine",
            "g": "bounded",
            "cancellation": True,
        },
    },
    "solver": {
        "n": 128,
        "dt": "auto-cfl",
        "t_end": 1.0,
        "tau": 0.0,
        "cfl_safety": 0.9,
        "sample_stride": 1,
        "seed": 0,
        "viscous_operator": "fd",
    },
    "experiment": {
        "check": [],
        "n_paths": 16,
        "p": 2.0,
        "tau_ladder": [1e-2, 5e-3, 2.5e-3, 1.25e-3],
        "gamma_ladder": [1e-1, 1e-2, 1e-3],
        "zeta_range": [-10.0, 10.0],
        "u0": dict(_INITIAL),
        "u0_b": {},
        "T": 100.0,
        "burn_in": -1.0,
        "stride": 0.5,
        "functional": "L1_norm",
        "sobolev_r": 0.5,
        "sobolev_q": 2.0,
        "snapshot_every": 0,
    },
    "output": {"directory": "out", "formats": ["csv", "snapshot"]},
}

ALIASES = {
    "viscosity": "tau",
    "viscocity": "tau",
    "nu": "tau",
    "grid_n": "n",
    "cells": "n",
    "tend": "t_end",
    "T_end": "t_end",
    "cfl": "cfl_safety",
    "stride_steps": "sample_stride",
}

_FLUXES = {"burgers": burgers_flux, "linear": None}
_DIFFUSIONS = {"identity": identity_diffusion, "zero": zero_diffusion,
               "smoothed_positive_part": None}


def _unknown(key: str, table: str, known) -> ConfigurationError:
    hint = ALIASES.get(key) if ALIASES.get(key) in known else None
    if hint is None:
        close = difflib.get_close_matches(key, list(known), n=1)
        hint = close[0] if close else None
    msg = f"unknown key {key!r} in [{table}]"
    if hint:
        msg += f"; did you mean {hint!r}?"
    return ConfigurationError(msg)


def _merge(defaults: dict, given: dict, table: str) -> dict:
    out = copy.deepcopy(defaults)
    for k, v in given.items():
        if k not in defaults:
            raise _unknown(k, table, defaults)
        d = defaults[k]
        if isinstance(d, dict) and k not in ("u0_b",):
            if not isinstance(v, dict):
                raise ConfigurationError(f"[{table}] {k} must be a table")
            out[k] = _merge(d, v, f"{table}.{k}")
        else:
            out[k] = v
    return out


def _type_check(value, default, where):
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigurationError(f"{where} must be a boolean")
    elif isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigurationError(f"{where} must be an integer")
    elif isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigurationError(f"{where} must be a number")
    elif isinstance(default, str) and where.endswith(".dt"):
        if not (value == "auto-cfl" or (isinstance(value, (int, float)) and not isinstance(value, bool))):
            raise ConfigurationError(f"{where} must be 'auto-cfl' or a positive number")
    elif isinstance(default, str):
        if not isinstance(value, str):
            raise ConfigurationError(f"{where} must be a string")
    elif isinstance(default, list):
        if not isinstance(value, list):
            raise ConfigurationError(f"{where} must be an array")


def _check_types(resolved: dict, defaults: dict, prefix: str):
    for k, d in defaults.items():
        v = resolved[k]
        where = f"{prefix}.{k}"
        if isinstance(d, dict) and k != "u0_b":
            _check_types(v, d, where)
        elif k == "check":
            if not isinstance(v, (str, list)):
                raise ConfigurationError(f"{where} must be a string or array")
        elif k == "u0_b":
            if not isinstance(v, dict):
                raise ConfigurationError(f"{where} must be a table")
        else:
            _type_check(v, d, where)


def _normalise(r: dict) -> dict:
    s, e, m = r["solver"], r["experiment"], r["model"]
    for k in ("alpha", "c", "smoothing"):
        m[k] = float(m[k])
    for k in ("q", "amplitude"):
        m["noise"][k] = float(m["noise"][k])
    for k in ("t_end", "tau", "cfl_safety"):
        s[k] = float(s[k])
    if s["dt"] != "auto-cfl":
        s["dt"] = float(s["dt"])
    for k in ("p", "T", "burn_in", "stride", "sobolev_r", "sobolev_q"):
        e[k] = float(e[k])
    e["tau_ladder"] = [float(x) for x in e["tau_ladder"]]
    e["gamma_ladder"] = [float(x) for x in e["gamma_ladder"]]
    e["zeta_range"] = [float(x) for x in e["zeta_range"]]
    if isinstance(e["check"], str):
        e["check"] = [e["check"]] if e["check"] else []
    for k in ("amplitude", "offset", "kappa", "perturbation_amplitude"):
        e["u0"][k] = float(e["u0"][k])
    # u0_b defaults to u0 with an added 0.1 * sin(2 pi * mode * x) perturbation
    given_b = e["u0_b"]
    base = copy.deepcopy(e["u0"])
    if not given_b:
        base["perturbation_amplitude"] = base["perturbation_amplitude"] + 0.1
        e["u0_b"] = base
    else:
        e["u0_b"] = _merge(_INITIAL, given_b, "experiment.u0_b")
        _check_types(e["u0_b"], _INITIAL, "experiment.u0_b")
        for k in ("amplitude", "offset", "kappa", "perturbation_amplitude"):
            e["u0_b"][k] = float(e["u0_b"][k])
    if e["burn_in"] < 0:
        e["burn_in"] = e["T"] / 10
    return r


def _semantic(r: dict):
    m, s, e = r["model"], r["solver"], r["experiment"]
    if m["name"] not in BUILTIN_MODELS and not (m["flux"] and m["diffusion"]):
        raise ConfigurationError(
            f"model.name {m['name']!r} is not builtin ({', '.join(BUILTIN_MODELS)}); "
            "give both model.flux and model.diffusion instead")
    if m["flux"] and m["flux"] not in _FLUXES:
        raise ConfigurationError(f"model.flux must be one of {sorted(_FLUXES)}")
    if m["diffusion"] and m["diffusion"] not in _DIFFUSIONS:
        raise ConfigurationError(f"model.diffusion must be one of {sorted(_DIFFUSIONS)}")
    if not 0 < m["alpha"] < 1:
        raise ConfigurationError(f"model.alpha={m['alpha']} must lie in (0, 1)")
    nz = m["noise"]
    if nz["kind"] not in ("additive", "multiplicative"):
        raise ConfigurationError("model.noise.kind must be 'additive' or 'multiplicative'")
    if nz["K"] < 0:
        raise ConfigurationError("model.noise.K must be non-negative")
    spec = _noise(nz)
    ok, why = regime_check(spec, m["alpha"])
    if not ok:
        raise ConfigurationError(f"model.alpha: {why} (joint x,u noise)")
    if s["dt"] != "auto-cfl" and not s["dt"] > 0:
        raise ConfigurationError("solver.dt must be positive or 'auto-cfl'")
    SolverConfig(grid_n=s["n"], dt=None if s["dt"] == "auto-cfl" else s["dt"], t_end=s["t_end"],
                 tau=s["tau"], cfl_safety=s["cfl_safety"], sample_stride=s["sample_stride"],
                 seed=s["seed"], viscous_operator=s["viscous_operator"])
    for c in e["check"]:
        if c not in CHECKS:
            close = difflib.get_close_matches(c, CHECKS, n=1)
            raise ConfigurationError(f"unknown check {c!r}" + (f"; did you mean {close[0]!r}?" if close else ""))
    for key in ("u0", "u0_b"):
        if e[key]["shape"] not in INITIAL_SHAPES:
            raise ConfigurationError(f"experiment.{key}.shape must be one of {sorted(INITIAL_SHAPES)}")
    if len(e["zeta_range"]) != 2 or not e["zeta_range"][0] < e["zeta_range"][1]:
        raise ConfigurationError("experiment.zeta_range must be [lo, hi] with lo < hi")
    if e["n_paths"] < 1:
        raise ConfigurationError("experiment.n_paths must be positive")


def _noise(nz: dict) -> NoiseSpec:
    return NoiseSpec(kind=nz["kind"], K=nz["K"], q=nz["q"], amplitude=nz["amplitude"],
                     family=nz["family"], cancellation=nz["cancellation"],
                     g_name=nz["g"] if nz["kind"] == "multiplicative" else "one")


INITIAL_SHAPES = {
    "sine": lambda x, p: p["amplitude"] * np.sin(2 * np.pi * p["mode"] * x),
    "cosine": lambda x, p: p["amplitude"] * np.cos(2 * np.pi * p["mode"] * x),
    "constant": lambda x, p: np.full_like(x, p["amplitude"]),
    "step": lambda x, p: np.where(x < 0.5, p["amplitude"], -p["amplitude"]),
    "tanh_step": lambda x, p: p["amplitude"] * np.tanh(p["kappa"] * np.sin(2 * np.pi * p["mode"] * x)),
}


@dataclass
class RunConfig:
    """Validated configuration; ``resolved`` holds every key with defaults applied."""

    resolved: dict

    @property
    def model_section(self) -> dict:
        return self.resolved["model"]

    @property
    def solver_section(self) -> dict:
        return self.resolved["solver"]

    @property
    def experiment(self) -> dict:
        return self.resolved["experiment"]

    @property
    def output(self) -> dict:
        return self.resolved["output"]

    def build_model(self) -> ModelSpec:
        m = self.model_section
        noise = _noise(m["noise"])
        if m["flux"] or m["diffusion"]:
            base = builtin_model(m["name"] if m["name"] in BUILTIN_MODELS else "burgers_frac",
                                 m["alpha"], noise, c=m["c"], smoothing=m["smoothing"])
            flux = base.flux
            if m["flux"] == "burgers":
                flux = burgers_flux()
            elif m["flux"] == "linear":
                flux = linear_flux(m["c"])
            diff = base.diffusion
            if m["diffusion"] == "smoothed_positive_part":
                diff = smoothed_positive_part(m["smoothing"])
            elif m["diffusion"]:
                diff = _DIFFUSIONS[m["diffusion"]]()
            return ModelSpec(flux, diff, noise, FractionalOrder(m["alpha"]), name=m["name"])
        return builtin_model(m["name"], m["alpha"], noise, c=m["c"], smoothing=m["smoothing"])

    def solver_config(self, seed_override: Optional[int] = None) -> SolverConfig:
        s = self.solver_section
        return SolverConfig(grid_n=s["n"], dt=None if s["dt"] == "auto-cfl" else s["dt"],
                            t_end=s["t_end"], tau=s["tau"], cfl_safety=s["cfl_safety"],
                            sample_stride=s["sample_stride"],
                            seed=s["seed"] if seed_override is None else int(seed_override),
                            viscous_operator=s["viscous_operator"])

    def initial(self, grid: TorusGrid, which: str = "u0") -> Field:
        p = self.experiment[which]
        x = grid.x
        v = INITIAL_SHAPES[p["shape"]](x, p) + p["offset"]
        v = v + p["perturbation_amplitude"] * np.sin(2 * np.pi * p["perturbation_mode"] * x)
        return Field(grid, v)

    def to_toml(self) -> str:
        return to_toml(self.resolved)


def parse_config(text: str) -> RunConfig:
    """Parse, default and validate a TOML run configuration."""
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as e:
        raise ConfigurationError(f"config parse error: {e}") from None
    if isinstance(raw.get("model"), str):
        raw["model"] = {"name": raw["model"]}
    for k in raw:
        if k not in DEFAULTS:
            raise _unknown(k, "top level", DEFAULTS)
    resolved = {}
    for table, d in DEFAULTS.items():
        given = raw.get(table, {})
        if not isinstance(given, dict):
            raise ConfigurationError(f"[{table}] must be a table")
        resolved[table] = _merge(d, given, table)
        _check_types(resolved[table], d, table)
    resolved = _normalise(resolved)
    _semantic(resolved)
    return RunConfig(resolved)


def load_config(path) -> RunConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigurationError(f"cannot read config {path}: {e}") from None
    return parse_config(text)


# --- TOML echo -----------------------------------------------------------------------


def _toml_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        if math.isinf(v) or math.isnan(v):
            raise ConfigurationError("non-finite values cannot be written to TOML")
        r = repr(v)
        return r if any(c in r for c in ".en") else r + ".0"
    if isinstance(v, str):
        return '"' + v.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(v, list):
        return "[" + ", ".join(_toml_value(x) for x in v) + "]"
    if isinstance(v, dict):
        return "{ " + ", ".join(f"{k} = {_toml_value(x)}" for k, x in v.items()) + " }"
    raise ConfigurationError(f"cannot serialise {type(v).__name__}")


def to_toml(doc: dict) -> str:
    """Write nested tables; sub-tables of a table become ``[a.b]`` sections."""
    lines = []

    def emit(prefix, table):
        scalars = {k: v for k, v in table.items() if not (isinstance(v, dict) and k not in ("u0", "u0_b"))}
        subs = {k: v for k, v in table.items() if isinstance(v, dict) and k not in ("u0", "u0_b")}
        lines.append(f"[{prefix}]")
        for k, v in scalars.items():
            lines.append(f"{k} = {_toml_value(v)}")
        lines.append("")
        for k, v in subs.items():
            emit(f"{prefix}.{k}", v)

    for name, table in doc.items():
        emit(name, table)
    return "\n".join(lines)
