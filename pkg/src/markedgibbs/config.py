"""Run configuration: TOML sections checked against an explicit schema."""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import tomli

from .lattice import Window
from .model import (BilinearSpin, ConstantCoupling, ModelSpec, PolynomialSpinEnergy, PowerLawPotential,
                    PowerLawWellPotential, QuadraticDifferenceSpin, ZeroCoupling, ZeroPotential)
from .sampler import KernelConfig


class ConfigError(ValueError):
    pass


NUM = (int, float)

# family -> allowed keys with types; "family" itself is implied
PHI_FAMILIES = {
    "power_law": {"A": NUM, "delta": NUM, "core": NUM},
    "power_law_well": {"A": NUM, "delta": NUM, "core": NUM, "depth": NUM},
    "zero": {},
}
COUPLING_FAMILIES = {"constant": {"J0": NUM}, "zero": {}}
W_FAMILIES = {"bilinear": {}, "quadratic_difference": {"r": NUM}}
V_FAMILIES = {"polynomial": {"q_V": int, "coef": NUM}}

SCHEMA = {
    "model": {"d": int, "m": int, "beta": NUM, "z": NUM, "range_R": NUM,
              "phi": dict, "coupling": dict, "w": dict, "v": dict},
    "window": {"cells": list, "size": int, "cell": list, "ladder": list},
    "sampler": {"p_birth": NUM, "p_death": NUM, "p_move": NUM, "p_respin": NUM, "move_scale": NUM,
                "burn_in": int, "thin": int, "drift_check": int, "n_samples": int},
    "boundary": {"kind": str, "z": NUM, "spacing": NUM, "spin_magnitude": NUM},
    "bounds": {"a": NUM, "alpha": NUM, "eps": NUM},
    "moments": {"a": NUM},
    "dpcheck": {"z_grid": list, "J0_grid": list, "reference_samples": int, "contents_per_cell": int,
                "c_threshold": NUM, "l_threshold": NUM, "F_quantile": NUM},
    "correlations": {"observable1": str, "observable2": str, "separations": list},
    "oracle": {"n_max": int, "q": int},
}
TOP_LEVEL = {"seed": int, "out": str, "workers": int}


def _check_keys(section: dict, allowed: dict, where: str):
    for key, val in section.items():
        if key not in allowed:
            raise ConfigError(f"unknown key '{key}' in [{where}]")
        typ = allowed[key]
        if isinstance(val, bool) or not isinstance(val, typ):
            raise ConfigError(f"[{where}] {key} has type {type(val).__name__}")


def _family(section: dict, families: dict, where: str) -> tuple[str, dict]:
    if "family" not in section:
        raise ConfigError(f"[{where}] needs 'family'")
    fam = section["family"]
    if fam not in families:
        raise ConfigError(f"[{where}] unknown family {fam!r}")
    rest = {k: v for k, v in section.items() if k != "family"}
    _check_keys(rest, families[fam], where)
    return fam, rest


def build_model(sec: dict) -> ModelSpec:
    for key in ("d", "m", "beta", "z", "range_R", "phi", "coupling", "w", "v"):
        if key not in sec:
            raise ConfigError(f"[model] missing '{key}'")
    d, R = sec["d"], float(sec["range_R"])
    fam, p = _family(sec["phi"], PHI_FAMILIES, "model.phi")
    try:
        if fam == "power_law":
            phi = PowerLawPotential(float(p.get("A", 1.0)), float(p.get("delta", 0.5)), d, R,
                                    float(p.get("core", 0.0)))
        elif fam == "power_law_well":
            phi = PowerLawWellPotential(float(p.get("A", 1.0)), float(p.get("delta", 0.5)), d, R,
                                        float(p.get("core", 0.0)), float(p.get("depth", 0.1)))
        else:
            phi = ZeroPotential()
        fam, p = _family(sec["coupling"], COUPLING_FAMILIES, "model.coupling")
        coupling = ConstantCoupling(float(p.get("J0", 0.1)), R) if fam == "constant" else ZeroCoupling()
        fam, p = _family(sec["w"], W_FAMILIES, "model.w")
        w = BilinearSpin() if fam == "bilinear" else QuadraticDifferenceSpin(float(p.get("r", 3.0)))
        fam, p = _family(sec["v"], V_FAMILIES, "model.v")
        v = PolynomialSpinEnergy(int(p.get("q_V", 4)), float(p.get("coef", 1.0)))
        return ModelSpec(d, sec["m"], float(sec["beta"]), float(sec["z"]), R, phi, coupling, w, v)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


@dataclass
class RunConfig:
    model: ModelSpec
    window: Window
    cell: tuple
    ladder: list
    kernel: KernelConfig
    n_samples: int
    boundary: dict
    bounds: dict
    moments: dict
    dpcheck: dict
    correlations: dict
    oracle: dict
    seed: int = 0
    out: str = "runs/default"
    workers: int = 1
    text: str = ""
    sections: dict = field(default_factory=dict)

    def model_section_json(self) -> str:
        return json.dumps(self.sections.get("model", {}), sort_keys=True, separators=(",", ":"))


def parse_config(text: str) -> RunConfig:
    try:
        data = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"not valid TOML: {exc}") from exc
    for key, val in data.items():
        if key in SCHEMA:
            if not isinstance(val, dict):
                raise ConfigError(f"'{key}' must be a section")
            _check_keys(val, SCHEMA[key], key)
        elif key in TOP_LEVEL:
            _check_keys({key: val}, TOP_LEVEL, "top level")
        else:
            raise ConfigError(f"unknown section or key '{key}'")
    if "model" not in data:
        raise ConfigError("missing [model] section")
    model = build_model(data["model"])
    win = data.get("window", {})
    if "cells" in win:
        try:
            window = Window(frozenset(tuple(c) for c in win["cells"]))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"[window] cells: {exc}") from exc
    else:
        window = Window.centered(win.get("size", 1), model.d)
    if window.d != model.d:
        raise ConfigError("[window] cell dimension differs from model.d")
    cell = tuple(win.get("cell", [0] * model.d))
    ladder = list(win.get("ladder", [3, 5, 7]))
    smp = dict(data.get("sampler", {}))
    n_samples = smp.pop("n_samples", 1000)
    try:
        kernel = KernelConfig(**smp)
    except ValueError as exc:
        raise ConfigError(f"[sampler] {exc}") from exc
    boundary = data.get("boundary", {"kind": "empty"})
    if boundary.get("kind", "empty") not in ("empty", "poisson", "deterministic_grid"):
        raise ConfigError(f"[boundary] unknown kind {boundary.get('kind')!r}")
    return RunConfig(model=model, window=window, cell=cell, ladder=ladder, kernel=kernel, n_samples=n_samples,
                     boundary=boundary, bounds=data.get("bounds", {}), moments=data.get("moments", {}),
                     dpcheck=data.get("dpcheck", {}), correlations=data.get("correlations", {}),
                     oracle=data.get("oracle", {}), seed=data.get("seed", 0), out=data.get("out", "runs/default"),
                     workers=data.get("workers", 1), text=text, sections=data)


def load_config(path) -> RunConfig:
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    return parse_config(raw.decode())


def boundary_kind(sec: dict):
    kind = sec.get("kind", "empty")
    if kind == "poisson":
        return ("poisson", float(sec.get("z", 0.5)))
    if kind == "deterministic_grid":
        return ("deterministic_grid", float(sec.get("spacing", 1.0)), float(sec.get("spin_magnitude", 1.0)))
    return "empty"
