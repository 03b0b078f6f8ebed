"""Scenario-driven command line entry point.

A scenario is a flat INI file, for example::

    [model]
    preset = string_linear_pd

    [controller]
    S_c = 1.0

    [grid]
    n = 100
    dt = 0.01
    T = 20

    [disturbance]
    kind = truncated_step
    amplitude = 0.5
    duration = 2

    [analyses]
    run = conditions, simulate

Run it with ``hamport --config scenario.ini --out results``. Exit status is
0 when every requested verdict passes, 2 when a verdict fails and 1 on
execution or configuration errors.
"""
from __future__ import annotations

import argparse
import configparser
import json
import logging
import math
import os
import re
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .conditions import certify
from .core import EnergyDensity, PortHamiltonianSystem
from .diagnostics import (StabilityReport, assess_trajectories, fit_contraction, gain_curve,
                          norm_equivalence)
from .discretize import DEFAULT_DISSIPATION, discretize_closed_loop, write_matrix_dump
from .errors import ConfigError, HamportError
from .models import (PRESET_NAMES, controller_library, preset, random_initial_state,
                     timoshenko_beam, vibrating_string)
from .signals import make_signal
from .simulate import simulate

log = logging.getLogger("hamport")

ANALYSES = ("conditions", "simulate", "contraction", "gain_curve")

# value kinds: str, int, float, bool, floats (comma list), strs (comma list),
# array (number or JSON nested list)
SCHEMA = {
    "model": {"preset": "str", "plant": "str", "a": "float", "b": "float", "rho": "float",
              "tension": "float", "EI": "float", "I_r": "float", "K_shear": "float",
              "P0": "array", "P1": "array", "W_B1": "array", "W_B2": "array", "W_C": "array",
              "H": "array"},
    "controller": {"name": "str", "k": "int", "m_c": "int", "K": "array", "B_c": "array",
                   "S_c": "array", "Q": "array", "D": "array", "alpha": "float", "c": "float"},
    "grid": {"n": "int", "dt": "float", "T": "float", "scheme": "str", "dissipation": "float"},
    "disturbance": {"kind": "str", "amplitude": "array", "duration": "float", "rate": "float",
                    "start": "float", "window": "float", "seed": "int", "dt": "float"},
    "ensemble": {"count": "int", "seed": "int", "amplitude": "float"},
    "analyses": {"run": "strs", "epsilon": "float"},
    "conditions": {"n_samples": "int", "sample_radius": "float", "n_tests": "int",
                   "passivity_nodes": "int"},
    "contraction": {"count": "int", "horizon": "float", "tau": "float", "dt": "float"},
    "gain_curve": {"amplitudes": "floats", "tail_window": "float", "T": "float",
                   "replicates": "int", "dt": "float"},
    "output": {"dir": "str", "dump_matrices": "bool"},
}


# ---------------------------------------------------------------- config

def _parse_value(kind, raw):
    raw = raw.strip()
    if kind == "str":
        return raw
    if kind == "int":
        return int(raw)
    if kind == "float":
        v = float(raw)
        if not math.isfinite(v):
            raise ValueError("must be finite")
        return v
    if kind == "bool":
        low = raw.lower()
        if low not in ("true", "false", "yes", "no", "1", "0"):
            raise ValueError("expected a boolean")
        return low in ("true", "yes", "1")
    if kind == "floats":
        return [float(p) for p in raw.split(",") if p.strip()]
    if kind == "strs":
        return [p.strip() for p in raw.split(",") if p.strip()]
    if kind == "array":
        v = json.loads(raw)
        arr = np.asarray(v, dtype=float)
        if not np.all(np.isfinite(arr)):
            raise ValueError("must be finite")
        return float(v) if arr.ndim == 0 else arr.tolist()
    raise AssertionError(kind)


def _render_value(kind, value):
    if kind in ("str",):
        return value
    if kind in ("int",):
        return str(int(value))
    if kind == "float":
        return repr(float(value))
    if kind == "bool":
        return "true" if value else "false"
    if kind == "floats":
        return ", ".join(repr(float(v)) for v in value)
    if kind == "strs":
        return ", ".join(value)
    return json.dumps(value)


def _line_numbers(text):
    """Map ``(section, key)`` and sections to 1-based line numbers."""
    lines, section = {}, None
    for i, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        m = re.match(r"^\[(.+)\]$", s)
        if m:
            section = m.group(1).strip()
            lines.setdefault((section, None), i)
            continue
        m = re.match(r"^([^=:#;\s][^=:]*?)\s*[=:]", s)
        if m and section is not None:
            lines.setdefault((section, m.group(1).strip()), i)
    return lines


@dataclass
class ScenarioConfig:
    """Typed scenario: ``values[section][key]`` for every key present in the file.

    Parsing rejects unknown sections and keys. :meth:`to_ini` renders the
    values canonically and ``from_string(c.to_ini()) == c``.
    """

    values: dict = field(default_factory=dict)
    source: str = "<string>"

    def __eq__(self, other):
        return isinstance(other, ScenarioConfig) and self.values == other.values

    def get(self, section, key, default=None):
        return self.values.get(section, {}).get(key, default)

    @classmethod
    def from_string(cls, text: str, source: str = "<string>") -> "ScenarioConfig":
        parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",),
                                           default_section="__defaults__")
        parser.optionxform = str
        try:
            parser.read_string(text, source=source)
        except configparser.Error as exc:
            raise ConfigError(f"{source}: {exc}") from exc
        lines = _line_numbers(text)
        values = {}
        for section in parser.sections():
            if section not in SCHEMA:
                ln = lines.get((section, None), "?")
                raise ConfigError(f"{source}:{ln}: unknown section [{section}]; "
                                  f"expected one of {sorted(SCHEMA)}")
            values[section] = {}
            for key, raw in parser.items(section):
                ln = lines.get((section, key), "?")
                if key not in SCHEMA[section]:
                    raise ConfigError(f"{source}:{ln}: unknown key '{key}' in [{section}]; "
                                      f"expected one of {sorted(SCHEMA[section])}")
                try:
                    values[section][key] = _parse_value(SCHEMA[section][key], raw)
                except (ValueError, TypeError) as exc:
                    raise ConfigError(f"{source}:{ln}: [{section}] {key} = {raw!r}: "
                                      f"expected {SCHEMA[section][key]} ({exc})") from exc
        cfg = cls(values, source)
        cfg.validate()
        return cfg

    @classmethod
    def from_file(cls, path) -> "ScenarioConfig":
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_string(text, str(path))

    def to_ini(self) -> str:
        out = []
        for section, keys in SCHEMA.items():
            if section not in self.values:
                continue
            out.append(f"[{section}]")
            for key, kind in keys.items():
                if key in self.values[section]:
                    out.append(f"{key} = {_render_value(kind, self.values[section][key])}")
            out.append("")
        return "\n".join(out)

    def with_overrides(self, overrides) -> "ScenarioConfig":
        """Apply ``section.key=value`` strings."""
        values = {s: dict(kv) for s, kv in self.values.items()}
        for item in overrides or ():
            if "=" not in item or "." not in item.split("=", 1)[0]:
                raise ConfigError(f"override {item!r} must look like section.key=value")
            lhs, raw = item.split("=", 1)
            section, key = (p.strip() for p in lhs.split(".", 1))
            if section not in SCHEMA or key not in SCHEMA[section]:
                raise ConfigError(f"override {item!r}: unknown field {section}.{key}")
            try:
                values.setdefault(section, {})[key] = _parse_value(SCHEMA[section][key], raw)
            except (ValueError, TypeError) as exc:
                raise ConfigError(f"override {item!r}: expected {SCHEMA[section][key]} "
                                  f"({exc})") from exc
        cfg = ScenarioConfig(values, self.source)
        cfg.validate()
        return cfg

    def validate(self) -> None:
        run = self.get("analyses", "run", ["conditions"])
        bad = [a for a in run if a not in ANALYSES]
        if bad:
            raise ConfigError(f"{self.source}: unknown analyses {bad}; choose from {ANALYSES}")
        p = self.get("model", "preset")
        if p is not None and p not in PRESET_NAMES:
            raise ConfigError(f"{self.source}: unknown preset {p!r}; choose from {PRESET_NAMES}")
        if p is None and self.get("model", "plant") is None:
            raise ConfigError(f"{self.source}: [model] needs 'preset' or 'plant'")
        for key in ("n", "count"):
            for section in ("grid", "ensemble", "contraction"):
                v = self.get(section, key)
                if v is not None and v < 1:
                    raise ConfigError(f"{self.source}: [{section}] {key} must be positive")

    @property
    def analyses(self) -> list:
        return list(self.get("analyses", "run", ["conditions"]))


# ---------------------------------------------------------------- building blocks

def build_system(cfg: ScenarioConfig) -> PortHamiltonianSystem:
    name = cfg.get("model", "preset")
    if name is not None and cfg.get("model", "plant") is None:
        return preset(name).system
    plant = cfg.get("model", "plant")
    a, b = cfg.get("model", "a", 0.0), cfg.get("model", "b", 1.0)
    if plant == "string":
        return vibrating_string(cfg.get("model", "rho", 1.0), cfg.get("model", "tension", 1.0),
                                a, b)
    if plant == "timoshenko":
        return timoshenko_beam(cfg.get("model", "rho", 1.0), cfg.get("model", "EI", 1.0),
                               cfg.get("model", "I_r", 1.0), cfg.get("model", "K_shear", 1.0),
                               a, b)
    if plant == "inline":
        missing = [k for k in ("P0", "P1", "W_B1", "W_B2", "W_C", "H")
                   if cfg.get("model", k) is None]
        if missing:
            raise ConfigError(f"inline plant needs {missing}")
        mat = {k: np.atleast_2d(np.asarray(cfg.get("model", k), float))
               for k in ("P0", "P1", "W_B1", "W_B2", "W_C", "H")}
        return PortHamiltonianSystem((mat["P0"], mat["P1"]), mat["W_B1"], mat["W_B2"],
                                     mat["W_C"], EnergyDensity.constant(mat["H"]), a, b,
                                     "inline")
    raise ConfigError(f"unknown plant {plant!r}; choose string, timoshenko or inline")


def build_controller(cfg: ScenarioConfig, system):
    params = {k: v for k, v in cfg.values.get("controller", {}).items() if k != "name"}
    name = cfg.get("controller", "name")
    p = cfg.get("model", "preset")
    if p is not None:
        base = preset(p).controller
        if name is None and not params:
            return base
        name = name or base.name
    name = name or "linear_pd"
    params.setdefault("k", system.k)
    return controller_library(name, params)


def _preset_default(cfg, attr, fallback):
    p = cfg.get("model", "preset")
    return getattr(preset(p), attr) if p is not None else fallback


def build_signal_spec(cfg: ScenarioConfig, k: int, run_seed: int) -> dict:
    spec = dict(cfg.values.get("disturbance", {}))
    if not spec:
        spec = dict(_preset_default(cfg, "signal", {"kind": "zero"}))
    spec.setdefault("kind", "zero")
    spec["k"] = k
    if spec["kind"] == "windowed_noise":
        spec["seed"] = int(spec.get("seed", 0)) + run_seed
    return spec


def grid_of(cfg: ScenarioConfig):
    n = cfg.get("grid", "n", _preset_default(cfg, "n", 100))
    dt = cfg.get("grid", "dt", _preset_default(cfg, "dt", 0.01))
    T = cfg.get("grid", "T", _preset_default(cfg, "T", 20.0))
    return n, dt, T


def build_model(cfg: ScenarioConfig):
    system = build_system(cfg)
    controller = build_controller(cfg, system)
    n, _, _ = grid_of(cfg)
    model = discretize_closed_loop(system, controller, n, cfg.get("grid", "scheme", "sbp-sat"),
                                   cfg.get("grid", "dissipation", DEFAULT_DISSIPATION))
    return model


def _initial_state(model, seed, index, amplitude):
    rng = np.random.default_rng([seed, index])
    st = random_initial_state(model.system, model.controller, model.zeta, rng,
                              amplitude=amplitude)
    return model.from_state(st)


def _run_member(args):
    """Worker: rebuild the model from the config text and simulate one ensemble member."""
    text, source, seed, index, outdir = args
    cfg = ScenarioConfig.from_string(text, source)
    model = build_model(cfg)
    _, dt, T = grid_of(cfg)
    x0 = _initial_state(model, seed, index, cfg.get("ensemble", "amplitude", 1.0))
    spec = build_signal_spec(cfg, model.k, seed * 1000003 + index)
    tr = simulate(model, x0, make_signal(spec), T, dt, store_every=10**9)
    name = f"traj_{index}.csv"
    tr.to_csv(Path(outdir) / name)
    tr.to_bookkeeping_csv(Path(outdir) / f"traj_{index}_energy.csv")
    return index, name, tr


# ---------------------------------------------------------------- run

def _dump(path, obj):
    Path(path).write_text(json.dumps(obj, sort_keys=True, indent=2) + "\n")


def run(cfg: ScenarioConfig, out: Path, seed: int = 0, jobs: int | None = None) -> tuple:
    """Execute the requested analyses; returns ``(exit_code, summary_rows)``."""
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    status_ok = True
    system = build_system(cfg)
    controller = build_controller(cfg, system)
    analyses = cfg.analyses
    stab = StabilityReport()
    need_stab = False

    if "conditions" in analyses:
        rep = certify(system, controller, seed=seed,
                      sample_radius=cfg.get("conditions", "sample_radius", 10.0),
                      n_samples=cfg.get("conditions", "n_samples", 2000),
                      n_tests=cfg.get("conditions", "n_tests", 20),
                      passivity_nodes=cfg.get("conditions", "passivity_nodes", 400))
        (out / "conditions.json").write_text(rep.to_json() + "\n")
        for name, v in list(rep.verdicts.items()) + list(rep.derived.items()):
            detail = ""
            if v.status == "fail" and v.witness is not None:
                detail = json.dumps(v.to_dict()["witness"], sort_keys=True)[:60]
            rows.append(("conditions", name, v.status, detail))
        status_ok &= rep.passed

    model = None
    if any(a in analyses for a in ("simulate", "contraction", "gain_curve")):
        model = build_model(cfg)
        if cfg.get("output", "dump_matrices", False):
            write_matrix_dump(model, out / "matrices.txt")
    eps = cfg.get("analyses", "epsilon", 1e-3)

    if "simulate" in analyses:
        need_stab = True
        count = cfg.get("ensemble", "count", 1)
        eseed = cfg.get("ensemble", "seed", seed)
        text = cfg.to_ini()
        tasks = [(text, cfg.source, eseed, i, str(out)) for i in range(count)]
        workers = max(1, min(jobs or os.cpu_count() or 1, count))
        if workers == 1:
            results = [_run_member(t) for t in tasks]
        else:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(_run_member, tasks))
        results.sort(key=lambda r: r[0])
        trajs = [r[2] for r in results]
        for _, name, tr in results:
            if not tr.ok:
                raise HamportError(f"{name}: {tr.message}")
        vs = controller.varsigma
        assess_trajectories(trajs, vs if vs > 0 else float("nan"), eps,
                            [r[1] for r in results], stab)
        if not vs > 0:
            stab.verdicts["ugs"] = "fail"

    if "contraction" in analyses:
        need_stab = True
        count = cfg.get("contraction", "count", 5)
        x0s = [_initial_state(model, cfg.get("ensemble", "seed", seed), i,
                              cfg.get("ensemble", "amplitude", 1.0)) for i in range(count)]
        _, dt, T = grid_of(cfg)
        fit = fit_contraction(model, x0s, cfg.get("contraction", "horizon", T),
                              cfg.get("contraction", "dt", dt), cfg.get("contraction", "tau"))
        stab.contraction = fit
        stab.verdicts["contraction"] = "pass" if fit.passed else "fail"

    if "gain_curve" in analyses:
        need_stab = True
        _, dt, T = grid_of(cfg)
        family = build_signal_spec(cfg, model.k, seed)
        if family["kind"] == "zero":
            family = {"kind": "truncated_step", "amplitude": 1.0, "duration": 1.0, "k": model.k}
        gT = cfg.get("gain_curve", "T", T)
        gc = gain_curve(model, cfg.get("gain_curve", "amplitudes", [0.0, 0.5, 1.0]), family,
                        cfg.get("gain_curve", "tail_window", 0.1 * gT), seed=seed, T=gT,
                        dt=cfg.get("gain_curve", "dt", dt),
                        n_replicates=cfg.get("gain_curve", "replicates", 2),
                        norm_equiv=norm_equivalence(model, seed=seed))
        gc.to_csv(out / "gain_curve.csv")
        stab.gain = gc
        stab.verdicts["gain_curve"] = gc.status

    if need_stab:
        (out / "stability.json").write_text(stab.to_json() + "\n")
        for name, verdict in sorted(stab.verdicts.items()):
            detail = ""
            if name == "dissipation":
                detail = f"max residual {stab.dissipation_max_residual:.3e}"
            elif name == "ugs" and stab.ugs_margin is not None:
                detail = f"margin {stab.ugs_margin:.3e}"
            elif name == "contraction":
                detail = f"beta {stab.contraction.beta:.4f} tau {stab.contraction.tau:g}"
            elif name == "convergence":
                finite = [t for t in stab.convergence_times if t is not None]
                detail = f"{len(finite)}/{len(stab.convergence_times)} runs below eps"
            rows.append(("stability", name, verdict, detail))
        status_ok &= stab.passed
    return (0 if status_ok else 2), rows


def _print_table(rows, stream):
    if not rows:
        return
    w0 = max(len(r[0]) for r in rows)
    w1 = max(len(r[1]) for r in rows)
    w2 = max(len(r[2]) for r in rows)
    for r in rows:
        stream.write(f"{r[0]:<{w0}}  {r[1]:<{w1}}  {r[2].upper():<{w2}}  {r[3]}".rstrip() + "\n")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hamport", description=__doc__.split("\n\n")[0])
    p.add_argument("--config", required=True, help="scenario INI file")
    p.add_argument("--jobs", type=int, default=None,
                   help="worker processes for ensembles (default: available CPUs)")
    p.add_argument("--seed", type=int, default=0, help="base seed (default 0)")
    p.add_argument("--out", default=None, help="output directory (default [output] dir or .)")
    p.add_argument("--analyses", default=None,
                   help=f"comma list overriding [analyses] run; from {', '.join(ANALYSES)}")
    p.add_argument("--override", action="append", default=[], metavar="SECTION.KEY=VALUE",
                   help="override one config value (repeatable)")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = os.environ.get("HAMPORT_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        if args.seed < 0 or args.seed >= 2**64:
            raise ConfigError("--seed must be an unsigned 64-bit integer")
        if args.jobs is not None and args.jobs < 1:
            raise ConfigError("--jobs must be positive")
        cfg = ScenarioConfig.from_file(args.config)
        overrides = list(args.override)
        if args.analyses is not None:
            overrides.append(f"analyses.run={args.analyses}")
        cfg = cfg.with_overrides(overrides)
        out = Path(args.out or cfg.get("output", "dir", "."))
        code, rows = run(cfg, out, args.seed, args.jobs)
    except ConfigError as exc:
        sys.stderr.write(f"config error: {exc}\n")
        return 1
    except (HamportError, ValueError, OSError) as exc:
        sys.stderr.write(f"error: {type(exc).__name__}: {exc}\n")
        return 1
    _print_table(rows, sys.stdout)
    sys.stdout.write(f"exit status {code}\n")
    return code


if __name__ == "__main__":
    sys.exit(main())
