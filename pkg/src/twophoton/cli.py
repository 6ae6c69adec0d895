"""Config-driven batch runner.

Usage::

    twophoton run CONFIG [--threads N] [--out DIR]
    twophoton validate CONFIG

Exit codes: 0 success, 2 unreadable or invalid config, 3 numerical
convergence failure, 4 refused physical regime.
"""
from __future__ import annotations

import argparse
import io
import json
import os
import sys
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict

import jsonschema
import numpy as np
import scipy
import yaml

from . import __version__, circuit, floquet, hilbert, model, pipeline
from .errors import (
    ConvergenceError,
    DefectiveSpectrumError,
    DegenerateSquidError,
    InvalidArgumentError,
    RefusedRegimeError,
    StiffnessError,
    UndefinedCorrelatorError,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_CONVERGENCE = 3
EXIT_REFUSED = 4

MODES = ("circuit-sweep", "spectrum-sweep", "fluorescence", "correlators")

COLUMNS_HELP = """\
CSV columns per mode:
  circuit-sweep   f_s, omega_c_over_omega_c0, omega_q_over_omega_c, g2_over_omega_c,
                  g4_over_g2, Omega_over_omega_c, omega_L_over_omega_c, quartic_flag
  spectrum-sweep  g2_over_omega_c, mean_even_gap, E+0..E+{n-1}, E-0..E-{n-1}
  fluorescence    omega_over_omega_c, S
  correlators     g2_over_omega_c, g2_zero, g3_zero

Every file starts with '#'-prefixed lines holding the resolved configuration,
library versions and convergence indicators.
"""

_number = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_posint = {"type": "integer", "minimum": 1}
_level = {
    "type": "array",
    "prefixItems": [{"enum": ["+", "-"]}, {"type": "integer", "minimum": 0}],
    "minItems": 2,
    "maxItems": 2,
}
_grid = {
    "oneOf": [
        {"type": "array", "items": _number, "minItems": 1},
        {
            "type": "object",
            "properties": {"start": _number, "stop": _number, "step": _pos},
            "required": ["start", "stop", "step"],
            "additionalProperties": False,
        },
    ]
}

SCHEMA = {
    "type": "object",
    "required": ["mode"],
    "additionalProperties": False,
    "properties": {
        "mode": {"enum": list(MODES)},
        "model": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "omega_q": _pos,
                "g2": {"type": "number", "minimum": 0},
                "g4": _number,
                "Omega_quartic": _number,
            },
        },
        "circuit": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "E_C": _pos,
                "E_L": _pos,
                "Etilde_J": _pos,
                "Etilde_C": _pos,
                "alpha": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                "f_q": _number,
                "tune_resonance": {"type": "boolean"},
                "cutoff": _posint,
            },
        },
        "numerics": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "n_max": _posint,
                "M": _posint,
                "k_max": _posint,
                "omega_grid": {
                    "type": "object",
                    "properties": {"start": _number, "stop": _number, "points": {"type": "integer", "minimum": 2}},
                    "required": ["start", "stop", "points"],
                    "additionalProperties": False,
                },
                "peak_threshold": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
                "levels": _posint,
            },
        },
        "dissipation": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"gamma": {"type": "number", "minimum": 0}, "kappa_over_omega_q": {"type": "number", "minimum": 0}},
        },
        "drive": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "channel": {"enum": ["qubit", "cavity"]},
                "F_over_gamma": {"type": "number", "minimum": 0},
                "from": _level,
                "to": _level,
            },
        },
        "sweep": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"g2": _grid, "f_s": _grid},
        },
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"path": {"type": "string", "minLength": 1}, "format": {"enum": ["csv", "json"]}},
        },
    },
}


class ConfigError(Exception):
    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        loc = f"line {line}, column {column}: " if line is not None else ""
        super().__init__(loc + message)
        self.line, self.column = line, column


def _node_at(node, path):
    """YAML node reached by following a jsonschema error path, or the deepest one found."""
    for key in path:
        nxt = None
        if isinstance(node, yaml.MappingNode):
            for k, v in node.value:
                if k.value == key:
                    nxt = v
                    break
        elif isinstance(node, yaml.SequenceNode) and isinstance(key, int) and key < len(node.value):
            nxt = node.value[key]
        if nxt is None:
            break
        node = nxt
    return node


def load_config(text: str) -> dict:
    try:
        root = yaml.compose(text)
        data = yaml.safe_load(text)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark or exc.context_mark
        raise ConfigError(exc.problem or str(exc), mark.line + 1, mark.column + 1) from None
    except yaml.YAMLError as exc:
        raise ConfigError(str(exc)) from None
    if not isinstance(data, dict):
        raise ConfigError("configuration must be a mapping", 1, 1)
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(data), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        node = _node_at(root, err.absolute_path)
        where = "/".join(map(str, err.absolute_path)) or "<root>"
        raise ConfigError(f"{where}: {err.message}", node.start_mark.line + 1, node.start_mark.column + 1)
    return data


_SECTIONS = {
    "circuit-sweep": ("circuit", "sweep", "output"),
    "spectrum-sweep": ("model", "numerics", "sweep", "output"),
    "fluorescence": ("model", "numerics", "dissipation", "drive", "output"),
    "correlators": ("model", "numerics", "dissipation", "drive", "sweep", "output"),
}


def _grid_values(grid) -> list[float]:
    if isinstance(grid, list):
        return [float(x) for x in grid]
    n = int(np.floor((grid["stop"] - grid["start"]) / grid["step"] + 1e-9)) + 1
    return [round(grid["start"] + i * grid["step"], 12) for i in range(n)]


def resolve(cfg: dict) -> dict:
    """Config with every default filled in."""
    mode = cfg["mode"]
    out = {"mode": mode}
    m = cfg.get("model", {})
    out["model"] = {
        "omega_q": m.get("omega_q", 2.0),
        "g2": m.get("g2", 0.1),
        "g4": m.get("g4", 0.0),
        "Omega_quartic": m.get("Omega_quartic", 0.0),
    }
    n = cfg.get("numerics", {})
    og = n.get("omega_grid", {})
    out["numerics"] = {
        "n_max": n.get("n_max", model.DEFAULT_N_MAX),
        "M": n.get("M", model.DEFAULT_LEVELS_PER_PARITY),
        "k_max": n.get("k_max", pipeline.DEFAULT_K_MAX),
        "omega_grid": {
            "start": og.get("start", pipeline.DEFAULT_OMEGA_GRID[0]),
            "stop": og.get("stop", pipeline.DEFAULT_OMEGA_GRID[1]),
            "points": og.get("points", pipeline.DEFAULT_OMEGA_GRID[2]),
        },
        "peak_threshold": n.get("peak_threshold", 0.05),
        "levels": n.get("levels", 6),
    }
    d = cfg.get("dissipation", {})
    out["dissipation"] = {
        "gamma": d.get("gamma", pipeline.DEFAULT_GAMMA),
        "kappa_over_omega_q": d.get("kappa_over_omega_q", pipeline.DEFAULT_KAPPA_REL),
    }
    dr = cfg.get("drive", {})
    out["drive"] = {
        "channel": dr.get("channel", "qubit"),
        "F_over_gamma": dr.get("F_over_gamma", pipeline.DEFAULT_DRIVE_REL),
        "from": list(dr.get("from", ["+", 0])),
        "to": list(dr.get("to", ["+", 2])),
    }
    if mode == "circuit-sweep":
        c = cfg.get("circuit", {})
        base = circuit.CircuitParams()
        out["circuit"] = {
            "E_C": c.get("E_C", base.E_C),
            "E_L": c.get("E_L", base.E_L),
            "Etilde_J": c.get("Etilde_J", base.Etilde_J),
            "Etilde_C": c.get("Etilde_C", base.Etilde_C),
            "alpha": c.get("alpha", base.alpha),
            "f_q": c.get("f_q", 0.5),
            "tune_resonance": c.get("tune_resonance", False),
            "cutoff": c.get("cutoff", circuit.DEFAULT_CUTOFF),
        }
    sw = cfg.get("sweep", {})
    if mode == "circuit-sweep":
        out["sweep"] = {"f_s": _grid_values(sw.get("f_s", {"start": 0.0, "stop": 0.86, "step": 0.02}))}
    elif mode in ("spectrum-sweep", "correlators"):
        out["sweep"] = {"g2": _grid_values(sw.get("g2", {"start": 0.05, "stop": 0.23, "step": 0.005}))}
    o = cfg.get("output", {})
    fmt = o.get("format", "csv")
    out["output"] = {"path": o.get("path", f"{mode}.{fmt}"), "format": fmt}
    return {k: v for k, v in out.items() if k in ("mode",) + _SECTIONS[mode]}


def _setup(res: dict, g2: float) -> pipeline.DrivenSetup:
    m, n, d, dr = res["model"], res["numerics"], res["dissipation"], res["drive"]
    return pipeline.DrivenSetup(
        g2=g2,
        omega_q=m["omega_q"],
        g4=m["g4"],
        Omega_quartic=m["Omega_quartic"],
        gamma=d["gamma"],
        kappa_rel=d["kappa_over_omega_q"],
        drive_rel=dr["F_over_gamma"],
        channel=dr["channel"],
        drive_from=tuple(dr["from"]),
        drive_to=tuple(dr["to"]),
        n_max=n["n_max"],
        n_per_parity=n["M"],
        k_max=n["k_max"],
    )


def _circuit_params(res: dict, f_s: float = 0.0) -> circuit.CircuitParams:
    c = res["circuit"]
    return circuit.CircuitParams(
        E_J=1.0,
        E_C=c["E_C"],
        E_L=c["E_L"],
        Etilde_J=c["Etilde_J"],
        Etilde_C=c["Etilde_C"],
        alpha=c["alpha"],
        f_s=circuit.flux_to_radians(f_s),
        f_q=2 * np.pi * c["f_q"],
    )


def regime_check(res: dict) -> list[str]:
    """Raise for refused regimes; return warnings for questionable ones."""
    warnings = []
    mode = res["mode"]
    if mode == "circuit-sweep":
        c = res["circuit"]
        for f in res["sweep"]["f_s"]:
            K, S = circuit.squid_constants(1.0, circuit.flux_to_radians(f))
            circuit.resonator(c["E_C"], K, S, c["E_L"])
        return warnings
    g2s = res["sweep"]["g2"] if mode in ("spectrum-sweep", "correlators") else [res["model"]["g2"]]
    for g in g2s:
        model.check_regime(model.EffectiveModelParams(1.0, res["model"]["omega_q"], g))
    if mode in ("fluorescence", "correlators") and res["drive"]["F_over_gamma"] > pipeline.STRONG_DRIVE_RATIO:
        warnings.append("warning: strong-drive regime outside jump-operator validity (F/gamma > 10)")
    return warnings


def _versions() -> dict:
    return {"twophoton": __version__, "numpy": np.__version__, "scipy": scipy.__version__}


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    return repr(float(x))


def _run_circuit(res, pool):
    c = res["circuit"]
    params = _circuit_params(res)
    # resonance is tuned at the last (strongest) bias of the sweep
    if c["tune_resonance"]:
        d = asdict(params)
        d["f_s"] = circuit.flux_to_radians(res["sweep"]["f_s"][-1])
        tuned = circuit.tune_qubit_resonance(circuit.CircuitParams(**d), cutoff=c["cutoff"])
        params = circuit.CircuitParams(**{**asdict(params), "Etilde_J": tuned.Etilde_J, "Etilde_C": tuned.Etilde_C})
    rows = list(pool(lambda f: circuit.flux_sweep(params, [f], cutoff=c["cutoff"])[0], res["sweep"]["f_s"]))
    extra = {"Etilde_J_used": params.Etilde_J, "Etilde_C_used": params.Etilde_C}
    flagged = [r["f_s"] for r in rows if r["quartic_flag"]]
    if flagged:
        extra["quartic_flagged_f_s"] = flagged
    return list(circuit.SWEEP_COLUMNS), [[r[k] for k in circuit.SWEEP_COLUMNS] for r in rows], extra


def _run_spectrum(res, pool):
    m, n = res["model"], res["numerics"]
    k = n["levels"]

    def point(g):
        levels = model.solve(model.EffectiveModelParams(1.0, m["omega_q"], g, m["g4"], m["Omega_quartic"]), n["n_max"])
        ep, em = levels.energies("+"), levels.energies("-")
        gap = float(np.mean(np.diff(ep[:6])))
        return [g, gap, *ep[:k], *em[:k]]

    cols = ["g2_over_omega_c", "mean_even_gap"] + [f"E+{i}" for i in range(k)] + [f"E-{i}" for i in range(k)]
    rows = list(pool(point, res["sweep"]["g2"]))
    extra = {}
    g = np.array([r[0] for r in rows])
    diff = np.array([r[2 + 2] - r[2 + k + 1] for r in rows]) if k >= 3 else None
    if diff is not None and np.any(np.sign(diff[:-1]) != np.sign(diff[1:])):
        i = int(np.flatnonzero(np.sign(diff[:-1]) != np.sign(diff[1:]))[0])
        params = model.EffectiveModelParams(1.0, m["omega_q"], 0.0, m["g4"], m["Omega_quartic"])
        extra["g_cross"] = model.find_level_crossing(params, (g[i], g[i + 1]), hilbert.make_space(n["n_max"]))
    return cols, rows, extra


def _run_fluorescence(res, pool):
    n = res["numerics"]
    system = pipeline.assemble(_setup(res, res["model"]["g2"]))
    og = n["omega_grid"]
    result = pipeline.fluorescence(system, np.linspace(og["start"], og["stop"], og["points"]))
    peaks = floquet.find_spectral_peaks(result, n["peak_threshold"])
    extra = {
        "omega_d": system.drive.omega_d,
        "pairing_residual": result.metadata["pairing_residual"],
        "rate_labels": result.metadata["rate_labels"],
        "peaks": [round(float(p), 10) for p in peaks],
    }
    return ["omega_over_omega_c", "S"], np.column_stack([result.omega, result.S]).tolist(), extra


def _run_correlators(res, pool):
    def point(g):
        g2z, g3z = pipeline.correlators(pipeline.assemble(_setup(res, g)))
        return [g, g2z, g3z]

    return ["g2_over_omega_c", "g2_zero", "g3_zero"], list(pool(point, res["sweep"]["g2"])), {}


RUNNERS = {
    "circuit-sweep": _run_circuit,
    "spectrum-sweep": _run_spectrum,
    "fluorescence": _run_fluorescence,
    "correlators": _run_correlators,
}


def render(res: dict, columns, rows, extra: dict) -> str:
    header = {"config": res, "versions": _versions(), "diagnostics": extra}
    if res["output"]["format"] == "json":
        doc = {**header, "columns": list(columns), "rows": [[float(v) for v in r] for r in rows]}
        return json.dumps(doc, sort_keys=True, indent=1) + "\n"
    buf = io.StringIO()
    for key in ("config", "versions", "diagnostics"):
        buf.write(f"# {key}: {json.dumps(header[key], sort_keys=True)}\n")
    buf.write(",".join(columns) + "\n")
    for r in rows:
        buf.write(",".join(_fmt(v) for v in r) + "\n")
    return buf.getvalue()


def _write_atomic(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".partial-")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise


def _mapper(threads: int):
    if threads <= 1:
        return lambda f, xs: [f(x) for x in xs]

    def pmap(f, xs):
        with ThreadPoolExecutor(max_workers=threads) as ex:
            return list(ex.map(f, xs))

    return pmap


def _load(path: str) -> dict:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    return resolve(load_config(text))


def cmd_validate(args) -> int:
    res = _load(args.config)
    warnings = regime_check(res)
    report = {"resolved": res}
    if res["mode"] in ("fluorescence", "correlators"):
        s = _setup(res, res["model"]["g2"])
        report["base_dim"] = s.base_dim
        report["k_max"] = s.k_max
        report["floquet_dim"] = s.base_dim * (2 * s.k_max + 1)
    print(json.dumps(report, sort_keys=True, indent=1))
    for w in warnings:
        print(w)
    return EXIT_OK


def cmd_run(args) -> int:
    res = _load(args.config)
    for w in regime_check(res):
        print(w, file=sys.stderr)
    columns, rows, extra = RUNNERS[res["mode"]](res, _mapper(args.threads))
    path = os.path.join(args.out, res["output"]["path"])
    _write_atomic(path, render(res, columns, rows, extra))
    print(path)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="twophoton",
        description="Driven-dissipative two-photon Rabi simulations from a YAML config.",
        epilog=COLUMNS_HELP,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="compute and write the configured output", epilog=COLUMNS_HELP,
                       formatter_class=argparse.RawDescriptionHelpFormatter)
    r.add_argument("config")
    r.add_argument("--threads", type=int, default=1, help="worker threads for sweep points")
    r.add_argument("--out", default=".", help="output directory")
    r.set_defaults(func=cmd_run)
    v = sub.add_parser("validate", help="resolve the config and report sizes without computing")
    v.add_argument("config")
    v.set_defaults(func=cmd_validate)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "threads", 1) < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return args.func(args)
    except (ConfigError, InvalidArgumentError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ConvergenceError, DefectiveSpectrumError, StiffnessError, UndefinedCorrelatorError) as exc:
        print(f"convergence failure: {exc}", file=sys.stderr)
        cluster = getattr(exc, "cluster", None)
        if cluster is not None:
            print(f"eigenvalue cluster: {np.asarray(cluster).tolist()}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except (RefusedRegimeError, DegenerateSquidError) as exc:
        print(f"refused: {exc}", file=sys.stderr)
        return EXIT_REFUSED


if __name__ == "__main__":
    sys.exit(main())
