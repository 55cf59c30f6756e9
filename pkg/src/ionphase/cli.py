"""Command-line front end: ``ionphase {modes,sweep,trace,phase-diagram,detect}``.

Settings come from an optional JSON config file; command-line flags override
it. Exit codes: 0 success, 1 configuration error, 2 unstable chain,
3 inconsistent reconstruction.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from . import detection, phases
from .chain import (
    MASS_BE9,
    MASS_MG24,
    Direction,
    IonChainSpec,
    critical_ratio,
    normal_modes,
    stability_margin,
)
from .exceptions import InconsistentDataError, UnstableChainError

EXIT_OK, EXIT_CONFIG, EXIT_UNSTABLE, EXIT_INCONSISTENT = 0, 1, 2, 3

#: (n_minus, r) of the four negativity traces shown for the default chain.
TRACE_PRESETS = {
    "black": (0.0, 0.0),
    "red": (0.0, 0.3),
    "green": (0.0, 1.0),
    "blue": (1.0, 0.7),
}

COMMANDS = ("modes", "sweep", "trace", "phase-diagram", "detect")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    ions: str = "MG_BE_MG"
    direction: str = "transverse"
    ratio: float = 1.7
    n_minus: float = 0.0
    r: float = 0.0
    preset: str | None = None
    t_max: float = 20.0
    t_steps: int = 401
    grid: str | None = None
    n_max: float = 3.0
    r_max: float = 1.5
    ratio_min: float = 1.6
    ratio_max: float = 5.0
    kicks: list = field(default_factory=lambda: detection.DEFAULT_KICKS.tolist())
    shots: int | None = None
    seed: int | None = None
    out: str | None = None
    format: str = "csv"

    @classmethod
    def from_sources(cls, path=None, overrides=None) -> "RunConfig":
        data = {}
        if path:
            try:
                data = json.loads(Path(path).read_text())
            except (OSError, json.JSONDecodeError) as exc:
                raise ConfigError(f"cannot read config {path}: {exc}") from exc
            if not isinstance(data, dict):
                raise ConfigError("config must be a JSON object")
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        data.update({k: v for k, v in (overrides or {}).items() if v is not None})
        cfg = cls(**data)
        cfg.validate()
        return cfg

    def validate(self) -> None:
        for name in ("ratio", "n_minus", "r", "t_max", "n_max", "r_max", "ratio_min", "ratio_max"):
            value = getattr(self, name)
            if not isinstance(value, (int, float)) or not np.isfinite(value):
                raise ConfigError(f"{name} must be a finite number")
        if self.n_minus < 0 or self.r < 0:
            raise ConfigError("n_minus and r must be non-negative")
        if self.t_steps < 1:
            raise ConfigError("t_steps must be positive")
        if self.direction not in ("transverse", "axial"):
            raise ConfigError("direction must be 'transverse' or 'axial'")
        if self.format not in ("csv", "json"):
            raise ConfigError("format must be 'csv' or 'json'")
        if self.preset is not None and self.preset not in TRACE_PRESETS:
            raise ConfigError(f"preset must be one of {sorted(TRACE_PRESETS)}")
        if self.shots is not None:
            if self.shots < 1:
                raise ConfigError("shots must be positive")
            if self.seed is None:
                raise ConfigError("a seed is required whenever shots is set")
        kicks = np.asarray(self.kicks, float)
        if kicks.ndim != 1 or not np.all(np.isfinite(kicks)):
            raise ConfigError("kick grid must be a finite list")
        if not np.any(kicks == 0) or np.unique(np.abs(kicks[kicks != 0])).size < 5:
            raise ConfigError("kick grid needs zero and at least 5 distinct nonzero magnitudes")
        self.masses()

    def masses(self) -> tuple:
        if self.ions.upper() == "MG_BE_MG":
            return MASS_MG24, MASS_BE9
        if self.ions.startswith("custom:"):
            try:
                mo, mc = (float(v) for v in self.ions[len("custom:"):].split(","))
            except ValueError as exc:
                raise ConfigError(f"bad ions spec {self.ions!r}; use custom:MO,MC") from exc
            if not (mo > 0 and mc > 0):
                raise ConfigError("ion masses must be positive")
            return mo, mc
        raise ConfigError(f"unknown ions {self.ions!r}")

    def spec(self, ratio=None) -> IonChainSpec:
        mo, mc = self.masses()
        return IonChainSpec(mo, mc, self.ratio if ratio is None else ratio, Direction(self.direction))

    def grid_shape(self, default) -> tuple:
        if self.grid is None:
            return default
        try:
            parts = tuple(int(v) for v in str(self.grid).lower().split("x"))
        except ValueError as exc:
            raise ConfigError(f"bad grid {self.grid!r}") from exc
        if not parts or any(p < 1 for p in parts):
            raise ConfigError("grid sizes must be positive")
        return parts

    def scenario(self) -> tuple:
        if self.preset:
            return TRACE_PRESETS[self.preset]
        return self.n_minus, self.r


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (float, np.floating)):
        return "%.12g" % value
    return str(value)


def _csv(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def _json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=True) + "\n"


def _table(cfg: RunConfig, header, rows, meta=None) -> str:
    if cfg.format == "json":
        return _json({"columns": list(header), "rows": [list(r) for r in rows], **(meta or {})})
    return _csv(header, rows)


def _write(cfg: RunConfig, text: str, path=None) -> None:
    path = path or cfg.out
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def _modes_or_exit(spec: IonChainSpec):
    try:
        return normal_modes(spec)
    except UnstableChainError as exc:
        msg = str(exc)
        if exc.critical_ratio is not None:
            msg += f"; linear chain requires freq_ratio > critical ratio {exc.critical_ratio:.6f}"
        raise _Exit(EXIT_UNSTABLE, msg) from exc


class _Exit(Exception):
    def __init__(self, code, message):
        super().__init__(message)
        self.code = code


def cmd_modes(cfg: RunConfig) -> None:
    spec = cfg.spec()
    modes = _modes_or_exit(spec)
    report = {
        "direction": spec.direction.value,
        "freq_ratio": spec.freq_ratio,
        "mass_outer": spec.mass_outer,
        "mass_center": spec.mass_center,
        "omega_odd": modes.omega_odd,
        "c_e1": modes.coupling_coeffs[0],
        "c_e2": modes.coupling_coeffs[1],
        "stability_margin": stability_margin(spec),
    }
    if spec.direction is Direction.TRANSVERSE:
        report["critical_ratio"] = critical_ratio(spec.mass_outer, spec.mass_center)
    for k in range(3):
        report[f"mode{k}_parity"] = modes.parities[k].value
        report[f"mode{k}_frequency"] = float(modes.frequencies[k])
        for j in range(3):
            report[f"mode{k}_v{j + 1}"] = float(modes.eigenvectors[j, k])
    if cfg.format == "json":
        _write(cfg, _json(report))
    else:
        _write(cfg, _csv(("key", "value"), report.items()))


def cmd_sweep(cfg: RunConfig) -> None:
    (n,) = cfg.grid_shape((200,))[:1]
    ratios = np.linspace(cfg.ratio_min, cfg.ratio_max, n)
    rows = phases.params_sweep(cfg.spec(), ratios)
    header = ("ratio", "e_n0", "r_crit", "s_min", "stable")
    _write(cfg, _table(cfg, header, [(r.ratio, r.E_N0, r.r_crit, r.S_min, r.stable) for r in rows]))


def trace_times(cfg: RunConfig) -> np.ndarray:
    return np.linspace(0.0, cfg.t_max, cfg.t_steps)


def cmd_trace(cfg: RunConfig) -> None:
    modes = _modes_or_exit(cfg.spec())
    n_minus, r = cfg.scenario()
    t, en = phases.negativity_trace(modes, n_minus, r, trace_times(cfg))
    meta = {"n_minus": n_minus, "r": r, "omega_odd": modes.omega_odd}
    _write(cfg, _table(cfg, ("t_omega_z", "e_n"), zip(t.tolist(), en.tolist()), meta))


def diagram_grids(cfg: RunConfig) -> tuple:
    shape = cfg.grid_shape((201, 201))
    nn, nr = (shape[0], shape[0]) if len(shape) == 1 else shape[:2]
    return np.linspace(0.0, cfg.n_max, nn), np.linspace(0.0, cfg.r_max, nr)


def cmd_phase_diagram(cfg: RunConfig) -> None:
    modes = _modes_or_exit(cfg.spec())
    n_grid, r_grid = diagram_grids(cfg)
    diagram = phases.phase_diagram(modes, n_grid, r_grid)
    codes = diagram.codes
    rows = [
        (n, r, phases.PHASE_ORDER[codes[i, j]].value, diagram.sup_EN[i, j], diagram.inf_EN[i, j])
        for i, n in enumerate(n_grid.tolist())
        for j, r in enumerate(r_grid.tolist())
    ]
    p = phases.critical_params(modes)
    meta = {"r_crit": p.r_crit, "s_min": p.S_min}
    _write(cfg, _table(cfg, ("n_minus", "r", "phase", "sup_en", "inf_en"), rows, meta))


def cmd_detect(cfg: RunConfig) -> None:
    modes = _modes_or_exit(cfg.spec())
    n_minus, r = cfg.scenario()
    try:
        scans, report = detection.detect_state(
            modes, n_minus, r, np.asarray(cfg.kicks, float), cfg.shots, cfg.seed
        )
    except InconsistentDataError as exc:
        raise _Exit(EXIT_INCONSISTENT, f"reconstruction failed: {exc}") from exc
    header = ("mode_id", "axis", "delta_p", "fidelity", "shots")
    rows = [
        (s.mode_id, s.kick_axis.value, d, f, "" if s.shots is None else s.shots)
        for s in scans
        for d, f in zip(s.kick_values.tolist(), s.fidelities.tolist())
    ]
    if cfg.format == "json":
        _write(cfg, _json({"scans": {"columns": list(header), "rows": [list(r) for r in rows]}, "report": report}))
        return
    if cfg.out:
        out = Path(cfg.out)
        _write(cfg, _csv(header, rows))
        out.with_suffix(".report.json").write_text(_json(report))
    else:
        sys.stdout.write(_csv(header, rows))
        sys.stderr.write(_json(report))


HANDLERS = {
    "modes": cmd_modes,
    "sweep": cmd_sweep,
    "trace": cmd_trace,
    "phase-diagram": cmd_phase_diagram,
    "detect": cmd_detect,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ionphase",
        description="Entanglement phases of two ions coupled through a laser-cooled central ion.",
    )
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", help="JSON config file; flags override its values")
    parser.add_argument("--ratio", type=float, help="omega_x / omega_z")
    parser.add_argument("--ions", help="MG_BE_MG or custom:MASS_OUTER,MASS_CENTER (u)")
    parser.add_argument("--direction", choices=("transverse", "axial"))
    parser.add_argument("--n-minus", dest="n_minus", type=float, help="initial odd-mode occupation")
    parser.add_argument("--r", type=float, help="odd-mode squeezing")
    parser.add_argument("--preset", choices=sorted(TRACE_PRESETS), help="named (n_minus, r) pair")
    parser.add_argument("--t-max", dest="t_max", type=float)
    parser.add_argument("--t-steps", dest="t_steps", type=int)
    parser.add_argument("--grid", help="NxM for phase-diagram, N for sweep")
    parser.add_argument("--shots", type=int)
    parser.add_argument("--seed", type=int)
    parser.add_argument("--out")
    parser.add_argument("--format", choices=("csv", "json"))
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    overrides = {k: v for k, v in vars(args).items() if k not in ("command", "config")}
    try:
        cfg = RunConfig.from_sources(args.config, overrides)
    except (ConfigError, TypeError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        HANDLERS[args.command](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except _Exit as exc:
        print(str(exc), file=sys.stderr)
        return exc.code
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
