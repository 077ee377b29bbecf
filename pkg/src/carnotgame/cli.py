"""Command line: ``carnotgame solve | verify | sweep``.

Exit codes: 0 success, 1 runtime contract violation or failed verification,
2 invalid configuration or usage.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import hashlib
import json
import logging
import math
import sys
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .algebra import UnsupportedGroupError, group_from_name
from .data import LIBRARY, initial_datum
from .game import ContractViolation, GameConfig, StepDiagnostics, solve
from .grid import Box, ConfigurationError, ValueLayer
from .oracles import (
    ExtinctionError,
    MeasurementError,
    RadialProfile,
    euclidean_sphere_radius,
    heisenberg_cylinder_radius,
    measure_zero_level_radius,
)
from .operators import get_operator
from .verify import SUITES, run_suite

log = logging.getLogger("carnotgame")

SECTIONS = ("group", "operator", "game", "grid", "initial_data", "output")
EXACT_RADII = ("none", "sphere", "cylinder")


class ConfigError(ValueError):
    """Invalid or incomplete run configuration (exit code 2)."""


@dataclass(frozen=True)
class OutputSpec:
    directory: str = "out"
    stride: int = 1
    track_radius: bool = False
    n_rays: int = 32
    center: tuple = ()
    exact: str = "none"
    r0: float = 1.0


@dataclass(frozen=True)
class RunConfig:
    group: str
    operator: str
    game: GameConfig
    box: Box = field(repr=False)
    grid: dict = field(default_factory=dict)
    datum: str = "constant"
    datum_params: dict = field(default_factory=dict)
    output: OutputSpec = OutputSpec()

    def canonical(self) -> dict:
        """Plain-data echo of every field, used for the manifest and its hash."""
        return {
            "group": {"name": self.group},
            "operator": {"name": self.operator},
            "game": {f.name: _plain(getattr(self.game, f.name)) for f in fields(self.game)},
            "grid": {k: _plain(v) for k, v in self.grid.items()},
            "initial_data": {"name": self.datum, **{k: _plain(v) for k, v in self.datum_params.items()}},
            "output": {k: _plain(v) for k, v in asdict(self.output).items()},
        }

    def content_hash(self) -> str:
        """Git-style blob sha1 of the canonical config."""
        body = json.dumps(self.canonical(), sort_keys=True, separators=(",", ":")).encode()
        return hashlib.sha1(b"blob %d\0" % len(body) + body).hexdigest()


def _plain(v):
    if isinstance(v, (tuple, list, np.ndarray)):
        return [_plain(x) for x in v]
    if isinstance(v, np.generic):
        return v.item()
    return v


# -- parsing ----------------------------------------------------------------------


def _floats(text: str) -> tuple:
    try:
        return tuple(float(x) for x in text.replace(",", " ").split())
    except ValueError:
        raise ConfigError(f"expected a list of numbers, got {text!r}") from None


def _get(section, key, conv, default=None, required=False):
    if key not in section:
        if required:
            raise ConfigError(f"[{section.name}] is missing '{key}'")
        return default
    raw = section[key].strip()
    try:
        if conv is bool:
            return section.getboolean(key)
        return conv(raw)
    except ValueError:
        raise ConfigError(f"[{section.name}] {key} = {raw!r} is not a valid {getattr(conv, '__name__', 'value')}") from None


_GAME_KEYS = {
    "epsilon": float,
    "T": float,
    "mu": float,
    "strategy": str,
    "n_dir": int,
    "n_mag": int,
    "eta_min": float,
    "x_grid": _floats,
    "guided_shifts": _floats,
    "guided_neighbors": int,
    "guided_fit": bool,
    "moves": str,
    "delta": float,
    "seed": int,
    "chunk_elements": int,
}


def parse_config(parser: configparser.ConfigParser) -> RunConfig:
    for name in ("group", "operator", "game", "grid"):
        if not parser.has_section(name):
            raise ConfigError(f"missing section [{name}]")
    unknown = [s for s in parser.sections() if s not in SECTIONS]
    if unknown:
        raise ConfigError(f"unknown sections {unknown}; allowed: {list(SECTIONS)}")

    group_name = _get(parser["group"], "name", str, required=True)
    try:
        g = group_from_name(group_name)
    except UnsupportedGroupError as exc:
        raise ConfigError(str(exc)) from None

    op_name = _get(parser["operator"], "name", str, required=True)
    try:
        get_operator(op_name, g.m1)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None

    sec = parser["game"]
    extra = [k for k in sec if k not in {k.lower() for k in _GAME_KEYS}]
    if extra:
        raise ConfigError(f"[game] has unknown keys {extra}")
    kwargs = {}
    for key, conv in _GAME_KEYS.items():
        if key.lower() in sec:
            kwargs[key] = _get(sec, key.lower(), conv)
    for key in ("epsilon", "T"):
        if key not in kwargs:
            raise ConfigError(f"[game] is missing '{key}'")
    try:
        game = GameConfig(**kwargs)
    except ContractViolation as exc:
        raise ConfigError(f"[game] {exc}") from None

    sec = parser["grid"]
    h = _get(sec, "h", _floats, required=True)
    grid = {"h": h}
    if "half_width" in sec:
        hw = _get(sec, "half_width", float)
        lo, hi = (-hw,) * g.dim, (hw,) * g.dim
        grid["half_width"] = hw
    else:
        lo = _get(sec, "lo", _floats, required=True)
        hi = _get(sec, "hi", _floats, required=True)
        grid.update(lo=lo, hi=hi)
    extend = tuple(sec.get("extend", "").replace(",", " ").split())
    if extend:
        grid["extend"] = extend
    try:
        lo_a = np.broadcast_to(np.asarray(lo, float), (g.dim,))
        hi_a = np.broadcast_to(np.asarray(hi, float), (g.dim,))
        h_a = np.broadcast_to(np.asarray(h, float), (g.dim,))
        box = Box(lo_a, hi_a, h_a, extend)
    except (ConfigurationError, ValueError) as exc:
        raise ConfigError(f"[grid] {exc}") from None

    datum, params = "constant", {}
    if parser.has_section("initial_data"):
        sec = parser["initial_data"]
        datum = _get(sec, "name", str, required=True)
        if datum not in LIBRARY:
            raise ConfigError(f"unknown initial datum {datum!r}; known: {sorted(LIBRARY)}")
        for key in sec:
            if key == "name":
                continue
            vals = _floats(sec[key])
            if key == "coords":
                params[key] = int(vals[0])
            elif key == "center":
                params[key] = vals
            else:
                params[key] = vals[0] if len(vals) == 1 else vals
        try:
            initial_datum(datum, **params)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"[initial_data] {exc}") from None

    out = OutputSpec()
    if parser.has_section("output"):
        sec = parser["output"]
        out = OutputSpec(
            directory=_get(sec, "directory", str, out.directory),
            stride=_get(sec, "stride", int, out.stride),
            track_radius=_get(sec, "track_radius", bool, out.track_radius),
            n_rays=_get(sec, "n_rays", int, out.n_rays),
            center=_get(sec, "center", _floats, ()),
            exact=_get(sec, "exact", str, out.exact),
            r0=_get(sec, "r0", float, out.r0),
        )
        if out.stride < 1:
            raise ConfigError("[output] stride must be >= 1")
        if out.n_rays < 1:
            raise ConfigError("[output] n_rays must be >= 1")
        if out.exact not in EXACT_RADII:
            raise ConfigError(f"[output] exact must be one of {EXACT_RADII}")
    return RunConfig(group_name, op_name, game, box, grid, datum, params, out)


def load_config(path) -> RunConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file {path} not found")
    parser = configparser.ConfigParser()
    parser.optionxform = str  # keep 'T' as written
    try:
        parser.read(path)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from None
    # section keys are case sensitive only for 'T'; normalize the rest
    for sec in parser.sections():
        for key in list(parser[sec]):
            if key != key.lower() and key != "T":
                parser[sec][key.lower()] = parser[sec].pop(key)
    if parser.has_section("game") and "T" in parser["game"]:
        parser["game"]["t"] = parser["game"].pop("T")
    return parse_config(parser)


def with_override(cfg: RunConfig, param: str, value: float) -> RunConfig:
    """Copy of ``cfg`` with epsilon or the grid spacing replaced."""
    if param == "epsilon":
        game = GameConfig(**{**{f.name: getattr(cfg.game, f.name) for f in fields(cfg.game)}, "epsilon": value})
        return RunConfig(cfg.group, cfg.operator, game, cfg.box, cfg.grid, cfg.datum, cfg.datum_params, cfg.output)
    if param == "h":
        box = Box(cfg.box.lo, cfg.box.hi, np.full(cfg.box.dim, value), cfg.box.extend)
        grid = {**cfg.grid, "h": (value,)}
        return RunConfig(cfg.group, cfg.operator, cfg.game, box, grid, cfg.datum, cfg.datum_params, cfg.output)
    raise ConfigError(f"cannot sweep {param!r}; use epsilon or h")


# -- artifacts --------------------------------------------------------------------


def write_layer_csv(layer: ValueLayer, path) -> None:
    """Header ``t,x1,..,xN,u``; every number printed with 17 significant digits."""
    nodes = layer.box.nodes()
    vals = layer.values.ravel()
    t = f"{layer.t:.17g}"
    with open(path, "w", newline="") as fh:
        fh.write(",".join(["t"] + [f"x{i + 1}" for i in range(layer.box.dim)] + ["u"]) + "\n")
        for p, u in zip(nodes, vals):
            fh.write(t + "," + ",".join(f"{x:.17g}" for x in p) + f",{u:.17g}\n")


def _exact_radius(spec: OutputSpec, m1: int):
    if spec.exact == "sphere":
        return lambda t: euclidean_sphere_radius(t, spec.r0, m1)
    if spec.exact == "cylinder":
        return lambda t: heisenberg_cylinder_radius(t, spec.r0)
    return None


@dataclass
class RunResult:
    layers: list
    manifest: dict
    profile: RadialProfile | None


def run(cfg: RunConfig, out_dir=None, write=True) -> RunResult:
    """Solve, write layer CSVs / radial profile / manifest, and return everything."""
    g = group_from_name(cfg.group)
    op = get_operator(cfg.operator, g.m1)
    psi, ff = initial_datum(cfg.datum, **cfg.datum_params)
    out_dir = Path(out_dir or cfg.output.directory)
    if write:
        out_dir.mkdir(parents=True, exist_ok=True)
    diag = StepDiagnostics()
    t0 = time.perf_counter()
    try:
        layers = solve(cfg.game, op, psi, cfg.box, g, ff, diagnostics=diag)
    except ConfigurationError as exc:
        raise ConfigError(str(exc)) from None
    wall = time.perf_counter() - t0

    files = []
    if write:
        for k, layer in enumerate(layers):
            if k % cfg.output.stride and k != len(layers) - 1:
                continue
            path = out_dir / f"layer_{k:05d}.csv"
            write_layer_csv(layer, path)
            files.append(path.name)

    profile, excluded, warnings = None, 0, []
    if cfg.output.track_radius:
        center = np.zeros(g.dim)
        if cfg.output.center:
            center[: len(cfg.output.center)] = cfg.output.center
        times, radii = [], []
        for layer in layers:
            try:
                r, ex = measure_zero_level_radius(layer, center, cfg.output.n_rays, return_excluded=True)
            except MeasurementError:
                excluded += cfg.output.n_rays
                continue
            excluded += ex
            times.append(layer.t)
            radii.append(r)
        if times:
            profile = RadialProfile(tuple(times), tuple(radii))
            shell = float(np.min(np.minimum(cfg.box.hi[:2] - center[:2], center[:2] - cfg.box.lo[:2])))
            if max(radii) > shell - 10 * float(np.max(cfg.box.h[:2])):
                warnings.append("tracked level set comes within 10 cells of the far-field shell")
            if write:
                profile.write_csv(out_dir / "radius.csv", _exact_radius(cfg.output, g.m1))
                files.append("radius.csv")
    for w in warnings:
        log.warning(w)

    manifest = {
        "config": cfg.canonical(),
        "config_hash": cfg.content_hash(),
        "files": files,
        "wall_time_s": wall,
        "diagnostics": {**diag.as_dict(), "excluded_rays": excluded},
        "warnings": warnings,
    }
    if write:
        (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True, default=_plain) + "\n")
    return RunResult(layers, manifest, profile)


def sweep(cfg: RunConfig, param: str, values, out_path=None) -> list[dict]:
    """One row per value: radius error against the exact law, or the successive sup difference."""
    rows = []
    prev = None
    exact = _exact_radius(cfg.output, group_from_name(cfg.group).m1)
    for v in values:
        sub = with_override(cfg, param, float(v))
        res = run(sub, write=False)
        last = res.layers[-1]
        row = {param: float(v), "t": last.t}
        if exact is not None:
            try:
                r = measure_zero_level_radius(last)
                re = exact(last.t)
                row.update(r_measured=r, r_exact=re, rel_err=abs(r - re) / re)
            except (MeasurementError, ExtinctionError) as exc:
                row.update(r_measured=math.nan, r_exact=math.nan, rel_err=math.nan, note=str(exc))
        elif prev is not None and prev.values.shape == last.values.shape:
            row["sup_diff_prev"] = float(np.max(np.abs(last.values - prev.values)))
        prev = last
        rows.append(row)
    if out_path is not None:
        keys = sorted({k for r in rows for k in r}, key=lambda k: (k != param, k))
        with open(out_path, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=keys)
            w.writeheader()
            for r in rows:
                w.writerow({k: (f"{r[k]:.17g}" if isinstance(r.get(k), float) else r.get(k, "")) for k in keys})
    return rows


# -- entry point ------------------------------------------------------------------


def _build_parser():
    ap = argparse.ArgumentParser(prog="carnotgame", description="Deterministic game solver for singular parabolic flows on Carnot groups.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    s = sub.add_parser("solve", help="run a configured solve and write artifacts")
    s.add_argument("config")
    s.add_argument("--out", help="output directory (overrides [output] directory)")
    v = sub.add_parser("verify", help="run a property suite and print a JSON report")
    v.add_argument("suite")
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--draws", type=int, default=None, help="draws per branch (adversary) or samples (algebra, operators)")
    w = sub.add_parser("sweep", help="convergence table over epsilon or h")
    w.add_argument("config")
    w.add_argument("--param", required=True, choices=("epsilon", "h"))
    w.add_argument("--values", required=True, help="comma separated values")
    w.add_argument("--out", help="CSV path (default: <output dir>/sweep_<param>.csv)")
    return ap


def main(argv=None) -> int:
    ap = _build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, format="%(levelname)s %(message)s")
    try:
        if args.command == "solve":
            cfg = load_config(args.config)
            res = run(cfg, out_dir=args.out)
            print(json.dumps({"config_hash": res.manifest["config_hash"], "files": len(res.manifest["files"])}))
            return 0
        if args.command == "verify":
            if args.suite not in SUITES:
                print(f"unknown suite {args.suite!r}; choose from {list(SUITES)}", file=sys.stderr)
                return 2
            kw = {"seed": args.seed}
            if args.draws is not None:
                key = {"adversary": "n_draws", "algebra": "n_samples", "operators": "n_samples"}.get(args.suite)
                if key:
                    kw[key] = args.draws
            report = run_suite(args.suite, **kw)
            print(json.dumps(report, indent=2, default=_plain))
            return 0 if report["passed"] else 1
        if args.command == "sweep":
            cfg = load_config(args.config)
            values = _floats(args.values)
            if not values:
                raise ConfigError("--values is empty")
            out = args.out or str(Path(cfg.output.directory) / f"sweep_{args.param}.csv")
            Path(out).parent.mkdir(parents=True, exist_ok=True)
            rows = sweep(cfg, args.param, values, out)
            print(json.dumps(rows, default=_plain))
            return 0
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except (ContractViolation, ExtinctionError, MeasurementError) as exc:
        print(f"contract violation: {exc}", file=sys.stderr)
        return 1
    return 2


if __name__ == "__main__":
    sys.exit(main())
