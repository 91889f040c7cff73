"""Command line entry point: sorting sweeps, transport runs, plots.

Exit status: 0 on success, 1 for invalid input (flags, config, data files),
2 when a run fails.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path
from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from sortmc.bench import SweepConfig, read_csv, run_ratio_sweep, run_size_sweep, write_csv
from sortmc.svgplot import render_loglog_svg
from sortmc.transport.eigenvalue import (CycleConfig, run_eigenvalue, write_flux_csv,
                                         write_keff_csv, write_trace_csv)
from sortmc.transport.geometry import Boundary, Geometry
from sortmc.transport.materials import build_materials, data_path, load_library
from sortmc.transport.particles import KeyScheme, SortMode, SortStrategy

log = logging.getLogger("sortmc")

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_RUNTIME = 2

Mode = Literal["sortbench-size", "sortbench-ratio", "mc-run", "report"]
PAYLOAD_FOR_MODE = {"sortbench-size": "sweep", "sortbench-ratio": "sweep",
                    "mc-run": "mc", "report": "report"}


class ConfigError(ValueError):
    pass


class McPayload(BaseModel):
    model_config = ConfigDict(extra="forbid")

    geometry: Literal["pebble", "pebble-vacuum", "infinite"] = "pebble"
    fuel_radius: float = Field(2.5, gt=0)
    pebble_radius: float = Field(3.0, gt=0)
    fuel_material: str = "Fuel kernel"
    matrix_material: str = "Pebble Carbon matrix"
    materials: Optional[str] = None  # bundled HTR-10 file when unset
    library: Optional[str] = None    # bundled 23-group library when unset
    cycle: CycleConfig = Field(default_factory=CycleConfig)
    strategy: SortStrategy = Field(default_factory=SortStrategy)
    workers: int = Field(1, ge=1)

    @model_validator(mode="after")
    def _radii(self):
        if self.geometry != "infinite" and self.pebble_radius <= self.fuel_radius:
            raise ValueError("pebble_radius must exceed fuel_radius")
        return self


class ReportPayload(BaseModel):
    model_config = ConfigDict(extra="forbid")

    input: str
    x: Optional[Literal["n", "r"]] = None  # guessed from the CSV when unset
    title: Optional[str] = None


class RunConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    mode: Mode
    output_dir: str = "results"
    sweep: Optional[SweepConfig] = None
    mc: Optional[McPayload] = None
    report: Optional[ReportPayload] = None

    @model_validator(mode="after")
    def _one_payload(self):
        want = PAYLOAD_FOR_MODE[self.mode]
        present = [k for k in ("sweep", "mc", "report") if getattr(self, k) is not None]
        if present != [want]:
            raise ValueError(f"mode {self.mode!r} takes exactly one payload, {want!r}; "
                             f"got {present or 'none'}")
        return self


class _Parser(argparse.ArgumentParser):
    """Usage errors exit with status 1 instead of argparse's 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def _env_workers() -> Optional[int]:
    raw = os.environ.get("SORTMC_WORKERS")
    if raw is None or raw == "":
        return None
    try:
        value = int(raw)
    except ValueError:
        raise ConfigError(f"SORTMC_WORKERS must be an integer, got {raw!r}") from None
    return value


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="RunConfig JSON file; flags override it")
    p.add_argument("--seed", type=int, help="master seed")
    p.add_argument("--workers", type=int,
                   help="worker threads (default: $SORTMC_WORKERS, else 1)")
    p.add_argument("--out", help="output directory (default: results)")
    p.add_argument("--dump-config", action="store_true",
                   help="print the effective config as JSON and exit")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="sortmc", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    bench = sub.add_parser("sortbench", help="sorting benchmarks")
    bsub = bench.add_subparsers(dest="action", required=True, parser_class=_Parser)
    for name, helptext in (("size", "time each algorithm over array sizes"),
                           ("ratio", "time each algorithm over swap ratios at fixed n")):
        p = bsub.add_parser(name, help=helptext)
        _common(p)
        p.add_argument("--algorithms", nargs="+",
                       help="AdaptiveSingleThread PartitionMultiThread BitonicNetwork")
        p.add_argument("--repetitions", type=int)
        p.add_argument("--warmup", type=int)
        if name == "size":
            p.add_argument("--sizes", type=int, nargs="+", help="array sizes, increasing")
        else:
            p.add_argument("--n", type=int, help="array size (default 1048576)")
            p.add_argument("--ratios", type=float, nargs="+", help="swap ratios, increasing")

    mc = sub.add_parser("mc", help="Monte Carlo transport")
    msub = mc.add_subparsers(dest="action", required=True, parser_class=_Parser)
    p = msub.add_parser("run", help="k-eigenvalue run")
    _common(p)
    p.add_argument("--geometry", choices=["pebble", "pebble-vacuum", "infinite"])
    p.add_argument("--materials", help="material file (default: bundled HTR-10 set)")
    p.add_argument("--library", help="micro library (default: bundled 23-group set)")
    p.add_argument("--fuel-material")
    p.add_argument("--matrix-material")
    p.add_argument("--particles", type=int, help="particles per cycle")
    p.add_argument("--inactive", type=int, help="inactive cycles")
    p.add_argument("--cycles", type=int, help="total cycles")
    p.add_argument("--sort-mode", choices=[m.value for m in SortMode])
    p.add_argument("--k-events", type=int)
    p.add_argument("--key-scheme", choices=[k.value for k in KeyScheme])
    p.add_argument("--split-xs-lookup", action="store_true", default=None)

    rep = sub.add_parser("report", help="render results")
    rsub = rep.add_subparsers(dest="action", required=True, parser_class=_Parser)
    p = rsub.add_parser("plot", help="log-log SVG from a sweep CSV")
    _common(p)
    p.add_argument("--input", help="sweep CSV")
    p.add_argument("--x", choices=["n", "r"])
    p.add_argument("--title")
    return parser


def _mode(args) -> str:
    if args.command == "sortbench":
        return f"sortbench-{args.action}"
    return "mc-run" if args.command == "mc" else "report"


def _load_config_file(path: Path) -> dict:
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(
            f"{path}: malformed JSON at line {exc.lineno} column {exc.colno}: {exc.msg}"
        ) from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    return data


def _set(d: dict, dotted: str, value) -> None:
    if value is None:
        return
    *parents, leaf = dotted.split(".")
    for key in parents:
        node = d.get(key)
        if node is None:
            node = d[key] = {}
        elif not isinstance(node, dict):
            raise ConfigError(f"config field {key!r} must be an object")
        d = node
    d[leaf] = value


def effective_config(args) -> RunConfig:
    """Config file, then defaults for the payload, then flags on top."""
    mode = _mode(args)
    raw = _load_config_file(args.config) if args.config else {}
    if raw.get("mode", mode) != mode:
        raise ConfigError(f"config mode {raw['mode']!r} does not match command {mode!r}")
    raw["mode"] = mode
    payload = PAYLOAD_FOR_MODE[mode]
    if payload != "report":
        raw.setdefault(payload, {})
    _set(raw, "output_dir", args.out)
    workers = args.workers if args.workers is not None else _env_workers()

    if payload == "sweep":
        _set(raw, "sweep.seed", args.seed)
        _set(raw, "sweep.workers", workers)
        _set(raw, "sweep.algorithms", args.algorithms)
        _set(raw, "sweep.repetitions", args.repetitions)
        _set(raw, "sweep.warmup", args.warmup)
        if mode == "sortbench-size":
            _set(raw, "sweep.sizes", args.sizes)
        else:
            _set(raw, "sweep.fixed_n", args.n)
            _set(raw, "sweep.ratios", args.ratios)
    elif payload == "mc":
        _set(raw, "mc.cycle.seed", args.seed)
        _set(raw, "mc.workers", workers)
        for flag, field in (("geometry", "geometry"), ("materials", "materials"),
                            ("library", "library"), ("fuel_material", "fuel_material"),
                            ("matrix_material", "matrix_material"),
                            ("particles", "cycle.particles_per_cycle"),
                            ("inactive", "cycle.inactive_cycles"),
                            ("cycles", "cycle.total_cycles"),
                            ("split_xs_lookup", "cycle.split_xs_lookup"),
                            ("sort_mode", "strategy.mode"),
                            ("k_events", "strategy.k_events"),
                            ("key_scheme", "strategy.key_scheme")):
            _set(raw, f"mc.{field}", getattr(args, flag))
    else:
        if args.input is not None or args.x is not None or args.title is not None:
            raw.setdefault("report", {})
        _set(raw, "report.input", args.input)
        _set(raw, "report.x", args.x)
        _set(raw, "report.title", args.title)
        if raw.get("report") is None:
            raise ConfigError("report plot needs --input or a config with a report payload")
    return RunConfig.model_validate(raw)


def _existing(path, what: str) -> Path:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"{what} {path} does not exist")
    return path


def _run_sweep(cfg: RunConfig, out: Path) -> None:
    sweep = cfg.sweep
    if cfg.mode == "sortbench-size":
        records, stem, x = run_size_sweep(sweep), "size_sweep", "n"
        title = "Sort time against array size"
    else:
        records, stem, x = run_ratio_sweep(sweep), "ratio_sweep", "r"
        title = f"Sort time against swap ratio, n = {sweep.fixed_n}"
    csv_path = write_csv(records, out / f"{stem}.csv")
    print(f"wrote {csv_path}")
    measured = [r for r in records if not r.skipped]
    for rec in records:
        if rec.skipped:
            print(f"skipped {rec.algorithm.value} n={rec.n}: {rec.skipped}", file=sys.stderr)
    if measured:
        svg = render_loglog_svg(measured, out / f"{stem}.svg", x=x, title=title)
        print(f"wrote {svg}")


def _run_mc(cfg: RunConfig, out: Path) -> None:
    mc = cfg.mc
    lib = load_library(_existing(mc.library or data_path("synthetic_23g.lib"), "library"))
    mats = build_materials(
        _existing(mc.materials or data_path("htr10_materials.txt"), "material file"), lib)
    for name in (mc.fuel_material, mc.matrix_material):
        if name not in mats and (name == mc.fuel_material or mc.geometry != "infinite"):
            raise ConfigError(f"material {name!r} not found; have {sorted(mats)}")
    if mc.geometry == "infinite":
        geom, materials = Geometry.infinite(0), [mats[mc.fuel_material]]
    else:
        boundary = Boundary.VACUUM if mc.geometry == "pebble-vacuum" else Boundary.REFLECTIVE
        geom = Geometry.pebble(mc.fuel_radius, mc.pebble_radius, 0, 1, boundary)
        materials = [mats[mc.fuel_material], mats[mc.matrix_material]]
    result = run_eigenvalue(geom, materials, mc.cycle, mc.strategy, mc.workers)
    t = result.tallies
    for path in (write_keff_csv(t, out / "keff.csv"), write_flux_csv(t, out / "flux.csv"),
                 write_trace_csv(result.trace, out / "presort_trace.csv")):
        print(f"wrote {path}")
    print(f"keff = {t.keff_text()}  ({mc.cycle.active_cycles} active cycles, "
          f"{result.event_passes} event passes, {result.lost_particles} lost)")


def _run_report(cfg: RunConfig, out: Path) -> None:
    rep = cfg.report
    records = read_csv(_existing(rep.input, "input CSV"))
    x = rep.x or ("r" if any(r.r is not None for r in records) else "n")
    svg = render_loglog_svg(records, out / f"{Path(rep.input).stem}.svg", x=x,
                            title=rep.title)
    print(f"wrote {svg}")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = effective_config(args)
    except ValidationError as exc:
        print(f"sortmc: invalid config:\n{exc}", file=sys.stderr)
        return EXIT_INVALID
    except ConfigError as exc:
        print(f"sortmc: {exc}", file=sys.stderr)
        return EXIT_INVALID
    if args.dump_config:
        print(cfg.model_dump_json(indent=2))
        return EXIT_OK
    out = Path(cfg.output_dir)
    try:
        if cfg.mode.startswith("sortbench"):
            _run_sweep(cfg, out)
        elif cfg.mode == "mc-run":
            _run_mc(cfg, out)
        else:
            _run_report(cfg, out)
    except (ConfigError, ValueError, KeyError) as exc:
        # Bad data files and unknown names are input problems.
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"sortmc: {msg}", file=sys.stderr)
        return EXIT_INVALID
    except Exception as exc:  # noqa: BLE001
        print(f"sortmc: run failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    raise SystemExit(main())
