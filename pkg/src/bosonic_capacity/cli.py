"""Command-line front end.

Verbs::

    bcw bounds attenuator --lambda 0.75 --env thermal:2 --N 0:20:0.1 --method epi
    bcw bounds classical-noise --t 1 --dist gaussian:iso --N 0,1,5 --method epni
    bcw figure fig1 --out fig1.csv
    bcw verify suite.cfg --out report.json
    bcw holevo attenuator --lambda 0.75 --env number:0 --N 2 --dim 40

Runs are appended as JSON lines to ``--runlog`` or ``$BCW_RUNLOG`` if set.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import hashlib
import json
import math
import os
import sys
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

from . import __version__
from .bounds import EPI, EPNI, bound_curve, channel_bounds, reports_to_csv, reports_to_wide_csv
from .channels import (
    AttenuatorSpec,
    ClassicalNoiseSpec,
    EnvironmentSpec,
    NoiseDensity,
    holevo_coherent_rate,
)
from .errors import BosonicCapacityError
from .verify import SuiteConfig, parse_config_text, report_to_csv, report_to_json, run_suite

PROG = "bcw"
RUNLOG_ENV = "BCW_RUNLOG"
FIGURE_GRID = "0:20:0.1"

FIGURES = {
    "fig1": (
        lambda: AttenuatorSpec(0.75, EnvironmentSpec.moments(2.0, 0.91)),
        "attenuator lambda=0.75, environment N_E=2, S_E=0.91 nats",
    ),
    "fig2": (
        lambda: ClassicalNoiseSpec(1.0, NoiseDensity.stats(2.0, math.log(15.1))),
        "classical noise t=1, E(f)=2, exp(H(f))=15.1",
    ),
}


class UsageError(Exception):
    """Bad command-line input; reported with exit status 2."""


# ---------------------------------------------------------------------------
# run records


def spec_digest(obj) -> str:
    """SHA-256 of the canonical JSON form of ``obj``."""
    canon = json.dumps(obj, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()


@dataclass
class RunRecord:
    command: List[str]
    config: dict
    digests: dict = field(default_factory=dict)
    outputs: List[str] = field(default_factory=list)
    version: str = __version__
    timestamp: str = field(default_factory=lambda: _dt.datetime.now(_dt.timezone.utc).isoformat())

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


def persist_run(record: RunRecord, path: Optional[str] = None) -> bool:
    """Append ``record`` to the run log; returns whether a line was written.

    The log is ``path`` or else ``$BCW_RUNLOG``; with neither, nothing is
    written.  Failure to write only warns.
    """
    path = path or os.environ.get(RUNLOG_ENV)
    if not path:
        return False
    try:
        with open(path, "a", encoding="utf-8") as fh:
            fh.write(record.to_json() + "\n")
    except OSError as exc:
        warnings.warn(f"could not write run log {path}: {exc}", RuntimeWarning, stacklevel=2)
        return False
    return True


# ---------------------------------------------------------------------------
# argument parsing helpers


def parse_grid(text: str) -> List[float]:
    """``"2"``, ``"0,1,5"`` or inclusive range ``"start:stop:step"``."""
    try:
        if ":" in text:
            start, stop, step = (float(p) for p in text.split(":"))
            if step <= 0 or stop < start:
                raise UsageError(f"bad range {text!r}: need step > 0 and stop >= start")
            count = int(math.floor((stop - start) / step + 1e-9))
            return [round(start + i * step, 12) for i in range(count + 1)]
        return [float(p) for p in text.split(",")]
    except ValueError as exc:
        raise UsageError(f"cannot parse photon-number grid {text!r}") from exc


def _numbers(body: str, count: Optional[int] = None, kind=float) -> list:
    vals = [kind(p.strip()) for p in body.split(",") if p.strip()]
    if count is not None and len(vals) != count:
        raise ValueError(f"expected {count} values, got {len(vals)}")
    return vals


def _load_json(text: str) -> Optional[dict]:
    path = Path(text)
    if text.endswith(".json") or path.is_file():
        try:
            return json.loads(path.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read spec file {text}: {exc}") from exc
    return None


def parse_env(text: str) -> EnvironmentSpec:
    """Environment from ``vacuum``, ``thermal:N``, ``number:n``, ``coherent:z``,
    ``superposition:c0,c1,...``, ``moments:N_E,S_E`` or a JSON file."""
    obj = _load_json(text)
    if obj is not None:
        return EnvironmentSpec.from_dict(obj)
    name, _, body = text.partition(":")
    try:
        if name == "vacuum" and not body:
            return EnvironmentSpec.number(0)
        if name == "thermal":
            return EnvironmentSpec.thermal(*_numbers(body, 1))
        if name == "number":
            return EnvironmentSpec.number(*_numbers(body, 1, int))
        if name == "coherent":
            return EnvironmentSpec.coherent(complex(body.replace(" ", "")))
        if name == "superposition":
            return EnvironmentSpec.superposition(_numbers(body, kind=complex))
        if name == "moments":
            return EnvironmentSpec.moments(*_numbers(body, 2))
    except ValueError as exc:
        if isinstance(exc, BosonicCapacityError):
            raise
        raise UsageError(f"bad environment spec {text!r}: {exc}") from exc
    raise UsageError(f"unknown environment spec {text!r}")


def parse_dist(text: str) -> NoiseDensity:
    """Noise density from ``gaussian:iso``, ``gaussian:var`` or
    ``gaussian:vxx,vyy[,vxy]``, ``uniform-disc:R``, ``stats:E,H`` or a JSON file."""
    obj = _load_json(text)
    if obj is not None:
        return NoiseDensity.from_dict(obj)
    name, _, body = text.partition(":")
    try:
        if name == "gaussian":
            if body in ("", "iso"):
                return NoiseDensity.gaussian()
            vals = _numbers(body)
            if len(vals) == 1:
                return NoiseDensity.gaussian(vals[0] * np.eye(2))
            if len(vals) in (2, 3):
                vxy = vals[2] if len(vals) == 3 else 0.0
                return NoiseDensity.gaussian([[vals[0], vxy], [vxy, vals[1]]])
            raise ValueError("expected 1 to 3 covariance entries")
        if name == "uniform-disc":
            return NoiseDensity.uniform_disc(*_numbers(body, 1))
        if name == "stats":
            return NoiseDensity.stats(*_numbers(body, 2))
    except ValueError as exc:
        if isinstance(exc, BosonicCapacityError):
            raise
        raise UsageError(f"bad noise spec {text!r}: {exc}") from exc
    raise UsageError(f"unknown noise spec {text!r}")


def channel_from_args(args) -> AttenuatorSpec | ClassicalNoiseSpec:
    if args.channel == "attenuator":
        return AttenuatorSpec(args.lam, parse_env(args.env))
    return ClassicalNoiseSpec(args.t, parse_dist(args.dist))


def _header(spec, extra: Sequence[str] = ()) -> List[str]:
    return [
        f"{PROG} {__version__}",
        "units: nats; N is the mean input photon number",
        "spec: " + json.dumps(spec.to_dict(), sort_keys=True),
        *extra,
    ]


# ---------------------------------------------------------------------------
# commands


def cmd_bounds(args) -> tuple:
    spec = channel_from_args(args)
    method = args.method.upper()
    reports = bound_curve(spec, parse_grid(args.N), method)
    outputs = []
    if args.out:
        text = reports_to_csv(reports, _header(spec, [f"method: {method}"]))
        Path(args.out).write_text(text)
        outputs.append(args.out)
    else:
        for r in reports:
            print(json.dumps(r.to_dict(), sort_keys=True))
    return 0, {"spec": spec.to_dict(), "method": method, "N": args.N}, outputs


def figure_csv(name: str, grid: Optional[Sequence[float]] = None) -> str:
    """CSV text of a figure's EPI and EPNI bound curves."""
    if name not in FIGURES:
        raise UsageError(f"unknown figure {name!r}; choose from {sorted(FIGURES)}")
    make, caption = FIGURES[name]
    spec = make()
    grid_text = FIGURE_GRID if grid is None else None
    grid = parse_grid(FIGURE_GRID) if grid is None else list(grid)
    epi = bound_curve(spec, grid, EPI)
    epni = bound_curve(spec, grid, EPNI)
    note = f"N grid {grid_text} (start:stop:step, chosen default)" if grid_text else f"N grid of {len(grid)} points"
    return reports_to_wide_csv(epi, epni, _header(spec, [f"figure {name}: {caption}", note]))


def cmd_figure(args) -> tuple:
    grid = parse_grid(args.N) if args.N else None
    text = figure_csv(args.name, grid)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0, {"figure": args.name, "N": args.N or FIGURE_GRID}, [args.out] if args.out else []


def cmd_verify(args) -> tuple:
    if args.config:
        try:
            text = Path(args.config).read_text()
        except OSError as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from exc
        cfg = parse_config_text(text)
    else:
        cfg = SuiteConfig()
    if args.workers is not None:
        cfg.workers = args.workers
    report = run_suite(cfg)
    outputs = []
    if args.out:
        Path(args.out).write_text(report_to_json(report))
        outputs.append(args.out)
    if args.csv:
        Path(args.csv).write_text(report_to_csv(report))
        outputs.append(args.csv)
    for name, s in report["summary"].items():
        low = "n/a" if s["min_margin"] is None else f"{s['min_margin']:.3e}"
        print(
            f"{name:15s} {s['grade']:10s} trials={s['trials']:4d} violations={s['violations']} "
            f"flagged={s['flagged']} min_margin={low}"
        )
    for err in report["errors"]:
        print(f"error: {err['check']} trial {err['trial']}: {err['error']}: {err['message']}", file=sys.stderr)
    print("PASS" if report["passed"] else "FAIL")
    return (0 if report["passed"] else 1), {"suite": asdict(cfg)}, outputs


def cmd_holevo(args) -> tuple:
    spec = channel_from_args(args)
    rate = holevo_coherent_rate(spec, args.N, dim=args.dim, nodes=args.nodes)
    record = {"N": args.N, "dim": args.dim, "holevo": rate}
    for method in (EPI, EPNI):
        try:
            rep = channel_bounds(spec, args.N, method)
        except BosonicCapacityError as exc:
            record[method.lower()] = {"error": str(exc)}
            continue
        record[method.lower()] = {"lower": rep.lower, "upper": rep.upper}
    print(f"{rate:.10f}")
    print(json.dumps(record, sort_keys=True))
    return 0, {"spec": spec.to_dict(), "N": args.N, "dim": args.dim}, []


def _add_channel_args(p):
    sub = p.add_subparsers(dest="channel", required=True)
    att = sub.add_parser("attenuator", help="attenuator E_{lambda, sigma_E}")
    att.add_argument("--lambda", dest="lam", type=float, required=True, help="transmissivity in [0, 1]")
    att.add_argument("--env", required=True, help="environment spec, e.g. thermal:2 or env.json")
    noise = sub.add_parser("classical-noise", help="classical-noise channel F_{t, f}")
    noise.add_argument("--t", type=float, required=True, help="noise strength t > 0")
    noise.add_argument("--dist", required=True, help="noise density spec, e.g. gaussian:iso or f.json")
    return att, noise


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog=PROG, description="Capacity bounds for bosonic channels.")
    parser.add_argument("--runlog", help=f"append a JSON run record here (default ${RUNLOG_ENV})")
    parser.add_argument("--version", action="version", version=f"{PROG} {__version__}")
    verbs = parser.add_subparsers(dest="verb", required=True)

    p = verbs.add_parser("bounds", help="evaluate lower/upper capacity bounds")
    for sp in _add_channel_args(p):
        sp.add_argument("--N", required=True, help="photon budgets: 2 | 0,1,5 | 0:20:0.1")
        sp.add_argument("--method", choices=["epi", "epni", "EPI", "EPNI"], default="epi")
        sp.add_argument("--out", help="write CSV here instead of JSON lines to stdout")
    p.set_defaults(func=cmd_bounds)

    p = verbs.add_parser("figure", help="bound curves for the built-in figures")
    p.add_argument("name", help="fig1 or fig2")
    p.add_argument("--out", help="CSV path (stdout if absent)")
    p.add_argument("--N", help=f"override the grid (default {FIGURE_GRID})")
    p.set_defaults(func=cmd_figure)

    p = verbs.add_parser("verify", help="randomized entropy-inequality suite")
    p.add_argument("config", nargs="?", help="key = value config file (defaults if absent)")
    p.add_argument("--out", help="JSON report path")
    p.add_argument("--csv", help="flattened CSV report path")
    p.add_argument("--workers", type=int, help="worker processes")
    p.set_defaults(func=cmd_verify)

    p = verbs.add_parser("holevo", help="coherent-state Holevo rate with the bound sandwich")
    for sp in _add_channel_args(p):
        sp.add_argument("--N", type=float, required=True, help="mean photon number of the ensemble")
        sp.add_argument("--dim", type=int, default=30, help="Fock cutoff of the averaged input")
        sp.add_argument("--nodes", type=int, default=41, help="quadrature nodes per axis")
    p.set_defaults(func=cmd_holevo)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    args = parser.parse_args(argv)
    try:
        status, config, outputs = args.func(args)
    except (UsageError, BosonicCapacityError, KeyError, ValueError) as exc:
        parser.exit(2, f"{PROG}: error: {exc}\n")
    digests = {"config": spec_digest(config)}
    if "spec" in config:
        digests["spec"] = spec_digest(config["spec"])
    persist_run(RunRecord([args.verb, *argv[argv.index(args.verb) + 1 :]], config, digests, outputs), args.runlog)
    return status


if __name__ == "__main__":
    sys.exit(main())
