"""Command line for the router simulations: scan, witness, longrun, switch, ingest.

Exit codes: 0 success, 1 config (or usage) error, 2 data validation error,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .. import __version__
from ..measurement import CoincidenceMatrix
from ..modes import DegenerateStateError
from ..witness import witness
from . import io
from .config import SCENARIOS, ConfigError, ScenarioConfig, load_config
from .scenarios import (NumericalError, run_correlation_scan, run_longterm, run_switching,
                        run_witness)

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _common(p):
    p.add_argument("--config", default="calibrated",
                   help="scenario file, or the name of a shipped profile (default: calibrated)")
    p.add_argument("--seed", type=int, default=None, help="override [run] seed")
    p.add_argument("--out", default="out", help="output directory (default: ./out)")
    p.add_argument("--exact", action="store_true",
                   help="use expected counts instead of Poisson draws")
    p.add_argument("--workers", type=int, default=None, help="override [run] workers")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="hdrouter", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"hdrouter {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    p = sub.add_parser("scan", help="OAM correlation matrices before and after routing")
    _common(p)
    p = sub.add_parser("witness", help="fidelity and certified dimension of psi_AB, alpha_AB, pi_AC")
    _common(p)
    p.add_argument("--state", choices=SCENARIOS + ("all",), default="all")
    p = sub.add_parser("longrun", help="fidelity time series over the long run")
    _common(p)
    p = sub.add_parser("switch", help="coincidence traces while switching the sorter")
    _common(p)
    p = sub.add_parser("ingest", help="validate a recorded count file (and certify elements)")
    p.add_argument("path", help="matrix or element CSV")
    _common(p)
    return parser


def _meta(cfg: ScenarioConfig, command: str, exact: bool) -> dict:
    return {"artifact": f"hdrouter {__version__}", "command": command, "seed": cfg.seed,
            "exact": str(exact).lower(), "config_hash": cfg.hash(),
            "config": json.dumps(cfg.to_dict(), sort_keys=True, separators=(",", ":"))}


def _record(cfg, command, exact, outputs, summary) -> dict:
    return {"artifact_version": __version__, "command": command, "seed": cfg.seed,
            "exact": exact, "config_hash": cfg.hash(), "config": cfg.to_dict(),
            "outputs": sorted(outputs), "summary": summary}


def _cmd_scan(cfg, out: Path, exact):
    meta = _meta(cfg, "scan", exact)
    mats = run_correlation_scan(cfg, exact)
    summary = {}
    for name, m in mats.items():
        io.write_matrix(out / f"{name}.csv", m, meta)
        summary[name] = {"total": m.total}
    return list(f"{n}.csv" for n in mats), summary


def _cmd_witness(cfg, out, exact, state="all"):
    meta = _meta(cfg, "witness", exact)
    which = SCENARIOS if state == "all" else (state,)
    files, summary = [], {}
    for w in which:
        run = run_witness(cfg, w, exact)
        record = {**run.as_dict(), "meta": {k: v for k, v in meta.items() if k != "config"}}
        io.write_report(out / f"witness_{w}.json", record)
        io.write_elements(out / f"elements_{w}.csv", run.elements, meta)
        files += [f"witness_{w}.json", f"elements_{w}.csv"]
        r = run.report
        summary[w] = {"F_exp": r.fidelity, "F_err": r.fidelity_err, "bound": r.bound,
                      "certified_d": r.certified_d, "xi": r.xi}
        print(f"{w:9s} F = {r.fidelity:.4f} +- {r.fidelity_err:.4f}  bound = {r.bound:.4f}  "
              f"d = {r.certified_d}  xi = {r.xi:+.4f}")
    return files, summary


def _cmd_longrun(cfg, out, exact):
    meta = _meta(cfg, "longrun", exact)
    res = run_longterm(cfg, exact)
    io.write_series(out / "longrun.csv", res["series"], meta)
    s = res["series"]
    summary = {"targets": res["targets"]}
    for w in cfg.longrun.states:
        F = np.array([f for f, st in zip(s["F"], s["state"]) if st == w])
        B = np.array([b for b, st in zip(s["bound"], s["state"]) if st == w])
        summary[w] = {"F_first": F[0], "F_last": F[-1], "min_margin": float((F - B).min())}
        print(f"{w:9s} F {F[0]:.4f} -> {F[-1]:.4f}  (min F - bound = {(F - B).min():+.4f})")
    return ["longrun.csv"], summary


def _cmd_switch(cfg, out, exact):
    meta = _meta(cfg, "switch", exact)
    res = run_switching(cfg, exact)
    io.write_series(out / "switch.csv", res["series"], meta)
    summary = {k: v for k, v in res.items() if k != "series"}
    print(f"visibility = {res['visibility']:.4f} +- {res['visibility_std']:.4f}  "
          f"(AB {res['visibility_AB']:.4f}, AC {res['visibility_AC']:.4f})")
    return ["switch.csv"], summary


def _cmd_ingest(cfg, out, exact, path):
    try:
        data = io.ingest_counts(path, cfg.witness.normalization)
    except io.DataError:
        raise
    except ValueError as exc:
        raise io.DataError(f"{path}: {exc}") from exc
    if isinstance(data, CoincidenceMatrix):
        norm = data.normalized() if data.total > 0 else data
        summary = {"kind": "matrix", "ells_a": data.ells_a.tolist(),
                   "ells_b": data.ells_b.tolist(), "total": data.total}
        io.write_matrix(out / "ingested_normalized.csv", norm, _meta(cfg, "ingest", exact))
        print(f"matrix {len(data.ells_a)}x{len(data.ells_b)}, total {data.total:g}")
        return ["ingested_normalized.csv"], summary
    rep = witness(data, cfg.seed, cfg.witness.trials, cfg.run.workers)
    record = {"source": str(path), **rep.as_dict(), "normalization": data.normalization,
              "index_list": list(data.ells)}
    io.write_report(out / "ingest_witness.json", record)
    print(f"{data.n_elements} elements: F = {rep.fidelity:.4f} +- {rep.fidelity_err:.4f}  "
          f"d = {rep.certified_d}")
    return ["ingest_witness.json"], {"kind": "elements", **rep.as_dict()}


_COMMANDS = {"scan": _cmd_scan, "witness": _cmd_witness, "longrun": _cmd_longrun,
             "switch": _cmd_switch, "ingest": _cmd_ingest}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg = cfg.with_seed(args.seed)
        if args.workers is not None:
            cfg = cfg.with_workers(args.workers)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        extra = {}
        if args.command == "witness":
            extra["state"] = args.state
        elif args.command == "ingest":
            extra["path"] = args.path
        with np.errstate(invalid="raise", divide="raise", over="raise"):
            files, summary = _COMMANDS[args.command](cfg, out, args.exact, **extra)
        io.write_report(out / "run.json", _record(cfg, args.command, args.exact, files, summary))
    except io.DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (NumericalError, DegenerateStateError, FloatingPointError,
            np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
