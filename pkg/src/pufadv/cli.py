"""Command-line front end.

One executable with four subcommands: ``eval`` (single advantage
estimate as JSON), ``sweep`` (grids to CSV with resume), ``closed-form``
(exact reference values), and ``hist`` (bias histogram CSV). Exit codes
are stable: 0 success, 2 usage, 3 infeasible request, 4 partial sweep
failure.

Configuration precedence, lowest to highest: built-in desk-scale
defaults, the scale preset, a JSON config file, explicit flags. The
merged configuration is echoed into every artifact together with the
tool version and a hash of the numerically relevant fields.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import sys
from pathlib import Path

from . import __version__
from .closedform import orthant_three, orthant_two, worked_example
from .engine import FeasibilityError, run_game
from .experiments import (
    DEFAULT_K_GRID,
    DEFAULT_N_GRID,
    DEFAULT_SEED,
    SCALES,
    SWEEP_COLUMNS,
    SweepSpec,
    bias_histogram,
    completed_row_keys,
    read_sweep_csv,
    report_architectures,
    start_sweep_csv,
    sweep_crp_count,
    sweep_row_record,
    sweep_stage_count,
    write_hist_csv,
    write_sweep_sidecar,
)
from .models import Architecture, save_batch

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_FEASIBILITY = 3
EXIT_PARTIAL = 4

OUTPUT_DIR_ENV = "PUFADV_OUTPUT_DIR"


class UsageError(Exception):
    pass


def _fail(kind: str, message: str, code: int) -> int:
    record = {"error": {"type": kind, "message": message, "exit_code": code}}
    print(json.dumps(record, sort_keys=True), file=sys.stderr)
    return code


def parse_arch_token(token: str, k: int) -> Architecture:
    """Compact architecture syntax: TAG[:n[:f1:f2]], e.g. ffxor:2:10:21."""
    parts = token.split(":")
    tag = parts[0]
    try:
        n = int(parts[1]) if len(parts) > 1 else 1
        f1 = int(parts[2]) if len(parts) > 2 else None
        f2 = int(parts[3]) if len(parts) > 3 else None
        return Architecture(tag, k, n=n, f1=f1, f2=f2)
    except (ValueError, IndexError) as exc:
        raise UsageError(f"bad architecture token {token!r}: {exc}") from exc


def _int_grid(text: str, name: str) -> tuple[int, ...]:
    try:
        values = tuple(int(part) for part in text.split(",") if part.strip())
    except ValueError as exc:
        raise UsageError(f"bad {name} grid {text!r}") from exc
    if not values:
        raise UsageError(f"empty {name} grid")
    return values


def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config file {path}: {exc}") from exc
    if not isinstance(cfg, dict):
        raise UsageError("config file must hold a JSON object")
    return cfg


def _merge(args: argparse.Namespace, cfg: dict, key: str, default):
    flag = getattr(args, key, None)
    if flag is not None:
        return flag
    if key in cfg:
        return cfg[key]
    return default


def _scaled_run_params(args, cfg) -> dict:
    scale = _merge(args, cfg, "scale", "desk")
    if scale not in SCALES:
        raise UsageError(f"unknown scale {scale!r}, expected desk or paper")
    preset = SCALES[scale]
    return {
        "scale": scale,
        "n_puf": int(_merge(args, cfg, "n_puf", preset["n_puf"])),
        "m_eval": int(_merge(args, cfg, "m_eval", preset["m_eval"])),
        "seed": int(_merge(args, cfg, "seed", DEFAULT_SEED)),
        "weighting": _merge(args, cfg, "weighting", "uniform-over-groups"),
        "threads": int(_merge(args, cfg, "threads", os.cpu_count() or 1)),
    }


def _config_hash(config: dict) -> str:
    skip = {"out", "dump_instances", "threads", "output_dir", "config"}
    clean = {k: v for k, v in config.items() if k not in skip}
    return hashlib.sha256(json.dumps(clean, sort_keys=True).encode()).hexdigest()[:16]


def _resolve_out(path: str, args, cfg) -> Path:
    p = Path(path)
    if p.is_absolute():
        return p
    base = _merge(args, cfg, "output_dir", os.environ.get(OUTPUT_DIR_ENV) or ".")
    return Path(base) / p


# ---------------------------------------------------------------------------
# Subcommands.


def cmd_eval(args: argparse.Namespace) -> int:
    cfg = _load_config(args.config)
    run = _scaled_run_params(args, cfg)
    k = int(_merge(args, cfg, "k", 64))
    arch_token = _merge(args, cfg, "arch", "apuf")
    n = _merge(args, cfg, "n", None)
    f1 = _merge(args, cfg, "f1", None)
    f2 = _merge(args, cfg, "f2", None)
    try:
        base = parse_arch_token(str(arch_token), k)
        arch = Architecture(
            base.arch, k,
            n=int(n) if n is not None else base.n,
            f1=int(f1) if f1 is not None else base.f1,
            f2=int(f2) if f2 is not None else base.f2,
        )
    except (UsageError, ValueError) as exc:
        return _fail("usage", str(exc), EXIT_USAGE)
    n_crps = int(_merge(args, cfg, "n_crps", 1))
    config = {
        "command": "eval",
        "arch": arch.to_dict(),
        "n_crps": n_crps,
        **run,
    }
    try:
        result = run_game(
            arch,
            n_known=n_crps,
            n_puf=run["n_puf"],
            m_eval=run["m_eval"],
            seed=run["seed"],
            weighting=run["weighting"],
            threads=run["threads"],
            keep_batch=bool(args.dump_instances),
        )
    except FeasibilityError as exc:
        return _fail("feasibility", str(exc), EXIT_FEASIBILITY)
    except ValueError as exc:
        return _fail("usage", str(exc), EXIT_USAGE)
    if args.dump_instances:
        est, batch = result
        dump_path = _resolve_out(args.dump_instances, args, cfg)
        dump_path.parent.mkdir(parents=True, exist_ok=True)
        save_batch(batch, dump_path)
        est.manifest["instances_archive"] = str(dump_path)
    else:
        est = result
    record = est.to_dict()
    record["config"] = config
    record["config_hash"] = _config_hash(config)
    record["version"] = __version__
    print(json.dumps(record, indent=2, sort_keys=True))
    return EXIT_OK


def _sweep_spec(args, cfg) -> tuple[SweepSpec, str]:
    run = _scaled_run_params(args, cfg)
    kind = _merge(args, cfg, "kind", "crp")
    k = int(_merge(args, cfg, "k", 64))
    if kind == "report":
        archs = report_architectures(k)
    else:
        tokens = args.arch or cfg.get("arch") or ["apuf"]
        if isinstance(tokens, str):
            tokens = [tokens]
        archs = tuple(parse_arch_token(t, k) for t in tokens)
    n_grid = _merge(args, cfg, "n_grid", None)
    n_values = _int_grid(n_grid, "N") if isinstance(n_grid, str) else tuple(n_grid or DEFAULT_N_GRID)
    k_grid = _merge(args, cfg, "k_grid", None)
    k_values: tuple[int, ...] = ()
    if kind == "stage":
        k_values = _int_grid(k_grid, "k") if isinstance(k_grid, str) else tuple(k_grid or DEFAULT_K_GRID)
        n_values = (int(_merge(args, cfg, "n_crps", 1)),)
    spec = SweepSpec(
        architectures=archs,
        n_values=n_values,
        k_values=k_values,
        n_puf=run["n_puf"],
        m_eval=run["m_eval"],
        base_seed=run["seed"],
        replications=int(_merge(args, cfg, "replications", 1)),
        weighting=run["weighting"],
        threads=run["threads"],
    )
    return spec, kind


def cmd_sweep(args: argparse.Namespace) -> int:
    cfg = _load_config(args.config)
    try:
        spec, kind = _sweep_spec(args, cfg)
    except (UsageError, ValueError) as exc:
        return _fail("usage", str(exc), EXIT_USAGE)
    out = _resolve_out(args.out, args, cfg)
    out.parent.mkdir(parents=True, exist_ok=True)

    skip: set[tuple] = set()
    mode = "w"
    if out.exists():
        if not args.resume:
            return _fail(
                "usage",
                f"{out} already exists; pass --resume to fill in missing rows",
                EXIT_USAGE,
            )
        try:
            existing = read_sweep_csv(out)
        except ValueError as exc:
            return _fail("usage", f"cannot resume: {exc}", EXIT_USAGE)
        sidecar = Path(str(out) + ".json")
        if sidecar.exists():
            with open(sidecar) as fh:
                meta = json.load(fh)
            if meta.get("config_hash") not in (None, spec.config_hash):
                return _fail(
                    "usage",
                    "existing sweep was produced by a different configuration; "
                    "refusing to mix rows",
                    EXIT_USAGE,
                )
        skip = completed_row_keys(existing)
        mode = "a"

    runner = {"crp": sweep_crp_count, "stage": sweep_stage_count, "report": sweep_crp_count}[kind]
    with open(out, mode, newline="") as fh:
        if mode == "w":
            writer = start_sweep_csv(fh)
        else:
            writer = csv.DictWriter(fh, fieldnames=SWEEP_COLUMNS, lineterminator="\n")

        def on_row(row):
            if row.estimate is not None:
                writer.writerow(sweep_row_record(row, spec))
                fh.flush()

        result = runner(spec, skip=skip, on_row=on_row)

    side = write_sweep_sidecar(result, out)
    summary = {
        "command": "sweep",
        "kind": kind,
        "csv": str(out),
        "sidecar": side,
        "rows_written": sum(1 for r in result.rows if r.estimate is not None),
        "rows_skipped": len(skip),
        "rows_failed": len(result.failed),
        "config_hash": spec.config_hash,
        "version": __version__,
    }
    print(json.dumps(summary, indent=2, sort_keys=True))
    if result.failed:
        for row in result.failed:
            print(
                json.dumps({"row_error": {"index": row.point.index, "error": row.error}}),
                file=sys.stderr,
            )
        return EXIT_PARTIAL
    return EXIT_OK


def cmd_closed_form(args: argparse.Namespace) -> int:
    which = args.which
    try:
        if which == "orthant2d":
            rho = float(args.rho)
            record = {
                "name": "orthant2d",
                "inputs": {"rho": rho},
                "value": orthant_two(rho),
                "tolerance": 0.0,
            }
        elif which == "orthant3d":
            rhos = [float(part) for part in args.rhos.split(",")]
            if len(rhos) != 3:
                raise UsageError("orthant3d needs exactly three correlations")
            record = {
                "name": "orthant3d",
                "inputs": {"rhos": rhos},
                "value": orthant_three(*rhos),
                "tolerance": 0.0,
            }
        else:
            we = worked_example(tolerance=args.tolerance)
            record = {
                "name": "worked-example",
                "inputs": {"tolerance": args.tolerance},
                "value": we.probability,
                "tolerance": args.tolerance,
                "detail": we.to_dict(),
            }
    except (UsageError, ValueError) as exc:
        return _fail("usage", str(exc), EXIT_USAGE)
    record["version"] = __version__
    record["config_hash"] = _config_hash(record["inputs"])
    print(json.dumps(record, indent=2, sort_keys=True))
    return EXIT_OK


def cmd_hist(args: argparse.Namespace) -> int:
    cfg = _load_config(args.config)
    run = _scaled_run_params(args, cfg)
    k = int(_merge(args, cfg, "k", 64))
    try:
        arch = parse_arch_token(_merge(args, cfg, "arch", "apuf"), k)
        hist = bias_histogram(
            arch,
            n_condition=int(_merge(args, cfg, "n_condition", 1)),
            n_puf=run["n_puf"],
            m_eval=run["m_eval"],
            seed=run["seed"],
            bins=int(_merge(args, cfg, "bins", 40)),
        )
    except UsageError as exc:
        return _fail("usage", str(exc), EXIT_USAGE)
    except FeasibilityError as exc:
        return _fail("feasibility", str(exc), EXIT_FEASIBILITY)
    except ValueError as exc:
        return _fail("usage", str(exc), EXIT_USAGE)
    out = _resolve_out(args.out, args, cfg)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_hist_csv(hist, out)
    config = {
        "command": "hist",
        "arch": arch.to_dict(),
        "n_condition": hist.n_condition,
        "bins": len(hist.edges) - 1,
        **run,
    }
    sidecar = str(out) + ".json"
    with open(sidecar, "w") as fh:
        json.dump(
            {
                "schema": "pufadv.hist.v1",
                "version": __version__,
                "config": config,
                "config_hash": _config_hash(config),
                "manifest": hist.manifest,
            },
            fh,
            indent=2,
            sort_keys=True,
        )
        fh.write("\n")
    summary = {
        "command": "hist",
        "csv": str(out),
        "sidecar": sidecar,
        "series": sorted(hist.series),
        "config_hash": _config_hash(config),
        "version": __version__,
    }
    print(json.dumps(summary, indent=2, sort_keys=True))
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser wiring.


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--k", type=int, default=None, help="stage count (default 64)")
    p.add_argument("--n-puf", type=int, default=None, dest="n_puf", help="population size")
    p.add_argument("--m-eval", type=int, default=None, dest="m_eval", help="evaluation challenges")
    p.add_argument("--seed", type=int, default=None, help=f"base seed (default {DEFAULT_SEED})")
    p.add_argument(
        "--weighting",
        choices=("uniform-over-groups", "instance-weighted"),
        default=None,
    )
    p.add_argument("--scale", choices=("desk", "paper"), default=None)
    p.add_argument("--paper-scale", dest="scale", action="store_const", const="paper",
                   help="shorthand for --scale paper")
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--config", default=None, help="JSON config file (flags win)")
    p.add_argument("--output-dir", default=None, dest="output_dir",
                   help=f"base for relative outputs (or ${OUTPUT_DIR_ENV})")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pufadv",
        description="Monte Carlo unpredictability analysis for delay-based PUFs",
    )
    parser.add_argument("--version", action="version", version=f"pufadv {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_eval = sub.add_parser("eval", help="one advantage estimate as JSON")
    p_eval.add_argument("--arch", default=None, help="apuf | xor | ff | ffxor | ct")
    p_eval.add_argument("--n", type=int, default=None, help="XOR order")
    p_eval.add_argument("--f1", type=int, default=None, help="feed-forward tap stage")
    p_eval.add_argument("--f2", type=int, default=None, help="feed-forward injection stage")
    p_eval.add_argument("--n-crps", type=int, default=None, dest="n_crps",
                        help="observed CRPs to condition on (default 1)")
    p_eval.add_argument("--dump-instances", default=None, dest="dump_instances",
                        help="write the sampled instance archive here")
    _add_run_flags(p_eval)
    p_eval.set_defaults(func=cmd_eval)

    p_sweep = sub.add_parser("sweep", help="grid of estimates to CSV")
    p_sweep.add_argument("--kind", choices=("crp", "stage", "report"), default=None)
    p_sweep.add_argument("--arch", action="append", default=None,
                         help="repeatable; TAG[:n[:f1:f2]]")
    p_sweep.add_argument("--n-grid", default=None, dest="n_grid",
                         help="comma list of observed-CRP counts")
    p_sweep.add_argument("--k-grid", default=None, dest="k_grid",
                         help="comma list of stage counts (stage sweeps)")
    p_sweep.add_argument("--n-crps", type=int, default=None, dest="n_crps",
                         help="conditioning count for stage sweeps (default 1)")
    p_sweep.add_argument("--replications", type=int, default=None)
    p_sweep.add_argument("--resume", action="store_true",
                         help="fill in missing rows of an existing CSV")
    p_sweep.add_argument("--out", required=True, help="CSV output path")
    _add_run_flags(p_sweep)
    p_sweep.set_defaults(func=cmd_sweep)

    p_cf = sub.add_parser("closed-form", help="exact reference values as JSON")
    p_cf.add_argument("which", choices=("orthant2d", "orthant3d", "worked-example"))
    p_cf.add_argument("--rho", type=float, default=0.0, help="orthant2d correlation")
    p_cf.add_argument("--rhos", default="0,0,0", help="orthant3d correlations a,b,c")
    p_cf.add_argument("--tolerance", type=float, default=1e-8,
                      help="worked-example quadrature tolerance")
    p_cf.set_defaults(func=cmd_closed_form)

    p_hist = sub.add_parser("hist", help="bias histogram CSV")
    p_hist.add_argument("--arch", default=None, help="TAG[:n[:f1:f2]]")
    p_hist.add_argument("--n-condition", type=int, default=None, dest="n_condition",
                        help="0 or 1 observed CRPs (default 1)")
    p_hist.add_argument("--bins", type=int, default=None, help="bin count (default 40)")
    p_hist.add_argument("--out", required=True, help="CSV output path")
    _add_run_flags(p_hist)
    p_hist.set_defaults(func=cmd_hist)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        return _fail("usage", str(exc), EXIT_USAGE)
    except FeasibilityError as exc:
        return _fail("feasibility", str(exc), EXIT_FEASIBILITY)
    except OSError as exc:
        return _fail("io", str(exc), EXIT_USAGE)


if __name__ == "__main__":
    sys.exit(main())
