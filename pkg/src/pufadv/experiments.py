"""Scripted studies: bias histograms, CRP-count sweeps, stage sweeps.

Each sweep expands into an explicit list of grid points, one seed per
point derived from the base seed and the point index alone, so a sweep
can be resumed, re-run in pieces, or reproduced row by row from the CSV.
"""

from __future__ import annotations

import csv
import datetime
import hashlib
import json
from dataclasses import dataclass, field
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import __version__
from .engine import (
    MAX_CONDITIONING_CRPS,
    WEIGHTINGS,
    AdvantageEstimate,
    CrpSet,
    FeasibilityError,
    _spawn_seeds,
    condition_population,
    run_game,
    sample_distinct_challenges,
    sample_eval_challenges,
    signed_means,
)
from .models import Architecture, sample_batch

DESK_N_PUF = 100_000
PAPER_N_PUF = 1_000_000
DEFAULT_M_EVAL = 1000
DEFAULT_SEED = 101
DEFAULT_N_GRID = (1, 2, 4, 8, 16)
DEFAULT_K_GRID = (8, 16, 32, 64, 128)

SCALES = {
    "desk": {"n_puf": DESK_N_PUF, "m_eval": DEFAULT_M_EVAL},
    "paper": {"n_puf": PAPER_N_PUF, "m_eval": DEFAULT_M_EVAL},
}

SWEEP_SCHEMA = "pufadv.sweep.v1"
HIST_SCHEMA = "pufadv.hist.v1"

SWEEP_COLUMNS = (
    "arch", "k", "n", "f1", "f2", "N", "N_PUF", "M_eval", "seed",
    "advantage", "bias", "stderr", "groups", "retained_instances",
    "weighting", "wall_time_s",
)
HIST_COLUMNS = ("row_kind", "series", "index", "value", "bin_lo", "bin_hi", "count")


def point_seed(base_seed: int, index: int) -> int:
    """Per-point seed from the base seed and flat grid index only."""
    ss = np.random.SeedSequence((base_seed, index))
    return int(ss.generate_state(1, np.uint64)[0])


@dataclass(frozen=True)
class SweepSpec:
    """Grid description for the sweep runners.

    ``n_values`` drives CRP-count sweeps; ``k_values`` drives stage
    sweeps (which rebuild each architecture at every k and condition on
    ``n_values[0]`` observed CRPs).
    """

    architectures: tuple[Architecture, ...]
    n_values: tuple[int, ...] = DEFAULT_N_GRID
    k_values: tuple[int, ...] = ()
    n_puf: int = DESK_N_PUF
    m_eval: int = DEFAULT_M_EVAL
    base_seed: int = DEFAULT_SEED
    replications: int = 1
    weighting: str = "uniform-over-groups"
    threads: int = 1

    def __post_init__(self):
        if not self.architectures:
            raise ValueError("need at least one architecture")
        if self.replications < 1:
            raise ValueError("replications must be at least 1")
        if not self.n_values and not self.k_values:
            raise ValueError("need a non-empty N grid or k grid")
        if self.weighting not in WEIGHTINGS:
            raise ValueError(f"unknown weighting {self.weighting!r}")
        for n in self.n_values:
            if not 0 <= n <= MAX_CONDITIONING_CRPS:
                raise ValueError(
                    f"N={n} outside the supported 0..{MAX_CONDITIONING_CRPS} range"
                )
        if any(k < 1 for k in self.k_values):
            raise ValueError("stage counts must be positive")

    def to_dict(self) -> dict:
        return {
            "architectures": [a.to_dict() for a in self.architectures],
            "n_values": list(self.n_values),
            "k_values": list(self.k_values),
            "n_puf": self.n_puf,
            "m_eval": self.m_eval,
            "base_seed": self.base_seed,
            "replications": self.replications,
            "weighting": self.weighting,
        }

    @property
    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


@dataclass(frozen=True)
class GridPoint:
    index: int
    arch: Architecture
    n_known: int
    seed: int
    replicate: int = 0

    def row_key(self) -> tuple:
        a = self.arch
        return (a.arch, a.k, a.n, a.f1, a.f2, self.n_known, self.seed)


@dataclass
class SweepRow:
    point: GridPoint
    estimate: AdvantageEstimate | None = None
    error: str | None = None


@dataclass
class SweepResult:
    spec: SweepSpec
    rows: list[SweepRow]
    created_at: str
    version: str = __version__

    @property
    def config_hash(self) -> str:
        return self.spec.config_hash

    @property
    def failed(self) -> list[SweepRow]:
        return [r for r in self.rows if r.error is not None]


def _crp_grid(spec: SweepSpec) -> list[GridPoint]:
    points = []
    idx = 0
    for arch in spec.architectures:
        for n in spec.n_values:
            for rep in range(spec.replications):
                points.append(GridPoint(idx, arch, n, point_seed(spec.base_seed, idx), rep))
                idx += 1
    return points


def _stage_grid(spec: SweepSpec) -> list[GridPoint]:
    if not spec.k_values:
        raise ValueError("stage sweep needs a k grid")
    if list(spec.k_values) != sorted(spec.k_values):
        raise ValueError("k grid must be sorted ascending")
    n_known = spec.n_values[0] if spec.n_values else 1
    points = []
    idx = 0
    for template in spec.architectures:
        for k in spec.k_values:
            # placements do not transfer across k; rebuilt from defaults
            arch = Architecture(template.arch, k, n=template.n)
            for rep in range(spec.replications):
                points.append(GridPoint(idx, arch, n_known, point_seed(spec.base_seed, idx), rep))
                idx += 1
    return points


def _run_points(
    spec: SweepSpec,
    points: list[GridPoint],
    skip: set[tuple] | None = None,
    on_row=None,
) -> SweepResult:
    """Execute grid points, merging results in index order.

    ``skip`` holds row keys already present in a partial output; those
    points are neither run nor re-emitted. ``on_row`` sees completed
    rows strictly in grid order so a streaming CSV writer stays sorted.
    """
    todo = [p for p in points if not skip or p.row_key() not in skip]

    def run_point(p: GridPoint) -> SweepRow:
        try:
            est = run_game(
                p.arch,
                n_known=p.n_known,
                n_puf=spec.n_puf,
                m_eval=spec.m_eval,
                seed=p.seed,
                weighting=spec.weighting,
            )
            return SweepRow(point=p, estimate=est)
        except (FeasibilityError, ValueError, MemoryError) as exc:
            return SweepRow(point=p, error=f"{type(exc).__name__}: {exc}")

    rows: list[SweepRow] = []
    if spec.threads > 1 and len(todo) > 1:
        with ThreadPoolExecutor(max_workers=spec.threads) as pool:
            futures = [pool.submit(run_point, p) for p in todo]
            for fut in futures:  # submission order == grid order
                row = fut.result()
                rows.append(row)
                if on_row:
                    on_row(row)
    else:
        for p in todo:
            row = run_point(p)
            rows.append(row)
            if on_row:
                on_row(row)
    created = datetime.datetime.now(datetime.timezone.utc).isoformat()
    return SweepResult(spec=spec, rows=rows, created_at=created)


def sweep_crp_count(spec: SweepSpec, skip: set[tuple] | None = None, on_row=None) -> SweepResult:
    """One advantage estimate per (architecture, observed-CRP count)."""
    return _run_points(spec, _crp_grid(spec), skip=skip, on_row=on_row)


def sweep_stage_count(spec: SweepSpec, skip: set[tuple] | None = None, on_row=None) -> SweepResult:
    """One advantage estimate per (architecture, stage count k)."""
    return _run_points(spec, _stage_grid(spec), skip=skip, on_row=on_row)


def report_architectures(k: int = 64) -> tuple[Architecture, ...]:
    """The comparison line-up: plain, XOR orders 2/4/6, FF 1/2/3, ct."""
    f1, f2 = k // 6, k // 3
    return (
        Architecture("apuf", k),
        Architecture("xor", k, n=2),
        Architecture("xor", k, n=4),
        Architecture("xor", k, n=6),
        Architecture("ffxor", k, n=1, f1=f1, f2=f2),
        Architecture("ffxor", k, n=2, f1=f1, f2=f2),
        Architecture("ffxor", k, n=3, f1=f1, f2=f2),
        Architecture("ct", k),
    )


def architecture_report(
    k: int = 64,
    n_values: tuple[int, ...] = DEFAULT_N_GRID,
    n_puf: int = DESK_N_PUF,
    m_eval: int = DEFAULT_M_EVAL,
    base_seed: int = DEFAULT_SEED,
    weighting: str = "uniform-over-groups",
    threads: int = 1,
    skip: set[tuple] | None = None,
    on_row=None,
) -> SweepResult:
    """Side-by-side advantage table across the standard line-up."""
    spec = SweepSpec(
        architectures=report_architectures(k),
        n_values=tuple(n_values),
        n_puf=n_puf,
        m_eval=m_eval,
        base_seed=base_seed,
        weighting=weighting,
        threads=threads,
    )
    return sweep_crp_count(spec, skip=skip, on_row=on_row)


# ---------------------------------------------------------------------------
# Bias histograms.


@dataclass
class BiasHistogram:
    """Signed per-challenge response means, binned over [-1, 1].

    ``series`` maps a series name to its m_eval signed means; ``counts``
    to the per-bin tallies under the shared ``edges``. The conditioned
    series reflects the single largest consistency group, which is the
    cleanest signal; group choice is recorded in the manifest.
    """

    arch: Architecture
    n_condition: int
    n_puf: int
    m_eval: int
    seed: int
    edges: np.ndarray
    series: dict[str, np.ndarray]
    counts: dict[str, np.ndarray]
    manifest: dict = field(default_factory=dict)


def bias_histogram(
    arch: Architecture,
    n_condition: int,
    n_puf: int,
    m_eval: int,
    seed: int,
    bins: int = 40,
) -> BiasHistogram:
    """Population bias spectrum with and without one observed CRP."""
    if m_eval < 100:
        raise ValueError("histograms need at least 100 evaluation challenges")
    if n_condition not in (0, 1):
        raise ValueError("n_condition must be 0 or 1")
    if bins < 1:
        raise ValueError("bins must be positive")
    c_rng, batch_seed, e_rng = _spawn_seeds(seed)
    known = sample_distinct_challenges(arch.k, n_condition, c_rng)
    batch = sample_batch(arch, n_puf, batch_seed)
    ev = sample_eval_challenges(arch.k, m_eval, e_rng, exclude=known)

    series = {"unconditioned": signed_means(batch, ev)}
    manifest = {
        "arch": arch.to_dict(),
        "batch_seed": batch_seed,
        "seed": seed,
        "n_puf": n_puf,
        "m_eval": m_eval,
        "version": __version__,
        "conditioned_group": None,
    }
    if n_condition == 1:
        groups = condition_population(batch, CrpSet(known))
        if not groups.members:
            raise FeasibilityError("conditioning retained no group of usable size")
        top = int(np.argmax(groups.sizes))
        series["conditioned"] = signed_means(batch, ev, rows=groups.members[top])
        manifest["conditioned_group"] = {
            "size": int(groups.sizes[top]),
            "rule": "largest retained group",
        }
    edges = np.linspace(-1.0, 1.0, bins + 1)
    counts = {name: np.histogram(vals, edges)[0] for name, vals in series.items()}
    return BiasHistogram(
        arch=arch,
        n_condition=n_condition,
        n_puf=n_puf,
        m_eval=m_eval,
        seed=seed,
        edges=edges,
        series=series,
        counts=counts,
        manifest=manifest,
    )


# ---------------------------------------------------------------------------
# CSV and sidecar serialization. The CSV layouts are stable contracts;
# bump the schema tag on any column change.


def sweep_row_record(row: SweepRow, spec: SweepSpec) -> dict:
    a = row.point.arch
    est = row.estimate
    record = {
        "arch": a.arch,
        "k": a.k,
        "n": a.n,
        "f1": "" if a.f1 is None else a.f1,
        "f2": "" if a.f2 is None else a.f2,
        "N": row.point.n_known,
        "N_PUF": spec.n_puf,
        "M_eval": spec.m_eval,
        "seed": row.point.seed,
        "advantage": "",
        "bias": "",
        "stderr": "",
        "groups": "",
        "retained_instances": "",
        "weighting": spec.weighting,
        "wall_time_s": "",
    }
    if est is not None:
        record.update(
            advantage=repr(est.advantage),
            bias=repr(est.bias),
            stderr=repr(est.standard_error),
            groups=est.retained_groups,
            retained_instances=est.retained_instances,
            weighting=est.weighting,
            wall_time_s=f"{est.wall_time_s:.3f}",
        )
    return record


def write_sweep_csv(result: SweepResult, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = start_sweep_csv(fh)
        for row in result.rows:
            if row.estimate is not None:
                writer.writerow(sweep_row_record(row, result.spec))


def start_sweep_csv(fh) -> csv.DictWriter:
    fh.write(f"# schema={SWEEP_SCHEMA}\n")
    writer = csv.DictWriter(fh, fieldnames=SWEEP_COLUMNS, lineterminator="\n")
    writer.writeheader()
    return writer


def read_sweep_csv(path) -> list[dict]:
    """Typed rows from a sweep CSV; raises on any schema drift."""
    with open(path, newline="") as fh:
        head = fh.readline().strip()
        if head != f"# schema={SWEEP_SCHEMA}":
            raise ValueError(f"unsupported sweep schema line {head!r}")
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != SWEEP_COLUMNS:
            raise ValueError(f"sweep column mismatch: {reader.fieldnames}")
        rows = []
        for rec in reader:
            rows.append(
                {
                    "arch": rec["arch"],
                    "k": int(rec["k"]),
                    "n": int(rec["n"]),
                    "f1": int(rec["f1"]) if rec["f1"] else None,
                    "f2": int(rec["f2"]) if rec["f2"] else None,
                    "N": int(rec["N"]),
                    "N_PUF": int(rec["N_PUF"]),
                    "M_eval": int(rec["M_eval"]),
                    "seed": int(rec["seed"]),
                    "advantage": float(rec["advantage"]),
                    "bias": float(rec["bias"]),
                    "stderr": float(rec["stderr"]),
                    "groups": int(rec["groups"]),
                    "retained_instances": int(rec["retained_instances"]),
                    "weighting": rec["weighting"],
                    "wall_time_s": float(rec["wall_time_s"]),
                }
            )
    return rows


def completed_row_keys(rows: list[dict]) -> set[tuple]:
    return {
        (r["arch"], r["k"], r["n"], r["f1"], r["f2"], r["N"], r["seed"]) for r in rows
    }


def write_sweep_sidecar(result: SweepResult, csv_path) -> str:
    side = str(csv_path) + ".json"
    payload = {
        "schema": SWEEP_SCHEMA,
        "version": result.version,
        "created_at": result.created_at,
        "config_hash": result.config_hash,
        "sweep": result.spec.to_dict(),
        "errors": [
            {"index": r.point.index, "row": r.point.row_key(), "error": r.error}
            for r in result.failed
        ],
        "manifests": [
            {"index": r.point.index, "manifest": r.estimate.manifest}
            for r in result.rows
            if r.estimate is not None
        ],
    }
    with open(side, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return side


def write_hist_csv(hist: BiasHistogram, path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(f"# schema={HIST_SCHEMA}\n")
        writer = csv.DictWriter(fh, fieldnames=HIST_COLUMNS, lineterminator="\n")
        writer.writeheader()
        for name in sorted(hist.series):
            vals = hist.series[name]
            for i, v in enumerate(vals):
                writer.writerow(
                    {
                        "row_kind": "mean",
                        "series": name,
                        "index": i,
                        "value": repr(float(v)),
                        "bin_lo": "",
                        "bin_hi": "",
                        "count": "",
                    }
                )
        for name in sorted(hist.counts):
            cnt = hist.counts[name]
            for b in range(len(cnt)):
                writer.writerow(
                    {
                        "row_kind": "bin",
                        "series": name,
                        "index": b,
                        "value": "",
                        "bin_lo": repr(float(hist.edges[b])),
                        "bin_hi": repr(float(hist.edges[b + 1])),
                        "count": int(cnt[b]),
                    }
                )


def read_hist_csv(path) -> dict:
    """Histogram CSV back as {series: {means, bins}}; schema-checked."""
    with open(path, newline="") as fh:
        head = fh.readline().strip()
        if head != f"# schema={HIST_SCHEMA}":
            raise ValueError(f"unsupported histogram schema line {head!r}")
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != HIST_COLUMNS:
            raise ValueError(f"histogram column mismatch: {reader.fieldnames}")
        out: dict = {}
        for rec in reader:
            entry = out.setdefault(rec["series"], {"means": [], "bins": []})
            if rec["row_kind"] == "mean":
                entry["means"].append(float(rec["value"]))
            elif rec["row_kind"] == "bin":
                entry["bins"].append(
                    (float(rec["bin_lo"]), float(rec["bin_hi"]), int(rec["count"]))
                )
            else:
                raise ValueError(f"unknown row kind {rec['row_kind']!r}")
    return out
