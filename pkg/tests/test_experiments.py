import json
import math
from pathlib import Path

import numpy as np
import pytest

from pufadv.engine import FeasibilityError
from pufadv.experiments import (
    DEFAULT_K_GRID,
    DEFAULT_N_GRID,
    HIST_SCHEMA,
    SWEEP_COLUMNS,
    SWEEP_SCHEMA,
    SweepSpec,
    architecture_report,
    bias_histogram,
    completed_row_keys,
    point_seed,
    read_hist_csv,
    read_sweep_csv,
    report_architectures,
    sweep_crp_count,
    sweep_stage_count,
    sweep_row_record,
    write_hist_csv,
    write_sweep_csv,
    write_sweep_sidecar,
)
from pufadv.models import Architecture

TINY = dict(n_puf=4000, m_eval=40)


def tiny_spec(**over):
    base = dict(
        architectures=(Architecture("apuf", k=8), Architecture("xor", k=8, n=2)),
        n_values=(1, 2),
        base_seed=7,
        **TINY,
    )
    base.update(over)
    return SweepSpec(**base)


# --- seeds and spec hashing ---------------------------------------------------


def test_point_seed_is_stable_and_distinct():
    seeds = [point_seed(101, i) for i in range(50)]
    assert len(set(seeds)) == 50
    assert seeds[:2] == [point_seed(101, 0), point_seed(101, 1)]
    assert point_seed(101, 0) != point_seed(102, 0)


def test_spec_validation():
    with pytest.raises(ValueError):
        tiny_spec(architectures=())
    with pytest.raises(ValueError):
        tiny_spec(n_values=())
    with pytest.raises(ValueError):
        tiny_spec(weighting="nope")
    with pytest.raises(ValueError):
        tiny_spec(replications=0)
    with pytest.raises(ValueError):
        tiny_spec(n_values=(1, 30))  # beyond the conditioning cap


def test_config_hash_tracks_content():
    a, b = tiny_spec(), tiny_spec()
    assert a.config_hash == b.config_hash
    assert a.config_hash != tiny_spec(base_seed=8).config_hash
    assert a.config_hash != tiny_spec(n_values=(1, 4)).config_hash
    d = a.to_dict()
    assert d["n_puf"] == TINY["n_puf"]
    assert [x["arch"] for x in d["architectures"]] == ["apuf", "xor"]


# --- grids ---------------------------------------------------------------------


def test_crp_sweep_grid_and_determinism():
    spec = tiny_spec()
    res = sweep_crp_count(spec)
    assert len(res.rows) == 4  # 2 arch x 2 N
    assert not res.failed
    keys = [r.point.row_key() for r in res.rows]
    assert len(set(keys)) == 4
    # arch-major, N inner; indexes count up from zero
    assert [r.point.index for r in res.rows] == [0, 1, 2, 3]
    assert [r.point.arch.arch for r in res.rows] == ["apuf", "apuf", "xor", "xor"]
    assert [r.point.n_known for r in res.rows] == [1, 2, 1, 2]
    for r in res.rows:
        assert r.point.seed == point_seed(7, r.point.index)

    again = sweep_crp_count(spec)
    for x, y in zip(res.rows, again.rows):
        assert x.estimate.advantage == y.estimate.advantage
        assert x.estimate.standard_error == y.estimate.standard_error


def test_replications_make_distinct_points():
    spec = tiny_spec(n_values=(1,), replications=2)
    res = sweep_crp_count(spec)
    assert len(res.rows) == 4
    reps = [r.point.replicate for r in res.rows]
    assert reps == [0, 1, 0, 1]
    a, b = res.rows[0], res.rows[1]
    assert a.point.seed != b.point.seed
    assert a.estimate.advantage != b.estimate.advantage


def test_skip_set_short_circuits_points():
    spec = tiny_spec()
    first = sweep_crp_count(spec)
    done = {r.point.row_key() for r in first.rows}
    rerun = sweep_crp_count(spec, skip=done)
    assert len(rerun.rows) == 0


def test_stage_sweep_rebuilds_architectures():
    spec = tiny_spec(
        architectures=(Architecture("apuf", k=8), Architecture("ff", k=8)),
        n_values=(1,),
        k_values=(8, 12),
    )
    res = sweep_stage_count(spec)
    assert len(res.rows) == 4
    ks = [r.point.arch.k for r in res.rows]
    assert ks == [8, 12, 8, 12]
    ff_rows = [r for r in res.rows if r.point.arch.arch == "ff"]
    # placements follow each stage count, not the seed architecture's
    assert [(r.point.arch.f1, r.point.arch.f2) for r in ff_rows] == [(2, 4), (4, 8)]
    with pytest.raises(ValueError):
        sweep_stage_count(tiny_spec(k_values=(12, 8)))
    with pytest.raises(ValueError):
        sweep_stage_count(tiny_spec(k_values=()))


def test_report_lineup():
    archs = report_architectures(64)
    labels = [(a.arch, a.n) for a in archs]
    assert labels == [
        ("apuf", 1),
        ("xor", 2),
        ("xor", 4),
        ("xor", 6),
        ("ffxor", 1),
        ("ffxor", 2),
        ("ffxor", 3),
        ("ct", 1),
    ]
    for a in archs:
        if a.arch == "ffxor":
            assert (a.f1, a.f2) == (64 // 6, 64 // 3)


def test_failed_points_are_recorded_not_raised():
    # population floor is enforced per point, so every point errors but
    # the sweep itself returns
    spec = tiny_spec(n_puf=500)
    res = sweep_crp_count(spec)
    assert len(res.failed) == 4
    for row in res.rows:
        assert row.estimate is None
        assert "population" in row.error
    record = sweep_row_record(res.rows[0], spec)
    assert record["advantage"] == ""
    assert record["N_PUF"] == 500


# --- csv round trips -------------------------------------------------------------


def test_sweep_csv_round_trip(tmp_path):
    spec = tiny_spec()
    res = sweep_crp_count(spec)
    path = tmp_path / "sweep.csv"
    write_sweep_csv(res, path)
    text = path.read_text()
    assert text.splitlines()[0] == f"# schema={SWEEP_SCHEMA}"
    assert text.splitlines()[1] == ",".join(SWEEP_COLUMNS)
    rows = read_sweep_csv(path)
    assert len(rows) == 4
    for parsed, row in zip(rows, res.rows):
        assert parsed["advantage"] == row.estimate.advantage  # repr round trip
        assert parsed["stderr"] == row.estimate.standard_error
        assert parsed["arch"] == row.point.arch.arch
        assert parsed["N"] == row.point.n_known
        assert parsed["f1"] is None
    keys = completed_row_keys(rows)
    assert keys == {r.point.row_key() for r in res.rows}


def test_sweep_csv_rejects_foreign_schema(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("# schema=other.v9\n" + ",".join(SWEEP_COLUMNS) + "\n")
    with pytest.raises(ValueError):
        read_sweep_csv(path)
    path2 = tmp_path / "cols.csv"
    path2.write_text(f"# schema={SWEEP_SCHEMA}\narch,k\n")
    with pytest.raises(ValueError):
        read_sweep_csv(path2)


def test_sidecar_contents(tmp_path):
    spec = tiny_spec()
    res = sweep_crp_count(spec)
    csv_path = tmp_path / "s.csv"
    write_sweep_csv(res, csv_path)
    side = write_sweep_sidecar(res, csv_path)
    doc = json.loads(Path(side).read_text())
    assert doc["schema"] == SWEEP_SCHEMA
    assert doc["config_hash"] == spec.config_hash
    assert doc["sweep"]["n_puf"] == TINY["n_puf"]
    assert doc["errors"] == []
    assert len(doc["manifests"]) == 4


# --- histograms -------------------------------------------------------------------


def test_bias_histogram_invariants():
    h = bias_histogram(
        Architecture("apuf", k=16), n_condition=1, n_puf=6000, m_eval=150, seed=13, bins=24
    )
    assert sorted(h.series) == ["conditioned", "unconditioned"]
    assert len(h.edges) == 25
    assert h.edges[0] == -1.0 and h.edges[-1] == 1.0
    for name, values in h.series.items():
        assert values.shape == (150,)
        assert np.all(values >= -1.0) and np.all(values <= 1.0)
        assert int(h.counts[name].sum()) == 150
    assert abs(float(np.mean(h.series["unconditioned"]))) < 5 / math.sqrt(6000)
    # conditioning concentrates absolute bias
    assert np.abs(h.series["conditioned"]).mean() > np.abs(
        h.series["unconditioned"]
    ).mean()
    assert h.manifest["conditioned_group"]["rule"] == "largest retained group"


def test_bias_histogram_unconditioned_only():
    h = bias_histogram(
        Architecture("apuf", k=16), n_condition=0, n_puf=5000, m_eval=120, seed=9, bins=10
    )
    assert list(h.series) == ["unconditioned"]
    assert h.manifest["conditioned_group"] is None


def test_bias_histogram_validation():
    with pytest.raises(ValueError):
        bias_histogram(Architecture("apuf", k=16), 2, 5000, 120, seed=1)
    with pytest.raises(ValueError):
        bias_histogram(Architecture("apuf", k=16), 0, 5000, 50, seed=1)  # m_eval floor


def test_hist_csv_round_trip(tmp_path):
    h = bias_histogram(
        Architecture("xor", k=12, n=2), n_condition=1, n_puf=5000, m_eval=100, seed=3, bins=12
    )
    path = tmp_path / "h.csv"
    write_hist_csv(h, path)
    assert path.read_text().splitlines()[0] == f"# schema={HIST_SCHEMA}"
    back = read_hist_csv(path)
    assert sorted(back) == ["conditioned", "unconditioned"]
    for name in back:
        np.testing.assert_allclose(back[name]["means"], h.series[name], atol=0)
        assert sum(c for _, _, c in back[name]["bins"]) == 100
    with pytest.raises(ValueError):
        bad = tmp_path / "bad.csv"
        bad.write_text("# schema=wrong\n")
        read_hist_csv(bad)
