import math

import numpy as np
import pytest

import oracles
from pufadv.engine import (
    MAX_CONDITIONING_CRPS,
    MIN_POPULATION,
    WEIGHTINGS,
    CrpSet,
    FeasibilityError,
    condition_population,
    estimate_advantage,
    estimate_standard_error,
    evaluate_transcript,
    run_game,
    sample_distinct_challenges,
    sample_eval_challenges,
    signed_means,
)
from pufadv.closedform import (
    WORKED_EXAMPLE_CHALLENGES,
    WORKED_EXAMPLE_EVAL_CHALLENGE,
    WORKED_EXAMPLE_RESPONSES,
    worked_example,
)
from pufadv.models import Architecture, batch_eval, response_block, sample_batch

RNG = np.random.default_rng


def small_batch(arch="xor", k=8, n=2, count=3000, seed=17):
    return sample_batch(Architecture(arch, k=k, n=n), count, seed=seed)


# --- transcripts -------------------------------------------------------------


def test_crpset_validation():
    c = np.array([[1, -1, 1], [1, 1, 1]], dtype=np.int8)
    t = CrpSet(c, np.array([1, -1], dtype=np.int8))
    assert len(t) == 2
    with pytest.raises(ValueError):
        CrpSet(np.array([[1, -1, 1], [1, -1, 1]], dtype=np.int8))  # repeats
    with pytest.raises(ValueError):
        CrpSet(c, np.array([1, 0], dtype=np.int8))
    with pytest.raises(ValueError):
        CrpSet(c, np.array([1], dtype=np.int8))


# --- conditioning ------------------------------------------------------------


def test_grouping_matches_dict_oracle():
    batch = small_batch(count=4000)
    known = sample_distinct_challenges(8, 3, RNG(2))
    table = condition_population(batch, CrpSet(known), min_group_size=1)

    rows = response_block(batch, known)
    expected = oracles.ref_group_by_pattern(rows)
    assert table.group_count == len(expected)
    got = {}
    for members in table.members:
        pattern = tuple(int(r) for r in rows[members[0]])
        got[pattern] = sorted(int(i) for i in members)
    assert got == {p: sorted(m) for p, m in expected.items()}


def test_group_sizes_conserve_population():
    batch = small_batch(count=2500)
    known = sample_distinct_challenges(8, 4, RNG(9))
    full = condition_population(batch, CrpSet(known), min_group_size=1)
    assert int(full.sizes.sum()) == 2500
    members = np.concatenate(full.members)
    assert len(members) == 2500
    assert len(np.unique(members)) == 2500

    cut = condition_population(batch, CrpSet(known), min_group_size=2)
    assert all(s >= 2 for s in cut.sizes)
    # the cut drops exactly the singleton groups
    singles = sum(1 for s in full.sizes if s == 1)
    assert cut.retained_instances == 2500 - singles


def test_unconditioned_population_is_one_group():
    batch = small_batch(count=1500)
    table = condition_population(batch, CrpSet(np.empty((0, 8), dtype=np.int8)))
    assert table.group_count == 1
    assert table.sizes.tolist() == [1500]
    assert table.retained_instances == 1500


def test_target_group_matches_transcript_pattern():
    batch = small_batch(count=5000, seed=3)
    known = sample_distinct_challenges(8, 2, RNG(4))
    rows = response_block(batch, known)
    probe = 123
    transcript = CrpSet(known, rows[probe])
    table = condition_population(batch, transcript)
    assert table.target_group is not None
    target_members = table.members[table.target_group]
    assert probe in target_members
    for i in target_members:
        assert np.array_equal(rows[i], rows[probe])


def test_conditioning_rejects_too_many_crps():
    batch = small_batch(count=1200)
    rng = RNG(0)
    known = sample_distinct_challenges(8, MAX_CONDITIONING_CRPS + 1, rng)
    with pytest.raises(FeasibilityError):
        condition_population(batch, CrpSet(known))


# --- standard error operator --------------------------------------------------


def test_standard_error_frozen_cases():
    got = estimate_standard_error(
        np.array(oracles.SE_CASE_MATRIX), np.array(oracles.SE_CASE_WEIGHTS)
    )
    assert got == pytest.approx(oracles.SE_CASE_VALUE, rel=1e-12)
    got1 = estimate_standard_error(
        np.array(oracles.SE_M1_MATRIX), np.array(oracles.SE_M1_WEIGHTS)
    )
    assert got1 == pytest.approx(oracles.SE_M1_VALUE, rel=1e-12)


def test_standard_error_validation():
    with pytest.raises(ValueError):
        estimate_standard_error(np.array([[0.5]]), np.array([1.0]))
    with pytest.raises(ValueError):
        estimate_standard_error(np.array([[0.5, 0.5]]), np.array([-1.0]))
    with pytest.raises(ValueError):
        estimate_standard_error(np.array([[0.5, 0.5], [0.1, 0.1]]), np.array([1.0]))


def test_standard_error_shrinks_with_challenges():
    rng = RNG(7)
    ses = []
    for m in (50, 200):
        mat = np.abs(rng.normal(0.3, 0.1, size=(6, m)))
        ses.append(estimate_standard_error(mat, np.full(6, 1 / 6)))
    # quadrupling the challenge count halves the SE, within sampling noise
    assert ses[0] / ses[1] == pytest.approx(2.0, rel=0.35)


# --- the advantage estimator ---------------------------------------------------


def _reference_case(weighting):
    batch = small_batch(k=6, count=2000, seed=23)
    rng = RNG(11)
    known = sample_distinct_challenges(6, 2, rng)
    ev = sample_eval_challenges(6, 9, rng, exclude=known)
    table = condition_population(batch, CrpSet(known))
    est = estimate_advantage(batch, table, ev, weighting=weighting, col_chunk=4)

    rows = response_block(batch, known)
    groups = oracles.ref_group_by_pattern(rows)
    kept = sorted(
        (m for m in groups.values() if len(m) >= 2), key=lambda m: m[0]
    )
    ev_rows = response_block(batch, ev)
    mats = [[list(ev_rows[i]) for i in members] for members in kept]
    if weighting == "uniform-over-groups":
        weights = [1 / len(mats)] * len(mats)
    else:
        total = sum(len(m) for m in kept)
        weights = [len(m) / total for m in kept]
    return est, mats, weights, kept


@pytest.mark.parametrize("weighting", WEIGHTINGS)
def test_advantage_matches_reference(weighting):
    est, mats, weights, kept = _reference_case(weighting)
    ref_adv, ref_bias = oracles.ref_advantage(mats, weights)
    assert est.bias == pytest.approx(ref_bias, rel=1e-12)
    assert est.advantage == pytest.approx(ref_adv, rel=1e-12)
    assert est.advantage == pytest.approx(est.bias / 2, rel=1e-15)
    assert est.retained_groups == len(kept)
    assert est.retained_instances == sum(len(m) for m in kept)
    assert est.weighting == weighting


def test_advantage_se_matches_operator():
    est, mats, weights, _ = _reference_case("uniform-over-groups")
    abs_means = np.array(
        [
            [abs(sum(int(row[j]) for row in rows)) / len(rows) for j in range(9)]
            for rows in mats
        ]
    )
    op = estimate_standard_error(abs_means, np.array(weights))
    assert est.manifest["se_between_challenges"] == pytest.approx(op, rel=1e-12)
    floor = est.manifest["se_binomial_floor"]
    assert est.manifest["bias_standard_error"] == pytest.approx(
        math.hypot(op, floor), rel=1e-12
    )
    assert est.standard_error == pytest.approx(est.manifest["bias_standard_error"] / 2)


def test_advantage_invariant_to_chunking_and_threads():
    batch = small_batch(count=3000, seed=5)
    rng = RNG(8)
    known = sample_distinct_challenges(8, 2, rng)
    ev = sample_eval_challenges(8, 130, rng, exclude=known)
    table = condition_population(batch, CrpSet(known))
    base = estimate_advantage(batch, table, ev, col_chunk=130)
    for chunk in (1, 7, 64):
        est = estimate_advantage(batch, table, ev, col_chunk=chunk)
        assert est.advantage == pytest.approx(base.advantage, abs=1e-13)
        assert est.standard_error == pytest.approx(base.standard_error, abs=1e-13)
    thr = estimate_advantage(batch, table, ev, col_chunk=32, threads=4)
    seq = estimate_advantage(batch, table, ev, col_chunk=32, threads=1)
    assert thr.advantage == seq.advantage
    assert thr.standard_error == seq.standard_error


def test_advantage_accepts_prepacked_responses():
    batch = small_batch(count=2000, seed=31)
    rng = RNG(13)
    known = sample_distinct_challenges(8, 3, rng)
    ev = sample_eval_challenges(8, 90, rng, exclude=known)
    table = condition_population(batch, CrpSet(known))
    packed = batch_eval(batch, ev)
    a = estimate_advantage(batch, table, ev, responses=packed)
    b = estimate_advantage(batch, table, ev)
    assert a.advantage == b.advantage
    assert a.standard_error == b.standard_error
    with pytest.raises(ValueError):
        estimate_advantage(batch, table, ev[:50], responses=packed)


def test_advantage_rejects_eval_overlap_and_bad_weighting():
    batch = small_batch(count=2000)
    rng = RNG(3)
    known = sample_distinct_challenges(8, 2, rng)
    table = condition_population(batch, CrpSet(known))
    ev = np.vstack([known[:1], sample_eval_challenges(8, 5, rng, exclude=known)])
    with pytest.raises(ValueError):
        estimate_advantage(batch, table, ev)
    clean = sample_eval_challenges(8, 5, rng, exclude=known)
    with pytest.raises(ValueError):
        estimate_advantage(batch, table, clean, weighting="nope")


def test_conservative_se_scales_up():
    batch = small_batch(count=2000, seed=2)
    rng = RNG(21)
    known = sample_distinct_challenges(8, 1, rng)
    ev = sample_eval_challenges(8, 40, rng, exclude=known)
    table = condition_population(batch, CrpSet(known))
    plain = estimate_advantage(batch, table, ev)
    wide = estimate_advantage(batch, table, ev, conservative_se=True)
    assert wide.standard_error == pytest.approx(1.5 * plain.standard_error, rel=1e-12)
    assert wide.advantage == plain.advantage


# --- full game ----------------------------------------------------------------


def test_run_game_deterministic():
    kwargs = dict(
        arch=Architecture("xor", k=16, n=2),
        n_known=2,
        n_puf=20_000,
        m_eval=200,
        seed=5,
    )
    a = run_game(**kwargs).to_dict()
    b = run_game(**kwargs).to_dict()
    a.pop("wall_time_s")
    b.pop("wall_time_s")
    assert a == b


def test_run_game_keep_batch_same_estimate():
    est = run_game(Architecture("apuf", k=16), 1, 10_000, 100, seed=9)
    est2, batch = run_game(
        Architecture("apuf", k=16), 1, 10_000, 100, seed=9, keep_batch=True
    )
    assert est2.advantage == est.advantage
    assert batch.count == 10_000


def test_run_game_manifest_contents():
    est = run_game(Architecture("ct", k=12), 1, 5_000, 80, seed=4)
    m = est.manifest
    assert m["arch"]["arch"] == "ct"
    assert m["n_known"] == 1
    assert "version" in m and "ct_slicing" in m
    assert est.eval_challenge_count == 80
    assert est.population == 5_000


def test_run_game_rejects_tiny_population():
    with pytest.raises(ValueError):
        run_game(Architecture("apuf", k=16), 1, MIN_POPULATION - 1, 50, seed=1)


def test_null_conditioning_close_to_zero():
    est = run_game(Architecture("apuf", k=16), 0, 20_000, 300, seed=6)
    assert est.advantage < 0.02
    assert est.retained_groups == 1


# --- transcript evaluation ------------------------------------------------------


def test_worked_example_transcript_reproduced():
    transcript = CrpSet(
        WORKED_EXAMPLE_CHALLENGES, np.array(WORKED_EXAMPLE_RESPONSES, dtype=np.int8)
    )
    est = evaluate_transcript(
        Architecture("apuf", k=3),
        transcript,
        WORKED_EXAMPLE_EVAL_CHALLENGE.reshape(1, -1),
        n_puf=150_000,
        seed=77,
    )
    closed = worked_example()
    assert est.advantage == pytest.approx(closed.advantage, abs=0.02)
    assert est.manifest["transcript_group_size"] > 10_000
    assert est.retained_groups == 1


def test_transcript_requires_responses():
    with pytest.raises(ValueError):
        evaluate_transcript(
            Architecture("apuf", k=3),
            CrpSet(WORKED_EXAMPLE_CHALLENGES),
            WORKED_EXAMPLE_EVAL_CHALLENGE.reshape(1, -1),
            n_puf=2_000,
            seed=1,
        )


def test_contradictory_transcript_is_infeasible():
    # the two challenges have exactly opposite feature vectors, so no
    # instance answers +1 to both
    c = np.array([[1, 1, 1], [1, 1, -1]], dtype=np.int8)
    transcript = CrpSet(c, np.array([1, 1], dtype=np.int8))
    ev = np.array([[-1, 1, 1]], dtype=np.int8)
    with pytest.raises(FeasibilityError):
        evaluate_transcript(
            Architecture("apuf", k=3), transcript, ev, n_puf=2_000, seed=3
        )


# --- challenge sampling ----------------------------------------------------------


def test_distinct_challenges_are_distinct():
    got = sample_distinct_challenges(4, 16, RNG(1))
    assert got.shape == (16, 4)
    assert len({row.tobytes() for row in got}) == 16
    with pytest.raises(FeasibilityError):
        sample_distinct_challenges(4, 17, RNG(1))


def test_eval_challenges_respect_exclusion():
    exclude = sample_distinct_challenges(3, 4, RNG(5))
    banned = {row.tobytes() for row in exclude}
    got = sample_eval_challenges(3, 100, RNG(6), exclude=exclude)
    assert got.shape == (100, 3)
    assert not any(row.tobytes() in banned for row in got)
    # with replacement: 100 draws from the 4 remaining patterns must repeat
    assert len({row.tobytes() for row in got}) <= 4


# --- population statistics --------------------------------------------------------


def test_signed_means_match_dense_block():
    batch = small_batch(count=1200, seed=19)
    chal = sample_distinct_challenges(8, 50, RNG(2))
    means = signed_means(batch, chal, col_chunk=16)
    dense = response_block(batch, chal).mean(axis=0)
    np.testing.assert_allclose(means, dense, atol=1e-12)
    sub = np.array([1, 5, 9, 100])
    np.testing.assert_allclose(
        signed_means(batch, chal, rows=sub),
        response_block(batch, chal, rows=sub).mean(axis=0),
        atol=1e-12,
    )
