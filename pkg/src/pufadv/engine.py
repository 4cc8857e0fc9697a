"""Monte Carlo advantage estimation by population conditioning.

The estimator simulates a large population of independent instances of
one architecture, keeps the sub-population whose responses agree with
the observed challenge-response transcript, and reads the predictability
of an unseen challenge off that sub-population's response mean. Grouping
by full response pattern on the observed challenges realizes every
possible transcript of the drawn population at once, so a single batch
prices all 2^N conditioning events that actually occur.

Memory discipline: response matrices are never materialized dense at
population scale. Known-challenge responses are small (N <= 24 columns);
evaluation challenges stream through in column chunks.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import __version__
from .models import (
    Architecture,
    PufBatch,
    ResponseMatrix,
    ct_slicing,
    pack_signs,
    response_block,
    sample_batch,
    validate_challenges,
)

# Grouping cost scales with 2^N patterns; past this the retained groups
# are almost all singletons at any affordable population.
MAX_CONDITIONING_CRPS = 24
MIN_POPULATION = 1000

WEIGHTINGS = ("uniform-over-groups", "instance-weighted")


class FeasibilityError(RuntimeError):
    """Raised when a requested conditioning cannot produce an estimate."""


@dataclass(frozen=True)
class CrpSet:
    """Observed transcript: distinct challenges, optionally with responses."""

    challenges: np.ndarray
    responses: np.ndarray | None = None

    def __post_init__(self):
        c = validate_challenges(self.challenges) if self.challenges.size else self.challenges
        object.__setattr__(self, "challenges", c)
        n = self.challenges.shape[0] if self.challenges.size else 0
        if n > 1:
            keys = {self.challenges[i].tobytes() for i in range(n)}
            if len(keys) != n:
                raise ValueError("transcript challenges must be pairwise distinct")
        if self.responses is not None:
            r = np.ascontiguousarray(self.responses, dtype=np.int8)
            if r.shape != (n,):
                raise ValueError(f"expected {n} responses, got shape {r.shape}")
            if n and not np.all(np.abs(r) == 1):
                raise ValueError("responses must be -1 or +1")
            object.__setattr__(self, "responses", r)

    def __len__(self) -> int:
        return self.challenges.shape[0] if self.challenges.size else 0


@dataclass
class GroupTable:
    """Consistency groups: instances with identical known-challenge rows.

    ``members`` holds instance index arrays, one per retained group, in
    packed-key order. ``target_group`` points at the group matching the
    transcript's own responses when those were given and survived the
    size cutoff.
    """

    known: CrpSet
    keys: np.ndarray
    members: list[np.ndarray]
    sizes: np.ndarray
    population: int
    min_group_size: int
    target_group: int | None = None

    @property
    def group_count(self) -> int:
        return len(self.members)

    @property
    def retained_instances(self) -> int:
        return int(self.sizes.sum()) if len(self.members) else 0


def condition_population(
    batch: PufBatch, known: CrpSet, min_group_size: int = 2
) -> GroupTable:
    """Group a batch by its response pattern on the known challenges."""
    n = len(known)
    if n > MAX_CONDITIONING_CRPS:
        raise FeasibilityError(
            f"conditioning on {n} challenges is out of reach: group patterns "
            f"multiply as 2^N and nothing survives the size cutoff past "
            f"N = {MAX_CONDITIONING_CRPS}"
        )
    if min_group_size < 1:
        raise ValueError("min_group_size must be at least 1")
    count = batch.count
    if n == 0:
        members = [np.arange(count, dtype=np.int64)]
        keys = np.zeros((1, 0), dtype="<u8")
        table = GroupTable(
            known=known,
            keys=keys,
            members=members,
            sizes=np.array([count], dtype=np.int64),
            population=count,
            min_group_size=min_group_size,
            target_group=0 if known.responses is not None else None,
        )
        return table

    signs = response_block(batch, known.challenges)
    packed = pack_signs(signs).ravel()  # N <= 24 fits one word per row
    uniq, inverse, counts = np.unique(packed, return_inverse=True, return_counts=True)
    order = np.argsort(inverse, kind="stable")
    splits = np.cumsum(counts)[:-1]
    all_members = np.split(order.astype(np.int64), splits)

    keep = counts >= min_group_size
    members = [m for m, ok in zip(all_members, keep) if ok]
    sizes = counts[keep].astype(np.int64)
    keys = uniq[keep].reshape(-1, 1).astype("<u8")

    target = None
    if known.responses is not None:
        want = int(pack_signs(known.responses[None, :]).ravel()[0])
        hits = np.flatnonzero(keys.ravel() == want)
        target = int(hits[0]) if hits.size else None

    return GroupTable(
        known=known,
        keys=keys,
        members=members,
        sizes=sizes,
        population=count,
        min_group_size=min_group_size,
        target_group=target,
    )


def estimate_standard_error(abs_means: np.ndarray, weights: np.ndarray) -> float:
    """Standard error of the weighted mean-absolute-bias aggregate.

    ``abs_means`` is (groups, challenges); ``weights`` one weight per
    group (normalized here). With several challenge columns the SE comes
    from the spread of the per-challenge aggregate, shrinking as
    1/sqrt(columns); a single column falls back to the between-group
    spread. The returned value is on the bias scale.
    """
    a = np.asarray(abs_means, dtype=np.float64)
    if a.ndim != 2:
        raise ValueError("abs_means must be 2-D (groups x challenges)")
    t, m = a.shape
    if t * m < 2:
        raise ValueError("need at least two cells to estimate a standard error")
    w = np.asarray(weights, dtype=np.float64)
    if w.shape != (t,):
        raise ValueError(f"expected {t} weights, got shape {w.shape}")
    if np.any(w < 0) or w.sum() <= 0:
        raise ValueError("weights must be non-negative and not all zero")
    w = w / w.sum()
    v = w @ a
    if m >= 2:
        return float(v.std(ddof=1) / np.sqrt(m))
    spread = float(np.sqrt(np.sum(w * (a[:, 0] - v[0]) ** 2) * t / (t - 1)))
    return spread * float(np.sqrt(np.sum(w**2)))


@dataclass
class AdvantageEstimate:
    """One advantage measurement with its provenance.

    ``advantage`` is half of ``bias`` by construction and
    ``standard_error`` is on the advantage scale; the bias-scale SE sits
    in the manifest alongside its between/within split.
    """

    advantage: float
    bias: float
    standard_error: float
    retained_groups: int
    retained_instances: int
    population: int
    eval_challenge_count: int
    weighting: str
    wall_time_s: float = 0.0
    manifest: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "advantage": self.advantage,
            "bias": self.bias,
            "standard_error": self.standard_error,
            "retained_groups": self.retained_groups,
            "retained_instances": self.retained_instances,
            "population": self.population,
            "eval_challenge_count": self.eval_challenge_count,
            "weighting": self.weighting,
            "wall_time_s": self.wall_time_s,
            "manifest": self.manifest,
        }


def _group_weights(sizes: np.ndarray, weighting: str) -> np.ndarray:
    if weighting == "uniform-over-groups":
        return np.full(len(sizes), 1.0 / len(sizes))
    if weighting == "instance-weighted":
        return sizes / sizes.sum()
    raise ValueError(f"unknown weighting {weighting!r}, expected one of {WEIGHTINGS}")


def estimate_advantage(
    batch: PufBatch,
    groups: GroupTable,
    eval_challenges: np.ndarray,
    weighting: str = "uniform-over-groups",
    conservative_se: bool = False,
    col_chunk: int = 128,
    threads: int = 1,
    responses: "ResponseMatrix | None" = None,
) -> AdvantageEstimate:
    """Weighted mean absolute group bias on fresh challenges, halved.

    Streams the evaluation challenges in column chunks; peak memory is
    population x col_chunk regardless of how many challenges are asked
    for. The per-challenge aggregate v_j is retained for the SE; a
    smoothed binomial floor keeps the SE positive when every group is
    unanimous on every challenge.

    ``responses`` may carry ``batch_eval(batch, eval_challenges)`` done
    ahead of time, so several conditionings of the same population reuse
    one evaluation pass.
    """
    if groups.population != batch.count:
        raise ValueError("group table was built from a different population")
    if not groups.members:
        raise FeasibilityError(
            "no consistency group reached the size cutoff; the transcript is "
            "infeasible at this population size"
        )
    ev = validate_challenges(eval_challenges, k=batch.arch.k)
    n_known = len(groups.known)
    if n_known:
        known_keys = {groups.known.challenges[i].tobytes() for i in range(n_known)}
        for j in range(ev.shape[0]):
            if ev[j].tobytes() in known_keys:
                raise ValueError(f"evaluation challenge {j} repeats a known challenge")
    if responses is not None:
        if responses.rows != batch.count or responses.challenge_count != ev.shape[0]:
            raise ValueError("precomputed responses do not match the population and challenges")
        col_chunk = max(64, (col_chunk // 64) * 64)  # packed unpacking is word-aligned

    t0 = time.perf_counter()
    sizes = groups.sizes.astype(np.float64)
    weights = _group_weights(groups.sizes, weighting)
    order = np.concatenate(groups.members)
    offsets = np.concatenate(([0], np.cumsum(groups.sizes)[:-1]))
    m = ev.shape[0]

    def eval_chunk(lo: int) -> tuple[np.ndarray, np.ndarray, float]:
        hi = min(lo + col_chunk, m)
        if responses is not None:
            block = responses.to_signs(lo, hi)
        else:
            block = response_block(batch, ev[lo:hi])
        sums = np.add.reduceat(block[order], offsets, axis=0, dtype=np.int64)
        a = np.abs(sums) / sizes[:, None]
        v = weights @ a
        cell_var = ((1.0 - a**2) + 1.0 / sizes[:, None]) / sizes[:, None]
        return v, a.sum(axis=1), float(((weights**2)[:, None] * cell_var).sum())

    starts = list(range(0, m, col_chunk))
    v = np.empty(m)
    group_bias_sum = np.zeros(len(groups.members))
    floor_sum = 0.0
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futures = [pool.submit(eval_chunk, lo) for lo in starts]
            # merge in submission order so reruns stay bit-identical
            for lo, fut in zip(starts, futures):
                vc, gb, fl = fut.result()
                v[lo : lo + len(vc)] = vc
                group_bias_sum += gb
                floor_sum += fl
    else:
        for lo in starts:
            vc, gb, fl = eval_chunk(lo)
            v[lo : lo + len(vc)] = vc
            group_bias_sum += gb
            floor_sum += fl

    bias = float(v.mean())
    se_between = float(v.std(ddof=1) / np.sqrt(m)) if m >= 2 else 0.0
    se_floor = float(np.sqrt(floor_sum)) / m
    se_bias = float(np.hypot(se_between, se_floor))
    if conservative_se:
        se_bias *= 1.5
    wall = time.perf_counter() - t0

    manifest = {
        "bias_standard_error": se_bias,
        "se_between_challenges": se_between,
        "se_binomial_floor": se_floor,
        "conservative_se": conservative_se,
        "group_bias": (group_bias_sum / m).tolist() if len(groups.members) <= 64 else None,
        "min_group_size": groups.min_group_size,
        "n_known": n_known,
    }
    return AdvantageEstimate(
        advantage=bias / 2.0,
        bias=bias,
        standard_error=se_bias / 2.0,
        retained_groups=groups.group_count,
        retained_instances=groups.retained_instances,
        population=groups.population,
        eval_challenge_count=m,
        weighting=weighting,
        wall_time_s=wall,
        manifest=manifest,
    )


def signed_means(
    batch: PufBatch,
    challenges: np.ndarray,
    rows: np.ndarray | None = None,
    col_chunk: int = 256,
) -> np.ndarray:
    """Signed response mean per challenge over a row subset (or everyone)."""
    ev = validate_challenges(challenges, k=batch.arch.k)
    m = ev.shape[0]
    out = np.empty(m)
    denom = batch.count if rows is None else len(rows)
    for lo in range(0, m, col_chunk):
        block = response_block(batch, ev[lo : lo + col_chunk])
        if rows is not None:
            block = block[rows]
        out[lo : lo + block.shape[1]] = block.sum(axis=0, dtype=np.int64) / denom
    return out


# ---------------------------------------------------------------------------
# Challenge sampling.


def _all_challenges(k: int) -> np.ndarray:
    ints = np.arange(1 << k, dtype=np.uint32)
    bits = (ints[:, None] >> np.arange(k, dtype=np.uint32)[None, :]) & 1
    return (2 * bits.astype(np.int8) - 1)


def sample_distinct_challenges(k: int, count: int, rng: np.random.Generator) -> np.ndarray:
    """Uniformly draw ``count`` pairwise-distinct challenges."""
    if count == 0:
        return np.zeros((0, k), dtype=np.int8)
    if k <= 30 and count > (1 << k):
        raise FeasibilityError(f"cannot draw {count} distinct challenges with k = {k}")
    rows = []
    seen: set[bytes] = set()
    while len(rows) < count:
        draw = rng.choice(np.array([-1, 1], dtype=np.int8), size=(count - len(rows), k))
        for row in draw:
            key = row.tobytes()
            if key not in seen:
                seen.add(key)
                rows.append(row)
    return np.stack(rows)


def sample_eval_challenges(
    k: int, count: int, rng: np.random.Generator, exclude: np.ndarray | None = None
) -> np.ndarray:
    """Draw evaluation challenges, rejecting any row present in ``exclude``.

    Repeats among the drawn challenges are allowed; only overlap with the
    excluded transcript is rejected, so small challenge spaces still
    support many evaluation draws.
    """
    banned = set()
    if exclude is not None and exclude.size:
        ex = validate_challenges(exclude, k=k)
        banned = {ex[i].tobytes() for i in range(ex.shape[0])}
        if k <= 30 and len(banned) >= (1 << k):
            raise FeasibilityError("every challenge is excluded; nothing left to evaluate")
    out = np.empty((count, k), dtype=np.int8)
    filled = 0
    while filled < count:
        draw = rng.choice(np.array([-1, 1], dtype=np.int8), size=(count - filled, k))
        if banned:
            ok = np.array([row.tobytes() not in banned for row in draw], dtype=bool)
            draw = draw[ok]
        out[filled : filled + draw.shape[0]] = draw
        filled += draw.shape[0]
    return out


# ---------------------------------------------------------------------------
# End-to-end games.


def _spawn_seeds(seed: int) -> tuple[np.random.Generator, int, np.random.Generator]:
    """Split one seed into (challenge rng, batch seed, eval rng)."""
    c_ss, b_ss, e_ss = np.random.SeedSequence(seed).spawn(3)
    batch_seed = int(b_ss.generate_state(1, np.uint64)[0])
    return np.random.default_rng(c_ss), batch_seed, np.random.default_rng(e_ss)


def _finish_manifest(est: AdvantageEstimate, arch: Architecture, extra: dict) -> None:
    est.manifest.update(extra)
    est.manifest["arch"] = arch.to_dict()
    est.manifest["version"] = __version__
    if arch.arch == "ct":
        est.manifest["ct_slicing"] = ct_slicing(arch.k)


def run_game(
    arch: Architecture,
    n_known: int,
    n_puf: int,
    m_eval: int,
    seed: int,
    weighting: str = "uniform-over-groups",
    min_group_size: int = 2,
    conservative_se: bool = False,
    threads: int = 1,
    col_chunk: int = 128,
    keep_batch: bool = False,
) -> AdvantageEstimate | tuple[AdvantageEstimate, PufBatch]:
    """Draw everything from one seed and estimate the advantage.

    The seed splits into three independent streams (known challenges,
    instance weights, evaluation challenges), so any single component
    can be reproduced in isolation.
    """
    if n_puf < MIN_POPULATION:
        raise ValueError(f"population must be at least {MIN_POPULATION}")
    if m_eval < 1:
        raise ValueError("need at least one evaluation challenge")
    if n_known < 0:
        raise ValueError("n_known must be non-negative")
    t0 = time.perf_counter()
    c_rng, batch_seed, e_rng = _spawn_seeds(seed)
    known = CrpSet(sample_distinct_challenges(arch.k, n_known, c_rng))
    batch = sample_batch(arch, n_puf, batch_seed)
    groups = condition_population(batch, known, min_group_size=min_group_size)
    ev = sample_eval_challenges(arch.k, m_eval, e_rng, exclude=known.challenges)
    est = estimate_advantage(
        batch,
        groups,
        ev,
        weighting=weighting,
        conservative_se=conservative_se,
        col_chunk=col_chunk,
        threads=threads,
    )
    est.wall_time_s = time.perf_counter() - t0
    _finish_manifest(
        est, arch, {"seed": seed, "batch_seed": batch_seed, "n_puf": n_puf, "m_eval": m_eval}
    )
    if keep_batch:
        return est, batch
    return est


def evaluate_transcript(
    arch: Architecture,
    transcript: CrpSet,
    eval_challenges: np.ndarray,
    n_puf: int,
    seed: int,
    weighting: str = "uniform-over-groups",
    min_group_size: int = 2,
    conservative_se: bool = False,
    threads: int = 1,
    col_chunk: int = 128,
) -> AdvantageEstimate:
    """Estimate the advantage conditioned on one explicit transcript.

    Unlike ``run_game`` this keeps only the single group matching the
    transcript's stated responses, which is the literal conditional-
    probability experiment.
    """
    if transcript.responses is None:
        raise ValueError("transcript needs responses to condition on")
    if n_puf < MIN_POPULATION:
        raise ValueError(f"population must be at least {MIN_POPULATION}")
    t0 = time.perf_counter()
    _, batch_seed, _ = _spawn_seeds(seed)
    batch = sample_batch(arch, n_puf, batch_seed)
    groups = condition_population(batch, transcript, min_group_size=min_group_size)
    if groups.target_group is None:
        raise FeasibilityError(
            "no simulated instance matches the transcript responses; the "
            "transcript is infeasible (or the population is too small)"
        )
    idx = groups.target_group
    only = GroupTable(
        known=groups.known,
        keys=groups.keys[idx : idx + 1],
        members=[groups.members[idx]],
        sizes=groups.sizes[idx : idx + 1],
        population=groups.population,
        min_group_size=groups.min_group_size,
        target_group=0,
    )
    est = estimate_advantage(
        batch,
        only,
        eval_challenges,
        weighting=weighting,
        conservative_se=conservative_se,
        col_chunk=col_chunk,
        threads=threads,
    )
    est.wall_time_s = time.perf_counter() - t0
    _finish_manifest(
        est,
        arch,
        {
            "seed": seed,
            "batch_seed": batch_seed,
            "n_puf": n_puf,
            "m_eval": int(np.atleast_2d(eval_challenges).shape[0]),
            "transcript_group_size": int(only.sizes[0]),
        },
    )
    return est
