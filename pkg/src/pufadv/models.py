"""Delay-based PUF response models.

Challenges and responses live in {-1, +1} (int8 throughout). A challenge
of k stage bits maps to a length-k feature vector by suffix products,
x_i = prod_{j >= i} c_j, which linearizes the additive delay model: an
arbiter chain responds sign(w . x). sign(0) is +1 everywhere so scalar
and batched evaluation agree bit for bit.

Two evaluation paths exist on purpose. The scalar model classes mirror
the physical designs one instance at a time and are written as plain
loops; ``PufBatch`` holds the weights of many instances of a single
architecture and evaluates them vectorized. Tests hold one against the
other, so keep the implementations independent.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from concurrent.futures import ThreadPoolExecutor

import numpy as np

ARCHES = ("apuf", "xor", "ff", "ffxor", "ct")

# Mode codes for the configurable-tristate design, in dispatch order.
CT_MODE_APUF = 0
CT_MODE_RING = 1
CT_MODE_RING_PAIR = 2
CT_MODE_OSC = 3


def sgn(a) -> np.ndarray:
    """Sign in {-1, +1} with sgn(0) = +1."""
    return np.where(np.asarray(a) >= 0, 1, -1).astype(np.int8)


def to_features(challenges: np.ndarray) -> np.ndarray:
    """Suffix-product parity features of +-1 challenge bits (last axis)."""
    c = np.asarray(challenges)
    return np.flip(np.cumprod(np.flip(c, axis=-1), axis=-1), axis=-1).astype(c.dtype)


def from_features(features: np.ndarray) -> np.ndarray:
    """Inverse of ``to_features``: c_i = x_i * x_{i+1}, c_k = x_k."""
    x = np.asarray(features)
    c = np.empty_like(x)
    c[..., :-1] = x[..., :-1] * x[..., 1:]
    c[..., -1] = x[..., -1]
    return c


def validate_challenges(challenges, k: int | None = None) -> np.ndarray:
    """Coerce to a C-contiguous (m, k) int8 matrix of +-1 entries."""
    c = np.ascontiguousarray(challenges, dtype=np.int8)
    if c.ndim == 1:
        c = c[None, :]
    if c.ndim != 2:
        raise ValueError(f"challenges must be 1-D or 2-D, got shape {c.shape}")
    if k is not None and c.shape[1] != k:
        raise ValueError(f"expected {k} stages per challenge, got {c.shape[1]}")
    if not np.all(np.abs(c) == 1):
        raise ValueError("challenge entries must be -1 or +1")
    return c


@dataclass(frozen=True)
class Architecture:
    """Architecture descriptor: family tag plus composition knobs.

    ``n`` counts XORed chains (xor / ffxor only). ``f1`` and ``f2`` are
    the 1-based feed-forward tap and injection stages; the injection
    stage's weight takes part in both partial sums, matching the
    sign-nesting definition of the feed-forward chain.
    """

    arch: str
    k: int
    n: int = 1
    f1: int | None = None
    f2: int | None = None

    def __post_init__(self):
        if self.arch not in ARCHES:
            raise ValueError(f"unknown architecture {self.arch!r}, expected one of {ARCHES}")
        if self.k < 1:
            raise ValueError("k must be positive")
        if self.n < 1:
            raise ValueError("n must be positive")
        if self.arch in ("apuf", "ff", "ct") and self.n != 1:
            raise ValueError(f"{self.arch} has a single chain, n must be 1")
        if self.arch in ("ff", "ffxor"):
            if self.k < 3:
                raise ValueError("feed-forward chains need k >= 3")
            if self.f1 is None:
                object.__setattr__(self, "f1", self.k // 3)
            if self.f2 is None:
                object.__setattr__(self, "f2", 2 * (self.k // 3))
            if not (1 <= self.f1 <= self.f2 <= self.k):
                raise ValueError(f"need 1 <= f1 <= f2 <= k, got f1={self.f1} f2={self.f2} k={self.k}")
        else:
            if self.f1 is not None or self.f2 is not None:
                raise ValueError(f"f1/f2 only apply to feed-forward architectures, not {self.arch}")
            if self.arch == "ct" and self.k < 3:
                raise ValueError("ct routing needs k >= 3 for non-empty ring slices")

    @property
    def label(self) -> str:
        if self.arch == "apuf":
            return "apuf"
        if self.arch == "xor":
            return f"{self.n}-xor"
        if self.arch == "ff":
            return f"ff({self.f1},{self.f2})"
        if self.arch == "ffxor":
            return f"{self.n}-ffxor({self.f1},{self.f2})"
        return "ct"

    def to_dict(self) -> dict:
        return {"arch": self.arch, "k": self.k, "n": self.n, "f1": self.f1, "f2": self.f2}


# ---------------------------------------------------------------------------
# Scalar models, one instance at a time.


@dataclass(frozen=True)
class ArbiterModel:
    """Linear-threshold arbiter chain over parity features."""

    weights: np.ndarray

    def respond(self, challenge) -> int:
        c = validate_challenges(challenge, k=len(self.weights))[0]
        x = to_features(c)
        total = 0.0
        for w, xi in zip(self.weights, x):
            total += float(w) * float(xi)
        return 1 if total >= 0.0 else -1


@dataclass(frozen=True)
class XorModel:
    """Product (XOR in +-1 algebra) of independent arbiter chains."""

    chains: tuple[ArbiterModel, ...]

    def respond(self, challenge) -> int:
        r = 1
        for chain in self.chains:
            r *= chain.respond(challenge)
        return r


@dataclass(frozen=True)
class FeedForwardModel:
    """Arbiter chain whose stage-f1 prefix sign feeds the tail.

    Response is sign(sum_{i<=f2} w_i x_i + s * sum_{i>=f2} w_i x_i) with
    s the sign of the first f1 terms; stage f2 contributes to both sums.
    """

    weights: np.ndarray
    f1: int
    f2: int

    def respond(self, challenge) -> int:
        c = validate_challenges(challenge, k=len(self.weights))[0]
        x = to_features(c).astype(np.float64)
        w = self.weights
        inner = 0.0
        for i in range(self.f1):
            inner += float(w[i]) * x[i]
        s = 1.0 if inner >= 0.0 else -1.0
        total = 0.0
        for i in range(self.f2):
            total += float(w[i]) * x[i]
        for i in range(self.f2 - 1, len(w)):
            total += s * float(w[i]) * x[i]
        return 1 if total >= 0.0 else -1


@dataclass(frozen=True)
class FeedForwardXorModel:
    chains: tuple[FeedForwardModel, ...]

    def respond(self, challenge) -> int:
        r = 1
        for chain in self.chains:
            r *= chain.respond(challenge)
        return r


def ct_ring_one_slice(k: int) -> slice:
    return slice(0, k // 3)


def ct_ring_two_slice(k: int) -> slice:
    return slice(k // 3, 2 * (k // 3))


def ct_slicing(k: int) -> dict:
    """Human-readable record of the ct sub-challenge slices, for manifests."""
    return {
        "apuf_mode": f"c[0:{k}:2]",
        "ring_one": f"c[0:{k // 3}]",
        "ring_two": f"c[{k // 3}:{2 * (k // 3)}]",
    }


def ct_mode(challenges: np.ndarray) -> np.ndarray:
    """Mode routing by challenge parity counts, one code per row.

    Counting set bits under +1 -> 0, -1 -> 1: a zero odd-position sum
    selects the arbiter mode; otherwise even/even parities select the
    ring pair, even/odd selects the oscillator. Rows with odd
    even-position parity match no dedicated condition and share the
    single-ring route.
    """
    c = np.asarray(challenges)
    bits = (1 - c) // 2
    s_odd = bits[..., 1::2].sum(axis=-1)
    s_even = bits[..., 0::2].sum(axis=-1)
    mode = np.full(c.shape[:-1], CT_MODE_RING, dtype=np.int8)
    even_even = (s_even % 2 == 0) & (s_odd % 2 == 0)
    mode[even_even] = CT_MODE_RING_PAIR
    mode[(s_even % 2 == 0) & (s_odd % 2 == 1)] = CT_MODE_OSC
    mode[s_odd == 0] = CT_MODE_APUF  # takes precedence over the parity rules
    return mode


@dataclass(frozen=True)
class CtModel:
    """Composite design routing among sub-circuits by challenge parity.

    The inner arbiter chain produces r_a on the raw challenge; the
    mode circuit then sees the sign-flipped challenge c * r_a and the
    final response is its answer multiplied by r_a. Ring and oscillator
    modes threshold raw challenge bits (no parity features); the apuf
    mode is a regular arbiter over the even-position sub-challenge.
    """

    arbiter_stage: ArbiterModel
    apuf_mode: ArbiterModel
    br_mode: tuple[np.ndarray, np.ndarray]
    ro_mode: tuple[np.ndarray, np.ndarray]

    def respond(self, challenge) -> int:
        k = len(self.arbiter_stage.weights)
        c = validate_challenges(challenge, k=k)[0]
        r_a = self.arbiter_stage.respond(c)
        return self._mode_response(c * np.int8(r_a)) * r_a

    def _mode_response(self, c: np.ndarray) -> int:
        bits = [(1 - int(b)) // 2 for b in c]
        s_odd = sum(bits[1::2])
        s_even = sum(bits[0::2])
        if s_odd == 0:
            return self.apuf_mode.respond(c[0::2])
        r1 = c[ct_ring_one_slice(len(c))].astype(np.float64)
        r2 = c[ct_ring_two_slice(len(c))].astype(np.float64)
        w1a, w1b = self.br_mode
        if s_even % 2 == 0 and s_odd % 2 == 0:
            return int(sgn(np.dot(w1a, r1))) * int(sgn(np.dot(w1b, r2)))
        if s_even % 2 == 0 and s_odd % 2 == 1:
            wa, wb = self.ro_mode
            return int(sgn(np.dot(wa, r1) - np.dot(wb, r2)))
        return int(sgn(np.dot(w1a, r1) + np.dot(w1b, r2)))


ScalarModel = ArbiterModel | XorModel | FeedForwardModel | FeedForwardXorModel | CtModel


# ---------------------------------------------------------------------------
# Batched populations.


@dataclass
class PufBatch:
    """Weights of ``count`` instances of one architecture.

    ``params`` maps layout names to float64 arrays whose first axis is
    the instance index. ``seed`` is provenance only; batches restored
    from disk carry None.
    """

    arch: Architecture
    params: dict[str, np.ndarray]
    seed: int | None = None

    @property
    def count(self) -> int:
        return next(iter(self.params.values())).shape[0]

    def instance(self, i: int) -> ScalarModel:
        a = self.arch
        if a.arch == "apuf":
            return ArbiterModel(self.params["w"][i])
        if a.arch == "xor":
            return XorModel(tuple(ArbiterModel(wj) for wj in self.params["w"][i]))
        if a.arch == "ff":
            return FeedForwardModel(self.params["w"][i], a.f1, a.f2)
        if a.arch == "ffxor":
            return FeedForwardXorModel(
                tuple(FeedForwardModel(wj, a.f1, a.f2) for wj in self.params["w"][i])
            )
        return CtModel(
            arbiter_stage=ArbiterModel(self.params["arb"][i]),
            apuf_mode=ArbiterModel(self.params["apuf"][i]),
            br_mode=(self.params["br_a"][i], self.params["br_b"][i]),
            ro_mode=(self.params["ro_a"][i], self.params["ro_b"][i]),
        )


# Parameter draw order per architecture is part of the on-disk format;
# never reorder.
def sample_batch(arch: Architecture, count: int, seed) -> PufBatch:
    """Draw ``count`` independent instances with standard normal weights."""
    if count < 1:
        raise ValueError("count must be positive")
    rng = np.random.default_rng(seed)
    k, n = arch.k, arch.n
    if arch.arch in ("apuf", "ff"):
        params = {"w": rng.standard_normal((count, k))}
    elif arch.arch in ("xor", "ffxor"):
        params = {"w": rng.standard_normal((count, n, k))}
    else:
        n_even = len(range(0, k, 2))
        n_ring = k // 3
        params = {
            "arb": rng.standard_normal((count, k)),
            "apuf": rng.standard_normal((count, n_even)),
            "br_a": rng.standard_normal((count, n_ring)),
            "br_b": rng.standard_normal((count, n_ring)),
            "ro_a": rng.standard_normal((count, n_ring)),
            "ro_b": rng.standard_normal((count, n_ring)),
        }
    seed_val = seed if isinstance(seed, int) else None
    return PufBatch(arch=arch, params=params, seed=seed_val)


def _block_linear(w: np.ndarray, feats_t: np.ndarray) -> np.ndarray:
    return sgn(w @ feats_t)


def _block_xor(w: np.ndarray, feats_t: np.ndarray) -> np.ndarray:
    out = np.ones((w.shape[0], feats_t.shape[1]), dtype=np.int8)
    for j in range(w.shape[1]):
        out *= sgn(w[:, j] @ feats_t)
    return out


def _block_ff(w: np.ndarray, feats_t: np.ndarray, f1: int, f2: int) -> np.ndarray:
    head = w[:, :f2] @ feats_t[:f2]
    head += sgn(w[:, :f1] @ feats_t[:f1]) * (w[:, f2 - 1:] @ feats_t[f2 - 1:])
    return sgn(head)


def _block_ffxor(w: np.ndarray, feats_t: np.ndarray, f1: int, f2: int) -> np.ndarray:
    out = np.ones((w.shape[0], feats_t.shape[1]), dtype=np.int8)
    for j in range(w.shape[1]):
        out *= _block_ff(w[:, j], feats_t, f1, f2)
    return out


def _block_ct_mode(params: dict, challenges: np.ndarray) -> np.ndarray:
    """Mode-circuit response of every instance on raw challenges (m, k)."""
    k = challenges.shape[1]
    mode = ct_mode(challenges)
    count = params["arb"].shape[0]
    out = np.empty((count, challenges.shape[0]), dtype=np.int8)
    r1s, r2s = ct_ring_one_slice(k), ct_ring_two_slice(k)
    for md in (CT_MODE_APUF, CT_MODE_RING, CT_MODE_RING_PAIR, CT_MODE_OSC):
        cols = np.flatnonzero(mode == md)
        if cols.size == 0:
            continue
        sub = challenges[cols].astype(np.float64)
        if md == CT_MODE_APUF:
            out[:, cols] = sgn(params["apuf"] @ to_features(sub[:, 0::2]).T)
        elif md == CT_MODE_RING:
            w = np.concatenate([params["br_a"], params["br_b"]], axis=1)
            cc = np.concatenate([sub[:, r1s], sub[:, r2s]], axis=1)
            out[:, cols] = sgn(w @ cc.T)
        elif md == CT_MODE_RING_PAIR:
            out[:, cols] = sgn(params["br_a"] @ sub[:, r1s].T) * sgn(params["br_b"] @ sub[:, r2s].T)
        else:
            out[:, cols] = sgn(params["ro_a"] @ sub[:, r1s].T - params["ro_b"] @ sub[:, r2s].T)
    return out


def _block_ct(params: dict, challenges: np.ndarray) -> np.ndarray:
    feats_t = to_features(challenges.astype(np.float64)).T
    r_arb = sgn(params["arb"] @ feats_t)
    # The mode circuit sees c * r_arb, which differs per instance; evaluating
    # both sign flips once is far cheaper than per-instance dispatch.
    r_plus = _block_ct_mode(params, challenges)
    r_minus = _block_ct_mode(params, -challenges)
    return (np.where(r_arb == 1, r_plus, r_minus) * r_arb).astype(np.int8)


def response_block(batch: PufBatch, challenges: np.ndarray, rows: slice | None = None) -> np.ndarray:
    """Dense +-1 responses, instances down the rows, challenges across.

    ``rows`` restricts to an instance slice. Memory scales with
    rows x challenges; callers chunk one of the two axes.
    """
    a = batch.arch
    c = validate_challenges(challenges, k=a.k)
    rows = rows if rows is not None else slice(None)
    if a.arch == "ct":
        params = {name: arr[rows] for name, arr in batch.params.items()}
        return _block_ct(params, c)
    w = batch.params["w"][rows]
    feats_t = np.ascontiguousarray(to_features(c.astype(np.float64)).T)
    if a.arch == "apuf":
        return _block_linear(w, feats_t)
    if a.arch == "xor":
        return _block_xor(w, feats_t)
    if a.arch == "ff":
        return _block_ff(w, feats_t, a.f1, a.f2)
    return _block_ffxor(w, feats_t, a.f1, a.f2)


@dataclass
class ResponseMatrix:
    """Bit-packed +-1 response matrix, one uint64 word per 64 challenges.

    Bit j of a row's word j // 64 holds challenge j (LSB first), set for
    +1. Words use an explicit little-endian view so the layout does not
    depend on the host.
    """

    packed: np.ndarray
    challenge_count: int

    @classmethod
    def from_signs(cls, signs: np.ndarray) -> "ResponseMatrix":
        return cls(packed=pack_signs(signs), challenge_count=signs.shape[1])

    @property
    def rows(self) -> int:
        return self.packed.shape[0]

    def to_signs(self, col_start: int = 0, col_stop: int | None = None) -> np.ndarray:
        if col_stop is None:
            col_stop = self.challenge_count
        if col_start % 64 != 0:
            raise ValueError("column slices must start on a 64-bit word boundary")
        if not (0 <= col_start < col_stop <= self.challenge_count):
            raise ValueError(f"bad column range [{col_start}, {col_stop})")
        w0, w1 = col_start // 64, -(-col_stop // 64)
        chunk = np.ascontiguousarray(self.packed[:, w0:w1]).view("u1")
        bits = np.unpackbits(chunk, axis=1, bitorder="little")[:, : col_stop - col_start]
        return (2 * bits.astype(np.int8) - 1)


def pack_signs(signs: np.ndarray) -> np.ndarray:
    """Pack a +-1 matrix into (rows, ceil(cols / 64)) little-endian words."""
    signs = np.asarray(signs)
    if signs.ndim != 2:
        raise ValueError("expected a 2-D sign matrix")
    nbytes = -(-signs.shape[1] // 8)
    pad_to = -(-nbytes // 8) * 8
    packed8 = np.packbits(signs > 0, axis=1, bitorder="little")
    if pad_to != nbytes:
        packed8 = np.pad(packed8, ((0, 0), (0, pad_to - nbytes)))
    return np.ascontiguousarray(packed8).view("<u8")


def batch_eval(
    batch: PufBatch,
    challenges: np.ndarray,
    threads: int = 1,
    row_chunk: int = 65536,
) -> ResponseMatrix:
    """Evaluate every instance on every challenge, packed.

    Work is partitioned over instance rows; chunks write disjoint row
    ranges of the output so threads need no locks.
    """
    c = validate_challenges(challenges, k=batch.arch.k)
    count, m = batch.count, c.shape[0]
    out = np.zeros((count, -(-m // 64)), dtype="<u8")

    def run(lo: int) -> None:
        hi = min(lo + row_chunk, count)
        out[lo:hi] = pack_signs(response_block(batch, c, rows=slice(lo, hi)))

    starts = range(0, count, row_chunk)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(run, starts))
    else:
        for lo in starts:
            run(lo)
    return ResponseMatrix(packed=out, challenge_count=m)


# ---------------------------------------------------------------------------
# Instance archives.
#
# Header: magic 'PUFB', arch code u8, 3 pad bytes, then k, n, f1, f2 as
# u32 and the instance count as u64, all little-endian (32 bytes total).
# Parameter matrices follow row-major as little-endian f8, in the same
# order sample_batch draws them.

_MAGIC = b"PUFB"
_HEADER = struct.Struct("<4sB3xIIIIQ")
_ARCH_CODES = {"apuf": 1, "xor": 2, "ff": 3, "ffxor": 4, "ct": 5}
_CODE_ARCHES = {v: k for k, v in _ARCH_CODES.items()}
_CT_PARAM_ORDER = ("arb", "apuf", "br_a", "br_b", "ro_a", "ro_b")


def save_batch(batch: PufBatch, path) -> None:
    a = batch.arch
    header = _HEADER.pack(
        _MAGIC, _ARCH_CODES[a.arch], a.k, a.n, a.f1 or 0, a.f2 or 0, batch.count
    )
    order = _CT_PARAM_ORDER if a.arch == "ct" else ("w",)
    with open(path, "wb") as fh:
        fh.write(header)
        for name in order:
            fh.write(np.ascontiguousarray(batch.params[name], dtype="<f8").tobytes())


def load_batch(path) -> PufBatch:
    with open(path, "rb") as fh:
        magic, code, k, n, f1, f2, count = _HEADER.unpack(fh.read(_HEADER.size))
        if magic != _MAGIC:
            raise ValueError(f"not an instance archive: bad magic {magic!r}")
        if code not in _CODE_ARCHES:
            raise ValueError(f"unknown architecture code {code}")
        tag = _CODE_ARCHES[code]
        arch = Architecture(
            arch=tag,
            k=k,
            n=n,
            f1=f1 if tag in ("ff", "ffxor") else None,
            f2=f2 if tag in ("ff", "ffxor") else None,
        )
        params: dict[str, np.ndarray] = {}
        if tag in ("apuf", "ff"):
            shapes = {"w": (count, k)}
        elif tag in ("xor", "ffxor"):
            shapes = {"w": (count, n, k)}
        else:
            n_even, n_ring = len(range(0, k, 2)), k // 3
            shapes = {
                "arb": (count, k),
                "apuf": (count, n_even),
                "br_a": (count, n_ring),
                "br_b": (count, n_ring),
                "ro_a": (count, n_ring),
                "ro_b": (count, n_ring),
            }
        for name, shape in shapes.items():
            want = int(np.prod(shape))
            flat = np.fromfile(fh, dtype="<f8", count=want)
            if flat.size != want:
                raise ValueError(f"archive truncated while reading {name!r}")
            params[name] = flat.reshape(shape).astype(np.float64)
        if fh.read(1):
            raise ValueError("trailing bytes after the last parameter matrix")
    return PufBatch(arch=arch, params=params, seed=None)
