"""Splittable random streams and walk-on-spheres path simulation.

Randomness is counter based: every sample owns an independent stream
addressed by a :class:`StreamKey` (master seed, context tag, level, sample
index), and any position inside any stream can be generated directly without
producing predecessors. The generator is Philox4x64-10, implemented here as
a vectorized kernel over numpy uint64 arrays; it is bit-for-bit the same
function numpy's own ``Philox`` bit generator computes (see the tests), but
random access by (key, counter) lets whole batches of paths draw their next
jump direction in one array operation.

Directions are unit vectors from normalized Box-Muller gaussian draws, so
every path step consumes a fixed number of counter positions. Consequence:
a walk's trajectory depends only on its key, never on thread count, batch
membership, or execution order.
"""

from __future__ import annotations

import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .geometry import Domain, as_point

__all__ = [
    "StreamKey",
    "Stream",
    "WalkResult",
    "MlPair",
    "BatchResult",
    "StepLimitExceeded",
    "derive_stream",
    "uniform_direction",
    "wos_walk",
    "ml_pair",
    "run_many",
    "trace_csv",
    "DEFAULT_MAX_STEPS",
]

# A path this long means the stopping width is unreachable or the stream is
# pathological; turning it into an error keeps hangs diagnosable.
DEFAULT_MAX_STEPS = 10_000_000

# Fixed batch width for the vectorized engine. Results are assembled by
# sample index, so this is a throughput knob only; it must stay constant to
# keep artifacts byte-stable across releases of the same version.
_CHUNK = 4096

# Philox4x64-10 round and Weyl constants.
_M0 = np.uint64(0xD2E7470EE14C6C93)
_M1 = np.uint64(0xCA5A826395121157)
_W0 = np.uint64(0x9E3779B97F4A7C15)
_W1 = np.uint64(0xBB67AE8584CAA73B)
_MASK32 = np.uint64(0xFFFFFFFF)
_S32 = np.uint64(32)
_S11 = np.uint64(11)
_U64ONE = np.uint64(1)

_INV53 = float(2.0 ** -53)
_TWOPI = 2.0 * math.pi


def _u64(value: int) -> np.uint64:
    # Exact conversion; the scalar constructor routes large ints through
    # float64 and loses low bits.
    return np.array(value, dtype=np.uint64)[()]


def _mulhilo(a, b):
    lo = a * b
    ahi = a >> _S32
    alo = a & _MASK32
    bhi = b >> _S32
    blo = b & _MASK32
    t = ahi * blo + ((alo * blo) >> _S32)
    w = alo * bhi + (t & _MASK32)
    hi = ahi * bhi + (t >> _S32) + (w >> _S32)
    return hi, lo


def philox4x64(c0, c1, c2, c3, k0, k1):
    """One Philox4x64-10 block: four uint64 words per counter.

    Arguments broadcast; uint64 wraparound is the intended arithmetic.
    """
    err = np.seterr(over="ignore")
    try:
        for rnd in range(10):
            if rnd > 0:
                k0 = k0 + _W0
                k1 = k1 + _W1
            hi0, lo0 = _mulhilo(_M0, c0)
            hi1, lo1 = _mulhilo(_M1, c2)
            c0, c1, c2, c3 = hi1 ^ c1 ^ k0, lo1, hi0 ^ c3 ^ k1, lo0
    finally:
        np.seterr(**err)
    return c0, c1, c2, c3


@dataclass(frozen=True)
class StreamKey:
    """Address of one random stream.

    ``master_seed`` is the user-facing 64-bit seed; ``context`` tags the
    study or estimator activity (32 bits); ``level`` is the discretization
    level (16 bits); ``sample_index`` numbers the sample within its activity.
    Distinct keys yield independent streams, identical keys identical ones.
    """

    master_seed: int
    context: int = 0
    level: int = 0
    sample_index: int = 0

    def __post_init__(self):
        if not 0 <= self.master_seed < 2 ** 64:
            raise ValueError("master_seed must fit in 64 unsigned bits")
        if not 0 <= self.context < 2 ** 32:
            raise ValueError("context must fit in 32 unsigned bits")
        if not 0 <= self.level < 2 ** 16:
            raise ValueError("level must fit in 16 unsigned bits")
        if not 0 <= self.sample_index < 2 ** 64:
            raise ValueError("sample_index must fit in 64 unsigned bits")


def _key_words(master_seed: int, context: int, level: int):
    # (master_seed, context, level) pack injectively into the 128-bit Philox
    # key; the sample index occupies its own counter word.
    return _u64(master_seed), _u64((context << 16) | level)


def _raw_lanes(k0, k1, words, j0, n):
    """Uniform uint64 lanes [j0, j0+n) for each stream word in ``words``.

    Lane j lives in Philox block j//4 at position j%4; blocks are generated
    in one vectorized call over a (rows, blocks) counter grid.
    """
    rows = len(words)
    j0 = np.broadcast_to(np.asarray(j0, dtype=np.int64), (rows,))
    start = j0 % 4
    nblk = (int(start.max(initial=0)) + n + 3) // 4
    c0 = ((j0 // 4)[:, None] + np.arange(nblk, dtype=np.int64)).astype(np.uint64)
    zero = np.zeros_like(c0)
    o0, o1, o2, o3 = philox4x64(c0, words[:, None], zero, zero, k0, k1)
    lanes = np.empty((rows, 4 * nblk), dtype=np.uint64)
    lanes[:, 0::4] = o0
    lanes[:, 1::4] = o1
    lanes[:, 2::4] = o2
    lanes[:, 3::4] = o3
    idx = start[:, None] + np.arange(n)[None, :]
    return np.take_along_axis(lanes, idx, axis=1)


def _lanes_to_normals(lanes):
    """Box-Muller on consecutive lane pairs; fixed two-lanes-per-normal-pair.

    Even lanes feed the radial log term via the (0,1] mapping, odd lanes the
    angle via [0,1).
    """
    u_log = ((lanes[..., 0::2] >> _S11) + _U64ONE) * _INV53
    u_ang = (lanes[..., 1::2] >> _S11) * _INV53
    r = np.sqrt(-2.0 * np.log(u_log))
    theta = _TWOPI * u_ang
    out = np.empty(lanes.shape[:-1] + (lanes.shape[-1],), dtype=np.float64)
    out[..., 0::2] = r * np.cos(theta)
    out[..., 1::2] = r * np.sin(theta)
    return out


def _lanes_per_direction(dim: int) -> int:
    return 2 * ((dim + 1) // 2)


def _directions(dim, k0, k1, words, j0):
    """One unit direction per stream word, consuming the lanes at ``j0``."""
    lanes = _raw_lanes(k0, k1, words, j0, _lanes_per_direction(dim))
    g = _lanes_to_normals(lanes)[:, :dim]
    n2 = g[:, 0] * g[:, 0]
    for j in range(1, dim):
        n2 = n2 + g[:, j] * g[:, j]
    norm = np.sqrt(n2)
    # A zero gaussian vector has probability ~2^-53 per draw; fall back to
    # the first axis deterministically rather than divide by zero.
    degenerate = norm == 0.0
    if np.any(degenerate):
        g[degenerate] = 0.0
        g[degenerate, 0] = 1.0
        norm = np.where(degenerate, 1.0, norm)
    return g / norm[:, None]


class Stream:
    """Sequential view of one counter-based stream.

    Tracks the number of uniform lanes consumed so far; all draws are
    reproducible functions of (key, position).
    """

    def __init__(self, key: StreamKey):
        self.key = key
        self._k0, self._k1 = _key_words(key.master_seed, key.context, key.level)
        self._word = np.array([key.sample_index], dtype=np.uint64)
        self.pos = 0

    def uniforms(self, n: int) -> np.ndarray:
        """Next ``n`` uniforms on [0, 1)."""
        lanes = _raw_lanes(self._k0, self._k1, self._word, self.pos, int(n))
        self.pos += int(n)
        return (lanes[0] >> _S11) * _INV53

    def normals(self, n: int) -> np.ndarray:
        """Next ``n`` standard gaussians (consumes lanes in whole pairs)."""
        pairs = (int(n) + 1) // 2
        lanes = _raw_lanes(self._k0, self._k1, self._word, self.pos, 2 * pairs)
        self.pos += 2 * pairs
        return _lanes_to_normals(lanes)[0, : int(n)]

    def direction(self, dim: int) -> np.ndarray:
        """Next uniform unit vector on the (dim-1)-sphere."""
        g = _directions(dim, self._k0, self._k1, self._word, self.pos)
        self.pos += _lanes_per_direction(dim)
        return g[0]


def derive_stream(key: StreamKey) -> Stream:
    """Independent deterministic stream for ``key``; O(1) construction."""
    return Stream(key)


def uniform_direction(d: int, stream: Stream) -> np.ndarray:
    """Draw a uniformly distributed unit vector of length ``d``."""
    if d < 1:
        raise ValueError("dimension must be at least 1")
    return stream.direction(d)


class StepLimitExceeded(RuntimeError):
    """A path exceeded ``max_steps``; carries the offending sample."""

    def __init__(self, max_steps: int, sample_index: int, level: Optional[int] = None):
        self.max_steps = max_steps
        self.sample_index = sample_index
        self.level = level
        where = f" on level {level}" if level is not None else ""
        super().__init__(
            f"walk for sample {sample_index}{where} exceeded {max_steps} steps; "
            f"the stopping width may be unreachable"
        )


@dataclass
class WalkResult:
    """Outcome of one walk: where it stopped, where that projects, how long
    it took. ``value`` is boundary data at the exit point, filled when the
    caller supplies a boundary condition."""

    stop_point: np.ndarray
    exit_point: np.ndarray
    steps: int
    value: Optional[float] = None
    trace: Optional[np.ndarray] = None


@dataclass
class MlPair:
    """A coupled coarse/fine observation of one walk (the fine path extends
    the coarse one; the coarse records are a prefix of the fine path)."""

    coarse: WalkResult
    fine: WalkResult
    diff: Optional[float] = None


@dataclass
class BatchResult:
    """Arrays for ``count`` walks recorded at each stopping width.

    ``stops``/``exits`` have shape (num_thresholds, count, dim); ``steps``
    has shape (num_thresholds, count). Row order is sample-index order.
    """

    thresholds: tuple
    stops: np.ndarray
    exits: np.ndarray
    steps: np.ndarray


def _check_thresholds(domain: Domain, x0: np.ndarray, thresholds) -> np.ndarray:
    thr = np.asarray(thresholds, dtype=np.float64)
    if thr.ndim != 1 or thr.size == 0:
        raise ValueError("need at least one stopping width")
    if np.any(thr <= 0.0):
        raise ValueError("stopping widths must be positive")
    if np.any(np.diff(thr) > 0.0):
        raise ValueError("stopping widths must be nonincreasing")
    d0 = domain.distance_to_boundary(x0)
    if thr[0] >= d0:
        raise ValueError(
            f"stopping width {thr[0]:g} is not below the start distance {d0:g}"
        )
    return thr


def _walk_chunk(domain, x0, thr, k0, k1, words, offsets, max_steps, level, trace=False):
    """Advance a batch of walks until every one has crossed every threshold.

    Per step, each active walk jumps its current boundary distance in a fresh
    uniform direction drawn from its own stream. Returns recorded positions
    and step counts per threshold, plus the per-step position history when
    tracing.
    """
    n = words.size
    dim = domain.dim
    nthr = thr.size
    lanes_per_step = _lanes_per_direction(dim)

    pos = np.tile(x0, (n, 1))
    dist = np.maximum(domain._dist(pos), 0.0)
    rec_pos = np.zeros((nthr, n, dim))
    rec_steps = np.zeros((nthr, n), dtype=np.int64)
    ptr = np.zeros(n, dtype=np.int64)
    alive = np.arange(n)
    history = [pos.copy()] if trace else None
    thr_guard = np.minimum(np.arange(nthr + 1), nthr - 1)

    t = 0
    while alive.size:
        if t >= max_steps:
            raise StepLimitExceeded(max_steps, int(words[alive[0]]), level)
        g = _directions(dim, k0, k1, words[alive], offsets[alive] + t * lanes_per_step)
        pos[alive] += dist[alive][:, None] * g
        t += 1
        dist[alive] = np.maximum(domain._dist(pos[alive]), 0.0)
        if trace:
            history.append(pos.copy())
        # One jump can cross several widths at once; record them all at the
        # same position, which realizes the first-crossing rule per width.
        while True:
            hit = (ptr[alive] < nthr) & (dist[alive] < thr[thr_guard[ptr[alive]]])
            if not hit.any():
                break
            rows = alive[hit]
            rec_pos[ptr[rows], rows] = pos[rows]
            rec_steps[ptr[rows], rows] = t
            ptr[rows] += 1
        alive = alive[ptr[alive] < nthr]
    return rec_pos, rec_steps, history


def run_many(
    domain: Domain,
    x0,
    thresholds: Sequence[float],
    master_seed: int,
    context: int = 0,
    level: int = 0,
    start_index: int = 0,
    count: int = 1,
    max_steps: int = DEFAULT_MAX_STEPS,
    threads: int = 1,
) -> BatchResult:
    """Run ``count`` independent walks, each recorded at every threshold.

    Sample ``i`` draws from the stream keyed by
    ``StreamKey(master_seed, context, level, start_index + i)``; results are
    written to slots in sample-index order, so the output is bitwise
    reproducible for any ``threads``.
    """
    x0 = as_point(x0, domain.dim)
    thr = _check_thresholds(domain, x0, thresholds)
    if count < 1:
        raise ValueError("count must be positive")
    StreamKey(master_seed, context, level, start_index + count - 1)  # range check
    k0, k1 = _key_words(master_seed, context, level)

    nthr = thr.size
    stops = np.empty((nthr, count, domain.dim))
    steps = np.empty((nthr, count), dtype=np.int64)
    spans = [(lo, min(lo + _CHUNK, count)) for lo in range(0, count, _CHUNK)]

    def work(span):
        lo, hi = span
        words = np.arange(start_index + lo, start_index + hi, dtype=np.uint64)
        offsets = np.zeros(hi - lo, dtype=np.int64)
        rec_pos, rec_steps, _ = _walk_chunk(
            domain, x0, thr, k0, k1, words, offsets, max_steps, level
        )
        return lo, hi, rec_pos, rec_steps

    if threads > 1 and len(spans) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(work, spans))
    else:
        results = [work(s) for s in spans]
    for lo, hi, rec_pos, rec_steps in results:
        stops[:, lo:hi] = rec_pos
        steps[:, lo:hi] = rec_steps

    exits = np.empty_like(stops)
    for k in range(nthr):
        exits[k] = domain._proj(stops[k])
    return BatchResult(tuple(thr.tolist()), stops, exits, steps)


def _single(domain, x0, thr, stream, max_steps, trace, level=None):
    x0 = as_point(x0, domain.dim)
    thr = _check_thresholds(domain, x0, thr)
    words = np.array([stream.key.sample_index], dtype=np.uint64)
    offsets = np.array([stream.pos], dtype=np.int64)
    rec_pos, rec_steps, history = _walk_chunk(
        domain, x0, thr, stream._k0, stream._k1, words, offsets, max_steps, level, trace
    )
    stream.pos += int(rec_steps[-1, 0]) * _lanes_per_direction(domain.dim)
    results = []
    for k in range(thr.size):
        stop = rec_pos[k, 0]
        results.append(
            WalkResult(
                stop_point=stop,
                exit_point=domain._proj(stop[None, :])[0],
                steps=int(rec_steps[k, 0]),
            )
        )
    if trace:
        results[-1].trace = np.stack([h[0] for h in history])
    return results


def wos_walk(
    domain: Domain,
    x0,
    eps: float,
    max_steps: int = DEFAULT_MAX_STEPS,
    stream: Stream = None,
    bc=None,
    trace: bool = False,
) -> WalkResult:
    """One walk-on-spheres path from ``x0`` until within ``eps`` of the
    boundary. The caller's boundary condition fills ``value`` when given.

    With ``trace=True`` the result carries the full position history, one
    row per step including the start.
    """
    if stream is None:
        raise ValueError("wos_walk needs a stream; use derive_stream(StreamKey(...))")
    (result,) = _single(domain, x0, [eps], stream, max_steps, trace)
    if bc is not None:
        result.value = float(bc(result.exit_point))
    return result


def ml_pair(
    domain: Domain,
    x0,
    eps_coarse: float,
    eps_fine: float,
    max_steps: int = DEFAULT_MAX_STEPS,
    stream: Stream = None,
    bc=None,
    trace: bool = False,
) -> MlPair:
    """One coupled pair: a single path recorded first at ``eps_coarse``,
    then continued (same stream, no reset) until ``eps_fine``.

    ``diff`` is boundary data at the fine exit minus at the coarse exit when
    ``bc`` is given. With ``eps_coarse == eps_fine`` the records coincide and
    the difference is exactly zero.
    """
    if stream is None:
        raise ValueError("ml_pair needs a stream; use derive_stream(StreamKey(...))")
    if eps_fine > eps_coarse:
        raise ValueError("eps_fine must not exceed eps_coarse")
    coarse, fine = _single(domain, x0, [eps_coarse, eps_fine], stream, max_steps, trace)
    pair = MlPair(coarse=coarse, fine=fine)
    if bc is not None:
        coarse.value = float(bc(coarse.exit_point))
        fine.value = float(bc(fine.exit_point))
        pair.diff = fine.value - coarse.value
    return pair


def trace_csv(domain: Domain, positions: np.ndarray) -> str:
    """Render one traced path as CSV with columns step, x1..xd, dist."""
    pts = np.asarray(positions, dtype=np.float64)
    dist = np.maximum(domain._dist(pts), 0.0)
    buf = io.StringIO()
    cols = ",".join(f"x{j + 1}" for j in range(domain.dim))
    buf.write(f"step,{cols},dist\n")
    for i in range(len(pts)):
        coords = ",".join(repr(float(v)) for v in pts[i])
        buf.write(f"{i},{coords},{repr(float(dist[i]))}\n")
    return buf.getvalue()
