"""Twisted random walk engine: checkpointed replica ensembles.

The walk is the recursion S_0 = 0, S_n = e^{i beta} S_{n-1} + X_{n-1};
carried alongside is the rotation coordinate n*beta (mod 2*pi), so the pair
is the random walk (S_n, e^{i n beta}) in the rotation-extended plane.
e^{i beta} is computed once per run and every step is one complex
multiply-add, so positions accumulate in double precision with an error
bounded by O(n * ulp * max|S|); the bound is echoed into reports.

Two kinds of ball statistics are recorded and must not be conflated:

* return counts use the *unscaled* ball |S_k| <= eta (returns of the walk
  itself, the recurrence notion), and
* small-ball tables use the *scaled* ball |n^{-1/2} S_n| <= eta (the
  quantity the recurrence criterion bounds below by c * eta^2).

Replicas are embarrassingly parallel.  Replica r draws from a counter-based
generator keyed by (seed, r); replicas are processed in fixed-size batches
and all reductions run in batch order, so the worker count can never change
any output bit.
"""

from __future__ import annotations

import concurrent.futures
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .group import Angle, as_angle
from .processes import GaussianSpectral, _SpectralEmbedding, _batch_state, make_generator

TWO_PI = 2.0 * math.pi

#: |t| <= 4, 32 points per ray, rays along 1 and e^{i pi/4}; fixed at run
#: start so streaming-mode characteristic functions can accumulate.
ECF_POINTS_PER_RAY = 32
ECF_TMAX = 4.0
ECF_M_MAX = 8


class ResourceCapError(RuntimeError):
    """replicas * n_max exceeds the configured resource cap."""


def default_ecf_tgrid() -> np.ndarray:
    mags = np.linspace(ECF_TMAX / ECF_POINTS_PER_RAY, ECF_TMAX, ECF_POINTS_PER_RAY)
    rays = np.array([1.0, np.exp(1j * np.pi / 4.0)])
    return (mags[None, :] * rays[:, None]).ravel()


def structured_ecf_tgrid(beta: float, m_max: int = ECF_M_MAX) -> np.ndarray:
    """The run-start t-grid: base rays, their twist-angle rotations, and a
    sqrt(2)-rescale.

    Layout (base size T): blocks m = 0..m_max hold base * e^{i beta m}, the
    final block holds base / sqrt(2).  Accumulating characteristic-function
    sums on this grid is exactly what the rotation-invariance and
    divisibility statistics need, so they remain computable when only
    streaming summaries are kept.
    """
    base = default_ecf_tgrid()
    blocks = [base * np.exp(1j * beta * m) for m in range(m_max + 1)]
    blocks.append(base / math.sqrt(2.0))
    return np.concatenate(blocks)


def geometric_checkpoints(n_max: int) -> tuple:
    """The grid ceil(2^(j/2)) intersected with [1, n_max], plus n_max.

    Half-octave spacing resolves power laws on log-log axes and contains
    every power of two up to n_max together with its half.
    """
    pts = set()
    j = 0
    while True:
        n = math.ceil(2.0 ** (j / 2.0))
        if n > n_max:
            break
        pts.add(n)
        j += 1
    pts.add(n_max)
    return tuple(sorted(pts))


@dataclass
class WalkConfig:
    beta: Angle | float
    n_max: int
    checkpoints: object = "geometric"
    replicas: int = 1
    seed: int = 0
    eta_grid: tuple = (0.05, 0.1, 0.2, 0.3, 0.5)
    dense_counts: bool | None = None  # None: on when n_max <= 4096
    record_raw: bool | None = None  # None: on while within raw_cap_bytes
    raw_cap_bytes: int = 1 << 29
    ecf_tgrid: np.ndarray | None = None
    workers: int = 1
    batch_size: int | None = None
    resource_cap: int = 1 << 31
    budget_s: float | None = None

    def __post_init__(self):
        self.beta = as_angle(self.beta)
        self.n_max = int(self.n_max)
        if self.n_max < 1:
            raise ValueError("n_max must be >= 1")
        if self.replicas < 1:
            raise ValueError("replicas must be >= 1")
        if isinstance(self.checkpoints, str):
            if self.checkpoints != "geometric":
                raise ValueError(f"unknown checkpoint rule {self.checkpoints!r}")
            self.checkpoints = geometric_checkpoints(self.n_max)
        else:
            cps = tuple(sorted({int(c) for c in self.checkpoints}))
            if not cps:
                raise ValueError("checkpoint list must be nonempty")
            if cps[0] < 1 or cps[-1] > self.n_max:
                raise ValueError("checkpoints must lie in [1, n_max]")
            self.checkpoints = cps
        etas = tuple(float(e) for e in self.eta_grid)
        if not etas or any(e <= 0 for e in etas) or list(etas) != sorted(etas):
            raise ValueError("eta_grid must be a sorted tuple of positive radii")
        self.eta_grid = etas
        if self.dense_counts is None:
            self.dense_counts = self.n_max <= 4096
        if self.record_raw is None:
            need = 16 * self.replicas * len(self.checkpoints)
            self.record_raw = need <= self.raw_cap_bytes
        if self.ecf_tgrid is None:
            self.ecf_tgrid = structured_ecf_tgrid(self.beta.value)
        if self.workers < 1:
            raise ValueError("workers must be >= 1")

    def rotation_coordinate(self, n: int) -> float:
        """n*beta mod 2*pi; exact integer arithmetic for rational angles."""
        return self.beta.times(n).value

    def rotation_fraction(self, n: int):
        """(n*p mod q, q) when beta = 2*pi*p/q is exact, else None."""
        if self.beta.is_rational:
            return ((n * self.beta.p) % self.beta.q, self.beta.q)
        return None


@dataclass
class CheckpointEnsemble:
    """Per-checkpoint replica statistics of a simulated twisted walk."""

    checkpoints: tuple
    eta_grid: tuple
    replicas: int
    seed: int
    beta_value: float
    beta_fraction: tuple | None
    mode: str  # "raw" | "streaming"
    samples: dict | None  # n -> (R,) complex, scaled positions n^{-1/2} S_n
    return_counts: dict | None  # n -> (R, E) int32, #{k<=n: |S_k|<=eta}
    scaled_counts: dict = field(default_factory=dict)  # n -> (E,) int64
    unscaled_counts: dict = field(default_factory=dict)  # n -> (E,) int64
    return_count_sums: dict = field(default_factory=dict)  # n -> (E,) int64
    moment_sums: dict = field(default_factory=dict)  # n -> [sum z, sum |z|^2, sum |z|^4]
    max_abs: dict = field(default_factory=dict)  # n -> max |S_n| over replicas
    rotation: dict = field(default_factory=dict)  # n -> n*beta mod 2pi
    ecf_sums: dict | None = None  # n -> (T,) complex sums of e^{i<t, scaled>}
    ecf_tgrid: np.ndarray | None = None
    dense_scaled: np.ndarray | None = None  # (n_max+1, E) int64
    dense_unscaled: np.ndarray | None = None
    partial: bool = False
    replicas_done: int = 0
    n_max: int = 0

    def scaled_samples(self, n: int) -> np.ndarray:
        if self.samples is None:
            raise ValueError("raw samples were not retained (streaming mode)")
        return self.samples[int(n)]

    def mean_scaled_abs2(self, n: int) -> float:
        s = self.moment_sums[int(n)]
        return float(s[2]) / self.replicas_done

    def ecf(self, n: int) -> np.ndarray:
        """Empirical characteristic function of the scaled position at n."""
        if self.samples is not None:
            z = self.samples[int(n)]
            t = self.ecf_tgrid
            total = np.zeros(t.size, dtype=complex)
            for lo in range(0, z.size, 16384):
                zc = z[lo : lo + 16384]
                total += np.exp(
                    1j * (np.outer(zc.real, t.real) + np.outer(zc.imag, t.imag))
                ).sum(axis=0)
            return total / z.size
        if self.ecf_sums is None:
            raise ValueError("no characteristic-function data recorded")
        return self.ecf_sums[int(n)] / self.replicas_done


def step(s: complex, beta, x: complex) -> complex:
    """One twisted step: e^{i beta} s + x."""
    b = as_angle(beta).value
    return complex(math.cos(b), math.sin(b)) * s + x


class _BatchAccumulator:
    """Everything one batch of replicas contributes, in replica order."""

    def __init__(self, cfg: WalkConfig, size: int):
        E = len(cfg.eta_grid)
        C = len(cfg.checkpoints)
        self.samples = {n: None for n in cfg.checkpoints} if cfg.record_raw else None
        self.return_snapshots = {n: None for n in cfg.checkpoints} if cfg.record_raw else None
        self.scaled_counts = np.zeros((C, E), dtype=np.int64)
        self.unscaled_counts = np.zeros((C, E), dtype=np.int64)
        self.return_count_sums = np.zeros((C, E), dtype=np.int64)
        self.moment_sums = np.zeros((C, 4), dtype=float)  # re, im, |z|^2, |z|^4
        self.max_abs = np.zeros(C, dtype=float)
        self.ecf_sums = None
        if not cfg.record_raw:
            self.ecf_sums = np.zeros((C, cfg.ecf_tgrid.size), dtype=complex)
        self.dense_scaled = (
            np.zeros((cfg.n_max + 1, E), dtype=np.int64) if cfg.dense_counts else None
        )
        self.dense_unscaled = (
            np.zeros((cfg.n_max + 1, E), dtype=np.int64) if cfg.dense_counts else None
        )
        self.size = size


def _run_batch(spec, cfg: WalkConfig, lo: int, hi: int, embedding) -> _BatchAccumulator:
    gens = [make_generator(cfg.seed, r) for r in range(lo, hi)]
    state = _batch_state(spec, gens, embedding)
    B = hi - lo
    acc = _BatchAccumulator(cfg, B)
    eta2 = np.asarray(cfg.eta_grid, dtype=float) ** 2
    E = eta2.size
    c = complex(math.cos(cfg.beta.value), math.sin(cfg.beta.value))

    S = np.zeros(B, dtype=complex)
    returns = np.zeros((B, E), dtype=np.int32)
    cp_iter = iter(enumerate(cfg.checkpoints))
    ci, next_cp = next(cp_iter)

    # time-chunked generation; chunk size only bounds the increment buffer
    chunk = max(256, min(4096, (1 << 23) // max(B, 1)))
    n = 0
    while n < cfg.n_max:
        count = min(chunk, cfg.n_max - n)
        X = state.emit(count)
        for t in range(count):
            S *= c
            S += X[:, t]
            n += 1
            a2 = S.real * S.real + S.imag * S.imag
            hits = a2[:, None] <= eta2[None, :]
            returns += hits
            if acc.dense_unscaled is not None:
                acc.dense_unscaled[n] += hits.sum(axis=0)
                acc.dense_scaled[n] += (a2[:, None] <= n * eta2[None, :]).sum(axis=0)
            if n == next_cp:
                rn = math.sqrt(n)
                scaled = S / rn
                sa2 = a2 / n
                acc.scaled_counts[ci] += (sa2[:, None] <= eta2[None, :]).sum(axis=0)
                acc.unscaled_counts[ci] += hits.sum(axis=0)
                acc.return_count_sums[ci] += returns.sum(axis=0, dtype=np.int64)
                acc.moment_sums[ci] += (
                    scaled.real.sum(),
                    scaled.imag.sum(),
                    sa2.sum(),
                    (sa2 * sa2).sum(),
                )
                acc.max_abs[ci] = max(acc.max_abs[ci], float(np.sqrt(a2.max())))
                if acc.samples is not None:
                    acc.samples[next_cp] = scaled.copy()
                    acc.return_snapshots[next_cp] = returns.copy()
                if acc.ecf_sums is not None:
                    t_grid = cfg.ecf_tgrid
                    ph = np.exp(
                        1j
                        * (
                            np.outer(scaled.real, t_grid.real)
                            + np.outer(scaled.imag, t_grid.imag)
                        )
                    )
                    acc.ecf_sums[ci] += ph.sum(axis=0)
                try:
                    ci, next_cp = next(cp_iter)
                except StopIteration:
                    next_cp = -1
    return acc


def _batch_plan(spec, cfg: WalkConfig):
    if cfg.batch_size is not None:
        size = int(cfg.batch_size)
    elif isinstance(spec, GaussianSpectral):
        size = 512
    else:
        size = 8192
    size = max(1, min(size, cfg.replicas))
    return [(lo, min(lo + size, cfg.replicas)) for lo in range(0, cfg.replicas, size)]


def simulate(spec, cfg: WalkConfig) -> CheckpointEnsemble:
    """Run the walk over independent replicas and collect checkpoint data.

    Deterministic in (spec, cfg.seed): the batch decomposition is fixed by
    the spec family, reductions run in batch order, and ``workers`` only
    schedules batches.  A wall-clock budget stops the run at the next batch
    boundary and marks the ensemble partial.
    """
    if cfg.replicas * cfg.n_max > cfg.resource_cap:
        raise ResourceCapError(
            f"replicas * n_max = {cfg.replicas * cfg.n_max} exceeds the cap "
            f"{cfg.resource_cap}; raise resource_cap explicitly to proceed"
        )
    embedding = None
    if isinstance(spec, GaussianSpectral):
        if spec.window < cfg.n_max:
            raise ValueError(
                f"gaussian-spectral window {spec.window} is shorter than n_max {cfg.n_max}"
            )
        embedding = _SpectralEmbedding(spec.measure, spec.window)

    batches = _batch_plan(spec, cfg)
    t0 = time.monotonic()
    results: list = [None] * len(batches)
    done = 0
    stop = False
    # the first batch always runs so a budgeted run still yields flagged output
    if cfg.workers == 1:
        for i, (lo, hi) in enumerate(batches):
            if i > 0 and cfg.budget_s is not None and time.monotonic() - t0 > cfg.budget_s:
                stop = True
                break
            results[i] = _run_batch(spec, cfg, lo, hi, embedding)
            done = hi
    else:
        with concurrent.futures.ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            i = 0
            while i < len(batches):
                if i > 0 and cfg.budget_s is not None and time.monotonic() - t0 > cfg.budget_s:
                    stop = True
                    break
                wave = batches[i : i + cfg.workers]
                futs = [
                    pool.submit(_run_batch, spec, cfg, lo, hi, embedding) for lo, hi in wave
                ]
                for j, fut in enumerate(futs):
                    results[i + j] = fut.result()
                done = wave[-1][1]
                i += len(wave)
    completed = [r for r in results if r is not None]
    return _merge(cfg, completed, partial=stop, replicas_done=done)


def _merge(cfg: WalkConfig, accs, partial: bool, replicas_done: int) -> CheckpointEnsemble:
    C = len(cfg.checkpoints)
    samples = None
    return_counts = None
    if cfg.record_raw:
        samples = {
            n: np.concatenate([a.samples[n] for a in accs]) for n in cfg.checkpoints
        }
        return_counts = {
            n: np.concatenate([a.return_snapshots[n] for a in accs]) for n in cfg.checkpoints
        }
    scaled = {}
    unscaled = {}
    ret_sums = {}
    moments = {}
    max_abs = {}
    rotation = {}
    for ci, n in enumerate(cfg.checkpoints):
        scaled[n] = sum(a.scaled_counts[ci] for a in accs)
        unscaled[n] = sum(a.unscaled_counts[ci] for a in accs)
        ret_sums[n] = sum(a.return_count_sums[ci] for a in accs)
        m = np.zeros(4)
        for a in accs:
            m += a.moment_sums[ci]
        moments[n] = m
        max_abs[n] = max(a.max_abs[ci] for a in accs)
        rotation[n] = cfg.rotation_coordinate(n)
    ecf_sums = None
    if not cfg.record_raw:
        ecf_sums = {}
        for ci, n in enumerate(cfg.checkpoints):
            tot = np.zeros(cfg.ecf_tgrid.size, dtype=complex)
            for a in accs:
                tot += a.ecf_sums[ci]
            ecf_sums[n] = tot
    dense_scaled = dense_unscaled = None
    if cfg.dense_counts:
        dense_scaled = sum(a.dense_scaled for a in accs)
        dense_unscaled = sum(a.dense_unscaled for a in accs)
    return CheckpointEnsemble(
        checkpoints=cfg.checkpoints,
        eta_grid=cfg.eta_grid,
        replicas=cfg.replicas,
        seed=cfg.seed,
        beta_value=cfg.beta.value,
        beta_fraction=(cfg.beta.p, cfg.beta.q) if cfg.beta.is_rational else None,
        mode="raw" if cfg.record_raw else "streaming",
        samples=samples,
        return_counts=return_counts,
        scaled_counts=scaled,
        unscaled_counts=unscaled,
        return_count_sums=ret_sums,
        moment_sums=moments,
        max_abs=max_abs,
        rotation=rotation,
        ecf_sums=ecf_sums,
        ecf_tgrid=cfg.ecf_tgrid,
        dense_scaled=dense_scaled,
        dense_unscaled=dense_unscaled,
        partial=partial,
        replicas_done=replicas_done if partial else cfg.replicas,
        n_max=cfg.n_max,
    )


# ---------------------------------------------------------------------------
# rational twist angles: the blocked walk
# ---------------------------------------------------------------------------


def blocked_increments(x: np.ndarray, p: int, q: int) -> np.ndarray:
    """Collapse q steps of the twisted walk at beta = 2*pi*p/q into one.

    X'_k = e^{i(q-1)beta} sum_{m<q} e^{-im beta} x[kq+m]; the plain partial
    sums of X' reproduce the twisted walk along multiples of q:
    sum_{j<n} X'_j = S^{(beta)}_{nq} pathwise.
    """
    if q == 0:
        raise ValueError("q must be nonzero")
    p, q = int(p), int(q)
    if q < 0:
        p, q = -p, -q
    if math.gcd(p % q, q) != 1:
        raise ValueError(f"p/q must be in lowest terms, got {p}/{q}")
    x = np.asarray(x, dtype=complex)
    if x.size % q:
        raise ValueError(f"need a multiple of q={q} increments, got {x.size}")
    beta = TWO_PI * p / q
    phases = np.exp(-1j * beta * np.arange(q)) * np.exp(1j * (q - 1) * beta)
    return (x.reshape(-1, q) * phases[None, :]).sum(axis=1)


class BlockedProcess:
    """Derived increment process X' for a rational twist angle.

    Wraps streams of the base spec so that the ordinary (untwisted) walk
    over the emitted values follows the twisted walk sampled every q steps.
    """

    def __init__(self, spec, p: int, q: int):
        if q == 0:
            raise ValueError("q must be nonzero")
        q = int(q)
        p = int(p)
        if q < 0:
            p, q = -p, -q
        p %= q
        if math.gcd(p, q) != 1:
            raise ValueError(f"p/q must be in lowest terms, got {p}/{q}")
        self.spec = spec
        self.p = p
        self.q = q
        self.beta = Angle.rational(p, q)

    def transform(self, x: np.ndarray) -> np.ndarray:
        return blocked_increments(x, self.p, self.q)

    def stream(self, seed: int, replica: int = 0) -> "_BlockedStream":
        from .processes import make_stream

        return _BlockedStream(self, make_stream(self.spec, seed, replica))


class _BlockedStream:
    def __init__(self, proc: BlockedProcess, base):
        self.proc = proc
        self.base = base
        self.position = 0

    def take(self, n: int) -> np.ndarray:
        out = self.proc.transform(self.base.take(int(n) * self.proc.q))
        self.position += int(n)
        return out

    def next(self) -> complex:
        return complex(self.take(1)[0])


def blocked_walk(spec, p: int, q: int) -> BlockedProcess:
    """Derived increment transformer for beta = 2*pi*p/q (see BlockedProcess)."""
    return BlockedProcess(spec, p, q)
