"""Stationary increment processes with known covariance and mixing structure.

Five families cover the example classes the diagnostics are aimed at:

* ``IID`` -- independent increments (complex Gaussian / Rademacher /
  uniform on the circle); trivially mixing.
* ``MovingAverage`` -- finite moving average of i.i.d. standard normal
  drivers; m-dependent, so the strong-mixing coefficient vanishes beyond
  the dependence range.
* ``MarkovChain`` -- function of a finite stationary Markov chain
  (exponentially mixing); covers shift-of-finite-type symbol processes via
  :func:`parry_chain`.
* ``GaussianSpectral`` -- stationary Gaussian process synthesized from a
  prescribed spectral measure by circulant embedding (density part) plus
  independent random harmonics (atoms).
* ``Rotation`` -- deterministic trigonometric polynomial sampled along an
  irrational rotation with a uniformly random initial phase; purely
  discrete spectrum.

Streams are bit-reproducible: (spec, seed, replica) fully determines the
emitted sequence, independent of how it is chunked into ``take`` calls.
Replica streams use a counter-based generator keyed by (seed, replica), so
ensembles can be generated in any batch decomposition.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .spectral import (
    GRID_SIZE_DEFAULT,
    CovarianceSequence,
    HalfPowerSingularity,
    SpectralMeasure,
    covariance_from_measure,
)

TWO_PI = 2.0 * math.pi

IID_LAWS = ("complex-gaussian", "rademacher", "uniform-circle")


class SpecError(ValueError):
    """Invalid process specification."""


class StreamExhausted(RuntimeError):
    """A window-limited stream was asked for values beyond its window."""


# ---------------------------------------------------------------------------
# seeding
# ---------------------------------------------------------------------------


def derive_key(seed: int, replica: int = 0) -> int:
    """128-bit Philox key for (seed, replica); replicas are parallel streams."""
    return ((int(seed) & (2 ** 64 - 1)) << 64) | (int(replica) & (2 ** 64 - 1))


def make_generator(seed: int, replica: int = 0) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=derive_key(seed, replica)))


# ---------------------------------------------------------------------------
# specs
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class IID:
    law: str = "complex-gaussian"
    variance: float = 1.0

    def __post_init__(self):
        if self.law not in IID_LAWS:
            raise SpecError(f"unknown IID law {self.law!r}; choose from {IID_LAWS}")
        if self.law != "complex-gaussian" and self.variance != 1.0:
            raise SpecError(f"{self.law} increments have fixed unit variance")
        if not (self.variance > 0.0):
            raise SpecError("variance must be positive")


@dataclass(frozen=True)
class MovingAverage:
    """X_k = sum_j coeffs[j] * eps_{k-j} with eps i.i.d. standard normal."""

    coeffs: tuple

    def __post_init__(self):
        c = tuple(complex(v) for v in self.coeffs)
        if not c:
            raise SpecError("moving average needs at least one coefficient")
        object.__setattr__(self, "coeffs", c)

    @property
    def order(self) -> int:
        return len(self.coeffs) - 1


@dataclass
class MarkovChain:
    """Complex-valued function of a stationary finite Markov chain.

    Emits values[state] - mean when ``centered`` (the default), so the
    increment process has zero mean; set ``centered=False`` to emit the raw
    values for exploration.
    """

    transition: np.ndarray
    stationary: np.ndarray
    values: np.ndarray
    centered: bool = True

    def __post_init__(self):
        P = np.asarray(self.transition, dtype=float)
        pi = np.asarray(self.stationary, dtype=float)
        v = np.asarray(self.values, dtype=complex)
        if P.ndim != 2 or P.shape[0] != P.shape[1]:
            raise SpecError("transition must be a square matrix")
        s = P.shape[0]
        if pi.shape != (s,) or v.shape != (s,):
            raise SpecError("stationary vector and values must match the state count")
        if P.min() < -1e-15:
            raise SpecError("transition probabilities must be nonnegative")
        if np.abs(P.sum(axis=1) - 1.0).max() > 1e-10:
            raise SpecError("transition rows must sum to 1")
        if pi.min() < -1e-15 or abs(pi.sum() - 1.0) > 1e-10:
            raise SpecError("stationary vector must be a probability vector")
        if np.abs(pi @ P - pi).max() > 1e-12:
            raise SpecError("stationary vector does not satisfy pi P = pi")
        self.transition = np.maximum(P, 0.0)
        self.stationary = np.maximum(pi, 0.0)
        self.values = v

    @property
    def n_states(self) -> int:
        return self.transition.shape[0]

    @property
    def mean(self) -> complex:
        return complex(self.stationary @ self.values)


@dataclass
class GaussianSpectral:
    """Stationary Gaussian process with prescribed spectral measure.

    ``field="real"`` symmetrizes the measure at construction (a real process
    forces a reflection-symmetric spectral measure) and emits real values;
    ``field="complex"`` emits a proper complex Gaussian process from the
    measure as given.  The stream realizes exactly ``window`` values.
    """

    measure: SpectralMeasure
    window: int
    field: str = "real"

    def __post_init__(self):
        if self.field not in ("real", "complex"):
            raise SpecError(f"field must be 'real' or 'complex', got {self.field!r}")
        if int(self.window) < 2:
            raise SpecError("window must be at least 2")
        self.window = int(self.window)
        if self.measure.total_mass() <= 0.0:
            raise SpecError("spectral measure must have positive total mass")
        if self.field == "real":
            self.measure = self.measure.symmetrized()


@dataclass(frozen=True)
class Rotation:
    """X_k = g(theta0 + k*alpha) with g a trigonometric polynomial.

    theta0 is uniform on the circle (drawn once per stream), alpha is a
    fixed rotation number supplied as a float -- exact irrationality is not
    certifiable from a float, which only matters if one needs the rational
    case excluded arithmetically.  ``fourier`` maps harmonic j to its
    coefficient, so the spectral measure is atoms |c_j|^2 at j*alpha.
    """

    alpha: float
    fourier: tuple = ((1, 1.0 + 0j),)

    def __post_init__(self):
        object.__setattr__(self, "alpha", float(np.mod(self.alpha, TWO_PI)))
        items = tuple(sorted((int(j), complex(c)) for j, c in dict(self.fourier).items()))
        if not items:
            raise SpecError("rotation process needs at least one Fourier coefficient")
        object.__setattr__(self, "fourier", items)


ProcessSpec = (IID, MovingAverage, MarkovChain, GaussianSpectral, Rotation)


# ---------------------------------------------------------------------------
# closed-form covariance
# ---------------------------------------------------------------------------


def covariance_sequence(spec, k_max: int) -> CovarianceSequence:
    """Closed-form r[k] = E(X_k conj(X_0)) for k = 0..k_max."""
    k_max = int(k_max)
    if k_max < 0:
        raise ValueError("k_max must be >= 0")
    ks = np.arange(k_max + 1)
    if isinstance(spec, IID):
        r = np.zeros(k_max + 1, dtype=complex)
        r[0] = spec.variance if spec.law == "complex-gaussian" else 1.0
        return CovarianceSequence(r)
    if isinstance(spec, MovingAverage):
        th = np.asarray(spec.coeffs, dtype=complex)
        r = np.zeros(k_max + 1, dtype=complex)
        for k in range(min(k_max, spec.order) + 1):
            r[k] = np.sum(th[k:] * np.conj(th[: th.size - k]))
        return CovarianceSequence(r)
    if isinstance(spec, MarkovChain):
        d = spec.values - spec.mean if spec.centered else spec.values
        w = spec.stationary * np.conj(d)
        r = np.empty(k_max + 1, dtype=complex)
        u = d.copy()
        for k in range(k_max + 1):
            r[k] = w @ u
            u = spec.transition @ u
        return CovarianceSequence(r)
    if isinstance(spec, GaussianSpectral):
        r = covariance_from_measure(spec.measure, ks)
        if spec.field == "real":
            if np.abs(r.imag).max() > 1e-9 * max(1.0, abs(r[0])):
                raise SpecError("real-field measure produced complex covariances")
            r = r.real.astype(complex)
        return CovarianceSequence(r)
    if isinstance(spec, Rotation):
        r = np.zeros(k_max + 1, dtype=complex)
        for j, c in spec.fourier:
            r += (abs(c) ** 2) * np.exp(1j * ks * j * spec.alpha)
        return CovarianceSequence(r)
    raise SpecError(f"unsupported spec type {type(spec).__name__}")


def covariance(spec, k: int) -> complex:
    """Closed-form covariance at a single lag k >= 0."""
    if k < 0:
        raise ValueError("negative lag: use conjugate symmetry at the call site")
    return complex(covariance_sequence(spec, k).r[k])


def spectral_measure(spec, grid_size: int = GRID_SIZE_DEFAULT) -> SpectralMeasure:
    """The spectral measure of the family, oriented so that
    covariance(spec, k) == integral exp(+ikx) dm(x)."""
    if isinstance(spec, IID):
        var = spec.variance if spec.law == "complex-gaussian" else 1.0
        return SpectralMeasure.flat(var, grid_size)
    if isinstance(spec, MovingAverage):
        r = covariance_sequence(spec, spec.order).r
        return SpectralMeasure.from_covariance(r, grid_size)
    if isinstance(spec, MarkovChain):
        if not spec.centered:
            raise SpecError("spectral measure of an uncentered chain has a mean atom; center it")
        r0 = covariance(spec, 0)
        k = 16
        while k < 4096:
            r = covariance_sequence(spec, k).r
            if abs(r[-1]) < 1e-16 * max(abs(r0), 1e-30):
                break
            k *= 2
        return SpectralMeasure.from_covariance(r, grid_size)
    if isinstance(spec, GaussianSpectral):
        return spec.measure
    if isinstance(spec, Rotation):
        masses: dict = {}
        for j, c in spec.fourier:
            w = float(np.mod(j * spec.alpha, TWO_PI))
            masses[w] = masses.get(w, 0.0) + abs(c) ** 2
        return SpectralMeasure(np.zeros(grid_size), atoms=tuple(sorted(masses.items())))
    raise SpecError(f"unsupported spec type {type(spec).__name__}")


# ---------------------------------------------------------------------------
# streams
# ---------------------------------------------------------------------------


class _IIDState:
    """Real laws emit float64 rows; the walk recursion upcasts on the fly."""

    def __init__(self, spec: IID, gens):
        self.spec = spec
        self.gens = gens

    def emit(self, count: int) -> np.ndarray:
        law, var = self.spec.law, self.spec.variance
        real = law == "rademacher"
        out = np.empty((len(self.gens), count), dtype=float if real else complex)
        for i, g in enumerate(self.gens):
            if law == "complex-gaussian":
                z = g.standard_normal((count, 2))
                out[i] = (z[:, 0] + 1j * z[:, 1]) * math.sqrt(var / 2.0)
            elif law == "rademacher":
                out[i] = 2.0 * g.integers(0, 2, count) - 1.0
            else:  # uniform-circle
                out[i] = np.exp(1j * TWO_PI * g.random(count))
        return out


class _MAState:
    def __init__(self, spec: MovingAverage, gens):
        self.spec = spec
        self.gens = gens
        self.real = all(c.imag == 0.0 for c in spec.coeffs)
        q = spec.order
        self.tail = np.stack([g.standard_normal(q) for g in gens]) if q else np.zeros((len(gens), 0))

    def emit(self, count: int) -> np.ndarray:
        q = self.spec.order
        full = np.empty((len(self.gens), q + count))
        full[:, :q] = self.tail
        for i, g in enumerate(self.gens):
            full[i, q:] = g.standard_normal(count)
        out = np.zeros((len(self.gens), count), dtype=float if self.real else complex)
        for j, c in enumerate(self.spec.coeffs):
            view = full[:, q - j : q - j + count]
            out += (c.real * view) if self.real else (c * view)
        if q:
            self.tail = full[:, -q:].copy()
        return out


class _MarkovState:
    def __init__(self, spec: MarkovChain, gens):
        self.spec = spec
        self.gens = gens
        self.cum = np.cumsum(spec.transition, axis=1)
        cum_pi = np.cumsum(spec.stationary)
        u0 = np.array([g.random() for g in gens])
        self.states = np.minimum(np.searchsorted(cum_pi, u0, side="right"), spec.n_states - 1)
        emitted = spec.values - (spec.mean if spec.centered else 0.0)
        self.emitted = emitted.real if np.all(emitted.imag == 0.0) else emitted

    def emit(self, count: int) -> np.ndarray:
        B = len(self.gens)
        u = np.empty((B, count))
        for i, g in enumerate(self.gens):
            u[i] = g.random(count)
        out = np.empty((B, count), dtype=self.emitted.dtype)
        s = self.states
        nmax = self.spec.n_states - 1
        for t in range(count):
            s = np.minimum((u[:, t, None] > self.cum[s]).sum(axis=1), nmax)
            out[:, t] = self.emitted[s]
        self.states = s
        return out


class _SpectralEmbedding:
    """Circulant embedding of the density-part covariance of a measure.

    The embedding size starts at the first power of two >= 4 * window and
    doubles while the circulant eigenvalues dip below -1e-10 times the top
    eigenvalue (cap 2**22); residual negative eigenvalues are clipped to 0.
    """

    CAP = 2 ** 22
    NEG_TOL = 1e-10

    def __init__(self, measure: SpectralMeasure, window: int):
        self.window = window
        density_part = SpectralMeasure(
            measure.density, atoms=(), singularities=measure.singularities
        )
        self.has_density = density_part.total_mass() > 0.0
        self.atoms = measure.atoms
        if not self.has_density:
            self.size = 0
            self.sqrt_lam = np.zeros(0)
            return
        size = 2 ** max(3, int(math.ceil(math.log2(4 * window))))
        while True:
            r = covariance_from_measure(density_part, np.arange(size // 2 + 1))
            row = np.empty(size, dtype=complex)
            row[: size // 2 + 1] = r
            # the Nyquist lag pairs with itself, so it must be real for the
            # circulant to be Hermitian; lag size/2 >= 2*window never enters
            # the realized window, so dropping its imaginary part is free
            row[size // 2] = r[size // 2].real
            row[size // 2 + 1 :] = np.conj(r[1 : size // 2])[::-1]
            lam = np.fft.fft(row)
            if np.abs(lam.imag).max() > 1e-8 * max(1.0, np.abs(lam.real).max()):
                raise SpecError("circulant eigenvalues came out complex; bad measure")
            lam = lam.real
            worst = lam.min()
            if worst >= -self.NEG_TOL * lam.max():
                break
            if size >= self.CAP:
                raise SpecError(
                    f"circulant embedding failed at cap {self.CAP}: most negative "
                    f"eigenvalue {worst:.3e} (top {lam.max():.3e})"
                )
            size *= 2
        self.size = size
        self.sqrt_lam = np.sqrt(np.maximum(lam, 0.0))

    def sample(self, gens, field: str) -> np.ndarray:
        """One path of ``window`` values per generator; draws are sequential
        per replica (density noise first, then one pair per atom)."""
        B, N = len(gens), self.window
        out = np.zeros((B, N), dtype=float if field == "real" else complex)
        if self.has_density:
            noise = np.empty((B, self.size), dtype=complex)
            for i, g in enumerate(gens):
                z = g.standard_normal((self.size, 2))
                noise[i] = (z[:, 0] + 1j * z[:, 1]) / math.sqrt(2.0)
            paths = np.fft.ifft(self.sqrt_lam * noise, axis=1) * math.sqrt(self.size)
            if field == "real":
                out += math.sqrt(2.0) * paths[:, :N].real
            else:
                out += paths[:, :N]
        ks = np.arange(N)
        for omega, mass in self.atoms:
            amp = math.sqrt(mass)
            for i, g in enumerate(gens):
                a, b = g.standard_normal(2)
                if field == "real":
                    out[i] += amp * (a * np.cos(ks * omega) + b * np.sin(ks * omega))
                else:
                    out[i] += amp * ((a + 1j * b) / math.sqrt(2.0)) * np.exp(1j * ks * omega)
        return out


class _GaussianSpectralState:
    def __init__(self, spec: GaussianSpectral, gens, embedding=None):
        self.spec = spec
        emb = embedding if embedding is not None else _SpectralEmbedding(spec.measure, spec.window)
        self.paths = emb.sample(gens, spec.field)
        self.pos = 0

    def emit(self, count: int) -> np.ndarray:
        if self.pos + count > self.spec.window:
            raise StreamExhausted(
                f"gaussian-spectral stream realizes {self.spec.window} values; "
                f"increase window to consume {self.pos + count}"
            )
        out = self.paths[:, self.pos : self.pos + count]
        self.pos += count
        return out


class _RotationState:
    def __init__(self, spec: Rotation, gens):
        self.spec = spec
        self.theta0 = np.array([TWO_PI * g.random() for g in gens])
        self.pos = 0

    def emit(self, count: int) -> np.ndarray:
        ks = np.arange(self.pos, self.pos + count)
        out = np.zeros((len(self.theta0), count), dtype=complex)
        for j, c in self.spec.fourier:
            # e^{ij(theta0 + k alpha)} factors into an outer product
            phase0 = np.exp(1j * j * self.theta0)
            phasek = np.exp(1j * j * self.spec.alpha * ks)
            out += c * phase0[:, None] * phasek[None, :]
        self.pos += count
        return out


def _batch_state(spec, gens, embedding=None):
    if isinstance(spec, IID):
        return _IIDState(spec, gens)
    if isinstance(spec, MovingAverage):
        return _MAState(spec, gens)
    if isinstance(spec, MarkovChain):
        return _MarkovState(spec, gens)
    if isinstance(spec, GaussianSpectral):
        return _GaussianSpectralState(spec, gens, embedding)
    if isinstance(spec, Rotation):
        return _RotationState(spec, gens)
    raise SpecError(f"unsupported spec type {type(spec).__name__}")


class IncrementStream:
    """Deterministic stream of increments; (spec, seed, replica) fixes the output.

    ``take(n)`` returns the next n values; chunking never changes the
    sequence.  ``next()`` is the scalar convenience form.
    """

    def __init__(self, spec, seed: int, replica: int = 0):
        self.spec = spec
        self.seed = int(seed)
        self.replica = int(replica)
        self._state = _batch_state(spec, [make_generator(seed, replica)])
        self._position = 0

    @property
    def position(self) -> int:
        return self._position

    def take(self, n: int) -> np.ndarray:
        n = int(n)
        if n < 0:
            raise ValueError("cannot take a negative number of values")
        out = self._state.emit(n)[0] if n else np.zeros(0, dtype=complex)
        self._position += n
        return out.astype(complex, copy=False)

    def next(self) -> complex:
        return complex(self.take(1)[0])


def make_stream(spec, seed: int, replica: int = 0) -> IncrementStream:
    """Build a stream positioned at k = 0 (Markov chains start stationary)."""
    if not isinstance(spec, ProcessSpec):
        raise SpecError(f"not a process spec: {type(spec).__name__}")
    return IncrementStream(spec, seed, replica)


def gaussian_from_spectral(measure: SpectralMeasure, window: int, seed: int,
                           field: str = "real", replica: int = 0) -> IncrementStream:
    """Stream whose first ``window`` values are Gaussian with the covariance
    implied by ``measure`` (circulant embedding + random harmonics)."""
    return make_stream(GaussianSpectral(measure, window, field), seed, replica)


# ---------------------------------------------------------------------------
# shift-of-finite-type chains
# ---------------------------------------------------------------------------


def _is_primitive(adj: np.ndarray) -> bool:
    s = adj.shape[0]
    reach = adj > 0
    power = reach.copy()
    # Wielandt bound: a primitive matrix has a fully positive power by s^2-2s+2
    for _ in range(s * s - 2 * s + 2):
        if power.all():
            return True
        power = (power @ reach) > 0
    return bool(power.all())


def parry_chain(adjacency, values, centered: bool = True) -> MarkovChain:
    """Markov chain of maximal entropy on the paths of a 0/1 adjacency matrix.

    With Perron data A v = lam v and u A = lam u the transition matrix is
    p[s,t] = A[s,t] v[t] / (lam v[s]) and the stationary vector is
    proportional to u[s] v[s].  Requires an irreducible, aperiodic matrix.
    """
    A = np.asarray(adjacency, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise SpecError("adjacency must be square")
    if not np.isin(A, (0.0, 1.0)).all():
        raise SpecError("adjacency entries must be 0 or 1")
    if not _is_primitive(A):
        raise SpecError("adjacency must be irreducible and aperiodic (primitive)")
    evals, vecs = np.linalg.eig(A)
    i = int(np.argmax(evals.real))
    lam = float(evals[i].real)
    v = vecs[:, i].real
    v = v * np.sign(v[np.argmax(np.abs(v))])
    evals_l, vecs_l = np.linalg.eig(A.T)
    j = int(np.argmax(evals_l.real))
    u = vecs_l[:, j].real
    u = u * np.sign(u[np.argmax(np.abs(u))])
    if v.min() <= 0 or u.min() <= 0:
        raise SpecError("Perron vectors are not strictly positive; adjacency not primitive")
    P = A * v[None, :] / (lam * v[:, None])
    P /= P.sum(axis=1, keepdims=True)  # absorb roundoff
    pi = u * v
    pi /= pi.sum()
    vals = np.asarray([values[s] for s in range(A.shape[0])], dtype=complex) \
        if not isinstance(values, np.ndarray) else np.asarray(values, dtype=complex)
    return MarkovChain(P, pi, vals, centered=centered)


def golden_mean_spec(values=(1.0, -1.0), centered: bool = True) -> MarkovChain:
    """The 2-state chain forbidding the word (b, b), with maximal-entropy weights."""
    return parry_chain(np.array([[1, 1], [1, 0]]), np.asarray(values, dtype=complex),
                       centered=centered)


# ---------------------------------------------------------------------------
# mixing checks
# ---------------------------------------------------------------------------


def dependence_range(spec) -> int:
    if isinstance(spec, IID):
        return 0
    if isinstance(spec, MovingAverage):
        return spec.order
    raise SpecError("dependence range is only defined for IID and moving-average specs")


def window_covariance_mc(spec, gap: int, f, g, window_f: int = 1, window_g: int = 1,
                         replicas: int = 100_000, seed: int = 0):
    """Monte Carlo estimate of E(fg) - E(f)E(g) with a standard error.

    ``f`` sees increments [0, window_f); ``g`` sees the window starting
    ``gap`` steps after the last index ``f`` sees.  Both must accept a
    (replicas, window) array and return one value per row.  Replica
    segments are cut from one stream with a dependence-range spacer, so
    they are exactly independent for finite-range specs.
    """
    if gap < 1:
        raise ValueError("gap must be >= 1")
    d = dependence_range(spec)
    seg = window_f - 1 + gap + window_g
    stride = seg + d + 1
    x = make_stream(spec, seed).take(replicas * stride).reshape(replicas, stride)
    fv = np.asarray(f(x[:, :window_f]))
    gv = np.asarray(g(x[:, window_f - 1 + gap : window_f - 1 + gap + window_g]))
    prod = fv * gv
    cov = prod.mean() - fv.mean() * gv.mean()
    centered = (fv - fv.mean()) * (gv - gv.mean())
    se = float(np.sqrt(np.mean(np.abs(centered - centered.mean()) ** 2) / replicas))
    return complex(cov), se


def mixing_covariance_bound_check(spec, gap: int, f, g, window_f: int = 1, window_g: int = 1,
                                  replicas: int = 100_000, seed: int = 0) -> bool:
    """True when the empirical covariance is within 4 standard errors of 0.

    Only meaningful for finite-dependence-range specs at gaps beyond the
    range, where the strong-mixing coefficient is exactly zero and the
    covariance bound forces independence; smaller gaps are rejected.
    """
    d = dependence_range(spec)
    if gap <= d:
        raise ValueError(f"gap {gap} is within the dependence range {d}; bound not applicable")
    cov, se = window_covariance_mc(spec, gap, f, g, window_f, window_g, replicas, seed)
    return bool(abs(cov) <= 4.0 * se)


# ---------------------------------------------------------------------------
# JSON wire format
# ---------------------------------------------------------------------------


def _complex_out(z: complex):
    z = complex(z)
    return [z.real, z.imag]


def _complex_in(v) -> complex:
    if isinstance(v, (list, tuple)):
        return complex(v[0], v[1])
    return complex(v)


def spec_to_json(spec) -> dict:
    if isinstance(spec, IID):
        return {"kind": "iid", "law": spec.law, "variance": spec.variance}
    if isinstance(spec, MovingAverage):
        return {"kind": "ma", "coeffs": [_complex_out(c) for c in spec.coeffs]}
    if isinstance(spec, MarkovChain):
        return {
            "kind": "markov",
            "transition": spec.transition.tolist(),
            "stationary": spec.stationary.tolist(),
            "values": [_complex_out(v) for v in spec.values],
            "centered": spec.centered,
        }
    if isinstance(spec, GaussianSpectral):
        m = spec.measure
        out = {
            "kind": "gaussian-spectral",
            "window": spec.window,
            "field": spec.field,
            "atoms": [[w, mass] for w, mass in m.atoms],
        }
        if m.singularities:
            out["singularities"] = [[s.center, s.coeff] for s in m.singularities]
        out["density"] = m.density.tolist()
        return out
    if isinstance(spec, Rotation):
        return {
            "kind": "rotation",
            "alpha": spec.alpha,
            "fourier": {str(j): _complex_out(c) for j, c in spec.fourier},
        }
    raise SpecError(f"unsupported spec type {type(spec).__name__}")


def spec_from_json(doc: dict):
    """Parse the documented JSON wire format into a process spec.

    Gaussian-spectral densities may be given as the closed-form names
    ``"flat"`` (with ``mass``) or ``"singular-half-power"`` (with ``beta0``)
    instead of a grid array.
    """
    kind = doc.get("kind")
    if kind == "iid":
        return IID(doc.get("law", "complex-gaussian"), doc.get("variance", 1.0))
    if kind == "ma":
        return MovingAverage(tuple(_complex_in(c) for c in doc["coeffs"]))
    if kind == "markov":
        P = np.asarray(doc["transition"], dtype=float)
        if "stationary" in doc:
            pi = np.asarray(doc["stationary"], dtype=float)
        else:
            evals, vecs = np.linalg.eig(P.T)
            pi = vecs[:, int(np.argmax(evals.real))].real
            pi = np.abs(pi) / np.abs(pi).sum()
        vals = np.asarray([_complex_in(v) for v in doc["values"]])
        return MarkovChain(P, pi, vals, centered=doc.get("centered", True))
    if kind == "gaussian-spectral":
        dens = doc.get("density", "flat")
        grid = int(doc.get("grid_size", GRID_SIZE_DEFAULT))
        atoms = tuple((float(w), float(mass)) for w, mass in doc.get("atoms", ()))
        if dens == "flat":
            m = SpectralMeasure(np.full(grid, float(doc.get("mass", 1.0))), atoms=atoms)
        elif dens == "singular-half-power":
            m = SpectralMeasure.singular_half_power(float(doc["beta0"]), grid)
            if atoms:
                m = SpectralMeasure(m.density, atoms=atoms, singularities=m.singularities)
        else:
            sings = tuple(
                HalfPowerSingularity(c, co) for c, co in doc.get("singularities", ())
            )
            m = SpectralMeasure(np.asarray(dens, dtype=float), atoms=atoms, singularities=sings)
        return GaussianSpectral(m, int(doc["window"]), doc.get("field", "real"))
    if kind == "rotation":
        fourier = tuple((int(j), _complex_in(c)) for j, c in doc["fourier"].items())
        return Rotation(float(doc["alpha"]), fourier)
    raise SpecError(f"unknown process kind {kind!r}")
