"""Input ensembles, shot-noise samplers and S-shot feature matrices.

Randomness is drawn from counter-based Philox streams.  A stream is keyed
by the global seed plus a path of tags (for shots: the input index), and
the shot index selects the position inside the stream, so any shot can be
regenerated on its own and parallel maps do not depend on scheduling.
"""
from __future__ import annotations

import hashlib
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

INF_SHOTS = math.inf

MULTINOMIAL = "multinomial"
POISSON = "poisson"
GENERIC = "generic"

# Philox emits four 64-bit words per counter increment
_WORDS_PER_BLOCK = 4


class DomainError(ValueError):
    """Input outside the mathematical domain of an operation."""


class StructuralError(ValueError):
    """Inconsistent shapes or ragged collections."""


def is_infinite(shots) -> bool:
    return shots is None or (isinstance(shots, float) and math.isinf(shots))


def check_shots(shots):
    """Normalize a shot count: positive int, or the infinite sentinel."""
    if is_infinite(shots):
        return INF_SHOTS
    if isinstance(shots, str) and shots.lower() in ("inf", "infinity"):
        return INF_SHOTS
    s = int(shots)
    if s != shots or s < 1:
        raise DomainError(f"shots must be a positive integer or inf, got {shots!r}")
    return s


def _tag(x) -> int:
    if isinstance(x, (int, np.integer)):
        if x < 0:
            raise DomainError(f"stream tags must be nonnegative, got {x}")
        return int(x)
    if isinstance(x, str):
        return int.from_bytes(hashlib.blake2b(x.encode(), digest_size=4).digest(), "little")
    raise TypeError(f"unsupported stream tag {x!r}")


def stream_key(seed: int, *path) -> np.ndarray:
    """128-bit Philox key derived from the global seed and a tag path."""
    if int(seed) < 0:
        raise DomainError(f"seed must be nonnegative, got {seed}")
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(_tag(p) for p in path))
    return ss.generate_state(2, dtype=np.uint64)


def sub_seed(seed: int, *path) -> int:
    """Nonnegative 63-bit seed derived from a parent seed and a tag path."""
    return int(stream_key(seed, *path)[0] >> np.uint64(1))


def rng_stream(seed: int, *path, offset_words: int = 0) -> np.random.Generator:
    """Generator positioned ``offset_words`` 64-bit draws into a keyed stream.

    Each float from ``Generator.random`` consumes exactly one word, so draw
    ``i`` of the stream is reproducible in isolation.
    """
    bitgen = np.random.Philox(key=stream_key(seed, *path))
    block, rest = divmod(int(offset_words), _WORDS_PER_BLOCK)
    if block:
        bitgen.advance(block)
    gen = np.random.Generator(bitgen)
    if rest:
        gen.random(rest)
    return gen


def shot_stream(seed: int, input_index: int, first_shot: int = 0, width: int = 1):
    """Stream for the shots of one input; ``width`` uniforms per shot."""
    return rng_stream(seed, "shots", int(input_index), offset_words=first_shot * width)


# --------------------------------------------------------------------------
# ensembles

@dataclass(frozen=True)
class InputEnsemble:
    values: np.ndarray
    weights: np.ndarray
    kind: str = "custom"
    seed: int | None = None

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).reshape(-1)
        w = np.asarray(self.weights, dtype=float).reshape(-1)
        if v.size == 0:
            raise StructuralError("ensemble has no inputs")
        if v.shape != w.shape:
            raise StructuralError(f"{v.size} values but {w.size} weights")
        if np.any(np.abs(v) > 1.0):
            raise DomainError(f"input values must lie in [-1, 1], max |u| = {np.abs(v).max()}")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
            raise DomainError(f"weights must be nonnegative and sum to 1, sum = {w.sum()!r}")
        v.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "weights", w)

    @property
    def N(self) -> int:
        return self.values.size

    @classmethod
    def iid_uniform(cls, N: int, seed: int) -> "InputEnsemble":
        gen = rng_stream(seed, "ensemble")
        u = gen.uniform(-1.0, 1.0, size=int(N))
        return cls(u, np.full(int(N), 1.0 / N), "iid-uniform", int(seed))

    @classmethod
    def grid(cls, N: int) -> "InputEnsemble":
        """Equispaced grid on [-1, 1] with trapezoid weights for p(u) = 1/2."""
        N = int(N)
        if N < 2:
            raise DomainError("grid needs at least two points")
        u = np.linspace(-1.0, 1.0, N)
        w = np.full(N, 1.0 / (N - 1))
        w[0] = w[-1] = 0.5 / (N - 1)
        w /= w.sum()
        return cls(u, w, "equispaced-grid")

    @classmethod
    def from_values(cls, values, weights=None) -> "InputEnsemble":
        v = np.asarray(values, dtype=float).reshape(-1)
        if weights is None:
            weights = np.full(v.size, 1.0 / v.size)
        return cls(v, weights, "custom")

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "N": self.N}
        if self.seed is not None:
            d["seed"] = self.seed
        return d


def make_ensemble(spec: dict, seed: int) -> InputEnsemble:
    """Build an ensemble from a config mapping {kind, N}."""
    kind = spec.get("kind", "iid-uniform")
    N = int(spec["N"])
    if kind == "iid-uniform":
        return InputEnsemble.iid_uniform(N, seed)
    if kind == "equispaced-grid":
        return InputEnsemble.grid(N)
    raise DomainError(f"unknown ensemble kind {kind!r}")


# --------------------------------------------------------------------------
# shot records

@dataclass(frozen=True)
class ShotRecord:
    """Raw outcomes for one input.

    ``outcomes`` is a length-S integer vector of outcome indices for
    multinomial generators and an S x K count array for Poisson ones.
    """
    input_index: int
    outcomes: np.ndarray
    kind: str = MULTINOMIAL
    u: float | None = None

    def __post_init__(self):
        o = np.asarray(self.outcomes)
        if o.size and not np.issubdtype(o.dtype, np.integer):
            if not np.all(o == np.round(o)):
                raise DomainError("outcomes must be integers")
        o = o.astype(np.int64)
        if self.kind == MULTINOMIAL:
            if o.ndim != 1:
                raise StructuralError("multinomial outcomes must be a flat index list")
            if np.any(o < 0):
                raise DomainError("outcome indices must be nonnegative")
        elif self.kind == POISSON:
            if o.ndim != 2:
                raise StructuralError("Poisson outcomes must be an S x K count array")
            if np.any(o < 0):
                raise DomainError("counts must be nonnegative")
        else:
            raise DomainError(f"unknown record kind {self.kind!r}")
        o.setflags(write=False)
        object.__setattr__(self, "outcomes", o)

    @property
    def shots(self) -> int:
        return self.outcomes.shape[0]

    def indicators(self, K: int) -> np.ndarray:
        """Per-shot S x K matrix of indicators or counts."""
        if self.kind == POISSON:
            if self.outcomes.shape[1] != K:
                raise StructuralError(f"record has {self.outcomes.shape[1]} detectors, expected {K}")
            return self.outcomes.astype(float)
        if self.outcomes.size and self.outcomes.max() >= K:
            raise DomainError(f"outcome index {self.outcomes.max()} out of range for K={K}")
        out = np.zeros((self.shots, K))
        out[np.arange(self.shots), self.outcomes] = 1.0
        return out

    def mean(self, K: int) -> np.ndarray:
        if self.kind == POISSON:
            return self.indicators(K).mean(axis=0)
        if self.outcomes.size and self.outcomes.max() >= K:
            raise DomainError(f"outcome index {self.outcomes.max()} out of range for K={K}")
        return np.bincount(self.outcomes, minlength=K) / self.shots


def _check_simplex(p, tol=1e-9) -> np.ndarray:
    p = np.asarray(p, dtype=float).reshape(-1)
    if p.size == 0:
        raise DomainError("empty probability vector")
    bad = np.flatnonzero(~np.isfinite(p) | (p < -tol))
    if bad.size:
        raise DomainError(f"probability entry {bad[0]} = {p[bad[0]]!r} is not a nonnegative number")
    total = p.sum()
    if abs(total - 1.0) > tol:
        raise DomainError(f"probabilities sum to {total!r}, not 1")
    return np.clip(p, 0.0, None)


def multinomial_outcomes(p: np.ndarray, uniforms: np.ndarray) -> np.ndarray:
    """Inverse-CDF map from uniforms in [0, 1) to outcome indices."""
    cdf = np.cumsum(p)
    cdf /= cdf[-1]
    idx = np.searchsorted(cdf, uniforms, side="right")
    return np.minimum(idx, p.size - 1)


def sample_multinomial(probabilities, shots: int, stream: np.random.Generator,
                       input_index: int = 0, u: float | None = None) -> ShotRecord:
    """Draw S outcome indices, one uniform per shot."""
    p = _check_simplex(probabilities)
    S = check_shots(shots)
    if is_infinite(S):
        raise DomainError("cannot draw an infinite number of shots")
    k = multinomial_outcomes(p, stream.random(S))
    return ShotRecord(input_index, k, MULTINOMIAL, u)


def poisson_outcomes(means: np.ndarray, uniforms: np.ndarray) -> np.ndarray:
    """Inverse-CDF Poisson counts; ``uniforms`` is S x K."""
    S, K = uniforms.shape
    counts = np.zeros((S, K), dtype=np.int64)
    for k, m in enumerate(means):
        if m <= 0.0:
            continue
        n_max = int(math.ceil(m + 12.0 * math.sqrt(m) + 15.0))
        cdf = stats.poisson.cdf(np.arange(n_max + 1), m)
        counts[:, k] = np.minimum(np.searchsorted(cdf, uniforms[:, k], side="right"), n_max)
    return counts


def _check_means(means) -> np.ndarray:
    m = np.asarray(means, dtype=float).reshape(-1)
    if not np.all(np.isfinite(m)):
        raise DomainError("Poisson means must be finite")
    neg = np.flatnonzero(m < 0)
    if neg.size:
        raise DomainError(f"Poisson mean {neg[0]} = {m[neg[0]]!r} is negative")
    return m


def sample_poisson_counts(means, shots: int, stream: np.random.Generator,
                          input_index: int = 0, u: float | None = None) -> ShotRecord:
    """Draw S independent count vectors; one uniform per shot and detector."""
    m = _check_means(means)
    S = check_shots(shots)
    if is_infinite(S):
        raise DomainError("cannot draw an infinite number of shots")
    counts = poisson_outcomes(m, stream.random((S, m.size)))
    return ShotRecord(input_index, counts, POISSON, u)


# --------------------------------------------------------------------------
# feature matrices

@dataclass(frozen=True)
class FeatureMatrix:
    data: np.ndarray
    shots: float
    ensemble: InputEnsemble
    model: str = MULTINOMIAL
    seed: int | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        F = np.array(self.data, dtype=float, copy=True)
        if F.ndim != 2:
            raise StructuralError("feature data must be N x K")
        if F.shape[0] == 0:
            raise StructuralError("feature matrix has no rows")
        if F.shape[0] != self.ensemble.N:
            raise StructuralError(f"{F.shape[0]} rows for an ensemble of {self.ensemble.N} inputs")
        if not np.all(np.isfinite(F)):
            raise DomainError("features must be finite")
        if self.model == MULTINOMIAL:
            if F.min() < 0.0 or F.max() > 1.0 + 1e-12:
                raise DomainError("multinomial features must lie in [0, 1]")
            dev = np.abs(F.sum(axis=1) - 1.0).max()
            if dev > 1e-10:
                raise DomainError(f"multinomial rows must sum to 1 (max deviation {dev:.3g})")
        elif self.model == POISSON:
            if F.min() < 0.0:
                raise DomainError("Poisson features must be nonnegative")
        else:
            raise DomainError(f"unknown feature model {self.model!r}")
        F.setflags(write=False)
        object.__setattr__(self, "data", F)
        object.__setattr__(self, "shots", check_shots(self.shots))

    @property
    def N(self) -> int:
        return self.data.shape[0]

    @property
    def K(self) -> int:
        return self.data.shape[1]

    @property
    def exact(self) -> bool:
        return is_infinite(self.shots)


def assemble_features(records, K: int, shots, ensemble: InputEnsemble | None = None,
                      exact: np.ndarray | None = None, model: str | None = None,
                      seed: int | None = None) -> FeatureMatrix:
    """Average shot records into an N x K feature matrix.

    With ``shots = inf`` no records are used and ``exact`` (the N x K table
    of expected features) is passed through.
    """
    S = check_shots(shots)
    if is_infinite(S):
        if exact is None:
            raise StructuralError("the infinite-shot path needs the exact feature table")
        exact = np.asarray(exact, dtype=float)
        if ensemble is None:
            ensemble = InputEnsemble.from_values(np.zeros(exact.shape[0]))
        return FeatureMatrix(exact, S, ensemble, model or MULTINOMIAL, seed)

    records = list(records)
    if not records:
        raise StructuralError("no shot records")
    kinds = {r.kind for r in records}
    if len(kinds) != 1:
        raise StructuralError(f"mixed record kinds {sorted(kinds)}")
    kind = kinds.pop()
    order = sorted(range(len(records)), key=lambda i: records[i].input_index)
    idx = [records[i].input_index for i in order]
    if idx != list(range(len(records))):
        raise StructuralError("records must cover input indices 0..N-1 exactly once")
    rows = []
    for i in order:
        r = records[i]
        if r.shots != S:
            raise StructuralError(f"record {r.input_index} has {r.shots} shots, expected {S}")
        rows.append(r.mean(K))
    if ensemble is None:
        u = [records[i].u if records[i].u is not None else 0.0 for i in order]
        ensemble = InputEnsemble.from_values(u)
    return FeatureMatrix(np.vstack(rows), S, ensemble, model or kind, seed)


def _sample_one(x_row, n, seed, S, model, keep):
    if model == MULTINOMIAL:
        p = _check_simplex(x_row)
        k = multinomial_outcomes(p, shot_stream(seed, n).random(S))
        mean = np.bincount(k, minlength=p.size) / S
        return mean, (k if keep else None)
    m = _check_means(x_row)
    counts = poisson_outcomes(m, shot_stream(seed, n, width=m.size).random((S, m.size)))
    return counts.mean(axis=0), (counts if keep else None)


def sample_features(x_table, ensemble: InputEnsemble, shots, seed: int,
                    model: str = MULTINOMIAL, keep_records: bool = False,
                    threads: int = 1):
    """Sample S-shot features for every ensemble input.

    Returns ``(FeatureMatrix, records)``; records is None unless requested
    or when ``shots`` is infinite.
    """
    x = np.asarray(x_table, dtype=float)
    if x.ndim != 2 or x.shape[0] != ensemble.N:
        raise StructuralError(f"expected an {ensemble.N} x K table, got shape {x.shape}")
    S = check_shots(shots)
    if is_infinite(S):
        return FeatureMatrix(x, S, ensemble, model, seed), None
    if model not in (MULTINOMIAL, POISSON):
        raise DomainError(f"unknown sampling model {model!r}")

    def job(n):
        return _sample_one(x[n], n, seed, S, model, keep_records)

    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=int(threads)) as pool:
            out = list(pool.map(job, range(ensemble.N)))
    else:
        out = [job(n) for n in range(ensemble.N)]
    data = np.vstack([o[0] for o in out])
    records = None
    if keep_records:
        records = [ShotRecord(n, o[1], model, float(ensemble.values[n])) for n, o in enumerate(out)]
    return FeatureMatrix(data, S, ensemble, model, seed), records


def per_input_covariance(x_table, model: str) -> np.ndarray:
    """Single-shot covariance Sigma(u) for each row, shape N x K x K."""
    x = np.atleast_2d(np.asarray(x_table, dtype=float))
    diag = np.einsum("nk,kj->nkj", x, np.eye(x.shape[1]))
    if model == MULTINOMIAL:
        return diag - np.einsum("nj,nk->njk", x, x)
    if model == POISSON:
        return diag
    raise DomainError(f"no analytic covariance for model {model!r}")
