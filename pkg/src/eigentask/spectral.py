"""Moment estimation, noise-to-signal spectra, eigentasks and capacity.

All expectations over inputs use the ensemble weights, so i.i.d. samples
(weights 1/N) and quadrature grids go through the same code.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .sampling import (GENERIC, INF_SHOTS, MULTINOMIAL, POISSON, DomainError,
                       FeatureMatrix, InputEnsemble, StructuralError, check_shots,
                       is_infinite)

EPS = np.finfo(float).eps


class ArgumentError(ValueError):
    """Missing or incompatible arguments."""


class NumericalError(ArithmeticError):
    """A numerical routine could not produce a meaningful result."""


def _sym(A):
    A = np.asarray(A, dtype=float)
    return 0.5 * (A + A.T)


def _frozen(A):
    A = np.array(A, dtype=float, copy=True)
    A.setflags(write=False)
    return A


@dataclass(frozen=True)
class MomentEstimates:
    G: np.ndarray
    D: np.ndarray
    V: np.ndarray
    N: int | None = None
    S: float = INF_SHOTS
    noise_model: str = MULTINOMIAL
    raw: bool = False
    flags: dict = field(default_factory=dict)

    def __post_init__(self):
        G, V = np.asarray(self.G, float), np.asarray(self.V, float)
        D = np.asarray(self.D, float)
        if D.ndim == 1:
            D = np.diag(D)
        K = G.shape[0]
        if G.shape != (K, K) or D.shape != (K, K) or V.shape != (K, K):
            raise StructuralError("G, D, V must all be K x K")
        scale = max(1.0, np.abs(G).max(), np.abs(V).max())
        if np.abs(G - G.T).max() > 1e-12 * scale or np.abs(V - V.T).max() > 1e-12 * scale:
            raise DomainError("G and V must be symmetric")
        if np.count_nonzero(D - np.diag(np.diag(D))):
            raise DomainError("D must be diagonal")
        object.__setattr__(self, "G", _frozen(_sym(G)))
        object.__setattr__(self, "D", _frozen(D))
        object.__setattr__(self, "V", _frozen(_sym(V)))
        object.__setattr__(self, "S", check_shots(self.S))

    @property
    def K(self) -> int:
        return self.G.shape[0]

    @property
    def meta(self) -> dict:
        return {"N": self.N, "S": self.S, "noise_model": self.noise_model,
                "raw": self.raw, **self.flags}


def exact_moments(x_table, weights, model: str = MULTINOMIAL) -> MomentEstimates:
    """Moments of expected features under the given input weights."""
    x = np.atleast_2d(np.asarray(x_table, dtype=float))
    w = np.asarray(weights, dtype=float)
    G = (x * w[:, None]).T @ x
    d = w @ x
    D = np.diag(d)
    if model == MULTINOMIAL:
        V = D - G
    elif model == POISSON:
        V = D.copy()
    else:
        raise ArgumentError(f"no analytic covariance for model {model!r}")
    return MomentEstimates(G, D, V, x.shape[0], INF_SHOTS, model)


def bessel_covariance(records, features: FeatureMatrix) -> np.ndarray:
    """Weighted mean over inputs of the per-input unbiased shot covariance."""
    S = features.shots
    if S < 2:
        raise ArgumentError("Bessel correction needs at least two shots per input")
    w = features.ensemble.weights
    recs = sorted(records, key=lambda r: r.input_index)
    if len(recs) != features.N:
        raise StructuralError(f"{len(recs)} records for {features.N} feature rows")
    V = np.zeros((features.K, features.K))
    for n, r in enumerate(recs):
        X = r.indicators(features.K)
        if X.shape[0] != S:
            raise StructuralError(f"record {r.input_index} has {X.shape[0]} shots, expected {S}")
        xbar = X.mean(axis=0)
        if np.abs(xbar - features.data[n]).max() > 1e-9:
            raise StructuralError(f"record {r.input_index} does not match feature row {n}")
        Z = X - xbar
        V += w[n] * (Z.T @ Z) / (S - 1)
    return _sym(V)


def estimate_moments(features: FeatureMatrix, records=None, model: str | None = None,
                     debias: bool = True) -> MomentEstimates:
    """G, D, V from an N x K feature matrix.

    ``debias=False`` returns the raw finite-sample estimates G~, D~ together
    with the matching raw covariance (D~ - G~ for multinomial data, D~ for
    Poisson data), which is the input expected by ``correct_finite_shots``.
    """
    model = model or features.model
    F, w = features.data, features.ensemble.weights
    N, K = F.shape
    if N < K:
        warnings.warn(f"fewer inputs ({N}) than features ({K})", RuntimeWarning, stacklevel=2)
    Gt = _sym((F * w[:, None]).T @ F)
    dt = w @ F
    Dt = np.diag(dt)
    S = features.shots

    if is_infinite(S):
        if model == GENERIC:
            raise ArgumentError("exact features carry no shot records; pick multinomial or poisson")
        return exact_moments(F, w, model)

    if model == MULTINOMIAL:
        if not debias:
            return MomentEstimates(Gt, Dt, Dt - Gt, N, S, model, raw=True)
        if S == 1:
            warnings.warn("S=1: multinomial de-bias undefined, returning raw estimates",
                          RuntimeWarning, stacklevel=2)
            return MomentEstimates(Gt, Dt, Dt - Gt, N, S, model, raw=True,
                                   flags={"fallback": "S=1 raw estimates"})
        G = (S * Gt - Dt) / (S - 1)
        return MomentEstimates(G, Dt, Dt - G, N, S, model)

    if model == POISSON:
        if not debias:
            return MomentEstimates(Gt, Dt, Dt.copy(), N, S, model, raw=True)
        return MomentEstimates(Gt - Dt / S, Dt, Dt.copy(), N, S, model)

    if model == GENERIC:
        if records is None:
            raise ArgumentError("model=generic needs the per-shot records")
        V = bessel_covariance(records, features)
        G = Gt if not debias else Gt - V / S
        return MomentEstimates(G, Dt, V, N, S, model, raw=not debias)

    raise ArgumentError(f"unknown noise model {model!r}")


# --------------------------------------------------------------------------
# spectra

@dataclass(frozen=True)
class NsrSpectrum:
    """NSR eigenvalues (ascending) with G-orthonormal coefficient columns.

    ``beta2`` holds inf where ``correctable`` is False; the flag array is
    the authoritative marker.
    """
    beta2: np.ndarray
    r: np.ndarray
    correctable: np.ndarray
    rank_G: int
    noise_model: str = MULTINOMIAL
    shots: float = INF_SHOTS
    corrected: bool = False
    raw: bool = False
    dropped: tuple = ()
    method: str = ""

    def __post_init__(self):
        b = np.array(self.beta2, dtype=float)
        c = np.array(self.correctable, dtype=bool)
        b[~c] = np.inf
        if np.any(b[c] < 0):
            raise DomainError("NSR eigenvalues must be nonnegative")
        if np.any(np.diff(b[np.isfinite(b)]) < 0):
            raise DomainError("NSR eigenvalues must be sorted ascending")
        for name, val in (("beta2", b), ("correctable", c), ("r", np.asarray(self.r, float))):
            val = np.array(val, copy=True)
            val.setflags(write=False)
            object.__setattr__(self, name, val)
        object.__setattr__(self, "dropped", tuple(int(i) for i in self.dropped))

    @property
    def K(self) -> int:
        return self.beta2.size

    @property
    def alpha(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.where(self.correctable, 1.0 / (1.0 + self.beta2), 0.0)


def _sign_fix(R):
    """Flip columns so the largest-magnitude entry of each is positive."""
    R = np.array(R, dtype=float)
    for k in range(R.shape[1]):
        col = R[:, k]
        if not np.any(col):
            continue
        i = int(np.argmax(np.abs(col)))
        if col[i] < 0:
            R[:, k] = -col
    return R


def effective_rank(G) -> int:
    lam = np.linalg.eigvalsh(_sym(G))
    top = lam.max(initial=0.0)
    if top <= 0:
        return 0
    return int(np.count_nonzero(lam > G.shape[0] * EPS * top))


def _finish(beta2, R_active, finite, active, K, rank, moments, method):
    order = np.lexsort((np.arange(beta2.size), np.where(finite, beta2, np.inf)))
    beta2, R_active, finite = beta2[order], R_active[:, order], finite[order]
    R = np.zeros((K, K))
    R[np.ix_(active, np.arange(active.size))] = _sign_fix(R_active)
    dropped = np.setdiff1d(np.arange(K), active)
    b = np.full(K, np.inf)
    b[:beta2.size] = beta2
    c = np.zeros(K, dtype=bool)
    c[:finite.size] = finite
    return NsrSpectrum(b, R, c, rank, moments.noise_model, moments.S,
                       raw=moments.raw, dropped=tuple(dropped), method=method)


def _active_columns(moments):
    d = np.diag(moments.D)
    K = d.size
    if moments.noise_model in (MULTINOMIAL, POISSON):
        top = d.max(initial=0.0)
        keep = d > K * EPS * max(top, 0.0)
    else:
        g = np.diag(moments.G)
        keep = g > K * EPS * max(g.max(initial=0.0), 0.0)
    return np.flatnonzero(keep)


def _symmetric_route(Gs, scale, alpha_to_beta2):
    """Eigen-decompose diag(scale) G diag(scale); returns beta2, R, finite."""
    A = _sym(scale[:, None] * Gs * scale[None, :])
    lam, T = np.linalg.eigh(A)
    lam, T = lam[::-1], T[:, ::-1]
    tol = lam.size * EPS * max(abs(lam).max(initial=0.0), EPS)
    finite = lam > tol
    safe = np.where(finite, lam, 1.0)
    beta2 = np.where(finite, np.maximum(alpha_to_beta2(safe), 0.0), np.inf)
    R = scale[:, None] * T / np.sqrt(safe)[None, :]
    return beta2, R, finite


def solve_nsr(moments: MomentEstimates, method: str | None = None) -> NsrSpectrum:
    """Solve V r = beta^2 G r.

    method: "multinomial" (symmetric form of D^-1 G, valid when V = D - G),
    "diagonal" (V^-1 G for diagonal V) or "whiten" (generic: whiten by G,
    then diagonalize V).  The default follows the noise model.
    """
    K = moments.K
    active = _active_columns(moments)
    if active.size == 0:
        raise NumericalError("every feature column is zero")
    G = moments.G[np.ix_(active, active)]
    V = moments.V[np.ix_(active, active)]
    d = np.diag(moments.D)[active]
    rank = effective_rank(moments.G)
    if method is None:
        if moments.noise_model == MULTINOMIAL:
            method = "multinomial"
        elif moments.noise_model == POISSON and not np.count_nonzero(V - np.diag(np.diag(V))):
            method = "diagonal"
        else:
            method = "whiten"

    if method == "multinomial":
        beta2, R, finite = _symmetric_route(G, 1.0 / np.sqrt(d), lambda a: 1.0 / a - 1.0)
    elif method == "diagonal":
        v = np.diag(V)
        if np.any(v <= 0):
            raise NumericalError("diagonal route needs a positive noise variance on every feature")
        beta2, R, finite = _symmetric_route(G, 1.0 / np.sqrt(v), lambda a: 1.0 / a)
    elif method == "whiten":
        beta2, R, finite = _whiten_route(G, V)
    else:
        raise ArgumentError(f"unknown method {method!r}")
    return _finish(beta2, R, finite, active, K, rank, moments, method)


def _whiten_route(G, V):
    lam, Q = np.linalg.eigh(G)
    keep = lam > G.shape[0] * EPS * max(lam.max(initial=0.0), EPS)
    W = Q[:, keep] / np.sqrt(lam[keep])[None, :]
    b, Sv = np.linalg.eigh(_sym(W.T @ V @ W))
    beta2 = np.concatenate([np.maximum(b, 0.0), np.full(np.count_nonzero(~keep), np.inf)])
    R = np.hstack([W @ Sv, Q[:, ~keep]])
    finite = np.isfinite(beta2)
    return beta2, R, finite


def correct_finite_shots(spectrum_tilde: NsrSpectrum, S: int, model: str | None = None) -> NsrSpectrum:
    """Map raw eigenvalues estimated from S-shot data to their S = inf values.

    Multinomial: beta2 = S b / ((S - 1) - b), finite only for b < S - 1.
    Poisson:     beta2 = S b / (S - b),       finite only for b < S.
    """
    S = check_shots(S)
    if is_infinite(S) or S < 2:
        raise DomainError(f"finite-shot correction needs 2 <= S < inf, got {S}")
    model = model or spectrum_tilde.noise_model
    b = spectrum_tilde.beta2
    limit = S - 1 if model == MULTINOMIAL else S
    ok = spectrum_tilde.correctable & (b < limit)
    with np.errstate(divide="ignore", invalid="ignore"):
        new = np.where(ok, S * b / (limit - b), np.inf)
    order = np.lexsort((np.arange(b.size), np.where(ok, new, np.inf)))
    return NsrSpectrum(new[order], spectrum_tilde.r[:, order], ok[order], spectrum_tilde.rank_G,
                       model, S, corrected=True, raw=False,
                       dropped=spectrum_tilde.dropped, method=spectrum_tilde.method)


def rec(spectrum: NsrSpectrum, S) -> float:
    """C_T(S) = sum_k 1 / (1 + beta_k^2 / S) over correctable entries."""
    S = check_shots(S)
    b = spectrum.beta2[spectrum.correctable]
    if is_infinite(S):
        return float(b.size)
    return float(np.sum(1.0 / (1.0 + b / S)))


def rec_trace(moments: MomentEstimates, S) -> float:
    """C_T(S) = Tr((G + V/S)^+ G)."""
    S = check_shots(S)
    M = moments.G if is_infinite(S) else moments.G + moments.V / S
    Mp = np.linalg.pinv(_sym(M), rcond=moments.K * EPS, hermitian=True)
    return float(np.trace(Mp @ moments.G))


@dataclass(frozen=True)
class RecCurve:
    points: tuple
    rank_G: int

    @property
    def S(self):
        return np.array([p[0] for p in self.points], dtype=float)

    @property
    def C(self):
        return np.array([p[1] for p in self.points])


def rec_curve(spectrum: NsrSpectrum, S_list) -> RecCurve:
    Ss = sorted(check_shots(s) for s in S_list)
    return RecCurve(tuple((s, rec(spectrum, s)) for s in Ss), spectrum.rank_G)


def k_cutoff(spectrum: NsrSpectrum, S) -> int:
    """Number of eigentasks with beta^2 < S."""
    S = check_shots(S)
    b = spectrum.beta2[spectrum.correctable]
    return int(np.count_nonzero(b < S))


def function_capacity(f_values, features: FeatureMatrix, moments: MomentEstimates,
                      shots=None):
    """Optimal linear-readout capacity of a target sampled on the ensemble.

    Returns (C, w) with w = (G + V/S)^+ E_u[x f] and
    C = E_u[x f]^T w / E_u[f^2].  ``shots`` defaults to features.shots.
    """
    f = np.asarray(f_values, dtype=float).reshape(-1)
    if f.size != features.N:
        raise StructuralError(f"target has {f.size} values for {features.N} inputs")
    wts = features.ensemble.weights
    norm = float(wts @ (f * f))
    if not norm > 0:
        raise DomainError("target has zero norm under the input distribution")
    S = check_shots(features.shots if shots is None else shots)
    b = features.data.T @ (wts * f)
    M = moments.G if is_infinite(S) else moments.G + moments.V / S
    w = np.linalg.pinv(_sym(M), rcond=moments.K * EPS, hermitian=True) @ b
    return float(b @ w) / norm, w


# --------------------------------------------------------------------------
# eigentasks

@dataclass(frozen=True)
class EigentaskTable:
    y: np.ndarray | None
    y_bar: np.ndarray | None
    shots: float
    ensemble: InputEnsemble
    beta2: np.ndarray
    x: np.ndarray | None = None
    r: np.ndarray | None = None

    @property
    def K(self) -> int:
        return self.beta2.size


def _table(src, ensemble):
    if src is None:
        return None
    if isinstance(src, FeatureMatrix):
        return src.data
    if hasattr(src, "tabulate"):
        if ensemble is None:
            raise ArgumentError("a probability map needs an ensemble to tabulate")
        return src.tabulate(ensemble)
    return np.atleast_2d(np.asarray(src, dtype=float))


def eigentasks(source, spectrum: NsrSpectrum, measured: FeatureMatrix | None = None,
               ensemble: InputEnsemble | None = None) -> EigentaskTable:
    """Tabulate y^(k) = r^(k) . x and ybar^(k) = r^(k) . Xbar.

    ``source`` gives the exact features (probability map, exact
    FeatureMatrix or N x K array) and may be None when only measured data
    are available.
    """
    if ensemble is None:
        for obj in (measured, source):
            if isinstance(obj, FeatureMatrix):
                ensemble = obj.ensemble
                break
    x = _table(source, ensemble)
    xb = None if measured is None else measured.data
    if x is None and xb is None:
        raise ArgumentError("need exact or measured features")
    for arr in (x, xb):
        if arr is not None and arr.shape[1] != spectrum.K:
            raise StructuralError(f"features have K={arr.shape[1]}, spectrum has K={spectrum.K}")
    if ensemble is None:
        n = (x if x is not None else xb).shape[0]
        ensemble = InputEnsemble.from_values(np.zeros(n))
    y = None if x is None else x @ spectrum.r
    yb = None if xb is None else xb @ spectrum.r
    S = measured.shots if measured is not None else INF_SHOTS
    return EigentaskTable(y, yb, S, ensemble, spectrum.beta2, x, spectrum.r)


def gram_free_svd(features: FeatureMatrix, model: str | None = None,
                  return_coordinates: bool = False):
    """Raw spectrum from the SVD of D~^{-1/2} F~^T diag(sqrt(w)).

    Squared singular values are the raw eigenvalues alpha~ of D~^-1 G~.
    With ``return_coordinates`` the K x N matrix Sigma V^T is returned too;
    its row k is proportional to ybar^(k) on the ensemble.
    """
    model = model or features.model
    F, w = features.data, features.ensemble.weights
    N, K = F.shape
    d = w @ F
    active = np.flatnonzero(d > K * EPS * max(d.max(initial=0.0), 0.0))
    if active.size == 0:
        raise NumericalError("every feature column is zero")
    if active.size < K:
        warnings.warn(f"dropping {K - active.size} never-observed feature columns",
                      RuntimeWarning, stacklevel=2)
    scale = 1.0 / np.sqrt(d[active])
    A = scale[:, None] * F[:, active].T * np.sqrt(w)[None, :]
    U, sig, Vt = np.linalg.svd(A, full_matrices=False)
    a = np.zeros(active.size)
    a[:sig.size] = sig ** 2
    T = np.zeros((active.size, active.size))
    T[:, :U.shape[1]] = U
    if U.shape[1] < active.size:
        # complete the basis for inputs fewer than features
        Q, _ = np.linalg.qr(np.hstack([U, np.eye(active.size)]))
        T[:, U.shape[1]:] = Q[:, U.shape[1]:active.size]
    tol = active.size * EPS * max(a.max(initial=0.0), EPS)
    finite = a > tol
    safe = np.where(finite, a, 1.0)
    if model == MULTINOMIAL:
        beta2 = np.where(finite, np.maximum(1.0 / safe - 1.0, 0.0), np.inf)
    else:
        beta2 = np.where(finite, 1.0 / safe, np.inf)
    R = scale[:, None] * T / np.sqrt(safe)[None, :]
    flip = np.sign(R[np.argmax(np.abs(R), axis=0), np.arange(R.shape[1])])
    flip[flip == 0] = 1.0
    R = R * flip[None, :]
    proxy = MomentEstimates(np.zeros((K, K)), np.eye(K), np.zeros((K, K)), N, features.shots,
                            model, raw=not features.exact)
    rank = int(np.count_nonzero(finite))
    spec = _finish(beta2, R, finite, active, K, rank, proxy, "svd")
    if not return_coordinates:
        return spec
    coords = (flip[:sig.size] * sig)[:, None] * Vt
    return spec, coords
