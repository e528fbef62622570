"""Eigentask learning on a two-class task over u in [-1, 1].

Readouts are logistic regressions on the first K_L noisy eigentasks,
trained by fixed-step full-batch gradient descent without a bias term or
explicit penalty.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, special, stats

from .sampling import (DomainError, InputEnsemble, StructuralError, check_shots, is_infinite,
                       rng_stream, sample_features, sub_seed)
from .spectral import (EigentaskTable, NsrSpectrum, correct_finite_shots, eigentasks,
                       estimate_moments, k_cutoff, solve_nsr)

# (weight, mean, sd) components, truncated to [-1, 1] and renormalized
REFERENCE_P0 = ((0.5, -0.55, 0.15), (0.5, 0.35, 0.12))
REFERENCE_P1 = ((0.5, -0.10, 0.12), (0.5, 0.70, 0.14))


@dataclass(frozen=True)
class MixtureDensity:
    """Gaussian mixture truncated to [-1, 1]."""
    components: tuple

    def __post_init__(self):
        comps = tuple((float(w), float(m), float(s)) for w, m, s in self.components)
        if not comps or any(w < 0 or s <= 0 for w, _, s in comps):
            raise DomainError("mixture needs nonnegative weights and positive widths")
        object.__setattr__(self, "components", comps)

    def _masses(self):
        return np.array([w * (stats.norm.cdf(1, m, s) - stats.norm.cdf(-1, m, s))
                         for w, m, s in self.components])

    def pdf(self, u):
        u = np.asarray(u, dtype=float)
        raw = sum(w * stats.norm.pdf(u, m, s) for w, m, s in self.components)
        return np.where(np.abs(u) <= 1.0, raw / self._masses().sum(), 0.0)

    def sample(self, gen: np.random.Generator, n: int) -> np.ndarray:
        mass = self._masses()
        which = gen.choice(len(self.components), size=n, p=mass / mass.sum())
        out = np.empty(n)
        for c, (_, m, s) in enumerate(self.components):
            sel = which == c
            a, b = (-1 - m) / s, (1 - m) / s
            out[sel] = stats.truncnorm.rvs(a, b, loc=m, scale=s, size=int(sel.sum()),
                                           random_state=gen)
        return out


@dataclass(frozen=True)
class ClassificationTask:
    p0: MixtureDensity
    p1: MixtureDensity
    u: np.ndarray
    labels: np.ndarray
    train_idx: np.ndarray
    test_idx: np.ndarray
    seed: int | None = None

    def class_likelihood(self, u):
        """Pr[c = 1 | u] = p1 / (p0 + p1), taken as 1/2 where both vanish."""
        a, b = self.p0.pdf(u), self.p1.pdf(u)
        tot = a + b
        return np.where(tot > 0, b / np.where(tot > 0, tot, 1.0), 0.5)

    @property
    def ensemble(self) -> InputEnsemble:
        return InputEnsemble.from_values(self.u)

    def resplit(self, seed: int) -> "ClassificationTask":
        """New balanced train/test selection from the same sample pool."""
        gen = rng_stream(seed, "split")
        n_train = self.train_idx.size
        tr, te = _balanced_split(self.labels, n_train, gen)
        return ClassificationTask(self.p0, self.p1, self.u, self.labels, tr, te, self.seed)

    def to_dict(self) -> dict:
        return {"p0": [list(c) for c in self.p0.components],
                "p1": [list(c) for c in self.p1.components],
                "n_train": int(self.train_idx.size), "n_test": int(self.test_idx.size),
                "seed": self.seed}


def _balanced_split(labels, n_train, gen):
    tr, te = [], []
    for c in (0, 1):
        idx = np.flatnonzero(labels == c)
        idx = gen.permutation(idx)
        tr.append(idx[:n_train // 2])
        te.append(idx[n_train // 2:])
    return np.sort(np.concatenate(tr)), np.sort(np.concatenate(te))


def make_reference_task(seed: int, n_train: int = 150, n_test: int = 150,
                        p0=REFERENCE_P0, p1=REFERENCE_P1) -> ClassificationTask:
    """Balanced sample pool from the two reference densities, split train/test."""
    if n_train % 2 or n_test % 2:
        raise DomainError("train and test sizes must be even for balanced classes")
    d0, d1 = MixtureDensity(p0), MixtureDensity(p1)
    half = (n_train + n_test) // 2
    gen = rng_stream(seed, "task")
    u = np.concatenate([d0.sample(gen, half), d1.sample(gen, half)])
    labels = np.repeat([0, 1], half)
    order = gen.permutation(u.size)
    u, labels = u[order], labels[order]
    tr, te = _balanced_split(labels, n_train, rng_stream(seed, "split"))
    return ClassificationTask(d0, d1, u, labels, tr, te, seed)


def bayes_accuracy(task: ClassificationTask) -> float:
    """Accuracy of the exact likelihood for balanced classes: int max(p0, p1) / 2."""
    val, _ = integrate.quad(lambda v: max(task.p0.pdf(v), task.p1.pdf(v)), -1, 1,
                            limit=400, points=[-0.55, -0.1, 0.35, 0.7])
    return 0.5 * val


# --------------------------------------------------------------------------
# logistic regression

@dataclass(frozen=True)
class LinearClassifier:
    weights: np.ndarray
    K_L: int
    shots: float
    converged: bool = True
    iterations: int = 0
    loss: float = float("nan")
    history: tuple = field(default=(), repr=False)

    def decision(self, Y) -> np.ndarray:
        return np.asarray(Y)[:, :self.K_L] @ self.weights

    def predict(self, Y) -> np.ndarray:
        return (self.decision(Y) > 0).astype(int)


def cross_entropy(p, q):
    """H(p, q) for Bernoulli targets p and predictions q, in nats."""
    q = np.clip(q, 1e-300, 1.0)
    r = np.clip(1.0 - q, 1e-300, 1.0)
    return -special.xlogy(p, q) - special.xlogy(1.0 - p, r)


def _mean_loss(z, y):
    # log(1 + e^z) - y z, stable for large |z|
    return float(np.mean(np.logaddexp(0.0, z) - y * z))


def fit_logistic(Y, labels, tol: float = 1e-6, max_iter: int = 5000,
                 record_history: bool = False):
    """Gradient descent with step 1 / (0.25 lambda_max(Y^T Y / n)).

    Returns (weights, converged, iterations, loss, history).
    """
    Y = np.asarray(Y, dtype=float)
    y = np.asarray(labels, dtype=float)
    n, K = Y.shape
    lam = np.linalg.eigvalsh(Y.T @ Y / n).max(initial=0.0)
    w = np.zeros(K)
    hist = []
    if lam <= 0:
        return w, True, 0, _mean_loss(np.zeros(n), y), tuple(hist)
    step = 1.0 / (0.25 * lam)
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        z = Y @ w
        grad = Y.T @ (special.expit(z) - y) / n
        if record_history:
            hist.append(_mean_loss(z, y))
        if np.linalg.norm(grad) < tol:
            converged = True
            break
        w = w - step * grad
    return w, converged, it, _mean_loss(Y @ w, y), tuple(hist)


def train_logistic(task: ClassificationTask, table: EigentaskTable, K_L: int,
                   record_history: bool = False, **kw) -> LinearClassifier:
    """Fit on the first K_L noisy eigentasks of the training split."""
    if not 1 <= K_L <= table.K:
        raise DomainError(f"K_L must lie in [1, {table.K}], got {K_L}")
    Y = _coords(table)[task.train_idx, :K_L]
    w, ok, it, loss, hist = fit_logistic(Y, task.labels[task.train_idx],
                                         record_history=record_history, **kw)
    return LinearClassifier(w, K_L, table.shots, ok, it, loss, hist)


def _coords(table):
    Y = table.y_bar if table.y_bar is not None else table.y
    if Y is None:
        raise StructuralError("eigentask table holds no features")
    return Y


def evaluate(clf: LinearClassifier, task: ClassificationTask, table: EigentaskTable) -> dict:
    Y = _coords(table)
    pred = clf.predict(Y)
    hit = pred == task.labels
    return {"train_accuracy": float(hit[task.train_idx].mean()),
            "test_accuracy": float(hit[task.test_idx].mean())}


# --------------------------------------------------------------------------
# K_L sweep

@dataclass(frozen=True)
class SweepResult:
    K_L: np.ndarray
    train: np.ndarray        # permutations x K
    test: np.ndarray
    K_c: int
    spectrum: NsrSpectrum
    converged: np.ndarray

    def summary_rows(self):
        rows = []
        for j, k in enumerate(self.K_L):
            tr, te = self.train[:, j], self.test[:, j]
            rows.append({"K_L": int(k), "train_acc_mean": tr.mean(), "train_acc_min": tr.min(),
                         "train_acc_max": tr.max(), "test_acc_mean": te.mean(),
                         "test_acc_min": te.min(), "test_acc_max": te.max(),
                         "K_c": self.K_c, "at_K_c": int(k == self.K_c)})
        return rows


def estimate_eigentasks(pmap, S: int, N: int, seed: int) -> tuple:
    """Raw and shot-corrected spectra from N i.i.d. inputs measured with S shots."""
    ens = InputEnsemble.iid_uniform(N, sub_seed(seed, "spectrum-inputs"))
    fm, _ = sample_features(pmap.tabulate(ens), ens, S, sub_seed(seed, "spectrum-shots"))
    raw = solve_nsr(estimate_moments(fm, debias=False))
    corrected = correct_finite_shots(raw, S) if S >= 2 else raw
    return raw, corrected


def eigentask_sweep(pmap, task: ClassificationTask, S: int, permutations: int = 10,
                    seed: int = 0, spectrum_N: int = 300, K_max: int | None = None) -> SweepResult:
    """Train/test accuracy for K_L = 1..K over several train/test selections.

    The spectrum comes from its own i.i.d. ensemble; the task samples are
    measured once with fresh shots and then re-split per permutation.
    """
    S = check_shots(S)
    if is_infinite(S):
        raise DomainError("the learning sweep needs a finite shot count")
    raw, corrected = estimate_eigentasks(pmap, S, spectrum_N, seed)
    K_c = k_cutoff(corrected, S)
    fm, _ = sample_features(pmap.tabulate(task.ensemble), task.ensemble, S,
                            sub_seed(seed, "task-shots"))
    table = eigentasks(None, raw, measured=fm)
    K = raw.K if K_max is None else min(K_max, raw.K)
    Ks = np.arange(1, K + 1)
    train = np.zeros((permutations, K))
    test = np.zeros((permutations, K))
    conv = np.zeros((permutations, K), dtype=bool)
    for p in range(permutations):
        t = task if p == 0 and permutations == 1 else task.resplit(sub_seed(seed, "perm", p))
        for j, k in enumerate(Ks):
            clf = train_logistic(t, table, int(k))
            acc = evaluate(clf, t, table)
            train[p, j], test[p, j] = acc["train_accuracy"], acc["test_accuracy"]
            conv[p, j] = clf.converged
    return SweepResult(Ks, train, test, K_c, corrected, conv)


# --------------------------------------------------------------------------
# loss expansion

def loss_expansion_check(task: ClassificationTask, table: EigentaskTable, weights, S,
                         seed: int = 0, repetitions: int = 2000) -> dict:
    """Second-order cumulant expansion of the noisy cross-entropy vs Monte Carlo.

    ``table`` must carry the exact features ``x`` and coefficients ``r``.
    The expansion is
        E_u[H(f, s(z))] + 1/2 E_u[s(1 - s)(u) q(u)],   q(u) = c^T Sigma(u) c / S,
    with z = Omega . y and c = R Omega; its u-average of q is
    sum_k beta_k^2 Omega_k^2 / S, which gives the decoupled form
        E_u[H(f, s(z))] + 1/2 (sum_k beta_k^2 Omega_k^2 / S) E_u[s(1 - s)]
    when the noise power is replaced by its mean.
    The Monte Carlo loss averages H(f, s(z_bar)) over fresh multinomial
    shots, using the exactly known first- and second-order terms as
    control variates.
    """
    if table.x is None or table.r is None:
        raise StructuralError("loss expansion needs exact features and coefficients")
    Om = np.asarray(weights, dtype=float).reshape(-1)
    K_L = Om.size
    if not np.all(np.isfinite(table.beta2[:K_L])):
        raise DomainError("every used eigentask needs a finite NSR eigenvalue")
    S = check_shots(S)
    x = table.x
    wts = table.ensemble.weights
    f = task.class_likelihood(table.ensemble.values)
    c = table.r[:, :K_L] @ Om
    z = x @ c
    s = special.expit(z)
    det = float(wts @ cross_entropy(f, s))
    curv = s * (1 - s)
    if is_infinite(S):
        return {"mc_loss": det, "expansion_loss": det, "gap": 0.0,
                "decoupled_loss": det, "deterministic_loss": det, "mc_stderr": 0.0}
    q = (x @ (c * c) - (x @ c) ** 2) / S
    expansion = det + 0.5 * float(wts @ (curv * q))
    decoupled = det + 0.5 * float(np.sum(table.beta2[:K_L] * Om ** 2) / S) * float(wts @ curv)

    means = np.empty(x.shape[0])
    sq = np.empty(x.shape[0])
    for n in range(x.shape[0]):
        gen = rng_stream(seed, "loss-mc", n)
        counts = gen.multinomial(S, x[n] / x[n].sum(), size=repetitions)
        zb = counts @ c / S
        d = zb - z[n]
        h = (cross_entropy(f[n], special.expit(zb))
             - (s[n] - f[n]) * d - 0.5 * curv[n] * (d * d - q[n]))
        means[n] = h.mean()
        sq[n] = h.var(ddof=1) / repetitions
    mc = float(wts @ means)
    err = float(np.sqrt(np.sum(wts ** 2 * sq)))
    return {"mc_loss": mc, "expansion_loss": expansion, "gap": mc - expansion,
            "decoupled_loss": decoupled, "deterministic_loss": det, "mc_stderr": err}
