"""Acceptance checks shared by the ``verify`` command and the test suite.

Each check returns a CheckResult with the measured quantities, so failures
are reported with numbers rather than a bare flag.  Seeds are fixed
defaults; pass another seed to rerun a check on fresh randomness.
"""
from __future__ import annotations

import json
import math
import os
import time
from dataclasses import dataclass, field

import numpy as np

from . import analytic
from .learning import eigentask_sweep, fit_logistic, loss_expansion_check, make_reference_task
from .optical import OpticalEncoding, optical_features
from .quantum import (circuit_map, expected_total_correlation, haar_two_design_map,
                      hamiltonian_map, random_circuit_encoding, random_hamiltonian_encoding,
                      total_correlation)
from .sampling import (InputEnsemble, per_input_covariance, rng_stream, sample_features,
                       sample_multinomial, sample_poisson_counts, sub_seed)
from .spectral import (MomentEstimates, correct_finite_shots, eigentasks, estimate_moments,
                       exact_moments, function_capacity, gram_free_svd, rec, rec_trace, solve_nsr)

GOLDEN_PATH = os.path.join(os.path.dirname(__file__), "data", "golden.json")


@dataclass
class CheckResult:
    name: str
    criterion: int
    passed: bool
    measured: dict = field(default_factory=dict)
    tolerance: str = ""
    seconds: float = 0.0

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return f"[{tag}] {self.criterion:>2} {self.name} ({self.seconds:.1f}s) {self.tolerance}"

    def to_json(self) -> str:
        return json.dumps({"criterion": self.criterion, "name": self.name, "passed": self.passed,
                           "seconds": round(self.seconds, 3), "tolerance": self.tolerance,
                           "measured": self.measured}, default=_plain)


def _plain(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer, np.bool_)):
        return o.item()
    return str(o)


def _timed(fn):
    def run(*a, **kw):
        t0 = time.perf_counter()
        res = fn(*a, **kw)
        res.seconds = time.perf_counter() - t0
        limit = getattr(fn, "limit", None)
        if limit is not None and res.seconds > limit:
            res.passed = False
            res.measured["runtime_limit_s"] = limit
        return res
    run.__name__ = fn.__name__
    run.__doc__ = fn.__doc__
    return run


def _limit(seconds):
    def deco(fn):
        fn.limit = seconds
        return fn
    return deco


# --------------------------------------------------------------------------

@_timed
@_limit(60)
def check_two_design(seed: int = 0, N: int = 200_000, K: int = 4) -> CheckResult:
    """Haar Monte Carlo spectrum and REC against the 2-design closed forms."""
    ens = InputEnsemble.iid_uniform(N, sub_seed(seed, "haar-inputs"))
    x = haar_two_design_map(K, seed).tabulate(ens)
    spec = solve_nsr(exact_moments(x, ens.weights))
    target = np.array([0.0] + [float(K)] * (K - 1))
    b = spec.beta2
    # 5% of the target; the zero eigenvalue is held to 5% of unit scale
    dev = np.abs(b - target) / np.maximum(target, 1.0)
    Ss = [1, 10, 100, 10_000]
    ct = np.array([rec(spec, int(S)) for S in Ss])
    closed = np.array([analytic.two_design_rec(K, S) for S in Ss])
    rel = np.abs(ct - closed) / closed
    ok = bool(dev.max() <= 0.05 and rel.max() <= 0.02)
    return CheckResult("two-design closed form", 1, ok,
                       {"beta2": b, "max_rel_beta2": dev.max(), "C_T": ct, "closed_form": closed,
                        "max_rel_C_T": rel.max()},
                       "beta2 within 5%, C_T within 2%")


@_timed
def check_rec_identity(seed: int = 0, pairs: int = 100, K_max: int = 32) -> CheckResult:
    """Eigen-sum REC against the trace formula on random (G, V) pairs."""
    gen = rng_stream(seed, "rec-identity")
    worst = 0.0
    for _ in range(pairs):
        K = int(gen.integers(1, K_max + 1))
        A = gen.standard_normal((K, K))
        G = A @ A.T / K + 0.05 * np.eye(K)
        B = gen.standard_normal((K, int(gen.integers(1, K + 1))))
        V = B @ B.T / K
        S = int(round(10 ** gen.uniform(0, 5)))
        m = MomentEstimates(G, np.diag(np.diag(G)), V, noise_model="generic")
        worst = max(worst, abs(rec(solve_nsr(m), S) - rec_trace(m, S)))
    return CheckResult("REC eigen-sum vs trace", 2, bool(worst <= 1e-9),
                       {"max_abs_diff": worst, "pairs": pairs}, "|diff| <= 1e-9")


def _noisy_moment_z(x, ens, spec, S, seed):
    fm, _ = sample_features(x, ens, S, seed)
    y = x @ spec.r
    yb = fm.data @ spec.r
    w = ens.weights
    M = (yb * w[:, None]).T @ yb
    target = np.diag(1.0 + spec.beta2 / S)
    # exact conditional mean of ybar_j ybar_k per input, then plug-in variance of the sum
    sig_u = per_input_covariance(x, "multinomial")
    cond = np.einsum("nj,nk->njk", y, y) + np.einsum("aj,nab,bk->njk", spec.r, sig_u, spec.r) / S
    resid = np.einsum("nj,nk->njk", yb, yb) - cond
    sigma = np.sqrt(np.einsum("n,njk->jk", w ** 2, resid ** 2))
    diff = np.abs(M - target)
    z = np.where(diff < 1e-12, 0.0, diff / np.maximum(sigma, 1e-300))
    return z


@_timed
def check_orthogonality(seed: int = 0, N: int = 10_000, L: int = 4, S: int = 1000) -> CheckResult:
    """Exact and noisy eigentask second moments over an L=4 circuit ensemble."""
    enc = random_circuit_encoding(L, seed)
    ens = InputEnsemble.iid_uniform(N, sub_seed(seed, "orth-inputs"))
    x = circuit_map(enc).tabulate(ens)
    spec = solve_nsr(exact_moments(x, ens.weights))
    tab = eigentasks(x, spec, ensemble=ens)
    M = (tab.y * ens.weights[:, None]).T @ tab.y
    dev = np.abs(M - np.eye(spec.K)).max()
    z = _noisy_moment_z(x, ens, spec, S, sub_seed(seed, "orth-shots"))
    # informational: coefficients from an independent quadrature of the same map
    grid = solve_nsr(analytic.grid_moments_oracle(circuit_map(enc), 4001))
    yg = x @ grid.r
    dev_grid = np.abs((yg * ens.weights[:, None]).T @ yg - np.eye(spec.K)).max()
    ok = bool(dev <= 3 / math.sqrt(N) and z.max() <= 4.0)
    return CheckResult("eigentask orthogonality", 3, ok,
                       {"max_dev_exact": dev, "bound": 3 / math.sqrt(N), "max_z_noisy": z.max(),
                        "max_dev_quadrature_coefficients": dev_grid},
                       "exact <= 3/sqrt(N), noisy within 4 sigma")


@_timed
@_limit(120)
def check_finite_shot_correction(seed: int = 0, N: int = 10_000, S: int = 100,
                                 grid_N: int = 10_000) -> CheckResult:
    """Corrected finite-S spectrum against the quadrature oracle, L=3 circuit."""
    pm = circuit_map(random_circuit_encoding(3, seed))
    oracle = solve_nsr(analytic.grid_moments_oracle(pm, grid_N))
    ens = InputEnsemble.iid_uniform(N, sub_seed(seed, "debias-inputs"))
    fm, _ = sample_features(pm.tabulate(ens), ens, S, sub_seed(seed, "debias-shots"))
    raw = solve_nsr(estimate_moments(fm, debias=False))
    cor = correct_finite_shots(raw, S)
    sel = oracle.beta2 < S / 2
    ob, cb, rb = oracle.beta2[sel], cor.beta2[sel], raw.beta2[sel]
    pos = ob > 1e-9
    rel = np.abs(cb[pos] - ob[pos]) / ob[pos]
    zero_ok = bool(np.all(np.abs(cb[~pos]) <= 1e-8))
    biased_low = bool(np.all(rb[pos] < ob[pos]))
    ok = bool(rel.max(initial=0.0) <= 0.10 and zero_ok and biased_low and pos.sum() >= 1)
    return CheckResult("finite-S de-bias", 4, ok,
                       {"oracle": ob, "corrected": cb, "raw": rb, "max_rel": rel.max(initial=0.0),
                        "raw_biased_low": biased_low, "checked": int(sel.sum())},
                       "corrected within 10% for beta2 < S/2; raw below oracle")


@_timed
def check_gram_free(seed: int = 0) -> CheckResult:
    """SVD route against the Gram route on K=64 quantum and optical data."""
    worst = 0.0
    pm = circuit_map(random_circuit_encoding(6, seed))
    ens = InputEnsemble.iid_uniform(2000, sub_seed(seed, "svd-inputs"))
    fm, _ = sample_features(pm.tabulate(ens), ens, 1000, sub_seed(seed, "svd-shots"))
    a_gram = solve_nsr(estimate_moments(fm, debias=False)).alpha
    worst = max(worst, np.abs(gram_free_svd(fm).alpha - a_gram).max())
    enc = OpticalEncoding()
    ens = InputEnsemble.iid_uniform(400, sub_seed(seed, "svd-optical"))
    fo, _ = sample_features(optical_features(enc, ens.values), ens, 20, sub_seed(seed, "svd-pc"),
                            model="poisson")
    raw = solve_nsr(estimate_moments(fo, debias=False))
    lam_gram = 1.0 / raw.beta2
    lam_svd = 1.0 / gram_free_svd(fo).beta2
    worst = max(worst, np.abs(lam_gram - lam_svd).max())
    return CheckResult("Gram-free SVD route", 5, bool(worst <= 1e-8),
                       {"max_abs_alpha_diff": worst}, "|alpha_svd - alpha_gram| <= 1e-8")


@_timed
def check_function_capacity(seed: int = 0, S: int = 100, grid_N: int = 4001) -> CheckResult:
    """Capacity of eigentasks, feature-span targets and random targets."""
    pm = circuit_map(random_circuit_encoding(3, seed))
    mom = analytic.grid_moments_oracle(pm, grid_N)
    spec = solve_nsr(mom)
    ens = InputEnsemble.grid(grid_N)
    fm = sample_features(pm.tabulate(ens), ens, math.inf, seed)[0]
    y = fm.data @ spec.r
    eig_err = max(abs(function_capacity(y[:, k], fm, mom, shots=S)[0] - 1 / (1 + spec.beta2[k] / S))
                  for k in range(spec.K) if spec.correctable[k])
    gen = rng_stream(seed, "capacity-targets")
    span_err = 0.0
    for _ in range(10):
        f = fm.data @ gen.standard_normal(spec.K)
        span_err = max(span_err, abs(function_capacity(f, fm, mom)[0] - 1.0))
    lo, hi = 1.0, 0.0
    for i in range(50):
        kind = i % 3
        if kind == 0:
            f = gen.standard_normal(grid_N)
        elif kind == 1:
            f = np.polynomial.polynomial.polyval(ens.values, gen.standard_normal(8))
        else:
            f = np.sin(gen.uniform(1, 20) * ens.values + gen.uniform(0, 6))
        for Sx in (1, S, math.inf):
            c = function_capacity(f, fm, mom, shots=Sx)[0]
            lo, hi = min(lo, c), max(hi, c)
    ok = bool(eig_err <= 1e-8 and span_err <= 1e-8 and lo >= -1e-12 and hi <= 1 + 1e-12)
    return CheckResult("function capacity", 6, ok,
                       {"max_eigentask_err": eig_err, "max_span_err": span_err,
                        "min_C": lo, "max_C": hi},
                       "eigentasks and span to 1e-8, random targets in [0, 1]")


def _cov_z(X, Sigma):
    S = X.shape[0]
    mu = X.mean(axis=0)
    Z = X - mu
    C = Z.T @ Z / (S - 1)
    prod = np.einsum("sj,sk->sjk", Z, Z)
    sd = prod.std(axis=0, ddof=1) / math.sqrt(S)
    diff = np.abs(C - Sigma)
    return np.where(diff < 1e-12, 0.0, diff / np.maximum(sd, 1e-300))


@_timed
def check_noise_statistics(seed: int = 0, S: int = 10_000) -> CheckResult:
    """Sample covariances of multinomial indicators and Poisson counts."""
    gen = rng_stream(seed, "noise-stats")
    zmax = 0.0
    for K in (2, 4, 8):
        x = gen.dirichlet(np.ones(K))
        rec_ = sample_multinomial(x, S, rng_stream(seed, "stat-multinomial", K))
        X = rec_.indicators(K)
        zmax = max(zmax, _cov_z(X, np.diag(x) - np.outer(x, x)).max())
    means = optical_features(OpticalEncoding(), 0.55)    # most detectors lit at this input
    counts = sample_poisson_counts(means, S, rng_stream(seed, "stat-poisson")).indicators(means.size)
    zp = _cov_z(counts, np.diag(means)).max()
    m, v = counts.mean(axis=0), counts.var(axis=0, ddof=1)
    sd = np.sqrt(2.0 / S) * np.maximum(m, 1e-300)
    zmv = np.where(np.abs(m - v) < 1e-12, 0.0, np.abs(m - v) / sd).max()
    ok = bool(zmax <= 4 and zp <= 4 and zmv <= 4)
    return CheckResult("multinomial/Poisson statistics", 7, ok,
                       {"max_z_multinomial_cov": zmax, "max_z_poisson_cov": zp,
                        "max_z_mean_minus_var": zmv}, "all within 4 sigma")


@_timed
def check_total_correlation(seed: int = 0) -> CheckResult:
    gen = rng_stream(seed, "tc")
    prod_max = 0.0
    for L in (1, 2, 3, 4):
        for _ in range(5):
            p = np.ones(1)
            for _ in range(L):
                q = gen.uniform()
                p = np.kron(p, [q, 1 - q])
            prod_max = max(prod_max, float(total_correlation(p)[0]))
    ghz = float(total_correlation(analytic.ghz_distribution(3))[0])
    w = float(total_correlation(analytic.w_distribution(3))[0])
    w_target = 2 * math.log2(1.5)
    ens = InputEnsemble.grid(201)
    etc_zero = expected_total_correlation(circuit_map(random_circuit_encoding(3, seed, J=0.0)), ens)
    ok = bool(prod_max <= 1e-12 and abs(ghz - 2.0) <= 1e-12 and abs(w - w_target) <= 1e-10
              and etc_zero <= 1e-12)
    return CheckResult("expected total correlation", 8, ok,
                       {"max_product": prod_max, "ghz": ghz, "w": w, "w_target": w_target,
                        "etc_product_circuit": etc_zero},
                       "products 1e-12, GHZ 2, W 2 log2 1.5 +- 1e-10")


OVERFIT_SEEDS = tuple(range(8))


@_timed
@_limit(600)
def check_overfitting(seed: int = 0, S: int = 1024, permutations: int = 10,
                      extra_seeds=OVERFIT_SEEDS) -> CheckResult:
    """Overfitting at K_L = K and near-optimal accuracy at K_L = K_c.

    The stated criterion is checked on ``seed``; the K_c gap is also
    averaged over ``extra_seeds`` encodings and must meet the same bound.
    """
    def one(s):
        pm = circuit_map(random_circuit_encoding(6, s))
        task = make_reference_task(s)
        res = eigentask_sweep(pm, task, S, permutations, seed=s)
        te = res.test.mean(axis=0)
        return te, res.K_c

    te, K_c = one(seed)
    best = te.max()
    overfit = bool(te[-1] < best)
    gap = float(best - te[K_c - 1])
    gaps = {}
    for s in extra_seeds:
        if s == seed:
            gaps[s] = gap
            continue
        t2, k2 = one(s)
        gaps[s] = float(t2.max() - t2[k2 - 1])
    mean_gap = float(np.mean(list(gaps.values()))) if gaps else gap
    ok = bool(overfit and gap <= 0.03 and mean_gap <= 0.03)
    return CheckResult("overfitting and K_c", 9, ok,
                       {"test_at_K": te[-1], "test_max": best, "argmax_K_L": int(te.argmax()) + 1,
                        "K_c": K_c, "test_at_K_c": te[K_c - 1], "gap": gap,
                        "gaps_by_seed": gaps, "mean_gap": mean_gap},
                       "test(K) < max; max - test(K_c) <= 0.03")


@_timed
def check_loss_expansion(seeds: int = 20, S: int = 16, L: int = 2, K_L: int = 4,
                         repetitions: int = 4000) -> CheckResult:
    """Ratio of expansion errors at S and 2S, averaged over seeds."""
    ratios = []
    ens = InputEnsemble.grid(41)
    for s in range(seeds):
        x = circuit_map(random_circuit_encoding(L, s)).tabulate(ens)
        spec = solve_nsr(exact_moments(x, ens.weights))
        tab = eigentasks(x, spec, ensemble=ens)
        task = make_reference_task(s)
        w = fit_logistic(tab.y[:, :K_L], task.class_likelihood(ens.values), max_iter=20000)[0]
        a = loss_expansion_check(task, tab, w, S, seed=s, repetitions=repetitions)
        b = loss_expansion_check(task, tab, w, 2 * S, seed=s, repetitions=repetitions)
        ratios.append(a["gap"] / b["gap"])
    mean = float(np.mean(ratios))
    return CheckResult("loss expansion order", 10, bool(2.0 <= mean <= 8.0),
                       {"mean_ratio": mean, "median_ratio": float(np.median(ratios)),
                        "ratios": ratios}, "mean gap(S)/gap(2S) in [2, 8]")


@_timed
def check_monotone_rec(seed: int = 0, encodings: int = 20, grid_N: int = 2001) -> CheckResult:
    """C_T(S) nondecreasing and bounded by rank(G) <= K; S -> inf gives rank(G)."""
    Ss = np.unique(np.round(np.logspace(0, 8, 33)).astype(int))
    worst_step, worst_bound, worst_limit = 0.0, -np.inf, 0.0
    for i in range(encodings):
        if i % 2 == 0:
            L = 2 + (i // 2) % 3
            J = (0.0, math.pi / 2)[(i // 2) % 2]
            pm = circuit_map(random_circuit_encoding(L, seed, J=J, index=i))
        else:
            pm = hamiltonian_map(random_hamiltonian_encoding(2 + (i // 2) % 2, seed, index=i))
        mom = analytic.grid_moments_oracle(pm, grid_N)
        spec = solve_nsr(mom)
        rank = int(np.linalg.matrix_rank(mom.G))
        ct = np.array([rec(spec, int(S)) for S in Ss])
        worst_step = min(worst_step, float(np.diff(ct).min()))
        worst_bound = max(worst_bound, float(ct.max() - rank), float(rank - mom.K))
        worst_limit = max(worst_limit, abs(rec(spec, math.inf) - rank),
                          abs(rec_trace(mom, math.inf) - rank))
    ok = bool(worst_step >= -1e-12 and worst_bound <= 1e-12 and worst_limit <= 1e-6)
    return CheckResult("REC monotone and bounded", 11, ok,
                       {"min_step": worst_step, "max_excess_over_bound": worst_bound,
                        "max_limit_err": worst_limit},
                       "nondecreasing, <= rank(G) <= K, limit = rank(G) to 1e-6")


# --------------------------------------------------------------------------
# golden values

def golden_values() -> dict:
    """Values recomputed for comparison with the frozen golden file."""
    from .quantum import CircuitEncoding, circuit_probabilities
    enc = CircuitEncoding(2, 1, [1.1, 2.3], [0.4, 0.9], [3.0, 7.0], 0.7, ((0, 1),))
    return {
        "two_design_rec_K4": [analytic.two_design_rec(4, s) for s in (1, 4, 10, 100)],
        "w_state_tc_L3": float(total_correlation(analytic.w_distribution(3))[0]),
        "correct_S100_b9": float(correct_finite_shots(
            _single_spectrum([0.0, 9.0]), 100).beta2[1]),
        "circuit_L2_u0.25": circuit_probabilities(enc, 0.25).tolist(),
    }


def _single_spectrum(beta2):
    from .spectral import NsrSpectrum
    b = np.asarray(beta2, dtype=float)
    return NsrSpectrum(b, np.eye(b.size), np.ones(b.size, bool), b.size)


@_timed
def check_golden(path: str | None = None) -> CheckResult:
    path = path or GOLDEN_PATH
    try:
        with open(path) as fh:
            frozen = json.load(fh)
        current = golden_values()
        worst = 0.0
        for key, val in current.items():
            a, b = np.asarray(val, float), np.asarray(frozen[key], float)
            if a.shape != b.shape:
                raise ValueError(f"shape mismatch for {key}")
            worst = max(worst, float(np.abs(a - b).max()))
    except (OSError, ValueError, KeyError, TypeError) as exc:
        return CheckResult("golden file", 0, False, {"error": f"{type(exc).__name__}: {exc}",
                                                     "path": path}, "readable and matching")
    return CheckResult("golden file", 0, bool(worst <= 1e-10), {"max_abs_diff": worst, "path": path},
                       "frozen values to 1e-10")


ALL_CHECKS = (check_two_design, check_rec_identity, check_orthogonality,
              check_finite_shot_correction, check_gram_free, check_function_capacity,
              check_noise_statistics, check_total_correlation, check_overfitting,
              check_loss_expansion, check_monotone_rec)

QUICK_CHECKS = tuple(c for c in ALL_CHECKS if c is not check_overfitting)


def run_checks(quick: bool = False, golden: str | None = None, stream=None):
    results = [check_golden(golden)]
    if stream:
        stream(results[-1])
    for chk in (QUICK_CHECKS if quick else ALL_CHECKS):
        results.append(chk())
        if stream:
            stream(results[-1])
    return results
