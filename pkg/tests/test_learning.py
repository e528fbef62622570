import math

import numpy as np
import pytest
from scipy import integrate, special

from eigentask.learning import (LinearClassifier, MixtureDensity, bayes_accuracy, cross_entropy,
                                eigentask_sweep, evaluate, fit_logistic, loss_expansion_check,
                                make_reference_task, train_logistic)
from eigentask.quantum import circuit_map, random_circuit_encoding
from eigentask.sampling import DomainError, InputEnsemble, rng_stream
from eigentask.spectral import eigentasks, exact_moments, k_cutoff, solve_nsr


@pytest.fixture(scope="module")
def task():
    return make_reference_task(0, 40, 40)


def test_balanced_split(task):
    assert task.train_idx.size == 40 and task.test_idx.size == 40
    assert task.labels[task.train_idx].sum() == 20 and task.labels[task.test_idx].sum() == 20
    assert not set(task.train_idx) & set(task.test_idx)
    again = task.resplit(3)
    assert again.labels[again.train_idx].sum() == 20
    with pytest.raises(DomainError):
        make_reference_task(0, 41, 40)


def test_mixture_normalized():
    d = MixtureDensity(((0.3, 0.9, 0.4), (0.7, -0.2, 0.1)))
    assert integrate.quad(d.pdf, -1, 1, points=[-0.2, 0.9])[0] == pytest.approx(1.0, abs=1e-8)
    assert d.pdf(1.5) == 0.0
    with pytest.raises(DomainError):
        MixtureDensity(((1.0, 0.0, 0.0),))


def test_samples_follow_density():
    d = MixtureDensity(((0.5, -0.55, 0.15), (0.5, 0.35, 0.12)))
    n = 40_000
    u = d.sample(rng_stream(1, "mix"), n)
    assert np.all(np.abs(u) <= 1)
    edges = np.linspace(-1, 1, 21)
    counts, _ = np.histogram(u, edges)
    p = np.array([integrate.quad(d.pdf, a, b)[0] for a, b in zip(edges[:-1], edges[1:])])
    assert np.all(np.abs(counts - n * p) <= 4 * np.sqrt(n * p * (1 - p)) + 1)


def test_class_likelihood_matches_binned_labels():
    big = make_reference_task(2, 20_000, 20_000)
    edges = np.linspace(-0.9, 0.9, 10)
    which = np.digitize(big.u, edges)
    for b in range(1, edges.size):
        sel = which == b
        n = sel.sum()
        if n < 200:
            continue
        frac = big.labels[sel].mean()
        ref = big.class_likelihood(big.u[sel]).mean()
        assert abs(frac - ref) <= 3.5 * math.sqrt(max(ref * (1 - ref), 1e-4) / n)


def test_bayes_accuracy_matches_likelihood_rule():
    big = make_reference_task(4, 20_000, 20_000)
    pred = (big.class_likelihood(big.u) > 0.5).astype(int)
    acc = (pred == big.labels).mean()
    b = bayes_accuracy(big)
    assert 0.5 < b < 1.0
    assert abs(acc - b) <= 3 * math.sqrt(b * (1 - b) / big.u.size)


def test_cross_entropy_values():
    assert cross_entropy(0.5, 0.5) == pytest.approx(math.log(2))
    assert cross_entropy(1.0, 1.0) == 0.0
    assert cross_entropy(0.0, 0.0) == 0.0


def test_separable_fit():
    u = np.linspace(-1, 1, 40)
    Y = u[:, None]
    y = (u > 0).astype(int)
    w, ok, it, loss, hist = fit_logistic(Y, y, max_iter=3000, record_history=True)
    assert np.all((Y @ w > 0) == y)
    assert np.all(np.diff(hist) <= 1e-12)
    assert loss < hist[0]


def test_fit_converges_on_overlapping_classes():
    gen = np.random.default_rng(0)
    Y = np.column_stack([np.ones(400), gen.standard_normal(400)])
    y = (gen.random(400) < special.expit(0.5 + 1.5 * Y[:, 1])).astype(int)
    w, ok, *_ = fit_logistic(Y, y, tol=1e-8, max_iter=20_000)
    assert ok
    grad = Y.T @ (special.expit(Y @ w) - y) / 400
    assert np.linalg.norm(grad) < 1e-8


def test_zero_weights_are_chance(task):
    pm = circuit_map(random_circuit_encoding(2, 0))
    x = pm.tabulate(task.ensemble)
    spec = solve_nsr(exact_moments(x, task.ensemble.weights))
    tab = eigentasks(x, spec, ensemble=task.ensemble)
    clf = LinearClassifier(np.zeros(2), 2, math.inf)
    acc = evaluate(clf, task, tab)
    assert acc["train_accuracy"] == 0.5 and acc["test_accuracy"] == 0.5
    with pytest.raises(DomainError):
        train_logistic(task, tab, 5)


@pytest.fixture(scope="module")
def loss_setup():
    t = make_reference_task(1, 20, 20)
    pm = circuit_map(random_circuit_encoding(2, 3))
    ens = InputEnsemble.grid(21)
    x = pm.tabulate(ens)
    spec = solve_nsr(exact_moments(x, ens.weights))
    return t, eigentasks(x, spec, ensemble=ens)


def test_loss_expansion_limits(loss_setup):
    t, tab = loss_setup
    out = loss_expansion_check(t, tab, [0.3, -0.2], math.inf)
    assert out["gap"] == 0.0 and out["mc_loss"] == out["deterministic_loss"]
    f = t.class_likelihood(tab.ensemble.values)
    zero = loss_expansion_check(t, tab, [0.0, 0.0], 100, repetitions=50)
    assert zero["expansion_loss"] == pytest.approx(tab.ensemble.weights @ cross_entropy(f, 0.5))
    assert abs(zero["gap"]) <= 1e-12


def test_loss_expansion_large_shots(loss_setup):
    # the remaining gap is third order in the noise, far below the second-order term
    t, tab = loss_setup
    out = loss_expansion_check(t, tab, [0.8, 0.6], 2000, repetitions=400)
    second = out["expansion_loss"] - out["deterministic_loss"]
    assert second > 0
    assert abs(out["gap"]) <= 4 * out["mc_stderr"] + 0.05 * second


def test_small_sweep():
    t = make_reference_task(5, 20, 20)
    pm = circuit_map(random_circuit_encoding(2, 1))
    res = eigentask_sweep(pm, t, 64, permutations=2, seed=3, spectrum_N=200)
    assert res.train.shape == (2, 4) and res.test.shape == (2, 4)
    assert res.K_c == k_cutoff(res.spectrum, 64)
    rows = res.summary_rows()
    assert [r["K_L"] for r in rows] == [1, 2, 3, 4]
    assert sum(r["at_K_c"] for r in rows) == 1
    again = eigentask_sweep(pm, t, 64, permutations=2, seed=3, spectrum_N=200)
    np.testing.assert_array_equal(res.test, again.test)
    with pytest.raises(DomainError):
        eigentask_sweep(pm, t, "inf")
