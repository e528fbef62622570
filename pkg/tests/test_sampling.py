import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from eigentask.sampling import (INF_SHOTS, DomainError, FeatureMatrix, InputEnsemble, ShotRecord,
                                StructuralError, assemble_features, check_shots, make_ensemble,
                                multinomial_outcomes, per_input_covariance, rng_stream,
                                sample_features, sample_multinomial, sample_poisson_counts,
                                shot_stream, sub_seed)


def test_deterministic_outcome():
    rec = sample_multinomial([1, 0, 0, 0], 37, rng_stream(0, "t"))
    assert np.all(rec.outcomes == 0)
    np.testing.assert_array_equal(rec.mean(4), [1, 0, 0, 0])


def test_two_outcome_covariance():
    S = 100_000
    X = sample_multinomial([0.5, 0.5], S, rng_stream(1, "t")).indicators(2)
    C = np.cov(X.T)
    np.testing.assert_allclose(C, [[0.25, -0.25], [-0.25, 0.25]], atol=5 / math.sqrt(S))


def test_mean_within_three_sigma():
    p = np.array([0.2, 0.3, 0.5])
    S = 10 ** 6
    m = sample_multinomial(p, S, rng_stream(2, "t")).mean(3)
    assert np.all(np.abs(m - p) <= 3 * np.sqrt(p * (1 - p) / S))


def test_non_simplex_rejected():
    with pytest.raises(DomainError, match="sum"):
        sample_multinomial([0.5, 0.6], 10, rng_stream(0))
    with pytest.raises(DomainError, match="entry 1"):
        sample_multinomial([1.2, -0.2], 10, rng_stream(0))


def test_inverse_cdf_edges():
    p = np.array([0.0, 0.25, 0.0, 0.75])
    k = multinomial_outcomes(p, np.array([0.0, 0.2499, 0.25, 0.9999999]))
    np.testing.assert_array_equal(k, [1, 1, 3, 3])


def test_poisson_zero_means():
    rec = sample_poisson_counts(np.zeros(5), 50, rng_stream(0))
    assert rec.outcomes.shape == (50, 5) and not rec.outcomes.any()


def test_poisson_mean_and_variance():
    S = 100_000
    X = sample_poisson_counts([4.0], S, rng_stream(3, "t")).indicators(1)[:, 0]
    assert abs(X.mean() - 4) <= 3 * math.sqrt(4 / S)
    # var of the sample variance of a Poisson(m): (m + 2 m^2 (S/(S-1))) / S
    assert abs(X.var(ddof=1) - 4) <= 3 * math.sqrt((4 + 2 * 16) / S)


def test_poisson_cross_covariance():
    S = 100_000
    X = sample_poisson_counts([1.5, 2.5], S, rng_stream(4, "t")).indicators(2)
    c = np.cov(X.T)[0, 1]
    assert abs(c) <= 3 * math.sqrt(1.5 * 2.5 / S)


def test_poisson_negative_mean():
    with pytest.raises(DomainError, match="negative"):
        sample_poisson_counts([1.0, -0.1], 5, rng_stream(0))


def test_assemble_examples():
    fm = assemble_features([ShotRecord(0, [0, 0, 1, 1])], 2, 4)
    np.testing.assert_array_equal(fm.data, [[0.5, 0.5]])
    fm = assemble_features([ShotRecord(0, [3])], 4, 1)
    np.testing.assert_array_equal(fm.data, [[0, 0, 0, 1]])
    fm = assemble_features([ShotRecord(0, [[2], [4], [6]], "poisson")], 1, 3)
    np.testing.assert_array_equal(fm.data, [[4.0]])


def test_assemble_ragged():
    recs = [ShotRecord(0, [0, 1]), ShotRecord(1, [0, 1, 1])]
    with pytest.raises(StructuralError):
        assemble_features(recs, 2, 2)
    with pytest.raises(StructuralError):
        assemble_features([ShotRecord(0, [0]), ShotRecord(2, [0])], 2, 1)


def test_record_invariants():
    with pytest.raises(DomainError):
        ShotRecord(0, [[1, -1]], "poisson")
    with pytest.raises(DomainError):
        ShotRecord(0, [0, 5]).indicators(4)


def test_infinite_shots_pass_through():
    x = np.array([[0.25, 0.75], [1.0, 0.0]])
    fm = assemble_features(None, 2, INF_SHOTS, exact=x)
    assert fm.exact and fm.shots == math.inf
    np.testing.assert_array_equal(fm.data, x)
    assert check_shots("inf") == math.inf
    with pytest.raises(DomainError):
        check_shots(0)


def test_ensemble_invariants():
    ens = InputEnsemble.iid_uniform(1000, 5)
    assert np.all(np.abs(ens.values) <= 1) and abs(ens.weights.sum() - 1) <= 1e-12
    g = InputEnsemble.grid(11)
    assert g.values[0] == -1 and g.values[-1] == 1
    assert g.weights[0] == pytest.approx(g.weights[1] / 2)
    with pytest.raises(DomainError):
        InputEnsemble.from_values([0.0, 1.5])
    with pytest.raises(DomainError):
        InputEnsemble([0.0, 0.5], [0.5, 0.6])
    assert make_ensemble({"kind": "equispaced-grid", "N": 5}, 0).N == 5


def test_feature_matrix_rows_sum_to_one():
    with pytest.raises(DomainError):
        FeatureMatrix(np.array([[0.5, 0.4]]), 10, InputEnsemble.from_values([0.0]))


def test_stream_determinism():
    a = shot_stream(7, 3).random(10)
    b = shot_stream(7, 3).random(10)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, shot_stream(7, 4).random(10))
    # shot s of the stream is word s: starting at shot 4 reproduces the tail
    np.testing.assert_array_equal(shot_stream(7, 3, first_shot=4).random(6), a[4:])
    assert sub_seed(1, "x") != sub_seed(1, "y")


def test_thread_count_independent():
    ens = InputEnsemble.iid_uniform(40, 1)
    x = np.random.default_rng(0).dirichlet(np.ones(8), size=40)
    f1, _ = sample_features(x, ens, 64, 11, threads=1)
    f4, _ = sample_features(x, ens, 64, 11, threads=4)
    np.testing.assert_array_equal(f1.data, f4.data)


def test_records_match_features():
    ens = InputEnsemble.iid_uniform(6, 2)
    x = np.full((6, 3), 1 / 3)
    fm, recs = sample_features(x, ens, 20, 3, keep_records=True)
    again = assemble_features(recs, 3, 20, ensemble=ens)
    np.testing.assert_array_equal(fm.data, again.data)


def test_feature_covariance_over_repetitions():
    # covariance of S-shot means over repetitions equals Sigma / S
    p = np.array([0.1, 0.2, 0.3, 0.4])
    S, R = 50, 4000
    means = np.array([sample_multinomial(p, S, rng_stream(9, "rep", r)).mean(4) for r in range(R)])
    target = (np.diag(p) - np.outer(p, p)) / S
    C = np.cov(means.T)
    sd = np.sqrt((target ** 2 + np.outer(np.diag(target), np.diag(target))) / (R - 1))
    assert np.all(np.abs(C - target) <= 4 * sd + 1e-15)
    assert np.all(np.abs(means.mean(0) - p) <= 3 * np.sqrt(p * (1 - p) / (R * S)))


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(0.0, 1.0), min_size=2, max_size=12).filter(lambda v: sum(v) > 1e-3),
       st.integers(1, 200), st.integers(0, 2 ** 32))
def test_multinomial_rows_sum_to_one(raw, S, seed):
    p = np.array(raw) / sum(raw)
    m = sample_multinomial(p, S, rng_stream(seed)).mean(p.size)
    assert abs(m.sum() - 1.0) <= 1e-12
    assert np.all(m[p == 0] == 0)


def test_per_input_covariance():
    x = np.array([[0.3, 0.7]])
    np.testing.assert_allclose(per_input_covariance(x, "multinomial")[0],
                               [[0.21, -0.21], [-0.21, 0.21]])
    np.testing.assert_array_equal(per_input_covariance(x, "poisson")[0], np.diag([0.3, 0.7]))
