import math

import numpy as np
import pytest

from eigentask.optical import (ConfigurationError, OpticalEncoding, detector_means,
                               field_magnitude_rows, lens_propagate, optical_features, optical_map,
                               slm_field)
from eigentask.sampling import DomainError, InputEnsemble, rng_stream, sample_features, sample_poisson_counts
from eigentask.spectral import bessel_covariance, estimate_moments


def test_zero_encoding_is_uniform():
    E = slm_field(OpticalEncoding(B=0.0), 0.4)
    np.testing.assert_allclose(E, np.ones((64, 64)), atol=1e-15)


def test_field_bounded():
    enc = OpticalEncoding()
    for u in np.linspace(-1, 1, 9):
        assert np.abs(slm_field(enc, u)).max() <= 1 + 1e-15


def test_origin_value():
    enc = OpticalEncoding(A1=0.7, A2=1.3)
    E = slm_field(enc, 0.0)
    c = enc.M // 2
    assert enc.slm_coordinates[c] == 0.0
    assert abs(E[c, c]) == pytest.approx(abs(math.cos(enc.B * enc.A1 / 2)), abs=1e-14)


def test_input_domain():
    with pytest.raises(DomainError):
        slm_field(OpticalEncoding(), 1.01)


def test_uniform_field_focuses_to_center():
    M = 32
    out = lens_propagate(np.ones((M, M)))
    mag = np.abs(out)
    assert mag[M // 2, M // 2] == pytest.approx(M, rel=1e-12)
    mag[M // 2, M // 2] = 0
    assert mag.max() <= 1e-12


def test_parseval():
    rng = np.random.default_rng(0)
    E = rng.standard_normal((64, 64)) + 1j * rng.standard_normal((64, 64))
    assert np.sum(np.abs(lens_propagate(E)) ** 2) == pytest.approx(np.sum(np.abs(E) ** 2), rel=1e-12)


@pytest.mark.parametrize("a", [1, 3, -5])
def test_linear_phase_shifts_peak(a):
    # the transform kernel is exp(+i ...), so exp(+2 pi i a j / M) lands at centre - a
    M = 64
    j = np.arange(M)
    E = np.exp(2j * math.pi * a * j / M)[:, None] * np.ones((1, M))
    mag = np.abs(lens_propagate(E))
    i, k = np.unravel_index(np.argmax(mag), mag.shape)
    assert (i, k) == (M // 2 - a, M // 2)


def test_lens_rejects_non_square():
    with pytest.raises(ValueError):
        lens_propagate(np.ones((4, 5)))


def test_detector_means_basic():
    enc = OpticalEncoding()
    assert not detector_means(np.zeros((64, 64), complex), enc).any()
    E = lens_propagate(slm_field(enc, 0.3), enc)
    m1 = detector_means(E, enc)
    m2 = detector_means(E, OpticalEncoding(brightness=2.0))
    np.testing.assert_array_equal(m2, 2 * m1)
    assert m1.size == 64 and np.all(m1 >= 0)
    with pytest.raises(ConfigurationError):
        detector_means(np.zeros((32, 32)), enc)


def test_detector_grid_must_fit():
    with pytest.raises(ConfigurationError):
        OpticalEncoding(M=64, P=8, stride=9)
    with pytest.raises(ConfigurationError):
        OpticalEncoding(M=4, P=8)
    with pytest.raises(ConfigurationError):
        OpticalEncoding(brightness=0.0)


def test_global_phase_invariance():
    enc = OpticalEncoding()
    E = slm_field(enc, -0.45)
    a = detector_means(lens_propagate(E), enc)
    b = detector_means(lens_propagate(E * np.exp(1.234j)), enc)
    np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-14)


def test_continuity():
    # first differences shrink linearly with the step
    enc = OpticalEncoding()
    u0 = 0.137
    x0 = optical_features(enc, u0)
    d1 = np.abs(optical_features(enc, u0 + 1e-4) - x0).max()
    d2 = np.abs(optical_features(enc, u0 + 5e-5) - x0).max()
    assert 1.6 <= d1 / d2 <= 2.4


def test_map_provenance_and_shape():
    pm = optical_map(OpticalEncoding())
    assert pm.provenance == "optical" and pm.K == 64
    assert pm(np.array([0.1, 0.2])).shape == (2, 64)


def test_mean_equals_variance():
    means = optical_features(OpticalEncoding(), 0.55)
    S = 10_000
    X = sample_poisson_counts(means, S, rng_stream(5, "opt")).indicators(64)
    m, v = X.mean(0), X.var(0, ddof=1)
    sd = np.sqrt(2.0 / S) * np.maximum(m, 1e-300)
    lit = m > 0
    assert np.all(np.abs(m - v)[lit] <= 4 * sd[lit])


def test_noise_covariance_is_diagonal():
    enc = OpticalEncoding()
    ens = InputEnsemble.iid_uniform(120, 3)
    S = 200
    fm, recs = sample_features(optical_features(enc, ens.values), ens, S, 4, model="poisson",
                               keep_records=True)
    V = bessel_covariance(recs, fm)
    d = fm.data.mean(0)
    # sampling variance of a Bessel covariance entry is E_u[x_j x_k] / (N S) off the
    # diagonal and E_u[x + 2 x^2] / (N S) on it
    x = optical_features(enc, ens.values)
    G = x.T @ x / ens.N
    sd = np.sqrt(G / (ens.N * S))
    off = ~np.eye(64, dtype=bool)
    assert np.all(np.abs(V[off]) <= 5 * sd[off] + 1e-12)
    sd_diag = np.sqrt((x.mean(0) + 2 * np.diag(G)) / (ens.N * S))
    lit = d > 1e-6
    assert np.all(np.abs(np.diag(V) - d)[lit] <= 5 * sd_diag[lit])
    # the analytic Poisson route uses exactly the diagonal D
    m = estimate_moments(fm)
    np.testing.assert_allclose(m.V, np.diag(d), rtol=1e-12, atol=0)


def test_field_export_rows():
    rows = field_magnitude_rows(np.array([[1, 1j], [0, -2]]))
    np.testing.assert_allclose(rows, [[0, 0, 1], [0, 1, 1], [1, 0, 0], [1, 1, 2]])
