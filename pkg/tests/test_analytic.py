import math

import numpy as np
import pytest

from eigentask.analytic import (dense_unitary_oracle, grid_moments_oracle, oracle_probabilities,
                                two_design_moments, two_design_rec, two_design_spectrum,
                                w_total_correlation)
from eigentask.quantum import (CapabilityError, CircuitEncoding, HamiltonianEncoding, circuit_map,
                               ProbabilityMap, random_circuit_encoding,
                               random_hamiltonian_encoding)
from eigentask.sampling import DomainError, InputEnsemble
from eigentask.spectral import MomentEstimates, exact_moments, rec, solve_nsr


def test_two_design_K2():
    G, D = two_design_moments(2)
    np.testing.assert_allclose(G, [[1 / 3, 1 / 6], [1 / 6, 1 / 3]])
    np.testing.assert_allclose(D, np.eye(2) / 2)
    np.testing.assert_allclose(two_design_spectrum(2).beta2, [0, 2])


def test_two_design_K64():
    b = two_design_spectrum(64).beta2
    assert b[0] == 0 and np.allclose(b[1:], 64)
    with pytest.raises(DomainError):
        two_design_moments(1)


@pytest.mark.parametrize("K", [2, 4, 16])
def test_two_design_rec(K):
    assert two_design_rec(K, 1) == pytest.approx(2 * K / (K + 1))
    assert two_design_rec(K, math.inf) == K
    for S in (1, 3, 100, 10 ** 6):
        assert abs(two_design_rec(K, S) - rec(two_design_spectrum(K), S)) <= 1e-12


def test_two_design_spectrum_solves_moments():
    G, D = two_design_moments(8)
    np.testing.assert_allclose(solve_nsr(MomentEstimates(G, D, D - G)).beta2,
                               two_design_spectrum(8).beta2, atol=1e-10)


def test_grid_constant_map():
    x0 = np.array([0.2, 0.3, 0.5])
    pm = ProbabilityMap(3, "tabulated", lambda u: np.tile(x0, (np.size(u), 1)))
    m = grid_moments_oracle(pm, 11)
    np.testing.assert_allclose(m.G, np.outer(x0, x0), atol=1e-15)
    np.testing.assert_allclose(np.diag(m.D), x0, atol=1e-15)


def test_grid_converges():
    pm = circuit_map(random_circuit_encoding(2, 2))
    ref = grid_moments_oracle(pm, 16001).G
    e1 = np.abs(grid_moments_oracle(pm, 501).G - ref).max()
    e2 = np.abs(grid_moments_oracle(pm, 1001).G - ref).max()
    # trapezoid error falls by about 4 per halving of the step
    assert e2 < e1 / 3


def test_grid_matches_monte_carlo():
    pm = circuit_map(random_circuit_encoding(2, 6))
    N = 100_000
    ens = InputEnsemble.iid_uniform(N, 9)
    mc = exact_moments(pm.tabulate(ens), ens.weights)
    g = grid_moments_oracle(pm, 4001)
    assert np.abs(mc.G - g.G).max() <= 5 / math.sqrt(N)


def test_dense_identity_cases():
    enc = CircuitEncoding(2, 3, [0, 0], [0.4, 1.0], [0, 0], 0.0, ((0, 1),))
    U = dense_unitary_oracle(enc, 0.5)
    np.testing.assert_allclose(np.abs(np.diag(U)), 1, atol=1e-12)
    h = HamiltonianEncoding(2, (), [0, 0], [0, 0], [0, 0], 3.0)
    np.testing.assert_allclose(dense_unitary_oracle(h, 0.1), np.eye(4), atol=1e-12)


def test_dense_unitary():
    for enc in (random_circuit_encoding(3, 1), random_hamiltonian_encoding(3, 1)):
        U = dense_unitary_oracle(enc, -0.3)
        np.testing.assert_allclose(U.conj().T @ U, np.eye(8), atol=1e-10)


def test_dense_rabi():
    h = HamiltonianEncoding(1, (), [1.0], [0.0], [0.0], 0.7)
    assert oracle_probabilities(h, 0.0)[1] == pytest.approx(math.sin(0.7) ** 2)


def test_dense_capability():
    with pytest.raises(CapabilityError):
        dense_unitary_oracle(random_circuit_encoding(7, 0), 0.0)


def test_w_state():
    # sum of binary marginal entropies minus log2 L
    for L in (3, 4, 7):
        h2 = -(1 / L) * math.log2(1 / L) - (1 - 1 / L) * math.log2(1 - 1 / L)
        assert w_total_correlation(L) == pytest.approx(L * h2 - math.log2(L), abs=1e-12)
