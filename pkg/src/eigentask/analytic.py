"""Closed forms and brute-force reference computations.

Nothing here reuses the fast paths in ``quantum`` or ``spectral``: the
unitaries are built from explicit Kronecker products and a Pade matrix
exponential, and the quadrature moments come from scipy's trapezoid rule.
"""
from __future__ import annotations

import numpy as np
from scipy import integrate, linalg

from .quantum import CapabilityError, CircuitEncoding, HamiltonianEncoding, ProbabilityMap
from .sampling import INF_SHOTS, MULTINOMIAL, POISSON, DomainError, check_shots, is_infinite
from .spectral import MomentEstimates, NsrSpectrum

ORACLE_MAX_QUBITS = 6

_I2 = np.eye(2, dtype=complex)
_PX = np.array([[0, 1], [1, 0]], dtype=complex)
_PZ = np.array([[1, 0], [0, -1]], dtype=complex)


def two_design_moments(K: int):
    """G and D of any unitary 2-design: G = (I + 1 1^T) / (K (K + 1)), D = I / K."""
    if K < 2:
        raise DomainError("K must be at least 2")
    G = (np.eye(K) + np.ones((K, K))) / (K * (K + 1))
    D = np.eye(K) / K
    return G, D


def two_design_spectrum(K: int) -> NsrSpectrum:
    """beta^2 = (0, K, ..., K) with explicit eigenvectors.

    r^(0) is the all-ones vector; the rest are a Helmert basis of the
    complement scaled to unit G-norm.
    """
    G, D = two_design_moments(K)
    beta2 = np.full(K, float(K))
    beta2[0] = 0.0
    R = np.empty((K, K))
    R[:, 0] = 1.0
    R[:, 1:] = linalg.helmert(K).T * np.sqrt(K * (K + 1.0))
    for k in range(1, K):
        i = np.argmax(np.abs(R[:, k]))
        if R[i, k] < 0:
            R[:, k] *= -1
    return NsrSpectrum(beta2, R, np.ones(K, dtype=bool), K, MULTINOMIAL, INF_SHOTS,
                       method="closed-form")


def two_design_rec(K: int, S) -> float:
    """C_T = K (S + 1) / (S + K)."""
    if K < 2:
        raise DomainError("K must be at least 2")
    S = check_shots(S)
    if is_infinite(S):
        return float(K)
    return K * (S + 1.0) / (S + K)


def grid_moments_oracle(pmap: ProbabilityMap, grid_N: int, model: str | None = None) -> MomentEstimates:
    """Trapezoid-rule moments over an equispaced grid on [-1, 1] with p(u) = 1/2."""
    if grid_N < 2:
        raise DomainError("grid_N must be at least 2")
    if model is None:
        model = POISSON if pmap.provenance == "optical" else MULTINOMIAL
    u = np.linspace(-1.0, 1.0, int(grid_N))
    x = np.asarray(pmap(u), dtype=float)
    G = integrate.trapezoid(x[:, :, None] * x[:, None, :], u, axis=0) / 2.0
    d = integrate.trapezoid(x, u, axis=0) / 2.0
    D = np.diag(d)
    V = D - G if model == MULTINOMIAL else D.copy()
    return MomentEstimates(0.5 * (G + G.T), D, V, int(grid_N), INF_SHOTS, model)


def _kron_all(mats):
    out = np.ones((1, 1), dtype=complex)
    for m in mats:
        out = np.kron(out, m)
    return out


def _zz(a, b, L):
    return _kron_all([_PZ if l in (a, b) else _I2 for l in range(L)])


def _circuit_unitary(enc: CircuitEncoding, u: float) -> np.ndarray:
    L = enc.L
    rx = [linalg.expm(-0.5j * (t / 2) * _PX) for t in enc.theta_x]
    rz = [linalg.expm(-0.5j * (tz + ti * u) * _PZ) for tz, ti in zip(enc.theta_z, enc.theta_i)]
    Rx = _kron_all(rx)
    Rz = _kron_all(rz)
    W = np.eye(2 ** L, dtype=complex)
    for a, b in enc.graph:
        W = linalg.expm(-0.5j * enc.J * _zz(a, b, L)) @ W
    block = Rx @ W @ Rz @ Rx
    return np.linalg.matrix_power(block, enc.tau)


def _hamiltonian_unitary(enc: HamiltonianEncoding, u: float) -> np.ndarray:
    L = enc.L
    H = np.zeros((2 ** L, 2 ** L), dtype=complex)
    for a, b, j in enc.couplings:
        H += j * _zz(a, b, L)
    for l in range(L):
        single = lambda P: _kron_all([P if m == l else _I2 for m in range(L)])
        H += enc.h_x[l] * single(_PX)
        H += (enc.h_z[l] + u * enc.h_i[l]) * single(_PZ)
    return linalg.expm(-1j * enc.t * H)


def dense_unitary_oracle(enc, u: float) -> np.ndarray:
    """Full 2^L x 2^L unitary of a circuit or Hamiltonian encoding."""
    if enc.L > ORACLE_MAX_QUBITS:
        raise CapabilityError(f"dense oracle limited to L <= {ORACLE_MAX_QUBITS}")
    if isinstance(enc, CircuitEncoding):
        return _circuit_unitary(enc, float(u))
    if isinstance(enc, HamiltonianEncoding):
        return _hamiltonian_unitary(enc, float(u))
    raise TypeError(f"unsupported encoding {type(enc).__name__}")


def oracle_probabilities(enc, u: float) -> np.ndarray:
    return np.abs(dense_unitary_oracle(enc, u)[:, 0]) ** 2


def ghz_distribution(L: int) -> np.ndarray:
    p = np.zeros(2 ** L)
    p[0] = p[-1] = 0.5
    return p


def w_distribution(L: int) -> np.ndarray:
    p = np.zeros(2 ** L)
    p[[1 << l for l in range(L)]] = 1.0 / L
    return p


def w_total_correlation(L: int) -> float:
    """(L - 1) log2(L / (L - 1)) bits for the diagonal W distribution."""
    return (L - 1) * np.log2(L / (L - 1.0))
