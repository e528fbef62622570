"""Qubit feature generators: circuit and Hamiltonian ansatze, Haar ensembles.

Basis ordering: outcome index k has binary expansion b_1 ... b_L with
qubit 1 as the most significant bit.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .sampling import DomainError, InputEnsemble, StructuralError, rng_stream, stream_key

MAX_DENSE_QUBITS = 12


class CapabilityError(RuntimeError):
    """Problem size outside what the dense simulators support."""


def chain_graph(L: int) -> tuple:
    return tuple((l, l + 1) for l in range(L - 1))


def ring_graph(L: int) -> tuple:
    if L < 3:
        return chain_graph(L)
    return chain_graph(L) + ((L - 1, 0),)


def _check_graph(graph, L):
    edges = tuple(tuple(int(a) for a in e) for e in graph)
    seen = set()
    for a, b in edges:
        if not (0 <= a < L and 0 <= b < L) or a == b:
            raise DomainError(f"edge ({a}, {b}) is not a valid pair of qubits for L={L}")
        key = (min(a, b), max(a, b))
        if key in seen:
            raise DomainError(f"duplicate edge {key}")
        seen.add(key)
    return edges


def _vec(x, L, name):
    v = np.asarray(x, dtype=float).reshape(-1)
    if v.size == 1 and L > 1:
        v = np.full(L, float(v[0]))
    if v.size != L:
        raise StructuralError(f"{name} has length {v.size}, expected L={L}")
    v.setflags(write=False)
    return v


@dataclass(frozen=True)
class CircuitEncoding:
    L: int
    tau: int
    theta_x: np.ndarray
    theta_z: np.ndarray
    theta_i: np.ndarray
    J: float = 0.0
    graph: tuple = ()

    def __post_init__(self):
        if self.L < 1 or self.tau < 1:
            raise DomainError("need L >= 1 and tau >= 1")
        for name in ("theta_x", "theta_z", "theta_i"):
            object.__setattr__(self, name, _vec(getattr(self, name), self.L, name))
        object.__setattr__(self, "graph", _check_graph(self.graph, self.L))
        object.__setattr__(self, "J", float(self.J))

    @property
    def K(self) -> int:
        return 2 ** self.L

    def to_dict(self) -> dict:
        return {"type": "circuit", "L": self.L, "tau": self.tau,
                "theta_x": self.theta_x.tolist(), "theta_z": self.theta_z.tolist(),
                "theta_i": self.theta_i.tolist(), "J": self.J,
                "graph": [list(e) for e in self.graph]}

    @classmethod
    def from_dict(cls, d: dict) -> "CircuitEncoding":
        L = int(d["L"])
        return cls(L, int(d.get("tau", 1)), d["theta_x"], d["theta_z"], d["theta_i"],
                   float(d.get("J", 0.0)), tuple(map(tuple, d.get("graph", chain_graph(L)))))


@dataclass(frozen=True)
class HamiltonianEncoding:
    L: int
    couplings: tuple
    h_x: np.ndarray
    h_z: np.ndarray
    h_i: np.ndarray
    t: float

    def __post_init__(self):
        if self.L < 1:
            raise DomainError("need L >= 1")
        if self.t < 0:
            raise DomainError(f"evolution time must be nonnegative, got {self.t}")
        for name in ("h_x", "h_z", "h_i"):
            object.__setattr__(self, name, _vec(getattr(self, name), self.L, name))
        cpl = tuple((int(a), int(b), float(j)) for a, b, j in self.couplings)
        _check_graph([(a, b) for a, b, _ in cpl], self.L)
        object.__setattr__(self, "couplings", cpl)
        object.__setattr__(self, "t", float(self.t))

    @property
    def K(self) -> int:
        return 2 ** self.L

    def to_dict(self) -> dict:
        return {"type": "hamiltonian", "L": self.L,
                "couplings": [list(c) for c in self.couplings],
                "h_x": self.h_x.tolist(), "h_z": self.h_z.tolist(),
                "h_i": self.h_i.tolist(), "t": self.t}

    @classmethod
    def from_dict(cls, d: dict) -> "HamiltonianEncoding":
        return cls(int(d["L"]), tuple(map(tuple, d.get("couplings", ()))),
                   d["h_x"], d["h_z"], d["h_i"], float(d["t"]))


def random_circuit_encoding(L: int, seed: int, tau: int = 3, J: float = math.pi / 2,
                            graph=None, index: int = 0) -> CircuitEncoding:
    """theta^x, theta^z ~ U[0, 2pi], theta^I ~ U[0, 10pi]."""
    gen = rng_stream(seed, "circuit-encoding", index)
    tx = gen.uniform(0, 2 * np.pi, L)
    tz = gen.uniform(0, 2 * np.pi, L)
    ti = gen.uniform(0, 10 * np.pi, L)
    graph = chain_graph(L) if graph is None else graph
    return CircuitEncoding(L, tau, tx, tz, ti, J, tuple(graph))


def random_hamiltonian_encoding(L: int, seed: int, t: float = 5.0, J: float = 1.0,
                                rms=(20.0, 5.0, 5.0), mean=(0.0, 0.0, 0.0),
                                graph=None, index: int = 0) -> HamiltonianEncoding:
    """Fields drawn as mean + rms * N(0, 1) for (h^x, h^z, h^I)."""
    gen = rng_stream(seed, "hamiltonian-encoding", index)
    hx, hz, hi = (m + r * gen.standard_normal(L) for m, r in zip(mean, rms))
    graph = ring_graph(L) if graph is None else graph
    return HamiltonianEncoding(L, tuple((a, b, J) for a, b in graph), hx, hz, hi, t)


# --------------------------------------------------------------------------
# statevector simulation

def z_signs(L: int) -> np.ndarray:
    """L x 2^L table of eigenvalues (+1 for bit 0, -1 for bit 1)."""
    k = np.arange(2 ** L)
    bits = (k[None, :] >> (L - 1 - np.arange(L))[:, None]) & 1
    return 1.0 - 2.0 * bits


def _apply_1q(psi, gate, l, L):
    N = psi.shape[0]
    view = psi.reshape(N, 2 ** l, 2, 2 ** (L - l - 1))
    return np.einsum("ab,nibj->niaj", gate, view).reshape(N, -1)


def rx(theta: float) -> np.ndarray:
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    return np.array([[c, -1j * s], [-1j * s, c]])


def rz(theta: float) -> np.ndarray:
    return np.diag([np.exp(-0.5j * theta), np.exp(0.5j * theta)])


def _as_inputs(u):
    arr = np.asarray(u, dtype=float)
    scalar = arr.ndim == 0
    arr = arr.reshape(-1)
    if np.any(np.abs(arr) > 1.0):
        warnings.warn("input outside [-1, 1]", RuntimeWarning, stacklevel=3)
    return arr, scalar


def circuit_statevector(enc: CircuitEncoding, u) -> np.ndarray:
    """Final states for each input, shape N x 2^L."""
    uu, _ = _as_inputs(u)
    L = enc.L
    if L > MAX_DENSE_QUBITS:
        raise CapabilityError(f"L={L} exceeds the dense limit {MAX_DENSE_QUBITS}")
    zs = z_signs(L)
    zz = np.zeros(2 ** L)
    for a, b in enc.graph:
        zz += zs[a] * zs[b]
    w_phase = np.exp(-0.5j * enc.J * zz)
    angles = enc.theta_z[None, :] + np.outer(uu, enc.theta_i)        # N x L
    z_phase = np.exp(-0.5j * angles @ zs)                             # N x 2^L
    half = [rx(t / 2) for t in enc.theta_x]

    psi = np.zeros((uu.size, 2 ** L), dtype=complex)
    psi[:, 0] = 1.0
    for _ in range(enc.tau):
        for l in range(L):
            psi = _apply_1q(psi, half[l], l, L)
        psi = psi * z_phase
        psi = psi * w_phase
        for l in range(L):
            psi = _apply_1q(psi, half[l], l, L)
    return psi


def _probs(psi, scalar):
    p = np.abs(psi) ** 2
    p /= p.sum(axis=1, keepdims=True)
    return p[0] if scalar else p


def circuit_probabilities(enc: CircuitEncoding, u) -> np.ndarray:
    """Outcome distribution after tau blocks; scalar u gives a K-vector."""
    _, scalar = _as_inputs(u)
    return _probs(circuit_statevector(enc, u), scalar)


_X = np.array([[0, 1], [1, 0]], dtype=complex)


def _embed(op, l, L):
    return np.kron(np.kron(np.eye(2 ** l), op), np.eye(2 ** (L - l - 1)))


def hamiltonian_terms(enc: HamiltonianEncoding):
    """Dense H_0 and the diagonal of H_1, with H(u) = H_0 + u H_1."""
    L = enc.L
    zs = z_signs(L)
    diag0 = zs.T @ enc.h_z
    for a, b, j in enc.couplings:
        diag0 = diag0 + j * zs[a] * zs[b]
    H0 = np.diag(diag0).astype(complex)
    for l in range(L):
        if enc.h_x[l] != 0.0:
            H0 += enc.h_x[l] * _embed(_X, l, L)
    return H0, zs.T @ enc.h_i


def hamiltonian_probabilities(enc: HamiltonianEncoding, u) -> np.ndarray:
    """|<b_k| exp(-i H(u) t) |0...0>|^2 via eigendecomposition of H(u)."""
    uu, scalar = _as_inputs(u)
    if enc.L > MAX_DENSE_QUBITS:
        raise CapabilityError(f"L={enc.L} exceeds the dense limit {MAX_DENSE_QUBITS}")
    H0, h1 = hamiltonian_terms(enc)
    H = H0[None, :, :] + uu[:, None, None] * np.diag(h1)[None, :, :]
    E, Vec = np.linalg.eigh(H)
    coef = np.exp(-1j * E * enc.t) * np.conj(Vec[:, 0, :])
    psi = np.einsum("nkj,nj->nk", Vec, coef)
    return _probs(psi, scalar)


# --------------------------------------------------------------------------
# Haar ensemble

def haar_from_gaussian(Z: np.ndarray) -> np.ndarray:
    """QR of complex Ginibre matrices with the phases of diag(R) removed."""
    Q, R = np.linalg.qr(Z)
    d = np.diagonal(R, axis1=-2, axis2=-1)
    return Q * (d / np.abs(d))[..., None, :]


def haar_unitary(K: int, gen: np.random.Generator, size: int | None = None) -> np.ndarray:
    """Haar-random K x K unitary (or a stack of ``size`` of them)."""
    shape = (K, K) if size is None else (size, K, K)
    Z = (gen.standard_normal(shape) + 1j * gen.standard_normal(shape)) / math.sqrt(2)
    return haar_from_gaussian(Z)


# --------------------------------------------------------------------------
# probability maps

@dataclass(frozen=True)
class ProbabilityMap:
    """Vectorized u -> x(u) on the K-simplex, tagged with its provenance."""
    K: int
    provenance: str
    fn: Callable = field(repr=False)
    encoding: object = None

    def __call__(self, u) -> np.ndarray:
        arr = np.asarray(u, dtype=float)
        out = np.asarray(self.fn(arr.reshape(-1)), dtype=float)
        return out[0] if arr.ndim == 0 else out

    def tabulate(self, ensemble: InputEnsemble) -> np.ndarray:
        return self(ensemble.values)


def circuit_map(enc: CircuitEncoding) -> ProbabilityMap:
    return ProbabilityMap(enc.K, "circuit", lambda u: circuit_probabilities(enc, u), enc)


def hamiltonian_map(enc: HamiltonianEncoding) -> ProbabilityMap:
    return ProbabilityMap(enc.K, "hamiltonian", lambda u: hamiltonian_probabilities(enc, u), enc)


def haar_two_design_map(K: int, seed: int) -> ProbabilityMap:
    """Each distinct input u gets its own Haar unitary; x(u) = |U[:, 0]|^2.

    The Philox key pairs a seed-derived word with the IEEE bits of u, so the
    unitary attached to an input does not depend on the rest of the ensemble.
    """
    if K < 2:
        raise DomainError("Haar ensemble needs K >= 2")
    base = stream_key(seed, "haar")[0]

    def fn(u):
        bits = np.ascontiguousarray(u, dtype=np.float64).view(np.uint64)
        Z = np.empty((u.size, 2, K, K))
        for n, b in enumerate(bits):
            gen = np.random.Generator(np.random.Philox(key=np.array([base, b], dtype=np.uint64)))
            Z[n] = gen.standard_normal((2, K, K))
        U = haar_from_gaussian((Z[:, 0] + 1j * Z[:, 1]) / math.sqrt(2))
        p = np.abs(U[:, :, 0]) ** 2
        return p / p.sum(axis=1, keepdims=True)

    return ProbabilityMap(K, "haar-sample", fn, {"type": "haar", "K": K, "seed": seed})


def tabulated_map(values, probs, provenance="tabulated") -> ProbabilityMap:
    """Lookup-table map for inputs known in advance."""
    values = np.asarray(values, dtype=float)
    probs = np.asarray(probs, dtype=float)
    order = np.argsort(values)
    sv, sp = values[order], probs[order]

    def fn(u):
        i = np.searchsorted(sv, u)
        i = np.clip(i, 0, sv.size - 1)
        if not np.all(sv[i] == u):
            raise DomainError("input not present in the tabulated map")
        return sp[i]

    return ProbabilityMap(probs.shape[1], provenance, fn)


# --------------------------------------------------------------------------
# correlations and moments

def _entropy_bits(p, axis=-1):
    p = np.asarray(p, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(p > 0, -p * np.log2(np.where(p > 0, p, 1.0)), 0.0)
    return terms.sum(axis=axis)


def qubit_count(K: int) -> int:
    L = int(round(math.log2(K))) if K > 0 else -1
    if L < 0 or 2 ** L != K:
        raise DomainError(f"K={K} is not a power of two")
    return L


def total_correlation(p) -> np.ndarray:
    """Sum of single-qubit marginal entropies minus the joint entropy, in bits."""
    p = np.atleast_2d(np.asarray(p, dtype=float))
    L = qubit_count(p.shape[1])
    joint = _entropy_bits(p)
    cube = p.reshape((p.shape[0],) + (2,) * L)
    marg = 0.0
    for l in range(L):
        axes = tuple(a + 1 for a in range(L) if a != l)
        marg = marg + _entropy_bits(cube.sum(axis=axes))
    return np.maximum(marg - joint, 0.0)


def expected_total_correlation(map_or_table, ensemble: InputEnsemble) -> float:
    """Ensemble-weighted mean total correlation of the outcome distributions."""
    x = map_or_table.tabulate(ensemble) if isinstance(map_or_table, ProbabilityMap) \
        else np.atleast_2d(np.asarray(map_or_table, dtype=float))
    return float(ensemble.weights @ total_correlation(x))


def ensemble_moment_gram(map_or_table, ensemble: InputEnsemble):
    """(G, D) with G = E_u[x x^T] and D = diag(E_u[x])."""
    x = map_or_table.tabulate(ensemble) if isinstance(map_or_table, ProbabilityMap) \
        else np.atleast_2d(np.asarray(map_or_table, dtype=float))
    if x.shape[0] != ensemble.N:
        raise StructuralError("table rows do not match the ensemble")
    w = ensemble.weights
    G = (x * w[:, None]).T @ x
    D = np.diag(w @ x)
    return 0.5 * (G + G.T), D


def encoding_from_dict(d: dict):
    kind = d.get("type")
    if kind == "circuit":
        return CircuitEncoding.from_dict(d)
    if kind == "hamiltonian":
        return HamiltonianEncoding.from_dict(d)
    raise DomainError(f"unknown encoding type {kind!r}")
