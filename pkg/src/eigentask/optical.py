"""Classical optical feature generator.

An SLM imprints a u-dependent field on an M x M grid, a lens maps it to
its Fourier plane, and P x P point detectors integrate photocurrent with
Poisson statistics.  Physical constants are lumped into ``brightness``
(mean-count scale) and ``fourier_scale`` (lambda * f).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .quantum import ProbabilityMap
from .sampling import DomainError, StructuralError


class ConfigurationError(ValueError):
    """Inconsistent optical layout."""


@dataclass(frozen=True)
class OpticalEncoding:
    M: int = 64
    P: int = 8
    A1: float = 1.0
    A2: float = 1.0
    B: float = 3.75
    fourier_scale: float = 1.0
    brightness: float = 1.0
    extent: float = 8 * math.pi     # SLM coordinates q span [-extent, extent)
    stride: int | None = None       # detector pitch in grid points (default M // P)

    def __post_init__(self):
        if self.M < self.P or self.P < 1:
            raise ConfigurationError(f"need M >= P >= 1, got M={self.M}, P={self.P}")
        if not self.brightness > 0:
            raise ConfigurationError("brightness must be positive")
        if not self.B >= 0:
            raise ConfigurationError("B must be nonnegative")
        if not (self.extent > 0 and self.fourier_scale > 0):
            raise ConfigurationError("extent and fourier_scale must be positive")
        if self.stride is None:
            object.__setattr__(self, "stride", self.M // self.P)
        rows = self.detector_indices
        if rows.min() < 0 or rows.max() >= self.M:
            raise ConfigurationError("detector grid does not fit inside the focal-plane grid")

    @property
    def K(self) -> int:
        return self.P * self.P

    @property
    def dq(self) -> float:
        return 2.0 * self.extent / self.M

    @property
    def slm_coordinates(self) -> np.ndarray:
        return (np.arange(self.M) - self.M // 2) * self.dq

    @property
    def focal_coordinates(self) -> np.ndarray:
        """Focal-plane sample positions; spacing lambda f / (M dq)."""
        return (np.arange(self.M) - self.M // 2) * self.fourier_scale / (self.M * self.dq)

    @property
    def detector_indices(self) -> np.ndarray:
        """Grid indices (per axis) of the detectors, centred on zero frequency."""
        return self.M // 2 + self.stride * (np.arange(self.P) - self.P // 2)

    def to_dict(self) -> dict:
        return {"type": "optical", "M": self.M, "P": self.P, "A1": self.A1, "A2": self.A2,
                "B": self.B, "fourier_scale": self.fourier_scale,
                "brightness": self.brightness, "extent": self.extent, "stride": self.stride}

    @classmethod
    def from_dict(cls, d: dict) -> "OpticalEncoding":
        keys = ("M", "P", "A1", "A2", "B", "fourier_scale", "brightness", "extent", "stride")
        return cls(**{k: d[k] for k in keys if k in d})


def encoding_phases(enc: OpticalEncoding, u: float):
    """phi_1, phi_2 on the SLM grid (first axis q^1, second axis q^2)."""
    q1, q2 = np.meshgrid(enc.slm_coordinates, enc.slm_coordinates, indexing="ij")
    cu, su = math.cos(u), math.sin(u)
    phi1 = enc.B * (cu * (enc.A1 * np.cos(q1) + enc.A2 * np.sin(q2))
                    + su * (enc.A1 * np.sin(q1) + enc.A2 * np.cos(q2)))
    phi2 = enc.B * u * (enc.A1 * q1 + enc.A2 * q2)
    return phi1, phi2


def slm_field(enc: OpticalEncoding, u: float) -> np.ndarray:
    """E_0 = cos(phi_1 / 2) exp(i (phi_1 + 2 phi_2) / 2)."""
    if abs(u) > 1.0:
        raise DomainError(f"input {u} outside [-1, 1]")
    phi1, phi2 = encoding_phases(enc, float(u))
    return np.cos(phi1 / 2) * np.exp(0.5j * (phi1 + 2 * phi2))


def lens_propagate(field: np.ndarray, enc: OpticalEncoding | None = None) -> np.ndarray:
    """Centred unitary DFT with kernel exp(+i 2 pi d . d' / (lambda f)).

    Zero frequency sits at index M // 2; the transform is orthonormal, so
    sum |E|^2 is conserved.
    """
    field = np.asarray(field)
    if field.ndim != 2 or field.shape[0] != field.shape[1]:
        raise StructuralError(f"field must be a square grid, got shape {field.shape}")
    if enc is not None and field.shape[0] != enc.M:
        raise StructuralError(f"field is {field.shape[0]} wide, encoding expects M={enc.M}")
    return np.fft.fftshift(np.fft.ifft2(np.fft.ifftshift(field), norm="ortho"))


def detector_means(field: np.ndarray, enc: OpticalEncoding) -> np.ndarray:
    """x_k = brightness |E(d_k)|^2 over the P x P detectors (row-major)."""
    field = np.asarray(field)
    if field.shape != (enc.M, enc.M):
        raise ConfigurationError(f"field shape {field.shape} does not match M={enc.M}")
    idx = enc.detector_indices
    return enc.brightness * np.abs(field[np.ix_(idx, idx)]).ravel() ** 2


def optical_features(enc: OpticalEncoding, u) -> np.ndarray:
    """Expected detector counts for one input or an array of inputs."""
    arr = np.asarray(u, dtype=float)
    rows = [detector_means(lens_propagate(slm_field(enc, v), enc), enc) for v in arr.reshape(-1)]
    out = np.vstack(rows)
    return out[0] if arr.ndim == 0 else out


def optical_map(enc: OpticalEncoding) -> ProbabilityMap:
    """Feature map with provenance "optical"; outputs are mean counts, not a simplex."""
    return ProbabilityMap(enc.K, "optical", lambda u: optical_features(enc, u), enc)


def field_magnitude_rows(field: np.ndarray):
    """Rows (i, j, |E|) for CSV export of a field snapshot."""
    mag = np.abs(field)
    i, j = np.indices(mag.shape)
    return np.column_stack([i.ravel(), j.ravel(), mag.ravel()])
