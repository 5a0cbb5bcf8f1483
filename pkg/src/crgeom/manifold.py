"""Sample manifolds: the unit 3-sphere and its lens-space quotients.

Points of S^3 are written z = (z1, z2) with |z1|^2 + |z2|^2 = 1.  Grid fields
live on Hopf coordinates

    z1 = cos(eta) exp(i xi1),   z2 = sin(eta) exp(i xi2),

with the round measure sin(eta) cos(eta) d eta d xi1 d xi2 (total 2 pi^2).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from math import gcd

import numpy as np

__all__ = [
    "PolynomialExact",
    "HopfGrid",
    "SampleManifold",
    "sphere",
    "lens",
    "fejer_weights",
    "BackendError",
    "ManifoldMismatch",
]


class BackendError(ValueError):
    """Raised when a backend cannot honour a request (resolution, truncation)."""


class ManifoldMismatch(ValueError):
    """Raised when fields living on different manifolds are combined."""


@dataclass(frozen=True)
class PolynomialExact:
    """Exact monomial arithmetic on S^3.

    ``truncation`` is the order used when a non-polynomial operation
    (reciprocal, square root) is expanded as a power series around the mean.
    ``sample_shape`` is the Hopf grid used for sup-norm estimates.
    """

    truncation: int = 10
    prune: float = 1e-15
    sample_shape: tuple[int, int, int] = (12, 24, 24)

    name = "poly"


@dataclass(frozen=True)
class HopfGrid:
    """Cell-centred Hopf grid, spectral in all three directions."""

    n_eta: int = 32
    n_xi1: int = 32
    n_xi2: int = 32

    name = "grid"

    def __post_init__(self):
        for n in self.shape:
            if n < 8:
                raise BackendError(f"grid resolution {self.shape} below the minimum of 8 per axis")
        if self.n_xi1 % 2 or self.n_xi2 % 2:
            raise BackendError("xi resolutions must be even (half-period shifts are used)")

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.n_eta, self.n_xi1, self.n_xi2)

    @cached_property
    def geometry(self) -> "_GridGeometry":
        return _GridGeometry(self.n_eta, self.n_xi1, self.n_xi2)


def fejer_weights(n: int) -> np.ndarray:
    """Fejer's first rule on [-1, 1] at the nodes cos((2j+1) pi / (2n)).

    Exact for polynomials of degree < n.
    """
    theta = (2 * np.arange(n) + 1) * np.pi / (2 * n)
    j = np.arange(1, n // 2 + 1)
    s = np.cos(2 * np.outer(theta, j)) / (4 * j**2 - 1)
    return (2.0 / n) * (1 - 2 * s.sum(axis=1))


class _GridGeometry:
    """Nodes, quadrature weights, wavenumbers and frame coefficients of a grid."""

    def __init__(self, n_eta, n_xi1, n_xi2):
        self.shape = (n_eta, n_xi1, n_xi2)
        h = np.pi / (2 * n_eta)
        self.eta = (np.arange(n_eta) + 0.5) * h
        self.xi1 = 2 * np.pi * np.arange(n_xi1) / n_xi1
        self.xi2 = 2 * np.pi * np.arange(n_xi2) / n_xi2
        eta, x1, x2 = np.meshgrid(self.eta, self.xi1, self.xi2, indexing="ij")
        self.z1 = np.cos(eta) * np.exp(1j * x1)
        self.z2 = np.sin(eta) * np.exp(1j * x2)

        # t = cos(2 eta) runs over Fejer nodes; dV = (1/4) dt dxi1 dxi2
        w_eta = fejer_weights(n_eta) / 4.0
        dxi = (2 * np.pi / n_xi1) * (2 * np.pi / n_xi2)
        self.weights = w_eta[:, None, None] * dxi * np.ones(self.shape)

        # eta is extended to a full period [0, 2 pi) of 4 n_eta points
        self.k_eta = np.fft.fftfreq(4 * n_eta, d=1.0 / (4 * n_eta))
        self.k_xi1 = np.fft.fftfreq(n_xi1, d=1.0 / n_xi1)
        self.k_xi2 = np.fft.fftfreq(n_xi2, d=1.0 / n_xi2)

        # Z1 = -1/2 e^{-i(xi1+xi2)} (d_eta + i tan(eta) d_xi1 - i cot(eta) d_xi2)
        phase = -0.5 * np.exp(-1j * (x1 + x2))
        self.z_eta = phase
        self.z_xi1 = phase * 1j * np.tan(eta)
        self.z_xi2 = -phase * 1j / np.tan(eta)


@dataclass(frozen=True)
class SampleManifold:
    """S^3 (p = 1) or the lens space L(p, q) together with a field backend.

    The lens group is generated by (z1, z2) -> (w z1, w^q z2), w = exp(2 pi i/p).
    Fields on a lens space are stored on the covering sphere; a field has
    charge k when f(g z) = w^k f(z).
    """

    backend: PolynomialExact | HopfGrid = field(default_factory=PolynomialExact)
    p: int = 1
    q: int = 0

    def __post_init__(self):
        if self.p < 1:
            raise ValueError("lens order p must be a positive integer")
        if self.p > 1 and gcd(self.p, self.q) != 1:
            raise ValueError(f"lens parameters must be coprime, got p={self.p}, q={self.q}")

    @property
    def is_sphere(self) -> bool:
        return self.p == 1

    @property
    def is_grid(self) -> bool:
        return isinstance(self.backend, HopfGrid)

    @property
    def kind(self) -> str:
        return "Sphere" if self.is_sphere else f"Lens({self.p},{self.q})"

    def covering(self) -> "SampleManifold":
        return SampleManifold(self.backend, 1, 0)

    def with_backend(self, backend) -> "SampleManifold":
        return SampleManifold(backend, self.p, self.q)

    def charge_of(self, a, b, c, d):
        """Lens charge of the monomial z1^a conj(z1)^b z2^c conj(z2)^d."""
        return np.mod((np.asarray(a) - b) + self.q * (np.asarray(c) - d), self.p)

    def describe(self) -> dict:
        out = {"kind": self.kind, "p": self.p, "q": self.q, "backend": self.backend.name}
        if self.is_grid:
            out["resolution"] = list(self.backend.shape)
        else:
            out["truncation"] = self.backend.truncation
        return out


def sphere(backend=None) -> SampleManifold:
    return SampleManifold(backend or PolynomialExact())


def lens(p: int, q: int, backend=None) -> SampleManifold:
    return SampleManifold(backend or PolynomialExact(), p, q)
