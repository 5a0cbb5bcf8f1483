"""The global invariant mu from pseudohermitian data, lens quotients and the rigidity test."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .exterior import exterior_d, integrate_form, wedge
from .fields import integrate
from .manifold import HopfGrid
from .pseudohermitian import PHData, covariant_derivative

__all__ = [
    "MuReport",
    "mu_pseudohermitian",
    "mu_lens",
    "mu_with_error",
    "coarser",
    "RigidityCertificate",
    "rigidity_certificate",
    "sublaplacian",
    "grad_norm2",
]

EIGHT_PI2 = 8 * math.pi**2


@dataclass(frozen=True)
class MuReport:
    mu: float
    curvature_torsion_term: float
    chern_simons_term: float
    imag: float
    backend: str
    resolution: list | int | None
    error_estimate: float | None = None
    manifold: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "mu": self.mu,
            "terms": {
                "curvature_torsion_term": self.curvature_torsion_term,
                "chern_simons_term": self.chern_simons_term,
            },
            "imag": self.imag,
            "backend": self.backend,
            "resolution": self.resolution,
            "error_estimate": self.error_estimate,
            "manifold": self.manifold,
        }

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), indent=2, sort_keys=True)

    def with_error(self, err: float) -> "MuReport":
        d = dict(self.__dict__)
        d["error_estimate"] = float(err)
        return MuReport(**d)


def _resolution(m):
    return list(m.backend.shape) if m.is_grid else m.backend.truncation


def mu_pseudohermitian(ph: PHData) -> MuReport:
    """mu = (1/8 pi^2) int [ (W^2/6 + 2|A|^2) theta ^ d theta + (2/3) omega ^ d omega ]."""
    cf = ph.cf.coframe
    th = cf.theta
    th_dth = wedge(th, cf.dbasis[0])
    density = ph.W * ph.W * (1 / 6) + ph.A11.abs2() * 2.0
    ct = integrate_form(th_dth * density)
    cs = integrate_form(wedge(ph.omega, ph.d_omega)) * (2 / 3)
    m = ph.manifold
    mu = (ct + cs) / EIGHT_PI2
    return MuReport(
        mu=float(mu.real),
        curvature_torsion_term=float(ct.real),
        chern_simons_term=float(cs.real),
        imag=float(abs(mu.imag)),
        backend=m.backend.name,
        resolution=_resolution(m),
        manifold=m.describe(),
    )


def mu_lens(p: int, q: int, ph: PHData) -> MuReport:
    """mu of a structure on L(p, q); the data must be invariant under the deck group."""
    m = ph.manifold
    if (m.p, m.q % max(m.p, 1)) != (p, q % max(p, 1)):
        raise ValueError(f"structure lives on {m.kind}, not Lens({p},{q})")
    return mu_pseudohermitian(ph)


def coarser(backend):
    """Half resolution per axis (minimum 8), used for error estimates."""
    if not isinstance(backend, HopfGrid):
        return backend
    half = [max(8, n // 2 + (n // 2) % 2) for n in backend.shape]
    return HopfGrid(*half)


def mu_with_error(factory, manifold) -> MuReport:
    """``factory(manifold) -> PHData``; the estimate is the change against a coarser grid."""
    rep = mu_pseudohermitian(factory(manifold))
    if not manifold.is_grid:
        return rep.with_error(0.0)
    coarse = manifold.with_backend(coarser(manifold.backend))
    if coarse == manifold:
        return rep.with_error(float("nan"))
    other = mu_pseudohermitian(factory(coarse))
    return rep.with_error(abs(rep.mu - other.mu))


# ---------------------------------------------------------------------------
# rigidity
# ---------------------------------------------------------------------------

def sublaplacian(ph: PHData, f):
    """Delta_b f = -(f_,1 1bar + f_,1bar 1) for a real function f."""
    f1 = covariant_derivative(ph, f, (0, 0), 1)
    f1b = covariant_derivative(ph, f, (0, 0), 2)
    f11b = covariant_derivative(ph, f1, (1, 0), 2)
    f1b1 = covariant_derivative(ph, f1b, (0, 1), 1)
    return (f11b + f1b1).re * -1.0


def grad_norm2(ph: PHData, f):
    """|grad_b f|^2 = 2 |f_,1|^2."""
    return covariant_derivative(ph, f, (0, 0), 1).abs2() * 2.0


@dataclass(frozen=True)
class RigidityCertificate:
    holds: bool
    margin: float
    torsion_sup: float
    min_W: float
    min_inequality: float
    reasons: list

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def rigidity_certificate(ph: PHData, torsion_tol: float = 1e-8) -> RigidityCertificate:
    """A = 0, W > 0 and 4W(5W^2 + 3 Delta_b W) - 3|grad_b W|^2 > 0."""
    W = ph.W
    lhs = W * 4.0 * (W * W * 5.0 + sublaplacian(ph, W) * 3.0) - grad_norm2(ph, W) * 3.0
    min_w = W.inf_real()
    min_ineq = lhs.inf_real()
    tors = ph.A11.sup()
    reasons = []
    if tors > torsion_tol:
        reasons.append("torsion")
    if min_w <= 0:
        reasons.append("curvature")
    if min_ineq <= 0:
        reasons.append("inequality")
    return RigidityCertificate(not reasons, float(min(min_w, min_ineq)), float(tors), float(min_w), float(min_ineq), reasons)


def volume(ph: PHData) -> float:
    """int theta ^ d theta."""
    cf = ph.cf.coframe
    return float(integrate_form(wedge(cf.theta, cf.dbasis[0])).real)
