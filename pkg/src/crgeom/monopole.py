"""Residuals of the contact monopole equations on a pseudohermitian background.

For fields (alpha, beta_1bar, a) with a a real 1-form:

    alpha_{,1bar}^a      = Z1bar alpha + s i a(Z1bar) alpha,
    (dbar_b^a)^* beta    = -(beta_{1bar,1} + s i a(Z1) beta),
    da(e1, e2) - W       = |alpha|^2 - |beta_1bar|^2,

with e1 = Z1 + Z1bar, e2 = i (Z1 - Z1bar) and s the ledger twist sign.
Only evaluation is offered; nothing here solves the equations.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .exterior import FormField, exterior_d, integrate_form, wedge
from .fields import GridField, PolyField, integrate, load_snapshot
from .manifold import HopfGrid
from .pseudohermitian import PHData, covariant_derivative

__all__ = [
    "MonopoleFields",
    "MonopoleResidual",
    "twisted_dbar",
    "twisted_dbar_adjoint",
    "residuals",
    "pairing",
    "gauge_transform",
    "obstruction_report",
    "frame_legs_curvature",
]


@dataclass(frozen=True)
class MonopoleFields:
    ph: PHData
    alpha: object
    beta1bar: object
    a: FormField

    def __post_init__(self):
        m = self.ph.manifold
        for f in (self.alpha, self.beta1bar, *self.a.coeffs):
            if f.manifold != m:
                raise ValueError("monopole fields must share the background manifold")
        if self.a.coframe is not self.ph.cf.coframe:
            raise ValueError("the gauge field must be expressed in the background coframe")

    def snapshot(self) -> dict:
        return {
            "alpha": self.alpha.snapshot(),
            "beta1bar": self.beta1bar.snapshot(),
            "a": self.a.snapshot(),
        }

    @classmethod
    def from_snapshot(cls, ph: PHData, data: dict) -> "MonopoleFields":
        m = ph.manifold
        coeffs = [load_snapshot(c, m) for c in data["a"]["coefficients"]]
        a = FormField(ph.cf.coframe, 1, coeffs)
        return cls(ph, load_snapshot(data["alpha"], m), load_snapshot(data["beta1bar"], m), a)


def _twist(ph: PHData) -> int:
    return ph.conv.twist_sign


def twisted_dbar(ph: PHData, alpha, a: FormField):
    """alpha_{,1bar}^a."""
    return ph.cf.derivative(alpha, 2) + a[2] * alpha * (1j * _twist(ph))


def twisted_dbar_adjoint(ph: PHData, beta, a: FormField):
    """Formal adjoint of :func:`twisted_dbar` for the theta ^ d theta pairing."""
    b1 = covariant_derivative(ph, beta, (0, 1), 1)
    return (b1 + a[1] * beta * (1j * _twist(ph))) * -1.0


def pairing(ph: PHData, f, g) -> complex:
    """<f, g> = int f conj(g) theta ^ d theta."""
    cf = ph.cf.coframe
    vol = wedge(cf.theta, cf.dbasis[0])
    return complex(integrate_form(vol * (f * g.conj())))


def frame_legs_curvature(a: FormField):
    """da(e1, e2) with e1 = Z1 + Z1bar, e2 = i (Z1 - Z1bar)."""
    return (exterior_d(a)[0] * -2j).re


@dataclass(frozen=True)
class MonopoleResidual:
    dirac_alpha: object
    dirac_beta: object
    curvature: object
    ph: PHData

    def _norms(self, f) -> dict:
        l2 = pairing(self.ph, f, f).real
        return {"sup": f.sup(), "l2": math.sqrt(max(l2, 0.0))}

    def report(self) -> dict:
        return {
            "dirac_alpha": self._norms(self.dirac_alpha),
            "dirac_beta": self._norms(self.dirac_beta),
            "curvature": self._norms(self.curvature),
        }

    def to_json(self) -> str:
        return json.dumps(self.report(), indent=2, sort_keys=True)


def residuals(mf: MonopoleFields) -> MonopoleResidual:
    ph = mf.ph
    da = frame_legs_curvature(mf.a)
    curv = (da - ph.W - mf.alpha.abs2() + mf.beta1bar.abs2()).as_real()
    return MonopoleResidual(
        twisted_dbar(ph, mf.alpha, mf.a),
        twisted_dbar_adjoint(ph, mf.beta1bar, mf.a),
        curv,
        ph,
    )


def gauge_transform(mf: MonopoleFields, gamma) -> MonopoleFields:
    """alpha -> e^{i gamma} alpha, beta -> e^{i gamma} beta, a -> a - d gamma (grid backend)."""
    if not isinstance(gamma, GridField):
        raise TypeError("gauge functions are applied on the grid backend (e^{i gamma} is not polynomial)")
    g = gamma.as_real()
    phase = g.apply(lambda v: np.exp(1j * v.real))
    dg = exterior_d(FormField(mf.ph.cf.coframe, 0, [g]))
    return MonopoleFields(mf.ph, mf.alpha * phase, mf.beta1bar * phase, mf.a - dg)


def obstruction_report(ph: PHData, torsion_tol: float = 1e-8) -> dict:
    """Whether A_11 = 0 and W > 0 hold; a hypothesis check only."""
    W = ph.W
    if isinstance(W, PolyField):
        grid = ph.manifold.with_backend(HopfGrid(*ph.manifold.backend.sample_shape))
        W = W.on(grid)
    vals = W.values.real
    neg = float(np.sum(W.geometry.weights * (vals <= 0)) / np.sum(W.geometry.weights))
    torsion_free = ph.A11.sup() <= torsion_tol
    positive = float(vals.min()) > 0
    if torsion_free and positive:
        verdict = "torsion-free with positive Tanaka-Webster curvature: both hypotheses hold"
    elif not torsion_free and not positive:
        verdict = "torsion present and curvature not positive"
    elif not torsion_free:
        verdict = "torsion present"
    else:
        verdict = "curvature not positive"
    return {
        "torsion_free": bool(torsion_free),
        "W_positive": bool(positive),
        "torsion_sup": ph.A11.sup(),
        "min_W": float(vals.min()),
        "negative_fraction": neg,
        "verdict": verdict,
    }
