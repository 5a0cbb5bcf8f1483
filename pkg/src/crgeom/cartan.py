"""The Cartan connection of a CR 3-manifold in the gauge phi = 0.

Given an admissible coframe with pseudohermitian data (omega, A, W), the
connection forms are sought in the form

    phi_1^1 = omega + alpha theta,
    phi^1   = A^1_1bar theta^1bar + beta theta^1 + gamma theta,
    psi     = delta theta + eps theta^1 + conj(eps) theta^1bar.

Matching the first structure equations and the algebraic parts of the
second set gives, pointwise,

    beta = alpha = i W / 4,   eps = i conj(gamma),
    gamma = (2i/3) (P' - Z1bar alpha),   P' = theta ^ theta^1bar coefficient of d omega,
    delta = -2 (theta ^ theta^1 coefficient of the phi^1 line before delta enters).

The remaining coefficients of the second set are read off as Q^1_1bar, R_1, R_1bar.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

from .exterior import FormField, MatrixForm, exterior_d, integrate_form, matrix_wedge, trace, wedge
from .pseudohermitian import PHData

__all__ = [
    "CartanPackage",
    "solve_cartan",
    "curvature",
    "connection_matrix",
    "transgression_mu",
    "TransgressionReport",
    "CartanSolveError",
]


class CartanSolveError(ValueError):
    pass


@dataclass(frozen=True)
class CartanPackage:
    ph: PHData
    phi: FormField
    phi11: FormField
    phi1: FormField
    psi: FormField
    Pi: MatrixForm
    Q1_1bar: object
    R1: object
    R1bar: object
    residuals: dict = field(default_factory=dict)
    lines: dict = field(default_factory=dict)
    _omega: list = field(default_factory=list)

    @property
    def Omega(self) -> MatrixForm:
        if not self._omega:
            self._omega.append(curvature(self))
        return self._omega[0]

    @property
    def Q11(self):
        """Q_11 under the ledger index convention."""
        return self.ph.conv.q_from_extracted(self.Q1_1bar)

    def report(self) -> dict:
        return {
            "residuals": {k: float(v) for k, v in self.residuals.items()},
            "sup_Q": self.Q1_1bar.sup(),
            "sup_R1": self.R1.sup(),
            "reality_R": (self.R1bar - self.R1.conj()).sup(),
        }

    def to_json(self) -> str:
        return json.dumps(self.report(), indent=2, sort_keys=True)


def connection_matrix(phi, phi11, phi1, psi, theta, theta1) -> MatrixForm:
    theta1bar = theta1.conj()
    phi_1 = phi1.conj()          # phi_1 = h phi^1bar, h = 1
    phi1b1b = phi11.conj()
    third = 1.0 / 3.0
    return MatrixForm([
        [(phi11 + phi) * -third, theta1, theta * 2.0],
        [phi_1 * -1j, (phi11 * 2.0 - phi) * third, theta1bar * 2j],
        [psi * -0.25, phi1 * 0.5, (phi + phi1b1b) * third],
    ])


def solve_cartan(ph: PHData, tol: float = 1e-6, strict: bool = False) -> CartanPackage:
    cf = ph.cf.coframe
    th, th1, th1b = cf.theta, cf.theta1, cf.theta1bar
    zero = cf.zero_form(1)
    phi = zero

    alpha = ph.W * 0.25j
    P_prime = ph.d_omega[2]
    gamma = (P_prime - cf.derivative(alpha, 2)) * (2j / 3)
    eps = gamma.conj() * 1j

    phi11 = ph.omega + th * alpha
    phi1 = th1b * ph.A_up + th1 * alpha + th * gamma
    psi0 = th1 * eps + th1b * eps.conj()

    dphi1 = exterior_d(phi1)
    line2_0 = dphi1 - wedge(phi, phi1) - wedge(phi1, phi11) + wedge(psi0, th1) * 0.5
    delta = line2_0[1] * -2.0
    psi = psi0 + th * delta
    line2 = line2_0 + wedge(th * delta, th1) * 0.5

    phi_1 = phi1.conj()
    line1 = exterior_d(phi11) - wedge(th1b, phi1) * 1j + wedge(phi_1, th1) * 2j + wedge(psi, th) * 0.5
    line3 = exterior_d(psi) - wedge(phi, psi) - wedge(phi1, phi_1) * 2j

    eq2a = cf.dbasis[1] - wedge(th1, phi11) - wedge(th, phi1)
    re_part = wedge(th1, phi1.conj()) * 1j
    eq2b = exterior_d(phi) - (re_part + re_part.conj()) - wedge(th, psi)

    Q_up = line2[2] * -1.0
    R1, R1bar = line3[1] * -1.0, line3[2] * -1.0

    Pi = connection_matrix(phi, phi11, phi1, psi, th, th1)
    res = {
        "eq2_dtheta1": eq2a.sup(),
        "eq2_dphi": eq2b.sup(),
        "eq3_line1": line1.sup(),
        "eq3_line2_offpattern": max(line2[0].sup(), line2[1].sup()),
        "eq3_line3_offpattern": line3[0].sup(),
        "normalization": (phi - phi11 - phi11.conj()).sup(),
        "trace_Pi": trace(Pi).sup(),
        "delta_imag": delta.im.sup(),
        "R_reality": (R1bar - R1.conj()).sup(),
    }
    if strict:
        for k in ("eq2_dtheta1", "eq2_dphi", "eq3_line1", "eq3_line2_offpattern", "eq3_line3_offpattern"):
            if res[k] > tol:
                raise CartanSolveError(f"structure equation {k} residual {res[k]:.3g} above {tol:.3g}")
        if res["normalization"] > tol:
            raise CartanSolveError(f"normalization residual {res['normalization']:.3g}")
    lines = {"line1": line1, "line2": line2, "line3": line3}
    return CartanPackage(ph, phi, phi11, phi1, psi,
                         Pi, Q_up, R1, R1bar, res, lines)


def curvature(pkg: CartanPackage) -> MatrixForm:
    """Omega = d Pi - Pi ^ Pi."""
    return pkg.Pi.d() - matrix_wedge(pkg.Pi, pkg.Pi)


@dataclass(frozen=True)
class TransgressionReport:
    mu: float
    mu_middle: float
    imag: float
    exact_term: float

    def as_dict(self) -> dict:
        return {"mu": self.mu, "mu_middle": self.mu_middle, "imag": self.imag, "exact_term": self.exact_term}


def transgression_mu(pkg: CartanPackage) -> TransgressionReport:
    """mu = (1/24 pi^2) int tr(Pi ^ Pi ^ Pi), and the equivalent middle expression."""
    Pi = pkg.Pi
    cubed = trace(matrix_wedge(matrix_wedge(Pi, Pi), Pi))
    total = integrate_form(cubed) / (24 * math.pi**2)

    cf = pkg.ph.cf.coframe
    th, th1 = cf.theta, cf.theta1
    phi1b = pkg.phi1.conj()
    a = wedge(wedge(th1, phi1b), pkg.phi11) * 1j
    th_psi = wedge(th, pkg.psi)
    middle = (
        a + a.conj()
        + wedge(th_psi, pkg.phi) * 0.5
        - wedge(wedge(th, pkg.phi1), phi1b) * 2j
    )
    exact = integrate_form(exterior_d(th_psi) * -0.5)
    mid = (integrate_form(middle) + exact) / (8 * math.pi**2)
    return TransgressionReport(float(total.real), float(mid.real), float(abs(total.imag)), float(abs(exact)))
