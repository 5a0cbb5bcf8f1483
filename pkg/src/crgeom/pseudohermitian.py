"""Admissible coframes, the pseudohermitian structure equations and the Cartan tensor.

An admissible coframe is normalized so that

    d theta = i theta^1 ^ theta^1bar          (h = 1, phi = 0).

A structure near the standard one is given by a contact factor u > 0 and a
deformation E with |E| < 1:

    theta   = u theta_hat,
    theta^1 = lam (theta_hat^1 + E conj(theta_hat^1) + v theta_hat),

where lam = sqrt(u / (1 - |E|^2)) and the shift v is the unique solution of
the theta ^ theta^1 matching condition.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import conventions as _conv
from .exterior import Coframe, FormField, coframe_from_matrix, exterior_d, standard_coframe, wedge
from .fields import ScalarField, constant, group_pullback

__all__ = [
    "AdmissibleCoframe",
    "AdmissibilityError",
    "PHData",
    "CoframeChange",
    "build_coframe",
    "solve_ph",
    "covariant_derivative",
    "cartan_tensor",
    "transform_coframe",
    "TransformedCoframe",
    "pullback_structure",
    "structure",
    "standard",
    "is_spherical",
    "admissibility_residual",
]


class AdmissibilityError(ValueError):
    pass


@dataclass(frozen=True)
class AdmissibleCoframe:
    """A normalized coframe together with the data it was built from."""

    coframe: Coframe
    u: ScalarField
    E: ScalarField | None = None
    residual: float = 0.0

    @property
    def manifold(self):
        return self.coframe.manifold

    @property
    def theta(self):
        return self.coframe.theta

    @property
    def theta1(self):
        return self.coframe.theta1

    def derivative(self, f, direction):
        return self.coframe.derivative(f, direction)


def admissibility_residual(cf: Coframe) -> float:
    dt = cf.dbasis[0]
    return max((dt[0] - 1j).sup(), dt[1].sup(), dt[2].sup())


def build_coframe(u: ScalarField, E: ScalarField | None = None, tol: float = 1e-6) -> AdmissibleCoframe:
    """Normalized coframe for the contact factor ``u`` and deformation ``E``."""
    m = u.manifold
    if u.inf_real() <= 0 or u.im.sup() > 1e-9 * max(1.0, u.sup()):
        raise AdmissibilityError("contact factor u must be real and positive")
    u = u.as_real()
    std = standard_coframe(m)
    zero = constant(m, 0.0)
    if E is None:
        E = zero
    if E.sup() >= 1.0:
        raise AdmissibilityError("deformation must satisfy sup|E| < 1")
    gap = (1.0 - E.abs2()).as_real()
    lam = (u * gap.reciprocal()).as_real().sqrt()
    zu, zbu = std.derivative(u, 1), std.derivative(u, 2)
    v = (zbu - E * zu) * u.reciprocal() * 1j
    M = [
        [u, zero, zero],
        [lam * v, lam, lam * E],
        [lam * v.conj(), lam * E.conj(), lam],
    ]
    cf = coframe_from_matrix(m, M, label="admissible", det=u * u)
    res = admissibility_residual(cf)
    if res > tol:
        raise AdmissibilityError(f"admissibility residual {res:.3g} above tolerance {tol:.3g}")
    return AdmissibleCoframe(cf, u, E, res)


def standard(manifold) -> AdmissibleCoframe:
    return AdmissibleCoframe(standard_coframe(manifold), constant(manifold, 1.0), constant(manifold, 0.0), 0.0)


@dataclass(frozen=True)
class PHData:
    """Connection omega_1^1, torsion and Tanaka-Webster curvature of a coframe."""

    cf: AdmissibleCoframe
    omega: FormField
    A_up: ScalarField        # A^1_1bar, the theta ^ theta^1bar coefficient of d theta^1
    A11: ScalarField
    W: ScalarField
    d_omega: FormField
    residuals: dict = field(default_factory=dict)
    conv: _conv.Conventions = field(default_factory=_conv.load)

    @property
    def manifold(self):
        return self.cf.manifold


def solve_ph(cf: AdmissibleCoframe, conv: _conv.Conventions | None = None, tol: float = 1e-6) -> PHData:
    conv = conv or _conv.load()
    c = cf.coframe
    d1 = c.dbasis[1]
    p, q, r = d1.coeffs
    # d theta^1 = theta^1 ^ omega + A theta ^ theta^1bar, omega + conj(omega) = 0
    omega = FormField(c, 1, [-q, -p.conj(), p])
    recon = wedge(c.theta1, omega) + wedge(c.theta, c.theta1bar) * r
    d_omega = exterior_d(omega)
    W = d_omega[0]
    res = {
        "admissibility": admissibility_residual(c),
        "reality_omega": (q + q.conj()).sup(),
        "imag_W": W.im.sup(),
        "reconstruction": (recon - d1).sup(),
    }
    if res["admissibility"] > tol:
        raise AdmissibilityError(f"admissibility residual {res['admissibility']:.3g}")
    if res["reality_omega"] > tol * max(1.0, q.sup()):
        raise AdmissibilityError(f"connection reality residual {res['reality_omega']:.3g}")
    W = W.re
    return PHData(cf, omega, r, conv.lower_torsion(r), W, d_omega, res, conv)


def covariant_derivative(ph: PHData, t: ScalarField, weights, direction) -> ScalarField:
    """Covariant derivative of a component with ``weights`` = (# lower 1, # lower 1bar).

    ``direction`` is 0 (T), 1 or 2 (= 1bar).
    """
    if not isinstance(ph, PHData):
        raise TypeError("covariant_derivative needs a solved PHData")
    d = {"0": 0, "1": 1, "1bar": 2}.get(direction, direction)
    out = ph.cf.derivative(t, d)
    k = weights[0] - weights[1]
    if k:
        out = out - ph.omega[d] * t * (ph.conv.covariant_sign * k)
    return out


def cartan_tensor(ph: PHData) -> ScalarField:
    """Q_11 = W_,11 / 6 + (i/2) W A_11 - A_11,0 - (2i/3) A_11,1bar1."""
    W, A = ph.W, ph.A11
    W1 = covariant_derivative(ph, W, (0, 0), 1)
    W11 = covariant_derivative(ph, W1, (1, 0), 1)
    A0 = covariant_derivative(ph, A, (2, 0), 0)
    A1b = covariant_derivative(ph, A, (2, 0), 2)
    A1b1 = covariant_derivative(ph, A1b, (2, 1), 1)
    return W11 * (1 / 6) + W * A * 0.5j - A0 - A1b1 * (2j / 3)


def is_spherical(ph: PHData, tol: float = 1e-8) -> bool:
    return cartan_tensor(ph).sup() < tol


# ---------------------------------------------------------------------------
# coframe changes
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CoframeChange:
    """theta~ = u theta, theta~^1 = u11 theta^1 + v1 theta; s is the free theta-part of phi~."""

    u: ScalarField
    u11: ScalarField
    v1: ScalarField
    s: ScalarField


@dataclass(frozen=True)
class TransformedCoframe:
    """Result of a coframe change.

    ``literal`` is the coframe of the change as given (h~ = u / |u11|^2 and
    a possibly non-zero phi~); ``phi`` is its induced phi~ (with the s theta~
    part included) and ``phi_formula`` the closed form
    -du/u + phi + (2 h~/u) Re(i conj(v1) theta~^1) + s theta.  ``normalized`` is the
    admissible coframe (h = 1, phi = 0) in the same conformal class, related to
    the input by theta~ = u theta, theta~^1 = U theta^1 + v theta with |U|^2 = u.
    """

    literal: Coframe
    h: ScalarField
    phi: FormField
    phi_formula: FormField
    normalized: AdmissibleCoframe
    U: ScalarField


def _compose(outer, inner):
    return [[sum((outer[i][k] * inner[k][j] for k in range(1, 3)), outer[i][0] * inner[0][j])
             for j in range(3)] for i in range(3)]


def _matrix_of(cf: Coframe):
    if cf.is_standard:
        one, zero = cf.one(), cf.zero()
        return [[one, zero, zero], [zero, one, zero], [zero, zero, one]]
    return cf.matrix


def transform_coframe(cf: AdmissibleCoframe, ch: CoframeChange, tol: float = 1e-6) -> TransformedCoframe:
    c = cf.coframe
    m = cf.manifold
    zero = constant(m, 0.0)
    u, u11, v1 = ch.u.as_real(), ch.u11, ch.v1
    if u.inf_real() <= 0:
        raise AdmissibilityError("coframe change needs u > 0")
    base = _matrix_of(c)

    step = [[u, zero, zero], [v1, u11, zero], [v1.conj(), zero, u11.conj()]]
    base_det = cf.u * cf.u
    literal = coframe_from_matrix(m, _compose(step, base), label="literal", det=u * u11.abs2() * base_det)
    h = (u * u11.abs2().reciprocal()).as_real()
    # d theta~ - i h theta~^1 ^ theta~^1bar = theta~ ^ phi~  (phi~ determined mod theta~)
    dt = literal.dbasis[0]
    phi = FormField(literal, 1, [ch.s, dt[1], dt[2]])
    # closed form, expressed through the old coframe and re-expressed
    du = exterior_d(FormField(c, 0, [u]))
    old_part = du * (-1.0 * u.reciprocal())
    new_theta1 = FormField(c, 1, [v1, u11, zero])
    extra = new_theta1 * (v1.conj() * 1j * h * 2.0 * u.reciprocal())
    extra = (extra + extra.conj()) * 0.5
    formula_old = old_part + extra + FormField(c, 1, [ch.s * u, zero, zero])  # s theta~
    phi_formula = _to_literal(formula_old, step, literal)

    # normalized representative
    phase = u11 * u11.abs2().as_real().sqrt().reciprocal()
    U = phase * u.sqrt()
    v = c.derivative(u, 2) * U.conj().reciprocal() * 1j
    nstep = [[u, zero, zero], [v, U, zero], [v.conj(), zero, U.conj()]]
    ncf = coframe_from_matrix(m, _compose(nstep, base), label="normalized", det=u * u * base_det)
    res = admissibility_residual(ncf)
    if res > tol:
        raise AdmissibilityError(f"transformed coframe inadmissible (residual {res:.3g})")
    return TransformedCoframe(literal, h, phi, phi_formula, AdmissibleCoframe(ncf, u * cf.u, None, res), U)


def _to_literal(form_old: FormField, step, literal: Coframe) -> FormField:
    """Re-express a 1-form from the old coframe in the literal new coframe."""
    # old^b = sum_c Sinv[b][c] new^c with S the 3x3 step matrix
    from .exterior import inv3

    S_inv = inv3(step)
    coeffs = []
    for cidx in range(3):
        acc = None
        for b in range(3):
            t = form_old[b] * S_inv[b][cidx]
            acc = t if acc is None else acc + t
        coeffs.append(acc)
    return FormField(literal, 1, coeffs)


# ---------------------------------------------------------------------------
# convenience
# ---------------------------------------------------------------------------

def structure(u=None, E=None, manifold=None, conv=None, tol: float = 1e-6):
    """(coframe, PHData) for the structure given by ``u`` and ``E``."""
    m = manifold or (u.manifold if u is not None else E.manifold)
    if u is None:
        u = constant(m, 1.0)
    cf = build_coframe(u, E, tol=tol)
    return cf, solve_ph(cf, conv, tol=tol)


def pullback_structure(u: ScalarField, E: ScalarField, g) -> tuple[ScalarField, ScalarField]:
    """Data (u', E') of the pullback of the structure (u, E) by z -> g z, g in U(2).

    theta_hat is U(2)-invariant and theta_hat^1 picks up the factor det(g),
    so E' = (E o g) conj(det g)^2 and u' = u o g.
    """
    g = np.asarray(g, dtype=complex)
    det = np.linalg.det(g)
    return group_pullback(u, g).as_real(), group_pullback(E, g) * (np.conj(det) ** 2)
