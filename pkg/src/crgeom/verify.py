"""Verification suites: every checkable identity, with its measured residual.

Each check returns a :class:`Check`; a suite is a list of checks.  Checks take
a :class:`Settings` so every tolerance and resolution is visible to callers.
"""
from __future__ import annotations

import math
import os
import tempfile
import time
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.stats import unitary_group

from . import conventions as _conv
from .cartan import curvature, solve_cartan, transgression_mu
from .exterior import FormField, exterior_d, matrix_wedge, standard_coframe, trace, wedge
from .fields import (
    constant, coordinate, frame_derivative, from_samples, from_terms, group_pullback, integrate,
    random_polynomial,
)
from .flows import (
    SliceBasis, calibrate_pairing, cartan_rhs, cartan_state, run_flow, yamabe_flow_step, yamabe_rate,
    yamabe_state,
)
from .invariants import mu_pseudohermitian, rigidity_certificate
from .manifold import HopfGrid, PolynomialExact, lens, sphere
from .monopole import MonopoleFields, gauge_transform, pairing, residuals, twisted_dbar, twisted_dbar_adjoint
from .pseudohermitian import (
    CoframeChange, build_coframe, cartan_tensor, pullback_structure, solve_ph, standard, structure,
    transform_coframe,
)

__all__ = ["Check", "Settings", "SUITES", "CRITERIA", "run_suite", "run_criterion", "DEFAULT_TOLERANCES"]

DEFAULT_TOLERANCES = {
    "commutator": 1e-10,
    "grid_exact": 1e-9,
    "quadrature": 1e-8,
    "leibniz": 1e-9,
    "conjugation": 1e-12,
    "dd": 1e-9,
    "std_torsion": 1e-10,
    "std_W": 1e-8,
    "std_Q": 1e-8,
    "reconstruction_poly": 1e-8,
    "reconstruction_grid": 1e-4,
    "reality": 1e-8,
    "equivariance": 1e-6,
    "q_law": 1e-6,
    "mutation_gap": 1e-2,
    "contact_independence": 1e-5,
    "backend_agreement": 1e-4,
    "additivity": 1e-12,
    "cross_formula": 1e-4,
    "tr_pi_omega": 1e-7,
    "q_extracted": 1e-4,
    "eq2": 1e-7,
    "pairing_dispersion": 1e-2,
    "base_derivative": 1e-10,
    "mu_slack": 1e-9,
    "supE_decrease": 0.5,
    "yamabe_std": 1e-6,
    "taylor_order": 0.25,
    "fixed_point": 1e-10,
    "lens": 1e-8,
    "gauge": 1e-8,
    "adjoint": 1e-6,
    "zero_config": 1e-12,
    "rigidity": 1e-9,
}


@dataclass
class Settings:
    tolerances: dict = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))
    grid: tuple = (16, 32, 32)          # pipelines on deformed structures
    flow_grid: tuple = (8, 16, 16)
    seed: int = 0
    n_random: int = 5
    flow_starts: int = 3
    flow_steps: int = 200
    flow_dt: float = 0.02
    flow_amplitude: float = 0.1
    slice_degree: int = 2
    yamabe_steps: int = 100
    yamabe_dt: float = 1e-3
    yamabe_grid: tuple = (12, 24, 24)
    monopole_grid: tuple = (24, 48, 48)  # resolves e^{i gamma} for |gamma| ~ 3
    conv: object = None

    def tol(self, key):
        return float(self.tolerances.get(key, DEFAULT_TOLERANCES[key]))

    def rng(self, salt=0):
        return np.random.default_rng([self.seed, salt])

    def conventions(self):
        return self.conv or _conv.load()


@dataclass
class Check:
    suite: str
    name: str
    measured: float
    tolerance: float
    passed: bool
    detail: dict = field(default_factory=dict)
    seconds: float = 0.0

    def as_dict(self) -> dict:
        return {
            "suite": self.suite, "name": self.name, "measured": _num(self.measured),
            "tolerance": self.tolerance, "passed": bool(self.passed),
            "detail": {k: _num(v) for k, v in self.detail.items()},
        }


def _num(v):
    if isinstance(v, (float, np.floating)):
        return float(v) if math.isfinite(v) else repr(float(v))
    if isinstance(v, (list, tuple)):
        return [_num(x) for x in v]
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.bool_,)):
        return bool(v)
    return v


def _below(suite, name, measured, tol, **detail):
    ok = bool(np.isfinite(measured) and measured < tol)
    return Check(suite, name, float(measured), tol, ok, detail)


def _grid(shape, p=1, q=0):
    return sphere(HopfGrid(*shape)) if p == 1 else lens(p, q, HopfGrid(*shape))


def _rel(a, b):
    return (a - b).sup() / max(b.sup(), 1e-300)


# ---------------------------------------------------------------------------
# geometry core and exterior calculus
# ---------------------------------------------------------------------------

def check_commutators(s: Settings):
    """[X_b, X_c] f by composition against -sum_a C^a_bc X_a f (polynomial backend)."""
    m = sphere()
    rng = s.rng(1)
    worst = 0.0
    cf = build_coframe(constant(m, 1.0), random_polynomial(m, rng, 1, 2, 0.05)).coframe
    for frame in (standard_coframe(m), cf):
        for _ in range(3):
            f = random_polynomial(m, rng, 3, 5)
            for b, c in ((1, 2), (1, 0), (2, 0)):
                lhs = frame.derivative(frame.derivative(f, c), b) - frame.derivative(frame.derivative(f, b), c)
                rhs = constant(m, 0.0)
                for a in range(3):
                    rhs = rhs - frame.structure_coefficient(a, b, c) * frame.derivative(f, a)
                worst = max(worst, (lhs - rhs).sup() / max(1.0, f.sup()))
    return _below("geometry", "commutator_consistency", worst, s.tol("commutator"))


def check_grid_vs_exact(s: Settings):
    """Spectral grid derivatives of monomials of degree <= 6 converge to the exact ones."""
    pm = sphere()
    mons = [(a, b, c, d) for a in range(7) for b in range(7 - a) for c in range(7 - a - b)
            for d in range(7 - a - b - c)]
    errs = []
    for shape in ((8, 8, 8), (12, 16, 16), (16, 32, 32)):
        gm = _grid(shape)
        e = 0.0
        for mono in mons:
            f = from_terms(pm, {mono: 1.0}, charge=None)
            for d in (0, 1, 2):
                exact = frame_derivative(f, d).on(gm)
                e = max(e, (frame_derivative(f.on(gm), d) - exact).sup())
        errs.append(e)
    monotone = all(errs[i + 1] <= errs[i] * 1.01 + 1e-13 for i in range(len(errs) - 1))
    c = _below("geometry", "grid_vs_exact", errs[-1], s.tol("grid_exact"), errors=errs, monotone=monotone)
    c.passed = c.passed and monotone
    return c


def _monomial_integral(a, b, c, d):
    if a != b or c != d:
        return 0.0
    return 2 * math.pi**2 * math.factorial(a) * math.factorial(c) / math.factorial(a + c + 1)


def check_quadrature(s: Settings):
    """Grid integrals of monomials of degree <= 8 against the closed form."""
    gm = _grid(s.grid)
    pm = sphere()
    worst = 0.0
    for a in range(9):
        for b in range(9 - a):
            for c in range(9 - a - b):
                for d in range(9 - a - b - c):
                    f = from_terms(pm, {(a, b, c, d): 1.0}, charge=None)
                    exact = _monomial_integral(a, b, c, d)
                    worst = max(worst, abs(integrate(f.on(gm)) - exact), abs(integrate(f) - exact))
    return _below("geometry", "quadrature_exactness", worst, s.tol("quadrature"))


def check_leibniz(s: Settings):
    m = sphere()
    rng = s.rng(2)
    cf = standard_coframe(m)
    worst = 0.0
    for _ in range(4):
        f = random_polynomial(m, rng, 3, 4)
        F = FormField(cf, 0, [f])
        for i in range(3):
            a = cf.basis(i)
            lhs = exterior_d(a * f)
            rhs = wedge(exterior_d(F), a) + exterior_d(a) * f
            worst = max(worst, (lhs - rhs).sup())
        b = wedge(cf.basis(0), cf.basis(1))
        worst = max(worst, (exterior_d(b * f) - (wedge(exterior_d(F), b) + exterior_d(b) * f)).sup())
    return _below("exterior", "leibniz", worst, s.tol("leibniz"))


def check_conjugation(s: Settings):
    m = sphere()
    rng = s.rng(3)
    cf = standard_coframe(m)
    a = FormField(cf, 1, [random_polynomial(m, rng, 2, 3) for _ in range(3)])
    b = FormField(cf, 1, [random_polynomial(m, rng, 2, 3) for _ in range(3)])
    e1 = (exterior_d(a).conj() - exterior_d(a.conj())).sup()
    e2 = (wedge(a, b).conj() - wedge(a.conj(), b.conj())).sup()
    return _below("exterior", "conjugation_commutes", max(e1, e2), s.tol("conjugation"), d=e1, wedge=e2)


def check_dd(s: Settings):
    m = sphere()
    rng = s.rng(4)
    cf = build_coframe(constant(m, 1.0), random_polynomial(m, rng, 1, 2, 0.05)).coframe
    worst = 0.0
    for frame in (standard_coframe(m), cf):
        f = random_polynomial(m, rng, 3, 4)
        worst = max(worst, exterior_d(exterior_d(FormField(frame, 0, [f]))).sup())
        a = FormField(frame, 1, [random_polynomial(m, rng, 2, 3) for _ in range(3)])
        worst = max(worst, exterior_d(exterior_d(a)).sup())
    return _below("exterior", "d_squared_zero", worst, s.tol("dd"))


# ---------------------------------------------------------------------------
# pseudohermitian
# ---------------------------------------------------------------------------

def check_standard_calibration(s: Settings):
    """Criterion 1: A = 0, W constant, Q = 0 on the standard sphere (polynomial backend)."""
    ph = solve_ph(standard(sphere()), s.conventions())
    Q = cartan_tensor(ph)
    tors, wstd, q = ph.A11.sup(), ph.W.std(), Q.sup()
    ok = tors < s.tol("std_torsion") and wstd < s.tol("std_W") and q < s.tol("std_Q")
    return Check("pseudohermitian", "standard_calibration", max(tors, wstd, q), s.tol("std_W"), ok,
                 {"sup_A11": tors, "std_W": wstd, "sup_Q11": q, "W_mean": ph.W.mean().real})


def _random_u(m, rng, scale=0.1, degree=2):
    f = random_polynomial(m, rng, degree, 4, 1.0, real=True)
    return (constant(m, 1.0) + f * (scale / max(f.sup(), 1e-300))).as_real()


def check_reconstruction(s: Settings):
    rng = s.rng(5)
    pm = sphere()
    E = random_polynomial(pm, rng, 2, 3, 0.03)
    ph = solve_ph(build_coframe(constant(pm, 1.0), E), s.conventions())
    gm = _grid(s.grid)
    _, phg = structure(_random_u(gm, rng, 0.1), random_polynomial(gm, rng, 2, 3, 0.05), conv=s.conventions())
    rp, rg = ph.residuals["reconstruction"], phg.residuals["reconstruction"]
    real = max(ph.residuals["reality_omega"], ph.residuals["imag_W"])
    ok = rp < s.tol("reconstruction_poly") and rg < s.tol("reconstruction_grid") and real < s.tol("reality")
    return Check("pseudohermitian", "solver_consistency", rp, s.tol("reconstruction_poly"), ok,
                 {"poly": rp, "grid": rg, "reality_poly": real})


def check_equivariance(s: Settings):
    rng = s.rng(6)
    m = _grid(s.grid)
    u, E = _random_u(m, rng, 0.05), random_polynomial(m, rng, 2, 4, 0.05)
    g = unitary_group.rvs(2, random_state=int(rng.integers(2**31)))
    det = np.linalg.det(g)
    u2, E2 = pullback_structure(u, E, g)
    conv = s.conventions()
    _, ph = structure(u, E, conv=conv)
    _, ph2 = structure(u2, E2, conv=conv)
    Qg = group_pullback(cartan_tensor(ph), g) * (det**2)
    err = _rel(cartan_tensor(ph2), Qg)
    q0 = cartan_tensor(solve_ph(standard(m), conv)).sup()
    return _below("pseudohermitian", "sphericality_and_equivariance", max(err, q0), s.tol("equivariance"),
                  pullback_error=err, standard_Q=q0)


def _random_change(m, rng):
    u = _random_u(m, rng, 0.15)
    w = random_polynomial(m, rng, 2, 3, 1.0)
    u11 = constant(m, 1.0) + w * (0.2 / w.sup())  # keeps the phase of u11 resolved
    return CoframeChange(u, u11, random_polynomial(m, rng, 2, 3, 0.1), random_polynomial(m, rng, 1, 2, 0.1))


def q_law_errors(s: Settings, conv=None, n=None):
    """Relative sup error of Q = Q~ u (u_1^1)^2 for random coframe changes."""
    conv = conv or s.conventions()
    rng = s.rng(7)
    m = _grid(s.grid)
    errs = []
    for _ in range(n or s.n_random):
        E = random_polynomial(m, rng, 2, 3, 0.05)
        cf = build_coframe(constant(m, 1.0), E)
        tr = transform_coframe(cf, _random_change(m, rng))
        Q = cartan_tensor(solve_ph(cf, conv))
        Qt = cartan_tensor(solve_ph(tr.normalized, conv))
        errs.append(_rel(Qt * build_factor(cf, tr), Q))
    return errs


def build_factor(cf, tr):
    """u (u_1^1)^2 of the change taking ``cf`` to ``tr.normalized``."""
    u = tr.normalized.u * cf.u.reciprocal()
    return u * tr.U * tr.U


def check_q_law(s: Settings):
    """Criterion 2."""
    errs = q_law_errors(s)
    return _below("pseudohermitian", "cartan_transformation_law", max(errs), s.tol("q_law"), errors=errs)


def check_mutation(s: Settings):
    """Flipping a ledger bit must break the transformation law."""
    base = s.conventions()
    flipped = base.replace(torsion_lower="same" if base.torsion_lower == "conj" else "conj")
    errs = q_law_errors(s, flipped, n=1)
    gap = min(errs)
    ok = gap > s.tol("mutation_gap")
    return Check("mutation", "flipped_torsion_bit_detected", gap, s.tol("mutation_gap"), ok,
                 {"flipped_error": gap, "note": "passes when the mutated law fails"})


def check_phi_identity(s: Settings):
    """The induced phi~ of a coframe change against its closed form."""
    rng = s.rng(8)
    m = _grid(s.grid)
    cf = build_coframe(constant(m, 1.0), random_polynomial(m, rng, 2, 3, 0.05))
    tr = transform_coframe(cf, _random_change(m, rng))
    err = max((a - b).sup() for a, b in zip(tr.phi.coeffs[1:], tr.phi_formula.coeffs[1:]))  # phi~ is defined mod theta~
    return _below("pseudohermitian", "coframe_change_phi", err, s.tol("reconstruction_grid"))


# ---------------------------------------------------------------------------
# invariants
# ---------------------------------------------------------------------------

def check_contact_independence(s: Settings):
    """Criterion 3."""
    rng = s.rng(9)
    m = _grid(s.grid)
    conv = s.conventions()
    E = random_polynomial(m, rng, 2, 3, 0.05)
    mu0 = mu_pseudohermitian(structure(None, E, m, conv)[1]).mu
    errs = []
    for _ in range(s.n_random):
        mu = mu_pseudohermitian(structure(_random_u(m, rng, 0.2), E, m, conv)[1]).mu
        errs.append(abs(mu - mu0) / (1 + abs(mu0)))
    return _below("invariants", "contact_form_independence", max(errs), s.tol("contact_independence"),
                  errors=errs, mu=mu0)


def check_backend_agreement(s: Settings):
    rng = s.rng(10)
    conv = s.conventions()
    pm = sphere()
    errs = []
    for E in (constant(pm, 0.0), random_polynomial(pm, rng, 2, 2, 0.03)):
        mp = mu_pseudohermitian(solve_ph(build_coframe(constant(pm, 1.0), E), conv)).mu
        gm = _grid(s.grid)
        mg = mu_pseudohermitian(solve_ph(build_coframe(constant(gm, 1.0), E.on(gm)), conv)).mu
        errs.append(abs(mg - mp) / abs(mp))
    return _below("invariants", "backend_agreement", max(errs), s.tol("backend_agreement"), errors=errs)


def check_additivity(s: Settings):
    m = _grid(s.grid)
    rng = s.rng(11)
    rep = mu_pseudohermitian(structure(_random_u(m, rng), random_polynomial(m, rng, 2, 3, 0.05), conv=s.conventions())[1])
    err = abs(rep.curvature_torsion_term + rep.chern_simons_term - 8 * math.pi**2 * rep.mu)
    return _below("invariants", "report_additivity", err, s.tol("additivity") * 8 * math.pi**2)


def check_lens(s: Settings):
    """Criterion 8."""
    conv = s.conventions()
    mu_s = mu_pseudohermitian(solve_ph(standard(sphere()), conv)).mu
    errs, vals = [], []
    for p, q in ((2, 1), (3, 1), (5, 1)):
        mu = mu_pseudohermitian(solve_ph(standard(lens(p, q)), conv)).mu
        g = mu_pseudohermitian(solve_ph(standard(lens(p, q, HopfGrid(8, 16, 16))), conv)).mu
        vals.append(mu)
        errs.append(max(abs(mu - mu_s / p), abs(g - mu_s / p)))
    return _below("invariants", "lens_quotients", max(errs), s.tol("lens"), mu=vals, mu_sphere=mu_s)


def check_rigidity(s: Settings):
    """Criterion 10: constant-W structures report min(c0, 20 c0^3)."""
    conv = s.conventions()
    errs, margins = [], []
    for scale in (1.0, 4.0, 16.0):
        for m in (sphere(), lens(3, 1)):
            ph = solve_ph(build_coframe(constant(m, scale)), conv)
            cert = rigidity_certificate(ph)
            c0 = ph.W.mean().real
            expect = min(c0, 20 * c0**3)
            errs.append(abs(cert.margin - expect) if cert.holds else math.inf)
            margins.append(cert.margin)
    return _below("invariants", "rigidity_certificate", max(errs), s.tol("rigidity"), margins=margins)


# ---------------------------------------------------------------------------
# Cartan connection
# ---------------------------------------------------------------------------

def _test_structures(s: Settings):
    rng = s.rng(12)
    pm = sphere()
    out = [("standard", standard(pm))]
    out.append(("deformed_poly", build_coframe(constant(pm, 1.0), random_polynomial(pm, rng, 2, 2, 0.03))))
    gm = _grid(s.grid)
    out.append(("deformed_grid", build_coframe(_random_u(gm, rng, 0.1), random_polynomial(gm, rng, 2, 3, 0.05))))
    return out


def check_cross_formula(s: Settings):
    """Criterion 4."""
    conv = s.conventions()
    rel, trs, detail = [], [], {}
    for name, cf in _test_structures(s):
        ph = solve_ph(cf, conv)
        pkg = solve_cartan(ph)
        t = transgression_mu(pkg)
        mu = mu_pseudohermitian(ph).mu
        r = max(abs(t.mu - mu), abs(t.mu_middle - mu)) / abs(mu)
        tpo = trace(matrix_wedge(pkg.Pi, curvature(pkg))).sup()
        rel.append(r)
        trs.append(tpo)
        detail[name] = [mu, t.mu, t.mu_middle, tpo]
    ok = max(rel) < s.tol("cross_formula") and max(trs) < s.tol("tr_pi_omega")
    return Check("cartan", "cross_formula_agreement", max(rel), s.tol("cross_formula"), ok,
                 {"relative": rel, "tr_pi_omega": trs, **detail})


def check_q_extracted(s: Settings):
    conv = s.conventions()
    errs = []
    for name, cf in _test_structures(s)[1:]:
        ph = solve_ph(cf, conv)
        errs.append(_rel(solve_cartan(ph).Q11, cartan_tensor(ph)))
    return _below("cartan", "q_extracted_vs_formula", max(errs), s.tol("q_extracted"), errors=errs)


def check_eq2(s: Settings):
    conv = s.conventions()
    worst = 0.0
    for name, cf in _test_structures(s)[:2]:
        r = solve_cartan(solve_ph(cf, conv)).residuals
        worst = max(worst, r["eq2_dtheta1"], r["eq2_dphi"], r["eq3_line1"], r["eq3_line2_offpattern"],
                    r["eq3_line3_offpattern"], r["normalization"], r["trace_Pi"])
    return _below("cartan", "structure_equation_residuals", worst, s.tol("eq2"))


# ---------------------------------------------------------------------------
# flows
# ---------------------------------------------------------------------------

def check_calibration(s: Settings):
    """Criterion 5."""
    conv = s.conventions()
    cal = calibrate_pairing(_grid(s.grid), n_directions=max(10, 2 * s.n_random), seed=s.seed, conv=conv,
                            max_dispersion=math.inf)
    ok = (cal.dispersion < s.tol("pairing_dispersion") and abs(cal.base_derivative) < s.tol("base_derivative")
          and abs(cal.c - conv.pairing_constant) < s.tol("pairing_dispersion") * abs(conv.pairing_constant))
    return Check("flows", "pairing_calibration", cal.dispersion, s.tol("pairing_dispersion"), ok,
                 {"c": cal.c, "ledger_c": conv.pairing_constant, "base_derivative": cal.base_derivative,
                  "samples": len(cal.samples)})


def check_cartan_flow(s: Settings):
    """Criterion 6."""
    conv = s.conventions()
    basis = SliceBasis(_grid(s.flow_grid), s.slice_degree)
    worst_inc, decreases, ok = -math.inf, [], True
    for k in range(s.flow_starts):
        c0 = basis.random(s.rng(100 + k), s.flow_amplitude)
        st = cartan_state(basis, c0, s.flow_dt, conv=conv)
        res = run_flow(st, s.flow_steps, basis, mu_slack=s.tol("mu_slack"), conv=conv)
        acc = [r for r in res.rows if r["accepted"]]
        mus = [r["mu"] for r in acc]
        inc = max(np.diff(mus)) if len(mus) > 1 else 0.0
        worst_inc = max(worst_inc, inc)
        dec = 1 - acc[-1]["supE"] / acc[0]["supE"]
        decreases.append(dec)
        ok &= res.accepted >= s.flow_steps and not res.stalled and inc <= s.tol("mu_slack") \
            and dec >= s.tol("supE_decrease")
    return Check("flows", "cartan_flow_monotone", worst_inc, s.tol("mu_slack"), bool(ok),
                 {"supE_decrease": decreases, "steps": s.flow_steps})


def check_yamabe(s: Settings):
    """Criterion 7: constant-W stationarity and the one-step Taylor order."""
    conv = s.conventions()
    m = _grid(s.yamabe_grid)
    a = np.array([0.1, 0.05j])
    nrm = 1 - np.sum(np.abs(a) ** 2)

    def factor(z1, z2):
        return nrm / np.abs(1 - np.conj(a[0]) * z1 - np.conj(a[1]) * z2) ** 2

    from .fields import from_function
    st = yamabe_state(from_function(m, factor, real=True), dt=s.yamabe_dt, conv=conv)
    stds = [st.ph.W.std()]
    for _ in range(s.yamabe_steps):
        st = yamabe_flow_step(st, s.yamabe_dt, conv=conv)
        stds.append(st.ph.W.std())
    # one-step defect against the first-order Taylor step
    rng = s.rng(13)
    f = random_polynomial(m, rng, 2, 4, 1.0, real=True)
    u = from_samples(m, np.exp(f.values.real * (0.05 / f.sup())), real=True)
    s0 = yamabe_state(u, dt=1e-3, band=6, conv=conv)
    W0, u0 = s0.ph.W.values.real, s0.u.values.real
    defects = []
    for dt in (4e-3, 2e-3, 1e-3):
        s1 = yamabe_flow_step(s0, dt, conv=conv)
        defects.append(float(np.max(np.abs(s1.u.values.real - u0 * (1 + dt * W0)))))
    orders = [math.log2(defects[i] / defects[i + 1]) for i in range(len(defects) - 1)]
    order_err = max(abs(o - 2) for o in orders)
    ok = max(stds) < s.tol("yamabe_std") and order_err < s.tol("taylor_order")
    return Check("flows", "yamabe_consistency", max(stds), s.tol("yamabe_std"), ok,
                 {"final_std_W": stds[-1], "taylor_defects": defects, "taylor_orders": orders})


def check_fixed_point(s: Settings):
    conv = s.conventions()
    m = _grid(s.flow_grid)
    basis = SliceBasis(m, s.slice_degree)
    rc = np.abs(cartan_rhs(basis, np.zeros(basis.size), conv)).max()
    ry = np.abs(yamabe_rate(constant(m, 1.0), constant(m, 0.0), True, conv)).max()
    return _below("flows", "fixed_point_residual", max(rc, ry), s.tol("fixed_point"), cartan=rc, yamabe=ry)


def check_determinism(s: Settings):
    """Two runs and a checkpoint restart give byte-identical CSVs."""
    from .flows import load_checkpoint

    conv = s.conventions()
    m = _grid(s.flow_grid)
    basis = SliceBasis(m, s.slice_degree)
    c0 = basis.random(s.rng(200), s.flow_amplitude)
    with tempfile.TemporaryDirectory() as d:
        paths = [os.path.join(d, f"run{i}.csv") for i in range(3)]
        for p in paths[:2]:
            run_flow(cartan_state(basis, c0, s.flow_dt, conv=conv), 6, basis, p, conv=conv)
        ck = os.path.join(d, "ck")
        res = run_flow(cartan_state(basis, c0, s.flow_dt, conv=conv), 3, basis, paths[2], ck, 3, conv=conv)
        st = load_checkpoint(os.path.join(ck, f"checkpoint_{res.state.step:06d}.json"), m, basis, conv)
        run_flow(st, 3, basis, paths[2], conv=conv, append=True)
        blobs = [open(p, "rb").read() for p in paths]
    same = blobs[0] == blobs[1]
    restart = blobs[0] == blobs[2]
    return Check("flows", "determinism_and_restart", 0.0 if same and restart else 1.0, 0.5, same and restart,
                 {"repeat_identical": same, "restart_identical": restart})


# ---------------------------------------------------------------------------
# monopole
# ---------------------------------------------------------------------------

def check_monopole(s: Settings):
    """Criterion 9."""
    conv = s.conventions()
    rng = s.rng(14)
    m = _grid(s.monopole_grid)
    ph = solve_ph(build_coframe(_random_u(m, rng, 0.1), random_polynomial(m, rng, 2, 3, 0.05)), conv)
    cf = ph.cf.coframe
    a1 = random_polynomial(m, rng, 2, 3, 0.5)
    a = FormField(cf, 1, [random_polynomial(m, rng, 2, 3, 0.5, real=True), a1, a1.conj()])
    mf = MonopoleFields(ph, random_polynomial(m, rng, 3, 5), random_polynomial(m, rng, 3, 5), a)
    base = residuals(mf)
    gamma = random_polynomial(m, rng, 3, 4, 1.0, real=True)
    moved = residuals(gauge_transform(mf, gamma))
    gauge = 0.0
    for k, v in base.report().items():
        w = moved.report()[k]
        gauge = max(gauge, abs(v["sup"] - w["sup"]), abs(v["l2"] - w["l2"]))
    al, be = random_polynomial(m, rng, 3, 5), random_polynomial(m, rng, 3, 5)
    lhs = pairing(ph, twisted_dbar(ph, al, a), be)
    rhs = pairing(ph, al, twisted_dbar_adjoint(ph, be, a))
    adj = abs(lhs - rhs) / max(abs(lhs), 1e-300)
    sm = sphere()
    sph = solve_ph(standard(sm), conv)
    zero = constant(sm, 0.0)
    z = residuals(MonopoleFields(sph, zero, zero, sph.cf.coframe.zero_form(1)))
    zc = (z.curvature + sph.W).sup()
    zc = max(zc, (residuals(MonopoleFields(ph, constant(m, 0.0), constant(m, 0.0), cf.zero_form(1))).curvature
                  + ph.W).sup())
    ok = gauge < s.tol("gauge") and adj < s.tol("adjoint") and zc < s.tol("zero_config")
    return Check("monopole", "monopole_residual_contracts", max(gauge, adj, zc), s.tol("gauge"), ok,
                 {"gauge": gauge, "adjoint": adj, "zero_configuration": zc, "pairing": abs(lhs)})


# ---------------------------------------------------------------------------
# registry
# ---------------------------------------------------------------------------

SUITES = {
    "geometry": [check_commutators, check_grid_vs_exact, check_quadrature],
    "exterior": [check_leibniz, check_conjugation, check_dd],
    "pseudohermitian": [check_standard_calibration, check_reconstruction, check_equivariance, check_q_law,
                        check_phi_identity],
    "invariants": [check_contact_independence, check_backend_agreement, check_additivity, check_lens,
                   check_rigidity],
    "cartan": [check_cross_formula, check_q_extracted, check_eq2],
    "flows": [check_calibration, check_cartan_flow, check_yamabe, check_fixed_point, check_determinism],
    "monopole": [check_monopole],
    "mutation": [check_mutation],
}

CRITERIA = {
    1: check_standard_calibration,
    2: check_q_law,
    3: check_contact_independence,
    4: check_cross_formula,
    5: check_calibration,
    6: check_cartan_flow,
    7: check_yamabe,
    8: check_lens,
    9: check_monopole,
    10: check_rigidity,
}


def _timed(fn, s):
    t0 = time.perf_counter()
    try:
        c = fn(s)
    except Exception as exc:  # a crash is a failed check, reported with its reason
        c = Check(fn.__name__.removeprefix("check_"), fn.__name__, math.nan, math.nan, False,
                  {"error": f"{type(exc).__name__}: {exc}"})
    c.seconds = time.perf_counter() - t0
    return c


def run_suite(name: str = "all", settings: Settings | None = None, stop_on_failure=False):
    s = settings or Settings()
    names = list(SUITES) if name == "all" else [name]
    unknown = [n for n in names if n not in SUITES]
    if unknown:
        raise KeyError(f"unknown suite {unknown[0]!r}; choose from all, {', '.join(SUITES)}")
    out = []
    for n in names:
        for fn in SUITES[n]:
            c = _timed(fn, s)
            out.append(c)
            if stop_on_failure and not c.passed:
                return out
    return out


def run_criterion(k: int, settings: Settings | None = None) -> Check:
    return _timed(CRITERIA[k], settings or Settings())
