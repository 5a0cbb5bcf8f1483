"""The global invariant, lens quotients and the rigidity certificate."""
import json
import math

import numpy as np
import pytest

from crgeom.exterior import wedge
from crgeom.fields import constant, from_function, from_terms, integrate, random_polynomial
from crgeom.invariants import (
    coarser, grad_norm2, mu_lens, mu_pseudohermitian, mu_with_error, rigidity_certificate, sublaplacian, volume,
)
from crgeom.manifold import HopfGrid, lens, sphere
from crgeom.pseudohermitian import build_coframe, solve_ph, standard, structure

from test_geometry import sphere_points


def test_standard_sphere_mu_is_minus_one():
    rep = mu_pseudohermitian(solve_ph(standard(sphere())))
    assert rep.mu == pytest.approx(-1.0, abs=1e-15)
    assert rep.imag == 0
    # W^2/6 * 4 pi^2 = 8 pi^2 / 3 and the Chern-Simons part -32 pi^2 / 3
    assert rep.curvature_torsion_term == pytest.approx(8 * math.pi**2 / 3, rel=1e-14)
    assert rep.chern_simons_term == pytest.approx(-32 * math.pi**2 / 3, rel=1e-14)


@pytest.mark.parametrize("p,q", [(2, 1), (3, 1), (5, 1), (5, 2), (7, 3)])
def test_lens_quotient_divides_mu(p, q):
    for backend in (None, HopfGrid(8, 2 * p * 4, 16)):
        ph = solve_ph(standard(lens(p, q, backend)))
        assert mu_lens(p, q, ph).mu == pytest.approx(-1.0 / p, abs=1e-12)


def test_mu_lens_checks_the_manifold():
    ph = solve_ph(standard(lens(3, 1)))
    with pytest.raises(ValueError):
        mu_lens(5, 1, ph)


def test_contact_form_independence(grid_sphere, rng):
    E = random_polynomial(grid_sphere, rng, 2, 3, 0.05)
    mu0 = mu_pseudohermitian(structure(None, E, grid_sphere)[1]).mu
    for _ in range(3):
        f = random_polynomial(grid_sphere, rng, 2, 4, 1.0, real=True)
        u = (constant(grid_sphere, 1.0) + f * (0.2 / f.sup())).as_real()
        rep = mu_pseudohermitian(structure(u, E)[1])
        assert abs(rep.mu - mu0) / (1 + abs(mu0)) < 1e-5


def test_backends_agree_on_polynomial_input(poly_sphere, rng):
    E = random_polynomial(poly_sphere, rng, 2, 2, 0.03)
    mp = mu_pseudohermitian(solve_ph(build_coframe(constant(poly_sphere, 1.0), E))).mu
    g = sphere(HopfGrid(16, 32, 32))
    mg = mu_pseudohermitian(solve_ph(build_coframe(constant(g, 1.0), E.on(g)))).mu
    assert abs(mg - mp) / abs(mp) < 1e-4


def test_mu_integral_against_monte_carlo(grid_sphere, rng):
    """Monte Carlo over S^3 of the interpolated mu density."""
    _, ph = structure(None, random_polynomial(grid_sphere, rng, 2, 3, 0.05), grid_sphere)
    cf = ph.cf.coframe
    dens = (wedge(cf.theta, cf.dbasis[0]) * (ph.W * ph.W * (1 / 6) + ph.A11.abs2() * 2.0)
            + wedge(ph.omega, ph.d_omega) * (2 / 3)).coeffs[0] * cf.volume
    p1, p2 = sphere_points(np.random.default_rng(3), 100_000)
    s = dens.evaluate(p1, p2).real * 2 * math.pi**2 / (8 * math.pi**2)
    mu = mu_pseudohermitian(ph).mu
    assert abs(s.mean() - mu) < 5 * s.std() / math.sqrt(len(s))


def test_report_terms_add_up(grid_sphere, rng):
    rep = mu_pseudohermitian(structure(None, random_polynomial(grid_sphere, rng, 2, 3, 0.05), grid_sphere)[1])
    assert rep.curvature_torsion_term + rep.chern_simons_term == pytest.approx(8 * math.pi**2 * rep.mu, rel=1e-14)
    d = json.loads(rep.to_json())
    assert set(d["terms"]) == {"curvature_torsion_term", "chern_simons_term"}


def test_error_estimate_from_coarser_grid(rng):
    m = sphere(HopfGrid(12, 24, 24))
    E = random_polynomial(m, rng, 2, 3, 0.05)
    rep = mu_with_error(lambda mm: solve_ph(build_coframe(constant(mm, 1.0), from_function(mm, E.evaluate))), m)
    assert rep.error_estimate is not None and rep.error_estimate < 1e-6
    assert coarser(HopfGrid(8, 8, 8)) == HopfGrid(8, 8, 8)


def test_volume_of_scaled_form():
    assert volume(solve_ph(build_coframe(constant(sphere(), 2.0)))) == pytest.approx(16 * math.pi**2, rel=1e-14)


@pytest.mark.parametrize("lam", [1.0, 4.0, 16.0])
def test_rigidity_margin_for_constant_w(lam):
    ph = solve_ph(build_coframe(constant(sphere(), lam)))
    c0 = 2.0 / lam
    cert = rigidity_certificate(ph)
    assert cert.holds
    assert abs(cert.margin - min(c0, 20 * c0**3)) < 1e-9
    assert cert.min_inequality == pytest.approx(20 * c0**3, rel=1e-12)


def test_rigidity_fails_with_torsion(grid_sphere, rng):
    _, ph = structure(None, random_polynomial(grid_sphere, rng, 2, 3, 0.05), grid_sphere)
    cert = rigidity_certificate(ph)
    assert not cert.holds and "torsion" in cert.reasons


def test_sublaplacian_integrates_by_parts(poly_sphere):
    """int f Delta_b f = int |grad_b f|^2 on a closed manifold."""
    ph = solve_ph(standard(poly_sphere))
    f = from_terms(poly_sphere, {(1, 0, 0, 1): 1.0, (2, 0, 0, 0): 0.5j}).re
    lhs = integrate(f * sublaplacian(ph, f)).real
    rhs = integrate(grad_norm2(ph, f)).real
    assert lhs > 0
    assert lhs == pytest.approx(rhs, rel=1e-12)
