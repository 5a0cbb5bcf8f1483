"""The Cartan connection: structure equations, curvature and the transgression formula."""
import json

import numpy as np
import pytest

from crgeom.cartan import CartanSolveError, curvature, solve_cartan, transgression_mu
from crgeom.exterior import matrix_wedge, trace
from crgeom.fields import constant, from_terms, random_polynomial
from crgeom.invariants import mu_pseudohermitian
from crgeom.manifold import HopfGrid, lens, sphere
from crgeom.pseudohermitian import build_coframe, cartan_tensor, solve_ph, standard, structure


def test_standard_connection_is_flat():
    pkg = solve_cartan(solve_ph(standard(sphere())), strict=True)
    assert pkg.Omega.sup() == 0
    t = transgression_mu(pkg)
    assert t.mu == pytest.approx(-1.0, abs=1e-14)
    assert t.mu_middle == pytest.approx(-1.0, abs=1e-14)


def test_structure_equation_residuals_on_poly(poly_sphere, rng):
    ph = solve_ph(build_coframe(constant(poly_sphere, 1.0), random_polynomial(poly_sphere, rng, 2, 2, 0.03)))
    pkg = solve_cartan(ph, tol=1e-7, strict=True)
    for k in ("eq2_dtheta1", "eq2_dphi", "eq3_line1", "eq3_line2_offpattern", "eq3_line3_offpattern",
              "normalization", "trace_Pi", "R_reality", "delta_imag"):
        assert pkg.residuals[k] < 1e-7, k


def test_transgression_matches_pseudohermitian_display(grid_sphere, rng):
    f = random_polynomial(grid_sphere, rng, 2, 3, 1.0, real=True)
    u = (constant(grid_sphere, 1.0) + f * (0.1 / f.sup())).as_real()
    _, ph = structure(u, random_polynomial(grid_sphere, rng, 2, 3, 0.05))
    pkg = solve_cartan(ph)
    t = transgression_mu(pkg)
    mu = mu_pseudohermitian(ph).mu
    assert abs(t.mu - mu) / abs(mu) < 1e-4
    assert abs(t.mu_middle - mu) / abs(mu) < 1e-4
    assert trace(matrix_wedge(pkg.Pi, curvature(pkg))).sup() < 1e-7


def test_curvature_has_only_the_sanctioned_entries(poly_sphere, rng):
    ph = solve_ph(build_coframe(constant(poly_sphere, 1.0), random_polynomial(poly_sphere, rng, 2, 2, 0.03)))
    sups = solve_cartan(ph).Omega.entry_sups()
    allowed = np.zeros((3, 3), bool)
    allowed[1, 0] = allowed[2, 0] = allowed[2, 1] = True
    assert np.all(sups[~allowed] < 1e-9)
    assert sups[1, 0] > 1e-4


def test_extracted_q_matches_cheng_lee_formula(grid_sphere, rng):
    _, ph = structure(None, random_polynomial(grid_sphere, rng, 2, 3, 0.05), grid_sphere)
    pkg = solve_cartan(ph)
    Q = cartan_tensor(ph)
    assert (pkg.Q11 - Q).sup() / Q.sup() < 1e-4


def test_lens_transgression():
    pkg = solve_cartan(solve_ph(standard(lens(3, 1))))
    assert transgression_mu(pkg).mu == pytest.approx(-1 / 3, abs=1e-14)


def test_report_is_json():
    d = json.loads(solve_cartan(solve_ph(standard(sphere()))).to_json())
    assert d["sup_Q"] == 0


def test_strict_mode_raises_on_inconsistent_data(grid_sphere, rng):
    # a coarse grid under-resolves a rough deformation
    from crgeom.manifold import HopfGrid
    m = sphere(HopfGrid(8, 8, 8))
    ph = solve_ph(build_coframe(constant(m, 1.0), random_polynomial(m, rng, 6, 6, 0.02)), tol=1.0)
    with pytest.raises(CartanSolveError):
        solve_cartan(ph, tol=1e-14, strict=True)


def test_transgression_on_deformed_lens_matches_pseudohermitian_route():
    m = lens(3, 1, HopfGrid(16, 32, 32))
    E = from_terms(m, {(1, 0, 0, 0): 0.05, (0, 0, 1, 0): 0.03 + 0.01j}, charge=1)
    ph = solve_ph(build_coframe(constant(m, 1.0), E))
    mu = mu_pseudohermitian(ph).mu
    assert abs(transgression_mu(solve_cartan(ph)).mu - mu) < 1e-8
    assert -1 / 3 < mu < -0.3
