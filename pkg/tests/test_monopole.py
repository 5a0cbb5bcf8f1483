"""Residuals of the monopole equations."""
import json

import numpy as np
import pytest
import sympy as sp

from crgeom.exterior import FormField
from crgeom.fields import constant, coordinate, from_function, from_terms, random_polynomial
from crgeom.manifold import HopfGrid, sphere
from crgeom.monopole import (
    MonopoleFields, gauge_transform, obstruction_report, pairing, residuals, twisted_dbar, twisted_dbar_adjoint,
)
from crgeom.pseudohermitian import build_coframe, solve_ph, standard, structure


def real_form(ph, rng, scale=0.5):
    m = ph.manifold
    a1 = random_polynomial(m, rng, 2, 3, scale)
    return FormField(ph.cf.coframe, 1, [random_polynomial(m, rng, 2, 3, scale, real=True), a1, a1.conj()])


@pytest.fixture
def deformed(grid_sphere, rng):
    f = random_polynomial(grid_sphere, rng, 2, 3, 1.0, real=True)
    return structure((constant(grid_sphere, 1.0) + f * (0.1 / f.sup())).as_real(),
                     random_polynomial(grid_sphere, rng, 2, 3, 0.05))[1]


def test_constants_are_antiholomorphic_free(poly_sphere):
    ph = solve_ph(standard(poly_sphere))
    a = ph.cf.coframe.zero_form(1)
    assert twisted_dbar(ph, constant(poly_sphere, 3.0), a).sup() == 0


def test_dbar_of_conj_z1_matches_symbolic_oracle(poly_sphere):
    z1, z2, w1, w2 = sp.symbols("z1 z2 w1 w2")
    expr = z2 * sp.diff(w1, w1) - z1 * sp.diff(w1, w2)      # Z1bar = z2 d/dw1 - z1 d/dw2 on w1 = conj(z1)
    ph = solve_ph(standard(poly_sphere))
    got = twisted_dbar(ph, coordinate(poly_sphere, "z1").conj(), ph.cf.coframe.zero_form(1))
    assert expr == z2
    assert (got - coordinate(poly_sphere, "z2")).sup() == 0


def test_zero_configuration_gives_minus_w(deformed):
    m = deformed.manifold
    zero = constant(m, 0.0)
    r = residuals(MonopoleFields(deformed, zero, zero, deformed.cf.coframe.zero_form(1)))
    assert (r.curvature + deformed.W).sup() == 0
    std = solve_ph(standard(sphere()))
    z = constant(sphere(), 0.0)
    r0 = residuals(MonopoleFields(std, z, z, std.cf.coframe.zero_form(1)))
    assert (r0.curvature + 2.0).sup() == 0


def test_gauge_invariance_of_residual_norms(rng):
    # e^{i gamma} for |gamma| ~ 3 needs a finer grid than the other checks
    m = sphere(HopfGrid(24, 48, 48))
    f = random_polynomial(m, rng, 2, 3, 1.0, real=True)
    deformed = structure((constant(m, 1.0) + f * (0.1 / f.sup())).as_real(), random_polynomial(m, rng, 2, 3, 0.05))[1]
    mf = MonopoleFields(deformed, random_polynomial(m, rng, 3, 5), random_polynomial(m, rng, 3, 5),
                        real_form(deformed, rng))
    base = residuals(mf).report()
    for _ in range(2):
        moved = residuals(gauge_transform(mf, random_polynomial(m, rng, 3, 4, 1.0, real=True))).report()
        for line in base:
            for n in ("sup", "l2"):
                assert abs(base[line][n] - moved[line][n]) < 1e-8


def test_gauge_sign_is_pinned_by_invariance(deformed, rng):
    from crgeom import conventions
    m = deformed.manifold
    flipped = solve_ph(deformed.cf, conventions.load().replace(twist_sign=-1))
    mf = MonopoleFields(flipped, random_polynomial(m, rng, 3, 5), constant(m, 0.0), real_form(flipped, rng))
    gamma = random_polynomial(m, rng, 3, 4, 1.0, real=True)
    a = residuals(mf).report()["dirac_alpha"]["l2"]
    b = residuals(gauge_transform(mf, gamma)).report()["dirac_alpha"]["l2"]
    assert abs(a - b) > 1e-3


def test_twisted_pair_is_adjoint(deformed, rng):
    m = deformed.manifold
    a = real_form(deformed, rng)
    al, be = random_polynomial(m, rng, 3, 5), random_polynomial(m, rng, 3, 5)
    lhs = pairing(deformed, twisted_dbar(deformed, al, a), be)
    rhs = pairing(deformed, al, twisted_dbar_adjoint(deformed, be, a))
    assert abs(lhs) > 1e-2
    assert abs(lhs - rhs) < 1e-6 * abs(lhs)


def test_scaling_probe(deformed, rng):
    m = deformed.manifold
    a = real_form(deformed, rng)
    al, zero = random_polynomial(m, rng, 3, 5), constant(m, 0.0)
    r1 = residuals(MonopoleFields(deformed, al, zero, a))
    r2 = residuals(MonopoleFields(deformed, al * 2.0, zero, a))
    assert (r2.dirac_alpha - r1.dirac_alpha * 2.0).sup() < 1e-12
    base = residuals(MonopoleFields(deformed, zero, zero, a)).curvature
    assert ((r2.curvature - base) - (r1.curvature - base) * 4.0).sup() < 1e-10


def test_fields_must_share_the_background(deformed):
    other = sphere(HopfGrid(8, 8, 8))
    with pytest.raises(ValueError):
        MonopoleFields(deformed, constant(other, 0.0), constant(deformed.manifold, 0.0),
                       deformed.cf.coframe.zero_form(1))


def test_snapshot_round_trip(deformed, rng):
    m = deformed.manifold
    mf = MonopoleFields(deformed, random_polynomial(m, rng, 2, 3), random_polynomial(m, rng, 2, 3),
                        real_form(deformed, rng))
    back = MonopoleFields.from_snapshot(deformed, json.loads(json.dumps(mf.snapshot())))
    assert (back.alpha - mf.alpha).sup() == 0
    assert (back.a - mf.a).sup() == 0


def test_obstruction_report_variants(grid_sphere, rng):
    r = obstruction_report(solve_ph(standard(sphere())))
    assert r["torsion_free"] and r["W_positive"]
    _, ph = structure(None, random_polynomial(grid_sphere, rng, 2, 3, 0.05), grid_sphere)
    assert not obstruction_report(ph)["torsion_free"]
    u = from_function(grid_sphere, lambda z1, z2: np.exp(0.7 * (z1 * z1).real), real=True)
    r = obstruction_report(structure(u, None)[1])
    assert not r["W_positive"]
    assert 0 < r["negative_fraction"] < 1
