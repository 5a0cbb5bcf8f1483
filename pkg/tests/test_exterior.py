"""Exterior calculus identities on both backends."""
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from crgeom.exterior import (
    DegreeError, FormField, exterior_d, integrate_form, matrix_wedge, MatrixForm, standard_coframe, trace, wedge,
)
from crgeom.fields import constant, random_polynomial
from crgeom.manifold import HopfGrid, sphere
from crgeom.pseudohermitian import build_coframe

seeds = st.integers(0, 2**32 - 1)


def rand_form(cf, rng, degree, deg=2):
    n = 1 if degree in (0, 3) else 3
    return FormField(cf, degree, [random_polynomial(cf.manifold, rng, deg, 3) for _ in range(n)])


@given(seeds)
def test_leibniz_rule(seed):
    m = sphere()
    rng = np.random.default_rng(seed)
    cf = standard_coframe(m)
    f = random_polynomial(m, rng, 3, 4)
    a = rand_form(cf, rng, 1)
    lhs = exterior_d(a * f)
    rhs = wedge(exterior_d(FormField(cf, 0, [f])), a) + exterior_d(a) * f
    assert (lhs - rhs).sup() < 1e-9


@given(seeds)
def test_graded_leibniz_for_wedge(seed):
    m = sphere()
    rng = np.random.default_rng(seed)
    cf = standard_coframe(m)
    a, b = rand_form(cf, rng, 1), rand_form(cf, rng, 1)
    lhs = exterior_d(wedge(a, b))
    rhs = wedge(exterior_d(a), b) - wedge(a, exterior_d(b))
    assert (lhs - rhs).sup() < 1e-9


@given(seeds)
def test_d_squared_vanishes_on_deformed_coframes(seed):
    m = sphere()
    rng = np.random.default_rng(seed)
    cf = build_coframe(constant(m, 1.0), random_polynomial(m, rng, 1, 2, 0.05)).coframe
    a = rand_form(cf, rng, 1, 1)
    assert exterior_d(exterior_d(a)).sup() < 1e-9


@given(seeds)
def test_conjugation_commutes_with_d_and_wedge(seed):
    m = sphere()
    rng = np.random.default_rng(seed)
    cf = standard_coframe(m)
    a, b = rand_form(cf, rng, 1), rand_form(cf, rng, 1)
    assert (exterior_d(a).conj() - exterior_d(a.conj())).sup() < 1e-12
    assert (wedge(a, b).conj() - wedge(a.conj(), b.conj())).sup() < 1e-12


def test_wedge_is_antisymmetric_on_one_forms(rng):
    cf = standard_coframe(sphere())
    a, b = rand_form(cf, rng, 1), rand_form(cf, rng, 1)
    assert (wedge(a, b) + wedge(b, a)).sup() < 1e-13
    assert wedge(a, a).sup() < 1e-13


def test_standard_structure_equations():
    cf = standard_coframe(sphere())
    dth = exterior_d(cf.theta)
    assert (dth - wedge(cf.theta1, cf.theta1bar) * 1j).sup() == 0
    assert (exterior_d(cf.theta1) - wedge(cf.theta, cf.theta1) * 2j).sup() == 0


def test_contact_volume_is_four_pi_squared():
    for m in (sphere(), sphere(HopfGrid(8, 8, 8))):
        cf = standard_coframe(m)
        vol = integrate_form(wedge(cf.theta, exterior_d(cf.theta)))
        assert abs(vol - 4 * math.pi**2) < 1e-12


def test_stokes_on_closed_manifold(grid_sphere, rng):
    cf = build_coframe(constant(grid_sphere, 1.0), random_polynomial(grid_sphere, rng, 2, 3, 0.05)).coframe
    a = rand_form(cf, rng, 2)
    assert abs(integrate_form(exterior_d(a))) < 1e-10


def test_only_three_forms_integrate():
    cf = standard_coframe(sphere())
    with pytest.raises(DegreeError):
        integrate_form(cf.theta)


def test_matrix_wedge_trace_cyclicity(rng):
    cf = standard_coframe(sphere())
    A = MatrixForm([[rand_form(cf, rng, 1, 1) for _ in range(3)] for _ in range(3)])
    B = MatrixForm([[rand_form(cf, rng, 1, 1) for _ in range(3)] for _ in range(3)])
    # tr(A ^ B) = -tr(B ^ A) for matrices of 1-forms
    assert (trace(matrix_wedge(A, B)) + trace(matrix_wedge(B, A))).sup() < 1e-12
