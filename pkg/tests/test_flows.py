"""Cartan gradient flow, Yamabe flow, calibration, CSV and checkpoints."""
import csv
import math
import os

import numpy as np
import pytest

from crgeom import conventions
from crgeom.fields import constant, from_function, from_samples, random_polynomial
from crgeom.flows import (
    CSV_COLUMNS, FlowError, HarmonicFilter, SliceBasis, calibrate_pairing, cartan_rhs, cartan_state,
    directional_derivative, gradient_pairing, load_checkpoint, run_flow, save_checkpoint, yamabe_flow_step,
    yamabe_rate, yamabe_state,
)
from crgeom.manifold import HopfGrid, lens, sphere
from crgeom.pseudohermitian import build_coframe, solve_ph
from crgeom.invariants import mu_pseudohermitian


@pytest.fixture(scope="module")
def basis():
    return SliceBasis(sphere(HopfGrid(8, 16, 16)), 2)


def test_first_variation_vanishes_at_the_standard_structure(grid_sphere, rng):
    dE = random_polynomial(grid_sphere, rng, 2, 4, 0.1)
    assert abs(directional_derivative(constant(grid_sphere, 0.0), dE)) < 1e-10


def test_pairing_constant_by_finite_differences(grid_sphere):
    conv = conventions.load()
    cal = calibrate_pairing(grid_sphere, n_directions=4, seed=3, conv=conv)
    assert cal.c == pytest.approx(conv.pairing_constant, rel=1e-6)
    assert cal.dispersion < 1e-2


def test_conjugate_pairing_is_inconsistent(grid_sphere):
    conv = conventions.load().replace(pairing="conj")
    cal = calibrate_pairing(grid_sphere, n_directions=4, seed=3, conv=conv, max_dispersion=math.inf)
    assert cal.dispersion > 1e-2


def test_slice_is_orthonormal_and_avoids_trivial_directions(basis):
    w = basis.sqrt_w**2
    G = (basis.B.conj().T * w) @ basis.B
    assert np.allclose(G, np.eye(basis.size), atol=1e-10)
    # holomorphic E is tangent to the diffeomorphism orbit: Q vanishes to first order
    m = basis.manifold
    z1 = from_function(m, lambda a, b: a * a)
    assert np.abs(basis.project(z1)).max() < 1e-10


def test_lens_slice_keeps_invariant_charge():
    b = SliceBasis(lens(3, 1, HopfGrid(8, 12, 12)), 2)
    f = b.field(np.ones(b.size))
    assert f.charge_defect((2 * 2) % 3) < 1e-12


def test_fixed_point_rhs(basis, small_grid):
    assert np.abs(cartan_rhs(basis, np.zeros(basis.size))).max() < 1e-10
    assert np.abs(yamabe_rate(constant(small_grid, 1.0), constant(small_grid, 0.0), True)).max() < 1e-10


def test_zero_start_reports_fixed_point(basis):
    res = run_flow(cartan_state(basis, np.zeros(basis.size)), 5, basis)
    assert res.fixed_point and res.accepted == 0


def test_short_cartan_flow_decreases_mu(basis):
    st = cartan_state(basis, basis.random(np.random.default_rng(1), 0.1), 0.02)
    res = run_flow(st, 20, basis)
    mus = [r["mu"] for r in res.rows if r["accepted"]]
    assert all(b <= a + 1e-9 for a, b in zip(mus, mus[1:]))
    assert res.rows[-1]["supE"] < res.rows[0]["supE"]


def test_flow_rate_matches_calibrated_gradient(basis):
    """d mu/dt along the flow equals the first-variation prediction."""
    conv = conventions.load()
    c = basis.random(np.random.default_rng(2), 0.05)
    rhs = cartan_rhs(basis, c, conv)
    E, dE = basis.field(c), basis.field(rhs)
    predicted = -conv.pairing_constant / (8 * math.pi**2) * gradient_pairing(E, dE, conv)
    fd = directional_derivative(E, dE, 1e-4)
    assert fd < 0
    assert fd == pytest.approx(predicted, rel=1e-4)


def test_margin_violation(basis):
    c = basis.random(np.random.default_rng(0), 0.95)
    with pytest.raises(FlowError):
        cartan_state(basis, c)


def test_csv_and_checkpoint_restart_are_bit_identical(basis, tmp_path):
    c0 = basis.random(np.random.default_rng(5), 0.1)
    full, part = tmp_path / "full.csv", tmp_path / "part.csv"
    run_flow(cartan_state(basis, c0, 0.02), 6, basis, str(full))
    res = run_flow(cartan_state(basis, c0, 0.02), 3, basis, str(part), str(tmp_path / "ck"), 3)
    st = load_checkpoint(str(tmp_path / "ck" / "checkpoint_000003.json"), basis.manifold, basis)
    run_flow(st, 3, basis, str(part), append=True)
    assert full.read_bytes() == part.read_bytes()
    with open(full) as fh:
        rows = list(csv.reader(fh))
    assert tuple(rows[0]) == CSV_COLUMNS and len(rows) == 8


def test_harmonic_filter_is_a_projection():
    m = sphere(HopfGrid(8, 16, 16))
    h = HarmonicFilter(m, 4)
    f = random_polynomial(m, np.random.default_rng(0), 4, 6, real=True).values.real
    assert np.abs(h.apply(f) - f).max() < 1e-11
    g = np.random.default_rng(1).normal(size=f.shape)
    assert np.abs(h.apply(h.apply(g)) - h.apply(g)).max() < 1e-11


def test_yamabe_constant_w_data_stays_constant():
    m = sphere(HopfGrid(12, 24, 24))
    a = np.array([0.1, -0.05j])
    u = from_function(m, lambda z1, z2: (1 - np.sum(abs(a) ** 2)) / abs(1 - np.conj(a[0]) * z1 - np.conj(a[1]) * z2) ** 2,
                      real=True)
    st = yamabe_state(u, dt=1e-3)
    for _ in range(10):
        st = yamabe_flow_step(st, 1e-3)
    assert st.ph.W.std() < 1e-6
    assert st.monitors["supQ"] < 1e-6


def test_yamabe_uniform_scaling():
    m = sphere(HopfGrid(8, 16, 16))
    st = yamabe_state(constant(m, 1.0), dt=1e-2)
    for _ in range(5):
        st = yamabe_flow_step(st, 1e-2)
    # constant u: W = 2/u, so du/dt = 2 exactly
    assert st.u.values.real.mean() == pytest.approx(1 + 2 * 0.05, rel=1e-10)


def test_yamabe_taylor_order():
    m = sphere(HopfGrid(12, 24, 24))
    f = random_polynomial(m, np.random.default_rng(4), 2, 4, 1.0, real=True)
    u = from_samples(m, np.exp(f.values.real * (0.05 / f.sup())), real=True)
    s0 = yamabe_state(u, band=6)
    W0, u0 = s0.ph.W.values.real, s0.u.values.real
    d = [np.abs(yamabe_flow_step(s0, dt).u.values.real - u0 * (1 + dt * W0)).max() for dt in (4e-3, 2e-3, 1e-3)]
    assert math.log2(d[0] / d[1]) == pytest.approx(2, abs=0.25)
    assert math.log2(d[1] / d[2]) == pytest.approx(2, abs=0.25)


def test_yamabe_orientation_flag():
    m = sphere(HopfGrid(8, 16, 16))
    u = constant(m, 1.0)
    assert np.allclose(yamabe_rate(u, constant(m, 0.0), orientation=-1), -2.0)
    with pytest.raises(ValueError):
        yamabe_state(u, orientation=0)
