"""Cartan gradient flow on deformations and CR Yamabe flow on contact factors.

Cartan flow
    E moves along the steepest descent of mu.  The first-variation pairing is
    fixed by calibration (see :func:`calibrate_pairing`):

        mu'(E)[dE] = -(c / 8 pi^2) Re int Q_11 dE w theta ^ d theta,   w = 1 / (1 - |E|^2),

    so the flow is dE/dt = rate * sign(c) * P_w(conj Q_11), where P_w is the
    w-orthogonal projection onto a finite slice of low-degree deformations
    (monomials of degree <= K modulo the trivial directions Z1bar Z1bar f, which
    are tangent to the contact-diffeomorphism orbit).  The projection keeps
    explicit RK4 stable and keeps dmu/dt <= 0 exactly in continuous time.

Yamabe flow
    d(log u)/dt = W, or W - mean(W) in volume-normalized form.  Linearizing at
    u = 1 gives d f/dt = (d(d+2) - 2) f on degree-d harmonics, so the flow in
    this orientation amplifies high modes.  Each RK stage therefore projects
    log u onto the harmonics of degree <= D (:class:`HarmonicFilter`), which
    caps the stiffness and removes aliasing; constant-W data is unaffected.
"""
from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from . import conventions as _conv
from .exterior import integrate_form, wedge
from .fields import GridField, constant, frame_derivative, from_samples, from_terms, load_snapshot, random_polynomial
from .invariants import mu_pseudohermitian
from .manifold import HopfGrid, PolynomialExact
from .pseudohermitian import AdmissibilityError, build_coframe, cartan_tensor, solve_ph

__all__ = [
    "PairingCalibration",
    "CalibrationError",
    "FlowStall",
    "FlowError",
    "calibrate_pairing",
    "directional_derivative",
    "gradient_pairing",
    "SliceBasis",
    "HarmonicFilter",
    "FlowState",
    "cartan_state",
    "yamabe_state",
    "cartan_flow_step",
    "cartan_rhs",
    "yamabe_rate",
    "FlowResult",
    "yamabe_flow_step",
    "run_flow",
    "save_checkpoint",
    "load_checkpoint",
    "CSV_COLUMNS",
]

CSV_COLUMNS = ("t", "dt", "mu", "supQ", "maxW", "minW", "supE", "accepted")


class CalibrationError(RuntimeError):
    pass


class FlowStall(RuntimeError):
    """The step size fell below the minimum after rejections."""


class FlowError(RuntimeError):
    """Positivity or |E| margin violated."""


# ---------------------------------------------------------------------------
# first variation
# ---------------------------------------------------------------------------

def _mu_of(E, manifold):
    u = constant(manifold, 1.0)
    return mu_pseudohermitian(solve_ph(build_coframe(u, E))).mu


def directional_derivative(E, dE, eps=1e-4, stencil=4):
    """d/ds mu(E + s dE) at s = 0 by a centred difference (2- or 4-point)."""
    m = E.manifold
    f = lambda s: _mu_of(E + dE * s, m)
    if stencil == 2:
        return (f(eps) - f(-eps)) / (2 * eps)
    return (8 * (f(eps) - f(-eps)) - (f(2 * eps) - f(-2 * eps))) / (12 * eps)


def gradient_pairing(E, dE, conv=None):
    """Re int Q_11 pairing(dE) w theta ^ d theta at the structure (u = 1, E)."""
    conv = conv or _conv.load()
    ph = solve_ph(build_coframe(constant(E.manifold, 1.0), E), conv)
    Q = cartan_tensor(ph)
    cf = ph.cf.coframe
    vol = wedge(cf.theta, cf.dbasis[0])
    w = (1.0 - E.abs2()).reciprocal()
    return float(integrate_form(vol * (Q * conv.pair(dE) * w)).real)


@dataclass(frozen=True)
class PairingCalibration:
    c: float
    dispersion: float
    samples: list
    pairing: str
    base_derivative: float

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def calibrate_pairing(manifold=None, n_directions=10, seed=0, eps=1e-4, base_scale=0.03,
                      conv=None, max_dispersion=0.01) -> PairingCalibration:
    """Fit c in mu'(E)[dE] = -(c / 8 pi^2) * pairing over random (E, dE).

    Also reports the 4-point directional derivative at E = 0 along the first
    direction (a critical point, so it should vanish).
    """
    from .manifold import sphere

    conv = conv or _conv.load()
    m = manifold or sphere(HopfGrid(16, 32, 32))
    rng = np.random.default_rng(seed)
    samples = []
    first_dir = None
    for _ in range(n_directions):
        E = random_polynomial(m, rng, max_degree=2, n_terms=4, scale=base_scale)
        dE = random_polynomial(m, rng, max_degree=3, n_terms=5)
        first_dir = first_dir or dE
        D = directional_derivative(E, dE, eps)
        P = gradient_pairing(E, dE, conv)
        if abs(P) < 1e-12:
            continue
        samples.append(-8 * math.pi**2 * D / P)
    arr = np.array(samples)
    c = float(np.mean(arr))
    disp = float(np.max(np.abs(arr - c)) / abs(c))
    base = directional_derivative(constant(m, 0.0), first_dir, 1e-3)
    cal = PairingCalibration(c, disp, [float(x) for x in arr], conv.pairing, float(base))
    if disp > max_dispersion:
        raise CalibrationError(f"pairing constant dispersion {disp:.3g} exceeds {max_dispersion}")
    return cal


# ---------------------------------------------------------------------------
# slice of deformations
# ---------------------------------------------------------------------------

def _monomials(K):
    out = []
    for a in range(K + 1):
        for b in range(K + 1 - a):
            for c in range(K + 1 - a - b):
                for d in range(K + 1 - a - b - c):
                    if c * d == 0:
                        out.append((a, b, c, d))
    return out


class SliceBasis:
    """Orthonormal basis of degree-<= K deformations orthogonal to Z1bar Z1bar f.

    On a lens space only deformations of the invariant charge 2(1 + q) are kept.
    """

    def __init__(self, manifold, max_degree=3, include_trivial=False, rank_tol=1e-9):
        if not manifold.is_grid:
            raise ValueError("the flow slice lives on the grid backend")
        self.manifold = manifold
        self.max_degree = max_degree
        self.include_trivial = include_trivial
        geo = manifold.backend.geometry
        self.sqrt_w = np.sqrt(geo.weights).ravel()
        charge = (2 * (1 + manifold.q)) % manifold.p if manifold.p > 1 else None
        mons = _monomials(max_degree)
        if charge is not None:
            mons = [e for e in mons if int(manifold.charge_of(*e)) == charge]
        cols = [from_terms(manifold, {e: 1.0}, charge=None).values.ravel() for e in mons]
        A = np.array(cols).T * self.sqrt_w[:, None]
        if not include_trivial:
            triv = []
            pm = manifold.with_backend(PolynomialExact())
            for e in _monomials(max_degree):
                f = from_terms(pm, {e: 1.0}, charge=None)
                g = frame_derivative(frame_derivative(f, 2), 2)
                if g.size:
                    triv.append(g.on(manifold).values.ravel())
            if triv:
                T = np.array(triv).T * self.sqrt_w[:, None]
                U, s, _ = np.linalg.svd(T, full_matrices=False)
                Qt = U[:, s > rank_tol * s[0]]
                A = A - Qt @ (Qt.conj().T @ A)
        U, s, _ = np.linalg.svd(A, full_matrices=False)
        keep = s > rank_tol * s[0]
        self.B = U[:, keep] / self.sqrt_w[:, None]      # columns orthonormal in L^2(dV)
        self.size = self.B.shape[1]

    def field(self, coeffs) -> GridField:
        v = self.B @ np.asarray(coeffs, dtype=complex)
        return from_samples(self.manifold, v.reshape(self.manifold.backend.shape))

    def coefficients(self, f) -> np.ndarray:
        """L^2(dV) projection coefficients of a grid field."""
        return self.project(f, None)

    def project(self, f, weight=None) -> np.ndarray:
        w = self.sqrt_w**2 if weight is None else self.sqrt_w**2 * np.asarray(weight).ravel()
        BW = self.B.conj().T * w[None, :]
        G = BW @ self.B
        return np.linalg.solve(G, BW @ f.values.ravel())

    def random(self, rng, amplitude):
        c = rng.normal(size=self.size) + 1j * rng.normal(size=self.size)
        f = self.field(c)
        return c * (amplitude / f.sup())


class HarmonicFilter:
    """L^2(dV) projection onto restrictions of polynomials of degree <= D.

    Monomials with a factor z1 z1bar are dropped since z1 z1bar = 1 - z2 z2bar.
    The span is closed under conjugation, so real functions stay real.
    """

    def __init__(self, manifold, degree=None, rank_tol=1e-10):
        if not manifold.is_grid:
            raise ValueError("the harmonic filter lives on the grid backend")
        shape = manifold.backend.shape
        if degree is None:
            degree = max(2, min(shape[1], shape[2]) // 2 - 2)
        self.manifold = manifold
        self.degree = int(degree)
        w = manifold.backend.geometry.weights.ravel()
        sw = np.sqrt(w)
        mons = [(a, b, c, d) for a in range(degree + 1) for b in range(degree + 1 - a)
                for c in range(degree + 1 - a - b) for d in range(degree + 1 - a - b - c) if a * b == 0]
        if manifold.p > 1:
            mons = [e for e in mons if int(manifold.charge_of(*e)) == 0]
        A = np.array([from_terms(manifold, {e: 1.0}, charge=None).values.ravel() for e in mons]).T
        U, s, _ = np.linalg.svd(A * sw[:, None], full_matrices=False)
        self.Ub = U[:, s > rank_tol * s[0]]
        self.sw = sw
        self.size = self.Ub.shape[1]

    def apply(self, values):
        v = np.asarray(values)
        y = self.sw * v.ravel()
        out = (self.Ub @ (self.Ub.conj().T @ y)) / self.sw
        if not np.iscomplexobj(v):
            out = out.real
        return out.reshape(v.shape)


# ---------------------------------------------------------------------------
# flow state
# ---------------------------------------------------------------------------

@dataclass
class FlowState:
    kind: str                 # "cartan" or "yamabe"
    t: float
    dt: float
    step: int
    E: object
    u: object
    coeffs: np.ndarray | None = None
    ph: object = None
    Q: object = None
    monitors: dict = field(default_factory=dict)
    history: list = field(default_factory=list)
    band: object = None       # HarmonicFilter for the Yamabe flow

    @property
    def manifold(self):
        return self.E.manifold

    def row(self, accepted=1) -> dict:
        m = self.monitors
        return {"t": self.t, "dt": self.dt, "mu": m["mu"], "supQ": m["supQ"], "maxW": m["maxW"],
                "minW": m["minW"], "supE": m["supE"], "accepted": accepted}


def _evaluate(kind, u, E, t, dt, step, coeffs=None, conv=None, with_q=True):
    ph = solve_ph(build_coframe(u, E), conv)
    Q = cartan_tensor(ph) if with_q else None
    mon = {
        "mu": mu_pseudohermitian(ph).mu,
        "supQ": Q.sup() if Q is not None else float("nan"),
        "maxW": ph.W.max_real(),
        "minW": ph.W.inf_real(),
        "supE": E.sup(),
    }
    mon["harnack"] = mon["maxW"] / mon["minW"] if mon["minW"] > 0 else float("inf")
    return FlowState(kind, t, dt, step, E, u, coeffs, ph, Q, mon)


def cartan_state(basis: SliceBasis, coeffs, dt=1e-2, t=0.0, step=0, conv=None) -> FlowState:
    E = basis.field(coeffs)
    if E.sup() >= 0.9:
        raise FlowError("initial deformation violates the |E| margin")
    u = constant(basis.manifold, 1.0)
    return _evaluate("cartan", u, E, t, dt, step, np.asarray(coeffs, dtype=complex), conv)


def yamabe_state(u, E=None, dt=1e-3, t=0.0, step=0, conv=None, normalized=False,
                 band="auto", orientation=1, prefilter=True) -> FlowState:
    """``band``: a HarmonicFilter, a degree, "auto" (from the grid) or None (no filtering).

    The filter is applied to log u here (unless ``prefilter`` is false, as on
    a checkpoint restart) and after every RK stage.
    ``orientation`` = -1 runs d(log u)/dt = -W instead (forward parabolic).
    """
    if orientation not in (1, -1):
        raise ValueError("orientation must be +1 or -1")
    m = u.manifold
    if not m.is_grid:
        raise ValueError("the Yamabe flow runs on the grid backend")
    E = E if E is not None else constant(m, 0.0)
    if band is not None and not isinstance(band, HarmonicFilter):
        band = HarmonicFilter(m, None if band == "auto" else int(band))
    u = u.as_real()
    if band is not None and prefilter:
        if u.inf_real() <= 0:
            raise FlowError("contact factor must be positive")
        u = from_samples(m, np.exp(band.apply(np.log(u.values.real))), real=True)
    s = _evaluate("yamabe", u, E, t, dt, step, None, conv)
    s.monitors["normalized"] = normalized
    s.monitors["orientation"] = orientation
    s.band = band
    return s


# ---------------------------------------------------------------------------
# Cartan flow
# ---------------------------------------------------------------------------

def cartan_rhs(basis: SliceBasis, coeffs, conv=None, Q=None) -> np.ndarray:
    conv = conv or _conv.load()
    E = basis.field(coeffs)
    if Q is None:
        ph = solve_ph(build_coframe(constant(basis.manifold, 1.0), E), conv)
        Q = cartan_tensor(ph)
    G = Q.conj() if conv.pairing == "same" else Q
    w = 1.0 / (1.0 - np.abs(E.values) ** 2)
    return basis.project(G, w) * (conv.flow_rate * math.copysign(1.0, conv.pairing_constant))


def _rk4(f, y, dt, k1=None):
    k1 = f(y) if k1 is None else k1
    k2 = f(y + 0.5 * dt * k1)
    k3 = f(y + 0.5 * dt * k2)
    k4 = f(y + dt * k3)
    return y + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


def cartan_flow_step(state: FlowState, dt, basis: SliceBasis, mu_slack=1e-9, dt_min=1e-8,
                     e_margin=0.1, conv=None):
    """One accepted RK4 step; returns (state, rejected_rows)."""
    rejected = []
    k1 = cartan_rhs(basis, state.coeffs, conv, Q=state.Q)
    while True:
        if dt < dt_min:
            raise FlowStall(f"step size {dt:.3g} below {dt_min:.3g} at t = {state.t:.6g}")
        y = _rk4(lambda c: cartan_rhs(basis, c, conv), state.coeffs, dt, k1)
        E = basis.field(y)
        if E.sup() >= 1.0 - e_margin:
            raise FlowError(f"sup|E| = {E.sup():.3g} violates the margin")
        new = _evaluate("cartan", state.u, E, state.t + dt, dt, state.step + 1, y, conv)
        if new.monitors["mu"] <= state.monitors["mu"] + mu_slack:
            new.history = state.history
            return new, rejected
        trial = new.row(accepted=0)
        trial["t"] = state.t
        rejected.append(trial)
        dt *= 0.5


# ---------------------------------------------------------------------------
# Yamabe flow
# ---------------------------------------------------------------------------

def yamabe_rate(u, E, normalized=False, conv=None, orientation=1):
    ph = solve_ph(build_coframe(u, E), conv)
    W = ph.W
    if normalized:
        cf = ph.cf.coframe
        vol = wedge(cf.theta, cf.dbasis[0])
        W = W - float((integrate_form(vol * W) / integrate_form(vol)).real)
    return W.values.real * orientation


def yamabe_flow_step(state: FlowState, dt, normalized=None, conv=None, dt_min=1e-10):
    """RK4 on log u with d(log u)/dt = W (minus its mean when normalized)."""
    normalized = state.monitors.get("normalized", False) if normalized is None else normalized
    orientation = state.monitors.get("orientation", 1)
    m = state.manifold
    E = state.E

    band = state.band
    filt = band.apply if band is not None else (lambda x: x)

    def f(logu):
        u = from_samples(m, np.exp(logu), real=True)
        return filt(yamabe_rate(u, E, normalized, conv, orientation))

    logu = np.log(state.u.values.real)
    try:
        new_log = filt(_rk4(f, logu, dt))
    except AdmissibilityError as exc:
        if dt / 2 < dt_min:
            raise FlowStall(f"Yamabe step failed at every step size: {exc}") from exc
        return yamabe_flow_step(state, dt / 2, normalized, conv, dt_min)
    if not np.all(np.isfinite(new_log)):
        if dt / 2 < dt_min:
            raise FlowStall("Yamabe step produced non-finite values")
        return yamabe_flow_step(state, dt / 2, normalized, conv, dt_min)
    u = from_samples(m, np.exp(new_log), real=True)
    if u.inf_real() <= 0:
        raise FlowError("contact factor lost positivity")
    new = _evaluate("yamabe", u, E, state.t + dt, dt, state.step + 1, None, conv)
    new.monitors["normalized"] = normalized
    new.monitors["orientation"] = orientation
    new.history = state.history
    new.band = band
    return new


# ---------------------------------------------------------------------------
# driver, CSV and checkpoints
# ---------------------------------------------------------------------------

def _fmt(v):
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    return repr(float(v))


def _write_rows(path, rows, append):
    new = not append or not os.path.exists(path)
    with open(path, "a" if append else "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if new:
            w.writerow(CSV_COLUMNS)
        for r in rows:
            w.writerow([_fmt(r[c]) for c in CSV_COLUMNS])


def save_checkpoint(state: FlowState, path, basis: SliceBasis | None = None):
    data = {
        "kind": state.kind,
        "t": state.t,
        "dt": state.dt,
        "step": state.step,
        "E": state.E.snapshot(),
        "u": state.u.snapshot(),
        "monitors": {k: v for k, v in state.monitors.items()},
    }
    if state.coeffs is not None:
        data["coeffs"] = {"re": state.coeffs.real.tolist(), "im": state.coeffs.imag.tolist()}
    if state.kind == "yamabe":
        data["band"] = state.band.degree if state.band is not None else None
    if basis is not None:
        data["slice"] = {"max_degree": basis.max_degree, "include_trivial": basis.include_trivial}
    with open(path, "w") as fh:
        json.dump(data, fh)


def load_checkpoint(path, manifold, basis: SliceBasis | None = None, conv=None) -> FlowState:
    with open(path) as fh:
        data = json.load(fh)
    if data["kind"] == "cartan":
        if basis is None:
            sl = data.get("slice", {})
            basis = SliceBasis(manifold, sl.get("max_degree", 3), sl.get("include_trivial", False))
        c = np.array(data["coeffs"]["re"]) + 1j * np.array(data["coeffs"]["im"])
        return cartan_state(basis, c, data["dt"], data["t"], data["step"], conv)
    u = load_snapshot(data["u"], manifold)
    E = load_snapshot(data["E"], manifold)
    band = data.get("band", "auto")
    return yamabe_state(u, E, data["dt"], data["t"], data["step"], conv,
                        normalized=data["monitors"].get("normalized", False), band=band,
                        orientation=data["monitors"].get("orientation", 1), prefilter=False)


@dataclass
class FlowResult:
    state: FlowState
    rows: list
    accepted: int
    stalled: bool = False
    fixed_point: bool = False


def run_flow(state: FlowState, max_steps, basis: SliceBasis | None = None, csv_path=None,
             checkpoint_dir=None, checkpoint_every=0, mu_slack=1e-9, dt_min=1e-8,
             fixed_point_tol=1e-12, conv=None, append=False) -> FlowResult:
    """Advance ``state`` by up to ``max_steps`` accepted steps, logging every attempt."""
    rows = [] if append else [state.row(1)]
    accepted = 0
    dt = state.dt
    if state.kind == "cartan" and state.monitors["supQ"] < fixed_point_tol:
        if csv_path:
            _write_rows(csv_path, rows, append)
        return FlowResult(state, rows, 0, fixed_point=True)
    try:
        while accepted < max_steps:
            if state.kind == "cartan":
                state, rejected = cartan_flow_step(state, dt, basis, mu_slack, dt_min, conv=conv)
                rows.extend(rejected)
            else:
                state = yamabe_flow_step(state, dt, conv=conv)
            dt = state.dt
            rows.append(state.row(1))
            accepted += 1
            if checkpoint_dir and checkpoint_every and accepted % checkpoint_every == 0:
                os.makedirs(checkpoint_dir, exist_ok=True)
                save_checkpoint(state, os.path.join(checkpoint_dir, f"checkpoint_{state.step:06d}.json"), basis)
    except FlowStall:
        if csv_path:
            _write_rows(csv_path, rows, append)
        return FlowResult(state, rows, accepted, stalled=True)
    if csv_path:
        _write_rows(csv_path, rows, append)
    return FlowResult(state, rows, accepted)
