"""Scalar fields on S^3 and lens spaces, with the standard CR frame.

Two backends share one interface:

* :class:`PolyField` -- finite sums of monomials z1^a conj(z1)^b z2^c conj(z2)^d,
  kept in the canonical form c*d == 0 (|z2|^2 is rewritten as 1 - |z1|^2).
  Frame derivatives, products and integrals are exact.
* :class:`GridField` -- samples on a cell-centred Hopf grid; derivatives are
  Fourier-spectral (eta is extended to a full period by the reflections that
  keep z fixed) and integrals use Fejer's first rule in cos(2 eta).

The standard frame is

    Z1 = conj(z2) d/dz1 - conj(z1) d/dz2,   Z1bar = conj(Z1),
    T  = i (z1 d/dz1 + z2 d/dz2 - c.c.),

dual to theta = Im(conj(z) . dz), theta^1 = z2 dz1 - z1 dz2 and its conjugate.
Directions are indexed 0 = T, 1 = Z1, 2 = Z1bar throughout the package.
"""
from __future__ import annotations

import json
import math
from numbers import Number

import numpy as np

from .manifold import BackendError, HopfGrid, ManifoldMismatch, PolynomialExact, SampleManifold

__all__ = [
    "ScalarField",
    "PolyField",
    "GridField",
    "DIRECTIONS",
    "constant",
    "coordinate",
    "from_terms",
    "from_function",
    "from_samples",
    "frame_derivative",
    "integrate",
    "group_pullback",
    "load_snapshot",
    "NonInvariantError",
    "random_polynomial",
]

DIRECTIONS = {"T": 0, "Z1": 1, "Z1bar": 2, 0: 0, 1: 1, 2: 2}
REAL_TOL = 1e-9


class NonInvariantError(ValueError):
    """A density on a lens space is not invariant under the deck group."""


def _dir(d) -> int:
    try:
        return DIRECTIONS[d]
    except KeyError:
        raise ValueError(f"unknown frame direction {d!r}") from None


class ScalarField:
    """Immutable complex function on a :class:`SampleManifold`.

    ``real`` tags fields whose imaginary part is asserted to vanish.
    """

    manifold: SampleManifold
    real: bool

    # -- arithmetic, implemented by the backends -----------------------------
    def _binary(self, other, op):
        raise NotImplementedError

    def _check(self, other):
        if isinstance(other, ScalarField) and other.manifold != self.manifold:
            raise ManifoldMismatch(f"{self.manifold.describe()} vs {other.manifold.describe()}")

    def __add__(self, other):
        if not isinstance(other, (Number, ScalarField)):
            return NotImplemented
        return self._binary(other, "add")

    __radd__ = __add__

    def __sub__(self, other):
        return self._binary(other, "sub")

    def __rsub__(self, other):
        return (-self)._binary(other, "add")

    def __mul__(self, other):
        if not isinstance(other, (Number, ScalarField)):
            return NotImplemented
        return self._binary(other, "mul")

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0

    def __truediv__(self, other):
        if isinstance(other, Number):
            return self * (1.0 / other)
        return self * other.reciprocal()

    def __rtruediv__(self, other):
        return self.reciprocal() * other

    def __pow__(self, k: int):
        if not isinstance(k, int) or k < 0:
            raise ValueError("only non-negative integer powers are supported")
        out = constant(self.manifold, 1.0)
        base = self
        while k:
            if k & 1:
                out = out * base
            base = base * base
            k >>= 1
        return out

    def abs2(self):
        return (self * self.conj()).as_real()

    @property
    def re(self):
        return ((self + self.conj()) * 0.5).as_real()

    @property
    def im(self):
        return ((self - self.conj()) * -0.5j).as_real()

    def sup(self) -> float:
        return float(np.max(np.abs(self.sample()))) if self.size else 0.0

    def inf_real(self) -> float:
        return float(np.min(self.sample().real))

    def max_real(self) -> float:
        return float(np.max(self.sample().real))

    def derivative(self, direction):
        return frame_derivative(self, direction)

    def integrate(self):
        return integrate(self)

    def mean(self):
        return integrate(self) / integrate(constant(self.manifold, 1.0))

    def std(self) -> float:
        m = self.mean()
        return math.sqrt(max(integrate((self - m).abs2()).real / integrate(constant(self.manifold, 1.0)).real, 0.0))


# ---------------------------------------------------------------------------
# polynomial backend
# ---------------------------------------------------------------------------

def _aggregate(exps: np.ndarray, coefs: np.ndarray, prune: float):
    if len(coefs) == 0:
        return np.zeros((0, 4), dtype=np.int64), np.zeros(0, dtype=complex)
    base = int(exps.max()) + 1
    keys = ((exps[:, 0] * base + exps[:, 1]) * base + exps[:, 2]) * base + exps[:, 3]
    uniq, inv = np.unique(keys, return_inverse=True)
    summed = np.zeros(len(uniq), dtype=complex)
    np.add.at(summed, inv, coefs)
    first = np.zeros(len(uniq), dtype=np.int64)
    first[inv[::-1]] = np.arange(len(keys))[::-1]
    out_exps = exps[first]
    scale = np.max(np.abs(summed)) if len(summed) else 0.0
    keep = np.abs(summed) > prune * max(scale, 1.0)
    return out_exps[keep], summed[keep]


def _canonical(exps: np.ndarray, coefs: np.ndarray, prune: float):
    """Rewrite z2 conj(z2) as 1 - z1 conj(z1) until every term has c*d == 0."""
    exps = np.asarray(exps, dtype=np.int64).reshape(-1, 4)
    coefs = np.asarray(coefs, dtype=complex).reshape(-1)
    m = np.minimum(exps[:, 2], exps[:, 3])
    done = m == 0
    parts_e = [exps[done]]
    parts_c = [coefs[done]]
    for mv in np.unique(m[~done]):
        rows = m == mv
        e = exps[rows].copy()
        e[:, 2] -= mv
        e[:, 3] -= mv
        c = coefs[rows]
        for k in range(mv + 1):
            ek = e.copy()
            ek[:, 0] += k
            ek[:, 1] += k
            parts_e.append(ek)
            parts_c.append(c * (math.comb(int(mv), k) * (-1) ** k))
    return _aggregate(np.concatenate(parts_e), np.concatenate(parts_c), prune)


class PolyField(ScalarField):
    """Exact polynomial field in canonical monomial form."""

    def __init__(self, manifold: SampleManifold, exps, coefs, real=False, _canonical_ok=False):
        if manifold.is_grid:
            raise BackendError("PolyField requires the PolynomialExact backend")
        self.manifold = manifold
        prune = manifold.backend.prune
        if _canonical_ok:
            self.exps, self.coefs = exps, coefs
        else:
            self.exps, self.coefs = _canonical(exps, coefs, prune)
        self.real = bool(real)
        if self.real:
            conj = self._conj_raw()
            gap = _canonical(
                np.concatenate([self.exps, conj.exps]),
                np.concatenate([self.coefs, -conj.coefs]),
                0.0,
            )[1]
            scale = max(1.0, float(np.max(np.abs(self.coefs))) if self.size else 1.0)
            if gap.size and np.max(np.abs(gap)) > REAL_TOL * scale:
                raise ValueError("field tagged Real has a non-negligible imaginary part")
            sym = _canonical(
                np.concatenate([self.exps, conj.exps]),
                np.concatenate([self.coefs, conj.coefs]) * 0.5,
                prune,
            )
            self.exps, self.coefs = sym

    @property
    def size(self):
        return len(self.coefs)

    def _new(self, exps, coefs, real=False, canonical_ok=False):
        return PolyField(self.manifold, exps, coefs, real=real, _canonical_ok=canonical_ok)

    def _conj_raw(self):
        e = self.exps[:, [1, 0, 3, 2]]
        return PolyField(self.manifold, e, np.conj(self.coefs), _canonical_ok=True)

    def conj(self):
        if self.real:
            return self
        return self._conj_raw()

    def as_real(self):
        return self._new(self.exps, self.coefs, real=True, canonical_ok=True)

    def _binary(self, other, op):
        if isinstance(other, Number):
            if op == "mul":
                real = self.real and np.isreal(other)
                return self._new(self.exps, self.coefs * other, real=real, canonical_ok=other != 0)
            other = constant(self.manifold, other)
        self._check(other)
        if not isinstance(other, PolyField):
            raise ManifoldMismatch("cannot combine polynomial and grid fields")
        real = self.real and other.real
        if op in ("add", "sub"):
            sign = 1.0 if op == "add" else -1.0
            e = np.concatenate([self.exps, other.exps])
            c = np.concatenate([self.coefs, sign * other.coefs])
            e, c = _aggregate(e, c, self.manifold.backend.prune)
            return self._new(e, c, real=real, canonical_ok=True)
        if self.size == 0 or other.size == 0:
            return self._new(np.zeros((0, 4), np.int64), np.zeros(0, complex), canonical_ok=True)
        e = (self.exps[:, None, :] + other.exps[None, :, :]).reshape(-1, 4)
        c = np.outer(self.coefs, other.coefs).reshape(-1)
        return self._new(e, c, real=real)

    def terms(self):
        """List of ((a, b, c, d), coefficient) pairs."""
        return [(tuple(int(x) for x in e), complex(c)) for e, c in zip(self.exps, self.coefs)]

    def evaluate(self, z1, z2):
        z1 = np.asarray(z1, dtype=complex)
        z2 = np.asarray(z2, dtype=complex)
        out = np.zeros(z1.shape, dtype=complex)
        if not self.size:
            return out
        top = int(self.exps.max())
        pw = {}
        for key, base in (("z1", z1), ("w1", np.conj(z1)), ("z2", z2), ("w2", np.conj(z2))):
            pw[key] = [np.ones_like(base)]
            for _ in range(top):
                pw[key].append(pw[key][-1] * base)
        for (a, b, c, d), coef in zip(self.exps, self.coefs):
            out += coef * pw["z1"][a] * pw["w1"][b] * pw["z2"][c] * pw["w2"][d]
        return out

    def sample(self, shape=None):
        geo = HopfGrid(*(shape or self.manifold.backend.sample_shape)).geometry
        return self.evaluate(geo.z1, geo.z2)

    def degree(self) -> int:
        return int(self.exps.sum(axis=1).max()) if self.size else 0

    def on(self, manifold: SampleManifold):
        """Resample onto another backend of the same base manifold."""
        if manifold.is_grid:
            geo = manifold.backend.geometry
            return GridField(manifold, self.evaluate(geo.z1, geo.z2), real=self.real)
        return PolyField(manifold, self.exps, self.coefs, real=self.real)

    # -- series for non-polynomial operations --------------------------------
    def _series(self, coefficients):
        """sum_k coefficients[k] g^k with f = m (1 + g), m the mean of f."""
        m = self.mean()
        if abs(m) < 1e-300:
            raise BackendError("series expansion around a vanishing mean")
        g = self * (1.0 / m) - 1.0
        rho = g.sup()
        if rho >= 0.9:
            raise BackendError(f"series expansion needs sup|f/mean - 1| < 0.9, got {rho:.3g}")
        out = constant(self.manifold, coefficients[0])
        gk = constant(self.manifold, 1.0)
        for ck in coefficients[1:]:
            gk = gk * g
            out = out + gk * ck
        return m, out

    def reciprocal(self):
        n = self.manifold.backend.truncation
        m, s = self._series([(-1.0) ** k for k in range(n + 1)])
        out = s * (1.0 / m)
        return out.as_real() if self.real and np.isreal(m) else out

    def sqrt(self):
        n = self.manifold.backend.truncation
        coeffs = [1.0]
        for k in range(1, n + 1):
            coeffs.append(coeffs[-1] * (0.5 - (k - 1)) / k)
        m, s = self._series(coeffs)
        out = s * np.sqrt(m)
        return out.as_real() if self.real and np.isreal(m) and m.real > 0 else out

    def project_charge(self, k=0):
        if self.manifold.is_sphere:
            return self
        ch = self.manifold.charge_of(*self.exps.T)
        keep = ch == np.mod(k, self.manifold.p)
        return self._new(self.exps[keep], self.coefs[keep], real=self.real, canonical_ok=True)

    def charge_defect(self, k=0) -> float:
        if self.manifold.is_sphere or not self.size:
            return 0.0
        ch = self.manifold.charge_of(*self.exps.T)
        bad = ch != np.mod(k, self.manifold.p)
        return float(np.abs(self.coefs[bad]).sum()) if bad.any() else 0.0

    def snapshot(self) -> dict:
        return {
            "manifold": self.manifold.describe(),
            "backend": "poly",
            "real_tag": self.real,
            "terms": [
                {"a": a, "b": b, "c": c, "d": d, "re": v.real, "im": v.imag}
                for (a, b, c, d), v in self.terms()
            ],
        }

    def __repr__(self):
        return f"PolyField({self.size} terms, degree {self.degree()}, real={self.real})"


# ---------------------------------------------------------------------------
# grid backend
# ---------------------------------------------------------------------------

def _extend_eta(v: np.ndarray) -> np.ndarray:
    """Extend samples on eta in (0, pi/2) to a full 2 pi period in eta."""
    n1, n2 = v.shape[1], v.shape[2]
    h1, h2 = n1 // 2, n2 // 2
    flip = v[::-1]
    b1 = np.roll(flip, -h1, axis=1)            # f(pi - eta, xi1 + pi, xi2)
    b2 = np.roll(np.roll(v, -h1, axis=1), -h2, axis=2)  # f(eta - pi, xi1 + pi, xi2 + pi)
    b3 = np.roll(flip, -h2, axis=2)            # f(2 pi - eta, xi1, xi2 + pi)
    return np.concatenate([v, b1, b2, b3], axis=0)


def _spectral_diff(v: np.ndarray, k: np.ndarray, axis: int) -> np.ndarray:
    n = v.shape[axis]
    ik = 1j * k.copy()
    if n % 2 == 0:
        ik[n // 2] = 0.0
    shape = [1, 1, 1]
    shape[axis] = n
    return np.fft.ifft(np.fft.fft(v, axis=axis) * ik.reshape(shape), axis=axis)


class GridField(ScalarField):
    """Samples on a Hopf grid (eta-major, then xi1, then xi2)."""

    def __init__(self, manifold: SampleManifold, values, real=False):
        if not manifold.is_grid:
            raise BackendError("GridField requires a HopfGrid backend")
        values = np.asarray(values, dtype=complex)
        if values.shape != manifold.backend.shape:
            if values.ndim == 0:
                values = np.full(manifold.backend.shape, complex(values))
            else:
                raise ManifoldMismatch(f"samples of shape {values.shape} on grid {manifold.backend.shape}")
        if np.isnan(values).any():
            raise ValueError("NaN samples in grid field")
        self.manifold = manifold
        self.real = bool(real)
        if self.real:
            scale = max(1.0, float(np.max(np.abs(values.real))))
            if np.max(np.abs(values.imag)) > REAL_TOL * scale:
                raise ValueError("field tagged Real has a non-negligible imaginary part")
            values = values.real.astype(complex)
        values.setflags(write=False)
        self.values = values
        self._partials = None

    size = 1

    def partials(self):
        """(d_eta, d_xi1, d_xi2), computed once; a constant field has zero partials."""
        if self._partials is None:
            v = self.values
            if not np.any(v - v.flat[0]):
                z = np.zeros_like(v)
                self._partials = (z, z, z)
            else:
                self._partials = (self.d_eta(), self.d_xi(1), self.d_xi(2))
        return self._partials

    @property
    def geometry(self):
        return self.manifold.backend.geometry

    def conj(self):
        return self if self.real else GridField(self.manifold, np.conj(self.values))

    def as_real(self):
        return GridField(self.manifold, self.values, real=True)

    def _binary(self, other, op):
        if isinstance(other, Number):
            v = other
            real = self.real and np.isreal(other)
        else:
            self._check(other)
            if not isinstance(other, GridField):
                raise ManifoldMismatch("cannot combine grid and polynomial fields")
            v = other.values
            real = self.real and other.real
        a = self.values
        out = a + v if op == "add" else a - v if op == "sub" else a * v
        return GridField(self.manifold, out, real=real)

    def reciprocal(self):
        if np.min(np.abs(self.values)) < 1e-300:
            raise ZeroDivisionError("reciprocal of a field with zeros")
        return GridField(self.manifold, 1.0 / self.values, real=self.real)

    def sqrt(self):
        if self.real and np.min(self.values.real) <= 0:
            raise ValueError("square root of a non-positive real field")
        return GridField(self.manifold, np.sqrt(self.values), real=self.real)

    def apply(self, fn, real=False):
        """Pointwise function (grid backend only)."""
        return GridField(self.manifold, fn(self.values), real=real)

    def evaluate(self, z1, z2):
        """Spectral interpolation at arbitrary points of S^3."""
        z1 = np.asarray(z1, dtype=complex)
        z2 = np.asarray(z2, dtype=complex)
        shape = z1.shape
        z1, z2 = z1.ravel(), z2.ravel()
        eta = np.arctan2(np.abs(z2), np.abs(z1))
        x1, x2 = np.angle(z1), np.angle(z2)
        geo = self.geometry
        ext = _extend_eta(self.values)
        coef = np.fft.fftn(ext) / ext.size
        K, M, N = coef.shape
        flat = coef.reshape(K * M, N)
        out = np.empty(len(z1), dtype=complex)
        kk, mm, nn = geo.k_eta, geo.k_xi1, geo.k_xi2
        # shift grid origin: eta nodes are offset by h/2 from zero
        h = np.pi / (2 * geo.shape[0])
        for s in range(0, len(z1), 512):
            sl = slice(s, s + 512)
            A = np.exp(1j * np.outer(kk, eta[sl] - h / 2))
            B = np.exp(1j * np.outer(mm, x1[sl]))
            C = np.exp(1j * np.outer(nn, x2[sl]))
            G = (flat @ C).reshape(K, M, -1)
            H = np.einsum("kmp,mp->kp", G, B)
            out[sl] = np.einsum("kp,kp->p", H, A)
        return out.reshape(shape)

    def sample(self, shape=None):
        if shape is None or tuple(shape) == self.manifold.backend.shape:
            return self.values
        geo = HopfGrid(*shape).geometry
        return self.evaluate(geo.z1, geo.z2)

    def d_eta(self):
        geo = self.geometry
        ext = _extend_eta(self.values)
        return _spectral_diff(ext, geo.k_eta, 0)[: self.values.shape[0]]

    def d_xi(self, which: int):
        geo = self.geometry
        k = geo.k_xi1 if which == 1 else geo.k_xi2
        return _spectral_diff(self.values, k, which)

    def project_charge(self, k=0):
        if self.manifold.is_sphere:
            return self
        geo = self.geometry
        p, q = self.manifold.p, self.manifold.q
        m = geo.k_xi1[:, None]
        n = geo.k_xi2[None, :]
        mask = np.mod(m + q * n, p) == np.mod(k, p)
        coef = np.fft.fft2(self.values, axes=(1, 2)) * mask[None]
        return GridField(self.manifold, np.fft.ifft2(coef, axes=(1, 2)), real=self.real)

    def charge_defect(self, k=0) -> float:
        if self.manifold.is_sphere:
            return 0.0
        return float(np.max(np.abs(self.values - self.project_charge(k).values)))

    def snapshot(self) -> dict:
        return {
            "manifold": self.manifold.describe(),
            "backend": "grid",
            "shape": list(self.values.shape),
            "ordering": "eta-major, then xi1, then xi2",
            "real_tag": self.real,
            "real": self.values.real.ravel().tolist(),
            "imag": self.values.imag.ravel().tolist(),
        }

    def __repr__(self):
        return f"GridField(shape={self.values.shape}, real={self.real})"


# ---------------------------------------------------------------------------
# constructors
# ---------------------------------------------------------------------------

def constant(manifold: SampleManifold, value) -> ScalarField:
    real = bool(np.isreal(value))
    if manifold.is_grid:
        return GridField(manifold, np.full(manifold.backend.shape, complex(value)), real=real)
    if value == 0:
        return PolyField(manifold, np.zeros((0, 4), np.int64), np.zeros(0, complex), real=real)
    return PolyField(manifold, np.zeros((1, 4), np.int64), np.array([complex(value)]), real=real)


_COORD = {"z1": (1, 0, 0, 0), "z1bar": (0, 1, 0, 0), "z2": (0, 0, 1, 0), "z2bar": (0, 0, 0, 1)}


def coordinate(manifold: SampleManifold, name: str) -> ScalarField:
    """The coordinate function z1, z1bar, z2 or z2bar (no lens projection)."""
    return from_terms(manifold, {_COORD[name]: 1.0}, charge=None)


def from_terms(manifold: SampleManifold, terms, real=False, charge=0) -> ScalarField:
    """Field from monomial terms ``{(a, b, c, d): coef}`` or an iterable of 5-tuples.

    On a lens space the field is projected onto lens charge ``charge``
    (``None`` skips the projection).
    """
    if isinstance(terms, dict):
        items = list(terms.items())
    else:
        items = [((t[0], t[1], t[2], t[3]), t[4]) for t in terms]
    exps = np.array([e for e, _ in items], dtype=np.int64).reshape(-1, 4)
    coefs = np.array([c for _, c in items], dtype=complex)
    poly_manifold = manifold if not manifold.is_grid else manifold.with_backend(PolynomialExact())
    f = PolyField(poly_manifold, exps, coefs, real=real)
    if charge is not None:
        f = f.project_charge(charge)
    return f.on(manifold) if manifold.is_grid else f


def from_function(manifold: SampleManifold, fn, real=False, charge=0) -> GridField:
    """Grid field from ``fn(z1, z2)`` evaluated at the nodes."""
    geo = manifold.backend.geometry
    f = GridField(manifold, fn(geo.z1, geo.z2), real=real)
    return f.project_charge(charge) if charge is not None else f


def from_samples(manifold: SampleManifold, values, real=False) -> GridField:
    return GridField(manifold, values, real=real)


# ---------------------------------------------------------------------------
# frame derivatives, integration, symmetries
# ---------------------------------------------------------------------------

def frame_derivative(f: ScalarField, direction) -> ScalarField:
    """Apply T, Z1 or Z1bar of the standard frame."""
    d = _dir(direction)
    if isinstance(f, PolyField):
        e, c = f.exps, f.coefs
        a, b, cc, dd = e.T
        if d == 0:
            return f._new(e, c * 1j * (a - b + cc - dd), real=f.real, canonical_ok=True)
        if d == 1:
            e1 = e + np.array([-1, 0, 0, 1])
            e2 = e + np.array([0, 1, -1, 0])
            w1, w2 = a, -cc
        else:
            e1 = e + np.array([0, -1, 1, 0])
            e2 = e + np.array([1, 0, 0, -1])
            w1, w2 = b, -dd
        k1, k2 = w1 != 0, w2 != 0
        return f._new(
            np.concatenate([e1[k1], e2[k2]]),
            np.concatenate([c[k1] * w1[k1], c[k2] * w2[k2]]),
        )
    if isinstance(f, GridField):
        geo = f.geometry
        de, d1, d2 = f.partials()
        if d == 0:
            return GridField(f.manifold, d1 + d2, real=f.real)
        if d == 1:
            v = geo.z_eta * de + geo.z_xi1 * d1 + geo.z_xi2 * d2
        else:
            v = np.conj(geo.z_eta) * de + np.conj(geo.z_xi1) * d1 + np.conj(geo.z_xi2) * d2
        return GridField(f.manifold, v)
    raise TypeError(f"not a scalar field: {type(f).__name__}")


def _sphere_integral(f: ScalarField) -> complex:
    if isinstance(f, PolyField):
        if not f.size:
            return 0.0j
        a, b, c, d = f.exps.T
        sel = (a == b) & (c == 0) & (d == 0)
        return complex(np.sum(f.coefs[sel] * (2 * np.pi**2) / (a[sel] + 1)))
    w = f.geometry.weights
    # fixed reduction order: eta slabs first, then their sum
    return complex(np.sum(np.sum((f.values * w).reshape(w.shape[0], -1), axis=1)))


def integrate(density: ScalarField, invariance_tol: float = 1e-6) -> complex:
    """Integral against the round measure of S^3 or of the lens quotient.

    The invariance guard is relative to max(1, sup). Third-derivative densities
    on fine grids carry ~1e-9 relative roundoff near the Hopf poles, while a
    mis-charged structure shows up at the size of its amplitude.
    """
    if isinstance(density, GridField) and np.isnan(density.values).any():
        raise ValueError("NaN samples in density")
    total = _sphere_integral(density)
    m = density.manifold
    if m.is_sphere:
        return total
    scale = max(1.0, density.sup())
    if density.charge_defect(0) > invariance_tol * scale:
        raise NonInvariantError(f"density is not invariant under the deck group of {m.kind}")
    return total / m.p


def integrate_fundamental_domain(density: GridField) -> complex:
    """Lens integral by quadrature restricted to xi1 in [0, 2 pi / p).

    A fundamental domain of (xi1, xi2) -> (xi1 + 2 pi/p, xi2 + 2 pi q/p) is
    [0, 2 pi/p) x [0, 2 pi); requires n_xi1 divisible by p.
    """
    m = density.manifold
    n1 = m.backend.n_xi1
    if n1 % m.p:
        raise BackendError(f"n_xi1 = {n1} is not divisible by p = {m.p}")
    w = density.geometry.weights
    cut = n1 // m.p
    return complex(np.sum(density.values[:, :cut] * w[:, :cut]))


def _check_unitary(g):
    g = np.asarray(g, dtype=complex)
    if g.shape != (2, 2) or not np.allclose(g.conj().T @ g, np.eye(2), atol=1e-12):
        raise ValueError("group element must be a unitary 2x2 matrix")
    return g


def group_pullback(f: ScalarField, g) -> ScalarField:
    """(g^* f)(z) = f(g z) for g in U(2)."""
    g = _check_unitary(g)
    m = f.manifold
    if isinstance(f, GridField):
        geo = f.geometry
        w1 = g[0, 0] * geo.z1 + g[0, 1] * geo.z2
        w2 = g[1, 0] * geo.z1 + g[1, 1] * geo.z2
        return GridField(m, f.evaluate(w1, w2), real=f.real)
    lin = {
        0: from_terms(m, {(1, 0, 0, 0): g[0, 0], (0, 0, 1, 0): g[0, 1]}, charge=None),
        2: from_terms(m, {(1, 0, 0, 0): g[1, 0], (0, 0, 1, 0): g[1, 1]}, charge=None),
    }
    lin[1] = lin[0].conj()
    lin[3] = lin[2].conj()
    powers = {k: [constant(m, 1.0)] for k in range(4)}
    out = constant(m, 0.0)
    for (a, b, c, d), coef in f.terms():
        term = constant(m, coef)
        for k, n in enumerate((a, b, c, d)):
            while len(powers[k]) <= n:
                powers[k].append(powers[k][-1] * lin[k])
            term = term * powers[k][n]
        out = out + term
    return out.as_real() if f.real else out


def load_snapshot(data, manifold: SampleManifold | None = None) -> ScalarField:
    """Inverse of ``field.snapshot()``; accepts a dict or a JSON string."""
    if isinstance(data, str):
        data = json.loads(data)
    real = bool(data.get("real_tag", False))
    if manifold is None:
        info = data["manifold"]
        if data["backend"] == "grid":
            backend = HopfGrid(*info["resolution"])
        else:
            backend = PolynomialExact(truncation=info.get("truncation", 10))
        manifold = SampleManifold(backend, info.get("p", 1), info.get("q", 0))
    if data["backend"] == "grid":
        shape = tuple(data["shape"])
        v = np.array(data["real"]).reshape(shape) + 1j * np.array(data["imag"]).reshape(shape)
        return GridField(manifold, v, real=real)
    terms = {(t["a"], t["b"], t["c"], t["d"]): complex(t["re"], t["im"]) for t in data["terms"]}
    return from_terms(manifold, terms, real=real, charge=None)


def random_polynomial(manifold: SampleManifold, rng, max_degree=3, n_terms=6, scale=1.0, real=False, charge=0):
    """Random monomial combination of total degree <= ``max_degree``.

    Coefficients are complex normal times ``scale``; ``real`` symmetrizes.
    """
    terms = {}
    for _ in range(n_terms):
        e = [0, 0, 0, 0]
        for _ in range(int(rng.integers(0, max_degree + 1))):
            e[int(rng.integers(0, 4))] += 1
        c = complex(rng.normal(), rng.normal()) * scale
        terms[tuple(e)] = terms.get(tuple(e), 0) + c
    f = from_terms(manifold, terms, charge=charge)
    return f.re if real else f
