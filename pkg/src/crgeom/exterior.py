"""Exterior calculus in a moving coframe (theta, theta^1, theta^1bar).

Forms are stored by their coefficients in the active coframe:

    degree 1:  theta, theta^1, theta^1bar
    degree 2:  theta^1 ^ theta^1bar, theta ^ theta^1, theta ^ theta^1bar
    degree 3:  theta ^ theta^1 ^ theta^1bar

A :class:`Coframe` is given by a 3x3 matrix M of scalar fields expressing its
basis 1-forms in the standard coframe.  Its dual frame, the structure 2-forms
d(basis) and the relation between the basis 3-form and the round measure are
computed once, at construction.
"""
from __future__ import annotations

from numbers import Number

import numpy as np

from .fields import GridField, PolyField, ScalarField, constant, frame_derivative, integrate

__all__ = [
    "Coframe",
    "FormField",
    "MatrixForm",
    "standard_coframe",
    "coframe_from_matrix",
    "wedge",
    "exterior_d",
    "matrix_wedge",
    "trace",
    "integrate_form",
    "DegreeError",
    "det3",
    "inv3",
]

NCOEF = {0: 1, 1: 3, 2: 3, 3: 1}
# (i, j) index pairs of the degree-2 basis
PAIRS = ((1, 2), (0, 1), (0, 2))


class DegreeError(ValueError):
    pass


def _is_zero(f: ScalarField) -> bool:
    if isinstance(f, GridField):
        return not f.values.any()
    if isinstance(f, PolyField):
        return f.size == 0
    return False


def det3(M):
    return (
        M[0][0] * (M[1][1] * M[2][2] - M[1][2] * M[2][1])
        - M[0][1] * (M[1][0] * M[2][2] - M[1][2] * M[2][0])
        + M[0][2] * (M[1][0] * M[2][1] - M[1][1] * M[2][0])
    )


def inv3(M, det=None):
    """Inverse of a 3x3 matrix of scalar fields (cofactor formula)."""
    det = det3(M) if det is None else det
    rdet = det.reciprocal()
    cof = [[None] * 3 for _ in range(3)]
    for i in range(3):
        for j in range(3):
            r = [k for k in range(3) if k != i]
            c = [k for k in range(3) if k != j]
            minor = M[r[0]][c[0]] * M[r[1]][c[1]] - M[r[0]][c[1]] * M[r[1]][c[0]]
            cof[i][j] = minor * ((-1) ** (i + j))
    return [[cof[j][i] * rdet for j in range(3)] for i in range(3)]


class Coframe:
    """A coframe (theta, theta^1, conj theta^1) on a sample manifold.

    Attributes
    ----------
    matrix : M with basis^a = sum_b M[a][b] * standard^b (None for the standard coframe)
    inverse : N = M^{-1}; the dual frame is X_c = sum_d N[d][c] * standard X_d
    dbasis : the three 2-forms d(theta), d(theta^1), d(theta^1bar), in this coframe
    volume : scalar with theta ^ theta^1 ^ theta^1bar = volume * (round measure)
    """

    def __init__(self, manifold, matrix=None, inverse=None, dbasis=None, volume=None, label=""):
        self.manifold = manifold
        self.matrix = matrix
        self.inverse = inverse
        self.label = label
        self.dbasis = dbasis
        self.volume = volume
        self._dpairs = None

    @property
    def is_standard(self) -> bool:
        return self.matrix is None

    def derivative(self, f: ScalarField, direction: int) -> ScalarField:
        """Apply the dual frame vector X_direction (0 = T, 1 = Z1, 2 = Z1bar)."""
        if self.is_standard:
            return frame_derivative(f, direction)
        if _is_zero(f):
            return f * 0.0
        out = None
        for d in range(3):
            n = self.inverse[d][direction]
            if _is_zero(n):
                continue
            term = n * frame_derivative(f, d)
            out = term if out is None else out + term
        return out if out is not None else f * 0.0

    def zero(self) -> ScalarField:
        return constant(self.manifold, 0.0)

    def one(self) -> ScalarField:
        return constant(self.manifold, 1.0)

    def basis(self, i: int) -> "FormField":
        c = [self.zero() for _ in range(3)]
        c[i] = self.one()
        return FormField(self, 1, c)

    @property
    def theta(self):
        return self.basis(0)

    @property
    def theta1(self):
        return self.basis(1)

    @property
    def theta1bar(self):
        return self.basis(2)

    def dpairs(self):
        """d of the degree-2 basis forms, as 3-form coefficients."""
        if self._dpairs is None:
            out = []
            for i, j in PAIRS:
                t = wedge(self.dbasis[i], self.basis(j)) - wedge(self.basis(i), self.dbasis[j])
                out.append(t.coeffs[0])
            self._dpairs = out
        return self._dpairs

    def structure_coefficient(self, a: int, b: int, c: int) -> ScalarField:
        """C with d(basis^a)(X_b, X_c); then [X_b, X_c] = -sum_a C^a_bc X_a."""
        return self.dbasis[a].evaluate_pair(b, c)

    def form(self, degree, coeffs) -> "FormField":
        return FormField(self, degree, coeffs)

    def zero_form(self, degree: int) -> "FormField":
        return FormField(self, degree, [self.zero() for _ in range(NCOEF[degree])])


def standard_coframe(manifold) -> Coframe:
    """theta = Im(conj(z).dz), theta^1 = z2 dz1 - z1 dz2, with d theta = i theta^1 ^ theta^1bar."""
    cf = Coframe(manifold, label="standard")
    z, one = cf.zero(), cf.one()
    cf.dbasis = [
        FormField(cf, 2, [one * 1j, z, z]),
        FormField(cf, 2, [z, one * 2j, z]),
        FormField(cf, 2, [z, z, one * -2j]),
    ]
    # theta ^ d theta = 2 dV on the round sphere, and d theta = i theta^1 ^ theta^1bar
    cf.volume = constant(manifold, -2j)
    return cf


def coframe_from_matrix(manifold, M, label="", det=None) -> Coframe:
    """Coframe whose basis is M applied to the standard coframe."""
    std = standard_coframe(manifold)
    det = det3(M) if det is None else det
    N = inv3(M, det)
    cf = Coframe(manifold, matrix=M, inverse=N, label=label)
    cf.volume = det * -2j
    # d(basis^a) = sum_b dM[a][b] ^ std^b + M[a][b] d(std^b), computed in the standard coframe
    dstd = []
    for a in range(3):
        acc = std.zero_form(2)
        for b in range(3):
            acc = acc + wedge(exterior_d(FormField(std, 0, [M[a][b]])), std.basis(b))
            acc = acc + std.dbasis[b] * M[a][b]
        dstd.append(acc)
    cf.dbasis = [reexpress(f, cf) for f in dstd]
    return cf


def reexpress(form: "FormField", target: Coframe) -> "FormField":
    """Rewrite a form given in the standard coframe in the basis of ``target``."""
    if not form.coframe.is_standard:
        raise ValueError("reexpress expects a form in the standard coframe")
    N = target.inverse
    # standard^b = sum_c N[b][c] basis^c
    hat = [FormField(target, 1, [N[b][0], N[b][1], N[b][2]]) for b in range(3)]
    if form.degree == 0:
        return FormField(target, 0, list(form.coeffs))
    if form.degree == 1:
        out = target.zero_form(1)
        for b in range(3):
            out = out + hat[b] * form.coeffs[b]
        return out
    if form.degree == 2:
        out = target.zero_form(2)
        for k, (i, j) in enumerate(PAIRS):
            out = out + wedge(hat[i], hat[j]) * form.coeffs[k]
        return out
    out = wedge(wedge(hat[0], hat[1]), hat[2])
    return out * form.coeffs[0]


class FormField:
    """A differential form of degree 0..3 in the basis of a coframe."""

    def __init__(self, coframe: Coframe, degree: int, coeffs):
        if degree not in NCOEF:
            raise DegreeError(f"degree {degree} outside 0..3")
        coeffs = list(coeffs)
        if len(coeffs) != NCOEF[degree]:
            raise ValueError(f"degree-{degree} form needs {NCOEF[degree]} coefficients")
        for c in coeffs:
            if c.manifold != coframe.manifold:
                raise ValueError("coefficient lives on a different manifold")
        self.coframe = coframe
        self.degree = degree
        self.coeffs = coeffs

    def _same(self, other):
        if other.coframe is not self.coframe or other.degree != self.degree:
            raise ValueError("forms must share coframe and degree")

    def __add__(self, other):
        self._same(other)
        return FormField(self.coframe, self.degree, [a + b for a, b in zip(self.coeffs, other.coeffs)])

    def __sub__(self, other):
        self._same(other)
        return FormField(self.coframe, self.degree, [a - b for a, b in zip(self.coeffs, other.coeffs)])

    def __neg__(self):
        return self * -1.0

    def __mul__(self, s):
        """Multiply by a number or a scalar field (a 0-form)."""
        if isinstance(s, FormField):
            return wedge(self, s)
        return FormField(self.coframe, self.degree, [c * s for c in self.coeffs])

    __rmul__ = __mul__

    def conj(self) -> "FormField":
        """Complex conjugate; theta is real and theta^1bar = conj(theta^1)."""
        c = [x.conj() for x in self.coeffs]
        if self.degree == 1:
            c = [c[0], c[2], c[1]]
        elif self.degree == 2:
            c = [-c[0], c[2], c[1]]
        elif self.degree == 3:
            c = [-c[0]]
        return FormField(self.coframe, self.degree, c)

    def sup(self) -> float:
        return max(c.sup() for c in self.coeffs)

    def __getitem__(self, i):
        return self.coeffs[i]

    def evaluate(self, i: int) -> ScalarField:
        """Value of a 1-form on the frame vector X_i."""
        if self.degree != 1:
            raise DegreeError("evaluate(i) is defined for 1-forms")
        return self.coeffs[i]

    def evaluate_pair(self, b: int, c: int) -> ScalarField:
        """Value of a 2-form on (X_b, X_c)."""
        if self.degree != 2:
            raise DegreeError("evaluate_pair is defined for 2-forms")
        if b == c:
            return self.coframe.zero()
        for k, (i, j) in enumerate(PAIRS):
            if (i, j) == (b, c):
                return self.coeffs[k]
            if (j, i) == (b, c):
                return -self.coeffs[k]
        raise IndexError((b, c))

    def reality_defect(self) -> float:
        return (self - self.conj()).sup()

    def snapshot(self) -> dict:
        labels = {
            0: ["1"],
            1: ["theta", "theta1", "theta1bar"],
            2: ["theta1^theta1bar", "theta^theta1", "theta^theta1bar"],
            3: ["theta^theta1^theta1bar"],
        }[self.degree]
        return {
            "degree": self.degree,
            "coframe": self.coframe.label,
            "basis": labels,
            "coefficients": [c.snapshot() for c in self.coeffs],
        }


def wedge(a: FormField, b: FormField) -> FormField:
    if a.coframe is not b.coframe:
        raise ValueError("wedge of forms in different coframes")
    p, q = a.degree, b.degree
    if p + q > 3:
        raise DegreeError(f"wedge of degrees {p} and {q} exceeds 3")
    cf = a.coframe
    if p == 0:
        return FormField(cf, q, [a.coeffs[0] * c for c in b.coeffs])
    if q == 0:
        return FormField(cf, p, [c * b.coeffs[0] for c in a.coeffs])
    x, y = a.coeffs, b.coeffs
    if p == 1 and q == 1:
        return FormField(cf, 2, [
            x[1] * y[2] - x[2] * y[1],
            x[0] * y[1] - x[1] * y[0],
            x[0] * y[2] - x[2] * y[0],
        ])
    if p == 1 and q == 2:
        return FormField(cf, 3, [x[0] * y[0] - x[1] * y[2] + x[2] * y[1]])
    # 2 ^ 1 = 1 ^ 2 (even degree commutes)
    return wedge(b, a)


def exterior_d(a: FormField) -> FormField:
    cf = a.coframe
    if cf.dbasis is None:
        raise ValueError("structure 2-forms of the coframe are not registered")
    if a.degree == 3:
        raise DegreeError("d of a 3-form vanishes identically on a 3-manifold; not represented")
    if a.degree == 0:
        f = a.coeffs[0]
        return FormField(cf, 1, [cf.derivative(f, i) for i in range(3)])
    if a.degree == 1:
        out = cf.zero_form(2)
        for i, c in enumerate(a.coeffs):
            if _is_zero(c):
                continue
            out = out + wedge(exterior_d(FormField(cf, 0, [c])), cf.basis(i)) + cf.dbasis[i] * c
        return out
    dp = cf.dpairs()
    total = None
    for k, (i, j) in enumerate(PAIRS):
        c = a.coeffs[k]
        if _is_zero(c):
            continue
        dc = exterior_d(FormField(cf, 0, [c]))
        term = wedge(dc, wedge(cf.basis(i), cf.basis(j))).coeffs[0] + c * dp[k]
        total = term if total is None else total + term
    return FormField(cf, 3, [total if total is not None else cf.zero()])


def integrate_form(a: FormField) -> complex:
    """Integral of a 3-form, oriented so that theta ^ d theta > 0."""
    if a.degree != 3:
        raise DegreeError("only 3-forms are integrated")
    return integrate(a.coeffs[0] * a.coframe.volume)


class MatrixForm:
    """A 3x3 matrix of forms of a common degree."""

    def __init__(self, entries):
        if len(entries) != 3 or any(len(r) != 3 for r in entries):
            raise ValueError("MatrixForm must be 3x3")
        degs = {e.degree for r in entries for e in r}
        if len(degs) != 1:
            raise DegreeError("matrix entries must share a degree")
        self.entries = [list(r) for r in entries]
        self.degree = degs.pop()
        self.coframe = entries[0][0].coframe

    def __getitem__(self, ij):
        i, j = ij
        return self.entries[i][j]

    def __add__(self, other):
        return MatrixForm([[a + b for a, b in zip(r, s)] for r, s in zip(self.entries, other.entries)])

    def __sub__(self, other):
        return MatrixForm([[a - b for a, b in zip(r, s)] for r, s in zip(self.entries, other.entries)])

    def d(self) -> "MatrixForm":
        return MatrixForm([[exterior_d(e) for e in r] for r in self.entries])

    def sup(self) -> float:
        return max(e.sup() for r in self.entries for e in r)

    def entry_sups(self) -> np.ndarray:
        return np.array([[e.sup() for e in r] for r in self.entries])


def matrix_wedge(A: MatrixForm, B: MatrixForm) -> MatrixForm:
    if A.coframe is not B.coframe:
        raise ValueError("matrix forms live in different coframes")
    out = []
    for i in range(3):
        row = []
        for k in range(3):
            acc = None
            for j in range(3):
                t = wedge(A.entries[i][j], B.entries[j][k])
                acc = t if acc is None else acc + t
            row.append(acc)
        out.append(row)
    return MatrixForm(out)


def trace(A: MatrixForm) -> FormField:
    return A.entries[0][0] + A.entries[1][1] + A.entries[2][2]
