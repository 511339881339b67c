"""
Matrix polynomials generated by the block three-term recurrence

    P_{n+1}(x) = D_n^{-1} (x P_n(x) - B_n P_n(x) - C_{n-1} P_{n-1}(x)),

with P_{-1} = 0, P_0 = I and the final super block taken as D_{L-1} = I.

Polynomials are stored by their coefficient matrices (ascending powers).
For pointwise work at many abscissae the recurrence itself is usually the
better evaluator, so sequences also expose recurrence-based evaluation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import BlockTridiagonalMatrix, validate

TRIM_TOL = 1e-10
CHOP_TOL = 1e-14


@dataclass(frozen=True, eq=False)
class MatrixPolynomial:
    """K x K matrix polynomial; ``coeffs[j]`` multiplies x**j."""

    coeffs: np.ndarray

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=complex)
        if c.ndim != 3 or c.shape[1] != c.shape[2]:
            raise ValueError(f"coeffs must have shape (deg+1, K, K), got {c.shape}")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @property
    def k(self) -> int:
        return self.coeffs.shape[1]

    @property
    def degree(self) -> int:
        return self.coeffs.shape[0] - 1

    def __call__(self, x: complex) -> np.ndarray:
        return evaluate(self, x)

    def evaluate_batch(self, xs) -> np.ndarray:
        """Horner evaluation at each point of ``xs``; returns (m, K, K)."""
        xs = np.asarray(xs, dtype=complex).reshape(-1)
        out = np.broadcast_to(self.coeffs[-1], (xs.size, self.k, self.k)).copy()
        for c in self.coeffs[-2::-1]:
            out = out * xs[:, None, None] + c
        return out

    def derivative(self, r: int = 1) -> "MatrixPolynomial":
        return derivative(self, r)

    def leading(self) -> np.ndarray:
        return self.coeffs[-1]


def evaluate(p: MatrixPolynomial, x: complex) -> np.ndarray:
    """Horner evaluation of a matrix polynomial at a scalar."""
    out = p.coeffs[-1].copy()
    for c in p.coeffs[-2::-1]:
        out = out * x + c
    return out


def derivative(p: MatrixPolynomial, r: int) -> MatrixPolynomial:
    """Coefficientwise r-th derivative.  Returns the zero polynomial when r > degree."""
    if r < 0:
        raise ValueError("derivative order must be non-negative")
    if r == 0:
        return p
    d = p.degree
    if r > d:
        return MatrixPolynomial(np.zeros((1, p.k, p.k), dtype=complex))
    j = np.arange(r, d + 1)
    factor = np.array([math.perm(int(i), r) for i in j], dtype=float)
    return MatrixPolynomial(p.coeffs[r:] * factor[:, None, None])


@dataclass(frozen=True, eq=False)
class ScalarPolynomial:
    """Scalar polynomial with ascending coefficients.

    ``scale`` is a typical root magnitude; trimming and chopping compare the
    scaled coefficients ``coeffs[j] * scale**j`` so that the tolerances are
    insensitive to the units of x.
    """

    coeffs: np.ndarray
    scale: float = 1.0

    def __post_init__(self):
        c = np.atleast_1d(np.array(self.coeffs, dtype=complex))
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @property
    def degree(self) -> int:
        return self.coeffs.size - 1

    def __call__(self, x):
        return np.polynomial.polynomial.polyval(x, self.coeffs)

    def scaled(self) -> np.ndarray:
        return self.coeffs * self.scale ** np.arange(self.coeffs.size)

    def trimmed(self, tol: float = TRIM_TOL) -> "ScalarPolynomial":
        s = np.abs(self.scaled())
        top = s.max(initial=0.0)
        if top == 0.0:
            return ScalarPolynomial(self.coeffs[:1], self.scale)
        keep = int(np.nonzero(s > tol * top)[0][-1]) + 1
        return ScalarPolynomial(self.coeffs[:keep], self.scale)

    def chopped(self, tol: float = CHOP_TOL) -> "ScalarPolynomial":
        """Zero the coefficients that sit at round-off level relative to the largest one."""
        s = np.abs(self.scaled())
        c = np.array(self.coeffs)
        c[s <= tol * s.max(initial=0.0)] = 0
        return ScalarPolynomial(c, self.scale)

    def monic(self) -> "ScalarPolynomial":
        t = self.trimmed()
        if t.coeffs[-1] == 0:
            raise ValueError("zero polynomial has no monic normalization")
        return ScalarPolynomial(t.coeffs / t.coeffs[-1], self.scale)


@dataclass(frozen=True, eq=False)
class MatrixPolynomialSequence:
    """P_0 .. P_L for a block tridiagonal matrix (``flavor`` is ``standard`` or ``tilde``).

    For the tilde flavor ``source`` is the original matrix and ``recurrence``
    is its block transpose, which is what actually drives the recurrence.
    """

    source: BlockTridiagonalMatrix
    polys: tuple
    flavor: str = "standard"

    @property
    def recurrence(self) -> BlockTridiagonalMatrix:
        return self.source if self.flavor == "standard" else self.source.transpose()

    @property
    def k(self) -> int:
        return self.source.k

    @property
    def l(self) -> int:
        return self.source.l

    def __getitem__(self, n: int) -> MatrixPolynomial:
        return self.polys[n]

    def __len__(self) -> int:
        return len(self.polys)

    def values(self, xs, with_derivative: bool = False):
        """P_0(x) .. P_L(x) by running the recurrence numerically.

        Returns an array of shape (L+1, m, K, K) for m points (and the same
        shape for the derivatives when requested).
        """
        return recurrence_values(self.recurrence, xs, with_derivative)

    def stacked(self, x: complex, h: np.ndarray, upto: int | None = None) -> np.ndarray:
        """Rows blocks P_0(x) h, ..., P_{L-1}(x) h stacked into an (L K, a) matrix.

        Runs the recurrence on the K x a seed directly, O(L K^2 a).
        """
        a = self.recurrence
        h = np.asarray(h, dtype=complex)
        if h.ndim == 1:
            h = h[:, None]
        upto = self.l if upto is None else upto
        out = np.zeros((upto, a.k, h.shape[1]), dtype=complex)
        prev = np.zeros_like(h)
        cur = h
        for n in range(upto):
            out[n] = cur
            if n == upto - 1:
                break
            t = x * cur - a.diag[n] @ cur
            if n > 0:
                t -= a.sub[n - 1] @ prev
            prev, cur = cur, np.linalg.solve(a.sup[n], t)
        return out.reshape(upto * a.k, h.shape[1])

    def last(self) -> "RecurrencePolynomial":
        """P_L as an evaluator that runs the recurrence rather than Horner."""
        return RecurrencePolynomial(self)

    def log_derivative(self, xs) -> np.ndarray:
        """tr(P_L(x)^{-1} P_L'(x)) = (det P_L)'(x) / det P_L(x) at each point.

        Exactly singular P_L(x) yields ``inf``.
        """
        p, dp = self.values(xs, with_derivative=True)
        pl, dpl = p[-1], dp[-1]
        try:
            return np.trace(np.linalg.solve(pl, dpl), axis1=1, axis2=2)
        except np.linalg.LinAlgError:
            pass
        out = np.empty(pl.shape[0], dtype=complex)
        for i in range(pl.shape[0]):
            try:
                out[i] = np.trace(np.linalg.solve(pl[i], dpl[i]))
            except np.linalg.LinAlgError:
                out[i] = np.inf
        return out

    def determinant_polynomial(self, trim: bool = True) -> ScalarPolynomial:
        a = self.recurrence
        radius = a.frobenius_norm() / math.sqrt(a.n)
        return determinant_polynomial(self.last(), radius=radius if radius > 0 else 1.0, trim=trim)

    def determinant_leading(self) -> complex:
        """Leading coefficient of det P_L, exactly 1 / prod det D_n."""
        a = self.recurrence
        return complex(1 / np.prod(np.linalg.det(a.sup))) if a.l > 1 else 1.0


@dataclass(frozen=True, eq=False)
class RecurrencePolynomial:
    seq: MatrixPolynomialSequence

    @property
    def k(self) -> int:
        return self.seq.k

    @property
    def degree(self) -> int:
        return self.seq.l

    def evaluate_batch(self, xs) -> np.ndarray:
        return self.seq.values(xs)[-1]

    def __call__(self, x: complex) -> np.ndarray:
        return self.evaluate_batch([x])[0]


def _solve_left(d: np.ndarray, t: np.ndarray) -> np.ndarray:
    # D^{-1} t for a stack t of shape (m, K, a) with one LAPACK call
    m, k, c = t.shape
    x = np.linalg.solve(d, t.transpose(1, 0, 2).reshape(k, m * c))
    return x.reshape(k, m, c).transpose(1, 0, 2)


def recurrence_values(a: BlockTridiagonalMatrix, xs, with_derivative: bool = False):
    xs = np.asarray(xs, dtype=complex).reshape(-1)
    m, k, l = xs.size, a.k, a.l
    eye = np.broadcast_to(np.eye(k, dtype=complex), (m, k, k))
    vals = np.zeros((l + 1, m, k, k), dtype=complex)
    ders = np.zeros_like(vals) if with_derivative else None
    vals[0] = eye
    xcol = xs[:, None, None]
    for n in range(l):
        t = xcol * vals[n] - a.diag[n] @ vals[n]
        if n > 0:
            t -= a.sub[n - 1] @ vals[n - 1]
        if with_derivative:
            dt = vals[n] + xcol * ders[n] - a.diag[n] @ ders[n]
            if n > 0:
                dt -= a.sub[n - 1] @ ders[n - 1]
        if n < l - 1:
            t = _solve_left(a.sup[n], t)
            if with_derivative:
                dt = _solve_left(a.sup[n], dt)
        vals[n + 1] = t
        if with_derivative:
            ders[n + 1] = dt
    return (vals, ders) if with_derivative else vals


def _generate(a: BlockTridiagonalMatrix) -> tuple:
    k, l = a.k, a.l
    eye = np.eye(k, dtype=complex)
    polys = [np.array([eye])]
    prev = np.zeros((1, k, k), dtype=complex)
    for n in range(l):
        cur = polys[-1]
        t = np.zeros((n + 2, k, k), dtype=complex)
        t[1:] += cur
        t[:-1] -= a.diag[n] @ cur
        if n > 0:
            t[:prev.shape[0]] -= a.sub[n - 1] @ prev
        if n < l - 1:
            t = np.linalg.solve(a.sup[n][None], t)
        prev = cur
        polys.append(t)
    return tuple(MatrixPolynomial(c) for c in polys)


def generate_sequence(a: BlockTridiagonalMatrix, tol: float = 1e-12) -> MatrixPolynomialSequence:
    """P_0 .. P_L in coefficient form.  Raises ValidationError on a singular D_n."""
    validate(a, tol).raise_if_failed()
    return MatrixPolynomialSequence(a, _generate(a), "standard")


def generate_tilde_sequence(a: BlockTridiagonalMatrix, tol: float = 1e-12) -> MatrixPolynomialSequence:
    """Sequence for the block transpose (B_n^T diagonal, D_n^T sub, C_n^T super).

    Needs every C_n non-singular; raises ValidationError naming the block otherwise.
    """
    report = validate(a, tol)
    report.require_sub_invertible()
    return MatrixPolynomialSequence(a, _generate(a.transpose()), "tilde")


def three_term_residual(seq: MatrixPolynomialSequence, x: complex) -> float:
    """max_n ||x P_n - C_{n-1} P_{n-1} - B_n P_n - D_n P_{n+1}||_F, using D_{L-1} = I."""
    a = seq.recurrence
    vals = [evaluate(p, x) for p in seq.polys]
    worst = 0.0
    for n in range(a.l):
        d = a.sup[n] if n < a.l - 1 else np.eye(a.k)
        r = x * vals[n] - a.diag[n] @ vals[n] - d @ vals[n + 1]
        if n > 0:
            r -= a.sub[n - 1] @ vals[n - 1]
        worst = max(worst, float(np.linalg.norm(r)))
    return worst


def _default_radius(p) -> float:
    # geometric mean of the root magnitudes, |det P(0) / det lead|^(1/(Kn));
    # the matrix-norm root bound overestimates badly and wastes interpolation accuracy
    c = getattr(p, "coeffs", None)
    if c is None or p.degree == 0:
        return 1.0
    m = p.k * p.degree
    s0, lead = np.linalg.slogdet(c[0]), np.linalg.slogdet(c[-1])
    if s0[0] != 0 and lead[0] != 0:
        return float(np.exp((s0[1] - lead[1]) / m))
    try:
        lead_inv = np.linalg.inv(c[-1])
    except np.linalg.LinAlgError:
        return 1.0
    d = p.degree
    est = max((np.linalg.norm(lead_inv @ c[j], 2) ** (1.0 / (d - j)) for j in range(d)), default=1.0)
    return float(est) if est > 0 else 1.0


def determinant_polynomial(p, radius: float | None = None, trim: bool = True) -> ScalarPolynomial:
    """det P(x) by evaluation at Kn+1 points on a circle of ``radius`` and FFT interpolation.

    ``p`` is a MatrixPolynomial or any evaluator with ``k``, ``degree`` and
    ``evaluate_batch``.  Coefficients that sit at round-off level relative to
    the largest scaled coefficient are chopped to zero.
    """
    r = _default_radius(p) if radius is None else float(radius)
    if not r > 0:
        raise ValueError("radius must be positive")
    m = p.k * p.degree + 1
    nodes = r * np.exp(2j * np.pi * np.arange(m) / m)
    assert m == 1 or np.min(np.abs(np.diff(nodes))) > 0, "interpolation nodes collide"
    values = np.linalg.det(p.evaluate_batch(nodes))
    scaled = np.fft.fft(values) / m
    coeffs = scaled / r ** np.arange(m)
    out = ScalarPolynomial(coeffs, r).chopped()
    return out.trimmed() if trim else out
