"""
Eigenvalues and eigenvectors of a block tridiagonal matrix from its matrix
polynomials.

The eigenvalues are the zeros of det P_L(x); for each distinct zero the
eigenvectors are the columns of stack(P_0(lam) H, ..., P_{L-1}(lam) H), where
H spans ker P_L(lam).  The inverse eigenvector matrix comes from the same
construction applied to the block transpose.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import BlockTridiagonalMatrix, NumericalError, matvec, validate
from .matpoly import (MatrixPolynomialSequence, ScalarPolynomial, generate_sequence,
                      generate_tilde_sequence)

CLUSTER_TOL = 1e-6
NULL_TOL = 1e-8
_EPS = np.finfo(float).eps


@dataclass(frozen=True, eq=False)
class Spectrum:
    """Distinct eigenvalues (sorted by real, then imaginary part) with root multiplicities."""

    eigenvalues: np.ndarray
    multiplicities: tuple
    cluster_tol: float
    roots: np.ndarray = field(default=None, repr=False)

    @property
    def m(self) -> int:
        return len(self.multiplicities)

    @property
    def total(self) -> int:
        return int(sum(self.multiplicities))

    def expanded(self) -> np.ndarray:
        """Each eigenvalue repeated by its multiplicity."""
        return np.repeat(self.eigenvalues, self.multiplicities)

    def to_dict(self) -> dict:
        return {"cluster_tol": self.cluster_tol,
                "eigenvalues": [{"lambda": [float(z.real), float(z.imag)], "multiplicity": int(a)}
                                for z, a in zip(self.eigenvalues, self.multiplicities)]}


@dataclass(frozen=True, eq=False)
class NullspaceBasis:
    eigenvalue: complex
    basis: np.ndarray
    residual: float
    singular_values: np.ndarray = field(repr=False, default=None)

    @property
    def dim(self) -> int:
        return self.basis.shape[1]


# --- roots -------------------------------------------------------------------

def _companion_roots(p: ScalarPolynomial) -> np.ndarray:
    c = p.coeffs
    nz = int(np.nonzero(c)[0][0])
    zeros = np.zeros(nz, dtype=complex)
    c = c[nz:]
    if c.size == 1:
        return zeros
    if c.size == 2:
        return np.concatenate([zeros, [-c[0] / c[1]]])
    comp = np.polynomial.polynomial.polycompanion(c / c[-1])
    return np.concatenate([zeros, np.linalg.eigvals(comp)])


def aberth_refine(z: np.ndarray, log_derivative, max_iter: int = 400, tol: float = 4 * _EPS) -> np.ndarray:
    """Simultaneous Aberth-Ehrlich refinement of all roots of f, given x -> f'(x)/f(x).

    Points where f is exactly zero (infinite log-derivative) are kept.  A
    degenerate step (division by zero in a symmetric configuration, or a
    jump far out) is replaced by a small deterministic nudge.
    """
    z = np.array(z, dtype=complex)
    active = np.ones(z.size, dtype=bool)
    nudge = np.exp(2j * np.pi * 0.6180339887498949 * np.arange(z.size))
    last = np.full(z.size, np.inf)
    stall = np.zeros(z.size, dtype=int)
    for _ in range(max_iter):
        idx = np.nonzero(active)[0]
        if idx.size == 0:
            break
        t = np.asarray(log_derivative(z[idx]), dtype=complex)
        exact = ~np.isfinite(t)
        diff = z[idx, None] - z[None, :]
        with np.errstate(divide="ignore", invalid="ignore"):
            inv = np.where(diff == 0, 0, 1 / diff)
            w = 1 / (t - inv.sum(axis=1))
        size = 1 + np.abs(z[idx])
        bad = ~exact & (~np.isfinite(w) | (np.abs(w) > 1e3 * size))
        w[exact] = 0
        w[bad] = 1e-3 * size[bad] * nudge[idx[bad]]
        z[idx] -= w
        # small steps that stop shrinking mean the root sits in its noise disk
        aw = np.abs(w)
        slow = ~bad & (aw <= 1e-9 * size) & (aw >= 0.5 * last[idx])
        stall[idx] = np.where(slow, stall[idx] + 1, stall[idx])
        last[idx] = np.where(bad, last[idx], np.minimum(last[idx], aw))
        done = exact | (~bad & (aw <= tol * size)) | (stall[idx] >= 3)
        active[idx[done]] = False
    return z


def cluster_roots(roots: np.ndarray, cluster_tol: float):
    """Single-linkage merge of roots within cluster_tol * (1 + |root|); returns (means, counts)."""
    roots = np.asarray(roots, dtype=complex)
    n = roots.size
    if n == 0:
        return np.zeros(0, dtype=complex), ()
    scale = 1 + np.maximum(np.abs(roots)[:, None], np.abs(roots)[None, :])
    close = np.abs(roots[:, None] - roots[None, :]) <= cluster_tol * scale
    label = -np.ones(n, dtype=int)
    current = 0
    for i in range(n):
        if label[i] >= 0:
            continue
        stack = [i]
        label[i] = current
        while stack:
            j = stack.pop()
            for q in np.nonzero(close[j] & (label < 0))[0]:
                label[q] = current
                stack.append(q)
        current += 1
    means = np.array([roots[label == c].mean() for c in range(current)])
    counts = np.array([int(np.sum(label == c)) for c in range(current)])
    order = np.lexsort((means.imag, means.real))
    return means[order], tuple(int(c) for c in counts[order])


def _polish_simple(means, counts, log_derivative, iters: int = 3):
    # multiple roots are left at the cluster mean, which is better conditioned
    # than any single point near the root
    out = np.array(means, dtype=complex)
    simple = np.asarray(counts) == 1
    for _ in range(iters):
        if not simple.any():
            break
        t = np.asarray(log_derivative(out[simple]), dtype=complex)
        with np.errstate(divide="ignore", invalid="ignore"):
            step = 1 / t
        ok = np.isfinite(step) & (np.abs(step) <= 1e-6 * (1 + np.abs(out[simple])))
        idx = np.nonzero(simple)[0][ok]
        out[idx] -= step[ok]
    return out


def _contour_centroids(means, counts, log_derivative, nodes: int = 32):
    # For a multiple root, f'/f is noise inside a disk of radius ~ eps^(1/b) around
    # it but accurate on a circle that encloses the cluster at a safe distance.
    # There (1/2 pi i) \oint z f'/f dz / b is the cluster centroid, and the
    # trapezoid rule converges geometrically.
    out = np.array(means, dtype=complex)
    counts = np.asarray(counts)
    theta = np.exp(2j * np.pi * (np.arange(nodes) + 0.5) / nodes)
    for i in np.nonzero(counts > 1)[0]:
        c = out[i]
        if not np.isfinite(np.asarray(log_derivative(np.array([c])))[0]):
            continue
        others = np.abs(np.delete(out, i) - c)
        gap = others.min() if others.size else np.inf
        rho = min(0.3 * gap, 1e-2 * (1 + abs(c)))
        w = rho * theta
        t = np.asarray(log_derivative(c + w), dtype=complex)
        if not np.all(np.isfinite(t)):
            continue
        count = np.mean(t * w)
        if abs(count - counts[i]) > 0.1:
            continue
        out[i] = c + np.mean(t * w * w) / count
    return out


def find_zeros(p: ScalarPolynomial, cluster_tol: float = CLUSTER_TOL, log_derivative=None,
               trim: bool = True) -> Spectrum:
    """Roots of ``p`` from the companion matrix of its monic normalization, clustered.

    When ``log_derivative`` (x -> p'(x)/p(x), possibly computed by a better
    route than the coefficients) is given, the companion roots are refined by
    Aberth iteration before clustering; simple roots then get a final Newton
    step and multiple roots a contour-integral centroid.  With ``trim=False``
    the degree is taken as given (the leading coefficient must be nonzero).
    """
    if cluster_tol <= 0:
        raise ValueError("cluster_tol must be positive")
    t = p.trimmed() if trim else p
    if t.degree < 1:
        raise ValueError(f"polynomial of degree {t.degree} has no roots to find")
    if t.coeffs[-1] == 0:
        raise ValueError("leading coefficient is zero")
    roots = _companion_roots(ScalarPolynomial(t.coeffs / t.coeffs[-1], t.scale))
    if log_derivative is not None:
        # break exact symmetries of the starting set; zeros that f confirms stay exact
        jitter = np.exp(2j * np.pi * 0.6180339887498949 * np.arange(roots.size))
        step = 1e-6 * (1 + np.abs(roots)) * jitter
        zero = roots == 0
        if zero.any() and np.isfinite(np.asarray(log_derivative(np.zeros(1)))[0]):
            zero[:] = False
        roots = aberth_refine(np.where(zero, 0, roots + step), log_derivative)
    means, counts = cluster_roots(roots, cluster_tol)
    if log_derivative is not None:
        means = _polish_simple(means, counts, log_derivative)
        means = _contour_centroids(means, counts, log_derivative)
        order = np.lexsort((means.imag, means.real))
        means, counts = means[order], tuple(counts[i] for i in order)
    return Spectrum(means, counts, cluster_tol, roots)


def compute_spectrum(seq: MatrixPolynomialSequence, cluster_tol: float = CLUSTER_TOL,
                     refine: bool = True) -> Spectrum:
    """Zeros of det P_L for a standard or tilde sequence.

    The degree is exactly N and the leading coefficient is known in closed
    form, so neither is inferred from the interpolated coefficients.
    """
    n = seq.k * seq.l
    p = seq.determinant_polynomial(trim=False)
    c = np.zeros(n + 1, dtype=complex)
    c[:min(n + 1, p.coeffs.size)] = p.coeffs[:n + 1]
    c[n] = seq.determinant_leading()
    return find_zeros(ScalarPolynomial(c, p.scale), cluster_tol, seq.log_derivative if refine else None,
                      trim=False)


# --- null spaces and eigenvectors ---------------------------------------------

def nullspace_basis(mat: np.ndarray, tol: float = NULL_TOL, eigenvalue: complex = 0j,
                    scale: float = 0.0) -> NullspaceBasis:
    """Orthonormal basis of the numerical null space, from the SVD.

    Singular values ``<= tol * max(sigma_max, scale)`` count as zero.  Pass
    ``scale`` when ``mat`` is the result of cancellation and may vanish
    entirely (sigma_max alone is then no reference); a zero matrix with no
    scale has the full space as its null space.
    """
    mat = np.asarray(mat, dtype=complex)
    k = mat.shape[1]
    _, s, vh = np.linalg.svd(mat)
    smax = max(s[0] if s.size else 0.0, scale)
    if smax == 0:
        basis = np.eye(k, dtype=complex)
    else:
        full = np.zeros(k)
        full[:s.size] = s
        basis = vh[full <= tol * smax].conj().T
    residual = float(np.linalg.norm(mat @ basis, 2)) if basis.size else 0.0
    return NullspaceBasis(complex(eigenvalue), basis, residual, s)


def eigenvectors_for(seq: MatrixPolynomialSequence, lam: complex, h: NullspaceBasis) -> np.ndarray:
    """stack(P_0(lam) H, ..., P_{L-1}(lam) H); columns are not normalized."""
    return seq.stacked(lam, h.basis)


def p_last(seq: MatrixPolynomialSequence, lam: complex):
    """P_L(lam) and a reference size for the terms that cancel in it.

    The scale is (|lam| + max block norm) * max_n ||P_n(lam)||, which stays
    away from zero at an eigenvalue (P_0 = I).
    """
    vals = seq.values([lam])[:, 0]
    a = seq.recurrence
    blocks = max(float(np.linalg.norm(x, 2, axis=(1, 2)).max(initial=0.0)) for x in (a.diag, a.sub, a.sup))
    scale = (abs(lam) + blocks) * float(np.linalg.norm(vals, 2, axis=(1, 2)).max())
    return vals[-1], scale


def _basis_at(seq, lam, null_tol) -> NullspaceBasis:
    mat, scale = p_last(seq, lam)
    return nullspace_basis(mat, null_tol, lam, scale)


@dataclass(frozen=True, eq=False)
class EigendecompositionResult:
    """V with columns grouped by eigenvalue, the per-column eigenvalues and diagnostics."""

    matrix: BlockTridiagonalMatrix
    spectrum: Spectrum
    bases: tuple
    V: np.ndarray
    eigenvalues: np.ndarray
    residual_AV: float
    W: np.ndarray | None = None
    residual_WV: float | None = None
    offblock_W0V: float | None = None

    @property
    def Lambda(self) -> np.ndarray:
        return np.diag(self.eigenvalues)

    def column_slices(self):
        start = 0
        for h in self.bases:
            yield slice(start, start + h.dim)
            start += h.dim

    def with_inverse(self, W, residual_WV, offblock) -> "EigendecompositionResult":
        return EigendecompositionResult(self.matrix, self.spectrum, self.bases, self.V, self.eigenvalues,
                                        self.residual_AV, W, residual_WV, offblock)

    def normalized(self, orthonormalize: bool = False) -> "EigendecompositionResult":
        """Unit-norm columns; optionally orthonormalize within each eigenvalue group (QR)."""
        v = self.V.copy()
        for sl in self.column_slices():
            block = v[:, sl]
            if orthonormalize:
                q, _ = np.linalg.qr(block)
                v[:, sl] = q
            else:
                v[:, sl] = block / np.linalg.norm(block, axis=0)
        return EigendecompositionResult(self.matrix, self.spectrum, self.bases, v, self.eigenvalues,
                                        _residual_av(self.matrix, v, self.eigenvalues))

    def to_dict(self) -> dict:
        groups = []
        for lam, h, sl in zip(self.spectrum.eigenvalues, self.bases, self.column_slices()):
            vec = self.V[:, sl]
            groups.append({"lambda": [float(lam.real), float(lam.imag)], "multiplicity": h.dim,
                           "vectors": [[[float(z.real), float(z.imag)] for z in row] for row in vec]})
        out = {"eigenvalues": groups, "residual_AV": self.residual_AV, "residual_WV": self.residual_WV}
        if self.offblock_W0V is not None:
            out["offblock_W0V"] = self.offblock_W0V
        return out


@dataclass(frozen=True, eq=False)
class DefectReport:
    """Outcome when the eigenvectors do not span C^N."""

    matrix: BlockTridiagonalMatrix
    spectrum: Spectrum
    bases: tuple
    deficient: tuple   # (index, eigenvalue, algebraic, geometric)

    @property
    def geometric_total(self) -> int:
        return sum(h.dim for h in self.bases)

    def to_dict(self) -> dict:
        return {"diagonalizable": False, "n": self.matrix.n, "geometric_total": self.geometric_total,
                "deficient": [{"index": i, "lambda": [float(z.real), float(z.imag)],
                               "algebraic": a, "geometric": g} for i, z, a, g in self.deficient]}


def _residual_av(a: BlockTridiagonalMatrix, v: np.ndarray, lam: np.ndarray) -> float:
    norm_a = a.frobenius_norm()
    r = np.linalg.norm(matvec(a, v) - v * lam[None, :])
    return float(r / norm_a) if norm_a > 0 else float(r)


def eigen_bases(seq: MatrixPolynomialSequence, spectrum: Spectrum, null_tol: float = NULL_TOL) -> tuple:
    return tuple(_basis_at(seq, lam, null_tol) for lam in spectrum.eigenvalues)


def eigenvector_matrix(a: BlockTridiagonalMatrix, *, tol_validate: float = 1e-12, null_tol: float = NULL_TOL,
                       cluster_tol: float = CLUSTER_TOL, seq: MatrixPolynomialSequence | None = None,
                       spectrum: Spectrum | None = None):
    """Eigenvector matrix assembled blockwise from P_n(lam_m) H_m.

    Returns an EigendecompositionResult, or a DefectReport when the null
    spaces of P_L at the eigenvalues do not add up to N.
    """
    seq = seq if seq is not None else generate_sequence(a, tol_validate)
    spectrum = spectrum if spectrum is not None else compute_spectrum(seq, cluster_tol)
    bases = eigen_bases(seq, spectrum, null_tol)
    for i, (h, b) in enumerate(zip(bases, spectrum.multiplicities)):
        if h.dim == 0:
            raise NumericalError(f"eigenvalue {i} ({spectrum.eigenvalues[i]:.6g}) has an empty null space "
                                 f"at null_tol={null_tol:g}")
        if h.dim > b:
            raise NumericalError(f"eigenvalue {i}: null space dimension {h.dim} exceeds root multiplicity {b}")
    if sum(h.dim for h in bases) < a.n:
        deficient = tuple((i, complex(lam), int(b), h.dim) for i, (lam, b, h)
                          in enumerate(zip(spectrum.eigenvalues, spectrum.multiplicities, bases)) if h.dim < b)
        return DefectReport(a, spectrum, bases, deficient)
    v = np.hstack([eigenvectors_for(seq, lam, h) for lam, h in zip(spectrum.eigenvalues, bases)])
    lam_cols = np.concatenate([np.full(h.dim, lam) for lam, h in zip(spectrum.eigenvalues, bases)])
    return EigendecompositionResult(a, spectrum, bases, v, lam_cols, _residual_av(a, v, lam_cols))


def offblock_norm(prod: np.ndarray, dims) -> float:
    """Frobenius norm of ``prod`` outside the diagonal blocks of sizes ``dims``."""
    mask = np.ones(prod.shape, dtype=bool)
    start = 0
    for d in dims:
        mask[start:start + d, start:start + d] = False
        start += d
    return float(np.linalg.norm(prod[mask]))


def inverse_eigenvector_matrix(a: BlockTridiagonalMatrix, result: EigendecompositionResult, *,
                               tol_validate: float = 1e-12, null_tol: float = NULL_TOL):
    """W = V^{-1} from the transposed-block polynomials, with biorthogonal normalization.

    Row block m of W0 = (stack P~_n(lam_m) H~_m)^T is replaced by G_m^{-1} times
    itself, where G_m is the m-th diagonal block of W0 V.  Returns
    ``(W, residual_WV, offblock)``; ``offblock`` measures W0 V outside its
    eigenvalue blocks after scaling rows of W0 and columns of V to unit norm.
    """
    tseq = generate_tilde_sequence(a, tol_validate)
    v = result.V
    rows = []
    for i, (lam, h) in enumerate(zip(result.spectrum.eigenvalues, result.bases)):
        ht = _basis_at(tseq, lam, null_tol)
        if ht.dim != h.dim:
            raise NumericalError(f"eigenvalue {i}: left null space dimension {ht.dim} != right {h.dim}")
        rows.append(tseq.stacked(lam, ht.basis).T)
    w0 = np.vstack(rows)
    dims = [h.dim for h in result.bases]
    wn = w0 / np.linalg.norm(w0, axis=1, keepdims=True)
    vn = v / np.linalg.norm(v, axis=0, keepdims=True)
    offblock = offblock_norm(wn @ vn, dims)
    w = np.empty_like(w0)
    for i, sl in enumerate(result.column_slices()):
        g = w0[sl] @ v[:, sl]
        if np.linalg.cond(g) > 1 / (64 * _EPS):
            raise NumericalError(f"eigenvalue {i}: coupling block W0 V is singular")
        w[sl] = np.linalg.solve(g, w0[sl])
    residual = float(np.linalg.norm(w @ v - np.eye(v.shape[1])))
    return w, residual, offblock


def decompose(a: BlockTridiagonalMatrix, *, inverse: bool = False, tol_validate: float = 1e-12,
              null_tol: float = NULL_TOL, cluster_tol: float = CLUSTER_TOL):
    """eigenvector_matrix plus, on request, the inverse."""
    res = eigenvector_matrix(a, tol_validate=tol_validate, null_tol=null_tol, cluster_tol=cluster_tol)
    if inverse and isinstance(res, EigendecompositionResult):
        w, rwv, off = inverse_eigenvector_matrix(a, res, tol_validate=tol_validate, null_tol=null_tol)
        res = res.with_inverse(w, rwv, off)
    return res


# --- commuting blocks -----------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ChannelResult:
    spectrum: Spectrum
    channels: tuple   # one ScalarPolynomial of degree L per diagonal channel


def commuting_fast_path(a: BlockTridiagonalMatrix, u: np.ndarray, cluster_tol: float = CLUSTER_TOL,
                        diag_tol: float = 1e-10) -> ChannelResult:
    """Spectrum of a matrix whose blocks are simultaneously diagonalized by ``u``.

    Each diagonal channel obeys a scalar three-term recurrence, so det P_L
    factors into K scalar polynomials of degree L whose roots are found
    separately and merged.
    """
    u = np.asarray(u, dtype=complex)
    uinv = np.linalg.inv(u)
    conj = {}
    for name, blocks in (("B", a.diag), ("C", a.sub), ("D", a.sup)):
        t = uinv[None] @ blocks @ u[None] if len(blocks) else np.zeros((0, a.k, a.k))
        for i, blk in enumerate(t):
            off = blk - np.diag(np.diag(blk))
            if np.linalg.norm(off) > diag_tol * max(1.0, np.linalg.norm(blk)):
                raise ValueError(f"blocks do not commute under U ({name}_{i} off-diagonal norm "
                                 f"{np.linalg.norm(off):.3e})")
        conj[name] = np.array([np.diag(blk) for blk in t]).reshape(len(blocks), a.k)
    if np.any(conj["D"] == 0):
        raise ValueError("a diagonal entry of some conjugated D_n is zero")
    channels, roots = [], []
    for i in range(a.k):
        ch = BlockTridiagonalMatrix.from_blocks(conj["B"][:, i], conj["C"][:, i], conj["D"][:, i])
        seq = generate_sequence(ch)
        q = ScalarPolynomial(seq[ch.l].coeffs[:, 0, 0])
        channels.append(q)
        roots.append(find_zeros(q, cluster_tol, seq.log_derivative).roots)
    means, counts = cluster_roots(np.concatenate(roots), cluster_tol)
    return ChannelResult(Spectrum(means, counts, cluster_tol, np.concatenate(roots)), tuple(channels))
