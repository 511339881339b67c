"""
Jordan chains of generalized eigenvectors for defective block tridiagonal
matrices.

With v(x) = stack(P_0(x) u, ..., P_{L-1}(x) u) one has
(A - x I) v(x) = -e_L P_L(x) u, so differentiating r times at an eigenvalue
shows that the Taylor coefficients v_r = v^{(r)}(lam) / r! form a chain
(A - lam I) v_r = v_{r-1} as long as P_L^{(j)}(lam) u = 0 for j <= r.
Letting the seed depend on x as well (a root polynomial u(x)) removes the
restriction to a single seed and recovers every chain.

The power test works instead with ker (A - lam I)^{r+1}, either through the
block tridiagonal re-blocking of A_r = (A - lam I)^{r+1} + (-1)^r lam^{r+1} I
or densely.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import BlockTridiagonalMatrix, NumericalError, StructureError, assemble_dense, matvec, validate
from .matpoly import MatrixPolynomialSequence, generate_sequence
from .spectral import (CLUSTER_TOL, NULL_TOL, Spectrum, compute_spectrum, eigen_bases, nullspace_basis,
                       p_last)

CHAIN_TOL = 1e-8


class PreconditionError(ValueError):
    """Raised when a seed is not in ker P_L(lam) or an input does not meet a documented precondition."""


class UnsupportedConfiguration(ValueError):
    """Raised when the structured power path is impossible and the dense path is disabled."""


@dataclass(frozen=True, eq=False)
class JordanChain:
    """v_0 .. v_{R-1} with (A - lam I) v_0 = 0 and (A - lam I) v_r = v_{r-1}.

    ``seeds[j]`` is the x**j coefficient of the seed polynomial; chains from
    the single-seed test have one seed.  Vectors are not normalized.
    """

    eigenvalue: complex
    seeds: np.ndarray
    vectors: np.ndarray          # (N, R)
    method: str = "derivative"
    residuals: tuple = field(default=())

    @property
    def length(self) -> int:
        return self.vectors.shape[1]

    @property
    def seed(self) -> np.ndarray:
        return self.seeds[0]

    def to_dict(self) -> dict:
        enc = lambda z: [float(z.real), float(z.imag)]
        return {"lambda": enc(self.eigenvalue), "length": self.length, "method": self.method,
                "seed": [enc(z) for z in self.seed],
                "vectors": [[enc(z) for z in col] for col in self.vectors.T],
                "residuals": list(self.residuals)}


# --- residuals -------------------------------------------------------------------

def chain_residuals(a: BlockTridiagonalMatrix, lam: complex, vectors: np.ndarray) -> tuple:
    """Relative residual of each chain link; entry 0 is the eigenvector test."""
    av = matvec(a, vectors) - lam * vectors
    out = []
    for r in range(vectors.shape[1]):
        prev = vectors[:, r - 1] if r else 0
        den = np.linalg.norm(vectors[:, r]) + (np.linalg.norm(prev) if r else 0.0)
        out.append(float(np.linalg.norm(av[:, r] - prev) / den) if den > 0 else math.inf)
    return tuple(out)


def power_residuals(a: BlockTridiagonalMatrix, lam: complex, vectors: np.ndarray) -> tuple:
    """||(A - lam I)^{r+1} v_r|| / ||v_r|| with the powers applied by repeated matvec."""
    out = []
    for r in range(vectors.shape[1]):
        w = vectors[:, r]
        for _ in range(r + 1):
            w = matvec(a, w) - lam * w
        out.append(float(np.linalg.norm(w) / np.linalg.norm(vectors[:, r])))
    return tuple(out)


# --- derivative test ---------------------------------------------------------------

def taylor_values(a: BlockTridiagonalMatrix, lam: complex, order: int) -> np.ndarray:
    """T[j, n] = P_n^{(j)}(lam) / j! for j <= order and n <= L, shape (order+1, L+1, K, K).

    Uses T^j_{n+1} = D_n^{-1} ((lam - B_n) T^j_n + T^{j-1}_n - C_{n-1} T^j_{n-1}).
    """
    k, l = a.k, a.l
    t = np.zeros((order + 1, l + 1, k, k), dtype=complex)
    t[0, 0] = np.eye(k)
    for n in range(l):
        s = lam * t[:, n] - a.diag[n] @ t[:, n]
        s[1:] += t[:-1, n]
        if n > 0:
            s -= a.sub[n - 1] @ t[:, n - 1]
        t[:, n + 1] = np.linalg.solve(a.sup[n], s) if n < l - 1 else s
    return t


def _stack_chain(t: np.ndarray, seeds: np.ndarray, length: int) -> np.ndarray:
    """v_r = sum_j stack_n(T[r-j, n] u_j) for r < length."""
    l = t.shape[1] - 1
    out = []
    for r in range(length):
        v = sum(t[r - j, :l] @ seeds[j] for j in range(min(r, len(seeds) - 1) + 1))
        out.append(v.reshape(-1))
    return np.array(out).T


def derivative_tolerance(lam: complex, u: np.ndarray, l: int, tol: float = CHAIN_TOL) -> float:
    return tol * float(np.linalg.norm(u)) * (1 + abs(lam)) ** l


def chain_via_derivatives(seq: MatrixPolynomialSequence, lam: complex, u, r_max: int | None = None,
                          tol: float = CHAIN_TOL) -> JordanChain:
    """Longest chain generated by a single seed u in ker P_L(lam).

    R is the largest value <= r_max with ||P_L^{(r)}(lam) u|| small for all
    r < R (threshold tol ||u|| (1 + |lam|)^L); v_r = stack(P_n^{(r)}(lam) u) / r!.
    """
    a = seq.recurrence
    u = np.asarray(u, dtype=complex).reshape(-1)
    r_max = a.n if r_max is None else int(r_max)
    if r_max < 1:
        raise ValueError("r_max must be positive")
    thr = derivative_tolerance(lam, u, a.l, tol)
    t = taylor_values(a, lam, r_max)
    if np.linalg.norm(t[0, -1] @ u) > thr:
        raise PreconditionError(f"seed is not in ker P_L({lam:.6g}): residual {np.linalg.norm(t[0, -1] @ u):.3e}")
    length = 1
    while length < r_max and np.linalg.norm(t[length, -1] @ u) <= thr:
        length += 1
    vectors = _stack_chain(t, u[None], length)
    res = chain_residuals(a, lam, vectors)
    # keep the prefix that passes the chain relation
    keep = next((i for i, r in enumerate(res) if r > tol), length)
    if keep == 0:
        raise NumericalError(f"seed at {lam:.6g} does not give an eigenvector (residual {res[0]:.3e})")
    vectors, res = vectors[:, :keep], res[:keep]
    return JordanChain(complex(lam), u[None].copy(), vectors, "derivative", res)


def root_polynomial_chains(seq: MatrixPolynomialSequence, lam: complex, algebraic: int,
                           tol: float = CHAIN_TOL, eigvecs: np.ndarray | None = None) -> list:
    """All chains at lam from root polynomials u(x) = u_0 + u_1 (x - lam) + ...

    A seed polynomial of order R+1 makes the first R+1 Taylor coefficients of
    P_L(x) u(x) vanish, i.e. lies in the kernel of the block lower-triangular
    Toeplitz matrix built from P_L^{(j)}(lam) / j!.  The number of chains of
    length > R equals the dimension of the u_0-projection of that kernel.
    Seeds u_0 are restricted to ``eigvecs`` (an orthonormal basis of
    ker P_L(lam), computed when not given): near-null directions of P_L(lam)
    that the null-space decision rejected must not start a chain.
    """
    a = seq.recurrence
    k = a.k
    t = taylor_values(a, lam, algebraic)
    mat, scale = p_last(seq, lam)
    if eigvecs is None:
        eigvecs = nullspace_basis(mat, NULL_TOL, lam, scale).basis
    kernels = []
    for r in range(algebraic):
        m = np.zeros(((r + 1) * k, (r + 1) * k), dtype=complex)
        for i in range(r + 1):
            for j in range(i + 1):
                m[i * k:(i + 1) * k, j * k:(j + 1) * k] = t[i - j, -1]
        z = nullspace_basis(m, tol, lam, scale).basis
        if z.shape[1] == 0 or eigvecs.shape[1] == 0:
            break
        # keep the kernel combinations whose u_0 part lies in span(eigvecs)
        perp = z[:k] - eigvecs @ (eigvecs.conj().T @ z[:k])
        _, sp, vh = np.linalg.svd(perp)
        full = np.zeros(z.shape[1])
        full[:sp.size] = sp
        z = z @ vh[full <= tol].conj().T
        if z.shape[1] == 0:
            break
        u0, s, _ = np.linalg.svd(z[:k], full_matrices=False)
        rank = int(np.sum(s > tol * max(1.0, s[0]))) if s.size else 0
        if rank == 0:
            break
        kernels.append((z, u0[:, :rank]))
    chains, taken = [], np.zeros((k, 0), dtype=complex)
    for r in range(len(kernels) - 1, -1, -1):
        z, span = kernels[r]
        # directions of this level not already started by a longer chain
        if taken.shape[1]:
            q, _ = np.linalg.qr(taken)
            span = span - q @ (q.conj().T @ span)
        uu, s, _ = np.linalg.svd(span, full_matrices=False)
        for col in uu[:, s > 1e-6 * max(1.0, s.max(initial=0.0))].T:
            c, *_ = np.linalg.lstsq(z[:k], col, rcond=None)
            seeds = (z @ c).reshape(r + 1, k)
            vectors = _stack_chain(t, seeds, r + 1)
            res = chain_residuals(a, lam, vectors)
            chains.append(JordanChain(complex(lam), seeds, vectors, "root-polynomial", res))
            taken = np.hstack([taken, col[:, None]])
    return chains


# --- power test ---------------------------------------------------------------------

def _dense_power(a: BlockTridiagonalMatrix, lam: complex, p: int) -> np.ndarray:
    m = assemble_dense(a) - lam * np.eye(a.n)
    return np.linalg.matrix_power(m, p)


def generalized_kernel(a: BlockTridiagonalMatrix, lam: complex, r: int, structured: bool = True,
                       dense: bool = True, null_tol: float = NULL_TOL):
    """Basis of ker (A - lam I)^{r+1} and the path that produced it.

    The structured path re-blocks A_r with block size (r+1)K (possible when
    r+1 divides L) and reads the kernel off as the eigenvectors of A_r at
    (-1)^r lam^{r+1}.
    """
    p = r + 1
    power = _dense_power(a, lam, p)
    if structured and a.l % p == 0:
        mu = (-1) ** r * lam ** p
        try:
            ar = BlockTridiagonalMatrix.from_dense(power + mu * np.eye(a.n), p * a.k, tol=1e-12 * max(
                1.0, float(np.abs(power).max())))
            if validate(ar).passed:
                seq = generate_sequence(ar)
                mat, scale = p_last(seq, mu)
                h = nullspace_basis(mat, null_tol, mu, scale)
                basis = seq.stacked(mu, h.basis)
                if basis.shape[1]:
                    q, _ = np.linalg.qr(basis)
                    return q, "structured"
        except (StructureError, np.linalg.LinAlgError):
            pass
    if not dense:
        raise UnsupportedConfiguration(f"{p} does not divide L={a.l} (or the re-blocked power has a singular "
                                       "super block) and the dense path is disabled")
    return nullspace_basis(power, null_tol, lam).basis, "dense"


def chain_via_powers(a: BlockTridiagonalMatrix, lam: complex, r: int, previous=None, *, structured: bool = True,
                     dense: bool = True, tol: float = CHAIN_TOL, null_tol: float = NULL_TOL):
    """Candidate generalized eigenvectors of rank r+1 at lam.

    Returns ``(candidates, path)``.  Without ``previous`` the candidates are
    the directions of ker (A - lam I)^{r+1} that (A - lam I)^r does not
    annihilate.  With ``previous = v_{r-1}`` the single candidate is the
    kernel vector v minimizing ||(A - lam I) v - v_{r-1}||, kept only if that
    residual is below tol relative to ||v_{r-1}||.
    """
    if r < 0:
        raise ValueError("r must be non-negative")
    basis, path = generalized_kernel(a, lam, r, structured, dense, null_tol)
    if basis.shape[1] == 0:
        return np.zeros((a.n, 0), dtype=complex), path
    shifted = matvec(a, basis) - lam * basis
    if previous is not None:
        previous = np.asarray(previous, dtype=complex).reshape(-1)
        c, *_ = np.linalg.lstsq(shifted, previous, rcond=None)
        v = basis @ c
        ok = np.linalg.norm(matvec(a, v) - lam * v - previous) <= tol * np.linalg.norm(previous)
        return (v[:, None] if ok else np.zeros((a.n, 0), dtype=complex)), path
    image = basis
    for _ in range(r):
        image = matvec(a, image) - lam * image
    _, s, vh = np.linalg.svd(image, full_matrices=False)
    keep = s > null_tol * max(1.0, s.max(initial=0.0)) if r else np.ones(s.size, dtype=bool)
    return basis @ vh[keep].conj().T, path


def chains_agree(a: BlockTridiagonalMatrix, chain: JordanChain, *, structured: bool = True,
                 tol: float = CHAIN_TOL) -> tuple:
    """Confirm each link of a derivative chain with the power test.

    For r >= 1 the power path solves (A - lam I) v = v_{r-1} inside
    ker (A - lam I)^{r+1}; agreement means the solution exists and differs
    from v_r by an eigenvector.  Returns (agree, paths, worst_deviation).
    """
    lam = chain.eigenvalue
    eig = generalized_kernel(a, lam, 0, False, True)[0]
    worst, paths = 0.0, []
    v0 = chain.vectors[:, 0]
    d = v0 - eig @ (eig.conj().T @ v0)
    worst = max(worst, float(np.linalg.norm(d) / np.linalg.norm(v0)))
    paths.append("dense")
    for r in range(1, chain.length):
        cand, path = chain_via_powers(a, lam, r, chain.vectors[:, r - 1], structured=structured, tol=tol)
        paths.append(path)
        if cand.shape[1] == 0:
            return False, tuple(paths), math.inf
        diff = cand[:, 0] - chain.vectors[:, r]
        diff -= eig @ (eig.conj().T @ diff)
        worst = max(worst, float(np.linalg.norm(diff) / np.linalg.norm(chain.vectors[:, r])))
    return worst <= tol, tuple(paths), worst


# --- report ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class EigenvalueJordan:
    eigenvalue: complex
    algebraic: int
    geometric: int
    chains: tuple
    single_seed_lengths: tuple
    agreement: tuple = ()

    @property
    def defect(self) -> int:
        return self.algebraic - self.geometric

    @property
    def complete(self) -> bool:
        return sum(c.length for c in self.chains) == self.algebraic


@dataclass(frozen=True, eq=False)
class JordanReport:
    matrix: BlockTridiagonalMatrix
    spectrum: Spectrum
    entries: tuple
    tolerances: dict
    eigenvectors: np.ndarray = None   # for the non-deficient eigenvalues

    @property
    def defective(self) -> bool:
        return any(e.defect > 0 for e in self.entries)

    def all_vectors(self) -> np.ndarray:
        cols = [c.vectors for e in self.entries for c in e.chains]
        if self.eigenvectors is not None:
            cols.append(self.eigenvectors)
        return np.hstack(cols) if cols else np.zeros((self.matrix.n, 0), dtype=complex)

    def spans(self, tol: float = 1e-8) -> bool:
        v = self.all_vectors()
        if v.shape[1] < self.matrix.n:
            return False
        v = v / np.linalg.norm(v, axis=0)
        s = np.linalg.svd(v, compute_uv=False)
        return int(np.sum(s > tol * s[0])) == self.matrix.n

    def to_dict(self) -> dict:
        enc = lambda z: [float(z.real), float(z.imag)]
        out = []
        for e in self.entries:
            d = {"lambda": enc(e.eigenvalue), "algebraic": e.algebraic, "geometric": e.geometric,
                 "defect": e.defect, "complete": e.complete, "single_seed_lengths": list(e.single_seed_lengths),
                 "chains": [c.to_dict() for c in e.chains]}
            if e.agreement:
                d["power_agreement"] = [{"agree": bool(ok), "paths": list(p), "deviation": dev}
                                        for ok, p, dev in e.agreement]
            out.append(d)
        return {"tolerances": self.tolerances, "defective": self.defective,
                "defect": [{"lambda": enc(e.eigenvalue), "defect": e.defect} for e in self.entries if e.defect],
                "eigenvalues": out}


def jordan_analysis(a: BlockTridiagonalMatrix, *, powers: bool = False, tol_validate: float = 1e-12,
                    null_tol: float = NULL_TOL, cluster_tol: float = CLUSTER_TOL, tol: float = CHAIN_TOL,
                    structured: bool = True) -> JordanReport:
    """Chains for every deficient eigenvalue (geometric < algebraic multiplicity).

    Single-seed chains from an orthonormal basis of ker P_L(lam) are recorded
    first; the chains reported are the root-polynomial ones, which always
    account for the full algebraic multiplicity when the numerics allow.
    """
    seq = generate_sequence(a, tol_validate)
    spectrum = compute_spectrum(seq, cluster_tol)
    bases = eigen_bases(seq, spectrum, null_tol)
    entries, plain = [], [np.zeros((a.n, 0), dtype=complex)]
    for lam, b, h in zip(spectrum.eigenvalues, spectrum.multiplicities, bases):
        if h.dim == 0:
            raise NumericalError(f"eigenvalue {lam:.6g} has an empty null space at null_tol={null_tol:g}")
        if h.dim >= b:
            plain.append(seq.stacked(lam, h.basis))
            continue
        single = tuple(chain_via_derivatives(seq, lam, u, b, tol).length for u in h.basis.T)
        chains = tuple(root_polynomial_chains(seq, lam, b, tol, h.basis))
        agreement = ()
        if powers:
            agreement = tuple(chains_agree(a, c, structured=structured, tol=tol) for c in chains)
        entries.append(EigenvalueJordan(complex(lam), int(b), h.dim, chains, single, agreement))
    tolerances = {"tol_validate": tol_validate, "tol_null": null_tol, "tol_cluster": cluster_tol, "tol_chain": tol}
    return JordanReport(a, spectrum, tuple(entries), tolerances, np.hstack(plain))
