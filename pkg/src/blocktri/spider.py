"""
Spider graphs: K legs of L nodes with the first node of every leg joined
through a hub pattern B.

Block form: B_0 = B, B_n = 0 for n >= 1 and C_n = D_n = I.  For the star
pattern the matrix polynomials have the closed form

    P_n(x) = U_n(x/2) I + s U_{n-1}(x/2) B,

with s = -1 (forced by P_1 = x I - B; the sign is re-derived against the
recurrence when a plan is built), so that

    det P_L(x) = U_L^{K-2} (U_L^2 - (K-1) U_{L-1}^2),   U_m = U_m(x/2).

This splits the spectrum into three families:

* alpha: roots of U_L(x/2), each with multiplicity K-2, eigenvectors
  (U_n(alpha/2))_n (x) q with q in ker B;
* beta / gamma: roots of U_L -/+ sqrt(K-1) U_{L-1}, simple, eigenvectors
  (U_{L-1-n}(lam/2))_n (x) g with g = (c, 1, ..., 1), c = -/+ sqrt(K-1).

The second form of the beta/gamma vectors follows from
U_n U_{L-1} - U_{n-1} U_L = U_{L-1-n} at a root and, unlike the forward form
P_n(lam) h_lam, stays accurate for large L.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .core import BlockTridiagonalMatrix, NumericalError, assemble_dense, atomic_write_text, matvec
from .dst import OpCounter, dst1, fast_supported
from .matpoly import generate_sequence
from .spectral import EigendecompositionResult, NullspaceBasis, Spectrum, cluster_roots, compute_spectrum

PLAN_VERSION = "spider-plan/1"
VARIANTS = ("star", "ring")
ROOT_TOL = 1e-9


# --- graphs ---------------------------------------------------------------------

def hub_pattern(k: int, variant: str = "star") -> np.ndarray:
    """K x K hub coupling: star (node 0 of leg 0 joined to node 0 of every other leg) or ring."""
    if variant not in VARIANTS:
        raise ValueError(f"unknown spider variant {variant!r}; expected star or ring")
    if k < 3:
        raise ValueError(f"spider hub needs K >= 3 legs, got K={k}")
    b = np.zeros((k, k))
    if variant == "star":
        b[0, 1:] = b[1:, 0] = 1
    else:
        i = np.arange(k)
        b[i, (i + 1) % k] = b[(i + 1) % k, i] = 1
    return b


def spider_from_hub(b: np.ndarray, l: int, meta: dict | None = None) -> BlockTridiagonalMatrix:
    """Block tridiagonal spider for an arbitrary hub pattern ``b`` (also covers K = 2)."""
    b = np.asarray(b, dtype=float)
    k = b.shape[0]
    if l < 1:
        raise ValueError("legs need at least one node")
    diag = np.zeros((l, k, k))
    diag[0] = b
    eye = np.broadcast_to(np.eye(k), (l - 1, k, k))
    return BlockTridiagonalMatrix.from_blocks(diag, eye, eye, meta=meta)


def spider_matrix(k: int, l: int, variant: str = "star") -> BlockTridiagonalMatrix:
    """Adjacency matrix of the spider graph with K >= 3 legs of L nodes."""
    return spider_from_hub(hub_pattern(k, variant), l, meta={"kind": "spider", "variant": variant})


def spider_edges(k: int, l: int, variant: str = "star") -> list:
    """Edge list in the node numbering n*K + i (node n of leg i)."""
    edges = [((n - 1) * k + i, n * k + i) for n in range(1, l) for i in range(k)]
    if variant == "star":
        edges += [(0, j) for j in range(1, k)]
    elif variant == "ring":
        edges += [(i, (i + 1) % k) for i in range(k)]
    elif variant == "line":
        edges += [(0, 1)]
    else:
        raise ValueError(f"unknown spider variant {variant!r}")
    return edges


# --- Chebyshev ----------------------------------------------------------------------

def chebyshev_u_table(nmax: int, x) -> np.ndarray:
    """U_0(x) .. U_nmax(x) by U_n = 2x U_{n-1} - U_{n-2}; shape (nmax+1,) + shape(x)."""
    x = np.asarray(x)
    out = np.empty((nmax + 1,) + x.shape, dtype=np.result_type(x, float))
    out[0] = 1
    if nmax >= 1:
        out[1] = 2 * x
    for n in range(2, nmax + 1):
        out[n] = 2 * x * out[n - 1] - out[n - 2]
    return out


def chebyshev_u(n: int, x):
    """U_n(x); U_{-1} = 0."""
    if n < -1:
        raise ValueError("Chebyshev index must be >= -1")
    if n == -1:
        return np.zeros_like(np.asarray(x, dtype=float)) if np.ndim(x) else 0.0
    t = chebyshev_u_table(n, x)[n]
    return t if np.ndim(x) else t.item()


def spider_closed_form(k: int, n: int, x: complex, sign: int = -1, variant: str = "star") -> np.ndarray:
    """P_n(x) = U_n(x/2) I + sign U_{n-1}(x/2) B."""
    b = hub_pattern(k, variant)
    return chebyshev_u(n, x / 2) * np.eye(k) + sign * chebyshev_u(n - 1, x / 2) * b


def resolve_sign(k: int, l: int, seed: int = 0, points: int = 10, tol: float = 1e-10) -> int:
    """The sign s for which the closed form matches the recurrence at random points, for all n <= L."""
    rng = np.random.default_rng(seed)
    xs = rng.uniform(-2.5, 2.5, points) + 1j * rng.uniform(-0.5, 0.5, points)
    vals = generate_sequence(spider_matrix(k, l)).values(xs)
    matches = []
    for s in (-1, 1):
        ok = all(np.abs(spider_closed_form(k, n, x, s) - vals[n, i]).max() <= tol * max(1.0, np.abs(vals[n, i]).max())
                 for n in range(l + 1) for i, x in enumerate(xs))
        if ok:
            matches.append(s)
    if len(matches) != 1:
        raise AssertionError(f"closed form matches the recurrence for signs {matches}, expected exactly one")
    return matches[0]


def spider_determinant(k: int, l: int, x):
    """U_L^{K-2} (U_L^2 - (K-1) U_{L-1}^2) at x/2."""
    t = chebyshev_u_table(l, np.asarray(x) / 2)
    ul, ulm = t[l], t[l - 1]
    return ul ** (k - 2) * (ul ** 2 - (k - 1) * ulm ** 2)


# --- roots --------------------------------------------------------------------------

def _tridiagonal_roots(l: int, corner: float) -> np.ndarray:
    # det(xI - J) = U_L(x/2) - corner U_{L-1}(x/2) for J with unit off-diagonals
    d = np.zeros(l)
    d[-1] = corner
    return eigh_tridiagonal(d, np.ones(l - 1), eigvals_only=True)


def _chebyshev_newton(l: int, corner: float, x: np.ndarray, steps: int = 2) -> np.ndarray:
    # Newton on f(x) = U_L(x/2) - corner U_{L-1}(x/2); the eigensolver's O(eps) error
    # is amplified by |f'|, which grows like L^3 near the ends of [-2, 2]
    x = np.array(x, dtype=float)
    for _ in range(steps):
        y = x / 2
        u_prev, u = np.zeros_like(y), np.ones_like(y)
        du_prev, du = np.zeros_like(y), np.zeros_like(y)
        for _n in range(l):
            u_prev, u, du_prev, du = u, 2 * y * u - u_prev, du, 2 * u + 2 * y * du - du_prev
        f = u - corner * u_prev
        df = 0.5 * (du - corner * du_prev)
        with np.errstate(divide="ignore", invalid="ignore"):
            step = np.where(df != 0, f / df, 0.0)
        x = x - np.where(np.abs(step) < 1e-8 * (1 + np.abs(x)), step, 0.0)
    return x


def spider_roots(k: int, l: int) -> dict:
    """alpha, beta, gamma (ascending), residual-checked against their Chebyshev equations."""
    c = math.sqrt(k - 1)
    fam = {name: _chebyshev_newton(l, corner, _tridiagonal_roots(l, corner))
           for name, corner in (("alpha", 0.0), ("beta", -c), ("gamma", c))}
    for name, corner in (("alpha", 0.0), ("beta", -c), ("gamma", c)):
        t = chebyshev_u_table(l, fam[name] / 2)
        res = np.abs(t[l] - corner * t[l - 1]) / (np.abs(t[l]) + abs(corner) * np.abs(t[l - 1]) + 1)
        if res.max() > ROOT_TOL:
            raise NumericalError(f"{name} roots fail their Chebyshev equation (residual {res.max():.3e})")
    simple = np.sort(np.concatenate([fam["beta"], fam["gamma"], fam["alpha"]]))
    if np.diff(simple).min(initial=np.inf) <= 1e-12 * max(1.0, np.abs(simple).max()):
        raise NumericalError("alpha, beta and gamma roots are not pairwise distinct")
    return fam


@dataclass(frozen=True, eq=False)
class SpiderSpectrum:
    spectrum: Spectrum
    families: dict
    general_error: float | None = None


def line_graph_spectrum(n: int) -> np.ndarray:
    """Path graph on n nodes: 2 cos(k pi / (n+1)), ascending."""
    return np.sort(2 * np.cos(np.arange(1, n + 1) * np.pi / (n + 1)))


def _match_error(a: np.ndarray, b: np.ndarray) -> float:
    from scipy.optimize import linear_sum_assignment
    cost = np.abs(a[:, None] - b[None, :])
    r, c = linear_sum_assignment(cost)
    return float(cost[r, c].max())


def spider_spectrum(k: int, l: int, variant: str = "star", check_general: bool = False,
                    tol: float = 1e-7) -> SpiderSpectrum:
    """Closed-form spectrum of the star spider; K = 2 is the path on 2L nodes.

    With ``check_general`` the result is compared against the zeros of
    det P_L from the general path and the worst deviation is recorded.
    """
    if variant != "star":
        raise ValueError("closed-form spectrum is available for the star variant only")
    if k == 2:
        ev = line_graph_spectrum(2 * l)
        sp = Spectrum(ev.astype(complex), (1,) * ev.size, 0.0, ev.astype(complex))
        fam = {"line": ev}
        a = spider_from_hub(np.array([[0.0, 1.0], [1.0, 0.0]]), l)
    else:
        fam = spider_roots(k, l)
        vals = np.concatenate([fam["alpha"], fam["beta"], fam["gamma"]])
        mult = [k - 2] * l + [1] * (2 * l)
        order = np.argsort(vals)
        sp = Spectrum(vals[order].astype(complex), tuple(int(mult[i]) for i in order), 0.0,
                      np.repeat(vals, mult).astype(complex))
        a = spider_matrix(k, l)
    err = None
    if check_general:
        general = compute_spectrum(generate_sequence(a))
        err = _match_error(sp.expanded(), general.expanded())
        if err > tol:
            raise NumericalError(f"general path deviates from the closed form by {err:.3e}")
        gm = sorted(general.multiplicities)
        if gm != sorted(sp.multiplicities):
            raise NumericalError(f"general path multiplicities {gm} differ from the closed form")
    return SpiderSpectrum(sp, fam, err)


# --- plan ------------------------------------------------------------------------------

def helmert_basis(k: int) -> np.ndarray:
    """Orthonormal basis of ker B (star): q_j = (e_1 + ... + e_{j+1} - (j+1) e_{j+2}) / sqrt((j+1)(j+2))."""
    q = np.zeros((k, k - 2))
    for j in range(k - 2):
        q[1:j + 2, j] = 1
        q[j + 2, j] = -(j + 1)
        q[:, j] /= math.sqrt((j + 1) * (j + 2))
    return q


def raw_null_basis(k: int) -> np.ndarray:
    """H with columns e_{j+1} - e_{j+2}: spans ker B but is not orthogonal."""
    h = np.zeros((k, k - 2))
    j = np.arange(k - 2)
    h[j + 1, j] = 1
    h[j + 2, j] = -1
    return h


def _reflected_table(l: int, lam: np.ndarray) -> np.ndarray:
    """Unit-norm columns t_k with t_k[n] proportional to U_{L-1-n}(lam_k / 2)."""
    t = np.empty((l, lam.size))
    prev, cur = np.zeros(lam.size), np.ones(lam.size)
    t[l - 1] = cur
    for m in range(1, l):
        prev, cur = cur, lam * cur - prev
        t[l - 1 - m] = cur
        big = np.abs(cur) > 1e150
        if big.any():
            t[l - 1 - m:, big] /= 1e150
            prev[big] /= 1e150
            cur[big] /= 1e150
    return t / np.linalg.norm(t, axis=0)


@dataclass(frozen=True, eq=False)
class SpiderPlan:
    """Precomputed data for fast expansions on a (K, L) star spider.

    Column convention (version ``spider-plan/1``): unit-norm columns in the
    layout (alpha | beta | gamma), each family ascending; the K-2 columns of
    one alpha are t_k (x) q_j with the Helmert basis q_j and
    t_k[0] > 0; beta/gamma columns are t_k (x) g / ||g|| with t_k[L-1] > 0
    and g = (c, 1, ..., 1).
    """

    k: int
    l: int
    sign: int
    alpha: np.ndarray
    beta: np.ndarray
    gamma: np.ndarray
    helmert: np.ndarray
    t_beta: np.ndarray
    t_gamma: np.ndarray
    dst_fast: bool
    version: str = PLAN_VERSION
    meta: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.k * self.l

    def eigenvalues(self) -> np.ndarray:
        return np.concatenate([np.repeat(self.alpha, self.k - 2), self.beta, self.gamma])

    def h_vectors(self, family: str) -> np.ndarray:
        """h_lam = (U_L, U_{L-1}, ..., U_{L-1}) at lam/2 for each root of the family, shape (L, K)."""
        lam = self.beta if family == "beta" else self.gamma
        t = chebyshev_u_table(self.l, lam / 2)
        h = np.repeat(t[self.l - 1][:, None], self.k, axis=1)
        h[:, 0] = t[self.l]
        return h

    def to_dict(self) -> dict:
        return {"version": self.version, "k": self.k, "l": self.l, "sign": self.sign,
                "alpha": self.alpha.tolist(), "beta": self.beta.tolist(), "gamma": self.gamma.tolist(),
                "H": raw_null_basis(self.k).tolist(), "helmert": self.helmert.tolist(),
                "h_beta": self.h_vectors("beta").tolist(), "h_gamma": self.h_vectors("gamma").tolist(),
                "t_beta": self.t_beta.tolist(), "t_gamma": self.t_gamma.tolist(),
                "dst": {"size": self.l, "fast": self.dst_fast},
                "scaling": "unit columns; alpha groups orthonormal (Helmert); layout alpha|beta|gamma ascending"}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "SpiderPlan":
        if d.get("version") != PLAN_VERSION:
            raise ValueError(f"unsupported plan version {d.get('version')!r}")
        arr = lambda key: np.asarray(d[key], dtype=float)
        return cls(int(d["k"]), int(d["l"]), int(d["sign"]), arr("alpha"), arr("beta"), arr("gamma"),
                   arr("helmert").reshape(int(d["k"]), int(d["k"]) - 2), arr("t_beta"), arr("t_gamma"),
                   bool(d["dst"]["fast"]))

    def save(self, path) -> None:
        atomic_write_text(path, self.to_json())


def build_plan(k: int, l: int, sign_seed: int = 0) -> SpiderPlan:
    if k < 3:
        raise ValueError("fast expansion needs K >= 3 (K = 2 is the path graph)")
    sign = resolve_sign(k, l, sign_seed)
    fam = spider_roots(k, l)
    return SpiderPlan(k, l, sign, fam["alpha"], fam["beta"], fam["gamma"], helmert_basis(k),
                      _reflected_table(l, fam["beta"]), _reflected_table(l, fam["gamma"]), fast_supported(l))


# --- eigenvectors -------------------------------------------------------------------

def _alpha_table(l: int) -> np.ndarray:
    # column k <-> k-th smallest alpha = 2 cos((L-k) pi / (L+1))
    n = np.arange(1, l + 1)
    ks = np.arange(l, 0, -1)
    return math.sqrt(2 / (l + 1)) * np.sin(np.pi * np.outer(n, ks) / (l + 1))


def _g_vector(k: int, family: str) -> np.ndarray:
    c = -math.sqrt(k - 1) if family == "beta" else math.sqrt(k - 1)
    g = np.ones(k)
    g[0] = c
    return g / math.sqrt(2 * (k - 1))


def _literal_columns(plan: SpiderPlan, family: str) -> np.ndarray:
    # P_n(lam) h_lam with the closed form, normalized, sign matched to the plan convention
    lam = plan.beta if family == "beta" else plan.gamma
    b = hub_pattern(plan.k)
    h = plan.h_vectors(family)
    bh = h @ b.T
    t = chebyshev_u_table(plan.l, lam / 2)
    shifted = np.vstack([np.zeros((1, lam.size)), t[:plan.l - 1]])
    cols = t[:plan.l, :, None] * h[None] + plan.sign * shifted[:, :, None] * bh[None]   # (L, m, K)
    cols = cols.transpose(0, 2, 1).reshape(plan.n, lam.size)
    norms = np.linalg.norm(cols, axis=0)
    if not np.all(np.isfinite(norms) & (norms > 0)):
        raise NumericalError(f"{family} eigenvectors: forward form produced a zero or non-finite column")
    cols /= norms
    # sign convention: last-block leg-1 entry positive.  That entry can underflow for
    # roots outside [-2, 2], so the sign is read at the largest entry instead, whose
    # expected sign is sign(U_{L-1-n}(lam/2) g_i)
    big = np.argmax(np.abs(cols), axis=0)
    n, leg = np.divmod(big, plan.k)
    u = chebyshev_u_table(plan.l - 1, lam / 2)
    expected = np.sign(u[plan.l - 1 - n, np.arange(lam.size)]) * np.sign(_g_vector(plan.k, family)[leg])
    return cols * (expected * np.sign(cols[big, np.arange(lam.size)]))


def spider_vectors(plan: SpiderPlan, method: str = "stable") -> np.ndarray:
    """The normalized eigenvector matrix (V_alpha | V_beta | V_gamma) materialized densely."""
    if method not in ("stable", "literal"):
        raise ValueError(f"unknown eigenvector method {method!r}")
    va = np.kron(_alpha_table(plan.l), plan.helmert)
    if method == "stable":
        vb = np.kron(plan.t_beta, _g_vector(plan.k, "beta")[:, None])
        vg = np.kron(plan.t_gamma, _g_vector(plan.k, "gamma")[:, None])
    else:
        vb, vg = _literal_columns(plan, "beta"), _literal_columns(plan, "gamma")
    return np.hstack([va, vb, vg])


def spider_eigenvectors(k: int, l: int, method: str = "stable", tol: float = 1e-8,
                        plan: SpiderPlan | None = None) -> EigendecompositionResult:
    """Eigendecomposition of the star spider with columns in the (alpha | beta | gamma) layout.

    The spectrum of the result lists eigenvalues in the same layout (not sorted).
    Raises NumericalError naming the family whose residual exceeds ``tol``.
    """
    plan = plan or build_plan(k, l)
    a = spider_matrix(k, l)
    v = spider_vectors(plan, method)
    lam = plan.eigenvalues()
    norm_a = a.frobenius_norm()
    r = matvec(a, v) - v * lam
    na = (k - 2) * l
    for name, sl in (("alpha", slice(0, na)), ("beta", slice(na, na + l)), ("gamma", slice(na + l, None))):
        res = float(np.linalg.norm(r[:, sl]) / norm_a)
        if res > tol:
            raise NumericalError(f"{name} eigenvectors fail the residual check ({res:.3e} > {tol:g})")
    bases = ([NullspaceBasis(complex(x), plan.helmert.astype(complex), 0.0) for x in plan.alpha]
             + [NullspaceBasis(complex(x), _g_vector(k, "beta")[:, None].astype(complex), 0.0) for x in plan.beta]
             + [NullspaceBasis(complex(x), _g_vector(k, "gamma")[:, None].astype(complex), 0.0) for x in plan.gamma])
    vals = np.concatenate([plan.alpha, plan.beta, plan.gamma]).astype(complex)
    sp = Spectrum(vals, tuple([k - 2] * l + [1] * (2 * l)), 0.0, lam.astype(complex))
    return EigendecompositionResult(a, sp, tuple(bases), v.astype(complex), lam.astype(complex),
                                    float(np.linalg.norm(r) / norm_a))


# --- fast expansion -----------------------------------------------------------------

def helmert_project(y: np.ndarray, counter: OpCounter | None = None) -> np.ndarray:
    """Y Q for the Helmert basis in O(K) per row via a running sum; Y has shape (L, K)."""
    l, k = y.shape
    tail = y[:, 1:]
    csum = np.cumsum(tail, axis=1)[:, :k - 2]
    j = np.arange(k - 2)
    out = (csum - (j + 1) * tail[:, 1:]) / np.sqrt((j + 1) * (j + 2))
    if counter is not None:
        counter.add(adds=l * ((k - 2) + (k - 2)), muls=l * 2 * (k - 2))
    return out


def expand_alpha(plan: SpiderPlan, y: np.ndarray, counter: OpCounter | None = None,
                 dst_method: str = "auto") -> np.ndarray:
    """V_alpha^T y via the Kronecker factorization: DST-I across the K-2 Helmert channels."""
    yy = y.reshape(plan.l, plan.k)
    z = helmert_project(yy, counter)
    s = dst1(z, counter, dst_method)[::-1]
    if counter is not None:
        counter.add(muls=s.size)
    return (math.sqrt(2 / (plan.l + 1)) * s).reshape(-1)


def apply_t_transpose(table: np.ndarray, w: np.ndarray) -> np.ndarray:
    """T^T w with the table applied directly, O(L^2); isolated so a fast transform can replace it."""
    return table.T @ w


def expand_lambda(plan: SpiderPlan, y: np.ndarray, family: str, method: str = "stable") -> np.ndarray:
    """V_beta^T y or V_gamma^T y."""
    if method == "literal":
        return _literal_columns(plan, family).T @ y
    yy = y.reshape(plan.l, plan.k)
    w = yy @ _g_vector(plan.k, family)
    return apply_t_transpose(plan.t_beta if family == "beta" else plan.t_gamma, w)


def fast_expansion(plan: SpiderPlan, y, method: str = "stable", counter: OpCounter | None = None,
                   dst_method: str = "auto") -> np.ndarray:
    """y_hat = V^T y for the normalized spider eigenbasis without forming V."""
    y = np.asarray(y)
    if y.shape != (plan.n,):
        raise ValueError(f"expected a vector of length {plan.n}, got shape {y.shape}")
    return np.concatenate([expand_alpha(plan, y, counter, dst_method),
                           expand_lambda(plan, y, "beta", method), expand_lambda(plan, y, "gamma", method)])


def direct_expansion(plan: SpiderPlan, y, v: np.ndarray | None = None) -> np.ndarray:
    """Oracle: V^T y with V materialized."""
    v = spider_vectors(plan) if v is None else v
    return v.T @ np.asarray(y)


def synthesize(plan: SpiderPlan, y_hat) -> np.ndarray:
    """V y_hat (inverse of the expansion for the orthonormal basis), with V materialized."""
    return spider_vectors(plan) @ np.asarray(y_hat)


def direct_alpha_ops(k: int, l: int) -> int:
    """Multiply-add count of V_alpha^T y as a dense product: 2 N per column."""
    return 2 * k * l * (k - 2) * l
