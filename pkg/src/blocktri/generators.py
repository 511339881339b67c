"""Deterministic test-instance generators.  Every generator takes an explicit seed."""

from __future__ import annotations

import numpy as np

from .core import BlockTridiagonalMatrix

KINDS = ("random", "symmetric", "commuting", "nilpotent", "defective", "spider")


def _rng(seed) -> np.random.Generator:
    return np.random.default_rng(seed)


def _well_conditioned(rng, k: int, spread: float = 0.3) -> np.ndarray:
    # I + small perturbation keeps the condition number modest
    return np.eye(k) + spread * rng.standard_normal((k, k)) / np.sqrt(k)


def random_instance(k: int, l: int, seed=0, complex_entries: bool = False) -> BlockTridiagonalMatrix:
    """Gaussian blocks.  D_n are non-singular with probability one."""
    rng = _rng(seed)

    def draw(shape):
        x = rng.standard_normal(shape)
        return x + 1j * rng.standard_normal(shape) if complex_entries else x

    return BlockTridiagonalMatrix.from_blocks(draw((l, k, k)), draw((l - 1, k, k)), draw((l - 1, k, k)),
                                              meta={"kind": "random", "seed": seed})


def symmetric_instance(k: int, l: int, seed=0) -> BlockTridiagonalMatrix:
    """Real symmetric: B_n = B_n^T and C_n = D_n^T."""
    rng = _rng(seed)
    b = rng.standard_normal((l, k, k))
    b = (b + np.swapaxes(b, 1, 2)) / 2
    d = rng.standard_normal((l - 1, k, k))
    return BlockTridiagonalMatrix.from_blocks(b, np.swapaxes(d, 1, 2), d, meta={"kind": "symmetric", "seed": seed})


def commuting_instance(k: int, l: int, seed=0) -> BlockTridiagonalMatrix:
    """Blocks U diag(.) U^{-1} sharing one eigenbasis U (stored in meta as [re, im] pairs)."""
    rng = _rng(seed)
    u = _well_conditioned(rng, k, 0.5)
    uinv = np.linalg.inv(u)
    conj = lambda vals: u[None] @ (vals[:, :, None] * np.eye(k)[None]) @ uinv[None]
    b = conj(rng.standard_normal((l, k)))
    c = conj(rng.standard_normal((l - 1, k)))
    d = conj(rng.uniform(0.5, 1.5, (l - 1, k)) * rng.choice([-1.0, 1.0], (l - 1, k)))
    meta = {"kind": "commuting", "seed": seed, "U": [[[float(z), 0.0] for z in row] for row in u]}
    return BlockTridiagonalMatrix.from_blocks(b, c, d, meta=meta)


def commuting_basis(a: BlockTridiagonalMatrix) -> np.ndarray:
    u = a.meta.get("U")
    if u is None:
        raise KeyError("instance carries no common eigenbasis (meta['U'])")
    arr = np.asarray(u, dtype=float)
    return arr[..., 0] + 1j * arr[..., 1]


def nilpotent_instance(k: int, l: int) -> BlockTridiagonalMatrix:
    """B_n = 0, C_n = 0, D_n = I: a single shift, nilpotent of index L with K chains."""
    z = np.zeros((l, k, k))
    eye = np.broadcast_to(np.eye(k), (l - 1, k, k))
    sizes = [l] * k
    return BlockTridiagonalMatrix.from_blocks(z, np.zeros((l - 1, k, k)), eye,
                                              meta={"kind": "nilpotent", "jordan": [{"lambda": [0.0, 0.0],
                                                                                     "sizes": sizes}]})


def defective_instance(k: int, l: int, seed=0, layouts=None, min_gap: float = 0.1) -> BlockTridiagonalMatrix:
    """Known Jordan structure hidden by a block-diagonal similarity.

    Channel i is an upper bidiagonal L x L matrix with ones above the diagonal
    and diagonal ``layouts[i]``; since the superdiagonal never vanishes, each
    distinct value in a channel forms one Jordan block of size equal to its
    count.  Channels are interleaved into K x K diagonal blocks (D_n = I,
    C_n = 0) and conjugated by random S_n, giving B_n' = S_n B_n S_n^{-1} and
    D_n' = S_n S_{n+1}^{-1}.  Random layouts use values distinct across
    channels and at least ``min_gap`` apart: nearly confluent Jordan blocks
    have a Jordan basis too ill-conditioned for a rank test.
    """
    rng = _rng(seed)
    if layouts is None:
        half = (l + 1) // 2
        while True:
            vals = np.round(rng.uniform(-2, 2, k * half), 3)
            if np.diff(np.sort(vals)).min(initial=np.inf) >= min_gap:
                break
        layouts = [rng.permutation(np.repeat(vals[i * half:(i + 1) * half], 2)[:l]) for i in range(k)]
    lay = np.asarray(layouts, dtype=float).reshape(k, l)
    s = np.array([_well_conditioned(rng, k) for _ in range(l)])
    sinv = np.linalg.inv(s)
    b = s @ (lay.T[:, :, None] * np.eye(k)[None]) @ sinv
    d = s[:-1] @ sinv[1:]
    jordan = {}
    for row in lay:
        vals, counts = np.unique(row, return_counts=True)
        for v, c in zip(vals, counts):
            jordan.setdefault(float(v), []).append(int(c))
    meta = {"kind": "defective", "seed": seed, "layouts": lay.tolist(),
            "jordan": [{"lambda": [v, 0.0], "sizes": sorted(sz, reverse=True)} for v, sz in sorted(jordan.items())]}
    return BlockTridiagonalMatrix.from_blocks(b, np.zeros((l - 1, k, k)), d, meta=meta)


def generate(kind: str, k: int, l: int, seed=0, **kw) -> BlockTridiagonalMatrix:
    if kind == "random":
        return random_instance(k, l, seed, **kw)
    if kind == "symmetric":
        return symmetric_instance(k, l, seed)
    if kind == "commuting":
        return commuting_instance(k, l, seed)
    if kind == "nilpotent":
        return nilpotent_instance(k, l)
    if kind == "defective":
        return defective_instance(k, l, seed)
    if kind == "spider":
        from .spider import spider_matrix
        return spider_matrix(k, l, kw.get("variant", "star"))
    raise ValueError(f"unknown instance kind {kind!r}; expected one of {', '.join(KINDS)}")
