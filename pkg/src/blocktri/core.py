"""
Block tridiagonal matrix data model.

A block tridiagonal matrix with block size K and L diagonal blocks is stored
as three stacks of K x K complex blocks::

    | B_0  D_0                 |
    | C_0  B_1  D_1            |
    |      C_1  ...   D_{L-2}  |
    |           C_{L-2} B_{L-1}|

The dense dimension is N = K * L.  Only the super-diagonal blocks D_n are
required to be non-singular; the sub-diagonal blocks C_n are checked as well
but failures there are reported without being fatal.
"""

from __future__ import annotations

import json
import math
import os
import tempfile
from dataclasses import dataclass, field
from typing import Any

import numpy as np


class StructureError(ValueError):
    """Block counts or shapes are inconsistent."""


class MatrixParseError(ValueError):
    """A matrix or vector file could not be parsed."""


class ValidationError(ValueError):
    """A block that must be non-singular is (numerically) singular."""

    def __init__(self, message: str, kind: str = "super", index: int | None = None):
        super().__init__(message)
        self.kind = kind
        self.index = index


class NumericalError(RuntimeError):
    """A numerical self-check failed."""


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=complex, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class BlockTridiagonalMatrix:
    """Blocks B_n (``diag``), C_n (``sub``) and D_n (``sup``) of a block tridiagonal matrix.

    ``diag`` has shape (L, K, K); ``sub`` and ``sup`` have shape (L-1, K, K).
    Arrays are copied to complex and made read-only on construction.
    """

    diag: np.ndarray
    sub: np.ndarray
    sup: np.ndarray
    meta: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        diag = np.asarray(self.diag)
        if diag.ndim != 3 or diag.shape[1] != diag.shape[2] or diag.shape[0] < 1 or diag.shape[1] < 1:
            raise StructureError(f"diag must have shape (L, K, K) with K, L >= 1, got {diag.shape}")
        l, k = diag.shape[0], diag.shape[1]
        sub = np.asarray(self.sub).reshape((-1, k, k)) if np.size(self.sub) else np.zeros((0, k, k))
        sup = np.asarray(self.sup).reshape((-1, k, k)) if np.size(self.sup) else np.zeros((0, k, k))
        for name, arr in (("sub", sub), ("super", sup)):
            if arr.shape != (l - 1, k, k):
                raise StructureError(f"{name} count: expected {l - 1} blocks of {k}x{k}, got shape {arr.shape}")
        for name, arr in (("diag", diag), ("sub", sub), ("super", sup)):
            if not np.all(np.isfinite(arr)):
                raise StructureError(f"{name} contains non-finite entries")
        object.__setattr__(self, "diag", _frozen(diag))
        object.__setattr__(self, "sub", _frozen(sub))
        object.__setattr__(self, "sup", _frozen(sup))

    @property
    def k(self) -> int:
        return self.diag.shape[1]

    @property
    def l(self) -> int:
        return self.diag.shape[0]

    @property
    def n(self) -> int:
        return self.k * self.l

    @classmethod
    def from_blocks(cls, diag, sub=(), sup=(), meta=None) -> "BlockTridiagonalMatrix":
        """Build from sequences of blocks; scalars are accepted for K = 1."""
        diag = np.asarray(diag, dtype=complex)
        if diag.ndim == 1:
            diag = diag.reshape(-1, 1, 1)
        k = diag.shape[1]
        sub = np.asarray(sub, dtype=complex).reshape(-1, k, k)
        sup = np.asarray(sup, dtype=complex).reshape(-1, k, k)
        return cls(diag, sub, sup, dict(meta or {}))

    @classmethod
    def from_dense(cls, m: np.ndarray, k: int, tol: float = 0.0) -> "BlockTridiagonalMatrix":
        """Re-block a dense matrix; entries outside the block tridiagonal band must be <= tol."""
        m = np.asarray(m, dtype=complex)
        n = m.shape[0]
        if m.shape != (n, n) or n % k:
            raise StructureError(f"cannot re-block a {m.shape} matrix with block size {k}")
        l = n // k
        blocks = m.reshape(l, k, l, k).transpose(0, 2, 1, 3)
        band = np.zeros((l, l), dtype=bool)
        idx = np.arange(l)
        band[idx, idx] = True
        band[idx[1:], idx[:-1]] = True
        band[idx[:-1], idx[1:]] = True
        outside = np.abs(blocks[~band]).max() if (~band).any() else 0.0
        if outside > tol:
            raise StructureError(f"matrix is not block tridiagonal for K={k} (max off-band entry {outside:.3e})")
        return cls(blocks[idx, idx], blocks[idx[1:], idx[:-1]], blocks[idx[:-1], idx[1:]])

    def transpose(self) -> "BlockTridiagonalMatrix":
        """Plain (non-conjugate) transpose; still block tridiagonal."""
        t = lambda a: np.swapaxes(a, 1, 2)
        return BlockTridiagonalMatrix(t(self.diag), t(self.sup), t(self.sub))

    def shifted(self, shift: complex) -> "BlockTridiagonalMatrix":
        """A - shift * I."""
        return BlockTridiagonalMatrix(self.diag - shift * np.eye(self.k), self.sub, self.sup)

    def frobenius_norm(self) -> float:
        return float(math.sqrt(sum(np.sum(np.abs(a) ** 2) for a in (self.diag, self.sub, self.sup))))

    def is_symmetric(self, tol: float = 0.0) -> bool:
        t = self.transpose()
        return all(np.abs(a - b).max(initial=0.0) <= tol for a, b in
                   ((self.diag, t.diag), (self.sub, t.sub), (self.sup, t.sup)))


@dataclass(frozen=True, eq=False)
class BlockCheck:
    kind: str   # "super" or "sub"
    index: int
    sigma_min: float
    sigma_max: float
    ok: bool


@dataclass(frozen=True, eq=False)
class ValidationReport:
    tol: float
    super_blocks: tuple[BlockCheck, ...]
    sub_blocks: tuple[BlockCheck, ...]

    @property
    def passed(self) -> bool:
        return all(c.ok for c in self.super_blocks)

    @property
    def sub_invertible(self) -> bool:
        return all(c.ok for c in self.sub_blocks)

    @property
    def first_failure(self) -> BlockCheck | None:
        return next((c for c in self.super_blocks if not c.ok), None)

    def raise_if_failed(self) -> None:
        bad = self.first_failure
        if bad is not None:
            raise ValidationError(
                f"super-diagonal block D_{bad.index} is singular under tol={self.tol:g} "
                f"(sigma_min={bad.sigma_min:.3e}, sigma_max={bad.sigma_max:.3e})",
                kind="super", index=bad.index)

    def require_sub_invertible(self) -> None:
        bad = next((c for c in self.sub_blocks if not c.ok), None)
        if bad is not None:
            raise ValidationError(
                f"sub-diagonal block C_{bad.index} is singular under tol={self.tol:g} "
                f"(sigma_min={bad.sigma_min:.3e})", kind="sub", index=bad.index)

    def to_dict(self) -> dict:
        row = lambda c: {"index": c.index, "sigma_min": c.sigma_min, "sigma_max": c.sigma_max, "ok": c.ok}
        return {"tol": self.tol, "passed": self.passed, "sub_invertible": self.sub_invertible,
                "super": [row(c) for c in self.super_blocks], "sub": [row(c) for c in self.sub_blocks]}


def _check_blocks(blocks: np.ndarray, kind: str, tol: float) -> tuple[BlockCheck, ...]:
    out = []
    for i, b in enumerate(blocks):
        s = np.linalg.svd(b, compute_uv=False)
        smax, smin = float(s[0]), float(s[-1])
        out.append(BlockCheck(kind, i, smin, smax, smax > 0 and smin > tol * smax))
    return tuple(out)


def validate(a: BlockTridiagonalMatrix, tol: float = 1e-12) -> ValidationReport:
    """Check that every D_n (and, non-fatally, every C_n) is non-singular.

    A block passes when ``sigma_min > tol * sigma_max``.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    return ValidationReport(tol, _check_blocks(a.sup, "super", tol), _check_blocks(a.sub, "sub", tol))


def assemble_dense(a: BlockTridiagonalMatrix) -> np.ndarray:
    k, l = a.k, a.l
    m = np.zeros((a.n, a.n), dtype=complex)
    for i in range(l):
        m[i * k:(i + 1) * k, i * k:(i + 1) * k] = a.diag[i]
        if i < l - 1:
            m[(i + 1) * k:(i + 2) * k, i * k:(i + 1) * k] = a.sub[i]
            m[i * k:(i + 1) * k, (i + 1) * k:(i + 2) * k] = a.sup[i]
    return m


def matvec(a: BlockTridiagonalMatrix, x: np.ndarray) -> np.ndarray:
    """Blockwise product A @ x in O(K^2 L); ``x`` may also be an (N, m) matrix."""
    x = np.asarray(x)
    if x.shape[0] != a.n:
        raise StructureError(f"vector length {x.shape[0]} does not match N={a.n}")
    cols = x.reshape(a.l, a.k, -1)
    y = np.einsum("nij,njm->nim", a.diag, cols)
    if a.l > 1:
        y[1:] += np.einsum("nij,njm->nim", a.sub, cols[:-1])
        y[:-1] += np.einsum("nij,njm->nim", a.sup, cols[1:])
    return y.reshape(x.shape)


# --- file formats -----------------------------------------------------------

def _encode_block(b: np.ndarray) -> list:
    return [[float(z.real), float(z.imag)] for z in np.asarray(b).reshape(-1)]


def _reject_constant(name):
    raise MatrixParseError(f"non-finite literal {name!r} is not allowed")


def _loads(text: str, source: str) -> Any:
    try:
        return json.loads(text, parse_constant=_reject_constant)
    except json.JSONDecodeError as exc:
        raise MatrixParseError(f"{source}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from None


def _decode_entries(raw, count: int, where: str) -> np.ndarray:
    if not isinstance(raw, list) or len(raw) != count:
        got = len(raw) if isinstance(raw, list) else type(raw).__name__
        raise MatrixParseError(f"{where}: expected {count} entries, got {got}")
    out = np.empty(count, dtype=complex)
    for j, e in enumerate(raw):
        if (not isinstance(e, list) or len(e) != 2
                or not all(isinstance(t, (int, float)) and not isinstance(t, bool) for t in e)):
            raise MatrixParseError(f"{where} entry {j}: expected [re, im] pair of numbers, got {e!r}")
        re, im = float(e[0]), float(e[1])
        if not (math.isfinite(re) and math.isfinite(im)):
            raise MatrixParseError(f"{where} entry {j}: non-finite value {e!r}")
        out[j] = complex(re, im)
    return out


def matrix_to_dict(a: BlockTridiagonalMatrix) -> dict:
    d = {"k": a.k, "l": a.l,
         "diag": [_encode_block(b) for b in a.diag],
         "sub": [_encode_block(b) for b in a.sub],
         "super": [_encode_block(b) for b in a.sup]}
    if a.meta:
        d["meta"] = a.meta
    return d


def matrix_from_dict(obj: Any, source: str = "<input>") -> BlockTridiagonalMatrix:
    if not isinstance(obj, dict):
        raise MatrixParseError(f"{source}: top level must be an object")
    for key in ("k", "l", "diag", "sub", "super"):
        if key not in obj:
            raise MatrixParseError(f"{source}: missing field {key!r}")
    k, l = obj["k"], obj["l"]
    if not isinstance(k, int) or not isinstance(l, int) or isinstance(k, bool) or isinstance(l, bool):
        raise MatrixParseError(f"{source}: 'k' and 'l' must be integers")
    if k <= 0 or l <= 0:
        raise StructureError(f"{source}: k and l must be positive (k={k}, l={l})")
    expect = {"diag": l, "sub": l - 1, "super": l - 1}
    stacks = {}
    for key, count in expect.items():
        blocks = obj[key]
        if not isinstance(blocks, list) or len(blocks) != count:
            got = len(blocks) if isinstance(blocks, list) else type(blocks).__name__
            raise MatrixParseError(f"{source}: {key} count: expected {count} blocks, got {got}")
        stacks[key] = np.array([_decode_entries(b, k * k, f"{source}: {key}[{i}]").reshape(k, k)
                                for i, b in enumerate(blocks)]).reshape(count, k, k)
    meta = obj.get("meta") or {}
    return BlockTridiagonalMatrix(stacks["diag"], stacks["sub"], stacks["super"], meta)


def atomic_write_text(path: str | os.PathLike, text: str) -> None:
    """Write via a temporary file in the same directory, then rename."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=".json")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_matrix(a: BlockTridiagonalMatrix, path) -> None:
    atomic_write_text(path, json.dumps(matrix_to_dict(a)) + "\n")


def read_matrix(path) -> BlockTridiagonalMatrix:
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    return matrix_from_dict(_loads(text, os.fspath(path)), os.fspath(path))


def vector_to_dict(v: np.ndarray) -> dict:
    v = np.asarray(v, dtype=complex).reshape(-1)
    return {"n": int(v.size), "v": _encode_block(v)}


def vector_from_dict(obj: Any, source: str = "<input>") -> np.ndarray:
    if not isinstance(obj, dict) or "n" not in obj or "v" not in obj:
        raise MatrixParseError(f"{source}: vector object needs fields 'n' and 'v'")
    n = obj["n"]
    if not isinstance(n, int) or isinstance(n, bool) or n <= 0:
        raise MatrixParseError(f"{source}: 'n' must be a positive integer")
    return _decode_entries(obj["v"], n, f"{source}: v")


def write_vector(v: np.ndarray, path) -> None:
    atomic_write_text(path, json.dumps(vector_to_dict(v)) + "\n")


def read_vector(path) -> np.ndarray:
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    return vector_from_dict(_loads(text, os.fspath(path)), os.fspath(path))
