"""
Unscaled DST-I with an instrumented radix-2 FFT.

    (DST-I v)_j = sum_i v_i sin(pi (i+1)(j+1) / (L+1)),   0 <= i, j < L.

The fast path embeds v in an odd sequence of length 2(L+1) and takes one
FFT, so it needs L+1 to be a power of two; other sizes use direct summation.
Operation counts are real additions and multiplications actually performed
by this implementation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class OpCounter:
    """Tally of real additions and multiplications."""

    adds: int = 0
    muls: int = 0

    @property
    def total(self) -> int:
        return self.adds + self.muls

    def add(self, adds: int = 0, muls: int = 0) -> None:
        self.adds += int(adds)
        self.muls += int(muls)

    def reset(self) -> None:
        self.adds = self.muls = 0

    def to_dict(self) -> dict:
        return {"adds": self.adds, "muls": self.muls, "total": self.total}


def is_power_of_two(n: int) -> bool:
    return n > 0 and n & (n - 1) == 0


def fast_supported(l: int) -> bool:
    return is_power_of_two(l + 1)


def _bit_reverse(m: int) -> np.ndarray:
    bits = m.bit_length() - 1
    idx = np.arange(m)
    rev = np.zeros(m, dtype=int)
    for b in range(bits):
        rev |= ((idx >> b) & 1) << (bits - 1 - b)
    return rev


def fft_radix2(x: np.ndarray, counter: OpCounter | None = None) -> np.ndarray:
    """Iterative decimation-in-time FFT along axis 0 (length a power of two).

    Each butterfly costs one complex multiplication (4 mul + 2 add) and two
    complex additions (4 add), counted per column.
    """
    x = np.asarray(x, dtype=complex)
    m = x.shape[0]
    if not is_power_of_two(m):
        raise ValueError(f"radix-2 FFT needs a power-of-two length, got {m}")
    cols = int(np.prod(x.shape[1:], dtype=int))
    a = x[_bit_reverse(m)].copy()
    half = 1
    while half < m:
        w = np.exp(-1j * np.pi * np.arange(half) / half)
        a = a.reshape((m // (2 * half), 2, half) + x.shape[1:])
        t = a[:, 1] * w.reshape((1, half) + (1,) * (x.ndim - 1))
        top = a[:, 0] + t
        bot = a[:, 0] - t
        a = np.stack([top, bot], axis=1).reshape(x.shape)
        if counter is not None:
            counter.add(adds=(2 + 4) * (m // 2) * cols, muls=4 * (m // 2) * cols)
        half *= 2
    return a


def dst1_direct(v: np.ndarray, counter: OpCounter | None = None) -> np.ndarray:
    """O(L^2) summation along axis 0."""
    v = np.asarray(v)
    l = v.shape[0]
    i = np.arange(1, l + 1)
    s = np.sin(np.pi * np.outer(i, i) / (l + 1))
    if counter is not None:
        cols = int(np.prod(v.shape[1:], dtype=int))
        counter.add(adds=l * (l - 1) * cols, muls=l * l * cols)
    return np.tensordot(s, v, axes=(1, 0))


def dst1_fast(v: np.ndarray, counter: OpCounter | None = None) -> np.ndarray:
    """DST-I through one FFT of the length-2(L+1) odd extension; L+1 must be a power of two."""
    v = np.asarray(v)
    l = v.shape[0]
    if not fast_supported(l):
        raise ValueError(f"fast DST-I needs L+1 to be a power of two, got L={l}")
    m = 2 * (l + 1)
    ext = np.zeros((m,) + v.shape[1:], dtype=complex)
    ext[1:l + 1] = v
    ext[l + 2:] = -v[::-1]
    x = fft_radix2(ext, counter)
    out = 0.5j * x[1:l + 1]
    if counter is not None:
        cols = int(np.prod(v.shape[1:], dtype=int))
        # negation for the odd half and the final scaling by i/2
        counter.add(muls=(l + 2 * l) * cols)
    return out.real if np.isrealobj(v) else out


def dst1(v: np.ndarray, counter: OpCounter | None = None, method: str = "auto") -> np.ndarray:
    """Unscaled DST-I along axis 0; ``method`` is ``auto``, ``fast`` or ``direct``."""
    if method not in ("auto", "fast", "direct"):
        raise ValueError(f"unknown DST method {method!r}")
    l = np.shape(v)[0]
    if method == "fast" or (method == "auto" and fast_supported(l)):
        return dst1_fast(v, counter)
    return dst1_direct(v, counter)
