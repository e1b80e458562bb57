"""Arithmetic in GF(2^k) via log/antilog tables.

Elements are plain ints in ``[0, 2^k)`` whose bits are polynomial
coefficients over GF(2).  Each field is built from a fixed primitive
polynomial so tables are reproducible.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

# Primitive polynomials (bit i = coefficient of x^i), one per degree.
PRIMITIVE_POLYS: dict[int, int] = {
    1: 0x3,
    2: 0x7,
    3: 0xB,
    4: 0x13,
    5: 0x25,
    6: 0x43,
    7: 0x83,
    8: 0x11D,
    9: 0x211,
    10: 0x409,
    11: 0x805,
    12: 0x1053,
    13: 0x201B,
    14: 0x402B,
    15: 0x8003,
    16: 0x1002D,
}


def clmul_mod(a: int, b: int, k: int, poly: int) -> int:
    """Schoolbook carry-less multiply then reduce; slow reference path."""
    acc = 0
    while b:
        if b & 1:
            acc ^= a
        b >>= 1
        a <<= 1
        if a >> k:
            a ^= poly
    return acc


class GF2k:
    """The field GF(2^k) with vectorised multiply/inverse."""

    def __init__(self, k: int):
        if k not in PRIMITIVE_POLYS:
            raise ValueError(f"unsupported field degree k={k}")
        self.k = k
        self.order = 1 << k
        self.poly = PRIMITIVE_POLYS[k]
        n = self.order - 1
        exp = np.zeros(2 * n + 1, dtype=np.int64)
        log = np.full(self.order, -1, dtype=np.int64)
        v = 1
        for i in range(n):
            exp[i] = v
            log[v] = i
            v = clmul_mod(v, 2, k, self.poly) if k > 1 else v
        exp[n : 2 * n] = exp[:n]
        exp[2 * n] = exp[0]
        if k > 1 and len(set(exp[:n].tolist())) != n:
            raise ValueError(f"polynomial {self.poly:#x} is not primitive")
        self._exp = exp
        self._log = log

    def __repr__(self) -> str:
        return f"GF2k(k={self.k}, poly={self.poly:#x})"

    def __eq__(self, other: object) -> bool:
        return isinstance(other, GF2k) and other.k == self.k

    def __hash__(self) -> int:
        return hash(("GF2k", self.k))

    def add(self, a, b):
        return np.bitwise_xor(a, b)

    def mul(self, a, b):
        a = np.asarray(a, dtype=np.int64)
        b = np.asarray(b, dtype=np.int64)
        zero = (a == 0) | (b == 0)
        la = self._log[np.where(a == 0, 1, a)]
        lb = self._log[np.where(b == 0, 1, b)]
        out = self._exp[la + lb]
        out = np.where(zero, 0, out)
        return int(out) if out.ndim == 0 else out

    def inv(self, a):
        a = np.asarray(a, dtype=np.int64)
        if np.any(a == 0):
            raise ZeroDivisionError("inverse of zero in GF(2^k)")
        out = self._exp[(self.order - 1 - self._log[a]) % (self.order - 1)]
        return int(out) if out.ndim == 0 else out

    def div(self, a, b):
        return self.mul(a, self.inv(b))

    def pow(self, a: int, e: int) -> int:
        if e == 0:
            return 1
        if a == 0:
            return 0
        return int(self._exp[(int(self._log[a]) * e) % (self.order - 1)])

    def dot(self, x, y) -> int:
        """Inner product of two equal-length element vectors."""
        prods = self.mul(np.asarray(x), np.asarray(y))
        return int(np.bitwise_xor.reduce(np.atleast_1d(prods)))

    def trace(self, a: int) -> int:
        """Absolute trace to GF(2): a + a^2 + ... + a^(2^(k-1))."""
        t, v = 0, a
        for _ in range(self.k):
            t ^= v
            v = self.mul(v, v)
        return int(t)

    def dual_basis(self) -> list[int]:
        """Basis dual to the polynomial basis {x^i} under the trace form."""
        k = self.k
        gram = np.array(
            [[self.trace(self.mul(1 << i, 1 << j)) for j in range(k)] for i in range(k)],
            dtype=np.int64,
        )
        ginv = gf2_matrix_inverse(gram)
        # dual_j = sum_i ginv[j, i] x^i satisfies Tr(x^l dual_j) = delta_lj
        return [int(sum(int(ginv[j, i]) << i for i in range(k))) for j in range(k)]


def gf2_matrix_inverse(m: np.ndarray) -> np.ndarray:
    """Inverse of a square 0/1 matrix over GF(2) by Gauss-Jordan."""
    n = m.shape[0]
    aug = np.concatenate([np.asarray(m, dtype=np.uint8) % 2, np.eye(n, dtype=np.uint8)], axis=1)
    for col in range(n):
        piv = next((r for r in range(col, n) if aug[r, col]), None)
        if piv is None:
            raise ValueError("matrix is singular over GF(2)")
        if piv != col:
            aug[[col, piv]] = aug[[piv, col]]
        for r in range(n):
            if r != col and aug[r, col]:
                aug[r] ^= aug[col]
    return aug[:, n:].astype(np.int64)


@lru_cache(maxsize=None)
def field(k: int) -> GF2k:
    """Cached field instance."""
    return GF2k(k)
