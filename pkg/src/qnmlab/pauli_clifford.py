"""Pauli and Clifford operators in symplectic form, the subgroup SC(H), twirls.

A Pauli is ``i^phase * X^x Z^z`` (tensor over qubits, qubit 0 leftmost).
A Clifford is stored as the images of the generators X_1..X_n, Z_1..Z_n.

SC(H) on b qubits is realised as Paulis times the symplectic action of
SL(2, GF(2^b)): a Pauli X^x Z^z is identified with the pair
(alpha, gamma) = (sum_i x_i e_i, sum_j z_j e*_j) where e_i = t^i is the
polynomial basis and e*_j its trace-dual basis.  A matrix [[a, b], [c, d]]
with ad + bc = 1 maps (alpha, gamma) to (a alpha + b gamma, c alpha + d gamma),
which preserves the Pauli commutation form.  The group has
4^b * q (q^2 - 1) = 2^{5b} - 2^{3b} elements (q = 2^b), matching the
required size.

Key layout for :func:`sc_samp` (5b bits, MSB first inside every field):

====================  =========================================
bits                  meaning
====================  =========================================
``[0, b)``            Pauli x-part, bit j acts on qubit j
``[b, 2b)``           Pauli z-part, bit j acts on qubit j
``[2b, 3b)``          field element alpha
``[3b, 4b)``          field element beta
``[4b, 5b)``          field element gamma
====================  =========================================

The SL(2) element is

* alpha != 0:            [[alpha, beta], [gamma, (1 + beta gamma) / alpha]]
* alpha == 0, beta != 0: [[0, beta], [1 / beta, gamma]]
* alpha == beta == 0:    [[1, 0], [gamma, 1]]

The first two branches are bijections onto their images; the third hits q
elements a second time, so the induced distribution has statistical distance
(q^2 - 2) / (q^2 (q^2 - 1)) < 2^{-2b} from uniform.  The all-zero key is the
identity.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import cached_property, lru_cache
from typing import Iterable, Sequence

import numpy as np

from .gf2k import field
from .qmatrix import DensityOperator, conjugate_local, herm, psd_sqrt

DENSE_MAX_QUBITS = 12

_I2 = np.eye(2, dtype=complex)
_X = np.array([[0, 1], [1, 0]], dtype=complex)
_Z = np.array([[1, 0], [0, -1]], dtype=complex)
_XZ = _X @ _Z
_SINGLE = {(0, 0): _I2, (1, 0): _X, (0, 1): _Z, (1, 1): _XZ}


def _bits(v: Iterable[int]) -> tuple[int, ...]:
    return tuple(int(b) & 1 for b in v)


@dataclass(frozen=True)
class PauliOp:
    """``i^phase * prod_j X_j^{x_j} Z_j^{z_j}``."""

    x: tuple[int, ...]
    z: tuple[int, ...]
    phase: int = 0

    def __post_init__(self):
        x, z = _bits(self.x), _bits(self.z)
        if len(x) != len(z):
            raise ValueError("x and z parts must have equal length")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "phase", int(self.phase) % 4)

    @property
    def n(self) -> int:
        return len(self.x)

    @classmethod
    def identity(cls, n: int) -> "PauliOp":
        return cls((0,) * n, (0,) * n)

    @classmethod
    def hermitian(cls, x: Sequence[int], z: Sequence[int]) -> "PauliOp":
        """The Hermitian representative with sign +1 (Y = iXZ)."""
        x, z = _bits(x), _bits(z)
        return cls(x, z, sum(a & b for a, b in zip(x, z)))

    @classmethod
    def from_text(cls, text: str) -> "PauliOp":
        """Parse e.g. ``"XIZ"``, ``"-Y"``, ``"iZZ"``; Y means iXZ."""
        s = text.strip()
        phase = 0
        for prefix, ph in (("+i", 1), ("-i", 3), ("i", 1), ("+", 0), ("-", 2)):
            if s.startswith(prefix) and len(s) > len(prefix) and s[len(prefix)] in "IXYZ":
                phase = ph
                s = s[len(prefix):]
                break
        if not s or any(c not in "IXYZ" for c in s):
            raise ValueError(f"invalid Pauli string {text!r}")
        x = tuple(int(c in "XY") for c in s)
        z = tuple(int(c in "ZY") for c in s)
        return cls(x, z, phase + s.count("Y"))

    def to_text(self) -> str:
        letters = "".join("IXZY"[a + 2 * b] for a, b in zip(self.x, self.z))
        ph = (self.phase - letters.count("Y")) % 4
        return ["", "i", "-", "-i"][ph] + letters

    def __str__(self) -> str:
        return self.to_text()

    @property
    def weight(self) -> int:
        return sum(a | b for a, b in zip(self.x, self.z))

    def is_identity(self) -> bool:
        return not any(self.x) and not any(self.z)

    def is_hermitian(self) -> bool:
        return self.phase % 2 == sum(a & b for a, b in zip(self.x, self.z)) % 2

    def same_up_to_phase(self, other: "PauliOp") -> bool:
        return self.x == other.x and self.z == other.z

    def unsigned(self) -> "PauliOp":
        return PauliOp.hermitian(self.x, self.z)

    def __mul__(self, other: "PauliOp") -> "PauliOp":
        if self.n != other.n:
            raise ValueError("Pauli length mismatch")
        sign = sum(a & b for a, b in zip(self.z, other.x))
        x = tuple(a ^ b for a, b in zip(self.x, other.x))
        z = tuple(a ^ b for a, b in zip(self.z, other.z))
        return PauliOp(x, z, self.phase + other.phase + 2 * sign)

    def adjoint(self) -> "PauliOp":
        # (X^x Z^z)^dagger = Z^z X^x = (-1)^{x.z} X^x Z^z
        xz = sum(a & b for a, b in zip(self.x, self.z))
        return PauliOp(self.x, self.z, -self.phase + 2 * xz)

    def commutes_with(self, other: "PauliOp") -> bool:
        s = sum(a & b for a, b in zip(self.x, other.z)) + sum(a & b for a, b in zip(self.z, other.x))
        return s % 2 == 0

    def symplectic_vector(self) -> np.ndarray:
        return np.array(self.x + self.z, dtype=np.uint8)


def all_paulis(n: int) -> list[PauliOp]:
    """The 4^n Hermitian Paulis, ordered by (x, z) as integers."""
    out = []
    for xs in itertools.product((0, 1), repeat=n):
        for zs in itertools.product((0, 1), repeat=n):
            out.append(PauliOp.hermitian(xs, zs))
    return out


def pauli_dense(p: PauliOp) -> np.ndarray:
    """Dense matrix of a Pauli operator."""
    if p.n > DENSE_MAX_QUBITS:
        raise ValueError(f"dense form limited to {DENSE_MAX_QUBITS} qubits")
    m = np.ones((1, 1), dtype=complex)
    for a, b in zip(p.x, p.z):
        m = np.kron(m, _SINGLE[(a, b)])
    return (1j ** p.phase) * m


def pauli_decompose(m: np.ndarray, tol: float = 0.0) -> dict[PauliOp, complex]:
    """Coefficients ``Tr(P^dagger M) / 2^n`` over Hermitian Paulis.

    Entries with magnitude ``<= tol`` are dropped.
    """
    m = np.asarray(m, dtype=complex)
    d = m.shape[0]
    if m.shape != (d, d) or d & (d - 1) or d < 1:
        raise ValueError("pauli_decompose needs a square matrix of size 2^n")
    n = d.bit_length() - 1
    out = {}
    for p in all_paulis(n):
        c = complex(np.trace(pauli_dense(p).conj().T @ m) / d)
        if abs(c) > tol:
            out[p] = c
    return out


# ---------------------------------------------------------------------------
# Clifford tableau


@dataclass(frozen=True, eq=False)
class CliffordOp:
    """Clifford given by generator images ``C X_j C^dagger``, ``C Z_j C^dagger``."""

    images: tuple[PauliOp, ...]

    def __post_init__(self):
        imgs = tuple(self.images)
        if len(imgs) % 2 or any(p.n * 2 != len(imgs) for p in imgs):
            raise ValueError("need 2n images of n-qubit Paulis")
        object.__setattr__(self, "images", imgs)

    @property
    def n(self) -> int:
        return len(self.images) // 2

    @classmethod
    def identity(cls, n: int) -> "CliffordOp":
        imgs = [PauliOp(tuple(int(i == j) for i in range(n)), (0,) * n) for j in range(n)]
        imgs += [PauliOp((0,) * n, tuple(int(i == j) for i in range(n))) for j in range(n)]
        return cls(tuple(imgs))

    @classmethod
    def from_pauli(cls, p: PauliOp) -> "CliffordOp":
        """Conjugation by a Pauli: generator signs flip on anticommutation."""
        ident = cls.identity(p.n)
        imgs = tuple(PauliOp(g.x, g.z, g.phase + (0 if p.commutes_with(g) else 2)) for g in ident.images)
        return cls(imgs)

    @property
    def symplectic(self) -> np.ndarray:
        """2n x 2n GF(2) matrix whose columns are the (x|z) images."""
        return np.array([p.symplectic_vector() for p in self.images], dtype=np.uint8).T

    @property
    def phase_vector(self) -> tuple[int, ...]:
        return tuple(p.phase for p in self.images)

    def key(self) -> tuple:
        """Hashable identity up to global phase."""
        return tuple((p.x, p.z, p.phase) for p in self.images)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, CliffordOp) and self.key() == other.key()

    def __hash__(self) -> int:
        return hash(self.key())

    def is_symplectic(self) -> bool:
        s = self.symplectic.astype(np.int64)
        n = self.n
        omega = np.block([[np.zeros((n, n)), np.eye(n)], [np.eye(n), np.zeros((n, n))]]).astype(np.int64)
        return bool(np.array_equal((s.T @ omega @ s) % 2, omega))

    def conjugate(self, p: PauliOp) -> PauliOp:
        """``C P C^dagger`` via generator images, X factors first."""
        if p.n != self.n:
            raise ValueError("Pauli length mismatch")
        out = PauliOp((0,) * self.n, (0,) * self.n, p.phase)
        for j, bit in enumerate(p.x):
            if bit:
                out = out * self.images[j]
        for j, bit in enumerate(p.z):
            if bit:
                out = out * self.images[self.n + j]
        return out

    def conjugate_dagger(self, p: PauliOp) -> PauliOp:
        """``C^dagger P C``."""
        return self.inverse().conjugate(p)

    def compose(self, other: "CliffordOp") -> "CliffordOp":
        """Tableau of ``self @ other`` (other acts first)."""
        return CliffordOp(tuple(self.conjugate(g) for g in other.images))

    def __matmul__(self, other: "CliffordOp") -> "CliffordOp":
        return self.compose(other)

    @cached_property
    def _inverse(self) -> "CliffordOp":
        n = self.n
        s = self.symplectic.astype(np.int64)
        omega = np.block([[np.zeros((n, n)), np.eye(n)], [np.eye(n), np.zeros((n, n))]]).astype(np.int64)
        s_inv = (omega @ s.T @ omega) % 2
        imgs = []
        for g in CliffordOp.identity(n).images:
            col = s_inv @ g.symplectic_vector().astype(np.int64) % 2
            cand = PauliOp(tuple(col[:n]), tuple(col[n:]), 0)
            back = self.conjugate(cand)
            if not back.same_up_to_phase(g):
                raise ValueError("tableau is not symplectic")
            imgs.append(PauliOp(cand.x, cand.z, g.phase - back.phase))
        return CliffordOp(tuple(imgs))

    def inverse(self) -> "CliffordOp":
        return self._inverse

    @cached_property
    def _dense(self) -> np.ndarray:
        n = self.n
        if n > DENSE_MAX_QUBITS:
            raise ValueError(f"dense form limited to {DENSE_MAX_QUBITS} qubits")
        d = 1 << n
        proj = np.eye(d, dtype=complex)
        for j in range(n):
            proj = proj @ (np.eye(d) + pauli_dense(self.images[n + j])) / 2
        col = int(np.argmax(np.linalg.norm(proj, axis=0)))
        u0 = proj[:, col] / np.linalg.norm(proj[:, col])
        lead = u0[np.argmax(np.abs(u0) > 1e-9)]
        u0 = u0 * (abs(lead) / lead)
        xs = [pauli_dense(self.images[j]) for j in range(n)]
        u = np.zeros((d, d), dtype=complex)
        for idx in range(d):
            v = u0
            for j in range(n):
                if (idx >> (n - 1 - j)) & 1:
                    v = xs[j] @ v
            u[:, idx] = v
        u.setflags(write=False)
        return u

    def dense(self) -> np.ndarray:
        return self._dense


def clifford_dense(c: CliffordOp) -> np.ndarray:
    """Dense unitary (fixed global phase convention)."""
    return c.dense()


def conjugate(c: CliffordOp, p: PauliOp) -> PauliOp:
    return c.conjugate(p)


def random_clifford_layer(n: int, rng: np.random.Generator, depth: int = 6) -> CliffordOp:
    """Random Clifford from H, S and CNOT layers (for tests and zoo)."""
    c = CliffordOp.identity(n)
    for _ in range(depth):
        for q in range(n):
            g = int(rng.integers(3))
            if g == 0:
                c = hadamard(n, q) @ c
            elif g == 1:
                c = phase_gate(n, q) @ c
        if n > 1:
            a, b = rng.choice(n, size=2, replace=False)
            c = cnot(n, int(a), int(b)) @ c
    return c


def hadamard(n: int, q: int) -> CliffordOp:
    imgs = list(CliffordOp.identity(n).images)
    imgs[q], imgs[n + q] = imgs[n + q], imgs[q]
    return CliffordOp(tuple(imgs))


def phase_gate(n: int, q: int) -> CliffordOp:
    imgs = list(CliffordOp.identity(n).images)
    x = imgs[q]
    imgs[q] = PauliOp.hermitian(x.x, tuple(int(i == q) for i in range(n)))
    return CliffordOp(tuple(imgs))


def cnot(n: int, control: int, target: int) -> CliffordOp:
    imgs = list(CliffordOp.identity(n).images)
    xc = [0] * n
    xc[control] = xc[target] = 1
    imgs[control] = PauliOp(tuple(xc), (0,) * n)
    zt = [0] * n
    zt[control] = zt[target] = 1
    imgs[n + target] = PauliOp((0,) * n, tuple(zt))
    return CliffordOp(tuple(imgs))


# ---------------------------------------------------------------------------
# SC(H)


@dataclass(frozen=True)
class SubCliffordKey:
    """Key of exactly 5b bits."""

    bits: tuple[int, ...]

    def __post_init__(self):
        bits = _bits(self.bits)
        if len(bits) == 0 or len(bits) % 5:
            raise ValueError(f"key length {len(bits)} is not a positive multiple of 5")
        object.__setattr__(self, "bits", bits)

    @property
    def b(self) -> int:
        return len(self.bits) // 5

    @classmethod
    def from_int(cls, value: int, b: int) -> "SubCliffordKey":
        nbits = 5 * b
        if not 0 <= value < 1 << nbits:
            raise ValueError("key value out of range")
        return cls(tuple((value >> (nbits - 1 - i)) & 1 for i in range(nbits)))

    def to_int(self) -> int:
        v = 0
        for bit in self.bits:
            v = (v << 1) | bit
        return v


def _chunk_int(bits: Sequence[int]) -> int:
    v = 0
    for bit in bits:
        v = (v << 1) | bit
    return v


def sl2_from_triple(alpha: int, beta: int, gamma: int, b: int) -> tuple[int, int, int, int]:
    """Map (alpha, beta, gamma) in GF(2^b)^3 onto SL(2, GF(2^b))."""
    f = field(b)
    if alpha:
        return alpha, beta, gamma, f.div(1 ^ f.mul(beta, gamma), alpha)
    if beta:
        return 0, beta, f.inv(beta), gamma
    return 1, 0, gamma, 1


def _to_pair(x: Sequence[int], z: Sequence[int], b: int) -> tuple[int, int]:
    """Pauli bits to (alpha, gamma) in GF(2^b)."""
    dual = field(b).dual_basis()
    alpha = sum(bit << i for i, bit in enumerate(x))
    gamma = 0
    for j, bit in enumerate(z):
        if bit:
            gamma ^= dual[j]
    return alpha, gamma


def _from_pair(alpha: int, gamma: int, b: int) -> tuple[tuple[int, ...], tuple[int, ...]]:
    f = field(b)
    x = tuple((alpha >> i) & 1 for i in range(b))
    z = tuple(f.trace(f.mul(gamma, 1 << j)) for j in range(b))
    return x, z


@lru_cache(maxsize=None)
def sl2_clifford(a: int, bb: int, c: int, d: int, b: int) -> CliffordOp:
    """Clifford whose symplectic action is the SL(2) matrix, Hermitian + signs."""
    f = field(b)
    if f.mul(a, d) ^ f.mul(bb, c) != 1:
        raise ValueError("matrix is not in SL(2)")
    imgs = []
    for i in range(b):
        al, ga = 1 << i, 0
        imgs.append(PauliOp.hermitian(*_from_pair(f.mul(a, al) ^ f.mul(bb, ga), f.mul(c, al) ^ f.mul(d, ga), b)))
    dual = f.dual_basis()
    for j in range(b):
        al, ga = 0, dual[j]
        imgs.append(PauliOp.hermitian(*_from_pair(f.mul(a, al) ^ f.mul(bb, ga), f.mul(c, al) ^ f.mul(d, ga), b)))
    return CliffordOp(tuple(imgs))


def sc_element(pauli: PauliOp, sl2: tuple[int, int, int, int]) -> CliffordOp:
    """The SC element ``P * C_S``."""
    b = pauli.n
    return CliffordOp.from_pauli(pauli) @ sl2_clifford(*sl2, b)


def sc_samp(key: SubCliffordKey | Sequence[int]) -> CliffordOp:
    """Deterministic map from a 5b-bit key into SC(H) (layout in module docs)."""
    if not isinstance(key, SubCliffordKey):
        key = SubCliffordKey(tuple(key))
    return _sc_samp_cached(key.bits)


@lru_cache(maxsize=4096)
def _sc_samp_cached(bits: tuple[int, ...]) -> CliffordOp:
    b = len(bits) // 5
    x, z = bits[:b], bits[b : 2 * b]
    alpha = _chunk_int(bits[2 * b : 3 * b])
    beta = _chunk_int(bits[3 * b : 4 * b])
    gamma = _chunk_int(bits[4 * b : 5 * b])
    return sc_element(PauliOp(x, z), sl2_from_triple(alpha, beta, gamma, b))


def sl2_elements(b: int) -> list[tuple[int, int, int, int]]:
    f = field(b)
    q = f.order
    out = []
    for a, bb, c, d in itertools.product(range(q), repeat=4):
        if f.mul(a, d) ^ f.mul(bb, c) == 1:
            out.append((a, bb, c, d))
    return out


@lru_cache(maxsize=None)
def _sc_enumerate(b: int) -> tuple[CliffordOp, ...]:
    paulis = [PauliOp(xs, zs) for xs in itertools.product((0, 1), repeat=b)
              for zs in itertools.product((0, 1), repeat=b)]
    return tuple(sc_element(p, s) for s in sl2_elements(b) for p in paulis)


def sc_enumerate(b: int) -> list[CliffordOp]:
    """All 2^{5b} - 2^{3b} elements of SC(H) on b qubits (b <= 2)."""
    if b < 1 or b > 2:
        raise ValueError("sc_enumerate supports b in {1, 2}")
    return list(_sc_enumerate(b))


def sc_index(c: CliffordOp) -> int:
    """Position of ``c`` in :func:`sc_enumerate` (up to global phase)."""
    table = _sc_index_table(c.n)
    return table[c.key()]


@lru_cache(maxsize=None)
def _sc_index_table(b: int) -> dict:
    return {c.key(): i for i, c in enumerate(_sc_enumerate(b))}


def samp_distribution(b: int) -> np.ndarray:
    """Exact distribution over ``sc_enumerate(b)`` induced by uniform keys."""
    counts = np.zeros(len(_sc_enumerate(b)))
    for v in range(1 << (5 * b)):
        counts[sc_index(sc_samp(SubCliffordKey.from_int(v, b)))] += 1
    return counts / counts.sum()


def samp_statistical_distance(b: int) -> float:
    """Half L1 distance between the Samp distribution and uniform on SC."""
    p = samp_distribution(b)
    return float(0.5 * np.abs(p - 1.0 / len(p)).sum())


# ---------------------------------------------------------------------------
# twirls


def _as_unitaries(group: Iterable) -> list[np.ndarray]:
    out = []
    for g in group:
        if isinstance(g, CliffordOp):
            out.append(g.dense())
        elif isinstance(g, PauliOp):
            out.append(pauli_dense(g))
        else:
            out.append(np.asarray(g, dtype=complex))
    if not out:
        raise ValueError("empty group")
    return out


def group_twirl(m: np.ndarray, group: Iterable, dims: Sequence[int] | None = None, target: int = 0) -> np.ndarray:
    """``(1/|G|) sum_G (G (x) I) M (G^dagger (x) I)`` on register ``target``.

    Sums in the iteration order of ``group``.
    """
    us = _as_unitaries(group)
    m = np.asarray(m, dtype=complex)
    if dims is None:
        dims = [us[0].shape[0], m.shape[0] // us[0].shape[0]]
    acc = np.zeros_like(m)
    for u in us:
        acc += conjugate_local(m, dims, u, [target])[0]
    return acc / len(us)


def pauli_group(n: int) -> list[PauliOp]:
    """Phase-free Paulis X^x Z^z (the quotient used in twirl sums)."""
    return [PauliOp(xs, zs) for xs in itertools.product((0, 1), repeat=n)
            for zs in itertools.product((0, 1), repeat=n)]


def twirl_cross_term(p: PauliOp, q: PauliOp, rho: np.ndarray, group: str | Iterable = "sc",
                     modified: bool = False) -> np.ndarray:
    """Cross-term group sums.

    ``modified=False``: ``sum_C C^dagger P C rho C^dagger Q^dagger C`` with rho on A.
    ``modified=True``:  ``sum_C (I (x) C^dagger P C) rho (I (x) C^dagger Q C)`` with
    rho on (A_hat, A).
    """
    n = p.n
    if isinstance(group, str):
        if group == "sc":
            elems = sc_enumerate(n)
        elif group == "pauli":
            elems = [CliffordOp.from_pauli(g) for g in pauli_group(n)]
        else:
            raise ValueError(f"unknown group {group!r}")
    else:
        elems = list(group)
    rho = np.asarray(rho, dtype=complex)
    pd, qd = pauli_dense(p), pauli_dense(q)
    acc = np.zeros_like(rho)
    d = 1 << n
    for c in elems:
        u = c.dense() if isinstance(c, CliffordOp) else np.asarray(c)
        left = u.conj().T @ pd @ u
        if modified:
            right = u.conj().T @ qd @ u
            lk, rk = np.kron(np.eye(rho.shape[0] // d), left), np.kron(np.eye(rho.shape[0] // d), right)
            acc += lk @ rho @ rk
        else:
            right = u.conj().T @ qd.conj().T @ u
            acc += left @ rho @ right
    return acc


def epr_projector(b: int) -> np.ndarray:
    d = 1 << b
    v = np.eye(d).reshape(-1) / np.sqrt(d)
    return np.outer(v, v).astype(complex)


@dataclass(frozen=True)
class EprTwirl:
    p_epr: float
    twirled: DensityOperator
    closed_form: np.ndarray
    closed_form_residual: float
    approx_distance: float


def epr_twirl_decomposition(rho: DensityOperator) -> EprTwirl:
    """Twirl a state on (A_hat, A) by ``C^T (x) C^dagger`` over SC(H).

    Returns the EPR overlap ``Tr(Pi rho)``, the exact twirled state, the
    closed form ``p psi + (1 - p)(4^b U(x)U - psi)/(4^b - 1)``, their
    residual, and the trace distance from the twirled state to
    ``p psi + (1 - p) U(x)U``.
    """
    if len(rho.dims) != 2 or rho.dims[0] != rho.dims[1]:
        raise ValueError("epr_twirl_decomposition needs two equal-dimension registers")
    d = rho.dims[0]
    b = d.bit_length() - 1
    if 1 << b != d:
        raise ValueError("register dimension must be a power of two")
    psi = epr_projector(b)
    m = rho.matrix
    acc = np.zeros_like(m)
    for c in sc_enumerate(b):
        u = c.dense()
        k = np.kron(u.T, u.conj().T)
        acc += k @ m @ k.conj().T
    acc /= len(sc_enumerate(b))
    p = float(np.trace(psi @ m).real)
    uu = np.eye(d * d) / (d * d)
    closed = p * psi + (1 - p) * ((d * d) * uu - psi) / (d * d - 1)
    resid = float(np.linalg.norm(acc - closed))
    approx = float(np.sum(np.abs(np.linalg.eigvalsh(herm(acc - (p * psi + (1 - p) * uu))))))
    return EprTwirl(p, DensityOperator(acc, rho.layout), closed, resid, approx)


def transpose_kraus_for(sigma: np.ndarray) -> np.ndarray:
    """Operator K on the copy register with (I (x) K)|Phi> proportional to the purification of sigma.

    ``K = sqrt(sigma)^T / sqrt(lambda_max(sigma))`` so that ``K^dagger K <= I``.
    """
    s = psd_sqrt(sigma)
    lam = float(np.linalg.eigvalsh(herm(sigma)).max())
    return s.T / np.sqrt(lam)


__all__ = [
    "PauliOp",
    "CliffordOp",
    "SubCliffordKey",
    "pauli_dense",
    "clifford_dense",
    "pauli_decompose",
    "all_paulis",
    "pauli_group",
    "sc_enumerate",
    "sc_samp",
    "sc_index",
    "samp_distribution",
    "samp_statistical_distance",
    "group_twirl",
    "twirl_cross_term",
    "epr_twirl_decomposition",
    "epr_projector",
    "EprTwirl",
    "conjugate",
    "hadamard",
    "phase_gate",
    "cnot",
    "random_clifford_layer",
    "sc_element",
    "sl2_elements",
    "sl2_from_triple",
    "sl2_clifford",
    "transpose_kraus_for",
]
