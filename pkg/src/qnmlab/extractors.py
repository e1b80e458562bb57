"""Inner-product extractor, qpa-state checks and the non-malleable extractor contract.

Bit strings are tuples of 0/1 read MSB first; the matching integer is
used as a table index.  A field vector over GF(2^k) of length N is read
from k*N bits, one MSB-first k-bit chunk per coordinate.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

from .gf2k import field
from .qmatrix import DensityOperator, MinEntropy, hmin


def int_to_bits(v: int, n: int) -> tuple[int, ...]:
    return tuple((int(v) >> (n - 1 - i)) & 1 for i in range(n))


def bits_to_int(bits: Sequence[int]) -> int:
    v = 0
    for b in bits:
        v = (v << 1) | (int(b) & 1)
    return v


@dataclass(frozen=True)
class FieldVector:
    """Vector over GF(2^k)."""

    k: int
    elements: tuple[int, ...]

    def __post_init__(self):
        els = tuple(int(e) for e in self.elements)
        q = 1 << self.k
        if any(not 0 <= e < q for e in els):
            raise ValueError("field vector element out of range")
        object.__setattr__(self, "elements", els)

    @property
    def q(self) -> int:
        return 1 << self.k

    @property
    def N(self) -> int:
        return len(self.elements)

    def is_zero(self) -> bool:
        return not any(self.elements)

    def to_hex(self) -> str:
        width = max(1, (self.k + 3) // 4)
        return "".join(f"{e:0{width}x}" for e in self.elements)

    @classmethod
    def from_hex(cls, k: int, text: str) -> "FieldVector":
        width = max(1, (k + 3) // 4)
        return cls(k, tuple(int(text[i : i + width], 16) for i in range(0, len(text), width)))

    @classmethod
    def from_int(cls, k: int, N: int, v: int) -> "FieldVector":
        """Coordinates are k-bit chunks of ``v``, first coordinate most significant."""
        mask = (1 << k) - 1
        return cls(k, tuple((v >> (k * (N - 1 - i))) & mask for i in range(N)))

    def to_int(self) -> int:
        v = 0
        for e in self.elements:
            v = (v << self.k) | e
        return v


def ip_extract(x: FieldVector, y: FieldVector) -> int:
    """Inner product ``sum_i x_i y_i`` over GF(2^k)."""
    if x.k != y.k or x.N != y.N:
        raise ValueError("field vectors differ in field or length")
    return field(x.k).dot(x.elements, y.elements)


def ip_preimage_count(s: int, k: int, N: int) -> int:
    """|IP^{-1}(s)| over GF(2^k)^N x GF(2^k)^N."""
    q = 1 << k
    if s == 0:
        return q ** (2 * N - 1) + q**N - q ** (N - 1)
    return q ** (2 * N - 1) - q ** (N - 1)


def ip_half_marginal(s: int, k: int, N: int) -> tuple[float, float]:
    """Probability of one fixed zero / fixed nonzero left half under uniform preimage sampling."""
    q = 1 << k
    total = ip_preimage_count(s, k, N)
    p_zero = (q**N if s == 0 else 0) / total
    p_nonzero = q ** (N - 1) / total
    return p_zero, p_nonzero


def ip_preimage_enumerate(s: int, k: int, N: int) -> list[tuple[FieldVector, FieldVector]]:
    """All pairs with IP = s (exhaustive; small fields only)."""
    f = field(k)
    q = 1 << k
    out = []
    for xv in itertools.product(range(q), repeat=N):
        for yv in itertools.product(range(q), repeat=N):
            if f.dot(xv, yv) == s:
                out.append((FieldVector(k, xv), FieldVector(k, yv)))
    return out


def ip_preimage_sample(s: int, k: int, N: int, rng: np.random.Generator) -> tuple[FieldVector, FieldVector]:
    """Uniform sample from IP^{-1}(s).

    The left half is zero with probability ``q^N [s=0] / |IP^{-1}(s)|`` and
    otherwise uniform on nonzero vectors (nonzero draws resample on zero);
    the right half is uniform over solutions of the linear equation.
    """
    f = field(k)
    q = 1 << k
    if not 0 <= s < q:
        raise ValueError("secret outside the field")
    if N < 1:
        raise ValueError("N must be positive")
    if s == 0 and rng.random() < q**N / ip_preimage_count(0, k, N):
        x = np.zeros(N, dtype=np.int64)
        y = rng.integers(0, q, size=N)
        return FieldVector(k, tuple(x)), FieldVector(k, tuple(y))
    while True:
        x = rng.integers(0, q, size=N)
        if x.any():
            break
    y = rng.integers(0, q, size=N)
    piv = int(np.flatnonzero(x)[0])
    others = int(f.dot(np.delete(x, piv), np.delete(y, piv))) if N > 1 else 0
    y[piv] = f.div(s ^ others, int(x[piv]))
    return FieldVector(k, tuple(int(v) for v in x)), FieldVector(k, tuple(int(v) for v in y))


def ip_side_leakage_distance(k: int, N: int, leak: Callable[[FieldVector], int], leak_values: int) -> float:
    """Exact ``||rho_{Z X W} - U_Z (x) rho_{X W}||_1`` with W = leak(Y), X, Y uniform.

    Z = IP(X, Y).  Enumerates all (x, y).
    """
    f = field(k)
    q = 1 << k
    vecs = [FieldVector(k, v) for v in itertools.product(range(q), repeat=N)]
    joint = np.zeros((q, len(vecs), leak_values))
    w = [int(leak(y)) for y in vecs]
    for ix, x in enumerate(vecs):
        for iy, y in enumerate(vecs):
            joint[f.dot(x.elements, y.elements), ix, w[iy]] += 1
    joint /= joint.sum()
    marg = joint.sum(axis=0, keepdims=True) / q
    return float(np.abs(joint - marg).sum())


# ---------------------------------------------------------------------------
# non-malleable extractor descriptors


@dataclass(frozen=True, eq=False)
class NmExtDescriptor:
    """Total function {0,1}^n x {0,1}^m -> {0,1}^r.

    ``kind == "table"`` stores the outputs as a (2^n, 2^m) integer array;
    ``kind == "ip"`` is the inner product over GF(2^r) with n = m = r*N.
    """

    n: int
    m: int
    r: int
    kind: str = "table"
    table: np.ndarray | None = None
    certified_epsilon: float | None = None
    family: str = ""
    label: str = ""

    def __post_init__(self):
        if self.kind == "table":
            if self.table is None:
                raise ValueError("table descriptor needs a table")
            t = np.asarray(self.table, dtype=np.int64)
            if t.shape != (1 << self.n, 1 << self.m):
                raise ValueError(f"table shape {t.shape} does not match (2^{self.n}, 2^{self.m})")
            if t.min() < 0 or t.max() >= 1 << self.r:
                raise ValueError("table entries exceed r bits")
            t.setflags(write=False)
            object.__setattr__(self, "table", t)
        elif self.kind == "ip":
            if self.n != self.m or self.n % self.r:
                raise ValueError("ip descriptor needs n = m = r * N")
        else:
            raise ValueError(f"unknown descriptor kind {self.kind!r}")

    @property
    def certified(self) -> bool:
        return self.certified_epsilon is not None

    def to_json(self) -> dict:
        out = {"n": self.n, "m": self.m, "r": self.r, "kind": self.kind, "label": self.label,
               "certified_epsilon": self.certified_epsilon if self.certified else "uncertified",
               "family": self.family}
        if self.kind == "table":
            width = max(1, (self.r + 3) // 4)
            out["table"] = ["".join(f"{v:0{width}x}" for v in row) for row in self.table]
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "NmExtDescriptor":
        eps = obj.get("certified_epsilon", "uncertified")
        eps = None if eps == "uncertified" else float(eps)
        kind = obj.get("kind", "table")
        table = None
        if kind == "table":
            r = int(obj["r"])
            width = max(1, (r + 3) // 4)
            table = np.array([[int(row[i : i + width], 16) for i in range(0, len(row), width)]
                              for row in obj["table"]], dtype=np.int64)
        return cls(int(obj["n"]), int(obj["m"]), int(obj["r"]), kind, table, eps,
                   obj.get("family", ""), obj.get("label", ""))

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True)


def ip_descriptor(k: int, N: int) -> NmExtDescriptor:
    """IP over GF(2^k)^N as a descriptor (n = m = kN, r = k)."""
    return NmExtDescriptor(k * N, k * N, k, kind="ip", label=f"ip-gf2^{k}-N{N}")


@lru_cache(maxsize=32)
def _ip_table(k: int, N: int) -> np.ndarray:
    f = field(k)
    q = 1 << k
    size = q**N
    idx = np.arange(size)
    coords = np.stack([(idx >> (k * (N - 1 - i))) & (q - 1) for i in range(N)], axis=1)
    out = np.zeros((size, size), dtype=np.int64)
    for i in range(N):
        out ^= f.mul(coords[:, i][:, None], coords[:, i][None, :])
    out.setflags(write=False)
    return out


def nmext_table(d: NmExtDescriptor) -> np.ndarray:
    """Full (2^n, 2^m) output table."""
    if d.kind == "table":
        return d.table
    return _ip_table(d.r, d.n // d.r)


def nmext_eval(d: NmExtDescriptor, x: Sequence[int] | int, y: Sequence[int] | int) -> tuple[int, ...]:
    """Evaluate on bit strings (or their integer values); returns r bits."""
    xi = _as_index(x, d.n)
    yi = _as_index(y, d.m)
    if d.kind == "ip":
        k, N = d.r, d.n // d.r
        return int_to_bits(ip_extract(FieldVector.from_int(k, N, xi), FieldVector.from_int(k, N, yi)), d.r)
    return int_to_bits(int(d.table[xi, yi]), d.r)


def _as_index(v: Sequence[int] | int, nbits: int) -> int:
    if isinstance(v, (int, np.integer)):
        if not 0 <= int(v) < 1 << nbits:
            raise ValueError("input value out of range")
        return int(v)
    v = tuple(v)
    if len(v) != nbits:
        raise ValueError(f"expected {nbits} input bits, got {len(v)}")
    return bits_to_int(v)


def random_table_descriptor(n: int, m: int, r: int, seed: int) -> NmExtDescriptor:
    rng = np.random.default_rng(seed)
    table = rng.integers(0, 1 << r, size=(1 << n, 1 << m))
    return NmExtDescriptor(n, m, r, "table", table, label=f"random-table-seed{seed}")


# ---------------------------------------------------------------------------
# classical certification


@dataclass(frozen=True)
class TamperFunction:
    name: str
    table: np.ndarray

    def is_identity(self) -> bool:
        return bool(np.array_equal(self.table, np.arange(len(self.table))))


def function_family(nbits: int, seed: int = 0, exhaustive_limit: int = 6) -> tuple[list[TamperFunction], str]:
    """Deterministic tamper functions on nbits: XOR masks (mask 0 = identity) and constants.

    Exhaustive when ``nbits <= exhaustive_limit``; otherwise a seeded
    subset that always contains the identity, the all-ones mask, single
    bit flips at both ends and the constants 0 and all-ones.
    """
    size = 1 << nbits
    xs = np.arange(size)
    if nbits <= exhaustive_limit:
        masks = list(range(size))
        consts = list(range(size))
        desc = f"xor-masks+constants(all,{nbits} bits)"
    else:
        rng = np.random.default_rng(seed)
        masks = sorted({0, 1, size >> 1, size - 1, *map(int, rng.integers(1, size, size=4))})
        consts = sorted({0, size - 1, *map(int, rng.integers(0, size, size=2))})
        desc = f"xor-masks{masks}+constants{consts}({nbits} bits)"
    fam = [TamperFunction(f"xor:{mk:x}" if mk else "identity", xs ^ mk) for mk in masks]
    fam += [TamperFunction(f"const:{c:x}", np.full(size, c)) for c in consts]
    return fam, desc


@dataclass(frozen=True)
class TamperRecord:
    f: str
    g: str
    p_same: float
    same_distance: float
    tamp_distance: float
    item2: float
    same_distance_y: float
    tamp_distance_y: float
    item2_y: float


@dataclass(frozen=True)
class CertificationReport:
    strong_x: float
    strong_y: float
    records: tuple[TamperRecord, ...]
    family: str
    certified_epsilon: float
    tolerance: float
    passed: bool
    descriptor: NmExtDescriptor

    @property
    def max_item2(self) -> float:
        return max((r.item2 for r in self.records), default=0.0)

    def to_json(self) -> dict:
        worst = max(self.records, key=lambda r: r.item2) if self.records else None
        return {
            "n": self.descriptor.n, "m": self.descriptor.m, "r": self.descriptor.r,
            "label": self.descriptor.label,
            "strong_x": self.strong_x, "strong_y": self.strong_y,
            "max_item2": self.max_item2,
            "worst_pair": None if worst is None else [worst.f, worst.g],
            "pairs_tested": len(self.records),
            "family": self.family,
            "certified_epsilon": self.certified_epsilon,
            "tolerance": self.tolerance, "passed": self.passed,
        }


def strong_extraction_distances(table: np.ndarray, r: int) -> tuple[float, float]:
    """Exact ||R X - U_r (x) U_n||_1 and ||R Y - U_r (x) U_m||_1 for uniform inputs."""
    nx, ny = table.shape
    nr = 1 << r
    cx = np.zeros((nx, nr))
    np.add.at(cx, (np.repeat(np.arange(nx), ny), table.ravel()), 1.0)
    cy = np.zeros((ny, nr))
    np.add.at(cy, (np.tile(np.arange(ny), nx), table.ravel()), 1.0)
    total = nx * ny
    dx = np.abs(cx / total - 1.0 / (nx * nr)).sum()
    dy = np.abs(cy / total - 1.0 / (ny * nr)).sum()
    return float(dx), float(dy)


def _item2(table: np.ndarray, r: int, f: np.ndarray, g: np.ndarray) -> tuple[float, ...]:
    nx, ny = table.shape
    nr = 1 << r
    rr = table.ravel()
    rt = table[f[:, None], g[None, :]].ravel()
    same = (f[:, None] == np.arange(nx)[:, None]) & (g[None, :] == np.arange(ny)[None, :])
    same = same.ravel()
    yy = np.tile(np.arange(ny), nx)
    total = nx * ny
    p_same = same.sum() / total
    d_same = d_same_y = d_tamp = d_tamp_y = 0.0
    if same.any():
        h = np.bincount(rr[same], minlength=nr) / same.sum()
        d_same = float(np.abs(h - 1.0 / nr).sum())
        hy = np.bincount(rr[same] * ny + yy[same], minlength=nr * ny).reshape(nr, ny) / same.sum()
        d_same_y = float(np.abs(hy - hy.sum(axis=0, keepdims=True) / nr).sum())
    tamp = ~same
    if tamp.any():
        h2 = np.bincount(rr[tamp] * nr + rt[tamp], minlength=nr * nr).reshape(nr, nr) / tamp.sum()
        d_tamp = float(np.abs(h2 - h2.sum(axis=0, keepdims=True) / nr).sum())
        h3 = np.bincount((rr[tamp] * nr + rt[tamp]) * ny + yy[tamp], minlength=nr * nr * ny)
        h3 = h3.reshape(nr, nr * ny) / tamp.sum()
        d_tamp_y = float(np.abs(h3 - h3.sum(axis=0, keepdims=True) / nr).sum())
    item2 = p_same * d_same + (1 - p_same) * d_tamp
    item2_y = p_same * d_same_y + (1 - p_same) * d_tamp_y
    return float(p_same), d_same, d_tamp, float(item2), d_same_y, d_tamp_y, float(item2_y)


def nmext_certify_classical(d: NmExtDescriptor, tolerance: float = float("inf"),
                            family: tuple[list[TamperFunction], list[TamperFunction], str] | None = None,
                            seed: int = 0, max_input_bits: int = 16) -> CertificationReport:
    """Exact certification against deterministic split-state tampering.

    Item 1: strong-extraction distances for both sources.  Item 2: for every
    (f, g) in the family, the exact value of
    ``p_same ||R|same - U_r|| + (1 - p_same) ||R R'|tamp - U_r (x) R'|tamp||``
    with trivial side register, plus the variant where the right-hand
    tamperer keeps a copy of Y.  The certified epsilon is the largest value
    observed.
    """
    if d.n + d.m > max_input_bits:
        raise ValueError(f"n + m = {d.n + d.m} exceeds the exhaustive limit {max_input_bits}")
    table = nmext_table(d)
    sx, sy = strong_extraction_distances(table, d.r)
    if family is None:
        fx, dx = function_family(d.n, seed)
        fy, dy = function_family(d.m, seed + 1)
        desc = f"left:{dx}; right:{dy}"
    else:
        fx, fy, desc = family
    records = []
    for f in fx:
        for g in fy:
            vals = _item2(table, d.r, np.asarray(f.table), np.asarray(g.table))
            records.append(TamperRecord(f.name, g.name, *vals))
    eps = max([sx, sy] + [r.item2 for r in records])
    stamped = replace(d, certified_epsilon=float(eps), family=desc)
    return CertificationReport(sx, sy, tuple(records), desc, float(eps), tolerance, eps <= tolerance, stamped)


def search_toy_descriptor(n: int = 5, m: int = 5, r: int = 2, candidates: int = 16, seed: int = 0) -> CertificationReport:
    """Seeded search over random tables; returns the best certified candidate."""
    best = None
    for i in range(candidates):
        d = random_table_descriptor(n, m, r, seed * 100003 + i)
        rep = nmext_certify_classical(d, seed=seed)
        if best is None or rep.certified_epsilon < best.certified_epsilon:
            best = rep
    assert best is not None
    return best


@lru_cache(maxsize=8)
def default_nmext(n: int, m: int, r: int, seed: int = 0, candidates: int = 4) -> NmExtDescriptor:
    """Certified table descriptor used by the real-key code mode."""
    if n % r == 0 and n == m:
        return nmext_certify_classical(ip_descriptor(r, n // r), seed=seed).descriptor
    rep = search_toy_descriptor(n, m, r, candidates, seed)
    return replace(rep.descriptor, label=f"default-{n}-{m}-{r}")


# ---------------------------------------------------------------------------
# qpa-state check


@dataclass(frozen=True)
class QpaReport:
    passed: bool
    k1: float
    k2: float
    h_x: MinEntropy
    h_y: MinEntropy
    margin_x: float
    margin_y: float


def qpa_check(state: DensityOperator, k1: float, k2: float, x: str = "X", x_copy: str = "Xh",
              y: str = "Y", y_copy: str = "Yh", w1: str = "W1", w2: str = "W2") -> QpaReport:
    """Check H_min(X | W2 Y Yh) >= k1 and H_min(Y | W1 X Xh) >= k2 on the lower brackets.

    Registers named but absent from the layout are treated as trivial.
    """
    labels = set(state.labels)
    for lab in (x, y):
        if lab not in labels:
            raise ValueError(f"missing classical register {lab!r}")
    e1 = [lab for lab in (w2, y, y_copy) if lab in labels]
    e2 = [lab for lab in (w1, x, x_copy) if lab in labels]
    hx = hmin(state, [x], e1)
    hy = hmin(state, [y], e2)
    mx, my = hx.lower - k1, hy.lower - k2
    return QpaReport(bool(mx >= -1e-9 and my >= -1e-9), k1, k2, hx, hy, float(mx), float(my))


__all__ = [
    "FieldVector",
    "NmExtDescriptor",
    "CertificationReport",
    "TamperFunction",
    "QpaReport",
    "ip_extract",
    "ip_preimage_count",
    "ip_preimage_enumerate",
    "ip_preimage_sample",
    "ip_half_marginal",
    "ip_side_leakage_distance",
    "ip_descriptor",
    "random_table_descriptor",
    "nmext_table",
    "nmext_eval",
    "nmext_certify_classical",
    "strong_extraction_distances",
    "function_family",
    "search_toy_descriptor",
    "default_nmext",
    "qpa_check",
    "int_to_bits",
    "bits_to_int",
]
