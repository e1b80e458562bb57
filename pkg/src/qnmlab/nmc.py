"""Split-state non-malleable code for quantum messages.

Encoding: draw X (ell bits) and Y (m = floor(delta * ell) bits), compute
the key R = nmExt(X, Y) (r = floor((1/2 - delta) * ell) bits), and mask
the message with the Clifford C_R = sc_samp(first 5b bits of R).  The
two parts are X and (Y, Z).  Decoding recomputes the key from the
(possibly tampered) classical parts and undoes the Clifford; it never
aborts.

Three key modes:

``real``
    key from the extractor, Clifford from ``sc_samp``.
``ideal-key``
    R is a fresh uniform string; decoding reuses it only when (X', Y')
    equals the encoded (X, Y) and otherwise draws an independent one.
    Cliffords still come from ``sc_samp``.
``exact-uniform-clifford``
    as ``ideal-key`` but the Clifford is a uniform element of SC(H).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property, lru_cache

import numpy as np

from .extractors import (
    NmExtDescriptor,
    bits_to_int,
    default_nmext,
    int_to_bits,
    nmext_eval,
    nmext_table,
)
from .pauli_clifford import CliffordOp, SubCliffordKey, samp_distribution, sc_enumerate, sc_index, sc_samp
from .qmatrix import DensityOperator, RegisterLayout, conjugate_local, matrix_from_json, matrix_to_json

MODES = ("real", "ideal-key", "exact-uniform-clifford")


class InvalidParams(ValueError):
    """Parameter set violates a code invariant."""


def _as_fraction(v) -> Fraction:
    if isinstance(v, Fraction):
        return v
    if isinstance(v, str):
        return Fraction(v)
    return Fraction(v).limit_denominator(10**6)


@dataclass(frozen=True)
class CodeParams:
    """Code parameters; ``nmext=None`` selects the certified default table."""

    b: int = 1
    ell: int = 14
    delta: Fraction = Fraction(1, 7)
    mode: str = "real"
    nmext: NmExtDescriptor | None = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "delta", _as_fraction(self.delta))
        if self.mode not in MODES:
            raise InvalidParams(f"unknown mode {self.mode!r}")
        if self.b < 1 or self.ell < 1:
            raise InvalidParams("b and ell must be positive")
        if not 0 < self.delta < Fraction(1, 2):
            raise InvalidParams("delta must lie in (0, 1/2)")
        if self.m < 1:
            raise InvalidParams(f"delta * ell = {float(self.delta * self.ell)} gives an empty Y part")
        if self.r < 5 * self.b:
            raise InvalidParams(f"key length r = {self.r} is below 5b = {5 * self.b}")
        if self.mode != "real" and self.b > 2:
            raise InvalidParams("ideal key modes enumerate SC(H) and need b <= 2")
        d = self.nmext
        if d is not None and (d.n, d.m, d.r) != (self.ell, self.m, self.r):
            raise InvalidParams(f"extractor shape {(d.n, d.m, d.r)} does not match {(self.ell, self.m, self.r)}")

    @property
    def m(self) -> int:
        """Y length in bits."""
        return math.floor(self.delta * self.ell)

    @property
    def r(self) -> int:
        """Key length in bits."""
        return math.floor((Fraction(1, 2) - self.delta) * self.ell)

    @property
    def n(self) -> int:
        """Total codeword length |X| + |Y| + |Z| in (qu)bits."""
        return self.ell + self.m + self.b

    @property
    def ideal(self) -> bool:
        return self.mode != "real"

    def with_mode(self, mode: str) -> "CodeParams":
        return CodeParams(self.b, self.ell, self.delta, mode, self.nmext)

    def descriptor(self) -> NmExtDescriptor:
        if self.nmext is not None:
            return self.nmext
        return default_nmext(self.ell, self.m, self.r)

    def to_json(self) -> dict:
        out = {"b": self.b, "ell": self.ell, "delta": str(self.delta), "mode": self.mode}
        if self.nmext is not None:
            out["nmext"] = self.nmext.to_json()
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "CodeParams":
        d = NmExtDescriptor.from_json(obj["nmext"]) if "nmext" in obj else None
        return cls(int(obj["b"]), int(obj["ell"]), _as_fraction(obj["delta"]), obj.get("mode", "real"), d)


# ---------------------------------------------------------------------------
# key models


def key_to_samp_bits(r_value: int, r: int, b: int) -> SubCliffordKey:
    """First 5b bits of the r-bit key, MSB first."""
    return SubCliffordKey(int_to_bits(r_value, r)[: 5 * b])


@lru_cache(maxsize=None)
def samp_index_table(b: int) -> np.ndarray:
    """SC-list index of ``sc_samp`` for every 5b-bit key value."""
    out = np.array([sc_index(sc_samp(SubCliffordKey.from_int(v, b))) for v in range(1 << (5 * b))], dtype=np.int64)
    out.setflags(write=False)
    return out


def clifford_list(b: int) -> list[CliffordOp]:
    return sc_enumerate(b)


def key_distribution(prm: CodeParams) -> np.ndarray:
    """Distribution over ``sc_enumerate(b)`` of a fresh ideal key."""
    if prm.mode == "exact-uniform-clifford":
        n = len(sc_enumerate(prm.b))
        return np.full(n, 1.0 / n)
    return samp_distribution(prm.b)


def real_key_table(prm: CodeParams) -> np.ndarray:
    """SC-list index of C_{nmExt(x, y)} for every (x, y); shape (2^ell, 2^m)."""
    return _real_key_table(prm.b, prm.ell, prm.m, prm.r, prm.descriptor())


_KEY_TABLE_CACHE: dict = {}


def _real_key_table(b: int, ell: int, m: int, r: int, d: NmExtDescriptor) -> np.ndarray:
    ck = (b, ell, m, r, id(d))
    if ck not in _KEY_TABLE_CACHE or _KEY_TABLE_CACHE[ck][0] is not d:
        t = nmext_table(d) >> (r - 5 * b)
        out = samp_index_table(b)[t]
        out.setflags(write=False)
        _KEY_TABLE_CACHE[ck] = (d, out)
    return _KEY_TABLE_CACHE[ck][1]


def key_clifford(prm: CodeParams, x: tuple[int, ...], y: tuple[int, ...]) -> CliffordOp:
    """C_R for R = nmExt(x, y) (real mode)."""
    r_bits = nmext_eval(prm.descriptor(), x, y)
    return sc_samp(SubCliffordKey(r_bits[: 5 * prm.b]))


# ---------------------------------------------------------------------------
# codewords


@dataclass(frozen=True, eq=False)
class SplitStateCodeword:
    """Sampled codeword: part one is ``x``; part two is (``y``, ``z``).

    ``z`` is the joint state of the Z register with any external registers.
    In ideal modes ``ideal_key`` (SC-list index) and ``source`` (the encoded
    (x, y)) model the ideal key oracle and are not part of either share.
    """

    x: tuple[int, ...]
    y: tuple[int, ...]
    z: DensityOperator
    ideal_key: int | None = None
    source: tuple[tuple[int, ...], tuple[int, ...]] | None = None

    def with_parts(self, x=None, y=None, z=None) -> "SplitStateCodeword":
        return SplitStateCodeword(
            tuple(self.x if x is None else x), tuple(self.y if y is None else y),
            self.z if z is None else z, self.ideal_key, self.source)

    def to_json(self) -> dict:
        return {"x": f"{bits_to_int(self.x):x}", "x_bits": len(self.x),
                "y": f"{bits_to_int(self.y):x}", "y_bits": len(self.y),
                "z": matrix_to_json(self.z.matrix), "z_layout": self.z.layout.to_json()}

    @classmethod
    def from_json(cls, obj: dict) -> "SplitStateCodeword":
        layout = RegisterLayout(tuple((lab, d) for lab, d in obj["z_layout"]))
        return cls(int_to_bits(int(obj["x"], 16), obj["x_bits"]), int_to_bits(int(obj["y"], 16), obj["y_bits"]),
                   DensityOperator(matrix_from_json(obj["z"]), layout))

    def dumps(self) -> str:
        return json.dumps(self.to_json())


@dataclass(frozen=True, eq=False)
class EncodedMixture:
    """Exact encoding: the full mixture over (X, Y) and, in ideal modes, the key.

    ``key_weights[c]`` is the probability that the masking Clifford is
    ``sc_enumerate(b)[c]``; in real mode ``key_table[x, y]`` gives it per
    input, in ideal modes the key is independent of (X, Y).
    """

    prm: CodeParams
    sigma: DensityOperator
    key_table: np.ndarray | None
    key_weights: np.ndarray

    def z_state(self, c: int) -> DensityOperator:
        """Z (and externals) given key index ``c``."""
        return self._z_states[c]

    @cached_property
    def _z_states(self) -> list[DensityOperator]:
        return [_mask(self.sigma, cl.dense()) for cl in sc_enumerate(self.prm.b)]

    def branch(self, x: int, y: int) -> DensityOperator:
        """State of (Z, externals) given X = x, Y = y."""
        if self.key_table is not None:
            return self.z_state(int(self.key_table[x, y]))
        return self.average_z()

    def average_z(self) -> DensityOperator:
        acc = sum(w * self.z_state(c).matrix for c, w in enumerate(self.key_weights) if w)
        return DensityOperator(acc, self.z_state(0).layout)

    def part_one_blocks(self) -> list[tuple[float, DensityOperator]]:
        """(weight, externals state) per group of x values with equal key rows.

        The weights are P(X in group); each state is the externals marginal
        conditioned on X = x for x in that group.
        """
        ext = [lab for lab in self.sigma.labels if lab != "M"]
        if self.key_table is None:
            return [(1.0, self.average_z().marginal(ext))]
        layout = self.sigma.layout.select(ext)
        marg = np.array([st.marginal(ext).matrix for st in self._z_states])
        rows, counts = np.unique(self.key_table, axis=0, return_counts=True)
        states = marg[rows].mean(axis=1)
        total = self.key_table.shape[0]
        return [(float(cnt) / total, DensityOperator(st, layout)) for st, cnt in zip(states, counts)]

    def part_two_blocks(self) -> dict[int, DensityOperator]:
        """Per-y conditional state of (Z, externals), averaged over X and key."""
        out = {}
        ny = 1 << self.prm.m
        if self.key_table is None:
            avg = self.average_z()
            return {y: avg for y in range(ny)}
        nx = 1 << self.prm.ell
        for y in range(ny):
            counts = np.bincount(self.key_table[:, y], minlength=len(self.key_weights)) / nx
            acc = sum(w * self.z_state(c).matrix for c, w in enumerate(counts) if w)
            out[y] = DensityOperator(acc, self.z_state(0).layout)
        return out


def privacy_distances(sigma: DensityOperator, prm: CodeParams) -> tuple[float, float]:
    """Distances of joint(externals, part) from externals (x) part marginal, per part.

    Part one is X, part two is (Y, Z).  Both parts are classical-quantum in
    their classical registers, so the trace norm splits over their values.
    """
    from .qmatrix import trace_norm

    e = enc(sigma, prm)
    ext = [lab for lab in sigma.labels if lab != "M"]
    if not ext:
        raise InvalidParams("privacy needs an external register alongside M")
    sig_ext = sigma.marginal(ext).matrix
    d1 = sum(w * trace_norm(st.matrix - sig_ext) for w, st in e.part_one_blocks())
    blocks = e.part_two_blocks()
    ny = len(blocks)
    d2 = 0.0
    for st in blocks.values():
        part = st.marginal(["Z"]).matrix
        ref = np.kron(part, sig_ext)
        order = ["Z"] + ext
        d2 += trace_norm(st.reorder(order).matrix - ref) / ny
    return float(d1), float(d2)


def _mask(sigma: DensityOperator, u: np.ndarray) -> DensityOperator:
    idx = sigma.layout.index("M")
    m, _ = conjugate_local(sigma.matrix, sigma.dims, u, [idx])
    return DensityOperator(m, sigma.layout.relabel({"M": "Z"}))


def _check_message(sigma: DensityOperator, prm: CodeParams) -> None:
    if "M" not in sigma.labels:
        raise InvalidParams("message state needs a register labelled 'M'")
    if sigma.layout.dim("M") != 1 << prm.b:
        raise InvalidParams(f"message register has dimension {sigma.layout.dim('M')}, expected {1 << prm.b}")


def enc(sigma: DensityOperator, prm: CodeParams, rng: np.random.Generator | None = None):
    """Encode the register ``M`` of ``sigma``.

    With ``rng`` a single codeword is sampled; without it the exact
    mixture over all (X, Y) and keys is returned.  Other registers of
    ``sigma`` are carried along untouched.
    """
    _check_message(sigma, prm)
    if rng is None:
        if prm.ideal:
            return EncodedMixture(prm, sigma, None, key_distribution(prm))
        table = real_key_table(prm)
        w = np.bincount(table.ravel(), minlength=len(sc_enumerate(prm.b))) / table.size
        return EncodedMixture(prm, sigma, table, w)
    x = int_to_bits(int(rng.integers(0, 1 << prm.ell)), prm.ell)
    y = int_to_bits(int(rng.integers(0, 1 << prm.m)), prm.m)
    if prm.ideal:
        c_idx = _draw_ideal_key(prm, rng)
        z = _mask(sigma, sc_enumerate(prm.b)[c_idx].dense()) if prm.b <= 2 else None
        return SplitStateCodeword(x, y, z, c_idx, (x, y))
    c = key_clifford(prm, x, y)
    return SplitStateCodeword(x, y, _mask(sigma, c.dense()))


def _draw_ideal_key(prm: CodeParams, rng: np.random.Generator) -> int:
    if prm.mode == "exact-uniform-clifford":
        return int(rng.integers(0, len(sc_enumerate(prm.b))))
    return int(samp_index_table(prm.b)[int(rng.integers(0, 1 << (5 * prm.b)))])


def _unmask(z: DensityOperator, u: np.ndarray) -> DensityOperator:
    idx = z.layout.index("Z")
    m, _ = conjugate_local(z.matrix, z.dims, u.conj().T, [idx])
    return DensityOperator(m, z.layout.relabel({"Z": "M"}))


def dec(c: SplitStateCodeword, prm: CodeParams) -> DensityOperator:
    """Decode to register ``M``: undo C_{R'} with R' recomputed from (x', y')."""
    if len(c.x) != prm.ell or len(c.y) != prm.m:
        raise InvalidParams("codeword part lengths do not match parameters")
    if "Z" not in c.z.labels or c.z.layout.dim("Z") != 1 << prm.b:
        raise InvalidParams("codeword Z register has the wrong dimension")
    if not prm.ideal:
        return _unmask(c.z, key_clifford(prm, c.x, c.y).dense())
    if c.source is not None and (tuple(c.x), tuple(c.y)) == c.source:
        return _unmask(c.z, sc_enumerate(prm.b)[c.ideal_key].dense())
    # fresh independent key, averaged exactly
    weights = key_distribution(prm)
    acc = None
    for idx, w in enumerate(weights):
        if w:
            m = w * _unmask(c.z, sc_enumerate(prm.b)[idx].dense()).matrix
            acc = m if acc is None else acc + m
    return DensityOperator(acc, c.z.layout.relabel({"Z": "M"}))


def decode_mixture(enc_state: EncodedMixture) -> DensityOperator:
    """Dec applied to the exact untampered mixture."""
    prm = enc_state.prm
    cl = sc_enumerate(prm.b)
    acc = None
    for c, w in enumerate(enc_state.key_weights):
        if w:
            m = w * _unmask(enc_state.z_state(c), cl[c].dense()).matrix
            acc = m if acc is None else acc + m
    return DensityOperator(acc, enc_state.sigma.layout)


# ---------------------------------------------------------------------------
# rate arithmetic


@dataclass(frozen=True)
class RateRow:
    delta: float
    n_over_ell: float
    b_over_ell: float
    rate: float
    n_over_ell_exact: float
    rate_exact: float


def rate_table(deltas) -> list[RateRow]:
    """Achieved rate b_max / n per delta.

    ``rate`` uses n = (1 + delta + 1/10 + delta/5) ell; ``rate_exact`` uses
    n = ell + delta ell + b_max with b_max = (1/2 - delta) ell / 5, i.e.
    (1 + delta + 1/10 - delta/5) ell.  Both tend to 1/11 as delta -> 0.
    """
    rows = []
    for d in deltas:
        d = float(d)
        if not 0 < d < 0.5:
            raise InvalidParams("delta must lie in (0, 1/2)")
        b = (0.5 - d) / 5
        n = 1 + d + 0.1 + d / 5
        n_exact = 1 + d + b
        rows.append(RateRow(d, n, b, b / n, n_exact, b / n_exact))
    return rows


__all__ = [
    "MODES",
    "InvalidParams",
    "CodeParams",
    "SplitStateCodeword",
    "EncodedMixture",
    "enc",
    "dec",
    "decode_mixture",
    "privacy_distances",
    "rate_table",
    "RateRow",
    "key_distribution",
    "real_key_table",
    "samp_index_table",
    "key_clifford",
    "clifford_list",
]
