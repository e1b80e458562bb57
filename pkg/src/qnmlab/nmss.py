"""Threshold non-malleable secret sharing.

Quantum-message scheme: encode with the split-state code, then share the
left part L = (Y, Z) with quantum Shamir and the classical right part
R = X with the 2-of-p inner-product scheme.  Party i holds S_i = (L_i, R_i).

Classical-message scheme: same pipeline with a classical split-state code
(a one-time pad keyed by the extractor output) and classical Shamir for L.

The left part is a (2^m * 2^b)-dimensional register with basis index
y * 2^b + z; it is embedded in q^k qudit levels (first levels), where k is
the least exponent with q^k >= 2^(m+b).
"""

from __future__ import annotations

import itertools
import math
from functools import cached_property
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Protocol, Sequence

import numpy as np

from .extractors import NmExtDescriptor, bits_to_int, default_nmext, int_to_bits, nmext_eval
from .nmc import CodeParams, InvalidParams, SplitStateCodeword, dec, enc
from .qmatrix import DensityOperator, RegisterLayout, conjugate_local
from .secret_sharing import (
    LRSSParams,
    LrShare,
    QShamirParams,
    cshamir_rec,
    cshamir_share,
    is_prime,
    lrrec_2p,
    lrshare_2p,
    qrec,
    qshare,
)


def _default_code() -> CodeParams:
    return CodeParams(b=1, ell=14, delta=Fraction(1, 14))


@dataclass(frozen=True)
class NmssParams:
    """Parameters of the quantum-message t-out-of-p scheme."""

    t: int = 3
    p: int = 3
    code: CodeParams = field(default_factory=_default_code)
    q: int = 5
    lrss_N: int = 2
    ell_leak: int | None = None
    epsilon: float = 2.0**-10
    strict: bool = False

    def __post_init__(self):
        if self.t < 3:
            raise InvalidParams("threshold must be at least 3")
        if not self.t <= self.p <= 2 * self.t - 1:
            raise InvalidParams(f"quantum scheme needs t <= p <= 2t - 1, got t={self.t}, p={self.p}")
        sh = self.shamir  # validates q
        if sh.share_dim < self.left_dim:
            raise InvalidParams("L-share capacity below the left part size")
        if self.leak_budget < self.l_share_bits:
            raise InvalidParams(f"leakage budget {self.leak_budget} is below one L-share ({self.l_share_bits} bits)")
        _ = self.lrss

    @property
    def left_dim(self) -> int:
        return 1 << (self.code.m + self.code.b)

    @property
    def shamir_qudits(self) -> int:
        k = 1
        while self.q**k < self.left_dim:
            k += 1
        return k

    @property
    def shamir(self) -> QShamirParams:
        return QShamirParams(self.t, self.p, self.q, self.shamir_qudits)

    @property
    def l_share_bits(self) -> int:
        return math.ceil(self.shamir_qudits * math.log2(self.q))

    @property
    def leak_budget(self) -> int:
        return self.l_share_bits if self.ell_leak is None else self.ell_leak

    @cached_property
    def lrss(self) -> LRSSParams:
        return LRSSParams(self.code.ell, self.lrss_N, self.leak_budget, self.epsilon, self.p, self.strict)

    def with_mode(self, mode: str) -> "NmssParams":
        return NmssParams(self.t, self.p, self.code.with_mode(mode), self.q, self.lrss_N, self.ell_leak,
                          self.epsilon, self.strict)

    def to_json(self) -> dict:
        return {"t": self.t, "p": self.p, "code": self.code.to_json(), "q": self.q, "lrss_N": self.lrss_N,
                "ell_leak": self.ell_leak, "epsilon": self.epsilon, "strict": self.strict}

    @classmethod
    def from_json(cls, obj: dict) -> "NmssParams":
        return cls(int(obj["t"]), int(obj["p"]), CodeParams.from_json(obj["code"]), int(obj.get("q", 5)),
                   int(obj.get("lrss_N", 2)), obj.get("ell_leak"), float(obj.get("epsilon", 2.0**-10)),
                   bool(obj.get("strict", False)))


def left_embedding(prm: NmssParams) -> np.ndarray:
    """Isometry from (Y, Z) into the shared qudit register (first levels)."""
    d_in, d_out = prm.left_dim, prm.shamir.message_dim
    e = np.zeros((d_out, d_in), dtype=complex)
    e[np.arange(d_in), np.arange(d_in)] = 1.0
    return e


def left_split_kraus(prm: NmssParams) -> list[list[np.ndarray]]:
    """Kraus operators reading Y' off the reconstructed register, grouped per y'.

    The main operator for y' maps levels y' * 2^b + z to |z>.  Each level
    beyond the embedded space gets its own operator |0><level| in the
    y' = 0 group, so the map is trace preserving.
    """
    b, m = prm.code.b, prm.code.m
    dz = 1 << b
    d_out = prm.shamir.message_dim
    groups = []
    for y in range(1 << m):
        k = np.zeros((dz, d_out), dtype=complex)
        for z in range(dz):
            k[z, y * dz + z] = 1.0
        ops = [k]
        if y == 0:
            for lvl in range(prm.left_dim, d_out):
                extra = np.zeros((dz, d_out), dtype=complex)
                extra[0, lvl] = 1.0
                ops.append(extra)
        groups.append(ops)
    return groups


@dataclass(frozen=True, eq=False)
class NmssShareSet:
    """Shares S_i = (L_i, R_i).

    ``quantum`` holds L_1..L_p (plus any external registers); ``classical``
    holds R_1..R_p.  ``ideal_key``/``source`` carry the ideal key oracle of
    the inner code in ideal modes and belong to no party.
    """

    quantum: DensityOperator
    classical: tuple[LrShare, ...]
    prm: NmssParams
    ideal_key: int | None = None
    source: tuple[tuple[int, ...], tuple[int, ...]] | None = None

    def share(self, i: int) -> tuple[str, LrShare]:
        return f"L_{i}", self.classical[i - 1]

    def with_classical(self, shares: Sequence[LrShare]) -> "NmssShareSet":
        return NmssShareSet(self.quantum, tuple(shares), self.prm, self.ideal_key, self.source)

    def with_quantum(self, state: DensityOperator) -> "NmssShareSet":
        return NmssShareSet(state, self.classical, self.prm, self.ideal_key, self.source)

    def manifest(self) -> dict:
        from .qmatrix import matrix_to_json

        return {
            "params": self.prm.to_json(),
            "quantum": {"layout": self.quantum.layout.to_json(), "matrix": matrix_to_json(self.quantum.matrix)},
            "parties": [{"L": f"L_{sh.party}", "R": sh.to_json()["slots"]} for sh in self.classical],
        }


def left_state(cw: SplitStateCodeword, prm: NmssParams) -> DensityOperator:
    """The left part (Y, Z) of a sampled codeword as one register ``M`` of the Shamir message size."""
    y = bits_to_int(cw.y)
    dz = 1 << prm.code.b
    z = cw.z
    idx = z.layout.index("Z")
    # |y> (x) Z, then embed into the qudit levels
    ky = np.zeros((prm.left_dim, dz), dtype=complex)
    ky[y * dz + np.arange(dz), np.arange(dz)] = 1.0
    emb = left_embedding(prm) @ ky
    m, _ = conjugate_local(z.matrix, z.dims, emb, [idx], [prm.shamir.message_dim])
    layout = RegisterLayout(tuple(("M", prm.shamir.message_dim) if lab == "Z" else (lab, d)
                                  for lab, d in z.layout.registers))
    return DensityOperator(m, layout)


def nmshare(sigma: DensityOperator, prm: NmssParams, rng: np.random.Generator) -> NmssShareSet:
    """Share register ``M`` of ``sigma``.

    rng order: inner encoding (X, Y, ideal key), then the 2-of-p sharing
    of X pair by pair.
    """
    cw = enc(sigma, prm.code, rng)
    lstate = left_state(cw, prm)
    shared = qshare(lstate, prm.shamir)
    quantum = shared.state.relabel({f"S_{i}": f"L_{i}" for i in range(1, prm.p + 1)})
    s = bits_to_int(cw.x)
    right = lrshare_2p(s, prm.lrss, rng)
    return NmssShareSet(quantum, tuple(right), prm, cw.ideal_key, cw.source)


def read_left(lrec: DensityOperator, prm: NmssParams, label: str = "M") -> list[tuple[int, float, DensityOperator]]:
    """Split a reconstructed left register into (y', prob, Z' state) branches."""
    idx = lrec.layout.index(label)
    out = []
    for y, ops in enumerate(left_split_kraus(prm)):
        m = sum(conjugate_local(lrec.matrix, lrec.dims, k, [idx], [1 << prm.code.b])[0] for k in ops)
        layout = RegisterLayout(tuple(("Z", 1 << prm.code.b) if lab == label else (lab, d)
                                      for lab, d in lrec.layout.registers))
        w = float(np.trace(m).real)
        out.append((y, w, DensityOperator(m, layout)))
    return out


def nmrec(shares: NmssShareSet, parties: Sequence[int], prm: NmssParams | None = None) -> DensityOperator:
    """Reconstruct: quantum Shamir on the L-shares of ``parties``, 2-of-p
    reconstruction of X' from the lowest pair, read Y' off L', then decode.

    Total on tampered inputs: every measurement branch is decoded.
    """
    prm = shares.prm if prm is None else prm
    parties = sorted(set(parties))
    if len(parties) < prm.t:
        raise InvalidParams(f"{len(parties)} shares cannot reconstruct at threshold {prm.t}")
    st = shares.quantum.relabel({f"L_{i}": f"S_{i}" for i in range(1, prm.p + 1)})
    lrec = qrec(st, parties, prm.shamir)
    by_party = {sh.party: sh for sh in shares.classical}
    x_val = lrrec_2p([by_party[i] for i in parties])
    x = int_to_bits(x_val, prm.code.ell)
    acc = None
    for y, w, z in read_left(lrec, prm):
        if w <= 1e-15:
            continue
        cw = SplitStateCodeword(x, int_to_bits(y, prm.code.m), DensityOperator(z.matrix / w, z.layout),
                                shares.ideal_key, shares.source)
        out = w * dec(cw, prm.code).matrix
        acc = out if acc is None else acc + out
        layout = z.layout.relabel({"Z": "M"})
    return DensityOperator(acc, layout)


def privacy_distance(sigma: DensityOperator, prm: NmssParams, parties: Sequence[int]) -> float:
    """Upper bound on ||joint(externals, S_T) - sigma_ext (x) zeta_{S_T}|| for |T| < t.

    zeta comes from the same pipeline run on the maximally mixed message.
    R_T is a randomised function of X alone, so the norm splits over X and
    is bounded by the average over (key, y) of the left-part distances.
    """
    from .nmc import key_distribution, real_key_table
    from .pauli_clifford import sc_enumerate
    from .qmatrix import maximally_mixed, trace_norm

    parties = sorted(set(parties))
    if len(parties) >= prm.t:
        raise InvalidParams("privacy is only claimed for unauthorised sets")
    code = prm.code
    ext = [lab for lab in sigma.labels if lab != "M"]
    unif = maximally_mixed(RegisterLayout.of(("M", 1 << code.b)))
    if code.ideal:
        kw = key_distribution(code)
        weights = np.outer(np.full(1 << code.m, 1.0 / (1 << code.m)), kw)
    else:
        table = real_key_table(code)
        weights = np.zeros((1 << code.m, len(sc_enumerate(code.b))))
        for y in range(1 << code.m):
            weights[y] = np.bincount(table[:, y], minlength=weights.shape[1]) / table.shape[0]
    sig_ext = sigma.marginal(ext).matrix if ext else np.ones((1, 1))
    cl = sc_enumerate(code.b)
    total = 0.0
    labels = [f"S_{i}" for i in parties]
    for y in range(1 << code.m):
        for c in np.flatnonzero(weights[y]):
            u = cl[c].dense()
            parts = []
            for msg in (sigma, unif):
                cw = _masked_codeword(msg, code, u, y)
                sh = qshare(left_state(cw, prm), prm.shamir)
                parts.append(sh)
            real = parts[0].state.marginal(labels + ext).matrix
            zeta = parts[1].state.marginal(labels).matrix
            total += weights[y, c] * trace_norm(real - np.kron(zeta, sig_ext))
    return float(total)


def _masked_codeword(sigma: DensityOperator, code: CodeParams, u: np.ndarray, y: int) -> SplitStateCodeword:
    idx = sigma.layout.index("M")
    m, _ = conjugate_local(sigma.matrix, sigma.dims, u, [idx])
    z = DensityOperator(m, sigma.layout.relabel({"M": "Z"}))
    return SplitStateCodeword(int_to_bits(0, code.ell), int_to_bits(y, code.m), z)


# ---------------------------------------------------------------------------
# classical-message variant


class ClassicalSplitCode(Protocol):
    """Pluggable classical 2-of-2 scheme: left share is an int < left_size, right share is bits."""

    b: int
    right_bits: int
    left_size: int

    def share(self, s: int, rng: np.random.Generator) -> tuple[int, tuple[int, ...]]: ...

    def rec(self, left: int, right: Sequence[int]) -> int: ...


@dataclass(frozen=True)
class PadSplitCode:
    """Left = (Y, s xor R[:b]) and right = X with R = nmExt(X, Y)."""

    b: int = 1
    ell: int = 4
    m: int = 1
    r: int = 1
    nmext: NmExtDescriptor | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.r < self.b:
            raise InvalidParams("key shorter than the message")
        d = self.nmext
        if d is not None and (d.n, d.m, d.r) != (self.ell, self.m, self.r):
            raise InvalidParams("extractor shape mismatch")

    @property
    def right_bits(self) -> int:
        return self.ell

    @property
    def left_size(self) -> int:
        return 1 << (self.m + self.b)

    def descriptor(self) -> NmExtDescriptor:
        return self.nmext if self.nmext is not None else default_nmext(self.ell, self.m, self.r)

    def _pad(self, x: Sequence[int], y: int) -> int:
        key = nmext_eval(self.descriptor(), tuple(x), int_to_bits(y, self.m))
        return bits_to_int(key[: self.b])

    def share(self, s: int, rng: np.random.Generator) -> tuple[int, tuple[int, ...]]:
        x = int_to_bits(int(rng.integers(0, 1 << self.ell)), self.ell)
        y = int(rng.integers(0, 1 << self.m))
        z = s ^ self._pad(x, y)
        return (y << self.b) | z, x

    def rec(self, left: int, right: Sequence[int]) -> int:
        y, z = left >> self.b, left & ((1 << self.b) - 1)
        return z ^ self._pad(right, y)

    def to_json(self) -> dict:
        return {"b": self.b, "ell": self.ell, "m": self.m, "r": self.r}


@dataclass(frozen=True)
class ClassicalNmssParams:
    """Classical-message t-out-of-p scheme; any 3 <= t <= p."""

    t: int = 3
    p: int = 5
    code: PadSplitCode = field(default_factory=PadSplitCode)
    q: int = 7
    lrss_N: int = 2
    ell_leak: int | None = None
    epsilon: float = 2.0**-10
    strict: bool = False

    def __post_init__(self):
        if self.t < 3:
            raise InvalidParams("threshold must be at least 3")
        if not self.t <= self.p:
            raise InvalidParams(f"need t <= p, got t={self.t}, p={self.p}")
        if not is_prime(self.q) or self.q <= self.p:
            raise InvalidParams(f"Shamir field size q={self.q} must be a prime above p={self.p}")
        if self.q < self.code.left_size:
            raise InvalidParams("Shamir field too small for the left share")
        _ = self.lrss

    @property
    def leak_budget(self) -> int:
        return math.ceil(math.log2(self.q)) if self.ell_leak is None else self.ell_leak

    @cached_property
    def lrss(self) -> LRSSParams:
        return LRSSParams(self.code.right_bits, self.lrss_N, self.leak_budget, self.epsilon, self.p, self.strict)

    def to_json(self) -> dict:
        return {"t": self.t, "p": self.p, "code": self.code.to_json(), "q": self.q, "lrss_N": self.lrss_N,
                "ell_leak": self.ell_leak, "epsilon": self.epsilon, "strict": self.strict}

    @classmethod
    def from_json(cls, obj: dict) -> "ClassicalNmssParams":
        c = obj.get("code", {})
        code = PadSplitCode(int(c.get("b", 1)), int(c.get("ell", 4)), int(c.get("m", 1)), int(c.get("r", 1)))
        return cls(int(obj["t"]), int(obj["p"]), code, int(obj.get("q", 7)), int(obj.get("lrss_N", 2)),
                   obj.get("ell_leak"), float(obj.get("epsilon", 2.0**-10)), bool(obj.get("strict", False)))


@dataclass(frozen=True)
class ClassicalShare:
    party: int
    left: int
    right: LrShare

    def to_json(self) -> dict:
        return {"party": self.party, "L": f"{self.left:x}", "R": self.right.to_json()["slots"]}


def nmshare_classical(s: int, prm: ClassicalNmssParams, rng: np.random.Generator) -> tuple[ClassicalShare, ...]:
    """rng order: split code, Shamir coefficients, then the 2-of-p sharing."""
    if not 0 <= s < 1 << prm.code.b:
        raise InvalidParams("message outside the b-bit range")
    left, right = prm.code.share(s, rng)
    lsh = cshamir_share(left, prm.t, prm.p, prm.q, rng)
    rsh = lrshare_2p(bits_to_int(right), prm.lrss, rng)
    return tuple(ClassicalShare(i + 1, lsh[i], rsh[i]) for i in range(prm.p))


def nmrec_classical(shares: Sequence[ClassicalShare], prm: ClassicalNmssParams) -> int:
    """Total function: out-of-range left values are reduced into range."""
    by_party = {sh.party: sh for sh in shares}
    if len(by_party) < prm.t:
        raise InvalidParams(f"{len(by_party)} shares cannot reconstruct at threshold {prm.t}")
    parties = sorted(by_party)
    left = cshamir_rec({i: by_party[i].left for i in parties}, prm.t, prm.q) % prm.code.left_size
    x = lrrec_2p([by_party[i].right for i in parties])
    return prm.code.rec(left, int_to_bits(x, prm.code.right_bits))


def classical_unauthorized_law(s: int, prm: ClassicalNmssParams, parties: Sequence[int]) -> np.ndarray:
    """Exact joint law of (X, left Shamir shares of ``parties``) for message s.

    Enumerates X, Y and all Shamir coefficient vectors.  The right shares of
    the parties are a randomised function of X alone, so independence of
    this law from s gives independence of the full unauthorised view.
    """
    from .secret_sharing import cshamir_eval

    parties = sorted(set(parties))
    if len(parties) >= prm.t:
        raise InvalidParams("set is authorised")
    code = prm.code
    nx = 1 << code.ell
    ny = 1 << code.m
    shape = (nx,) + (prm.q,) * len(parties)
    law = np.zeros(shape)
    coeff_sets = list(itertools.product(range(prm.q), repeat=prm.t - 1))
    w = 1.0 / (nx * ny * len(coeff_sets))
    for xv in range(nx):
        xb = int_to_bits(xv, code.ell)
        for y in range(ny):
            left = (y << code.b) | (s ^ code._pad(xb, y))
            for cs in coeff_sets:
                vals = cshamir_eval((left,) + cs, prm.p, prm.q)
                law[(xv,) + tuple(vals[i - 1] for i in parties)] += w
    return law


__all__ = [
    "NmssParams",
    "NmssShareSet",
    "nmshare",
    "nmrec",
    "privacy_distance",
    "left_embedding",
    "left_split_kraus",
    "left_state",
    "read_left",
    "ClassicalSplitCode",
    "PadSplitCode",
    "ClassicalNmssParams",
    "ClassicalShare",
    "nmshare_classical",
    "nmrec_classical",
    "classical_unauthorized_law",
]
