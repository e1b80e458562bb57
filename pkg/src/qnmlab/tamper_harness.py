"""Exact tampering experiments, simulator construction and definition checks.

Adversaries act on split-state codewords whose parts are a classical
register plus (for part two) the quantum register Z.  The decoder
measures the classical registers, so each party is fully described by a
classically controlled instrument: for input value v it writes v' and
applies a Kraus operator to its quantum registers (see ``PartAction``).

Experiments are closed-form mixtures.  Every run is reduced to weights
over (op on part one, op on part two, encoding key c, decoding key c',
same flag) and a small table of quantum blocks; no sampling is involved.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

import numpy as np

from .extractors import bits_to_int, int_to_bits
from .nmc import CodeParams, InvalidParams, key_distribution, real_key_table
from .nmss import NmssParams, left_state, read_left
from .pauli_clifford import PauliOp, epr_projector, pauli_dense, sc_enumerate, sc_index, transpose_kraus_for
from .qmatrix import (
    Channel,
    DensityOperator,
    PureState,
    RegisterLayout,
    apply_channel,
    conjugate_local,
    maximally_entangled,
    maximally_mixed,
    ptrace,
    random_pure,
    random_unitary,
    trace_norm,
)
from .secret_sharing import (
    LRSSParams,
    cross_inner_product_zero_prob,
    half_zero_prob,
    ip_preimage_enumerate,
    qrec,
    qshare,
)

# ---------------------------------------------------------------------------
# adversary model


@dataclass(frozen=True, eq=False)
class PartAction:
    """Classically controlled instrument of one tampering party.

    On input value v, branch j writes ``out[v, j]`` and applies
    ``ops[op[v, j]]`` to the party's quantum registers (the part's quantum
    register first, then its half of W).  ``op = -1`` marks an unused
    branch.  Outputs of one input are distinct and the Kraus operators of
    one input sum to the identity.

    A unitary on (classical register (x) quantum registers) restricted to
    basis inputs has this form.  Non-injective classical maps are unitary
    once the input is copied into an ancilla that lives in W and is never
    read by the decoder.
    """

    out: np.ndarray
    op: np.ndarray
    ops: tuple[np.ndarray, ...]
    qdim: int

    def __post_init__(self):
        out = np.asarray(self.out, dtype=np.int64)
        op = np.asarray(self.op, dtype=np.int64)
        if out.ndim == 1:
            out, op = out[:, None], op[:, None]
        if out.shape != op.shape:
            raise ValueError("out and op tables differ in shape")
        ops = tuple(np.asarray(k, dtype=complex) for k in self.ops)
        for k in ops:
            if k.shape != (self.qdim, self.qdim):
                raise ValueError(f"Kraus operator shape {k.shape} does not match quantum dimension {self.qdim}")
        if op.max() >= len(ops) or (op < -1).any():
            raise ValueError("op index out of range")
        out = np.where(op >= 0, out, 0)
        if (out < 0).any() or out.max() >= out.shape[0]:
            raise ValueError("output value outside the register alphabet")
        out.setflags(write=False)
        op.setflags(write=False)
        object.__setattr__(self, "out", out)
        object.__setattr__(self, "op", op)
        object.__setattr__(self, "ops", ops)

    @property
    def n_values(self) -> int:
        return self.out.shape[0]

    @property
    def branches(self) -> int:
        return self.out.shape[1]

    @classmethod
    def identity(cls, n_values: int, qdim: int) -> "PartAction":
        return cls(np.arange(n_values), np.zeros(n_values, dtype=np.int64), (np.eye(qdim),), qdim)

    @classmethod
    def classical(cls, table: Sequence[int], qdim: int, op: np.ndarray | None = None) -> "PartAction":
        """Deterministic map v -> table[v] with the identity (or ``op``) on the quantum registers."""
        table = np.asarray(table, dtype=np.int64)
        k = np.eye(qdim) if op is None else op
        return cls(table, np.zeros(table.size, dtype=np.int64), (k,), qdim)

    @classmethod
    def from_unitary(cls, u: np.ndarray, n_values: int, qdim: int, tol: float = 1e-12) -> "PartAction":
        """Branch form of a dense operator on (classical (x) quantum)."""
        u = np.asarray(u, dtype=complex)
        if u.shape != (n_values * qdim, n_values * qdim):
            raise ValueError("operator shape does not match the register sizes")
        blocks = u.reshape(n_values, qdim, n_values, qdim).transpose(2, 0, 1, 3)  # [v, v', :, :]
        ops: list[np.ndarray] = []
        index: dict[bytes, int] = {}
        rows = []
        for v in range(n_values):
            row = []
            for w in range(n_values):
                k = blocks[v, w]
                if np.abs(k).max() <= tol:
                    continue
                key = np.round(k, 12).tobytes()
                if key not in index:
                    index[key] = len(ops)
                    ops.append(k)
                row.append((w, index[key]))
            rows.append(row)
        width = max(1, max(len(r) for r in rows))
        out = np.zeros((n_values, width), dtype=np.int64)
        opt = -np.ones((n_values, width), dtype=np.int64)
        for v, row in enumerate(rows):
            for j, (w, k) in enumerate(row):
                out[v, j], opt[v, j] = w, k
        return cls(out, opt, tuple(ops), qdim)

    def validate(self, tol: float = 1e-10) -> "PartAction":
        used = self.op >= 0
        for v_row, o_row, m in zip(self.out, self.op, used):
            if len(set(v_row[m].tolist())) != int(m.sum()):
                raise ValueError("branches of one input must write distinct outputs")
        gram = [k.conj().T @ k for k in self.ops]
        for row in np.unique(self.op, axis=0):
            acc = sum((gram[k] for k in row if k >= 0), np.zeros((self.qdim, self.qdim), dtype=complex))
            if not np.allclose(acc, np.eye(self.qdim), atol=tol):
                raise ValueError("Kraus operators of an input do not sum to the identity")
        return self

    def dense(self) -> np.ndarray:
        """The operator sum_v sum_j |out><v| (x) K on (classical (x) quantum); small sizes only."""
        n, q = self.n_values, self.qdim
        if n * q > 4096:
            raise ValueError("register too large for a dense operator")
        u = np.zeros((n, q, n, q), dtype=complex)
        for v in range(n):
            for j in range(self.branches):
                k = self.op[v, j]
                if k >= 0:
                    u[self.out[v, j], :, v, :] += self.ops[k]
        return u.reshape(n * q, n * q)

    def classical_projection(self) -> np.ndarray:
        """The classical map of a single-branch action."""
        if self.branches != 1:
            raise ValueError("action has several branches")
        return self.out[:, 0].copy()


def _trivial_shared(labels: Sequence[str]) -> PureState:
    return PureState(np.ones(1, dtype=complex), RegisterLayout(tuple((lab, 1) for lab in labels)))


@dataclass(frozen=True, eq=False)
class SplitAdversary:
    """Tampering pair for the split-state code.

    ``u`` acts on (X, W1) with ``qdim = dim W1``; ``v`` acts on (Y, Z, W2)
    with classical input Y and ``qdim = dim Z * dim W2`` (Z first).
    ``shared_state`` lives on (W1, W2).
    """

    u: PartAction
    v: PartAction
    shared_state: PureState = field(default_factory=lambda: _trivial_shared(["W1", "W2"]))
    name: str = "custom"

    @property
    def w1(self) -> int:
        return self.shared_state.layout.dim("W1")

    @property
    def w2(self) -> int:
        return self.shared_state.layout.dim("W2")

    def check(self, prm: CodeParams) -> "SplitAdversary":
        if set(self.shared_state.labels) != {"W1", "W2"}:
            raise InvalidParams("shared state must live on registers W1, W2")
        if self.u.n_values != 1 << prm.ell or self.u.qdim != self.w1:
            raise InvalidParams("part-one action does not match (X, W1)")
        if self.v.n_values != 1 << prm.m or self.v.qdim != (1 << prm.b) * self.w2:
            raise InvalidParams("part-two action does not match (Y, Z, W2)")
        return self

    def classical_projection(self) -> tuple[np.ndarray, np.ndarray]:
        """(f, g) for a classical adversary; g acts on part-two basis values y * 2^b + z (W2 trivial)."""
        if self.w2 != 1:
            raise ValueError("classical projection needs a trivial W2")
        f = self.u.classical_projection()
        dz = self.v.qdim
        g = np.zeros(self.v.n_values * dz, dtype=np.int64)
        for y in range(self.v.n_values):
            for j in range(self.v.branches):
                k = self.v.op[y, j]
                if k < 0:
                    continue
                kraus = self.v.ops[k]
                for z in range(dz):
                    col = kraus[:, z]
                    nz = np.flatnonzero(np.abs(col) > 1e-12)
                    if nz.size == 1 and abs(abs(col[nz[0]]) - 1) < 1e-12:
                        g[y * dz + z] = self.v.out[y, j] * dz + nz[0]
        return f, g


@dataclass(frozen=True, eq=False)
class ThresholdAdversary:
    """Tampering by an authorised set T of the quantum NMSS.

    ``unitaries[i]`` acts on (L_i, W_i); ``slot_perms[i]`` relabels the
    slots of R_i (slot j receives what slot perm[j] held).  R-side action
    is restricted to slot permutations.  ``shared_state`` lives on the W_i.
    """

    parties: tuple[int, ...]
    unitaries: Mapping[int, np.ndarray] = field(default_factory=dict)
    slot_perms: Mapping[int, Mapping[int, int]] = field(default_factory=dict)
    shared_state: PureState | None = None
    name: str = "custom"

    def shared(self) -> PureState:
        if self.shared_state is not None:
            return self.shared_state
        return _trivial_shared([f"W_{i}" for i in self.parties])

    def check(self, prm: NmssParams) -> "ThresholdAdversary":
        if len(set(self.parties)) != prm.t or not set(self.parties) <= set(range(1, prm.p + 1)):
            raise InvalidParams(f"tampering set must be t = {prm.t} distinct parties")
        sh = self.shared()
        for i in self.parties:
            dw = sh.layout.dim(f"W_{i}")
            u = self.unitaries.get(i)
            if u is not None:
                d = prm.shamir.share_dim * dw
                if u.shape != (d, d) or not np.allclose(u.conj().T @ u, np.eye(d), atol=1e-10):
                    raise InvalidParams(f"party {i} operator is not a unitary on (L_{i}, W_{i})")
            perm = self.slot_perms.get(i, {})
            slots = [j for j in range(1, prm.p + 1) if j != i]
            full = [perm.get(j, j) for j in slots]
            if sorted(full) != slots:
                raise InvalidParams(f"party {i} slot map is not a permutation of its slots")
        return self


@dataclass(frozen=True, eq=False)
class LeakageAdversary:
    """Unauthorised set T with leakage channels Phi_j : (S_j, W_j) -> Z_j for j not in T."""

    parties: tuple[int, ...]
    channels: Mapping[int, Channel]
    shared_state: PureState
    ell_leak: int


# ---------------------------------------------------------------------------
# results


@dataclass(frozen=True, eq=False)
class ExperimentResult:
    final_state: DensityOperator
    target: DensityOperator
    p_A: float
    gamma_A: DensityOperator
    epsilon_measured: float
    p_same: float
    p_epr: float
    metadata: dict = field(default_factory=dict)

    def simulator_state(self) -> DensityOperator:
        return _simulated(self.target, self.p_A, self.gamma_A)

    def recompute_epsilon(self) -> float:
        return trace_norm(self.final_state.matrix - self.simulator_state().matrix)

    def summary(self) -> dict:
        return {"p_same": self.p_same, "p_epr": self.p_epr, "p_A": self.p_A,
                "epsilon_measured": self.epsilon_measured, **self.metadata}


@dataclass(frozen=True)
class Simulator:
    p_same: float
    p_epr: float
    p_A: float
    gamma_A: DensityOperator


def _simulated(sigma: DensityOperator, p_a: float, gamma: DensityOperator) -> DensityOperator:
    """p sigma + (1 - p) gamma_M (x) sigma_ext in the layout of ``sigma``."""
    ext = [lab for lab in sigma.labels if lab != "M"]
    rest = sigma.marginal(ext).matrix if ext else np.ones((1, 1))
    prod = DensityOperator(np.kron(gamma.matrix, rest), RegisterLayout.of(("M", gamma.dims[0]))
                           .concat(sigma.layout.select(ext))).reorder(sigma.labels)
    return DensityOperator(p_a * sigma.matrix + (1 - p_a) * prod.matrix, sigma.layout)


# ---------------------------------------------------------------------------
# split-state engine


def _identity_index(b: int) -> int:
    from .pauli_clifford import CliffordOp

    return sc_index(CliffordOp.identity(b))


def _nmc_weights(adv: SplitAdversary, prm: CodeParams, identity_key: bool = False) -> np.ndarray:
    """Probabilities W[o1, o2, c, c', same] over the whole (X, Y) enumeration."""
    n1, n2 = len(adv.u.ops), len(adv.v.ops)
    nc = len(sc_enumerate(prm.b))
    nx, ny = 1 << prm.ell, 1 << prm.m
    xs, ys = np.arange(nx), np.arange(ny)
    cid = _identity_index(prm.b)
    if prm.ideal:
        p = np.zeros(n1 * n2 * 2)
        for j1 in range(adv.u.branches):
            o1, xo = adv.u.op[:, j1], adv.u.out[:, j1]
            for j2 in range(adv.v.branches):
                o2, yo = adv.v.op[:, j2], adv.v.out[:, j2]
                valid = (o1 >= 0)[:, None] & (o2 >= 0)[None, :]
                same = (xo == xs)[:, None] & (yo == ys)[None, :]
                code = (o1[:, None] * n2 + o2[None, :]) * 2 + same
                p += np.bincount(code[valid], minlength=p.size)
        p = p.reshape(n1, n2, 2) / (nx * ny)
        out = np.zeros((n1, n2, nc, nc, 2))
        if identity_key:
            out[:, :, cid, cid, :] = p
            return out
        w = key_distribution(prm)
        out[..., 1] = p[:, :, None, None, 1] * np.diag(w)[None, None]
        out[..., 0] = p[:, :, None, None, 0] * np.outer(w, w)[None, None]
        return out
    table = real_key_table(prm)
    counts = np.zeros(n1 * n2 * nc * nc * 2)
    for j1 in range(adv.u.branches):
        o1, xo = adv.u.op[:, j1], adv.u.out[:, j1]
        for j2 in range(adv.v.branches):
            o2, yo = adv.v.op[:, j2], adv.v.out[:, j2]
            valid = (o1 >= 0)[:, None] & (o2 >= 0)[None, :]
            same = (xo == xs)[:, None] & (yo == ys)[None, :]
            if identity_key:
                c = np.full((nx, ny), cid)
                cp = c
            else:
                c = table
                cp = table[xo[:, None], yo[None, :]]
            code = (((o1[:, None] * n2 + o2[None, :]) * nc + c) * nc + cp) * 2 + same
            counts += np.bincount(code[valid], minlength=counts.size)
    return counts.reshape(n1, n2, nc, nc, 2) / (nx * ny)


def _mask_m(sigma: DensityOperator, u: np.ndarray) -> np.ndarray:
    return sigma.conjugate(u, ["M"]).matrix


class _NmcBlocks:
    """Quantum blocks for one (adversary, message): state on (W1, Z, W2, ext) and its images."""

    def __init__(self, adv: SplitAdversary, sigma: DensityOperator, prm: CodeParams):
        self.ext = [lab for lab in sigma.labels if lab != "M"]
        self.base = sigma.reorder(["M"] + self.ext)
        self.dz = 1 << prm.b
        self.dext = int(np.prod(self.base.dims[1:])) if self.ext else 1
        psi = adv.shared_state.reorder(["W1", "W2"]).vector
        self.psi = np.outer(psi, psi.conj())
        self.adv = adv
        self.cl = [c.dense() for c in sc_enumerate(prm.b)]
        self.dims = [adv.w1, self.dz, adv.w2, self.dext]
        self._cache: dict = {}

    def omega(self, c: int) -> np.ndarray:
        """(W1, Z, W2, ext) state with key c applied to Z."""
        z = _mask_m(self.base, self.cl[c])
        d1, d2 = self.adv.w1, self.adv.w2
        full = np.kron(self.psi, z)  # (W1, W2, Z, ext)
        from .qmatrix import permute_registers

        return permute_registers(full, [d1, d2, self.dz, self.dext], [0, 2, 1, 3])

    def tampered(self, o1: int, o2: int, c: int) -> np.ndarray:
        """Tr_W of the tampered block: state on (Z, ext)."""
        key = (o1, o2, c)
        if key not in self._cache:
            om = self.omega(c)
            m, _ = conjugate_local(om, self.dims, self.adv.u.ops[o1], [0])
            m, _ = conjugate_local(m, self.dims, self.adv.v.ops[o2], [1, 2])
            self._cache[key] = ptrace(m, self.dims, [1, 3])
        return self._cache[key]


def _decode_sum(blocks, weights: np.ndarray, cl: list[np.ndarray], dz: int, dext: int) -> np.ndarray:
    """sum W[o1, o2, c, c'] C_c'^dag T[o1, o2, c] C_c'."""
    n1, n2, nc, _ = weights.shape
    d = dz * dext
    acc = np.zeros((nc, d, d), dtype=complex)
    for o1, o2, c in itertools.product(range(n1), range(n2), range(nc)):
        w = weights[o1, o2, c]
        if not w.any():
            continue
        acc += w[:, None, None] * blocks.tampered(o1, o2, c)[None]
    out = np.zeros((d, d), dtype=complex)
    for cp in range(nc):
        if not np.abs(acc[cp]).max():
            continue
        k = np.kron(cl[cp].conj().T, np.eye(dext))
        out += k @ acc[cp] @ k.conj().T
    return out


def nmc_branches(adv: SplitAdversary, sigma: DensityOperator, prm: CodeParams,
                 identity_key: bool = False) -> tuple[DensityOperator, DensityOperator]:
    """Unnormalised decoded states of the same branch (X'Y' = XY) and the tamp branch.

    ``identity_key`` runs the experiment with every key replaced by the
    identity (no masking, no unmasking).
    """
    adv.check(prm)
    if "M" not in sigma.labels or sigma.layout.dim("M") != 1 << prm.b:
        raise InvalidParams("message register M missing or of the wrong size")
    w = _nmc_weights(adv, prm, identity_key)
    blocks = _NmcBlocks(adv, sigma, prm)
    layout = blocks.base.layout
    out = []
    for flag in (1, 0):
        m = _decode_sum(blocks, w[..., flag], blocks.cl, blocks.dz, blocks.dext)
        out.append(DensityOperator(m, layout).reorder(sigma.labels))
    return out[0], out[1]


def run_nmc_experiment(adv: SplitAdversary, sigma: DensityOperator, prm: CodeParams) -> DensityOperator:
    """Dec((U (x) V)(Enc(sigma) (x) psi)(U (x) V)^dag) as an exact mixture."""
    same, tamp = nmc_branches(adv, sigma, prm)
    return DensityOperator(same.matrix + tamp.matrix, sigma.layout)


def _simulator_from_runs(same_u: DensityOperator, tamp_u: DensityOperator, same_epr: DensityOperator,
                         b_dim: int) -> Simulator:
    p_same = float(np.trace(same_u.matrix).real)
    if p_same > 1e-15:
        pi = epr_projector(int(round(math.log2(b_dim))))
        ordered = same_epr.reorder(["M", "Mh"]).matrix
        p_epr = float(np.trace(pi @ ordered).real) / p_same
        p_epr = min(1.0, max(0.0, p_epr))
    else:
        p_same, p_epr = 0.0, 0.0
    p_a = p_same * p_epr
    u = np.eye(b_dim) / b_dim
    rest = p_same * (1 - p_epr) * u + tamp_u.matrix
    if 1 - p_a > 1e-15:
        gamma = rest / (1 - p_a)
    else:
        gamma = u
    return Simulator(p_same, p_epr, p_a, DensityOperator(gamma, RegisterLayout.of(("M", b_dim))))


def _epr_message(b: int) -> DensityOperator:
    return maximally_entangled("M", "Mh", 1 << b).density()


def build_simulator(adv: SplitAdversary | ThresholdAdversary, prm: CodeParams | NmssParams) -> Simulator:
    """(p_A, gamma_A) from independent runs; no message is consulted.

    p_same comes from the run on the maximally mixed message, p_epr is the
    EPR overlap of the same branch in an identity-key run on a maximally
    entangled message, and gamma_A mixes the maximally mixed state with the
    tamp branch of the maximally mixed run.
    """
    if isinstance(adv, ThresholdAdversary):
        code, runner = prm.code, nmss_branches
    else:
        code, runner = prm, nmc_branches
    d = 1 << code.b
    unif = maximally_mixed(RegisterLayout.of(("M", d)))
    same_u, tamp_u = runner(adv, unif, prm)
    same_e, _ = runner(adv, _epr_message(code.b), prm, identity_key=True)
    return _simulator_from_runs(same_u, tamp_u, same_e, d)


def nm_check(adv: SplitAdversary, sigma: DensityOperator, prm: CodeParams,
             simulator: Simulator | None = None) -> ExperimentResult:
    """Experiment plus simulator; epsilon is the trace distance to the simulated state.

    With sigma maximally entangled this is the average-case test; other
    messages give the worst-case test against the same simulator.
    """
    sim = build_simulator(adv, prm) if simulator is None else simulator
    eta = run_nmc_experiment(adv, sigma, prm)
    eps = trace_norm(eta.matrix - _simulated(sigma, sim.p_A, sim.gamma_A).matrix)
    return ExperimentResult(eta, sigma, sim.p_A, sim.gamma_A, eps, sim.p_same, sim.p_epr,
                            {"scheme": "nmc", "adversary": adv.name, "mode": prm.mode})


# ---------------------------------------------------------------------------
# pipeline stages


@dataclass(frozen=True)
class StageReport:
    """Largest entrywise difference per stage between the three pipelines.

    Stage 1: encoded blocks, key on Z versus key transposed on M_hat.
    Stage 2: tampered blocks (W kept).  Stage 3: decoded blocks.
    ``delayed`` compares decoded blocks with the pipeline that applies
    both keys after tampering; ``final`` compares the output states.
    """

    stage1: float
    stage2: float
    stage3: float
    delayed: float
    final: float

    def max(self) -> float:
        return max(self.stage1, self.stage2, self.stage3, self.delayed, self.final)


def stage_comparison(adv: SplitAdversary, prm: CodeParams) -> StageReport:
    """Compare the direct, transposed and delayed pipelines on a maximally entangled message.

    The classical registers make each stage block diagonal, with blocks
    determined by (ops, keys) and weights shared by all pipelines, so the
    comparison runs over the distinct blocks that occur.
    """
    adv.check(prm)
    w = _nmc_weights(adv, prm).sum(axis=-1)
    b = prm.b
    dz = 1 << b
    cl = [c.dense() for c in sc_enumerate(b)]
    psi_w = adv.shared_state.reorder(["W1", "W2"]).vector
    psi_w = np.outer(psi_w, psi_w.conj())
    phi = epr_projector(b)  # (Z, Mh)
    d1, d2 = adv.w1, adv.w2
    dims = [d1, dz, d2, dz]  # (W1, Z, W2, Mh)

    def with_w(zm: np.ndarray) -> np.ndarray:
        from .qmatrix import permute_registers

        full = np.kron(psi_w, zm)  # (W1, W2, Z, Mh)
        return permute_registers(full, [d1, d2, dz, dz], [0, 2, 1, 3])

    def tamper(m: np.ndarray, o1: int, o2: int) -> np.ndarray:
        m, _ = conjugate_local(m, dims, adv.u.ops[o1], [0])
        m, _ = conjugate_local(m, dims, adv.v.ops[o2], [1, 2])
        return m

    def on(m: np.ndarray, u: np.ndarray, reg: int) -> np.ndarray:
        return conjugate_local(m, dims, u, [reg])[0]

    n1, n2, nc, _ = w.shape
    s1 = s2 = s3 = s4 = 0.0
    eta = {k: np.zeros((dz * dz, dz * dz), dtype=complex) for k in ("direct", "transposed", "delayed")}
    base = with_w(phi)
    for c in range(nc):
        if not w[:, :, c].any():
            continue
        direct = on(base, cl[c], 1)
        transposed = on(base, cl[c].T, 3)
        s1 = max(s1, np.abs(direct - transposed).max())
        for o1, o2 in itertools.product(range(n1), range(n2)):
            row = w[o1, o2, c]
            if not row.any():
                continue
            td, tt = tamper(direct, o1, o2), tamper(transposed, o1, o2)
            s2 = max(s2, np.abs(td - tt).max())
            raw = tamper(base, o1, o2)
            for cp in np.flatnonzero(row):
                dd = on(td, cl[cp].conj().T, 1)
                dt = on(tt, cl[cp].conj().T, 1)
                dl = on(on(raw, cl[c].T, 3), cl[cp].conj().T, 1)
                s3 = max(s3, np.abs(dd - dt).max())
                s4 = max(s4, np.abs(dd - dl).max())
                for k, m in (("direct", dd), ("transposed", dt), ("delayed", dl)):
                    eta[k] += row[cp] * ptrace(m, dims, [1, 3])
    fin = max(np.abs(eta["direct"] - eta["transposed"]).max(), np.abs(eta["direct"] - eta["delayed"]).max())
    return StageReport(float(s1), float(s2), float(s3), float(s4), float(fin))


# ---------------------------------------------------------------------------
# rejection conditioning


def rejection_condition(sigma_target: DensityOperator | np.ndarray, avg_final: DensityOperator,
                        copy_label: str = "Mh") -> tuple[float, DensityOperator]:
    """Condition the maximally-entangled-message run on the target message.

    Applies K = sqrt(sigma)^T / sqrt(lambda_max) to the copy register and
    renormalises.  Success probability is 1 / (d lambda_max) >= 2^-b.
    """
    s = sigma_target.matrix if isinstance(sigma_target, DensityOperator) else np.asarray(sigma_target)
    d = avg_final.layout.dim(copy_label)
    if s.shape != (d, d):
        raise InvalidParams("target message does not match the copy register")
    k = transpose_kraus_for(s)
    m = avg_final.conjugate(k, [copy_label]).matrix
    p = float(np.trace(m).real)
    return p, DensityOperator(m / p, avg_final.layout)


def canonical_message(rho: DensityOperator | np.ndarray, copy_label: str = "Mh") -> DensityOperator:
    """Canonical purification of a message on M with the copy register after it."""
    from .qmatrix import canonical_purification

    if not isinstance(rho, DensityOperator):
        rho = DensityOperator(np.asarray(rho, dtype=complex), RegisterLayout.of(("M", np.asarray(rho).shape[0])))
    return canonical_purification(rho, copy_label).density()


# ---------------------------------------------------------------------------
# threshold engine


def _provenance_same(adv: ThresholdAdversary) -> bool:
    i, j = sorted(adv.parties)[:2]
    return adv.slot_perms.get(i, {}).get(j, j) == j and adv.slot_perms.get(j, {}).get(i, i) == i


def cross_reconstruction_law(k: int, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Law of IP(a, b) for halves a, b of two independent sharings of x.

    Returns (P(result = x), P(result = 0)) indexed by x.  A half of a
    sharing of x is zero with probability alpha(x) and otherwise uniform
    on nonzero vectors; a nonzero inner product is uniform on the nonzero
    field elements.
    """
    q = 1 << k
    a0 = half_zero_prob(0, k, n)
    z0 = cross_inner_product_zero_prob(a0, a0, k, n)
    zc = cross_inner_product_zero_prob(0.0, 0.0, k, n)
    zero = np.full(q, zc)
    zero[0] = z0
    stay = np.full(q, (1 - zc) / (q - 1))
    stay[0] = z0
    return stay, zero


def _x_prime_law(prm: NmssParams, same_prov: bool) -> tuple[np.ndarray, np.ndarray]:
    """(P(X' = X | X = x), P(X' = 0 | X = x)) for every x."""
    if same_prov:
        nx = 1 << prm.code.ell
        zero = np.zeros(nx)
        zero[0] = 1.0
        return np.ones(nx), zero
    return cross_reconstruction_law(prm.code.ell, prm.lrss_N)


def _nmss_weights(adv: ThresholdAdversary, prm: NmssParams, identity_key: bool) -> np.ndarray:
    """Weights W[y, c, y', c', same]; the probability of y' lives in the quantum blocks."""
    code = prm.code
    nc = len(sc_enumerate(code.b))
    ny = 1 << code.m
    nx = 1 << code.ell
    cid = _identity_index(code.b)
    same_prov = _provenance_same(adv)
    stay, zero = _x_prime_law(prm, same_prov)
    out = np.zeros((ny, nc, ny, nc, 2))
    if code.ideal:
        p_stay = float(stay.mean())
        w = np.zeros(nc)
        w[cid] = 1.0
        if not identity_key:
            w = key_distribution(code)
        for y, yp in itertools.product(range(ny), repeat=2):
            if yp == y:
                if identity_key:
                    out[y, cid, yp, cid, 1] = p_stay / ny
                    out[y, cid, yp, cid, 0] = (1 - p_stay) / ny
                else:
                    out[y, :, yp, :, 1] = p_stay / ny * np.diag(w)
                    out[y, :, yp, :, 0] = (1 - p_stay) / ny * np.outer(w, w)
            else:
                out[y, :, yp, :, 0] = np.outer(w, w) / ny
        return out
    table = real_key_table(code)
    xs = np.arange(nx)
    q = nx
    for y, yp in itertools.product(range(ny), repeat=2):
        c = np.full(nx, cid) if identity_key else table[:, y]
        c_stay = np.full(nx, cid) if identity_key else table[:, yp]
        flag = 1 if yp == y else 0
        acc = np.zeros((nc, nc, 2))
        # X' = X
        np.add.at(acc, (c, c_stay, flag), stay / (nx * ny))
        if same_prov:
            out[y, :, yp, :, :] += acc
            continue
        # X' = 0 for x != 0
        c0 = cid if identity_key else table[0, yp]
        np.add.at(acc, (c[1:], np.full(nx - 1, c0), 0), zero[1:] / (nx * ny))
        # X' uniform on the other nonzero values
        if identity_key:
            hist = np.zeros(nc)
            hist[cid] = q - 1
        else:
            hist = np.bincount(table[1:, yp], minlength=nc).astype(float)
        u = (1 - zero) / (q - 1)
        for x_chunk in np.array_split(xs, 16):
            rows = np.repeat(hist[None], x_chunk.size, axis=0)
            nz = x_chunk != 0
            rows[np.flatnonzero(nz), c_stay[x_chunk[nz]]] -= 1.0
            contrib = rows * (u[x_chunk] / (nx * ny))[:, None]
            np.add.at(acc[:, :, 0], c[x_chunk], contrib)
        out[y, :, yp, :, :] += acc
    return out


class _NmssBlocks:
    """Per (y, c): shared, tampered, reconstructed left part, split by y'."""

    def __init__(self, adv: ThresholdAdversary, sigma: DensityOperator, prm: NmssParams):
        self.adv, self.prm = adv, prm
        self.ext = [lab for lab in sigma.labels if lab != "M"]
        self.sigma = sigma.reorder(["M"] + self.ext)
        self.cl = [c.dense() for c in sc_enumerate(prm.code.b)]
        self.shared = adv.shared()
        self._cache: dict = {}

    def split(self, y: int, c: int) -> list[np.ndarray]:
        """Unnormalised (Z, ext) states per y' for encoded (y, key c)."""
        if (y, c) in self._cache:
            return self._cache[(y, c)]
        from .nmc import SplitStateCodeword

        code = self.prm.code
        z = DensityOperator(_mask_m(self.sigma, self.cl[c]), self.sigma.layout.relabel({"M": "Z"}))
        cw = SplitStateCodeword(int_to_bits(0, code.ell), int_to_bits(y, code.m), z)
        shares = qshare(left_state(cw, self.prm), self.prm.shamir).state
        wlab = list(self.shared.labels)
        full = DensityOperator(np.kron(shares.matrix, self.shared.density().matrix),
                               shares.layout.concat(self.shared.layout))
        for i in self.adv.parties:
            u = self.adv.unitaries.get(i)
            if u is not None:
                full = full.conjugate(u, [f"S_{i}", f"W_{i}"])
        lrec = qrec(full, self.adv.parties, self.prm.shamir)
        lrec = lrec.marginal(["M"] + self.ext)
        out = [br.matrix for _, _, br in read_left(lrec, self.prm)]
        self._cache[(y, c)] = out
        return out


def nmss_branches(adv: ThresholdAdversary, sigma: DensityOperator, prm: NmssParams,
                  identity_key: bool = False) -> tuple[DensityOperator, DensityOperator]:
    """Same-branch and tamp-branch decoded states of the threshold experiment."""
    adv.check(prm)
    code = prm.code
    if "M" not in sigma.labels or sigma.layout.dim("M") != 1 << code.b:
        raise InvalidParams("message register M missing or of the wrong size")
    w = _nmss_weights(adv, prm, identity_key)
    blocks = _NmssBlocks(adv, sigma, prm)
    layout = blocks.sigma.layout
    dext = int(np.prod(layout.dims[1:])) if blocks.ext else 1
    dz = 1 << code.b
    ny, nc = w.shape[0], w.shape[1]
    res = []
    for flag in (1, 0):
        acc = np.zeros((nc, dz * dext, dz * dext), dtype=complex)
        for y, c, yp in itertools.product(range(ny), range(nc), range(ny)):
            row = w[y, c, yp, :, flag]
            if not row.any():
                continue
            acc += row[:, None, None] * blocks.split(y, c)[yp][None]
        m = np.zeros((dz * dext, dz * dext), dtype=complex)
        for cp in range(nc):
            if np.abs(acc[cp]).max() == 0:
                continue
            k = np.kron(blocks.cl[cp].conj().T, np.eye(dext))
            m += k @ acc[cp] @ k.conj().T
        res.append(DensityOperator(m, layout).reorder(sigma.labels))
    return res[0], res[1]


def run_nmss_experiment(adv: ThresholdAdversary, sigma: DensityOperator, prm: NmssParams) -> ExperimentResult:
    """Tamper an authorised set, reconstruct from it, and compare with the simulator."""
    same, tamp = nmss_branches(adv, sigma, prm)
    eta = DensityOperator(same.matrix + tamp.matrix, sigma.layout)
    sim = build_simulator(adv, prm)
    eps = trace_norm(eta.matrix - _simulated(sigma, sim.p_A, sim.gamma_A).matrix)
    return ExperimentResult(eta, sigma, sim.p_A, sim.gamma_A, eps, sim.p_same, sim.p_epr,
                            {"scheme": "nmss", "adversary": adv.name, "mode": code_mode(prm)})


def code_mode(prm: NmssParams | CodeParams) -> str:
    return prm.code.mode if isinstance(prm, NmssParams) else prm.mode


# ---------------------------------------------------------------------------
# leakage


@dataclass(frozen=True)
class LeakageReport:
    distance: float
    per_secret: dict
    parties: tuple[int, ...]


def _leak_views(adv: LeakageAdversary, s: int, prm: LRSSParams) -> dict[int, np.ndarray]:
    """Colluders' view per value of their classical share: state on (W_T, Z_others)."""
    k, n = prm.b, prm.N
    dshare = 1 << (k * n)
    pre = ip_preimage_enumerate(s, k, n)
    others = [j for j in (1, 2) if j not in adv.parties]
    sh = adv.shared_state
    views: dict[int, np.ndarray] = {}
    cache: dict = {}
    for x, y in pre:
        vals = {1: x.to_int(), 2: y.to_int()}
        key = tuple(vals[j] for j in others)
        if key not in cache:
            st = sh.density()
            for j in others:
                basis = np.zeros((dshare, dshare))
                basis[vals[j], vals[j]] = 1.0
                st = DensityOperator(np.kron(basis, st.matrix),
                                     RegisterLayout.of((f"S_{j}", dshare)).concat(st.layout))
                ch = adv.channels[j]
                st = apply_channel(ch, st, [f"S_{j}", f"W_{j}"]).relabel({ch.out_layout.labels[0]: f"Z_{j}"})
            keep = [f"W_{i}" for i in adv.parties] + [f"Z_{j}" for j in others]
            cache[key] = st.marginal(keep).matrix
        tkey = tuple(vals[i] for i in adv.parties)
        tkey_int = tkey[0] if tkey else 0
        views[tkey_int] = views.get(tkey_int, 0) + cache[key] / len(pre)
    return views


def run_leakage_experiment(adv: LeakageAdversary, s: int | None, prm: LRSSParams) -> LeakageReport:
    """Exact distance of the colluders' view with leakage from the uniform-message view.

    Two-party inner-product sharing.  The view is classical-quantum in the
    colluders' shares, so the trace norm adds up over their values.  With
    ``s = None`` the secret is uniform and the report is the distance of
    the joint state with a copy of the secret from the product.
    """
    if prm.p != 2:
        raise InvalidParams("leakage experiments cover two-party sharing")
    if len(adv.parties) > 1 or not set(adv.parties) <= {1, 2}:
        raise InvalidParams("colluding set must be unauthorised")
    for j, ch in adv.channels.items():
        if len(ch.out_layout.registers) != 1:
            raise InvalidParams("leakage channels must output a single register")
        if ch.out_layout.total > 1 << adv.ell_leak:
            raise InvalidParams(f"leakage from share {j} exceeds {adv.ell_leak} bits")
    for j in (1, 2):
        if j not in adv.parties and j not in adv.channels:
            raise InvalidParams(f"missing leakage channel for share {j}")
    q = 1 << prm.b
    views = {sv: _leak_views(adv, sv, prm) for sv in range(q)}
    keys = sorted(set().union(*[v.keys() for v in views.values()]))

    def get(v: dict, key: int, like: np.ndarray) -> np.ndarray:
        return v.get(key, np.zeros_like(like))

    like = next(iter(views[0].values()))
    gamma = {key: sum(get(views[sv], key, like) for sv in range(q)) / q for key in keys}
    per = {sv: float(sum(trace_norm(get(views[sv], key, like) - gamma[key]) for key in keys)) for sv in range(q)}
    dist = per[s] if s is not None else float(np.mean(list(per.values())))
    return LeakageReport(dist, per, tuple(adv.parties))


# ---------------------------------------------------------------------------
# adversary zoo


def _parse_spec(spec: str | Mapping[str, Any]) -> tuple[str, dict]:
    if isinstance(spec, str):
        name, _, arg = spec.partition(":")
        opts: dict = {}
        if arg:
            if "@" in arg:
                a, _, b = arg.partition("@")
                opts.update({"pauli": a, "register": b})
            elif arg.lstrip("-").isdigit():
                opts["seed"] = int(arg)
            else:
                opts["arg"] = arg
        return name, opts
    spec = dict(spec)
    return str(spec.pop("name")), spec


def _swap(d: int) -> np.ndarray:
    s = np.zeros((d * d, d * d))
    for a, b in itertools.product(range(d), repeat=2):
        s[b * d + a, a * d + b] = 1.0
    return s


def _partial_perm(n: int, rng: np.random.Generator, moved: float = 0.5) -> np.ndarray:
    """Random permutation of range(n) moving about ``moved`` of the points."""
    perm = np.arange(n)
    idx = np.flatnonzero(rng.random(n) < moved)
    perm[idx] = idx[rng.permutation(idx.size)]
    return perm


def _shared_pure(d1: int, d2: int, vec: np.ndarray | None = None) -> PureState:
    layout = RegisterLayout.of(("W1", d1), ("W2", d2))
    if vec is None:
        vec = np.zeros(d1 * d2, dtype=complex)
        vec[0] = 1.0
    return PureState(np.asarray(vec, dtype=complex), layout)


def adversary_zoo(spec: str | Mapping[str, Any], prm: CodeParams | NmssParams):
    """Named adversaries.

    Split-state (``CodeParams``): ``identity``, ``constant-replace[:one|two|both]``,
    ``pauli:P@Z`` (also ``@X``/``@Y`` for bit flips), ``swap-with-entangled-half``,
    ``haar_random:SEED`` (Haar unitaries on the quantum registers only),
    ``classical`` with ``f`` and ``g`` tables, ``random-classical:SEED``,
    ``random-branching:SEED``.

    Threshold (``NmssParams``): ``identity``, ``pauli:PARTY``,
    ``slot-swap:PARTY``, ``haar_random:SEED``, or a dict with ``unitaries``
    and ``slot_perms``.
    """
    name, opts = _parse_spec(spec)
    if isinstance(prm, NmssParams):
        return _threshold_zoo(name, opts, prm)
    nx, ny, dz = 1 << prm.ell, 1 << prm.m, 1 << prm.b
    label = spec if isinstance(spec, str) else name
    if name == "identity":
        return SplitAdversary(PartAction.identity(nx, 1), PartAction.identity(ny, dz), name=label)
    if name == "constant-replace":
        part = opts.get("arg", opts.get("part", "both"))
        if part not in ("one", "two", "both"):
            raise ValueError(f"unknown part {part!r}")
        u = PartAction.classical(np.zeros(nx), 1) if part in ("one", "both") else PartAction.identity(nx, 1)
        if part in ("two", "both"):
            v = PartAction.classical(np.zeros(ny), dz * dz, op=_swap(dz))
            return SplitAdversary(u, v, _shared_pure(1, dz), name=label)
        return SplitAdversary(u, PartAction.identity(ny, dz), name=label)
    if name == "pauli":
        reg = opts.get("register", "Z")
        text = opts.get("pauli", "X" * prm.b)
        p = PauliOp.from_text(text)
        if reg == "Z":
            if p.n != prm.b:
                raise ValueError("Pauli length differs from b")
            return SplitAdversary(PartAction.identity(nx, 1), PartAction.classical(np.arange(ny), dz, pauli_dense(p)),
                                  name=label)
        mask = bits_to_int(p.x)
        if reg == "X":
            if p.n != prm.ell:
                raise ValueError("Pauli length differs from ell")
            return SplitAdversary(PartAction.classical(np.arange(nx) ^ mask, 1), PartAction.identity(ny, dz), name=label)
        if reg == "Y":
            if p.n != prm.m:
                raise ValueError("Pauli length differs from m")
            return SplitAdversary(PartAction.identity(nx, 1), PartAction.classical(np.arange(ny) ^ mask, dz), name=label)
        raise ValueError(f"unknown register {reg!r}")
    if name == "swap-with-entangled-half":
        vec = maximally_entangled("W1", "W2", dz).vector
        v = PartAction.classical(np.arange(ny), dz * dz, op=_swap(dz))
        return SplitAdversary(PartAction.identity(nx, dz), v, _shared_pure(dz, dz, vec), name=label)
    if name == "haar_random":
        rng = np.random.default_rng(int(opts.get("seed", 0)))
        shared = random_pure(RegisterLayout.of(("W1", 2), ("W2", 2)), rng)
        u = PartAction.classical(np.arange(nx), 2, random_unitary(2, rng))
        v = PartAction.classical(np.arange(ny), dz * 2, random_unitary(dz * 2, rng))
        return SplitAdversary(u, v, shared, name=label)
    if name == "classical":
        f = np.asarray(opts["f"], dtype=np.int64)
        g = np.asarray(opts["g"], dtype=np.int64)
        return _classical_adversary(f, g, prm, label)
    if name == "random-classical":
        rng = np.random.default_rng(int(opts.get("seed", 0)))
        f = _partial_perm(nx, rng, float(opts.get("moved", 0.5)))
        g = _partial_perm(ny * dz, rng, float(opts.get("moved", 0.5)))
        return _classical_adversary(f, g, prm, label)
    if name == "random-branching":
        rng = np.random.default_rng(int(opts.get("seed", 0)))
        shared = random_pure(RegisterLayout.of(("W1", 2), ("W2", 2)), rng)
        basis = random_unitary(2, rng)
        kraus = []
        for j in range(2):
            proj = np.outer(basis[:, j], basis[:, j].conj())
            kraus.append(random_unitary(2, rng) @ proj)
        f0 = _partial_perm(nx, rng)
        f1 = _partial_perm(nx, rng)
        out1 = np.stack([f0, f1], axis=1)
        clash = out1[:, 0] == out1[:, 1]
        out1[clash, 1] = (out1[clash, 1] + 1) % nx
        u = PartAction(out1, np.tile([0, 1], (nx, 1)), tuple(kraus), 2)
        g = _partial_perm(ny, rng)
        ops = tuple(random_unitary(dz * 2, rng) for _ in range(ny))
        v = PartAction(g, np.arange(ny), ops, dz * 2)
        return SplitAdversary(u, v, shared, name=label)
    raise ValueError(f"unknown adversary {name!r}")


def _classical_adversary(f: np.ndarray, g: np.ndarray, prm: CodeParams, label: str) -> SplitAdversary:
    """f on X values; g on Y values or on part-two basis values y * 2^b + z."""
    nx, ny, dz = 1 << prm.ell, 1 << prm.m, 1 << prm.b
    if f.size != nx:
        raise ValueError("f must have one entry per X value")
    u = PartAction.classical(f, 1)
    if g.size == ny:
        return SplitAdversary(u, PartAction.classical(g, dz), name=label)
    if g.size != ny * dz:
        raise ValueError("g must act on Y values or on (Y, Z) basis values")
    perm = np.zeros((ny * dz, ny * dz))
    perm[g, np.arange(ny * dz)] = 1.0
    if not np.allclose(perm.sum(axis=1), 1):
        # non-injective: keep the input z in an ancilla held in W2
        return SplitAdversary(u, _function_action(g, ny, dz), _shared_pure(1, dz), name=label)
    return SplitAdversary(u, PartAction.from_unitary(perm, ny, dz), name=label)


def _function_action(g: np.ndarray, ny: int, dz: int) -> PartAction:
    """Instrument for a classical map on (Y, Z) with a dz-level ancilla A in W2.

    For input y the branch writing y' applies sum |z' xor a, z><z, a| over
    the z with g(y, z) = (y', z') and all a; A starts in |0>.  Keeping z in
    A makes each input's branches an isometry in total.
    """
    ops: list[np.ndarray] = []
    index: dict[bytes, int] = {}
    rows = []
    for y in range(ny):
        by_out: dict[int, np.ndarray] = {}
        for z in range(dz):
            yp, zp = divmod(int(g[y * dz + z]), dz)
            k = by_out.setdefault(yp, np.zeros((dz * dz, dz * dz), dtype=complex))
            for a in range(dz):
                k[(zp ^ a) * dz + z, z * dz + a] = 1.0
        row = []
        for yp, k in sorted(by_out.items()):
            key = k.tobytes()
            if key not in index:
                index[key] = len(ops)
                ops.append(k)
            row.append((yp, index[key]))
        rows.append(row)
    width = max(len(r) for r in rows)
    out = np.zeros((ny, width), dtype=np.int64)
    op = -np.ones((ny, width), dtype=np.int64)
    for y, row in enumerate(rows):
        for j, (yp, k) in enumerate(row):
            out[y, j], op[y, j] = yp, k
    return PartAction(out, op, tuple(ops), dz * dz)


def _threshold_zoo(name: str, opts: dict, prm: NmssParams) -> ThresholdAdversary:
    parties = tuple(opts.get("parties", range(1, prm.t + 1)))
    d = prm.shamir.share_dim
    if name == "identity":
        return ThresholdAdversary(parties, name="identity")
    if name == "pauli":
        party = int(opts.get("seed", opts.get("party", parties[0])))
        from .secret_sharing import weyl_operator

        u = weyl_operator(prm.q, [1] * prm.shamir_qudits, [0] * prm.shamir_qudits)
        return ThresholdAdversary(parties, {party: u}, name=f"pauli:{party}")
    if name == "slot-swap":
        party = int(opts.get("seed", opts.get("party", parties[0])))
        slots = [j for j in range(1, prm.p + 1) if j != party]
        perm = {slots[0]: slots[1], slots[1]: slots[0]}
        return ThresholdAdversary(parties, slot_perms={party: perm}, name=f"slot-swap:{party}")
    if name == "haar_random":
        rng = np.random.default_rng(int(opts.get("seed", 0)))
        us = {i: random_unitary(d, rng) for i in parties}
        return ThresholdAdversary(parties, us, name=f"haar_random:{opts.get('seed', 0)}")
    if name == "custom":
        us = {int(k): np.asarray(v) for k, v in opts.get("unitaries", {}).items()}
        perms = {int(k): {int(a): int(b) for a, b in v.items()} for k, v in opts.get("slot_perms", {}).items()}
        return ThresholdAdversary(parties, us, perms, name="custom")
    raise ValueError(f"unknown threshold adversary {name!r}")


__all__ = [
    "PartAction",
    "SplitAdversary",
    "ThresholdAdversary",
    "LeakageAdversary",
    "ExperimentResult",
    "Simulator",
    "StageReport",
    "LeakageReport",
    "nmc_branches",
    "run_nmc_experiment",
    "build_simulator",
    "nm_check",
    "stage_comparison",
    "rejection_condition",
    "canonical_message",
    "nmss_branches",
    "cross_reconstruction_law",
    "run_nmss_experiment",
    "run_leakage_experiment",
    "adversary_zoo",
]
