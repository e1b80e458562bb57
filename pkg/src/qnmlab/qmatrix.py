"""Dense operator algebra over labelled tensor-product registers.

Distances use the un-halved trace norm ``||rho - sigma||_1``.  Matrix
functions go through Hermitian eigendecompositions with eigenvalues
clamped at zero.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

HERM_TOL = 1e-10
TRACE_TOL = 1e-10
PSD_TOL = 1e-10
PURE_TOL = 1e-12
CPTP_TOL = 1e-10


@dataclass(frozen=True)
class RegisterLayout:
    """Ordered (label, dimension) pairs; row-major tensor ordering."""

    registers: tuple[tuple[str, int], ...]

    def __post_init__(self):
        regs = tuple((str(lab), int(d)) for lab, d in self.registers)
        object.__setattr__(self, "registers", regs)
        labels = [lab for lab, _ in regs]
        if len(set(labels)) != len(labels):
            raise ValueError(f"duplicate register labels in {labels}")
        if any(d < 1 for _, d in regs):
            raise ValueError("register dimensions must be positive")

    @classmethod
    def of(cls, *pairs: tuple[str, int]) -> "RegisterLayout":
        return cls(tuple(pairs))

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(lab for lab, _ in self.registers)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(d for _, d in self.registers)

    @property
    def total(self) -> int:
        return int(np.prod(self.dims, dtype=np.int64)) if self.registers else 1

    def dim(self, label: str) -> int:
        return self.dims[self.index(label)]

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise KeyError(f"unknown register label {label!r}") from None

    def concat(self, other: "RegisterLayout") -> "RegisterLayout":
        return RegisterLayout(self.registers + other.registers)

    def select(self, labels: Iterable[str]) -> "RegisterLayout":
        return RegisterLayout(tuple((lab, self.dim(lab)) for lab in labels))

    def without(self, labels: Iterable[str]) -> "RegisterLayout":
        drop = set(labels)
        return RegisterLayout(tuple(r for r in self.registers if r[0] not in drop))

    def relabel(self, mapping: dict[str, str]) -> "RegisterLayout":
        return RegisterLayout(tuple((mapping.get(lab, lab), d) for lab, d in self.registers))

    def to_json(self) -> list:
        return [[lab, d] for lab, d in self.registers]


# ---------------------------------------------------------------------------
# raw tensor helpers


def apply_left(mat: np.ndarray, dims: Sequence[int], op: np.ndarray, targets: Sequence[int],
               out_dims: Sequence[int] | None = None) -> tuple[np.ndarray, list[int]]:
    """Left-multiply ``op`` on the row index registers ``targets``.

    ``mat`` has shape (prod(dims), K).  ``op`` maps the targets (in the
    given order) to registers of ``out_dims`` (defaults to the target dims),
    which take the position of the first target.  Returns the new matrix
    and row dims.
    """
    dims = [int(d) for d in dims]
    targets = [int(t) for t in targets]
    in_dims = [dims[t] for t in targets]
    out_dims = list(in_dims if out_dims is None else out_dims)
    din, dout = int(np.prod(in_dims)), int(np.prod(out_dims))
    if op.shape != (dout, din):
        raise ValueError(f"operator shape {op.shape} does not match ({dout}, {din})")
    mat = np.asarray(mat)
    k = mat.shape[1]
    rest = [i for i in range(len(dims)) if i not in targets]
    t = mat.reshape(dims + [k]).transpose(targets + rest + [len(dims)])
    t = (op @ t.reshape(din, -1)).reshape(out_dims + [dims[i] for i in rest] + [k])
    # place outputs where the first target was
    pos = sum(1 for i in rest if i < min(targets))
    n_out = len(out_dims)
    order = list(range(n_out, n_out + pos)) + list(range(n_out)) + list(
        range(n_out + pos, n_out + len(rest))) + [n_out + len(rest)]
    t = t.transpose(order)
    new_dims = [dims[i] for i in rest[:pos]] + out_dims + [dims[i] for i in rest[pos:]]
    return t.reshape(int(np.prod(new_dims)), k), new_dims


def conjugate_local(rho: np.ndarray, dims: Sequence[int], op: np.ndarray, targets: Sequence[int],
                    out_dims: Sequence[int] | None = None) -> tuple[np.ndarray, list[int]]:
    """Return ``op rho op^dagger`` with ``op`` acting on ``targets``."""
    a, new_dims = apply_left(rho, dims, op, targets, out_dims)
    b, _ = apply_left(a.conj().T, dims, op, targets, out_dims)
    return b.conj().T, new_dims


def ptrace(rho: np.ndarray, dims: Sequence[int], keep: Sequence[int]) -> np.ndarray:
    """Partial trace keeping register indices ``keep`` (in the given order)."""
    dims = [int(d) for d in dims]
    keep = [int(i) for i in keep]
    drop = [i for i in range(len(dims)) if i not in keep]
    dk = int(np.prod([dims[i] for i in keep]))
    dd = int(np.prod([dims[i] for i in drop]))
    n = len(dims)
    t = rho.reshape(dims + dims)
    t = t.transpose(keep + drop + [n + i for i in keep] + [n + i for i in drop])
    t = t.reshape(dk, dd, dk, dd)
    return np.einsum("iaja->ij", t)


def ptrace_vector(vec: np.ndarray, dims: Sequence[int], keep: Sequence[int]) -> np.ndarray:
    """Reduced density matrix of a pure vector without forming the outer product."""
    dims = [int(d) for d in dims]
    keep = [int(i) for i in keep]
    drop = [i for i in range(len(dims)) if i not in keep]
    dk = int(np.prod([dims[i] for i in keep]))
    m = np.asarray(vec).reshape(dims).transpose(keep + drop).reshape(dk, -1)
    return m @ m.conj().T


def permute_registers(mat: np.ndarray, dims: Sequence[int], order: Sequence[int]) -> np.ndarray:
    """Reorder the registers of a square operator."""
    dims = [int(d) for d in dims]
    n = len(dims)
    order = list(order)
    d = int(np.prod(dims))
    t = mat.reshape(dims + dims).transpose(order + [n + i for i in order])
    return t.reshape(d, d)


def permute_vector(vec: np.ndarray, dims: Sequence[int], order: Sequence[int]) -> np.ndarray:
    dims = [int(d) for d in dims]
    return np.asarray(vec).reshape(dims).transpose(list(order)).reshape(-1)


def herm(m: np.ndarray) -> np.ndarray:
    return (m + m.conj().T) / 2


def psd_sqrt(m: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(herm(m))
    w = np.clip(w, 0.0, None)
    return (v * np.sqrt(w)) @ v.conj().T


def psd_inv_sqrt(m: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """Inverse square root on the support, zero on the kernel."""
    w, v = np.linalg.eigh(herm(m))
    inv = np.zeros_like(w)
    mask = w > tol
    inv[mask] = 1.0 / np.sqrt(w[mask])
    return (v * inv) @ v.conj().T


def trace_norm(m: np.ndarray) -> float:
    """Schatten-1 norm; Hermitian inputs use eigenvalues."""
    if np.allclose(m, m.conj().T, atol=1e-13):
        return float(np.sum(np.abs(np.linalg.eigvalsh(herm(m)))))
    return float(np.sum(np.linalg.svd(m, compute_uv=False)))


def is_unitary(u: np.ndarray, tol: float = 1e-10) -> bool:
    u = np.asarray(u)
    return u.shape[0] == u.shape[1] and np.allclose(u.conj().T @ u, np.eye(u.shape[0]), atol=tol)


# ---------------------------------------------------------------------------
# states


@dataclass(frozen=True, eq=False)
class DensityOperator:
    """Density matrix over a register layout."""

    matrix: np.ndarray
    layout: RegisterLayout

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        d = self.layout.total
        if m.shape != (d, d):
            raise ValueError(f"matrix shape {m.shape} does not match layout dimension {d}")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @classmethod
    def from_matrix(cls, m: np.ndarray, *pairs: tuple[str, int]) -> "DensityOperator":
        return cls(np.asarray(m, dtype=complex), RegisterLayout(tuple(pairs)))

    @property
    def dims(self) -> tuple[int, ...]:
        return self.layout.dims

    @property
    def labels(self) -> tuple[str, ...]:
        return self.layout.labels

    def validate(self, tol: float = HERM_TOL) -> "DensityOperator":
        m = self.matrix
        if not np.allclose(m, m.conj().T, atol=tol):
            raise ValueError("density operator is not Hermitian")
        if abs(np.trace(m).real - 1) > TRACE_TOL or abs(np.trace(m).imag) > TRACE_TOL:
            raise ValueError(f"density operator trace {np.trace(m)} != 1")
        if np.linalg.eigvalsh(herm(m)).min() < -PSD_TOL:
            raise ValueError("density operator has negative eigenvalues")
        return self

    def is_valid(self) -> bool:
        try:
            self.validate()
        except ValueError:
            return False
        return True

    def symmetrized(self) -> "DensityOperator":
        return DensityOperator(herm(self.matrix), self.layout)

    def reorder(self, labels: Sequence[str]) -> "DensityOperator":
        labels = list(labels)
        if sorted(labels) != sorted(self.labels):
            raise ValueError(f"reorder labels {labels} do not match {self.labels}")
        order = [self.layout.index(lab) for lab in labels]
        return DensityOperator(permute_registers(self.matrix, self.dims, order), self.layout.select(labels))

    def relabel(self, mapping: dict[str, str]) -> "DensityOperator":
        return DensityOperator(self.matrix, self.layout.relabel(mapping))

    def marginal(self, labels: Sequence[str]) -> "DensityOperator":
        """Reduced state on ``labels`` in the given order."""
        keep = [self.layout.index(lab) for lab in labels]
        return DensityOperator(ptrace(self.matrix, self.dims, keep), self.layout.select(labels))

    def conjugate(self, op: np.ndarray, labels: Sequence[str]) -> "DensityOperator":
        """``op rho op^dagger`` with ``op`` acting on ``labels`` (dimension preserving)."""
        idx = [self.layout.index(lab) for lab in labels]
        if idx == list(range(idx[0], idx[0] + len(idx))):
            m, _ = conjugate_local(self.matrix, self.dims, op, idx)
            return DensityOperator(m, self.layout)
        order = idx + [i for i in range(len(self.dims)) if i not in idx]
        moved = permute_registers(self.matrix, self.dims, order)
        dims = [self.dims[i] for i in order]
        m, _ = conjugate_local(moved, dims, op, list(range(len(idx))))
        return DensityOperator(permute_registers(m, dims, list(np.argsort(order))), self.layout)

    def to_json(self) -> dict:
        return {"layout": self.layout.to_json(), "matrix": matrix_to_json(self.matrix)}

    @classmethod
    def from_json(cls, obj: dict) -> "DensityOperator":
        layout = RegisterLayout(tuple((lab, d) for lab, d in obj["layout"]))
        return cls(matrix_from_json(obj["matrix"]), layout)


@dataclass(frozen=True, eq=False)
class PureState:
    """Unit vector over a register layout."""

    vector: np.ndarray
    layout: RegisterLayout

    def __post_init__(self):
        v = np.asarray(self.vector, dtype=complex).reshape(-1)
        if v.shape[0] != self.layout.total:
            raise ValueError("vector length does not match layout")
        if abs(np.vdot(v, v).real - 1) > PURE_TOL * max(1, v.shape[0]):
            raise ValueError("pure state is not normalised")
        v.setflags(write=False)
        object.__setattr__(self, "vector", v)

    @property
    def dims(self) -> tuple[int, ...]:
        return self.layout.dims

    @property
    def labels(self) -> tuple[str, ...]:
        return self.layout.labels

    def density(self) -> DensityOperator:
        v = self.vector
        return DensityOperator(np.outer(v, v.conj()), self.layout)

    def marginal(self, labels: Sequence[str]) -> DensityOperator:
        keep = [self.layout.index(lab) for lab in labels]
        return DensityOperator(ptrace_vector(self.vector, self.dims, keep), self.layout.select(labels))

    def reorder(self, labels: Sequence[str]) -> "PureState":
        order = [self.layout.index(lab) for lab in labels]
        return PureState(permute_vector(self.vector, self.dims, order), self.layout.select(labels))

    def relabel(self, mapping: dict[str, str]) -> "PureState":
        return PureState(self.vector, self.layout.relabel(mapping))


@dataclass(frozen=True, eq=False)
class Channel:
    """CPTP map given by Kraus operators (output dim x input dim)."""

    kraus_operators: tuple[np.ndarray, ...]
    in_layout: RegisterLayout
    out_layout: RegisterLayout

    def __post_init__(self):
        ks = tuple(np.asarray(k, dtype=complex) for k in self.kraus_operators)
        if not ks:
            raise ValueError("channel needs at least one Kraus operator")
        for k in ks:
            if k.shape != (self.out_layout.total, self.in_layout.total):
                raise ValueError(f"Kraus shape {k.shape} does not match layouts")
        s = sum(k.conj().T @ k for k in ks)
        if not np.allclose(s, np.eye(self.in_layout.total), atol=CPTP_TOL):
            raise ValueError("Kraus operators are not trace preserving")
        object.__setattr__(self, "kraus_operators", ks)

    @classmethod
    def unitary(cls, u: np.ndarray, layout: RegisterLayout) -> "Channel":
        return cls((u,), layout, layout)

    @property
    def env_dim(self) -> int:
        return len(self.kraus_operators)


# ---------------------------------------------------------------------------
# constructors


def basis_state(layout: RegisterLayout, index: Sequence[int] | int) -> PureState:
    if isinstance(index, (int, np.integer)):
        flat = int(index)
    else:
        flat = int(np.ravel_multi_index(tuple(index), layout.dims))
    v = np.zeros(layout.total, dtype=complex)
    v[flat] = 1.0
    return PureState(v, layout)


def maximally_mixed(layout: RegisterLayout) -> DensityOperator:
    d = layout.total
    return DensityOperator(np.eye(d, dtype=complex) / d, layout)


def maximally_entangled(label_a: str, label_b: str, d: int) -> PureState:
    v = np.eye(d, dtype=complex).reshape(-1) / np.sqrt(d)
    return PureState(v, RegisterLayout.of((label_a, d), (label_b, d)))


def random_pure(layout: RegisterLayout, rng: np.random.Generator) -> PureState:
    v = rng.normal(size=layout.total) + 1j * rng.normal(size=layout.total)
    return PureState(v / np.linalg.norm(v), layout)


def random_density(layout: RegisterLayout, rng: np.random.Generator, rank: int | None = None) -> DensityOperator:
    d = layout.total
    k = d if rank is None else rank
    g = rng.normal(size=(d, k)) + 1j * rng.normal(size=(d, k))
    m = g @ g.conj().T
    return DensityOperator(m / np.trace(m).real, layout)


def random_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random unitary via QR with phase correction."""
    z = (rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    ph = np.diagonal(r) / np.abs(np.diagonal(r))
    return q * ph


# ---------------------------------------------------------------------------
# operations


def tensor(a: DensityOperator, b: DensityOperator) -> DensityOperator:
    """Kronecker product; layouts concatenate."""
    return DensityOperator(np.kron(a.matrix, b.matrix), a.layout.concat(b.layout))


def tensor_pure(a: PureState, b: PureState) -> PureState:
    return PureState(np.kron(a.vector, b.vector), a.layout.concat(b.layout))


def partial_trace(rho: DensityOperator, traced: Iterable[str]) -> DensityOperator:
    """Trace out the registers in ``traced``."""
    traced = set(traced)
    for lab in traced:
        rho.layout.index(lab)
    keep = [lab for lab in rho.labels if lab not in traced]
    return rho.marginal(keep)


def _same_layout(a: DensityOperator, b: DensityOperator) -> None:
    if a.layout != b.layout:
        raise ValueError(f"layout mismatch: {a.layout.registers} vs {b.layout.registers}")


def trace_distance(rho: DensityOperator, sigma: DensityOperator) -> float:
    """Un-halved trace norm ``||rho - sigma||_1``."""
    _same_layout(rho, sigma)
    return trace_norm(rho.matrix - sigma.matrix)


def fidelity(rho: DensityOperator, sigma: DensityOperator) -> float:
    """``||sqrt(rho) sqrt(sigma)||_1`` (not squared)."""
    _same_layout(rho, sigma)
    s = np.linalg.svd(psd_sqrt(rho.matrix) @ psd_sqrt(sigma.matrix), compute_uv=False)
    return float(min(1.0, s.sum()))


def bures_distance(rho: DensityOperator, sigma: DensityOperator) -> float:
    return float(np.sqrt(max(0.0, 1.0 - fidelity(rho, sigma))))


def canonical_purification(rho: DensityOperator, new_label: str) -> PureState:
    """``(rho^{1/2} (x) I) sum_i |i>|i>`` with the copy register appended."""
    d = rho.layout.total
    if new_label in rho.labels:
        raise ValueError(f"label {new_label!r} already in layout")
    v = psd_sqrt(rho.matrix).reshape(-1)
    return PureState(v, rho.layout.concat(RegisterLayout.of((new_label, d))))


def dmax(rho: DensityOperator | np.ndarray, sigma: DensityOperator | np.ndarray, tol: float = 1e-12) -> float:
    """Max-divergence in bits; ``inf`` when supp(rho) is not inside supp(sigma)."""
    if isinstance(rho, DensityOperator) and isinstance(sigma, DensityOperator):
        _same_layout(rho, sigma)
    r = rho.matrix if isinstance(rho, DensityOperator) else np.asarray(rho)
    s = sigma.matrix if isinstance(sigma, DensityOperator) else np.asarray(sigma)
    w, v = np.linalg.eigh(herm(s))
    scale = max(1.0, float(np.abs(w).max()))
    supp = w > tol * scale
    ker = v[:, ~supp]
    if ker.shape[1] and np.abs(ker.conj().T @ r @ ker).max() > 1e-10:
        return float("inf")
    vs = v[:, supp]
    inv = vs / np.sqrt(w[supp])
    lam = np.linalg.eigvalsh(herm(inv.conj().T @ r @ inv)).max()
    if lam <= 0:
        return float("-inf")
    return float(np.log2(lam))


@dataclass(frozen=True)
class MinEntropy:
    """Bracket ``lower <= H_min <= upper``; exact when the two coincide."""

    lower: float
    upper: float
    iterations: int = 0

    @property
    def exact(self) -> bool:
        return self.lower == self.upper

    @property
    def value(self) -> float:
        return 0.5 * (self.lower + self.upper)

    def __float__(self) -> float:
        return self.value


def _classical_blocks(rho: DensityOperator, x_labels: Sequence[str], e_labels: Sequence[str]) -> np.ndarray:
    """Blocks ``<x| rho |x>`` on E, shape (|X|, dE, dE); checks X is classical."""
    order = list(x_labels) + list(e_labels)
    r = rho.marginal(order)
    dx = int(np.prod([rho.layout.dim(lab) for lab in x_labels]))
    de = r.layout.total // dx
    t = r.matrix.reshape(dx, de, dx, de)
    blocks = np.einsum("xaxb->xab", t)
    off = t.copy()
    off[np.arange(dx), :, np.arange(dx), :] = 0
    if np.abs(off).max(initial=0.0) > 1e-10:
        raise ValueError("register is not classical in this state")
    return blocks


def hmin(rho: DensityOperator, x_labels: Sequence[str] | str, e_labels: Sequence[str] | None = None,
         tol: float = 1e-6, max_iter: int = 20000) -> MinEntropy:
    """Conditional min-entropy H_min(X|E) for classical X.

    Classical E uses the closed form ``-log2 sum_e max_x p(x,e)``.
    Quantum E runs an iterative guessing-measurement ascent from the
    pretty-good measurement and brackets the value with a feasible
    dual operator.
    """
    x_labels = [x_labels] if isinstance(x_labels, str) else list(x_labels)
    if e_labels is None:
        e_labels = [lab for lab in rho.labels if lab not in x_labels]
    blocks = _classical_blocks(rho, x_labels, e_labels)
    dx, de = blocks.shape[0], blocks.shape[1]
    off_diag = blocks.copy()
    off_diag[:, np.arange(de), np.arange(de)] = 0
    if np.abs(off_diag).max(initial=0.0) < 1e-13:
        p = np.real(np.einsum("xaa->xa", blocks))
        h = float(-np.log2(p.max(axis=0).sum()))
        return MinEntropy(h, h)
    return _hmin_quantum(blocks, tol, max_iter)


def _hmin_quantum(blocks: np.ndarray, tol: float, max_iter: int) -> MinEntropy:
    blocks = np.array([herm(b) for b in blocks])
    total = blocks.sum(axis=0)
    de = total.shape[0]
    s_inv = psd_inv_sqrt(total)
    povm = np.array([s_inv @ b @ s_inv for b in blocks])
    best_lo, best_hi = -np.inf, np.inf
    it = 0
    for it in range(1, max_iter + 1):
        p_guess = float(np.real(np.einsum("xab,xba->", povm, blocks)))
        rsum = herm(np.einsum("xab,xbc->ac", blocks, povm))
        mu = max(float(np.linalg.eigvalsh(b - rsum).max()) for b in blocks)
        dual = float(np.trace(rsum).real) + max(mu, 0.0) * de
        best_hi = min(best_hi, -np.log2(max(p_guess, 1e-300)))
        best_lo = max(best_lo, -np.log2(dual))
        if best_hi - best_lo < tol:
            break
        g = np.einsum("xab,xbc,xcd->ad", blocks, povm, blocks)
        g_inv = psd_inv_sqrt(g)
        povm = np.array([g_inv @ b @ e @ b @ g_inv for b, e in zip(blocks, povm)])
        # complete to a POVM on the kernel of g
        proj = g_inv @ g @ g_inv
        povm[0] = povm[0] + (np.eye(de) - herm(proj))
    return MinEntropy(float(best_lo), float(best_hi), it)


def imax_upper(rho: DensityOperator, a_labels: Sequence[str], b_labels: Sequence[str],
               trial_count: int = 16, seed: int = 0) -> float:
    """Upper bound on I_max(A:B) by minimising over a trial set of sigma_B.

    Trials: rho_B, the maximally mixed state, rho on every subset of B's
    registers tensored with maximally mixed on the rest, then seeded random
    convex mixtures of those until ``trial_count`` is reached.
    """
    a_labels, b_labels = list(a_labels), list(b_labels)
    r = rho.marginal(a_labels + b_labels)
    rho_a = r.marginal(a_labels).matrix
    base = []
    for k in range(len(b_labels), -1, -1):
        for subset in itertools.combinations(b_labels, k):
            rest = [lab for lab in b_labels if lab not in subset]
            kept = r.marginal(list(subset)).matrix if subset else np.ones((1, 1))
            dr = int(np.prod([r.layout.dim(lab) for lab in rest]))
            m = np.kron(kept, np.eye(dr) / dr)
            order = list(subset) + rest
            perm = [order.index(lab) for lab in b_labels]
            dims = [r.layout.dim(lab) for lab in order]
            base.append(permute_registers(m, dims, perm))
    trials = list(base)
    rng = np.random.default_rng(seed)
    while len(trials) < trial_count:
        w = rng.dirichlet(np.ones(len(base)))
        trials.append(sum(wi * bi for wi, bi in zip(w, base)))
    return min(dmax(r.matrix, np.kron(rho_a, s)) for s in trials)


def apply_channel(phi: Channel, rho: DensityOperator, targets: Sequence[str] | None = None) -> DensityOperator:
    """Apply ``phi`` to the registers ``targets`` (default: the whole state).

    Output registers take the place of the first target.
    """
    if targets is None:
        targets = list(rho.labels)
    targets = list(targets)
    if rho.layout.select(targets).dims != phi.in_layout.dims:
        raise ValueError("channel input layout does not match target registers")
    idx = [rho.layout.index(lab) for lab in targets]
    out_dims = list(phi.out_layout.dims)
    acc = None
    for k in phi.kraus_operators:
        m, _ = conjugate_local(rho.matrix, rho.dims, k, idx, out_dims)
        acc = m if acc is None else acc + m
    rest = [r for r in rho.layout.registers if r[0] not in targets]
    pos = sum(1 for lab, _ in rest if rho.layout.index(lab) < min(idx))
    layout = RegisterLayout(tuple(rest[:pos]) + phi.out_layout.registers + tuple(rest[pos:]))
    return DensityOperator(acc, layout)


def stinespring(phi: Channel) -> np.ndarray:
    """Isometry ``V = sum_k K_k (x) |k>`` with the environment register last."""
    ks = phi.kraus_operators
    r = len(ks)
    dout, din = ks[0].shape
    v = np.zeros((dout, r, din), dtype=complex)
    for k, kraus in enumerate(ks):
        v[:, k, :] = kraus
    return v.reshape(dout * r, din)


def uhlmann_isometry(pure_ab: PureState, pure_ac: PureState, a_labels: Sequence[str]) -> np.ndarray:
    """Map V from C to B maximising <AB| (I (x) V) |AC>.

    Built from the polar part of the overlap ``Psi^dagger Phi`` of the two
    coefficient matrices.  The ``dim B x dim C`` result is an isometry when
    dim B >= dim C and a partial isometry otherwise.
    """
    a_labels = list(a_labels)
    b_labels = [lab for lab in pure_ab.labels if lab not in a_labels]
    c_labels = [lab for lab in pure_ac.labels if lab not in a_labels]
    if pure_ab.layout.select(a_labels) != pure_ac.layout.select(a_labels):
        raise ValueError("A registers differ between the two purifications")
    da = pure_ab.layout.select(a_labels).total
    psi = pure_ab.reorder(a_labels + b_labels).vector.reshape(da, -1)
    phi = pure_ac.reorder(a_labels + c_labels).vector.reshape(da, -1)
    m = psi.conj().T @ phi
    u, _, wh = np.linalg.svd(m, full_matrices=False)
    return u.conj() @ wh.conj()


def apply_isometry_to(pure: PureState, v: np.ndarray, old_labels: Sequence[str],
                      new_layout: RegisterLayout) -> PureState:
    """Apply isometry ``v`` to ``old_labels``, which are replaced by ``new_layout`` at the end."""
    old_labels = list(old_labels)
    keep = [lab for lab in pure.labels if lab not in old_labels]
    st = pure.reorder(keep + old_labels)
    dk = st.layout.select(keep).total
    m = st.vector.reshape(dk, -1) @ v.T
    return PureState(m.reshape(-1), st.layout.select(keep).concat(new_layout))


def condition_on(rho: DensityOperator, label: str, event: Iterable[int]) -> tuple[float, DensityOperator]:
    """Probability of ``label in event`` and the normalised conditional state.

    The register must be classical.  The conditional state keeps the
    register (projected onto the event).
    """
    idx = rho.layout.index(label)
    d = rho.dims[idx]
    _classical_blocks(rho, [label], [lab for lab in rho.labels if lab != label])
    proj = np.zeros((d, d))
    for e in event:
        if not 0 <= int(e) < d:
            raise ValueError(f"event value {e} outside register alphabet")
        proj[int(e), int(e)] = 1.0
    m, _ = conjugate_local(rho.matrix, rho.dims, proj, [idx])
    p = float(np.trace(m).real)
    if p <= 1e-15:
        raise ValueError("conditioning on a zero-probability event")
    return p, DensityOperator(m / p, rho.layout)


def measure(rho: DensityOperator, label: str) -> DensityOperator:
    """Dephase ``label`` in the computational basis."""
    idx = rho.layout.index(label)
    d = rho.dims[idx]
    acc = np.zeros_like(rho.matrix)
    for i in range(d):
        proj = np.zeros((d, d))
        proj[i, i] = 1.0
        acc = acc + conjugate_local(rho.matrix, rho.dims, proj, [idx])[0]
    return DensityOperator(acc, rho.layout)


# ---------------------------------------------------------------------------
# serialisation


def matrix_to_json(m: np.ndarray) -> list:
    """Row-major nested list of [re, im] pairs."""
    m = np.asarray(m)
    return [[[float(z.real), float(z.imag)] for z in row] for row in m]


def matrix_from_json(rows: list) -> np.ndarray:
    return np.array([[complex(re, im) for re, im in row] for row in rows], dtype=complex)


def dumps_operator(m: np.ndarray) -> str:
    return json.dumps(matrix_to_json(m))


__all__ = [
    "RegisterLayout",
    "DensityOperator",
    "PureState",
    "Channel",
    "MinEntropy",
    "tensor",
    "tensor_pure",
    "partial_trace",
    "trace_distance",
    "fidelity",
    "bures_distance",
    "canonical_purification",
    "dmax",
    "hmin",
    "imax_upper",
    "apply_channel",
    "stinespring",
    "uhlmann_isometry",
    "condition_on",
    "measure",
    "basis_state",
    "maximally_mixed",
    "maximally_entangled",
    "random_pure",
    "random_density",
    "random_unitary",
    "trace_norm",
]
