"""Exhaustive checks of the Pauli and SC(H) twirl identities.

Every identity is evaluated by summing over the whole group on seeded
random states; residuals are Frobenius norms.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .pauli_clifford import (
    CliffordOp,
    PauliOp,
    epr_projector,
    epr_twirl_decomposition,
    pauli_dense,
    pauli_group,
    sc_enumerate,
    twirl_cross_term,
)
from .qmatrix import DensityOperator, RegisterLayout, conjugate_local, ptrace, random_density


@dataclass(frozen=True)
class CheckResult:
    name: str
    residual: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.residual < self.tolerance

    def to_json(self) -> dict:
        return {"check": self.name, "residual": self.residual, "tolerance": self.tolerance, "passed": self.passed}


def _rand_rho(d: int, rng: np.random.Generator) -> np.ndarray:
    return random_density(RegisterLayout.of(("A", d)), rng).matrix


def _canonical(rho: np.ndarray) -> np.ndarray:
    """Canonical purification on (A_hat, A) as a density matrix."""
    from .qmatrix import psd_sqrt

    d = rho.shape[0]
    v = (np.kron(np.eye(d), psd_sqrt(rho)) @ np.eye(d).reshape(-1))
    return np.outer(v, v.conj())


def algebra_suite(b: int = 1, seed: int = 0, tol: float = 1e-9) -> list[CheckResult]:
    """Run every identity at b qubits and return one result per check."""
    rng = np.random.default_rng(seed)
    d = 1 << b
    paulis = pauli_group(b)
    sc = sc_enumerate(b)
    pd = {p: pauli_dense(p) for p in paulis}
    ident = PauliOp.identity(b)
    out: list[CheckResult] = []

    def add(name: str, r: float) -> None:
        out.append(CheckResult(name, float(r), tol))

    rho = _rand_rho(d, rng)
    # Pauli twirl cross terms vanish for P != P'
    r = 0.0
    pauli_cl = [CliffordOp.from_pauli(q) for q in paulis]
    for p, pp in itertools.permutations(paulis, 2):
        r = max(r, np.linalg.norm(twirl_cross_term(p, pp, rho, group=pauli_cl)))
    add("pauli_twirl_cross_terms", r)

    r = 0.0
    herm_normal = _rand_rho(d, rng) - 0.3 * _rand_rho(d, rng)
    for p, pp in itertools.permutations(paulis, 2):
        r = max(r, np.linalg.norm(twirl_cross_term(p, pp, rho, group="sc")))
        r = max(r, np.linalg.norm(twirl_cross_term(p, pp, herm_normal, group="sc")))
    add("sc_twirl_cross_terms", r)

    pur = _canonical(rho)
    r = 0.0
    for p, pp in itertools.permutations(paulis, 2):
        r = max(r, np.linalg.norm(twirl_cross_term(p, pp, pur, group="sc", modified=True)))
    add("modified_twirl_cross_terms", r)

    r = 0.0
    for p in paulis:
        acc = sum(pd[q] @ pd[p] @ pd[q].conj().T for q in paulis) / len(paulis)
        want = np.eye(d) if p == ident else np.zeros((d, d))
        r = max(r, np.linalg.norm(acc - want))
    add("uniform_pauli_conjugation", r)

    r = 0.0
    dense_sc = [c.dense() for c in sc]
    for p in paulis:
        acc = sum(u @ pd[p] @ u.conj().T for u in dense_sc) / len(sc)
        want = np.eye(d) if p == ident else np.zeros((d, d))
        r = max(r, np.linalg.norm(acc - want))
    add("uniform_sc_conjugation", r)

    rho_ab = random_density(RegisterLayout.of(("A", d), ("B", 3)), rng).matrix
    rho_b = ptrace(rho_ab, [d, 3], [1])
    want = np.kron(np.eye(d) / d, rho_b)
    acc = sum(conjugate_local(rho_ab, [d, 3], pd[q], [0])[0] for q in paulis) / len(paulis)
    add("pauli_one_design", np.linalg.norm(acc - want))
    acc = sum(conjugate_local(rho_ab, [d, 3], u, [0])[0] for u in dense_sc) / len(sc)
    add("sc_one_design", np.linalg.norm(acc - want))

    # C^T (x) C^dagger twirl of (I (x) P) psi (I (x) Q^dagger), psi on (A, A_hat) maximally entangled
    psi = epr_projector(b)
    uu = np.eye(d * d) / (d * d)
    r_off, r_id, r_same, r_bound = 0.0, 0.0, 0.0, 0.0
    for p, q in itertools.product(paulis, repeat=2):
        tau = np.kron(np.eye(d), pd[p]) @ psi @ np.kron(np.eye(d), pd[q].conj().T)
        acc = np.zeros_like(tau)
        for u in dense_sc:
            k = np.kron(u.T, u.conj().T)
            acc += k @ tau @ k.conj().T
        acc /= len(sc)
        if p != q:
            r_off = max(r_off, np.linalg.norm(acc))
        elif p == ident:
            r_id = max(r_id, np.linalg.norm(acc - psi))
        else:
            closed = (d * d * uu - psi) / (d * d - 1)
            r_same = max(r_same, np.linalg.norm(acc - closed))
            dist = float(np.abs(np.linalg.eigvalsh(acc - uu)).sum())
            r_bound = max(r_bound, max(0.0, dist - 2.0 / (d * d)))
    add("transpose_twirl_off_diagonal", r_off)
    add("transpose_twirl_identity", r_id)
    add("transpose_twirl_same_closed_form", r_same)
    add("transpose_twirl_same_bound_excess", r_bound)

    r_closed, r_excess = 0.0, 0.0
    for _ in range(3):
        st = random_density(RegisterLayout.of(("Ah", d), ("A", d)), rng)
        rep = epr_twirl_decomposition(st)
        r_closed = max(r_closed, rep.closed_form_residual)
        r_excess = max(r_excess, max(0.0, rep.approx_distance - 2.0 / (d * d)))
    add("epr_twirl_closed_form", r_closed)
    add("epr_twirl_bound_excess", r_excess)

    # group facts
    add("sc_order", abs(len(sc) - (2 ** (5 * b) - 2 ** (3 * b))))
    counts = []
    non_id = [p for p in paulis if p != ident]
    for p in non_id:
        for q in non_id:
            cnt = sum(1 for c in sc if c.conjugate_dagger(p).same_up_to_phase(q))
            counts.append(cnt)
    want = len(sc) / (len(paulis) - 1)
    add("sc_orbit_uniformity", max(abs(c - want) for c in counts))
    return out


def orbit_counts(b: int = 1) -> dict[tuple[str, str], int]:
    """|{C : C^dagger P C = Q up to sign}| for every pair of non-identity Paulis."""
    paulis = [p for p in pauli_group(b) if not p.is_identity()]
    sc = sc_enumerate(b)
    return {(p.to_text(), q.to_text()): sum(1 for c in sc if c.conjugate_dagger(p).same_up_to_phase(q))
            for p in paulis for q in paulis}


__all__ = ["CheckResult", "algebra_suite", "orbit_counts"]
