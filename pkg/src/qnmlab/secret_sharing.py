"""Threshold secret sharing: quantum Shamir over prime qudits, classical
Shamir, and inner-product leakage-resilient sharing (2-of-2 and 2-of-p).

Quantum Shamir encodes each message qudit with the polynomial code

    |s> -> q^{-(t-1)/2} sum_a |f(alpha_1), ..., f(alpha_P)>,
    f(x) = s x^{t-1} + a_{t-2} x^{t-2} + ... + a_0,

on P = 2t - 1 base points alpha_i = i mod q.  Putting the secret in the
leading coefficient lets alpha = 0 be a valid point, so q = 2t - 1 works
(e.g. the 3-qutrit code at t = 2).  Sharing among p < 2t - 1 parties
discards the last 2t - 1 - p base shares.

Reconstruction from t shares applies the permutation unitary
(values on T) -> (s, values on the complementary base points); the
complementary values are maximally entangled with the absent shares and
get traced out.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .extractors import FieldVector, ip_extract, ip_preimage_count, ip_preimage_enumerate, ip_preimage_sample
from .nmc import InvalidParams
from .qmatrix import DensityOperator, RegisterLayout, herm

log = logging.getLogger(__name__)


def is_prime(n: int) -> bool:
    if n < 2:
        return False
    return all(n % d for d in range(2, math.isqrt(n) + 1))


def _inverse_mod(a: np.ndarray, q: int) -> np.ndarray:
    """Inverse of a square matrix over the prime field F_q (Gauss-Jordan)."""
    n = a.shape[0]
    aug = np.concatenate([np.asarray(a, dtype=np.int64) % q, np.eye(n, dtype=np.int64)], axis=1)
    for col in range(n):
        piv = next((r for r in range(col, n) if aug[r, col] % q), None)
        if piv is None:
            raise ValueError("matrix is singular mod q")
        aug[[col, piv]] = aug[[piv, col]]
        aug[col] = aug[col] * pow(int(aug[col, col]), -1, q) % q
        for r in range(n):
            if r != col and aug[r, col]:
                aug[r] = (aug[r] - aug[r, col] * aug[col]) % q
    return aug[:, n:]


# ---------------------------------------------------------------------------
# quantum Shamir


@dataclass(frozen=True)
class QShamirParams:
    """t-out-of-p sharing of b qudits of prime dimension q."""

    t: int
    p: int
    q: int
    b: int = 1

    def __post_init__(self):
        if self.t < 1 or self.b < 1:
            raise InvalidParams("t and b must be positive")
        if not self.t <= self.p <= 2 * self.t - 1:
            raise InvalidParams(f"need t <= p <= 2t - 1 (no-cloning), got t={self.t}, p={self.p}")
        if not is_prime(self.q):
            raise InvalidParams(f"share dimension q={self.q} is not prime")
        if self.q < 2 * self.t - 1:
            raise InvalidParams(f"q={self.q} gives fewer than 2t - 1 = {2 * self.t - 1} distinct evaluation points")

    @property
    def base_parties(self) -> int:
        return 2 * self.t - 1

    @property
    def points(self) -> tuple[int, ...]:
        """Evaluation points of the base code, alpha_i = i mod q."""
        return tuple(i % self.q for i in range(1, self.base_parties + 1))

    @property
    def share_dim(self) -> int:
        return self.q**self.b

    @property
    def message_dim(self) -> int:
        return self.q**self.b

    def labels(self) -> tuple[str, ...]:
        return tuple(f"S_{i}" for i in range(1, self.p + 1))

    def to_json(self) -> dict:
        return {"t": self.t, "p": self.p, "q": self.q, "b": self.b}


def weyl_operator(q: int, a: Sequence[int] | int, c: Sequence[int] | int) -> np.ndarray:
    """Generalised Pauli X^a Z^c on len(a) qudits of dimension q."""
    a = [a] if isinstance(a, (int, np.integer)) else list(a)
    c = [c] if isinstance(c, (int, np.integer)) else list(c)
    omega = np.exp(2j * np.pi / q)
    shift = np.roll(np.eye(q), 1, axis=0)
    clock = np.diag(omega ** np.arange(q))
    out = np.ones((1, 1), dtype=complex)
    for ai, ci in zip(a, c):
        out = np.kron(out, np.linalg.matrix_power(shift, ai % q) @ np.linalg.matrix_power(clock, ci % q))
    return out


def _digits(idx: np.ndarray, base: int, count: int) -> np.ndarray:
    """Base-``base`` digits of ``idx``, most significant first; shape (..., count)."""
    out = np.empty(idx.shape + (count,), dtype=np.int64)
    v = idx.copy()
    for pos in range(count - 1, -1, -1):
        out[..., pos] = v % base
        v //= base
    return out


def _undigits(d: np.ndarray, base: int) -> np.ndarray:
    v = np.zeros(d.shape[:-1], dtype=np.int64)
    for pos in range(d.shape[-1]):
        v = v * base + d[..., pos]
    return v


def encoding_isometry(prm: QShamirParams) -> np.ndarray:
    """Dense isometry from the message to all 2t - 1 base shares.

    Share register i holds b digits, one per message qudit (most
    significant first).  Shape (q^(b(2t-1)), q^b).
    """
    q, t, b, P = prm.q, prm.t, prm.b, prm.base_parties
    alphas = np.array(prm.points, dtype=np.int64)
    powers = np.array([[pow(int(al), e, q) for e in range(t)] for al in alphas], dtype=np.int64)  # (P, t)
    n_rand = q ** (t - 1)
    # per layer: values on all points for every (s, a)
    s_vals = np.arange(q)
    a_vals = _digits(np.arange(n_rand), q, t - 1) if t > 1 else np.zeros((1, 0), dtype=np.int64)
    coeffs = np.concatenate(
        [np.broadcast_to(a_vals[None, :, ::-1], (q, n_rand, t - 1)),
         np.broadcast_to(s_vals[:, None, None], (q, n_rand, 1))], axis=2)  # coefficient of x^e at index e
    vals = np.einsum("sae,pe->sap", coeffs, powers) % q  # (q, n_rand, P)
    dim_in = q**b
    v = np.zeros((q ** (b * P), dim_in), dtype=complex)
    amp = 1.0 / np.sqrt(n_rand) ** b
    msg_digits = _digits(np.arange(dim_in), q, b)
    for col in range(dim_in):
        sd = msg_digits[col]
        # all combinations of randomness across layers
        per_layer = [vals[sd[layer]] for layer in range(b)]  # each (n_rand, P)
        for combo in itertools.product(range(n_rand), repeat=b):
            share_digits = np.stack([per_layer[layer][combo[layer]] for layer in range(b)], axis=1)  # (P, b)
            row = int(_undigits(share_digits.reshape(-1)[None, :], q)[0])
            v[row, col] += amp
    return v


_ENC_CACHE: dict = {}


def _encoding(prm: QShamirParams) -> np.ndarray:
    key = (prm.t, prm.q, prm.b)
    if key not in _ENC_CACHE:
        _ENC_CACHE[key] = encoding_isometry(prm)
    return _ENC_CACHE[key]


def reconstruction_permutation(prm: QShamirParams, subset: Sequence[int]) -> np.ndarray:
    """Permutation of the t share registers in ``subset`` (1-based base indices).

    Maps the basis state of share values to (s, f at the complementary base
    points); returned as ``perm[in_index] = out_index`` over q^(bt) states.
    """
    q, t, b, P = prm.q, prm.t, prm.b, prm.base_parties
    subset = list(subset)
    if len(subset) != t or len(set(subset)) != t:
        raise InvalidParams(f"reconstruction needs exactly t={t} distinct shares")
    comp = [i for i in range(1, P + 1) if i not in subset]
    alphas = prm.points
    vand = np.array([[pow(alphas[i - 1], e, q) for e in range(t)] for i in subset], dtype=np.int64)
    inv = _inverse_mod(vand, q)
    comp_pows = np.array([[pow(alphas[i - 1], e, q) for e in range(t)] for i in comp], dtype=np.int64).reshape(
        len(comp), t)
    n = q ** (b * t)
    dig = _digits(np.arange(n), q, b * t).reshape(n, t, b)  # register, layer
    out = np.empty_like(dig)
    for layer in range(b):
        coeffs = (dig[:, :, layer] @ inv.T) % q  # (n, t): coefficient of x^e
        out[:, 0, layer] = coeffs[:, t - 1]
        if comp:
            out[:, 1:, layer] = (coeffs @ comp_pows.T) % q
    return _undigits(out.reshape(n, t * b), q)


@dataclass(frozen=True, eq=False)
class QuantumShareSet:
    """Joint state of the p share registers S_1..S_p and any external registers."""

    state: DensityOperator
    prm: QShamirParams

    @property
    def labels(self) -> tuple[str, ...]:
        return self.prm.labels()

    def marginal(self, parties: Sequence[int], externals: Sequence[str] = ()) -> DensityOperator:
        return self.state.marginal([f"S_{i}" for i in parties] + list(externals))

    def externals(self) -> tuple[str, ...]:
        return tuple(lab for lab in self.state.labels if lab not in self.labels)

    def share_bits(self) -> float:
        """Measured size of one share in qubits."""
        return self.prm.b * math.log2(self.prm.q)


def state_factor(rho: np.ndarray, tol: float = 1e-13) -> np.ndarray:
    """F with F F^dagger = rho, columns sqrt(lambda) v over the support."""
    w, v = np.linalg.eigh(herm(rho))
    keep = w > tol
    if not keep.any():
        return np.zeros((rho.shape[0], 1), dtype=complex)
    return v[:, keep] * np.sqrt(w[keep])


def factor_reduce(f: np.ndarray, dims: Sequence[int], keep: Sequence[int]) -> np.ndarray:
    """Tr_{not keep}(F F^dagger) for a factor F over registers ``dims``."""
    dims = list(dims)
    k = f.shape[1]
    rest = [i for i in range(len(dims)) if i not in keep]
    t = f.reshape(dims + [k]).transpose(list(keep) + rest + [len(dims)])
    dk = int(np.prod([dims[i] for i in keep])) if keep else 1
    g = t.reshape(dk, -1)
    return g @ g.conj().T


def qshare_factor(f: np.ndarray, dims: Sequence[int], m_index: int, prm: QShamirParams) -> tuple[np.ndarray, list[int]]:
    """Encode register ``m_index`` of a state factor into all 2t - 1 base shares.

    The base shares replace the message register in place; nothing is
    traced, so the result is still a factor of a pure extension.
    """
    from .qmatrix import apply_left

    if dims[m_index] != prm.message_dim:
        raise InvalidParams(f"message dimension {dims[m_index]} differs from q^b = {prm.message_dim}")
    v = _encoding(prm)
    return apply_left(f, dims, v, [m_index], [prm.share_dim] * prm.base_parties)


def qshare(sigma: DensityOperator, prm: QShamirParams, message: str = "M") -> QuantumShareSet:
    """Share register ``message`` of ``sigma`` among p parties.

    The share registers S_1..S_p replace the message register; other
    registers are carried along.
    """
    if message not in sigma.labels:
        raise InvalidParams(f"no register {message!r} to share")
    idx = sigma.layout.index(message)
    f = state_factor(sigma.matrix)
    g, new_dims = qshare_factor(f, sigma.dims, idx, prm)
    P = prm.base_parties
    keep = [i for i in range(len(new_dims)) if not (idx + prm.p <= i < idx + P)]
    rho = factor_reduce(g, new_dims, keep)
    regs = list(sigma.layout.registers)
    share_regs = tuple((f"S_{i}", prm.share_dim) for i in range(1, prm.p + 1))
    layout = RegisterLayout(tuple(regs[:idx]) + share_regs + tuple(regs[idx + 1:]))
    return QuantumShareSet(DensityOperator(rho, layout), prm)


def qrec_factor(f: np.ndarray, dims: Sequence[int], share_indices: Sequence[int], parties: Sequence[int],
                prm: QShamirParams) -> tuple[np.ndarray, list[int], int]:
    """Apply the reconstruction permutation to the first t of ``parties``.

    ``share_indices[j]`` is the register position of party ``parties[j]``.
    Returns the new factor, its dims, and the register position of the
    recovered message; the other t - 1 touched registers hold junk.
    """
    from .qmatrix import apply_left

    order = sorted(range(len(parties)), key=lambda j: parties[j])
    if len(parties) < prm.t:
        raise InvalidParams(f"{len(parties)} shares cannot reconstruct at threshold {prm.t}")
    use = [order[j] for j in range(prm.t)]
    subset = [parties[j] for j in use]
    targets = [share_indices[j] for j in use]
    perm = reconstruction_permutation(prm, subset)
    n = perm.size
    pm = np.zeros((n, n))
    pm[perm, np.arange(n)] = 1.0
    g, new_dims = apply_left(f, dims, pm, targets)
    # outputs occupy the slot of the first target, in order (M, junk...)
    first = min(targets)
    rest_before = sum(1 for i in range(len(dims)) if i not in targets and i < first)
    return g, new_dims, rest_before


def qrec(shares: QuantumShareSet | DensityOperator, parties: Sequence[int], prm: QShamirParams | None = None,
         out_label: str = "M") -> DensityOperator:
    """Reconstruct from the shares of ``parties`` (uses the lowest t of them).

    All share registers are consumed; external registers are kept.
    """
    from .qmatrix import permute_registers, ptrace

    if isinstance(shares, QuantumShareSet):
        prm = shares.prm if prm is None else prm
        state = shares.state
    else:
        state = shares
    if prm is None:
        raise InvalidParams("sharing parameters required")
    parties = sorted(set(parties))
    if len(parties) < prm.t:
        raise InvalidParams(f"{len(parties)} shares cannot reconstruct at threshold {prm.t}")
    used = parties[: prm.t]
    labels = list(state.labels)
    targets = [labels.index(f"S_{i}") for i in used]
    others = [i for i in range(len(labels)) if i not in targets]
    dims = list(state.dims)
    rho = permute_registers(state.matrix, dims, targets + others)
    perm = reconstruction_permutation(prm, used)
    dt = perm.size
    drest = rho.shape[0] // dt
    # U rho U^dagger for the permutation U|i> = |perm[i]> on the leading block
    inv = np.empty_like(perm)
    inv[perm] = np.arange(dt)
    t = rho.reshape(dt, drest, dt, drest)[inv][:, :, inv]
    rho = t.reshape(dt * drest, dt * drest)
    new_dims = [prm.share_dim] * prm.t + [dims[i] for i in others]
    new_labels = [out_label] + [f"_junk{j}" for j in range(prm.t - 1)] + [labels[i] for i in others]
    keep = [i for i, lab in enumerate(new_labels) if not lab.startswith("S_") and not lab.startswith("_junk")]
    out = ptrace(rho, new_dims, keep)
    layout = RegisterLayout(tuple((new_labels[i], new_dims[i]) for i in keep))
    return DensityOperator(out, layout)


def qshare_operator(op: np.ndarray, prm: QShamirParams, parties: Sequence[int]) -> np.ndarray:
    """Reduced operator on ``parties`` of V op V^dagger (qShare applied linearly)."""
    v = _encoding(prm)
    full = v @ op @ v.conj().T
    P = prm.base_parties
    dims = [prm.share_dim] * P
    keep = [i - 1 for i in parties]
    rest = [i for i in range(P) if i not in keep]
    t = full.reshape(dims + dims)
    perm = keep + rest + [P + i for i in keep] + [P + i for i in rest]
    t = t.transpose(perm)
    dk = prm.share_dim ** len(keep)
    dr = prm.share_dim ** len(rest)
    t = t.reshape(dk, dr, dk, dr)
    return np.einsum("arbr->ab", t)


# ---------------------------------------------------------------------------
# classical Shamir


def _check_classical(t: int, p: int, q: int) -> None:
    if not is_prime(q):
        raise InvalidParams(f"q={q} is not prime")
    if q <= p:
        raise InvalidParams(f"need q > p, got q={q}, p={p}")
    if not 1 <= t <= p:
        raise InvalidParams(f"need 1 <= t <= p, got t={t}, p={p}")


def cshamir_share(s: int, t: int, p: int, q: int, rng: np.random.Generator) -> tuple[int, ...]:
    """Shares f(1), ..., f(p) of a random f with deg < t and f(0) = s over F_q."""
    _check_classical(t, p, q)
    if not 0 <= s < q:
        raise InvalidParams("secret outside F_q")
    coeffs = [s] + [int(c) for c in rng.integers(0, q, size=t - 1)]
    return cshamir_eval(coeffs, p, q)


def cshamir_eval(coeffs: Sequence[int], p: int, q: int) -> tuple[int, ...]:
    """Evaluate the polynomial with ``coeffs`` (constant term first) at 1..p."""
    out = []
    for x in range(1, p + 1):
        acc = 0
        for c in reversed(coeffs):
            acc = (acc * x + c) % q
        out.append(acc)
    return tuple(out)


def cshamir_rec(shares: Mapping[int, int], t: int, q: int) -> int:
    """Lagrange interpolation at 0 from the lowest t of the given (party -> value) shares."""
    if len(shares) < t:
        raise InvalidParams(f"{len(shares)} shares cannot reconstruct at threshold {t}")
    pts = sorted(shares)[:t]
    s = 0
    for i in pts:
        num, den = 1, 1
        for j in pts:
            if j != i:
                num = num * (-j) % q
                den = den * (i - j) % q
        s = (s + shares[i] * num * pow(den, -1, q)) % q
    return s


# ---------------------------------------------------------------------------
# leakage-resilient sharing from the inner product


@dataclass(frozen=True)
class LRSSParams:
    """Inner-product sharing of a b-bit secret (an element of GF(2^b)).

    Each 2-of-2 share is a vector of N field elements.  ``p`` > 2 selects
    the 2-of-p construction.  ``strict`` turns the leakage-resilience
    inequality into a hard error; otherwise a violation is logged.
    """

    b: int
    N: int
    ell_leak: int = 0
    epsilon: float = 2.0**-10
    p: int = 2
    strict: bool = False

    def __post_init__(self):
        if self.b < 1 or self.N < 1:
            raise InvalidParams("b and N must be positive")
        if self.p < 2:
            raise InvalidParams("need at least two parties")
        if not 0 < self.epsilon < 1:
            raise InvalidParams("epsilon must lie in (0, 1)")
        if self.ell_leak < 0:
            raise InvalidParams("leakage budget must be non-negative")
        if not self.satisfies_bound():
            msg = (f"N*b = {self.N * self.b} is below the leakage-resilience bound "
                   f"{self.required_share_bits():.2f} for ell={self.ell_leak}, eps={self.epsilon}, p={self.p}")
            if self.strict:
                raise InvalidParams(msg)
            log.warning(msg)

    def required_share_bits(self) -> float:
        """Lower bound on N*b: 9b + 2 ell + 8 log(1/eps) + 40, plus 16 log p when p > 2."""
        extra = 16 * math.log2(self.p) if self.p > 2 else 0.0
        return 9 * self.b + 2 * self.ell_leak + 8 * math.log2(1 / self.epsilon) + extra + 40

    def satisfies_bound(self) -> bool:
        return self.N * self.b >= self.required_share_bits()

    @property
    def share_bits(self) -> int:
        """Bits per party: N b for 2-of-2, (p - 1) N b for 2-of-p."""
        return (self.p - 1) * self.N * self.b

    def to_json(self) -> dict:
        return {"b": self.b, "N": self.N, "ell_leak": self.ell_leak, "epsilon": self.epsilon,
                "p": self.p, "strict": self.strict}

    @classmethod
    def from_json(cls, obj: dict) -> "LRSSParams":
        return cls(int(obj["b"]), int(obj["N"]), int(obj.get("ell_leak", 0)), float(obj.get("epsilon", 2.0**-10)),
                   int(obj.get("p", 2)), bool(obj.get("strict", False)))


def lrshare2(s: int, prm: LRSSParams, rng: np.random.Generator) -> tuple[FieldVector, FieldVector]:
    """(X, Y) uniform over IP^{-1}(s)."""
    if not 0 <= s < 1 << prm.b:
        raise InvalidParams("secret outside GF(2^b)")
    return ip_preimage_sample(s, prm.b, prm.N, rng)


def lrrec2(x: FieldVector, y: FieldVector) -> int:
    return ip_extract(x, y)


@dataclass(frozen=True)
class LrShare:
    """Party ``party``'s 2-of-p share: one sub-share per other party.

    ``slots`` is ordered by the other party's index; slot j holds the
    party's half of the (party, j) 2-of-2 sharing.
    """

    party: int
    slots: tuple[tuple[int, FieldVector], ...]

    def slot(self, j: int) -> FieldVector:
        for k, v in self.slots:
            if k == j:
                return v
        raise KeyError(j)

    def permuted(self, perm: Mapping[int, int]) -> "LrShare":
        """Slot j now holds what slot perm[j] held (unlisted slots unchanged)."""
        table = dict(self.slots)
        return LrShare(self.party, tuple((j, table[perm.get(j, j)]) for j, _ in self.slots))

    def to_json(self) -> dict:
        return {"party": self.party, "slots": {str(j): v.to_hex() for j, v in self.slots}}


def lrshare_2p(s: int, prm: LRSSParams, rng: np.random.Generator) -> list[LrShare]:
    """Independent 2-of-2 sharings for every pair i < j, in lexicographic order.

    Party i receives X^j_i (the first half of pair (i, j)) and party j
    receives X^i_j (the second half).
    """
    p = prm.p
    if p < 3:
        raise InvalidParams("the 2-of-p construction needs p >= 3")
    halves: dict[tuple[int, int], FieldVector] = {}
    for i, j in itertools.combinations(range(1, p + 1), 2):
        x, y = lrshare2(s, prm, rng)
        halves[(i, j)] = x
        halves[(j, i)] = y
    return [LrShare(i, tuple((j, halves[(i, j)]) for j in range(1, p + 1) if j != i)) for i in range(1, p + 1)]


def lrrec_2p(shares: Sequence[LrShare]) -> int:
    """Reconstruct from the lexicographically lowest pair among the given shares."""
    if len({sh.party for sh in shares}) < 2:
        raise InvalidParams("2-of-p reconstruction needs two shares")
    by_party = {sh.party: sh for sh in shares}
    i, j = sorted(by_party)[:2]
    return lrrec2(by_party[i].slot(j), by_party[j].slot(i))


def pair_distribution(s: int, k: int, N: int) -> list[tuple[tuple[int, int], float]]:
    """Exact distribution of one 2-of-2 sharing of ``s`` as (x_int, y_int) -> prob."""
    pre = ip_preimage_enumerate(s, k, N)
    w = 1.0 / len(pre)
    return [((x.to_int(), y.to_int()), w) for x, y in pre]


def pair_vector(s: int | None, k: int, N: int) -> np.ndarray:
    """Law of one 2-of-2 sharing as a vector over x * q^N + y (uniform if ``s`` is None)."""
    qn = 1 << (k * N)
    if s is None:
        return np.full(qn * qn, 1.0 / (qn * qn))
    out = np.zeros(qn * qn)
    for (x, y), w in pair_distribution(s, k, N):
        out[x * qn + y] += w
    return out


def lrss_joint_distribution(s: int, prm: LRSSParams, uniform_pairs: Sequence[tuple[int, int]] = ()) -> np.ndarray:
    """Exact joint law of all pairwise sharings as a tensor, one axis per pair.

    Axes follow the pairs (i, j), i < j, in lexicographic order; an axis
    index is x * q^N + y for the pair's halves.  Pairs in ``uniform_pairs``
    are replaced by independent uniform vectors (the hybrid experiment).
    Small parameters only.
    """
    pairs = list(itertools.combinations(range(1, prm.p + 1), 2))
    out = np.ones(())
    for pr in pairs:
        vec = pair_vector(None if pr in uniform_pairs else s, prm.b, prm.N)
        out = np.multiply.outer(out, vec)
    return out


@dataclass(frozen=True)
class HybridReport:
    replaced: tuple[int, int]
    others_distance: float
    mutual_independence_distance: float
    passed: bool


def lrss_hybrid_check(s: int, prm: LRSSParams, replaced: tuple[int, int] = (1, 2), tol: float = 1e-12) -> HybridReport:
    """Replace one pairwise sharing by uniform vectors and compare the rest.

    Reports the l1 distance between the joint law of all other sub-shares
    before and after the replacement, and the l1 distance of the full
    joint law from the product of its per-pair marginals.
    """
    pairs = list(itertools.combinations(range(1, prm.p + 1), 2))
    if replaced not in pairs:
        raise InvalidParams(f"{replaced} is not a pair of parties")
    pos = pairs.index(replaced)
    real = lrss_joint_distribution(s, prm)
    hyb = lrss_joint_distribution(s, prm, uniform_pairs=[replaced])
    others = float(np.abs(real.sum(axis=pos) - hyb.sum(axis=pos)).sum())
    prod = np.ones(())
    for ax in range(real.ndim):
        prod = np.multiply.outer(prod, real.sum(axis=tuple(i for i in range(real.ndim) if i != ax)))
    indep = float(np.abs(real - prod).sum())
    return HybridReport(replaced, others, indep, bool(others <= tol and indep <= tol))


def lrss_single_share_marginal(s: int, k: int, N: int) -> dict[int, float]:
    """Exact law of the first 2-of-2 share of ``s`` (x_int -> prob)."""
    out: dict[int, float] = {}
    for (x, _), w in pair_distribution(s, k, N):
        out[x] = out.get(x, 0.0) + w
    return out


def cross_inner_product_zero_prob(alpha_a: float, alpha_b: float, k: int, N: int) -> float:
    """P(IP(a, b) = 0) for independent a, b that are zero with prob alpha and
    otherwise uniform on nonzero vectors of GF(2^k)^N."""
    q = 1 << k
    z_nonzero = (q ** (N - 1) - 1) / (q**N - 1)
    return 1.0 - (1.0 - alpha_a) * (1.0 - alpha_b) * (1.0 - z_nonzero)


def half_zero_prob(s: int, k: int, N: int) -> float:
    """P(one half of a uniform IP preimage of s is the zero vector)."""
    q = 1 << k
    return q**N / ip_preimage_count(0, k, N) if s == 0 else 0.0


__all__ = [
    "QShamirParams",
    "QuantumShareSet",
    "weyl_operator",
    "encoding_isometry",
    "reconstruction_permutation",
    "qshare",
    "qrec",
    "qshare_factor",
    "qrec_factor",
    "qshare_operator",
    "state_factor",
    "factor_reduce",
    "cshamir_share",
    "cshamir_eval",
    "cshamir_rec",
    "LRSSParams",
    "LrShare",
    "lrshare2",
    "lrrec2",
    "lrshare_2p",
    "lrrec_2p",
    "pair_distribution",
    "lrss_joint_distribution",
    "pair_vector",
    "lrss_hybrid_check",
    "HybridReport",
    "lrss_single_share_marginal",
    "cross_inner_product_zero_prob",
    "half_zero_prob",
    "is_prime",
]
