from __future__ import annotations

import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qnmlab.extractors import FieldVector, ip_extract, ip_preimage_count
from qnmlab.qmatrix import (
    DensityOperator,
    RegisterLayout,
    basis_state,
    canonical_purification,
    random_density,
)
from qnmlab.secret_sharing import (
    InvalidParams,
    LRSSParams,
    QShamirParams,
    cross_inner_product_zero_prob,
    cshamir_eval,
    cshamir_rec,
    cshamir_share,
    encoding_isometry,
    half_zero_prob,
    is_prime,
    lrrec2,
    lrrec_2p,
    lrshare2,
    lrshare_2p,
    lrss_hybrid_check,
    lrss_joint_distribution,
    lrss_single_share_marginal,
    qrec,
    qshare,
    qshare_operator,
    weyl_operator,
)


def _poly_isometry(t: int, q: int) -> np.ndarray:
    """|s> -> q^{-(t-1)/2} sum_f |f(a_1) ... f(a_{2t-1})>, a_i = i mod q, deg f < t, leading coefficient s."""
    P = 2 * t - 1
    v = np.zeros((q**P, q), dtype=complex)
    for s in range(q):
        for a in itertools.product(range(q), repeat=t - 1):
            coeffs = a + (s,)
            vals = [sum(c * x**e for e, c in enumerate(coeffs)) % q for x in range(1, P + 1)]
            row = 0
            for val in vals:
                row = row * q + val
            v[row, s] += q ** (-(t - 1) / 2)
    return v


@pytest.mark.parametrize("t,q", [(2, 3), (2, 5), (3, 5)])
def test_encoding_isometry_matches_polynomial_oracle(t, q):
    v = encoding_isometry(QShamirParams(t, 2 * t - 1, q))
    assert np.allclose(v, _poly_isometry(t, q), atol=1e-12)
    assert np.allclose(v.conj().T @ v, np.eye(q), atol=1e-12)


def test_params_validation():
    with pytest.raises(InvalidParams):
        QShamirParams(2, 4, 5)  # p > 2t - 1
    with pytest.raises(InvalidParams):
        QShamirParams(2, 3, 4)  # not prime
    with pytest.raises(InvalidParams):
        QShamirParams(3, 3, 3)  # too few points
    assert is_prime(3) and not is_prime(1) and not is_prime(9)


def test_points_distinct_at_q_equal_p():
    # q = p = 3 works because the secret sits in the leading coefficient, so alpha = 0 is a usable point
    prm = QShamirParams(2, 3, 3)
    assert sorted(prm.points) == [0, 1, 2]
    sh = qshare(basis_state(RegisterLayout.of(("M", 3)), 2).density(), prm)
    for T in itertools.combinations((1, 2, 3), 2):
        assert np.allclose(qrec(sh, T).matrix, np.diag([0, 0, 1]), atol=1e-12)


def test_single_share_of_zero_is_mixed():
    prm = QShamirParams(2, 3, 3)
    sh = qshare(basis_state(RegisterLayout.of(("M", 3)), 0).density(), prm)
    for i in (1, 2, 3):
        assert np.allclose(sh.marginal([i]).matrix, np.eye(3) / 3, atol=1e-12)


def _purified_qutrit(rng) -> DensityOperator:
    return canonical_purification(random_density(RegisterLayout.of(("M", 3)), rng), "Mh").density()


@pytest.mark.parametrize("p", [2, 3])
def test_roundtrip_every_authorized_set(p):
    prm = QShamirParams(2, p, 3)
    rng = np.random.default_rng(7)
    sigma = _purified_qutrit(rng)
    sh = qshare(sigma, prm)
    outs = []
    for size in range(2, p + 1):
        for T in itertools.combinations(range(1, p + 1), size):
            out = qrec(sh, T)
            assert out.labels == ("M", "Mh")
            assert np.abs(out.matrix - sigma.matrix).max() < 1e-10
            outs.append(out.matrix)
    for a, b in itertools.combinations(outs, 2):
        assert np.abs(a - b).max() < 1e-10


def test_roundtrip_dense_pseudo_inverse_oracle():
    prm = QShamirParams(2, 3, 3)
    rng = np.random.default_rng(8)
    rho = random_density(RegisterLayout.of(("M", 3)), rng).matrix
    v = _poly_isometry(2, 3)
    enc = v @ rho @ v.conj().T
    back = v.conj().T @ enc @ v
    out = qrec(qshare(DensityOperator.from_matrix(rho, ("M", 3)), prm), [1, 3])
    assert np.abs(out.matrix - back).max() < 1e-10


def test_qrec_too_few_shares():
    prm = QShamirParams(2, 3, 3)
    sh = qshare(basis_state(RegisterLayout.of(("M", 3)), 1).density(), prm)
    with pytest.raises(InvalidParams):
        qrec(sh, [2])


def test_pauli_on_message_vanishes_on_unauthorized_shares():
    prm = QShamirParams(2, 3, 3)
    for a, c in itertools.product(range(3), repeat=2):
        if (a, c) == (0, 0):
            continue
        w = weyl_operator(3, a, c)
        for i in (1, 2, 3):
            assert np.abs(qshare_operator(w, prm, [i])).max() < 1e-12
    ident = qshare_operator(np.eye(3), prm, [2])
    assert np.allclose(ident, np.eye(3), atol=1e-12)


def test_entangled_hiding():
    prm = QShamirParams(2, 3, 3)
    rng = np.random.default_rng(12)
    for _ in range(3):
        sigma = random_density(RegisterLayout.of(("E", 2), ("M", 3)), rng)
        sh = qshare(sigma, prm)
        for i in (1, 2, 3):
            joint = sh.marginal([i], ["E"])
            want = np.kron(np.eye(3) / 3, sigma.marginal(["E"]).matrix)
            assert np.abs(joint.matrix - want).max() < 1e-10


def test_three_of_five_hiding_and_rec():
    prm = QShamirParams(3, 5, 5)
    rng = np.random.default_rng(1)
    sigma = random_density(RegisterLayout.of(("M", 5)), rng)
    sh = qshare(sigma, prm)
    assert np.allclose(sh.marginal([2, 4]).matrix, np.eye(25) / 25, atol=1e-10)
    assert np.abs(qrec(sh, [1, 3, 5]).matrix - sigma.matrix).max() < 1e-10


def test_cshamir_single_share_uniform_exhaustive():
    t, p, q, s = 2, 2, 5, 3
    for party in range(p):
        counts = np.zeros(q)
        for a in range(q):
            counts[cshamir_eval([s, a], p, q)[party]] += 1
        assert np.all(counts == 1)


@pytest.mark.parametrize("t,p,q", [(1, 3, 5), (2, 3, 5), (3, 4, 5), (2, 2, 3)])
def test_cshamir_roundtrip_exhaustive(t, p, q):
    for s in range(q):
        for a in itertools.product(range(q), repeat=t - 1):
            sh = cshamir_eval((s,) + a, p, q)
            for T in itertools.combinations(range(1, p + 1), t):
                assert cshamir_rec({i: sh[i - 1] for i in T}, t, q) == s


def test_cshamir_degenerate_and_errors():
    rng = np.random.default_rng(0)
    assert cshamir_share(4, 1, 3, 5, rng) == (4, 4, 4)
    with pytest.raises(InvalidParams):
        cshamir_share(1, 2, 3, 3, rng)
    with pytest.raises(InvalidParams):
        cshamir_rec({1: 2}, 2, 5)


def test_lrshare2_roundtrip():
    prm = LRSSParams(1, 3)
    rng = np.random.default_rng(3)
    for s in (0, 1):
        for _ in range(200):
            x, y = lrshare2(s, prm, rng)
            assert lrrec2(x, y) == s and len(x.elements) == len(y.elements) == 3


def _single_share_oracle(s: int, N: int) -> dict[int, float]:
    pre = [(x, y) for x in range(1 << N) for y in range(1 << N) if bin(x & y).count("1") % 2 == s]
    out: dict[int, float] = {}
    for x, _ in pre:
        out[x] = out.get(x, 0.0) + 1 / len(pre)
    return out


@pytest.mark.parametrize("N", [2, 3])
def test_single_share_law_exhaustive(N):
    laws = []
    for s in (0, 1):
        got = lrss_single_share_marginal(s, 1, N)
        want = _single_share_oracle(s, N)
        assert set(got) == set(want)
        assert all(got[k] == pytest.approx(want[k]) for k in want)
        laws.append(want)
    # the law depends on s (x = 0 forces s = 0); mixing the secrets by preimage count gives uniform X
    assert laws[0] != laws[1]
    n0 = ip_preimage_count(0, 1, N)
    w0 = n0 / (1 << (2 * N))
    avg = {x: w0 * laws[0].get(x, 0) + (1 - w0) * laws[1].get(x, 0) for x in range(1 << N)}
    assert all(v == pytest.approx(1 / (1 << N)) for v in avg.values())


def test_half_zero_prob_and_cross_ip():
    for N in (2, 3):
        law = _single_share_oracle(0, N)
        assert half_zero_prob(0, 1, N) == pytest.approx(law[0])
        assert half_zero_prob(1, 1, N) == 0.0
        # independent a, b: zero w.p. alpha, else uniform nonzero
        for al_a, al_b in [(0.0, 0.0), (0.3, 0.1), (1.0, 0.5)]:
            pz = 0.0
            for a in range(1 << N):
                wa = al_a if a == 0 else (1 - al_a) / ((1 << N) - 1)
                for b in range(1 << N):
                    wb = al_b if b == 0 else (1 - al_b) / ((1 << N) - 1)
                    if bin(a & b).count("1") % 2 == 0:
                        pz += wa * wb
            assert cross_inner_product_zero_prob(al_a, al_b, 1, N) == pytest.approx(pz)


def test_lrss_strict_bound():
    with pytest.raises(InvalidParams):
        LRSSParams(1, 3, strict=True)
    ok = LRSSParams(1, 200, ell_leak=4, epsilon=2**-10, strict=True)
    assert ok.required_share_bits() == pytest.approx(9 + 8 + 80 + 40)
    assert LRSSParams(1, 3).required_share_bits() < LRSSParams(1, 3, p=3).required_share_bits()
    assert LRSSParams.from_json(ok.to_json()) == ok


def test_lrshare_2p_every_pair():
    prm = LRSSParams(1, 3, p=4)
    rng = np.random.default_rng(5)
    for s in (0, 1):
        for _ in range(20):
            shares = lrshare_2p(s, prm, rng)
            assert all(sum(len(v.elements) for _, v in sh.slots) * prm.b == prm.share_bits for sh in shares)
            assert prm.share_bits == (prm.p - 1) * prm.N * prm.b
            for i, j in itertools.combinations(range(4), 2):
                assert lrrec_2p([shares[j], shares[i]]) == s
                assert ip_extract(shares[i].slot(j + 1), shares[j].slot(i + 1)) == s
    with pytest.raises(InvalidParams):
        lrrec_2p(shares[:1])
    with pytest.raises(InvalidParams):
        lrshare_2p(0, LRSSParams(1, 3), rng)


def test_pairwise_sharings_independent_given_secret():
    prm = LRSSParams(1, 3, p=3)
    for s in (0, 1):
        for pair in [(1, 2), (1, 3), (2, 3)]:
            rep = lrss_hybrid_check(s, prm, replaced=pair)
            assert rep.passed, rep
    # direct oracle: the joint law is the product of per-pair laws
    joint = lrss_joint_distribution(1, prm)
    assert joint.shape == (64, 64, 64)
    assert joint.sum() == pytest.approx(1.0)


def test_lrshare_permuted_slots():
    prm = LRSSParams(1, 2, p=3)
    sh = lrshare_2p(0, prm, np.random.default_rng(2))[0]
    sw = sh.permuted({2: 3, 3: 2})
    assert sw.slot(2) == sh.slot(3) and sw.slot(3) == sh.slot(2)


@settings(max_examples=30)
@given(st.integers(0, 3), st.integers(1, 4), st.integers(0, 2**32 - 1))
def test_lrshare2_property(s, N, seed):
    x, y = lrshare2(s, LRSSParams(2, N), np.random.default_rng(seed))
    assert isinstance(x, FieldVector) and lrrec2(x, y) == s
