from __future__ import annotations

import inspect
import itertools
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qnmlab.extractors import bits_to_int, int_to_bits
from qnmlab.nmc import CodeParams, SplitStateCodeword, dec, key_clifford
from qnmlab.nmss import NmssParams, NmssShareSet, left_state, nmrec
from qnmlab.pauli_clifford import epr_projector, pauli_dense, PauliOp, sc_enumerate
from qnmlab.qmatrix import (
    Channel,
    DensityOperator,
    PureState,
    RegisterLayout,
    canonical_purification,
    maximally_entangled,
    random_density,
    random_pure,
    trace_norm,
)
from qnmlab.secret_sharing import LRSSParams, lrshare_2p, qshare
from qnmlab.tamper_harness import (
    InvalidParams,
    LeakageAdversary,
    PartAction,
    SplitAdversary,
    ThresholdAdversary,
    adversary_zoo,
    build_simulator,
    canonical_message,
    cross_reconstruction_law,
    nm_check,
    nmc_branches,
    rejection_condition,
    run_leakage_experiment,
    run_nmc_experiment,
    run_nmss_experiment,
    stage_comparison,
)

IDEAL = ["ideal-key", "exact-uniform-clifford"]
MODES = ["real"] + IDEAL


def _epr() -> DensityOperator:
    return maximally_entangled("M", "Mh", 2).density()


def _mixed_u_sigma(sigma: DensityOperator) -> np.ndarray:
    return np.kron(np.eye(2) / 2, sigma.marginal(["Mh"]).matrix)


# --- PartAction ---------------------------------------------------------------


def test_part_action_identity_and_dense():
    a = PartAction.identity(4, 2).validate()
    assert np.allclose(a.dense(), np.eye(8))
    assert list(a.classical_projection()) == [0, 1, 2, 3]


def test_part_action_from_unitary_roundtrip():
    rng = np.random.default_rng(0)
    adv = adversary_zoo("random-branching:3", CodeParams(b=1, ell=12, delta=Fraction(1, 12)))
    u = adv.v.dense()
    assert np.allclose(u.conj().T @ u, np.eye(u.shape[0]), atol=1e-10)
    back = PartAction.from_unitary(u, adv.v.n_values, adv.v.qdim).validate()
    assert np.allclose(back.dense(), u, atol=1e-12)
    perm = np.eye(6)[rng.permutation(6)]
    assert np.allclose(PartAction.from_unitary(perm, 3, 2).dense(), perm)


def test_part_action_rejects_bad_tables():
    with pytest.raises(ValueError):
        PartAction(np.array([[0, 0]]), np.array([[0, 0]]), (np.eye(1) / np.sqrt(2),), 1).validate()
    with pytest.raises(ValueError):
        PartAction(np.array([0]), np.array([0]), (np.eye(1) * 0.5,), 1).validate()
    with pytest.raises(ValueError):
        PartAction(np.array([0]), np.array([1]), (np.eye(1),), 1)
    with pytest.raises(ValueError):
        PartAction(np.array([0]), np.array([0]), (np.eye(2),), 1)


# --- split-state experiments --------------------------------------------------


@pytest.mark.parametrize("mode", MODES)
def test_identity_adversary(mode):
    prm = CodeParams(mode=mode)
    adv = adversary_zoo("identity", prm)
    rng = np.random.default_rng(1)
    sigma = canonical_message(random_density(RegisterLayout.of(("M", 2)), rng))
    res = nm_check(adv, sigma, prm)
    assert np.abs(res.final_state.matrix - sigma.matrix).max() < 1e-10
    assert (res.p_same, res.p_epr, res.p_A) == pytest.approx((1.0, 1.0, 1.0))
    assert res.epsilon_measured <= 1e-8


def test_constant_replace_both():
    prm = CodeParams(mode="ideal-key")
    adv = adversary_zoo("constant-replace", prm)
    res = nm_check(adv, _epr(), prm)
    assert res.p_same == pytest.approx(2.0 ** -(prm.ell + prm.m), abs=1e-15)
    assert np.allclose(res.final_state.marginal(["Mh"]).matrix, np.eye(2) / 2, atol=1e-12)


def test_pauli_x_on_z_closed_form_and_group_sum():
    prm = CodeParams(mode="exact-uniform-clifford")
    eta = run_nmc_experiment(adversary_zoo("pauli:X@Z", prm), _epr(), prm).matrix
    # oracle: X, Y untouched so the decoder undoes the same uniformly drawn key
    psi = epr_projector(1)
    x = pauli_dense(PauliOp.from_text("X"))
    want = np.zeros((4, 4), dtype=complex)
    for c in sc_enumerate(1):
        k = np.kron(c.dense().conj().T @ x @ c.dense(), np.eye(2))
        want += k @ psi @ k.conj().T / 24
    assert np.abs(eta - want).max() < 1e-12
    assert np.abs(eta - (np.eye(4) - psi) / 3).max() < 1e-12


def test_z_only_tampering_has_same_branch_one():
    rng = np.random.default_rng(2)
    for mode in MODES:
        prm = CodeParams(mode=mode)
        sim = build_simulator(adversary_zoo("pauli:Y@Z", prm), prm)
        assert sim.p_same == pytest.approx(1.0)
        assert sim.p_A == pytest.approx(sim.p_epr) and 0 <= sim.p_A <= 1
    assert rng is not None


def test_epsilon_recomputable_from_fields():
    prm = CodeParams(mode="ideal-key")
    res = nm_check(adversary_zoo("haar_random:5", prm), _epr(), prm)
    assert res.recompute_epsilon() == pytest.approx(res.epsilon_measured, abs=1e-14)
    want = res.p_A * res.target.matrix + (1 - res.p_A) * np.kron(res.gamma_A.matrix, np.eye(2) / 2)
    assert np.abs(res.simulator_state().matrix - want).max() < 1e-14
    assert set(res.summary()) >= {"p_same", "p_epr", "p_A", "epsilon_measured"}


def test_ideal_classical_adversary_oracle():
    prm = CodeParams(mode="exact-uniform-clifford")
    rng = np.random.default_rng(3)
    sigma = canonical_message(random_density(RegisterLayout.of(("M", 2)), rng))
    f = rng.permutation(1 << prm.ell)
    g = np.array([0, 2, 1, 3])
    adv = adversary_zoo({"name": "classical", "f": f, "g": g}, prm)
    eta = run_nmc_experiment(adv, sigma, prm).matrix
    # same branch needs f(x) = x and g(y) = y; tampered pairs meet a fresh uniform key
    p = np.mean(f == np.arange(f.size)) * np.mean(g == np.arange(4))
    want = p * sigma.matrix + (1 - p) * _mixed_u_sigma(sigma)
    assert np.abs(eta - want).max() < 1e-12


def _brute_force_real(prm: CodeParams, f, g, z_op, sigma: DensityOperator) -> np.ndarray:
    acc = np.zeros((4, 4), dtype=complex)
    nx, ny = 1 << prm.ell, 1 << prm.m
    for xv in range(nx):
        xb = int_to_bits(xv, prm.ell)
        for yv in range(ny):
            yb = int_to_bits(yv, prm.m)
            c = key_clifford(prm, xb, yb).dense()
            z = sigma.conjugate(z_op @ c, ["M"]).relabel({"M": "Z"})
            cw = SplitStateCodeword(int_to_bits(int(f[xv]), prm.ell), int_to_bits(int(g[yv]), prm.m), z)
            acc += dec(cw, prm).matrix
    return acc / (nx * ny)


def test_real_mode_matches_pointwise_enc_dec():
    prm = CodeParams(b=1, ell=12, delta=Fraction(1, 12))
    rng = np.random.default_rng(4)
    sigma = canonical_message(random_density(RegisterLayout.of(("M", 2)), rng))
    f = np.arange(1 << prm.ell)
    f[:40] = rng.permutation(40)
    g = np.array([1, 0])
    z_op = pauli_dense(PauliOp.from_text("Z"))
    adv = SplitAdversary(PartAction.classical(f, 1), PartAction.classical(g, 2, z_op))
    got = run_nmc_experiment(adv, sigma, prm).matrix
    want = _brute_force_real(prm, f, g, z_op, sigma)
    assert np.abs(got - want).max() < 1e-12


def test_shape_checks():
    prm = CodeParams()
    bad = SplitAdversary(PartAction.identity(4, 1), PartAction.identity(4, 2))
    with pytest.raises(InvalidParams):
        run_nmc_experiment(bad, _epr(), prm)
    with pytest.raises(InvalidParams):
        run_nmc_experiment(adversary_zoo("identity", prm), random_density(RegisterLayout.of(("A", 2)),
                                                                          np.random.default_rng(0)), prm)


def test_simulator_message_free():
    params = inspect.signature(build_simulator).parameters
    assert list(params) == ["adv", "prm"]
    prm = CodeParams(mode="ideal-key")
    adv = adversary_zoo("random-branching:7", prm)
    a, b = build_simulator(adv, prm), build_simulator(adv, prm)
    assert (a.p_same, a.p_epr, a.p_A) == (b.p_same, b.p_epr, b.p_A)
    assert np.array_equal(a.gamma_A.matrix, b.gamma_A.matrix)
    rng = np.random.default_rng(0)
    r1 = nm_check(adv, canonical_message(random_density(RegisterLayout.of(("M", 2)), rng)), prm)
    r2 = nm_check(adv, _epr(), prm)
    assert r1.p_A == r2.p_A and np.array_equal(r1.gamma_A.matrix, r2.gamma_A.matrix)


@settings(max_examples=12)
@given(st.sampled_from(["haar_random", "random-classical", "random-branching"]), st.integers(0, 10**6),
       st.sampled_from(MODES))
def test_copy_register_untouched(name, seed, mode):
    prm = CodeParams(mode=mode)
    rng = np.random.default_rng(seed)
    sigma = canonical_message(random_density(RegisterLayout.of(("M", 2)), rng))
    eta = run_nmc_experiment(adversary_zoo(f"{name}:{seed}", prm), sigma, prm)
    assert np.abs(eta.marginal(["Mh"]).matrix - sigma.marginal(["Mh"]).matrix).max() < 1e-10
    assert abs(np.trace(eta.matrix) - 1) < 1e-10


@pytest.mark.parametrize("spec", ["haar_random:1", "random-branching:2", "swap-with-entangled-half",
                                  "random-classical:4", "pauli:Y@Z"])
def test_stage_comparison(spec):
    prm = CodeParams(mode="ideal-key")
    assert stage_comparison(adversary_zoo(spec, prm), prm).max() < 1e-10


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_avg_to_worst(seed):
    prm = CodeParams(mode="ideal-key")
    adv = adversary_zoo(f"haar_random:{seed}", prm)
    sim = build_simulator(adv, prm)
    eps_avg = nm_check(adv, _epr(), prm, sim).epsilon_measured
    rng = np.random.default_rng(seed)
    for _ in range(3):
        rho = random_pure(RegisterLayout.of(("M", 2)), rng).density()
        eps_w = nm_check(adv, canonical_message(rho), prm, sim).epsilon_measured
        assert eps_w <= 2 * eps_avg + 1e-8


def test_rejection_condition():
    prm = CodeParams(mode="ideal-key")
    adv = adversary_zoo("random-branching:9", prm)
    avg = run_nmc_experiment(adv, _epr(), prm)
    p, st_ = rejection_condition(np.eye(2) / 2, avg)
    assert p == pytest.approx(1.0) and np.abs(st_.matrix - avg.matrix).max() < 1e-14
    rng = np.random.default_rng(10)
    pure = random_pure(RegisterLayout.of(("M", 2)), rng).density()
    p, _ = rejection_condition(pure, avg)
    assert p == pytest.approx(0.5)
    mixed = random_density(RegisterLayout.of(("M", 2)), rng)
    p, cond = rejection_condition(mixed, avg)
    direct = run_nmc_experiment(adv, canonical_message(mixed), prm)
    assert p >= 0.5 - 1e-12
    assert np.abs(cond.matrix - direct.matrix).max() < 1e-9
    with pytest.raises(InvalidParams):
        rejection_condition(np.eye(3) / 3, avg)


def test_classical_zoo_projection():
    prm = CodeParams(mode="ideal-key")
    rng = np.random.default_rng(6)
    f = rng.permutation(1 << prm.ell)
    g = rng.permutation(8)
    adv = adversary_zoo({"name": "classical", "f": f, "g": g}, prm)
    f2, g2 = adv.classical_projection()
    assert np.array_equal(f2, f) and np.array_equal(g2, g)
    u = adv.v.dense()
    assert np.array_equal(np.sort(u.real.sum(axis=0)), np.ones(8)) and set(np.unique(u.real)) <= {0.0, 1.0}


def test_classical_zoo_non_injective_is_valid_instrument():
    prm = CodeParams(mode="ideal-key")
    g = np.array([0, 0, 5, 2, 7, 7, 1, 1])
    adv = adversary_zoo({"name": "classical", "f": np.arange(1 << prm.ell), "g": g}, prm)
    adv.v.validate()
    eta = run_nmc_experiment(adv, _epr(), prm)
    assert abs(np.trace(eta.matrix) - 1) < 1e-12


def test_zoo_determinism_and_errors():
    prm = CodeParams()
    a, b = adversary_zoo("haar_random:11", prm), adversary_zoo("haar_random:11", prm)
    assert np.array_equal(a.v.ops[0], b.v.ops[0]) and np.array_equal(a.shared_state.vector, b.shared_state.vector)
    assert not np.array_equal(a.v.ops[0], adversary_zoo("haar_random:12", prm).v.ops[0])
    with pytest.raises(ValueError):
        adversary_zoo("nope", prm)
    with pytest.raises(ValueError):
        adversary_zoo("pauli:XX@Z", prm)


# --- threshold experiments ----------------------------------------------------


@pytest.mark.parametrize("kn", [(1, 3), (2, 2), (3, 2), (1, 4)])
def test_cross_reconstruction_law_brute_force(kn):
    from qnmlab.extractors import FieldVector, ip_extract, ip_preimage_enumerate

    k, n = kn
    q = 1 << k
    pre = {s: ip_preimage_enumerate(s, k, n) for s in range(q)}
    stay, zero = cross_reconstruction_law(k, n)
    for x in range(q):
        # first half of one sharing of x against the second half of another
        hits = np.zeros(q)
        for (a, _), (_, b) in itertools.product(pre[x], repeat=2):
            hits[ip_extract(a, b)] += 1
        hits /= len(pre[x]) ** 2
        assert stay[x] == pytest.approx(hits[x]) and zero[x] == pytest.approx(hits[0])
    assert isinstance(pre[0][0][0], FieldVector)


def _mode_prm(mode: str) -> NmssParams:
    return NmssParams().with_mode(mode)


@pytest.mark.parametrize("mode", MODES)
def test_nmss_identity(mode):
    prm = _mode_prm(mode)
    res = run_nmss_experiment(adversary_zoo("identity", prm), _epr(), prm)
    assert res.epsilon_measured <= 1e-7
    assert np.abs(res.final_state.matrix - _epr().matrix).max() < 1e-8


def test_nmss_left_tampering_matches_handbuilt_shares():
    prm = _mode_prm("exact-uniform-clifford")
    rng = np.random.default_rng(13)
    sigma = canonical_message(random_density(RegisterLayout.of(("M", 2)), rng))
    adv = adversary_zoo("haar_random:3", prm)
    got = run_nmss_experiment(adv, sigma, prm).final_state.matrix
    # oracle: hand-built share sets for every (y, key), tampered and reconstructed with nmrec
    code = prm.code
    x0 = int_to_bits(12345, code.ell)
    right = tuple(lrshare_2p(bits_to_int(x0), prm.lrss, np.random.default_rng(0)))
    cl = sc_enumerate(code.b)
    want = np.zeros_like(got)
    for y in range(1 << code.m):
        for c, cliff in enumerate(cl):
            z = sigma.conjugate(cliff.dense(), ["M"]).relabel({"M": "Z"})
            yb = int_to_bits(y, code.m)
            cw = SplitStateCodeword(x0, yb, z, c, (x0, yb))
            q = qshare(left_state(cw, prm), prm.shamir).state
            q = q.relabel({f"S_{i}": f"L_{i}" for i in range(1, prm.p + 1)})
            for i, u in adv.unitaries.items():
                q = q.conjugate(u, [f"L_{i}"])
            shares = NmssShareSet(q, right, prm, c, (x0, yb))
            want += nmrec(shares, adv.parties).matrix / ((1 << code.m) * len(cl))
    assert np.abs(got - want).max() < 1e-10


def test_nmss_slot_swap_outside_lowest_pair_is_harmless():
    prm = _mode_prm("ideal-key")
    res = run_nmss_experiment(adversary_zoo("slot-swap:3", prm), _epr(), prm)
    assert res.p_same == pytest.approx(1.0) and res.epsilon_measured <= 1e-7


def test_nmss_slot_swap_inside_lowest_pair():
    prm = _mode_prm("exact-uniform-clifford")
    rng = np.random.default_rng(5)
    sigma = canonical_message(random_density(RegisterLayout.of(("M", 2)), rng))
    res = run_nmss_experiment(adversary_zoo("slot-swap:1", prm), sigma, prm)
    stay, _ = cross_reconstruction_law(prm.code.ell, prm.lrss_N)
    p = float(stay.mean())
    want = p * sigma.matrix + (1 - p) * _mixed_u_sigma(sigma)
    assert np.abs(res.final_state.matrix - want).max() < 1e-12
    assert res.p_same == pytest.approx(p)


def test_nmss_pauli_deterministic():
    prm = _mode_prm("real")
    a = run_nmss_experiment(adversary_zoo("pauli:2", prm), _epr(), prm)
    b = run_nmss_experiment(adversary_zoo("pauli:2", prm), _epr(), prm)
    assert a.epsilon_measured == b.epsilon_measured
    assert np.array_equal(a.final_state.matrix, b.final_state.matrix)
    assert np.abs(a.final_state.marginal(["Mh"]).matrix - np.eye(2) / 2).max() < 1e-10


def test_threshold_checks():
    prm = NmssParams()
    with pytest.raises(InvalidParams):
        run_nmss_experiment(ThresholdAdversary((1, 2)), _epr(), prm)
    with pytest.raises(InvalidParams):
        run_nmss_experiment(ThresholdAdversary((1, 2, 3), {1: np.eye(4)}), _epr(), prm)
    with pytest.raises(InvalidParams):
        run_nmss_experiment(ThresholdAdversary((1, 2, 3), slot_perms={1: {2: 2, 3: 2}}), _epr(), prm)


# --- leakage ------------------------------------------------------------------


def _trivial_w() -> PureState:
    return PureState(np.ones(1), RegisterLayout.of(("W_1", 1), ("W_2", 1)))


def _function_channel(fn, n_in: int, n_out: int) -> Channel:
    kraus = []
    for v in range(n_in):
        k = np.zeros((n_out, n_in))
        k[fn(v), v] = 1.0
        kraus.append(k)
    return Channel(tuple(kraus), RegisterLayout.of(("S_2", n_in), ("W_2", 1)), RegisterLayout.of(("Z", n_out)))


def _classical_leak_oracle(N: int, leak) -> dict[int, float]:
    size = 1 << N
    law = np.zeros((2, size, 2))
    for s in (0, 1):
        pre = [(x, y) for x in range(size) for y in range(size) if bin(x & y).count("1") % 2 == s]
        for x, y in pre:
            law[s, x, leak(y)] += 1 / len(pre)
    gamma = law.mean(axis=0)
    return {s: float(np.abs(law[s] - gamma).sum()) for s in (0, 1)}


def test_constant_leakage_gives_zero():
    prm = LRSSParams(1, 3)
    adv = LeakageAdversary((1,), {2: _function_channel(lambda v: 0, 8, 2)}, _trivial_w(), 1)
    # the colluder's own share alone is correlated with s, so compare with no leakage at all
    none = LeakageAdversary((1,), {2: _function_channel(lambda v: 0, 8, 1)}, _trivial_w(), 0)
    a, b = run_leakage_experiment(adv, 0, prm), run_leakage_experiment(none, 0, prm)
    assert a.distance == pytest.approx(b.distance, abs=1e-15)
    no_coll = LeakageAdversary((), {1: _function_channel(lambda v: 0, 8, 2), 2: _function_channel(lambda v: 1, 8, 2)},
                               _trivial_w(), 1)
    assert run_leakage_experiment(no_coll, 1, prm).distance == pytest.approx(0.0, abs=1e-15)


@pytest.mark.parametrize("leak_name", ["parity", "first", "last"])
def test_leakage_matches_classical_enumeration(leak_name):
    N = 3
    leak = {"parity": lambda y: bin(y).count("1") % 2, "first": lambda y: y >> (N - 1),
            "last": lambda y: y & 1}[leak_name]
    adv = LeakageAdversary((1,), {2: _function_channel(leak, 8, 2)}, _trivial_w(), 1)
    rep = run_leakage_experiment(adv, None, LRSSParams(1, N))
    want = _classical_leak_oracle(N, leak)
    for s in (0, 1):
        assert rep.per_secret[s] == pytest.approx(want[s], abs=1e-14)


def test_entangled_leakage_bounded():
    prm = LRSSParams(1, 3)
    shared = maximally_entangled("W_1", "W_2", 2)
    kraus = []
    h = np.array([[1, 1], [1, -1]]) / np.sqrt(2)
    for y in range(8):
        zgate = np.diag([1, -1]) if y & 1 else np.eye(2)
        rot = h @ zgate
        for out in range(2):
            k = np.zeros((2, 16), dtype=complex)
            proj = rot[out]  # row: <out| H Z^y
            for w in range(2):
                k[out, y * 2 + w] = proj[w]
            kraus.append(k)
    ch = Channel(tuple(kraus), RegisterLayout.of(("S_2", 8), ("W_2", 2)), RegisterLayout.of(("Z", 2)))
    rep = run_leakage_experiment(LeakageAdversary((1,), {2: ch}, shared, 1), 1, prm)
    assert 0.0 <= rep.distance <= 2.0 + 1e-12


def test_leakage_budget_and_structure_checks():
    prm = LRSSParams(1, 3)
    big = LeakageAdversary((1,), {2: _function_channel(lambda v: v, 8, 8)}, _trivial_w(), 1)
    with pytest.raises(InvalidParams):
        run_leakage_experiment(big, 0, prm)
    with pytest.raises(InvalidParams):
        run_leakage_experiment(LeakageAdversary((1, 2), {}, _trivial_w(), 1), 0, prm)
    with pytest.raises(InvalidParams):
        run_leakage_experiment(LeakageAdversary((1,), {}, _trivial_w(), 1), 0, prm)
    with pytest.raises(InvalidParams):
        run_leakage_experiment(LeakageAdversary((1,), {}, _trivial_w(), 1), 0, LRSSParams(1, 3, p=3))


def test_branches_sum_to_experiment():
    prm = CodeParams(mode="real")
    adv = adversary_zoo("random-branching:1", prm)
    same, tamp = nmc_branches(adv, _epr(), prm)
    eta = run_nmc_experiment(adv, _epr(), prm)
    assert np.abs(same.matrix + tamp.matrix - eta.matrix).max() < 1e-14
    assert trace_norm(same.matrix) + trace_norm(tamp.matrix) == pytest.approx(1.0)


def test_non_injective_classical_matches_dephasing_oracle():
    prm = CodeParams(b=1, ell=12, delta=Fraction(1, 12))
    rng = np.random.default_rng(14)
    sigma = canonical_message(random_density(RegisterLayout.of(("M", 2)), rng))
    g = np.array([0, 0, 3, 1])  # (y, z) -> y' * 2 + z'
    f = np.arange(1 << prm.ell)
    adv = adversary_zoo({"name": "classical", "f": f, "g": g}, prm)
    got = run_nmc_experiment(adv, sigma, prm).matrix
    # oracle: the ancilla copy dephases Z, then (y, z) -> g(y, z)
    acc = np.zeros((4, 4), dtype=complex)
    for xv in range(1 << prm.ell):
        xb = int_to_bits(xv, prm.ell)
        for y in range(2):
            c = key_clifford(prm, xb, int_to_bits(y, 1)).dense()
            zst = sigma.conjugate(c, ["M"]).matrix
            for z in range(2):
                proj = np.kron(np.outer(np.eye(2)[z], np.eye(2)[z]), np.eye(2))
                yp, zp = divmod(int(g[y * 2 + z]), 2)
                mv = np.kron(np.outer(np.eye(2)[zp], np.eye(2)[z]), np.eye(2))
                blk = mv @ proj @ zst @ proj @ mv.conj().T
                cw = SplitStateCodeword(xb, int_to_bits(yp, 1), DensityOperator(blk, RegisterLayout.of(("Z", 2), ("Mh", 2))))
                acc += dec(cw, prm).matrix
    acc /= (1 << prm.ell) * 2
    assert np.abs(got - acc).max() < 1e-12
