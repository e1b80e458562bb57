from __future__ import annotations

import inspect
import itertools
import json
import time
from fractions import Fraction

import numpy as np
import pytest

from qnmlab.algebra import algebra_suite, orbit_counts
from qnmlab.cli import main
from qnmlab.extractors import ip_extract, ip_preimage_enumerate
from qnmlab.nmc import CodeParams, dec, enc, privacy_distances, rate_table
from qnmlab.nmss import ClassicalNmssParams, InvalidParams, NmssParams, nmrec, nmrec_classical, nmshare, \
    nmshare_classical, privacy_distance
from qnmlab.pauli_clifford import samp_statistical_distance, sc_enumerate
from qnmlab.qmatrix import Channel, PureState, RegisterLayout, basis_state, random_density, random_pure, \
    trace_distance
from qnmlab.secret_sharing import LRSSParams, QShamirParams, lrrec2, lrss_hybrid_check, \
    lrss_single_share_marginal, qrec, qshare, qshare_operator, weyl_operator
from qnmlab.tamper_harness import LeakageAdversary, adversary_zoo, build_simulator, canonical_message, nm_check, \
    rejection_condition, run_leakage_experiment, run_nmc_experiment, run_nmss_experiment, stage_comparison

IDEAL = ("ideal-key", "exact-uniform-clifford")


def _purified(rng):
    return canonical_message(random_density(RegisterLayout.of(("M", 2)), rng))


def test_criterion_01_algebra_suite(verdict):
    t0 = time.perf_counter()
    res = algebra_suite(1, seed=0, tol=1e-9)
    elapsed = time.perf_counter() - t0
    worst = max(r.residual for r in res)
    ok = all(r.passed for r in res) and elapsed < 30
    assert verdict(1, ok, f"{len(res)} identities, max residual {worst:.2e}, {elapsed:.1f} s")


def test_criterion_02_subgroup(verdict):
    size = len(sc_enumerate(1))
    counts = set(orbit_counts(1).values())
    dist = samp_statistical_distance(1)
    ok = size == 24 and counts == {8} and dist <= 0.25
    assert verdict(2, ok, f"|SC| = {size}, orbit counts {sorted(counts)}, samp distance {dist:.4f}")


def test_criterion_03_nmc_correctness_privacy(verdict):
    rng = np.random.default_rng(3)
    worst_rt = 0.0
    for mode in ("real",) + IDEAL:
        prm = CodeParams(mode=mode)
        for _ in range(20):
            sigma = _purified(rng)
            worst_rt = max(worst_rt, float(np.abs(dec(enc(sigma, prm, rng), prm).matrix - sigma.matrix).max()))
    worst_priv = 0.0
    for mode in IDEAL:
        for _ in range(5):
            worst_priv = max(worst_priv, *privacy_distances(_purified(rng), CodeParams(mode=mode)))
    ok = worst_rt <= 1e-9 and worst_priv <= 1e-8
    assert verdict(3, ok, f"roundtrip error {worst_rt:.1e}, privacy distance {worst_priv:.1e}")


def test_criterion_04_transpose_delay(verdict):
    prm = CodeParams()
    specs = ["haar_random:1", "haar_random:2", "random-branching:3", "random-classical:4", "swap-with-entangled-half"]
    worst = max(stage_comparison(adversary_zoo(s, prm), prm).max() for s in specs)
    assert verdict(4, worst <= 1e-10, f"max entrywise stage difference {worst:.1e} over {len(specs)} adversaries")


def _classical_specs(prm: CodeParams) -> list:
    rng = np.random.default_rng(5)
    nx = 1 << prm.ell
    specs: list = ["identity", "constant-replace", "constant-replace:one", "constant-replace:two"]
    specs += [f"random-classical:{s}" for s in range(6)]
    specs.append({"name": "classical", "f": np.arange(nx), "g": np.array([1, 0, 3, 2, 5, 4, 7, 6])})
    specs.append({"name": "classical", "f": rng.permutation(nx), "g": rng.permutation(8)})
    specs.append({"name": "classical", "f": np.zeros(nx, dtype=int), "g": np.array([0, 0, 1, 1, 2, 2, 3, 3])})
    return specs


def test_criterion_05_average_case_residual(verdict):
    bound = 2 * 4.0**-1
    worst = 0.0
    for mode in IDEAL:
        prm = CodeParams(mode=mode)
        for spec in _classical_specs(prm):
            worst = max(worst, nm_check(adversary_zoo(spec, prm), canonical_message(np.eye(2) / 2), prm)
                        .epsilon_measured)
    message_free = list(inspect.signature(build_simulator).parameters) == ["adv", "prm"]
    prm = CodeParams(mode="ideal-key")
    adv = adversary_zoo("random-classical:9", prm)
    a = nm_check(adv, _purified(np.random.default_rng(0)), prm)
    b = nm_check(adv, canonical_message(np.eye(2) / 2), prm)
    same_sim = a.p_A == b.p_A and np.array_equal(a.gamma_A.matrix, b.gamma_A.matrix)
    ok = worst <= bound + 1e-8 and message_free and same_sim
    assert verdict(5, ok, f"max epsilon {worst:.4f} <= {bound}, simulator message-free: {message_free and same_sim}")


def test_criterion_06_avg_to_worst(verdict):
    prm = CodeParams()
    rng = np.random.default_rng(6)
    specs = [f"haar_random:{s}" for s in range(5)] + [f"random-branching:{s}" for s in range(5)]
    worst_excess, worst_rej, min_p = -np.inf, 0.0, 1.0
    for spec in specs:
        adv = adversary_zoo(spec, prm)
        sim = build_simulator(adv, prm)
        avg_res = nm_check(adv, canonical_message(np.eye(2) / 2), prm, sim)
        for _ in range(5):
            rho = random_pure(RegisterLayout.of(("M", 2)), rng).density()
            res = nm_check(adv, canonical_message(rho), prm, sim)
            worst_excess = max(worst_excess, res.epsilon_measured - 2 * avg_res.epsilon_measured)
            p, cond = rejection_condition(rho, avg_res.final_state)
            min_p = min(min_p, p)
            worst_rej = max(worst_rej, float(np.abs(cond.matrix - res.final_state.matrix).max()))
    ok = worst_excess <= 1e-8 and worst_rej <= 1e-9 and min_p >= 0.5 - 1e-12
    assert verdict(6, ok, f"max(eps_worst - 2 eps_avg) {worst_excess:.3f}, rejection error {worst_rej:.1e}, "
                          f"min success {min_p:.3f}")


def test_criterion_07_rate(verdict):
    rate = rate_table([1e-4])[0].rate
    assert verdict(7, abs(rate - 1 / 11) <= 1e-3, f"rate at delta 1e-4 = {rate:.6f}, 1/11 = {1 / 11:.6f}")


def test_criterion_08_quantum_shamir(verdict):
    prm = QShamirParams(2, 3, 3)
    rng = np.random.default_rng(8)
    sigma = canonical_message(random_density(RegisterLayout.of(("M", 3)), rng), "Mh")
    sh = qshare(sigma, prm)
    rec = max(float(np.abs(qrec(sh, T).matrix - sigma.matrix).max()) for T in itertools.combinations((1, 2, 3), 2))
    zero = qshare(basis_state(RegisterLayout.of(("M", 3)), 0).density(), prm)
    single = max(float(np.abs(zero.marginal([i]).matrix - np.eye(3) / 3).max()) for i in (1, 2, 3))
    pauli = max(float(np.abs(qshare_operator(weyl_operator(3, a, c), prm, [i])).max())
                for a, c in itertools.product(range(3), repeat=2) if (a, c) != (0, 0) for i in (1, 2, 3))
    ent = 0.0
    for _ in range(3):
        joint = random_density(RegisterLayout.of(("E", 2), ("M", 3)), rng)
        shj = qshare(joint, prm)
        for i in (1, 2, 3):
            want = np.kron(np.eye(3) / 3, joint.marginal(["E"]).matrix)
            ent = max(ent, float(np.abs(shj.marginal([i], ["E"]).matrix - want).max()))
    ok = rec <= 1e-10 and single <= 1e-12 and pauli <= 1e-12 and ent <= 1e-10
    assert verdict(8, ok, f"reconstruction {rec:.1e}, single share {single:.1e}, Pauli {pauli:.1e}, "
                          f"entangled {ent:.1e}")


def _leak_channel(fn) -> Channel:
    kraus = []
    for v in range(8):
        k = np.zeros((2, 8))
        k[fn(v), v] = 1.0
        kraus.append(k)
    return Channel(tuple(kraus), RegisterLayout.of(("S_2", 8), ("W_2", 1)), RegisterLayout.of(("Z", 2)))


def test_criterion_09_lrss(verdict):
    k, N = 1, 3
    roundtrip = all(lrrec2(x, y) == s for s in (0, 1) for x, y in ip_preimage_enumerate(s, k, N))
    # single share uniform for each fixed secret
    dev = max(abs(lrss_single_share_marginal(s, k, N).get(x, 0.0) - 1 / 8) for s in (0, 1) for x in range(8))
    uniform = dev <= 1e-12
    # leakage distances against an independent enumeration
    trivial = PureState(np.ones(1), RegisterLayout.of(("W_1", 1), ("W_2", 1)))
    leak_err = 0.0
    for fn in (lambda y: bin(y).count("1") % 2, lambda y: y & 1, lambda y: (y >> 2) & (y & 1)):
        rep = run_leakage_experiment(LeakageAdversary((1,), {2: _leak_channel(fn)}, trivial, 1), None,
                                     LRSSParams(k, N))
        law = np.zeros((2, 8, 2))
        for s in (0, 1):
            pre = [(x, y) for x in range(8) for y in range(8) if bin(x & y).count("1") % 2 == s]
            for x, y in pre:
                law[s, x, fn(y)] += 1 / len(pre)
        gamma = law.mean(axis=0)
        for s in (0, 1):
            leak_err = max(leak_err, abs(rep.per_secret[s] - float(np.abs(law[s] - gamma).sum())))
    hybrid = all(lrss_hybrid_check(s, LRSSParams(k, N, p=3)).passed for s in (0, 1))
    strict = True
    for kw in ({"p": 2}, {"p": 3}):
        try:
            LRSSParams(k, N, strict=True, **kw)
            strict = False
        except InvalidParams:
            pass
    strict = strict and LRSSParams(1, 200, strict=True).satisfies_bound()
    ok = roundtrip and uniform and leak_err <= 1e-12 and hybrid and strict
    verdict(9, ok, f"roundtrip {roundtrip}, single-share max deviation {dev:.4f}, leakage error {leak_err:.1e}, "
                   f"hybrid {hybrid}, strict validator {strict}")
    assert roundtrip and leak_err <= 1e-12 and hybrid and strict
    if not uniform:
        pytest.xfail("a single inner-product share is not uniform for a fixed secret "
                     f"(P(x = 0 | s = 0) = {lrss_single_share_marginal(0, k, N)[0]:.4f}, not 1/8)")


def test_criterion_10_nmss(verdict):
    rng = np.random.default_rng(10)
    corr = 0.0
    for mode in ("real",) + IDEAL:
        prm = NmssParams(3, 3).with_mode(mode)
        for _ in range(3):
            sigma = _purified(rng)
            corr = max(corr, float(np.abs(nmrec(nmshare(sigma, prm, rng), [1, 2, 3]).matrix - sigma.matrix).max()))
    prm = NmssParams(3, 3)
    sigma = _purified(rng)
    priv = max(privacy_distance(sigma, prm, T) for T in itertools.combinations((1, 2, 3), 2))
    ident = max(run_nmss_experiment(adversary_zoo("identity", NmssParams(3, 3).with_mode(m)),
                                    canonical_message(np.eye(2) / 2), NmssParams(3, 3).with_mode(m)).epsilon_measured
                for m in ("real",) + IDEAL)
    classical_ok = nmrec_classical(nmshare_classical(1, ClassicalNmssParams(3, 6, q=7), rng)[:3],
                                   ClassicalNmssParams(3, 6, q=7)) == 1
    try:
        NmssParams(3, 6, q=7)
        quantum_rejects = False
    except InvalidParams:
        quantum_rejects = True
    ok = corr <= 1e-8 and priv <= 1e-7 and ident <= 1e-7 and classical_ok and quantum_rejects
    assert verdict(10, ok, f"correctness {corr:.1e}, privacy {priv:.1e}, identity epsilon {ident:.1e}, "
                           f"p > 2t - 1: classical accepts {classical_ok}, quantum rejects {quantum_rejects}")


def test_criterion_11_determinism(verdict, tmp_path, capsys):
    cfgs = {
        "verify-algebra": {"command": "verify-algebra", "qubits": 1},
        "rate-table": {"command": "rate-table", "deltas": [0.01, 0.05, 0.1]},
        "nmc-run": {"command": "nmc-run", "seed": 7, "mode": "ideal-key",
                    "adversaries": ["identity", "haar_random", "random-classical"]},
        "nmss-run": {"command": "nmss-run", "seed": 7, "mode": "ideal-key", "adversaries": ["identity", "pauli:1"]},
        "lrss-run": {"command": "lrss-run", "seed": 7, "params": {"p": 3, "N": 2}},
        "certify-nmext": {"command": "certify-nmext", "seed": 7},
    }
    same = {}
    for name, cfg in cfgs.items():
        path = tmp_path / f"{name}.json"
        path.write_text(json.dumps(cfg))
        blobs = []
        for run in range(2):
            out = tmp_path / f"{name}-{run}.jsonl"
            code = main([name, "--config", str(path), "--out", str(out)])
            files = sorted(tmp_path.glob(f"{name}-{run}.*"))
            blobs.append((code, [f.read_bytes() for f in files]))
        same[name] = blobs[0] == blobs[1] and blobs[0][0] == 0
    capsys.readouterr()
    ok = all(same.values())
    assert verdict(11, ok, ", ".join(f"{k} {'identical' if v else 'DIFFERS'}" for k, v in same.items()))
