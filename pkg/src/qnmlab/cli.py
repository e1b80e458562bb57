"""Batch front-end.

Exit codes: 0 when every asserted check passes, 2 when a check fails,
1 on usage or configuration errors.  Output is JSON-lines (one record per
experiment or check) plus, for experiment commands, a CSV summary.  All
output is a function of the config and the seed.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Callable, Sequence

import jsonschema
import numpy as np

COMMANDS = ("verify-algebra", "nmc-run", "nmss-run", "lrss-run", "rate-table", "certify-nmext")
RANDOMIZED = ("nmc-run", "nmss-run", "lrss-run", "certify-nmext")
MODES = ("real", "ideal-key", "exact-uniform-clifford")
SEEDED_STRATEGIES = ("haar_random", "random-classical", "random-branching")
CSV_COLUMNS = ("scheme", "adversary", "b", "ell", "delta", "p_same", "p_epr", "p_A", "epsilon_measured", "wall_ms")
U64 = 1 << 64

CONFIG_SCHEMA = {
    "type": "object",
    "properties": {
        "command": {"enum": list(COMMANDS)},
        "params": {"type": "object"},
        "seed": {"type": "integer", "minimum": 0, "maximum": U64 - 1},
        "out": {"type": ["string", "null"]},
        "threads": {"type": "integer", "minimum": 1},
        "mode": {"enum": list(MODES)},
        "strict_params": {"type": "boolean"},
        "timing": {"type": "boolean"},
        "adversaries": {"type": "array", "items": {"type": ["string", "object"]}},
        "messages": {"type": "array", "items": {"type": "string"}},
        "qubits": {"type": "integer", "minimum": 1, "maximum": 2},
        "deltas": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 0.5}},
    },
    "additionalProperties": False,
}


class UsageError(Exception):
    """Bad flags or configuration; maps to exit code 1."""


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        raise UsageError(message)


@dataclass(frozen=True)
class RunConfig:
    command: str
    params: dict = field(default_factory=dict)
    seed: int | None = None
    out: str | None = None
    threads: int = 1
    mode: str | None = None
    strict_params: bool = False
    timing: bool = False
    adversaries: tuple = ()
    messages: tuple[str, ...] = ()
    qubits: int = 1
    deltas: tuple[float, ...] = ()

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        try:
            jsonschema.validate(self.to_json(), CONFIG_SCHEMA)
        except jsonschema.ValidationError as e:
            raise UsageError(f"invalid config: {e.message}") from None
        if self.command in RANDOMIZED and self.seed is None:
            raise UsageError(f"{self.command} needs --seed")

    def to_json(self) -> dict:
        out: dict[str, Any] = {"command": self.command, "params": self.params, "threads": self.threads,
                               "strict_params": self.strict_params, "timing": self.timing,
                               "adversaries": list(self.adversaries), "messages": list(self.messages),
                               "qubits": self.qubits, "deltas": list(self.deltas), "out": self.out}
        if self.seed is not None:
            out["seed"] = self.seed
        if self.mode is not None:
            out["mode"] = self.mode
        return out

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True)

    @classmethod
    def from_json(cls, obj: dict) -> "RunConfig":
        try:
            jsonschema.validate(obj, CONFIG_SCHEMA)
        except jsonschema.ValidationError as e:
            raise UsageError(f"invalid config: {e.message}") from None
        if "command" not in obj:
            raise UsageError("config has no command")
        return cls(obj["command"], dict(obj.get("params", {})), obj.get("seed"), obj.get("out"),
                   int(obj.get("threads", 1)), obj.get("mode"), bool(obj.get("strict_params", False)),
                   bool(obj.get("timing", False)), tuple(obj.get("adversaries", ())),
                   tuple(obj.get("messages", ())), int(obj.get("qubits", 1)),
                   tuple(float(d) for d in obj.get("deltas", ())))

    @classmethod
    def loads(cls, text: str) -> "RunConfig":
        return cls.from_json(json.loads(text))


# ---------------------------------------------------------------------------
# helpers


@dataclass
class Report:
    records: list[dict] = field(default_factory=list)
    rows: list[dict] = field(default_factory=list)
    failures: list[str] = field(default_factory=list)

    def check(self, name: str, ok: bool, **detail) -> None:
        self.records.append({"check": name, "passed": bool(ok), **detail})
        if not ok:
            self.failures.append(name)


def _clean(v: Any) -> Any:
    if isinstance(v, (np.floating, float)):
        return float(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, dict):
        return {str(k): _clean(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_clean(x) for x in v]
    return v


def _derive_seeds(seed: int, count: int) -> list[int]:
    return [int(s) for s in np.random.default_rng(seed).integers(0, 1 << 62, size=count)]


def _seed_specs(specs: Sequence, seed: int) -> list:
    """Give seeded strategies without an explicit seed one derived from the run seed."""
    derived = iter(_derive_seeds(seed, len(specs)))
    out = []
    for s in specs:
        d = next(derived)
        if isinstance(s, str) and s in SEEDED_STRATEGIES:
            s = f"{s}:{d}"
        out.append(s)
    return out


def _spec_name(spec) -> str:
    return spec if isinstance(spec, str) else str(spec.get("name", "custom"))


def _parallel_map(fn: Callable, items: Sequence, threads: int) -> list:
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, items))


def _message(spec: str, b: int, rng: np.random.Generator):
    from .qmatrix import DensityOperator, RegisterLayout, maximally_entangled, random_density, random_pure
    from .tamper_harness import canonical_message

    d = 1 << b
    if spec == "epr":
        return maximally_entangled("M", "Mh", d).density()
    if spec == "mixed":
        return canonical_message(np.eye(d) / d)
    if spec == "random-pure":
        v = random_pure(RegisterLayout.of(("M", d)), rng).vector
        return canonical_message(np.outer(v, v.conj()))
    if spec == "random-mixed":
        return canonical_message(random_density(RegisterLayout.of(("M", d)), rng).matrix)
    raise UsageError(f"unknown message spec {spec!r}")


def _code_params(params: dict, mode: str | None):
    from .nmc import CodeParams

    obj = {"b": 1, "ell": 14, "delta": "1/7", "mode": "real", **params}
    if mode is not None:
        obj["mode"] = mode
    return CodeParams.from_json(obj)


def _timed(cfg: RunConfig, fn: Callable):
    t0 = time.perf_counter()
    out = fn()
    ms = (time.perf_counter() - t0) * 1000.0
    return out, (f"{ms:.1f}" if cfg.timing else "")


# ---------------------------------------------------------------------------
# commands


def cmd_verify_algebra(cfg: RunConfig, rep: Report) -> None:
    from .algebra import algebra_suite, orbit_counts
    from .pauli_clifford import samp_statistical_distance, sc_enumerate

    b = cfg.qubits
    for r in algebra_suite(b, seed=0):
        rep.check(r.name, r.passed, residual=r.residual, tolerance=r.tolerance, b=b)
    size = len(sc_enumerate(b))
    rep.check("sc_size", size == 2 ** (5 * b) - 2 ** (3 * b), value=size, b=b)
    counts = orbit_counts(b)
    want = size // (4**b - 1)
    rep.check("orbit_counts", all(c == want for c in counts.values()),
              values=sorted(set(counts.values())), expected=want, b=b)
    dist = samp_statistical_distance(b)
    rep.check("samp_distance", dist <= 2.0 ** (-2 * b), value=dist, bound=2.0 ** (-2 * b), b=b)


def cmd_rate_table(cfg: RunConfig, rep: Report) -> None:
    from .nmc import rate_table

    deltas = cfg.deltas or (0.01, 0.05, 0.1)
    for row in rate_table(deltas):
        rep.rows.append({"delta": row.delta, "rate": row.rate, "rate_exact": row.rate_exact,
                         "n_over_ell": row.n_over_ell, "b_over_ell": row.b_over_ell})
    rates = [r["rate"] for r in rep.rows]
    rep.check("rate_below_limit", all(r < 1 / 11 + 1e-12 for r in rates), limit=1 / 11)


def _nmc_row(prm, res, ms: str) -> dict:
    return {"scheme": res.metadata["scheme"], "adversary": res.metadata["adversary"], "b": prm.b,
            "ell": prm.ell, "delta": str(prm.delta), "p_same": res.p_same, "p_epr": res.p_epr,
            "p_A": res.p_A, "epsilon_measured": res.epsilon_measured, "wall_ms": ms}


CLASSICAL_STRATEGIES = ("identity", "classical", "random-classical", "constant-replace")


def cmd_nmc_run(cfg: RunConfig, rep: Report) -> None:
    from .tamper_harness import adversary_zoo, build_simulator, nm_check

    prm = _code_params(cfg.params, cfg.mode)
    specs = _seed_specs(cfg.adversaries or ("identity", "pauli:" + "X" * prm.b + "@Z", "random-classical",
                                            "haar_random", "swap-with-entangled-half"), cfg.seed)
    msg_rng = np.random.default_rng(_derive_seeds(cfg.seed, 1)[0] ^ 0x5A5A)
    messages = [(m, _message(m, prm.b, msg_rng)) for m in (cfg.messages or ("epr", "random-pure"))]
    if all(name != "epr" for name, _ in messages):
        messages.insert(0, ("epr", _message("epr", prm.b, msg_rng)))
    bound = 2 * 4.0 ** (-prm.b)

    def one(spec):
        adv = adversary_zoo(spec, prm)
        sim, ms_sim = _timed(cfg, lambda: build_simulator(adv, prm))
        out = []
        for name, sigma in messages:
            res, ms = _timed(cfg, lambda: nm_check(adv, sigma, prm, sim))
            out.append((name, res, ms))
        return spec, out

    for spec, results in _parallel_map(one, specs, cfg.threads):
        base = _spec_name(spec).split(":")[0]
        avg = next(r for n, r, _ in results if n == "epr")
        for name, res, ms in results:
            rec = {"kind": "experiment", "message": name, "mode": prm.mode, **_clean(_nmc_row(prm, res, ms))}
            rep.records.append(rec)
            row = _nmc_row(prm, res, ms)
            row["adversary"] = f"{row['adversary']}|{name}"
            rep.rows.append(row)
            rep.check("epsilon_recomputable", abs(res.recompute_epsilon() - res.epsilon_measured) <= 1e-9,
                      adversary=res.metadata["adversary"], message=name)
            ext = [lab for lab in res.final_state.labels if lab != "M"]
            if ext:
                drift = float(np.abs(res.final_state.marginal(ext).matrix - res.target.marginal(ext).matrix).max())
                rep.check("purification_marginal", drift <= 1e-10, adversary=res.metadata["adversary"],
                          message=name, value=drift)
            if name != "epr":
                rep.check("avg_to_worst", res.epsilon_measured <= (1 << prm.b) * avg.epsilon_measured + 1e-8,
                          adversary=res.metadata["adversary"], message=name,
                          worst=res.epsilon_measured, avg=avg.epsilon_measured)
        if base == "identity":
            rep.check("identity_epsilon", all(r.epsilon_measured <= 1e-8 for _, r, _ in results))
        if prm.ideal and base in CLASSICAL_STRATEGIES:
            rep.check("ideal_classical_residual", avg.epsilon_measured <= bound + 1e-8,
                      adversary=avg.metadata["adversary"], value=avg.epsilon_measured, bound=bound)


def _nmss_params(cfg: RunConfig):
    from .nmss import NmssParams

    obj = {"t": 3, "p": 3, "code": {"b": 1, "ell": 14, "delta": "1/14", "mode": "real"}, **cfg.params}
    if cfg.mode is not None:
        obj["code"] = {**obj["code"], "mode": cfg.mode}
    if cfg.strict_params:
        obj["strict"] = True
    return NmssParams.from_json(obj)


def cmd_nmss_run(cfg: RunConfig, rep: Report) -> None:
    from .nmss import nmrec, nmshare
    from .qmatrix import trace_norm
    from .tamper_harness import adversary_zoo, run_nmss_experiment

    prm = _nmss_params(cfg)
    code = prm.code
    rng = np.random.default_rng(cfg.seed)
    sigma = _message("random-mixed", code.b, rng)
    for trial in range(3):
        shares = nmshare(sigma, prm, rng)
        parties = list(range(1, prm.p + 1))
        out = nmrec(shares, parties, prm).reorder(sigma.labels)
        err = trace_norm(out.matrix - sigma.matrix)
        rep.check("roundtrip", err <= 1e-8, trial=trial, value=err)
    epr = _message("epr", code.b, rng)
    specs = _seed_specs(cfg.adversaries or ("identity", "pauli:1", "slot-swap:1", "haar_random"), cfg.seed)

    def one(spec):
        adv = adversary_zoo(spec, prm)
        res, ms = _timed(cfg, lambda: run_nmss_experiment(adv, epr, prm))
        return adv, res, ms

    for adv, res, ms in _parallel_map(one, specs, cfg.threads):
        row = {"scheme": "nmss", "adversary": adv.name, "b": code.b, "ell": code.ell, "delta": str(code.delta),
               "p_same": res.p_same, "p_epr": res.p_epr, "p_A": res.p_A,
               "epsilon_measured": res.epsilon_measured, "wall_ms": ms}
        rep.rows.append(row)
        rep.records.append({"kind": "experiment", "mode": code.mode, **_clean(row)})
        rep.check("epsilon_recomputable", abs(res.recompute_epsilon() - res.epsilon_measured) <= 1e-9,
                  adversary=adv.name)
        if adv.name == "identity":
            rep.check("identity_epsilon", res.epsilon_measured <= 1e-7, value=res.epsilon_measured)


def cmd_lrss_run(cfg: RunConfig, rep: Report) -> None:
    from .secret_sharing import LRSSParams, lrrec2, lrrec_2p, lrshare2, lrshare_2p, lrss_hybrid_check

    obj = {"b": 1, "N": 3, "ell_leak": 0, "p": 2, **cfg.params}
    if cfg.strict_params:
        obj["strict"] = True
    prm = LRSSParams.from_json(obj)
    rng = np.random.default_rng(cfg.seed)
    q = 1 << prm.b
    for trial in range(8):
        s = int(rng.integers(0, q))
        if prm.p == 2:
            x, y = lrshare2(s, prm, rng)
            got = lrrec2(x, y)
            rep.records.append({"kind": "share", "trial": trial, "secret": s, "shares": [x.to_hex(), y.to_hex()]})
            rep.check("roundtrip", got == s, trial=trial)
        else:
            shares = lrshare_2p(s, prm, rng)
            rep.records.append({"kind": "share", "trial": trial, "secret": s,
                                "shares": [sh.to_json() for sh in shares]})
            ok = all(lrrec_2p([shares[i - 1], shares[j - 1]]) == s
                     for i in range(1, prm.p + 1) for j in range(i + 1, prm.p + 1))
            rep.check("roundtrip", ok, trial=trial)
    rep.records.append({"kind": "share_bound", "satisfied": prm.satisfies_bound(), "share_bits": prm.N * prm.b,
                        "required": prm.required_share_bits(), "strict": prm.strict})
    if prm.p > 2 and prm.N * prm.b * prm.p <= 12:
        for s in range(q):
            h = lrss_hybrid_check(s, prm)
            rep.check("hybrid", h.passed, secret=s, others=h.others_distance,
                      independence=h.mutual_independence_distance)


def cmd_certify_nmext(cfg: RunConfig, rep: Report) -> None:
    from .extractors import ip_descriptor, nmext_certify_classical, search_toy_descriptor

    p = {"kind": "search", "n": 5, "m": 5, "r": 2, "candidates": 8, "tolerance": 1.0, **cfg.params}
    tol = float(p["tolerance"])
    if p["kind"] == "ip":
        res = nmext_certify_classical(ip_descriptor(int(p["k"]), int(p["N"])), tolerance=tol, seed=cfg.seed % (1 << 31))
    elif p["kind"] == "search":
        res = search_toy_descriptor(int(p["n"]), int(p["m"]), int(p["r"]), int(p["candidates"]), cfg.seed % (1 << 31))
        res = replace(res, tolerance=tol, passed=res.certified_epsilon <= tol)
    else:
        raise UsageError(f"unknown extractor kind {p['kind']!r}")
    rep.records.append({"kind": "certification", **_clean(res.to_json())})
    rep.check("certified", res.passed, epsilon=res.certified_epsilon, tolerance=tol)


HANDLERS = {
    "verify-algebra": cmd_verify_algebra,
    "rate-table": cmd_rate_table,
    "nmc-run": cmd_nmc_run,
    "nmss-run": cmd_nmss_run,
    "lrss-run": cmd_lrss_run,
    "certify-nmext": cmd_certify_nmext,
}


# ---------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="qnmlab", description="Quantum non-malleable codes and secret sharing: exact experiments.")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", type=Path, help="JSON run config")
        sp.add_argument("--seed", type=int, help="64-bit seed")
        sp.add_argument("--out", help="JSON-lines output path (CSV summary goes next to it)")
        sp.add_argument("--threads", type=int, help="worker cap")
        sp.add_argument("--mode", choices=MODES)
        sp.add_argument("--strict-params", action="store_true", default=None)
        sp.add_argument("--timing", action="store_true", default=None, help="fill the wall_ms column")
        if name == "verify-algebra":
            sp.add_argument("--qubits", type=int)
        if name == "rate-table":
            sp.add_argument("--deltas", help="comma-separated deltas")
    return ap


def config_from_args(ns: argparse.Namespace) -> RunConfig:
    base: dict = {}
    if ns.config is not None:
        try:
            base = json.loads(ns.config.read_text())
        except (OSError, json.JSONDecodeError) as e:
            raise UsageError(f"cannot read config: {e}") from None
        if not isinstance(base, dict):
            raise UsageError("config must be a JSON object")
        if base.get("command", ns.command) != ns.command:
            raise UsageError(f"config is for {base['command']}, not {ns.command}")
    base["command"] = ns.command
    for key in ("seed", "out", "threads", "mode", "timing"):
        v = getattr(ns, key, None)
        if v is not None:
            base[key] = v
    if ns.strict_params:
        base["strict_params"] = True
    if getattr(ns, "qubits", None) is not None:
        base["qubits"] = ns.qubits
    if getattr(ns, "deltas", None) is not None:
        try:
            base["deltas"] = [float(d) for d in ns.deltas.split(",") if d.strip()]
        except ValueError:
            raise UsageError("--deltas must be comma-separated numbers") from None
    return RunConfig.from_json(base)


def _csv_text(rows: list[dict], columns: Sequence[str]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(columns), lineterminator="\n", extrasaction="ignore")
    w.writeheader()
    for r in rows:
        w.writerow({k: (repr(float(v)) if isinstance(v, (float, np.floating)) else v) for k, v in r.items()})
    return buf.getvalue()


def emit(cfg: RunConfig, rep: Report, stdout) -> None:
    lines = "".join(json.dumps(_clean(r), sort_keys=True) + "\n" for r in rep.records)
    if cfg.command == "rate-table":
        table = _csv_text(rep.rows, ("delta", "rate", "rate_exact", "n_over_ell", "b_over_ell"))
    elif rep.rows:
        table = _csv_text(rep.rows, CSV_COLUMNS)
    else:
        table = ""
    if cfg.out is None:
        stdout.write(table if cfg.command == "rate-table" else lines)
        return
    out = Path(cfg.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    if cfg.command == "rate-table":
        out.write_text(table)
        return
    out.write_text(lines)
    if table:
        out.with_suffix(".csv").write_text(table)


def main(argv: Sequence[str] | None = None) -> int:
    import logging

    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    from .nmc import InvalidParams

    try:
        ns = build_parser().parse_args(argv)
        cfg = config_from_args(ns)
        rep = Report()
        HANDLERS[cfg.command](cfg, rep)
    except (UsageError, InvalidParams, ValueError, KeyError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    emit(cfg, rep, sys.stdout)
    if rep.failures:
        print(f"failed checks: {', '.join(sorted(set(rep.failures)))}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
