"""Command line front-end: ``qnil <command> --scenario FILE [flags]``.

Exit codes: 0 success, 1 assertion or computation failure, 2 input error,
3 budget exceeded.
"""

from __future__ import annotations

import argparse
import math
import sys

import numpy as np

from .coordspace import basis_vector
from .errors import BudgetExceeded, ParseError, QnilError
from .operators import OperatorTuple, compose
from .quasinil import (
    REFUTED,
    certify_joint,
    jsr_estimate,
    local_radius_sequence,
    uniform_joint_sequence,
)
from .report import Report, write_report
from .scenario import Scenario, load_scenario
from .subspace import (
    OrbitGenParams,
    common_invariant_subspace,
    corollary_subspace,
    weighted_invariant_subspace,
)

COMMANDS = ("analyze", "joint", "subspace", "weighted", "jsr", "paper-example")

EXIT_OK, EXIT_FAIL, EXIT_INPUT, EXIT_BUDGET = 0, 1, 2, 3


def _orbit_params(p: dict) -> OrbitGenParams:
    return OrbitGenParams(depth=p["depth"], rank_tol=p["tol"], truncation_dim=p["dim"], budget=p["budget"])


def _anchor(scn: Scenario, p: dict):
    if not scn.vectors:
        raise ParseError("command needs at least one declared vector", "$.vectors")
    name = p["anchor"] or next(iter(scn.vectors))
    return name, scn.vectors[name]


def _failure(exc: Exception, where: str) -> dict:
    out = {"type": type(exc).__name__, "message": str(exc), "where": where}
    if isinstance(exc, BudgetExceeded):
        out["deepest"] = exc.deepest
    return out


def _analyze(scn, p, rep):
    seqs = {}
    for name in scn.tuple_names:
        op = scn.operators[name]
        for vname, x in scn.vectors.items():
            label = f"{name}@{vname}"
            try:
                seqs[label] = local_radius_sequence(op, x, p["n_max"], norm=p["norm"]).to_json()
            except QnilError as exc:
                rep.failures.append(_failure(exc, label))
    rep.results["sequences"] = seqs


def _joint(scn, p, rep):
    tup = scn.tuple
    out = {}
    for vname, x in scn.vectors.items():
        entry = {}
        try:
            entry["beta"] = uniform_joint_sequence(tup, x, p["depth"], strategy=p["strategy"], budget=p["budget"],
                                                   norm=p["norm"], workers=p["workers"]).to_json()
            entry["verdict"] = certify_joint(tup, x, p["depth"], p["threshold"], mode=p["mode"], count=p["count"],
                                             seed=p["seed"], budget=p["budget"], norm=p["norm"],
                                             workers=p["workers"]).to_json()
        except QnilError as exc:
            rep.failures.append(_failure(exc, vname))
        out[vname] = entry
    rep.results["joint"] = out


def _verdict_for(tup, x, p):
    return certify_joint(tup, x, max(p["depth"], 4), p["threshold"], budget=p["budget"], norm=p["norm"],
                         workers=p["workers"])


def _subspace(scn, p, rep):
    tup = scn.tuple
    vname, y0 = _anchor(scn, p)
    try:
        verdict = _verdict_for(tup, y0, p)
        rep.results["verdict"] = verdict.to_json()
        res = common_invariant_subspace(tup, y0, _orbit_params(p), verdict=verdict, workers=p["workers"])
        rep.results["subspace"] = res.to_json()
    except QnilError as exc:
        rep.failures.append(_failure(exc, vname))


def _weights(spec, n: int, d: int):
    if spec == "ones":
        return [np.ones((d, d))] * n
    if spec == "zeros":
        return [np.zeros((d, d))] * n
    if isinstance(spec, dict):
        rng = np.random.default_rng(spec["random"])
        return [rng.uniform(0, 1, (d, d)) * np.exp(2j * np.pi * rng.uniform(0, 1, (d, d))) for _ in range(n)]
    return [np.array([[complex(*v) if isinstance(v, list) else complex(v) for v in row] for row in m])
            for m in spec]


def _weighted(scn, p, rep):
    tup = scn.tuple
    vname, y0 = _anchor(scn, p)
    block = scn.weighted or {"weights": "ones"}
    if scn.weighted is None:
        rep.warnings.append("scenario has no 'weighted' block; using all-ones weights")
    try:
        verdict = _verdict_for(tup, y0, p)
        rep.results["verdict"] = verdict.to_json()
        if "compare_tuple" in block:
            res = corollary_subspace(tup, scn.resolve_names(block["compare_tuple"]), y0, _orbit_params(p),
                                     verdict=verdict)
        else:
            W = _weights(block["weights"], len(tup), p["dim"])
            res = weighted_invariant_subspace(tup, W, y0, _orbit_params(p), verdict=verdict)
        rep.results["weighted"] = res.to_json()
    except QnilError as exc:
        rep.failures.append(_failure(exc, vname))


def _jsr(scn, p, rep):
    try:
        rep.results["jsr"] = jsr_estimate(scn.tuple, p["dim"], p["jsr_depth"]).to_json()
    except QnilError as exc:
        rep.failures.append(_failure(exc, "jsr"))


def _paper_example(scn, p, rep):
    """Fixed pipeline over the first two tuple members, read as (T1, T2)."""
    if len(scn.tuple_names) < 2:
        raise ParseError("paper-example needs a tuple of at least two operators", "$.tuple")
    T1, T2 = (scn.operators[n] for n in scn.tuple_names[:2])
    pair = OperatorTuple([T1, T2])
    asserts = []
    seqs = {}

    def check(name, passed, detail):
        asserts.append({"name": name, "passed": bool(passed), "detail": detail})

    # shift identities, over the range the decay check below relies on
    bad = []
    for n in range(1, 202):
        img1 = T1.apply(basis_vector(n))
        want1 = {} if n == 1 else {n - 1: 1.0}
        if dict(img1.entries) != want1:
            bad.append(f"T1 e_{n}")
        img2 = T2.apply(basis_vector(n))
        if dict(img2.entries) != {n + 1: complex(1.0 / n)}:
            bad.append(f"T2 e_{n}")
    check("shift definitions T1 e_n = e_(n-1), T2 e_n = e_(n+1)/n for n <= 201", not bad,
          "ok" if not bad else "mismatch at " + ", ".join(bad[:5]))

    for label, op, rate in (("T1T2", compose(T1, T2), lambda k: 1.0 / k),
                            ("T2T1", compose(T2, T1), lambda k: 1.0 / (k - 1))):
        worst = 0.0
        for k in range(2, 7):
            s = local_radius_sequence(op, basis_vector(k), 50)
            seqs[f"{label}@e{k}"] = s.to_json()
            worst = max(worst, max(abs(r - rate(k)) for r in s.roots))
        check(f"r_n({label}, e_k) eigen-identity, k=2..6, n<=50", worst <= 1e-12, f"max abs error {worst:.3g}")

    ok = True
    for k in range(2, 7):
        s = local_radius_sequence(T1, basis_vector(k), k + 3)
        ok &= all(s[n].exact_zero for n in range(k, k + 4)) and not s[k - 1].exact_zero
    check("T1^n e_k = 0 exactly for n >= k", ok, "ok" if ok else "unexpected support")

    s = local_radius_sequence(T2, basis_vector(2), 200)
    seqs["T2@e2"] = s.to_json()
    oracle = math.exp((math.lgamma(2) - math.lgamma(202)) / 200)
    r200 = s[200].root
    decreasing = all(s[n + 1].root < s[n].root for n in range(5, 200))
    check("r_200(T2, e_2) <= 0.02, decreasing for n >= 5, matches Gamma oracle",
          r200 <= 0.02 and decreasing and abs(r200 - oracle) <= 1e-10 * oracle,
          f"r_200={r200:.6g} oracle={oracle:.6g} decreasing={decreasing}")

    v = certify_joint(pair, basis_vector(3), p["depth"], p["threshold"], budget=p["budget"], workers=p["workers"])
    rep.results["verdict_e3"] = v.to_json()
    alternating = v.witness is not None and all(a != b for a, b in zip(v.witness, v.witness[1:]))
    check(f"joint verdict at e_3 (depth {p['depth']}, threshold {p['threshold']}) refuted with alternating witness",
          v.status == REFUTED and alternating, f"status={v.status} witness={v.witness}")

    rep.results["sequences"] = seqs
    rep.results["assertions"] = asserts
    for a in asserts:
        if not a["passed"]:
            rep.failures.append({"type": "AssertionFailed", "message": a["detail"], "where": a["name"]})


_DISPATCH = {
    "analyze": _analyze,
    "joint": _joint,
    "subspace": _subspace,
    "weighted": _weighted,
    "jsr": _jsr,
    "paper-example": _paper_example,
}


def run_command(cmd: str, scenario: Scenario, overrides: dict | None = None) -> Report:
    if cmd not in _DISPATCH:
        raise ParseError(f"unknown command {cmd!r}", "command")
    params = dict(scenario.params)
    for k, v in (overrides or {}).items():
        if v is not None:
            params[k] = v
    rep = Report(scenario=scenario.name, command=cmd, input_digest=scenario.digest, params=params)
    _DISPATCH[cmd](scenario, params, rep)
    return rep


def exit_status(rep: Report) -> int:
    if any(f["type"] == "BudgetExceeded" for f in rep.failures):
        return EXIT_BUDGET
    return EXIT_FAIL if rep.failures else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="qnil", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--scenario", required=True, help="scenario JSON path or builtin:<name>")
    ap.add_argument("--depth", type=int)
    ap.add_argument("--dim", type=int)
    ap.add_argument("--tol", type=float)
    ap.add_argument("--budget", type=int)
    ap.add_argument("--strategy", help="exact, pruned or beam:<width>")
    ap.add_argument("--seed", type=int)
    ap.add_argument("--threshold", type=float)
    ap.add_argument("--n-max", dest="n_max", type=int)
    ap.add_argument("--workers", type=int)
    ap.add_argument("--out", default="-", help="output file (json/text) or directory (csv); '-' is stdout")
    ap.add_argument("--format", choices=("json", "csv", "text"), default="json")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    overrides = {k: getattr(args, k) for k in
                 ("depth", "dim", "tol", "budget", "strategy", "seed", "threshold", "n_max", "workers")}
    try:
        scn = load_scenario(args.scenario)
        rep = run_command(args.command, scn, overrides)
        write_report(rep, args.format, args.out)
    except ParseError as exc:
        print(f"qnil: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except BudgetExceeded as exc:
        print(f"qnil: budget exceeded: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except QnilError as exc:
        print(f"qnil: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL
    return exit_status(rep)


if __name__ == "__main__":
    sys.exit(main())
