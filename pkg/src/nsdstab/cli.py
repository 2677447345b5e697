"""Command-line surface: certify, weights, falsify, simulate, pair.

Every run prints a human-readable summary to stdout and emits a JSON
report (to --out, or appended to stdout).  Reports embed the full
effective configuration; reruns with the same inputs and seed reproduce
the report byte for byte apart from the timestamp field.

Exit codes: 0 success / certified, 1 usage or input error, 2 refuted by
counterexample, 3 inconclusive (certify) or no feasible pairing (pair).
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from datetime import datetime, timezone

import numpy as np

from . import dstab, pairing, sim, vl, weights
from .core import DocumentError, read_gain_document

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_REFUTED = 2
EXIT_INCONCLUSIVE = 3


def _timestamp():
    return datetime.now(timezone.utc).isoformat()


def _emit(report: dict, out_path: str | None):
    text = json.dumps(report, sort_keys=True, indent=2)
    if out_path:
        with open(out_path, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
        print(f"report written to {out_path}")
    else:
        print(text)


def _read(path: str) -> str:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise DocumentError(f"cannot read {path}: {exc}") from exc


def _selection_entry(sel, verdict):
    entry = {
        "blocks": list(sel.blocks),
        "kappa": list(sel.kappa),
        "status": verdict.status,
        "best_margin": verdict.best_margin,
        "upper_bound": verdict.upper_bound,
    }
    if verdict.certificate is not None:
        entry["diagonal"] = [float(x) for x in verdict.certificate.diagonal]
        entry["margin"] = verdict.certificate.margin
    return entry


def _counterexample_entry(ce):
    if ce is None:
        return None
    return {
        "scaling": [list(map(float, row)) for row in ce.scaling.epsilons],
        "active_blocks": list(ce.active.blocks),
        "active_columns": [list(cols) for cols in ce.active.columns],
        "eigenvalue": [ce.offending_eigenvalue.real, ce.offending_eigenvalue.imag],
        "sample_index": ce.sample_index,
    }


def _witness_entry(w):
    return {
        "scaling": w["scaling"],
        "gammas": w["gammas"],
        "column_scales": w["column_scales"],
        "lyapunov_margin": w["lyapunov_margin"],
        "spectrum": [[z.real, z.imag] for z in w["spectrum"]],
    }


def _sampler(args) -> dstab.SamplerConfig:
    return dstab.SamplerConfig(
        count=args.samples,
        zero_probability=args.zero_prob,
        magnitude_range=(args.mag_min, args.mag_max),
        seed=args.seed,
    )


def _sampler_config_dict(args):
    return {
        "samples": args.samples,
        "zero_probability": args.zero_prob,
        "magnitude_range": [args.mag_min, args.mag_max],
        "seed": args.seed,
    }


def cmd_certify(args) -> int:
    gain, mixing = read_gain_document(_read(args.input))
    report = dstab.full_certify(
        gain,
        mixing,
        tol=args.tol,
        budget=args.budget,
        sampler=_sampler(args),
        eig_tol=args.eig_tol,
        witness_samples=args.witness_samples,
        threads=_threads(),
    )
    doc = {
        "command": "certify",
        "config": {
            "input": args.input,
            "tol": args.tol,
            "budget": args.budget,
            "eig_tol": args.eig_tol,
            "witness_samples": args.witness_samples,
            **_sampler_config_dict(args),
        },
        "timestamp": _timestamp(),
        "verdict": report.verdict,
        "individual_vl": {
            "overall": vl.overall_status(report.verdicts),
            "selections": [
                _selection_entry(s, v) for s, v in report.verdicts.items()
            ],
        },
        "witnesses": [_witness_entry(w) for w in report.witnesses],
        "falsification": {
            "checked": report.falsification.checked,
            "marginal": report.falsification.marginal_count,
            "counterexample": _counterexample_entry(report.falsification.counterexample),
        },
        "theorem_conflict": report.theorem_conflict,
    }
    print(f"verdict: {report.verdict}")
    print(f"individual certificates: {vl.overall_status(report.verdicts)}")
    print(
        f"falsification: {report.falsification.checked} samples, "
        f"{report.falsification.marginal_count} marginal, counterexample "
        f"{'found' if report.falsification.counterexample else 'none'}"
    )
    _emit(doc, args.out)
    if report.verdict == dstab.VERDICT_REFUTED:
        return EXIT_REFUTED
    if report.verdict == dstab.VERDICT_CERTIFIED:
        return EXIT_OK
    return EXIT_INCONCLUSIVE


def _load_weight_problem(path):
    try:
        obj = json.loads(_read(path))
    except json.JSONDecodeError as exc:
        raise DocumentError(f"invalid JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise DocumentError("weight problem document must be a JSON object")
    for key in ("partition", "ratios"):
        if key not in obj:
            raise DocumentError(f"weight problem missing field '{key}'")
    try:
        partition = tuple(int(p) for p in obj["partition"])
        lambdas = obj.get("lambdas", 1.0)
        if isinstance(lambdas, (int, float)):
            n_sel = math.prod(partition)
            lam = np.full((len(partition), n_sel), float(lambdas))
        else:
            lam = np.asarray(lambdas, dtype=float)
        problem = weights.WeightProblem(partition, lam, tuple(obj["ratios"]))
        base = float(obj.get("base", 1.0))
    except (TypeError, ValueError) as exc:
        raise DocumentError(str(exc)) from exc
    return problem, base


def cmd_weights(args) -> int:
    problem, base = _load_weight_problem(args.input)
    system = weights.construct_weights(problem, base)
    error = weights.verify_ratios(system, problem)
    payoffs = [
        [weights.payoff(system, problem, g, j) for j in range(1, p + 1)]
        for g, p in enumerate(problem.partition, start=1)
    ]
    doc = {
        "command": "weights",
        "config": {"input": args.input, "base": base},
        "timestamp": _timestamp(),
        "partition": list(problem.partition),
        "gammas": [float(g) for g in system.gammas],
        "payoffs": payoffs,
        "max_ratio_error": error,
    }
    print(f"{system.gammas.size} strictly positive weights, max ratio error {error:.3e}")
    _emit(doc, args.out)
    return EXIT_OK


def cmd_falsify(args) -> int:
    gain, mixing = read_gain_document(_read(args.input))
    outcome = dstab.falsify_scan(gain, mixing, _sampler(args), args.eig_tol)
    doc = {
        "command": "falsify",
        "config": {
            "input": args.input,
            "eig_tol": args.eig_tol,
            **_sampler_config_dict(args),
        },
        "timestamp": _timestamp(),
        "checked": outcome.checked,
        "marginal": outcome.marginal_count,
        "counterexample": _counterexample_entry(outcome.counterexample),
    }
    if outcome.counterexample is None:
        print(f"no counterexample in {outcome.checked} samples "
              f"({outcome.marginal_count} marginal)")
    else:
        ce = outcome.counterexample
        print(
            f"counterexample at sample {ce.sample_index}: eigenvalue "
            f"{ce.offending_eigenvalue:.6g}, active blocks {list(ce.active.blocks)}"
        )
    _emit(doc, args.out)
    return EXIT_OK if outcome.counterexample is None else EXIT_REFUTED


def _parse_eta_grid(text):
    if text is None:
        return None
    if ":" in text:
        try:
            hi, lo, count = text.split(":")
            grid = np.logspace(
                np.log10(float(hi)), np.log10(float(lo)), int(count)
            )
        except ValueError as exc:
            raise DocumentError(f"bad eta grid '{text}': {exc}") from exc
        return grid
    try:
        return np.asarray([float(v) for v in text.split(",")], dtype=float)
    except ValueError as exc:
        raise DocumentError(f"bad eta grid '{text}': {exc}") from exc


def cmd_simulate(args) -> int:
    plant, kbar = sim.read_plant_document(_read(args.input))
    if args.kbar is not None:
        try:
            obj = json.loads(_read(args.kbar))
            kbar = np.asarray(obj["Kbar"], dtype=float).reshape(plant.n, plant.m)
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise DocumentError(f"bad Kbar document: {exc}") from exc
    if kbar is None:
        raise DocumentError("no Kbar: provide it in the plant document or via --kbar")

    sweep = sim.eta_threshold(plant, kbar, _parse_eta_grid(args.eta_grid))
    x0 = np.ones(plant.m) if args.x0 is None else np.asarray(
        [float(v) for v in args.x0.split(",")]
    )
    z0 = np.zeros(plant.q) if args.z0 is None else np.asarray(
        [float(v) for v in args.z0.split(",")]
    )
    trajectory = sim.simulate(plant, kbar, args.eta, x0, z0, args.horizon, args.step)
    qss = None
    if not trajectory.diverged:
        try:
            qss = sim.quasi_steady_state_check(plant, kbar, args.eta, trajectory)
        except ValueError:
            qss = None

    doc = {
        "command": "simulate",
        "config": {
            "input": args.input,
            "eta": args.eta,
            "horizon": args.horizon,
            "step": args.step,
            "eta_grid": [float(v) for v in sweep.grid],
            "kbar": [float(v) for v in np.asarray(kbar).ravel()],
            "x0": [float(v) for v in x0],
            "z0": [float(v) for v in z0],
        },
        "timestamp": _timestamp(),
        "reduced_hurwitz": sweep.reduced_hurwitz,
        "reduced_margin": sweep.reduced_margin,
        "stable": [bool(s) for s in sweep.stable],
        "threshold": sweep.threshold,
        "stable_suffix": sweep.stable_suffix,
        "consistent": sweep.consistent,
        "convergence": trajectory.convergence,
        "diverged": trajectory.diverged,
        "quasi_steady_state_deviation": qss,
    }
    if sweep.stable.all():
        print("closed loop stable at all grid eta")
    elif not sweep.reduced_hurwitz:
        print("unstable reduced model: no small-eta stability guarantee")
    else:
        print(f"largest stable grid eta: {sweep.threshold}")
    print(f"final/initial state norm ratio: {trajectory.convergence:.3e}")
    if args.trajectory_out:
        with open(args.trajectory_out, "w", encoding="utf-8") as fh:
            fh.write(sim.trajectory_csv(trajectory))
        print(f"trajectory written to {args.trajectory_out}")
    _emit(doc, args.out)
    return EXIT_OK


def cmd_pair(args) -> int:
    gain, _ = read_gain_document(_read(args.input))
    reports, truncated = pairing.rank_pairings(
        gain.entries, cap=args.cap, tol=args.tol, budget=args.budget
    )
    doc = {
        "command": "pair",
        "config": {
            "input": args.input,
            "cap": args.cap,
            "tol": args.tol,
            "budget": args.budget,
        },
        "timestamp": _timestamp(),
        "total_assignments": pairing.surjection_count(*gain.entries.shape),
        "truncated": truncated,
        "reports": [
            {
                "assignment": list(r.assignment.outputs),
                "verdict": r.verdict,
                "margin": r.margin,
                "heuristic": r.heuristic,
            }
            for r in reports
        ],
    }
    feasible = [r for r in reports if r.verdict == pairing.PAIRING_CERTIFIED]
    print(f"{len(reports)} pairings evaluated ({len(feasible)} certified)")
    for r in reports[:5]:
        print(f"  {list(r.assignment.outputs)}  {r.verdict}  margin {r.margin:.6g}")
    _emit(doc, args.out)
    return EXIT_OK if feasible else EXIT_INCONCLUSIVE


def _threads():
    try:
        return max(1, int(os.environ.get("NSDSTAB_THREADS", "1")))
    except ValueError:
        return 1


def _add_sampler_flags(p):
    p.add_argument("--samples", type=int, default=dstab.SamplerConfig.count,
                   help="falsification sample count")
    p.add_argument("--zero-prob", type=float, default=dstab.SamplerConfig.zero_probability,
                   help="probability of zeroing each scaling entry")
    p.add_argument("--mag-min", type=float, default=dstab.SamplerConfig.magnitude_range[0])
    p.add_argument("--mag-max", type=float, default=dstab.SamplerConfig.magnitude_range[1])
    p.add_argument("--seed", type=int, default=dstab.SamplerConfig.seed)
    p.add_argument("--eig-tol", type=float, default=None,
                   help="absolute eigenvalue threshold; default scales -1e-9 by the matrix norm")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nsdstab",
        description="certify extended D-stability of non-square gain matrices, "
        "construct combinatorial weights, falsify, simulate and rank pairings",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("certify", help="run the full certification pipeline")
    p.add_argument("input", help="gain-system document (JSON)")
    p.add_argument("--tol", type=float, default=vl.DEFAULT_TOL)
    p.add_argument("--budget", type=int, default=vl.DEFAULT_BUDGET)
    p.add_argument("--witness-samples", type=int, default=5)
    _add_sampler_flags(p)
    p.add_argument("--out", help="write the JSON report here")
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("weights", help="construct combinatorial weights")
    p.add_argument("input", help="weight-problem document (JSON)")
    p.add_argument("--out", help="write the JSON report here")
    p.set_defaults(func=cmd_weights)

    p = sub.add_parser("falsify", help="randomized counterexample search")
    p.add_argument("input", help="gain-system document (JSON)")
    _add_sampler_flags(p)
    p.add_argument("--out", help="write the JSON report here")
    p.set_defaults(func=cmd_falsify)

    p = sub.add_parser("simulate", help="closed-loop simulation and eta sweep")
    p.add_argument("input", help="plant document (JSON)")
    p.add_argument("--kbar", help="JSON file with an n-by-m 'Kbar' matrix")
    p.add_argument("--eta", type=float, default=1e-2)
    p.add_argument("--horizon", type=float, default=50.0)
    p.add_argument("--step", type=float, default=None)
    p.add_argument("--x0", help="comma-separated initial integral state")
    p.add_argument("--z0", help="comma-separated initial plant state")
    p.add_argument("--eta-grid", help="either 'hi:lo:count' (log) or comma list")
    p.add_argument("--trajectory-out", help="write the trajectory CSV here")
    p.add_argument("--out", help="write the JSON report here")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("pair", help="enumerate and rank input-output pairings")
    p.add_argument("input", help="gain-system document (JSON)")
    p.add_argument("--cap", type=int, default=pairing.DEFAULT_CAP)
    p.add_argument("--tol", type=float, default=vl.DEFAULT_TOL)
    p.add_argument("--budget", type=int, default=vl.DEFAULT_BUDGET)
    p.add_argument("--out", help="write the JSON report here")
    p.set_defaults(func=cmd_pair)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    try:
        return args.func(args)
    except (DocumentError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
