"""Command-line entry point: simulate / fit / eval / select / sweep / geom-check.

Exit codes: 0 success, 1 usage error, 2 runtime error.  All randomness flows
from --seed; every JSON output embeds {tool_version, seed, invocation}.
"""

from __future__ import annotations

import argparse
import json
import os
import shlex
import sys

import numpy as np

import polymix
from polymix import kernels
from polymix.em import EMConfig, fit_em
from polymix.gauss import fit_mixture_gaussian_em, fit_single_gaussian_approx
from polymix.geometry import PolytopeSet, check_assumption_a, check_total_exposure
from polymix.io import (
    DataFormatError,
    load_params_json,
    read_dataset_csv,
    write_dataset_csv,
    write_params_json,
)
from polymix.metrics import infer_bound_envelope, kl_upper_bound, metric_d
from polymix.mcmc import PriorSpec, run_gimh
from polymix.params import FitResult, MixtureParams
from polymix.select import select_grid
from polymix.simulate import make_setting, simulate
from polymix.spectral import fit_spectral
from polymix.sweep import rate_slope, run_sweep, summarize, write_rate_svg


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _provenance(args) -> dict:
    return {
        "tool_version": polymix.__version__,
        "seed": getattr(args, "seed", None),
        "invocation": shlex.join(sys.argv[1:]) if sys.argv[1:] else "",
    }


def _parse_alpha(text: str, d: int) -> np.ndarray:
    vals = [float(v) for v in str(text).split(",")]
    if len(vals) == 1:
        return np.full(d, vals[0])
    if len(vals) != d:
        raise UsageError(f"--alpha needs 1 or d={d} values")
    return np.asarray(vals)


def _parse_range(text: str):
    if ":" in text:
        lo, hi = text.split(":")
        return list(range(int(lo), int(hi) + 1))
    return [int(v) for v in text.split(",")]


def _write_json(doc: dict, path: str | None):
    payload = json.dumps(doc, indent=1)
    if path:
        with open(path, "w") as fh:
            fh.write(payload + "\n")
    else:
        print(payload)


def _cmd_simulate(args):
    psi = make_setting(args.setting, args.seed)
    data = simulate(psi, args.n, args.seed)
    write_dataset_csv(data, args.out, args.latents)
    if args.params:
        write_params_json(psi, args.params, _provenance(args))
    return 0


def _fit_result_doc(args, fit: FitResult) -> dict:
    doc = _provenance(args)
    doc["psi_hat"] = fit.psi_hat.to_dict()
    doc["diagnostics"] = {
        "objective_trace": np.asarray(fit.objective_trace).tolist(),
        "iterations": fit.iterations,
        "converged": fit.converged,
        "restarts_used": fit.restarts_used,
        "wall_time": fit.wall_time,
    }
    return doc


def _cmd_fit(args):
    data = read_dataset_csv(args.data)
    alpha = _parse_alpha(args.alpha, args.d)
    cfg = EMConfig(restarts=args.restarts)
    if args.algo == "em":
        fit = fit_em(data, args.K, args.d, atoms_M=args.M, config=cfg,
                     seed=args.seed, alpha=alpha)
        doc = _fit_result_doc(args, fit)
    elif args.algo == "gauss":
        if args.K == 1:
            theta, sigma2 = fit_single_gaussian_approx(data, args.d, alpha, seed=args.seed)
            psi = MixtureParams(theta[None], np.array([1.0]), np.array([sigma2]), alpha)
            doc = _provenance(args)
            doc["psi_hat"] = psi.to_dict()
        else:
            fit = fit_mixture_gaussian_em(data, args.K, args.d, alpha, config=cfg,
                                          seed=args.seed)
            doc = _fit_result_doc(args, fit)
    elif args.algo == "spectral":
        abar = args.abar if args.abar is not None else float(alpha.sum())
        sf = fit_spectral(data, args.d, abar, seed=args.seed)
        psi = MixtureParams(sf.theta[None], np.array([1.0]),
                            np.array([max(sf.sigma2, 1e-12)]), sf.alpha)
        doc = _provenance(args)
        doc["psi_hat"] = psi.to_dict()
    elif args.algo == "gimh":
        prior = PriorSpec(**json.load(open(args.prior))) if args.prior else PriorSpec()
        samples, diag = run_gimh(
            data, args.K, args.d, prior, n_iter=args.iters, burn_in=args.burnin,
            thin=args.thin, atoms_M=args.M_mc, seed=args.seed, alpha=alpha,
        )
        doc = _provenance(args)
        doc["psi_hat"] = diag["posterior_mean"].to_dict()
        doc["diagnostics"] = {
            "acceptance_rate": diag["acceptance_rate"],
            "n_retained": diag["n_retained"],
        }
        if args.chain:
            with open(args.chain, "w") as fh:
                for psi in samples:
                    fh.write(json.dumps(psi.to_dict()) + "\n")
    else:
        raise UsageError(f"unknown algorithm {args.algo!r}")
    _write_json(doc, args.out)
    return 0


def _cmd_eval(args):
    truth = load_params_json(args.truth)
    est = load_params_json(args.est)
    report = metric_d(est, truth)
    doc = _provenance(args)
    doc.update(report.to_dict())
    # KL bound at this distance; the compact envelope is inferred from the
    # supplied pair, which the output flags explicitly
    diam_T, diam_S, smin = infer_bound_envelope(est, truth)
    if diam_T > 0 and smin > 0:
        doc["kl_bound"] = {
            "value": kl_upper_bound(report.distance, truth.D, diam_T,
                                    max(diam_S, 1e-12), smin),
            "diam_T": diam_T,
            "diam_S": diam_S,
            "sigma_min2": smin,
            "envelope_inferred_from_pair": True,
        }
    _write_json(doc, args.out)
    return 0


def _cmd_select(args):
    data = read_dataset_csv(args.data)
    from polymix.simulate import derive_seed

    all_runs = []
    for rep in range(max(1, args.reps)):
        cells, _ = select_grid(
            data, _parse_range(args.K), _parse_range(args.d), atoms_M=args.M,
            M_loglik=args.M_loglik, config=EMConfig(restarts=args.restarts),
            seed=derive_seed(args.seed, "rep", rep), alpha_value=args.alpha,
        )
        all_runs.append(cells)
    # aggregate replicates per cell: mean scores, converged = all replicates
    cells = []
    for i in range(len(all_runs[0])):
        group = [run[i] for run in all_runs]
        cells.append({
            "K": group[0]["K"],
            "d": group[0]["d"],
            "bic": float(np.mean([c["bic"] for c in group])),
            "loglik": float(np.mean([c["loglik"] for c in group])),
            "converged": all(c["converged"] for c in group),
        })
    valid = [c for c in cells if np.isfinite(c["bic"])]
    if not valid:
        raise ValueError("every grid cell failed to fit")
    best = min(valid, key=lambda c: (c["bic"], c["K"], c["d"]))
    with open(args.out, "w") as fh:
        fh.write("K,d,bic,loglik,converged\n")
        for c in cells:
            fh.write(f'{c["K"]},{c["d"]},{c["bic"]:.17g},{c["loglik"]:.17g},{int(c["converged"])}\n')
    print(json.dumps({**_provenance(args), "best_K": best["K"], "best_d": best["d"]}))
    return 0


def _cmd_sweep(args):
    rows = run_sweep(
        args.setting, args.algos.split(","), [int(v) for v in args.n.split(",")],
        reps=args.reps, seed=args.seed, em_restarts=args.restarts,
    )
    with open(args.out, "w") as fh:
        fh.write("algo,n,rep,d_value,wall_time,error\n")
        for r in rows:
            fh.write(f'{r["algo"]},{r["n"]},{r["rep"]},{r["d_value"]:.17g},'
                     f'{r["wall_time"]:.6g},{r["error"]}\n')
    if args.svg:
        write_rate_svg(rows, args.svg)
    summary = {"summary": summarize(rows)}
    for algo in sorted({r["algo"] for r in rows}):
        try:
            slope, intercept, stderr = rate_slope(rows, algo)
            summary[f"slope[{algo}]"] = {"slope": slope, "intercept": intercept,
                                         "stderr": stderr}
        except ValueError:
            pass
    print(json.dumps({**_provenance(args), **summary}))
    return 0


def _cmd_geom_check(args):
    psi = load_params_json(args.params)
    ps = PolytopeSet(psi.theta, tol=args.tol)
    ok_a, reports_a = check_assumption_a(ps)
    ok_e, reports_e = check_total_exposure(ps)
    doc = _provenance(args)
    doc.update({
        "assumption_A": bool(ok_a),
        "totally_exposed": bool(ok_e),
        "violations": [
            {"kind": "coincident_affine_hulls", **{k: list(v) if isinstance(v, tuple) else v
                                                   for k, v in r.items()}}
            for r in reports_a if r["equal_hulls"]
        ] + [
            {"kind": "not_exposed", **r} for r in reports_e
        ],
    })
    _write_json(doc, None)
    return 0


def build_parser() -> _Parser:
    p = _Parser(prog="polymix", description=__doc__)
    p.add_argument("--threads", type=int, default=None,
                   help="worker threads for the compiled kernels "
                        "(default: POLYMIX_THREADS or logical cores)")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="draw a dataset from a canonical setting")
    s.add_argument("--setting", required=True)
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.add_argument("--latents", default=None)
    s.add_argument("--params", default=None)
    s.set_defaults(func=_cmd_simulate)

    s = sub.add_parser("fit", help="fit a model to a dataset CSV")
    s.add_argument("--algo", required=True, choices=["em", "gauss", "spectral", "gimh"])
    s.add_argument("--data", required=True)
    s.add_argument("--K", type=int, default=1)
    s.add_argument("--d", type=int, required=True)
    s.add_argument("--M", type=int, default=200, help="atom count for the em fitter")
    s.add_argument("--restarts", type=int, default=10)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--alpha", default="1.0")
    s.add_argument("--abar", type=float, default=None)
    s.add_argument("--iters", type=int, default=20000)
    s.add_argument("--burnin", type=int, default=15000)
    s.add_argument("--thin", type=int, default=100)
    s.add_argument("--M-mc", dest="M_mc", type=int, default=20,
                   help="latent draws per likelihood estimate (gimh)")
    s.add_argument("--prior", default=None)
    s.add_argument("--chain", default=None, help="JSON-lines path for retained gimh samples")
    s.add_argument("--out", required=True)
    s.set_defaults(func=_cmd_fit)

    s = sub.add_parser("eval", help="matched distance between two parameter files")
    s.add_argument("--truth", required=True)
    s.add_argument("--est", required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", default=None)
    s.set_defaults(func=_cmd_eval)

    s = sub.add_parser("select", help="BIC grid over K and d")
    s.add_argument("--data", required=True)
    s.add_argument("--K", required=True, help="range like 1:5 or list 1,2,3")
    s.add_argument("--d", required=True)
    s.add_argument("--M", type=int, default=200)
    s.add_argument("--M-loglik", dest="M_loglik", type=int, default=1000)
    s.add_argument("--restarts", type=int, default=4)
    s.add_argument("--reps", type=int, default=1)
    s.add_argument("--alpha", type=float, default=1.0)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=_cmd_select)

    s = sub.add_parser("sweep", help="simulate/fit/eval over an n-grid")
    s.add_argument("--setting", required=True)
    s.add_argument("--algos", required=True, help="comma list, e.g. em:200,gauss")
    s.add_argument("--n", required=True, help="comma list of sample sizes")
    s.add_argument("--reps", type=int, default=1)
    s.add_argument("--restarts", type=int, default=3)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.add_argument("--svg", default=None)
    s.set_defaults(func=_cmd_sweep)

    s = sub.add_parser("geom-check", help="identifiability predicates for a parameter file")
    s.add_argument("--params", required=True)
    s.add_argument("--tol", type=float, default=None)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=_cmd_geom_check)
    return p


def dispatch(argv) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        threads = args.threads
        if threads is None:
            threads = int(os.environ.get("POLYMIX_THREADS", os.cpu_count() or 1))
        kernels.set_num_threads(threads)
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (DataFormatError, OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
