"""Repeated simulate/fit/evaluate sweeps and rate-slope estimation."""

from __future__ import annotations

import time
from typing import Optional

import numpy as np

from polymix.em import EMConfig, fit_em
from polymix.gauss import fit_mixture_gaussian_em, fit_single_gaussian_approx
from polymix.metrics import d_m, metric_d
from polymix.params import MixtureParams
from polymix.simulate import derive_seed, make_setting, simulate
from polymix.spectral import fit_spectral


def parse_algo(token: str):
    """'em:200' -> ('em', {'M': 200}); bare names keep their defaults."""
    name, _, arg = token.partition(":")
    name = name.strip().lower()
    if name not in {"em", "gauss", "spectral"}:
        raise ValueError(f"unknown sweep algorithm {token!r}")
    opts = {}
    if arg:
        opts["M"] = int(arg)
    return name, opts


def _fit_and_eval(name, opts, data, truth: MixtureParams, seed, em_restarts):
    cfg = EMConfig(restarts=em_restarts)
    if name == "em":
        fit = fit_em(data, truth.K, truth.d, atoms_M=opts.get("M", 200),
                     config=cfg, seed=seed, alpha=truth.alpha)
        return metric_d(fit.psi_hat, truth).distance
    if name == "gauss":
        if truth.K == 1:
            theta, _ = fit_single_gaussian_approx(data, truth.d, truth.alpha, seed=seed)
            return d_m(theta, truth.theta[0])[0]
        fit = fit_mixture_gaussian_em(data, truth.K, truth.d, truth.alpha,
                                      config=cfg, seed=seed)
        return metric_d(fit.psi_hat, truth).distance
    if name == "spectral":
        sf = fit_spectral(data, truth.d, float(truth.alpha.sum()), seed=seed)
        return d_m(sf.theta, truth.theta[0])[0]
    raise ValueError(name)


def run_sweep(setting, algo_list, n_list, reps: int, seed: int = 0,
              em_restarts: int = 3):
    """Rows of (algo, n, rep, d_value, wall_time); failures recorded, not fatal.

    The truth is drawn once from the master seed; data are shared across
    algorithms at each (n, rep) and fit seeds fold in the algorithm token so
    every row is independently reconstructible.
    """
    if not algo_list or not n_list:
        raise ValueError("algo_list and n_list must be nonempty")
    algos = [(token, *parse_algo(token)) for token in algo_list]
    truth = make_setting(setting, seed)
    rows = []
    for n in n_list:
        for rep in range(reps):
            data = simulate(truth, int(n), derive_seed(seed, "data", int(n), rep))
            for token, name, opts in algos:
                t0 = time.perf_counter()
                row = {"algo": token, "n": int(n), "rep": rep}
                try:
                    row["d_value"] = float(
                        _fit_and_eval(name, opts, data, truth,
                                      derive_seed(seed, "fit", token, int(n), rep),
                                      em_restarts)
                    )
                    row["error"] = ""
                except Exception as exc:
                    row["d_value"] = float("nan")
                    row["error"] = str(exc)
                row["wall_time"] = time.perf_counter() - t0
                rows.append(row)
    return rows


def rate_slope(rows, algo: Optional[str] = None):
    """Least-squares slope of log(mean error) against log n.

    Returns ``(slope, intercept, stderr)``.  Needs at least 3 distinct n.
    """
    sel = [r for r in rows if (algo is None or r["algo"] == algo) and np.isfinite(r["d_value"])]
    ns = sorted({r["n"] for r in sel})
    if len(ns) < 3:
        raise ValueError("need at least 3 distinct n values")
    logn = np.log(np.asarray(ns, dtype=float))
    logm = np.log([np.mean([r["d_value"] for r in sel if r["n"] == n]) for n in ns])
    A = np.column_stack([logn, np.ones_like(logn)])
    coef, res, _, _ = np.linalg.lstsq(A, logm, rcond=None)
    slope, intercept = float(coef[0]), float(coef[1])
    dof = len(ns) - 2
    if dof > 0 and res.size:
        s2 = float(res[0]) / dof
        sxx = float(np.sum((logn - logn.mean()) ** 2))
        stderr = float(np.sqrt(s2 / sxx))
    else:
        stderr = 0.0
    return slope, intercept, stderr


def summarize(rows):
    """Per (algo, n) mean/median error and counts, sorted for stable output."""
    out = []
    for algo in sorted({r["algo"] for r in rows}):
        for n in sorted({r["n"] for r in rows if r["algo"] == algo}):
            vals = [r["d_value"] for r in rows if r["algo"] == algo and r["n"] == n
                    and np.isfinite(r["d_value"])]
            out.append({
                "algo": algo, "n": n, "mean": float(np.mean(vals)) if vals else float("nan"),
                "median": float(np.median(vals)) if vals else float("nan"),
                "stderr": float(np.std(vals, ddof=1) / np.sqrt(len(vals))) if len(vals) > 1 else 0.0,
                "count": len(vals),
            })
    return out


_SVG_COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]


def write_rate_svg(rows, path: str, width: int = 640, height: int = 480):
    """Self-contained log-log scatter of errors with per-algorithm mean lines."""
    pts = [r for r in rows if np.isfinite(r["d_value"]) and r["d_value"] > 0]
    if not pts:
        raise ValueError("no finite positive errors to plot")
    lx = np.log10([r["n"] for r in pts])
    ly = np.log10([r["d_value"] for r in pts])
    pad = 0.08
    x0, x1 = lx.min(), lx.max()
    y0, y1 = ly.min(), ly.max()
    x0, x1 = x0 - pad * (x1 - x0 + 1e-9), x1 + pad * (x1 - x0 + 1e-9)
    y0, y1 = y0 - pad * (y1 - y0 + 1e-9), y1 + pad * (y1 - y0 + 1e-9)
    ml, mb, mr, mt = 60, 40, 16, 16

    def sx(v):
        return ml + (v - x0) / (x1 - x0) * (width - ml - mr)

    def sy(v):
        return height - mb - (v - y0) / (y1 - y0) * (height - mb - mt)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<line x1="{ml}" y1="{height-mb}" x2="{width-mr}" y2="{height-mb}" stroke="black"/>',
        f'<line x1="{ml}" y1="{mt}" x2="{ml}" y2="{height-mb}" stroke="black"/>',
        f'<text x="{(ml+width-mr)/2}" y="{height-8}" font-size="12" text-anchor="middle">log10 n</text>',
        f'<text x="14" y="{(mt+height-mb)/2}" font-size="12" text-anchor="middle" '
        f'transform="rotate(-90 14 {(mt+height-mb)/2})">log10 error</text>',
    ]
    for tick in np.linspace(x0, x1, 5):
        parts.append(
            f'<text x="{sx(tick):.1f}" y="{height-mb+14}" font-size="10" '
            f'text-anchor="middle">{tick:.2f}</text>'
        )
    for tick in np.linspace(y0, y1, 5):
        parts.append(
            f'<text x="{ml-6}" y="{sy(tick):.1f}" font-size="10" text-anchor="end">{tick:.2f}</text>'
        )
    algos = sorted({r["algo"] for r in pts})
    for ai, algo in enumerate(algos):
        color = _SVG_COLORS[ai % len(_SVG_COLORS)]
        sub = [r for r in pts if r["algo"] == algo]
        for r in sub:
            parts.append(
                f'<circle cx="{sx(np.log10(r["n"])):.1f}" cy="{sy(np.log10(r["d_value"])):.1f}" '
                f'r="2.5" fill="{color}" fill-opacity="0.45"/>'
            )
        line = []
        for s in summarize(sub):
            if np.isfinite(s["mean"]) and s["mean"] > 0:
                line.append(f'{sx(np.log10(s["n"])):.1f},{sy(np.log10(s["mean"])):.1f}')
        if len(line) > 1:
            parts.append(
                f'<polyline points="{" ".join(line)}" fill="none" stroke="{color}" stroke-width="2"/>'
            )
        parts.append(
            f'<text x="{width-mr-6}" y="{mt+14+14*ai}" font-size="12" text-anchor="end" '
            f'fill="{color}">{algo}</text>'
        )
    parts.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(parts))
