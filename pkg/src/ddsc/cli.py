"""Command-line pipeline: collect, fit, synthesize, certify, sweep, norms.

Every command takes a scenario file and an output directory and writes plain
CSV artifacts there. Exit codes: 0 success, 2 infeasible, 3 no convergence,
1 usage or data errors.
"""

import argparse
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from statistics import median

import numpy as np

from . import fileio
from .certify import certify_robust, h2_norm, hinf_norm, structural_residual
from .errors import DdscError
from .lti import simulate_collect
from .scenario import parse_scenario
from .synthesis import (
    baseline_xdiag,
    h2_structured,
    hinf_structured,
    stabilize_structured,
)
from .uncertainty import fit_min_ellipsoid, point_ellipsoid

__all__ = ["main", "run_scenario", "run_sweep"]

_EXIT = {"ok": 0, "infeasible": 2, "no-convergence": 3}


def _g4(x):
    return "-" if x is None else format(float(x), ".4g")


def _ellipsoid_for(scn, seed=None):
    """Membership set for one run: fitted from data, or the exact plant."""
    if scn.mode == "model-based-point-ellipsoid":
        return None, point_ellipsoid(scn.plant.A, scn.plant.B)
    cfg = scn.data if seed is None else replace(scn.data, seed=seed)
    data = simulate_collect(scn.plant, cfg)
    return data, fit_min_ellipsoid(data, scn.plant.G)


def _synthesize(scn, ell, baseline=None):
    C, D, G, H = scn.channels()
    use_baseline = scn.mode == "baseline-xdiag" if baseline is None else baseline
    if use_baseline:
        kw = {}
        if scn.objective != "stabilize":
            kw = {"C": C, "D": D, "G": G}
        if scn.objective == "hinf":
            kw["H"] = H
        return baseline_xdiag(ell, scn.pattern, scn.objective, cfg=scn.algo, **kw)
    if scn.objective == "stabilize":
        return stabilize_structured(ell, scn.pattern, scn.algo)
    if scn.objective == "h2":
        return h2_structured(ell, C, D, G, scn.pattern, scn.algo)
    return hinf_structured(ell, C, D, G, H, scn.pattern, scn.algo)


def run_scenario(scn, out_dir, want_report=True, samples=1000):
    """One full pipeline run. Returns (exit code, summary line, outcome)."""
    os.makedirs(out_dir, exist_ok=True)
    data, ell = _ellipsoid_for(scn)
    if data is not None:
        fileio.write_dataset(os.path.join(out_dir, "dataset.csv"), data)
    fileio.write_ellipsoid(os.path.join(out_dir, "ellipsoid.csv"), ell)

    outcome = _synthesize(scn, ell)
    fileio.write_outcome(os.path.join(out_dir, "outcome.csv"), outcome)
    fileio.write_trace(os.path.join(out_dir, "trace.csv"), outcome.trace)

    residual = None
    fraction = None
    if outcome.ok:
        residual = structural_residual(outcome.K, scn.pattern)
        if want_report:
            channels = None if scn.objective == "stabilize" else scn.channels()
            report = certify_robust(
                ell, outcome, scn.objective, channels=channels,
                samples=samples, seed=scn.data.seed,
            )
            fileio.write_report(
                os.path.join(out_dir, "report.txt"),
                os.path.join(out_dir, "report_samples.csv"),
                report,
            )
            fraction = report.hurwitz_sampled_fraction

    summary = (
        f"status={outcome.status} mode={outcome.mode} gamma={_g4(outcome.gamma)} "
        f"residual={_g4(residual)} certified={_g4(fraction)}"
    )
    return _EXIT[outcome.status], summary, outcome


def _sweep_cell(scn, baseline, axis, value, seed):
    """One (design row, axis value, seed) pipeline; never raises on data."""
    if axis == "eps":
        data_cfg = replace(scn.data, eps=float(value), seed=seed)
    else:
        data_cfg = replace(scn.data, T=int(value), seed=seed)
    cell_scn = replace(scn, data=data_cfg, mode="data-driven")
    try:
        _, ell = _ellipsoid_for(cell_scn, seed=seed)
        outcome = _synthesize(cell_scn, ell, baseline=baseline)
    except DdscError:
        return "no-convergence", None
    return outcome.status, outcome.gamma


def _cell_text(results):
    """Collapse per-seed (status, gamma) pairs into one table cell."""
    gammas = [g for s, g in results if s == "ok" and g is not None]
    if gammas:
        return float(median(gammas))
    if all(s == "infeasible" for s, _ in results):
        return "Infeasible"
    return "NoConv"


def run_sweep(scn, out_dir, jobs=1):
    """Median-over-seeds table across one axis, exact-plant column first."""
    if scn.sweep_axis is None:
        raise DdscError("scenario has no sweep.eps or sweep.T values")
    if scn.objective not in ("h2", "hinf"):
        raise DdscError("sweeps compare bounds; use objective h2 or hinf")
    os.makedirs(out_dir, exist_ok=True)
    axis, values, seeds = scn.sweep_axis, scn.sweep_values, scn.sweep_seeds

    rows = [("structured", False), ("xdiag", True)]
    _, point = _ellipsoid_for(replace(scn, mode="model-based-point-ellipsoid"))

    def model_cell(baseline):
        out = _synthesize(scn, point, baseline=baseline)
        return [(out.status, out.gamma)]

    tasks = {}
    with ThreadPoolExecutor(max_workers=max(1, jobs)) as pool:
        for label, baseline in rows:
            tasks[label, "model"] = pool.submit(model_cell, baseline)
            for v in values:
                for seed in seeds:
                    tasks[label, v, seed] = pool.submit(
                        _sweep_cell, scn, baseline, axis, v, seed
                    )
        table_rows = []
        for label, baseline in rows:
            cells = [_cell_text(tasks[label, "model"].result())]
            for v in values:
                cells.append(
                    _cell_text([tasks[label, v, seed].result() for seed in seeds])
                )
            table_rows.append((label, cells))

    table = fileio.SweepTable(
        objective=scn.objective,
        axis=axis,
        values=list(values),
        seeds=list(seeds),
        rows=table_rows,
    )
    fileio.write_table(os.path.join(out_dir, "table.csv"), table)
    text = fileio.format_table(table)
    with open(os.path.join(out_dir, "table.txt"), "w", newline="\n") as fh:
        fh.write(text)
    return table, text


def _cmd_collect(scn, out_dir, args):
    os.makedirs(out_dir, exist_ok=True)
    data = simulate_collect(scn.plant, scn.data)
    fileio.write_dataset(os.path.join(out_dir, "dataset.csv"), data)
    print(f"collected T={data.n_samples} samples (eps={_g4(data.eps)}, seed={data.seed})")
    return 0


def _cmd_ellipsoid(scn, out_dir, args):
    os.makedirs(out_dir, exist_ok=True)
    data, ell = _ellipsoid_for(scn)
    if data is not None:
        fileio.write_dataset(os.path.join(out_dir, "dataset.csv"), data)
    fileio.write_ellipsoid(os.path.join(out_dir, "ellipsoid.csv"), ell)
    gap = "-" if ell.fit_gap is None else format(ell.fit_gap, ".4g")
    print(f"ellipsoid n_z={ell.n_plant_rows} fit_gap={gap}")
    return 0


def _cmd_synth(scn, out_dir, args):
    code, summary, _ = run_scenario(scn, out_dir, want_report=False)
    print(summary)
    return code


def _cmd_certify(scn, out_dir, args):
    code, summary, _ = run_scenario(scn, out_dir, want_report=True)
    print(summary)
    return code


def _cmd_norms(scn, out_dir, args):
    code, summary, outcome = run_scenario(scn, out_dir, want_report=False)
    print(summary)
    if not outcome.ok:
        return code
    lines = []
    if outcome.gamma is not None:
        lines.append(("bound_gamma", outcome.gamma))
    if not np.any(scn.plant.H != 0.0):
        lines.append(("true_h2", h2_norm(scn.plant, outcome.K)))
    lines.append(("true_hinf", hinf_norm(scn.plant, outcome.K)))
    with open(os.path.join(out_dir, "norms.txt"), "w", newline="\n") as fh:
        fh.write("# ddsc-norms v1\n")
        for key, val in lines:
            fh.write(f"{key}={format(float(val), '.17g')}\n")
    for key, val in lines:
        print(f"{key}={format(float(val), '.4g')}")
    return code


def _cmd_sweep(scn, out_dir, args):
    _, text = run_sweep(scn, out_dir, jobs=args.jobs)
    print(text, end="")
    return 0


_COMMANDS = {
    "collect": _cmd_collect,
    "ellipsoid": _cmd_ellipsoid,
    "synth": _cmd_synth,
    "certify": _cmd_certify,
    "sweep": _cmd_sweep,
    "norms": _cmd_norms,
}


class _Parser(argparse.ArgumentParser):
    # usage problems are exit code 1; argparse's default of 2 collides with
    # the "infeasible" status code
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _build_parser():
    parser = _Parser(prog="ddsc", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in _COMMANDS.items():
        p = sub.add_parser(name, help=fn.__doc__)
        p.add_argument("--scenario", required=True, help="scenario file path")
        p.add_argument("--out", default="ddsc-out", help="artifact directory")
        p.add_argument("--seed", type=int, default=None, help="override data.seed")
        p.add_argument("--jobs", type=int, default=1, help="parallel sweep cells")
        p.add_argument(
            "--mode",
            choices=["data", "model", "baseline"],
            default=None,
            help="override the scenario mode",
        )
    return parser


def main(argv=None):
    args = _build_parser().parse_args(argv)
    try:
        scn = parse_scenario(args.scenario)
        if args.seed is not None:
            scn = replace(scn, data=replace(scn.data, seed=args.seed))
        if args.mode is not None:
            long_mode = {
                "data": "data-driven",
                "model": "model-based-point-ellipsoid",
                "baseline": "baseline-xdiag",
            }[args.mode]
            scn = replace(scn, mode=long_mode)
        return _COMMANDS[args.command](scn, args.out, args)
    except (DdscError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
