"""CSV artifact formats for datasets, ellipsoids, outcomes, reports, tables.

All files are plain CSV with `# key=value` header lines in front. Floats are
written with 17 significant digits so a write/read/write cycle is
byte-identical; consumers that want pretty numbers should use the console
renderers instead of these files.
"""

from dataclasses import dataclass

import numpy as np

from .certify import CertificationReport
from .lti import DataSet
from .matops import inv_sqrt_spd
from .synthesis import SynthesisOutcome, TraceRecord
from .uncertainty import MatrixEllipsoid

__all__ = [
    "SweepTable",
    "write_dataset",
    "read_dataset",
    "write_ellipsoid",
    "read_ellipsoid",
    "write_outcome",
    "read_outcome",
    "write_trace",
    "read_trace",
    "write_report",
    "write_table",
    "read_table",
    "format_table",
]


def _fmt(x):
    return format(float(x), ".17g")


def _header_lines(text):
    """Split a file into (header dict, body lines)."""
    meta = {}
    body = []
    for raw in text.splitlines():
        if raw.startswith("#"):
            item = raw[1:].strip()
            if "=" in item:
                key, _, val = item.partition("=")
                meta[key.strip()] = val.strip()
        elif raw.strip():
            body.append(raw)
    return meta, body


def write_dataset(path, data: DataSet):
    with open(path, "w", newline="\n") as fh:
        fh.write("# ddsc-dataset v1\n")
        fh.write(f"# Ts={_fmt(data.Ts)}\n")
        fh.write(f"# eps={_fmt(data.eps)}\n")
        fh.write(f"# seed={int(data.seed)}\n")
        blocks = [("X0", data.X0), ("U0", data.U0), ("X1", data.X1)]
        if data.D0 is not None:
            blocks.append(("D0", data.D0))
        _write_blocks(fh, blocks)


def read_dataset(path) -> DataSet:
    with open(path) as fh:
        meta, body = _header_lines(fh.read())
    mats = _read_blocks(body)
    missing = {"X0", "U0", "X1"} - mats.keys()
    if missing:
        raise ValueError(f"{path}: missing blocks {sorted(missing)}")
    return DataSet(
        X0=mats["X0"],
        U0=mats["U0"],
        X1=mats["X1"],
        Ts=float(meta["Ts"]),
        eps=float(meta["eps"]),
        seed=int(meta["seed"]),
        D0=mats.get("D0"),
    )


def _write_blocks(fh, blocks):
    fh.write("block,row,col,value\n")
    for name, mat in blocks:
        mat = np.atleast_2d(mat)
        for i in range(mat.shape[0]):
            for j in range(mat.shape[1]):
                fh.write(f"{name},{i},{j},{_fmt(mat[i, j])}\n")


def _read_blocks(body):
    out = {}
    for line in body[1:]:
        name, i, j, val = line.split(",")
        out.setdefault(name, {})[(int(i), int(j))] = float(val)
    mats = {}
    for name, cells in out.items():
        rows = 1 + max(i for i, _ in cells)
        cols = 1 + max(j for _, j in cells)
        m = np.zeros((rows, cols))
        for (i, j), v in cells.items():
            m[i, j] = v
        mats[name] = m
    return mats


def write_ellipsoid(path, ell: MatrixEllipsoid):
    with open(path, "w", newline="\n") as fh:
        fh.write("# ddsc-ellipsoid v1\n")
        fh.write(f"# n_z={ell.n_plant_rows}\n# n_x={ell.n_states}\n")
        if ell.log_volume_stat is not None:
            fh.write(f"# logdet={_fmt(ell.log_volume_stat)}\n")
        if ell.fit_gap is not None:
            fh.write(f"# fit_gap={_fmt(ell.fit_gap)}\n")
        # offset is the linear fit variable; center = -metric^{-1} offset
        blocks = [
            ("metric", ell.metric),
            ("offset", -(ell.metric @ ell.center)),
            ("center", ell.center),
        ]
        if ell.multipliers is not None:
            blocks.append(("mult", ell.multipliers.reshape(-1, 1)))
        _write_blocks(fh, blocks)


def read_ellipsoid(path) -> MatrixEllipsoid:
    with open(path) as fh:
        meta, body = _header_lines(fh.read())
    mats = _read_blocks(body)
    metric = 0.5 * (mats["metric"] + mats["metric"].T)
    center = mats["center"]
    if "offset" in mats:
        drift = np.abs(metric @ center + mats["offset"]).max()
        if drift > 1e-9 * max(1.0, np.abs(mats["offset"]).max()):
            raise ValueError(f"{path}: center and offset blocks disagree")
    mult = mats.get("mult")
    return MatrixEllipsoid(
        metric=metric,
        center=center,
        metric_inv_sqrt=inv_sqrt_spd(metric),
        multipliers=None if mult is None else mult.ravel(),
        log_volume_stat=float(meta["logdet"]) if "logdet" in meta else None,
        fit_gap=float(meta["fit_gap"]) if "fit_gap" in meta else None,
    )


def _encode_extra(val):
    if isinstance(val, np.ndarray):
        rows = ";".join(" ".join(_fmt(v) for v in row) for row in np.atleast_2d(val))
        return f"array:{rows}"
    if isinstance(val, bool):
        return f"int:{int(val)}"
    if isinstance(val, (int, np.integer)):
        return f"int:{int(val)}"
    if isinstance(val, (float, np.floating)):
        return f"float:{_fmt(val)}"
    if val is None:
        return "none:"
    return f"str:{val}"


def _decode_extra(text):
    tag, _, payload = text.partition(":")
    if tag == "array":
        return np.array([[float(v) for v in row.split()] for row in payload.split(";")])
    if tag == "int":
        return int(payload)
    if tag == "float":
        return float(payload)
    if tag == "none":
        return None
    return payload


def write_outcome(path, outcome: SynthesisOutcome):
    with open(path, "w", newline="\n") as fh:
        fh.write("# ddsc-outcome v1\n")
        fh.write(f"# status={outcome.status}\n")
        fh.write(f"# mode={outcome.mode}\n")
        if outcome.gamma is not None:
            fh.write(f"# gamma={_fmt(outcome.gamma)}\n")
        if outcome.lam is not None:
            fh.write(f"# lam={_fmt(outcome.lam)}\n")
        for key in sorted(outcome.extras):
            fh.write(f"# extra.{key}={_encode_extra(outcome.extras[key])}\n")
        blocks = []
        if outcome.K is not None:
            blocks.append(("K", outcome.K))
        if outcome.P is not None:
            blocks.append(("P", outcome.P))
        _write_blocks(fh, blocks)


def read_outcome(path) -> SynthesisOutcome:
    with open(path) as fh:
        meta, body = _header_lines(fh.read())
    mats = _read_blocks(body) if body else {}
    extras = {
        key[len("extra.") :]: _decode_extra(val)
        for key, val in meta.items()
        if key.startswith("extra.")
    }
    pattern = extras.get("pattern")
    if pattern is not None:
        extras["pattern"] = pattern.astype(int)
    return SynthesisOutcome(
        status=meta["status"],
        mode=meta["mode"],
        K=mats.get("K"),
        P=mats.get("P"),
        lam=float(meta["lam"]) if "lam" in meta else None,
        gamma=float(meta["gamma"]) if "gamma" in meta else None,
        extras=extras,
    )


def write_trace(path, trace):
    with open(path, "w", newline="\n") as fh:
        fh.write("# ddsc-trace v1\n")
        fh.write("iteration,objective,residual,gamma,margin\n")
        for rec in trace:
            cells = [str(int(rec.iteration))] + [
                "" if v is None else _fmt(v)
                for v in (rec.objective, rec.residual, rec.gamma, rec.margin)
            ]
            fh.write(",".join(cells) + "\n")


def read_trace(path):
    with open(path) as fh:
        _, body = _header_lines(fh.read())
    out = []
    for line in body[1:]:
        it, obj, res, gam, mar = line.split(",")
        vals = [None if v == "" else float(v) for v in (obj, res, gam, mar)]
        out.append(TraceRecord(int(it), *vals))
    return out


def write_report(path, samples_path, report: CertificationReport):
    with open(path, "w", newline="\n") as fh:
        fh.write("# ddsc-report v1\n")
        fh.write(f"hurwitz_truth={int(report.hurwitz_truth)}\n")
        fh.write(f"hurwitz_sampled_fraction={_fmt(report.hurwitz_sampled_fraction)}\n")
        for key in ("true_h2", "true_hinf", "bound_gamma"):
            val = getattr(report, key)
            if val is not None:
                fh.write(f"{key}={_fmt(val)}\n")
        fh.write(f"residual={_fmt(report.residual)}\n")
        fh.write(f"samples={int(report.samples)}\n")
        for key in sorted(report.lmi_margins):
            fh.write(f"margin.{key}={_fmt(report.lmi_margins[key])}\n")
    with open(samples_path, "w", newline="\n") as fh:
        fh.write("# ddsc-report-samples v1\n")
        fh.write("index,abscissa,margin\n")
        for i in range(report.samples):
            a = _fmt(report.member_abscissa[i])
            m = "" if report.member_margin is None else _fmt(report.member_margin[i])
            fh.write(f"{i},{a},{m}\n")


@dataclass
class SweepTable:
    """One synthesis table: rows are design modes, columns axis values.

    The first column is always the exact-plant cell; cells hold either a
    bound (float) or a short status string such as "Infeasible".
    """

    objective: str
    axis: str
    values: list
    seeds: list
    rows: list  # (label, [cell, ...]) pairs

    def columns(self):
        return ["model"] + [f"{self.axis}={_fmt(v)}" for v in self.values]


def write_table(path, table: SweepTable):
    with open(path, "w", newline="\n") as fh:
        fh.write("# ddsc-table v1\n")
        fh.write(f"# objective={table.objective}\n")
        fh.write(f"# axis={table.axis}\n")
        fh.write(f"# seeds={' '.join(str(int(s)) for s in table.seeds)}\n")
        fh.write("# cells=median over seeds\n")
        fh.write("mode," + ",".join(table.columns()) + "\n")
        for label, cells in table.rows:
            rendered = [c if isinstance(c, str) else _fmt(c) for c in cells]
            fh.write(label + "," + ",".join(rendered) + "\n")


def read_table(path) -> SweepTable:
    with open(path) as fh:
        meta, body = _header_lines(fh.read())
    header = body[0].split(",")
    values = [float(col.partition("=")[2]) for col in header[2:]]
    rows = []
    for line in body[1:]:
        cells = line.split(",")
        parsed = []
        for c in cells[1:]:
            try:
                parsed.append(float(c))
            except ValueError:
                parsed.append(c)
        rows.append((cells[0], parsed))
    return SweepTable(
        objective=meta["objective"],
        axis=meta["axis"],
        values=values,
        seeds=[int(s) for s in meta["seeds"].split()],
        rows=rows,
    )


def format_table(table: SweepTable):
    """Aligned text rendering with 4 significant digits."""
    header = ["mode", "model"] + [
        f"{table.axis}={format(float(v), '.4g')}" for v in table.values
    ]
    lines = [header]
    for label, cells in table.rows:
        lines.append(
            [label] + [c if isinstance(c, str) else format(float(c), ".4g") for c in cells]
        )
    widths = [max(len(row[j]) for row in lines) for j in range(len(header))]
    out = []
    for row in lines:
        out.append("  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip())
    return "\n".join(out) + "\n"
