"""Grid-figure rendering: metric rows x family columns, one line per
objective, support-set size on a log-scaled x axis.

Rendering is a pure function of the CSV contents and the figure spec:
no clock, no network, fixed style parameters, and a fixed SVG hash salt,
so rerendering the same inputs produces identical bytes.
"""

from __future__ import annotations

import csv
import math
import statistics
from dataclasses import dataclass

import matplotlib
from matplotlib.figure import Figure
from matplotlib.lines import Line2D
from matplotlib.ticker import NullLocator

COLUMNS = ("objective", "family", "d_size", "latent_dim", "seed",
           "metric", "value")

FORMATS = ("svg", "png")

# a fixed palette keeps line colors independent of ambient style state
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
           "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf")

_RC = {
    "svg.hashsalt": "metrics-grid",
    "svg.fonttype": "none",
    "figure.dpi": 100.0,
    "savefig.dpi": "figure",
    "font.family": "DejaVu Sans",
    "font.size": 9.0,
}


class SchemaError(Exception):
    """The CSV does not conform to the metrics schema."""


class UsageError(Exception):
    """A figure-spec field is invalid."""


@dataclass(frozen=True)
class FigureSpec:
    """What to render: the CSV, the output image, and the grid order.

    ``rows`` orders the metric rows and ``cols`` the family columns;
    either may be omitted to take the order of first appearance in the
    CSV.  When given, each must list every metric (or family) the CSV
    contains exactly once, so no cell is silently dropped or repeated.
    """

    csv: str
    out: str
    rows: tuple[str, ...] | None = None
    cols: tuple[str, ...] | None = None

    @property
    def fmt(self) -> str:
        suffix = self.out.rsplit(".", 1)
        if len(suffix) != 2 or suffix[1].lower() not in FORMATS:
            raise UsageError(
                f"output must end in one of {FORMATS}, got {self.out!r}")
        return suffix[1].lower()


def read_records(path: str) -> list[dict]:
    """Parse the CSV, enforcing the exact seven-column schema.

    A zero-byte file parses as an empty record list; a present header
    must match the schema column for column.
    """
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        return []
    header = rows[0]
    for name in COLUMNS:
        if name not in header:
            raise SchemaError(f"missing column {name!r}")
    for name in header:
        if name not in COLUMNS:
            raise SchemaError(f"unknown column {name!r}")
    if header != list(COLUMNS):
        raise SchemaError("columns out of order, expected "
                          + ",".join(COLUMNS))
    out = []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != len(COLUMNS):
            raise SchemaError(
                f"{path}:{lineno}: expected {len(COLUMNS)} fields, "
                f"got {len(row)}")
        try:
            rec = {"objective": row[0], "family": row[1],
                   "d_size": int(row[2]), "latent_dim": int(row[3]),
                   "seed": int(row[4]), "metric": row[5],
                   "value": float(row[6])}
        except ValueError as exc:
            raise SchemaError(f"{path}:{lineno}: {exc}") from None
        if not math.isfinite(rec["value"]):
            raise SchemaError(f"{path}:{lineno}: non-finite value")
        out.append(rec)
    return out


def _ordered_unique(values) -> list:
    seen = {}
    for v in values:
        seen.setdefault(v, None)
    return list(seen)


def _axis_order(requested, present: list, what: str) -> list:
    if requested is None:
        return present
    order = list(requested)
    for name in order:
        if name not in present:
            raise UsageError(f"{what} {name!r} not present in the CSV")
    if len(set(order)) != len(order):
        dup = next(n for n in order if order.count(n) > 1)
        raise UsageError(f"{what} {dup!r} listed twice")
    for name in present:
        if name not in order:
            raise UsageError(
                f"{what} {name!r} is in the CSV but not in the requested "
                f"order; every cell must appear exactly once")
    return order


def _line_table(records: list[dict]) -> dict:
    """{(metric, family, objective): {d_size: {seed: value}}}."""
    table = {}
    dims = {}
    for r in records:
        key = (r["metric"], r["family"], r["objective"])
        dkey = key + (r["d_size"],)
        prev = dims.setdefault(dkey, r["latent_dim"])
        if prev != r["latent_dim"]:
            raise SchemaError(
                f"objective {r['objective']!r} at d_size {r['d_size']} "
                f"mixes latent_dim {prev} and {r['latent_dim']}; filter "
                f"the CSV to one latent_dim per line")
        seeds = table.setdefault(key, {}).setdefault(r["d_size"], {})
        if r["seed"] in seeds:
            raise SchemaError(
                f"duplicate record: objective {r['objective']!r}, family "
                f"{r['family']!r}, metric {r['metric']!r}, d_size "
                f"{r['d_size']}, seed {r['seed']}")
        seeds[r["seed"]] = r["value"]
    return table


def build_figure(spec: FigureSpec):
    """Build the grid figure, or return None for a CSV with no records."""
    records = read_records(spec.csv)
    if not records:
        return None
    metrics = _axis_order(spec.rows,
                          _ordered_unique(r["metric"] for r in records),
                          "metric")
    families = _axis_order(spec.cols,
                           _ordered_unique(r["family"] for r in records),
                           "family")
    objectives = _ordered_unique(r["objective"] for r in records)
    colors = {obj: PALETTE[i % len(PALETTE)]
              for i, obj in enumerate(objectives)}
    table = _line_table(records)
    ticks = sorted({r["d_size"] for r in records})

    with matplotlib.rc_context(_RC):
        fig = Figure(figsize=(3.2 * len(families) + 0.4,
                              2.3 * len(metrics) + 0.7),
                     layout="constrained")
        axs = fig.subplots(len(metrics), len(families), squeeze=False)
        aggregated = False
        for i, metric in enumerate(metrics):
            for j, family in enumerate(families):
                ax = axs[i][j]
                for obj in objectives:
                    cell = table.get((metric, family, obj))
                    if not cell:
                        continue
                    ds = sorted(cell)
                    means, ses = [], []
                    for d in ds:
                        vals = list(cell[d].values())
                        means.append(statistics.mean(vals))
                        ses.append(statistics.stdev(vals)
                                   / math.sqrt(len(vals))
                                   if len(vals) > 1 else 0.0)
                    ax.plot(ds, means, color=colors[obj], marker="o",
                            markersize=3.0, linewidth=1.2)
                    if any(se > 0.0 for se in ses):
                        aggregated = True
                        ax.fill_between(ds,
                                        [m - s for m, s in zip(means, ses)],
                                        [m + s for m, s in zip(means, ses)],
                                        color=colors[obj], alpha=0.2,
                                        linewidth=0.0)
                ax.set_xscale("log")
                ax.set_xticks(ticks, labels=[str(t) for t in ticks])
                ax.xaxis.set_minor_locator(NullLocator())
                ax.grid(True, alpha=0.3)
                if j == 0:
                    ax.set_ylabel(metric)
                if i == 0:
                    ax.set_title(family)
                if i == len(metrics) - 1:
                    ax.set_xlabel("|D|")
        handles = [Line2D([], [], color=colors[obj], marker="o",
                          markersize=3.0, linewidth=1.2, label=obj)
                   for obj in objectives]
        fig.legend(handles=handles, loc="outside upper right",
                   ncols=len(objectives),
                   title="mean over seeds ± 1 SE" if aggregated
                   else None)
    return fig


def render(spec: FigureSpec) -> bool:
    """Write the figure; False means the CSV had no records (no file)."""
    fmt = spec.fmt
    fig = build_figure(spec)
    if fig is None:
        return False
    with matplotlib.rc_context(_RC):
        if fmt == "svg":
            # matplotlib stamps the creation date unless told not to
            fig.savefig(spec.out, format="svg", metadata={"Date": None})
        else:
            fig.savefig(spec.out, format="png")
    return True
