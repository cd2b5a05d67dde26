"""Render static figure panels from the theory/simulation CSVs.

A panel spec is a JSON object:

    {
      "kind": "loglog_curves" | "norm_value_scatter",
      "series": [...],                  # kind-specific, see below
      "axes": {"xlabel": ..., "ylabel": ..., "logx": true, "logy": true},
      "guides": [-0.5, -1.0],           # dashed x^p reference lines
      "output": "fig1a.png"
    }

loglog_curves series entries:
    {"path": "curves.csv", "x": "psi2", "y": "value",
     "label": "U", "filter": {"quantity": "UBAR_ALPHA"},   # optional
     "subtract": 0.1}                                      # optional

norm_value_scatter series entries (the concentration panel):
    theory: {"path": "theory.csv", "role": "theory",
             "lam": "lambda", "norm": "a_u", "value": "ubar", "label": "U"}
            -- plots the parametric dual curve (norm, value + lam * norm)
    sim:    {"path": "sim.csv", "role": "sim", "family": "U", "label": "U sim"}
            -- one errorbar point per lambda row of the aggregate CSV
    point:  {"path": "theory.csv", "role": "point", "norm": "norm",
             "value": "risk", "label": "min-norm"}

Rendering is a pure function of the CSV contents: fixed figure geometry,
fonts, colors, and stripped volatile metadata, so re-rendering the same
inputs is byte-identical.
"""

import csv
import json
import math
import os

import matplotlib

matplotlib.use("Agg")
matplotlib.rcParams.update({
    "svg.hashsalt": "rffigures",
    "font.family": "DejaVu Sans",
    "figure.figsize": (4.8, 3.6),
    "figure.dpi": 110,
    "savefig.dpi": 110,
})

import matplotlib.pyplot as plt  # noqa: E402


class SchemaMismatch(Exception):
    """A referenced CSV is missing or lacks the documented columns."""


_COLORS = ["#1f77b4", "#d62728", "#e3b505", "#2ca02c", "#9467bd",
           "#8c564b", "#17becf", "#7f7f7f"]


def load_spec(path):
    with open(path) as fh:
        return json.load(fh)


def _read_rows(path, needed):
    if not os.path.exists(path):
        raise SchemaMismatch(f"csv not found: {path}")
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in needed if c not in header]
        if missing:
            raise SchemaMismatch(f"{path} lacks columns {missing}; has {header}")
        return list(reader)


def _series_points(entry):
    xcol, ycol = entry["x"], entry["y"]
    rows = _read_rows(entry["path"], [xcol, ycol])
    flt = entry.get("filter", {})
    sub = float(entry.get("subtract", 0.0))
    pts = []
    for row in rows:
        if any(row[k] != v for k, v in flt.items()):
            continue
        x, y = float(row[xcol]), float(row[ycol]) - sub
        if math.isfinite(x) and math.isfinite(y):
            pts.append((x, y))
    pts.sort()
    return pts


def _draw_guides(ax, guides, xs, ys):
    """Dashed x^p reference lines, anchored near the data's upper-right corner."""
    if not guides or not xs:
        return
    x_hi = max(xs)
    x_lo = x_hi / 10.0
    y_ref = max(abs(y) for y in ys) * 1.3 or 1.0
    grid = [x_lo * (x_hi / x_lo) ** (k / 40.0) for k in range(41)]
    for p in guides:
        c = y_ref / x_hi ** p
        ax.plot(grid, [c * x ** p for x in grid], linestyle="--",
                color="#999999", linewidth=0.9)
        ax.annotate(f"$x^{{{p:g}}}$", (grid[-1], c * grid[-1] ** p),
                    fontsize=7, color="#777777")


def _render_loglog_curves(spec, ax):
    all_x, all_y = [], []
    for i, entry in enumerate(spec["series"]):
        pts = _series_points(entry)
        pos = [(x, y) for x, y in pts if y > 0] if spec["axes"].get("logy") else pts
        if not pos:
            continue
        xs, ys = zip(*pos)
        ax.plot(xs, ys, label=entry.get("label"), color=_COLORS[i % len(_COLORS)],
                linewidth=1.4)
        all_x.extend(xs)
        all_y.extend(ys)
    _draw_guides(ax, spec.get("guides", []), all_x, all_y)


def _render_norm_value_scatter(spec, ax):
    ci = 0
    for entry in spec["series"]:
        role = entry.get("role", "theory")
        if role == "theory":
            rows = _read_rows(entry["path"], [entry["lam"], entry["norm"],
                                              entry["value"]])
            pts = sorted((float(r[entry["norm"]]),
                          float(r[entry["value"]])
                          + float(r[entry["lam"]]) * float(r[entry["norm"]]))
                         for r in rows
                         if math.isfinite(float(r[entry["norm"]])))
            if pts:
                xs, ys = zip(*pts)
                ax.plot(xs, ys, label=entry.get("label"),
                        color=_COLORS[ci % len(_COLORS)], linewidth=1.4)
        elif role == "sim":
            rows = _read_rows(entry["path"],
                              ["family", "norm_mean", "norm_stderr",
                               "value_mean", "value_stderr"])
            rows = [r for r in rows if r["family"] == entry["family"]]
            xs = [float(r["norm_mean"]) for r in rows]
            ys = [float(r["value_mean"]) for r in rows]
            xe = [float(r["norm_stderr"]) for r in rows]
            ye = [float(r["value_stderr"]) for r in rows]
            ax.errorbar(xs, ys, xerr=xe, yerr=ye, fmt="o", markersize=3.5,
                        capsize=2, linewidth=0.9,
                        color=_COLORS[ci % len(_COLORS)],
                        label=entry.get("label"))
        elif role == "point":
            rows = _read_rows(entry["path"], [entry["norm"], entry["value"]])
            ax.plot([float(rows[0][entry["norm"]])],
                    [float(rows[0][entry["value"]])], marker="*",
                    markersize=9, linestyle="none",
                    color=_COLORS[ci % len(_COLORS)], label=entry.get("label"))
        else:
            raise SchemaMismatch(f"unknown series role {role!r}")
        ci += 1


def render(spec):
    """Render one panel; returns the output path."""
    kind = spec.get("kind", "loglog_curves")
    fig, ax = plt.subplots()
    if kind == "loglog_curves":
        _render_loglog_curves(spec, ax)
    elif kind == "norm_value_scatter":
        _render_norm_value_scatter(spec, ax)
    else:
        raise SchemaMismatch(f"unknown panel kind {kind!r}")
    axes = spec.get("axes", {})
    if axes.get("logx"):
        ax.set_xscale("log")
    if axes.get("logy"):
        ax.set_yscale("log")
    ax.set_xlabel(axes.get("xlabel", ""))
    ax.set_ylabel(axes.get("ylabel", ""))
    if spec.get("title"):
        ax.set_title(spec["title"], fontsize=10)
    if any(e.get("label") for e in spec["series"]):
        ax.legend(fontsize=8)
    fig.tight_layout()
    out = spec["output"]
    fmt = os.path.splitext(out)[1].lstrip(".").lower() or "png"
    metadata = {"Software": None} if fmt == "png" else {"Date": None}
    fig.savefig(out, format=fmt, metadata=metadata)
    plt.close(fig)
    return out


def main(argv=None):
    import argparse
    ap = argparse.ArgumentParser(prog="rffigures",
                                 description="render figure panels from CSVs")
    ap.add_argument("specs", nargs="+", help="panel spec JSON files")
    args = ap.parse_args(argv)
    for path in args.specs:
        out = render(load_spec(path))
        print(f"{path} -> {out}")
    return 0
