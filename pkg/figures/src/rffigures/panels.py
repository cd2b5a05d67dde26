"""Builtin panel specs replicating the paper-style figure set.

Each builder takes the directory holding the primary CSVs and the output
directory, and returns a spec dict for ``render``.  Expected input files
(produced by the rfuniform CLI; see the repository README):

    fig1_noiseless.csv   kernel-limit curves, tau^2 = 0     (fig1a)
    fig1_noisy.csv       kernel-limit curves, tau^2 = 0.1   (fig1b)
    fig1_norm_*.csv      kernel-limit NORM curves           (fig1c)
    fig2_theory.csv      theory lambda-grid at psi1=2.5     (fig2)
    fig2_sim.csv         simulate aggregate                  (fig2)
    fig3_usweep.csv      kernel-limit UNIFORM_AT_NORM       (fig3)
    fig4_sweep.csv       theory --sweep psi1                (fig4a, fig4b)
"""

import os


def _p(base, name):
    return os.path.join(base, name)


def fig1a(data_dir, out_dir):
    src = _p(data_dir, "fig1_noiseless.csv")
    return {
        "kind": "loglog_curves",
        "title": "noiseless kernel regime",
        "series": [
            {"path": src, "x": "psi2", "y": "value", "label": "uniform conv.",
             "filter": {"quantity": "UBAR_ALPHA"}},
            {"path": src, "x": "psi2", "y": "value", "label": "over interpolators",
             "filter": {"quantity": "TBAR_ALPHA"}},
            {"path": src, "x": "psi2", "y": "value", "label": "min-norm risk",
             "filter": {"quantity": "RISK"}},
        ],
        "axes": {"xlabel": "samples / dimension", "ylabel": "bound / risk",
                 "logx": True, "logy": True},
        "guides": [-0.5, -1.0, -2.0],
        "output": _p(out_dir, "fig1a.png"),
    }


def fig1b(data_dir, out_dir):
    src = _p(data_dir, "fig1_noisy.csv")
    spec = fig1a(data_dir, out_dir)
    for s in spec["series"]:
        s["path"] = src
    spec["title"] = "noisy kernel regime"
    spec["guides"] = [0.5]
    spec["output"] = _p(out_dir, "fig1b.png")
    return spec


def fig1c(data_dir, out_dir):
    return {
        "kind": "loglog_curves",
        "title": "minimum interpolation norm",
        "series": [
            {"path": _p(data_dir, "fig1_norm_noisy.csv"), "x": "psi2",
             "y": "value", "label": "noisy"},
            {"path": _p(data_dir, "fig1_norm_noiseless.csv"), "x": "psi2",
             "y": "value", "label": "noiseless"},
        ],
        "axes": {"xlabel": "samples / dimension", "ylabel": "squared norm",
                 "logx": True, "logy": True},
        "guides": [1.0],
        "output": _p(out_dir, "fig1c.png"),
    }


def fig2(data_dir, out_dir):
    theory = _p(data_dir, "fig2_theory.csv")
    sim = _p(data_dir, "fig2_sim.csv")
    return {
        "kind": "norm_value_scatter",
        "title": "finite-size concentration",
        "series": [
            {"path": theory, "role": "theory", "lam": "lambda", "norm": "a_u",
             "value": "ubar", "label": "uniform conv."},
            {"path": sim, "role": "sim", "family": "U", "label": "sup-gap sim"},
            {"path": theory, "role": "theory", "lam": "lambda_t", "norm": "a_t",
             "value": "tbar", "label": "over interpolators"},
            {"path": sim, "role": "sim", "family": "T", "label": "interpolator sim"},
            {"path": theory, "role": "point", "norm": "norm", "value": "risk",
             "label": "min-norm"},
        ],
        "axes": {"xlabel": "squared norm level", "ylabel": "value",
                 "logx": False, "logy": False},
        "guides": [],
        "output": _p(out_dir, "fig2.png"),
    }


def fig3(data_dir, out_dir):
    src = _p(data_dir, "fig3_usweep.csv")
    series = []
    for p in (0.0, 0.25, 0.5, 0.75, 1.0):
        series.append({"path": src, "x": "psi2", "y": "value",
                       "label": f"norm ~ psi2^{p:g}",
                       "filter": {"quantity": f"U_AT_PSI2^{p:g}"}})
    return {
        "kind": "loglog_curves",
        "title": "uniform convergence at growing norm levels",
        "series": series,
        "axes": {"xlabel": "samples / dimension", "ylabel": "bound",
                 "logx": True, "logy": True},
        "guides": [-0.5, -0.25, 0.0, 0.25, 0.5],
        "output": _p(out_dir, "fig3.png"),
    }


def fig4a(data_dir, out_dir):
    src = _p(data_dir, "fig4_sweep.csv")
    return {
        "kind": "loglog_curves",
        "title": "finite width: bounds and risk",
        "series": [
            {"path": src, "x": "psi1", "y": "u_alpha", "label": "uniform conv."},
            {"path": src, "x": "psi1", "y": "t_alpha", "label": "over interpolators"},
            {"path": src, "x": "psi1", "y": "risk", "label": "min-norm risk"},
        ],
        "axes": {"xlabel": "features / dimension", "ylabel": "bound / risk",
                 "logx": True, "logy": True},
        "guides": [],
        "output": _p(out_dir, "fig4a.png"),
    }


def fig4b(data_dir, out_dir):
    src = _p(data_dir, "fig4_sweep.csv")
    return {
        "kind": "loglog_curves",
        "title": "finite width: interpolation norm",
        "series": [
            {"path": src, "x": "psi1", "y": "norm", "label": "squared norm"},
        ],
        "axes": {"xlabel": "features / dimension", "ylabel": "squared norm",
                 "logx": True, "logy": True},
        "guides": [],
        "output": _p(out_dir, "fig4b.png"),
    }


ALL_PANELS = {
    "fig1a": fig1a, "fig1b": fig1b, "fig1c": fig1c, "fig2": fig2,
    "fig3": fig3, "fig4a": fig4a, "fig4b": fig4b,
}
