"""Command-line entry point: theory/simulation runs to deterministic CSVs.

A run is configured by an INI file (sections [params], [grids], [sim],
[run]) plus flag overrides; flags win.  ``--paper-defaults
fig1|fig2|fig3|fig4`` injects the published parameter sets.  Exit codes:
0 success, 2 configuration error, 3 numerical failure.  Every CSV has a
header row, fixed column order, and floats at 17 significant digits
(round-trip exact).  Schemas:

    theory         lambda, lambda_bar, ubar, a_u, lambda_t, tbar, a_t,
                   risk, norm
    theory --sweep psi1
                   psi1, u_alpha, t_alpha, risk, norm
    simulate       family, lambda, count, norm_mean, norm_stderr,
                   value_mean, value_stderr        (+ a sibling
                   *_replicates.csv: family, lambda, replicate, seed,
                   norm_sq, value)
    powerlaw       quantity, slope, intercept, r_squared, window_lo,
                   window_hi, n_points, n_excluded
    kernel-limit   quantity, psi2, value, finite_width_coeff, rel_residual
    logdet-check   d, replicate, seed, lambda, u, G_re, G_im, g_re, g_im,
                   abs_diff
    compare        family, lambda, coordinate, sim_mean, sim_stderr,
                   theory, z, passed, degenerate_stderr
"""

import argparse
import configparser
import csv
import math
import os
import sys
from dataclasses import dataclass, field, replace

import numpy as np

from . import analysis, asymptotics, simulator
from .activation import activation_by_name, centered
from .asymptotics import ModelParams
from .errors import ConfigInvalid, RFUniformError


def _fmt(x):
    if isinstance(x, float):
        return f"{x:.17g}"
    return str(x)


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(x) for x in row])


@dataclass
class GridSpec:
    lo: float
    hi: float
    count: int
    log: bool = False

    def values(self):
        if self.count < 2:
            raise ConfigInvalid(f"grid count must be >= 2, got {self.count}")
        if self.log:
            if self.lo <= 0:
                raise ConfigInvalid("log grid needs positive endpoints")
            return list(np.geomspace(self.lo, self.hi, self.count))
        return list(np.linspace(self.lo, self.hi, self.count))


@dataclass
class RunConfig:
    psi1: float = 2.5
    psi2: float = 1.5
    f1_sq: float = 1.0
    tau_sq: float = 0.0
    activation: str = "shifted_relu"
    quad_order: int = 200
    lambda_grid: GridSpec = field(default_factory=lambda: GridSpec(0.426, 2.0, 8))
    lambda_grid_t: GridSpec = None          # defaults to lambda_grid
    psi1_grid: GridSpec = field(default_factory=lambda: GridSpec(10.0, 1e4, 12, log=True))
    psi2_grid: GridSpec = field(default_factory=lambda: GridSpec(1e2, 1e4, 16, log=True))
    d: int = 200
    N: int = 500
    n: int = 300
    replicates: int = 20
    base_seed: int = 0
    alpha: float = 1.5
    norm_powers: tuple = (0.0, 0.25, 0.5, 0.75, 1.0)
    output: str = "rfuniform_out.csv"

    def model_params(self, psi1=None, psi2=None):
        prof = centered(activation_by_name(self.activation, self.quad_order))
        return ModelParams(psi1 if psi1 is not None else self.psi1,
                           psi2 if psi2 is not None else self.psi2,
                           self.f1_sq, self.tau_sq, prof)

    def sim_model_params(self):
        # the simulator compares against realized ratios N/d, n/d
        return replace(self, psi1=self.N / self.d, psi2=self.n / self.d).model_params()


PAPER_DEFAULTS = {
    # kernel-regime power laws; panels b/c override tau_sq=0.1 via flags
    "fig1": dict(activation="shifted_relu", f1_sq=1.0, tau_sq=0.0, alpha=1.5,
                 psi2_grid=GridSpec(1e2, 1e4, 16, log=True)),
    # finite-size concentration at N=500, n=300, d=200
    "fig2": dict(activation="relu", f1_sq=1.0, tau_sq=0.0, psi1=2.5, psi2=1.5,
                 d=200, N=500, n=300, replicates=20, base_seed=0,
                 lambda_grid=GridSpec(0.426, 2.0, 8),
                 lambda_grid_t=GridSpec(0.21, 2.0, 8)),
    # norm-ball size growing as psi2^p
    "fig3": dict(activation="shifted_relu", f1_sq=1.0, tau_sq=0.1, alpha=1.5,
                 psi2_grid=GridSpec(1e2, 1e4, 16, log=True),
                 norm_powers=(0.0, 0.25, 0.5, 0.75, 1.0)),
    # finite-width approach to the kernel limit at psi2 = 1.5
    "fig4": dict(activation="shifted_relu", f1_sq=1.0, tau_sq=0.1, alpha=1.5,
                 psi2=1.5, psi1_grid=GridSpec(10.0, 1e4, 12, log=True)),
}


def _parse_grid(section, prefix):
    lo = section.getfloat(f"{prefix}_min")
    hi = section.getfloat(f"{prefix}_max")
    count = section.getint(f"{prefix}_count")
    log = section.getboolean(f"{prefix}_log", fallback=False)
    if lo is None or hi is None or count is None:
        raise ConfigInvalid(f"incomplete grid spec for {prefix!r}")
    return GridSpec(lo, hi, count, log)


def load_config(path=None, preset=None, overrides=()):
    cfg = RunConfig()
    if preset is not None:
        if preset not in PAPER_DEFAULTS:
            raise ConfigInvalid(f"unknown preset {preset!r}")
        cfg = replace(cfg, **PAPER_DEFAULTS[preset])
    if path is not None:
        parser = configparser.ConfigParser()
        parser.optionxform = str          # keep N/n distinct
        if not parser.read(path):
            raise ConfigInvalid(f"cannot read config file {path!r}")
        p = parser["params"] if parser.has_section("params") else {}
        for key in ("psi1", "psi2", "f1_sq", "tau_sq"):
            if key in p:
                cfg = replace(cfg, **{key: float(p[key])})
        if "activation" in p:
            cfg = replace(cfg, activation=p["activation"])
        if "quad_order" in p:
            cfg = replace(cfg, quad_order=int(p["quad_order"]))
        if parser.has_section("grids"):
            g = parser["grids"]
            for prefix, attr in (("lambda", "lambda_grid"),
                                 ("lambda_t", "lambda_grid_t"),
                                 ("psi1", "psi1_grid"), ("psi2", "psi2_grid")):
                if f"{prefix}_min" in g:
                    cfg = replace(cfg, **{attr: _parse_grid(g, prefix)})
        if parser.has_section("sim"):
            s = parser["sim"]
            for key in ("d", "N", "n", "replicates", "base_seed"):
                if key in s:
                    cfg = replace(cfg, **{key: int(s[key])})
        if parser.has_section("run"):
            r = parser["run"]
            if "alpha" in r:
                cfg = replace(cfg, alpha=float(r["alpha"]))
            if "output" in r:
                cfg = replace(cfg, output=r["output"])
    for item in overrides:
        if "=" not in item:
            raise ConfigInvalid(f"override {item!r} is not key=value")
        key, val = item.split("=", 1)
        if not hasattr(cfg, key):
            raise ConfigInvalid(f"unknown config key {key!r}")
        cur = getattr(cfg, key)
        if isinstance(cur, bool):
            val = val.lower() in ("1", "true", "yes")
        elif isinstance(cur, int):
            val = int(val)
        elif isinstance(cur, float):
            val = float(val)
        elif isinstance(cur, tuple):
            val = tuple(float(tok) for tok in val.split(","))
        cfg = replace(cfg, **{key: val})
    _validate(cfg)
    return cfg


def _validate(cfg):
    if cfg.d <= 0 or cfg.N <= 0 or cfg.n <= 0:
        raise ConfigInvalid("d, N, n must be positive")
    if cfg.replicates < 2:
        raise ConfigInvalid("replicates must be >= 2")
    for grid in (cfg.lambda_grid, cfg.psi1_grid, cfg.psi2_grid):
        if grid is not None and grid.count < 2:
            raise ConfigInvalid("grid counts must be >= 2")
    if cfg.alpha <= 1.0:
        raise ConfigInvalid("alpha must exceed 1")


def config_to_ini(cfg):
    """Serialize a RunConfig back to INI text (round-trip stable)."""
    parser = configparser.ConfigParser()
    parser.optionxform = str
    parser["params"] = {k: _fmt(getattr(cfg, k))
                        for k in ("psi1", "psi2", "f1_sq", "tau_sq")}
    parser["params"]["activation"] = cfg.activation
    parser["params"]["quad_order"] = str(cfg.quad_order)
    grids = {}
    for prefix, attr in (("lambda", "lambda_grid"), ("lambda_t", "lambda_grid_t"),
                         ("psi1", "psi1_grid"), ("psi2", "psi2_grid")):
        grid = getattr(cfg, attr)
        if grid is None:
            continue
        grids[f"{prefix}_min"] = _fmt(grid.lo)
        grids[f"{prefix}_max"] = _fmt(grid.hi)
        grids[f"{prefix}_count"] = str(grid.count)
        grids[f"{prefix}_log"] = str(grid.log).lower()
    parser["grids"] = grids
    parser["sim"] = {k: str(getattr(cfg, k))
                     for k in ("d", "N", "n", "replicates", "base_seed")}
    parser["run"] = {"alpha": _fmt(cfg.alpha), "output": cfg.output}
    import io
    buf = io.StringIO()
    parser.write(buf)
    return buf.getvalue()


# ---------------------------------------------------------------------------
# subcommands


def cmd_theory(cfg, args):
    params = cfg.model_params()
    mn = asymptotics.risk_min_norm(params)
    if args.sweep == "psi1":
        rows = []
        for psi1 in cfg.psi1_grid.values():
            p = cfg.model_params(psi1=psi1)
            m = asymptotics.risk_min_norm(p)
            u_a = asymptotics.alpha_curve("U", cfg.alpha, p)
            t_a = asymptotics.alpha_curve("T", cfg.alpha, p)
            rows.append((psi1, u_a, t_a, m.risk, m.norm_sq))
        write_csv(cfg.output, ["psi1", "u_alpha", "t_alpha", "risk", "norm"], rows)
        return
    mustar_sq = params.profile.mustar_sq
    grid_t = cfg.lambda_grid_t or cfg.lambda_grid
    lams_u = cfg.lambda_grid.values()
    lams_t = grid_t.values()
    rows = []
    for lam_u, lam_t in zip(lams_u, lams_t):
        try:
            pu = asymptotics.point_at_lambda("U", lam_u, params)
            ubar, a_u = pu.value, pu.norm_sq
        except RFUniformError:
            ubar = a_u = math.nan
        try:
            pt = asymptotics.point_at_lambda("T", lam_t, params)
            tbar, a_t = pt.value, pt.norm_sq
        except RFUniformError:
            tbar = a_t = math.nan
        rows.append((lam_u, lam_u / mustar_sq, ubar, a_u, lam_t, tbar, a_t,
                     mn.risk, mn.norm_sq))
    if all(math.isnan(r[2]) and math.isnan(r[5]) for r in rows):
        raise RFUniformError("no lambda in the grid was admissible")
    write_csv(cfg.output, ["lambda", "lambda_bar", "ubar", "a_u", "lambda_t",
                           "tbar", "a_t", "risk", "norm"], rows)
    if args.dump_limit_diagnostic:
        from . import fixedpoint as fp
        fam = fp.Ubar(lams_u[0] / mustar_sq)
        diag = fp.limit_direction_diagnostic(fam, params)
        print(f"limit diagnostic at lambda={lams_u[0]}: "
              f"u->0+ {diag['u_to_zero']}, u->inf {diag['u_to_inf']}")


def cmd_simulate(cfg, args):
    params = cfg.sim_model_params()
    threads = int(os.environ.get("RF_UNIFORM_THREADS", "1"))
    grid_t = cfg.lambda_grid_t or cfg.lambda_grid
    out_rows, agg_rows = [], []
    for family, grid in (("U", cfg.lambda_grid.values()),
                         ("T", grid_t.values()), ("MIN", [0.0])):
        if args.families != "all" and family not in args.families.split(","):
            continue
        stats, rows = simulator.replicate_run(
            cfg.d, cfg.N, cfg.n, params,
            grid if family != "MIN" else [], cfg.replicates, cfg.base_seed,
            families=(family,), threads=threads)
        for r in rows:
            out_rows.append((r.family, r.lam, r.replicate, r.seed,
                             r.norm_sq, r.value))
        for (fam, lam), st in sorted(stats.items()):
            agg_rows.append((fam, lam, st.count, st.norm_sq[0], st.norm_sq[1],
                             st.value[0], st.value[1]))
    stem, ext = os.path.splitext(cfg.output)
    write_csv(stem + "_replicates" + (ext or ".csv"),
              ["family", "lambda", "replicate", "seed", "norm_sq", "value"],
              out_rows)
    write_csv(cfg.output,
              ["family", "lambda", "count", "norm_mean", "norm_stderr",
               "value_mean", "value_stderr"], agg_rows)


def cmd_powerlaw(cfg, args):
    with open(args.input, newline="") as fh:
        reader = csv.DictReader(fh)
        pts = [(float(row[args.x_col]), float(row[args.y_col])) for row in reader]
    window = (args.window[0], args.window[1]) if args.window else None
    fit = analysis.powerlaw_slope(pts, window=window)
    write_csv(cfg.output,
              ["quantity", "slope", "intercept", "r_squared", "window_lo",
               "window_hi", "n_points", "n_excluded"],
              [(args.y_col, fit.slope, fit.intercept, fit.r_squared,
                fit.window[0], fit.window[1], fit.n_points, fit.n_excluded)])
    print(f"{args.y_col}: slope {fit.slope:.4f} (r^2 {fit.r_squared:.6f}, "
          f"{fit.n_points} points)")


def cmd_kernel_limit(cfg, args):
    base = cfg.model_params()
    rows = []
    for psi2 in cfg.psi2_grid.values():
        if args.quantity == "UNIFORM_AT_NORM":
            for p in cfg.norm_powers:
                kl = asymptotics.kernel_limit("UNIFORM_AT_NORM", psi2, cfg.alpha,
                                              base, norm_level=psi2 ** p)
                rows.append((f"U_AT_PSI2^{p:g}", psi2, kl.value,
                             kl.finite_width_coeff, kl.rel_residual))
        else:
            kl = asymptotics.kernel_limit(args.quantity, psi2, cfg.alpha, base)
            rows.append((args.quantity, psi2, kl.value, kl.finite_width_coeff,
                         kl.rel_residual))
    write_csv(cfg.output, ["quantity", "psi2", "value", "finite_width_coeff",
                           "rel_residual"], rows)


def cmd_logdet_check(cfg, args):
    params = cfg.sim_model_params()
    prof = params.profile
    psi1 = cfg.N / cfg.d
    xi = complex(0.0, args.u)
    from . import fixedpoint as fp
    rows = []
    for lam in args.lambdas:
        q = (prof.mustar_sq - lam * psi1, prof.mu1_sq, cfg.n / cfg.d, 0.0, 0.0)
        state = fp.solve_at(xi, fp.GeneralQ(*q), params)
        g = fp.evaluate_Xi(xi, state.m1, state.m2, q, (params.psi1, params.psi2),
                           prof.mu1_sq, prof.mustar_sq)
        for k in range(cfg.replicates):
            inst = simulator.sample_instance(cfg.d, cfg.N, cfg.n, params,
                                             seed=cfg.base_seed + k)
            Gd = simulator.empirical_log_det(inst, q, xi)
            rows.append((cfg.d, k, inst.seed, lam, args.u, Gd.real, Gd.imag,
                         g.real, g.imag, abs(Gd - g)))
    write_csv(cfg.output, ["d", "replicate", "seed", "lambda", "u", "G_re",
                           "G_im", "g_re", "g_im", "abs_diff"], rows)


def cmd_compare(cfg, args):
    def read(path):
        with open(path, newline="") as fh:
            return list(csv.DictReader(fh))
    theory_rows = read(args.theory)
    sim_rows = read(args.sim)
    fam = args.family
    lam_col, val_col, norm_col = (("lambda", "ubar", "a_u") if fam == "U"
                                  else ("lambda_t", "tbar", "a_t"))
    theory = {}
    for row in theory_rows:
        lam = float(row[lam_col])
        norm, val = float(row[norm_col]), float(row[val_col])
        theory[lam] = (norm, val + lam * norm)      # dual objective on the curve
    stats = {}
    for row in sim_rows:
        if row["family"] != fam:
            continue
        stats[float(row["lambda"])] = simulator.ReplicateStats(
            norm_sq=(float(row["norm_mean"]), float(row["norm_stderr"])),
            value=(float(row["value_mean"]), float(row["value_stderr"])),
            count=int(row["count"]))
    result = analysis.compare_theory_sim(theory, stats)
    rows = [(fam, s.lam, s.coordinate, s.sim_mean, s.sim_stderr, s.theory,
             s.z, int(s.passed), int(s.degenerate_stderr))
            for s in result.scores]
    write_csv(cfg.output, ["family", "lambda", "coordinate", "sim_mean",
                           "sim_stderr", "theory", "z", "passed",
                           "degenerate_stderr"], rows)
    print(f"pass rate: {result.pass_rate:.3f}")


def build_parser():
    ap = argparse.ArgumentParser(prog="rfuniform",
                                 description="Uniform-convergence asymptotics "
                                             "for random feature regression")
    ap.add_argument("--config", help="INI run configuration")
    ap.add_argument("--paper-defaults", choices=sorted(PAPER_DEFAULTS),
                    help="inject a published parameter set")
    ap.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                    help="override a config key (repeatable; wins over file)")
    ap.add_argument("--output", help="output CSV path (overrides config)")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("theory", help="Lagrangian curves / alpha sweeps")
    p.add_argument("--sweep", choices=("lambda", "psi1"), default="lambda")
    p.add_argument("--dump-limit-diagnostic", action="store_true",
                   help="print both u->0 and u->inf terminal transforms")

    p = sub.add_parser("simulate", help="finite-size Monte Carlo replicates")
    p.add_argument("--families", default="all",
                   help="comma list from U,T,MIN or 'all'")

    p = sub.add_parser("powerlaw", help="log-log slope of a CSV column pair")
    p.add_argument("--input", required=True)
    p.add_argument("--x-col", required=True)
    p.add_argument("--y-col", required=True)
    p.add_argument("--window", nargs=2, type=float, default=None)

    p = sub.add_parser("kernel-limit", help="psi1 -> inf extrapolations over psi2")
    p.add_argument("--quantity", default="RISK",
                   choices=("UBAR_ALPHA", "TBAR_ALPHA", "RISK", "NORM",
                            "UNIFORM_AT_NORM"))

    p = sub.add_parser("logdet-check", help="empirical vs limiting log-determinant")
    p.add_argument("--u", type=float, default=0.5)
    p.add_argument("--lambdas", type=float, nargs="+", default=[0.6, 1.0, 2.0])

    p = sub.add_parser("compare", help="z-scores of simulation against theory")
    p.add_argument("--theory", required=True)
    p.add_argument("--sim", required=True)
    p.add_argument("--family", choices=("U", "T"), default="U")
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, args.paper_defaults, args.set)
        if args.output:
            cfg = replace(cfg, output=args.output)
    except (ConfigInvalid, ValueError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    handler = {"theory": cmd_theory, "simulate": cmd_simulate,
               "powerlaw": cmd_powerlaw, "kernel-limit": cmd_kernel_limit,
               "logdet-check": cmd_logdet_check, "compare": cmd_compare}[args.command]
    try:
        handler(cfg, args)
    except ConfigInvalid as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except RFUniformError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
