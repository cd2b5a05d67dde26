"""End-to-end driver: run the primary CLI for every figure's data, then
render all seven panels.  Full-resolution runs take some minutes; pass
--quick for a reduced-grid smoke version of the same pipeline."""

import argparse
import json
import os
import subprocess
import sys

from rffigures.panels import ALL_PANELS
from rffigures.render import render


def run(args):
    print("+", " ".join(args))
    subprocess.run([sys.executable, "-m", "rfuniform.cli"] + args, check=True)


def make_data(data_dir, quick):
    os.makedirs(data_dir, exist_ok=True)
    small = ["--set", "d=60", "--set", "N=150", "--set", "n=90",
             "--set", "replicates=4"] if quick else []
    psi2_count = 4 if quick else 16
    psi1_count = 5 if quick else 12
    ini = os.path.join(data_dir, "grids.ini")
    with open(ini, "w") as fh:
        fh.write(f"[grids]\npsi2_min = 100\npsi2_max = 10000\n"
                 f"psi2_count = {psi2_count}\npsi2_log = true\n"
                 f"psi1_min = 10\npsi1_max = 10000\n"
                 f"psi1_count = {psi1_count}\npsi1_log = true\n")
    for qty in ("UBAR_ALPHA", "TBAR_ALPHA", "RISK"):
        for tau, name in ((0.0, "fig1_noiseless"), (0.1, "fig1_noisy")):
            out = os.path.join(data_dir, f"{name}_{qty}.csv")
            run(["--paper-defaults", "fig1", "--config", ini,
                 "--set", f"tau_sq={tau}", "--output", out,
                 "kernel-limit", "--quantity", qty])
    for tau, name in ((0.1, "fig1_norm_noisy"), (0.0, "fig1_norm_noiseless")):
        run(["--paper-defaults", "fig1", "--config", ini,
             "--set", f"tau_sq={tau}",
             "--output", os.path.join(data_dir, f"{name}.csv"),
             "kernel-limit", "--quantity", "NORM"])
    # merge per-quantity fig1 files into the combined ones the panels read
    for name in ("fig1_noiseless", "fig1_noisy"):
        rows = []
        header = None
        for qty in ("UBAR_ALPHA", "TBAR_ALPHA", "RISK"):
            path = os.path.join(data_dir, f"{name}_{qty}.csv")
            with open(path) as fh:
                lines = fh.read().splitlines()
            header = lines[0]
            rows.extend(lines[1:])
        with open(os.path.join(data_dir, f"{name}.csv"), "w") as fh:
            fh.write("\n".join([header] + rows) + "\n")
    run(["--paper-defaults", "fig2",
         "--output", os.path.join(data_dir, "fig2_theory.csv"), "theory"])
    run(["--paper-defaults", "fig2", *small,
         "--output", os.path.join(data_dir, "fig2_sim.csv"), "simulate"])
    run(["--paper-defaults", "fig3", "--config", ini,
         "--output", os.path.join(data_dir, "fig3_usweep.csv"),
         "kernel-limit", "--quantity", "UNIFORM_AT_NORM"])
    run(["--paper-defaults", "fig4", "--config", ini,
         "--output", os.path.join(data_dir, "fig4_sweep.csv"),
         "theory", "--sweep", "psi1"])


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--data-dir", default="figure_data")
    ap.add_argument("--out-dir", default="figure_panels")
    ap.add_argument("--quick", action="store_true")
    ap.add_argument("--skip-data", action="store_true",
                    help="render from existing CSVs only")
    args = ap.parse_args()
    if not args.skip_data:
        make_data(args.data_dir, args.quick)
    os.makedirs(args.out_dir, exist_ok=True)
    for name, builder in ALL_PANELS.items():
        spec = builder(args.data_dir, args.out_dir)
        spec_path = os.path.join(args.out_dir, f"{name}.json")
        with open(spec_path, "w") as fh:
            json.dump(spec, fh, indent=1)
        out = render(spec)
        print(f"{name}: {out}")


if __name__ == "__main__":
    main()
