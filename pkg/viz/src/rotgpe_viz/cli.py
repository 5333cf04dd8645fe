"""Console entry points: plot_convergence, plot_series, plot_density."""

import argparse
import sys
from pathlib import Path

from rotgpe_viz.formats import (ERROR_NAMES, read_convergence, read_series,
                                read_snapshot)
from rotgpe_viz import plots


def _parser(prog, many=False):
    p = argparse.ArgumentParser(prog=prog)
    if many:
        p.add_argument("inputs", nargs="+", help="snapshot file(s), in order")
    else:
        p.add_argument("input", help="input file")
    p.add_argument("-o", "--out", help="output image (default: input + .png)")
    p.add_argument("--title")
    return p


def _out_path(args, first_input):
    return args.out or str(Path(first_input).with_suffix(".png"))


def main_convergence(argv=None):
    args = _parser("plot_convergence").parse_args(argv)
    try:
        table = read_convergence(args.input)
        slopes = plots.plot_convergence(table, _out_path(args, args.input),
                                        title=args.title)
    except (OSError, ValueError) as exc:
        print(f"plot_convergence: {exc}", file=sys.stderr)
        return 2
    for name in ERROR_NAMES:
        print(f"{name}: fitted slope {slopes[name]:.6f}")
    print(f"wrote {_out_path(args, args.input)}")
    return 0


def main_series(argv=None):
    args = _parser("plot_series").parse_args(argv)
    try:
        series = read_series(args.input)
        plots.plot_series(series, _out_path(args, args.input), title=args.title)
    except (OSError, ValueError) as exc:
        print(f"plot_series: {exc}", file=sys.stderr)
        return 2
    print(f"{len(series.t)} records, max |mass drift| "
          f"{abs(series.rel_mass_err).max():.3e}, max |energy drift| "
          f"{abs(series.rel_energy_err).max():.3e}")
    print(f"wrote {_out_path(args, args.input)}")
    return 0


def main_density(argv=None):
    args = _parser("plot_density", many=True).parse_args(argv)
    try:
        snaps = [read_snapshot(p) for p in args.inputs]
        plots.plot_density(snaps, _out_path(args, args.inputs[0]),
                           title=args.title)
    except (OSError, ValueError) as exc:
        print(f"plot_density: {exc}", file=sys.stderr)
        return 2
    print(f"{len(snaps)} panel(s) at t = "
          + ", ".join(f"{s.t:g}" for s in snaps))
    print(f"wrote {_out_path(args, args.inputs[0])}")
    return 0
