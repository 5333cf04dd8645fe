"""Command line driver: rotgpe <experiment> [--config FILE] [--out DIR] ...

Experiments:

- accuracy: tau = h convergence study against the manufactured solution
- conserve: unforced run tracking mass/energy drift per step
- evolve:   unforced run writing density snapshots at configured times
- groundstate: normalized gradient flow

Each experiment has reduced-scale defaults that finish on a laptop;
--paper-scale switches the dynamics experiments to the full size trap
(domain [-16,16]^2, 512^2 cells, Omega=0.99, beta=100).
"""

import argparse
import sys
from dataclasses import replace

from rotgpe.harness import (RunConfig, parse_config, run_accuracy,
                            run_conservation, run_evolution, run_groundstate)

_DEFAULTS = {
    "accuracy": RunConfig(nx=8, ny=8, tau=0.125, T=1.0),
    "conserve": RunConfig(nx=32, ny=32, tau=0.01, T=2.0),
    "evolve": RunConfig(xmin=-8.0, xmax=8.0, ymin=-8.0, ymax=8.0, nx=64, ny=64,
                        tau=0.01, T=3.0, beta=50.0, gammax=1.0, gammay=1.0,
                        initial="vortex", snapshots=(0.0, 0.75, 1.5, 3.0)),
    "groundstate": RunConfig(xmin=-8.0, xmax=8.0, ymin=-8.0, ymax=8.0,
                             nx=64, ny=64, beta=50.0, gammax=1.0, gammay=1.0),
}


def _paper_scale(cfg):
    return replace(cfg, xmin=-16.0, xmax=16.0, ymin=-16.0, ymax=16.0,
                   nx=512, ny=512, tau=0.01, omega=0.99, beta=100.0,
                   gammax=1.0, gammay=1.0)


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="rotgpe",
        description="rotating Gross-Pitaevskii experiments with conservative "
                    "Crank-Nicolson finite elements")
    parser.add_argument("experiment",
                        choices=["accuracy", "conserve", "evolve", "groundstate"])
    parser.add_argument("--config", help="key=value config file")
    parser.add_argument("--out", default="out", help="output directory")
    parser.add_argument("--element", choices=["q1", "eq1rot"],
                        help="override the element family")
    parser.add_argument("--paper-scale", action="store_true",
                        help="full-size vortex lattice parameters")
    parser.add_argument("--levels", type=int, default=4,
                        help="number of mesh levels for the accuracy study")
    args = parser.parse_args(argv)

    cfg = _DEFAULTS[args.experiment]
    if args.config:
        cfg = parse_config(args.config, base=cfg)
    if args.paper_scale:
        cfg = _paper_scale(cfg)
    if args.element:
        cfg = replace(cfg, element=args.element)

    if args.experiment == "accuracy":
        table = run_accuracy(cfg, args.out, levels=args.levels)
        rates = table.rates()
        print(f"accuracy [{cfg.element}]: levels {table.h}")
        for name in ("l2", "h1", "superclose", "postproc"):
            print(f"  {name}: errors {['%.3e' % e for e in getattr(table, name)]} "
                  f"rates {['%.2f' % r for r in rates[name][1:]]}")
    elif args.experiment == "conserve":
        _, records = run_conservation(cfg, args.out)
        dm = max(abs(r.rel_mass_err) for r in records)
        de = max(abs(r.rel_energy_err) for r in records)
        print(f"conserve [{cfg.element}]: {len(records) - 1} steps, "
              f"max |mass drift| {dm:.3e}, max |energy drift| {de:.3e}")
    elif args.experiment == "evolve":
        _, records, snaps = run_evolution(cfg, args.out)
        print(f"evolve [{cfg.element}]: {len(records) - 1} steps, "
              f"{len(snaps)} snapshots in {args.out}")
    else:
        result = run_groundstate(cfg, args.out)
        status = "converged" if result.converged else "NOT converged"
        print(f"groundstate [{cfg.element}]: {status} after {result.iterations} "
              f"flow steps, energy {result.energy:.10g}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
