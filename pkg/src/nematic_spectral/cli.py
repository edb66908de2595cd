"""
Command line entry point.

    nematic-spectral run|linear-decay|kernel-probe|lower-bound|validate|fit
                     <config-or-csv> [--out DIR] [--workers N] [--seed S]

Exit status: 0 success, 1 failed assertion, 2 configuration error,
3 numerical blow-up.
"""

import argparse
import logging
import os
import sys

from . import config as cf
from . import grid
from . import scenarios as sc
from .io import write_json

EXIT_OK, EXIT_ASSERT, EXIT_CONFIG, EXIT_BLOWUP = 0, 1, 2, 3

log = logging.getLogger("nematic_spectral")


def build_parser():
    ap = argparse.ArgumentParser(
        prog="nematic-spectral",
        description="Spectral simulation and Green-function studies of 3D active nematics.")
    ap.add_argument("scenario", choices=cf.SCENARIOS)
    ap.add_argument("input", help="TOML config, or a series CSV for 'fit'")
    ap.add_argument("--out", default="out", help="output directory (default: ./out)")
    ap.add_argument("--workers", type=int, default=None,
                    help="transform worker count (default: env NEMATIC_WORKERS or 1)")
    ap.add_argument("--seed", type=int, default=None, help="override init.seed")
    ap.add_argument("--column", default=None, help="fit: series column (default q_d0)")
    ap.add_argument("--window", type=float, nargs=2, default=None, metavar=("T_LO", "T_HI"),
                    help="fit: time window")
    ap.add_argument("--log-y", action="store_true", help="fit: column already holds log values")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def _load(args):
    if args.scenario == "fit":
        cfg = cf.parse_config('scenario = "fit"\n')
    else:
        cfg = cf.load_config(args.input)
    if cfg.scenario != args.scenario and args.scenario != "fit":
        log.info("config scenario %r overridden by command %r", cfg.scenario, args.scenario)
        cfg.scenario = args.scenario
    if args.scenario == "run" and cfg.phys.a <= 0:
        raise cf.ConfigError("phys.a: simulations require a > 0")
    if args.seed is not None:
        cfg.init["seed"] = args.seed
    if args.column:
        cfg.fit["column"] = args.column
    if args.window:
        cfg.fit["window"] = list(args.window)
    if args.log_y:
        cfg.fit["log_y"] = True
    return cfg


def _dispatch(cfg, args, out):
    name = args.scenario
    p = cfg.phys
    if name == "run":
        res = sc.simulate(cfg, out)
        report = res["report"]
        if report["blowup"] is not None:
            log.error("blow-up at step %d (t = %g)", report["blowup"]["step"],
                      report["blowup"]["t"])
            return EXIT_BLOWUP, report
        return EXIT_OK, report
    if name == "linear-decay":
        res = sc.linear_decay_study(p, cfg.linear)
        sc.write_rows(out, "linear_decay.csv", res.pop("rows"))
        write_json(os.path.join(out, "fit.json"), res)
        return EXIT_OK, res
    if name == "lower-bound":
        res = sc.lower_bound_study(p, cfg.linear)
        sc.write_rows(out, "lower_bound.csv", res.pop("rows"))
        return EXIT_OK, res
    if name == "kernel-probe":
        res = sc.kernel_probe(p, cfg.probe)
        sc.write_rows(out, "kernel_probe.csv", res.pop("rows"))
        return EXIT_OK, res
    if name == "validate":
        res = sc.validate(cfg)
        return (EXIT_OK if res["pass"] else EXIT_ASSERT), res
    if name == "fit":
        res = sc.fit_series(args.input, cfg.fit)
        write_json(os.path.join(out, "fit.json"), res)
        return EXIT_OK, res
    raise AssertionError(name)


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.workers is not None:
        if args.workers < 1:
            print("error: --workers must be >= 1", file=sys.stderr)
            return EXIT_CONFIG
        grid.set_workers(args.workers)
    try:
        cfg = _load(args)
    except (cf.ConfigError, OSError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = args.out
    os.makedirs(out, exist_ok=True)
    write_json(os.path.join(out, "manifest.json"),
               sc.manifest(cfg, cfg.init["seed"], {"argv": sys.argv if argv is None
                                                    else ["nematic-spectral"] + list(argv)}))
    try:
        code, report = _dispatch(cfg, args, out)
    except (KeyError, ValueError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FloatingPointError as exc:
        print(f"numerical blow-up: {exc}", file=sys.stderr)
        return EXIT_BLOWUP
    if args.scenario != "run":
        write_json(os.path.join(out, "report.json"), report)
    if code == EXIT_ASSERT:
        print("validation FAILED; see report.json", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
