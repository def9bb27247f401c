"""Command line front end: ``mcrf <subcommand> [flags]``.

Exit codes: 0 success, 1 usage error, 2 data/validation error, 3 I/O error.
Logs and the effective configuration go to stderr; stdout carries only
machine-readable output.
"""

from __future__ import annotations

import argparse
import logging
import re
import sys
from pathlib import Path

from . import __version__
from .engine import CPD_FORMS, MARGINAL, SimulationConfig, simulate_ensemble
from .errors import ValidationError
from .evaluation import (
    ensemble_accuracy,
    load_sweep_config,
    render_map,
    run_sweep_config,
)
from .grid import GridSpec, load_grid, load_samples, random_sample, save_grid, save_samples
from .neighborhood import NeighborhoodConfig
from .synth import synth_reference
from .transiogram import LagBinning, estimate_experimental, fit_linear, load_model, save_model

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_IO = 3

log = logging.getLogger("mcrf")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def _echo(name, args):
    items = {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "command")}
    print(f"mcrf {name}: " + " ".join(f"{k}={v}" for k, v in items.items()), file=sys.stderr)


def cmd_synth(args):
    grid = synth_reference(args.width, args.height, args.classes, args.blob_scale, args.seed)
    save_grid(grid, args.out)
    log.info("wrote %dx%d map with %d classes to %s", grid.width, grid.height, grid.n_classes, args.out)


def cmd_sample(args):
    grid = load_grid(args.reference)
    samples = random_sample(grid, args.count, args.seed)
    save_samples(samples, args.out)
    log.info("wrote %d samples to %s", len(samples), args.out)


def cmd_transiogram(args):
    samples = load_samples(args.samples, args.n_classes)
    binning = LagBinning(args.max_lag, args.bin_width, args.tolerance)
    model = fit_linear(estimate_experimental(samples, binning), samples.proportions())
    save_model(model, args.out)
    log.info("wrote transiogram model with %d knots to %s", len(model.knots), args.out)


def cmd_simulate(args):
    model = load_model(args.model)
    samples = load_samples(args.samples, model.n_classes)
    spec = GridSpec(args.width, args.height, model.n_classes)
    nb = NeighborhoodConfig.parse(args.neighborhood, args.radius)
    config = SimulationConfig(nb, args.cpd_form, args.realizations, args.seed)
    ensemble = simulate_ensemble(spec, samples, model, config, jobs=args.jobs)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for r, grid in enumerate(ensemble.realizations):
        save_grid(grid, out / f"real_{r}.grid")
    if any(ensemble.fallback_counts):
        log.warning("degenerate CPD fallbacks per realization: %s", list(ensemble.fallback_counts))
    log.info("wrote %d realizations to %s", len(ensemble), out)


def _realization_files(directory: Path):
    found = []
    for p in directory.iterdir():
        m = re.fullmatch(r"real_(\d+)\.grid", p.name)
        if m:
            found.append((int(m.group(1)), p))
    if not found:
        raise ValidationError(f"no real_<index>.grid files in {directory}")
    return [p for _, p in sorted(found)]


def cmd_evaluate(args):
    directory = Path(args.realizations)
    if not directory.is_dir():
        raise FileNotFoundError(f"not a directory: {directory}")
    reference = load_grid(args.reference)
    samples = load_samples(args.samples, reference.n_classes)
    grids = [load_grid(p) for p in _realization_files(directory)]
    report = ensemble_accuracy(grids, reference, samples, include_samples=args.include_samples)
    lines = ["realization,accuracy"]
    lines += [f"{r},{a:.2f}" for r, a in enumerate(report.per_realization)]
    lines.append(f"mean,{report.mean_realization:.2f}")
    lines.append(f"optimal,{report.optimal:.2f}")
    sys.stdout.write("\n".join(lines) + "\n")


def cmd_sweep(args):
    cfg = load_sweep_config(args.config)
    print("mcrf sweep config: " + " ".join(f"{k}={v}" for k, v in vars(cfg).items()), file=sys.stderr)
    result = run_sweep_config(cfg, jobs=args.jobs, base_dir=Path(args.config).parent)
    text = result.to_csv()
    if args.out == "-":
        sys.stdout.write(text)
    else:
        Path(args.out).write_text(text, encoding="ascii")
        log.info("wrote %d rows to %s", len(result.rows), args.out)


def cmd_render(args):
    render_map(load_grid(args.grid), args.out)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="mcrf", description="Markov chain random field simulation of categorical maps.")
    p.add_argument("--version", action="version", version=f"mcrf {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = p.add_subparsers(dest="command", metavar="<command>", parser_class=_Parser)
    sub.required = True

    s = sub.add_parser("synth", help="write a synthetic reference map")
    s.add_argument("--width", type=int, default=64)
    s.add_argument("--height", type=int, default=64)
    s.add_argument("--classes", type=int, default=5)
    s.add_argument("--blob-scale", type=float, default=12.0, help="typical patch spacing in cells")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True, help="output grid file")
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("sample", help="draw random point samples from a reference map")
    s.add_argument("--reference", required=True, help="grid file")
    s.add_argument("--count", type=int, required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True, help="output CSV (x,y,class)")
    s.set_defaults(func=cmd_sample)

    s = sub.add_parser("transiogram", help="estimate and linearly model transiograms from samples")
    s.add_argument("--samples", required=True)
    s.add_argument("--max-lag", type=float, default=20.0)
    s.add_argument("--bin-width", type=float, default=1.0)
    s.add_argument("--tolerance", type=float, default=0.5, help="half-width of each lag window")
    s.add_argument("--n-classes", type=int, default=None, help="default: largest label in samples")
    s.add_argument("--out", required=True, help="output model CSV")
    s.set_defaults(func=cmd_transiogram)

    s = sub.add_parser("simulate", help="conditional random-path simulation")
    s.add_argument("--samples", required=True)
    s.add_argument("--model", required=True)
    s.add_argument("--width", type=int, required=True)
    s.add_argument("--height", type=int, required=True)
    s.add_argument("--neighborhood", default="sectored:4", help="nonsectored:<k> or sectored:<2|4|8>")
    s.add_argument("--radius", type=float, default=20.0)
    s.add_argument("--cpd-form", choices=CPD_FORMS, default=MARGINAL)
    s.add_argument("--realizations", type=int, default=1)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--jobs", type=int, default=1)
    s.add_argument("--out-dir", required=True)
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("evaluate", help="accuracy of a realization directory against a reference")
    s.add_argument("--realizations", required=True, help="directory of real_<index>.grid files")
    s.add_argument("--reference", required=True)
    s.add_argument("--samples", required=True)
    s.add_argument("--include-samples", action="store_true", help="also score sampled cells")
    s.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("sweep", help="run a neighborhood sweep described by a key=value file")
    s.add_argument("--config", required=True)
    s.add_argument("--out", required=True, help="output CSV, or - for stdout")
    s.add_argument("--jobs", type=int, default=1)
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("render", help="write a grid as a binary PPM image")
    s.add_argument("--grid", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_render)
    return p


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)

    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr, force=True)
    _echo(args.command, args)
    try:
        args.func(args)
    except ValidationError as exc:
        print(f"mcrf {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"mcrf {args.command}: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
