"""``collapsim`` command line.

Subcommands: ``simulate``, ``pattern``, ``analyze``, ``defect``, ``mzi``.
Exit status 1 is a configuration error, 2 a numerical failure, 3 an I/O
or file-format failure. Diagnostics go to stderr, data to files and stdout.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import os
import sys
from pathlib import Path

from .collapse import RngStream
from .config import ExperimentConfig, load_config
from .errors import CollapsimError, ConfigError, SchemaError
from .experiment import (
    defect_values,
    read_records,
    run_ensemble,
    summarize,
    unmonitored_pattern,
    write_records,
    write_summary,
)
from .mzi import mzi_probabilities, mzi_sample

EXIT_CONFIG = 1
EXIT_NUMERIC = 2
EXIT_IO = 3
SEED_ENV = "COLLAPSIM_SEED"


def _u64(text: str) -> int:
    v = int(text, 0)
    if not 0 <= v < 2**64:
        raise ValueError(f"{text} is not a 64-bit unsigned integer")
    return v


def resolve_config(args) -> ExperimentConfig:
    """Config file, then ``--set`` overrides, then the seed precedence rule.

    Seed: ``--seed`` > ``$COLLAPSIM_SEED`` > ``master_seed`` from the config > 42.
    """
    config = load_config(args.config, args.set)
    seed = args.seed
    if seed is None and os.environ.get(SEED_ENV, "").strip():
        try:
            seed = _u64(os.environ[SEED_ENV].strip())
        except ValueError as exc:
            raise ConfigError(str(exc), key=SEED_ENV) from exc
    if seed is not None:
        config = dataclasses.replace(config, master_seed=seed)
    return config


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_simulate(args) -> int:
    config = resolve_config(args)
    out = _out_dir(args)
    records, summary = run_ensemble(config, workers=args.workers)
    write_records(records, out / "records.csv")
    write_summary(summary, out / "summary.txt")
    sys.stdout.write(summary.to_text())
    for note in summary.notes:
        print(f"note: {note}", file=sys.stderr)
    return 0


def cmd_pattern(args) -> int:
    config = resolve_config(args)
    out = _out_dir(args)
    x, pdf = unmonitored_pattern(config)
    total = pdf.sum(axis=1)
    with (out / "pattern.csv").open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x", *(f"pdf_n{n}" for n in range(pdf.shape[1])), "pdf_total"])
        for i in range(x.size):
            w.writerow([repr(float(x[i])), *(repr(float(v)) for v in pdf[i]), repr(float(total[i]))])
    print(f"wrote {out / 'pattern.csv'}")
    return 0


def cmd_analyze(args) -> int:
    config = resolve_config(args)
    out = _out_dir(args)
    path = Path(args.records) if args.records else out / "records.csv"
    records = read_records(path)
    summary = summarize(records, config)
    write_summary(summary, out / "summary.txt")
    sys.stdout.write(summary.to_text())
    return 0


def cmd_defect(args) -> int:
    config = resolve_config(args)
    out = _out_dir(args)
    at_zero, at_g = defect_values(config)
    text = f"defect_g0 = {at_zero!r}\ng = {config.defect.g!r}\ndefect_g = {at_g!r}\n"
    (out / "defect.txt").write_text(text, encoding="utf-8")
    sys.stdout.write(text)
    return 0


def cmd_mzi(args) -> int:
    config = resolve_config(args)
    p = mzi_probabilities(config.mzi)
    print(f"p_dark = {p.p_dark!r}\np_bright = {p.p_bright!r}\np_absorbed = {p.p_absorbed!r}")
    if config.mzi_shots:
        c = mzi_sample(config.mzi, config.mzi_shots, RngStream(config.master_seed))
        print(f"dark = {c.dark}\nbright = {c.bright}\nabsorbed = {c.absorbed}")
    return 0


COMMANDS = {
    "simulate": (cmd_simulate, "run the monitored ensemble; write records.csv and summary.txt"),
    "pattern": (cmd_pattern, "one unmonitored run; write per-sector screen densities to pattern.csv"),
    "analyze": (cmd_analyze, "recompute summary.txt from an existing records.csv"),
    "defect": (cmd_defect, "superposition defect of the mean-field map at g = 0 and defect.g"),
    "mzi": (cmd_mzi, "Mach-Zehnder outcome probabilities and optional sampled counts"),
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, default=None, help="flat key = value config file")
    common.add_argument("--out", default=".", help="output directory (default: current)")
    common.add_argument("--seed", type=_u64, default=None, help=f"master seed; beats ${SEED_ENV}")
    common.add_argument(
        "--workers", type=int, default=os.cpu_count() or 1, help="worker processes for simulate"
    )
    common.add_argument(
        "--set", action="append", default=[], metavar="KEY=VALUE", help="override a config key"
    )
    parser = argparse.ArgumentParser(prog="collapsim", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, parents=[common], help=help_text)
        if name == "analyze":
            p.add_argument("--records", default=None, help="records file (default: OUT/records.csv)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.config is not None and not args.config.is_file():
        print(f"collapsim: config error: {args.config} does not exist", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return COMMANDS[args.command][0](args)
    except ConfigError as exc:
        print(f"collapsim: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SchemaError as exc:
        print(f"collapsim: bad input file: {exc}", file=sys.stderr)
        return EXIT_IO
    except CollapsimError as exc:
        print(f"collapsim: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"collapsim: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
