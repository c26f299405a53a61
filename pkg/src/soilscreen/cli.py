"""Command-line entry point.

Every subcommand accepts ``--config PATH`` (YAML), ``--seed N``, ``--out``,
``--set KEY=VALUE`` and per-key overrides such as ``--dbscan.eps 0.1``.
Later sources win: defaults, config file, ``--set``/dotted flags, ``--seed``.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import __version__, dbscan, geodata, risk, synthgen
from .config import DEFAULTS, ConfigError, PipelineConfig, dump_config, load_config_file, merge, parse_value
from .consensus import METHOD_COLUMNS
from .pipeline import (
    PipelineError,
    RunReport,
    _write_csv,
    anomaly_rows,
    emit_report,
    kdistance_rows,
    run_pipeline,
    stage,
    stats_rows,
)

logger = logging.getLogger("soilscreen")

COMMANDS = {
    "stats": "descriptive statistics per metal",
    "correlate": "Pearson correlation matrix",
    "kdist": "sorted k-distance profile and suggested eps",
    "detect": "run the three detectors and the consensus vote",
    "risk": "recompute HI and ILCR for every sample",
    "synth": "write a synthetic calibrated dataset",
    "report": "full pipeline with report files",
}


def _common(parser: argparse.ArgumentParser, sub: bool) -> None:
    # subparsers must not overwrite values already parsed at the top level
    d = argparse.SUPPRESS if sub else None
    parser.add_argument("--config", metavar="PATH", default=d, help="YAML config with dotted keys")
    parser.add_argument("--seed", type=int, default=d, help="random seed (iforest.seed; synth seed)")
    parser.add_argument("--out", metavar="PATH", default=d, help="output directory (file for synth)")
    parser.add_argument(
        "--set", dest="overrides", action="append", metavar="KEY=VALUE",
        default=d if sub else [], help="override one config key (repeatable)",
    )
    parser.add_argument("--recompute-risk", action="store_true", default=d if sub else False,
                        help="recompute HI/ILCR instead of using the input's risk columns")
    parser.add_argument("--print-config", action="store_true", default=d if sub else False,
                        help="print the effective configuration and exit")
    parser.add_argument("-v", "--verbose", action="count", default=d if sub else 0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="soilscreen",
        description="Consensus anomaly screening for soil heavy-metal data.",
        epilog="Any config key can also be given as a flag, e.g. --dbscan.eps 0.1",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    _common(parser, sub=False)
    subs = parser.add_subparsers(dest="command", metavar="COMMAND")
    for name, help_text in COMMANDS.items():
        p = subs.add_parser(name, help=help_text, description=help_text)
        if name != "synth":
            p.add_argument("input", nargs="?", help="sample CSV (default: config key 'input')")
        if name == "kdist":
            p.add_argument("-k", type=int, default=None, help="neighbour rank (default: dbscan.min_samples)")
        _common(p, sub=True)
    return parser


def _dotted_overrides(extra: list[str], parser: argparse.ArgumentParser) -> dict[str, Any]:
    out: dict[str, Any] = {}
    i = 0
    while i < len(extra):
        token = extra[i]
        if not token.startswith("--"):
            parser.error(f"unrecognized argument: {token}")
        key, eq, value = token[2:].partition("=")
        if key not in DEFAULTS:
            parser.error(f"unrecognized argument: {token}")
        if not eq:
            if i + 1 >= len(extra):
                parser.error(f"{token} expects a value")
            i += 1
            value = extra[i]
        out[key] = parse_value(value)
        i += 1
    return out


def resolve_config(args: argparse.Namespace, extra: dict[str, Any]) -> dict[str, Any]:
    flat = dict(DEFAULTS)
    if args.config:
        flat = merge(flat, load_config_file(args.config))
    for item in args.overrides:
        key, eq, value = item.partition("=")
        if not eq:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        flat = merge(flat, {key.strip(): parse_value(value)})
    flat = merge(flat, extra)
    if args.seed is not None:
        flat["iforest.seed"] = args.seed
    if args.recompute_risk:
        flat["risk.recompute"] = True
    if getattr(args, "input", None):
        flat["input"] = args.input
    return flat


def _load(cfg: PipelineConfig) -> geodata.Dataset:
    if cfg.input is None:
        raise ConfigError("no input CSV given (positional argument or config key 'input')")
    with stage("geodata"):
        return geodata.load_dataset(cfg.input)


def _emit_rows(header: list[str], rows: list[list[Any]], out: Path | None, name: str) -> None:
    if out is None:
        w = csv.writer(sys.stdout, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
        return
    out.mkdir(parents=True, exist_ok=True)
    _write_csv(out / name, header, rows)
    print(f"wrote {out / name}")


def cmd_stats(cfg: PipelineConfig) -> int:
    ds = _load(cfg)
    with stage("geodata"):
        stats = geodata.descriptive_stats(ds)
    header, rows = stats_rows(stats)
    _emit_rows(header, rows, cfg.out_dir, "stats.csv")
    return 0


def cmd_correlate(cfg: PipelineConfig) -> int:
    ds = _load(cfg)
    with stage("geodata"):
        r = geodata.pearson_matrix(ds.features())
    rows = [[m, *(repr(float(v)) for v in r[i])] for i, m in enumerate(geodata.METALS)]
    _emit_rows(["metal", *geodata.METALS], rows, cfg.out_dir, "correlation.csv")
    return 0


def cmd_kdist(cfg: PipelineConfig, k: int | None) -> int:
    ds = _load(cfg)
    with stage("dbscan"):
        z = geodata.standardize(ds.features())
        profile = dbscan.k_distance_profile(z, k or cfg.dbscan.min_samples)
        hint = dbscan.suggest_eps(profile)
    header, rows = kdistance_rows(profile)
    _emit_rows(header, rows, cfg.out_dir, "kdistance.csv")
    print(f"suggested eps: {hint:.4f}", file=sys.stderr)
    return 0


def _print_counts(r: RunReport) -> None:
    c = r.consensus
    print(f"samples: {len(r.dataset)}")
    for d in r.detectors:
        print(f"{d.detector_name}: {d.n_flagged} flagged")
    print(f"dbscan clusters: {r.clusters.n_clusters}, noise: {r.clusters.n_noise}")
    print(f"consensus (>= {c.threshold} votes): {c.n_consensus}")
    width = max(len(s) for s in c.site_order)
    print(f"{'site':<{width}}  " + "  ".join(f"{h:>9}" for h in METHOD_COLUMNS))
    for i, site in enumerate(c.site_order):
        print(f"{site:<{width}}  " + "  ".join(f"{v:>9d}" for v in c.count_matrix[i]))


def cmd_detect(cfg: PipelineConfig) -> int:
    r = run_pipeline(cfg, _load(cfg))
    _print_counts(r)
    if cfg.out_dir is not None:
        header, rows = anomaly_rows(r)
        _emit_rows(header, rows, cfg.out_dir, "anomalies.csv")
    return 0


def cmd_risk(cfg: PipelineConfig) -> int:
    ds = _load(cfg)
    with stage("risk"):
        prof = risk.compute_profile(ds, cfg.toxicity, cfg.exposure)
    header = ["sample_id", "site", "hi_adult", "hi_child", "ilcr_adult", "ilcr_child", "ilcr_band_adult", "ilcr_band_child"]
    rows = []
    for i, s in enumerate(ds.samples):
        rows.append([
            s.sample_id, s.site,
            repr(float(prof.hi["adult"][i])), repr(float(prof.hi["child"][i])),
            repr(float(prof.ilcr["adult"][i])), repr(float(prof.ilcr["child"][i])),
            risk.ilcr_band(prof.ilcr["adult"][i]), risk.ilcr_band(prof.ilcr["child"][i]),
        ])
    _emit_rows(header, rows, cfg.out_dir, "risk.csv")
    if ds.has_risk:
        diff = max(float(np.max(np.abs(prof.column(c) - ds.risk_column(c)))) for c in geodata.RISK_COLUMNS)
        print(f"max |given - recomputed| over risk columns: {diff:.3g}", file=sys.stderr)
    return 0


def cmd_synth(seed: int, out: str | None) -> int:
    with stage("synthgen"):
        ds = synthgen.generate(synthgen.GeneratorConfig(seed=seed))
    if out is None:
        geodata.dump_dataset(ds, sys.stdout)
        return 0
    path = Path(out)
    with stage("geodata"):
        geodata.write_dataset(ds, path)
    print(f"wrote {len(ds)} samples to {path}")
    return 0


def cmd_report(cfg: PipelineConfig) -> int:
    r = run_pipeline(cfg, _load(cfg))
    out = cfg.out_dir or Path("report")
    emit_report(r, out, cfg.emit_plot_data)
    _print_counts(r)
    v = r.validation
    ratio = v.hi_ratio["child"]["consensus"]
    print(f"child HI ratio (consensus / normal): {ratio:.3f}")
    print(f"r(reconstruction error, child HI): {v.recon_hi_r['child']:.3f}")
    print(f"report written to {out}")
    return 0


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args, extra = parser.parse_known_args(argv)
    overrides = _dotted_overrides(extra, parser)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        flat = resolve_config(args, overrides)
        if args.print_config:
            sys.stdout.write(dump_config(flat))
            return 0
        if args.command is None:
            parser.error("a command is required (or --print-config)")
        if args.command == "synth":
            seed = args.seed if args.seed is not None else synthgen.FIXTURE_SEED
            return cmd_synth(seed, args.out)
        cfg = PipelineConfig.from_flat(flat, args.out)
        if args.command == "stats":
            return cmd_stats(cfg)
        if args.command == "correlate":
            return cmd_correlate(cfg)
        if args.command == "kdist":
            return cmd_kdist(cfg, args.k)
        if args.command == "detect":
            return cmd_detect(cfg)
        if args.command == "risk":
            return cmd_risk(cfg)
        return cmd_report(cfg)
    except ConfigError as exc:
        print(f"soilscreen: config error: {exc}", file=sys.stderr)
        return 2
    except (PipelineError, geodata.DataError) as exc:
        print(f"soilscreen: error: {exc}", file=sys.stderr)
        return 1
