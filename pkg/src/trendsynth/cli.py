"""Command-line pipeline: ingest, analyze, simulate, expand, validate, compare.

Every command writes its artifacts under ``--out DIR`` together with a
``manifest.json`` holding input hashes, the fully resolved configuration,
the seed and library versions. Reruns with the same inputs, configuration
and seed produce byte-identical files.

Exit codes: 0 success, 1 usage error, 2 data error.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import logging
import platform
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import LibraryError, TrendLibrary, build_trend_library
from .baselines import GarchFitError, fit_garch11, fit_gbm, simulate_garch11, simulate_gbm
from .expand import expand_with_report
from .fixture import make_fixture
from .ingest import (CsvOptions, PanelError, ReturnPanel, drop_closed_days, load_price_csv,
                     load_returns_csv, sim_day_labels, to_returns, write_price_csv,
                     write_returns_csv)
from .metrics import (DegenerateSeriesError, MetricsConfig, MetricsReport, compare_reports,
                      panel_report)
from .synthesis import (FIRST_SIGNS, ScenarioSpec, TrendSequence, hypothesize_trend_sequence,
                        sequence_rng, synthesize_scenario)
from .trends import detect_trends, equal_weight_index, write_trends_csv

logger = logging.getLogger("trendsynth")

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2
MODELS = ("gbm", "garch-gaussian", "garch-t")

# Substream keys of the run seed; (0,) and (1, k) belong to synthesis.
_EXPAND_KEY, _BASELINE_KEY = 2, 3


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


@dataclass
class RunConfig:
    kind: str = "prices"
    errors: str = "raise"
    drop_closed_days: bool = True
    theta: float = 0.05
    L: int = 20
    target_days: int = 12500
    first_sign: str = "random"
    extra_assets: int = 0
    drop_originals: bool = False
    ratio_cap: object = 12.0
    max_rounds: int = 10
    seed: int = 0
    rolling_window: int = 180
    rolling_step: int = 5
    acf_lags: int = 20
    abs_acf_lags: int = 100
    similarity_window: int = 50
    similarity_step: int = 1
    model: str = "gbm"
    fit_column: object = None
    days: int = 4108
    n_assets: int = 50
    n_days: int = 2000
    closed_days: int = 0

    def __post_init__(self):
        choices = {"kind": ("prices", "returns"), "errors": ("raise", "reject"),
                   "first_sign": FIRST_SIGNS, "model": MODELS}
        for key, allowed in choices.items():
            if getattr(self, key) not in allowed:
                raise UsageError(f"{key} must be one of {', '.join(allowed)}")
        if not 0 < self.theta < 1:
            raise UsageError("theta must be in (0, 1)")
        for key in ("L", "target_days", "rolling_window", "rolling_step", "acf_lags",
                    "abs_acf_lags", "similarity_window", "similarity_step", "days",
                    "n_assets", "n_days"):
            if getattr(self, key) < 1:
                raise UsageError(f"{key} must be >= 1")
        for key in ("extra_assets", "max_rounds", "closed_days"):
            if getattr(self, key) < 0:
                raise UsageError(f"{key} must be >= 0")
        if not 0 <= self.seed < 2**64:
            raise UsageError("seed must be in [0, 2**64)")
        self.ratio_cap = parse_ratio_cap(self.ratio_cap)

    def metrics(self):
        return MetricsConfig(self.theta, self.rolling_window, self.rolling_step, self.acf_lags,
                             self.abs_acf_lags, self.similarity_window, self.similarity_step)

    def to_dict(self):
        return dataclasses.asdict(self)


_FIELDS = {f.name: f for f in dataclasses.fields(RunConfig)}


def parse_ratio_cap(value):
    if value is None or isinstance(value, float):
        return value
    if isinstance(value, int):
        return float(value)
    text = str(value).strip().lower()
    if text in ("none", "off"):
        return None
    if text == "auto":
        return "auto"
    try:
        cap = float(text)
    except ValueError:
        raise UsageError(f"ratio_cap must be a number, 'auto' or 'none', got {value!r}") from None
    if not cap > 0:
        raise UsageError("ratio_cap must be > 0")
    return cap


def _convert(key, text):
    field = _FIELDS[key]
    if key == "ratio_cap":
        return parse_ratio_cap(text)
    if key == "fit_column":
        return None if text.lower() == "none" else text
    kind = field.type
    try:
        if kind == "bool":
            low = text.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
        if kind == "int":
            return int(text)
        if kind == "float":
            return float(text)
    except ValueError:
        raise UsageError(f"config key {key}: cannot parse {text!r} as {kind}") from None
    return text


def read_config_file(path):
    """Parse flat ``key = value`` lines; ``#`` starts a comment."""
    values = {}
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise UsageError(f"cannot read config file {path}: {exc.strerror}") from None
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected 'key = value'")
        key, text = (part.strip() for part in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in _FIELDS:
            raise UsageError(f"{path}:{lineno}: unknown config key {key!r}")
        values[key] = _convert(key, text)
    return values


def resolve_config(args):
    values = read_config_file(args.config) if getattr(args, "config", None) else {}
    values.update({k: v for k, v in vars(args).items() if k in _FIELDS})
    return RunConfig(**values)


# ---------------------------------------------------------------- helpers

def sha256_file(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _versions():
    import pandas
    import scipy
    import sklearn
    return {"trendsynth": __version__, "python": platform.python_version(),
            "numpy": np.__version__, "scipy": scipy.__version__, "pandas": pandas.__version__,
            "scikit-learn": sklearn.__version__}


def write_json(path, doc):
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True, allow_nan=False) + "\n",
                          encoding="utf-8")


def write_manifest(out, command, inputs, config, extra=None):
    """``manifest.json`` with hashes of inputs and of every file under ``out``."""
    out = Path(out)
    outputs = {p.relative_to(out).as_posix(): sha256_file(p)
               for p in sorted(out.rglob("*")) if p.is_file() and p.name != "manifest.json"}
    doc = {
        "command": command,
        "inputs": [{"name": Path(p).name, "sha256": sha256_file(p)} for p in inputs],
        "config": config.to_dict(),
        "seed": config.seed,
        "versions": _versions(),
        "outputs": outputs,
    }
    if extra:
        doc.update(extra)
    write_json(out / "manifest.json", doc)


def load_panel(path, config):
    """Returns panel from a price or returns CSV, closed days dropped if configured."""
    if config.kind == "prices":
        prices = load_price_csv(path, CsvOptions(errors=config.errors))
        for name, why in prices.rejected.items():
            logger.warning("%s: rejected asset %s (%s)", Path(path).name, name, why)
        r = to_returns(prices)
    else:
        r = load_returns_csv(path)
    if config.drop_closed_days:
        before = r.n_days
        r = drop_closed_days(r)
        if r.n_days < before:
            logger.info("dropped %d closed days", before - r.n_days)
    return r


def read_sequence_file(path):
    text = Path(path).read_text(encoding="utf-8")
    tokens = " ".join(line.split("#", 1)[0] for line in text.splitlines()).replace(",", " ").split()
    try:
        return [int(tok) for tok in tokens]
    except ValueError as exc:
        raise DataError(f"{path}: trend sequence must list integer library indices") from exc


def _stream(seed, key):
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(key,)))


def _mkdir(path):
    Path(path).mkdir(parents=True, exist_ok=True)
    return Path(path)


# ---------------------------------------------------------------- stages

def stage_analyze(r, config, out):
    lib = build_trend_library(r, config.theta, config.L)
    lib.save(out / "library.json")
    write_trends_csv(detect_trends(equal_weight_index(r.returns), config.theta),
                     out / "index_trends.csv")
    logger.info("analyze: %d trends over %d days", len(lib.trends), r.n_days)
    return lib


def stage_simulate(lib, lib_path, config, out, threads=1, sequence=None):
    spec = ScenarioSpec(config.target_days, config.seed, lib, config.first_sign)
    if sequence is not None:
        sequence = TrendSequence.from_indices(lib, sequence)
    else:
        sequence = hypothesize_trend_sequence(lib, config.target_days, sequence_rng(config.seed),
                                              config.first_sign)
    panel = synthesize_scenario(spec, sequence, n_jobs=threads)
    write_returns_csv(panel, out / "scenario.csv")
    write_json(out / "scenario.json", {
        "seed": config.seed,
        "library_sha256": sha256_file(lib_path),
        "trend_sequence": list(sequence.indices),
        "target_days": config.target_days,
    })
    logger.info("simulate: %d assets x %d days from %d trends", panel.n_assets, panel.n_days,
                len(sequence))
    return panel


def stage_expand(r, config, out):
    panel, info = expand_with_report(r, config.extra_assets, _stream(config.seed, _EXPAND_KEY),
                                     config.drop_originals, config.ratio_cap, config.theta,
                                     config.max_rounds)
    write_returns_csv(panel, out / "expanded.csv")
    if info["redraw_rounds"]:
        logger.info("expand: %d redraw rounds, %d assets redrawn", info["redraw_rounds"],
                    info["redrawn"])
    if info["remaining_outliers"]:
        logger.warning("expand: %d artificial assets still above the trend-ratio cap %s",
                       info["remaining_outliers"], info["ratio_cap"])
    return panel, info


def stage_validate(r, config, out):
    report = panel_report(r, config=config.metrics())
    report.save(out / "report.json")
    report.write_csvs(out)
    return report


# ---------------------------------------------------------------- commands

def cmd_ingest(args, config):
    out = _mkdir(args.out)
    r = load_panel(args.input, config)
    write_returns_csv(r, out / "returns.csv")
    write_manifest(out, "ingest", [args.input], config,
                   {"shape": [r.n_assets, r.n_days]})


def cmd_analyze(args, config):
    out = _mkdir(args.out)
    r = load_panel(args.input, config)
    lib = stage_analyze(r, config, out)
    write_manifest(out, "analyze", [args.input], config, {"n_trends": len(lib.trends)})


def cmd_simulate(args, config):
    out = _mkdir(args.out)
    try:
        lib = TrendLibrary.load(args.library)
    except FileNotFoundError:
        raise DataError(f"library file not found: {args.library}") from None
    sequence = read_sequence_file(args.sequence) if args.sequence else None
    inputs = [args.library] + ([args.sequence] if args.sequence else [])
    panel = stage_simulate(lib, args.library, config, out, args.threads, sequence)
    write_manifest(out, "simulate", inputs, config, {"shape": [panel.n_assets, panel.n_days]})


def cmd_expand(args, config):
    out = _mkdir(args.out)
    r = load_returns_csv(args.input)
    panel, info = stage_expand(r, config, out)
    write_manifest(out, "expand", [args.input], config,
                   {"shape": [panel.n_assets, panel.n_days], "expansion": info})


def cmd_validate(args, config):
    out = _mkdir(args.out)
    r = load_panel(args.input, config)
    stage_validate(r, config, out)
    write_manifest(out, "validate", [args.input], config, {"shape": [r.n_assets, r.n_days]})


def cmd_compare(args, config):
    out = _mkdir(args.out)
    try:
        a, b = MetricsReport.load(args.report_a), MetricsReport.load(args.report_b)
    except (KeyError, TypeError, json.JSONDecodeError) as exc:
        raise DataError(f"not a metrics report: {exc}") from None
    write_json(out / "compare.json", compare_reports(a, b))
    write_manifest(out, "compare", [args.report_a, args.report_b], config)


def cmd_baseline(args, config):
    out = _mkdir(args.out)
    r = load_panel(args.input, config)
    column = config.fit_column or r.assets[0]
    if column not in r.assets:
        raise DataError(f"column {column!r} not in {Path(args.input).name}")
    series = r.returns[r.assets.index(column)]
    rng = _stream(config.seed, _BASELINE_KEY)
    if config.model == "gbm":
        params = fit_gbm(series)
        sim = simulate_gbm(params, config.days, rng)
        doc = {"model": "gbm", **dataclasses.asdict(params)}
    else:
        fit = fit_garch11(series, "gaussian" if config.model == "garch-gaussian" else "student_t")
        sim = simulate_garch11(fit.params, config.days, rng)
        doc = {"model": config.model, **fit.params.to_dict(), "loglik": fit.loglik,
               "n_iter": fit.n_iter}
    doc["fit_column"] = column
    write_json(out / "params.json", doc)
    write_returns_csv(ReturnPanel([column], sim_day_labels(config.days), sim[None, :]),
                      out / "baseline.csv")
    write_manifest(out, "baseline", [args.input], config)


def cmd_make_fixture(args, config):
    out = _mkdir(args.out)
    prices = make_fixture(config.n_assets, config.n_days, config.seed, config.closed_days)
    write_price_csv(prices, out / "prices.csv")
    write_manifest(out, "make-fixture", [], config,
                   {"shape": [prices.n_assets, prices.n_days]})


def cmd_pipeline(args, config):
    """analyze -> simulate -> expand -> validate, one subdirectory per stage."""
    out = _mkdir(args.out)
    r = load_panel(args.input, config)
    lib = stage_analyze(r, config, _mkdir(out / "analyze"))
    scenario = stage_simulate(lib, out / "analyze" / "library.json", config,
                              _mkdir(out / "simulate"), args.threads)
    final, info = scenario, None
    if config.extra_assets:
        final, info = stage_expand(scenario, config, _mkdir(out / "expand"))
    extra = {"shapes": {"input": [r.n_assets, r.n_days],
                        "scenario": [scenario.n_assets, scenario.n_days],
                        "final": [final.n_assets, final.n_days]},
             "expansion": info}
    if not args.skip_validate:
        ref = stage_validate(r, config, _mkdir(out / "validate" / "reference"))
        rep = stage_validate(final, config, _mkdir(out / "validate" / "scenario"))
        write_json(out / "validate" / "compare.json", compare_reports(ref, rep))
    write_manifest(out, "pipeline", [args.input], config, extra)


# ---------------------------------------------------------------- parser

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _ratio_cap_arg(text):
    try:
        return parse_ratio_cap(text)
    except UsageError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _common(p, threads=False):
    p.add_argument("--out", required=True, metavar="DIR", help="output directory")
    p.add_argument("--config", metavar="FILE", help="flat key = value configuration file")
    p.add_argument("--seed", type=int, default=argparse.SUPPRESS)
    p.add_argument("-v", "--verbose", action="count", default=argparse.SUPPRESS,
                   help="log progress (repeat for debug output)")
    if threads:
        p.add_argument("--threads", type=int, default=1,
                       help="worker threads; results do not depend on it")


def _input_opts(p):
    p.add_argument("input", help="day-major CSV (first column day label, one column per asset)")
    p.add_argument("--kind", choices=("prices", "returns"), default=argparse.SUPPRESS)
    p.add_argument("--errors", choices=("raise", "reject"), default=argparse.SUPPRESS,
                   help="non-positive prices: abort, or reject the asset")
    p.add_argument("--keep-closed-days", dest="drop_closed_days", action="store_false",
                   default=argparse.SUPPRESS, help="keep days on which every return is zero")


def _analysis_opts(p):
    p.add_argument("--theta", type=float, default=argparse.SUPPRESS,
                   help="directional-change threshold (default 0.05)")
    p.add_argument("--window-len", dest="L", type=int, default=argparse.SUPPRESS,
                   help="window length in days (default 20)")


def _simulate_opts(p):
    p.add_argument("--target-days", "--days", dest="target_days", type=int,
                   default=argparse.SUPPRESS, help="scenario length (default 12500)")
    p.add_argument("--first-sign", choices=FIRST_SIGNS, default=argparse.SUPPRESS)


def _expand_opts(p):
    p.add_argument("--extra", dest="extra_assets", type=int, default=argparse.SUPPRESS,
                   help="artificial assets to add")
    p.add_argument("--drop-originals", action="store_true", default=argparse.SUPPRESS)
    p.add_argument("--ratio-cap", type=_ratio_cap_arg, default=argparse.SUPPRESS,
                   help="trend-ratio cap for artificial assets: a number, 'auto' or 'none'")
    p.add_argument("--max-rounds", type=int, default=argparse.SUPPRESS)


def _metric_opts(p):
    for flag in ("rolling-window", "rolling-step", "acf-lags", "abs-acf-lags",
                 "similarity-window", "similarity-step"):
        p.add_argument(f"--{flag}", type=int, default=argparse.SUPPRESS)


def build_parser():
    parser = _Parser(prog="trendsynth", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("ingest", help="clean a price or returns CSV into a returns CSV")
    _input_opts(p)
    _common(p)

    p = sub.add_parser("analyze", help="build a trend library from a reference panel")
    _input_opts(p)
    _analysis_opts(p)
    _common(p)

    p = sub.add_parser("simulate", help="synthesize a scenario from a trend library")
    p.add_argument("library", help="library.json written by analyze")
    p.add_argument("--sequence", metavar="FILE", help="file of library trend indices to replay")
    _simulate_opts(p)
    _common(p, threads=True)

    p = sub.add_parser("expand", help="add PCA-drawn artificial assets to a returns CSV")
    p.add_argument("input", help="returns CSV")
    _expand_opts(p)
    p.add_argument("--theta", type=float, default=argparse.SUPPRESS)
    _common(p)

    p = sub.add_parser("validate", help="stylized-facts report of a panel")
    _input_opts(p)
    p.add_argument("--theta", type=float, default=argparse.SUPPRESS)
    _metric_opts(p)
    _common(p)

    p = sub.add_parser("compare", help="deltas between two metrics reports")
    p.add_argument("report_a")
    p.add_argument("report_b")
    _common(p)

    p = sub.add_parser("baseline", help="fit and simulate a GBM or GARCH(1,1) baseline")
    _input_opts(p)
    p.add_argument("--model", choices=MODELS, default=argparse.SUPPRESS)
    p.add_argument("--fit", dest="fit_column", metavar="COLUMN", default=argparse.SUPPRESS,
                   help="asset column to fit (default: the first)")
    p.add_argument("--days", type=int, default=argparse.SUPPRESS, help="simulated days")
    _common(p)

    p = sub.add_parser("make-fixture", help="write a synthetic reference price panel")
    p.add_argument("--assets", dest="n_assets", type=int, default=argparse.SUPPRESS)
    p.add_argument("--days", dest="n_days", type=int, default=argparse.SUPPRESS,
                   help="trading days of returns after closed days are removed")
    p.add_argument("--closed-days", type=int, default=argparse.SUPPRESS,
                   help="all-zero days to insert")
    _common(p)

    p = sub.add_parser("pipeline", help="analyze, simulate, expand and validate in one run")
    _input_opts(p)
    _analysis_opts(p)
    _simulate_opts(p)
    _expand_opts(p)
    _metric_opts(p)
    p.add_argument("--skip-validate", action="store_true")
    _common(p, threads=True)
    return parser


COMMANDS = {"ingest": cmd_ingest, "analyze": cmd_analyze, "simulate": cmd_simulate,
            "expand": cmd_expand, "validate": cmd_validate, "compare": cmd_compare,
            "baseline": cmd_baseline, "make-fixture": cmd_make_fixture,
            "pipeline": cmd_pipeline}

_DATA_ERRORS = (DataError, PanelError, LibraryError, DegenerateSeriesError, GarchFitError,
                FileNotFoundError, ValueError)


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    if getattr(args, "threads", 1) < 1:
        parser.error("--threads must be >= 1")
    try:
        config = resolve_config(args)
    except UsageError as exc:
        print(f"trendsynth {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        COMMANDS[args.command](args, config)
    except UsageError as exc:
        print(f"trendsynth {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except _DATA_ERRORS as exc:
        print(f"trendsynth {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
