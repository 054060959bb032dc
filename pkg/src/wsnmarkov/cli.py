"""Command line pipeline: ingest -> fit -> detect -> eval -> report, plus bench.

Settings come from command line flags, then an optional ``--config`` file,
then built-in defaults. The config file holds one ``key = value`` per line
(``#`` starts a comment); keys are the long flag names with dashes or
underscores, e.g.::

    mote_id = 6
    theta = 0.05
    train-fraction = 0.7

Exit status: 0 on success, 1 on usage errors, 2 on data errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from dataclasses import dataclass, fields
from datetime import datetime
from pathlib import Path

import numpy as np

from . import __version__
from .evaluation import (evaluate, read_labels_csv, write_node_rates_csv,
                         write_ranking_csv, rank_nodes)
from .exceptions import DataError, WSNMarkovError
from .ingestion import (DEFAULT_MOTE_RANGE, FEATURES, read_log, read_series_csv,
                        write_series_csv, motes_in)
from .markov import (DetectorConfig, Model, load_model, model_to_dict, read_flags_csv,
                     save_model, write_flags_csv)
from .pipeline import (Split, detect_nodes, fit_model, rates_from_results, run_benchmark,
                       series_for_nodes)
from .synthesis import LOW_PROB, MOTE6_TPM, ZERO_PROB, write_bundle

log = logging.getLogger("wsnmarkov")

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    input: str | None = None
    series: str | None = None
    output: str = "out"
    feature: str = "temperature"
    mote_id: int = 6
    motes: str | None = None
    mote_min: int = DEFAULT_MOTE_RANGE[0]
    mote_max: int = DEFAULT_MOTE_RANGE[1]
    interval: int = 3600
    k: int = 5
    theta: float = 0.05
    window_size: int = 2
    epsilon: float | None = None
    p_floor: float = 1e-12
    alpha: float = 0.0
    z_threshold: float = 3.0
    train_fraction: float = 0.7
    train_start: datetime | None = None
    train_end: datetime | None = None
    test_start: datetime | None = None
    test_end: datetime | None = None
    seed: int = 0
    model: str | None = None
    scope: str = "test"
    refit: bool = False
    jobs: int = 1
    flags: str | None = None
    labels: str | None = None
    slack: int = 0
    node_rates: str | None = None
    n: int = 10_000
    rate: float = 0.01
    mode: str = ZERO_PROB
    p_max: float = 0.0
    truth: str | None = None
    bench_model: str = "truth"
    train_n: int = 10_000

    def validate(self) -> None:
        if self.feature not in FEATURES:
            raise UsageError(f"feature must be one of {', '.join(FEATURES)}")
        if self.interval <= 0:
            raise UsageError("interval must be a positive number of seconds")
        if self.k < 1:
            raise UsageError("k must be at least 1")
        if not 0 <= self.theta <= 1:
            raise UsageError("theta must lie in [0, 1]")
        if self.window_size < 2:
            raise UsageError("window-size must be at least 2")
        if self.p_floor <= 0:
            raise UsageError("p-floor must be positive")
        if self.alpha < 0:
            raise UsageError("alpha must be non-negative")
        if self.z_threshold <= 0:
            raise UsageError("z-threshold must be positive")
        if not 0 <= self.rate <= 1:
            raise UsageError("rate must lie in [0, 1]")
        try:
            self.split.validate()
        except ValueError as exc:
            raise UsageError(str(exc)) from exc

    @property
    def split(self) -> Split:
        return Split(self.train_fraction, self.train_start, self.train_end,
                     self.test_start, self.test_end)

    @property
    def detector(self) -> DetectorConfig:
        return DetectorConfig(self.theta, self.window_size, self.epsilon, self.p_floor)


_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _coerce(name: str, raw):
    if raw is None or not isinstance(raw, str):
        return raw
    typ = _FIELD_TYPES[name]
    try:
        if "datetime" in typ:
            return datetime.fromisoformat(raw)
        if typ.startswith("int"):
            return int(raw)
        if typ.startswith("float"):
            return float(raw)
        if typ == "bool":
            if raw.lower() not in ("1", "0", "true", "false", "yes", "no", "on", "off"):
                raise ValueError(raw)
            return raw.lower() in ("1", "true", "yes", "on")
    except ValueError as exc:
        raise UsageError(f"bad value for {name}: {raw!r}") from exc
    return raw


def read_config_file(path: str) -> dict:
    out = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read config file {path}: {exc}") from exc
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip().replace("-", "_")
        if not sep or key not in _FIELD_TYPES:
            raise UsageError(f"{path}:{lineno}: expected 'key = value' with a known key")
        out[key] = _coerce(key, value.strip())
    return out


# -- argument parsing ---------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _iso(value: str) -> datetime:
    try:
        return datetime.fromisoformat(value)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"not an ISO date/time: {value!r}") from exc


def _add_series_source(p):
    p.add_argument("--input", help="raw whitespace-delimited sensor log")
    p.add_argument("--series", help="series CSV written by 'ingest' (alternative to --input)")
    p.add_argument("--feature", choices=FEATURES)
    p.add_argument("--interval", type=int, help="resampling interval in seconds (default 3600)")
    p.add_argument("--mote-min", type=int)
    p.add_argument("--mote-max", type=int)


def _add_split(p):
    p.add_argument("--train-fraction", type=float, help="leading fraction used for training (default 0.7)")
    p.add_argument("--train-start", type=_iso)
    p.add_argument("--train-end", type=_iso)
    p.add_argument("--test-start", type=_iso)
    p.add_argument("--test-end", type=_iso)


def _add_detector(p):
    p.add_argument("--theta", type=float, help="per-transition threshold (default 0.05)")
    p.add_argument("--window-size", type=int, help="window length in states (default 2)")
    p.add_argument("--epsilon", type=float, help="window log-likelihood threshold override")
    p.add_argument("--p-floor", type=float)


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False, argument_default=argparse.SUPPRESS)
    common.add_argument("--config", help="key = value settings file")
    common.add_argument("-o", "--output", help="output directory (default ./out)")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = _Parser(prog="wsnmarkov", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, help_):
        return sub.add_parser(name, help=help_, parents=[common],
                              argument_default=argparse.SUPPRESS)

    p = add("ingest", "parse a log and write per-node resampled series")
    _add_series_source(p)
    p.add_argument("--motes", help="comma separated mote ids or 'all' (default: --mote-id)")
    p.add_argument("--mote-id", type=int)

    p = add("fit", "fit bins and a transition matrix on the training split")
    _add_series_source(p)
    _add_split(p)
    _add_detector(p)
    p.add_argument("--mote-id", type=int)
    p.add_argument("-k", "--k", type=int, help="number of states (default 5)")
    p.add_argument("--alpha", type=float, help="additive smoothing constant (default 0)")

    p = add("detect", "flag low-probability transitions/windows")
    _add_series_source(p)
    _add_split(p)
    _add_detector(p)
    p.add_argument("--model", help="model JSON written by 'fit'")
    p.add_argument("--mote-id", type=int)
    p.add_argument("--motes", help="comma separated mote ids or 'all' (default: trained mote)")
    p.add_argument("--scope", choices=("test", "all"), help="score the test split or the whole series")
    p.add_argument("--refit", action="store_const", const="true",
                   help="fit a separate model per node on its training split")
    p.add_argument("--jobs", type=int)

    p = add("eval", "compare a flags file with labels")
    p.add_argument("--flags")
    p.add_argument("--labels")
    p.add_argument("--slack", type=int, help="position tolerance for label matches (default 0)")
    p.add_argument("--node-rates", help="node_rates.csv to embed in the report")

    p = add("bench", "synthetic Markov vs Z-score benchmark")
    _add_detector(p)
    p.add_argument("--seed", type=int)
    p.add_argument("--n", type=int, help="test chain length (default 10000)")
    p.add_argument("--train-n", type=int, help="clean training chain length (default 10000)")
    p.add_argument("--rate", type=float, help="fraction of positions injected (default 0.01)")
    p.add_argument("--mode", choices=(ZERO_PROB, LOW_PROB))
    p.add_argument("--p-max", type=float)
    p.add_argument("--z-threshold", type=float)
    p.add_argument("--truth", help="JSON file with a 'probs' matrix (default: MOTE6_TPM)")
    p.add_argument("--bench-model", choices=("truth", "learned"))

    add("report", "summarize the files in an output directory")
    return parser


def resolve_config(args: argparse.Namespace) -> RunConfig:
    values = {}
    if getattr(args, "config", None):
        values.update(read_config_file(args.config))
    for key, val in vars(args).items():
        if key in _FIELD_TYPES:
            values[key] = _coerce(key, val)
    cfg = RunConfig(**values)
    cfg.validate()
    return cfg


# -- helpers ------------------------------------------------------------------------

def _outdir(cfg: RunConfig) -> Path:
    d = Path(cfg.output)
    d.mkdir(parents=True, exist_ok=True)
    return d


def _parse_motes(spec: str | None, default: int, available=None) -> list[int]:
    if spec is None:
        return [default]
    if spec.strip().lower() == "all":
        if available is None:
            raise UsageError("'all' motes needs a raw --input log")
        return list(available)
    try:
        return sorted({int(x) for x in spec.split(",") if x.strip()})
    except ValueError as exc:
        raise UsageError(f"bad mote list {spec!r}") from exc


def _load_records(cfg: RunConfig):
    if not cfg.input:
        raise UsageError("--input is required")
    if not Path(cfg.input).is_file():
        raise DataError(f"input file not found: {cfg.input}")
    records, summary = read_log(cfg.input, (cfg.mote_min, cfg.mote_max))
    if not records:
        raise DataError(f"{cfg.input}: no rows accepted ({summary.rows_read} read)")
    return records, summary


def _series_by_node(cfg: RunConfig, motes_spec: str | None, default_mote: int):
    if cfg.series:
        if cfg.input:
            raise UsageError("give either --input or --series, not both")
        if not Path(cfg.series).is_file():
            raise DataError(f"series file not found: {cfg.series}")
        motes = _parse_motes(motes_spec, default_mote)
        if len(motes) != 1:
            raise UsageError("a series CSV holds exactly one mote")
        return {motes[0]: read_series_csv(cfg.series, motes[0], cfg.feature, cfg.interval)}
    records, _ = _load_records(cfg)
    motes = _parse_motes(motes_spec, default_mote, motes_in(records))
    series = series_for_nodes(records, motes, cfg.feature, cfg.interval)
    if not series:
        raise DataError("no readings for the selected mote(s)")
    return series


def _series_name(mote: int, feature: str) -> str:
    return f"series_mote{mote}_{feature}.csv"


# -- commands -----------------------------------------------------------------------

def cmd_ingest(cfg: RunConfig) -> int:
    records, summary = _load_records(cfg)
    out = _outdir(cfg)
    motes = _parse_motes(cfg.motes, cfg.mote_id, motes_in(records))
    series = series_for_nodes(records, motes, cfg.feature, cfg.interval)
    summary.write_json(out / "ingest_summary.json")
    if not series:
        raise DataError("none of the selected motes has readings")
    for mote, s in series.items():
        write_series_csv(s, out / _series_name(mote, cfg.feature))
        print(f"mote {mote}: {len(s)} points, {len(s.gaps)} gaps -> {_series_name(mote, cfg.feature)}")
    print(f"rows read {summary.rows_read}, accepted {summary.rows_accepted}")
    return EXIT_OK


def cmd_fit(cfg: RunConfig) -> int:
    series = _series_by_node(cfg, None, cfg.mote_id)[cfg.mote_id]
    train, _ = cfg.split.apply(series)
    model = fit_model(train, cfg.k, cfg.alpha, cfg.detector)
    out = _outdir(cfg)
    save_model(model, out / "model.json")
    print(f"mote {cfg.mote_id} {cfg.feature}: trained on {len(train)} points, k={cfg.k}")
    print("edges: " + ", ".join(f"{e:.4g}" for e in model.binner.edges))
    print(model.tpm.format_table())
    return EXIT_OK


def _load_model_cfg(cfg: RunConfig, args: argparse.Namespace) -> Model:
    if not cfg.model:
        raise UsageError("--model is required")
    if not Path(cfg.model).is_file():
        raise DataError(f"model file not found: {cfg.model}")
    model = load_model(cfg.model)
    # Explicit detector settings override the ones stored in the model.
    given = {k for k in ("theta", "window_size", "epsilon", "p_floor")
             if hasattr(args, k) or k in getattr(args, "_from_file", ())}
    if given:
        base = model.config
        model = Model(model.binner, model.tpm, DetectorConfig(
            cfg.theta if "theta" in given else base.theta,
            cfg.window_size if "window_size" in given else base.window_size,
            cfg.epsilon if "epsilon" in given else base.epsilon,
            cfg.p_floor if "p_floor" in given else base.p_floor), model.feature, model.trained_on)
    return model


def cmd_detect(cfg: RunConfig, args: argparse.Namespace) -> int:
    model = _load_model_cfg(cfg, args)
    default_mote = int(model.trained_on.get("mote_id", cfg.mote_id))
    if not hasattr(args, "feature") and "feature" not in getattr(args, "_from_file", ()):
        cfg.feature = model.feature
    if not hasattr(args, "interval") and "interval" not in getattr(args, "_from_file", ()):
        cfg.interval = int(model.trained_on.get("interval_s", cfg.interval))
    motes_spec = cfg.motes if cfg.motes is not None else (
        str(cfg.mote_id) if hasattr(args, "mote_id") else None)
    series = _series_by_node(cfg, motes_spec, default_mote)
    split = cfg.split if cfg.scope == "test" else None
    results = detect_nodes(series, model, split, cfg.refit, max(1, cfg.jobs))

    out = _outdir(cfg)
    for mote, res in results.items():
        if res.report.skipped_segments:
            log.warning("mote %s: %d segment(s) shorter than window_size=%d skipped",
                        mote, len(res.report.skipped_segments), model.config.window_size)
        if res.report.n_windows == 0:
            log.warning("mote %s: no window could be scored", mote)
        write_flags_csv(res.report.flags, out / f"flags_mote{mote}.csv")
        print(f"mote {mote}: {res.report.n_anomalies} / {res.report.n_windows} windows flagged")
    rates, windows, anomalies = rates_from_results(results)
    write_node_rates_csv(rates, windows, anomalies, out / "node_rates.csv")
    write_ranking_csv(rates, out / "node_ranking.csv")
    return EXIT_OK


def _read_node_rates(path: str) -> dict:
    import csv
    with open(path, newline="") as fh:
        return {int(r["mote_id"]): float(r["rate_pct"]) for r in csv.DictReader(fh)}


def cmd_eval(cfg: RunConfig) -> int:
    if not cfg.flags or not cfg.labels:
        raise UsageError("--flags and --labels are required")
    for path in (cfg.flags, cfg.labels):
        if not Path(path).is_file():
            raise DataError(f"file not found: {path}")
    flags = read_flags_csv(cfg.flags)
    labels = read_labels_csv(cfg.labels)
    universe = {(f.segment, f.position) for f in flags}
    rates = _read_node_rates(cfg.node_rates) if cfg.node_rates else {}
    report = evaluate(flags, labels, universe, cfg.slack, rates)
    out = _outdir(cfg)
    report.write_json(out / "metrics.json")
    print(f"tp={report.tp} fp={report.fp} fn={report.fn} tn={report.tn}")
    print(f"precision={report.precision:.4f} recall={report.recall:.4f} f1={report.f1:.4f}")
    return EXIT_OK


def cmd_bench(cfg: RunConfig) -> int:
    probs = MOTE6_TPM
    if cfg.truth:
        try:
            with open(cfg.truth) as fh:
                probs = np.asarray(json.load(fh)["probs"], dtype=float)
        except (OSError, KeyError, ValueError) as exc:
            raise DataError(f"cannot read truth matrix from {cfg.truth}: {exc}") from exc
    params = {"seed": cfg.seed, "n": cfg.n, "train_n": cfg.train_n, "rate": cfg.rate,
              "mode": cfg.mode, "p_max": cfg.p_max, "theta": cfg.theta,
              "z_threshold": cfg.z_threshold, "model": cfg.bench_model}
    t0 = time.perf_counter()
    try:
        res = run_benchmark(cfg.seed, cfg.n, cfg.rate, cfg.theta, cfg.z_threshold, probs,
                            cfg.mode, cfg.p_max, cfg.bench_model, cfg.train_n)
    except ValueError as exc:
        raise DataError(str(exc)) from exc
    elapsed = time.perf_counter() - t0
    out = _outdir(cfg)
    write_bundle(out / "bench", res.truth, res.sequence, res.labels, res.values)
    write_flags_csv(res.markov_flags, out / "flags_markov.csv")
    write_flags_csv(res.zscore_flags, out / "flags_zscore.csv")
    with open(out / "bench_metrics.json", "w") as fh:
        json.dump(res.metrics_dict(params), fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"{'method':<8} {'precision':>9} {'recall':>7} {'f1':>7}")
    for name, m in (("markov", res.markov), ("zscore", res.zscore_metrics)):
        print(f"{name:<8} {m.precision:>9.4f} {m.recall:>7.4f} {m.f1:>7.4f}")
    print(f"{len(res.labels)} injected transitions; wall-clock {elapsed:.3f} s")
    return EXIT_OK


def cmd_report(cfg: RunConfig) -> int:
    d = Path(cfg.output)
    if not d.is_dir():
        raise DataError(f"output directory not found: {d}")
    summary = {}
    if (d / "ingest_summary.json").is_file():
        summary["ingest"] = json.loads((d / "ingest_summary.json").read_text())
        print(f"ingest: {summary['ingest']['rows_accepted']} of {summary['ingest']['rows_read']} rows accepted")
    if (d / "model.json").is_file():
        model = load_model(d / "model.json")
        summary["model"] = {k: v for k, v in model_to_dict(model).items() if k != "counts"}
        print(f"model: {model.feature}, k={model.tpm.k}, theta={model.config.theta}")
        print(model.tpm.format_table())
    if (d / "node_rates.csv").is_file():
        rates = _read_node_rates(str(d / "node_rates.csv"))
        top, bottom = rank_nodes(rates)
        summary["node_rates"] = {str(k): v for k, v in rates.items()}
        summary["ranking"] = {"high": top, "low": bottom}
        print("highest anomaly rates: " + ", ".join(f"{m} ({rates[m]:.2f}%)" for m in top))
        print("lowest anomaly rates:  " + ", ".join(f"{m} ({rates[m]:.2f}%)" for m in bottom))
    for name in ("metrics.json", "bench_metrics.json"):
        if (d / name).is_file():
            summary[name.removesuffix(".json")] = json.loads((d / name).read_text())
            print(f"{name}: present")
    if not summary:
        raise DataError(f"nothing to report in {d}")
    with open(d / "report.json", "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s: %(message)s", stream=sys.stderr)
    try:
        if getattr(args, "config", None):
            args._from_file = set(read_config_file(args.config))
        cfg = resolve_config(args)
        if args.command == "ingest":
            return cmd_ingest(cfg)
        if args.command == "fit":
            return cmd_fit(cfg)
        if args.command == "detect":
            return cmd_detect(cfg, args)
        if args.command == "eval":
            return cmd_eval(cfg)
        if args.command == "bench":
            return cmd_bench(cfg)
        return cmd_report(cfg)
    except UsageError as exc:
        print(f"wsnmarkov: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (WSNMarkovError, OSError) as exc:
        print(f"wsnmarkov: error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
