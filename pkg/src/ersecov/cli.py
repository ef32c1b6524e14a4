"""Batch command-line front end.

Every command writes its outputs plus ``manifest.json`` (parameters, seed,
input digests) into the output directory.  Files are written to a temporary
name and renamed into place.

Output layouts
--------------
report-corr  ``<panel>_rolling_corr.csv`` (date, mean_corr, min_corr) and
             ``summary.csv`` (statistic x panel).
estimate     ``cov_<strategy>.csv`` (n x n with asset header row/column),
             ``eigen_<strategy>.csv``, ``weights_<strategy>.csv``,
             ``deviation_profile.csv``, ``summary.csv`` and, with ``--trace``,
             ``trace_<strategy>.jsonl`` (one rotation step per line).
backtest     ``metrics.csv`` (strategy x metric, NA for unavailable rows),
             ``oos_returns.csv``, ``conditions.csv``, ``weights.csv``
             (date, asset, weight, strategy), ``tests.csv`` (strategy_pair,
             test, statistic, p_value, stars) and ``subperiods.csv``.
sweep        ``sweep_delta.csv`` / ``sweep_window.csv`` in long format
             (parameter, value, strategy, metrics...).
subsample    ``per_draw.csv`` and ``summary.csv``.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import math
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import __version__
from .backtest import (
    METRIC_NAMES,
    BacktestConfig,
    pairwise_tests,
    random_subsample_experiment,
    rolling_backtest,
    subperiod_metrics,
    window_sweep,
)
from .data import (
    MissingPolicy,
    load_returns_csv,
    panel_summary,
    rolling_correlation_report,
    save_returns_csv,
    synthesize_panel,
)
from .erse import DEFAULT_DELTA
from .errors import ErsecovError
from .inference import BootstrapConfig
from .portfolio import gmv_weights
from .spectral import deviation_profile, sample_moments, spectral_decompose
from .strategies import StrategySpec, UnknownStrategyError, default_strategies, parse_strategy
from .synthetic import random_market

logger = logging.getLogger("ersecov")

RECOMMENDED_DELTA_BAND = (0.15, 0.35)
NA = "NA"


class UsageError(Exception):
    pass


def _fmt(x) -> str:
    if x is None:
        return NA
    if isinstance(x, (float, np.floating)):
        return NA if math.isnan(x) else repr(float(x))
    return str(x)


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _write_csv(path: Path, header, rows) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    _atomic_write(path, buf.getvalue())


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _safe_name(name: str) -> str:
    return "".join(c if c.isalnum() or c in "-_." else "_" for c in name)


class Run:
    """Collects outputs and writes the manifest last."""

    def __init__(self, args, command: str):
        self.out = Path(args.out)
        self.command = command
        self.outputs: list[str] = []
        self.manifest = {
            "command": command,
            "version": __version__,
            "inputs": {str(p): _sha256(p) for p in (args.input or [])},
            "parameters": {},
        }

    def csv(self, name: str, header, rows) -> None:
        _write_csv(self.out / name, header, rows)
        self.outputs.append(name)

    def text(self, name: str, text: str) -> None:
        _atomic_write(self.out / name, text)
        self.outputs.append(name)

    def finish(self) -> None:
        self.manifest["outputs"] = sorted(self.outputs)
        _atomic_write(self.out / "manifest.json",
                      json.dumps(self.manifest, indent=2, sort_keys=True) + "\n")


def _policy(args) -> MissingPolicy:
    return MissingPolicy(max_missing_per_asset=args.max_missing)


def _load_panels(args):
    if not args.input:
        raise UsageError("at least one --input is required")
    if any(not str(p).strip() for p in args.input):
        raise UsageError("--input path is empty")
    return [load_returns_csv(p, _policy(args)) for p in args.input]


def _load_panel(args):
    panels = _load_panels(args)
    return panels[0] if len(panels) == 1 else synthesize_panel(panels)


def _strategies(args, default=None) -> list[StrategySpec]:
    if not args.estimator:
        specs = default if default is not None else default_strategies()
    else:
        try:
            specs = [parse_strategy(s) for s in args.estimator]
        except UnknownStrategyError as exc:
            raise UsageError(str(exc)) from None
        except ValueError as exc:
            raise UsageError(f"bad --estimator: {exc}") from None
    delta = getattr(args, "delta", None)
    if delta is not None:
        specs = [
            StrategySpec("ERSE", {"delta": delta})
            if s.label == "ERSE" and "delta" not in _explicit_params(args, s) else s
            for s in specs
        ]
    return specs


def _explicit_params(args, spec) -> set:
    for text in args.estimator or []:
        label, _, rest = text.partition(":")
        if label.strip().upper() == spec.label and "delta" in rest.lower():
            return {"delta"}
    return set()


def _grid(text: str) -> list[float]:
    """``a:b:step`` (inclusive) or a comma list."""
    try:
        if ":" in text:
            a, b, step = (float(v) for v in text.split(":"))
            if step <= 0 or b < a:
                raise ValueError
            k = int(math.floor((b - a) / step + 1e-9))
            return [round(a + i * step, 12) for i in range(k + 1)]
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"invalid grid {text!r}; use a:b:step or a comma list") from None


# --------------------------------------------------------------------- commands


def cmd_report_corr(args) -> int:
    panels = _load_panels(args)
    if args.combine and len(panels) > 1:
        panels = [synthesize_panel(panels)]
    run = Run(args, "report-corr")
    run.manifest["parameters"] = {"window": args.window, "max_missing": args.max_missing}
    summaries = {}
    for p in panels:
        records = rolling_correlation_report(p, args.window)
        run.csv(f"{_safe_name(p.name)}_rolling_corr.csv", ["date", "mean_corr", "min_corr"],
                [(r.date, r.mean_corr, r.min_corr) for r in records])
        summaries[p.name] = panel_summary(p)
        run.manifest.setdefault("dropped_assets", {})[p.name] = list(p.dropped)
    keys = list(next(iter(summaries.values())))
    run.csv("summary.csv", ["statistic", *summaries],
            [(k, *(summaries[name][k] for name in summaries)) for k in keys])
    run.finish()
    return 0


def cmd_estimate(args) -> int:
    panel = _load_panel(args)
    specs = _strategies(args, default=[StrategySpec("ERSE")])
    L = args.window if args.window is not None else panel.n_periods
    if not 2 <= L <= panel.n_periods:
        raise UsageError(f"--window must lie in [2, {panel.n_periods}], got {L}")
    window = panel.window(panel.n_periods - L, panel.n_periods)
    moments = sample_moments(window)
    model = spectral_decompose(moments)
    profile = deviation_profile(model)
    run = Run(args, "estimate")
    run.manifest["parameters"] = {
        "window": L,
        "window_dates": [window.dates[0], window.dates[-1]],
        "estimators": [{"label": s.label, "name": s.name, **s.params} for s in specs],
    }
    run.csv("deviation_profile.csv", ["index", "eigenvalue", "deviation"],
            [(i, model.eigenvalues[i], profile.degrees[i]) for i in range(model.n)])

    status = 0
    summary = []
    assets = list(window.assets)
    for spec in specs:
        name = _safe_name(spec.name)
        if not spec.implemented:
            logger.error("%s is recognized but not implemented", spec.label)
            summary.append((spec.name, None, None, "not implemented"))
            status = 1
            continue
        try:
            est = spec.fit(window)
        except ErsecovError as exc:
            logger.error("%s failed: %s", spec.name, exc)
            summary.append((spec.name, None, None, str(exc)))
            status = 1
            continue
        weights, weight_error = None, ""
        if est is not None:
            try:
                weights = gmv_weights(est, spec.name)
            except ErsecovError as exc:
                weight_error = f"no GMV weights: {exc}"
        if est is None:
            w = np.full(len(assets), 1.0 / len(assets))
            run.csv(f"weights_{name}.csv", ["asset", "weight"], zip(assets, w))
            summary.append((spec.name, None, 0, ""))
            continue
        cov = est.covariance
        run.csv(f"cov_{name}.csv", ["asset", *assets],
                ([a, *cov[i]] for i, a in enumerate(assets)))
        if weights is not None:
            run.csv(f"weights_{name}.csv", ["asset", "weight"], zip(assets, weights.weights))
        if est.eigenvalues_hat is not None:
            T_hat = est.eigenvectors_hat.sum(axis=0) ** 2
            run.csv(f"eigen_{name}.csv",
                    ["index", "eigenvalue_sample", "eigenvalue_hat", "deviation_sample",
                     "deviation_hat"],
                    [(i, model.eigenvalues[i], est.eigenvalues_hat[i], profile.degrees[i],
                      T_hat[i]) for i in range(model.n)])
        else:
            w = np.linalg.eigvalsh(cov)
            run.csv(f"eigen_{name}.csv", ["index", "eigenvalue"], enumerate(w))
        if args.trace and est.rotation_trace:
            run.text(f"trace_{name}.jsonl",
                     "".join(json.dumps(s.to_dict()) + "\n" for s in est.rotation_trace))
        summary.append((spec.name, est.condition_number, est.iterations, weight_error))
    run.csv("summary.csv", ["strategy", "condition_number", "iterations", "error"], summary)
    run.finish()
    return status


def _metric_rows(names, metrics):
    for name in names:
        m = metrics.get(name)
        yield (name, *((m[k] if m else None) for k in METRIC_NAMES))


def _backtest_config(args, specs) -> BacktestConfig:
    return BacktestConfig(window_L=args.window if args.window is not None else 120,
                          strategies=specs, start_index=args.start, rng_seed=args.seed)


def cmd_backtest(args) -> int:
    panel = _load_panel(args)
    specs = _strategies(args)
    config = _backtest_config(args, specs)
    boot = BootstrapConfig(n_samples_B=args.B, mean_block_b=args.block, rng_seed=args.seed)
    result = rolling_backtest(panel, config)
    run = Run(args, "backtest")
    run.manifest["parameters"] = {
        "window": config.window_L,
        "start": config.first_period,
        "seed": args.seed,
        "B": args.B,
        "block": args.block,
        "reference": args.reference,
        "estimators": [{"label": s.label, "name": s.name, **s.params} for s in specs],
        "n_assets": panel.n_assets,
        "oos_periods": len(result.dates),
    }
    run.manifest["failures"] = result.failures
    names = result.strategy_names
    run.csv("metrics.csv", ["strategy", *METRIC_NAMES], _metric_rows(names, result.metrics))
    live = [n for n in names if n in result.oos_returns]
    run.csv("oos_returns.csv", ["date", *live],
            ([d, *(result.oos_returns[n][k] for n in live)] for k, d in enumerate(result.dates)))
    run.csv("conditions.csv", ["date", *live],
            ([d, *(result.condition_history[n][k] for n in live)]
             for k, d in enumerate(result.dates)))

    def weight_rows():
        for k, d in enumerate(result.dates):
            for n in live:
                w = result.weight_history[n][k]
                if w is None:
                    continue
                for a, x in zip(result.assets, w.weights):
                    yield (d, a, x, n)

    run.csv("weights.csv", ["date", "asset", "weight", "strategy"], weight_rows())
    tests = pairwise_tests(result, args.reference, boot)
    run.csv("tests.csv", ["strategy_pair", "test", "statistic", "p_value", "stars"],
            ((t.strategy_pair, t.test, t.statistic, t.p_value, t.stars) for t in tests))
    if len(result.dates) >= 4:
        first, second = subperiod_metrics(result)
        rows = [("1", *r) for r in _metric_rows(names, first)]
        rows += [("2", *r) for r in _metric_rows(names, second)]
        run.csv("subperiods.csv", ["subperiod", "strategy", *METRIC_NAMES], rows)
    run.finish()
    return 0


def cmd_sweep(args) -> int:
    if args.deltas is None and args.windows is None:
        raise UsageError("give --deltas and/or --windows")
    panel = _load_panel(args)
    run = Run(args, "sweep")
    params = {"seed": args.seed}
    if args.deltas is not None:
        deltas = _grid(args.deltas)
        if any(not 0 <= d <= 1 for d in deltas):
            raise UsageError("every delta must lie in [0, 1]")
        baselines = [s for s in _strategies(args, default=[StrategySpec(x) for x in
                                                           ("EW", "SAMPLE", "LIN1P", "LINC")])
                     if s.label != "ERSE"]
        erse_specs = [StrategySpec("ERSE", {"delta": d}) for d in deltas]
        config = _backtest_config(args, baselines + erse_specs)
        result = rolling_backtest(panel, config)
        rows = []
        for d, spec in zip(deltas, erse_specs):
            for s in baselines:
                rows.append(("delta", d, s.name, *_metric_values(result.metrics.get(s.name))))
            rows.append(("delta", d, "ERSE", *_metric_values(result.metrics.get(spec.name))))
        run.csv("sweep_delta.csv", ["parameter", "value", "strategy", *METRIC_NAMES], rows)
        params.update(deltas=deltas, window=config.window_L, start=config.first_period,
                      recommended_delta_band=list(RECOMMENDED_DELTA_BAND))
    if args.windows is not None:
        windows = [int(w) for w in _grid(args.windows)]
        specs = _strategies(args, default=[StrategySpec(x) for x in
                                           ("EW", "SAMPLE", "LIN1P", "LINC", "ERSE")])
        config = BacktestConfig(window_L=min(windows), strategies=specs,
                                start_index=args.start, rng_seed=args.seed)
        try:
            results = window_sweep(panel, windows, config)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        rows = []
        ranges = {}
        for L, res in results.items():
            ranges[str(L)] = [res.dates[0], res.dates[-1]]
            for name in res.strategy_names:
                rows.append(("window", L, name, *_metric_values(res.metrics.get(name))))
        run.csv("sweep_window.csv", ["parameter", "value", "strategy", *METRIC_NAMES], rows)
        params.update(windows=windows, oos_ranges=ranges,
                      common_start=args.start if args.start else max(windows) + 1)
    run.manifest["parameters"] = params
    run.finish()
    return 0


def _metric_values(m):
    return tuple(m[k] if m else None for k in METRIC_NAMES)


def cmd_subsample(args) -> int:
    panel = _load_panel(args)
    specs = _strategies(args)
    config = _backtest_config(args, specs)
    try:
        exp = random_subsample_experiment(panel, args.draws, args.subset, config, args.reference)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    run = Run(args, "subsample")
    names = [s.name for s in specs]
    run.manifest["parameters"] = {
        "draws": args.draws, "subset": args.subset, "seed": args.seed,
        "window": config.window_L, "reference": args.reference,
        "estimators": [{"label": s.label, "name": s.name, **s.params} for s in specs],
    }
    run.csv("per_draw.csv", ["draw", *names, "columns"],
            ((k + 1, *(d[n] for n in names), " ".join(map(str, c)))
             for k, (d, c) in enumerate(zip(exp.draws, exp.columns))))
    cols = ["mean", "std", "max", "min", "win_rate", "mean_difference", "p_value", "stars"]
    run.csv("summary.csv", ["strategy", *cols],
            ((n, *((exp.summary[n] or {}).get(c) for c in cols)) for n in names))
    run.finish()
    return 0


def cmd_simulate(args) -> int:
    rng = np.random.default_rng(args.seed)
    market = random_market(args.n, rng)
    panel = market.simulate(args.T, rng, name="synthetic")
    out = Path(args.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_returns_csv(panel, out)
    return 0


# ------------------------------------------------------------------------ parser


def build_parser() -> argparse.ArgumentParser:
    default_out = os.environ.get("ERSECOV_OUT", "ersecov_out")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--input", action="append", metavar="CSV",
                        help="returns file (repeatable; several files are combined)")
    common.add_argument("--out", default=default_out,
                        help="output directory (default: $ERSECOV_OUT or ./ersecov_out)")
    common.add_argument("--max-missing", type=int, default=10,
                        help="drop assets with more missing cells than this")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("-v", "--verbose", action="store_true")

    est = argparse.ArgumentParser(add_help=False)
    est.add_argument("--estimator", action="append", metavar="LABEL[:k=v,...]",
                     help="SAMPLE, EW, LIN1P, LINC or ERSE[:delta=x] (repeatable)")
    est.add_argument("--delta", type=float, default=None,
                     help=f"threshold for ERSE estimators without an explicit delta "
                          f"(default {DEFAULT_DELTA})")
    est.add_argument("--window", type=int, default=None, help="estimation window L")

    parser = argparse.ArgumentParser(prog="ersecov", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("report-corr", parents=[common], help="rolling correlation report")
    p.add_argument("--window", type=int, default=120)
    p.add_argument("--combine", action="store_true", help="combine all inputs into one panel")
    p.set_defaults(func=cmd_report_corr)

    p = sub.add_parser("estimate", parents=[common, est],
                       help="fit estimators on the trailing window")
    p.add_argument("--trace", action="store_true", help="write ERSE rotation steps as JSON lines")
    p.set_defaults(func=cmd_estimate)

    boot = argparse.ArgumentParser(add_help=False)
    boot.add_argument("--start", type=int, default=None,
                      help="1-based period of the first OOS return (default L + 1)")
    boot.add_argument("--B", type=int, default=1000, help="bootstrap replicates")
    boot.add_argument("--block", type=float, default=5.0, help="mean bootstrap block length")
    boot.add_argument("--reference", default="ERSE", help="strategy the others are tested against")

    p = sub.add_parser("backtest", parents=[common, est, boot], help="rolling GMV backtest")
    p.set_defaults(func=cmd_backtest)

    p = sub.add_parser("sweep", parents=[common, est, boot], help="delta and/or window sweeps")
    p.add_argument("--deltas", default=None, help="grid a:b:step or list, e.g. 0.05:1:0.05")
    p.add_argument("--windows", default=None, help="grid a:b:step or list, e.g. 60,120,240")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("subsample", parents=[common, est, boot],
                       help="backtests on random asset subsets")
    p.add_argument("--draws", type=int, default=150)
    p.add_argument("--subset", type=int, default=200)
    p.set_defaults(func=cmd_subsample)

    p = sub.add_parser("simulate", help="write a synthetic one-factor panel")
    p.add_argument("--n", type=int, default=50)
    p.add_argument("--T", type=int, default=600)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_simulate, input=None, verbose=False)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        parser.error(str(exc))  # exits with status 2
    except (ErsecovError, ValueError, OSError) as exc:
        print(f"ersecov: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
