"""Command-line front end.

Subcommands: ``simulate``, ``estimate``, ``rank``, ``cv``, ``forecast``,
``diagnose``. Every command takes ``--config`` (key=value file, see
:mod:`rtfm.config`) plus direct flags that override it; the thread count
falls back to the ``RTFM_THREADS`` environment variable when set nowhere
else. All CSV outputs carry an audit header (``# cmd=... # config: ...``)
sufficient to reproduce the run. Modes, rows and columns are 1-based in all
outputs.

Exit codes: 0 ok, 2 configuration error, 3 I/O error, 4 numeric failure.
"""

from __future__ import annotations

import argparse
import math
import os
import sys

import numpy as np

from . import __version__
from .config import RunConfig, _coerce, load_run_config, make_config, parse_config_values
from .estimator import estimate_factors, estimate_loadings
from .evaluate import ks_critical, ks_statistic
from .exceptions import (
    ConfigError,
    DataFormatError,
    DegenerateDataError,
    NumericError,
    RankDeficientError,
)
from .forecast import ForecastConfig, rolling_errors
from .harness import (
    rank_caps,
    resolve_kappa,
    resolve_tau,
    run_campaign,
    run_diagnostic_replication,
)
from .io import MAGIC, read_panel_csv, read_tensor_series, write_csv
from .ranks import RankConfig, estimate_ranks
from .tensor_ops import vec
from .tuning import CvConfig, cv_tau

_OVERRIDE_KEYS = ("seed", "threads", "tau", "kappa", "ranks", "iters", "out")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rtfm",
        description="Tail-robust tensor factor models via element-wise truncation.",
    )
    parser.add_argument("--version", action="version", version=f"rtfm {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser, data: bool) -> None:
        p.add_argument("--config", help="key=value configuration file")
        if data:
            p.add_argument("--data", required=True,
                           help="input data: RTFM1 binary, or CSV panel for K=1")
        p.add_argument("--out", help="output directory (default: config out)")
        p.add_argument("--seed", help="override the master seed")
        p.add_argument("--threads", help="replication-level parallelism")
        p.add_argument("--tau", help="truncation level: cv | inf | theory | number")
        p.add_argument("--kappa", help="aggregation truncation: tau | inf | number")
        p.add_argument("--ranks", help="comma-separated ranks or 'auto'")
        p.add_argument("--iters", help="refinement sweeps")

    p_sim = sub.add_parser("simulate", help="run a Monte Carlo campaign")
    common(p_sim, data=False)
    p_sim.add_argument("--replications", help="override replication count")

    p_est = sub.add_parser("estimate", help="estimate loadings/factors from data")
    common(p_est, data=True)

    p_rank = sub.add_parser("rank", help="select the per-mode factor numbers")
    common(p_rank, data=True)

    p_cv = sub.add_parser("cv", help="cross-validate the truncation level")
    common(p_cv, data=True)

    p_fc = sub.add_parser("forecast", help="rolling-window forecasting of a panel")
    common(p_fc, data=True)
    p_fc.add_argument("--window", help="rolling window length")
    p_fc.add_argument("--horizons", help="number of forecast horizons")

    p_diag = sub.add_parser("diagnose", help="loading-normality diagnostic campaign")
    common(p_diag, data=False)
    p_diag.add_argument("--replications", help="override replication count")

    return parser


def _config_from_args(args: argparse.Namespace) -> RunConfig:
    values: dict = {}
    if os.environ.get("RTFM_THREADS"):
        values["threads"] = _coerce("threads", os.environ["RTFM_THREADS"])
    if args.config:
        with open(args.config, "r", encoding="utf-8") as fh:
            values.update(parse_config_values(fh.read()))
    for key in _OVERRIDE_KEYS + ("replications", "window", "horizons"):
        raw = getattr(args, key, None)
        if raw is not None:
            values[key] = raw if key == "out" else _coerce(key, raw)
    return make_config(values)


def _audit(command: str, config: RunConfig) -> list[str]:
    return [f"cmd={command}", f"config: {config.echo()}"]


def _outdir(config: RunConfig) -> str:
    os.makedirs(config.out, exist_ok=True)
    return config.out


def _load_data(path: str) -> np.ndarray:
    with open(path, "rb") as fh:
        head = fh.read(len(MAGIC))
    if head == MAGIC:
        return read_tensor_series(path)
    return read_panel_csv(path)


def _scalar_tau(tau) -> float:
    return float(tau) if np.ndim(tau) == 0 else float(max(tau))


# ---------------------------------------------------------------------------
# commands


def cmd_simulate(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    out = _outdir(config)
    records, summary = run_campaign(config)
    audit = _audit("simulate", config)
    metrics = [key for key in records[0] if key != "replication"]
    rows = [
        (rec["replication"], name, rec[name]) for rec in records for name in metrics
    ]
    write_csv(os.path.join(out, "replications.csv"),
              ["replication", "metric", "value"], rows, audit)
    write_csv(
        os.path.join(out, "summary.csv"),
        ["metric", "mean", "sd", "count"],
        [(name,) + summary.stats[name] + (summary.count,) for name in metrics],
        audit,
    )
    print(f"wrote {len(records)} replications to {out}")
    return 0


def _resolve_for_data(config: RunConfig, data: np.ndarray):
    """Shared tuning/rank logic for data-driven commands: returns
    (ranks, tau, cv_result, rank_result)."""
    dims = data.shape[1:]
    rank_result = None
    if config.ranks == "auto":
        caps = rank_caps(config, dims)
        tau, cv_result = resolve_tau(config, data, caps)
        rank_result = estimate_ranks(data, tau, RankConfig(r_max=caps))
        ranks = rank_result.ranks
    else:
        ranks = tuple(config.ranks)
        if len(ranks) != len(dims):
            raise ConfigError(f"data has {len(dims)} modes but ranks={ranks}")
        tau, cv_result = resolve_tau(config, data, ranks)
    return ranks, tau, cv_result, rank_result


def cmd_estimate(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    out = _outdir(config)
    data = _load_data(args.data)
    audit = _audit("estimate", config)
    ranks, tau, cv_result, rank_result = _resolve_for_data(config, data)
    kappa = resolve_kappa(config, tau)
    stages = estimate_loadings(data, ranks, tau, config.iters)
    factors = estimate_factors(data, stages[-1], kappa)

    rows = []
    for stage, fit in enumerate(stages):
        for k, lam in enumerate(fit.loadings):
            for (i, j), value in np.ndenumerate(lam):
                rows.append((stage, k + 1, i + 1, j + 1, value))
    write_csv(os.path.join(out, "loadings.csv"),
              ["stage", "mode", "row", "col", "value"], rows, audit)

    rows = []
    for stage, fit in enumerate(stages):
        for k, vals in enumerate(fit.eigenvalues):
            rows.extend((stage, k + 1, j + 1, v) for j, v in enumerate(vals))
    write_csv(os.path.join(out, "eigenvalues.csv"),
              ["stage", "mode", "index", "value"], rows, audit)

    labels = [
        "f[" + ",".join(str(i + 1) for i in np.unravel_index(j, ranks, order="F")) + "]"
        for j in range(int(np.prod(ranks)))
    ]
    write_csv(
        os.path.join(out, "factors.csv"),
        ["t"] + labels,
        [(t + 1, *vec(factors[t])) for t in range(factors.shape[0])],
        audit,
    )

    params = [
        ("tau", _scalar_tau(tau)),
        ("kappa", kappa),
        ("ranks", ":".join(str(r) for r in ranks)),
        ("iters", config.iters),
        ("n", data.shape[0]),
        ("dims", ":".join(str(p) for p in data.shape[1:])),
    ]
    write_csv(os.path.join(out, "params.csv"), ["key", "value"], params, audit)
    if cv_result is not None:
        write_csv(os.path.join(out, "cv_curve.csv"), ["tau", "score"],
                  zip(cv_result.grid, cv_result.scores), audit)
    if rank_result is not None:
        print(",".join(str(r) for r in ranks))
    print(f"tau={_scalar_tau(tau)!r} kappa={kappa!r} -> {out}")
    return 0


def cmd_rank(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    out = _outdir(config)
    data = _load_data(args.data)
    audit = _audit("rank", config)
    caps = rank_caps(config, data.shape[1:])
    tau, _ = resolve_tau(config, data, caps)
    result = estimate_ranks(data, tau, RankConfig(r_max=caps))
    write_csv(os.path.join(out, "ranks.csv"), ["mode", "rank"],
              [(k + 1, r) for k, r in enumerate(result.ranks)], audit)
    write_csv(
        os.path.join(out, "rank_trace.csv"),
        ["pass", "mode", "rank"],
        [(m, k + 1, r) for m, entry in enumerate(result.trace) for k, r in enumerate(entry)],
        audit,
    )
    print(",".join(str(r) for r in result.ranks))
    return 0


def cmd_cv(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    out = _outdir(config)
    data = _load_data(args.data)
    if config.ranks == "auto":
        raise ConfigError("cv needs concrete ranks")
    ranks = tuple(config.ranks)
    result = cv_tau(data, ranks, CvConfig(config.cv_grid, config.cv_folds, config.iters))
    write_csv(os.path.join(out, "cv_curve.csv"), ["tau", "score"],
              zip(result.grid, result.scores), _audit("cv", config))
    print(repr(result.tau))
    return 0


def cmd_forecast(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    out = _outdir(config)
    data = _load_data(args.data)
    if data.ndim != 2:
        raise ConfigError("forecasting expects a K=1 panel (n x p)")
    if config.ranks == "auto":
        raise ConfigError("forecasting needs a concrete rank")
    audit = _audit("forecast", config)

    def fc_config(tau, kappa) -> ForecastConfig:
        return ForecastConfig(
            window=config.window,
            rank=config.ranks[0],
            horizons=config.horizons,
            tau=tau,
            kappa=kappa,
            standardize=config.standardize,
            cv_per_window=config.cv_per_window,
            cv=CvConfig(min(config.cv_grid, 20), config.cv_folds, config.iters),
        )

    robust = rolling_errors(data, fc_config(config.tau, config.kappa))
    plain = rolling_errors(data, fc_config(math.inf, math.inf))

    rows = []
    for name, res in (("trunc", robust), ("plain", plain)):
        for j, origin in enumerate(res.origins):
            rows.extend(
                (name, int(origin), i + 1, res.errors[j, i])
                for i in range(data.shape[1])
            )
    write_csv(os.path.join(out, "forecast_errors.csv"),
              ["variant", "origin", "variable", "error"], rows, audit)
    write_csv(
        os.path.join(out, "forecast_means.csv"),
        ["variable", "mean_err_trunc", "mean_err_plain"],
        [(i + 1, robust.mean_by_var[i], plain.mean_by_var[i]) for i in range(data.shape[1])],
        audit,
    )
    header = ["origin"] + [f"var{i + 1}" for i in range(data.shape[1])]
    write_csv(
        os.path.join(out, "lossdiff.csv"),
        header,
        [
            (int(origin), *(robust.errors[j] - plain.errors[j]))
            for j, origin in enumerate(robust.origins)
        ],
        audit,
    )
    better = int(np.sum(robust.mean_by_var < plain.mean_by_var))
    print(f"trunc beats plain on {better}/{data.shape[1]} variables "
          f"over {robust.origins.size} origins")
    return 0


def cmd_diagnose(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    out = _outdir(config)
    if config.tau == "cv":
        config.tau = "theory"
    audit = _audit("diagnose", config)
    rows = []
    pooled = []
    for rep in range(config.replications):
        result = run_diagnostic_replication(config, rep)
        for k, scores in enumerate(result["scores"]):
            rows.extend((rep, k + 1, i + 1, z) for i, z in enumerate(scores))
            pooled.extend(z for z in scores if math.isfinite(z))
    write_csv(os.path.join(out, "zscores.csv"),
              ["replication", "mode", "index", "z"], rows, audit)
    stat = ks_statistic(np.asarray(pooled))
    crit = ks_critical(len(pooled), 0.01)
    write_csv(
        os.path.join(out, "ks.csv"),
        ["n_scores", "ks_statistic", "critical_1pct", "normal"],
        [(len(pooled), stat, crit, "yes" if stat <= crit else "no")],
        audit,
    )
    print(f"KS={stat:.5f} critical(1%)={crit:.5f} n={len(pooled)}")
    return 0


_COMMANDS = {
    "simulate": cmd_simulate,
    "estimate": cmd_estimate,
    "rank": cmd_rank,
    "cv": cmd_cv,
    "forecast": cmd_forecast,
    "diagnose": cmd_diagnose,
}


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    # DegenerateDataError and RankDeficientError subclass ValueError, so the
    # numeric family must be caught first
    except (NumericError, DegenerateDataError, RankDeficientError, np.linalg.LinAlgError) as err:
        print(f"rtfm: numeric failure: {err}", file=sys.stderr)
        return 4
    except (DataFormatError, OSError) as err:
        print(f"rtfm: i/o error: {err}", file=sys.stderr)
        return 3
    except (ConfigError, ValueError) as err:
        print(f"rtfm: configuration error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
