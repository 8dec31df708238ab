"""Command-line entry point: train, ensemble, forecast, evaluate, serve.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from datetime import date
from pathlib import Path
from typing import List, Optional, Sequence

from .config import load_config
from .errors import BoundsError, DataError, EsStateError, NumericError, ShapeError, UsageError, WindowError
from .settings import LOG_LEVEL

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # type: ignore[override]
        raise UsageError(f"{message}\n{self.format_usage().rstrip()}")


def _iso_date(raw: str) -> date:
    try:
        return date.fromisoformat(raw)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected YYYY-MM-DD, got {raw!r}") from exc


def _positive_int(raw: str) -> int:
    try:
        value = int(raw)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected an integer, got {raw!r}") from exc
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {value}")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="stlf", description="Hybrid exponential smoothing + dilated RNN load forecaster")
    parser.add_argument("--log-level", default=LOG_LEVEL, help="logging level (default from STLF_LOG_LEVEL)")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def training_flags(p: argparse.ArgumentParser) -> None:
        p.add_argument("--data", required=True, help="long-format load CSV")
        p.add_argument("--config", help="key=value config file")
        p.add_argument("--seed", type=int)
        p.add_argument("--epochs", type=_positive_int)
        p.add_argument("--updates-per-epoch", type=_positive_int)
        p.add_argument("--steps-per-batch", type=_positive_int)

    train = sub.add_parser("train", help="train one model")
    training_flags(train)
    train.add_argument("--out", required=True, help="checkpoint path")

    ensemble = sub.add_parser("ensemble", help="train several members differing only by seed")
    training_flags(ensemble)
    ensemble.add_argument("--out-dir", required=True)
    ensemble.add_argument("--members", type=_positive_int)
    ensemble.add_argument("--workers", type=_positive_int)

    forecast = sub.add_parser("forecast", help="day-ahead forecasts with prediction intervals")
    forecast.add_argument("--ckpt", required=True, nargs="+", help="one checkpoint, or several for an ensemble")
    forecast.add_argument("--data", required=True)
    forecast.add_argument("--series", action="append", help="series id (repeatable; default: all)")
    forecast.add_argument("--from", dest="first_day", required=True, type=_iso_date, help="first forecasted day")
    forecast.add_argument("--days", type=_positive_int, default=1)
    forecast.add_argument("--combine", choices=("mean", "median"))
    forecast.add_argument("--out", required=True)

    evaluate = sub.add_parser("evaluate", help="score a forecast file")
    evaluate.add_argument("--forecast", required=True)
    evaluate.add_argument("--data", required=True)
    evaluate.add_argument("--out", required=True, help="text report; numbers also go to a sibling .csv")

    serve = sub.add_parser("serve", help="run the forecast HTTP service")
    serve.add_argument("--ckpt", nargs="+", help="defaults to STLF_CHECKPOINTS")
    serve.add_argument("--data", help="defaults to STLF_DATA_PATH")
    serve.add_argument("--host", default="0.0.0.0")
    serve.add_argument("--port", type=int)
    return parser


def _training_config(args: argparse.Namespace):
    return load_config(
        args.config,
        seed=args.seed,
        epochs=args.epochs,
        updates_per_epoch=args.updates_per_epoch,
        steps_per_batch=args.steps_per_batch,
    )


def cmd_train(args: argparse.Namespace) -> int:
    from .engine.training import train
    from .services.checkpoints import save_checkpoint
    from .services.ingestion import load_csv

    cfg = _training_config(args)
    data = load_csv(args.data)
    cp = train(data, cfg)
    path = save_checkpoint(cp, args.out)
    print(f"saved {path} seed={cp.seed} updates={len(cp.loss_trace)} final_loss={cp.final_loss:.6f}")
    return EXIT_OK


def cmd_ensemble(args: argparse.Namespace) -> int:
    from .engine.training import ensemble_train
    from .services.checkpoints import save_checkpoint
    from .services.ingestion import load_csv

    cfg = _training_config(args)
    data = load_csv(args.data)
    members = ensemble_train(data, cfg, n=args.members, workers=args.workers)
    out_dir = Path(args.out_dir)
    for k, cp in enumerate(members):
        path = save_checkpoint(cp, out_dir / f"member_{k}.ckpt")
        print(f"saved {path} seed={cp.seed} final_loss={cp.final_loss:.6f}")
    return EXIT_OK


def cmd_forecast(args: argparse.Namespace) -> int:
    from .services.checkpoints import load_checkpoint
    from .services.forecasting import forecast_ensemble, write_forecast_csv
    from .services.ingestion import load_csv, series_by_id

    checkpoints = [load_checkpoint(p) for p in args.ckpt]
    data = series_by_id(load_csv(args.data))
    ids: List[str] = args.series or list(data)
    unknown = [sid for sid in ids if sid not in data]
    if unknown:
        raise DataError(f"unknown series: {', '.join(unknown)}")

    out = Path(args.out)
    # previous output stays in place until every series is forecast
    partial = out.with_name(out.name + ".part")
    partial.unlink(missing_ok=True)
    rows = 0
    try:
        for sid in ids:
            bundles = forecast_ensemble(checkpoints, data[sid], args.first_day, args.days, rule=args.combine)
            write_forecast_csv(bundles, partial, append=True)
            rows += sum(len(b.point) for b in bundles)
        partial.replace(out)
    finally:
        partial.unlink(missing_ok=True)
    print(f"wrote {rows} rows to {out}")
    return EXIT_OK


def cmd_evaluate(args: argparse.Namespace) -> int:
    from .services.forecasting import read_forecast_csv
    from .services.ingestion import load_csv
    from .services.reports import evaluate_frame, render_report, write_report

    report = evaluate_frame(read_forecast_csv(args.forecast), load_csv(args.data))
    text_path, csv_path = write_report(report, args.out)
    sys.stdout.write(render_report(report))
    print(f"wrote {text_path} and {csv_path}")
    return EXIT_OK


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .app import create_app
    from .settings import PORT

    app = create_app(checkpoint_paths=args.ckpt, data_path=args.data)
    uvicorn.run(app, host=args.host, port=args.port or PORT, proxy_headers=True)
    return EXIT_OK


COMMANDS = {
    "train": cmd_train,
    "ensemble": cmd_ensemble,
    "forecast": cmd_forecast,
    "evaluate": cmd_evaluate,
    "serve": cmd_serve,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        level = logging.getLevelName(str(args.log_level).upper())
        if not isinstance(level, int):
            raise UsageError(f"unknown log level: {args.log_level}")
        logging.basicConfig(
            level=level,
            format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        )
        return COMMANDS[args.command](args)
    except UsageError as exc:
        sys.stderr.write(f"usage error: {exc}\n")
        return EXIT_USAGE
    except NumericError as exc:
        sys.stderr.write(f"numeric failure: {exc}\n")
        return EXIT_NUMERIC
    except (DataError, BoundsError, EsStateError, WindowError, ShapeError) as exc:
        sys.stderr.write(f"data error: {exc}\n")
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
