"""Scaled-down end-to-end runs on synthetic data. Slow: run with ``pytest -m slow``."""

from datetime import timedelta

import numpy as np
import pytest

from stlf_engine.config import TrainConfig
from stlf_engine.engine.evaluation import ensemble_combine, synth_generate
from stlf_engine.engine.series import LoadSeries
from stlf_engine.engine.training import ensemble_train, train
from stlf_engine.services.forecasting import forecast_member, read_forecast_csv, write_forecast_csv
from stlf_engine.services.reports import evaluate_frame

pytestmark = pytest.mark.slow

YEARS_DAYS = 730
HELD_OUT_DAYS = 60

CONFIG = TrainConfig(
    epochs=3,
    updates_per_epoch=200,
    batch_schedule={1: 2},
    lr_schedule={1: 3e-3, 2: 1e-3, 3: 3e-4},
    ensemble_members=3,
    seed=2024,
)


def _held_out_day(series: LoadSeries):
    return (series.start + timedelta(days=YEARS_DAYS - HELD_OUT_DAYS)).date()


@pytest.fixture(scope="module")
def full_series():
    return [synth_generate(seed=k, days=YEARS_DAYS, series_id=f"SYN{k}") for k in range(4)]


@pytest.fixture(scope="module")
def train_series(full_series):
    cut = 24 * (YEARS_DAYS - HELD_OUT_DAYS)
    return [LoadSeries(s.series_id, s.start, s.values[:cut]) for s in full_series]


@pytest.fixture(scope="module")
def members(train_series):
    return ensemble_train(train_series, CONFIG, workers=1)


def _member_bundles(cp, full_series):
    return {s.series_id: forecast_member(cp, s, _held_out_day(s), HELD_OUT_DAYS) for s in full_series}


def _evaluate(bundles_by_series, full_series, tmp_path, name):
    bundles = [b for days in bundles_by_series.values() for b in days]
    return evaluate_frame(read_forecast_csv(write_forecast_csv(bundles, tmp_path / f"{name}.csv")), full_series)


@pytest.fixture(scope="module")
def member_runs(members, full_series):
    return [_member_bundles(cp, full_series) for cp in members]


@pytest.fixture(scope="module")
def first_report(member_runs, full_series, tmp_path_factory):
    return _evaluate(member_runs[0], full_series, tmp_path_factory.mktemp("first"), "member0")


def test_learning_beats_seasonal_naive(first_report):
    model = first_report.row("ALL", "model").metrics.mape
    naive = first_report.row("ALL", "naive").metrics.mape
    assert model < 0.8 * naive


def test_interval_coverage(first_report):
    inside, below, above = first_report.row("ALL").coverage
    assert 80.0 <= inside <= 98.0
    assert below < 15.0 and above < 15.0


def test_ensemble_not_worse_than_median_member(member_runs, full_series, tmp_path):
    member_mapes = [
        _evaluate(run, full_series, tmp_path, f"m{k}").row("ALL").metrics.mape for k, run in enumerate(member_runs)
    ]
    combined = {
        sid: [ensemble_combine([run[sid][d] for run in member_runs], "mean") for d in range(HELD_OUT_DAYS)]
        for sid in member_runs[0]
    }
    ensemble_mape = _evaluate(combined, full_series, tmp_path, "ensemble").row("ALL").metrics.mape
    assert ensemble_mape <= float(np.median(member_mapes))


def test_equal_seeds_give_identical_reports(members, train_series, full_series, first_report, tmp_path):
    again = train(train_series, CONFIG)
    assert again.param_hash() == members[0].param_hash()
    report = _evaluate(_member_bundles(again, full_series), full_series, tmp_path, "again")
    assert report.model_dump() == first_report.model_dump()


def test_smoothing_coefficients_move(member_runs):
    alphas = np.array([b.alpha for days in member_runs[0].values() for b in days])
    betas = np.array([b.beta for days in member_runs[0].values() for b in days])
    assert np.all((alphas > 0) & (alphas < 1)) and np.all((betas > 0) & (betas < 1))
    assert alphas.var() > 0 and betas.var() > 0
