from __future__ import annotations

from pathlib import Path
from typing import Callable, List

import numpy as np
import pytest

from stlf_engine.config import TrainConfig
from stlf_engine.engine.evaluation import synth_generate
from stlf_engine.engine.network import NetSpec, init_params
from stlf_engine.engine.series import LoadSeries
from stlf_engine.services.ingestion import write_csv


@pytest.fixture
def tiny_cfg() -> TrainConfig:
    """Miniature model and schedule: seconds per update instead of minutes."""
    return TrainConfig(
        state_size=8,
        h_size=4,
        output_size=4,
        embed_size=3,
        epochs=1,
        updates_per_epoch=3,
        steps_per_batch=3,
        batch_schedule={1: 2},
        lr_schedule={1: 1e-3},
        warmup_weeks_train=1,
        warmup_weeks_test=1,
        ensemble_members=2,
        seed=7,
    )


@pytest.fixture
def tiny_spec(tiny_cfg: TrainConfig) -> NetSpec:
    return NetSpec.from_config(tiny_cfg)


@pytest.fixture
def tiny_params(tiny_cfg: TrainConfig, tiny_spec: NetSpec):
    return init_params(tiny_spec, tiny_cfg, np.random.default_rng(11))


@pytest.fixture
def synth_series() -> List[LoadSeries]:
    return [synth_generate(seed=k, days=56, series_id=f"S{k}") for k in range(2)]


@pytest.fixture
def csv_writer(tmp_path: Path) -> Callable[[str, str], Path]:
    def write(name: str, text: str) -> Path:
        path = tmp_path / name
        path.write_text(text, encoding="utf-8")
        return path

    return write


@pytest.fixture
def synth_csv(tmp_path: Path, synth_series: List[LoadSeries]) -> Path:
    return write_csv(synth_series, tmp_path / "loads.csv")
