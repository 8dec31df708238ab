"""Composite pinball loss, coupled batch walks, Adam and the epoch schedules."""

from __future__ import annotations

import hashlib
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..config import TrainConfig
from ..errors import DataError, NumericError, WindowError
from ..settings import ENSEMBLE_WORKERS, HOURS_PER_DAY, TRAIN_LOG_EVERY
from .autodiff import Tape, Tensor
from .network import NetOutput, NetSpec, init_params
from .series import LoadSeries
from .walk import SeriesWalk, hours_needed

logger = logging.getLogger(__name__)

CHECKPOINT_VERSION = 1

UpdateHook = Callable[[int, int, float, int, float], None]


@dataclass
class Checkpoint:
    config: TrainConfig
    seed: int
    params: Dict[str, np.ndarray]
    loss_trace: List[float] = field(default_factory=list)
    version: int = CHECKPOINT_VERSION

    @property
    def final_loss(self) -> float:
        return self.loss_trace[-1] if self.loss_trace else float("nan")

    def param_hash(self) -> str:
        digest = hashlib.sha256()
        for name in sorted(self.params):
            digest.update(name.encode("utf-8"))
            digest.update(np.ascontiguousarray(self.params[name], dtype="<f8").tobytes())
        return digest.hexdigest()


def pinball(z, zhat, q: float):
    """Pinball loss of actual ``z`` against quantile forecast ``zhat`` (scalars or arrays)."""
    diff = np.asarray(z, dtype=np.float64) - np.asarray(zhat, dtype=np.float64)
    out = np.where(diff >= 0, diff * q, diff * (q - 1.0))
    return float(out) if out.ndim == 0 else out


def step_loss(
    tape: Tape,
    z_out: np.ndarray,
    zbar: float,
    shat_out: Tensor,
    net_out: NetOutput,
    gamma: float,
    quantiles: Tuple[float, float, float],
) -> Tensor:
    """Mean over the day of point pinball plus ``gamma`` times both bound pinballs.

    Losses are computed on loads normalized by the input-window mean so series of different
    size weigh the same.
    """
    q_point, q_low, q_up = quantiles
    target = np.asarray(z_out, dtype=np.float64) / zbar

    def head_loss(x_hat: Tensor, q: float) -> Tensor:
        return tape.pinball(target, tape.mul(tape.exp(x_hat), shat_out), q)

    bounds = tape.add(head_loss(net_out.lower, q_low), head_loss(net_out.upper, q_up))
    return tape.mean(tape.add(head_loss(net_out.point, q_point), tape.scale(bounds, gamma)))


def walk_steps(cfg: TrainConfig) -> Tuple[int, int]:
    """(warm-up steps, loss steps) of one training walk."""
    return 7 * cfg.warmup_weeks_train, cfg.steps_per_batch


def min_series_hours(cfg: TrainConfig) -> int:
    warmup, steps = walk_steps(cfg)
    return hours_needed(warmup + steps)


def sample_start(series: LoadSeries, cfg: TrainConfig, rng: np.random.Generator) -> Optional[int]:
    """Random day-aligned walk start, or None if the series is too short."""
    room = len(series) - min_series_hours(cfg)
    if room < 0:
        return None
    return int(rng.integers(0, room // HOURS_PER_DAY + 1)) * HOURS_PER_DAY


def batch_walk(
    tape: Tape,
    batch: Sequence[LoadSeries],
    leaves: Dict[str, Tensor],
    spec: NetSpec,
    cfg: TrainConfig,
    rng: Optional[np.random.Generator] = None,
    starts: Optional[Sequence[int]] = None,
) -> Optional[Tensor]:
    """Mean step loss over the batch; warm-up steps run the full model but add no loss."""
    warmup, steps = walk_steps(cfg)
    quantiles = (cfg.q_point, cfg.q_low, cfg.q_up)
    if starts is None and rng is None:
        rng = np.random.default_rng(cfg.seed)
    losses: List[Tensor] = []
    for i, series in enumerate(batch):
        start = starts[i] if starts is not None else sample_start(series, cfg, rng)
        if start is None or start + min_series_hours(cfg) > len(series):
            logger.warning("Skipping series %s: %d hours is too short for a walk", series.series_id, len(series))
            continue
        try:
            walk = SeriesWalk.begin(tape, series, start, leaves, spec)
        except WindowError as exc:
            logger.warning("Skipping series %s: %s", series.series_id, exc)
            continue
        for _ in range(warmup):
            walk.step()
        for _ in range(steps):
            result = walk.step()
            actual = walk.actuals(result)
            losses.append(step_loss(tape, actual, result.zbar, result.shat_out, result.output, cfg.gamma, quantiles))
    if not losses:
        return None
    return tape.mean(tape.concat(losses))


@dataclass
class AdamMoments:
    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8


def adam_update(
    params: Dict[str, np.ndarray],
    grads: Dict[str, np.ndarray],
    lr: float,
    step: int,
    moments: AdamMoments,
) -> Dict[str, np.ndarray]:
    """One bias-corrected Adam step (``step`` counts from 1); updates ``params`` in place."""
    bc1 = 1.0 - moments.beta1 ** step
    bc2 = 1.0 - moments.beta2 ** step
    for k, g in grads.items():
        if k not in moments.m:
            moments.m[k] = np.zeros_like(params[k])
            moments.v[k] = np.zeros_like(params[k])
        moments.m[k] = moments.beta1 * moments.m[k] + (1.0 - moments.beta1) * g
        moments.v[k] = moments.beta2 * moments.v[k] + (1.0 - moments.beta2) * (g * g)
        m_hat = moments.m[k] / bc1
        v_hat = moments.v[k] / bc2
        params[k] = params[k] - lr * m_hat / (np.sqrt(v_hat) + moments.epsilon)
    return params


def clip_by_global_norm(grads: Dict[str, np.ndarray], max_norm: float) -> float:
    norm = float(np.sqrt(sum(float(np.sum(g * g)) for g in grads.values())))
    if norm > max_norm > 0:
        factor = max_norm / norm
        for k in grads:
            grads[k] = grads[k] * factor
    return norm


def train(
    data: Sequence[LoadSeries],
    cfg: TrainConfig,
    on_update: Optional[UpdateHook] = None,
) -> Checkpoint:
    if not data:
        raise DataError("training needs at least one series")
    need = min_series_hours(cfg)
    usable = [s for s in data if len(s) >= need]
    if not usable:
        raise DataError(f"no series has the {need} hours a training walk needs")
    for s in data:
        if len(s) < need:
            logger.warning("Series %s (%d hours) is too short for training walks; ignored", s.series_id, len(s))

    rng = np.random.default_rng(cfg.seed)
    spec = NetSpec.from_config(cfg)
    params = init_params(spec, cfg, rng)
    moments = AdamMoments()
    trace: List[float] = []
    step = 0

    for epoch in range(1, cfg.epochs + 1):
        lr = cfg.lr_for(epoch)
        batch_size = cfg.batch_size_for(epoch)
        for update in range(1, cfg.updates_per_epoch + 1):
            batch = [usable[i] for i in rng.integers(0, len(usable), size=batch_size)]
            tape = Tape()
            leaves = tape.leaves(params)
            loss = batch_walk(tape, batch, leaves, spec, cfg, rng=rng)
            if loss is None:
                continue
            value = loss.item()
            if not np.isfinite(value):
                raise NumericError("non-finite training loss", epoch=epoch, update=update)
            tape.backward(loss)
            grads = {k: leaves[k].grad for k in params}
            if cfg.clip_norm is not None:
                clip_by_global_norm(grads, cfg.clip_norm)
            step += 1
            adam_update(params, grads, lr, step, moments)
            trace.append(value)
            if on_update is not None:
                on_update(epoch, update, lr, batch_size, value)
            if update % TRAIN_LOG_EVERY == 0:
                logger.info("[train] epoch=%d update=%d lr=%g batch=%d loss=%.6f", epoch, update, lr, batch_size, value)
        if trace:
            logger.info("[train] epoch=%d done lr=%g batch=%d last_loss=%.6f", epoch, lr, batch_size, trace[-1])

    return Checkpoint(config=cfg, seed=cfg.seed, params=params, loss_trace=trace)


def ensemble_train(
    data: Sequence[LoadSeries],
    cfg: TrainConfig,
    n: Optional[int] = None,
    workers: Optional[int] = None,
) -> List[Checkpoint]:
    """Train ``n`` members whose only difference is the seed (``seed + k``)."""
    n = n or cfg.ensemble_members
    configs = [cfg.model_copy(update={"seed": cfg.seed + k}) for k in range(n)]

    def run(k: int) -> Checkpoint:
        cp = train(data, configs[k])
        logger.info("[ensemble] member=%d seed=%d done loss=%.6f", k, configs[k].seed, cp.final_loss)
        return cp

    with ThreadPoolExecutor(max_workers=max(1, min(workers or ENSEMBLE_WORKERS, n))) as pool:
        return list(pool.map(run, range(n)))
