"""
trainer.py

Siamese training loop: one shared encoder, ψ-stratified batches, one of the
three pairwise losses and plain SGD. The loop is strictly sequential; given the
same dataset, pairs, config and seeds it reproduces the same parameter
trajectory bit for bit.

Snapshots are taken at iteration 0 (the untrained model), at every multiple of
`snapshot_period` and after the final iteration. They are either written as
checkpoint files or kept as frozen in-memory copies, and `evaluate_snapshots`
turns them into a data-efficiency curve.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from fovregress.core.training.encoder import (
    DEFAULT_HIDDEN,
    DEFAULT_OUT,
    SgdConfig,
    backward,
    forward,
    init,
    learning_rate,
    sgd_step,
)
from fovregress.core.training.losses import DEFAULT_MARGIN, LOSSES, batch_loss
from fovregress.core.training.sampler import BatchSampler, BatchSpec
from fovregress.data_io.model_io import checkpoint_name, load_checkpoint, save_checkpoint
from fovregress.utils.exceptions import InputError, NumericError, SnapshotError

CURVE_COLUMNS = ["iteration", "r_at_1", "r_at_5", "r_at_10", "mrr5", "kldiv"]


def default_sgd(loss, learning_rate=0.1, step_period=250_000):
    """Constant learning rate for mse, step decay for the contrastive losses."""
    schedule = "constant" if loss == "mse" else "step"
    return SgdConfig(learning_rate=learning_rate, schedule=schedule, step_period=step_period)


@dataclass(frozen=True)
class TrainConfig:
    """
    Training settings.

    Attributes:
        loss (str): "mse", "cl" or "gcl".
        sgd (SgdConfig): Optimizer and learning-rate schedule.
        batch (BatchSpec): Batch size and ψ-bucket fractions.
        total_iterations (int): Number of SGD steps (> 0).
        snapshot_period (int): Iterations between snapshots (> 0).
        init_seed (int): Encoder initialization seed.
        sampler_seed (int): Batch sampler seed.
        hidden (tuple[int]): Hidden layer widths.
        d_out (int): Descriptor dimension.
        activation (str): Hidden activation.
        margin (float): Margin of cl/gcl.
        binarize_threshold (float): ψ threshold turning pairs into cl labels.
        log_every (int): Iterations between progress log lines.
    """

    loss: str = "mse"
    sgd: SgdConfig = field(default_factory=SgdConfig)
    batch: BatchSpec = field(default_factory=BatchSpec)
    total_iterations: int = 20_000
    snapshot_period: int = 10_000
    init_seed: int = 0
    sampler_seed: int = 0
    hidden: tuple = DEFAULT_HIDDEN
    d_out: int = DEFAULT_OUT
    activation: str = "relu"
    margin: float = DEFAULT_MARGIN
    binarize_threshold: float = 0.5
    log_every: int = 1000

    def __post_init__(self):
        if self.loss not in LOSSES:
            raise InputError(f"Unknown loss '{self.loss}', expected one of {LOSSES}")
        if int(self.total_iterations) <= 0:
            raise InputError(f"total_iterations must be > 0, got {self.total_iterations}")
        if int(self.snapshot_period) <= 0:
            raise InputError(f"snapshot_period must be > 0, got {self.snapshot_period}")
        if int(self.d_out) <= 0 or any(int(h) <= 0 for h in self.hidden):
            raise InputError(f"Layer widths must be > 0, got hidden={self.hidden}, d_out={self.d_out}")
        if not self.margin > 0:
            raise InputError(f"margin must be > 0, got {self.margin}")
        if not (0.0 < self.binarize_threshold < 1.0):
            raise InputError(f"binarize_threshold must lie in (0, 1), got {self.binarize_threshold}")
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))

    def dims(self, d_in):
        return [int(d_in), *self.hidden, int(self.d_out)]

    def to_dict(self):
        return {
            "loss": self.loss,
            "sgd": {
                "learning_rate": self.sgd.learning_rate,
                "schedule": self.sgd.schedule,
                "step_factor": self.sgd.step_factor,
                "step_period": self.sgd.step_period,
            },
            "batch": {
                "batch_size": self.batch.batch_size,
                "f_high": self.batch.f_high,
                "f_mid": self.batch.f_mid,
                "f_zero": self.batch.f_zero,
            },
            "total_iterations": self.total_iterations,
            "snapshot_period": self.snapshot_period,
            "init_seed": self.init_seed,
            "sampler_seed": self.sampler_seed,
            "hidden": list(self.hidden),
            "d_out": self.d_out,
            "activation": self.activation,
            "margin": self.margin,
            "binarize_threshold": self.binarize_threshold,
        }


@dataclass(frozen=True)
class Snapshot:
    """A checkpoint reference: a file path, or a frozen in-memory model."""

    iteration: int
    path: Path = None
    model: object = field(default=None, repr=False)

    def load(self):
        if self.model is not None:
            return self.model
        if self.path is None or not Path(self.path).exists():
            raise SnapshotError(f"Checkpoint for iteration {self.iteration} is missing: {self.path}",
                                iteration=self.iteration)
        return load_checkpoint(self.path)


@dataclass
class TrainRun:
    """Result of `train`: final model, snapshots and per-iteration losses."""

    model: object
    snapshots: list
    loss_log: list

    def loss_frame(self):
        return pd.DataFrame(self.loss_log, columns=["iteration", "loss"])

    def write_loss_log(self, path):
        write_csv(self.loss_frame(), path)


def snapshot_iterations(total_iterations, snapshot_period):
    """Iterations at which snapshots are taken, in ascending order."""
    its = list(range(0, total_iterations + 1, snapshot_period))
    if its[-1] != total_iterations:
        its.append(total_iterations)
    return its


def write_csv(frame, path):
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, lineterminator="\n")


def _take_snapshot(model, snapshot_dir):
    if snapshot_dir is None:
        return Snapshot(model.iteration, model=model.copy())
    path = Path(snapshot_dir) / checkpoint_name(model.iteration)
    save_checkpoint(model, path)
    return Snapshot(model.iteration, path=path)


def train(dataset, pairs, cfg, snapshot_dir=None):
    """
    Train an encoder on ψ-labelled pairs.

    Parameters:
        dataset (Dataset): Images with observations.
        pairs (Sequence[SimilarityPair]): Training pairs; ids must exist in `dataset`.
        cfg (TrainConfig): Training settings.
        snapshot_dir (str | Path | None): Write checkpoint files here; keep
            in-memory copies when None.

    Returns:
        TrainRun

    Raises:
        InputError: missing observations, unknown pair ids, empty required bucket.
        NumericError: the batch loss or a gradient became non-finite.
    """
    if not dataset.has_observations:
        raise InputError("Training needs a dataset with observations")
    pairs = list(pairs)
    if not pairs:
        raise InputError("Training needs at least one pair")

    ids, X = dataset.observation_matrix()
    row = {image_id: k for k, image_id in enumerate(ids)}
    unknown = sorted({p.i for p in pairs if p.i not in row} | {p.j for p in pairs if p.j not in row})
    if unknown:
        raise InputError(f"Pairs reference image ids not in the dataset: {unknown[:10]}")

    sampler = BatchSampler(pairs, cfg.batch, cfg.sampler_seed)
    for name, size, count in zip(("high", "mid", "zero"), sampler.buckets.sizes(), cfg.batch.counts()):
        if count > 0 and size == 0:
            raise InputError(f"Bucket '{name}' is empty but every batch needs {count} pairs from it")

    model = init(cfg.dims(dataset.d_in), cfg.activation, cfg.init_seed)
    if snapshot_dir is not None:
        Path(snapshot_dir).mkdir(parents=True, exist_ok=True)

    logging.info(
        f"Training {cfg.loss} encoder {model.dims} for {cfg.total_iterations} iterations, "
        f"lr {cfg.sgd.learning_rate} ({cfg.sgd.schedule}), batch {cfg.batch.batch_size}"
    )
    snapshots = [_take_snapshot(model, snapshot_dir)]
    loss_log = []

    for it in range(cfg.total_iterations):
        batch = sampler.next_batch()
        ii = np.fromiter((row[p.i] for p in batch), dtype=np.int64, count=len(batch))
        jj = np.fromiter((row[p.j] for p in batch), dtype=np.int64, count=len(batch))
        psi = np.fromiter((p.psi for p in batch), dtype=float, count=len(batch))

        # Both branches run through the same parameters.
        v_i, cache_i = forward(model, X[ii])
        v_j, cache_j = forward(model, X[jj])
        value, _, grad_i, grad_j = batch_loss(
            cfg.loss, v_i, v_j, psi, margin=cfg.margin, binarize_threshold=cfg.binarize_threshold
        )
        if not math.isfinite(value):
            pair_ids = [(p.i, p.j) for p in batch]
            raise NumericError(f"Non-finite {cfg.loss} loss at iteration {it} on pairs {pair_ids}",
                               iteration=it, pair_ids=pair_ids)

        grads = backward(model, cache_i, grad_i) + backward(model, cache_j, grad_j)
        sgd_step(model, grads, it, cfg.sgd)
        loss_log.append((it, value))

        if cfg.log_every and (it % cfg.log_every == 0 or it + 1 == cfg.total_iterations):
            grad_norm = float(np.linalg.norm(grads.flatten()))
            logging.info(f"iteration {it}: loss {value:.6f}, grad norm {grad_norm:.3e}, "
                         f"lr {learning_rate(cfg.sgd, it):g}")
        if model.iteration % cfg.snapshot_period == 0 or model.iteration == cfg.total_iterations:
            snapshots.append(_take_snapshot(model, snapshot_dir))

    logging.info(f"Training finished with {len(snapshots)} snapshots, final loss {loss_log[-1][1]:.6f}")
    return TrainRun(model, snapshots, loss_log)


def evaluate_snapshots(run, eval_dataset, gt, k_values=(1, 5, 10), psi=None, workers=1, config=None):
    """
    Evaluate every snapshot of a run.

    Parameters:
        run (TrainRun | Sequence[Snapshot]): Run or its snapshot list.
        eval_dataset (Dataset): Images with observations.
        gt (Mapping[int, Iterable[int]]): Positives per query.
        k_values (Sequence[int]): Must include 1, 5 and 10 for the curve.
        psi (ndarray | None): Query×map ψ matrix for the KL metric.
        workers (int): Threads evaluating snapshots concurrently.
        config (EvalConfig | None): Overrides k_values when given.

    Returns:
        list[tuple[int, EvalReport]]: One entry per snapshot, in iteration order.

    Raises:
        SnapshotError: a checkpoint file is missing (names the iteration).
    """
    from fovregress.core.evaluation.evaluate import EvalConfig, evaluate, target_psi

    snapshots = sorted(run.snapshots if isinstance(run, TrainRun) else run, key=lambda s: s.iteration)
    config = config or EvalConfig(k_values=tuple(k_values))
    missing = [s.iteration for s in snapshots if s.model is None and not (s.path and Path(s.path).exists())]
    if missing:
        raise SnapshotError(f"Checkpoint for iteration {missing[0]} is missing", iteration=missing[0])
    if psi is None:
        psi = target_psi(eval_dataset, gt, config)

    def _one(snapshot):
        return snapshot.iteration, evaluate(snapshot.load(), eval_dataset, gt, psi=psi, config=config)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            curve = list(pool.map(_one, snapshots))
    else:
        curve = [_one(s) for s in snapshots]
    for iteration, report in curve:
        logging.info(f"snapshot {iteration}: R@5 {report.r_at_k.get(5, float('nan')):.4f}, "
                     f"MRR@5 {report.mrr5:.4f}, KL {report.kldiv:.6f}")
    return curve


def curve_frame(curve):
    """Plot-ready table with columns iteration, r_at_1, r_at_5, r_at_10, mrr5, kldiv."""
    rows = []
    for iteration, report in curve:
        missing = [k for k in (1, 5, 10) if k not in report.r_at_k]
        if missing:
            raise InputError(f"Curve needs R@1, R@5 and R@10; report at iteration {iteration} lacks k={missing}")
        rows.append([iteration, report.r_at_k[1], report.r_at_k[5], report.r_at_k[10], report.mrr5, report.kldiv])
    return pd.DataFrame(rows, columns=CURVE_COLUMNS)
