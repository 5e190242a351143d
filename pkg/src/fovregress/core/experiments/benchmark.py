"""
benchmark.py

Desk-scale comparison experiments on the synthetic world.

- compare_losses: train one encoder per (loss, seed) on identical pairs and
  report final ranking quality plus the per-snapshot curve.
- aggregate_curves: mean/min/max of every curve metric across seeds.
- pca_sweep: retrieval quality of one model at several reduced dimensions,
  with and without whitening.

Queries are held out of training: pairs are drawn from map×map only.
"""

import logging
import math
from dataclasses import dataclass, field, replace

import pandas as pd

from fovregress.core.dataset.dataset import build_pairs, ground_truth_from_poses
from fovregress.core.dataset.synthetic import generate_synthetic_world
from fovregress.core.evaluation.evaluate import evaluate, target_psi
from fovregress.core.training.losses import LOSSES
from fovregress.core.training.trainer import CURVE_COLUMNS, curve_frame, evaluate_snapshots, train
from fovregress.utils.exceptions import InputError

METRIC_COLUMNS = ["r_at_1", "r_at_5", "r_at_10", "mrr5", "kldiv"]
BENCHMARK_COLUMNS = ["loss", "seed", *METRIC_COLUMNS, "cov_offdiag_mean"]


@dataclass
class BenchmarkResult:
    """Final metrics per (loss, seed) and the snapshot curves behind them."""

    table: pd.DataFrame
    curves: dict = field(default_factory=dict)

    def summary(self):
        """Mean of every final metric per loss."""
        return self.table.groupby("loss", sort=True)[[*METRIC_COLUMNS, "cov_offdiag_mean"]].mean()


def with_seed(cfg, seed):
    """Copy of an ExperimentConfig with every seed replaced by `seed`."""
    return cfg.model_copy(update={
        "world": cfg.world.model_copy(update={"seed": seed}),
        "pairs": cfg.pairs.model_copy(update={"seed": seed}),
        "train": cfg.train.model_copy(update={"init_seed": seed, "sampler_seed": seed}),
        "eval": cfg.eval.model_copy(update={"seed": seed}),
    })


def compare_losses(cfg, seeds, losses=LOSSES, total_iterations=None, workers=1):
    """
    Train and evaluate every loss on every seed.

    Parameters:
        cfg (ExperimentConfig): Base experiment; seeds are overridden per run.
        seeds (Iterable[int]): Seeds to run.
        losses (Iterable[str]): Subset of "mse", "cl", "gcl".
        total_iterations (int | None): Override of train.total_iterations.
        workers (int): Threads for snapshot evaluation.

    Returns:
        BenchmarkResult: `curves[loss]` is a list of curve DataFrames, one per seed.

    Raises:
        InputError: if pairs.n_pairs exceeds the map x map pool.
    """
    rows = []
    curves = {loss: [] for loss in losses}
    map_pool = cfg.world.n_map * (cfg.world.n_map - 1) // 2
    if cfg.pairs.n_pairs > map_pool:
        raise InputError(
            f"pairs.n_pairs = {cfg.pairs.n_pairs} exceeds the {map_pool} map x map pairs benchmark runs draw from"
        )
    for seed in seeds:
        run_cfg = with_seed(cfg, seed)
        world = generate_synthetic_world(run_cfg.world.to_world_config())
        gt = ground_truth_from_poses(world, run_cfg.eval.dist_m, math.radians(run_cfg.eval.angle_deg))
        pairs = build_pairs(world, run_cfg.pairs.n_pairs, run_cfg.pairs.seed, include_queries=False)
        eval_cfg = run_cfg.eval.to_eval_config()
        psi = target_psi(world, gt, eval_cfg)

        for loss in losses:
            train_cfg = run_cfg.train.to_train_config(loss=loss, total_iterations=total_iterations)
            logging.info(f"Benchmark seed {seed}: training {loss}")
            run = train(world, pairs, train_cfg)
            curve = evaluate_snapshots(run, world, gt, psi=psi, workers=workers, config=eval_cfg)
            frame = curve_frame(curve)
            frame.insert(0, "seed", seed)
            curves[loss].append(frame)

            final = curve[-1][1]
            rows.append([loss, seed, final.r_at_k[1], final.r_at_k[5], final.r_at_k[10],
                         final.mrr5, final.kldiv, final.cov_offdiag_mean])

    table = pd.DataFrame(rows, columns=BENCHMARK_COLUMNS)
    return BenchmarkResult(table, curves)


def aggregate_curves(curves):
    """
    Combine per-seed curves into one band per metric.

    Parameters:
        curves (Sequence[pd.DataFrame]): Frames with the curve columns.

    Returns:
        pd.DataFrame: `iteration` plus `<metric>_mean`, `<metric>_min` and
        `<metric>_max` for every metric, one row per iteration.
    """
    frame = pd.concat([c[CURVE_COLUMNS] for c in curves], ignore_index=True)
    grouped = frame.groupby("iteration", sort=True)[METRIC_COLUMNS].agg(["mean", "min", "max"])
    grouped.columns = [f"{metric}_{stat}" for metric, stat in grouped.columns]
    return grouped.reset_index()


def pca_sweep(model, dataset, gt, dims, eval_config, psi=None):
    """
    Evaluate one model at several reduced dimensions.

    Parameters:
        model (EncoderModel | Mapping[int, ndarray]): What to evaluate.
        dataset (Dataset): Evaluation dataset.
        gt (Mapping[int, Iterable[int]]): Positives per query.
        dims (Iterable[int]): Output dimensions; each must fit the map count.
        eval_config (EvalConfig): Base settings; whiten/pca_dim are overridden.

    Returns:
        pd.DataFrame: columns dim, whiten, r_at_<k>..., mrr5, kldiv.
    """
    if psi is None:
        psi = target_psi(dataset, gt, eval_config)
    rows = []
    for dim in dims:
        for whiten in (False, True):
            report = evaluate(model, dataset, gt, psi=psi,
                              config=replace(eval_config, pca_dim=int(dim), whiten=whiten))
            row = {"dim": int(dim), "whiten": whiten}
            row.update({f"r_at_{k}": v for k, v in sorted(report.r_at_k.items())})
            row.update(mrr5=report.mrr5, kldiv=report.kldiv)
            rows.append(row)
    return pd.DataFrame(rows)
