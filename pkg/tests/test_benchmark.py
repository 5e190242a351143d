import math

import numpy as np
import pandas as pd
import pytest

from fovregress.core.dataset.dataset import ground_truth_from_poses
from fovregress.core.dataset.synthetic import generate_synthetic_world
from fovregress.core.evaluation.evaluate import EvalConfig
from fovregress.core.evaluation.metrics import chance_recall_at_k
from fovregress.core.experiments.benchmark import (
    BENCHMARK_COLUMNS,
    aggregate_curves,
    compare_losses,
    pca_sweep,
    with_seed,
)
from fovregress.core.training.encoder import init
from fovregress.core.training.trainer import CURVE_COLUMNS
from fovregress.utils.config import ExperimentConfig
from fovregress.utils.exceptions import InputError


def curve(values):
    rows = [[it, v, v, v, v, v] for it, v in zip((0, 10, 20), values)]
    return pd.DataFrame(rows, columns=CURVE_COLUMNS)


def small_experiment(seed=0):
    cfg = ExperimentConfig.default(seed)
    return cfg.model_copy(update={
        "world": cfg.world.model_copy(update=dict(
            n_landmarks=800, landmark_feature_dim=16, n_map=40, n_query=10, trajectory_length=100.0,
            amplitude=10.0, heading_jitter_deg=0.0, lateral_jitter=0.0, d_in=16,
        )),
        "pairs": cfg.pairs.model_copy(update=dict(n_pairs=600)),
        "train": cfg.train.model_copy(update=dict(
            total_iterations=400, snapshot_period=200, hidden=[16], d_out=8, log_every=0,
        )),
    })


def test_with_seed_replaces_every_seed():
    cfg = with_seed(ExperimentConfig.default(0), 7)
    assert cfg.world.seed == cfg.pairs.seed == cfg.eval.seed == 7
    assert cfg.train.init_seed == cfg.train.sampler_seed == 7


def test_aggregate_curves():
    agg = aggregate_curves([curve([0.1, 0.2, 0.3]), curve([0.3, 0.4, 0.5])])
    assert list(agg["iteration"]) == [0, 10, 20]
    np.testing.assert_allclose(agg["r_at_5_mean"], [0.2, 0.3, 0.4])
    np.testing.assert_allclose(agg["r_at_5_min"], [0.1, 0.2, 0.3])
    np.testing.assert_allclose(agg["kldiv_max"], [0.3, 0.4, 0.5])


def test_pca_sweep(small_world, small_gt):
    model = init([small_world.d_in, 12, 8], seed=1)
    frame = pca_sweep(model, small_world, small_gt, [2, 4], EvalConfig())
    assert len(frame) == 4
    assert list(frame["dim"]) == [2, 2, 4, 4]
    assert list(frame["whiten"]) == [False, True, False, True]
    assert {"r_at_1", "r_at_5", "r_at_10", "mrr5", "kldiv"} <= set(frame.columns)


@pytest.mark.slow
def test_compare_losses_runs_every_combination():
    cfg = small_experiment()
    result = compare_losses(cfg, seeds=[0, 1])
    table = result.table
    assert list(table.columns) == BENCHMARK_COLUMNS
    assert len(table) == 6
    assert set(table["loss"]) == {"mse", "cl", "gcl"}
    assert all(math.isfinite(v) for v in table[["r_at_5", "mrr5", "kldiv"]].to_numpy().ravel())
    for loss, frames in result.curves.items():
        assert len(frames) == 2
        assert all(list(f["iteration"]) == [0, 200, 400] for f in frames)
    assert list(result.summary().index) == ["cl", "gcl", "mse"]

    mse = aggregate_curves(result.curves["mse"])
    assert mse["r_at_5_mean"].iloc[-1] >= mse["r_at_5_mean"].iloc[0]


def test_pair_count_must_fit_map_pool():
    cfg = small_experiment()
    cfg = cfg.model_copy(update={"pairs": cfg.pairs.model_copy(update={"n_pairs": 40 * 39 // 2 + 1})})
    with pytest.raises(InputError, match=r"pairs\.n_pairs"):
        compare_losses(cfg, seeds=[0])


def test_default_pair_count_fits_map_pool():
    cfg = ExperimentConfig.default()
    assert cfg.pairs.n_pairs <= cfg.world.n_map * (cfg.world.n_map - 1) // 2


@pytest.mark.slow
def test_regression_training_against_contrastive_baselines():
    seeds = range(5)
    cfg = ExperimentConfig.default(0)
    cfg = cfg.model_copy(update={"train": cfg.train.model_copy(update={"snapshot_period": 5000})})
    result = compare_losses(cfg, seeds=seeds)
    final = result.table.set_index(["loss", "seed"])
    curves = {loss: {int(f["seed"].iloc[0]): f.set_index("iteration")["r_at_5"] for f in frames}
              for loss, frames in result.curves.items()}

    def seeds_where(check):
        return sum(bool(check(seed)) for seed in seeds)

    assert seeds_where(lambda s: final.loc[("mse", s), "kldiv"] < final.loc[("gcl", s), "kldiv"]) >= 4
    assert seeds_where(lambda s: final.loc[("mse", s), "r_at_5"] >= final.loc[("gcl", s), "r_at_5"]
                       >= final.loc[("cl", s), "r_at_5"]) >= 4

    quarter = cfg.train.total_iterations // 4
    assert seeds_where(lambda s: curves["mse"][s].loc[:quarter].max() >= 0.9 * curves["mse"][s].iloc[-1]) >= 4
    assert seeds_where(lambda s: (curves["mse"][s] >= curves["cl"][s]).all()) >= 4

    for seed in seeds:
        world_cfg = with_seed(cfg, seed).world.to_world_config()
        world = generate_synthetic_world(world_cfg)
        gt = ground_truth_from_poses(world, cfg.eval.dist_m, math.radians(cfg.eval.angle_deg))
        assert final.loc[("mse", seed), "r_at_5"] > chance_recall_at_k(gt, world_cfg.n_map, 5)
