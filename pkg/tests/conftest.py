"""Shared fixtures: a small seeded synthetic world and helpers built on it."""

import math

import numpy as np
import pytest

from fovregress.core.dataset.dataset import build_pairs, ground_truth_from_poses
from fovregress.core.dataset.synthetic import SyntheticWorldConfig, generate_synthetic_world
from fovregress.core.training.sampler import BatchSpec
from fovregress.core.training.trainer import TrainConfig, default_sgd

# Dense cameras without jitter: neighbouring map cameras overlap with psi > 0.5,
# far ones not at all, so every psi bucket is populated.
SMALL_WORLD = dict(
    n_landmarks=800,
    landmark_feature_dim=16,
    n_map=40,
    n_query=12,
    trajectory_length=100.0,
    noise_sigma=0.02,
    d_in=16,
    heading_jitter=0.0,
    lateral_jitter=0.0,
    amplitude=10.0,
    seed=3,
)


@pytest.fixture(scope="session")
def small_world_config():
    return SyntheticWorldConfig(**SMALL_WORLD)


@pytest.fixture(scope="session")
def small_world(small_world_config):
    return generate_synthetic_world(small_world_config)


@pytest.fixture(scope="session")
def small_pairs(small_world):
    m = len(small_world.map_ids)
    return build_pairs(small_world, m * (m - 1) // 2, seed=1, include_queries=False)


@pytest.fixture(scope="session")
def small_gt(small_world):
    return ground_truth_from_poses(small_world, 25.0, math.radians(40.0))


@pytest.fixture
def tiny_train_config():
    return TrainConfig(
        loss="mse",
        sgd=default_sgd("mse"),
        batch=BatchSpec(8),
        total_iterations=30,
        snapshot_period=10,
        hidden=(12,),
        d_out=6,
        log_every=0,
    )


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
