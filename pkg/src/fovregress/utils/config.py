"""
config.py

Experiment configuration file: a JSON document with sections `world`, `pairs`,
`train` and `eval`, validated with pydantic. Unknown keys are rejected and every
random seed must be given explicitly. Angles are in degrees here and converted
to radians when the core configs are built.
"""

import math
from typing import List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from fovregress.utils.exceptions import InputError
from fovregress.utils.utils import read_json


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class WorldSection(_Section):
    """Synthetic world parameters."""

    seed: int = Field(..., ge=0, description="Master seed of the synthetic world")
    n_landmarks: int = Field(4000, gt=0)
    landmark_feature_dim: int = Field(32, gt=0)
    n_map: int = Field(200, gt=0)
    n_query: int = Field(100, ge=0)
    trajectory_length: float = Field(600.0, gt=0)
    fov_deg: float = Field(90.0, gt=0, lt=180)
    range_m: float = Field(30.0, gt=0)
    noise_sigma: float = Field(0.05, ge=0)
    d_in: int = Field(64, gt=0)
    heading_jitter_deg: float = Field(10.0, ge=0)
    lateral_jitter: float = Field(2.0, ge=0)
    amplitude: float = Field(40.0)
    period: float = Field(200.0, gt=0)

    def to_world_config(self):
        from fovregress.core.dataset.synthetic import SyntheticWorldConfig

        return SyntheticWorldConfig(
            n_landmarks=self.n_landmarks,
            landmark_feature_dim=self.landmark_feature_dim,
            n_map=self.n_map,
            n_query=self.n_query,
            trajectory_length=self.trajectory_length,
            fov_angle=math.radians(self.fov_deg),
            range=self.range_m,
            noise_sigma=self.noise_sigma,
            d_in=self.d_in,
            seed=self.seed,
            heading_jitter=math.radians(self.heading_jitter_deg),
            lateral_jitter=self.lateral_jitter,
            amplitude=self.amplitude,
            period=self.period,
        )


class PairsSection(_Section):
    seed: int = Field(..., ge=0, description="Pair sampling seed")
    n_pairs: int = Field(15000, ge=0, description="Training pairs; at most C(n_map, 2) for benchmark runs")
    include_queries: bool = Field(True, description="Also sample map x query pairs")


class TrainSection(_Section):
    """Training parameters; `schedule` defaults to constant for mse and step otherwise."""

    init_seed: int = Field(..., ge=0)
    sampler_seed: int = Field(..., ge=0)
    loss: Literal["mse", "cl", "gcl"] = "mse"
    learning_rate: float = Field(0.1, gt=0)
    schedule: Optional[Literal["constant", "step"]] = None
    step_factor: float = Field(0.1, gt=0)
    step_period: int = Field(250_000, gt=0)
    batch_size: int = Field(16, ge=1)
    f_high: float = Field(0.5, ge=0, le=1)
    f_mid: float = Field(0.25, ge=0, le=1)
    f_zero: float = Field(0.25, ge=0, le=1)
    total_iterations: int = Field(20_000, gt=0)
    snapshot_period: int = Field(10_000, gt=0)
    hidden: List[int] = Field(default_factory=lambda: [128, 64])
    d_out: int = Field(32, gt=0)
    activation: Literal["relu", "tanh"] = "relu"
    margin: float = Field(1.0, gt=0)
    binarize_threshold: float = Field(0.5, gt=0, lt=1)
    log_every: int = Field(1000, ge=0)

    @model_validator(mode="after")
    def _fractions_sum_to_one(self):
        if not math.isclose(self.f_high + self.f_mid + self.f_zero, 1.0, abs_tol=1e-9):
            raise ValueError("f_high + f_mid + f_zero must equal 1")
        return self

    def to_train_config(self, loss=None, step_period=None, learning_rate=None, total_iterations=None):
        """Build a TrainConfig, optionally overriding the command-line tunables."""
        from fovregress.core.training.encoder import SgdConfig
        from fovregress.core.training.sampler import BatchSpec
        from fovregress.core.training.trainer import TrainConfig

        loss = loss or self.loss
        schedule = self.schedule or ("constant" if loss == "mse" else "step")
        sgd = SgdConfig(
            learning_rate=learning_rate if learning_rate is not None else self.learning_rate,
            schedule=schedule,
            step_factor=self.step_factor,
            step_period=step_period if step_period is not None else self.step_period,
        )
        return TrainConfig(
            loss=loss,
            sgd=sgd,
            batch=BatchSpec(self.batch_size, self.f_high, self.f_mid, self.f_zero),
            total_iterations=total_iterations if total_iterations is not None else self.total_iterations,
            snapshot_period=self.snapshot_period,
            init_seed=self.init_seed,
            sampler_seed=self.sampler_seed,
            hidden=tuple(self.hidden),
            d_out=self.d_out,
            activation=self.activation,
            margin=self.margin,
            binarize_threshold=self.binarize_threshold,
            log_every=self.log_every,
        )


class EvalSection(_Section):
    seed: int = Field(..., ge=0, description="Seed of the KL pair subsampling")
    k_values: List[int] = Field(default_factory=lambda: [1, 5, 10])
    bins: int = Field(100, ge=2)
    smoothing: float = Field(1e-10, ge=0)
    whiten: bool = False
    pca_dim: Optional[int] = Field(None, ge=1)
    whitening_eps: float = Field(1e-8, ge=0)
    kl_target: Literal["graded", "binary"] = "graded"
    max_kl_pairs: int = Field(10 ** 6, ge=1)
    workers: int = Field(1, ge=1)
    dist_m: float = Field(25.0, ge=0, description="Ground-truth distance threshold")
    angle_deg: float = Field(40.0, ge=0, description="Ground-truth heading threshold")

    def to_eval_config(self, whiten=None, pca_dim=None, k_values=None):
        from fovregress.core.evaluation.evaluate import EvalConfig

        return EvalConfig(
            k_values=tuple(k_values or self.k_values),
            bins=self.bins,
            smoothing=self.smoothing,
            whiten=self.whiten if whiten is None else whiten,
            pca_dim=self.pca_dim if pca_dim is None else pca_dim,
            whitening_eps=self.whitening_eps,
            kl_target=self.kl_target,
            max_kl_pairs=self.max_kl_pairs,
            seed=self.seed,
        )


class ExperimentConfig(_Section):
    """Top-level experiment file."""

    world: WorldSection
    pairs: PairsSection
    train: TrainSection
    eval: EvalSection

    @classmethod
    def default(cls, seed=0):
        """Default experiment with every seed set to `seed`."""
        return cls(
            world=WorldSection(seed=seed),
            pairs=PairsSection(seed=seed),
            train=TrainSection(init_seed=seed, sampler_seed=seed),
            eval=EvalSection(seed=seed),
        )

    def to_dict(self):
        return self.model_dump(mode="json")


def format_validation_error(error):
    """One line per problem: dotted field path, then the message."""
    lines = []
    for err in error.errors():
        loc = ".".join(str(part) for part in err["loc"]) or "<root>"
        lines.append(f"{loc}: {err['msg']}")
    return "; ".join(lines)


def parse_experiment_config(doc, source="config"):
    try:
        return ExperimentConfig.model_validate(doc)
    except ValidationError as e:
        raise InputError(f"{source}: {format_validation_error(e)}") from None


def load_experiment_config(path):
    """
    Read and validate an experiment JSON file.

    Raises:
        InputError: missing file, invalid JSON, or validation failure; the
            message names the offending field path (e.g. "world.seed").
    """
    return parse_experiment_config(read_json(path), source=str(path))
