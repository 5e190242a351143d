"""
synthetic.py

Desk-scale synthetic place-recognition world.

Landmarks are scattered uniformly over a rectangle around a smooth trajectory,
each carrying a fixed random feature vector. Cameras ride along the trajectory
(map cameras evenly spaced, query cameras at random arc lengths) with jittered
headings and a small lateral offset. An image observation is a weighted mix of
the features of the landmarks inside the camera frustum, projected to d_in
dimensions and perturbed by Gaussian noise:

    s   = Σ_{ℓ in frustum} (1 - dist(camera, ℓ) / range) · feature(ℓ)
    z   = W_proj · s + ε,          ε ~ N(0, σ² I)
    obs = z / max(1, ‖z‖)

Cameras that share more of their field of view share more landmark terms, so
observation similarity grows with ψ. A camera that sees no landmark emits pure
noise.

The centerline is the curve

    x(u) = u,   y(u) = A · sin(2π u / P)

for u in [0, length], with amplitude A and period P taken from the config;
cameras are placed by arc length so that spacing is uniform along the curve.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np

from fovregress.core.dataset.dataset import Dataset, PlaceImage
from fovregress.core.geometry.geometry import CameraPose, frustum_polygon, heading_from_track
from fovregress.utils.exceptions import InputError

# Dense sampling of the centerline used for arc-length interpolation.
_CENTERLINE_SAMPLES = 4096


@dataclass(frozen=True)
class SyntheticWorldConfig:
    """
    Parameters of a synthetic world.

    Attributes:
        n_landmarks (int): Number of landmarks.
        landmark_feature_dim (int): Dimension F of landmark features.
        n_map, n_query (int): Number of map and query cameras.
        trajectory_length (float): Extent of the trajectory along x, meters.
        fov_angle (float): Camera opening angle, radians.
        range (float): Camera sensing range, meters.
        noise_sigma (float): Observation noise standard deviation σ.
        d_in (int): Observation dimension.
        seed (int): Master seed.
        heading_jitter (float): Std of heading noise, radians.
        lateral_jitter (float): Std of the sideways camera offset, meters.
        amplitude (float): Amplitude A of the sinusoidal centerline, meters.
        period (float): Period P of the centerline, meters.
    """

    n_landmarks: int = 4000
    landmark_feature_dim: int = 32
    n_map: int = 200
    n_query: int = 100
    trajectory_length: float = 600.0
    fov_angle: float = math.radians(90.0)
    range: float = 30.0
    noise_sigma: float = 0.05
    d_in: int = 64
    seed: int = 0
    heading_jitter: float = math.radians(10.0)
    lateral_jitter: float = 2.0
    amplitude: float = 40.0
    period: float = 200.0

    def __post_init__(self):
        for name in ("n_landmarks", "landmark_feature_dim", "n_map", "d_in"):
            if int(getattr(self, name)) <= 0:
                raise InputError(f"{name} must be > 0, got {getattr(self, name)}")
        if self.n_query < 0:
            raise InputError(f"n_query must be >= 0, got {self.n_query}")
        if self.trajectory_length <= 0 or self.period <= 0:
            raise InputError("trajectory_length and period must be > 0")
        if self.noise_sigma < 0 or self.heading_jitter < 0 or self.lateral_jitter < 0:
            raise InputError("noise_sigma, heading_jitter and lateral_jitter must be >= 0")
        # range / fov are validated again by CameraPose; fail early with a config message
        if self.range <= 0 or not (0.0 < self.fov_angle < math.pi):
            raise InputError(f"range must be > 0 and fov_angle in (0, π), got {self.range}, {self.fov_angle}")


def normalize_input(z):
    """Scale rows of z down to unit L2 norm when their norm exceeds 1."""
    z = np.asarray(z, dtype=float)
    norms = np.linalg.norm(z, axis=-1, keepdims=True)
    return z / np.maximum(1.0, norms)


class _Centerline:
    """Arc-length parametrized sinusoidal trajectory."""

    def __init__(self, cfg):
        u = np.linspace(0.0, cfg.trajectory_length, _CENTERLINE_SAMPLES)
        self.x = u
        self.y = cfg.amplitude * np.sin(2.0 * math.pi * u / cfg.period)
        seg = np.hypot(np.diff(self.x), np.diff(self.y))
        self.s = np.concatenate(([0.0], np.cumsum(seg)))

    @property
    def length(self):
        return float(self.s[-1])

    def point(self, s):
        return np.interp(s, self.s, self.x), np.interp(s, self.s, self.y)

    def frame(self, s):
        """Position, heading and left normal at arc length s."""
        ds = 1e-3 * self.length
        x0, y0 = self.point(max(0.0, s - ds))
        x1, y1 = self.point(min(self.length, s + ds))
        heading = heading_from_track((x0, y0), (x1, y1))
        normal = (-math.sin(heading), math.cos(heading))
        return self.point(s), heading, normal


def _place_cameras(cfg, line, arc_lengths, rng, first_id, role):
    poses = []
    for k, s in enumerate(arc_lengths):
        (px, py), heading, (nx, ny) = line.frame(float(s))
        offset = rng.normal(0.0, cfg.lateral_jitter) if cfg.lateral_jitter > 0 else 0.0
        jitter = rng.normal(0.0, cfg.heading_jitter) if cfg.heading_jitter > 0 else 0.0
        poses.append((CameraPose(first_id + k, px + offset * nx, py + offset * ny,
                                 heading + jitter, cfg.fov_angle, cfg.range), role))
    return poses


def _observe(pose, landmarks, features, w_proj, noise):
    frustum = frustum_polygon(pose)
    near = np.hypot(landmarks[:, 0] - pose.x, landmarks[:, 1] - pose.y) <= pose.range
    idx = np.nonzero(near)[0]
    mix = np.zeros(features.shape[1])
    if len(idx):
        visible = idx[frustum.contains(landmarks[idx])]
        if len(visible):
            dist = np.hypot(landmarks[visible, 0] - pose.x, landmarks[visible, 1] - pose.y)
            weights = np.clip(1.0 - dist / pose.range, 0.0, None)
            mix = weights @ features[visible]
    return normalize_input(w_proj @ mix + noise)


def generate_synthetic_world(cfg):
    """
    Generate a deterministic synthetic dataset.

    Parameters:
        cfg (SyntheticWorldConfig): World parameters.

    Returns:
        Dataset: map images with ids 0..n_map-1, then query images, all with
        observations of dimension cfg.d_in.
    """
    streams = np.random.SeedSequence(cfg.seed).spawn(5)
    rng_landmarks, rng_features, rng_proj, rng_cameras, rng_noise = (np.random.default_rng(s) for s in streams)

    line = _Centerline(cfg)
    margin = cfg.range + 3.0 * cfg.lateral_jitter
    xmin, xmax = float(line.x.min()) - margin, float(line.x.max()) + margin
    ymin, ymax = float(line.y.min()) - margin, float(line.y.max()) + margin
    landmarks = np.column_stack([
        rng_landmarks.uniform(xmin, xmax, cfg.n_landmarks),
        rng_landmarks.uniform(ymin, ymax, cfg.n_landmarks),
    ])
    features = rng_features.standard_normal((cfg.n_landmarks, cfg.landmark_feature_dim))
    w_proj = rng_proj.standard_normal((cfg.d_in, cfg.landmark_feature_dim)) / math.sqrt(cfg.landmark_feature_dim)

    map_s = np.linspace(0.0, line.length, cfg.n_map)
    query_s = np.sort(rng_cameras.uniform(0.0, line.length, cfg.n_query))
    placed = _place_cameras(cfg, line, map_s, rng_cameras, 0, "map")
    placed += _place_cameras(cfg, line, query_s, rng_cameras, cfg.n_map, "query")

    noise = rng_noise.normal(0.0, cfg.noise_sigma, size=(len(placed), cfg.d_in)) if cfg.noise_sigma > 0 \
        else np.zeros((len(placed), cfg.d_in))
    images = [
        PlaceImage(pose.id, pose, role, _observe(pose, landmarks, features, w_proj, noise[k]))
        for k, (pose, role) in enumerate(placed)
    ]
    logging.info(
        f"Synthetic world (seed {cfg.seed}): {cfg.n_map} map / {cfg.n_query} query cameras, "
        f"{cfg.n_landmarks} landmarks over {xmax - xmin:.0f} x {ymax - ymin:.0f} m"
    )
    return Dataset(images)
