"""
dataset.py

Place-recognition datasets: camera poses split into a map set and a query set,
optional per-image observation vectors, and ψ-labelled training pairs.

Classes:
    - PlaceImage: one image (pose, role and optional observation).
    - Dataset: immutable collection of PlaceImage with map/query id sets.
    - SimilarityPair: (i, j, ψ) training record.

Functions:
    - build_pairs(ds, n_pairs, seed): uniform sample of ψ-labelled pairs.
    - ground_truth_from_poses(ds, dist_thresh, angle_thresh): binary positives.

File parsing lives in fovregress.data_io.pose_io; `load_poses` is re-exported here
because it is the way most datasets come into existence.
"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from fovregress.core.geometry.geometry import fov_overlap, is_positive
from fovregress.utils.exceptions import InputError
from fovregress.utils.utils import make_rng

ROLES = ("map", "query")


@dataclass(frozen=True)
class PlaceImage:
    """
    A single image of the dataset.

    Attributes:
        id (int): Unique image id.
        pose (CameraPose): Camera pose the image was taken from.
        role (str): "map" or "query".
        observation (ndarray | None): Input vector of dimension d_in, or None
            until observations are synthesized or loaded.
    """

    id: int
    pose: object
    role: str
    observation: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self.role not in ROLES:
            raise InputError(f"Image {self.id}: role must be one of {ROLES}, got '{self.role}'")
        if self.observation is not None:
            obs = np.array(self.observation, dtype=float)
            if obs.ndim != 1:
                raise InputError(f"Image {self.id}: observation must be a vector, got shape {obs.shape}")
            obs.setflags(write=False)
            object.__setattr__(self, "observation", obs)


@dataclass(frozen=True)
class SimilarityPair:
    """Training record (image i, image j, graded similarity ψ)."""

    i: int
    j: int
    psi: float

    def __post_init__(self):
        if self.i == self.j:
            raise InputError(f"A pair needs two different images, got ({self.i}, {self.j})")
        if not (0.0 <= self.psi <= 1.0):
            raise InputError(f"Pair ({self.i}, {self.j}): psi must lie in [0, 1], got {self.psi}")


class Dataset:
    """
    Immutable set of place images with disjoint map and query ids.

    Parameters:
        images (Iterable[PlaceImage]): Images; ids must be unique.

    Attributes:
        images (tuple[PlaceImage]): Images sorted by id.
        map_ids, query_ids (tuple[int]): Sorted ids per role.
        d_in (int | None): Observation dimension (None without observations).
    """

    def __init__(self, images):
        images = tuple(sorted(images, key=lambda im: im.id))
        self._by_id = {}
        for im in images:
            if im.id in self._by_id:
                raise InputError(f"Duplicate image id {im.id}")
            self._by_id[im.id] = im
        self.images = images
        self.map_ids = tuple(im.id for im in images if im.role == "map")
        self.query_ids = tuple(im.id for im in images if im.role == "query")

        dims = {im.observation.shape[0] for im in images if im.observation is not None}
        if len(dims) > 1:
            raise InputError(f"Observation dimensions differ across the dataset: {sorted(dims)}")
        with_obs = sum(im.observation is not None for im in images)
        if 0 < with_obs < len(images):
            raise InputError(f"Only {with_obs} of {len(images)} images carry an observation")
        self.d_in = dims.pop() if dims else None

    def __len__(self):
        return len(self.images)

    def __getitem__(self, image_id):
        try:
            return self._by_id[image_id]
        except KeyError:
            raise InputError(f"Unknown image id {image_id}") from None

    def __contains__(self, image_id):
        return image_id in self._by_id

    @property
    def has_observations(self):
        return self.d_in is not None

    def poses(self, ids=None):
        ids = [im.id for im in self.images] if ids is None else ids
        return [self[i].pose for i in ids]

    def observations(self, ids):
        """Stack the observations of `ids` into an (n, d_in) matrix."""
        if not self.has_observations:
            raise InputError("Dataset has no observations")
        return np.stack([self[i].observation for i in ids]) if len(ids) else np.zeros((0, self.d_in))

    def observation_matrix(self):
        """(ids, matrix) of all observations in id order."""
        ids = [im.id for im in self.images]
        return ids, self.observations(ids)

    def with_observations(self, observations):
        """
        Return a copy with observations attached.

        Parameters:
            observations (Mapping[int, ndarray]): One vector per image id.
        """
        missing = [im.id for im in self.images if im.id not in observations]
        if missing:
            raise InputError(f"No observation for image ids {missing[:10]}")
        return Dataset(
            PlaceImage(im.id, im.pose, im.role, observations[im.id]) for im in self.images
        )


def build_pairs(ds, n_pairs, seed, include_queries=True):
    """
    Sample ψ-labelled training pairs uniformly from the pose-pair pool.

    The pool holds every unordered map×map pair and, when `include_queries` is
    set, every map×query pair. Pairs are drawn without replacement and labelled
    with fov_overlap of their two poses.

    Parameters:
        ds (Dataset): Dataset with poses.
        n_pairs (int): Number of pairs to emit.
        seed (int): Sampling seed.
        include_queries (bool): Also draw map×query pairs.

    Returns:
        list[SimilarityPair]: Pairs in pool order.

    Raises:
        InputError: if n_pairs exceeds the number of distinct pairs.
    """
    map_ids = np.array(ds.map_ids, dtype=np.int64)
    query_ids = np.array(ds.query_ids if include_queries else (), dtype=np.int64)
    m, q = len(map_ids), len(query_ids)
    n_map_map = m * (m - 1) // 2
    pool_size = n_map_map + m * q
    if n_pairs < 0 or n_pairs > pool_size:
        raise InputError(f"Requested {n_pairs} pairs but only {pool_size} distinct pairs exist")

    rng = make_rng(seed)
    chosen = np.sort(rng.choice(pool_size, size=n_pairs, replace=False))

    iu, ju = np.triu_indices(m, k=1)
    pairs = []
    for idx in chosen:
        if idx < n_map_map:
            i, j = map_ids[iu[idx]], map_ids[ju[idx]]
        else:
            rest = idx - n_map_map
            i, j = map_ids[rest // q], query_ids[rest % q]
        i, j = int(i), int(j)
        pairs.append(SimilarityPair(i, j, fov_overlap(ds[i].pose, ds[j].pose)))

    logging.info(f"Built {len(pairs)} pairs from a pool of {pool_size}")
    return pairs


def psi_histogram(pairs, bins=10):
    """Counts of pair ψ values over `bins` equal-width bins on [0, 1]."""
    counts, edges = np.histogram([p.psi for p in pairs], bins=bins, range=(0.0, 1.0))
    return counts, edges


def ground_truth_from_poses(ds, dist_thresh=25.0, angle_thresh=math.radians(40.0)):
    """
    Binary positives per query under the distance/heading rule.

    Returns:
        dict[int, frozenset[int]]: Every query id, mapped to its positive map ids.
    """
    maps = [ds[i].pose for i in ds.map_ids]
    relation = {}
    for qid in ds.query_ids:
        qpose = ds[qid].pose
        relation[qid] = frozenset(
            mid for mid, mpose in zip(ds.map_ids, maps)
            if is_positive(qpose, mpose, dist_thresh, angle_thresh)
        )
    n_with = sum(bool(v) for v in relation.values())
    logging.info(f"Ground truth: {n_with}/{len(relation)} queries have at least one positive")
    return relation


def load_poses(path):
    """Read a poses.csv file into a Dataset (see fovregress.data_io.pose_io)."""
    from fovregress.data_io.pose_io import read_poses_csv

    return read_poses_csv(path)
