"""
evaluate.py

One-pass evaluation of a model (or precomputed descriptors) on a dataset:
descriptors for maps and queries, optional PCA whitening fitted on the map
side, exhaustive search and every ranking metric.

Classes:
    - EvalConfig: cut-offs, KL binning, whitening options.
    - EvalReport: the resulting metrics, JSON-ready through `to_dict`.
    - EvalResult: report plus the intermediate descriptors and rankings.

Functions:
    - compute_descriptors, run_evaluation, evaluate.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from fovregress.core.evaluation.metrics import (
    DEFAULT_BINS,
    DEFAULT_MAX_PAIRS,
    DEFAULT_SMOOTHING,
    feature_covariance,
    kl_divergence_distance_vs_similarity,
    mrr_at_5,
    recall_at_k,
)
from fovregress.core.geometry.geometry import psi_matrix
from fovregress.core.retrieval.retrieval import build_index, search_many
from fovregress.core.retrieval.whitening import DEFAULT_EPS, apply_whitening, fit_pca_whitening
from fovregress.core.training.encoder import EncoderModel, encode
from fovregress.utils.exceptions import InputError

KL_TARGETS = ("graded", "binary")


@dataclass(frozen=True)
class EvalConfig:
    """
    Evaluation settings.

    Attributes:
        k_values (tuple[int]): Recall cut-offs.
        bins (int): KL histogram bins over the distance range [0, 2].
        smoothing (float): KL additive smoothing δ.
        whiten (bool): Apply PCA whitening fitted on map descriptors.
        pca_dim (int | None): Reduced dimension; a PCA projection is applied
            even without `whiten` when set.
        whitening_eps (float): Eigenvalue regularizer.
        kl_target (str): "graded" uses frustum-overlap ψ from the poses,
            "binary" uses the ground-truth relation.
        max_kl_pairs (int): Pair budget of the KL metric.
        seed (int): KL subsampling seed.
    """

    k_values: tuple = (1, 5, 10)
    bins: int = DEFAULT_BINS
    smoothing: float = DEFAULT_SMOOTHING
    whiten: bool = False
    pca_dim: int = None
    whitening_eps: float = DEFAULT_EPS
    kl_target: str = "graded"
    max_kl_pairs: int = DEFAULT_MAX_PAIRS
    seed: int = 0

    def __post_init__(self):
        ks = tuple(sorted({int(k) for k in self.k_values}))
        if not ks or ks[0] < 1:
            raise InputError(f"k values must be >= 1, got {self.k_values}")
        object.__setattr__(self, "k_values", ks)
        if int(self.bins) < 2:
            raise InputError(f"bins must be >= 2, got {self.bins}")
        if self.smoothing < 0:
            raise InputError(f"smoothing must be >= 0, got {self.smoothing}")
        if self.pca_dim is not None and int(self.pca_dim) < 1:
            raise InputError(f"pca_dim must be >= 1, got {self.pca_dim}")
        if self.kl_target not in KL_TARGETS:
            raise InputError(f"kl_target must be one of {KL_TARGETS}, got '{self.kl_target}'")
        if int(self.max_kl_pairs) < 1:
            raise InputError(f"max_kl_pairs must be >= 1, got {self.max_kl_pairs}")


@dataclass(frozen=True)
class EvalReport:
    """Metrics of one evaluation, with an echo of the settings that produced them."""

    r_at_k: dict
    mrr5: float
    kldiv: float
    cov_offdiag_mean: float
    dim: int
    whiten: bool
    n_queries: int
    bins: int = DEFAULT_BINS
    smoothing: float = DEFAULT_SMOOTHING
    pca_dim: int = None

    def to_dict(self):
        doc = {f"r_at_{k}": v for k, v in sorted(self.r_at_k.items())}
        doc.update(
            mrr5=self.mrr5,
            kldiv=self.kldiv,
            cov_offdiag_mean=self.cov_offdiag_mean,
            dim=self.dim,
            whiten=self.whiten,
            pca_dim=self.pca_dim,
            n_queries=self.n_queries,
            bins=self.bins,
            smoothing=self.smoothing,
            k_values=sorted(self.r_at_k),
        )
        return doc


@dataclass
class EvalResult:
    report: EvalReport
    map_ids: list
    query_ids: list
    map_descriptors: np.ndarray = field(repr=False)
    query_descriptors: np.ndarray = field(repr=False)
    rankings: list = field(repr=False)
    covariance: np.ndarray = field(repr=False)
    whitening: object = None


def compute_descriptors(source, dataset):
    """
    Map and query descriptors in dataset id order.

    Parameters:
        source (EncoderModel | Mapping[int, ndarray]): Model to encode the
            dataset observations with, or precomputed descriptors per image id.
        dataset (Dataset)

    Returns:
        tuple: (map descriptors (n_m, d), query descriptors (n_q, d))
    """
    map_ids, query_ids = list(dataset.map_ids), list(dataset.query_ids)
    if isinstance(source, EncoderModel):
        return encode(source, dataset.observations(map_ids)), encode(source, dataset.observations(query_ids))
    missing = [i for i in map_ids + query_ids if i not in source]
    if missing:
        raise InputError(f"No descriptor for image ids {missing[:10]}")

    def _stack(ids):
        if not ids:
            return np.zeros((0, len(next(iter(source.values())))))
        return np.stack([np.asarray(source[i], dtype=float) for i in ids])

    return _stack(map_ids), _stack(query_ids)


def _check_gt(gt, dataset):
    maps = set(dataset.map_ids)
    queries = set(dataset.query_ids)
    for qid, positives in gt.items():
        if qid not in queries:
            raise InputError(f"Ground truth names query {qid}, which is not a query of the dataset")
        unknown = sorted(set(positives) - maps)
        if unknown:
            raise InputError(f"Ground truth of query {qid} references unknown map ids {unknown[:10]}")


def binary_psi(gt, query_ids, map_ids):
    """Query×map 0/1 matrix of the ground-truth relation."""
    col = {m: c for c, m in enumerate(map_ids)}
    psi = np.zeros((len(query_ids), len(map_ids)))
    for r, qid in enumerate(query_ids):
        for m in gt.get(qid, ()):
            psi[r, col[m]] = 1.0
    return psi


def target_psi(dataset, gt, config):
    """ψ matrix used by the KL metric under `config.kl_target`."""
    if config.kl_target == "binary":
        return binary_psi(gt, dataset.query_ids, dataset.map_ids)
    return psi_matrix(dataset.poses(dataset.query_ids), dataset.poses(dataset.map_ids))


def run_evaluation(source, dataset, gt, psi=None, config=None, whitening=None):
    """
    Full evaluation pass; see `evaluate` for the parameters.

    A fitted `whitening` is applied as is; otherwise one is fitted on the map
    descriptors when `config.whiten` or `config.pca_dim` asks for it.

    Returns:
        EvalResult
    """
    config = config or EvalConfig()
    _check_gt(gt, dataset)
    if not dataset.query_ids or not dataset.map_ids:
        raise InputError("Evaluation needs at least one map and one query image")

    map_desc, query_desc = compute_descriptors(source, dataset)
    loaded = whitening is not None
    if not loaded and (config.whiten or config.pca_dim is not None):
        whitening = fit_pca_whitening(map_desc, config.pca_dim, config.whitening_eps, whiten=config.whiten)
    if whitening is not None:
        map_desc = apply_whitening(whitening, map_desc)
        query_desc = apply_whitening(whitening, query_desc)

    index = build_index(map_desc, dataset.map_ids)
    rankings = search_many(index, query_desc, max(config.k_values), query_ids=list(dataset.query_ids))
    r_at_k = {k: recall_at_k(rankings, gt, k) for k in config.k_values}
    mrr5 = mrr_at_5(rankings, gt)

    if psi is None:
        psi = target_psi(dataset, gt, config)
    kldiv = kl_divergence_distance_vs_similarity(
        query_desc, map_desc, psi, config.bins, config.smoothing, config.max_kl_pairs, config.seed
    )
    covariance, offdiag = feature_covariance(np.vstack([map_desc, query_desc]))

    n_queries = sum(1 for q in dataset.query_ids if gt.get(q))
    report = EvalReport(
        r_at_k=r_at_k,
        mrr5=mrr5,
        kldiv=kldiv,
        cov_offdiag_mean=offdiag,
        dim=int(map_desc.shape[1]),
        whiten=bool(whitening.whiten if loaded else config.whiten),
        n_queries=n_queries,
        bins=int(config.bins),
        smoothing=float(config.smoothing),
        pca_dim=int(whitening.r) if loaded else (None if config.pca_dim is None else int(config.pca_dim)),
    )
    logging.info(
        "Evaluation: " + ", ".join(f"R@{k} {v:.4f}" for k, v in r_at_k.items())
        + f", MRR@5 {mrr5:.4f}, KL {kldiv:.6f} on {n_queries} queries (dim {report.dim})"
    )
    return EvalResult(report, list(dataset.map_ids), list(dataset.query_ids), map_desc, query_desc,
                      rankings, covariance, whitening)


def evaluate(source, dataset, gt, psi=None, config=None):
    """
    Evaluate a model or a descriptor set.

    Parameters:
        source (EncoderModel | Mapping[int, ndarray]): What to evaluate.
        dataset (Dataset): Map and query images (observations needed for a model).
        gt (Mapping[int, Iterable[int]]): Positive map ids per query id.
        psi (ndarray | None): (n_q, n_m) similarity matrix for the KL metric in
            dataset id order; derived per `config.kl_target` when None.
        config (EvalConfig | None)

    Returns:
        EvalReport
    """
    return run_evaluation(source, dataset, gt, psi, config).report
