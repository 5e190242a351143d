"""
metrics.py

Ranking-quality metrics for place recognition.

- recall_at_k: fraction of queries with a positive among the top k.
- chance_recall_at_k: R@k a random ranking achieves on the same ground truth.
- mrr_at_5: linear reciprocal-rank variant, (6 - rank) / 5 for the first
  positive at rank 1..5, else 0.
- kl_divergence_distance_vs_similarity: KL(P || Q) between the histogram of
  descriptor distances and the histogram of the regression target 1 - ψ over
  the same pairs.
- feature_covariance: sample covariance of descriptors and its mean absolute
  off-diagonal entry.

Queries without positives are left out of the recall and MRR denominators.
"""

import logging

import numpy as np
from scipy.spatial.distance import cdist
from scipy.special import rel_entr
from scipy.stats import hypergeom

from fovregress.utils.exceptions import InputError
from fovregress.utils.utils import make_rng

DEFAULT_BINS = 100
DEFAULT_SMOOTHING = 1e-10
DEFAULT_MAX_PAIRS = 10 ** 6
# Distances between unit vectors lie in [0, 2].
DISTANCE_RANGE = 2.0


def _as_rankings(ranked):
    """Accept a mapping query id -> ranked ids, or a list of RankedList."""
    if isinstance(ranked, dict):
        return {q: tuple(getattr(r, "ids", r)) for q, r in ranked.items()}
    out = {}
    for r in ranked:
        if r.query_id is None:
            raise InputError("Ranked lists need query ids to be matched with ground truth")
        out[r.query_id] = tuple(r.ids)
    return out


def _scored_queries(ranked, gt):
    rankings = _as_rankings(ranked)
    scored = []
    for qid in sorted(gt):
        positives = frozenset(gt[qid])
        if not positives:
            continue
        if qid not in rankings:
            raise InputError(f"No ranked list for query {qid}")
        scored.append((rankings[qid], positives))
    if not scored:
        raise InputError("No query has a positive; the metric is undefined")
    return scored


def first_positive_rank(ids, positives):
    """1-based rank of the first positive in `ids`, or None."""
    for rank, candidate in enumerate(ids, start=1):
        if candidate in positives:
            return rank
    return None


def recall_at_k(ranked, gt, k):
    """
    Fraction of queries with at least one positive in their top k.

    Parameters:
        ranked (list[RankedList] | dict): Rankings per query.
        gt (Mapping[int, Iterable[int]]): Positive map ids per query.
        k (int): Cut-off, >= 1.

    Returns:
        float in [0, 1]
    """
    if int(k) < 1:
        raise InputError(f"k must be >= 1, got {k}")
    scored = _scored_queries(ranked, gt)
    hits = sum(any(c in positives for c in ids[:k]) for ids, positives in scored)
    return hits / len(scored)


def mrr_at_5(ranked, gt):
    """Mean of (6 - rank) / 5 over queries with positives; 0 when none in the top 5."""
    scored = _scored_queries(ranked, gt)
    total = 0.0
    for ids, positives in scored:
        rank = first_positive_rank(ids[:5], positives)
        if rank is not None:
            total += (6 - rank) / 5.0
    return total / len(scored)


def chance_recall_at_k(gt, n_maps, k):
    """
    Expected R@k of a uniformly random ranking of `n_maps` map images.

    A query with p positives misses them all with hypergeometric probability
    C(n - p, k) / C(n, k). Queries without positives are left out, as in
    `recall_at_k`.
    """
    if int(k) < 1:
        raise InputError(f"k must be >= 1, got {k}")
    counts = [len(set(positives)) for positives in gt.values() if positives]
    if not counts:
        raise InputError("No query has a positive; the metric is undefined")
    if max(counts) > n_maps:
        raise InputError(f"A query lists {max(counts)} positives but there are only {n_maps} map images")
    draws = min(int(k), int(n_maps))
    miss = hypergeom(int(n_maps), np.asarray(counts), draws).pmf(0)
    return float(np.mean(1.0 - miss))


def normalized_histogram(values, bins=DEFAULT_BINS, smoothing=DEFAULT_SMOOTHING, upper=1.0):
    """Histogram of values on [0, upper], δ-smoothed and normalized to sum 1."""
    counts = _histogram_counts(values, bins, upper)
    hist = counts / max(len(values), 1) + smoothing
    return hist / hist.sum()


def _histogram_counts(values, bins, upper):
    if int(bins) < 2:
        raise InputError(f"bins must be >= 2, got {bins}")
    counts, _ = np.histogram(np.clip(values, 0.0, upper), bins=int(bins), range=(0.0, upper))
    return counts


def kl_divergence_histograms(p, q, smoothing=DEFAULT_SMOOTHING):
    """
    KL(p || q) in nats for two histograms over the same bins.

    Both inputs are δ-smoothed and renormalized first.
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape or p.ndim != 1:
        raise InputError(f"Histograms must be vectors of equal length, got {p.shape} and {q.shape}")
    if np.any(p < 0) or np.any(q < 0):
        raise InputError("Histograms must be non-negative")
    if p.sum() <= 0 or q.sum() <= 0:
        raise InputError("Histograms must not be empty")
    p = p / p.sum() + smoothing
    q = q / q.sum() + smoothing
    p, q = p / p.sum(), q / q.sum()
    return max(0.0, float(np.sum(rel_entr(p, q))))


def kl_divergence_distance_vs_similarity(query_descs, map_descs, psi, bins=DEFAULT_BINS,
                                         smoothing=DEFAULT_SMOOTHING, max_pairs=DEFAULT_MAX_PAIRS, seed=0):
    """
    Divergence between descriptor distances and the similarity-derived target.

    P is the histogram of d(query, map) and Q the histogram of 1 - ψ over the
    full query×map cross product, subsampled to `max_pairs` pairs with `seed`
    when larger. Both use `bins` equal-width bins on [0, 2], the range of
    distances between unit vectors, so Q has no mass above 1. Distances equal
    to the regression target 1 - ψ give a divergence at the smoothing floor;
    distances pushed beyond 1 fall where Q is empty and are penalized.

    Parameters:
        query_descs (ndarray): (n_q, d) unit-norm descriptors.
        map_descs (ndarray): (n_m, d) unit-norm descriptors.
        psi (ndarray): (n_q, n_m) graded or binary similarities.
        bins (int): Number of bins, >= 2.
        smoothing (float): Additive δ before renormalization.
        max_pairs (int): Pair budget.
        seed (int): Subsampling seed.

    Returns:
        float: KL(P || Q) in nats, >= 0.
    """
    query_descs = np.atleast_2d(np.asarray(query_descs, dtype=float))
    map_descs = np.atleast_2d(np.asarray(map_descs, dtype=float))
    psi = np.asarray(psi, dtype=float)
    n_q, n_m = len(query_descs), len(map_descs)
    if n_q == 0 or n_m == 0:
        raise InputError("KL divergence needs at least one query-map pair")
    if psi.shape != (n_q, n_m):
        raise InputError(f"psi must have shape {(n_q, n_m)}, got {psi.shape}")

    distances = cdist(query_descs, map_descs, metric="euclidean")
    target = 1.0 - psi
    total = n_q * n_m
    if total > max_pairs:
        pick = np.sort(make_rng(seed).choice(total, size=int(max_pairs), replace=False))
        d_values, t_values = distances.ravel()[pick], target.ravel()[pick]
        logging.debug(f"KL divergence on {max_pairs} of {total} pairs")
    else:
        d_values, t_values = distances.ravel(), target.ravel()

    p = _histogram_counts(d_values, bins, DISTANCE_RANGE)
    q = _histogram_counts(t_values, bins, DISTANCE_RANGE)
    return kl_divergence_histograms(p, q, smoothing)


def feature_covariance(descriptors):
    """
    Sample covariance of descriptors (divisor n - 1).

    Returns:
        tuple: (d × d symmetric matrix, mean absolute off-diagonal entry)
    """
    X = np.atleast_2d(np.asarray(descriptors, dtype=float))
    n, d = X.shape
    if n < 2:
        raise InputError(f"Covariance needs at least 2 descriptors, got {n}")
    cov = np.atleast_2d(np.cov(X, rowvar=False))
    cov = 0.5 * (cov + cov.T)
    if d == 1:
        return cov, 0.0
    off = cov[~np.eye(d, dtype=bool)]
    return cov, float(np.mean(np.abs(off)))
