"""
retrieval.py

Exhaustive nearest-neighbour search over unit-norm descriptors.

A DescriptorIndex fixes its id order at build time. Searching computes the
Euclidean distance from a query to every stored row and returns the k closest,
ascending by distance with ties broken by ascending id.
"""

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist

from fovregress.core.retrieval.descriptor_qc import DescriptorQC
from fovregress.utils.exceptions import InputError


@dataclass(frozen=True)
class BuildReport:
    """What `build_index` had to fix or noticed."""

    renormalized: tuple = ()
    duplicates: tuple = ()


@dataclass(frozen=True)
class DescriptorIndex:
    """
    Immutable store of unit-norm descriptors.

    Attributes:
        ids (tuple[int]): Row ids in build order.
        matrix (ndarray): (n, d) read-only descriptor matrix.
        report (BuildReport): Build-time QC findings.
    """

    ids: tuple
    matrix: np.ndarray = field(repr=False)
    report: BuildReport = field(default_factory=BuildReport)

    def __len__(self):
        return len(self.ids)

    @property
    def dim(self):
        return self.matrix.shape[1]


@dataclass(frozen=True)
class RankedList:
    """
    Search result of one query.

    Attributes:
        query_id (int | None): Id of the query, when known.
        ids (tuple[int]): Candidate ids, nearest first.
        distances (ndarray): Matching Euclidean distances, non-decreasing.
        truncated (bool): True when fewer than the requested k were available.
    """

    query_id: object
    ids: tuple
    distances: np.ndarray = field(repr=False)
    truncated: bool = False

    def __len__(self):
        return len(self.ids)


def build_index(descriptors, ids, qc=None):
    """
    Build a DescriptorIndex.

    Rows more than 1e-6 away from unit norm are re-normalized and listed in the
    build report.

    Parameters:
        descriptors (ndarray): (n, d) descriptors, n >= 1.
        ids (Sequence[int]): One unique id per row.
        qc (DescriptorQC | None): Checker to use; default thresholds otherwise.

    Returns:
        DescriptorIndex

    Raises:
        InputError: duplicate ids, shape mismatch, non-finite or zero rows.
    """
    matrix = np.array(descriptors, dtype=float)
    if matrix.ndim == 1:
        matrix = matrix[None, :]
    ids = tuple(int(i) for i in ids)
    if matrix.ndim != 2 or len(matrix) == 0:
        raise InputError(f"An index needs an (n, d) matrix with n >= 1, got shape {matrix.shape}")
    if len(ids) != len(matrix):
        raise InputError(f"{len(ids)} ids for {len(matrix)} descriptors")
    if len(set(ids)) != len(ids):
        seen, dup = set(), None
        for i in ids:
            if i in seen:
                dup = i
                break
            seen.add(i)
        raise InputError(f"Duplicate descriptor id {dup}")

    findings = (qc or DescriptorQC()).run_all_checks(matrix)
    if findings["non_finite"]:
        raise InputError(f"Non-finite descriptors for ids {[ids[k] for k in findings['non_finite'][:10]]}")
    if findings["zero"]:
        raise InputError(f"Zero descriptors cannot be normalized: ids {[ids[k] for k in findings['zero'][:10]]}")

    renormalized = findings["non_unit"]
    if renormalized:
        matrix[renormalized] /= np.linalg.norm(matrix[renormalized], axis=1, keepdims=True)
        logging.warning(f"Re-normalized {len(renormalized)} descriptors on ingest")
    matrix.setflags(write=False)
    report = BuildReport(
        renormalized=tuple(ids[k] for k in renormalized),
        duplicates=tuple(ids[k] for k in findings["duplicates"]),
    )
    return DescriptorIndex(ids, matrix, report)


def _rank(index, ids_arr, distances, k, query_id):
    order = np.lexsort((ids_arr, distances))[:k]
    return RankedList(
        query_id=query_id,
        ids=tuple(int(i) for i in ids_arr[order]),
        distances=distances[order],
        truncated=k > len(index),
    )


def search_many(index, queries, k, query_ids=None):
    """
    Exact k-NN for a batch of queries.

    Parameters:
        index (DescriptorIndex)
        queries (ndarray): (m, d) query descriptors.
        k (int): Candidates per query (>= 1). Larger than the index returns the
            full ranking with `truncated` set.
        query_ids (Sequence | None): Ids attached to the results.

    Returns:
        list[RankedList]
    """
    if int(k) < 1:
        raise InputError(f"k must be >= 1, got {k}")
    queries = np.atleast_2d(np.asarray(queries, dtype=float))
    if queries.shape[1] != index.dim:
        raise InputError(f"Query dimension {queries.shape[1]} does not match index dimension {index.dim}")
    if query_ids is None:
        query_ids = [None] * len(queries)
    elif len(query_ids) != len(queries):
        raise InputError(f"{len(query_ids)} query ids for {len(queries)} queries")
    if k > len(index):
        logging.debug(f"k={k} exceeds index size {len(index)}; returning full rankings")

    ids_arr = np.asarray(index.ids, dtype=np.int64)
    distances = cdist(queries, index.matrix, metric="euclidean")
    return [_rank(index, ids_arr, distances[r], int(k), qid) for r, qid in enumerate(query_ids)]


def search(index, query_descriptor, k, query_id=None):
    """Exact k nearest neighbours of one query; see `search_many`."""
    q = np.asarray(query_descriptor, dtype=float)
    if q.ndim != 1:
        raise InputError(f"A single query must be a vector, got shape {q.shape}")
    return search_many(index, q[None, :], k, [query_id])[0]
