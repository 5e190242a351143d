"""
sampler.py

ψ-stratified batch composition without hard-pair mining.

Pairs are split into three buckets by their graded similarity:

    high  ψ ∈ (0.5, 1]
    mid   ψ ∈ (0, 0.5]
    zero  ψ = 0

and every batch of size B holds exactly

    n_high = round_half_up(f_high · B)
    n_mid  = round_half_up(f_mid · B)
    n_zero = B - n_high - n_mid

pairs (50/25/25 by default). Each bucket is walked through a seeded
permutation; when a bucket runs out it is reshuffled with the next epoch's
permutation and the walk continues. Batch content is a pure function of
(buckets, seed, cursor), never of any model.
"""

import logging
import math
from functools import lru_cache
from dataclasses import dataclass

from fovregress.utils.exceptions import InputError
from fovregress.utils.utils import make_rng

BUCKETS = ("high", "mid", "zero")


def round_half_up(x):
    return int(math.floor(x + 0.5))


@dataclass(frozen=True)
class BatchSpec:
    """
    Batch size and bucket fractions.

    Attributes:
        batch_size (int): Pairs per batch, B >= 1 (B >= 4 recommended).
        f_high, f_mid, f_zero (float): Bucket fractions, summing to 1.
    """

    batch_size: int = 16
    f_high: float = 0.5
    f_mid: float = 0.25
    f_zero: float = 0.25

    def __post_init__(self):
        if int(self.batch_size) < 1:
            raise InputError(f"batch_size must be >= 1, got {self.batch_size}")
        fractions = (self.f_high, self.f_mid, self.f_zero)
        if min(fractions) < 0 or not math.isclose(sum(fractions), 1.0, abs_tol=1e-9):
            raise InputError(f"Bucket fractions must be non-negative and sum to 1, got {fractions}")
        if self.counts()[2] < 0:
            raise InputError(f"Fractions {fractions} overflow a batch of {self.batch_size}")
        if self.batch_size < 4:
            logging.warning(f"Batch size {self.batch_size} < 4 cannot hold every bucket")

    def counts(self):
        """(n_high, n_mid, n_zero) for one batch."""
        n_high = round_half_up(self.f_high * self.batch_size)
        n_mid = round_half_up(self.f_mid * self.batch_size)
        return n_high, n_mid, self.batch_size - n_high - n_mid


@dataclass(frozen=True)
class Buckets:
    """Pairs grouped by ψ range; each field is a tuple of SimilarityPair."""

    high: tuple
    mid: tuple
    zero: tuple

    def __getitem__(self, k):
        return (self.high, self.mid, self.zero)[k]

    def sizes(self):
        return len(self.high), len(self.mid), len(self.zero)


@dataclass(frozen=True)
class CursorState:
    """
    Position of the sampler in each bucket.

    Attributes:
        epochs (tuple[int, int, int]): Reshuffle count per bucket.
        positions (tuple[int, int, int]): Next index in the current permutation.
    """

    epochs: tuple = (0, 0, 0)
    positions: tuple = (0, 0, 0)


def stratify(pairs):
    """
    Split pairs into (high, mid, zero) buckets by ψ.

    Parameters:
        pairs (Iterable[SimilarityPair])

    Returns:
        Buckets
    """
    high, mid, zero = [], [], []
    for p in pairs:
        if p.psi > 0.5:
            high.append(p)
        elif p.psi > 0.0:
            mid.append(p)
        else:
            zero.append(p)
    return Buckets(tuple(high), tuple(mid), tuple(zero))


@lru_cache(maxsize=32)
def _permutation(seed, bucket, epoch, size):
    return make_rng(seed, bucket, epoch).permutation(size)


def compose_batch(buckets, spec, seed, cursor_state=None):
    """
    Draw the next batch.

    Parameters:
        buckets (Buckets): Output of `stratify`.
        spec (BatchSpec): Batch size and fractions.
        seed (int): Sampler seed.
        cursor_state (CursorState | None): Current position; None starts fresh.

    Returns:
        tuple: (batch as a tuple of SimilarityPair ordered high, mid, zero;
        updated CursorState)

    Raises:
        InputError: if a bucket that must contribute pairs is empty.
    """
    cursor_state = cursor_state or CursorState()
    epochs, positions = list(cursor_state.epochs), list(cursor_state.positions)
    batch = []
    for b, (name, count) in enumerate(zip(BUCKETS, spec.counts())):
        if count == 0:
            continue
        bucket = buckets[b]
        if not bucket:
            raise InputError(f"Bucket '{name}' is empty but the batch needs {count} pairs from it")
        perm = _permutation(seed, b, epochs[b], len(bucket))
        for _ in range(count):
            if positions[b] == len(bucket):
                epochs[b] += 1
                positions[b] = 0
                perm = _permutation(seed, b, epochs[b], len(bucket))
            batch.append(bucket[perm[positions[b]]])
            positions[b] += 1
    return tuple(batch), CursorState(tuple(epochs), tuple(positions))


class BatchSampler:
    """
    Stateful convenience wrapper around `compose_batch` for the training loop.

    Parameters:
        pairs (Iterable[SimilarityPair]): Training pairs.
        spec (BatchSpec): Batch composition.
        seed (int): Sampler seed.
    """

    def __init__(self, pairs, spec, seed):
        self.buckets = stratify(pairs)
        self.spec = spec
        self.seed = seed
        self.state = CursorState()
        logging.info(f"Sampler buckets (high, mid, zero): {self.buckets.sizes()}, per batch {spec.counts()}")

    def next_batch(self):
        batch, self.state = compose_batch(self.buckets, self.spec, self.seed, self.state)
        return batch
