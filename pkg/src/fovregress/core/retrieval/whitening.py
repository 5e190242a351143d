"""
whitening.py

PCA whitening with optional dimensionality reduction.

Fitting centers the descriptors, eigendecomposes their sample covariance
(divisor n - 1) and keeps the r leading components. Applying it maps

    y = diag(1 / sqrt(λ + ε)) · U_r (x - mean)

and re-normalizes y to unit length so that distances stay in [0, 2].
"""

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigh

from fovregress.utils.exceptions import InputError

DEFAULT_EPS = 1e-8
_ZERO_NORM = 1e-12


@dataclass(frozen=True)
class PcaWhitening:
    """
    Fitted whitening transform.

    Attributes:
        mean (ndarray): (d,) mean of the fit set.
        eigenvalues (ndarray): (r,) retained eigenvalues, descending, >= 0.
        components (ndarray): (r, d) orthonormal principal directions (rows).
        r (int): Output dimension.
        eps (float): Eigenvalue regularizer.
        whiten (bool): Scale components to unit variance; plain PCA projection otherwise.
    """

    mean: np.ndarray = field(repr=False)
    eigenvalues: np.ndarray = field(repr=False)
    components: np.ndarray = field(repr=False)
    r: int
    eps: float = DEFAULT_EPS
    whiten: bool = True

    def __post_init__(self):
        if self.components.shape != (self.r, self.mean.shape[0]) or self.eigenvalues.shape != (self.r,):
            raise InputError(
                f"Inconsistent whitening shapes: mean {self.mean.shape}, eigenvalues "
                f"{self.eigenvalues.shape}, components {self.components.shape}, r={self.r}"
            )
        if self.eps < 0 or np.any(self.eigenvalues < 0):
            raise InputError("Whitening eigenvalues and eps must be non-negative")
        if self.whiten and np.any(self.eigenvalues + self.eps <= 0):
            raise InputError("Whitening has a zero eigenvalue with eps = 0; use eps > 0 or a smaller r")

    @property
    def dim_in(self):
        return self.mean.shape[0]

    @property
    def scale(self):
        if not self.whiten:
            return np.ones(self.r)
        return 1.0 / np.sqrt(self.eigenvalues + self.eps)

    @classmethod
    def identity(cls, d):
        return cls(np.zeros(d), np.ones(d), np.eye(d), d, 0.0)


def fit_pca_whitening(descriptors, r=None, eps=DEFAULT_EPS, whiten=True):
    """
    Fit a PCA whitening on a descriptor matrix.

    Parameters:
        descriptors (ndarray): (n, d) fit set, n >= 2.
        r (int | None): Output dimension, 1 <= r <= min(n - 1, d); the maximum when None.
        eps (float): Regularizer added to every eigenvalue.
        whiten (bool): False keeps the PCA rotation and reduction without rescaling.

    Returns:
        PcaWhitening

    Raises:
        InputError: too few rows or r out of range.
    """
    X = np.atleast_2d(np.asarray(descriptors, dtype=float))
    n, d = X.shape
    if n < 2:
        raise InputError(f"PCA whitening needs at least 2 descriptors, got {n}")
    r_max = min(n - 1, d)
    r = r_max if r is None else int(r)
    if not (1 <= r <= r_max):
        raise InputError(f"Output dimension r={r} must lie in [1, {r_max}] for {n} descriptors of dim {d}")
    if eps < 0:
        raise InputError(f"eps must be >= 0, got {eps}")

    mean = X.mean(axis=0)
    cov = np.cov(X, rowvar=False)
    cov = np.atleast_2d(0.5 * (cov + cov.T))
    values, vectors = eigh(cov)
    order = np.argsort(values)[::-1][:r]
    values = np.clip(values[order], 0.0, None)
    components = vectors[:, order].T

    # Fix the sign of each direction: largest-magnitude entry positive.
    pivots = np.argmax(np.abs(components), axis=1)
    signs = np.sign(components[np.arange(r), pivots])
    signs[signs == 0] = 1.0
    components = components * signs[:, None]

    logging.info(f"Fitted PCA {'whitening' if whiten else 'projection'} {d} -> {r} on {n} descriptors "
                 f"(retained variance {values.sum() / max(np.trace(cov), 1e-300):.3f})")
    return PcaWhitening(mean, values, components, r, float(eps), bool(whiten))


def project(whitening, descriptors):
    """Whitened coordinates before re-normalization, (m, r) or (r,)."""
    x = np.asarray(descriptors, dtype=float)
    if x.shape[-1] != whitening.dim_in:
        raise InputError(f"Descriptor dimension {x.shape[-1]} does not match whitening input {whitening.dim_in}")
    return ((x - whitening.mean) @ whitening.components.T) * whitening.scale


def apply_whitening(whitening, descriptors, return_flags=False):
    """
    Whiten and re-normalize one descriptor or a matrix of them.

    A descriptor that lands on the zero vector (e.g. one equal to the fit mean)
    cannot be normalized; it is replaced by the first basis vector e1 and
    flagged.

    Parameters:
        whitening (PcaWhitening)
        descriptors (ndarray): (d,) or (m, d).
        return_flags (bool): Also return the boolean degenerate-row mask.

    Returns:
        ndarray | tuple[ndarray, ndarray]
    """
    y = project(whitening, descriptors)
    single = y.ndim == 1
    y = np.atleast_2d(y)
    norms = np.linalg.norm(y, axis=1)
    degenerate = norms < _ZERO_NORM
    out = y / np.where(degenerate, 1.0, norms)[:, None]
    if np.any(degenerate):
        out[degenerate] = 0.0
        out[degenerate, 0] = 1.0
        logging.warning(f"{int(degenerate.sum())} whitened descriptors were zero; replaced by e1")
    if single:
        out, degenerate = out[0], degenerate[0]
    return (out, degenerate) if return_flags else out
