"""
descriptor_qc.py

Quality checks run on descriptor matrices before they are indexed.
"""

import logging

import numpy as np


class DescriptorQC:
    """
    DescriptorQC performs quality control checks on descriptor matrices.
    It can detect:
        - Non-finite rows (NaN or inf entries)
        - Rows that are not unit-norm within a tolerance
        - Exact duplicate rows

    Methods:
        - detect_non_finite
        - detect_non_unit
        - detect_duplicates
        - run_all_checks
    """

    def __init__(self, unit_tolerance=1e-6, zero_norm=1e-12):
        """
        Initialize the QC thresholds.

        Args:
            unit_tolerance (float): Allowed deviation of a row norm from 1.
            zero_norm (float): Norm below which a row counts as zero.
        """
        self.unit_tolerance = unit_tolerance
        self.zero_norm = zero_norm

    def detect_non_finite(self, data):
        """
        Args:
            data (ndarray): (n, d) descriptors.

        Returns:
            List[int]: Row indices holding NaN or inf.
        """
        rows = np.nonzero(~np.all(np.isfinite(data), axis=1))[0].tolist()
        if rows:
            logging.warning(f"Detected {len(rows)} non-finite descriptors.")
        return rows

    def detect_non_unit(self, data):
        """Row indices whose L2 norm differs from 1 by more than the tolerance."""
        with np.errstate(invalid="ignore"):
            norms = np.linalg.norm(data, axis=1)
        rows = np.nonzero(np.abs(norms - 1.0) > self.unit_tolerance)[0].tolist()
        logging.debug(f"Detected {len(rows)} descriptors off the unit sphere.")
        return rows

    def detect_zero(self, data):
        norms = np.linalg.norm(data, axis=1)
        return np.nonzero(norms < self.zero_norm)[0].tolist()

    def detect_duplicates(self, data):
        """
        Identify rows that repeat an earlier row exactly.

        Returns:
            List[int]: Indices of every row after the first occurrence.
        """
        if len(data) == 0:
            return []
        _, first, inverse = np.unique(data, axis=0, return_index=True, return_inverse=True)
        inverse = np.asarray(inverse).ravel()
        rows = [k for k in range(len(data)) if first[inverse[k]] != k]
        if rows:
            logging.info(f"Detected {len(rows)} duplicated descriptors.")
        return rows

    def run_all_checks(self, data):
        """
        Run all QC checks and return a dictionary of results.

        Args:
            data (ndarray): (n, d) descriptors.

        Returns:
            dict: {'non_finite': [...], 'non_unit': [...], 'zero': [...], 'duplicates': [...]}
        """
        data = np.atleast_2d(np.asarray(data, dtype=float))
        non_finite = self.detect_non_finite(data)
        if non_finite:
            # The remaining checks are meaningless on NaN rows.
            return {'non_finite': non_finite, 'non_unit': [], 'zero': [], 'duplicates': []}
        return {
            'non_finite': non_finite,
            'non_unit': self.detect_non_unit(data),
            'zero': self.detect_zero(data),
            'duplicates': self.detect_duplicates(data),
        }
