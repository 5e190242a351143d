"""fovr_io.py
Reads and writes the FOVR binary vector format used for both observations and
descriptors. All fields are little-endian:

    magic   4 bytes  b"FOVR"
    version u32      1
    count   u32      number of records
    dim     u32      vector dimension
    count × (id u32, dim × float32)

Key Functions:
- write_fovr(path, ids, vectors): writes a vector file.
- read_fovr(path): returns (ids, float64 matrix).
- attach_observations(ds, path): returns a copy of a Dataset with observations.
"""

import logging
from pathlib import Path

import numpy as np

from fovregress.utils.exceptions import InputError
from fovregress.utils.utils import check_writable

MAGIC = b"FOVR"
VERSION = 1
HEADER_DTYPE = np.dtype([("magic", "S4"), ("version", "<u4"), ("count", "<u4"), ("dim", "<u4")])


def record_dtype(dim):
    return np.dtype([("id", "<u4"), ("values", "<f4", (int(dim),))])


def write_fovr(path, ids, vectors, force=True):
    """
    Write vectors with their ids.

    Args:
        path (str | Path): Output file.
        ids (Sequence[int]): Non-negative ids, one per row.
        vectors (ndarray): (n, dim) values, stored as float32.
        force (bool): Overwrite an existing file.
    """
    vectors = np.atleast_2d(np.asarray(vectors, dtype=float))
    ids = np.asarray(ids, dtype=np.int64)
    if len(ids) != len(vectors):
        raise InputError(f"{len(ids)} ids for {len(vectors)} vectors")
    if len(ids) and (ids.min() < 0 or ids.max() > np.iinfo(np.uint32).max):
        raise InputError("FOVR ids must fit in an unsigned 32-bit integer")
    if not np.all(np.isfinite(vectors)):
        raise InputError("FOVR vectors must be finite")
    check_writable(path, force)

    dim = vectors.shape[1]
    header = np.array([(MAGIC, VERSION, len(ids), dim)], dtype=HEADER_DTYPE)
    records = np.zeros(len(ids), dtype=record_dtype(dim))
    records["id"] = ids
    records["values"] = vectors.astype(np.float32)

    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as f:
        header.tofile(f)
        records.tofile(f)
    logging.info(f"Wrote {len(ids)} vectors of dim {dim} to {path}")


def read_fovr(path):
    """
    Read a FOVR file.

    Returns:
        tuple: (list[int] ids, ndarray (n, dim) float64)

    Raises:
        InputError: missing file, bad magic/version, or a size that does not
            match the header.
    """
    path = Path(path)
    if not path.exists():
        raise InputError(f"File not found: {path}")
    raw = path.read_bytes()
    if len(raw) < HEADER_DTYPE.itemsize:
        raise InputError(f"{path}: file too short for a FOVR header")
    header = np.frombuffer(raw, dtype=HEADER_DTYPE, count=1)[0]
    if bytes(header["magic"]) != MAGIC:
        raise InputError(f"{path}: not a FOVR file (magic {bytes(header['magic'])!r})")
    if int(header["version"]) != VERSION:
        raise InputError(f"{path}: unsupported FOVR version {int(header['version'])}")

    count, dim = int(header["count"]), int(header["dim"])
    rec = record_dtype(dim)
    expected = HEADER_DTYPE.itemsize + count * rec.itemsize
    if len(raw) != expected:
        raise InputError(f"{path}: expected {expected} bytes for {count} x {dim} vectors, found {len(raw)}")
    if count == 0:
        return [], np.zeros((0, dim))
    records = np.frombuffer(raw, dtype=rec, count=count, offset=HEADER_DTYPE.itemsize)
    ids = [int(i) for i in records["id"]]
    vectors = records["values"].astype(np.float64).reshape(count, dim)
    return ids, vectors


def attach_observations(ds, path):
    """Return a copy of `ds` with the observations stored in a FOVR file."""
    ids, vectors = read_fovr(path)
    if len(set(ids)) != len(ids):
        raise InputError(f"{path}: duplicate ids")
    extra = sorted(set(ids) - {im.id for im in ds.images})
    if extra:
        raise InputError(f"{path}: observations for unknown image ids {extra[:10]}")
    return ds.with_observations(dict(zip(ids, vectors)))
