"""
pose_io.py

Text formats of a place-recognition dataset:

- poses.csv: header `id,x,y,heading_deg,fov_deg,range_m,role`, one image per row.
- pairs.jsonl: one `{"i": .., "j": .., "psi": ..}` object per line.
- gt.json: query id (as string) -> sorted list of positive map ids.

Parse errors name the file and line (the header is line 1).
"""

import json
import logging
import math
from pathlib import Path

import pandas as pd

from fovregress.core.dataset.dataset import Dataset, PlaceImage, SimilarityPair
from fovregress.core.geometry.geometry import CameraPose
from fovregress.utils.exceptions import InputError
from fovregress.utils.utils import check_writable, read_json, write_json

POSE_COLUMNS = ["id", "x", "y", "heading_deg", "fov_deg", "range_m", "role"]


def _parse_pose_row(row, line):
    try:
        image_id = int(row["id"])
        x, y = float(row["x"]), float(row["y"])
        heading_deg, fov_deg, range_m = float(row["heading_deg"]), float(row["fov_deg"]), float(row["range_m"])
    except ValueError as e:
        raise InputError(f"line {line}: {e}") from None
    if not all(math.isfinite(v) for v in (x, y, heading_deg, fov_deg, range_m)):
        raise InputError(f"line {line}: non-finite value")
    role = row["role"].strip()
    try:
        pose = CameraPose.from_degrees(image_id, x, y, heading_deg, fov_deg, range_m)
        return PlaceImage(image_id, pose, role)
    except InputError as e:
        raise InputError(f"line {line}: {e}") from None


def read_poses_csv(path):
    """
    Load poses.csv into a Dataset (no observations).

    Parameters:
        path (str | Path): CSV file.

    Returns:
        Dataset

    Raises:
        InputError: missing file, wrong header, malformed row (with its line
            number) or duplicate id.
    """
    path = Path(path)
    if not path.exists():
        raise InputError(f"File not found: {path}")
    try:
        df = pd.read_csv(path, dtype=str, keep_default_na=False)
    except (pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise InputError(f"{path}: {e}") from e
    if list(df.columns) != POSE_COLUMNS:
        raise InputError(f"{path}: header must be '{','.join(POSE_COLUMNS)}', got '{','.join(df.columns)}'")

    images, seen = [], set()
    for k, row in enumerate(df.to_dict("records")):
        try:
            image = _parse_pose_row(row, k + 2)
        except InputError as e:
            raise InputError(f"{path}: {e}") from None
        if image.id in seen:
            raise InputError(f"{path}: line {k + 2}: duplicate id {image.id}")
        seen.add(image.id)
        images.append(image)
    ds = Dataset(images)
    logging.info(f"Loaded {len(ds.map_ids)} map / {len(ds.query_ids)} query poses from {path}")
    return ds


def write_poses_csv(ds, path, force=True):
    """Write the poses of a Dataset; angles in degrees, floats at full precision."""
    check_writable(path, force)
    rows = [
        [im.id, im.pose.x, im.pose.y, math.degrees(im.pose.heading), math.degrees(im.pose.fov_angle),
         im.pose.range, im.role]
        for im in ds.images
    ]
    df = pd.DataFrame(rows, columns=POSE_COLUMNS)
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    df.to_csv(path, index=False, lineterminator="\n")
    logging.debug(f"Wrote {len(df)} poses to {path}")


def write_pairs_jsonl(pairs, path, force=True):
    check_writable(path, force)
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for p in pairs:
            f.write(json.dumps({"i": p.i, "j": p.j, "psi": p.psi}, sort_keys=True) + "\n")
    logging.debug(f"Wrote {len(pairs)} pairs to {path}")


def read_pairs_jsonl(path):
    """
    Read ψ-labelled pairs.

    Returns:
        list[SimilarityPair]
    """
    path = Path(path)
    if not path.exists():
        raise InputError(f"File not found: {path}")
    pairs = []
    with open(path, "r", encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                doc = json.loads(line)
                pairs.append(SimilarityPair(int(doc["i"]), int(doc["j"]), float(doc["psi"])))
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
                raise InputError(f"{path}: line {line_no}: {e}") from None
    return pairs


def write_ground_truth(gt, path, force=True):
    """Write a query -> positives relation with sorted keys and lists."""
    doc = {str(q): sorted(int(m) for m in gt[q]) for q in sorted(gt)}
    write_json(path, doc, force=force)


def read_ground_truth(path):
    """
    Returns:
        dict[int, frozenset[int]]
    """
    doc = read_json(path)
    if not isinstance(doc, dict):
        raise InputError(f"{path}: ground truth must be a JSON object")
    try:
        return {int(q): frozenset(int(m) for m in ms) for q, ms in doc.items()}
    except (TypeError, ValueError) as e:
        raise InputError(f"{path}: malformed ground truth ({e})") from e
