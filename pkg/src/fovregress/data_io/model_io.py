"""
model_io.py

JSON persistence for trained artifacts:

- checkpoint.json: encoder dims, activation, seed, iteration and every weight
  and bias as nested JSON number arrays. Doubles are written with Python's
  shortest round-trip repr, so a reload is bit-identical.
- whitening.json: mean, eigenvalues, components (row-major), r and ε of a
  fitted PCA whitening.
- run.json: manifest of a training run (config echo and snapshot list).
"""

import logging
from pathlib import Path

import numpy as np

from fovregress.utils.exceptions import InputError
from fovregress.utils.utils import read_json, write_json

CHECKPOINT_FORMAT = "fovregress-checkpoint"
WHITENING_FORMAT = "fovregress-whitening"


def checkpoint_name(iteration):
    return f"ckpt_{int(iteration):08d}.json"


def model_to_dict(model):
    return {
        "format": CHECKPOINT_FORMAT,
        "dims": list(model.dims),
        "activation": model.activation,
        "seed": int(model.seed),
        "iteration": int(model.iteration),
        "weights": [w.tolist() for w in model.weights],
        "biases": [b.tolist() for b in model.biases],
    }


def model_from_dict(doc, source="checkpoint"):
    from fovregress.core.training.encoder import EncoderModel

    try:
        if doc.get("format") != CHECKPOINT_FORMAT:
            raise InputError(f"{source}: not a checkpoint (format '{doc.get('format')}')")
        return EncoderModel(
            dims=doc["dims"],
            activation=doc["activation"],
            seed=int(doc["seed"]),
            weights=[np.array(w, dtype=float) for w in doc["weights"]],
            biases=[np.array(b, dtype=float) for b in doc["biases"]],
            iteration=int(doc["iteration"]),
        )
    except (KeyError, TypeError, AttributeError) as e:
        raise InputError(f"{source}: malformed checkpoint ({e})") from e


def save_checkpoint(model, path, force=True):
    """Write an EncoderModel to a checkpoint JSON file."""
    write_json(path, model_to_dict(model), force=force)
    logging.debug(f"Checkpoint at iteration {model.iteration} saved to {path}")


def load_checkpoint(path):
    """Read an EncoderModel back from `save_checkpoint` output."""
    return model_from_dict(read_json(path), source=str(path))


def save_whitening(whitening, path, force=True):
    doc = {
        "format": WHITENING_FORMAT,
        "mean": whitening.mean.tolist(),
        "eigenvalues": whitening.eigenvalues.tolist(),
        "components": whitening.components.tolist(),
        "r": int(whitening.r),
        "eps": float(whitening.eps),
        "whiten": bool(whitening.whiten),
    }
    write_json(path, doc, force=force)


def load_whitening(path):
    from fovregress.core.retrieval.whitening import PcaWhitening

    doc = read_json(path)
    if doc.get("format") != WHITENING_FORMAT:
        raise InputError(f"{path}: not a whitening file")
    try:
        return PcaWhitening(
            mean=np.array(doc["mean"], dtype=float),
            eigenvalues=np.array(doc["eigenvalues"], dtype=float),
            components=np.array(doc["components"], dtype=float),
            r=int(doc["r"]),
            eps=float(doc["eps"]),
            whiten=bool(doc.get("whiten", True)),
        )
    except (KeyError, TypeError) as e:
        raise InputError(f"{path}: malformed whitening file ({e})") from e


def write_run_manifest(run_dir, manifest, force=True):
    write_json(Path(run_dir) / "run.json", manifest, force=force)


def read_run_manifest(run_dir):
    path = Path(run_dir) / "run.json"
    doc = read_json(path)
    if "snapshots" not in doc:
        raise InputError(f"{path}: run manifest lists no snapshots")
    return doc
