"""
I/O for poses, pairs, ground truth, FOVR vector files and model artifacts.
"""
from . import pose_io
from . import fovr_io
from . import model_io

__all__ = ["pose_io", "fovr_io", "model_io"]
