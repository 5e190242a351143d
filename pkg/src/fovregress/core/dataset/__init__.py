from . import dataset
from . import synthetic

__all__ = ["dataset", "synthetic"]
