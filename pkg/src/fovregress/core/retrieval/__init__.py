from . import descriptor_qc
from . import retrieval
from . import whitening

__all__ = ["descriptor_qc", "retrieval", "whitening"]
