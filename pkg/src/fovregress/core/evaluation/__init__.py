from . import metrics
from . import evaluate

__all__ = ["metrics", "evaluate"]
