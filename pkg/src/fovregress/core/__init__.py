from . import geometry     # frustums, fov_overlap, is_positive
from . import dataset      # Dataset, build_pairs, synthetic worlds
from . import training     # encoder, losses, sampler, trainer
from . import retrieval    # index, search, whitening
from . import evaluation   # metrics, evaluate
from . import experiments  # loss comparison, PCA sweep

__all__ = []  # rely on subpackage __all__
