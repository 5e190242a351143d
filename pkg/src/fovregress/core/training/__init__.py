from . import encoder
from . import losses
from . import sampler
from . import trainer

__all__ = ["encoder", "losses", "sampler", "trainer"]
