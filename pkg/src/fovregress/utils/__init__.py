from . import exceptions
from . import utils
from . import config

__all__ = ["exceptions", "utils", "config"]
